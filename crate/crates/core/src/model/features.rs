//! Per-feature embedding channels appended to the token embedding.

use crate::corpus::{FeatureDecl, FeatureVector};
use crate::numerics::{Exec, ParamId, ParamSet, RngState};

/// The language-bit feature is two-valued and gets a narrow slot; every
/// other categorical feature gets the standard width.
pub const LANG_FEATURE_WIDTH: usize = 2;
pub const FEATURE_WIDTH: usize = 8;

#[derive(Clone, Debug)]
pub struct FeatureChannel {
    pub name: String,
    pub cardinality: usize,
    pub width: usize,
    pub table: ParamId,
}

impl FeatureChannel {
    pub fn width_for(name: &str) -> usize {
        if name == "lang" {
            LANG_FEATURE_WIDTH
        } else {
            FEATURE_WIDTH
        }
    }

    pub fn init_all(
        ps: &mut ParamSet,
        decls: &[FeatureDecl],
        scale: f64,
        rng: &mut RngState,
    ) -> Vec<FeatureChannel> {
        decls
            .iter()
            .map(|d| {
                let width = Self::width_for(&d.name);
                let table = ps.add_uniform(
                    &format!("feat.{}", d.name),
                    &[d.cardinality, width],
                    scale,
                    rng,
                );
                FeatureChannel {
                    name: d.name.clone(),
                    cardinality: d.cardinality,
                    width,
                    table,
                }
            })
            .collect()
    }

    /// Embedding for this channel at position features, or a zero vector
    /// when the position carries none (BOS, sampled continuations).
    pub fn encode<E: Exec>(
        &self,
        ex: &mut E,
        ps: &ParamSet,
        channel: usize,
        features: Option<&FeatureVector>,
    ) -> E::V {
        match features {
            Some(fv) => {
                let (name, value) = &fv.values[channel];
                debug_assert_eq!(name, &self.name);
                assert!(
                    *value < self.cardinality,
                    "feature {} value {} out of range {}",
                    self.name,
                    value,
                    self.cardinality
                );
                ex.row(ps, self.table, *value)
            }
            None => ex.zeros(self.width),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ValueExec;

    #[test]
    fn lang_channel_is_narrow() {
        assert_eq!(FeatureChannel::width_for("lang"), 2);
        assert_eq!(FeatureChannel::width_for("pos"), 8);
    }

    #[test]
    fn missing_features_encode_as_zeros() {
        let mut rng = RngState::seeded(1);
        let mut ps = ParamSet::new();
        let decls = vec![FeatureDecl {
            name: "pos".into(),
            cardinality: 3,
        }];
        let chans = FeatureChannel::init_all(&mut ps, &decls, 0.1, &mut rng);
        let mut ex = ValueExec::new();
        let v = chans[0].encode(&mut ex, &ps, 0, None);
        assert_eq!(ex.value(v).data(), &[0.0; 8]);
        let fv = FeatureVector {
            values: vec![("pos".into(), 2)],
        };
        let v = chans[0].encode(&mut ex, &ps, 0, Some(&fv));
        assert_eq!(ex.value(v).data(), ps.value(chans[0].table).row(2));
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn out_of_range_category_panics() {
        let mut rng = RngState::seeded(1);
        let mut ps = ParamSet::new();
        let decls = vec![FeatureDecl {
            name: "pos".into(),
            cardinality: 3,
        }];
        let chans = FeatureChannel::init_all(&mut ps, &decls, 0.1, &mut rng);
        let mut ex = ValueExec::new();
        let fv = FeatureVector {
            values: vec![("pos".into(), 3)],
        };
        chans[0].encode(&mut ex, &ps, 0, Some(&fv));
    }
}

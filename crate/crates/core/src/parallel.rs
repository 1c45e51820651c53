//! Order-preserving map helpers.
//!
//! With the `parallel` feature, `map_ordered` fans work out over rayon and
//! collects results in input order, so reductions downstream see the same
//! sequence either way. Every caller must keep its per-item work independent
//! (pre-forked RNGs, no shared mutable state) for the two paths to agree
//! bit for bit. `map_ordered_seq` is the plain loop, kept callable under
//! both builds so benches can compare against it directly.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

pub fn map_ordered_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Parallel map over owned items, order preserved.
#[cfg(feature = "parallel")]
pub fn map_ordered_owned<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered_owned<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let items: Vec<u64> = (0..500).collect();
        let f = |x: &u64| x.wrapping_mul(0x9e3779b97f4a7c15).rotate_left(17);
        assert_eq!(map_ordered(&items, f), map_ordered_seq(&items, f));
    }

    #[test]
    fn owned_map_preserves_order() {
        let items: Vec<usize> = (0..100).collect();
        let out = map_ordered_owned(items, |x| x * 2);
        assert!(out.windows(2).all(|w| w[1] == w[0] + 2));
    }
}

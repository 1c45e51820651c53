//! Byte-exact on-disk tensor store.
//!
//! A text header lists tensor names and shapes; the payload is the
//! concatenated values as little-endian f64, in header order. Writing and
//! re-reading reproduces every bit, which the training pipeline relies on
//! for reproducible checkpoints.
//!
//! ```text
//! tensors 2
//! cell.w_i 2 8 16
//! cell.b_i 1 8
//! end
//! <raw f64 bytes>
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::params::ParamSet;
use super::tensor::Tensor;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad store header: {0}")]
    Header(String),
    #[error("payload truncated: wanted {wanted} values for {name}")]
    Truncated { name: String, wanted: usize },
    #[error("store does not match model: {0}")]
    Mismatch(String),
}

pub fn write_tensors(path: &Path, items: &[(&str, &Tensor)]) -> Result<(), StoreError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensors_to(&mut w, items)?;
    w.flush()?;
    Ok(())
}

pub fn write_tensors_to<W: Write>(w: &mut W, items: &[(&str, &Tensor)]) -> Result<(), StoreError> {
    writeln!(w, "tensors {}", items.len())?;
    for (name, t) in items {
        assert!(
            !name.is_empty() && !name.contains(char::is_whitespace),
            "tensor name {name:?} must be a single token"
        );
        write!(w, "{} {}", name, t.shape().len())?;
        for d in t.shape() {
            write!(w, " {d}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "end")?;
    for (_, t) in items {
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_tensors(path: &Path) -> Result<Vec<(String, Tensor)>, StoreError> {
    let mut r = BufReader::new(File::open(path)?);
    read_tensors_from(&mut r)
}

pub fn read_tensors_from<R: Read>(r: &mut R) -> Result<Vec<(String, Tensor)>, StoreError> {
    let mut header = String::new();
    // Read byte-wise up to the end marker so the binary payload stays intact.
    let mut line = Vec::new();
    let mut entries: Vec<(String, Vec<usize>)> = Vec::new();
    let mut count: Option<usize> = None;
    loop {
        line.clear();
        let mut byte = [0u8; 1];
        loop {
            if r.read(&mut byte)? == 0 {
                return Err(StoreError::Header("unexpected end of file".into()));
            }
            if byte[0] == b'\n' {
                break;
            }
            line.push(byte[0]);
        }
        let text = std::str::from_utf8(&line)
            .map_err(|_| StoreError::Header("non-utf8 header line".into()))?;
        header.push_str(text);
        header.push('\n');
        let mut fields = text.split_whitespace();
        match (count, fields.next()) {
            (None, Some("tensors")) => {
                let n = fields
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| StoreError::Header("bad tensor count".into()))?;
                count = Some(n);
            }
            (None, _) => return Err(StoreError::Header("missing tensors line".into())),
            (Some(_), Some("end")) => break,
            (Some(_), Some(name)) => {
                let ndim: usize = fields
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| StoreError::Header(format!("bad rank for {name}")))?;
                let dims: Vec<usize> = fields.filter_map(|s| s.parse().ok()).collect();
                if dims.len() != ndim {
                    return Err(StoreError::Header(format!("bad shape for {name}")));
                }
                entries.push((name.to_string(), dims));
            }
            (Some(_), None) => return Err(StoreError::Header("blank header line".into())),
        }
    }
    if Some(entries.len()) != count {
        return Err(StoreError::Header(format!(
            "header lists {} tensors, count says {:?}",
            entries.len(),
            count
        )));
    }

    let mut out = Vec::with_capacity(entries.len());
    for (name, dims) in entries {
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf).map_err(|_| StoreError::Truncated {
                name: name.clone(),
                wanted: n,
            })?;
            data.push(f64::from_le_bytes(buf));
        }
        out.push((name, Tensor::from_vec(&dims, data)));
    }
    Ok(out)
}

/// Writes every parameter value in `ps`, in declaration order.
pub fn save_params(path: &Path, ps: &ParamSet) -> Result<(), StoreError> {
    let items: Vec<(&str, &Tensor)> = ps
        .iter()
        .map(|(_, p)| (p.name.as_str(), &p.value))
        .collect();
    write_tensors(path, &items)
}

pub fn save_params_to<W: Write>(w: &mut W, ps: &ParamSet) -> Result<(), StoreError> {
    let items: Vec<(&str, &Tensor)> = ps
        .iter()
        .map(|(_, p)| (p.name.as_str(), &p.value))
        .collect();
    write_tensors_to(w, &items)
}

/// Loads values into an already-built `ps`. Names, order, and shapes must
/// all match the stored set exactly: a checkpoint only makes sense for the
/// model it was saved from.
pub fn load_params(path: &Path, ps: &mut ParamSet) -> Result<(), StoreError> {
    let mut r = BufReader::new(File::open(path)?);
    load_params_from(&mut r, ps)
}

pub fn load_params_from<R: Read>(r: &mut R, ps: &mut ParamSet) -> Result<(), StoreError> {
    let stored = read_tensors_from(r)?;
    if stored.len() != ps.len() {
        return Err(StoreError::Mismatch(format!(
            "store has {} tensors, model has {}",
            stored.len(),
            ps.len()
        )));
    }
    let ids: Vec<_> = ps.iter().map(|(id, _)| id).collect();
    for (id, (name, value)) in ids.iter().zip(stored) {
        let p = ps.get_mut(*id);
        if p.name != name {
            return Err(StoreError::Mismatch(format!(
                "expected parameter {}, store has {}",
                p.name, name
            )));
        }
        if p.value.shape() != value.shape() {
            return Err(StoreError::Mismatch(format!(
                "shape of {} is {:?} in store, {:?} in model",
                name,
                value.shape(),
                p.value.shape()
            )));
        }
        p.value = value;
    }
    Ok(())
}

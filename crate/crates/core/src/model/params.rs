//! Flat parameter storage with a named layout, dense layers, and the
//! checkpoint container.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::Real;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Normal with standard deviation `gain / sqrt(fan_in)`.
    Fan(f64),
    Const(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named tensors packed into one flat vector.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layout {
    pub tensors: Vec<TensorSpec>,
    pub len: usize,
}

impl Layout {
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], init: Init) -> usize {
        let offset = self.len;
        let spec = TensorSpec { name: name.into(), offset, shape: shape.to_vec(), init };
        self.len += spec.len();
        self.tensors.push(spec);
        offset
    }

    pub fn linear(&mut self, name: &str, n_in: usize, n_out: usize, bias: bool) -> Linear {
        let w = self.add(format!("{name}.w"), &[n_out, n_in], Init::Fan(1.0));
        let b = bias.then(|| self.add(format!("{name}.b"), &[n_out], Init::Const(0.0)));
        Linear { w, b, n_in, n_out }
    }

    pub fn mlp(&mut self, name: &str, n_in: usize, hidden: usize, n_out: usize) -> Mlp {
        Mlp { l1: self.linear(&format!("{name}.0"), n_in, hidden, true), l2: self.linear(&format!("{name}.1"), hidden, n_out, true) }
    }

    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.len];
        for t in &self.tensors {
            let dst = &mut p[t.offset..t.offset + t.len()];
            match t.init {
                Init::Const(c) => dst.fill(c),
                Init::Fan(g) => {
                    let fan_in = *t.shape.last().unwrap_or(&1) as f64;
                    let n = Normal::new(0.0, g / fan_in.sqrt()).expect("valid std");
                    dst.iter_mut().for_each(|v| *v = n.sample(rng));
                }
            }
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Linear {
    pub w: usize,
    pub b: Option<usize>,
    pub n_in: usize,
    pub n_out: usize,
}

impl Linear {
    fn row<'a, T>(&self, p: &'a [T], o: usize) -> &'a [T] {
        &p[self.w + o * self.n_in..self.w + (o + 1) * self.n_in]
    }

    pub fn apply<T: Real>(&self, p: &[T], x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.n_in);
        (0..self.n_out)
            .map(|o| {
                let y = T::dot(self.row(p, o), x);
                match self.b {
                    Some(b) => y + p[b + o],
                    None => y,
                }
            })
            .collect()
    }

    /// As [`Linear::apply`] for constant inputs.
    pub fn apply_f<T: Real>(&self, p: &[T], x: &[f64]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.n_in);
        (0..self.n_out)
            .map(|o| {
                let y = T::dot_f(self.row(p, o), x);
                match self.b {
                    Some(b) => y + p[b + o],
                    None => y,
                }
            })
            .collect()
    }
}

/// Two dense layers with a SiLU in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mlp {
    pub l1: Linear,
    pub l2: Linear,
}

impl Mlp {
    pub fn apply<T: Real>(&self, p: &[T], x: &[T]) -> Vec<T> {
        let h: Vec<T> = self.l1.apply(p, x).into_iter().map(T::silu).collect();
        self.l2.apply(p, &h)
    }

    pub fn apply_f<T: Real>(&self, p: &[T], x: &[f64]) -> Vec<T> {
        let h: Vec<T> = self.l1.apply_f(p, x).into_iter().map(T::silu).collect();
        self.l2.apply(p, &h)
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HDCKPT1\0";

/// Contents of a checkpoint: numeric hyperparameters and named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub header: Vec<(String, f64)>,
    pub tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl Checkpoint {
    pub fn header_value(&self, key: &str) -> Option<f64> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn tensor(&self, name: &str) -> Option<&(String, Vec<usize>, Vec<f64>)> {
        self.tensors.iter().find(|(n, _, _)| n == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        let put_str = |out: &mut Vec<u8>, s: &str| {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        };
        out.extend_from_slice(&(self.header.len() as u32).to_le_bytes());
        for (k, v) in &self.header {
            put_str(&mut out, k);
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, shape, data) in &self.tensors {
            put_str(&mut out, name);
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for d in shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let err = |msg: &str| Error::Format { path: path.to_path_buf(), msg: msg.to_string() };
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| err("truncated header"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(err("bad magic"));
        }
        let u32_ = |r: &mut &[u8]| -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| err("truncated"))?;
            Ok(u32::from_le_bytes(b))
        };
        let u64_ = |r: &mut &[u8]| -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(|_| err("truncated"))?;
            Ok(u64::from_le_bytes(b))
        };
        let str_ = |r: &mut &[u8], n: u32| -> Result<String> {
            let mut b = vec![0u8; n as usize];
            r.read_exact(&mut b).map_err(|_| err("truncated string"))?;
            String::from_utf8(b).map_err(|_| err("non-utf8 name"))
        };
        let mut ck = Checkpoint::default();
        for _ in 0..u32_(&mut r)? {
            let n = u32_(&mut r)?;
            let k = str_(&mut r, n)?;
            ck.header.push((k, f64::from_bits(u64_(&mut r)?)));
        }
        for _ in 0..u32_(&mut r)? {
            let n = u32_(&mut r)?;
            let name = str_(&mut r, n)?;
            let nd = u32_(&mut r)?;
            let shape = (0..nd).map(|_| u64_(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            if r.len() < len * 8 {
                return Err(err("truncated tensor data"));
            }
            let data = (0..len).map(|_| u64_(&mut r).map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
            ck.tensors.push((name, shape, data));
        }
        if !r.is_empty() {
            return Err(err("trailing bytes"));
        }
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?, path)
    }

    /// Appends every tensor of `layout` read from `values` under `prefix`.
    pub fn push_layout(&mut self, prefix: &str, layout: &Layout, values: &[f64]) {
        for t in &layout.tensors {
            self.tensors.push((format!("{prefix}{}", t.name), t.shape.clone(), values[t.offset..t.offset + t.len()].to_vec()));
        }
    }

    /// Reassembles a flat vector for `layout` from tensors under `prefix`.
    pub fn extract_layout(&self, prefix: &str, layout: &Layout, path: &Path) -> Result<Vec<f64>> {
        let mut out = vec![0.0; layout.len];
        for t in &layout.tensors {
            let name = format!("{prefix}{}", t.name);
            let (_, shape, data) = self
                .tensor(&name)
                .ok_or_else(|| Error::Format { path: path.to_path_buf(), msg: format!("missing tensor {name}") })?;
            if shape != &t.shape {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    msg: format!("tensor {name} has shape {shape:?}, expected {:?}", t.shape),
                });
            }
            out[t.offset..t.offset + t.len()].copy_from_slice(data);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn layout_offsets_are_contiguous() {
        let mut l = Layout::default();
        let a = l.linear("a", 3, 2, true);
        let m = l.mlp("m", 2, 4, 1);
        assert_eq!(a.w, 0);
        assert_eq!(a.b, Some(6));
        assert_eq!(m.l1.w, 8);
        assert_eq!(l.len, 8 + 8 + 4 + 4 + 1);
        let p = l.init(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1));
        assert!(p[6..8].iter().all(|&v| v == 0.0));
        assert!(p[..6].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn linear_matches_manual() {
        let mut l = Layout::default();
        let lin = l.linear("x", 2, 2, true);
        let p = vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5];
        assert_eq!(lin.apply(&p, &[1.0, 1.0]), vec![3.5, 6.5]);
        assert_eq!(lin.apply_f::<f64>(&p, &[2.0, 0.0]), vec![2.5, 5.5]);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let ck = Checkpoint {
            header: vec![("n_s".into(), 16.0), ("eps".into(), 1e-5)],
            tensors: vec![("a.w".into(), vec![2, 2], vec![0.1, -0.0, f64::MIN_POSITIVE, 1.0 / 3.0])],
        };
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..8], CHECKPOINT_MAGIC);
        let back = Checkpoint::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.tensors[0].2[1].to_bits(), (-0.0f64).to_bits());
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3], Path::new("mem")).is_err());
    }
}

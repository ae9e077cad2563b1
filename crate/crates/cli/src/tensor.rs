//! `PFT1` tensor files: magic, u32 rank, u32 dims, f32 values, all little-endian.

use std::fs;
use std::path::Path;

use posebox::FieldGrid;

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 4] = b"PFT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, values: Vec<f32>) -> CliResult<Self> {
        let n = element_count(&dims)?;
        if n != values.len() {
            return Err(CliError::Data(format!(
                "dims {dims:?} need {n} values, got {}",
                values.len()
            )));
        }
        Ok(Self { dims, values })
    }

    /// `[h, w]` for single-channel grids, `[h, w, c]` otherwise.
    pub fn from_grid(grid: &FieldGrid) -> Self {
        let mut dims = vec![grid.height(), grid.width()];
        if grid.channels() != 1 {
            dims.push(grid.channels());
        }
        Self {
            dims,
            values: grid.data().to_vec(),
        }
    }

    pub fn into_grid(self, stride: usize) -> CliResult<FieldGrid> {
        let (h, w, c) = match self.dims[..] {
            [h, w] => (h, w, 1),
            [h, w, c] => (h, w, c),
            _ => {
                return Err(CliError::Data(format!(
                    "expected a rank 2 or 3 tensor, got dims {:?}",
                    self.dims
                )))
            }
        };
        Ok(FieldGrid::from_vec(w, h, c, stride, self.values)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 4 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> CliResult<Self> {
        let bad = |m: &str| CliError::Data(format!("malformed tensor: {m}"));
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad("missing PFT1 header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let rank = word(4);
        let header = rank
            .checked_mul(4)
            .and_then(|n| n.checked_add(8))
            .filter(|&n| n <= bytes.len())
            .ok_or_else(|| bad("truncated dimensions"))?;
        let dims: Vec<usize> = (0..rank).map(|k| word(8 + 4 * k)).collect();
        let n = element_count(&dims)?;
        let payload = &bytes[header..];
        if Some(payload.len()) != n.checked_mul(4) {
            return Err(bad(&format!(
                "payload is {} bytes, dims {dims:?} need {}",
                payload.len(),
                n.saturating_mul(4)
            )));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { dims, values })
    }
}

fn element_count(dims: &[usize]) -> CliResult<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| {
            if d > u32::MAX as usize {
                None
            } else {
                acc.checked_mul(d)
            }
        })
        .ok_or_else(|| CliError::Data(format!("dims {dims:?} overflow")))
}

pub fn write_tensor(path: &Path, t: &Tensor) -> CliResult<()> {
    fs::write(path, t.to_bytes()).map_err(|e| CliError::io(path, e))
}

pub fn read_tensor(path: &Path) -> CliResult<Tensor> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Tensor::from_bytes(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = Tensor::new(vec![2, 3], (0..6).map(|i| i as f32).collect()).unwrap();
        let b = t.to_bytes();
        assert_eq!(&b[..4], b"PFT1");
        assert_eq!(&b[4..8], &[2, 0, 0, 0]);
        assert_eq!(&b[8..12], &[2, 0, 0, 0]);
        assert_eq!(&b[12..16], &[3, 0, 0, 0]);
        assert_eq!(&b[16..20], &0.0f32.to_le_bytes());
        assert_eq!(b.len(), 16 + 24);
    }

    #[test]
    fn rejects_bad_payloads() {
        let t = Tensor::new(vec![2, 2], vec![1.0; 4]).unwrap();
        let mut b = t.to_bytes();
        b.pop();
        assert!(Tensor::from_bytes(&b).is_err());
        assert!(Tensor::from_bytes(b"PFT2\0\0\0\0").is_err());
        assert!(Tensor::from_bytes(&[b'P', b'F', b'T', b'1', 9, 0, 0, 0]).is_err());
        assert!(Tensor::new(vec![3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn grid_dims() {
        let g = FieldGrid::zeros(4, 3, 2, 1);
        let t = Tensor::from_grid(&g);
        assert_eq!(t.dims, vec![3, 4, 2]);
        assert_eq!(t.into_grid(1).unwrap(), g);
        let g = FieldGrid::zeros(4, 3, 1, 2);
        assert_eq!(Tensor::from_grid(&g).dims, vec![3, 4]);
    }

    proptest! {
        #[test]
        fn bytes_round_trip(
            dims in proptest::collection::vec(0usize..5, 0..4),
            bits in proptest::collection::vec(any::<u32>(), 0..300),
        ) {
            let n: usize = dims.iter().product();
            prop_assume!(n <= bits.len());
            let values: Vec<f32> = bits[..n].iter().map(|&b| f32::from_bits(b)).collect();
            let t = Tensor::new(dims, values).unwrap();
            let back = Tensor::from_bytes(&t.to_bytes()).unwrap();
            prop_assert_eq!(&back.dims, &t.dims);
            let a: Vec<u32> = t.values.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}

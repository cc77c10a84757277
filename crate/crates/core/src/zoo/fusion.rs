use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionOp {
    Concat,
    Average,
    Sum,
    Subtract,
    Hadamard,
}

impl FusionOp {
    pub fn output_dim(self, d: usize) -> usize {
        match self {
            FusionOp::Concat => 2 * d,
            _ => d,
        }
    }

    /// Whether `fuse(a, b) == fuse(b, a)` bit for bit.
    pub fn is_symmetric(self) -> bool {
        matches!(self, FusionOp::Average | FusionOp::Sum | FusionOp::Hadamard)
    }

    /// Writes the fused vector into `out`, which must have `output_dim` length.
    #[inline]
    pub fn fuse_into(self, hu: &[f64], hv: &[f64], out: &mut [f64]) {
        let d = hu.len();
        match self {
            FusionOp::Concat => {
                out[..d].copy_from_slice(hu);
                out[d..].copy_from_slice(hv);
            }
            FusionOp::Average => out.iter_mut().zip(hu.iter().zip(hv)).for_each(|(o, (a, b))| *o = (a + b) / 2.0),
            FusionOp::Sum => out.iter_mut().zip(hu.iter().zip(hv)).for_each(|(o, (a, b))| *o = a + b),
            FusionOp::Subtract => out.iter_mut().zip(hu.iter().zip(hv)).for_each(|(o, (a, b))| *o = a - b),
            FusionOp::Hadamard => out.iter_mut().zip(hu.iter().zip(hv)).for_each(|(o, (a, b))| *o = a * b),
        }
        crate::opcount::add(if self == FusionOp::Concat { 0 } else { d as u64 });
    }

    /// Accumulates `∂/∂hu` and `∂/∂hv` of `⟨g, fuse(hu, hv)⟩`.
    pub fn backward(self, g: &[f64], hu: &[f64], hv: &[f64], gu: &mut [f64], gv: &mut [f64]) {
        let d = hu.len();
        match self {
            FusionOp::Concat => {
                for i in 0..d {
                    gu[i] += g[i];
                    gv[i] += g[d + i];
                }
            }
            FusionOp::Average => {
                for i in 0..d {
                    gu[i] += 0.5 * g[i];
                    gv[i] += 0.5 * g[i];
                }
            }
            FusionOp::Sum => {
                for i in 0..d {
                    gu[i] += g[i];
                    gv[i] += g[i];
                }
            }
            FusionOp::Subtract => {
                for i in 0..d {
                    gu[i] += g[i];
                    gv[i] -= g[i];
                }
            }
            FusionOp::Hadamard => {
                for i in 0..d {
                    gu[i] += g[i] * hv[i];
                    gv[i] += g[i] * hu[i];
                }
            }
        }
    }
}

pub fn fuse(op: FusionOp, hu: &[f64], hv: &[f64]) -> Result<Vec<f64>> {
    if hu.len() != hv.len() {
        return Err(Error::Shape(format!("fusing vectors of length {} and {}", hu.len(), hv.len())));
    }
    let mut out = vec![0.0; op.output_dim(hu.len())];
    op.fuse_into(hu, hv, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_examples() {
        assert_eq!(fuse(FusionOp::Concat, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
        let x = [0.3, -1.7, 2.5];
        assert_eq!(fuse(FusionOp::Average, &x, &x).unwrap(), x.to_vec());
        assert_eq!(fuse(FusionOp::Subtract, &x, &x).unwrap(), vec![0.0; 3]);
        assert_eq!(fuse(FusionOp::Hadamard, &[2.0], &[3.0]).unwrap(), vec![6.0]);
        assert_eq!(fuse(FusionOp::Sum, &[2.0], &[3.0]).unwrap(), vec![5.0]);
        assert!(fuse(FusionOp::Sum, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn backward_matches_linearization() {
        let hu = [0.5, -1.0];
        let hv = [2.0, 0.25];
        for op in [FusionOp::Concat, FusionOp::Average, FusionOp::Sum, FusionOp::Subtract, FusionOp::Hadamard] {
            let dim = op.output_dim(2);
            let g: Vec<f64> = (0..dim).map(|i| 0.3 + i as f64).collect();
            let (mut gu, mut gv) = (vec![0.0; 2], vec![0.0; 2]);
            op.backward(&g, &hu, &hv, &mut gu, &mut gv);
            let f = |a: &[f64], b: &[f64]| -> f64 {
                fuse(op, a, b).unwrap().iter().zip(&g).map(|(x, y)| x * y).sum()
            };
            let h = 1e-6;
            for i in 0..2 {
                let mut a = hu;
                a[i] += h;
                let mut b = hu;
                b[i] -= h;
                let num = (f(&a, &hv) - f(&b, &hv)) / (2.0 * h);
                assert!((num - gu[i]).abs() < 1e-6, "{op:?}");
            }
        }
    }
}

use nalgebra::DMatrix;
use num_dual::DualNum;

use crate::error::{Error, Result};
use crate::linalg::{inverse_generic, RMat, RVec};

/// Pivots below this magnitude are reported as [`Error::FrameDegenerate`].
pub const FRAME_PIVOT_TOL: f64 = 1e-12;

/// `η = diag(−1, 1, ..., 1)`.
pub fn minkowski_eta(dim: usize) -> RVec {
    RVec::from_fn(dim, |a, _| if a == 0 { -1.0 } else { 1.0 })
}

/// Orthonormal frame sample: columns of `e` are the frame vectors `e_a` in coordinate
/// components, rows of `coframe` are the dual covectors `θ^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub e: RMat,
    pub coframe: RMat,
}

impl Frame {
    pub fn from_vectors(e: RMat) -> Result<Self> {
        let coframe = inverse_generic(&e).ok_or(Error::FrameDegenerate {
            index: 0,
            pivot: 0.0,
        })?;
        Ok(Self { e, coframe })
    }

    pub fn dim(&self) -> usize {
        self.e.ncols()
    }

    /// Frame components `V^a = θ^a(V)` of a coordinate vector.
    pub fn frame_components(&self, v: &RVec) -> RVec {
        &self.coframe * v
    }

    /// Max deviation of `g(e_a, e_b)` from `η_ab`.
    pub fn orthonormality_residual(&self, g: &RMat) -> f64 {
        let eta = RMat::from_diagonal(&minkowski_eta(self.dim()));
        (self.e.transpose() * g * &self.e - eta).amax()
    }
}

/// Gram-Schmidt of the coordinate basis `(∂_0, ..., ∂_n)` against `g`.
///
/// `e_0` is timelike with positive 0-th component, the rest are spacelike. Generic
/// over dual numbers so that frame derivatives follow from metric derivatives.
pub fn gram_schmidt_frame<D>(g: &DMatrix<D>) -> Result<DMatrix<D>>
where
    D: DualNum<Primitive = f64> + Copy,
{
    let n = g.nrows();
    let mut e = DMatrix::<D>::from_element(n, n, D::zero());
    for a in 0..n {
        let mut v: Vec<D> = (0..n)
            .map(|i| if i == a { D::one() } else { D::zero() })
            .collect();
        for b in 0..a {
            let sign = if b == 0 { -1.0 } else { 1.0 };
            let mut proj = D::zero();
            for i in 0..n {
                for j in 0..n {
                    proj += v[i] * g[(i, j)] * e[(j, b)];
                }
            }
            let coef = proj * sign;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= coef * e[(i, b)];
            }
        }
        let mut norm = D::zero();
        for i in 0..n {
            for j in 0..n {
                norm += v[i] * g[(i, j)] * v[j];
            }
        }
        let expected = if a == 0 { -1.0 } else { 1.0 };
        let pivot = norm * expected;
        if !(pivot.re() > FRAME_PIVOT_TOL) {
            return Err(Error::FrameDegenerate {
                index: a,
                pivot: pivot.re(),
            });
        }
        let inv = pivot.sqrt().recip();
        for i in 0..n {
            e[(i, a)] = v[i] * inv;
        }
    }
    Ok(e)
}

//! Dense linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_dual::DualNum;

pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn complexify(m: &RMat) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn complexify_vec(v: &RVec) -> CVec {
    v.map(|x| Complex64::new(x, 0.0))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Singular decomposition with singular triples sorted by descending value.
pub struct SortedSvd {
    pub values: Vec<f64>,
    /// Left singular vectors, one per value.
    pub left: Vec<CVec>,
    /// Right singular vectors, one per value.
    pub right: Vec<CVec>,
}

pub fn sorted_svd(m: &CMat) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^*");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    SortedSvd {
        values: order.iter().map(|&k| svd.singular_values[k]).collect(),
        left: order.iter().map(|&k| u.column(k).into_owned()).collect(),
        right: order
            .iter()
            .map(|&k| v_t.row(k).adjoint().into_owned())
            .collect(),
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

pub fn symmetric_eigenvalues(m: &RMat) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Eigenvalues of a general complex matrix, read off the triangular Schur factor.
pub fn eigenvalues(m: &CMat) -> Vec<Complex64> {
    let (_, t) = m.clone().schur().unpack();
    t.diagonal().iter().copied().collect()
}

pub fn try_inverse_c(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// Gauss-Jordan inverse with partial pivoting, generic over dual numbers so that
/// derivatives propagate through the inversion.
pub fn inverse_generic<D>(m: &DMatrix<D>) -> Option<DMatrix<D>>
where
    D: DualNum<Primitive = f64> + Copy,
{
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = DMatrix::from_fn(n, n, |i, j| if i == j { D::one() } else { D::zero() });
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.re().abs()));
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[(i, col)].re().abs().total_cmp(&a[(j, col)].re().abs()))
            .unwrap();
        if a[(pivot_row, col)].re().abs() <= 1e-300_f64.max(scale * 1e-15) {
            return None;
        }
        a.swap_rows(col, pivot_row);
        inv.swap_rows(col, pivot_row);
        let p = a[(col, col)].recip();
        for j in 0..n {
            a[(col, j)] *= p;
            inv[(col, j)] *= p;
        }
        for i in 0..n {
            if i != col {
                let f = a[(i, col)];
                for j in 0..n {
                    let aj = a[(col, j)];
                    let ij = inv[(col, j)];
                    a[(i, j)] -= f * aj;
                    inv[(i, j)] -= f * ij;
                }
            }
        }
    }
    Some(inv)
}

pub fn real_part<D: DualNum<Primitive = f64> + Copy>(m: &DMatrix<D>) -> RMat {
    m.map(|v| v.re())
}

pub fn is_symmetric(m: &RMat, tol: f64) -> bool {
    let scale = m.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    (m - m.transpose()).iter().all(|v| v.abs() <= tol * scale)
}

/// Serde adapter writing an [`RVec`] as a plain array.
pub mod serde_rvec {
    use super::RVec;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &RVec, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RVec, D::Error> {
        Ok(RVec::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// Row-major `[re, im]` pairs of a complex matrix.
pub fn matrix_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Serde adapter writing a [`CMat`] as row-major `[re, im]` pairs.
pub mod serde_cmat {
    use super::{CMat, Complex64};
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        super::matrix_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err(D::Error::custom("ragged matrix"));
        }
        Ok(CMat::from_fn(n, m, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
    }
}

/// Serde adapter for a list of complex matrices.
pub mod serde_cmat_vec {
    use super::CMat;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "super::serde_cmat")] CMat);

    pub fn serialize<S: Serializer>(m: &[CMat], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<_> = m.iter().map(super::matrix_rows).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CMat>, D::Error> {
        Ok(Vec::<Wrapped>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

/// Serde adapter writing a [`CVec`] as `[re, im]` pairs.
pub mod serde_cvec {
    use super::{CVec, Complex64};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &CVec, s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVec, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(CVec::from_iterator(pairs.len(), pairs.iter().map(|p| Complex64::new(p[0], p[1]))))
    }
}

/// Packs a complex vector as `[re..., im...]`.
pub fn pack_complex(v: &CVec) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

pub fn unpack_complex(s: &[f64]) -> CVec {
    let n = s.len() / 2;
    CVec::from_fn(n, |i, _| Complex64::new(s[i], s[n + i]))
}

/// Serde adapter for a list of complex vectors.
pub mod serde_cvec_vec {
    use super::CVec;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "super::serde_cvec")] CVec);

    pub fn serialize<S: Serializer>(v: &[CVec], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<Vec<[f64; 2]>> = v.iter().map(|w| w.iter().map(|z| [z.re, z.im]).collect()).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CVec>, D::Error> {
        Ok(Vec::<Wrapped>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

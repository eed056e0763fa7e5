use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{principal_jet, Factorization, FirstOrderSystem};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{MetricField, PhasePoint, DEFAULT_NULL_TOL};
use crate::linalg::{c, frobenius, singular_values, sorted_svd, CMat, CVec, RMat};

/// Singular values below `rank_tol · σ_max` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct KernelBasis {
    /// Orthonormal right singular vectors spanning the numerical kernel.
    pub vectors: Vec<CVec>,
    pub dim: usize,
    pub singular_values: Vec<f64>,
}

pub fn kernel_basis(m: &CMat, rank_tol: f64) -> KernelBasis {
    let n = m.ncols();
    let svd = sorted_svd(m);
    let smax = svd.values.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return KernelBasis {
            vectors: (0..n).map(|i| CVec::from_fn(n, |j, _| c(if i == j { 1.0 } else { 0.0 }, 0.0))).collect(),
            dim: n,
            singular_values: svd.values,
        };
    }
    let mut vectors: Vec<CVec> = svd
        .values
        .iter()
        .zip(&svd.right)
        .filter(|(s, _)| **s < rank_tol * smax)
        .map(|(_, v)| v.clone())
        .collect();
    // thin SVD of a wide matrix misses part of the kernel
    if svd.right.len() < n {
        let complete = m.adjoint() * m;
        let extra = sorted_svd(&complete);
        vectors = extra
            .values
            .iter()
            .zip(&extra.right)
            .filter(|(s, _)| **s < (rank_tol * smax).powi(2))
            .map(|(_, v)| v.clone())
            .collect();
    }
    KernelBasis {
        dim: vectors.len(),
        vectors,
        singular_values: svd.values,
    }
}

fn cokernel_basis(m: &CMat, rank_tol: f64) -> Vec<CVec> {
    kernel_basis(&m.adjoint(), rank_tol).vectors
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificationMode {
    /// Residual of `σ̃ σ_1 = q Id`.
    Factorization,
    /// Characteristic-set geometry and the kernel-to-cokernel map.
    Intrinsic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalTypeOptions {
    pub rank_tol: f64,
    pub null_tol: f64,
    pub factorization_tol: f64,
    pub neighbours: usize,
    pub neighbour_scale: f64,
    pub max_condition: f64,
    pub seed: u64,
}

impl Default for PrincipalTypeOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            null_tol: DEFAULT_NULL_TOL,
            factorization_tol: 1e-10,
            neighbours: 8,
            neighbour_scale: 1e-3,
            max_condition: 1e8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalTypeCertificate {
    pub at: PhasePoint,
    pub mode: CertificationMode,
    pub q: f64,
    pub on_char_set: bool,
    pub factorization_residual: f64,
    pub ker_dim: usize,
    pub dq_norm: Option<f64>,
    pub dq_nonzero: Option<bool>,
    /// `s_2 / s_1` for the stacked rows `H_q` and `(0, ξ)`.
    pub radial_singular_ratio: Option<f64>,
    pub nonradial: Option<bool>,
    pub neighbour_ker_dims: Vec<usize>,
    pub ker_dim_constant: Option<bool>,
    pub ker_coker_condition_number: Option<f64>,
    pub pass: bool,
}

/// Certifies real principal type at `p`. In intrinsic mode `p` must lie on the
/// characteristic set `|q| < null_tol (1 + |ξ|²)`.
pub fn certify_principal_type<S, F>(
    sys: &S,
    fac: &F,
    metric: &MetricField,
    p: &PhasePoint,
    mode: CertificationMode,
    opts: &PrincipalTypeOptions,
) -> Result<PrincipalTypeCertificate>
where
    S: FirstOrderSystem + ?Sized,
    F: Factorization + ?Sized,
{
    check_dim(sys.dim(), p.dim())?;
    let r = sys.rank();
    let jet = principal_jet(&sys.coefficient_jet(p.x.as_slice())?, p);
    let sigma = &jet.value;
    let q = fac.q(p)?;
    let tilde = fac.sigma_tilde(p)?;
    let factorization_residual = frobenius(&(&tilde * sigma - CMat::identity(r, r) * c(q, 0.0)));
    let null_tol = opts.null_tol * (1.0 + p.xi.norm_squared());
    let on_char_set = q.abs() < null_tol;
    let kernel = kernel_basis(sigma, opts.rank_tol);

    let mut cert = PrincipalTypeCertificate {
        at: p.clone(),
        mode,
        q,
        on_char_set,
        factorization_residual,
        ker_dim: kernel.dim,
        dq_norm: None,
        dq_nonzero: None,
        radial_singular_ratio: None,
        nonradial: None,
        neighbour_ker_dims: Vec::new(),
        ker_dim_constant: None,
        ker_coker_condition_number: None,
        pass: false,
    };
    if mode == CertificationMode::Factorization {
        cert.pass = factorization_residual < opts.factorization_tol;
        return Ok(cert);
    }
    if !on_char_set {
        return Err(Error::NotOnCharacteristicSet { q: q.abs(), tol: null_tol });
    }

    let n = p.dim();
    let (dx, dxi) = metric.hamiltonian_field(p)?;
    // ∇q = (∂_x q, ∂_ξ q) = (−dξ/dt, dx/dt)
    let grad: Vec<f64> = dxi.iter().map(|v| -v).chain(dx.iter().copied()).collect();
    let dq_norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dq_nonzero = dq_norm > 1e-8 * (1.0 + p.xi.norm_squared());

    let mut rows = RMat::zeros(2, 2 * n);
    for i in 0..n {
        rows[(0, i)] = dx[i];
        rows[(0, n + i)] = dxi[i];
        rows[(1, n + i)] = p.xi[i];
    }
    for mut row in rows.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let sv = singular_values(&rows.map(|v| c(v, 0.0)));
    let ratio = if sv[0] > 0.0 { sv[1] / sv[0] } else { 0.0 };
    let nonradial = ratio > 1e-8;

    let neighbour_ker_dims = neighbours(sys, metric, p, opts)?;
    let ker_dim_constant = neighbour_ker_dims.iter().all(|d| *d == kernel.dim);

    let cond = if dq_nonzero && kernel.dim > 0 {
        let mut d_rho = CMat::zeros(r, r);
        for k in 0..n {
            d_rho += &jet.dx[k] * c(grad[k] / dq_norm, 0.0);
            d_rho += &jet.dxi[k] * c(grad[n + k] / dq_norm, 0.0);
        }
        let coker = cokernel_basis(sigma, opts.rank_tol);
        if coker.len() != kernel.dim {
            f64::INFINITY
        } else {
            let map = CMat::from_fn(kernel.dim, kernel.dim, |i, j| {
                (coker[i].adjoint() * &d_rho * &kernel.vectors[j])[(0, 0)]
            });
            let s = singular_values(&map);
            let smin = *s.last().unwrap();
            if smin > 0.0 { s[0] / smin } else { f64::INFINITY }
        }
    } else {
        f64::INFINITY
    };

    cert.dq_norm = Some(dq_norm);
    cert.dq_nonzero = Some(dq_nonzero);
    cert.radial_singular_ratio = Some(ratio);
    cert.nonradial = Some(nonradial);
    cert.neighbour_ker_dims = neighbour_ker_dims;
    cert.ker_dim_constant = Some(ker_dim_constant);
    cert.ker_coker_condition_number = Some(cond);
    cert.pass = dq_nonzero && nonradial && ker_dim_constant && kernel.dim > 0 && cond < opts.max_condition;
    Ok(cert)
}

/// Kernel dimensions at pseudo-random null perturbations of `p`, each re-projected
/// onto `q = 0` by Newton iteration in `ξ_0`.
fn neighbours<S: FirstOrderSystem + ?Sized>(
    sys: &S,
    metric: &MetricField,
    p: &PhasePoint,
    opts: &PrincipalTypeOptions,
) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = p.dim();
    let mut dims = Vec::with_capacity(opts.neighbours);
    let mut attempts = 0;
    while dims.len() < opts.neighbours && attempts < 50 * opts.neighbours.max(1) {
        attempts += 1;
        let dxs = opts.neighbour_scale * (1.0 + p.x.norm());
        let dxis = opts.neighbour_scale * p.xi.norm();
        let mut q = p.clone();
        for i in 0..n {
            q.x[i] += dxs * rng.random_range(-1.0..1.0);
            q.xi[i] += dxis * rng.random_range(-1.0..1.0);
        }
        if !metric.in_chart(q.x.as_slice()) {
            continue;
        }
        let mut converged = false;
        for _ in 0..50 {
            let val = metric.hamiltonian_q(&q)?;
            if val.abs() < 0.1 * opts.null_tol * (1.0 + q.xi.norm_squared()) {
                converged = true;
                break;
            }
            let slope = 2.0 * metric.raise_covector(&q)?[0];
            if slope == 0.0 {
                break;
            }
            q.xi[0] -= val / slope;
        }
        if !converged {
            continue;
        }
        let sigma = super::principal_symbol(sys, &q)?;
        dims.push(kernel_basis(&sigma, opts.rank_tol).dim);
    }
    Ok(dims)
}

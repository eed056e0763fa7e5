//! Coordinate-chart Lorentzian geometry.
//!
//! Signature convention is `(-, +, ..., +)`: a vector `N` is timelike when
//! `g(N, N) < 0` and future-directed when its 0-th coordinate component is positive.
//! Coordinates are ordered with time first.

pub mod catalog;
mod flow;
mod frame;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_dual::Dual64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{inverse_generic, is_symmetric, symmetric_eigenvalues, RMat, RVec};

pub use flow::{
    integrate_bicharacteristic, FlowOptions, Integrator, Termination, Trajectory,
    TrajectorySample, DEFAULT_NULL_TOL,
};
pub use frame::{gram_schmidt_frame, minkowski_eta, Frame};

/// Relative step used by [`DerivativeMode::CentralDifference`] when none is given:
/// `h = 1e-5 * (1 + |x|)`.
pub const DEFAULT_FD_SCALE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DerivativeMode {
    /// Analytic derivative supplied by the metric model.
    #[default]
    ClosedForm,
    /// Forward-mode dual numbers through the model's component formulas.
    ForwardAutodiff,
    /// Central differences with step `scale * (1 + |x|)`.
    CentralDifference { scale: f64 },
}

/// A metric written in one coordinate chart.
///
/// Implementors provide the components `g_ij(x)` twice: once over `f64` and once over
/// dual numbers so that forward-mode differentiation is always available.
pub trait MetricModel: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Catalog identifier (or a free-form label for user metrics).
    fn name(&self) -> String;

    fn components(&self, x: &[f64]) -> RMat;

    fn components_dual(&self, x: &[Dual64]) -> DMatrix<Dual64>;

    /// `∂_k g_ij(x)` in closed form, if the model has one.
    fn closed_form_derivative(&self, _x: &[f64], _k: usize) -> Option<RMat> {
        None
    }

    /// Chart validity guard.
    fn in_chart(&self, _x: &[f64]) -> bool {
        true
    }

    /// A random valid chart point, used by certifiers.
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> RVec;
}

/// Rank-3 array `Γ^i_{jk}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.dim + j) * self.dim + k] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `(∇_{∂_j} Y)^i` for a field with constant coordinate components `Y`:
    /// the matrix `C[i][j] = Γ^i_{jl} Y^l`.
    pub fn apply(&self, y: &RVec) -> RMat {
        let n = self.dim;
        RMat::from_fn(n, n, |i, j| (0..n).map(|l| self.get(i, j, l) * y[l]).sum())
    }

    fn from_derivatives(g_inv: &RMat, dg: &[RMat]) -> Self {
        let n = g_inv.nrows();
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += g_inv[(i, l)] * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                    }
                    out.set(i, j, k, 0.5 * acc);
                    out.set(i, k, j, 0.5 * acc);
                }
            }
        }
        out
    }
}

/// Metric, inverse metric and their first coordinate derivatives at a point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: RMat,
    pub g_inv: RMat,
    /// `dg[k] = ∂_k g`.
    pub dg: Vec<RMat>,
    /// `dg_inv[k] = ∂_k g^{-1}`.
    pub dg_inv: Vec<RMat>,
}

/// Everything the spinor machinery needs at one chart point: metric jet,
/// Christoffel symbols, the Gram-Schmidt frame and its first derivatives.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub x: RVec,
    pub metric: MetricJet,
    pub christoffel: Christoffel,
    pub frame: Frame,
    /// `dframe[k] = ∂_k E` (columns are the frame vectors).
    pub dframe: Vec<RMat>,
    /// `dcoframe[k] = ∂_k E^{-1}`.
    pub dcoframe: Vec<RMat>,
}

impl LocalGeometry {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `∂_k log |det g| = tr(g^{-1} ∂_k g)`.
    pub fn dlog_det(&self, k: usize) -> f64 {
        (&self.metric.g_inv * &self.metric.dg[k]).trace()
    }
}

/// A point `(x, ξ)` of the cotangent bundle in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    #[serde(with = "crate::linalg::serde_rvec")]
    pub x: RVec,
    #[serde(with = "crate::linalg::serde_rvec")]
    pub xi: RVec,
}

impl PhasePoint {
    pub fn new(x: RVec, xi: RVec) -> Result<Self> {
        check_dim(x.len(), xi.len())?;
        if xi.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroCovector);
        }
        Ok(Self { x, xi })
    }

    pub fn from_slices(x: &[f64], xi: &[f64]) -> Result<Self> {
        Self::new(RVec::from_column_slice(x), RVec::from_column_slice(xi))
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Metric field on a chart together with the differentiation strategy.
#[derive(Clone)]
pub struct MetricField {
    model: Arc<dyn MetricModel>,
    mode: DerivativeMode,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("model", &self.model.name())
            .field("mode", &self.mode)
            .finish()
    }
}

impl MetricField {
    pub fn new(model: Arc<dyn MetricModel>, mode: DerivativeMode) -> Self {
        Self { model, mode }
    }

    pub fn with_mode(&self, mode: DerivativeMode) -> Self {
        Self {
            model: self.model.clone(),
            mode,
        }
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn model(&self) -> &Arc<dyn MetricModel> {
        &self.model
    }

    pub fn name(&self) -> String {
        self.model.name()
    }

    pub fn in_chart(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.model.in_chart(x)
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        if !self.model.in_chart(x) {
            return Err(Error::OutsideChart {
                metric: self.model.name(),
                x: x.to_vec(),
            });
        }
        Ok(())
    }

    /// `g(x)` and `g^{-1}(x)`.
    pub fn eval_metric(&self, x: &[f64]) -> Result<(RMat, RMat)> {
        self.check_point(x)?;
        let g = self.model.components(x);
        let det = g.determinant();
        if !det.is_finite() || det.abs() < 1e-14 {
            return Err(Error::DegenerateMetric { x: x.to_vec(), det });
        }
        let g_inv = inverse_generic(&g).ok_or(Error::DegenerateMetric {
            x: x.to_vec(),
            det,
        })?;
        Ok((g, g_inv))
    }

    /// Counts of (negative, positive) eigenvalues of `g(x)`.
    pub fn signature(&self, x: &[f64]) -> Result<(usize, usize)> {
        let (g, _) = self.eval_metric(x)?;
        let ev = symmetric_eigenvalues(&g);
        Ok((
            ev.iter().filter(|v| **v < 0.0).count(),
            ev.iter().filter(|v| **v > 0.0).count(),
        ))
    }

    /// Fails unless `g(x)` is symmetric with exactly one negative eigenvalue.
    pub fn check_lorentzian(&self, x: &[f64]) -> Result<()> {
        let (g, _) = self.eval_metric(x)?;
        let (neg, pos) = self.signature(x)?;
        if neg != 1 || pos != self.dim() - 1 || !is_symmetric(&g, 1e-14) {
            return Err(Error::NotLorentzian {
                x: x.to_vec(),
                negative: neg,
            });
        }
        Ok(())
    }

    fn fd_step(&self, x: &[f64], scale: f64) -> f64 {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        scale * (1.0 + norm)
    }

    /// `∂_k g(x)` according to the configured derivative mode.
    pub fn metric_derivative(&self, x: &[f64], k: usize) -> Result<RMat> {
        match self.mode {
            DerivativeMode::ClosedForm => self
                .model
                .closed_form_derivative(x, k)
                .ok_or_else(|| Error::MissingDerivative(self.model.name())),
            DerivativeMode::ForwardAutodiff => {
                let xd: Vec<Dual64> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| Dual64::new(v, if i == k { 1.0 } else { 0.0 }))
                    .collect();
                Ok(self.model.components_dual(&xd).map(|d| d.eps))
            }
            DerivativeMode::CentralDifference { scale } => {
                let h = self.fd_step(x, scale);
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += h;
                xm[k] -= h;
                Ok((self.model.components(&xp) - self.model.components(&xm)) / (2.0 * h))
            }
        }
    }

    /// Metric jet at `x`: `g`, `g^{-1}` and all first derivatives.
    pub fn metric_jet(&self, x: &[f64]) -> Result<MetricJet> {
        let (g, g_inv) = self.eval_metric(x)?;
        let dg = (0..self.dim())
            .map(|k| self.metric_derivative(x, k))
            .collect::<Result<Vec<_>>>()?;
        let dg_inv = dg.iter().map(|d| -(&g_inv * d * &g_inv)).collect();
        Ok(MetricJet {
            g,
            g_inv,
            dg,
            dg_inv,
        })
    }

    pub fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        let jet = self.metric_jet(x)?;
        Ok(Christoffel::from_derivatives(&jet.g_inv, &jet.dg))
    }

    /// Metric compatibility residual `max |∂_k g_ij − Γ^l_{ki} g_lj − Γ^l_{kj} g_il|`.
    pub fn compatibility_residual(&self, x: &[f64]) -> Result<f64> {
        let jet = self.metric_jet(x)?;
        let gam = Christoffel::from_derivatives(&jet.g_inv, &jet.dg);
        let n = self.dim();
        let mut worst = 0.0_f64;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut r = jet.dg[k][(i, j)];
                    for l in 0..n {
                        r -= gam.get(l, k, i) * jet.g[(l, j)] + gam.get(l, k, j) * jet.g[(i, l)];
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
        Ok(worst)
    }

    /// Full local geometry including the orthonormal frame and its derivatives.
    pub fn local_geometry(&self, x: &[f64]) -> Result<LocalGeometry> {
        let metric = self.metric_jet(x)?;
        let christoffel = Christoffel::from_derivatives(&metric.g_inv, &metric.dg);
        let n = self.dim();
        let mut e = None;
        let mut dframe = Vec::with_capacity(n);
        for k in 0..n {
            let gd = DMatrix::from_fn(n, n, |i, j| {
                Dual64::new(metric.g[(i, j)], metric.dg[k][(i, j)])
            });
            let ed = gram_schmidt_frame(&gd)?;
            if e.is_none() {
                e = Some(ed.map(|d| d.re));
            }
            dframe.push(ed.map(|d| d.eps));
        }
        let e = match e {
            Some(e) => e,
            None => gram_schmidt_frame(&metric.g)?,
        };
        let frame = Frame::from_vectors(e)?;
        let dcoframe = dframe
            .iter()
            .map(|de| -(&frame.coframe * de * &frame.coframe))
            .collect();
        Ok(LocalGeometry {
            x: RVec::from_column_slice(x),
            metric,
            christoffel,
            frame,
            dframe,
            dcoframe,
        })
    }

    /// Gram-Schmidt orthonormal frame at `x` built from `(∂_0, ..., ∂_n)`.
    pub fn orthonormal_frame(&self, x: &[f64]) -> Result<Frame> {
        let (g, _) = self.eval_metric(x)?;
        Frame::from_vectors(gram_schmidt_frame(&g)?)
    }

    pub fn inner(&self, x: &[f64], u: &RVec, v: &RVec) -> Result<f64> {
        let (g, _) = self.eval_metric(x)?;
        Ok(u.dot(&(&g * v)))
    }

    /// `Z^i = g^{ij}(x) ξ_j`.
    pub fn raise_covector(&self, p: &PhasePoint) -> Result<RVec> {
        let (_, g_inv) = self.eval_metric(p.x.as_slice())?;
        Ok(&g_inv * &p.xi)
    }

    pub fn lower_vector(&self, x: &[f64], v: &RVec) -> Result<RVec> {
        let (g, _) = self.eval_metric(x)?;
        Ok(&g * v)
    }

    /// `q(x, ξ) = g^{ij}(x) ξ_i ξ_j`.
    pub fn hamiltonian_q(&self, p: &PhasePoint) -> Result<f64> {
        let (_, g_inv) = self.eval_metric(p.x.as_slice())?;
        Ok(p.xi.dot(&(&g_inv * &p.xi)))
    }

    /// Random future null covector at `x`: the spatial part is uniform on the unit
    /// sphere and `ξ_0` is the root of `q = 0` with `(ξ^♯)^0 > 0`.
    pub fn random_null_covector(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<RVec> {
        let (_, gi) = self.eval_metric(x)?;
        let n = self.dim();
        for _ in 0..10_000 {
            let v = RVec::from_fn(n - 1, |_, _| rng.random_range(-1.0..1.0));
            let len = v.norm();
            if !(len > 1e-3 && len <= 1.0) {
                continue;
            }
            let mut xi = RVec::zeros(n);
            xi.rows_mut(1, n - 1).copy_from(&(v / len));
            let a = gi[(0, 0)];
            let b: f64 = 2.0 * (1..n).map(|i| gi[(0, i)] * xi[i]).sum::<f64>();
            let cq = xi.dot(&(&gi * &xi));
            let disc = b * b - 4.0 * a * cq;
            if a >= 0.0 || disc < 0.0 {
                continue;
            }
            xi[0] = (-b + disc.sqrt()) / (2.0 * a);
            return Ok(xi);
        }
        Err(Error::NotLorentzian {
            x: x.to_vec(),
            negative: 0,
        })
    }

    /// Hamiltonian vector field of `q`: `dx^i = 2 g^{ij} ξ_j`,
    /// `dξ_i = −(∂_i g^{jk}) ξ_j ξ_k = Z^T (∂_i g) Z`.
    pub fn hamiltonian_field(&self, p: &PhasePoint) -> Result<(RVec, RVec)> {
        let (_, g_inv) = self.eval_metric(p.x.as_slice())?;
        let z = &g_inv * &p.xi;
        let n = self.dim();
        let mut dxi = RVec::zeros(n);
        for k in 0..n {
            let dg = self.metric_derivative(p.x.as_slice(), k)?;
            dxi[k] = z.dot(&(&dg * &z));
        }
        Ok((z * 2.0, dxi))
    }
}

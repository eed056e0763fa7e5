//! Shipped metrics and the catalog identifiers used by configuration files:
//! `minkowski{dim}`, `schwarzschild{M}`, `schwarzschild_isotropic{M}`,
//! `boosted_minkowski{v}` and `conformal_flat{Ω(x)}`. The braces are optional for
//! numeric arguments (`minkowski4`, `schwarzschild1`).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_dual::{Dual64, DualNum};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DerivativeMode, MetricField, MetricModel};
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::linalg::{inverse_generic, RMat, RVec};

/// Relative horizon margin of the Schwarzschild exterior chart.
pub const HORIZON_MARGIN: f64 = 1e-3;
/// Minimum `sin θ` accepted by the spherical charts.
pub const POLE_MARGIN: f64 = 1e-6;

fn diag<D: DualNum<Primitive = f64> + Copy>(d: &[D]) -> DMatrix<D> {
    let n = d.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { D::zero() })
}

#[derive(Debug, Clone)]
pub struct Minkowski {
    dim: usize,
}

impl Minkowski {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    fn eval<D: DualNum<Primitive = f64> + Copy>(&self) -> DMatrix<D> {
        let d: Vec<D> = (0..self.dim)
            .map(|a| D::from(if a == 0 { -1.0 } else { 1.0 }))
            .collect();
        diag(&d)
    }
}

impl MetricModel for Minkowski {
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> String {
        format!("minkowski{}", self.dim)
    }
    fn components(&self, _x: &[f64]) -> RMat {
        self.eval()
    }
    fn components_dual(&self, _x: &[Dual64]) -> DMatrix<Dual64> {
        self.eval()
    }
    fn closed_form_derivative(&self, _x: &[f64], _k: usize) -> Option<RMat> {
        Some(RMat::zeros(self.dim, self.dim))
    }
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> RVec {
        RVec::from_fn(self.dim, |_, _| rng.random_range(-10.0..10.0))
    }
}

/// Schwarzschild exterior in areal coordinates `(t, r, θ, φ)`.
#[derive(Debug, Clone)]
pub struct Schwarzschild {
    mass: f64,
    margin: f64,
}

impl Schwarzschild {
    pub fn new(mass: f64) -> Self {
        Self::with_margin(mass, HORIZON_MARGIN)
    }

    /// Same chart with a custom horizon guard `r ≥ 2M(1 + margin)`.
    pub fn with_margin(mass: f64, margin: f64) -> Self {
        Self { mass, margin }
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> DMatrix<D> {
        let r = x[1];
        let f = -(r.recip() * (2.0 * self.mass)) + 1.0;
        let s = x[2].sin();
        diag(&[-f, f.recip(), r * r, r * r * s * s])
    }
}

impl MetricModel for Schwarzschild {
    fn dim(&self) -> usize {
        4
    }
    fn name(&self) -> String {
        format!("schwarzschild{}", self.mass)
    }
    fn components(&self, x: &[f64]) -> RMat {
        self.eval(x)
    }
    fn components_dual(&self, x: &[Dual64]) -> DMatrix<Dual64> {
        self.eval(x)
    }
    fn closed_form_derivative(&self, x: &[f64], k: usize) -> Option<RMat> {
        let (m, r, th) = (self.mass, x[1], x[2]);
        let f = 1.0 - 2.0 * m / r;
        let df = 2.0 * m / (r * r);
        let (s, c) = th.sin_cos();
        let d = match k {
            1 => [-df, -df / (f * f), 2.0 * r, 2.0 * r * s * s],
            2 => [0.0, 0.0, 0.0, 2.0 * r * r * s * c],
            _ => [0.0; 4],
        };
        Some(diag(&d))
    }
    fn in_chart(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
            && x[1] >= 2.0 * self.mass * (1.0 + self.margin)
            && x[2].sin() >= POLE_MARGIN
    }
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> RVec {
        RVec::from_vec(vec![
            rng.random_range(-10.0..10.0),
            self.mass * rng.random_range(3.0..50.0),
            rng.random_range(0.2..PI - 0.2),
            rng.random_range(0.0..2.0 * PI),
        ])
    }
}

/// Schwarzschild exterior in isotropic coordinates `(t, ρ, θ, φ)`,
/// `r = ρ (1 + M/2ρ)^2`.
#[derive(Debug, Clone)]
pub struct SchwarzschildIsotropic {
    mass: f64,
}

impl SchwarzschildIsotropic {
    pub fn new(mass: f64) -> Self {
        Self { mass }
    }

    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> DMatrix<D> {
        let rho = x[1];
        let u = rho.recip() * (0.5 * self.mass);
        let a = (-u + 1.0) / (u + 1.0);
        let b = (u + 1.0).powi(4);
        let s = x[2].sin();
        diag(&[-(a * a), b, b * rho * rho, b * rho * rho * s * s])
    }
}

impl MetricModel for SchwarzschildIsotropic {
    fn dim(&self) -> usize {
        4
    }
    fn name(&self) -> String {
        format!("schwarzschild_isotropic{}", self.mass)
    }
    fn components(&self, x: &[f64]) -> RMat {
        self.eval(x)
    }
    fn components_dual(&self, x: &[Dual64]) -> DMatrix<Dual64> {
        self.eval(x)
    }
    fn closed_form_derivative(&self, x: &[f64], k: usize) -> Option<RMat> {
        let (rho, th) = (x[1], x[2]);
        let u = 0.5 * self.mass / rho;
        let a = (1.0 - u) / (1.0 + u);
        let da = 2.0 * u / (rho * (1.0 + u) * (1.0 + u));
        let b = (1.0 + u).powi(4);
        let db = -4.0 * (1.0 + u).powi(3) * u / rho;
        let (s, c) = th.sin_cos();
        let ang = db * rho * rho + 2.0 * b * rho;
        let d = match k {
            1 => [-2.0 * a * da, db, ang, ang * s * s],
            2 => [0.0, 0.0, 0.0, 2.0 * b * rho * rho * s * c],
            _ => [0.0; 4],
        };
        Some(diag(&d))
    }
    fn in_chart(&self, x: &[f64]) -> bool {
        // horizon at ρ = M/2
        x.iter().all(|v| v.is_finite())
            && x[1] >= 0.5 * self.mass * (1.0 + HORIZON_MARGIN)
            && x[2].sin() >= POLE_MARGIN
    }
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> RVec {
        let r = self.mass * rng.random_range(3.0..50.0);
        RVec::from_vec(vec![
            rng.random_range(-10.0..10.0),
            areal_to_isotropic_radius(self.mass, r),
            rng.random_range(0.2..PI - 0.2),
            rng.random_range(0.0..2.0 * PI),
        ])
    }
}

/// `ρ(r) = (r − M + sqrt(r² − 2Mr)) / 2`.
pub fn areal_to_isotropic_radius(mass: f64, r: f64) -> f64 {
    0.5 * (r - mass + (r * r - 2.0 * mass * r).sqrt())
}

/// `r(ρ) = ρ (1 + M/2ρ)²`.
pub fn isotropic_to_areal_radius(mass: f64, rho: f64) -> f64 {
    let u = 1.0 + 0.5 * mass / rho;
    rho * u * u
}

/// Minkowski space in the linear chart `x_B = A x_A`, i.e. `g_B = A^{-T} η A^{-1}`.
#[derive(Clone)]
pub struct LinearMinkowski {
    label: String,
    g: RMat,
}

impl fmt::Debug for LinearMinkowski {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl LinearMinkowski {
    pub fn new(label: impl Into<String>, a: &RMat) -> Result<Self> {
        let n = a.nrows();
        let a_inv = inverse_generic(a)
            .ok_or_else(|| Error::ChartMapDegenerate("singular linear chart".into()))?;
        let eta = RMat::from_diagonal(&super::minkowski_eta(n));
        let g = a_inv.transpose() * eta * &a_inv;
        let g = (&g + g.transpose()) * 0.5;
        Ok(Self {
            label: label.into(),
            g,
        })
    }

    /// Chart of an observer moving with velocity `v` along `x¹`.
    pub fn boosted(v: f64) -> Result<Self> {
        Self::new(format!("boosted_minkowski{v}"), &boost_matrix(4, v)?)
    }
}

impl MetricModel for LinearMinkowski {
    fn dim(&self) -> usize {
        self.g.nrows()
    }
    fn name(&self) -> String {
        self.label.clone()
    }
    fn components(&self, _x: &[f64]) -> RMat {
        self.g.clone()
    }
    fn components_dual(&self, _x: &[Dual64]) -> DMatrix<Dual64> {
        self.g.map(Dual64::from)
    }
    fn closed_form_derivative(&self, _x: &[f64], _k: usize) -> Option<RMat> {
        Some(RMat::zeros(self.dim(), self.dim()))
    }
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> RVec {
        RVec::from_fn(self.dim(), |_, _| rng.random_range(-10.0..10.0))
    }
}

/// Lorentz boost `x_B = Λ x_A` with velocity `v` along `x¹`.
pub fn boost_matrix(dim: usize, v: f64) -> Result<RMat> {
    if !(v.abs() < 1.0) || dim < 2 {
        return Err(Error::ChartMapDegenerate(format!("boost velocity {v}")));
    }
    let gamma = 1.0 / (1.0 - v * v).sqrt();
    let mut m = RMat::identity(dim, dim);
    m[(0, 0)] = gamma;
    m[(1, 1)] = gamma;
    m[(0, 1)] = -gamma * v;
    m[(1, 0)] = -gamma * v;
    Ok(m)
}

/// Conformally flat metric `g = Ω(x)² η` in four dimensions.
#[derive(Debug, Clone)]
pub struct ConformalFlat {
    factor: ScalarExpr,
}

impl ConformalFlat {
    pub fn new(expression: &str) -> Result<Self> {
        let factor = ScalarExpr::parse(expression)?;
        if factor.arity() > 4 {
            return Err(Error::Expression("conformal factor reads past t, x, y, z".into()));
        }
        Ok(Self { factor })
    }

    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, x: &[D]) -> DMatrix<D> {
        let w = self.factor.eval(x);
        let w2 = w * w;
        diag(&[-w2, w2, w2, w2])
    }
}

impl MetricModel for ConformalFlat {
    fn dim(&self) -> usize {
        4
    }
    fn name(&self) -> String {
        format!("conformal_flat{{{}}}", self.factor.source())
    }
    fn components(&self, x: &[f64]) -> RMat {
        self.eval(x)
    }
    fn components_dual(&self, x: &[Dual64]) -> DMatrix<Dual64> {
        self.eval(x)
    }
    fn closed_form_derivative(&self, x: &[f64], k: usize) -> Option<RMat> {
        // ∂_k (Ω² η) = 2 Ω ∂_kΩ η, with ∂_kΩ from the expression tree.
        let xd: Vec<Dual64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual64::new(v, if i == k { 1.0 } else { 0.0 }))
            .collect();
        let w = self.factor.eval(&xd);
        let s = 2.0 * w.re * w.eps;
        Some(diag(&[-s, s, s, s]))
    }
    fn in_chart(&self, x: &[f64]) -> bool {
        let w = self.factor.eval(x);
        w.is_finite() && w > 1e-6
    }
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> RVec {
        for _ in 0..1000 {
            let x = RVec::from_fn(4, |_, _| rng.random_range(-3.0..3.0));
            if self.in_chart(x.as_slice()) {
                return x;
            }
        }
        RVec::zeros(4)
    }
}

type DualMetricFn = dyn Fn(&[Dual64]) -> DMatrix<Dual64> + Send + Sync;
type Guard = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// User metric given as a callable over dual numbers; derivatives default to
/// forward mode.
#[derive(Clone)]
pub struct ClosureMetric {
    dim: usize,
    label: String,
    f: Arc<DualMetricFn>,
    guard: Guard,
    sample_box: (f64, f64),
}

impl fmt::Debug for ClosureMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl ClosureMetric {
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        f: impl Fn(&[Dual64]) -> DMatrix<Dual64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            label: label.into(),
            f: Arc::new(f),
            guard: Arc::new(|_| true),
            sample_box: (-1.0, 1.0),
        }
    }

    pub fn with_guard(mut self, guard: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.guard = Arc::new(guard);
        self
    }

    pub fn with_sample_box(mut self, lo: f64, hi: f64) -> Self {
        self.sample_box = (lo, hi);
        self
    }
}

impl MetricModel for ClosureMetric {
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> String {
        self.label.clone()
    }
    fn components(&self, x: &[f64]) -> RMat {
        let xd: Vec<Dual64> = x.iter().map(|&v| Dual64::from(v)).collect();
        (self.f)(&xd).map(|d| d.re)
    }
    fn components_dual(&self, x: &[Dual64]) -> DMatrix<Dual64> {
        (self.f)(x)
    }
    fn in_chart(&self, x: &[f64]) -> bool {
        (self.guard)(x)
    }
    fn sample_point(&self, rng: &mut ChaCha8Rng) -> RVec {
        let (lo, hi) = self.sample_box;
        for _ in 0..1000 {
            let x = RVec::from_fn(self.dim, |_, _| rng.random_range(lo..hi));
            if self.in_chart(x.as_slice()) {
                return x;
            }
        }
        RVec::zeros(self.dim)
    }
}

pub fn minkowski(dim: usize) -> MetricField {
    MetricField::new(Arc::new(Minkowski::new(dim)), DerivativeMode::ClosedForm)
}

pub fn schwarzschild(mass: f64) -> MetricField {
    MetricField::new(Arc::new(Schwarzschild::new(mass)), DerivativeMode::ClosedForm)
}

pub fn schwarzschild_isotropic(mass: f64) -> MetricField {
    MetricField::new(
        Arc::new(SchwarzschildIsotropic::new(mass)),
        DerivativeMode::ClosedForm,
    )
}

pub fn boosted_minkowski(v: f64) -> Result<MetricField> {
    Ok(MetricField::new(
        Arc::new(LinearMinkowski::boosted(v)?),
        DerivativeMode::ClosedForm,
    ))
}

pub fn conformal_flat(expression: &str) -> Result<MetricField> {
    Ok(MetricField::new(
        Arc::new(ConformalFlat::new(expression)?),
        DerivativeMode::ClosedForm,
    ))
}

/// Resolves a catalog identifier to a metric field with closed-form derivatives.
pub fn from_id(id: &str) -> Result<MetricField> {
    let id = id.trim();
    let (head, arg) = split_id(id);
    let unknown = || Error::UnknownMetric(id.to_string());
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| unknown());
    match head {
        "minkowski" => {
            let dim = arg.trim().parse::<usize>().map_err(|_| unknown())?;
            if dim < 2 {
                return Err(unknown());
            }
            Ok(minkowski(dim))
        }
        "schwarzschild" => {
            let m = number(arg)?;
            if !(m > 0.0) {
                return Err(unknown());
            }
            Ok(schwarzschild(m))
        }
        "schwarzschild_isotropic" => {
            let m = number(arg)?;
            if !(m > 0.0) {
                return Err(unknown());
            }
            Ok(schwarzschild_isotropic(m))
        }
        "boosted_minkowski" => boosted_minkowski(number(arg)?),
        "conformal_flat" => conformal_flat(arg),
        _ => Err(unknown()),
    }
}

fn split_id(id: &str) -> (&str, &str) {
    if let Some(open) = id.find('{') {
        if id.ends_with('}') {
            return (&id[..open], &id[open + 1..id.len() - 1]);
        }
        return (id, "");
    }
    let split = id
        .find(|c: char| c.is_ascii_digit() || c == '.' || c == '-')
        .unwrap_or(id.len());
    (&id[..split], &id[split..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn parses_catalog_ids() {
        assert_eq!(from_id("minkowski4").unwrap().dim(), 4);
        assert_eq!(from_id("minkowski{2}").unwrap().dim(), 2);
        assert_eq!(from_id("schwarzschild1").unwrap().name(), "schwarzschild1");
        assert_eq!(from_id("schwarzschild{1.5}").unwrap().name(), "schwarzschild1.5");
        assert!(from_id("schwarzschild_isotropic1").is_ok());
        assert!(from_id("boosted_minkowski0.5").is_ok());
        assert!(from_id("conformal_flat{1 + 0.1*exp(-x^2)}").is_ok());
        for bad in ["kerr1", "minkowski", "schwarzschild-1", "boosted_minkowski1.5", "conformal_flat{q}"] {
            assert!(from_id(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn closed_form_derivatives_match_autodiff() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fields = [
            schwarzschild(1.0),
            schwarzschild_isotropic(1.3),
            conformal_flat("1 + 0.2*sin(x)*cos(t) + 0.1*y*z").unwrap(),
            boosted_minkowski(0.5).unwrap(),
        ];
        for f in &fields {
            let ad = f.with_mode(DerivativeMode::ForwardAutodiff);
            for _ in 0..20 {
                let x = f.model().sample_point(&mut rng);
                for k in 0..4 {
                    let a = f.metric_derivative(x.as_slice(), k).unwrap();
                    let b = ad.metric_derivative(x.as_slice(), k).unwrap();
                    assert!((a - b).amax() < 1e-12, "{} d{k}", f.name());
                }
            }
        }
    }

    #[test]
    fn signature_is_lorentzian_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in [
            minkowski(4),
            minkowski(2),
            schwarzschild(1.0),
            schwarzschild_isotropic(1.0),
            boosted_minkowski(0.5).unwrap(),
            conformal_flat("1 + 0.1*exp(-x^2-y^2)").unwrap(),
        ] {
            for _ in 0..100 {
                let x = f.model().sample_point(&mut rng);
                f.check_lorentzian(x.as_slice()).unwrap();
                let (g, gi) = f.eval_metric(x.as_slice()).unwrap();
                assert!((&g * &gi - RMat::identity(f.dim(), f.dim())).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn boosted_chart_is_still_eta() {
        let f = boosted_minkowski(0.5).unwrap();
        let (g, _) = f.eval_metric(&[0.0; 4]).unwrap();
        let eta = RMat::from_diagonal(&super::super::minkowski_eta(4));
        assert!((g - eta).amax() < 1e-14);
    }

    #[test]
    fn isotropic_radius_round_trip() {
        for r in [2.5, 3.0, 10.0, 50.0] {
            let rho = areal_to_isotropic_radius(1.0, r);
            assert!((isotropic_to_areal_radius(1.0, rho) - r).abs() < 1e-12);
        }
    }

    #[test]
    fn closure_metric_uses_autodiff() {
        let m = ClosureMetric::new(2, "warped", |x: &[Dual64]| {
            let a = (x[1] * 0.3).exp();
            diag(&[-a, Dual64::from(1.0)])
        });
        let f = MetricField::new(Arc::new(m), DerivativeMode::ForwardAutodiff);
        let d = f.metric_derivative(&[0.0, 1.0], 1).unwrap();
        assert!((d[(0, 0)] + 0.3 * 0.3_f64.exp()).abs() < 1e-15);
        assert!(f.with_mode(DerivativeMode::ClosedForm).metric_derivative(&[0.0, 1.0], 1).is_err());
    }
}

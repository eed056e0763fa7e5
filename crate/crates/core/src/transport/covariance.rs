use serde::{Deserialize, Serialize};

use super::{run_comparison, CompareOptions, PolarizationState};
use crate::clifford::CliffordModule;
use crate::error::{check_dim, Error, Result};
use crate::geometry::catalog::{areal_to_isotropic_radius, isotropic_to_areal_radius};
use crate::geometry::{MetricField, PhasePoint};
use crate::linalg::{c, try_inverse_c, vec_norm, CMat, RMat, RVec};
use crate::symbols::{kernel_basis, DensityWeighting, DiracFactorization, DiracSystem, TimelikeField};

/// A diffeomorphism `y = φ(x)` from chart A to chart B.
pub trait ChartMap: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn forward(&self, x: &[f64]) -> Result<RVec>;
    fn inverse(&self, y: &[f64]) -> Result<RVec>;
    /// `J = ∂y/∂x` at `x`.
    fn jacobian(&self, x: &[f64]) -> Result<RMat>;

    /// Pushes `(x, ξ)` to chart B: `ξ_B = J^{-T} ξ_A`.
    fn push_phase(&self, p: &PhasePoint) -> Result<PhasePoint> {
        let j = self.jacobian(p.x.as_slice())?;
        let jinv = invert(&j, &self.name())?;
        PhasePoint::new(self.forward(p.x.as_slice())?, jinv.transpose() * &p.xi)
    }

    /// Pulls `(y, η)` back to chart A: `ξ_A = J^T η`.
    fn pull_phase(&self, p: &PhasePoint) -> Result<PhasePoint> {
        let x = self.inverse(p.x.as_slice())?;
        let j = self.jacobian(x.as_slice())?;
        PhasePoint::new(x, j.transpose() * &p.xi)
    }
}

fn invert(j: &RMat, name: &str) -> Result<RMat> {
    let det = j.determinant();
    if !(det.abs() > 1e-14) {
        return Err(Error::ChartMapDegenerate(format!("{name}: det J = {det:e}")));
    }
    j.clone()
        .try_inverse()
        .ok_or_else(|| Error::ChartMapDegenerate(format!("{name}: singular Jacobian")))
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityMap {
    pub dim: usize,
}

impl ChartMap for IdentityMap {
    fn name(&self) -> String {
        "identity".into()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn forward(&self, x: &[f64]) -> Result<RVec> {
        Ok(RVec::from_column_slice(x))
    }
    fn inverse(&self, y: &[f64]) -> Result<RVec> {
        Ok(RVec::from_column_slice(y))
    }
    fn jacobian(&self, _x: &[f64]) -> Result<RMat> {
        Ok(RMat::identity(self.dim, self.dim))
    }
}

/// `y = Λ x` for a constant invertible `Λ`.
#[derive(Debug, Clone)]
pub struct LinearChartMap {
    label: String,
    matrix: RMat,
    inverse: RMat,
}

impl LinearChartMap {
    pub fn new(label: impl Into<String>, matrix: RMat) -> Result<Self> {
        let label = label.into();
        let inverse = invert(&matrix, &label)?;
        Ok(Self { label, matrix, inverse })
    }
}

impl ChartMap for LinearChartMap {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn forward(&self, x: &[f64]) -> Result<RVec> {
        check_dim(self.dim(), x.len())?;
        Ok(&self.matrix * RVec::from_column_slice(x))
    }
    fn inverse(&self, y: &[f64]) -> Result<RVec> {
        check_dim(self.dim(), y.len())?;
        Ok(&self.inverse * RVec::from_column_slice(y))
    }
    fn jacobian(&self, _x: &[f64]) -> Result<RMat> {
        Ok(self.matrix.clone())
    }
}

/// Schwarzschild areal radius `r` to isotropic radius `ρ`, other coordinates fixed.
#[derive(Debug, Clone, Copy)]
pub struct ArealToIsotropic {
    pub mass: f64,
}

impl ChartMap for ArealToIsotropic {
    fn name(&self) -> String {
        format!("areal_to_isotropic{}", self.mass)
    }
    fn dim(&self) -> usize {
        4
    }
    fn forward(&self, x: &[f64]) -> Result<RVec> {
        check_dim(4, x.len())?;
        if !(x[1] > 2.0 * self.mass) {
            return Err(Error::ChartMapDegenerate(format!("r = {} inside the horizon", x[1])));
        }
        Ok(RVec::from_vec(vec![x[0], areal_to_isotropic_radius(self.mass, x[1]), x[2], x[3]]))
    }
    fn inverse(&self, y: &[f64]) -> Result<RVec> {
        check_dim(4, y.len())?;
        Ok(RVec::from_vec(vec![y[0], isotropic_to_areal_radius(self.mass, y[1]), y[2], y[3]]))
    }
    fn jacobian(&self, x: &[f64]) -> Result<RMat> {
        check_dim(4, x.len())?;
        let (m, r) = (self.mass, x[1]);
        let s = (r * r - 2.0 * m * r).sqrt();
        if !(s > 0.0) {
            return Err(Error::ChartMapDegenerate(format!("dρ/dr undefined at r = {r}")));
        }
        let mut j = RMat::identity(4, 4);
        j[(1, 1)] = 0.5 * (1.0 + (r - m) / s);
        Ok(j)
    }
}

/// Spinor matrix `S` with `ψ_A = S ψ_B`, intertwining the frame gammas of the two
/// charts at corresponding points. Normalized to `|det S| = 1` with real positive trace.
pub fn spinor_frame_change(rep_a: &CliffordModule, rep_b: &CliffordModule, map: &dyn ChartMap, x_a: &[f64]) -> Result<CMat> {
    let n = rep_a.dim();
    check_dim(n, map.dim())?;
    let geo_a = rep_a.geometry(x_a)?;
    let x_b = map.forward(x_a)?;
    let geo_b = rep_b.geometry(x_b.as_slice())?;
    let jinv = invert(&map.jacobian(x_a)?, &map.name())?;
    // frame B vectors in frame A components
    let l = &geo_a.frame.coframe * jinv * &geo_b.frame.e;
    let r = rep_a.rank();
    let ident = CMat::identity(r, r);
    if l == RMat::identity(n, n) && rep_a.gammas() == rep_b.gammas() {
        return Ok(ident);
    }
    let mut system = CMat::zeros(n * r * r, r * r);
    for b in 0..n {
        let mut lifted = CMat::zeros(r, r);
        for a in 0..n {
            lifted += &rep_a.gammas()[a] * c(l[(a, b)], 0.0);
        }
        let block = ident.kronecker(&lifted) - rep_b.gammas()[b].transpose().kronecker(&ident);
        system.view_mut((b * r * r, 0), (r * r, r * r)).copy_from(&block);
    }
    let kernel = kernel_basis(&system, 1e-8);
    if kernel.dim != 1 {
        return Err(Error::ChartMapDegenerate(format!(
            "{}: spinor lift has a {}-dimensional solution space",
            map.name(),
            kernel.dim
        )));
    }
    let mut s = CMat::from_column_slice(r, r, kernel.vectors[0].as_slice());
    let det = s.determinant();
    s /= c(det.norm().powf(1.0 / r as f64), 0.0);
    let tr = s.trace();
    if tr.norm() > 1e-12 {
        s *= tr.conj() / tr.norm();
    }
    try_inverse_c(&s).ok_or_else(|| Error::ChartMapDegenerate(format!("{}: singular spinor lift", map.name())))?;
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct CovarianceScenario {
    pub chart_a: MetricField,
    pub chart_b: MetricField,
    /// Initial state in chart A.
    pub start: PolarizationState,
    pub t_end: f64,
    pub options: CompareOptions,
    pub weighting: DensityWeighting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub map: String,
    pub samples: usize,
    pub max_x_gap: f64,
    pub max_xi_gap: f64,
    pub max_denker_gap: f64,
    pub max_spin_gap: f64,
    pub discrepancy: f64,
}

/// Runs the same ray in both charts and maps chart B back to chart A sample by sample.
pub fn covariance_check(scenario: &CovarianceScenario, map: &dyn ChartMap) -> Result<CovarianceReport> {
    let build = |m: &MetricField| -> Result<(DiracSystem, DiracFactorization)> {
        let rep = CliffordModule::canonical(m.clone())?;
        Ok((
            DiracSystem::with_weighting(rep.clone(), scenario.weighting),
            DiracFactorization::new(rep, TimelikeField::FrameTime),
        ))
    };
    let (sys_a, fac_a) = build(&scenario.chart_a)?;
    let (sys_b, fac_b) = build(&scenario.chart_b)?;
    let opts = CompareOptions {
        convergence: false,
        ..scenario.options
    };
    let start = &scenario.start;
    let s0 = spinor_frame_change(sys_a.module(), sys_b.module(), map, start.phase.x.as_slice())?;
    let s0_inv = try_inverse_c(&s0).expect("checked in spinor_frame_change");
    let start_b = PolarizationState::new(map.push_phase(&start.phase)?, &s0_inv * &start.w)?;

    let run_a = run_comparison(&sys_a, &fac_a, start, scenario.t_end, &opts)?;
    let run_b = run_comparison(&sys_b, &fac_b, &start_b, scenario.t_end, &opts)?;
    if run_a.trajectory.len() != run_b.trajectory.len() {
        return Err(Error::ChartMapDegenerate(format!(
            "{}: step grids differ ({} vs {} samples)",
            map.name(),
            run_a.trajectory.len(),
            run_b.trajectory.len()
        )));
    }
    let w0 = vec_norm(&start.w);
    let mut report = CovarianceReport {
        map: map.name(),
        samples: run_a.trajectory.len(),
        max_x_gap: 0.0,
        max_xi_gap: 0.0,
        max_denker_gap: 0.0,
        max_spin_gap: 0.0,
        discrepancy: 0.0,
    };
    for i in 0..run_a.trajectory.len() {
        let pa = &run_a.trajectory.samples[i].phase;
        let pb = map.pull_phase(&run_b.trajectory.samples[i].phase)?;
        let s = spinor_frame_change(sys_a.module(), sys_b.module(), map, pb.x.as_slice())?;
        report.max_x_gap = report.max_x_gap.max((&pa.x - &pb.x).amax() / (1.0 + pa.x.amax()));
        report.max_xi_gap = report.max_xi_gap.max((&pa.xi - &pb.xi).amax() / pa.xi.amax());
        let wd = &s * &run_b.denker.sections[i];
        let ws = &s * &run_b.spin.sections[i];
        report.max_denker_gap = report.max_denker_gap.max(vec_norm(&(wd - &run_a.denker.sections[i])) / w0);
        report.max_spin_gap = report.max_spin_gap.max(vec_norm(&(ws - &run_a.spin.sections[i])) / w0);
    }
    report.discrepancy = report
        .max_x_gap
        .max(report.max_xi_gap)
        .max(report.max_denker_gap)
        .max(report.max_spin_gap);
    Ok(report)
}

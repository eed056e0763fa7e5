//! Polarization transport along null bicharacteristics.
//!
//! Two ODEs run on one shared step grid: the Denker connection of the Dirac
//! system, `dw/dt = −M(t) w`, and the spin connection pulled back along the
//! projected geodesic, `ds/dt = −ω(ẋ) s`.

mod covariance;

pub use covariance::{
    covariance_check, spinor_frame_change, ArealToIsotropic, ChartMap, CovarianceReport, CovarianceScenario,
    IdentityMap, LinearChartMap,
};

use serde::{Deserialize, Serialize};

use crate::clifford::{contract, CliffordModule};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{integrate_bicharacteristic, FlowOptions, Integrator, PhasePoint, Termination, Trajectory};
use crate::linalg::{c, pack_complex, spectral_norm, unpack_complex, vec_norm, CMat, CVec, I};
use crate::symbols::{principal_symbol, DiracFactorization, DiracSystem, Factorization, FirstOrderSystem, SymbolPackage};

pub const DEFAULT_KERNEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMethod {
    Denker,
    SpinPullback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationState {
    pub phase: PhasePoint,
    #[serde(with = "crate::linalg::serde_cvec")]
    pub w: CVec,
}

impl PolarizationState {
    pub fn new(phase: PhasePoint, w: CVec) -> Result<Self> {
        check_dim(2usize.pow(phase.dim() as u32 / 2), w.len())?;
        Ok(Self { phase, w })
    }

    pub fn kernel_residual<S: FirstOrderSystem + ?Sized>(&self, sys: &S) -> Result<f64> {
        Ok(kernel_residual(&principal_symbol(sys, &self.phase)?, &self.w))
    }
}

/// `‖σ w‖ / ‖w‖`.
pub fn kernel_residual(sigma: &CMat, w: &CVec) -> f64 {
    let n = vec_norm(w);
    if n == 0.0 {
        f64::INFINITY
    } else {
        vec_norm(&(sigma * w)) / n
    }
}

/// A spanning section of a Hamiltonian orbit, sampled on the trajectory grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianOrbit {
    pub trajectory: Trajectory,
    #[serde(with = "crate::linalg::serde_cvec_vec")]
    pub sections: Vec<CVec>,
    pub kernel_residuals: Vec<f64>,
    /// `⟨w(t), w(t)⟩` for the module Gram matrix.
    pub products: Vec<f64>,
    pub method: TransportMethod,
    /// `exp(∫ ‖generator‖ dt)` by the trapezoid rule.
    pub growth_bound: f64,
}

impl HamiltonianOrbit {
    pub fn max_kernel_residual(&self) -> f64 {
        self.kernel_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn product_drift(&self) -> f64 {
        let p0 = self.products[0];
        self.products.iter().fold(0.0, |a, p| a.max((p - p0).abs()))
    }

    pub fn last(&self) -> &CVec {
        self.sections.last().expect("orbit has at least one section")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenkerOptions {
    pub kernel_tol: f64,
    /// Negative control: reverse the sign of the `iσ̃σ^s` term.
    pub flip_subprincipal: bool,
}

impl Default for DenkerOptions {
    fn default() -> Self {
        Self {
            kernel_tol: DEFAULT_KERNEL_TOL,
            flip_subprincipal: false,
        }
    }
}

/// `M = ½{σ̃, σ_m} + iσ̃σ^s`, so that parallel transport reads `dw/dt = −M w`.
pub fn denker_generator(pkg: &SymbolPackage) -> CMat {
    denker_generator_signed(pkg, false)
}

pub fn denker_generator_signed(pkg: &SymbolPackage, flip: bool) -> CMat {
    let sign = if flip { -1.0 } else { 1.0 };
    &pkg.bracket * c(0.5, 0.0) + &pkg.sigma_tilde * &pkg.p_sub * (I * sign)
}

fn gram_product(rep: &CliffordModule, w: &CVec) -> f64 {
    rep.product(w, w).re
}

fn trapezoid_growth(traj: &Trajectory, norms: &[f64]) -> f64 {
    let integral: f64 = traj.steps.iter().zip(norms.windows(2)).map(|(h, w)| 0.5 * h * (w[0] + w[1])).sum();
    integral.exp()
}

/// Integrates the Denker connection along `traj` from a kernel vector `w0`.
pub fn transport_denker<S, F>(
    sys: &S,
    fac: &F,
    rep: &CliffordModule,
    traj: &Trajectory,
    w0: &CVec,
    opts: &DenkerOptions,
) -> Result<HamiltonianOrbit>
where
    S: FirstOrderSystem + ?Sized,
    F: Factorization + ?Sized,
{
    check_dim(sys.rank(), w0.len())?;
    let start = &traj.first().phase;
    let residual = kernel_residual(&principal_symbol(sys, start)?, w0);
    if !(residual <= opts.kernel_tol) {
        return Err(Error::KernelViolation {
            residual,
            tol: opts.kernel_tol,
        });
    }
    let ys = traj.integrate_along(rep.metric(), &pack_complex(w0), |p, y| {
        let pkg = SymbolPackage::compute(sys, fac, p)?;
        let m = denker_generator_signed(&pkg, opts.flip_subprincipal);
        Ok(pack_complex(&(-(m * unpack_complex(y)))))
    })?;
    let sections: Vec<CVec> = ys.iter().map(|y| unpack_complex(y)).collect();
    let mut kernel_residuals = Vec::with_capacity(sections.len());
    let mut norms = Vec::with_capacity(sections.len());
    for (s, w) in traj.samples.iter().zip(&sections) {
        let pkg = SymbolPackage::compute(sys, fac, &s.phase)?;
        kernel_residuals.push(kernel_residual(&pkg.sigma_m, w));
        norms.push(spectral_norm(&denker_generator_signed(&pkg, opts.flip_subprincipal)));
    }
    Ok(HamiltonianOrbit {
        growth_bound: trapezoid_growth(traj, &norms),
        products: sections.iter().map(|w| gram_product(rep, w)).collect(),
        trajectory: traj.clone(),
        sections,
        kernel_residuals,
        method: TransportMethod::Denker,
    })
}

/// Integrates `ds/dt = −ω(x(t); ẋ(t)) s` with `ẋ = ∂q/∂ξ`.
pub fn transport_spin(rep: &CliffordModule, traj: &Trajectory, s0: &CVec) -> Result<HamiltonianOrbit> {
    check_dim(rep.rank(), s0.len())?;
    let metric = rep.metric();
    let connection = |p: &PhasePoint| -> Result<CMat> {
        let geo = rep.geometry(p.x.as_slice())?;
        let (dx, _) = metric.hamiltonian_field(p)?;
        Ok(contract(&rep.spin_connection(&geo), &dx))
    };
    let ys = traj.integrate_along(metric, &pack_complex(s0), |p, y| {
        Ok(pack_complex(&(-(connection(p)? * unpack_complex(y)))))
    })?;
    let sections: Vec<CVec> = ys.iter().map(|y| unpack_complex(y)).collect();
    let mut kernel_residuals = Vec::with_capacity(sections.len());
    let mut norms = Vec::with_capacity(sections.len());
    for (s, w) in traj.samples.iter().zip(&sections) {
        let geo = rep.geometry(s.phase.x.as_slice())?;
        let z = metric.raise_covector(&s.phase)?;
        kernel_residuals.push(kernel_residual(&(rep.gamma_at(&geo, &z) * I), w));
        norms.push(spectral_norm(&connection(&s.phase)?));
    }
    Ok(HamiltonianOrbit {
        growth_bound: trapezoid_growth(traj, &norms),
        products: sections.iter().map(|w| gram_product(rep, w)).collect(),
        trajectory: traj.clone(),
        sections,
        kernel_residuals,
        method: TransportMethod::SpinPullback,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub flow: FlowOptions,
    pub denker: DenkerOptions,
    /// Also rerun at half and quarter step to estimate convergence.
    pub convergence: bool,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            flow: FlowOptions::default(),
            denker: DenkerOptions::default(),
            convergence: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    /// `sup_t ‖w_denker(t) − w_spin(t)‖ / ‖w(0)‖`.
    pub max_gap: f64,
    pub final_gap: f64,
    pub max_kernel_residual: f64,
    pub denker_kernel_residual: f64,
    pub spin_kernel_residual: f64,
    pub q_drift: f64,
    pub product_drift: f64,
    /// Richardson ratio `|y_h − y_{h/2}| / |y_{h/2} − y_{h/4}|` of the joint endpoint.
    pub convergence_ratio: Option<f64>,
    /// `max_gap(h) / max_gap(h/2)`.
    pub gap_halving_ratio: Option<f64>,
    pub growth_bound: f64,
    pub samples: usize,
    pub t_end: f64,
    pub integrator: Integrator,
    pub termination: Termination,
    pub flip_subprincipal: bool,
}

/// Both orbits on one trajectory plus their report.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub trajectory: Trajectory,
    pub denker: HamiltonianOrbit,
    pub spin: HamiltonianOrbit,
    pub report: TransportReport,
}

fn single_run(
    sys: &DiracSystem,
    fac: &DiracFactorization,
    p0: &PolarizationState,
    t_end: f64,
    opts: &CompareOptions,
) -> Result<(Trajectory, HamiltonianOrbit, HamiltonianOrbit, f64, f64)> {
    let rep = sys.module();
    let traj = integrate_bicharacteristic(rep.metric(), &p0.phase, t_end, &opts.flow)?.require_complete()?;
    let denker = transport_denker(sys, fac, rep, &traj, &p0.w, &opts.denker)?;
    let spin = transport_spin(rep, &traj, &p0.w)?;
    let w0 = vec_norm(&p0.w);
    let gaps: Vec<f64> = denker
        .sections
        .iter()
        .zip(&spin.sections)
        .map(|(a, b)| vec_norm(&(a - b)) / w0)
        .collect();
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    Ok((traj, denker, spin, max_gap, *gaps.last().unwrap()))
}

fn endpoint(traj: &Trajectory, denker: &HamiltonianOrbit, spin: &HamiltonianOrbit) -> Vec<f64> {
    let p = &traj.last().phase;
    let mut v: Vec<f64> = p.x.iter().chain(p.xi.iter()).copied().collect();
    v.extend(pack_complex(denker.last()));
    v.extend(pack_complex(spin.last()));
    v
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn refined(flow: &FlowOptions, factor: f64) -> FlowOptions {
    let mut f = *flow;
    f.integrator = match flow.integrator {
        Integrator::Rk4Fixed { step } => Integrator::Rk4Fixed { step: step / factor },
        Integrator::Rk45Adaptive { tol } => Integrator::Rk45Adaptive { tol: tol / factor.powi(5) },
    };
    f
}

/// Runs the bicharacteristic once and both transports from the same `w0` on its grid.
pub fn run_comparison(
    sys: &DiracSystem,
    fac: &DiracFactorization,
    p0: &PolarizationState,
    t_end: f64,
    opts: &CompareOptions,
) -> Result<Comparison> {
    let (traj, denker, spin, max_gap, final_gap) = single_run(sys, fac, p0, t_end, opts)?;
    let (convergence_ratio, gap_halving_ratio) = if opts.convergence {
        let half = CompareOptions { flow: refined(&opts.flow, 2.0), ..*opts };
        let quarter = CompareOptions { flow: refined(&opts.flow, 4.0), ..*opts };
        let (t2, d2, s2, gap2, _) = single_run(sys, fac, p0, t_end, &half)?;
        let (t4, d4, s4, _, _) = single_run(sys, fac, p0, t_end, &quarter)?;
        let e1 = endpoint(&traj, &denker, &spin);
        let e2 = endpoint(&t2, &d2, &s2);
        let e4 = endpoint(&t4, &d4, &s4);
        (Some(distance(&e1, &e2) / distance(&e2, &e4)), Some(max_gap / gap2))
    } else {
        (None, None)
    };
    let report = TransportReport {
        max_gap,
        final_gap,
        max_kernel_residual: denker.max_kernel_residual().max(spin.max_kernel_residual()),
        denker_kernel_residual: denker.max_kernel_residual(),
        spin_kernel_residual: spin.max_kernel_residual(),
        q_drift: traj.q_drift(),
        product_drift: spin.product_drift(),
        convergence_ratio,
        gap_halving_ratio,
        growth_bound: denker.growth_bound,
        samples: traj.len(),
        t_end,
        integrator: opts.flow.integrator,
        termination: traj.termination,
        flip_subprincipal: opts.denker.flip_subprincipal,
    };
    Ok(Comparison {
        trajectory: traj,
        denker,
        spin,
        report,
    })
}

pub fn compare_transports(
    sys: &DiracSystem,
    fac: &DiracFactorization,
    p0: &PolarizationState,
    t_end: f64,
    opts: &CompareOptions,
) -> Result<TransportReport> {
    Ok(run_comparison(sys, fac, p0, t_end, opts)?.report)
}

use serde::{Deserialize, Serialize};

use super::{MetricField, PhasePoint};
use crate::error::{Error, Result};
use crate::linalg::RVec;
use crate::ode::{self, Tableau, DOPRI5, RK4};

/// Default null tolerance: `|q| < 1e-10 (1 + |ξ|²)`.
pub const DEFAULT_NULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Integrator {
    /// Classical RK4 on a uniform grid; the step is shrunk so that it divides `t_end`.
    Rk4Fixed { step: f64 },
    /// Dormand-Prince 5(4) with mixed absolute/relative tolerance `tol`.
    Rk45Adaptive { tol: f64 },
}

impl Integrator {
    fn tableau(&self) -> &'static Tableau {
        match self {
            Integrator::Rk4Fixed { .. } => &RK4,
            Integrator::Rk45Adaptive { .. } => &DOPRI5,
        }
    }
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Rk4Fixed { step: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub integrator: Integrator,
    /// Reject starting points off the characteristic set.
    pub require_null: bool,
    pub null_tol: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            integrator: Integrator::default(),
            require_null: true,
            null_tol: DEFAULT_NULL_TOL,
            min_step: 1e-12,
            max_steps: 10_000_000,
        }
    }
}

impl FlowOptions {
    pub fn rk4(step: f64) -> Self {
        Self {
            integrator: Integrator::Rk4Fixed { step },
            ..Self::default()
        }
    }

    pub fn rk45(tol: f64) -> Self {
        Self {
            integrator: Integrator::Rk45Adaptive { tol },
            ..Self::default()
        }
    }

    pub fn allow_non_null(mut self) -> Self {
        self.require_null = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Termination {
    Completed,
    /// The next step would have left the chart guard; samples end at `t`.
    LeftChart { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub phase: PhasePoint,
    pub q: f64,
}

/// Sampled bicharacteristic. `steps[i]` is the step taken from sample `i` to `i + 1`,
/// which lets other ODEs be integrated on exactly the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub steps: Vec<f64>,
    pub integrator: Integrator,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// `max_t |q(t) − q(0)|`.
    pub fn q_drift(&self) -> f64 {
        let q0 = self.samples[0].q;
        self.samples.iter().fold(0.0, |a, s| a.max((s.q - q0).abs()))
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// Converts an early chart exit into [`Error::LeftChart`].
    pub fn require_complete(self) -> Result<Self> {
        match self.termination {
            Termination::Completed => Ok(self),
            Termination::LeftChart { t } => Err(Error::LeftChart { t }),
        }
    }

    /// Integrates `y' = f(phase, y)` jointly with the Hamiltonian flow, replaying the
    /// recorded steps with the same tableau. Returns `y` at every sample.
    pub fn integrate_along<F>(&self, metric: &MetricField, y0: &[f64], mut f: F) -> Result<Vec<Vec<f64>>>
    where
        F: FnMut(&PhasePoint, &[f64]) -> Result<Vec<f64>>,
    {
        let n = metric.dim();
        let m = y0.len();
        let tab = self.integrator.tableau();
        let first = &self.samples[0].phase;
        let mut state: Vec<f64> = first.x.iter().chain(first.xi.iter()).copied().collect();
        state.extend_from_slice(y0);
        let mut out = Vec::with_capacity(self.samples.len());
        out.push(y0.to_vec());
        for &h in &self.steps {
            let next = ode::step(tab, &state, h, |s| {
                let phase = unpack(s, n);
                let (dx, dxi) = metric.hamiltonian_field(&phase)?;
                let dy = f(&phase, &s[2 * n..2 * n + m])?;
                Ok(dx.iter().chain(dxi.iter()).chain(dy.iter()).copied().collect())
            })?;
            state = next.y;
            out.push(state[2 * n..].to_vec());
        }
        Ok(out)
    }
}

fn unpack(s: &[f64], n: usize) -> PhasePoint {
    PhasePoint {
        x: RVec::from_column_slice(&s[..n]),
        xi: RVec::from_column_slice(&s[n..2 * n]),
    }
}

fn flow_rhs(metric: &MetricField, s: &[f64]) -> Result<Vec<f64>> {
    let n = s.len() / 2;
    let (dx, dxi) = metric.hamiltonian_field(&unpack(s, n))?;
    Ok(dx.iter().chain(dxi.iter()).copied().collect())
}

fn leaves_chart(e: &Error) -> bool {
    matches!(
        e,
        Error::OutsideChart { .. } | Error::DegenerateMetric { .. } | Error::FrameDegenerate { .. }
    )
}

/// Integrates the Hamiltonian field of `q` from `p0` over `[0, t_end]`.
///
/// Leaving the chart mid-integration is not an error: the partial trajectory is
/// returned with [`Termination::LeftChart`].
pub fn integrate_bicharacteristic(
    metric: &MetricField,
    p0: &PhasePoint,
    t_end: f64,
    options: &FlowOptions,
) -> Result<Trajectory> {
    let n = metric.dim();
    crate::error::check_dim(n, p0.dim())?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
    }
    let q0 = metric.hamiltonian_q(p0)?;
    let null_tol = options.null_tol * (1.0 + p0.xi.norm_squared());
    if options.require_null && q0.abs() >= null_tol {
        return Err(Error::NotOnCharacteristicSet {
            q: q0.abs(),
            tol: null_tol,
        });
    }
    let mut samples = vec![TrajectorySample {
        t: 0.0,
        phase: p0.clone(),
        q: q0,
    }];
    let mut steps = Vec::new();
    let mut state: Vec<f64> = p0.x.iter().chain(p0.xi.iter()).copied().collect();
    let mut t = 0.0;
    let mut termination = Termination::Completed;
    let push = |samples: &mut Vec<TrajectorySample>, t: f64, s: &[f64]| -> Result<()> {
        let phase = unpack(s, n);
        let q = metric.hamiltonian_q(&phase)?;
        samples.push(TrajectorySample { t, phase, q });
        Ok(())
    };

    match options.integrator {
        Integrator::Rk4Fixed { step } => {
            if !(step > 0.0) {
                return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
            }
            let count = (t_end / step - 1e-9).ceil().max(1.0) as usize;
            if count > options.max_steps {
                return Err(Error::InvalidParameter(format!("{count} steps exceed max_steps")));
            }
            let h = t_end / count as f64;
            for i in 0..count {
                let next = match ode::step(&RK4, &state, h, |s| flow_rhs(metric, s)) {
                    Ok(s) => s.y,
                    Err(e) if leaves_chart(&e) => {
                        termination = Termination::LeftChart { t };
                        break;
                    }
                    Err(e) => return Err(e),
                };
                if !metric.in_chart(&next[..n]) {
                    termination = Termination::LeftChart { t };
                    break;
                }
                state = next;
                t = if i + 1 == count { t_end } else { (i + 1) as f64 * h };
                steps.push(h);
                push(&mut samples, t, &state)?;
            }
        }
        Integrator::Rk45Adaptive { tol } => {
            if !(tol > 0.0) {
                return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
            }
            let mut h = (t_end * 1e-3).min(tol.powf(0.2) * 0.1).max(options.min_step);
            let mut taken = 0usize;
            while t < t_end {
                if taken >= options.max_steps {
                    return Err(Error::StepUnderflow { t, step: h });
                }
                let last = t + h >= t_end;
                let h_try = if last { t_end - t } else { h };
                let attempt = ode::step(&DOPRI5, &state, h_try, |s| flow_rhs(metric, s));
                let (next, err) = match attempt {
                    Ok(s) if metric.in_chart(&s.y[..n]) => {
                        let err = ode::error_norm(s.error.as_ref().unwrap(), &state, &s.y, tol);
                        (Some(s.y), err)
                    }
                    Ok(_) => (None, f64::INFINITY),
                    Err(e) if leaves_chart(&e) => (None, f64::INFINITY),
                    Err(e) => return Err(e),
                };
                match next {
                    Some(y) if err <= 1.0 => {
                        state = y;
                        t = if last { t_end } else { t + h_try };
                        steps.push(h_try);
                        taken += 1;
                        push(&mut samples, t, &state)?;
                        let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                        h = h_try.max(h) * grow;
                    }
                    _ => {
                        let shrink = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.25 };
                        h = h_try * shrink;
                        if h < options.min_step {
                            if err.is_finite() {
                                return Err(Error::StepUnderflow { t, step: h });
                            }
                            termination = Termination::LeftChart { t };
                            break;
                        }
                    }
                }
            }
        }
    }
    Ok(Trajectory {
        samples,
        steps,
        integrator: options.integrator,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::super::catalog::{minkowski, schwarzschild};
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn straight_light_ray() {
        let m = minkowski(4);
        let p0 = PhasePoint::from_slices(&[0.0; 4], &[1.0, 1.0, 0.0, 0.0]).unwrap();
        let tr = integrate_bicharacteristic(&m, &p0, 1.0, &FlowOptions::rk4(1e-2)).unwrap();
        let end = &tr.last().phase;
        assert!((end.x.clone() - RVec::from_vec(vec![-2.0, 2.0, 0.0, 0.0])).amax() < 1e-14);
        assert_eq!(end.xi, p0.xi);
        assert_eq!(tr.last().t, 1.0);
        assert_eq!(tr.len(), 101);
    }

    #[test]
    fn oblique_flat_ray_has_zero_drift() {
        let m = minkowski(4);
        let p0 = PhasePoint::from_slices(&[0.0; 4], &[1.0, 0.6, 0.8, 0.0]).unwrap();
        let tr = integrate_bicharacteristic(&m, &p0, 1.0, &FlowOptions::rk4(1e-3)).unwrap();
        let end = &tr.last().phase;
        assert!((end.x.clone() - RVec::from_vec(vec![-2.0, 1.2, 1.6, 0.0])).amax() < 1e-12);
        assert!(tr.q_drift() < 1e-15);
    }

    #[test]
    fn radial_schwarzschild_ray_conserves_q() {
        let m = schwarzschild(1.0);
        let p0 = PhasePoint::from_slices(&[0.0, 10.0, FRAC_PI_2, 0.0], &[1.0, 1.25, 0.0, 0.0]).unwrap();
        let tr = integrate_bicharacteristic(&m, &p0, 5.0, &FlowOptions::rk4(1e-3)).unwrap();
        assert!(tr.completed());
        assert!(tr.q_drift() < 1e-8, "{}", tr.q_drift());
        let adaptive = integrate_bicharacteristic(&m, &p0, 5.0, &FlowOptions::rk45(1e-10)).unwrap();
        assert!((adaptive.last().phase.x.clone() - tr.last().phase.x.clone()).amax() < 1e-7);
    }

    #[test]
    fn inward_ray_leaves_chart_with_partial_trajectory() {
        let m = schwarzschild(1.0);
        // future-directed, ingoing
        let p0 = PhasePoint::from_slices(&[0.0, 3.0, FRAC_PI_2, 0.0], &[-1.0, -3.0, 0.0, 0.0]).unwrap();
        assert!(m.hamiltonian_q(&p0).unwrap().abs() < 1e-12);
        for opts in [FlowOptions::rk4(1e-3), FlowOptions::rk45(1e-9)] {
            let tr = integrate_bicharacteristic(&m, &p0, 50.0, &opts).unwrap();
            assert!(matches!(tr.termination, Termination::LeftChart { .. }));
            assert!(tr.samples.iter().all(|s| m.in_chart(s.phase.x.as_slice())));
            assert!(tr.clone().require_complete().is_err());
        }
    }

    #[test]
    fn off_cone_start_is_rejected_unless_allowed() {
        let m = minkowski(4);
        let p0 = PhasePoint::from_slices(&[0.0; 4], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            integrate_bicharacteristic(&m, &p0, 1.0, &FlowOptions::rk4(0.1)),
            Err(Error::NotOnCharacteristicSet { .. })
        ));
        let tr = integrate_bicharacteristic(&m, &p0, 1.0, &FlowOptions::rk4(0.1).allow_non_null()).unwrap();
        assert_eq!(tr.last().q, -1.0);
    }

    #[test]
    fn augmented_replay_reproduces_grid() {
        let m = schwarzschild(1.0);
        let p0 = PhasePoint::from_slices(&[0.0, 10.0, FRAC_PI_2, 0.0], &[1.0, 1.25, 0.0, 0.0]).unwrap();
        let tr = integrate_bicharacteristic(&m, &p0, 1.0, &FlowOptions::rk4(1e-2)).unwrap();
        // y' = dr/dt along the ray integrates to r(t) - r(0)
        let ys = tr
            .integrate_along(&m, &[0.0], |p, _| Ok(vec![2.0 * m.raise_covector(p)?[1]]))
            .unwrap();
        for (s, y) in tr.samples.iter().zip(&ys) {
            assert!((s.phase.x[1] - 10.0 - y[0]).abs() < 1e-12);
        }
    }
}

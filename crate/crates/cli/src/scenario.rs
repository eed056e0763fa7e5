//! Resolution of a [`ScenarioConfig`] into library objects. Everything that can be
//! rejected is rejected here, before any command computes.

use lorentz_dirac::clifford::{check_future_timelike, CliffordModule};
use lorentz_dirac::geometry::{catalog, FlowOptions, MetricField, PhasePoint};
use lorentz_dirac::linalg::{c, CVec, RVec};
use lorentz_dirac::symbols::{kernel_basis, principal_symbol, DiracFactorization, DiracSystem, TimelikeField};
use lorentz_dirac::transport::{kernel_residual, PolarizationState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{call_syntax, CovectorSpec, PolarizationSpec, ScenarioConfig, TimelikeSpec};
use crate::CliError;

/// What a command needs from the scenario beyond the metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Needs {
    pub phase: bool,
    pub null: bool,
    pub polarization: bool,
    pub t_end: bool,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub metric: MetricField,
    pub system: DiracSystem,
    pub factorization: DiracFactorization,
    pub seed: u64,
    pub phase: Option<PhasePoint>,
    pub polarization: Option<PolarizationState>,
    pub t_end: f64,
}

impl Scenario {
    pub fn module(&self) -> &CliffordModule {
        self.system.module()
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            integrator: self.config.integrator,
            null_tol: self.config.tolerances.null,
            ..FlowOptions::default()
        }
    }

    pub fn phase(&self) -> &PhasePoint {
        self.phase.as_ref().expect("resolved with a phase point")
    }

    pub fn polarization(&self) -> &PolarizationState {
        self.polarization.as_ref().expect("resolved with a polarization")
    }

    /// Library errors raised here are input errors and map to exit code 2.
    pub fn resolve(config: ScenarioConfig, seed_override: Option<u64>, needs: Needs) -> Result<Self, CliError> {
        Self::resolve_inner(config, seed_override, needs).map_err(|e| match e {
            CliError::Library(e) => CliError::Invalid(e),
            other => other,
        })
    }

    fn resolve_inner(config: ScenarioConfig, seed_override: Option<u64>, needs: Needs) -> Result<Self, CliError> {
        let seed = seed_override.unwrap_or(config.sampling.seed);
        let metric = catalog::from_id(&config.metric.id)?.with_mode(config.metric.derivative_mode);
        let n = metric.dim();
        let mut rep = CliffordModule::canonical(metric.clone())?;
        if let Some(rot) = &config.metric.frame_rotation {
            rep = rep.with_frame_rotation(rot.clone())?;
        }
        let field = match &config.timelike_field {
            TimelikeSpec::Named(s) if s == "frame_time" => TimelikeField::FrameTime,
            TimelikeSpec::Named(s) if s == "coordinate_time" => TimelikeField::CoordinateTime,
            TimelikeSpec::Named(s) => return Err(CliError::Config(format!("unknown timelike_field {s:?}"))),
            TimelikeSpec::Components(v) => {
                if v.len() != n {
                    return Err(CliError::Config(format!("timelike_field needs {n} components, got {}", v.len())));
                }
                TimelikeField::Constant { components: v.clone() }
            }
        };
        check_positive("integrator step/tol", match config.integrator {
            lorentz_dirac::geometry::Integrator::Rk4Fixed { step } => step,
            lorentz_dirac::geometry::Integrator::Rk45Adaptive { tol } => tol,
        })?;
        let tol = &config.tolerances;
        for (name, v) in [
            ("tolerances.axioms", tol.axioms),
            ("tolerances.factorization", tol.factorization),
            ("tolerances.kernel", tol.kernel),
            ("tolerances.null", tol.null),
            ("tolerances.rank", tol.rank),
            ("tolerances.condition", tol.condition),
            ("tolerances.q_drift", tol.q_drift),
            ("tolerances.max_gap", tol.max_gap),
        ] {
            check_positive(name, v)?;
        }

        let x = match &config.chart_seed_point {
            Some(x) => {
                if x.len() != n {
                    return Err(CliError::Config(format!("chart_seed_point needs {n} coordinates, got {}", x.len())));
                }
                metric.check_point(x)?;
                metric.check_lorentzian(x)?;
                Some(x.clone())
            }
            None => None,
        };
        if let Some(x) = &x {
            let geo = rep.geometry(x)?;
            check_future_timelike(&geo, &field.eval(&geo)?.0)?;
        } else if let TimelikeField::Constant { components } = &field {
            let x0 = metric.model().sample_point(&mut ChaCha8Rng::seed_from_u64(seed));
            let geo = rep.geometry(x0.as_slice())?;
            check_future_timelike(&geo, &RVec::from_column_slice(components))?;
        }

        let system = DiracSystem::with_weighting(rep.clone(), config.metric.weighting);
        let factorization = DiracFactorization::new(rep, field);

        let t_end = match config.t_end {
            Some(t) => {
                check_positive("t_end", t)?;
                t
            }
            None if needs.t_end => return Err(CliError::Config("t_end is required".into())),
            None => 0.0,
        };

        let phase = if needs.phase {
            let x = x.as_ref().ok_or_else(|| CliError::Config("chart_seed_point is required".into()))?;
            let spec = config
                .initial_covector
                .as_ref()
                .ok_or_else(|| CliError::Config("initial_covector is required".into()))?;
            let xi = match spec {
                CovectorSpec::Components(v) => {
                    if v.len() != n {
                        return Err(CliError::Config(format!("initial_covector needs {n} components, got {}", v.len())));
                    }
                    RVec::from_column_slice(v)
                }
                CovectorSpec::Expr(e) => {
                    let arg = call_syntax(e, "random_null")
                        .ok_or_else(|| CliError::Config(format!("unknown initial_covector {e:?}")))?;
                    let s = match arg {
                        Some(a) => a.parse().map_err(|_| CliError::Config(format!("bad seed in {e:?}")))?,
                        None => seed,
                    };
                    metric.random_null_covector(x, &mut ChaCha8Rng::seed_from_u64(s))?
                }
            };
            let p = PhasePoint::new(RVec::from_column_slice(x), xi)?;
            if needs.null {
                let q = metric.hamiltonian_q(&p)?;
                let bound = tol.null * (1.0 + p.xi.norm_squared());
                if !(q.abs() < bound) {
                    return Err(lorentz_dirac::Error::NotOnCharacteristicSet { q: q.abs(), tol: bound }.into());
                }
            }
            Some(p)
        } else {
            None
        };

        let polarization = if needs.polarization {
            let p = phase.clone().expect("polarization implies phase");
            let sigma = principal_symbol(&system, &p)?;
            let w = match &config.initial_polarization {
                PolarizationSpec::Expr(e) => {
                    let arg = call_syntax(e, "kernel_basis")
                        .flatten()
                        .ok_or_else(|| CliError::Config(format!("unknown initial_polarization {e:?}")))?;
                    let i: usize = arg.parse().map_err(|_| CliError::Config(format!("bad index in {e:?}")))?;
                    let k = kernel_basis(&sigma, tol.rank);
                    k.vectors.get(i).cloned().ok_or_else(|| {
                        CliError::Config(format!("kernel_basis({i}) requested but the kernel has dimension {}", k.dim))
                    })?
                }
                PolarizationSpec::Components(v) => {
                    let w = CVec::from_iterator(v.len(), v.iter().map(|z| c(z[0], z[1])));
                    if w.len() != system.module().rank() {
                        return Err(CliError::Config(format!(
                            "initial_polarization needs {} entries, got {}",
                            system.module().rank(),
                            w.len()
                        )));
                    }
                    let residual = kernel_residual(&sigma, &w);
                    if !(residual <= tol.kernel) {
                        return Err(lorentz_dirac::Error::KernelViolation { residual, tol: tol.kernel }.into());
                    }
                    w
                }
            };
            Some(PolarizationState::new(p, w)?)
        } else {
            None
        };

        Ok(Self {
            config,
            metric,
            system,
            factorization,
            seed,
            phase,
            polarization,
            t_end,
        })
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

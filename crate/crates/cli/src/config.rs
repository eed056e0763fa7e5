//! Scenario files: one TOML document per run, unknown keys rejected.

use std::path::{Path, PathBuf};

use lorentz_dirac::clifford::FrameRotation;
use lorentz_dirac::geometry::{DerivativeMode, Integrator};
use lorentz_dirac::symbols::DensityWeighting;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub metric: MetricSpec,
    #[serde(default)]
    pub chart_seed_point: Option<Vec<f64>>,
    #[serde(default)]
    pub timelike_field: TimelikeSpec,
    #[serde(default)]
    pub initial_covector: Option<CovectorSpec>,
    #[serde(default)]
    pub initial_polarization: PolarizationSpec,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    /// Catalog id such as `minkowski4`, `schwarzschild{1}` or `conformal_flat{exp(0.1*x1)}`.
    pub id: String,
    #[serde(default)]
    pub derivative_mode: DerivativeMode,
    #[serde(default)]
    pub weighting: DensityWeighting,
    #[serde(default)]
    pub frame_rotation: Option<FrameRotation>,
}

/// `"frame_time"`, `"coordinate_time"` or explicit coordinate components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimelikeSpec {
    Named(String),
    Components(Vec<f64>),
}

impl Default for TimelikeSpec {
    fn default() -> Self {
        TimelikeSpec::Named("frame_time".into())
    }
}

/// Explicit components or `"random_null"` / `"random_null(seed)"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovectorSpec {
    Expr(String),
    Components(Vec<f64>),
}

/// `"kernel_basis(i)"` or explicit `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolarizationSpec {
    Expr(String),
    Components(Vec<[f64; 2]>),
}

impl Default for PolarizationSpec {
    fn default() -> Self {
        PolarizationSpec::Expr("kernel_basis(0)".into())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub format: Format,
    #[serde(default = "default_out")]
    pub path: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            format: Format::Json,
            path: default_out(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub axioms: f64,
    pub factorization: f64,
    pub kernel: f64,
    pub null: f64,
    pub rank: f64,
    pub condition: f64,
    pub q_drift: f64,
    pub max_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            axioms: 1e-6,
            factorization: 1e-10,
            kernel: 1e-8,
            null: 1e-10,
            rank: 1e-8,
            condition: 1e3,
            q_drift: 1e-6,
            max_gap: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sampling {
    /// Chart points for the module axioms.
    pub points: usize,
    /// Random vectors per point.
    pub vectors: usize,
    /// Phase points for the principal-type certificates.
    pub phase_points: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            points: 20,
            vectors: 10,
            phase_points: 20,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Parses `name(arg)` with an optional argument.
pub(crate) fn call_syntax<'a>(expr: &'a str, name: &str) -> Option<Option<&'a str>> {
    let expr = expr.trim();
    let rest = expr.strip_prefix(name)?;
    if rest.is_empty() {
        return Some(None);
    }
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(Some(inner.trim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ScenarioConfig::parse("[metric]\nid = \"minkowski4\"\n").unwrap();
        assert_eq!(c.integrator, Integrator::Rk4Fixed { step: 1e-3 });
        assert_eq!(c.timelike_field, TimelikeSpec::Named("frame_time".into()));
        assert_eq!(c.outputs.format, Format::Json);
        assert_eq!(c.tolerances.max_gap, 1e-6);
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"
chart_seed_point = [0.0, 10.0, 1.5707963267948966, 0.0]
timelike_field = [1.2, 0.0, 0.0, 0.0]
initial_covector = "random_null(7)"
initial_polarization = [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0]]
t_end = 5.0

[metric]
id = "schwarzschild{1}"
derivative_mode = { kind = "central_difference", scale = 1e-5 }
weighting = "none"
frame_rotation = { plane = [1, 2], gradient = [0.0, 5.0, 3.0, 1.0] }

[integrator]
kind = "rk45_adaptive"
tol = 1e-10

[outputs]
format = "csv"
path = "runs/a"

[tolerances]
max_gap = 1e-7

[sampling]
seed = 3
"#;
        let c = ScenarioConfig::parse(text).unwrap();
        assert_eq!(c.integrator, Integrator::Rk45Adaptive { tol: 1e-10 });
        assert_eq!(c.metric.weighting, DensityWeighting::None);
        assert_eq!(c.initial_covector, Some(CovectorSpec::Expr("random_null(7)".into())));
        assert_eq!(c.tolerances.kernel, 1e-8);
        assert_eq!(c.sampling.seed, 3);
        let again = ScenarioConfig::parse(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            "[metric]\nid = \"minkowski4\"\ncolour = 1\n",
            "bogus = 1\n[metric]\nid = \"minkowski4\"\n",
            "[metric]\nid = \"minkowski4\"\n[tolerances]\nmax_gpa = 1.0\n",
        ] {
            assert!(matches!(ScenarioConfig::parse(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn call_syntax_forms() {
        assert_eq!(call_syntax("random_null", "random_null"), Some(None));
        assert_eq!(call_syntax("random_null( 7 )", "random_null"), Some(Some("7")));
        assert_eq!(call_syntax("kernel_basis(1)", "kernel_basis"), Some(Some("1")));
        assert_eq!(call_syntax("kernel(1)", "kernel_basis"), None);
    }
}

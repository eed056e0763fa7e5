//! The four subcommands. Each returns whether its property checks passed.

use std::path::Path;

use lorentz_dirac::clifford::{certify_axioms, SampleSpec};
use lorentz_dirac::geometry::{integrate_bicharacteristic, PhasePoint, Termination};
use lorentz_dirac::linalg::RVec;
use lorentz_dirac::symbols::{
    certify_principal_type, CertificationMode, PrincipalTypeCertificate, PrincipalTypeOptions, SymbolPackage,
};
use lorentz_dirac::transport::{run_comparison, CompareOptions, DenkerOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::{write_document, write_records, Field, Meta, Record};
use crate::scenario::{Needs, Scenario};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Certify,
    Trace,
    Compare,
    Symbols,
}

impl Command {
    pub fn needs(self) -> Needs {
        match self {
            Command::Certify => Needs { phase: false, null: false, polarization: false, t_end: false },
            Command::Trace => Needs { phase: true, null: true, polarization: false, t_end: true },
            Command::Compare => Needs { phase: true, null: true, polarization: true, t_end: true },
            Command::Symbols => Needs { phase: true, null: false, polarization: false, t_end: false },
        }
    }
}

pub struct RunContext<'a> {
    pub scenario: &'a Scenario,
    pub out: &'a Path,
    pub meta: Meta<'a>,
    pub flip_subprincipal: bool,
}

pub fn execute(cmd: Command, ctx: &RunContext) -> Result<bool, CliError> {
    std::fs::create_dir_all(ctx.out)?;
    match cmd {
        Command::Certify => certify(ctx),
        Command::Trace => trace(ctx),
        Command::Compare => compare(ctx),
        Command::Symbols => symbols(ctx),
    }
}

#[derive(Serialize)]
struct PrincipalSummary {
    mode: CertificationMode,
    points: usize,
    failures: usize,
    max_factorization_residual: f64,
    max_condition_number: Option<f64>,
    certificates: Vec<PrincipalTypeCertificate>,
}

impl PrincipalSummary {
    fn new(mode: CertificationMode, certificates: Vec<PrincipalTypeCertificate>) -> Self {
        Self {
            mode,
            points: certificates.len(),
            failures: certificates.iter().filter(|c| !c.pass).count(),
            max_factorization_residual: certificates.iter().map(|c| c.factorization_residual).fold(0.0, f64::max),
            max_condition_number: certificates
                .iter()
                .filter_map(|c| c.ker_coker_condition_number)
                .reduce(f64::max),
            certificates,
        }
    }
}

fn certify(ctx: &RunContext) -> Result<bool, CliError> {
    let sc = ctx.scenario;
    let cfg = &sc.config;
    let rep = sc.module();
    let axioms = certify_axioms(
        rep,
        &SampleSpec {
            points: cfg.sampling.points,
            vectors: cfg.sampling.vectors,
            seed: sc.seed,
            tolerance: cfg.tolerances.axioms,
        },
    )?;
    let opts = PrincipalTypeOptions {
        rank_tol: cfg.tolerances.rank,
        null_tol: cfg.tolerances.null,
        factorization_tol: cfg.tolerances.factorization,
        max_condition: cfg.tolerances.condition,
        seed: sc.seed,
        ..PrincipalTypeOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x9e37_79b9_7f4a_7c15);
    let n = sc.metric.dim();
    let mut intrinsic = Vec::new();
    let mut factorization = Vec::new();
    for _ in 0..cfg.sampling.phase_points {
        let x = sc.metric.model().sample_point(&mut rng);
        let null = sc.metric.random_null_covector(x.as_slice(), &mut rng)?;
        let p = PhasePoint::new(x.clone(), null)?;
        intrinsic.push(certify_principal_type(
            &sc.system,
            &sc.factorization,
            &sc.metric,
            &p,
            CertificationMode::Intrinsic,
            &opts,
        )?);
        let xi = RVec::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let p = PhasePoint::new(x, xi)?;
        factorization.push(certify_principal_type(
            &sc.system,
            &sc.factorization,
            &sc.metric,
            &p,
            CertificationMode::Factorization,
            &opts,
        )?);
    }
    let intrinsic = PrincipalSummary::new(CertificationMode::Intrinsic, intrinsic);
    let factorization = PrincipalSummary::new(CertificationMode::Factorization, factorization);
    let pass = axioms.pass && intrinsic.failures == 0 && factorization.failures == 0;

    #[derive(Serialize)]
    struct Certificate<'a> {
        metric: String,
        pass: bool,
        axioms: &'a lorentz_dirac::clifford::CertificateReport,
        intrinsic: PrincipalSummary,
        factorization: PrincipalSummary,
    }
    write_document(
        &ctx.out.join("certificate.json"),
        &Certificate {
            metric: sc.metric.name(),
            pass,
            axioms: &axioms,
            intrinsic,
            factorization,
        },
        &ctx.meta,
    )?;
    Ok(pass)
}

fn phase_fields(t: f64, p: &PhasePoint, q: f64) -> Vec<(&'static str, Field)> {
    vec![
        ("t", Field::Scalar(t)),
        ("x", Field::Vector(p.x.iter().copied().collect())),
        ("xi", Field::Vector(p.xi.iter().copied().collect())),
        ("q", Field::Scalar(q)),
    ]
}

fn trace(ctx: &RunContext) -> Result<bool, CliError> {
    let sc = ctx.scenario;
    let cfg = &sc.config;
    let traj = integrate_bicharacteristic(&sc.metric, sc.phase(), sc.t_end, &sc.flow_options())?;
    let mut records: Vec<Record> = traj
        .samples
        .iter()
        .map(|s| Record { fields: phase_fields(s.t, &s.phase, s.q) })
        .collect();
    if let Termination::LeftChart { t } = traj.termination {
        records.push(Record {
            fields: vec![("event", Field::Text("left_chart")), ("t", Field::Scalar(t))],
        });
    }
    let file = write_records(ctx.out, "trajectory", cfg.outputs.format, &records)?;
    let q_drift = traj.q_drift();
    let completed = traj.completed();
    let pass = completed && q_drift <= cfg.tolerances.q_drift;

    #[derive(Serialize)]
    struct Summary<'a> {
        metric: String,
        pass: bool,
        samples: usize,
        termination: Termination,
        q_drift: f64,
        q_drift_tolerance: f64,
        start: &'a PhasePoint,
        end: &'a PhasePoint,
        records: String,
    }
    write_document(
        &ctx.out.join("trace.json"),
        &Summary {
            metric: sc.metric.name(),
            pass,
            samples: traj.len(),
            termination: traj.termination,
            q_drift,
            q_drift_tolerance: cfg.tolerances.q_drift,
            start: &traj.first().phase,
            end: &traj.last().phase,
            records: file,
        },
        &ctx.meta,
    )?;
    Ok(pass)
}

fn compare(ctx: &RunContext) -> Result<bool, CliError> {
    let sc = ctx.scenario;
    let cfg = &sc.config;
    let opts = CompareOptions {
        flow: sc.flow_options(),
        denker: DenkerOptions {
            kernel_tol: cfg.tolerances.kernel,
            flip_subprincipal: ctx.flip_subprincipal,
        },
        convergence: true,
    };
    let cmp = run_comparison(&sc.system, &sc.factorization, sc.polarization(), sc.t_end, &opts)?;
    let records: Vec<Record> = cmp
        .trajectory
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let w = &cmp.denker.sections[i];
            let mut fields = phase_fields(s.t, &s.phase, s.q);
            fields.push(("w_re", Field::Vector(w.iter().map(|z| z.re).collect())));
            fields.push(("w_im", Field::Vector(w.iter().map(|z| z.im).collect())));
            fields.push(("kernel_residual", Field::Scalar(cmp.denker.kernel_residuals[i])));
            Record { fields }
        })
        .collect();
    let file = write_records(ctx.out, "orbit", cfg.outputs.format, &records)?;
    let pass = cmp.report.max_gap < cfg.tolerances.max_gap;

    #[derive(Serialize)]
    struct Report<'a> {
        metric: String,
        pass: bool,
        max_gap_tolerance: f64,
        report: &'a lorentz_dirac::transport::TransportReport,
        records: String,
    }
    write_document(
        &ctx.out.join("report.json"),
        &Report {
            metric: sc.metric.name(),
            pass,
            max_gap_tolerance: cfg.tolerances.max_gap,
            report: &cmp.report,
            records: file,
        },
        &ctx.meta,
    )?;
    Ok(pass)
}

fn symbols(ctx: &RunContext) -> Result<bool, CliError> {
    let sc = ctx.scenario;
    let pkg = SymbolPackage::compute(&sc.system, &sc.factorization, sc.phase())?;
    write_document(&ctx.out.join("symbols.json"), &pkg, &ctx.meta)?;
    Ok(true)
}

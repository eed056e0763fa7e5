use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CliffordModule, QSection};
use crate::error::Result;
use crate::geometry::LocalGeometry;
use crate::linalg::{c, hermitian_eigenvalues, max_abs, CMat, RVec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub points: usize,
    /// Random vectors (and vector pairs) per point.
    pub vectors: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            points: 20,
            vectors: 10,
            seed: 0,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomResidual {
    pub axiom: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityCheck {
    /// Smallest eigenvalue of the Hermitian part of `G Q_N` over sampled unit `N`.
    pub min_eigenvalue: f64,
    /// Same quantity at `N = e_0` of the first sampled point.
    pub at_frame_time: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexCheck {
    pub positive: usize,
    pub negative: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub metric: String,
    pub rank: usize,
    pub q_power: usize,
    pub sample: SampleSpec,
    pub residuals: Vec<AxiomResidual>,
    pub c8: PositivityCheck,
    pub index: IndexCheck,
    pub pass: bool,
}

impl CertificateReport {
    pub fn residual(&self, axiom: &str) -> Option<&AxiomResidual> {
        self.residuals.iter().find(|r| r.axiom == axiom)
    }

    /// Largest residual over all axioms.
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, r| a.max(r.max_residual))
    }
}

struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    fn frame_vector(&mut self, n: usize) -> RVec {
        RVec::from_fn(n, |_, _| self.rng.random_range(-1.0..1.0))
    }

    /// Unit future timelike vector, in coordinate components.
    fn future_unit(&mut self, geo: &LocalGeometry) -> RVec {
        let n = geo.dim();
        loop {
            let mut v = self.frame_vector(n) * 1.5;
            v[0] = (1.0 + v.rows(1, n - 1).norm_squared()).sqrt();
            let coord = &geo.frame.e * v;
            if coord[0] > 0.0 {
                return coord;
            }
        }
    }
}

fn g_dot(geo: &LocalGeometry, a: &RVec, b: &RVec) -> f64 {
    a.dot(&(&geo.metric.g * b))
}

fn frame_norm(geo: &LocalGeometry, v: &RVec) -> f64 {
    geo.frame.frame_components(v).norm()
}

/// Vector `Z` with `g(Z, Y) = 0` built from random data (works for null `Y`).
fn orthogonal_to(s: &mut Sampler, geo: &LocalGeometry, y: &RVec) -> RVec {
    let n = geo.dim();
    loop {
        let v = &geo.frame.e * s.frame_vector(n);
        let w = &geo.frame.e * s.frame_vector(n);
        let gw = g_dot(geo, &w, y);
        if gw.abs() > 1e-3 * frame_norm(geo, &w) * frame_norm(geo, y) {
            return &v - &w * (g_dot(geo, &v, y) / gw);
        }
    }
}

#[derive(Default)]
struct Acc {
    c1: f64,
    c2: f64,
    c3: f64,
    c5: f64,
    c4: f64,
    c6: f64,
    c7_1: f64,
    c7_2: f64,
    c7p: f64,
    c8: f64,
}

/// Samples points from the metric model and measures every module axiom.
pub fn certify_axioms(rep: &CliffordModule, spec: &SampleSpec) -> Result<CertificateReport> {
    let n = rep.dim();
    let r = rep.rank();
    let k = rep.q_section().power();
    let id = CMat::identity(r, r);
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    };
    let gram = rep.gram();
    let mut acc = Acc {
        c8: f64::INFINITY,
        ..Acc::default()
    };

    // C1 on the generators themselves.
    for a in 0..n {
        for b in 0..n {
            let eta = if a != b { 0.0 } else if a == 0 { -1.0 } else { 1.0 };
            let g = rep.gammas();
            let res = &g[a] * &g[b] + &g[b] * &g[a] + &id * c(2.0 * eta, 0.0);
            acc.c1 = acc.c1.max(max_abs(&res));
        }
    }

    let mut at_frame_time = f64::NAN;
    for p in 0..spec.points {
        let x = rep.metric().model().sample_point(&mut s.rng);
        let geo = rep.geometry(x.as_slice())?;
        let omega = rep.spin_connection(&geo);

        for w in &omega {
            acc.c2 = acc.c2.max(max_abs(&(gram * w + w.adjoint() * gram)));
        }
        if p == 0 {
            let e0 = geo.frame.e.column(0).into_owned();
            let form = gram * rep.q_n(&geo, &e0);
            at_frame_time = hermitian_eigenvalues(&form)[0];
        }

        for _ in 0..spec.vectors {
            let z = &geo.frame.e * s.frame_vector(n);
            let y = &geo.frame.e * s.frame_vector(n);
            let (nz, ny) = (frame_norm(&geo, &z), frame_norm(&geo, &y));
            let gz = rep.gamma_at(&geo, &z);
            let gy = rep.gamma_at(&geo, &y);

            let c1 = &gz * &gy + &gy * &gz + &id * c(2.0 * g_dot(&geo, &z, &y), 0.0);
            acc.c1 = acc.c1.max(max_abs(&c1) / (nz * ny));
            acc.c4 = acc.c4.max(max_abs(&(gram * &gz - gz.adjoint() * gram)) / nz);

            let (c3, c5) = parallel_residuals(rep, &geo, &omega, &mut s)?;
            acc.c3 = acc.c3.max(c3);
            acc.c5 = acc.c5.max(c5);

            let nn = s.future_unit(&geo);
            let scale = frame_norm(&geo, &nn).powi(k as i32);
            let qn = rep.q_n(&geo, &nn);
            acc.c6 = acc.c6.max(max_abs(&(gram * &qn - qn.adjoint() * gram)) / scale);
            let zp = orthogonal_to(&mut s, &geo, &nn);
            let gzp = rep.gamma_at(&geo, &zp);
            let np = frame_norm(&geo, &zp);
            acc.c7_1 = acc.c7_1.max(max_abs(&(&qn * &gzp + &gzp * &qn)) / (scale * np));
            let gn = rep.gamma_at(&geo, &nn);
            acc.c7_2 = acc.c7_2.max(max_abs(&(&qn * &gn - &gn * &qn)) / (scale * frame_norm(&geo, &nn)));
            let form = gram * &qn;
            acc.c8 = acc.c8.min(hermitian_eigenvalues(&form)[0]);

            // C7' with arbitrary Y, including null directions.
            let mut yy = y.clone();
            if p % 2 == 1 {
                let (a, b) = (geo.frame.e.column(0).into_owned(), geo.frame.e.column(1).into_owned());
                yy = a + b * s.rng.random_range(-1.0..1.0_f64).signum();
            }
            let qy = rep.q_n(&geo, &yy);
            let zy = orthogonal_to(&mut s, &geo, &yy);
            let gzy = rep.gamma_at(&geo, &zy);
            let sy = frame_norm(&geo, &yy).powi(k as i32) * frame_norm(&geo, &zy);
            acc.c7p = acc.c7p.max(max_abs(&(&gzy * &qy + &qy * &gzy)) / sy);
        }
    }

    let tol = spec.tolerance;
    let entry = |axiom: &str, v: f64, note: Option<&str>| AxiomResidual {
        axiom: axiom.to_string(),
        max_residual: v,
        tolerance: tol,
        pass: v < tol,
        note: note.map(str::to_string),
    };
    let c5_note = match rep.q_section() {
        QSection::Clifford => Some("k = 1: identical to C3"),
        QSection::Custom { .. } => Some("central differences of Q"),
    };
    let residuals = vec![
        entry("C1", acc.c1, None),
        entry("C2", acc.c2, None),
        entry("C3", acc.c3, None),
        entry("C4", acc.c4, None),
        entry("C5", acc.c5, c5_note),
        entry("C6", acc.c6, None),
        entry("C7.1", acc.c7_1, None),
        entry("C7.2", acc.c7_2, None),
        entry("C7'", acc.c7p, None),
    ];
    let c8 = PositivityCheck {
        min_eigenvalue: acc.c8,
        at_frame_time,
        pass: acc.c8 > 0.0 && at_frame_time > 0.0,
    };
    let ev = hermitian_eigenvalues(gram);
    let scale = ev.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let positive = ev.iter().filter(|v| **v > 1e-12 * scale).count();
    let negative = ev.iter().filter(|v| **v < -1e-12 * scale).count();
    let index = IndexCheck {
        positive,
        negative,
        pass: positive == r / 2 && negative == r / 2 && positive + negative == r,
    };
    let pass = residuals.iter().all(|e| e.pass) && c8.pass && index.pass;
    Ok(CertificateReport {
        metric: rep.metric().name(),
        rank: r,
        q_power: k,
        sample: *spec,
        residuals,
        c8,
        index,
        pass,
    })
}

/// C3 and C5 residuals for one random linear vector field `Y(x) = Y_0 + L(x − x_0)`.
/// `∂_μ Γ(Y) = γ_a ∂_μ(θ^a(Y))` uses the coframe derivatives of the geometry; a custom
/// `Q` is differentiated by central differences.
fn parallel_residuals(
    rep: &CliffordModule,
    geo: &LocalGeometry,
    omega: &[CMat],
    s: &mut Sampler,
) -> Result<(f64, f64)> {
    let n = rep.dim();
    let x0 = &geo.x;
    let y0 = &geo.frame.e * s.frame_vector(n);
    let l = crate::linalg::RMat::from_fn(n, n, |_, _| s.rng.random_range(-0.1..0.1));
    let field = |x: &RVec| &y0 + &l * (x - x0);
    let h = crate::geometry::DEFAULT_FD_SCALE * (1.0 + x0.norm());
    let k = rep.q_section().power();
    let ny = frame_norm(geo, &y0) + l.norm();
    let gy = rep.gamma_at(geo, &y0);
    let qy = rep.q_at(geo, &vec![y0.clone(); k]);
    let mut c3 = 0.0_f64;
    let mut c5 = 0.0_f64;
    for mu in 0..n {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[mu] += h;
        xm[mu] -= h;
        // ∇_μ Y = ∂_μ Y + Γ^·_{μλ} Y^λ
        let nabla = l.column(mu) + (0..n).fold(RVec::zeros(n), |acc, lam| {
            acc + RVec::from_fn(n, |i, _| geo.christoffel.get(i, mu, lam)) * y0[lam]
        });
        let d_gamma = rep.gamma_frame(&(&geo.dcoframe[mu] * &y0 + &geo.frame.coframe * l.column(mu)));
        let res = d_gamma + &omega[mu] * &gy - &gy * &omega[mu] - rep.gamma_at(geo, &nabla);
        c3 = c3.max(max_abs(&res) / ny);

        if let QSection::Custom { .. } = rep.q_section() {
            let gp = rep.geometry(xp.as_slice())?;
            let gm = rep.geometry(xm.as_slice())?;
            let (yp, ym) = (field(&xp), field(&xm));
            let d_q = (rep.q_at(&gp, &vec![yp.clone(); k]) - rep.q_at(&gm, &vec![ym.clone(); k])) / c(2.0 * h, 0.0);
            let mut slots = CMat::zeros(rep.rank(), rep.rank());
            for slot in 0..k {
                let mut args = vec![y0.clone(); k];
                args[slot] = nabla.clone();
                slots += rep.q_at(geo, &args);
            }
            let res = d_q + &omega[mu] * &qy - &qy * &omega[mu] - slots;
            c5 = c5.max(max_abs(&res) / ny.powi(k as i32));
        }
    }
    if let QSection::Clifford = rep.q_section() {
        c5 = c3;
    }
    Ok((c3, c5))
}

//! Clifford modules over the Gram-Schmidt frame of a [`MetricField`].
//!
//! The Clifford relation is `Γ(Z)Γ(Y) + Γ(Y)Γ(Z) = −2 g(Z, Y)`, so in frame indices
//! `γ_0² = Id` and `γ_i² = −Id`. The spinor product is `⟨φ, ψ⟩ = ψ* G φ`.

mod certify;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{LocalGeometry, MetricField};
use crate::linalg::{c, CMat, CVec, RMat, RVec, I};

pub use certify::{
    certify_axioms, AxiomResidual, CertificateReport, IndexCheck, PositivityCheck, SampleSpec,
};

fn pauli() -> [CMat; 3] {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    [
        CMat::from_row_slice(2, 2, &[z, o, o, z]),
        CMat::from_row_slice(2, 2, &[z, -I, I, z]),
        CMat::from_row_slice(2, 2, &[o, z, z, -o]),
    ]
}

/// Shipped gamma sets: dimension 2 (`γ_0 = σ_z`, `γ_1 = iσ_x`) and dimension 4
/// (`γ_0 = diag(1, 1, −1, −1)`, `γ_k = [[0, σ_k], [−σ_k, 0]]`).
pub fn gamma_matrices(dim: usize) -> Result<Vec<CMat>> {
    let [sx, sy, sz] = pauli();
    match dim {
        2 => Ok(vec![sz, sx * I]),
        4 => {
            let mut g0 = CMat::zeros(4, 4);
            for (i, s) in [1.0, 1.0, -1.0, -1.0].into_iter().enumerate() {
                g0[(i, i)] = c(s, 0.0);
            }
            let mut out = vec![g0];
            for s in [sx, sy, sz] {
                let mut g = CMat::zeros(4, 4);
                g.view_mut((0, 2), (2, 2)).copy_from(&s);
                g.view_mut((2, 0), (2, 2)).copy_from(&(-s));
                out.push(g);
            }
            Ok(out)
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

type QFn = dyn Fn(&LocalGeometry, &[RVec]) -> CMat + Send + Sync;

/// The section `Q(Y_1, ..., Y_k)` of a spin `k/2` module.
#[derive(Clone)]
pub enum QSection {
    /// `k = 1`, `Q(Y) = Γ(Y)`.
    Clifford,
    /// User-supplied evaluator taking `k` coordinate vectors.
    Custom { k: usize, eval: Arc<QFn> },
}

impl fmt::Debug for QSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QSection::Clifford => f.write_str("Clifford"),
            QSection::Custom { k, .. } => write!(f, "Custom {{ k: {k} }}"),
        }
    }
}

impl QSection {
    pub fn power(&self) -> usize {
        match self {
            QSection::Clifford => 1,
            QSection::Custom { k, .. } => *k,
        }
    }
}

/// Rotation of the Gram-Schmidt frame in the spatial plane `(a, b)` by the
/// position-dependent angle `α(x) = Σ_μ k_μ x^μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRotation {
    pub plane: [usize; 2],
    pub gradient: Vec<f64>,
}

impl FrameRotation {
    fn apply(&self, geo: &mut LocalGeometry) {
        let n = geo.dim();
        let [a, b] = self.plane;
        let alpha: f64 = self.gradient.iter().zip(geo.x.iter()).map(|(k, x)| k * x).sum();
        let (s, co) = alpha.sin_cos();
        let mut r = RMat::identity(n, n);
        let mut dr = RMat::zeros(n, n);
        r[(a, a)] = co;
        r[(b, b)] = co;
        r[(a, b)] = -s;
        r[(b, a)] = s;
        dr[(a, a)] = -s;
        dr[(b, b)] = -s;
        dr[(a, b)] = -co;
        dr[(b, a)] = co;
        let e = &geo.frame.e;
        let theta = &geo.frame.coframe;
        for mu in 0..n {
            let k = self.gradient[mu];
            geo.dframe[mu] = &geo.dframe[mu] * &r + e * &dr * k;
            geo.dcoframe[mu] = r.transpose() * &geo.dcoframe[mu] + dr.transpose() * theta * k;
        }
        geo.frame.e = e * &r;
        geo.frame.coframe = r.transpose() * theta;
    }
}

/// A Clifford module trivialized by the Gram-Schmidt frame of its metric,
/// optionally rotated by a [`FrameRotation`].
#[derive(Debug, Clone)]
pub struct CliffordModule {
    metric: MetricField,
    gammas: Vec<CMat>,
    gram: CMat,
    q_section: QSection,
    rotation: Option<FrameRotation>,
}

impl CliffordModule {
    /// The spin 1/2 module with the shipped gamma set, `G = γ_0` and `Q = Γ`.
    pub fn canonical(metric: MetricField) -> Result<Self> {
        let gammas = gamma_matrices(metric.dim())?;
        let gram = gammas[0].clone();
        Ok(Self {
            metric,
            gammas,
            gram,
            q_section: QSection::Clifford,
            rotation: None,
        })
    }

    /// Arbitrary data; nothing is validated here, see [`certify_axioms`].
    pub fn from_parts(metric: MetricField, gammas: Vec<CMat>, gram: CMat, q_section: QSection) -> Result<Self> {
        check_dim(metric.dim(), gammas.len())?;
        let n = gram.nrows();
        for g in &gammas {
            check_dim(n, g.nrows())?;
            check_dim(n, g.ncols())?;
        }
        Ok(Self {
            metric,
            gammas,
            gram,
            q_section,
            rotation: None,
        })
    }

    pub fn with_frame_rotation(mut self, rotation: FrameRotation) -> Result<Self> {
        let n = self.dim();
        check_dim(n, rotation.gradient.len())?;
        let [a, b] = rotation.plane;
        if a == b || a == 0 || b == 0 || a >= n || b >= n {
            return Err(Error::InvalidParameter(format!(
                "frame rotation plane {:?} must be two distinct spatial indices below {n}",
                rotation.plane
            )));
        }
        self.rotation = Some(rotation);
        Ok(self)
    }

    pub fn frame_rotation(&self) -> Option<&FrameRotation> {
        self.rotation.as_ref()
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Spinor rank `N`.
    pub fn rank(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gammas(&self) -> &[CMat] {
        &self.gammas
    }

    pub fn gram(&self) -> &CMat {
        &self.gram
    }

    pub fn q_section(&self) -> &QSection {
        &self.q_section
    }

    pub fn geometry(&self, x: &[f64]) -> Result<LocalGeometry> {
        let mut geo = self.metric.local_geometry(x)?;
        if let Some(rot) = &self.rotation {
            rot.apply(&mut geo);
        }
        Ok(geo)
    }

    /// `Σ_a v^a γ_a` for frame components `v`.
    pub fn gamma_frame(&self, v: &RVec) -> CMat {
        let n = self.rank();
        let mut out = CMat::zeros(n, n);
        for (a, g) in self.gammas.iter().enumerate() {
            if v[a] != 0.0 {
                out += g * c(v[a], 0.0);
            }
        }
        out
    }

    /// `Γ(Z)` for a coordinate vector `Z`.
    pub fn gamma_at(&self, geo: &LocalGeometry, z: &RVec) -> CMat {
        self.gamma_frame(&geo.frame.frame_components(z))
    }

    /// `γ^μ = Σ_a η_aa e_a^μ γ_a`, i.e. `Γ((dx^μ)^♯)`.
    pub fn gamma_upper(&self, geo: &LocalGeometry) -> Vec<CMat> {
        (0..self.dim())
            .map(|mu| self.gamma_frame(&self.eta_row(&geo.frame.e, mu)))
            .collect()
    }

    /// `∂_k γ^μ`, indexed `[k][μ]`.
    pub fn gamma_upper_derivatives(&self, geo: &LocalGeometry) -> Vec<Vec<CMat>> {
        geo.dframe
            .iter()
            .map(|de| (0..self.dim()).map(|mu| self.gamma_frame(&self.eta_row(de, mu))).collect())
            .collect()
    }

    fn eta_row(&self, e: &RMat, mu: usize) -> RVec {
        RVec::from_fn(self.dim(), |a, _| if a == 0 { -e[(mu, a)] } else { e[(mu, a)] })
    }

    /// Connection coefficients `ω_μ` of the spin connection in the frame
    /// trivialization, one matrix per coordinate direction.
    pub fn spin_connection(&self, geo: &LocalGeometry) -> Vec<CMat> {
        let n = self.dim();
        let r = self.rank();
        let e = &geo.frame.e;
        let theta = &geo.frame.coframe;
        (0..n)
            .map(|mu| {
                let mut cov = geo.dframe[mu].clone();
                for nu in 0..n {
                    for d in 0..n {
                        let mut acc = 0.0;
                        for l in 0..n {
                            acc += geo.christoffel.get(nu, mu, l) * e[(l, d)];
                        }
                        cov[(nu, d)] += acc;
                    }
                }
                // w[c][d] = θ^c(∇_μ e_d)
                let w = theta * cov;
                let mut out = CMat::zeros(r, r);
                for cc in 0..n {
                    for d in 0..n {
                        if cc == d {
                            continue;
                        }
                        let eta_d = if d == 0 { -1.0 } else { 1.0 };
                        let coef = -0.25 * w[(cc, d)] * eta_d;
                        if coef != 0.0 {
                            out += &self.gammas[cc] * &self.gammas[d] * c(coef, 0.0);
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// `ω(x; v) = v^μ ω_μ`.
    pub fn spin_connection_matrix(&self, x: &[f64], v: &RVec) -> Result<CMat> {
        check_dim(self.dim(), v.len())?;
        let geo = self.geometry(x)?;
        Ok(contract(&self.spin_connection(&geo), v))
    }

    pub fn clifford_mul(&self, x: &[f64], z: &RVec, phi: &CVec) -> Result<CVec> {
        check_dim(self.dim(), z.len())?;
        check_dim(self.rank(), phi.len())?;
        let geo = self.geometry(x)?;
        Ok(self.gamma_at(&geo, z) * phi)
    }

    /// `Q(Y_1, ..., Y_k)` at a point without causal checks.
    pub fn q_at(&self, geo: &LocalGeometry, ys: &[RVec]) -> CMat {
        match &self.q_section {
            QSection::Clifford => self.gamma_at(geo, &ys[0]),
            QSection::Custom { eval, .. } => eval(geo, ys),
        }
    }

    /// `Q_N = Q(N, ..., N)` in the frame components of `N`.
    pub fn q_n(&self, geo: &LocalGeometry, n: &RVec) -> CMat {
        let ys = vec![n.clone(); self.q_section.power()];
        self.q_at(geo, &ys)
    }

    /// `Q_N` for a future-directed timelike `N`.
    pub fn q_operator(&self, x: &[f64], n: &RVec) -> Result<CMat> {
        check_dim(self.dim(), n.len())?;
        let geo = self.geometry(x)?;
        check_future_timelike(&geo, n)?;
        Ok(self.q_n(&geo, n))
    }

    /// Indefinite product `⟨φ, ψ⟩ = ψ* G φ`.
    pub fn product(&self, phi: &CVec, psi: &CVec) -> Complex64 {
        (psi.adjoint() * &self.gram * phi)[(0, 0)]
    }
}

/// `Σ_μ v^μ m_μ`.
pub fn contract(ms: &[CMat], v: &RVec) -> CMat {
    let r = ms[0].nrows();
    let mut out = CMat::zeros(r, r);
    for (m, &vi) in ms.iter().zip(v.iter()) {
        if vi != 0.0 {
            out += m * c(vi, 0.0);
        }
    }
    out
}

pub fn check_future_timelike(geo: &LocalGeometry, n: &RVec) -> Result<()> {
    let norm = n.dot(&(&geo.metric.g * n));
    if !(norm < 0.0) {
        return Err(Error::NotTimelike { norm });
    }
    if !(n[0] > 0.0) {
        return Err(Error::NotFutureDirected { time_component: n[0] });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::catalog::{boosted_minkowski, minkowski, schwarzschild};
    use crate::linalg::{complexify_vec, max_abs};
    use std::f64::consts::FRAC_PI_2;

    fn eta(a: usize, b: usize) -> f64 {
        match (a, b) {
            (0, 0) => -1.0,
            (a, b) if a == b => 1.0,
            _ => 0.0,
        }
    }

    #[test]
    fn gamma_algebra() {
        for dim in [2, 4] {
            let g = gamma_matrices(dim).unwrap();
            let n = g[0].nrows();
            for a in 0..dim {
                for b in 0..dim {
                    let r = &g[a] * &g[b] + &g[b] * &g[a] + CMat::identity(n, n) * c(2.0 * eta(a, b), 0.0);
                    assert_eq!(max_abs(&r), 0.0);
                }
            }
        }
        let g = gamma_matrices(4).unwrap();
        assert_eq!(&g[0] * &g[0], CMat::identity(4, 4));
        assert_eq!(&g[1] * &g[1], -CMat::identity(4, 4));
        assert_eq!(&g[0] * &g[1], -(&g[1] * &g[0]));
        assert!(matches!(gamma_matrices(3), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn canonical_minkowski_module() {
        let rep = CliffordModule::canonical(minkowski(4)).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| rep.gram()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
        for v in [RVec::from_vec(vec![1.0, 0.0, 0.0, 0.0]), RVec::from_vec(vec![0.3, -1.0, 2.0, 0.5])] {
            assert_eq!(max_abs(&rep.spin_connection_matrix(&[0.0, 1.0, 2.0, 3.0], &v).unwrap()), 0.0);
        }
        let phi = complexify_vec(&RVec::from_vec(vec![1.0, 0.0, 0.0, 0.0]));
        let e0 = RVec::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(rep.clifford_mul(&[0.0; 4], &e0, &phi).unwrap(), phi);
        let z = RVec::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        let zz = rep.clifford_mul(&[0.0; 4], &z, &rep.clifford_mul(&[0.0; 4], &z, &phi).unwrap()).unwrap();
        assert_eq!(zz, -phi);
        assert!(matches!(
            CliffordModule::canonical(schwarzschild(1.0).with_mode(Default::default()))
                .unwrap()
                .q_operator(&[0.0; 4], &e0),
            Err(Error::OutsideChart { .. })
        ));
    }

    #[test]
    fn q_operator_checks_causal_character() {
        let rep = CliffordModule::canonical(minkowski(4)).unwrap();
        let e0 = RVec::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let q = rep.q_operator(&[0.0; 4], &e0).unwrap();
        assert_eq!(q, rep.gammas()[0]);
        assert_eq!(rep.gram() * &q, CMat::identity(4, 4));
        let z = RVec::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        let gz = rep.gamma_frame(&z);
        assert_eq!(max_abs(&(&q * &gz + &gz * &q)), 0.0);
        assert!(matches!(rep.q_operator(&[0.0; 4], &z), Err(Error::NotTimelike { .. })));
        assert!(matches!(rep.q_operator(&[0.0; 4], &(-e0)), Err(Error::NotFutureDirected { .. })));
    }

    #[test]
    fn schwarzschild_clifford_multiplication_of_dt() {
        let rep = CliffordModule::canonical(schwarzschild(1.0)).unwrap();
        let geo = rep.geometry(&[0.0, 10.0, FRAC_PI_2, 0.0]).unwrap();
        let dt = RVec::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let expect = &rep.gammas()[0] * c(0.8_f64.sqrt(), 0.0);
        assert!(max_abs(&(rep.gamma_at(&geo, &dt) - expect)) < 1e-15);
    }

    #[test]
    fn boosted_chart_has_vanishing_spin_connection() {
        let rep = CliffordModule::canonical(boosted_minkowski(0.5).unwrap()).unwrap();
        let geo = rep.geometry(&[0.2, 1.0, -3.0, 0.4]).unwrap();
        for w in rep.spin_connection(&geo) {
            assert!(max_abs(&w) < 1e-15);
        }
    }

    #[test]
    fn gamma_upper_is_raised_coordinate_gamma() {
        let rep = CliffordModule::canonical(schwarzschild(1.0)).unwrap();
        let geo = rep.geometry(&[0.0, 7.0, 1.0, 0.2]).unwrap();
        let up = rep.gamma_upper(&geo);
        for mu in 0..4 {
            let dx = RVec::from_fn(4, |i, _| if i == mu { 1.0 } else { 0.0 });
            let sharp = &geo.metric.g_inv * dx;
            assert!(max_abs(&(rep.gamma_at(&geo, &sharp) - &up[mu])) < 1e-14);
        }
    }

    #[test]
    fn c2_and_c3_on_schwarzschild() {
        let rep = CliffordModule::canonical(schwarzschild(1.0)).unwrap();
        let x = [0.0, 10.0, FRAC_PI_2, 0.0];
        let geo = rep.geometry(&x).unwrap();
        let omega = rep.spin_connection(&geo);
        assert!(max_abs(&omega[1]) + max_abs(&omega[0]) > 1e-3);
        for w in &omega {
            assert!(max_abs(&(rep.gram() * w + w.adjoint() * rep.gram())) < 1e-14);
        }
        // C3 along ∂_r with central differences of Γ(Y)
        let y = RVec::from_vec(vec![0.3, -0.7, 0.2, 1.1]);
        let h = 1e-5 * 11.0;
        let mut xp = x;
        let mut xm = x;
        xp[1] += h;
        xm[1] -= h;
        let gp = rep.gamma_at(&rep.geometry(&xp).unwrap(), &y);
        let gm = rep.gamma_at(&rep.geometry(&xm).unwrap(), &y);
        let d_gamma = (gp - gm) / c(2.0 * h, 0.0);
        let gy = rep.gamma_at(&geo, &y);
        let nabla_y = geo.christoffel.apply(&y).column(1).into_owned();
        let res = d_gamma + &omega[1] * &gy - &gy * &omega[1] - rep.gamma_at(&geo, &nabla_y);
        assert!(max_abs(&res) < 1e-6, "{}", max_abs(&res));
    }

    #[test]
    fn rotated_frame_still_certifies() {
        let rot = FrameRotation {
            plane: [1, 2],
            gradient: vec![0.0, 5.0, 3.0, 1.0],
        };
        let rep = CliffordModule::canonical(schwarzschild(1.0)).unwrap().with_frame_rotation(rot).unwrap();
        let geo = rep.geometry(&[0.0, 7.0, 1.0, 0.2]).unwrap();
        let eta = RMat::from_diagonal(&crate::geometry::minkowski_eta(4));
        let e = &geo.frame.e;
        assert!((e.transpose() * &geo.metric.g * e - eta).amax() < 1e-13);
        let h = 1e-6;
        for k in 0..4 {
            let mut xp = geo.x.clone();
            let mut xm = geo.x.clone();
            xp[k] += h;
            xm[k] -= h;
            let (gp, gm) = (rep.geometry(xp.as_slice()).unwrap(), rep.geometry(xm.as_slice()).unwrap());
            let de = (&gp.frame.e - &gm.frame.e) / (2.0 * h);
            let dth = (&gp.frame.coframe - &gm.frame.coframe) / (2.0 * h);
            assert!((de - &geo.dframe[k]).amax() < 1e-7, "dframe[{k}]");
            assert!((dth - &geo.dcoframe[k]).amax() < 1e-7, "dcoframe[{k}]");
        }
        let spec = SampleSpec {
            points: 10,
            ..Default::default()
        };
        let report = certify_axioms(&rep, &spec).unwrap();
        assert!(report.pass, "{report:#?}");
        assert!(report.residual("C1").unwrap().max_residual < 1e-13);
        let bad = FrameRotation {
            plane: [0, 1],
            gradient: vec![0.0; 4],
        };
        assert!(CliffordModule::canonical(schwarzschild(1.0)).unwrap().with_frame_rotation(bad).is_err());
    }
}

use serde::{Deserialize, Serialize};

use super::{Coefficients, CoefficientJet, Factorization, FirstOrderSystem, MatrixJet};
use crate::clifford::{check_future_timelike, contract, CliffordModule, QSection};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{LocalGeometry, PhasePoint};
use crate::linalg::{c, try_inverse_c, vec_norm, CMat, CVec, RVec, I};

/// Density weight of the spinor fields the operator acts on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityWeighting {
    /// Spinor half-densities: `B = γ^μ ω_μ − ¼ γ^μ ∂_μ log|det g|`.
    #[default]
    HalfDensity,
    /// Plain spinor fields: `B = γ^μ ω_μ`.
    None,
}

/// The Dirac system `P = γ^μ (∂_μ + ω_μ)` written as `A^j D_j + B` with
/// `A^j = i γ^j`, so that `σ_1(x, ξ) = i Γ(ξ^♯)`.
#[derive(Debug, Clone)]
pub struct DiracSystem {
    rep: CliffordModule,
    weighting: DensityWeighting,
}

impl DiracSystem {
    pub fn new(rep: CliffordModule) -> Self {
        Self::with_weighting(rep, DensityWeighting::default())
    }

    pub fn with_weighting(rep: CliffordModule, weighting: DensityWeighting) -> Self {
        Self { rep, weighting }
    }

    pub fn module(&self) -> &CliffordModule {
        &self.rep
    }

    pub fn weighting(&self) -> DensityWeighting {
        self.weighting
    }

    pub fn zeroth_order(&self, geo: &LocalGeometry, gamma_up: &[CMat]) -> CMat {
        let omega = self.rep.spin_connection(geo);
        let r = self.rep.rank();
        let mut b = gamma_up
            .iter()
            .zip(&omega)
            .fold(CMat::zeros(r, r), |acc, (g, w)| acc + g * w);
        if self.weighting == DensityWeighting::HalfDensity {
            for (mu, g) in gamma_up.iter().enumerate() {
                b -= g * c(0.25 * geo.dlog_det(mu), 0.0);
            }
        }
        b
    }

    pub fn jet_at(&self, geo: &LocalGeometry) -> CoefficientJet {
        let up = self.rep.gamma_upper(geo);
        let b = self.zeroth_order(geo, &up);
        let da = self
            .rep
            .gamma_upper_derivatives(geo)
            .into_iter()
            .map(|dk| dk.into_iter().map(|m| m * I).collect())
            .collect();
        CoefficientJet {
            a: up.into_iter().map(|m| m * I).collect(),
            b,
            da,
        }
    }
}

impl FirstOrderSystem for DiracSystem {
    fn dim(&self) -> usize {
        self.rep.dim()
    }

    fn rank(&self) -> usize {
        self.rep.rank()
    }

    fn coefficients(&self, x: &[f64]) -> Result<Coefficients> {
        let geo = self.rep.geometry(x)?;
        let up = self.rep.gamma_upper(&geo);
        let b = self.zeroth_order(&geo, &up);
        Ok(Coefficients {
            a: up.into_iter().map(|m| m * I).collect(),
            b,
        })
    }

    fn coefficient_jet(&self, x: &[f64]) -> Result<CoefficientJet> {
        Ok(self.jet_at(&self.rep.geometry(x)?))
    }
}

/// Choice of the future timelike field `N` entering `σ̃`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TimelikeField {
    /// `N = e_0`, the normalized `∂_t` of the Gram-Schmidt frame.
    #[default]
    FrameTime,
    /// `N = ∂_t` without normalization.
    CoordinateTime,
    /// Fixed coordinate components.
    Constant { components: Vec<f64> },
}

impl TimelikeField {
    /// `N(x)` and `∂_k N`.
    pub fn eval(&self, geo: &LocalGeometry) -> Result<(RVec, Vec<RVec>)> {
        let n = geo.dim();
        Ok(match self {
            TimelikeField::FrameTime => (
                geo.frame.e.column(0).into_owned(),
                geo.dframe.iter().map(|d| d.column(0).into_owned()).collect(),
            ),
            TimelikeField::CoordinateTime => {
                (RVec::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }), vec![RVec::zeros(n); n])
            }
            TimelikeField::Constant { components } => {
                check_dim(n, components.len())?;
                (RVec::from_column_slice(components), vec![RVec::zeros(n); n])
            }
        })
    }
}

/// `σ̃ = −i Q_N^{-1} Γ(aY − bN) Q_N` where `Z = ξ^♯ = aY + bN` and `g(Y, N) = 0`.
pub fn sigma_tilde(rep: &CliffordModule, p: &PhasePoint, n: &RVec) -> Result<CMat> {
    check_dim(rep.dim(), p.dim())?;
    check_dim(rep.dim(), n.len())?;
    if p.xi.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroCovector);
    }
    let geo = rep.geometry(p.x.as_slice())?;
    check_future_timelike(&geo, n)?;
    sigma_tilde_at(rep, &geo, &p.xi, n)
}

fn reflected(geo: &LocalGeometry, xi: &RVec, n: &RVec) -> RVec {
    let z = &geo.metric.g_inv * xi;
    let gnn = n.dot(&(&geo.metric.g * n));
    let b = xi.dot(n) / gnn;
    // aY − bN = Z − 2bN
    z - n * (2.0 * b)
}

fn sigma_tilde_at(rep: &CliffordModule, geo: &LocalGeometry, xi: &RVec, n: &RVec) -> Result<CMat> {
    let q = rep.q_n(geo, n);
    let q_inv = try_inverse_c(&q).ok_or(Error::NotTimelike { norm: 0.0 })?;
    let v = reflected(geo, xi, n);
    Ok(&q_inv * rep.gamma_at(geo, &v) * &q * (-I))
}

#[derive(Debug, Clone)]
pub struct DiracFactorization {
    rep: CliffordModule,
    field: TimelikeField,
}

impl DiracFactorization {
    pub fn new(rep: CliffordModule, field: TimelikeField) -> Self {
        Self { rep, field }
    }

    pub fn field(&self) -> &TimelikeField {
        &self.field
    }

    /// Closed-form jet for the canonical `Q = Γ`.
    pub fn jet_at(&self, geo: &LocalGeometry, xi: &RVec) -> Result<MatrixJet> {
        let dim = self.rep.dim();
        let (n, dn) = self.field.eval(geo)?;
        check_future_timelike(geo, &n)?;
        let g = &geo.metric.g;
        let gi = &geo.metric.g_inv;
        let theta = &geo.frame.coframe;
        let gnn = n.dot(&(g * &n));
        let xin = xi.dot(&n);
        let b = xin / gnn;
        let v = gi * xi - &n * (2.0 * b);
        let gamma = |w: &RVec| self.rep.gamma_frame(w);

        let q = gamma(&(theta * &n));
        let q_inv = try_inverse_c(&q).ok_or(Error::NotTimelike { norm: gnn })?;
        let gv = gamma(&(theta * &v));
        let right = &gv * &q;
        let value = &q_inv * &right * (-I);

        let mut dx = Vec::with_capacity(dim);
        for k in 0..dim {
            let dgnn = n.dot(&(&geo.metric.dg[k] * &n)) + 2.0 * n.dot(&(g * &dn[k]));
            let db = xi.dot(&dn[k]) / gnn - xin * dgnn / (gnn * gnn);
            let dv = &geo.metric.dg_inv[k] * xi - &n * (2.0 * db) - &dn[k] * (2.0 * b);
            let dq = gamma(&(&geo.dcoframe[k] * &n + theta * &dn[k]));
            let dgv = gamma(&(&geo.dcoframe[k] * &v + theta * dv));
            let d = -(&q_inv * &dq * &q_inv * &right) + &q_inv * (dgv * &q + &gv * &dq);
            dx.push(d * (-I));
        }
        let dxi = (0..dim)
            .map(|j| {
                let dv = gi.column(j) - &n * (2.0 * n[j] / gnn);
                &q_inv * gamma(&(theta * dv)) * &q * (-I)
            })
            .collect();
        Ok(MatrixJet { value, dx, dxi })
    }
}

impl Factorization for DiracFactorization {
    fn q(&self, p: &PhasePoint) -> Result<f64> {
        self.rep.metric().hamiltonian_q(p)
    }

    fn sigma_tilde(&self, p: &PhasePoint) -> Result<CMat> {
        let geo = self.rep.geometry(p.x.as_slice())?;
        let (n, _) = self.field.eval(&geo)?;
        check_future_timelike(&geo, &n)?;
        sigma_tilde_at(&self.rep, &geo, &p.xi, &n)
    }

    fn sigma_tilde_jet(&self, p: &PhasePoint) -> Result<MatrixJet> {
        match self.rep.q_section() {
            QSection::Clifford => self.jet_at(&self.rep.geometry(p.x.as_slice())?, &p.xi),
            QSection::Custom { .. } => MatrixJet::central_difference(
                |pp| self.sigma_tilde(pp),
                p,
                crate::geometry::DEFAULT_FD_SCALE,
            ),
        }
    }
}

/// Applies the frame form `Σ_a η_aa γ_a ∇_{e_a}` (plus the density term) to the plane
/// wave `e^{i⟨y − x, ξ⟩} v` by central differences and compares with `(σ_1 + B) v`.
/// Returns the relative discrepancy.
pub fn plane_wave_residual(sys: &DiracSystem, p: &PhasePoint, v: &CVec, scale: f64) -> Result<f64> {
    let rep = sys.module();
    check_dim(rep.rank(), v.len())?;
    let x = p.x.as_slice();
    let geo = rep.geometry(x)?;
    let dim = rep.dim();
    let h = scale * (1.0 + p.x.norm());
    let wave = |y: &RVec| -> CVec {
        let phase = p.xi.dot(&(y - &p.x));
        v * c(phase.cos(), phase.sin())
    };
    let omega = rep.spin_connection(&geo);
    // ∂_μ ψ at x
    let dpsi: Vec<CVec> = (0..dim)
        .map(|mu| {
            let mut yp = p.x.clone();
            let mut ym = p.x.clone();
            yp[mu] += h;
            ym[mu] -= h;
            (wave(&yp) - wave(&ym)) / c(2.0 * h, 0.0)
        })
        .collect();
    let r = rep.rank();
    let mut out = CVec::zeros(r);
    for a in 0..dim {
        let ea = geo.frame.e.column(a).into_owned();
        let mut cov = contract(&omega, &ea) * v;
        for mu in 0..dim {
            cov += &dpsi[mu] * c(ea[mu], 0.0);
        }
        let eta = if a == 0 { -1.0 } else { 1.0 };
        out += &rep.gammas()[a] * cov * c(eta, 0.0);
    }
    if sys.weighting() == DensityWeighting::HalfDensity {
        let up = rep.gamma_upper(&geo);
        for (mu, g) in up.iter().enumerate() {
            out -= g * v * c(0.25 * geo.dlog_det(mu), 0.0);
        }
    }
    let coeffs = sys.coefficients(x)?;
    let sigma = coeffs
        .a
        .iter()
        .zip(p.xi.iter())
        .fold(CMat::zeros(r, r), |acc, (m, &xi)| acc + m * c(xi, 0.0));
    let expect = (&sigma + &coeffs.b) * v;
    Ok(vec_norm(&(out - &expect)) / (vec_norm(&(sigma * v)) + vec_norm(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::catalog::{minkowski, schwarzschild};
    use crate::linalg::{frobenius, max_abs};
    use crate::symbols::{principal_symbol, subprincipal_symbol, SymbolPackage};
    use std::f64::consts::FRAC_PI_2;

    fn pp(x: &[f64], xi: &[f64]) -> PhasePoint {
        PhasePoint::from_slices(x, xi).unwrap()
    }

    fn flat() -> (CliffordModule, DiracSystem) {
        let rep = CliffordModule::canonical(minkowski(4)).unwrap();
        (rep.clone(), DiracSystem::new(rep))
    }

    #[test]
    fn minkowski_principal_symbols() {
        let (rep, sys) = flat();
        let g = rep.gammas();
        let s = principal_symbol(&sys, &pp(&[0.0; 4], &[1.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!(s, (&g[1] - &g[0]) * I);
        assert!(s.determinant().norm() < 1e-15);
        let s = principal_symbol(&sys, &pp(&[0.0; 4], &[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(s, &g[0] * -I);
        assert_eq!(sys.coefficients(&[1.0, 2.0, 3.0, 4.0]).unwrap().b, CMat::zeros(4, 4));
        assert_eq!(subprincipal_symbol(&sys, &pp(&[0.0; 4], &[1.0, 1.0, 0.0, 0.0])).unwrap(), CMat::zeros(4, 4));
    }

    #[test]
    fn minkowski_sigma_tilde_examples() {
        let (rep, _) = flat();
        let g = rep.gammas();
        let e0 = RVec::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let id = CMat::identity(4, 4);
        let st = sigma_tilde(&rep, &pp(&[0.0; 4], &[1.0, 1.0, 0.0, 0.0]), &e0).unwrap();
        assert!(max_abs(&(&st - (&g[0] - &g[1]) * -I)) < 1e-15);
        let sigma = (&g[1] - &g[0]) * I;
        assert!(max_abs(&(&st * &sigma)) < 1e-15);
        let st = sigma_tilde(&rep, &pp(&[0.0; 4], &[1.0, 0.0, 0.0, 0.0]), &e0).unwrap();
        assert!(max_abs(&(&st - &g[0] * -I)) < 1e-15);
        assert!(max_abs(&(&st * (&g[0] * -I) + &id)) < 1e-15);
        let st = sigma_tilde(&rep, &pp(&[0.0; 4], &[0.0, 1.0, 0.0, 0.0]), &e0).unwrap();
        assert!(max_abs(&(&st - &g[1] * I)) < 1e-15);
        assert!(max_abs(&(&st * (&g[1] * I) - &id)) < 1e-15);
        let spacelike = RVec::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            sigma_tilde(&rep, &pp(&[0.0; 4], &[1.0, 0.0, 0.0, 0.0]), &spacelike),
            Err(Error::NotTimelike { .. })
        ));
        let zero = PhasePoint { x: RVec::zeros(4), xi: RVec::zeros(4) };
        assert_eq!(sigma_tilde(&rep, &zero, &e0), Err(Error::ZeroCovector));
    }

    #[test]
    fn closed_form_jets_match_finite_differences() {
        let rep = CliffordModule::canonical(schwarzschild(1.0)).unwrap();
        let sys = DiracSystem::new(rep.clone());
        let p = pp(&[0.3, 6.5, 1.1, 0.4], &[-1.0, 0.3, 2.0, -1.5]);
        let exact = sys.coefficient_jet(p.x.as_slice()).unwrap();
        let fd = super::super::central_difference_jet(&sys, p.x.as_slice(), 1e-5).unwrap();
        for k in 0..4 {
            for j in 0..4 {
                assert!(max_abs(&(&exact.da[k][j] - &fd.da[k][j])) < 1e-8);
            }
        }
        for field in [
            TimelikeField::FrameTime,
            TimelikeField::CoordinateTime,
            TimelikeField::Constant { components: vec![1.2, 0.1, 0.0, 0.01] },
        ] {
            let fac = DiracFactorization::new(rep.clone(), field);
            let jet = fac.sigma_tilde_jet(&p).unwrap();
            let fd = MatrixJet::central_difference(|q| fac.sigma_tilde(q), &p, 1e-5).unwrap();
            for k in 0..4 {
                assert!(max_abs(&(&jet.dx[k] - &fd.dx[k])) < 1e-8);
                assert!(max_abs(&(&jet.dxi[k] - &fd.dxi[k])) < 1e-8);
            }
        }
    }

    #[test]
    fn sigma_tilde_coincides_with_principal_symbol_for_spin_half() {
        let rep = CliffordModule::canonical(schwarzschild(1.0)).unwrap();
        let sys = DiracSystem::new(rep.clone());
        let p = pp(&[0.0, 4.0, 0.9, 0.0], &[0.7, -0.2, 1.3, 0.4]);
        let s1 = principal_symbol(&sys, &p).unwrap();
        for comps in [vec![1.0, 0.0, 0.0, 0.0], vec![2.0, 0.3, 0.05, -0.1]] {
            let st = sigma_tilde(&rep, &p, &RVec::from_vec(comps)).unwrap();
            assert!(max_abs(&(st - &s1)) < 1e-13);
        }
    }

    #[test]
    fn subprincipal_closed_form_matches_central_differences() {
        for weighting in [DensityWeighting::HalfDensity, DensityWeighting::None] {
            let rep = CliffordModule::canonical(schwarzschild(1.0)).unwrap();
            let sys = DiracSystem::with_weighting(rep, weighting);
            let p = pp(&[0.0, 10.0, 0.9, 0.0], &[-1.0, 1.25, 0.0, 0.0]);
            let exact = subprincipal_symbol(&sys, &p).unwrap();
            let fd = super::super::subprincipal_from_jet(
                &super::super::central_difference_jet(&sys, p.x.as_slice(), 1e-5).unwrap(),
            );
            if weighting == DensityWeighting::None {
                assert!(max_abs(&exact) > 1e-3);
            }
            assert!(max_abs(&(exact - fd)) < 1e-6);
        }
    }

    #[test]
    fn plane_wave_consistency() {
        for weighting in [DensityWeighting::HalfDensity, DensityWeighting::None] {
            let rep = CliffordModule::canonical(schwarzschild(1.0)).unwrap();
            let sys = DiracSystem::with_weighting(rep, weighting);
            let p = pp(&[0.0, 10.0, FRAC_PI_2, 0.0], &[-1.0, 1.25, 0.3, 0.0]);
            let v = CVec::from_fn(4, |i, _| c(1.0 + i as f64, 0.5 - i as f64));
            let r = plane_wave_residual(&sys, &p, &v, 1e-5).unwrap();
            assert!(r < 1e-6, "{r}");
        }
        let (_, sys) = flat();
        let p = pp(&[0.0; 4], &[1.0, 1.0, 0.0, 0.0]);
        let v = CVec::from_fn(4, |i, _| c(i as f64, 1.0));
        assert!(plane_wave_residual(&sys, &p, &v, 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn package_factorization_residual() {
        let rep = CliffordModule::canonical(schwarzschild(1.0)).unwrap();
        let sys = DiracSystem::new(rep.clone());
        let fac = DiracFactorization::new(rep, TimelikeField::FrameTime);
        let p = pp(&[0.0, 10.0, FRAC_PI_2, 0.0], &[1.0, 1.25, 0.0, 0.0]);
        let pkg = SymbolPackage::compute(&sys, &fac, &p).unwrap();
        assert!(pkg.q.abs() < 1e-14);
        assert!(pkg.factorization_residual < 1e-12);
        assert!(frobenius(&pkg.bracket) > 0.0);
        let json = serde_json::to_string(&pkg).unwrap();
        let back: SymbolPackage = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pkg);
    }
}

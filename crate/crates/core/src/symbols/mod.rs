//! Symbol calculus of first-order systems `A^j(x) D_j + B(x)` with `D_j = −i ∂_j`.
//!
//! The principal symbol is `σ_1(x, ξ) = A^j(x) ξ_j` and the subprincipal symbol is
//! `σ^s = B − (1/2i) ∂_j A^j`.

mod dirac;
mod principal;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::geometry::{PhasePoint, DEFAULT_FD_SCALE};
use crate::linalg::{c, frobenius, CMat, I};

pub use dirac::{
    plane_wave_residual, sigma_tilde, DensityWeighting, DiracFactorization, DiracSystem,
    TimelikeField,
};
pub use principal::{
    certify_principal_type, kernel_basis, CertificationMode, KernelBasis,
    PrincipalTypeCertificate, PrincipalTypeOptions, DEFAULT_RANK_TOL,
};

/// Coefficients `A^j(x)` and `B(x)` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: Vec<CMat>,
    pub b: CMat,
}

/// Coefficients together with `da[k][j] = ∂_k A^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientJet {
    pub a: Vec<CMat>,
    pub b: CMat,
    pub da: Vec<Vec<CMat>>,
}

pub trait FirstOrderSystem: Send + Sync {
    fn dim(&self) -> usize;

    fn rank(&self) -> usize;

    fn coefficients(&self, x: &[f64]) -> Result<Coefficients>;

    /// Defaults to central differences of [`FirstOrderSystem::coefficients`].
    fn coefficient_jet(&self, x: &[f64]) -> Result<CoefficientJet> {
        central_difference_jet(self, x, DEFAULT_FD_SCALE)
    }
}

/// `∂_k A^j` by central differences with step `scale (1 + |x|)`.
pub fn central_difference_jet<S: FirstOrderSystem + ?Sized>(
    sys: &S,
    x: &[f64],
    scale: f64,
) -> Result<CoefficientJet> {
    let Coefficients { a, b } = sys.coefficients(x)?;
    let h = scale * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
    let mut da = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let ap = sys.coefficients(&xp)?.a;
        let am = sys.coefficients(&xm)?.a;
        da.push(
            ap.iter()
                .zip(&am)
                .map(|(p, m)| (p - m) / c(2.0 * h, 0.0))
                .collect(),
        );
    }
    Ok(CoefficientJet { a, b, da })
}

/// A system with constant coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantSystem {
    pub a: Vec<CMat>,
    pub b: CMat,
}

impl FirstOrderSystem for ConstantSystem {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn rank(&self) -> usize {
        self.b.nrows()
    }
    fn coefficients(&self, _x: &[f64]) -> Result<Coefficients> {
        Ok(Coefficients {
            a: self.a.clone(),
            b: self.b.clone(),
        })
    }
    fn coefficient_jet(&self, _x: &[f64]) -> Result<CoefficientJet> {
        let r = self.rank();
        Ok(CoefficientJet {
            a: self.a.clone(),
            b: self.b.clone(),
            da: vec![vec![CMat::zeros(r, r); self.dim()]; self.dim()],
        })
    }
}

/// Value and first phase-space derivatives of a matrix symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixJet {
    pub value: CMat,
    /// `∂/∂x^k`.
    pub dx: Vec<CMat>,
    /// `∂/∂ξ_k`.
    pub dxi: Vec<CMat>,
}

impl MatrixJet {
    /// Jet of a matrix-valued function by central differences in every phase
    /// coordinate.
    pub fn central_difference<F>(f: F, p: &PhasePoint, scale: f64) -> Result<Self>
    where
        F: Fn(&PhasePoint) -> Result<CMat>,
    {
        let n = p.dim();
        let value = f(p)?;
        let hx = scale * (1.0 + p.x.norm());
        let hxi = scale * (1.0 + p.xi.norm());
        let mut dx = Vec::with_capacity(n);
        let mut dxi = Vec::with_capacity(n);
        for k in 0..n {
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp.x[k] += hx;
            pm.x[k] -= hx;
            dx.push((f(&pp)? - f(&pm)?) / c(2.0 * hx, 0.0));
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp.xi[k] += hxi;
            pm.xi[k] -= hxi;
            dxi.push((f(&pp)? - f(&pm)?) / c(2.0 * hxi, 0.0));
        }
        Ok(Self { value, dx, dxi })
    }
}

/// A factor `σ̃` with `σ̃ σ_1 = q Id`.
pub trait Factorization: Send + Sync {
    fn q(&self, p: &PhasePoint) -> Result<f64>;

    fn sigma_tilde(&self, p: &PhasePoint) -> Result<CMat>;

    /// Defaults to central differences of [`Factorization::sigma_tilde`].
    fn sigma_tilde_jet(&self, p: &PhasePoint) -> Result<MatrixJet> {
        MatrixJet::central_difference(|pp| self.sigma_tilde(pp), p, DEFAULT_FD_SCALE)
    }
}

pub fn principal_symbol<S: FirstOrderSystem + ?Sized>(sys: &S, p: &PhasePoint) -> Result<CMat> {
    check_dim(sys.dim(), p.dim())?;
    let a = sys.coefficients(p.x.as_slice())?.a;
    Ok(contract_xi(&a, p))
}

fn contract_xi(a: &[CMat], p: &PhasePoint) -> CMat {
    let r = a[0].nrows();
    a.iter()
        .zip(p.xi.iter())
        .fold(CMat::zeros(r, r), |acc, (m, &x)| acc + m * c(x, 0.0))
}

/// Jet of `σ_1` from a coefficient jet.
pub fn principal_jet(jet: &CoefficientJet, p: &PhasePoint) -> MatrixJet {
    MatrixJet {
        value: contract_xi(&jet.a, p),
        dx: jet.da.iter().map(|dak| contract_xi(dak, p)).collect(),
        dxi: jet.a.clone(),
    }
}

/// `σ^s = B − (1/2i) Σ_j ∂_j A^j`.
pub fn subprincipal_from_jet(jet: &CoefficientJet) -> CMat {
    let r = jet.b.nrows();
    let div = (0..jet.a.len()).fold(CMat::zeros(r, r), |acc, j| acc + &jet.da[j][j]);
    &jet.b + div * (I * 0.5)
}

pub fn subprincipal_symbol<S: FirstOrderSystem + ?Sized>(sys: &S, p: &PhasePoint) -> Result<CMat> {
    check_dim(sys.dim(), p.dim())?;
    Ok(subprincipal_from_jet(&sys.coefficient_jet(p.x.as_slice())?))
}

/// `{a, b} = Σ_j ∂_{ξ_j} a ∂_{x^j} b − ∂_{x^j} a ∂_{ξ_j} b`, not antisymmetrized.
pub fn poisson_bracket(a: &MatrixJet, b: &MatrixJet) -> CMat {
    let r = a.value.nrows();
    (0..a.dx.len()).fold(CMat::zeros(r, r), |acc, j| {
        acc + &a.dxi[j] * &b.dx[j] - &a.dx[j] * &b.dxi[j]
    })
}

/// Matrix Poisson bracket of two evaluators by central differences.
pub fn matrix_poisson_bracket<A, B>(a: A, b: B, p: &PhasePoint, scale: f64) -> Result<CMat>
where
    A: Fn(&PhasePoint) -> Result<CMat>,
    B: Fn(&PhasePoint) -> Result<CMat>,
{
    let ja = MatrixJet::central_difference(a, p, scale)?;
    let jb = MatrixJet::central_difference(b, p, scale)?;
    Ok(poisson_bracket(&ja, &jb))
}

/// Everything the Denker connection needs at one phase point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolPackage {
    pub at: PhasePoint,
    pub q: f64,
    #[serde(with = "crate::linalg::serde_cmat")]
    pub sigma_m: CMat,
    #[serde(with = "crate::linalg::serde_cmat")]
    pub sigma_tilde: CMat,
    #[serde(with = "crate::linalg::serde_cmat")]
    pub p_sub: CMat,
    #[serde(with = "crate::linalg::serde_cmat")]
    pub bracket: CMat,
    #[serde(with = "crate::linalg::serde_cmat_vec")]
    pub d_sigma_m_dx: Vec<CMat>,
    #[serde(with = "crate::linalg::serde_cmat_vec")]
    pub d_sigma_m_dxi: Vec<CMat>,
    /// `‖σ̃ σ_m − q Id‖_F`.
    pub factorization_residual: f64,
}

impl SymbolPackage {
    pub fn compute<S, F>(sys: &S, fac: &F, p: &PhasePoint) -> Result<Self>
    where
        S: FirstOrderSystem + ?Sized,
        F: Factorization + ?Sized,
    {
        check_dim(sys.dim(), p.dim())?;
        let jet = sys.coefficient_jet(p.x.as_slice())?;
        let sigma = principal_jet(&jet, p);
        let tilde = fac.sigma_tilde_jet(p)?;
        let q = fac.q(p)?;
        let r = sys.rank();
        let factorization_residual =
            frobenius(&(&tilde.value * &sigma.value - CMat::identity(r, r) * c(q, 0.0)));
        Ok(Self {
            at: p.clone(),
            q,
            bracket: poisson_bracket(&tilde, &sigma),
            p_sub: subprincipal_from_jet(&jet),
            sigma_tilde: tilde.value,
            sigma_m: sigma.value,
            d_sigma_m_dx: sigma.dx,
            d_sigma_m_dxi: sigma.dxi,
            factorization_residual,
        })
    }
}

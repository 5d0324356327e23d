//! Laurent coefficients of the twisted Weierstrass functions and the
//! ε-graded matrices built from them.
//!
//! `C(k,l)` and `D(k,l,z)` are the coefficients of
//! `P₁(x−y) = 1/(x−y) + Σ C(k,l) x^{k−1} y^{l−1}` and
//! `P₁(z+x−y) = Σ D(k,l,z) x^{k−1} y^{l−1}`.
//! Fractional powers of ε use principal roots, `ε^{1/4}` first, so that
//! `ε^{(2k−1)/4}` and `ε^{(k+l−1)/2}` are all powers of the same root.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::qseries::{eisenstein_table, weierstrass_table, ModularParam, SeriesPolicy, TwistData};
use crate::sewing::{SewingConfig, Torus};

/// Dense `M×M` truncation of an infinite matrix indexed from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMatrix {
    data: CMatrix,
}

impl TruncatedMatrix {
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() == 0 || data.nrows() != data.ncols() {
            return Err(Error::InvalidParameter("truncated matrix must be square and non-empty".into()));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("truncated matrix has non-finite entries".into()));
        }
        Ok(Self { data })
    }

    pub fn order(&self) -> usize {
        self.data.nrows()
    }

    /// Entry `(k, l)` with `1 ≤ k, l ≤ M`.
    pub fn get(&self, k: usize, l: usize) -> Result<Complex64> {
        let m = self.order();
        if k == 0 || l == 0 || k > m || l > m {
            return Err(Error::IndexOutOfRange(format!("({k}, {l}) outside 1..={m}")));
        }
        Ok(self.data[(k - 1, l - 1)])
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }
}

/// Row vector `h_a(x)` or `h̄_a(y)` attached to a point on torus `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfFormVector {
    pub entries: Vec<Complex64>,
    pub point: Complex64,
    pub torus: Torus,
}

impl HalfFormVector {
    pub fn order(&self) -> usize {
        self.entries.len()
    }
}

pub(crate) fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
}

fn sign(p: usize) -> f64 {
    if p % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `C[θ,φ](k,l,τ) = (−1)^l binom(k+l−2, k−1) E_{k+l−1}[θ,φ](τ)`.
pub fn c_coeff(k: usize, l: usize, twist: &TwistData, m: &ModularParam, pol: &SeriesPolicy) -> Result<Complex64> {
    check_index(k, l)?;
    let e = eisenstein_table(k + l - 1, twist, m, pol)?;
    Ok(c_from_table(k, l, &e))
}

fn c_from_table(k: usize, l: usize, e: &[Complex64]) -> Complex64 {
    e[k + l - 2] * (sign(l) * binom(k + l - 2, k - 1))
}

/// `D[θ,φ](k,l,τ,z) = (−1)^{k+1} binom(k+l−2, k−1) P_{k+l−1}[θ,φ](z,τ)`.
pub fn d_coeff(
    k: usize,
    l: usize,
    z: Complex64,
    twist: &TwistData,
    m: &ModularParam,
    pol: &SeriesPolicy,
) -> Result<Complex64> {
    check_index(k, l)?;
    let p = weierstrass_table(k + l - 1, twist, z, m, pol)?;
    Ok(p[k + l - 2] * (sign(k + 1) * binom(k + l - 2, k - 1)))
}

fn check_index(k: usize, l: usize) -> Result<()> {
    if k == 0 || l == 0 {
        return Err(Error::IndexOutOfRange(format!("Laurent indices must be >= 1, got ({k}, {l})")));
    }
    Ok(())
}

/// The `M×M` matrix `C(k,l)` for `1 ≤ k,l ≤ M`.
pub fn c_matrix(order: usize, twist: &TwistData, m: &ModularParam, pol: &SeriesPolicy) -> Result<CMatrix> {
    let e = eisenstein_table(2 * order - 1, twist, m, pol)?;
    Ok(CMatrix::from_fn(order, order, |i, j| c_from_table(i + 1, j + 1, &e)))
}

/// Principal `ε^{1/4}`.
pub(crate) fn eps_quarter(eps: Complex64) -> Complex64 {
    eps.sqrt().sqrt()
}

/// `F_a(k,l) = ε^{(k+l−1)/2} C[θ_a,φ_a](k,l,τ_a)`.
pub fn f_matrix(a: Torus, cfg: &SewingConfig, twist: &TwistData) -> Result<TruncatedMatrix> {
    let order = cfg.order();
    let c = c_matrix(order, twist, cfg.tau(a), cfg.policy())?;
    let root = cfg.eps().sqrt();
    let pows = powers(root, 2 * order);
    TruncatedMatrix::new(CMatrix::from_fn(order, order, |i, j| c[(i, j)] * pows[i + j + 1]))
}

/// `A_a(k,l) = ε^{(k+l)/2} (−1)^{k+1} (k+l−1)! / (√(kl)(k−1)!(l−1)!) E_{k+l}(τ_a)`.
pub fn a_matrix(a: Torus, cfg: &SewingConfig) -> Result<TruncatedMatrix> {
    let order = cfg.order();
    let trivial = TwistData::new(0.5, 0.5).expect("valid characteristics");
    let e = eisenstein_table(2 * order, &trivial, cfg.tau(a), cfg.policy())?;
    let root = cfg.eps().sqrt();
    let pows = powers(root, 2 * order + 1);
    TruncatedMatrix::new(CMatrix::from_fn(order, order, |i, j| {
        let (k, l) = (i + 1, j + 1);
        let comb = (k + l - 1) as f64 * binom(k + l - 2, k - 1) / ((k * l) as f64).sqrt();
        e[k + l - 1] * pows[k + l] * (sign(k + 1) * comb)
    }))
}

fn powers(x: Complex64, n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..=n {
        out.push(acc);
        acc *= x;
    }
    out
}

fn check_punctured(a: Torus, x: Complex64, cfg: &SewingConfig) -> Result<()> {
    let inner = cfg.eps().norm() / cfg.radius(a.other());
    if x.norm() < inner {
        return Err(Error::DomainViolation(format!(
            "point {x} lies inside the excised disk |z| < {inner} of torus {}",
            a.index()
        )));
    }
    Ok(())
}

/// `h_a(k,x) = ε^{k/2−1/4} D[θ_a,φ_a](1,k,τ_a,x)` for `k = 1..M`.
pub fn h_vector(a: Torus, x: Complex64, cfg: &SewingConfig, twist: &TwistData) -> Result<HalfFormVector> {
    check_punctured(a, x, cfg)?;
    let order = cfg.order();
    let p = weierstrass_table(order, twist, x, cfg.tau(a), cfg.policy())?;
    let pows = powers(eps_quarter(cfg.eps()), 2 * order);
    let entries = (1..=order).map(|k| p[k - 1] * pows[2 * k - 1]).collect();
    Ok(HalfFormVector { entries, point: x, torus: a })
}

/// `h̄_a(k,y) = ε^{k/2−1/4} D[θ_a,φ_a](k,1,τ_a,−y)` for `k = 1..M`.
pub fn hbar_vector(a: Torus, y: Complex64, cfg: &SewingConfig, twist: &TwistData) -> Result<HalfFormVector> {
    check_punctured(a, y, cfg)?;
    let order = cfg.order();
    let p = weierstrass_table(order, twist, -y, cfg.tau(a), cfg.policy())?;
    let pows = powers(eps_quarter(cfg.eps()), 2 * order);
    let entries = (1..=order)
        .map(|k| p[k - 1] * pows[2 * k - 1] * sign(k + 1))
        .collect();
    Ok(HalfFormVector { entries, point: y, torus: a })
}

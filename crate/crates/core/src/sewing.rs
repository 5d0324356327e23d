//! Sewing geometry and the genus-two Szegő kernel.
//!
//! Two tori with local coordinates `z₁`, `z₂` around the excised points are
//! glued along annuli through `z₁z₂ = ε`. Everything downstream is defined on
//! the domain `|ε| < ¼D(q₁)D(q₂)`, where `D(q)` is the minimal lattice distance.

use num_complex::Complex64;

use crate::coeffs::{f_matrix, h_vector, hbar_vector, HalfFormVector};
use crate::error::{Error, Result};
use crate::linalg::{det, identity_minus, solve, CMatrix, CVector};
use crate::qseries::{weierstrass_regular_table, weierstrass_twisted, ModularParam, SeriesPolicy, TwistData, I, TWO_PI};

/// Which of the two sewn tori.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Torus {
    One,
    Two,
}

impl Torus {
    pub fn other(self) -> Self {
        match self {
            Torus::One => Torus::Two,
            Torus::Two => Torus::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Torus::One => 1,
            Torus::Two => 2,
        }
    }
}

/// Branch `ξ ∈ {±i}` of the double cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Xi {
    PlusI,
    MinusI,
}

impl Xi {
    pub fn value(self) -> Complex64 {
        match self {
            Xi::PlusI => I,
            Xi::MinusI => -I,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Xi::PlusI => Xi::MinusI,
            Xi::MinusI => Xi::PlusI,
        }
    }
}

/// Default truncation order of the infinite matrices.
pub const DEFAULT_ORDER: usize = 16;

/// Default disk radius as a fraction of the minimal lattice distance.
pub const RADIUS_FRACTION: f64 = 0.49;

/// Sewing parameters `(τ₁, τ₂, ε)` plus branch, radii and truncation controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SewingConfig {
    tau1: ModularParam,
    tau2: ModularParam,
    eps: Complex64,
    xi: Xi,
    r1: f64,
    r2: f64,
    order: usize,
    pol: SeriesPolicy,
}

impl SewingConfig {
    /// Configuration with `ξ = +i`, radii `0.49·D(q_a)` and order 16.
    pub fn new(tau1: ModularParam, tau2: ModularParam, eps: Complex64) -> Self {
        Self {
            tau1,
            tau2,
            eps,
            xi: Xi::PlusI,
            r1: RADIUS_FRACTION * min_lattice_distance(&tau1),
            r2: RADIUS_FRACTION * min_lattice_distance(&tau2),
            order: DEFAULT_ORDER,
            pol: SeriesPolicy::default(),
        }
    }

    pub fn with_xi(mut self, xi: Xi) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order.max(1);
        self
    }

    pub fn with_policy(mut self, pol: SeriesPolicy) -> Self {
        self.pol = pol;
        self
    }

    pub fn with_eps(mut self, eps: Complex64) -> Self {
        self.eps = eps;
        self
    }

    /// Explicit radii; rejected unless `r_a < D(q_a)/2`.
    pub fn with_radii(mut self, r1: f64, r2: f64) -> Result<Self> {
        let d1 = min_lattice_distance(&self.tau1);
        let d2 = min_lattice_distance(&self.tau2);
        if !(r1 > 0.0 && r1 < 0.5 * d1 && r2 > 0.0 && r2 < 0.5 * d2) {
            return Err(Error::DomainViolation(format!(
                "radii ({r1}, {r2}) must satisfy 0 < r_a < D(q_a)/2 = ({}, {})",
                0.5 * d1,
                0.5 * d2
            )));
        }
        self.r1 = r1;
        self.r2 = r2;
        Ok(self)
    }

    pub fn tau(&self, a: Torus) -> &ModularParam {
        match a {
            Torus::One => &self.tau1,
            Torus::Two => &self.tau2,
        }
    }

    pub fn tau1(&self) -> &ModularParam {
        &self.tau1
    }

    pub fn tau2(&self) -> &ModularParam {
        &self.tau2
    }

    pub fn eps(&self) -> Complex64 {
        self.eps
    }

    pub fn xi(&self) -> Xi {
        self.xi
    }

    pub fn radius(&self, a: Torus) -> f64 {
        match a {
            Torus::One => self.r1,
            Torus::Two => self.r2,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn policy(&self) -> &SeriesPolicy {
        &self.pol
    }

    /// `¼·D(q₁)·D(q₂)`.
    pub fn domain_bound(&self) -> f64 {
        0.25 * min_lattice_distance(&self.tau1) * min_lattice_distance(&self.tau2)
    }

    /// The same configuration with the two tori exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            tau1: self.tau2,
            tau2: self.tau1,
            r1: self.r2,
            r2: self.r1,
            ..*self
        }
    }

    /// Domain membership plus the radius constraint `|ε| ≤ r₁r₂`.
    pub fn require_domain(&self) -> Result<()> {
        if !in_domain(self) {
            return Err(Error::DomainViolation(format!(
                "|eps| = {} is not below the sewing bound {}",
                self.eps.norm(),
                self.domain_bound()
            )));
        }
        if self.eps.norm() > self.r1 * self.r2 {
            return Err(Error::DomainViolation(format!(
                "|eps| = {} exceeds r1*r2 = {}",
                self.eps.norm(),
                self.r1 * self.r2
            )));
        }
        Ok(())
    }
}

/// A point on one of the punctured tori, in its local coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub torus: Torus,
    pub z: Complex64,
}

impl SurfacePoint {
    pub fn new(torus: Torus, z: Complex64) -> Self {
        Self { torus, z }
    }

    /// Checks `|z| ≥ |ε|/r_ā`.
    pub fn check(&self, cfg: &SewingConfig) -> Result<()> {
        let inner = cfg.eps().norm() / cfg.radius(self.torus.other());
        if self.z.norm() < inner {
            return Err(Error::DomainViolation(format!(
                "point {} on torus {} lies inside the excised disk |z| < {inner}",
                self.z,
                self.torus.index()
            )));
        }
        Ok(())
    }
}

/// `2π·min |mτ + n|` over `(m, n) ≠ (0, 0)`.
pub fn min_lattice_distance(m: &ModularParam) -> f64 {
    let tau = m.tau();
    let mmax = (1.0 / tau.im).ceil() as i64 + 1;
    let mut best = f64::INFINITY;
    for a in -mmax..=mmax {
        let nmax = (a as f64 * tau.re).abs().ceil() as i64 + 2;
        for b in -nmax..=nmax {
            if a == 0 && b == 0 {
                continue;
            }
            best = best.min((tau * a as f64 + b as f64).norm());
        }
    }
    TWO_PI * best
}

/// `|ε| < ¼·D(q₁)·D(q₂)`.
pub fn in_domain(cfg: &SewingConfig) -> bool {
    cfg.eps.norm() < cfg.domain_bound()
}

/// The `2M×2M` block matrix `Q = [[0, ξF₁], [−ξF₂, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockQ {
    data: CMatrix,
}

impl BlockQ {
    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn order(&self) -> usize {
        self.data.nrows() / 2
    }
}

fn check_twists(t1: &TwistData, t2: &TwistData) -> Result<()> {
    if t1.is_degenerate() || t2.is_degenerate() {
        return Err(Error::DegenerateTwist);
    }
    Ok(())
}

pub fn build_q(cfg: &SewingConfig, t1: &TwistData, t2: &TwistData) -> Result<BlockQ> {
    cfg.require_domain()?;
    check_twists(t1, t2)?;
    let f1 = f_matrix(Torus::One, cfg, t1)?;
    let f2 = f_matrix(Torus::Two, cfg, t2)?;
    let m = cfg.order();
    let xi = cfg.xi().value();
    let mut q = CMatrix::zeros(2 * m, 2 * m);
    q.view_mut((0, m), (m, m)).copy_from(&(f1.matrix() * xi));
    q.view_mut((m, 0), (m, m)).copy_from(&(f2.matrix() * (-xi)));
    Ok(BlockQ { data: q })
}

/// `det(I − Q)` on the `2M×2M` truncation.
pub fn det_i_minus_q(cfg: &SewingConfig, t1: &TwistData, t2: &TwistData) -> Result<Complex64> {
    let q = build_q(cfg, t1, t2)?;
    Ok(det(&identity_minus(q.matrix())))
}

/// `det(I − F₁F₂)` on the `M×M` truncation.
pub fn det_i_minus_f1f2(cfg: &SewingConfig, t1: &TwistData, t2: &TwistData) -> Result<Complex64> {
    cfg.require_domain()?;
    check_twists(t1, t2)?;
    let f1 = f_matrix(Torus::One, cfg, t1)?;
    let f2 = f_matrix(Torus::Two, cfg, t2)?;
    Ok(det(&identity_minus(&(f1.matrix() * f2.matrix()))))
}

/// Scalar part of the genus-one Szegő kernel, `P₁[θ,φ](x − y, τ)`.
pub fn szego_g1(x: Complex64, y: Complex64, twist: &TwistData, m: &ModularParam, pol: &SeriesPolicy) -> Result<Complex64> {
    if twist.is_degenerate() {
        return Err(Error::DegenerateTwist);
    }
    weierstrass_twisted(1, twist, x - y, m, pol)
}

/// Precomputed sewing data for repeated genus-two kernel evaluations.
#[derive(Debug, Clone)]
pub struct Szego2 {
    cfg: SewingConfig,
    t1: TwistData,
    t2: TwistData,
    f1: CMatrix,
    f2: CMatrix,
}

impl Szego2 {
    pub fn new(cfg: &SewingConfig, t1: &TwistData, t2: &TwistData) -> Result<Self> {
        cfg.require_domain()?;
        check_twists(t1, t2)?;
        Ok(Self {
            cfg: *cfg,
            t1: *t1,
            t2: *t2,
            f1: f_matrix(Torus::One, cfg, t1)?.matrix().clone(),
            f2: f_matrix(Torus::Two, cfg, t2)?.matrix().clone(),
        })
    }

    pub fn config(&self) -> &SewingConfig {
        &self.cfg
    }

    pub fn twist(&self, a: Torus) -> &TwistData {
        match a {
            Torus::One => &self.t1,
            Torus::Two => &self.t2,
        }
    }

    fn f(&self, a: Torus) -> &CMatrix {
        match a {
            Torus::One => &self.f1,
            Torus::Two => &self.f2,
        }
    }

    pub fn h(&self, p: &SurfacePoint) -> Result<HalfFormVector> {
        h_vector(p.torus, p.z, &self.cfg, self.twist(p.torus))
    }

    pub fn hbar(&self, p: &SurfacePoint) -> Result<HalfFormVector> {
        hbar_vector(p.torus, p.z, &self.cfg, self.twist(p.torus))
    }

    /// `(I − F_ā F_a)⁻¹ v` with `a` the torus of `x`.
    fn resolvent(&self, a: Torus, v: &CVector) -> Result<CVector> {
        let fa = self.f(a);
        let fb = self.f(a.other());
        solve(&identity_minus(&(fb * fa)), v)
    }

    fn correction(&self, x: &SurfacePoint, y: &SurfacePoint) -> Result<Complex64> {
        let hx = CVector::from_vec(self.h(x)?.entries);
        let hy = CVector::from_vec(self.hbar(y)?.entries);
        let a = x.torus;
        if x.torus == y.torus {
            let v = self.f(a.other()) * hy;
            let u = self.resolvent(a, &v)?;
            Ok(hx.dot(&u))
        } else {
            let u = self.resolvent(a, &hy)?;
            let sign = if a.other().index() % 2 == 0 { 1.0 } else { -1.0 };
            Ok(self.cfg.xi().value() * sign * hx.dot(&u))
        }
    }

    /// Scalar part of `S⁽²⁾(x, y)`.
    pub fn kernel(&self, x: &SurfacePoint, y: &SurfacePoint) -> Result<Complex64> {
        x.check(&self.cfg)?;
        y.check(&self.cfg)?;
        let corr = self.correction(x, y)?;
        if x.torus == y.torus {
            if (x.z - y.z).norm() < 1e-14 {
                return Err(Error::SingularPoint("Szegő kernel on the diagonal".into()));
            }
            let a = x.torus;
            Ok(szego_g1(x.z, y.z, self.twist(a), self.cfg.tau(a), self.cfg.policy())? + corr)
        } else {
            Ok(corr)
        }
    }

    /// `S⁽²⁾(x, y) − 1/(x − y)` for two points on the same torus; finite on the diagonal.
    pub fn kernel_regular(&self, x: &SurfacePoint, y: &SurfacePoint) -> Result<Complex64> {
        if x.torus != y.torus {
            return Err(Error::InvalidParameter("regular part needs both points on one torus".into()));
        }
        x.check(&self.cfg)?;
        y.check(&self.cfg)?;
        let a = x.torus;
        let reg = weierstrass_regular_table(1, self.twist(a), x.z - y.z, self.cfg.tau(a), self.cfg.policy())?[0];
        Ok(reg + self.correction(x, y)?)
    }

    /// The equivalent block assembly `S^{(1,1)} + h(x) Ξ (I − Q)⁻¹ h̄ᵀ(y)`.
    pub fn kernel_block(&self, x: &SurfacePoint, y: &SurfacePoint) -> Result<Complex64> {
        x.check(&self.cfg)?;
        y.check(&self.cfg)?;
        let m = self.cfg.order();
        let xi = self.cfg.xi().value();
        let embed = |v: HalfFormVector| {
            let mut out = CVector::zeros(2 * m);
            let off = if v.torus == Torus::One { 0 } else { m };
            for (k, e) in v.entries.iter().enumerate() {
                out[off + k] = *e;
            }
            out
        };
        let hx = embed(self.h(x)?);
        let hy = embed(self.hbar(y)?);
        let mut q = CMatrix::zeros(2 * m, 2 * m);
        q.view_mut((0, m), (m, m)).copy_from(&(&self.f1 * xi));
        q.view_mut((m, 0), (m, m)).copy_from(&(&self.f2 * (-xi)));
        let mut big_xi = CMatrix::zeros(2 * m, 2 * m);
        for k in 0..m {
            big_xi[(k, m + k)] = xi;
            big_xi[(m + k, k)] = -xi;
        }
        let u = solve(&identity_minus(&q), &hy)?;
        let corr = (hx.transpose() * big_xi * u)[(0, 0)];
        let base = if x.torus == y.torus {
            szego_g1(x.z, y.z, self.twist(x.torus), self.cfg.tau(x.torus), self.cfg.policy())?
        } else {
            Complex64::new(0.0, 0.0)
        };
        Ok(base + corr)
    }
}

/// Scalar part of the genus-two Szegő kernel `S⁽²⁾(x, y)`.
pub fn szego_g2(x: &SurfacePoint, y: &SurfacePoint, cfg: &SewingConfig, t1: &TwistData, t2: &TwistData) -> Result<Complex64> {
    Szego2::new(cfg, t1, t2)?.kernel(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mp(re: f64, im: f64) -> ModularParam {
        ModularParam::new(c(re, im)).unwrap()
    }

    #[test]
    fn lattice_distance_examples() {
        let two_pi = TWO_PI;
        assert!((min_lattice_distance(&mp(0.0, 1.0)) - two_pi).abs() < 1e-14);
        assert!((min_lattice_distance(&mp(0.0, 2.0)) - two_pi).abs() < 1e-14);
        let want = two_pi * 0.5f64.sqrt();
        assert!((min_lattice_distance(&mp(0.5, 0.5)) - want).abs() < 1e-14);
        // Brute force over a wide box.
        for tau in [c(0.37, 0.21), c(-0.45, 0.35), c(2.3, 0.6)] {
            let m = mp(tau.re, tau.im);
            let mut best = f64::INFINITY;
            for a in -20i64..=20 {
                for b in -40i64..=40 {
                    if a != 0 || b != 0 {
                        best = best.min((tau * a as f64 + b as f64).norm());
                    }
                }
            }
            assert!((min_lattice_distance(&m) - two_pi * best).abs() < 1e-13);
        }
    }

    #[test]
    fn domain_examples() {
        let i = mp(0.0, 1.0);
        assert!(in_domain(&SewingConfig::new(i, i, c(0.0, 0.0))));
        let pi2 = std::f64::consts::PI.powi(2);
        assert!(!in_domain(&SewingConfig::new(i, i, c(pi2, 0.0))));
        assert!(in_domain(&SewingConfig::new(i, mp(0.0, 2.0), c(5.0, 0.0))));
    }

    #[test]
    fn q_structure() {
        let t1 = TwistData::new(0.2, 0.3).unwrap();
        let t2 = TwistData::new(0.7, 0.1).unwrap();
        let cfg = SewingConfig::new(mp(0.0, 1.0), mp(0.1, 1.2), c(0.05, 0.02)).with_order(6);
        let q = build_q(&cfg, &t1, &t2).unwrap();
        let qm = q.matrix();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(qm[(i, j)], c(0.0, 0.0));
                assert_eq!(qm[(6 + i, 6 + j)], c(0.0, 0.0));
            }
        }
        let e1 = crate::qseries::eisenstein_twisted(1, &t1, cfg.tau1(), cfg.policy()).unwrap();
        let want = -I * cfg.eps().sqrt() * e1;
        assert!((qm[(0, 6)] - want).norm() < 1e-15);
        let flipped = build_q(&cfg.with_xi(Xi::MinusI), &t1, &t2).unwrap();
        assert!((flipped.matrix() + qm).norm() < 1e-15);
        let zero = SewingConfig::new(mp(0.0, 1.0), mp(0.1, 1.2), c(0.0, 0.0)).with_order(4);
        assert!((det_i_minus_q(&zero, &t1, &t2).unwrap() - 1.0).norm() < 1e-15);
        let degenerate = TwistData::new(0.5, 0.5).unwrap();
        assert_eq!(build_q(&cfg, &degenerate, &t2), Err(Error::DegenerateTwist));
    }

    #[test]
    fn szego_g1_skew_and_residue() {
        let t = TwistData::new(0.35, 0.8).unwrap();
        let m = mp(0.2, 0.95);
        let pol = SeriesPolicy::default();
        let (x, y) = (c(0.4, 0.3), c(-0.2, 1.1));
        let a = szego_g1(x, y, &t, &m, &pol).unwrap();
        let b = szego_g1(y, x, &t.inverse(), &m, &pol).unwrap();
        assert!((a + b).norm() < 1e-12);
        let d = c(1e-5, 0.0);
        assert!(((d * szego_g1(x + d, x, &t, &m, &pol).unwrap()) - 1.0).norm() < 1e-4);
    }
}

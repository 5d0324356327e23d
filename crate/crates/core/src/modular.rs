//! SL(2,ℤ) at genus one and `G = (SL(2,ℤ) × SL(2,ℤ)) ⋊ ℤ₂` at genus two,
//! acting on moduli, characteristics and insertion points.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fermion::{gen_form_2n, z2_partition, CharPair};
use crate::qseries::{ModularParam, TwistData};
use crate::sewing::{SewingConfig, SurfacePoint, Torus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SL2Element {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl SL2Element {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if a * d - b * c != 1 {
            return Err(Error::InvalidParameter(format!("({a} {b}; {c} {d}) has determinant {}", a * d - b * c)));
        }
        Ok(Self { a, b, c, d })
    }

    pub const IDENTITY: Self = Self { a: 1, b: 0, c: 0, d: 1 };
    pub const T: Self = Self { a: 1, b: 1, c: 0, d: 1 };
    pub const S: Self = Self { a: 0, b: -1, c: 1, d: 0 };

    pub fn compose(&self, o: &Self) -> Self {
        Self {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    /// `cτ + d`.
    pub fn automorphy(&self, tau: Complex64) -> Complex64 {
        tau * self.c as f64 + self.d as f64
    }
}

pub fn act_tau(g: &SL2Element, m: &ModularParam) -> ModularParam {
    let t = m.tau();
    let img = (t * g.a as f64 + g.b as f64) / g.automorphy(t);
    // Im(γτ) = Im τ / |cτ+d|² > 0
    ModularParam::new(img).expect("SL(2,Z) preserves the upper half plane")
}

/// `(θ, φ) ↦ (θᵃφᵇ, θᶜφᵈ)`, computed on the exponents `θ = e^{2πiu}`, `φ = e^{2πiv}`.
pub fn act_char(g: &SL2Element, twist: &TwistData) -> Result<TwistData> {
    let (u, v) = twist.exponents();
    let img = TwistData::from_exponents(g.a as f64 * u + g.b as f64 * v, g.c as f64 * u + g.d as f64 * v)?;
    if img.is_degenerate() {
        return Err(Error::DegenerateTwist);
    }
    Ok(img)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Gamma1(SL2Element),
    Gamma2(SL2Element),
    Beta,
}

/// A word in the generators, applied left to right.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GElement {
    pub word: Vec<Generator>,
}

impl GElement {
    pub fn new(word: Vec<Generator>) -> Self {
        Self { word }
    }

    pub fn gamma1(g: SL2Element) -> Self {
        Self::new(vec![Generator::Gamma1(g)])
    }

    pub fn gamma2(g: SL2Element) -> Self {
        Self::new(vec![Generator::Gamma2(g)])
    }

    pub fn beta() -> Self {
        Self::new(vec![Generator::Beta])
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Self) -> Self {
        Self::new(self.word.iter().chain(&other.word).copied().collect())
    }
}

fn rebuild(old: &SewingConfig, tau1: ModularParam, tau2: ModularParam, eps: Complex64) -> SewingConfig {
    SewingConfig::new(tau1, tau2, eps)
        .with_xi(old.xi())
        .with_order(old.order())
        .with_policy(*old.policy())
}

fn step(
    gen: &Generator,
    cfg: &SewingConfig,
    chars: &CharPair,
    pts: &mut [SurfacePoint],
    jac: &mut [Complex64],
) -> Result<(SewingConfig, CharPair)> {
    match gen {
        Generator::Beta => {
            for p in pts.iter_mut() {
                p.torus = p.torus.other();
            }
            Ok((cfg.swapped(), chars.swapped()))
        }
        Generator::Gamma1(g) | Generator::Gamma2(g) => {
            let a = if matches!(gen, Generator::Gamma1(_)) { Torus::One } else { Torus::Two };
            let j = g.automorphy(cfg.tau(a).tau());
            let t = act_tau(g, cfg.tau(a));
            let tw = act_char(g, chars.get(a))?;
            for (p, f) in pts.iter_mut().zip(jac.iter_mut()).filter(|(p, _)| p.torus == a) {
                p.z /= j;
                *f *= j;
            }
            Ok(match a {
                Torus::One => (rebuild(cfg, t, *cfg.tau2(), cfg.eps() / j), CharPair { t1: tw, t2: chars.t2 }),
                Torus::Two => (rebuild(cfg, *cfg.tau1(), t, cfg.eps() / j), CharPair { t1: chars.t1, t2: tw }),
            })
        }
    }
}

/// Image of a configuration with insertion points.
#[derive(Debug, Clone)]
pub struct Transported {
    pub cfg: SewingConfig,
    pub chars: CharPair,
    pub points: Vec<SurfacePoint>,
    /// Accumulated `∏(cτ+d)` per point, so that `dz' = dz / jacobian`.
    pub jacobians: Vec<Complex64>,
}

/// Image of `(cfg, chars)` and of the insertion points under `g`. Points on
/// the transformed torus are rescaled by `z ↦ z/(cτ+d)`.
pub fn act_config_points(g: &GElement, cfg: &SewingConfig, chars: &CharPair, points: &[SurfacePoint]) -> Result<Transported> {
    let mut c = *cfg;
    let mut ch = *chars;
    let mut pts = points.to_vec();
    let mut jac = vec![Complex64::new(1.0, 0.0); pts.len()];
    for gen in &g.word {
        (c, ch) = step(gen, &c, &ch, &mut pts, &mut jac)?;
    }
    c.require_domain()?;
    Ok(Transported { cfg: c, chars: ch, points: pts, jacobians: jac })
}

pub fn act_config(g: &GElement, cfg: &SewingConfig, chars: &CharPair) -> Result<(SewingConfig, CharPair)> {
    act_config_points(g, cfg, chars, &[]).map(|t| (t.cfg, t.chars))
}

/// Quantities whose invariance can be checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    Z2,
    /// `n = 1` generating form at `(w, z)`.
    GenForm1(SurfacePoint, SurfacePoint),
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Z2 => "z2",
            Quantity::GenForm1(..) => "genform1",
        }
    }

    fn eval(&self, cfg: &SewingConfig, chars: &CharPair) -> Result<Complex64> {
        match self {
            Quantity::Z2 => z2_partition(cfg, chars),
            Quantity::GenForm1(w, z) => gen_form_2n(&[*w], &[*z], cfg, chars),
        }
    }

    fn points(&self) -> Vec<SurfacePoint> {
        match self {
            Quantity::Z2 => Vec::new(),
            Quantity::GenForm1(w, z) => vec![*w, *z],
        }
    }

    fn with_points(&self, p: &[SurfacePoint]) -> Self {
        match self {
            Quantity::Z2 => Quantity::Z2,
            Quantity::GenForm1(..) => Quantity::GenForm1(p[0], p[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub quantity: &'static str,
    pub original: Complex64,
    pub image: Option<Complex64>,
    /// Relative difference of moduli, or of complex values in the exact case.
    pub rel_diff: f64,
    pub exact: bool,
    pub passed: bool,
    /// Set when the image leaves the sewing domain or hits a degenerate twist.
    pub skipped: Option<String>,
}

fn is_pure_beta(g: &GElement) -> bool {
    g.word.iter().all(|x| *x == Generator::Beta)
}

/// Compare a quantity before and after `g`. Moduli are compared, with each
/// insertion carrying its half-form weight `|cτ+d|^{1/2}`; `Z⁽²⁾` under a word
/// made only of β is compared as a complex number (multiplier 1).
pub fn check_invariance(q: &Quantity, g: &GElement, cfg: &SewingConfig, chars: &CharPair, tol: f64) -> Result<InvarianceReport> {
    let original = q.eval(cfg, chars)?;
    let exact = *q == Quantity::Z2 && is_pure_beta(g);
    let mk = |image: Option<Complex64>, rel_diff: f64, skipped: Option<String>| InvarianceReport {
        quantity: q.name(),
        original,
        image,
        rel_diff,
        exact,
        passed: skipped.is_none() && rel_diff <= tol,
        skipped,
    };
    let tr = match act_config_points(g, cfg, chars, &q.points()) {
        Ok(x) => x,
        Err(e @ (Error::DomainViolation(_) | Error::DegenerateTwist)) => return Ok(mk(None, f64::NAN, Some(e.to_string()))),
        Err(e) => return Err(e),
    };
    let image = q.with_points(&tr.points).eval(&tr.cfg, &tr.chars)?;
    let rel = if exact {
        (image - original).norm() / original.norm()
    } else {
        let weight: f64 = tr.jacobians.iter().map(|j| j.norm().sqrt()).product();
        (image.norm() / weight - original.norm()).abs() / original.norm()
    };
    Ok(mk(Some(image), rel, None))
}

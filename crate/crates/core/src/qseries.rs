//! Genus-one special functions.
//!
//! Conventions: `q = exp(2πiτ)`, `q_z = exp(z)`, and the period lattice is
//! `2πi(ℤτ ⊕ ℤ)`. A twist is stored as real characteristics `(α, β)` with
//! `θ = −exp(−2πiβ)`, `φ = −exp(2πiα)` and `λ = frac(α + ½)`, so `φ = exp(2πiλ)`.
//!
//! The twisted Weierstrass functions are evaluated by reducing `z` into the
//! lattice cell around the origin (using the exact multipliers `θ` and `φ`),
//! then resumming the geometric part of the bilateral series in closed form.
//! The remaining q-series converge geometrically with ratio at most `|q|^{1/2}`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) const TWO_PI: f64 = 2.0 * PI;
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest index kept in the scaled Bernoulli table; beyond it `B_m/m!` underflows.
const BERNOULLI_TABLE: usize = 300;

/// Radius below which the exponential kernel is expanded around its pole at 0.
const LAURENT_RADIUS: f64 = 3.5;

/// Fractional part in `[0, 1)`.
pub(crate) fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// A point `τ` of the upper half plane together with `q = exp(2πiτ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularParam {
    tau: Complex64,
    q: Complex64,
}

impl ModularParam {
    pub fn new(tau: Complex64) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "tau must lie in the upper half plane, got {tau}"
            )));
        }
        Ok(Self {
            tau,
            q: (I * TWO_PI * tau).exp(),
        })
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn q(&self) -> Complex64 {
        self.q
    }

    /// `q^x = exp(2πiτx)` for real `x`.
    pub fn qpow(&self, x: f64) -> Complex64 {
        (I * TWO_PI * self.tau * x).exp()
    }
}

/// Characteristics `(α, β) ∈ [0,1)²` of a torus twist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistData {
    alpha: f64,
    beta: f64,
    theta: Complex64,
    phi: Complex64,
    lambda: f64,
}

impl TwistData {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && (0.0..1.0).contains(&x);
        if !ok(alpha) || !ok(beta) {
            return Err(Error::InvalidParameter(format!(
                "characteristics must lie in [0,1), got ({alpha}, {beta})"
            )));
        }
        Ok(Self {
            alpha,
            beta,
            theta: -(-I * TWO_PI * beta).exp(),
            phi: -(I * TWO_PI * alpha).exp(),
            lambda: frac(alpha + 0.5),
        })
    }

    /// Twist with `θ = exp(2πiu)` and `φ = exp(2πiv)`.
    pub fn from_exponents(u: f64, v: f64) -> Result<Self> {
        Self::new(frac(v - 0.5), frac(0.5 - u))
    }

    /// Exponents `(u, v)` in `[0,1)` with `θ = exp(2πiu)`, `φ = exp(2πiv)`.
    pub fn exponents(&self) -> (f64, f64) {
        (frac(0.5 - self.beta), self.lambda)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn theta(&self) -> Complex64 {
        self.theta
    }

    pub fn phi(&self) -> Complex64 {
        self.phi
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Exactly `(α, β) = (½, ½)`; nearby twists are deliberately not snapped.
    pub fn is_degenerate(&self) -> bool {
        self.alpha == 0.5 && self.beta == 0.5
    }

    /// The twist `(θ⁻¹, φ⁻¹)`.
    pub fn inverse(&self) -> Self {
        Self::new(frac(-self.alpha), frac(-self.beta)).expect("fractional parts lie in [0,1)")
    }
}

/// Truncation control for every q-series in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPolicy {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            max_terms: 4096,
        }
    }
}

impl SeriesPolicy {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1.0) || max_terms < 8 {
            return Err(Error::InvalidParameter(format!(
                "series policy needs 0 < rel_tol < 1 and max_terms >= 8, got ({rel_tol}, {max_terms})"
            )));
        }
        Ok(Self { rel_tol, max_terms })
    }
}

fn zeta_even(s: i32) -> f64 {
    if s == 2 {
        return PI * PI / 6.0;
    }
    let n = 100.0f64;
    let mut acc = 0.0;
    for k in (1..100).rev() {
        acc += (k as f64).powi(-s);
    }
    let sf = s as f64;
    acc + n.powf(1.0 - sf) / (sf - 1.0) + 0.5 * n.powi(-s) + sf * n.powi(-s - 1) / 12.0
        - sf * (sf + 1.0) * (sf + 2.0) * n.powi(-s - 3) / 720.0
}

/// `B_m / m!` for `m < BERNOULLI_TABLE`, with `B_1 = −½`.
fn scaled_bernoulli_numbers() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut b = vec![0.0; BERNOULLI_TABLE];
        b[0] = 1.0;
        b[1] = -0.5;
        let mut scale = 1.0;
        for m in (2..BERNOULLI_TABLE).step_by(2) {
            scale /= TWO_PI * TWO_PI;
            let sign = if (m / 2) % 2 == 1 { 1.0 } else { -1.0 };
            b[m] = sign * 2.0 * zeta_even(m as i32) * scale;
        }
        b
    })
}

/// `B_m(λ)/m!` for `m = 0..len`.
fn scaled_bernoulli_polys(len: usize, lambda: f64) -> Vec<f64> {
    let b = scaled_bernoulli_numbers();
    let len = len.min(BERNOULLI_TABLE);
    // p[i] = λ^i / i!
    let mut p = vec![1.0; len];
    for i in 1..len {
        p[i] = p[i - 1] * lambda / i as f64;
    }
    (0..len)
        .map(|m| (0..=m).map(|i| b[i] * p[m - i]).sum())
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Bernoulli polynomial `B_n(λ)` from `q_z^λ/(q_z−1) = 1/z + Σ B_n(λ)/n! z^{n−1}`.
pub fn bernoulli_poly(n: usize, lambda: f64) -> Complex64 {
    let scaled = scaled_bernoulli_polys(n + 1, lambda);
    Complex64::new(scaled[n] * factorial(n), 0.0)
}

/// Twisted Eisenstein series `E_1 … E_nmax` sharing one pass over the q-series.
pub fn eisenstein_table(
    nmax: usize,
    twist: &TwistData,
    m: &ModularParam,
    pol: &SeriesPolicy,
) -> Result<Vec<Complex64>> {
    if nmax == 0 {
        return Ok(Vec::new());
    }
    let lambda = twist.lambda;
    let theta = twist.theta;
    let theta_inv = theta.conj();
    let bern = scaled_bernoulli_polys(nmax + 1, lambda);
    let inv_fact: Vec<f64> = (0..nmax).map(|j| 1.0 / factorial(j)).collect();

    let mut acc: Vec<Complex64> = (1..=nmax).map(|n| Complex64::new(-bern[n], 0.0)).collect();
    let mut mag: Vec<f64> = (1..=nmax).map(|n| bern[n].abs()).collect();

    let degenerate = twist.is_degenerate();
    let log_q = -TWO_PI * m.tau.im;
    let r_peak = (nmax as f64 - 1.0) / (-log_q) + 1.0;

    for r in 0..pol.max_terms {
        let rf = r as f64;
        let mut converged = rf > r_peak;

        let x = rf + lambda;
        if x == 0.0 {
            if !degenerate {
                let t = theta_inv / (1.0 - theta_inv);
                acc[0] += t;
                mag[0] += t.norm();
            }
        } else {
            let qx = theta_inv * m.qpow(x);
            let w = qx / (1.0 - qx);
            let mut pw = 1.0;
            for n in 1..=nmax {
                let t = w * (pw * inv_fact[n - 1]);
                acc[n - 1] += t;
                mag[n - 1] += t.norm();
                if t.norm() > pol.rel_tol * mag[n - 1] {
                    converged = false;
                }
                pw *= x;
            }
        }

        if r >= 1 {
            let y = rf - lambda;
            let qy = theta * m.qpow(y);
            let w = qy / (1.0 - qy);
            let mut pw = 1.0;
            for n in 1..=nmax {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let t = w * (sign * pw * inv_fact[n - 1]);
                acc[n - 1] += t;
                mag[n - 1] += t.norm();
                if t.norm() > pol.rel_tol * mag[n - 1] {
                    converged = false;
                }
                pw *= y;
            }
        } else {
            converged = false;
        }

        if converged {
            return Ok(acc);
        }
    }
    Err(Error::NonConvergent {
        what: "twisted Eisenstein series",
        terms: pol.max_terms,
    })
}

/// Twisted Eisenstein series `E_n[θ,φ](τ)`.
pub fn eisenstein_twisted(
    n: usize,
    twist: &TwistData,
    m: &ModularParam,
    pol: &SeriesPolicy,
) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidParameter("Eisenstein index must be >= 1".into()));
    }
    Ok(eisenstein_table(n, twist, m, pol)?[n - 1])
}

/// Classical `E_n(τ) = E_n[1,1](τ)`, normalised so that `E_2(i∞) = −1/12`.
pub fn eisenstein_classical(n: usize, m: &ModularParam, pol: &SeriesPolicy) -> Result<Complex64> {
    let trivial = TwistData::new(0.5, 0.5).expect("valid characteristics");
    eisenstein_twisted(n, &trivial, m, pol)
}

/// `d^j/dz^j [e^{λz}/(1−e^z)]` for `j = 0..jlen`, continued from `Σ_{r≥0} (r+λ)^j e^{(r+λ)z}`.
/// With `drop_pole` the principal part at `z = 0` is omitted (only valid for small `|z|`).
fn exp_kernel_derivs(
    jlen: usize,
    lambda: f64,
    z: Complex64,
    drop_pole: bool,
    pol: &SeriesPolicy,
) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::new(0.0, 0.0); jlen];
    let tol = pol.rel_tol.min(1e-15);
    if z.norm() <= LAURENT_RADIUS {
        let decay = (TWO_PI / z.norm().max(1e-300)).ln();
        let need = jlen as f64 + 8.0 + (40.0 + 5.7 * jlen as f64) / decay;
        let bern = scaled_bernoulli_polys((need.ceil() as usize).min(BERNOULLI_TABLE), lambda);
        for (j, slot) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut mag = 0.0;
            if !drop_pole {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let t = -sign * factorial(j) / z.powi(j as i32 + 1);
                acc += t;
                mag += t.norm();
            }
            let r = z.norm();
            let peak = j as f64 / (TWO_PI / r.max(1e-300)).ln().max(1e-3);
            let mut done = false;
            for mm in (j + 1)..bern.len() {
                // falling factorial (mm-1)!/(mm-1-j)!
                let ff: f64 = ((mm - j)..mm).map(|x| x as f64).product();
                let t = -bern[mm] * ff * z.powi((mm - 1 - j) as i32);
                acc += t;
                mag += t.norm();
                if (mm as f64) > peak + 2.0 && bern[mm] != 0.0 && t.norm() <= tol * mag {
                    done = true;
                    break;
                }
                if mag == 0.0 && z.norm() == 0.0 && mm > j + 2 {
                    done = true;
                    break;
                }
            }
            if !done && z.norm() > 0.0 {
                return Err(Error::NonConvergent {
                    what: "Laurent expansion of the exponential kernel",
                    terms: bern.len(),
                });
            }
            *slot = acc;
        }
        return Ok(out);
    }

    for (j, slot) in out.iter_mut().enumerate() {
        *slot = if j <= 8 {
            exp_kernel_direct(j, lambda, z, tol, pol.max_terms)?
        } else {
            exp_kernel_partial_fractions(j, lambda, z, tol, pol.max_terms)?
        };
    }
    Ok(out)
}

fn exp_kernel_direct(j: usize, lambda: f64, z: Complex64, tol: f64, cap: usize) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut mag = 0.0;
    let peak = j as f64 / z.re.abs() + 2.0;
    for r in 0..cap {
        let t = if z.re < 0.0 {
            let x = r as f64 + lambda;
            if x == 0.0 {
                if j == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            } else {
                (x * z).exp() * x.powi(j as i32)
            }
        } else {
            if r == 0 {
                continue;
            }
            let x = lambda - r as f64;
            -(x * z).exp() * x.powi(j as i32)
        };
        acc += t;
        mag += t.norm();
        if r as f64 > peak && t.norm() <= tol * mag {
            return Ok(acc);
        }
    }
    Err(Error::NonConvergent {
        what: "exponential kernel series",
        terms: cap,
    })
}

fn exp_kernel_partial_fractions(
    j: usize,
    lambda: f64,
    z: Complex64,
    tol: f64,
    cap: usize,
) -> Result<Complex64> {
    let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
    let pref = sign * factorial(j);
    let term = |mm: i64| -> Complex64 {
        let phase = (I * TWO_PI * mm as f64 * lambda).exp();
        phase / (z - I * TWO_PI * mm as f64).powi(j as i32 + 1)
    };
    let mut acc = term(0);
    let mut mag = acc.norm();
    for mm in 1..cap as i64 {
        let t = term(mm) + term(-mm);
        acc += t;
        mag += t.norm();
        if t.norm() <= tol * mag {
            return Ok(acc * pref);
        }
    }
    Err(Error::NonConvergent {
        what: "partial-fraction kernel",
        terms: cap,
    })
}

/// Reduction `z = z0 + 2πi(mτ + n)` with `z0` in the lattice cell around 0.
fn reduce(z: Complex64, m: &ModularParam) -> (Complex64, f64, f64) {
    let shift_m = (-z.re / (TWO_PI * m.tau.im)).round();
    let z1 = z - I * TWO_PI * m.tau * shift_m;
    let shift_n = (z1.im / TWO_PI).round();
    (z1 - I * TWO_PI * shift_n, shift_m, shift_n)
}

/// Distance from `z` to the nearest point of the lattice `2πi(ℤτ ⊕ ℤ)`.
pub fn lattice_distance(z: Complex64, m: &ModularParam) -> f64 {
    let (z0, _, _) = reduce(z, m);
    let mut best = f64::INFINITY;
    for a in -1..=1 {
        for b in -1..=1 {
            let w = z0 - I * TWO_PI * (m.tau * a as f64 + b as f64);
            best = best.min(w.norm());
        }
    }
    best
}

fn weierstrass_impl(
    kmax: usize,
    twist: &TwistData,
    z: Complex64,
    m: &ModularParam,
    pol: &SeriesPolicy,
    drop_pole: bool,
) -> Result<Vec<Complex64>> {
    if kmax == 0 {
        return Ok(Vec::new());
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::OutOfStrip { re: z.re, im: z.im });
    }
    let (z0, sm, sn) = reduce(z, m);
    let degenerate = twist.is_degenerate();
    if degenerate && sm != 0.0 {
        return Err(Error::OutOfStrip { re: z.re, im: z.im });
    }
    let shifted = sm != 0.0 || sn != 0.0;
    let analytic_drop = drop_pole && !shifted;
    if z0.norm() < 1e-12 && !analytic_drop {
        return Err(Error::SingularPoint(format!("P_k at lattice point z = {z}")));
    }

    let lambda = twist.lambda;
    let theta = twist.theta;
    let theta_inv = theta.conj();
    let mut acc = exp_kernel_derivs(kmax, lambda, z0, analytic_drop, pol)?;
    if degenerate {
        acc[0] -= 1.0;
    }
    let mut mag: Vec<f64> = acc.iter().map(|c| c.norm()).collect();

    let two_pi_i_tau = I * TWO_PI * m.tau;
    let ratio = (m.q.norm() * z0.re.exp()).max(m.q.norm() / z0.re.exp());
    let r_peak = (kmax as f64 - 1.0) / (-ratio.ln()).max(1e-6) + 1.0;

    for r in 0..pol.max_terms {
        let rf = r as f64;
        let mut converged = rf > r_peak;

        let x = rf + lambda;
        if x == 0.0 {
            if !degenerate {
                let t = theta_inv / (1.0 - theta_inv);
                acc[0] += t;
                mag[0] += t.norm();
            }
        } else {
            let qx = theta_inv * m.qpow(x);
            let t0 = theta_inv * (x * (two_pi_i_tau + z0)).exp() / (1.0 - qx);
            let mut pw = 1.0;
            for k in 0..kmax {
                let t = t0 * pw;
                acc[k] += t;
                mag[k] += t.norm();
                if t.norm() > pol.rel_tol * mag[k] {
                    converged = false;
                }
                pw *= x;
            }
        }

        if r >= 1 {
            let a = rf - lambda;
            let qa = theta * m.qpow(a);
            let t0 = -theta * (a * (two_pi_i_tau - z0)).exp() / (1.0 - qa);
            let mut pw = 1.0;
            for k in 0..kmax {
                let t = t0 * pw;
                acc[k] += t;
                mag[k] += t.norm();
                if t.norm() > pol.rel_tol * mag[k] {
                    converged = false;
                }
                pw *= -a;
            }
        } else {
            converged = false;
        }

        if converged {
            let (u, _) = twist.exponents();
            let mult = (I * TWO_PI * (u * sm + lambda * sn)).exp();
            let mut out = Vec::with_capacity(kmax);
            let mut sign = -1.0;
            for (k, a) in acc.iter().enumerate() {
                let mut val = mult * *a * (sign / factorial(k));
                if drop_pole && shifted {
                    val -= z.powi(-(k as i32 + 1));
                }
                out.push(val);
                sign = -sign;
            }
            return Ok(out);
        }
    }
    Err(Error::NonConvergent {
        what: "twisted Weierstrass series",
        terms: pol.max_terms,
    })
}

/// Twisted Weierstrass functions `P_1 … P_kmax` at one point.
///
/// Defined by the bilateral sum over `n ∈ ℤ+λ` on the strip `|q| < |q_z| < 1`
/// and continued elsewhere through `P_k(z + 2πi) = φP_k(z)` and
/// `P_k(z + 2πiτ) = θP_k(z)`. The degenerate twist is evaluated only on
/// `|q|^{1/2} < |q_z| < |q|^{−1/2}`, where no `τ`-shift is needed.
pub fn weierstrass_table(
    kmax: usize,
    twist: &TwistData,
    z: Complex64,
    m: &ModularParam,
    pol: &SeriesPolicy,
) -> Result<Vec<Complex64>> {
    weierstrass_impl(kmax, twist, z, m, pol, false)
}

/// `P_k(z) − z^{−k}` for `k = 1..kmax`, computed without cancellation near `z = 0`.
pub fn weierstrass_regular_table(
    kmax: usize,
    twist: &TwistData,
    z: Complex64,
    m: &ModularParam,
    pol: &SeriesPolicy,
) -> Result<Vec<Complex64>> {
    weierstrass_impl(kmax, twist, z, m, pol, true)
}

/// Twisted Weierstrass function `P_k[θ,φ](z, τ)`.
pub fn weierstrass_twisted(
    k: usize,
    twist: &TwistData,
    z: Complex64,
    m: &ModularParam,
    pol: &SeriesPolicy,
) -> Result<Complex64> {
    if k == 0 {
        return Err(Error::InvalidParameter("Weierstrass index must be >= 1".into()));
    }
    Ok(weierstrass_table(k, twist, z, m, pol)?[k - 1])
}

fn check_characteristics(g: usize, alpha: &[f64], beta: &[f64], z: &[Complex64], omega: &[Complex64]) -> Result<()> {
    if !(g == 1 || g == 2) || alpha.len() != g || beta.len() != g || z.len() != g || omega.len() != g * g {
        return Err(Error::InvalidParameter(format!(
            "theta function needs g in {{1,2}} with matching vector sizes (g = {g})"
        )));
    }
    if g == 1 {
        if !(omega[0].im > 0.0) {
            return Err(Error::InvalidParameter("Im Omega must be positive".into()));
        }
    } else {
        let sym = (omega[1] - omega[2]).norm() <= 1e-14 * (1.0 + omega[1].norm());
        let det = omega[0].im * omega[3].im - omega[1].im * omega[2].im;
        if !sym || !(omega[0].im > 0.0) || !(det > 0.0) {
            return Err(Error::InvalidParameter(
                "Omega must be symmetric with positive-definite imaginary part".into(),
            ));
        }
    }
    Ok(())
}

/// Shared lattice-shell summation; `weight` multiplies each term (e.g. by `n+α` for a derivative).
fn theta_sum(
    g: usize,
    alpha: &[f64],
    beta: &[f64],
    z: &[Complex64],
    omega: &[Complex64],
    pol: &SeriesPolicy,
    weight: &dyn Fn(&[f64]) -> f64,
) -> Result<Complex64> {
    const SHELL_CAP: i64 = 64;
    let term = |n: &[i64]| -> Complex64 {
        let v: Vec<f64> = (0..g).map(|i| n[i] as f64 + alpha[i]).collect();
        let mut quad = Complex64::new(0.0, 0.0);
        for i in 0..g {
            for j in 0..g {
                quad += omega[i * g + j] * (v[i] * v[j]);
            }
        }
        let mut lin = Complex64::new(0.0, 0.0);
        for i in 0..g {
            lin += v[i] * (z[i] + I * TWO_PI * beta[i]);
        }
        (I * PI * quad + lin).exp() * weight(&v)
    };

    // Centre the shells on the peak of the Gaussian envelope.
    let centre: Vec<i64> = if g == 1 {
        let p = z[0].re / (TWO_PI * omega[0].im);
        vec![(p - alpha[0]).round() as i64]
    } else {
        let (a, b, d) = (omega[0].im, omega[1].im, omega[3].im);
        let det = a * d - b * b;
        let (x, y) = (z[0].re / TWO_PI, z[1].re / TWO_PI);
        let p0 = (d * x - b * y) / det;
        let p1 = (a * y - b * x) / det;
        vec![(p0 - alpha[0]).round() as i64, (p1 - alpha[1]).round() as i64]
    };

    let mut acc = Complex64::new(0.0, 0.0);
    let mut mag = 0.0;
    for radius in 0..=SHELL_CAP {
        let mut shell = Complex64::new(0.0, 0.0);
        let mut shell_mag = 0.0;
        if g == 1 {
            let pts: Vec<i64> = if radius == 0 { vec![0] } else { vec![-radius, radius] };
            for p in pts {
                let t = term(&[centre[0] + p]);
                shell += t;
                shell_mag += t.norm();
            }
        } else {
            for i in -radius..=radius {
                for j in -radius..=radius {
                    if i.abs().max(j.abs()) != radius {
                        continue;
                    }
                    let t = term(&[centre[0] + i, centre[1] + j]);
                    shell += t;
                    shell_mag += t.norm();
                }
            }
        }
        acc += shell;
        mag += shell_mag;
        if radius >= 2 && shell_mag <= pol.rel_tol.min(1e-15) * mag {
            return Ok(acc);
        }
    }
    Err(Error::NonConvergent {
        what: "theta lattice sum",
        terms: SHELL_CAP as usize,
    })
}

/// Theta function with real characteristics for genus `g ∈ {1, 2}`:
/// `Σ_n exp(iπ(n+α)·Ω·(n+α) + (n+α)·(z + 2πiβ))`. `omega` is row-major `g×g`.
pub fn theta_char(
    g: usize,
    alpha: &[f64],
    beta: &[f64],
    z: &[Complex64],
    omega: &[Complex64],
    pol: &SeriesPolicy,
) -> Result<Complex64> {
    check_characteristics(g, alpha, beta, z, omega)?;
    theta_sum(g, alpha, beta, z, omega, pol, &|_| 1.0)
}

/// Genus-one theta function `ϑ[α,β](z|τ)`.
pub fn theta1_char(alpha: f64, beta: f64, z: Complex64, m: &ModularParam, pol: &SeriesPolicy) -> Result<Complex64> {
    theta_char(1, &[alpha], &[beta], &[z], &[m.tau], pol)
}

/// `∂_z ϑ[α,β](z|τ)` by term-wise differentiation.
pub fn theta1_char_dz(alpha: f64, beta: f64, z: Complex64, m: &ModularParam, pol: &SeriesPolicy) -> Result<Complex64> {
    check_characteristics(1, &[alpha], &[beta], &[z], &[m.tau])?;
    theta_sum(1, &[alpha], &[beta], &[z], &[m.tau], pol, &|v| v[0])
}

/// Dedekind eta `q^{1/24} ∏_{n≥1} (1 − qⁿ)`.
pub fn dedekind_eta(m: &ModularParam, pol: &SeriesPolicy) -> Result<Complex64> {
    let mut prod = m.qpow(1.0 / 24.0);
    let mut qn = Complex64::new(1.0, 0.0);
    for _ in 0..pol.max_terms {
        qn *= m.q;
        prod *= 1.0 - qn;
        if qn.norm() < pol.rel_tol.min(1e-16) {
            return Ok(prod);
        }
    }
    Err(Error::NonConvergent {
        what: "Dedekind eta product",
        terms: pol.max_terms,
    })
}

/// Genus-one prime form factor `K(z) = ϑ₁(z)/∂_zϑ₁(0)` with `ϑ₁ = ϑ[½,½]`.
pub fn k1_prime(z: Complex64, m: &ModularParam, pol: &SeriesPolicy) -> Result<Complex64> {
    if lattice_distance(z, m) < 1e-12 {
        return Err(Error::SingularPoint(format!("K(z) vanishes at lattice point z = {z}")));
    }
    let num = theta1_char(0.5, 0.5, z, m, pol)?;
    let den = theta1_char_dz(0.5, 0.5, Complex64::new(0.0, 0.0), m, pol)?;
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bernoulli_low_orders() {
        assert!((bernoulli_poly(1, 0.3).re + 0.2).abs() < 1e-15);
        assert!((bernoulli_poly(2, 0.0).re - 1.0 / 6.0).abs() < 1e-15);
        assert!((bernoulli_poly(3, 0.75).re + bernoulli_poly(3, 0.25).re).abs() < 1e-15);
        // B_4(0) = −1/30, B_2(λ) = λ² − λ + 1/6
        assert!((bernoulli_poly(4, 0.0).re + 1.0 / 30.0).abs() < 1e-15);
        let l = 0.37;
        assert!((bernoulli_poly(2, l).re - (l * l - l + 1.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_matches_generating_function() {
        // Extract z^{n-1} coefficients of q_z^λ/(q_z − 1) − 1/z by a discrete Cauchy integral.
        let lambda = 0.3;
        let radius = 1.0;
        let npts = 64;
        for n in 1..=6usize {
            let mut coef = c(0.0, 0.0);
            for j in 0..npts {
                let w = (I * TWO_PI * j as f64 / npts as f64).exp();
                let z = w * radius;
                let f = (z * lambda).exp() / (z.exp() - 1.0) - 1.0 / z;
                coef += f / z.powi(n as i32 - 1);
            }
            coef /= npts as f64;
            let expected = bernoulli_poly(n, lambda) / factorial(n);
            assert!((coef - expected).norm() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn twist_derived_fields() {
        let t = TwistData::new(0.2, 0.7).unwrap();
        assert!((t.theta().norm() - 1.0).abs() < 1e-15);
        assert!((t.phi() - (I * TWO_PI * t.lambda()).exp()).norm() < 1e-14);
        assert!((t.lambda() - 0.7).abs() < 1e-15);
        assert!(TwistData::new(0.5, 0.5).unwrap().is_degenerate());
        assert!(TwistData::new(1.0, 0.0).is_err());
        let inv = t.inverse();
        assert!((inv.theta() * t.theta() - 1.0).norm() < 1e-14);
        assert!((inv.phi() * t.phi() - 1.0).norm() < 1e-14);
    }

    #[test]
    fn eisenstein_cusp_limit() {
        let t = TwistData::new(0.8, 0.1).unwrap(); // λ = 0.3
        let m = ModularParam::new(c(0.0, 20.0)).unwrap();
        let pol = SeriesPolicy::default();
        for n in 1..=8 {
            let e = eisenstein_twisted(n, &t, &m, &pol).unwrap();
            let lim = -bernoulli_poly(n, 0.3) / factorial(n);
            assert!((e - lim).norm() < 1e-10);
        }
    }

    #[test]
    fn classical_eisenstein_values() {
        let pol = SeriesPolicy::default();
        let far = ModularParam::new(c(0.0, 30.0)).unwrap();
        assert!((eisenstein_classical(2, &far, &pol).unwrap().re + 1.0 / 12.0).abs() < 1e-14);
        let m = ModularParam::new(c(0.0, 1.0)).unwrap();
        assert!(eisenstein_classical(3, &m, &pol).unwrap().norm() < 1e-13);
        // E_4(i) in this normalisation equals Γ(1/4)^8 / (2^8 · 3 · 4 · π^6) * ... checked via q-expansion:
        // E_4 = −B_4/4! + (1/3!) Σ σ_3(n) qⁿ · 2
        let q = m.q().re;
        let mut s = 0.0;
        for n in 1..40usize {
            let sigma: f64 = (1..=n).filter(|d| n % d == 0).map(|d| (d as f64).powi(3)).sum();
            s += sigma * q.powi(n as i32);
        }
        let expected = 1.0 / 720.0 + 2.0 * s / 6.0;
        assert!((eisenstein_classical(4, &m, &pol).unwrap().re - expected).abs() < 1e-14);
    }

    #[test]
    fn eisenstein_t_shift() {
        let pol = SeriesPolicy::default();
        let t = TwistData::new(0.15, 0.4).unwrap();
        let m = ModularParam::new(c(0.1, 0.8)).unwrap();
        let m1 = ModularParam::new(c(1.1, 0.8)).unwrap();
        let (u, v) = t.exponents();
        let shifted = TwistData::from_exponents(u + v, v).unwrap();
        let a = eisenstein_twisted(2, &shifted, &m1, &pol).unwrap();
        let b = eisenstein_twisted(2, &t, &m, &pol).unwrap();
        assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
    }

    #[test]
    fn weierstrass_pole_and_period() {
        let pol = SeriesPolicy::default();
        let t = TwistData::new(0.3, 0.2).unwrap();
        let m = ModularParam::new(c(0.2, 0.9)).unwrap();
        let z = c(1e-4, 0.0);
        let p = weierstrass_twisted(1, &t, z, &m, &pol).unwrap();
        assert!((z * p - 1.0).norm() < 10.0 * z.norm());
    }

    #[test]
    fn weierstrass_matches_theta_quotient() {
        let pol = SeriesPolicy::default();
        let (a, b) = (0.3, 0.2);
        let t = TwistData::new(a, b).unwrap();
        let m = ModularParam::new(c(0.0, 0.9)).unwrap();
        for z in [c(0.3, 0.2), c(-1.7, 2.5), c(2.9, -0.4), c(0.3, 6.5), c(-7.0, 1.0)] {
            let p = weierstrass_twisted(1, &t, z, &m, &pol).unwrap();
            let num = theta1_char(a, b, z, &m, &pol).unwrap();
            let den = theta1_char(a, b, c(0.0, 0.0), &m, &pol).unwrap();
            let quotient = num / den / k1_prime(z, &m, &pol).unwrap();
            assert!((p - quotient).norm() < 1e-10 * p.norm().max(1.0), "z = {z}: {p} vs {quotient}");
        }
    }

    #[test]
    fn weierstrass_direct_strip_sum() {
        // Inside |q| < |q_z| < 1 the defining bilateral sum converges; brute-force it.
        let pol = SeriesPolicy::default();
        let t = TwistData::new(0.65, 0.35).unwrap();
        let m = ModularParam::new(c(0.25, 1.1)).unwrap();
        let z = c(-2.0, 0.7);
        let lambda = t.lambda();
        for k in 1..=5usize {
            let mut s = c(0.0, 0.0);
            for r in -60i64..200 {
                let n = r as f64 + lambda;
                let num = (z * n).exp() * n.powi(k as i32 - 1);
                s += num / (1.0 - t.theta().conj() * m.qpow(n));
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let direct = s * sign / factorial(k - 1);
            let p = weierstrass_twisted(k, &t, z, &m, &pol).unwrap();
            assert!((p - direct).norm() < 1e-11 * direct.norm().max(1.0), "k = {k}");
        }
    }

    #[test]
    fn weierstrass_regular_part() {
        let pol = SeriesPolicy::default();
        let t = TwistData::new(0.1, 0.6).unwrap();
        let m = ModularParam::new(c(0.0, 1.0)).unwrap();
        let z = c(0.02, -0.01);
        let full = weierstrass_table(3, &t, z, &m, &pol).unwrap();
        let reg = weierstrass_regular_table(3, &t, z, &m, &pol).unwrap();
        for k in 0..3 {
            let diff = full[k] - reg[k] - z.powi(-(k as i32 + 1));
            assert!(diff.norm() < 1e-9 * z.powi(-(k as i32 + 1)).norm());
        }
        // Regular part at 0 is −E_k for k = 1.
        let e1 = eisenstein_twisted(1, &t, &m, &pol).unwrap();
        let r0 = weierstrass_regular_table(1, &t, c(0.0, 0.0), &m, &pol).unwrap();
        assert!((r0[0] + e1).norm() < 1e-13);
    }

    #[test]
    fn theta_basics() {
        let pol = SeriesPolicy::default();
        let m = ModularParam::new(c(0.0, 1.0)).unwrap();
        assert!(theta1_char(0.5, 0.5, c(0.0, 0.0), &m, &pol).unwrap().norm() < 1e-15);
        let t1 = ModularParam::new(c(0.1, 1.2)).unwrap();
        let t2 = ModularParam::new(c(-0.3, 0.8)).unwrap();
        let zero = c(0.0, 0.0);
        let g2 = theta_char(
            2,
            &[0.2, 0.0],
            &[0.4, 0.5],
            &[zero, zero],
            &[t1.tau(), zero, zero, t2.tau()],
            &pol,
        )
        .unwrap();
        let f1 = theta1_char(0.2, 0.4, zero, &t1, &pol).unwrap();
        let f2 = theta1_char(0.0, 0.5, zero, &t2, &pol).unwrap();
        assert!((g2 - f1 * f2).norm() < 1e-14);
        // Brute force with a wide shell.
        let mut s = c(0.0, 0.0);
        for n in -32i64..=32 {
            s += (I * PI * m.tau() * (n * n) as f64).exp();
        }
        assert!((theta1_char(0.0, 0.0, zero, &m, &pol).unwrap() - s).norm() < 1e-14);
    }

    #[test]
    fn eta_values() {
        let pol = SeriesPolicy::default();
        let m = ModularParam::new(c(0.0, 1.0)).unwrap();
        // Γ(1/4) = 3.6256099082219083119
        let expected = 3.625_609_908_221_908_3 / (2.0 * PI.powf(0.75));
        assert!((dedekind_eta(&m, &pol).unwrap() - expected).norm() < 1e-14);
        let a = ModularParam::new(c(0.0, 0.8)).unwrap();
        let b = ModularParam::new(c(1.0, 0.8)).unwrap();
        let lhs = dedekind_eta(&b, &pol).unwrap();
        let rhs = (I * PI / 12.0).exp() * dedekind_eta(&a, &pol).unwrap();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn k1_prime_shape() {
        let pol = SeriesPolicy::default();
        let m = ModularParam::new(c(0.0, 1.0)).unwrap();
        let z = c(1e-5, 2e-5);
        assert!((k1_prime(z, &m, &pol).unwrap() / z - 1.0).norm() < 1e-8);
        let w = c(1.0, 0.5);
        assert!((k1_prime(-w, &m, &pol).unwrap() + k1_prime(w, &m, &pol).unwrap()).norm() < 1e-14);
        assert!(k1_prime(c(0.0, TWO_PI), &m, &pol).is_err());
    }
}

//! Free-fermion partition and correlation functions at genus one and two.
//!
//! The genus-two quantities come in two flavours: closed determinant formulas
//! (`det(I − Q)`, Szegő kernel determinants) and direct truncated sums over
//! the Fock basis `Ψ[k,l]` paired with its square-bracket dual. The latter are
//! the independent oracles for the former.

use num_complex::Complex64;

use crate::coeffs::{a_matrix, binom};
use crate::error::{Error, Result};
use crate::linalg::{det, identity_minus, CMatrix};
use crate::qseries::{
    dedekind_eta, eisenstein_table, weierstrass_table, ModularParam, SeriesPolicy, TwistData,
};
use crate::sewing::{det_i_minus_q, min_lattice_distance, SewingConfig, SurfacePoint, Szego2, Torus};

fn sign(p: usize) -> f64 {
    if p % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Characteristics of the two sewn tori.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharPair {
    pub t1: TwistData,
    pub t2: TwistData,
}

impl CharPair {
    pub fn new(t1: TwistData, t2: TwistData) -> Result<Self> {
        if t1.is_degenerate() || t2.is_degenerate() {
            return Err(Error::DegenerateTwist);
        }
        Ok(Self { t1, t2 })
    }

    pub fn get(&self, a: Torus) -> &TwistData {
        match a {
            Torus::One => &self.t1,
            Torus::Two => &self.t2,
        }
    }

    pub fn swapped(&self) -> Self {
        Self { t1: self.t2, t2: self.t1 }
    }
}

/// Fock vector `ψ⁺[−k₁]…ψ⁺[−k_s] ψ⁻[−l₁]…ψ⁻[−l_t] 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FockLabel {
    k: Vec<usize>,
    l: Vec<usize>,
}

impl FockLabel {
    pub fn new(k: Vec<usize>, l: Vec<usize>) -> Result<Self> {
        let strict = |v: &[usize]| v.first().is_none_or(|&x| x >= 1) && v.windows(2).all(|w| w[0] < w[1]);
        if !strict(&k) || !strict(&l) {
            return Err(Error::InvalidParameter(format!(
                "Fock label entries must be strictly increasing positive integers: {k:?}, {l:?}"
            )));
        }
        Ok(Self { k, l })
    }

    pub fn vacuum() -> Self {
        Self { k: Vec::new(), l: Vec::new() }
    }

    pub fn k(&self) -> &[usize] {
        &self.k
    }

    pub fn l(&self) -> &[usize] {
        &self.l
    }

    /// Square-bracket weight `Σ(kᵢ − ½) + Σ(lⱼ − ½)`.
    pub fn weight(&self) -> f64 {
        self.k.iter().chain(&self.l).map(|&x| x as f64 - 0.5).sum()
    }

    /// Twice the weight, an integer.
    pub fn twice_weight(&self) -> usize {
        self.k.iter().chain(&self.l).map(|&x| 2 * x - 1).sum()
    }

    pub fn parity(&self) -> usize {
        (self.k.len() + self.l.len()) % 2
    }

    /// `Ψ[l, k]`.
    pub fn transposed(&self) -> Self {
        Self { k: self.l.clone(), l: self.k.clone() }
    }
}

/// Cutoffs for the direct Fock-sum oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffPolicy {
    /// Largest square-bracket weight kept (a half-integer).
    pub weight_cap: f64,
    pub n_insertions_cap: usize,
}

impl CutoffPolicy {
    pub fn new(weight_cap: f64) -> Self {
        Self { weight_cap, n_insertions_cap: 8 }
    }
}

/// All strictly increasing lists of length `len` with `Σ(x − ½)` at most `cap`.
fn strict_lists(len: usize, cap: f64) -> Vec<Vec<usize>> {
    fn rec(start: usize, left: usize, budget: f64, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        let mut x = start;
        loop {
            // The cheapest completion uses x, x+1, …, x+left−1.
            let min_cost: f64 = (0..left).map(|i| (x + i) as f64 - 0.5).sum();
            if min_cost > budget + 1e-9 {
                break;
            }
            cur.push(x);
            rec(x + 1, left - 1, budget - (x as f64 - 0.5), cur, out);
            cur.pop();
            x += 1;
        }
    }
    let mut out = Vec::new();
    rec(1, len, cap, &mut Vec::new(), &mut out);
    out
}

/// Label pairs `(k, l)` with `|k| = m − n`, `|l| = m` and weight at most `cap`,
/// ordered by increasing weight and lexicographically within a weight.
pub fn enumerate_labels(n: usize, cap: f64) -> Vec<FockLabel> {
    let mut out = Vec::new();
    for m in n.. {
        let s = m - n;
        let floor: f64 = (1..=s).map(|x| x as f64 - 0.5).sum::<f64>() + (1..=m).map(|x| x as f64 - 0.5).sum::<f64>();
        if floor > cap + 1e-9 {
            break;
        }
        for k in strict_lists(s, cap) {
            let wk: f64 = k.iter().map(|&x| x as f64 - 0.5).sum();
            for l in strict_lists(m, cap - wk) {
                out.push(FockLabel { k: k.clone(), l });
            }
        }
    }
    out.sort_by(|a, b| a.twice_weight().cmp(&b.twice_weight()).then_with(|| (&a.k, &a.l).cmp(&(&b.k, &b.l))));
    out
}

/// Genus-one data reused across many label evaluations.
struct TorusData {
    e: Vec<Complex64>,
    z: Complex64,
}

impl TorusData {
    fn new(twist: &TwistData, m: &ModularParam, pol: &SeriesPolicy, nmax: usize) -> Result<Self> {
        Ok(Self {
            e: eisenstein_table(nmax.max(1), twist, m, pol)?,
            z: z1_partition(twist, m, pol)?,
        })
    }

    fn c(&self, k: usize, l: usize) -> Complex64 {
        self.e[k + l - 2] * (sign(l) * binom(k + l - 2, k - 1))
    }

    fn det_c(&self, rows: &[usize], cols: &[usize]) -> Complex64 {
        det(&CMatrix::from_fn(rows.len(), cols.len(), |i, j| self.c(rows[i], cols[j])))
    }
}

/// Rank-two torus partition function `q^{α²/2−1/24} ∏ (1 − θ⁻¹q^{l−½+α})(1 − θq^{l−½−α})`.
pub fn z1_partition(twist: &TwistData, m: &ModularParam, pol: &SeriesPolicy) -> Result<Complex64> {
    if twist.is_degenerate() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let a = twist.alpha();
    let theta = twist.theta();
    let mut prod = m.qpow(a * a / 2.0 - 1.0 / 24.0);
    for l in 1..=pol.max_terms {
        let x = l as f64 - 0.5;
        let f1 = theta.conj() * m.qpow(x + a);
        let f2 = theta * m.qpow(x - a);
        prod *= (1.0 - f1) * (1.0 - f2);
        if f1.norm().max(f2.norm()) < pol.rel_tol.min(1e-16) || prod == Complex64::new(0.0, 0.0) {
            return Ok(prod);
        }
    }
    Err(Error::NonConvergent { what: "torus partition product", terms: pol.max_terms })
}

/// Rank-one torus partition function for `α, β ∈ {0, ½}`; its square is [`z1_partition`].
pub fn z1_partition_rank1(twist: &TwistData, m: &ModularParam, pol: &SeriesPolicy) -> Result<Complex64> {
    let allowed = |x: f64| x == 0.0 || x == 0.5;
    if !allowed(twist.alpha()) || !allowed(twist.beta()) {
        return Err(Error::InvalidParameter("rank-one characteristics must lie in {0, 1/2}".into()));
    }
    if twist.is_degenerate() {
        return Err(Error::DegenerateTwist);
    }
    let theta = twist.theta().re;
    let (mut prod, shift) = if twist.alpha() == 0.0 {
        (m.qpow(-1.0 / 48.0), 0.5)
    } else {
        (m.qpow(1.0 / 24.0) * (1.0 - theta).sqrt(), 0.0)
    };
    for l in 1..=pol.max_terms {
        let f = m.qpow(l as f64 - shift) * theta;
        prod *= 1.0 - f;
        if f.norm() < pol.rel_tol.min(1e-16) {
            return Ok(prod);
        }
    }
    Err(Error::NonConvergent { what: "rank-one partition product", terms: pol.max_terms })
}

/// Torus one-point function of `Ψ[k,l]`: `δ_{st} (−1)^{s(s−1)/2} Z⁽¹⁾ det C(kᵢ, lⱼ)`.
pub fn z1_fock_onept(label: &FockLabel, twist: &TwistData, m: &ModularParam, pol: &SeriesPolicy) -> Result<Complex64> {
    if twist.is_degenerate() {
        return Err(Error::DegenerateTwist);
    }
    let s = label.k.len();
    if s != label.l.len() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let nmax = label.k.iter().chain(&label.l).max().copied().unwrap_or(1) * 2;
    let data = TorusData::new(twist, m, pol, nmax)?;
    Ok(data.z * data.det_c(&label.k, &label.l) * sign(s * s.saturating_sub(1) / 2))
}

/// Torus generating function `det(P₁(wᵢ − zⱼ)) Z⁽¹⁾`.
pub fn z1_gen_2npt(
    ws: &[Complex64],
    zs: &[Complex64],
    twist: &TwistData,
    m: &ModularParam,
    pol: &SeriesPolicy,
) -> Result<Complex64> {
    if ws.len() != zs.len() {
        return Err(Error::InvalidParameter("need equally many w and z points".into()));
    }
    if twist.is_degenerate() {
        return Err(Error::DegenerateTwist);
    }
    let n = ws.len();
    let mut p = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = weierstrass_table(1, twist, ws[i] - zs[j], m, pol)?[0];
        }
    }
    Ok(det(&p) * z1_partition(twist, m, pol)?)
}

/// Which side of the sewing a dressed one-point function lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `ψ⁺` insertions at `w₁…w_n` acting on `Ψ[k,l]`, with `|l| = |k| + n`.
    Plus,
    /// `ψ⁻` insertions at `z₁…z_n` acting on `Ψ[l,k]`, with `|l| = |k| + n`.
    Minus,
}

/// Dressed torus one-point functions of the generating-form expansion.
///
/// `Side::Plus` returns `(−1)^{m(m−1)/2} det E₁ Z⁽¹⁾` where `E₁` has rows
/// `D(1, lⱼ, wᵢ)` followed by `C(kᵢ, lⱼ)`. `Side::Minus` returns
/// `(−1)^{m(m+1)/2 + sm} det E₂ Z⁽¹⁾` where `E₂` has columns `D(lᵢ, 1, −zⱼ)`
/// followed by `C(lᵢ, kⱼ)`; the dual factor `(−1)^{sm}` is thereby split off.
pub fn z1_dressed_onept(
    side: Side,
    points: &[Complex64],
    label: &FockLabel,
    twist: &TwistData,
    m: &ModularParam,
    pol: &SeriesPolicy,
) -> Result<Complex64> {
    if twist.is_degenerate() {
        return Err(Error::DegenerateTwist);
    }
    let n = points.len();
    let s = label.k.len();
    let mm = label.l.len();
    if mm != s + n {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let lmax = label.k.iter().chain(&label.l).max().copied().unwrap_or(1);
    let data = TorusData::new(twist, m, pol, 2 * lmax)?;
    let mut tables = Vec::with_capacity(n);
    for &p in points {
        let arg = if side == Side::Plus { p } else { -p };
        tables.push(weierstrass_table(lmax, twist, arg, m, pol)?);
    }
    Ok(dressed_det(side, &tables, label, &data) * data.z)
}

fn dressed_det(side: Side, tables: &[Vec<Complex64>], label: &FockLabel, data: &TorusData) -> Complex64 {
    let n = tables.len();
    let s = label.k.len();
    let mm = label.l.len();
    match side {
        Side::Plus => {
            let e1 = CMatrix::from_fn(mm, mm, |i, j| {
                let l = label.l[j];
                if i < n {
                    tables[i][l - 1]
                } else {
                    data.c(label.k[i - n], l)
                }
            });
            det(&e1) * sign(mm * mm.saturating_sub(1) / 2)
        }
        Side::Minus => {
            let e2 = CMatrix::from_fn(mm, mm, |i, j| {
                let l = label.l[i];
                if j < n {
                    tables[j][l - 1] * sign(l + 1)
                } else {
                    data.c(l, label.k[j - n])
                }
            });
            det(&e2) * sign(mm * (mm + 1) / 2 + s * mm)
        }
    }
}

/// Genus-two partition function `Z⁽¹⁾(τ₁) Z⁽¹⁾(τ₂) det(I − Q)`.
pub fn z2_partition(cfg: &SewingConfig, chars: &CharPair) -> Result<Complex64> {
    let d = det_i_minus_q(cfg, &chars.t1, &chars.t2)?;
    let z1 = z1_partition(&chars.t1, cfg.tau1(), cfg.policy())?;
    let z2 = z1_partition(&chars.t2, cfg.tau2(), cfg.policy())?;
    Ok(z1 * z2 * d)
}

/// Number of ray samples used to continue square roots from `ε = 0`.
pub const BRANCH_SAMPLES: usize = 64;

/// `√f(1)` continued from `f(0) = 1` along `t ∈ [0, 1]`.
pub(crate) fn tracked_sqrt(f: &dyn Fn(f64) -> Result<Complex64>, samples: usize) -> Result<Complex64> {
    let mut root = Complex64::new(1.0, 0.0);
    let mut prev = Complex64::new(1.0, 0.0);
    for i in 1..=samples {
        let val = f(i as f64 / samples as f64)?;
        if val.norm() == 0.0 {
            return Err(Error::BranchAmbiguity("determinant vanishes on the sewing ray".into()));
        }
        let step = val / prev;
        if step.arg().abs() > std::f64::consts::FRAC_PI_2 {
            return Err(Error::BranchAmbiguity(format!(
                "phase jump {} between ray samples exceeds pi/2",
                step.arg()
            )));
        }
        root *= step.sqrt();
        prev = val;
    }
    Ok(root)
}

/// Rank-one genus-two partition function `Z₁ Z₂ det(I − Q)^{1/2}` with the
/// square root continued from `ε = 0` along the ray to `ε`.
pub fn z2_partition_rank1(cfg: &SewingConfig, chars: &CharPair) -> Result<Complex64> {
    cfg.require_domain()?;
    let z1 = z1_partition_rank1(&chars.t1, cfg.tau1(), cfg.policy())?;
    let z2 = z1_partition_rank1(&chars.t2, cfg.tau2(), cfg.policy())?;
    let eps = cfg.eps();
    let root = tracked_sqrt(
        &|t| det_i_minus_q(&cfg.with_eps(eps * t), &chars.t1, &chars.t2),
        BRANCH_SAMPLES,
    )?;
    Ok(z1 * z2 * root)
}

/// Truncated Fock sum `Σ_u Z⁽¹⁾(u, τ₁) Z⁽¹⁾(ū, τ₂)` over labels of weight at most `W`.
pub fn z2_direct_oracle(cfg: &SewingConfig, chars: &CharPair, cut: &CutoffPolicy) -> Result<Complex64> {
    gen_form_direct_oracle(&[], &[], cfg, chars, cut)
}

/// Genus-two generating form `Z⁽²⁾ det S⁽²⁾(wᵢ, zⱼ)` (scalar part).
pub fn gen_form_2n(ws: &[SurfacePoint], zs: &[SurfacePoint], cfg: &SewingConfig, chars: &CharPair) -> Result<Complex64> {
    if ws.len() != zs.len() {
        return Err(Error::InvalidParameter("need equally many w and z points".into()));
    }
    let z2 = z2_partition(cfg, chars)?;
    let kern = Szego2::new(cfg, &chars.t1, &chars.t2)?;
    let n = ws.len();
    let mut s = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = kern.kernel(&ws[i], &zs[j])?;
        }
    }
    Ok(z2 * det(&s))
}

/// Truncated Fock-sum expansion of the generating form with every `wᵢ` on
/// torus 1 and every `zⱼ` on torus 2:
/// `(−1)^{n(n−1)/2}(−1)^n Σ_u Z⁽¹⁾(ψ⁺…ψ⁺ u, τ₁) Z⁽¹⁾(ψ⁻…ψ⁻ ū, τ₂)`.
pub fn gen_form_direct_oracle(
    ws: &[SurfacePoint],
    zs: &[SurfacePoint],
    cfg: &SewingConfig,
    chars: &CharPair,
    cut: &CutoffPolicy,
) -> Result<Complex64> {
    let n = ws.len();
    if zs.len() != n {
        return Err(Error::InvalidParameter("need equally many w and z points".into()));
    }
    if n > cut.n_insertions_cap {
        return Err(Error::InvalidParameter(format!("{n} insertions exceed the cap {}", cut.n_insertions_cap)));
    }
    if ws.iter().any(|p| p.torus != Torus::One) || zs.iter().any(|p| p.torus != Torus::Two) {
        return Err(Error::InvalidParameter("oracle needs w on torus 1 and z on torus 2".into()));
    }
    cfg.require_domain()?;
    for p in ws.iter().chain(zs) {
        p.check(cfg)?;
    }
    let labels = enumerate_labels(n, cut.weight_cap);
    let lmax = labels.iter().flat_map(|x| x.k.iter().chain(&x.l)).max().copied().unwrap_or(1);
    let pol = cfg.policy();
    let d1 = TorusData::new(&chars.t1, cfg.tau1(), pol, 2 * lmax)?;
    let d2 = TorusData::new(&chars.t2, cfg.tau2(), pol, 2 * lmax)?;
    let wt: Vec<Vec<Complex64>> = ws
        .iter()
        .map(|p| weierstrass_table(lmax, &chars.t1, p.z, cfg.tau1(), pol))
        .collect::<Result<_>>()?;
    let zt: Vec<Vec<Complex64>> = zs
        .iter()
        .map(|p| weierstrass_table(lmax, &chars.t2, -p.z, cfg.tau2(), pol))
        .collect::<Result<_>>()?;

    let root = cfg.eps().sqrt();
    // Half-forms are identified by dz_a^{1/2} = (-1)^a xi eps^{1/2} dz_abar^{1/2} / z_abar,
    // the orientation under which the cross-torus kernel continues the same-torus one.
    let xi = cfg.xi().value();
    let mut acc = Complex64::new(0.0, 0.0);
    for label in &labels {
        let s = label.k.len();
        let mm = label.l.len();
        let dual = root.powi(label.twice_weight() as i32)
            * xi.powi(label.parity() as i32)
            * sign(s * mm);
        acc += dressed_det(Side::Plus, &wt, label, &d1) * dressed_det(Side::Minus, &zt, label, &d2) * dual;
    }
    Ok(acc * d1.z * d2.z * sign(n * n.saturating_sub(1) / 2 + n))
}

/// Truncated Fock-sum expansion of the generating form with every insertion on
/// torus 1: `Σ_u Z⁽¹⁾(ψ⁺(w₁)ψ⁻(z₁)…ψ⁺(w_n)ψ⁻(z_n) u, τ₁) Z⁽¹⁾(ū, τ₂)`.
///
/// The torus-1 factor for `u = Ψ[k,l]` is `(−1)^{m(m−1)/2} det M Z⁽¹⁾` with the
/// bordered matrix `M = [[P₁(wᵢ − zⱼ), D(1, l, wᵢ)], [D(k, 1, −zⱼ), C(k, l)]]`.
pub fn gen_form_oracle_torus1(
    ws: &[SurfacePoint],
    zs: &[SurfacePoint],
    cfg: &SewingConfig,
    chars: &CharPair,
    cut: &CutoffPolicy,
) -> Result<Complex64> {
    let n = ws.len();
    if zs.len() != n {
        return Err(Error::InvalidParameter("need equally many w and z points".into()));
    }
    if ws.iter().chain(zs).any(|p| p.torus != Torus::One) {
        return Err(Error::InvalidParameter("all insertions must lie on torus 1".into()));
    }
    cfg.require_domain()?;
    for p in ws.iter().chain(zs) {
        p.check(cfg)?;
    }
    let labels = enumerate_labels(0, cut.weight_cap);
    let lmax = labels.iter().flat_map(|x| x.k.iter().chain(&x.l)).max().copied().unwrap_or(1);
    let pol = cfg.policy();
    let (t1, m1) = (&chars.t1, cfg.tau1());
    let d1 = TorusData::new(t1, m1, pol, 2 * lmax)?;
    let d2 = TorusData::new(&chars.t2, cfg.tau2(), pol, 2 * lmax)?;
    let pw: Vec<Vec<Complex64>> = ws.iter().map(|p| weierstrass_table(lmax, t1, p.z, m1, pol)).collect::<Result<_>>()?;
    let pz: Vec<Vec<Complex64>> = zs.iter().map(|p| weierstrass_table(lmax, t1, -p.z, m1, pol)).collect::<Result<_>>()?;
    let mut p1 = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p1[(i, j)] = weierstrass_table(1, t1, ws[i].z - zs[j].z, m1, pol)?[0];
        }
    }
    let eps = cfg.eps();
    let mut acc = Complex64::new(0.0, 0.0);
    for label in &labels {
        let mm = label.l.len();
        let big = CMatrix::from_fn(n + mm, n + mm, |i, j| match (i < n, j < n) {
            (true, true) => p1[(i, j)],
            (true, false) => pw[i][label.l[j - n] - 1],
            (false, true) => {
                let k = label.k[i - n];
                pz[j][k - 1] * sign(k + 1)
            }
            (false, false) => d1.c(label.k[i - n], label.l[j - n]),
        });
        let side1 = det(&big) * sign(mm * mm.saturating_sub(1) / 2);
        let side2 = d2.det_c(&label.l, &label.k) * sign(mm * mm.saturating_sub(1) / 2);
        acc += side1 * side2 * eps.powi((label.twice_weight() / 2) as i32) * sign(mm);
    }
    Ok(acc * d1.z * d2.z)
}

/// Virasoro one-point form of `½(ψ⁺[−2]ψ⁻ + ψ⁻[−2]ψ⁺)` at `z`:
/// `Z⁽²⁾ lim_{w→z} [½(∂_w − ∂_z)K⁽²⁾(w,z) + (w − z)⁻²]`.
///
/// The pole of the kernel is removed analytically, the derivatives are
/// central differences, and the limit is a Richardson extrapolation over
/// offsets `h` and `h/2` with `h = 10⁻³ min(|z|, D(q₁)/2π)`. The two
/// first-order extrapolants must agree to `10⁻⁵`; their `h²` error is then
/// removed by one further Richardson step.
pub fn virasoro_onept(z: &SurfacePoint, cfg: &SewingConfig, chars: &CharPair) -> Result<Complex64> {
    virasoro_onept_along(z, cfg, chars, Complex64::new(1.0, 0.0))
}

/// [`virasoro_onept`] with the limit taken along the unit direction `dir`.
pub fn virasoro_onept_along(z: &SurfacePoint, cfg: &SewingConfig, chars: &CharPair, dir: Complex64) -> Result<Complex64> {
    let (r_h, r_h2) = virasoro_extrapolants(z, cfg, chars, dir)?;
    let rel = (r_h - r_h2).norm() / r_h2.norm().max(f64::MIN_POSITIVE);
    if rel > 1e-5 {
        return Err(Error::LimitUnstable(rel));
    }
    Ok(z2_partition(cfg, chars)? * (r_h2 * 4.0 - r_h) / 3.0)
}

/// Richardson extrapolants of the bracketed limit from offsets `(h, h/2)` and `(h/2, h/4)`.
pub fn virasoro_extrapolants(
    z: &SurfacePoint,
    cfg: &SewingConfig,
    chars: &CharPair,
    dir: Complex64,
) -> Result<(Complex64, Complex64)> {
    let kern = Szego2::new(cfg, &chars.t1, &chars.t2)?;
    let scale = z.z.norm().min(min_lattice_distance(cfg.tau(z.torus)) / std::f64::consts::TAU);
    let h = 1e-3 * scale;
    let dir = dir / dir.norm();
    let g = |x: f64| -> Result<Complex64> { bracket(&kern, z, dir * x) };
    let (g1, g2, g4) = (g(h)?, g(h / 2.0)?, g(h / 4.0)?);
    Ok((g2 * 2.0 - g1, g4 * 2.0 - g2))
}

/// `½(∂_w − ∂_z)[K⁽²⁾(w,z) − 1/(w−z)]` at `w = z + x`, by central differences.
fn bracket(kern: &Szego2, z: &SurfacePoint, x: Complex64) -> Result<Complex64> {
    let w = SurfacePoint::new(z.torus, z.z + x);
    let d = x * 0.25;
    let at = |dw: Complex64, dz: Complex64| {
        kern.kernel_regular(&SurfacePoint::new(w.torus, w.z + dw), &SurfacePoint::new(z.torus, z.z + dz))
    };
    let zero = Complex64::new(0.0, 0.0);
    let dkw = (at(d, zero)? - at(-d, zero)?) / (d * 2.0);
    let dkz = (at(zero, d)? - at(zero, -d)?) / (d * 2.0);
    Ok((dkw - dkz) * 0.5)
}

/// Heisenberg genus-two partition function `1/(η(τ₁)η(τ₂) det(I − A₁A₂)^{1/2})`.
pub fn z2_heisenberg(cfg: &SewingConfig) -> Result<Complex64> {
    cfg.require_domain()?;
    let eps = cfg.eps();
    let root = tracked_sqrt(
        &|t| {
            let c = cfg.with_eps(eps * t);
            let a1 = a_matrix(Torus::One, &c)?;
            let a2 = a_matrix(Torus::Two, &c)?;
            Ok(det(&identity_minus(&(a1.matrix() * a2.matrix()))))
        },
        BRANCH_SAMPLES,
    )?;
    let e1 = dedekind_eta(cfg.tau1(), cfg.policy())?;
    let e2 = dedekind_eta(cfg.tau2(), cfg.policy())?;
    Ok(1.0 / (e1 * e2 * root))
}

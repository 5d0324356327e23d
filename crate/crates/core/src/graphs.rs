//! Rotationless oriented cycle graphs and the product expansion of
//! `det(I − W₁W₂)`.
//!
//! A cycle `(k₁,…,k_{2n})` carries `W₁` on edges `k_{2i−1}→k_{2i}` and `W₂` on
//! edges `k_{2i}→k_{2i+1}`, so only even rotations preserve the edge
//! alternation. Rotation classes are necklaces over the alphabet of pairs
//! `(k_{2i−1}, k_{2i})`; the rotationless ones are Lyndon words.

use num_complex::Complex64;

use crate::coeffs::{a_matrix, f_matrix, TruncatedMatrix};
use crate::error::Result;
use crate::fermion::{tracked_sqrt, CharPair, BRANCH_SAMPLES};
use crate::linalg::{det, identity_minus};
use crate::sewing::{SewingConfig, Torus};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycleGraph {
    labels: Vec<usize>,
}

impl CycleGraph {
    /// Canonical form of an even-length label cycle.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.is_empty() || labels.len() % 2 != 0 || labels.contains(&0) {
            return Err(crate::Error::InvalidParameter(format!(
                "cycle labels must be a nonempty even-length list of positive integers: {labels:?}"
            )));
        }
        Ok(Self { labels: canonical(&labels) })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn half_len(&self) -> usize {
        self.labels.len() / 2
    }

    /// No proper even rotation fixes the labels.
    pub fn is_rotationless(&self) -> bool {
        let n = self.labels.len();
        (2..n).step_by(2).all(|r| rotate(&self.labels, r) != self.labels)
    }

    /// `Σ kᵢ − shift·n`, the ε-order of the weight for `W(k,l) ∝ ε^{(k+l−shift)/2}`.
    pub fn order(&self, shift: usize) -> usize {
        self.labels.iter().sum::<usize>() - shift * self.half_len()
    }
}

fn rotate(v: &[usize], r: usize) -> Vec<usize> {
    v[r..].iter().chain(&v[..r]).copied().collect()
}

/// Lexicographically least even rotation.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    (0..labels.len())
        .step_by(2)
        .map(|r| rotate(labels, r))
        .min()
        .unwrap_or_default()
}

/// Depth-first traversal of the prenecklace tree (Fredricksen–Kessler–Maiorana),
/// emitting each Lyndon prefix. Letters index pairs `(a, b)` with `a, b ≤ max_label`;
/// a prefix whose cost exceeds `budget` is pruned, which is sound because every
/// letter has positive cost.
fn lyndon_pairs(max_halflen: usize, max_label: usize, cost: &dyn Fn(usize, usize) -> usize, budget: usize) -> Vec<CycleGraph> {
    struct Walk<'a> {
        n: usize,
        l: usize,
        cost: &'a dyn Fn(usize, usize) -> usize,
        budget: usize,
        word: Vec<usize>,
        out: Vec<CycleGraph>,
    }
    impl Walk<'_> {
        fn letter_cost(&self, x: usize) -> usize {
            (self.cost)(x / self.l + 1, x % self.l + 1)
        }
        fn push(&mut self, x: usize, spent: usize, t: usize, p: usize) {
            let c = spent + self.letter_cost(x);
            if c > self.budget {
                return;
            }
            self.word.push(x);
            self.gen(t + 1, p, c);
            self.word.pop();
        }
        fn gen(&mut self, t: usize, p: usize, spent: usize) {
            // word = a[1..t-1]; p = period of the longest Lyndon prefix
            if t > 1 && p == t - 1 {
                let labels = self.word.iter().flat_map(|&x| [x / self.l + 1, x % self.l + 1]).collect();
                self.out.push(CycleGraph { labels });
            }
            if t > self.n {
                return;
            }
            let alpha = self.l * self.l;
            let (start, inherit) = if t == 1 { (0, None) } else { (self.word[t - 1 - p], Some(self.word[t - 1 - p])) };
            if let Some(x) = inherit {
                self.push(x, spent, t, p);
            }
            let first = if inherit.is_some() { start + 1 } else { start };
            for x in first..alpha {
                self.push(x, spent, t, t);
            }
        }
    }
    let mut w = Walk { n: max_halflen, l: max_label, cost, budget, word: Vec::new(), out: Vec::new() };
    if max_halflen >= 1 && max_label >= 1 {
        w.gen(1, 0, 0);
    }
    w.out.sort();
    w.out
}

/// All rotationless graphs with at most `2·max_halflen` nodes and labels at most `max_label`.
pub fn enumerate_rotationless(max_halflen: usize, max_label: usize) -> Vec<CycleGraph> {
    lyndon_pairs(max_halflen, max_label, &|_, _| 1, usize::MAX)
}

/// Rotationless graphs whose weight has ε-order `Σk − shift·n` at most `max_order`.
pub fn enumerate_to_order(max_order: usize, shift: usize, max_label: usize) -> Vec<CycleGraph> {
    let cost = move |a: usize, b: usize| a + b - shift;
    lyndon_pairs(max_order, max_label, &cost, max_order)
}

/// `ζ(N) = ∏ W₁(k_{2i−1}, k_{2i}) W₂(k_{2i}, k_{2i+1})` with `k_{2n+1} = k₁`.
pub fn zeta_weight(g: &CycleGraph, w1: &TruncatedMatrix, w2: &TruncatedMatrix) -> Result<Complex64> {
    let k = &g.labels;
    let n = k.len();
    let mut z = Complex64::new(1.0, 0.0);
    for i in (0..n).step_by(2) {
        z *= w1.get(k[i], k[i + 1])? * w2.get(k[i + 1], k[(i + 2) % n])?;
    }
    Ok(z)
}

/// `∏(1 − ζ(N))` over the rotationless graphs within the bounds.
pub fn product_expansion(w1: &TruncatedMatrix, w2: &TruncatedMatrix, max_halflen: usize, max_label: usize) -> Result<Complex64> {
    product_over(&enumerate_rotationless(max_halflen, max_label), w1, w2)
}

pub fn product_over(graphs: &[CycleGraph], w1: &TruncatedMatrix, w2: &TruncatedMatrix) -> Result<Complex64> {
    graphs
        .iter()
        .try_fold(Complex64::new(1.0, 0.0), |acc, g| Ok(acc * (1.0 - zeta_weight(g, w1, w2)?)))
}

/// Both sides of the genus-two Jacobi product identity through ε-order `order`:
/// `∏(1 − ζ_A)^{1/2} ∏(1 − ζ_F)` and `det(I − A₁A₂)^{1/2} det(I − F₁F₂)`.
pub fn jacobi_product(cfg: &SewingConfig, chars: &CharPair, order: usize) -> Result<(Complex64, Complex64)> {
    let max_label = cfg.order();
    let a1 = a_matrix(Torus::One, cfg)?;
    let a2 = a_matrix(Torus::Two, cfg)?;
    let f1 = f_matrix(Torus::One, cfg, &chars.t1)?;
    let f2 = f_matrix(Torus::Two, cfg, &chars.t2)?;
    let mut prod = Complex64::new(1.0, 0.0);
    for g in enumerate_to_order(order, 0, max_label.min(order)) {
        prod *= (1.0 - zeta_weight(&g, &a1, &a2)?).sqrt();
    }
    for g in enumerate_to_order(order, 1, max_label.min(order + 1)) {
        prod *= 1.0 - zeta_weight(&g, &f1, &f2)?;
    }
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
    let dets = root * det(&identity_minus(&(f1.matrix() * f2.matrix())));
    Ok((prod, dets))
}

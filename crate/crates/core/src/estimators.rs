//! Source scores for every infected vertex.
//!
//! With `s_u(v) = |(T, u)_{v↓}|`:
//!
//! * rumor centrality `R(u) = n! / Π_v s_u(v)` (the product includes `v = u`),
//! * subtree product `φ(u) = Π_{v ≠ u} s_u(v)`,
//! * maximum subtree `ψ(u) = max_{v ≠ u} s_u(v)`.
//!
//! All three are computed for every vertex in O(n) by rooting at the source
//! once and re-rooting across each edge: moving the root from `p` to its
//! child `c` only changes the sizes of `p` and `c`, so
//! `φ(c) = φ(p) · (n - s(c)) / s(c)` and `R(c) = R(p) · s(c) / (n - s(c))`.

use std::cmp::Ordering;

use num_bigint::BigUint;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::tree::{InfectionTree, Label};

/// Absolute tolerance on `log φ` when collecting rumor-center ties.
pub const CENTER_TIE_TOLERANCE: f64 = 1e-9;

/// Log-ratios closer than this to zero are re-decided with exact integers.
const EXACT_FALLBACK_BAND: f64 = 1e-6;

/// Largest tree [`brute_force_rumor_centrality`] accepts.
pub const BRUTE_FORCE_MAX_N: u32 = 10;

/// Scores from one rooted evaluation pass, indexed by `label - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    n: u32,
    log_n_factorial: f64,
    log_phi: Vec<f64>,
    log_r: Vec<f64>,
    psi: Vec<u32>,
    /// `log φ(u) - log φ(1)`, accumulated along the path from the source so
    /// it stays small where it matters (near the centre).
    phi_rel: Vec<f64>,
    source_sizes: Vec<u32>,
}

impl ScoreTable {
    pub fn n(&self) -> u32 {
        self.n
    }

    /// `ln n!`.
    pub fn log_n_factorial(&self) -> f64 {
        self.log_n_factorial
    }

    pub fn log_phi(&self, u: Label) -> f64 {
        self.log_phi[u as usize - 1]
    }

    pub fn log_r(&self, u: Label) -> f64 {
        self.log_r[u as usize - 1]
    }

    pub fn psi(&self, u: Label) -> u32 {
        self.psi[u as usize - 1]
    }

    /// `log φ(u) - log φ(1)`.
    pub fn log_phi_vs_source(&self, u: Label) -> f64 {
        self.phi_rel[u as usize - 1]
    }

    /// Subtree sizes with the tree rooted at the source.
    pub fn source_sizes(&self) -> &[u32] {
        &self.source_sizes
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> {
        1..=self.n
    }

    /// Exact comparison of `φ(a)` with `φ(b)`.
    ///
    /// Decided in log space unless the two are within a narrow band, where
    /// the ratio `φ(x)/φ(1) = Π (n - s(c)) / s(c)` over the edges from the
    /// source to `x` is rebuilt with big integers.
    pub fn cmp_phi(&self, tree: &InfectionTree, a: Label, b: Label) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        let diff = self.log_phi_vs_source(a) - self.log_phi_vs_source(b);
        if diff.abs() > EXACT_FALLBACK_BAND {
            return diff.total_cmp(&0.0);
        }
        let (num_a, den_a) = self.exact_phi_ratio(tree, a);
        let (num_b, den_b) = self.exact_phi_ratio(tree, b);
        (num_a * den_b).cmp(&(num_b * den_a))
    }

    fn exact_phi_ratio(&self, tree: &InfectionTree, v: Label) -> (BigUint, BigUint) {
        let n = u64::from(self.n);
        let mut num = BigUint::from(1u32);
        let mut den = BigUint::from(1u32);
        let mut cur = v;
        while let Some(p) = tree.parent(cur) {
            let s = u64::from(self.source_sizes[cur as usize - 1]);
            num *= n - s;
            den *= s;
            cur = p;
        }
        (num, den)
    }
}

/// Computes `log φ`, `log R` and `ψ` for every vertex.
///
/// `log R` is accumulated by its own re-rooting pass rather than derived
/// from `log φ`, so `log R + log φ + log n = log n!` is a genuine check.
/// For `n = 1`, `φ = R = 1` and `ψ = 0` (empty product and maximum).
pub fn score_all(tree: &InfectionTree) -> ScoreTable {
    let n = tree.n();
    let sizes = tree.source_subtree_sizes();
    let nf = f64::from(n);
    let log_n_factorial = if n == 0 { 0.0 } else { ln_gamma(nf + 1.0) };

    let mut phi_rel = vec![0.0; n as usize];
    let mut log_r = vec![0.0; n as usize];
    let mut psi = vec![0u32; n as usize];
    if n == 0 {
        return ScoreTable {
            n,
            log_n_factorial,
            log_phi: Vec::new(),
            log_r,
            psi,
            phi_rel,
            source_sizes: sizes,
        };
    }

    let log_phi_source: f64 = sizes[1..].iter().map(|&s| f64::from(s).ln()).sum();
    log_r[0] = log_n_factorial - nf.ln() - sizes[1..].iter().map(|&s| f64::from(s).ln()).sum::<f64>();
    for i in 1..n as usize {
        let p = tree.parents()[i] as usize - 1;
        let s = f64::from(sizes[i]);
        let ratio = (nf - s).ln() - s.ln();
        phi_rel[i] = phi_rel[p] + ratio;
        log_r[i] = log_r[p] - ratio;
    }
    // ψ(u): the largest of u's child subtrees and the part above u.
    for (&p, &s) in tree.parents().iter().zip(&sizes).skip(1) {
        let p = p as usize - 1;
        psi[p] = psi[p].max(s);
    }
    for (i, m) in psi.iter_mut().enumerate() {
        *m = (*m).max(n - sizes[i]);
    }
    let log_phi = phi_rel.iter().map(|r| log_phi_source + r).collect();

    ScoreTable {
        n,
        log_n_factorial,
        log_phi,
        log_r,
        psi,
        phi_rel,
        source_sizes: sizes,
    }
}

/// All minimisers of `φ` (equivalently maximisers of `R`), within
/// [`CENTER_TIE_TOLERANCE`] on `log φ`. There are one or two, and two are
/// always adjacent.
pub fn rumor_centers(table: &ScoreTable) -> Vec<Label> {
    let Some(best) = table.phi_rel.iter().copied().min_by(f64::total_cmp) else {
        return Vec::new();
    };
    table
        .labels()
        .filter(|&u| table.log_phi_vs_source(u) <= best + CENTER_TIE_TOLERANCE)
        .collect()
}

/// All minimisers of `ψ`: the centroid(s) of the tree.
pub fn centroid(table: &ScoreTable) -> Vec<Label> {
    let Some(&best) = table.psi.iter().min() else { return Vec::new() };
    table.labels().filter(|&u| table.psi(u) == best).collect()
}

/// Counts orderings of the tree's vertices that start at `u` and keep every
/// prefix connected, by dynamic programming over vertex subsets. This is the
/// combinatorial definition of `R(u)` and shares no code with [`score_all`].
pub fn brute_force_rumor_centrality(tree: &InfectionTree, u: Label) -> Result<u64> {
    let n = tree.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::domain(format!(
            "brute force refused for n = {n} > {BRUTE_FORCE_MAX_N}"
        )));
    }
    if !tree.contains(u) {
        return Err(Error::domain(format!("unknown label {u}")));
    }
    let n = n as usize;
    let adj: Vec<u32> = (1..=tree.n())
        .map(|v| tree.neighbors(v).fold(0u32, |m, w| m | 1 << (w - 1)))
        .collect();
    let full = (1u32 << n) - 1;
    // ways[S] = number of ways to finish an ordering whose infected set is S.
    let mut ways = vec![0u64; 1 << n];
    ways[full as usize] = 1;
    for set in (1..full).rev() {
        let mut frontier = 0u32;
        for (v, &a) in adj.iter().enumerate() {
            if set & (1 << v) != 0 {
                frontier |= a;
            }
        }
        frontier &= !set;
        let mut total = 0u64;
        let mut rest = frontier;
        while rest != 0 {
            let bit = rest & rest.wrapping_neg();
            total += ways[(set | bit) as usize];
            rest &= rest - 1;
        }
        ways[set as usize] = total;
    }
    Ok(ways[1 << (u - 1)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::GraphSpec;

    fn tree(parents: &[Option<Label>]) -> InfectionTree {
        InfectionTree::from_parents(GraphSpec::Regular { d: 10 }, parents).unwrap()
    }

    fn star4() -> InfectionTree {
        tree(&[None, Some(1), Some(1), Some(1)])
    }

    fn path(n: u32) -> InfectionTree {
        let parents: Vec<_> = (0..n).map(|i| if i == 0 { None } else { Some(i) }).collect();
        tree(&parents)
    }

    #[test]
    fn star_scores() {
        let t = star4();
        let s = score_all(&t);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(s.log_r(1).exp(), 6.0));
        assert!(close(s.log_phi(1).exp(), 1.0));
        assert_eq!(s.psi(1), 1);
        for leaf in 2..=4 {
            assert!(close(s.log_r(leaf).exp(), 2.0));
            assert!(close(s.log_phi(leaf).exp(), 3.0));
            assert_eq!(s.psi(leaf), 3);
        }
        assert_eq!(rumor_centers(&s), vec![1]);
        assert_eq!(centroid(&s), vec![1]);
    }

    #[test]
    fn single_node_scores() {
        let s = score_all(&path(1));
        assert_eq!(s.log_r(1), 0.0);
        assert_eq!(s.log_phi(1), 0.0);
        assert_eq!(s.psi(1), 0);
        assert_eq!(rumor_centers(&s), vec![1]);
    }

    #[test]
    fn path3_scores() {
        let s = score_all(&path(3));
        assert!((s.log_phi(2).exp() - 1.0).abs() < 1e-12);
        assert!((s.log_phi(1).exp() - 2.0).abs() < 1e-12);
        assert!((s.log_phi(3).exp() - 2.0).abs() < 1e-12);
        assert_eq!((s.psi(1), s.psi(2), s.psi(3)), (2, 1, 2));
        assert_eq!(rumor_centers(&s), vec![2]);
    }

    #[test]
    fn path4_ties() {
        let s = score_all(&path(4));
        assert!((s.log_phi(2).exp() - 2.0).abs() < 1e-12);
        assert!((s.log_phi(3).exp() - 2.0).abs() < 1e-12);
        assert!((s.log_phi(1).exp() - 6.0).abs() < 1e-12);
        assert!((s.log_r(2).exp() - 3.0).abs() < 1e-12);
        assert_eq!(rumor_centers(&s), vec![2, 3]);
        assert_eq!(centroid(&s), vec![2, 3]);
        assert_eq!(s.psi(2), 2);
    }

    #[test]
    fn brute_force_small_cases() {
        assert_eq!(brute_force_rumor_centrality(&star4(), 1).unwrap(), 6);
        assert_eq!(brute_force_rumor_centrality(&star4(), 2).unwrap(), 2);
        assert_eq!(brute_force_rumor_centrality(&path(3), 1).unwrap(), 1);
        assert_eq!(brute_force_rumor_centrality(&path(3), 2).unwrap(), 2);
        assert_eq!(brute_force_rumor_centrality(&path(1), 1).unwrap(), 1);
    }

    #[test]
    fn brute_force_refuses_large_trees() {
        assert!(matches!(brute_force_rumor_centrality(&path(11), 1), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_phi_comparison() {
        let t = path(4);
        let s = score_all(&t);
        assert_eq!(s.cmp_phi(&t, 2, 3), Ordering::Equal);
        assert_eq!(s.cmp_phi(&t, 1, 4), Ordering::Equal);
        assert_eq!(s.cmp_phi(&t, 2, 1), Ordering::Less);
        assert_eq!(s.cmp_phi(&t, 4, 3), Ordering::Greater);
    }
}

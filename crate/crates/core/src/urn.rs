//! Pólya urns and the limit laws they produce: Dirichlet limits of subtree
//! proportions, Beta products along a path, two coupled urns whose
//! normalised counts stay ordered, and the tail of the product `B`.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{simulate, SimConfig};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::stats::{binomial_se, mean_var};
use crate::tree::{GraphSpec, InfectionTree, Label};

/// An urn whose drawn color is returned together with `replacement` extra
/// balls of the same color.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrnState {
    pub colors: Vec<u64>,
    pub replacement: u64,
}

impl UrnState {
    pub fn new(colors: Vec<u64>, replacement: u64) -> Result<Self> {
        if colors.is_empty() || colors.iter().all(|&c| c == 0) {
            return Err(Error::domain("urn needs at least one ball"));
        }
        Ok(UrnState { colors, replacement })
    }

    pub fn total(&self) -> u64 {
        self.colors.iter().sum()
    }

    /// Draws a color with probability proportional to its count.
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let mut r = rng.random_range(0..self.total());
        let mut color = 0;
        for (i, &c) in self.colors.iter().enumerate() {
            if r < c {
                color = i;
                break;
            }
            r -= c;
        }
        self.colors[color] += self.replacement;
        color
    }

    /// Exact probability of drawing `sequence` from this state, as an
    /// unreduced fraction `(numerator, denominator)`.
    pub fn sequence_probability(&self, sequence: &[usize]) -> Result<(u128, u128)> {
        let mut urn = self.clone();
        let (mut num, mut den) = (1u128, 1u128);
        for &c in sequence {
            let count = *urn
                .colors
                .get(c)
                .ok_or_else(|| Error::domain(format!("no color {c}")))?;
            num *= u128::from(count);
            den *= u128::from(urn.total());
            urn.colors[c] += urn.replacement;
        }
        Ok((num, den))
    }
}

fn regular_degree(spec: GraphSpec) -> Result<u32> {
    match spec {
        GraphSpec::Regular { d } => Ok(d),
        GraphSpec::Glued { .. } => Err(Error::domain("urn checks need a regular host")),
    }
}

/// For every vertex, the label `i <= k` of the tree it falls in once the
/// edges among `1..=k` are removed.
fn component_of(tree: &InfectionTree, k: u32) -> Result<Vec<Label>> {
    if k == 0 || k > tree.n() {
        return Err(Error::domain(format!("K = {k} must lie in 1..={}", tree.n())));
    }
    let mut comp = Vec::with_capacity(tree.n() as usize);
    for v in 1..=tree.n() {
        comp.push(if v <= k { v } else { comp[tree.parents()[v as usize - 1] as usize - 1] });
    }
    Ok(comp)
}

/// `|T_{i,K}|` for `i = 1..=K`: sizes of the trees left after removing the
/// edges among the first `K` vertices.
pub fn component_sizes(tree: &InfectionTree, k: u32) -> Result<Vec<u64>> {
    let comp = component_of(tree, k)?;
    let mut sizes = vec![0u64; k as usize];
    for c in comp {
        sizes[c as usize - 1] += 1;
    }
    Ok(sizes)
}

/// `E_{i,K}`: boundary edges leaving each of those trees, counted directly
/// from free host slots.
pub fn component_boundary(tree: &InfectionTree, k: u32) -> Result<Vec<u64>> {
    let comp = component_of(tree, k)?;
    let mut edges = vec![0u64; k as usize];
    for v in 1..=tree.n() {
        edges[comp[v as usize - 1] as usize - 1] += u64::from(tree.host_degree(v) - tree.degree(v));
    }
    Ok(edges)
}

/// Checks `E_{i,K} = (d-2)|T_{i,K}| - d_{T_K}(i) + 2` for every `i <= K`.
pub fn edge_size_identity(tree: &InfectionTree, k: u32) -> Result<bool> {
    let d = i64::from(regular_degree(tree.spec())?);
    let sizes = component_sizes(tree, k)?;
    let edges = component_boundary(tree, k)?;
    let prefix = tree.prefix(k)?;
    Ok((1..=k).all(|i| {
        let idx = i as usize - 1;
        let expect = (d - 2) * sizes[idx] as i64 - i64::from(prefix.degree(i)) + 2;
        edges[idx] as i64 == expect
    }))
}

/// `(|T_{1,K}|/n, ..., |T_{K,K}|/n)`.
pub fn subtree_proportions(tree: &InfectionTree, k: u32) -> Result<Vec<f64>> {
    regular_degree(tree.spec())?;
    let n = f64::from(tree.n());
    Ok(component_sizes(tree, k)?.into_iter().map(|s| s as f64 / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    pub alpha: Vec<f64>,
    /// Components whose vertex is saturated in `T_K` (parameter zero);
    /// these drop out of the limit.
    pub excluded: Vec<bool>,
}

/// Limit parameters `(d - d_{T_K}(i))/(d-2)` of the subtree proportions
/// given the first `K` vertices.
pub fn dirichlet_params(spec: GraphSpec, tree_k: &InfectionTree) -> Result<DirichletParams> {
    if spec != tree_k.spec() {
        return Err(Error::domain("tree does not live on this host"));
    }
    let d = regular_degree(spec)?;
    if d < 3 {
        return Err(Error::domain("Dirichlet limit needs d >= 3"));
    }
    let alpha: Vec<f64> = (1..=tree_k.n())
        .map(|i| f64::from(d - tree_k.degree(i)) / f64::from(d - 2))
        .collect();
    let excluded = alpha.iter().map(|&a| a == 0.0).collect();
    Ok(DirichletParams { alpha, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    MomentMatch,
    EmpiricalCdfDomination,
    PathwiseOrder,
}

/// Outcome of one empirical check: `pass` holds exactly when every
/// comparison is within its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCheckReport {
    pub statistic: Statistic,
    pub labels: Vec<String>,
    pub empirical: Vec<f64>,
    pub theoretical: Vec<f64>,
    pub tolerance: Vec<f64>,
    pub pass: bool,
    pub sample_size: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Raw per-trial statistic, for CSV output.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl LimitCheckReport {
    fn new(statistic: Statistic, sample_size: u64) -> Self {
        LimitCheckReport {
            statistic,
            labels: Vec::new(),
            empirical: Vec::new(),
            theoretical: Vec::new(),
            tolerance: Vec::new(),
            pass: true,
            sample_size,
            note: None,
            samples: Vec::new(),
        }
    }

    /// Two-sided comparison `|empirical - theoretical| <= tolerance`.
    fn close(&mut self, label: String, empirical: f64, theoretical: f64, tolerance: f64) {
        self.pass &= (empirical - theoretical).abs() <= tolerance;
        self.push(label, empirical, theoretical, tolerance);
    }

    /// One-sided comparison `empirical <= theoretical + tolerance`.
    fn at_most(&mut self, label: String, empirical: f64, theoretical: f64, tolerance: f64) {
        self.pass &= empirical <= theoretical + tolerance;
        self.push(label, empirical, theoretical, tolerance);
    }

    fn push(&mut self, label: String, empirical: f64, theoretical: f64, tolerance: f64) {
        self.labels.push(label);
        self.empirical.push(empirical);
        self.theoretical.push(theoretical);
        self.tolerance.push(tolerance);
    }
}

/// Per-trial observations from one simulated regular diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSample {
    /// `|T_{i,K}|/n` for `i = 1..=K`.
    pub proportions: Vec<f64>,
    /// Limit parameters given `T_K`.
    pub alpha: Vec<f64>,
    /// `|(T_n, 1)_{(j_1, ..., j_i)↓}|/n` along the probe path, `0` where the
    /// path vertex is not infected.
    pub path_fractions: Vec<f64>,
}

/// Simulates `trials` regular diffusions of size `n` (trial `i` seeded with
/// `derive_seed(seed, i)`) and records subtree proportions for the first `k`
/// vertices and subtree fractions along a probe path of `path_len` edges.
/// Runs on the current rayon pool.
pub fn sample_limits(d: u32, n: u32, k: u32, path_len: u32, trials: u64, seed: u64) -> Result<Vec<LimitSample>> {
    if k > n {
        return Err(Error::domain(format!("K = {k} exceeds n = {n}")));
    }
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut config = SimConfig::regular(d, n, derive_seed(seed, i));
            if path_len > 0 {
                config = config.with_probe(path_len);
            }
            let tree = simulate(&config).map_err(|e| Error::Trial { index: i, source: Box::new(e) })?;
            limit_sample(&tree, k, path_len)
        })
        .collect()
}

fn limit_sample(tree: &InfectionTree, k: u32, path_len: u32) -> Result<LimitSample> {
    let proportions = subtree_proportions(tree, k)?;
    let alpha = dirichlet_params(tree.spec(), &tree.prefix(k)?)?.alpha;
    let n = f64::from(tree.n());
    let sizes = tree.source_subtree_sizes();
    let probe = tree.probe();
    let path_fractions = (1..=path_len)
        .map(|i| {
            probe
                .and_then(|p| p.at(i))
                .map_or(0.0, |v| f64::from(sizes[v as usize - 1]) / n)
        })
        .collect();
    Ok(LimitSample { proportions, alpha, path_fractions })
}

fn se_of_mean(xs: &[f64]) -> f64 {
    let (_, var) = mean_var(xs);
    (var / xs.len() as f64).sqrt()
}

/// Moment matching of the subtree proportions against the Dirichlet limit.
///
/// The limit parameters depend on the random shape of `T_K`, so each
/// theoretical moment is the average of the conditional Dirichlet moments
/// `α_i/α_0` and `α_i(α_i+1)/(α_0(α_0+1))` over the trials. Each comparison
/// allows `slack` standard errors of the empirical mean.
pub fn dirichlet_moment_check(samples: &[LimitSample], slack: f64) -> LimitCheckReport {
    let mut report = LimitCheckReport::new(Statistic::MomentMatch, samples.len() as u64);
    let Some(first) = samples.first() else { return report };
    let k = first.proportions.len();
    for i in 0..k {
        let x: Vec<f64> = samples.iter().map(|s| s.proportions[i]).collect();
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        let (m1, m2) = (mean_var(&x).0, mean_var(&x2).0);
        let (mut t1, mut t2) = (0.0, 0.0);
        for s in samples {
            let a0: f64 = s.alpha.iter().sum();
            let a = s.alpha[i];
            t1 += a / a0;
            t2 += a * (a + 1.0) / (a0 * (a0 + 1.0));
        }
        t1 /= samples.len() as f64;
        t2 /= samples.len() as f64;
        report.close(format!("mean[{}]", i + 1), m1, t1, slack * se_of_mean(&x));
        report.close(format!("second_moment[{}]", i + 1), m2, t2, slack * se_of_mean(&x2));
    }
    report.samples = samples.iter().map(|s| s.proportions[0]).collect();
    report
}

/// Parameters of the `i`-th factor (1-based) of the Beta product along a
/// path: `Beta(1/(d-2), (d-1)/(d-2))` for the first, `Beta(1/(d-2), 1)`
/// after.
pub fn path_factor_params(d: u32, i: u32) -> (f64, f64) {
    let r = 1.0 / f64::from(d - 2);
    if i == 1 {
        (r, f64::from(d - 1) * r)
    } else {
        (r, 1.0)
    }
}

/// Draws `trials` rows of cumulative products `B_1, B_1 B_2, ...,
/// Π_{i<=ℓ} B_i` of independent path factors.
pub fn path_beta_sampler(d: u32, ell: u32, seed: u64, trials: u64) -> Result<Vec<Vec<f64>>> {
    if d < 3 || ell == 0 {
        return Err(Error::domain(format!("need d >= 3 and ell >= 1, got d = {d}, ell = {ell}")));
    }
    let factors: Vec<Beta<f64>> = (1..=ell)
        .map(|i| {
            let (a, b) = path_factor_params(d, i);
            Beta::new(a, b).map_err(|e| Error::domain(e.to_string()))
        })
        .collect::<Result<_>>()?;
    Ok((0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, t));
            let mut acc = 1.0;
            factors
                .iter()
                .map(|beta| {
                    acc *= beta.sample(&mut rng);
                    acc
                })
                .collect()
        })
        .collect())
}

fn beta_moments(a: f64, b: f64) -> (f64, f64) {
    let m = a / (a + b);
    (m, m * (a + 1.0) / (a + b + 1.0))
}

/// Compares the first two moments of the simulated path fractions at each
/// depth with those of the Beta product (`E[Π B_i] = Π E[B_i]` by
/// independence), within an absolute `tolerance`. The sample correlation
/// of the first two ratios `X_1` and `X_2/X_1` is reported as well and must
/// stay within `3/sqrt(N)` of zero.
pub fn path_fraction_check(samples: &[LimitSample], d: u32, tolerance: f64) -> LimitCheckReport {
    let mut report = LimitCheckReport::new(Statistic::MomentMatch, samples.len() as u64);
    let Some(first) = samples.first() else { return report };
    let depth = first.path_fractions.len();
    let (mut m1, mut m2) = (1.0, 1.0);
    for i in 0..depth {
        let (a, b) = path_factor_params(d, i as u32 + 1);
        let (f1, f2) = beta_moments(a, b);
        m1 *= f1;
        m2 *= f2;
        let x: Vec<f64> = samples.iter().map(|s| s.path_fractions[i]).collect();
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        report.close(format!("mean[{}]", i + 1), mean_var(&x).0, m1, tolerance);
        report.close(format!("second_moment[{}]", i + 1), mean_var(&x2).0, m2, tolerance);
    }
    if depth >= 2 {
        let pairs: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.path_fractions[0] > 0.0)
            .map(|s| (s.path_fractions[0], s.path_fractions[1] / s.path_fractions[0]))
            .collect();
        let corr = correlation(&pairs);
        let tol = 3.0 / (pairs.len().max(1) as f64).sqrt();
        report.close("corr(B1, B2)".to_owned(), corr, 0.0, tol);
    }
    report.samples = samples.iter().map(|s| s.path_fractions.first().copied().unwrap_or(0.0)).collect();
    report
}

fn correlation(pairs: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (mx, vx) = mean_var(&xs);
    let (my, vy) = mean_var(&ys);
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let cov = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0);
    cov / (vx * vy).sqrt()
}

/// Runs the coupled urns `F^{(d-1)}` and `F^{(d-2)}`, both started at one
/// ball and driven by the same uniforms: `F_i^{(j)}` gains `d-2` when
/// `U_i <= F_{i-1}^{(j)} / (1 + j + (i-1)(d-2))`.
///
/// Every trajectory must satisfy `F_i^{(d-1)} <= F_i^{(d-2)}` at every
/// step; the first violation, if any, is described in `note`. The report
/// also compares the normalised endpoints: for each `t` on the grid,
/// `P{F^{(d-1)}/(d + n(d-2)) >= t}` must not exceed the same probability
/// for `F^{(d-2)}/(d-1 + n(d-2))`.
pub fn coupled_dominance_check(d: u32, steps: u32, trials: u64, seed: u64) -> Result<LimitCheckReport> {
    if d < 3 {
        return Err(Error::domain(format!("need d >= 3, got {d}")));
    }
    let inc = u64::from(d - 2);
    let runs: Vec<(u64, u64, Option<u32>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, t));
            let (mut big, mut small) = (1u64, 1u64);
            let mut violation = None;
            for i in 1..=u64::from(steps) {
                let u: f64 = rng.random();
                let base = (i - 1) * inc;
                if u <= big as f64 / (1 + u64::from(d - 1) + base) as f64 {
                    big += inc;
                }
                if u <= small as f64 / (1 + u64::from(d - 2) + base) as f64 {
                    small += inc;
                }
                if big > small && violation.is_none() {
                    violation = Some(i as u32);
                }
            }
            (big, small, violation)
        })
        .collect();

    let mut report = LimitCheckReport::new(Statistic::PathwiseOrder, trials);
    let violations = runs.iter().filter(|r| r.2.is_some()).count();
    report.at_most("violations".to_owned(), violations as f64, 0.0, 0.0);
    if let Some((t, r)) = runs.iter().enumerate().find(|(_, r)| r.2.is_some()) {
        report.note = Some(format!(
            "trial {t}: first violation at step {}, final F = ({}, {})",
            r.2.unwrap_or(0),
            r.0,
            r.1
        ));
    }
    let n = u64::from(steps);
    let norm_big = (u64::from(d) + n * inc) as f64;
    let norm_small = (u64::from(d - 1) + n * inc) as f64;
    for t in [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9] {
        let tail_big = runs.iter().filter(|r| r.0 as f64 / norm_big >= t).count() as f64;
        let tail_small = runs.iter().filter(|r| r.1 as f64 / norm_small >= t).count() as f64;
        let m = trials.max(1) as f64;
        report.at_most(format!("tail@{t}"), tail_big / m, tail_small / m, 0.0);
    }
    report.samples = runs.iter().map(|r| r.0 as f64 / norm_big).collect();
    Ok(report)
}

/// One draw of `B = Π_i min(S_i, 1)` with `S_i` the partial sums of
/// `-ln B_k`, i.i.d. exponential with mean `d-2`. Only the partial sums
/// below one contribute, so the product is finite.
pub fn sample_tail_product<R: Rng + ?Sized>(d: u32, rng: &mut R) -> f64 {
    let mean = f64::from(d - 2);
    let mut sum = 0.0;
    let mut product = 1.0;
    loop {
        let u: f64 = rng.random();
        sum += -mean * (-u).ln_1p();
        if sum > 1.0 {
            return product;
        }
        product *= sum;
    }
}

/// Empirical `P{B <= s}` at each `s` against `6 s^{1/4}`, allowing three
/// binomial standard errors.
pub fn product_tail_check(d: u32, trials: u64, s_grid: &[f64], seed: u64) -> Result<LimitCheckReport> {
    if d < 3 {
        return Err(Error::domain(format!("need d >= 3, got {d}")));
    }
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| sample_tail_product(d, &mut rng_from_seed(derive_seed(seed, t))))
        .collect();
    let mut report = LimitCheckReport::new(Statistic::EmpiricalCdfDomination, trials);
    for &s in s_grid {
        let hits = samples.iter().filter(|&&b| b <= s).count() as u64;
        let p = hits as f64 / trials.max(1) as f64;
        report.at_most(format!("P(B<={s})"), p, 6.0 * s.powf(0.25), 3.0 * binomial_se(p, trials));
    }
    report.samples = samples;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn urn_draw_adds_replacement() {
        let mut urn = UrnState::new(vec![1, 2], 1).unwrap();
        let mut rng = rng_from_seed(1);
        let before = urn.total();
        urn.draw(&mut rng);
        assert_eq!(urn.total(), before + 1);
        assert!(UrnState::new(vec![0, 0], 1).is_err());
    }

    #[test]
    fn sequence_probability_small() {
        let urn = UrnState::new(vec![1, 1], 1).unwrap();
        assert_eq!(urn.sequence_probability(&[0, 0]).unwrap(), (2, 6));
        assert_eq!(urn.sequence_probability(&[0, 1]).unwrap(), (1, 6));
        assert!(urn.sequence_probability(&[2]).is_err());
    }

    #[test]
    fn proportions_on_a_path_host() {
        let cfg = SimConfig::regular(2, 6, 3);
        let tree = simulate(&cfg).unwrap();
        assert_eq!(subtree_proportions(&tree, 1).unwrap(), vec![1.0]);
        assert!(subtree_proportions(&tree, 6).unwrap().iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-15));
        assert!(subtree_proportions(&tree, 7).is_err());
    }

    #[test]
    fn dirichlet_params_examples() {
        let edge = |d| InfectionTree::from_parents(GraphSpec::Regular { d }, &[None, Some(1)]).unwrap();
        let p = dirichlet_params(GraphSpec::Regular { d: 3 }, &edge(3)).unwrap();
        assert_eq!(p.alpha, vec![2.0, 2.0]);
        let p = dirichlet_params(GraphSpec::Regular { d: 4 }, &edge(4)).unwrap();
        assert_eq!(p.alpha, vec![1.5, 1.5]);
        assert!(dirichlet_params(GraphSpec::Regular { d: 4 }, &edge(3)).is_err());
        let star = InfectionTree::from_parents(GraphSpec::Regular { d: 3 }, &[None, Some(1), Some(1), Some(1)]).unwrap();
        let p = dirichlet_params(GraphSpec::Regular { d: 3 }, &star).unwrap();
        assert_eq!(p.alpha, vec![0.0, 2.0, 2.0, 2.0]);
        assert_eq!(p.excluded, vec![true, false, false, false]);
    }

    #[test]
    fn edge_size_identity_on_simulated_trees() {
        for (d, seed) in [(3, 1), (4, 2), (7, 3)] {
            let tree = simulate(&SimConfig::regular(d, 500, seed)).unwrap();
            for k in [1, 2, 5, 50, 500] {
                assert!(edge_size_identity(&tree, k).unwrap());
            }
        }
    }

    #[test]
    fn factor_params() {
        assert_eq!(path_factor_params(3, 1), (1.0, 2.0));
        assert_eq!(path_factor_params(3, 2), (1.0, 1.0));
        assert_eq!(path_factor_params(4, 1), (0.5, 1.5));
    }

    #[test]
    fn coupled_urns_start_equal() {
        let r = coupled_dominance_check(3, 0, 10, 1).unwrap();
        assert!(r.pass);
        assert!(r.samples.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn tail_product_in_unit_interval() {
        let mut rng = rng_from_seed(5);
        for _ in 0..10_000 {
            let b = sample_tail_product(3, &mut rng);
            assert!(b > 0.0 && b <= 1.0);
        }
    }
}

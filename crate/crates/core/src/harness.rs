//! Monte Carlo campaigns: repeated simulate → score → confidence-set runs,
//! aggregated into failure rates with Wilson intervals and paired with the
//! matching theoretical bound.
//!
//! Trial `i` is simulated from `derive_seed(base_seed, i)` and contributes
//! integer counts only, so results do not depend on the number of workers
//! or on scheduling.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bounds::{bound_cor2, bound_prop2, bound_theorem1_opt, bound_theorem2, BoundReport};
use crate::confidence::{confset_glued, confset_psi};
use crate::diffusion::{simulate, SimConfig, SourcePlacement};
use crate::error::{Error, Result};
use crate::estimators::{rumor_centers, score_all};
use crate::seed::derive_seed;
use crate::stats::{wilson, Z95};
use crate::tree::{GraphSpec, InfectionTree, PathLabel};

/// Environment variable that overrides the worker count.
pub const WORKERS_ENV: &str = "RUMOR_SOURCE_WORKERS";

/// Worker count from [`WORKERS_ENV`] if set to a positive integer, else
/// `fallback`.
pub fn workers_from_env(fallback: usize) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&w: &usize| w > 0)
        .unwrap_or(fallback)
}

/// Host vertex whose `φ` is compared with the source's.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventTarget {
    /// The first host vertex at this distance in child-index order.
    Distance(u32),
    /// A specific host vertex. All vertices at one distance are
    /// exchangeable, so only the length of the path matters.
    Path(PathLabel),
}

impl EventTarget {
    pub fn distance(&self) -> u32 {
        match self {
            EventTarget::Distance(l) => *l,
            EventTarget::Path(p) => p.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Failure: the source is not among the `k` smallest `ψ`.
    PsiTopK { k: u32 },
    /// Failure: the source is farther than `radius` from every rumor center.
    PhiBall { radius: u32 },
    /// Failure: the source is outside the union of the per-half balls.
    GluedUnion { radius: u32 },
    /// Event: the target is infected and `φ(target) <= φ(1)`.
    #[serde(rename = "event_phi_v_leq_1")]
    EventPhiVleq1 { target: EventTarget },
    /// Event: the large-side bridge end is infected and `φ(v^*) < φ(1)`.
    BridgePhiBeatsSource,
    /// Event: the large-side bridge end is infected and `ψ(v^*) < ψ(1)`.
    BridgePsiBeatsSource,
}

impl Method {
    pub fn id(&self) -> &'static str {
        match self {
            Method::PsiTopK { .. } => "psi_top_k",
            Method::PhiBall { .. } => "phi_ball",
            Method::GluedUnion { .. } => "glued_union",
            Method::EventPhiVleq1 { .. } => "event_phi_v_leq_1",
            Method::BridgePhiBeatsSource => "bridge_phi_beats_source",
            Method::BridgePsiBeatsSource => "bridge_psi_beats_source",
        }
    }

    pub fn param(&self) -> String {
        match self {
            Method::PsiTopK { k } => k.to_string(),
            Method::PhiBall { radius } | Method::GluedUnion { radius } => radius.to_string(),
            Method::EventPhiVleq1 { target: EventTarget::Distance(l) } => l.to_string(),
            Method::EventPhiVleq1 { target: EventTarget::Path(p) } => {
                p.0.iter().map(u32::to_string).collect::<Vec<_>>().join("-")
            }
            Method::BridgePhiBeatsSource | Method::BridgePsiBeatsSource => String::new(),
        }
    }

    fn validate(&self, spec: GraphSpec) -> Result<()> {
        let glued = spec.is_glued();
        match self {
            Method::PsiTopK { k: 0 } => Err(Error::domain("PsiTopK needs k >= 1")),
            Method::GluedUnion { .. } | Method::BridgePhiBeatsSource | Method::BridgePsiBeatsSource if !glued => {
                Err(Error::domain(format!("{} needs a glued host", self.id())))
            }
            Method::EventPhiVleq1 { target } if glued || target.distance() == 0 => Err(Error::domain(
                "EventPhiVleq1 needs a regular host and a target at distance >= 1",
            )),
            _ => Ok(()),
        }
    }

    /// The theoretical bound this method's rate is compared with, where one
    /// applies.
    pub fn bound(&self, spec: GraphSpec) -> Option<BoundReport> {
        match (self, spec) {
            (Method::PsiTopK { k }, GraphSpec::Regular { d }) => bound_theorem1_opt(d, *k).ok().map(|r| r.1),
            (Method::PhiBall { radius }, GraphSpec::Regular { d }) => bound_cor2(d, *radius).ok(),
            (Method::GluedUnion { radius }, GraphSpec::Glued { d, big_d }) => bound_prop2(d, big_d, *radius).ok(),
            (Method::EventPhiVleq1 { target }, GraphSpec::Regular { d }) => bound_theorem2(d, target.distance()).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    /// Template; trial `i` runs with seed `derive_seed(sim.seed, i)`.
    pub sim: SimConfig,
    pub trials: u64,
    /// Sizes at which each trajectory is evaluated. Empty means `[sim.n]`.
    #[serde(default)]
    pub checkpoints: Vec<u32>,
    pub methods: Vec<Method>,
}

impl Campaign {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if self.trials == 0 {
            return Err(Error::domain("a campaign needs at least one trial"));
        }
        let cps = self.checkpoints();
        if cps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("checkpoints must be strictly ascending"));
        }
        if cps[0] == 0 || *cps.last().unwrap_or(&0) > self.sim.n {
            return Err(Error::domain(format!("checkpoints must lie in 1..={}", self.sim.n)));
        }
        self.methods.iter().try_for_each(|m| m.validate(self.sim.spec))
    }

    pub fn checkpoints(&self) -> Vec<u32> {
        if self.checkpoints.is_empty() {
            vec![self.sim.n]
        } else {
            self.checkpoints.clone()
        }
    }

    /// Configuration of trial `index`, with a probe path long enough for
    /// every `φ` event.
    pub fn trial_config(&self, index: u64) -> SimConfig {
        let mut cfg = self.sim.clone().with_seed(derive_seed(self.sim.seed, index));
        cfg.n = *self.checkpoints().last().unwrap_or(&self.sim.n);
        let probe = self
            .methods
            .iter()
            .filter_map(|m| match m {
                Method::EventPhiVleq1 { target } => Some(target.distance()),
                _ => None,
            })
            .max();
        if let Some(len) = probe {
            cfg.probe_length = Some(len.max(cfg.probe_length.unwrap_or(0)));
        }
        cfg
    }
}

/// Outcome of one method on one tree: `true` is a failure (or, for the
/// event methods, an occurrence).
pub fn evaluate(method: &Method, tree: &InfectionTree) -> Result<bool> {
    let table = score_all(tree);
    evaluate_scored(method, tree, &table)
}

fn evaluate_scored(method: &Method, tree: &InfectionTree, table: &crate::estimators::ScoreTable) -> Result<bool> {
    Ok(match method {
        Method::PsiTopK { k } => !confset_psi(table, (*k).min(tree.n()))?.contains(1),
        Method::PhiBall { radius } => {
            let mut nearest = u32::MAX;
            for c in rumor_centers(table) {
                nearest = nearest.min(tree.distance(1, c)?);
            }
            nearest > *radius
        }
        Method::GluedUnion { radius } => !confset_glued(tree, *radius)?.contains(1),
        Method::EventPhiVleq1 { target } => match tree.probe().and_then(|p| p.at(target.distance())) {
            Some(v) => table.cmp_phi(tree, v, 1) != Ordering::Greater,
            None => false,
        },
        Method::BridgePhiBeatsSource => match tree.bridge().large_end {
            Some(v) => table.cmp_phi(tree, v, 1) == Ordering::Less,
            None => false,
        },
        Method::BridgePsiBeatsSource => match tree.bridge().large_end {
            Some(v) => table.psi(v) < table.psi(1),
            None => false,
        },
    })
}

/// Outcomes of trial `index`, ordered by method then checkpoint.
pub fn run_trial(campaign: &Campaign, index: u64) -> Result<Vec<bool>> {
    let wrap = |e: Error| Error::Trial { index, source: Box::new(e) };
    let full = simulate(&campaign.trial_config(index)).map_err(wrap)?;
    let cps = campaign.checkpoints();
    let mut per_checkpoint = Vec::with_capacity(cps.len());
    for &n in &cps {
        let tree = if n == full.n() { full.clone() } else { full.prefix(n).map_err(wrap)? };
        let table = score_all(&tree);
        let outcomes = campaign
            .methods
            .iter()
            .map(|m| evaluate_scored(m, &tree, &table))
            .collect::<Result<Vec<_>>>()
            .map_err(wrap)?;
        per_checkpoint.push(outcomes);
    }
    Ok((0..campaign.methods.len())
        .flat_map(|m| per_checkpoint.iter().map(move |o| o[m]))
        .collect())
}

/// One CSV row: one method at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub param: String,
    pub n: u32,
    pub trials: u64,
    pub failures: u64,
    pub fail_rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    #[serde(with = "opt_nonfinite")]
    pub bound_raw: Option<f64>,
    pub bound_clamped: Option<f64>,
    pub vacuous: Option<bool>,
}

impl ResultRow {
    /// Half-width of the Wilson interval.
    pub fn wilson_radius(&self) -> f64 {
        (self.wilson_hi - self.wilson_lo) / 2.0
    }

    /// `fail_rate <= clamped bound + slack · radius`; `None` without a bound.
    pub fn within_bound(&self, slack: f64) -> Option<bool> {
        self.bound_clamped
            .map(|b| self.fail_rate <= b + slack * self.wilson_radius())
    }
}

mod opt_nonfinite {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match x {
            Some(v) if v.is_finite() => s.serialize_some(v),
            Some(v) => s.serialize_some(&v.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(v)) => Ok(Some(v)),
            Some(Repr::Text(t)) => t.parse().map(Some).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub campaign: Campaign,
    pub rows: Vec<ResultRow>,
    pub wall_time_secs: f64,
}

impl CampaignResult {
    pub fn row(&self, method: &Method, n: u32) -> Option<&ResultRow> {
        let (id, param) = (method.id(), method.param());
        self.rows.iter().find(|r| r.method == id && r.param == param && r.n == n)
    }
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))
}

/// Runs every trial on a pool of `workers` threads and aggregates.
pub fn run_campaign(campaign: &Campaign, workers: usize) -> Result<CampaignResult> {
    campaign.validate()?;
    let start = Instant::now();
    let cps = campaign.checkpoints();
    let cells = campaign.methods.len() * cps.len();
    let counts = worker_pool(workers)?.install(|| {
        (0..campaign.trials)
            .into_par_iter()
            .map(|i| run_trial(campaign, i))
            .try_fold(
                || vec![0u64; cells],
                |mut acc, outcome| {
                    for (a, hit) in acc.iter_mut().zip(outcome?) {
                        *a += u64::from(hit);
                    }
                    Ok::<_, Error>(acc)
                },
            )
            .try_reduce(
                || vec![0u64; cells],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    Ok(a)
                },
            )
    })?;

    let mut rows = Vec::with_capacity(cells);
    for (m, method) in campaign.methods.iter().enumerate() {
        let bound = method.bound(campaign.sim.spec);
        for (c, &n) in cps.iter().enumerate() {
            let failures = counts[m * cps.len() + c];
            let w = wilson(failures, campaign.trials, Z95);
            rows.push(ResultRow {
                method: method.id().to_owned(),
                param: method.param(),
                n,
                trials: campaign.trials,
                failures,
                fail_rate: failures as f64 / campaign.trials as f64,
                wilson_lo: w.lo,
                wilson_hi: w.hi,
                bound_raw: bound.as_ref().map(|b| b.raw),
                bound_clamped: bound.as_ref().map(|b| b.clamped),
                vacuous: bound.as_ref().map(|b| b.vacuous),
            });
        }
    }
    Ok(CampaignResult {
        campaign: campaign.clone(),
        rows,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Frequencies of `φ(v^*) < φ(1)` and `ψ(v^*) < ψ(1)` on the glued host,
/// source at the default placement, at each checkpoint.
pub fn prop1_experiment(d: u32, big_d: u32, checkpoints: &[u32], trials: u64, seed: u64, workers: usize) -> Result<CampaignResult> {
    let n = checkpoints.iter().copied().max().unwrap_or(1);
    let campaign = Campaign {
        sim: SimConfig::glued(d, big_d, n, seed, SourcePlacement::default()),
        trials,
        checkpoints: checkpoints.to_vec(),
        methods: vec![Method::BridgePhiBeatsSource, Method::BridgePsiBeatsSource],
    };
    run_campaign(&campaign, workers)
}

/// Failure rate of the split confidence set on the glued host.
pub fn prop2_experiment(d: u32, big_d: u32, n: u32, radius: u32, trials: u64, seed: u64, workers: usize) -> Result<CampaignResult> {
    if radius < 2 {
        return Err(Error::domain(format!("need L >= 2, got {radius}")));
    }
    let campaign = Campaign {
        sim: SimConfig::glued(d, big_d, n, seed, SourcePlacement::default()),
        trials,
        checkpoints: Vec::new(),
        methods: vec![Method::GluedUnion { radius }],
    };
    run_campaign(&campaign, workers)
}

pub const CSV_HEADER: &str = "method,param,n,trials,fail_rate,wilson_lo,wilson_hi,bound_raw,bound_clamped,vacuous";

/// The result table as CSV. Deterministic given the rows; wall time is not
/// included.
pub fn to_csv(result: &CampaignResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.param,
            r.n,
            r.trials,
            r.fail_rate,
            r.wilson_lo,
            r.wilson_hi,
            opt(r.bound_raw),
            opt(r.bound_clamped),
            r.vacuous.map_or(String::new(), |v| v.to_string()),
        );
    }
    out
}

/// Writes `results.csv` and `results.json` into `dir`, creating it if
/// needed. Returns both paths.
pub fn emit(result: &CampaignResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("results.csv");
    let json = dir.join("results.json");
    std::fs::write(&csv, to_csv(result)).map_err(|e| Error::io(&csv, e))?;
    std::fs::write(&json, serde_json::to_string_pretty(result)?).map_err(|e| Error::io(&json, e))?;
    Ok((csv, json))
}

pub fn load_result(path: &Path) -> Result<CampaignResult> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_campaign(path: &Path) -> Result<Campaign> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

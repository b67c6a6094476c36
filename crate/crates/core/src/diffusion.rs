//! Discrete-time diffusion: each step infects the far end of a boundary edge
//! chosen uniformly among all edges from the infected set to uninfected
//! host vertices.
//!
//! Boundary edges live in a flat slot list holding one entry (the owning
//! infected vertex) per edge, so a step is an O(1) uniform draw followed by a
//! swap-remove. One further edge may be "special": it leads to the next
//! vertex of a tracked host path (towards the bridge of a glued host, or
//! along a probe path whose end is a fixed host vertex at a given distance).
//! A vertex's free edges are exchangeable, so singling one out does not
//! change the law of the diffusion.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::tree::{Bridge, GraphSpec, InfectionTree, Label, Probe, Side};

/// Where the source sits in a glued host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourcePlacement {
    /// Small half, adjacent to `v_*`.
    InDHalf,
    /// Large half, adjacent to `v^*`.
    InDCapitalHalf,
    /// Small half at host distance `k` from `v_*` (`k = 0` puts the source on `v_*`).
    AtBridgeDistance(u32),
}

impl Default for SourcePlacement {
    fn default() -> Self {
        SourcePlacement::AtBridgeDistance(1)
    }
}

impl SourcePlacement {
    /// Side of the source and its host distance to the bridge endpoint on that side.
    pub fn resolve(self) -> (Side, u32) {
        match self {
            SourcePlacement::InDHalf => (Side::Small, 1),
            SourcePlacement::InDCapitalHalf => (Side::Large, 1),
            SourcePlacement::AtBridgeDistance(k) => (Side::Small, k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub spec: GraphSpec,
    pub n: u32,
    pub seed: u64,
    /// Glued hosts only.
    #[serde(default)]
    pub placement: SourcePlacement,
    /// Track a fixed host path of this many edges from the source (regular
    /// hosts only); its infected prefix is recorded in the tree's probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_length: Option<u32>,
}

impl SimConfig {
    pub fn regular(d: u32, n: u32, seed: u64) -> Self {
        SimConfig {
            spec: GraphSpec::Regular { d },
            n,
            seed,
            placement: SourcePlacement::default(),
            probe_length: None,
        }
    }

    pub fn glued(d: u32, big_d: u32, n: u32, seed: u64, placement: SourcePlacement) -> Self {
        SimConfig {
            spec: GraphSpec::Glued { d, big_d },
            n,
            seed,
            placement,
            probe_length: None,
        }
    }

    pub fn with_probe(mut self, length: u32) -> Self {
        self.probe_length = Some(length);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.n == 0 {
            return Err(Error::domain("n must be at least 1"));
        }
        if self.n == u32::MAX {
            return Err(Error::domain("n too large"));
        }
        if self.spec.is_glued() && self.probe_length.is_some() {
            return Err(Error::domain("probe paths are only supported on regular hosts"));
        }
        Ok(())
    }

    /// Host vertices of the tracked path as `(side, host degree)`, source first.
    fn tracked_path(&self) -> Vec<(Side, u32)> {
        match self.spec {
            GraphSpec::Regular { d } => {
                vec![(Side::Small, d); self.probe_length.map_or(1, |l| l as usize + 1)]
            }
            GraphSpec::Glued { .. } => {
                let (side, k) = self.placement.resolve();
                let base = self.spec.base_degree(side);
                let mut path = vec![(side, base); k as usize];
                path.push((side, base + 1));
                path.push((side.other(), self.spec.base_degree(side.other()) + 1));
                path
            }
        }
    }
}

struct Growth<R> {
    rng: R,
    spec: GraphSpec,
    plan: Vec<(Side, u32)>,
    parent: Vec<Label>,
    side: Vec<Side>,
    /// One entry per ordinary boundary edge, holding the infected endpoint.
    slots: Vec<Label>,
    /// Infected endpoint of the special edge leading along the tracked path.
    special: Option<Label>,
    /// Labels of the infected prefix of the tracked path.
    path: Vec<Label>,
}

impl<R: Rng> Growth<R> {
    fn start(config: &SimConfig, rng: R) -> Self {
        let plan = config.tracked_path();
        let mut g = Growth {
            rng,
            spec: config.spec,
            plan,
            parent: Vec::with_capacity(config.n as usize),
            side: Vec::new(),
            slots: Vec::new(),
            special: None,
            path: Vec::new(),
        };
        let (side, degree) = g.plan[0];
        g.add(0, side, degree, true);
        g
    }

    fn add(&mut self, parent: Label, side: Side, host_degree: u32, on_path: bool) {
        self.parent.push(parent);
        if self.spec.is_glued() {
            self.side.push(side);
        }
        let label = self.parent.len() as Label;
        let mut free = host_degree - u32::from(parent != 0);
        if on_path {
            self.path.push(label);
            if self.path.len() < self.plan.len() && free > 0 {
                self.special = Some(label);
                free -= 1;
            }
        }
        self.slots.extend(std::iter::repeat_n(label, free as usize));
    }

    fn step(&mut self) {
        let total = self.slots.len() + usize::from(self.special.is_some());
        debug_assert!(total > 0, "boundary is never empty on an infinite host");
        let r = self.rng.random_range(0..total);
        if r == self.slots.len() {
            let owner = self.special.take().expect("special edge present");
            let (side, degree) = self.plan[self.path.len()];
            self.add(owner, side, degree, true);
        } else {
            let owner = self.slots.swap_remove(r);
            let side = if self.spec.is_glued() { self.side[owner as usize - 1] } else { Side::Small };
            self.add(owner, side, self.spec.base_degree(side), false);
        }
    }

    fn boundary(&self) -> u64 {
        (self.slots.len() + usize::from(self.special.is_some())) as u64
    }

    fn finish(self, config: &SimConfig) -> Result<InfectionTree> {
        let (bridge, probe) = match config.spec {
            GraphSpec::Glued { .. } => {
                let (source_side, k) = config.placement.resolve();
                let near = self.path.get(k as usize).copied();
                let far = self.path.get(k as usize + 1).copied();
                let bridge = match source_side {
                    Side::Small => Bridge { small_end: near, large_end: far },
                    Side::Large => Bridge { small_end: far, large_end: near },
                };
                (bridge, None)
            }
            GraphSpec::Regular { .. } => {
                let probe = config.probe_length.map(|length| Probe { length, path: self.path });
                (Bridge::default(), probe)
            }
        };
        InfectionTree::build(config.spec, self.parent, self.side, bridge, probe)
    }
}

/// Runs the diffusion until `config.n` vertices are infected.
///
/// The result depends only on `config`: the generator is seeded from
/// `config.seed` and no other state is consulted.
pub fn simulate(config: &SimConfig) -> Result<InfectionTree> {
    config.validate()?;
    let mut g = Growth::start(config, rng_from_seed(config.seed));
    for _ in 1..config.n {
        g.step();
    }
    g.finish(config)
}

/// One trajectory observed at several sizes: snapshot `i` holds the first
/// `checkpoints[i]` arrivals of a single run.
pub fn simulate_stream(config: &SimConfig, checkpoints: &[u32]) -> Result<Vec<InfectionTree>> {
    config.validate()?;
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain("checkpoints must be sorted ascending"));
    }
    let Some(&last) = checkpoints.last() else { return Ok(Vec::new()) };
    if checkpoints[0] == 0 {
        return Err(Error::domain("checkpoint sizes must be at least 1"));
    }
    if last > config.n {
        return Err(Error::domain(format!("checkpoint {last} exceeds n = {}", config.n)));
    }
    let full = simulate(&SimConfig { n: last, ..config.clone() })?;
    checkpoints.iter().map(|&k| full.prefix(k)).collect()
}

/// Boundary sizes seen while growing a tree: entry `k - 1` is the number of
/// boundary edges when `k` vertices are infected.
pub fn boundary_trace(config: &SimConfig) -> Result<Vec<u64>> {
    config.validate()?;
    let mut g = Growth::start(config, rng_from_seed(config.seed));
    let mut trace = vec![g.boundary()];
    for _ in 1..config.n {
        g.step();
        trace.push(g.boundary());
    }
    Ok(trace)
}

/// One half of a split glued tree, with labels re-indexed to arrival order
/// inside the half.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfTree {
    pub tree: InfectionTree,
    /// `to_original[i]` is the original label of half-label `i + 1`.
    pub to_original: Vec<Label>,
}

impl HalfTree {
    pub fn original(&self, half_label: Label) -> Label {
        self.to_original[half_label as usize - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GluedSplit {
    /// Part of the diffusion inside the `d`-regular half.
    pub small: HalfTree,
    /// Part of the diffusion inside the `D`-regular half.
    pub large: HalfTree,
}

/// Splits a glued diffusion into its two halves. Each half is a diffusion on
/// a regular tree in its own right; a half the diffusion has not entered
/// comes back empty.
pub fn split_glued(tree: &InfectionTree) -> Result<GluedSplit> {
    let GraphSpec::Glued { d, big_d } = tree.spec() else {
        return Err(Error::domain("split_glued needs a glued tree"));
    };
    let n = tree.n() as usize;
    let mut new_label = vec![0 as Label; n];
    let mut parts: [(Vec<Label>, Vec<Label>); 2] = Default::default();
    for v in 1..=tree.n() {
        let idx = usize::from(tree.side(v) == Side::Large);
        let (parents, originals) = &mut parts[idx];
        originals.push(v);
        new_label[v as usize - 1] = originals.len() as Label;
        let p = match tree.parent(v) {
            Some(p) if tree.side(p) == tree.side(v) => new_label[p as usize - 1],
            _ => 0,
        };
        parents.push(p);
    }
    let [(small_parents, small_orig), (large_parents, large_orig)] = parts;
    let half = |spec: GraphSpec, parents: Vec<Label>, orig: Vec<Label>| -> Result<HalfTree> {
        let tree = if parents.is_empty() {
            InfectionTree::empty(spec)
        } else {
            InfectionTree::build(spec, parents, Vec::new(), Bridge::default(), None)?
        };
        Ok(HalfTree { tree, to_original: orig })
    };
    Ok(GluedSplit {
        small: half(GraphSpec::Regular { d }, small_parents, small_orig)?,
        large: half(GraphSpec::Regular { d: big_d }, large_parents, large_orig)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_node() {
        for spec in [GraphSpec::Regular { d: 3 }, GraphSpec::Glued { d: 3, big_d: 5 }] {
            let t = simulate(&SimConfig { spec, n: 1, seed: 9, placement: Default::default(), probe_length: None }).unwrap();
            assert_eq!(t.n(), 1);
            assert_eq!(t.parent(1), None);
        }
    }

    #[test]
    fn boundary_count_d3_n5() {
        let t = simulate(&SimConfig::regular(3, 5, 42)).unwrap();
        assert_eq!(t.boundary_count(), 7);
        let trace = boundary_trace(&SimConfig::regular(3, 5, 42)).unwrap();
        assert_eq!(trace, vec![3, 4, 5, 6, 7]);
    }

    #[test]
    fn reproducible() {
        let c = SimConfig::regular(4, 2000, 11);
        assert_eq!(simulate(&c).unwrap(), simulate(&c).unwrap());
        assert_ne!(simulate(&c).unwrap(), simulate(&c.clone().with_seed(12)).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(simulate(&SimConfig::regular(3, 0, 1)).is_err());
        assert!(simulate(&SimConfig::regular(1, 5, 1)).is_err());
        assert!(simulate(&SimConfig::glued(3, 3, 5, 1, SourcePlacement::default())).is_err());
        let probe_on_glued = SimConfig::glued(3, 4, 5, 1, SourcePlacement::default()).with_probe(3);
        assert!(simulate(&probe_on_glued).is_err());
    }

    #[test]
    fn stream_single_checkpoint() {
        let snaps = simulate_stream(&SimConfig::regular(3, 10, 1), &[1]).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].n(), 1);
    }

    #[test]
    fn stream_prefix_property() {
        let c = SimConfig::regular(3, 500, 5);
        let snaps = simulate_stream(&c, &[50, 500]).unwrap();
        assert_eq!(snaps[0], snaps[1].prefix(50).unwrap());
        assert_eq!(snaps[1], simulate(&c).unwrap());
    }

    #[test]
    fn stream_rejects_unsorted() {
        let c = SimConfig::regular(3, 500, 5);
        assert!(matches!(simulate_stream(&c, &[100, 50]), Err(Error::Domain(_))));
        assert!(matches!(simulate_stream(&c, &[100, 600]), Err(Error::Domain(_))));
    }

    #[test]
    fn line_host() {
        let t = simulate(&SimConfig::regular(2, 50, 3)).unwrap();
        assert!((1..=50).all(|v| t.degree(v) <= 2));
        assert_eq!(t.boundary_count(), 2);
    }

    #[test]
    fn glued_bridge_metadata() {
        let c = SimConfig::glued(3, 4, 400, 17, SourcePlacement::AtBridgeDistance(0));
        let t = simulate(&c).unwrap();
        assert_eq!(t.bridge().small_end, Some(1));
        assert_eq!(t.host_degree(1), 4);
        if let Some(l) = t.bridge().large_end {
            assert_eq!(t.parent(l), Some(1));
            assert_eq!(t.side(l), Side::Large);
            assert_eq!(t.host_degree(l), 5);
        }
    }

    #[test]
    fn split_regular_is_error() {
        let t = simulate(&SimConfig::regular(3, 10, 1)).unwrap();
        assert!(matches!(split_glued(&t), Err(Error::Domain(_))));
    }

    #[test]
    fn split_one_sided() {
        let c = SimConfig::glued(3, 6, 1, 1, SourcePlacement::default());
        let t = simulate(&c).unwrap();
        let s = split_glued(&t).unwrap();
        assert_eq!(s.small.tree.n(), 1);
        assert!(s.large.tree.is_empty());
    }
}

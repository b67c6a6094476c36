//! The infected subtree of an implicit, infinite host tree.
//!
//! Vertices are labelled `1..=n` in order of infection, so every non-source
//! vertex has a parent with a smaller label. The host tree is never
//! materialised: each infected vertex only knows its host degree, and the
//! uninfected frontier exists as `host_degree - tree_degree` free slots.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1-based arrival label.
pub type Label = u32;

/// The host graph the diffusion runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphSpec {
    /// Every vertex has `d` neighbours. `d = 2` (a line) is accepted for
    /// simulation only; the estimator guarantees need `d >= 3`.
    Regular { d: u32 },
    /// A `d`-regular and a `D`-regular tree joined by one bridge edge
    /// between `v_*` (small side) and `v^*` (large side).
    Glued {
        d: u32,
        #[serde(rename = "D")]
        big_d: u32,
    },
}

impl GraphSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GraphSpec::Regular { d } if d < 2 => {
                Err(Error::domain(format!("regular spec needs d >= 2, got {d}")))
            }
            GraphSpec::Glued { d, big_d } if d < 3 || big_d <= d => Err(Error::domain(format!(
                "glued spec needs 3 <= d < D, got d = {d}, D = {big_d}"
            ))),
            _ => Ok(()),
        }
    }

    /// True when the source-estimation guarantees apply (`d >= 3`).
    pub fn supports_theory(&self) -> bool {
        match *self {
            GraphSpec::Regular { d } => d >= 3,
            GraphSpec::Glued { .. } => true,
        }
    }

    /// Degree of an ordinary (non-bridge) host vertex on `side`.
    pub fn base_degree(&self, side: Side) -> u32 {
        match (*self, side) {
            (GraphSpec::Regular { d }, _) => d,
            (GraphSpec::Glued { d, .. }, Side::Small) => d,
            (GraphSpec::Glued { big_d, .. }, Side::Large) => big_d,
        }
    }

    pub fn is_glued(&self) -> bool {
        matches!(self, GraphSpec::Glued { .. })
    }
}

/// Half of a glued host graph: `Small` is the `d`-regular part, `Large` the
/// `D`-regular part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "d")]
    Small,
    #[serde(rename = "D")]
    Large,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Small => Side::Large,
            Side::Large => Side::Small,
        }
    }
}

/// Infected bridge endpoints of a glued host: `v_*` on the small side and
/// `v^*` on the large side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bridge {
    #[serde(rename = "d_end")]
    pub small_end: Option<Label>,
    #[serde(rename = "D_end")]
    pub large_end: Option<Label>,
}

/// A fixed host path of `length` edges starting at the source, with the
/// labels of its infected prefix (`path[0] == 1`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    pub length: u32,
    pub path: Vec<Label>,
}

impl Probe {
    /// Label of the host vertex at distance `k` along the probe, if infected.
    pub fn at(&self, k: u32) -> Option<Label> {
        self.path.get(k as usize).copied()
    }
}

/// A host vertex addressed by child indices relative to the source:
/// `(j_1, ..., j_k)` is the `j_k`-th child of `(j_1, ..., j_{k-1})`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathLabel(pub Vec<u32>);

impl PathLabel {
    /// Checks `j_1 in 1..=d` and `j_i in 1..=d-1` for `i > 1`.
    pub fn new(indices: Vec<u32>, d: u32) -> Result<Self> {
        for (i, &j) in indices.iter().enumerate() {
            let max = if i == 0 { d } else { d - 1 };
            if j == 0 || j > max {
                return Err(Error::domain(format!(
                    "path index j_{} = {j} outside 1..={max}",
                    i + 1
                )));
            }
        }
        Ok(PathLabel(indices))
    }

    /// Distance from the source.
    pub fn len(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Immutable infected subtree with arrival-order labels.
#[derive(Debug, Clone, PartialEq)]
pub struct InfectionTree {
    spec: GraphSpec,
    /// `parent[i]` is the parent label of label `i + 1`; 0 for the source.
    parent: Vec<Label>,
    child_start: Vec<u32>,
    children: Vec<Label>,
    depth: Vec<u32>,
    /// Empty for regular specs.
    side: Vec<Side>,
    bridge: Bridge,
    probe: Option<Probe>,
}

impl InfectionTree {
    /// Builds a tree from parent labels (`None` for the source), validating
    /// every invariant.
    pub fn from_parents(spec: GraphSpec, parents: &[Option<Label>]) -> Result<Self> {
        let raw: Vec<Label> = parents.iter().map(|p| p.unwrap_or(0)).collect();
        Self::build(spec, raw, Vec::new(), Bridge::default(), None)
    }

    /// Full constructor used by the simulator and the document loader.
    ///
    /// `parent` uses 0 for "no parent". For glued specs `side` must have one
    /// entry per node; bridge endpoints missing from `bridge` are inferred
    /// from the unique cross-side parent edge.
    pub fn build(
        spec: GraphSpec,
        parent: Vec<Label>,
        side: Vec<Side>,
        bridge: Bridge,
        probe: Option<Probe>,
    ) -> Result<Self> {
        spec.validate().map_err(|e| Error::parse(e.to_string()))?;
        let n = parent.len();
        if n > u32::MAX as usize - 1 {
            return Err(Error::parse("tree too large"));
        }
        for (i, &p) in parent.iter().enumerate() {
            let label = i as u32 + 1;
            if i == 0 {
                if p != 0 {
                    return Err(Error::parse("node 1 must have no parent"));
                }
            } else if p == 0 {
                return Err(Error::parse(format!(
                    "node {label} has no parent; only node 1 may be parentless"
                )));
            } else if p >= label {
                return Err(Error::parse(format!(
                    "arrival order violated: node {label} has parent {p} >= {label}"
                )));
            }
        }

        let mut counts = vec![0u32; n + 1];
        for &p in parent.iter().skip(1) {
            counts[p as usize - 1] += 1;
        }
        let mut child_start = Vec::with_capacity(n + 1);
        let mut acc = 0u32;
        for &c in counts.iter().take(n) {
            child_start.push(acc);
            acc += c;
        }
        child_start.push(acc);
        let mut fill = child_start.clone();
        let mut children = vec![0; n.saturating_sub(1)];
        for (i, &p) in parent.iter().enumerate().skip(1) {
            let slot = &mut fill[p as usize - 1];
            children[*slot as usize] = i as u32 + 1;
            *slot += 1;
        }
        let mut depth = vec![0u32; n];
        for i in 1..n {
            depth[i] = depth[parent[i] as usize - 1] + 1;
        }

        let mut tree = InfectionTree {
            spec,
            parent,
            child_start,
            children,
            depth,
            side,
            bridge,
            probe,
        };
        tree.check_glued()?;
        tree.check_degrees()?;
        tree.check_probe()?;
        Ok(tree)
    }

    fn check_glued(&mut self) -> Result<()> {
        let n = self.n() as usize;
        if !self.spec.is_glued() {
            if !self.side.is_empty() {
                return Err(Error::parse("side labels given for a regular spec"));
            }
            if self.bridge != Bridge::default() {
                return Err(Error::parse("bridge given for a regular spec"));
            }
            return Ok(());
        }
        if self.side.len() != n {
            return Err(Error::parse(format!(
                "glued spec needs one side per node: {} sides for {n} nodes",
                self.side.len()
            )));
        }
        let mut crossing = None;
        for i in 1..n {
            let p = self.parent[i] as usize - 1;
            if self.side[i] != self.side[p] {
                if crossing.is_some() {
                    return Err(Error::parse(
                        "more than one cross-side edge; the halves share a single bridge",
                    ));
                }
                crossing = Some((p as Label + 1, i as Label + 1));
            }
        }
        let (mut small, mut large) = (self.bridge.small_end, self.bridge.large_end);
        if let Some((a, b)) = crossing {
            let (s, l) = if self.side[a as usize - 1] == Side::Small { (a, b) } else { (b, a) };
            if small.is_some_and(|x| x != s) || large.is_some_and(|x| x != l) {
                return Err(Error::parse("bridge endpoints disagree with the cross-side edge"));
            }
            small = Some(s);
            large = Some(l);
        } else if small.is_some() && large.is_some() {
            return Err(Error::parse("both bridge endpoints infected but no cross-side edge"));
        }
        for (end, want) in [(small, Side::Small), (large, Side::Large)] {
            if let Some(x) = end {
                if x == 0 || x as usize > n || self.side[x as usize - 1] != want {
                    return Err(Error::parse(format!("bridge endpoint {x} invalid")));
                }
            }
        }
        self.bridge = Bridge {
            small_end: small,
            large_end: large,
        };
        Ok(())
    }

    fn check_degrees(&self) -> Result<()> {
        for v in 1..=self.n() {
            let (deg, host) = (self.degree(v), self.host_degree(v));
            if deg > host {
                return Err(Error::parse(format!(
                    "node {v} has {deg} infected neighbours but host degree {host}"
                )));
            }
        }
        Ok(())
    }

    fn check_probe(&self) -> Result<()> {
        let Some(probe) = &self.probe else { return Ok(()) };
        if self.spec.is_glued() {
            return Err(Error::parse("probe paths are only supported on regular specs"));
        }
        if probe.path.len() > probe.length as usize + 1 {
            return Err(Error::parse("probe path longer than its length"));
        }
        for (k, &v) in probe.path.iter().enumerate() {
            if v == 0 || v > self.n() {
                return Err(Error::parse(format!("probe vertex {v} is not a node")));
            }
            let ok = if k == 0 { v == 1 } else { self.parent(v) == Some(probe.path[k - 1]) };
            if !ok {
                return Err(Error::parse("probe path is not a downward path from node 1"));
            }
        }
        if self.n() > 0 && probe.path.is_empty() {
            return Err(Error::parse("probe path must start at node 1"));
        }
        Ok(())
    }

    /// An empty tree (used for a glued half the diffusion has not entered).
    pub fn empty(spec: GraphSpec) -> Self {
        InfectionTree {
            spec,
            parent: Vec::new(),
            child_start: vec![0],
            children: Vec::new(),
            depth: Vec::new(),
            side: Vec::new(),
            bridge: Bridge::default(),
            probe: None,
        }
    }

    pub fn spec(&self) -> GraphSpec {
        self.spec
    }

    pub fn n(&self) -> u32 {
        self.parent.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn contains(&self, v: Label) -> bool {
        v >= 1 && v <= self.n()
    }

    fn check_label(&self, v: Label) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::domain(format!("unknown label {v} (tree has {} nodes)", self.n())))
        }
    }

    pub fn parent(&self, v: Label) -> Option<Label> {
        match self.parent[v as usize - 1] {
            0 => None,
            p => Some(p),
        }
    }

    /// Raw parent array, 0 for the source.
    pub fn parents(&self) -> &[Label] {
        &self.parent
    }

    pub fn children(&self, v: Label) -> &[Label] {
        let i = v as usize - 1;
        &self.children[self.child_start[i] as usize..self.child_start[i + 1] as usize]
    }

    /// Neighbours of `v` in the tree: parent first, then children.
    pub fn neighbors(&self, v: Label) -> impl Iterator<Item = Label> + '_ {
        self.parent(v).into_iter().chain(self.children(v).iter().copied())
    }

    /// Degree of `v` in the infected tree.
    pub fn degree(&self, v: Label) -> u32 {
        let i = v as usize - 1;
        self.child_start[i + 1] - self.child_start[i] + u32::from(i > 0)
    }

    /// Distance from the source.
    pub fn depth(&self, v: Label) -> u32 {
        self.depth[v as usize - 1]
    }

    pub fn side(&self, v: Label) -> Side {
        self.side.get(v as usize - 1).copied().unwrap_or(Side::Small)
    }

    pub fn sides(&self) -> &[Side] {
        &self.side
    }

    pub fn bridge(&self) -> Bridge {
        self.bridge
    }

    pub fn probe(&self) -> Option<&Probe> {
        self.probe.as_ref()
    }

    /// Degree of the host vertex `v` occupies.
    pub fn host_degree(&self, v: Label) -> u32 {
        let side = self.side(v);
        let bump = match side {
            Side::Small => self.bridge.small_end == Some(v),
            Side::Large => self.bridge.large_end == Some(v),
        };
        self.spec.base_degree(side) + u32::from(self.spec.is_glued() && bump)
    }

    /// Number of host edges from infected to uninfected vertices.
    pub fn boundary_count(&self) -> u64 {
        (1..=self.n())
            .map(|v| u64::from(self.host_degree(v) - self.degree(v)))
            .sum()
    }

    /// Subtree sizes `|(T, 1)_{v↓}|` with the tree rooted at the source,
    /// indexed by `label - 1`. One reverse pass suffices because parents
    /// precede children.
    pub fn source_subtree_sizes(&self) -> Vec<u32> {
        let n = self.parent.len();
        let mut size = vec![1u32; n];
        for i in (1..n).rev() {
            let p = self.parent[i] as usize - 1;
            size[p] += size[i];
        }
        size
    }

    /// Subtree sizes `|(T, root)_{v↓}|` for every `v`, indexed by `label - 1`;
    /// the root's own entry is `n`.
    pub fn subtree_sizes(&self, root: Label) -> Result<Vec<u32>> {
        self.check_label(root)?;
        let base = self.source_subtree_sizes();
        if root == 1 {
            return Ok(base);
        }
        // Re-rooting only changes the vertices on the root-to-source path:
        // each such vertex now hangs below its former child on that path.
        let n = self.n();
        let mut size = base.clone();
        let mut below = root;
        let mut up = self.parent(root);
        size[root as usize - 1] = n;
        while let Some(u) = up {
            size[u as usize - 1] = n - base[below as usize - 1];
            below = u;
            up = self.parent(u);
        }
        Ok(size)
    }

    /// Number of edges on the tree path between `a` and `b`.
    pub fn distance(&self, a: Label, b: Label) -> Result<u32> {
        self.check_label(a)?;
        self.check_label(b)?;
        let (mut x, mut y) = (a, b);
        let mut dist = 0;
        while self.depth(x) > self.depth(y) {
            x = self.parent[x as usize - 1];
            dist += 1;
        }
        while self.depth(y) > self.depth(x) {
            y = self.parent[y as usize - 1];
            dist += 1;
        }
        while x != y {
            x = self.parent[x as usize - 1];
            y = self.parent[y as usize - 1];
            dist += 2;
        }
        Ok(dist)
    }

    /// Vertices on the path from the source down to `v`, source first.
    pub fn path_from_source(&self, v: Label) -> Result<Vec<Label>> {
        self.check_label(v)?;
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// All vertices within tree distance `radius` of any vertex in `centers`,
    /// sorted by label.
    pub fn ball(&self, centers: &[Label], radius: u32) -> Result<Vec<Label>> {
        let mut dist = vec![u32::MAX; self.parent.len()];
        let mut queue = VecDeque::new();
        for &c in centers {
            self.check_label(c)?;
            if dist[c as usize - 1] != 0 {
                dist[c as usize - 1] = 0;
                queue.push_back(c);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize - 1];
            if du == radius {
                continue;
            }
            for w in self.neighbors(u) {
                if dist[w as usize - 1] == u32::MAX {
                    dist[w as usize - 1] = du + 1;
                    queue.push_back(w);
                }
            }
        }
        Ok((1..=self.n()).filter(|&v| dist[v as usize - 1] != u32::MAX).collect())
    }

    /// The first `k` arrivals as a tree of their own.
    pub fn prefix(&self, k: u32) -> Result<InfectionTree> {
        if k > self.n() {
            return Err(Error::domain(format!("prefix of {k} nodes from a tree of {}", self.n())));
        }
        let keep = |x: Option<Label>| x.filter(|&v| v <= k);
        let side = if self.side.is_empty() { Vec::new() } else { self.side[..k as usize].to_vec() };
        let bridge = Bridge {
            small_end: keep(self.bridge.small_end),
            large_end: keep(self.bridge.large_end),
        };
        let probe = self.probe.as_ref().map(|p| Probe {
            length: p.length,
            path: p.path.iter().copied().filter(|&v| v <= k).collect(),
        });
        InfectionTree::build(self.spec, self.parent[..k as usize].to_vec(), side, bridge, probe)
    }

    /// Checks that removing arrivals `k+1..n` leaves a connected tree for
    /// every `k`, i.e. that every parent arrived before its child.
    pub fn has_prefix_connectivity(&self) -> bool {
        self.parent
            .iter()
            .enumerate()
            .all(|(i, &p)| if i == 0 { p == 0 } else { p != 0 && (p as usize) <= i })
    }

    pub fn to_document(&self) -> TreeDocument {
        let nodes = (1..=self.n())
            .map(|v| NodeRecord {
                id: v,
                parent: self.parent(v),
                side: self.spec.is_glued().then(|| self.side(v)),
            })
            .collect();
        let bridge = (self.spec.is_glued() && self.bridge != Bridge::default()).then_some(self.bridge);
        TreeDocument {
            spec: self.spec,
            n: self.n(),
            nodes,
            bridge,
            probe: self.probe.clone(),
        }
    }

    pub fn from_document(doc: &TreeDocument) -> Result<Self> {
        if doc.nodes.len() != doc.n as usize {
            return Err(Error::parse(format!(
                "document declares n = {} but lists {} nodes",
                doc.n,
                doc.nodes.len()
            )));
        }
        let mut parent = vec![0; doc.nodes.len()];
        let mut seen = vec![false; doc.nodes.len()];
        let mut side = Vec::new();
        if doc.spec.is_glued() {
            side = vec![Side::Small; doc.nodes.len()];
        }
        for rec in &doc.nodes {
            if rec.id == 0 || rec.id > doc.n || seen[rec.id as usize - 1] {
                return Err(Error::parse(format!("node id {} missing, duplicated or out of range", rec.id)));
            }
            let i = rec.id as usize - 1;
            seen[i] = true;
            parent[i] = rec.parent.unwrap_or(0);
            match (doc.spec.is_glued(), rec.side) {
                (true, Some(s)) => side[i] = s,
                (true, None) => return Err(Error::parse(format!("node {} lacks a side", rec.id))),
                (false, Some(_)) => {
                    return Err(Error::parse("side labels given for a regular spec"))
                }
                (false, None) => {}
            }
        }
        InfectionTree::build(doc.spec, parent, side, doc.bridge.unwrap_or_default(), doc.probe.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: TreeDocument = serde_json::from_str(s).map_err(|e| Error::parse(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// JSON form of an [`InfectionTree`].
///
/// ```json
/// {"spec": {"kind": "regular", "d": 3}, "n": 2,
///  "nodes": [{"id": 1, "parent": null}, {"id": 2, "parent": 1}]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub spec: GraphSpec,
    pub n: u32,
    pub nodes: Vec<NodeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bridge: Option<Bridge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<Probe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: Label,
    pub parent: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
}

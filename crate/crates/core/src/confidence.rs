//! Confidence sets for the source: the `K` vertices of smallest `ψ`, and the
//! distance-`L` ball around the rumor center(s).

use serde::{Deserialize, Serialize};

use crate::diffusion::split_glued;
use crate::error::{Error, Result};
use crate::estimators::{rumor_centers, score_all, ScoreTable};
use crate::tree::{InfectionTree, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SetMethod {
    PsiTopK { k: u32 },
    PhiBall { radius: u32 },
    GluedUnion { radius: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    #[serde(flatten)]
    pub method: SetMethod,
    /// Sorted ascending.
    pub members: Vec<Label>,
    /// Rumor centers the ball was drawn around; empty for `PsiTopK`.
    pub centers: Vec<Label>,
}

impl ConfidenceSet {
    pub fn contains(&self, v: Label) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// The `k` vertices with the smallest `ψ`. Ties on `ψ` are broken by smaller
/// `φ`, then by smaller label.
pub fn confset_psi(table: &ScoreTable, k: u32) -> Result<ConfidenceSet> {
    if k == 0 || k > table.n() {
        return Err(Error::domain(format!("K = {k} must lie in 1..={}", table.n())));
    }
    let mut order: Vec<Label> = table.labels().collect();
    order.sort_by(|&a, &b| {
        table
            .psi(a)
            .cmp(&table.psi(b))
            .then_with(|| table.log_phi_vs_source(a).total_cmp(&table.log_phi_vs_source(b)))
            .then(a.cmp(&b))
    });
    let mut members = order[..k as usize].to_vec();
    members.sort_unstable();
    Ok(ConfidenceSet {
        method: SetMethod::PsiTopK { k },
        members,
        centers: Vec::new(),
    })
}

/// All vertices within distance `radius` of some rumor center. When the
/// center is tied, the union over both centers is returned.
pub fn confset_phi(tree: &InfectionTree, table: &ScoreTable, radius: u32) -> Result<ConfidenceSet> {
    if tree.n() != table.n() {
        return Err(Error::domain("score table does not belong to this tree"));
    }
    let centers = rumor_centers(table);
    let members = tree.ball(&centers, radius)?;
    Ok(ConfidenceSet {
        method: SetMethod::PhiBall { radius },
        members,
        centers,
    })
}

/// Union of the `φ`-balls computed separately inside each half of a glued
/// tree, in original labels.
pub fn confset_glued(tree: &InfectionTree, radius: u32) -> Result<ConfidenceSet> {
    let split = split_glued(tree)?;
    let mut members = Vec::new();
    let mut centers = Vec::new();
    for half in [&split.small, &split.large] {
        if half.tree.is_empty() {
            continue;
        }
        let set = confset_phi(&half.tree, &score_all(&half.tree), radius)?;
        members.extend(set.members.iter().map(|&v| half.original(v)));
        centers.extend(set.centers.iter().map(|&v| half.original(v)));
    }
    members.sort_unstable();
    centers.sort_unstable();
    Ok(ConfidenceSet {
        method: SetMethod::GluedUnion { radius },
        members,
        centers,
    })
}

/// `(d(d-1)^L - 2)/(d-2)`: the number of host vertices within distance `L`
/// of a vertex of the `d`-regular tree. Saturates at `u64::MAX`.
pub fn regular_ball_size(d: u32, radius: u32) -> u64 {
    if d == 2 {
        return 2 * u64::from(radius) + 1;
    }
    let (d, mut total, mut shell) = (u64::from(d), 1u64, 1u64);
    for i in 0..radius {
        let branch = if i == 0 { d } else { d - 1 };
        shell = shell.saturating_mul(branch);
        total = total.saturating_add(shell);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::GraphSpec;

    fn tree(parents: &[Option<Label>]) -> InfectionTree {
        InfectionTree::from_parents(GraphSpec::Regular { d: 10 }, parents).unwrap()
    }

    fn path4() -> InfectionTree {
        tree(&[None, Some(1), Some(2), Some(3)])
    }

    #[test]
    fn psi_sets() {
        let star = tree(&[None, Some(1), Some(1), Some(1)]);
        let s = score_all(&star);
        assert_eq!(confset_psi(&s, 1).unwrap().members, vec![1]);
        assert_eq!(confset_psi(&s, 4).unwrap().members, vec![1, 2, 3, 4]);
        let p = path4();
        assert_eq!(confset_psi(&score_all(&p), 2).unwrap().members, vec![2, 3]);
        assert!(matches!(confset_psi(&s, 5), Err(Error::Domain(_))));
        assert!(matches!(confset_psi(&s, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn phi_balls() {
        let p = path4();
        let s = score_all(&p);
        let set = confset_phi(&p, &s, 0).unwrap();
        assert_eq!(set.members, vec![2, 3]);
        assert_eq!(set.centers, vec![2, 3]);
        assert_eq!(confset_phi(&p, &s, 3).unwrap().members, vec![1, 2, 3, 4]);
        let q = tree(&[None, Some(1), Some(2)]);
        assert_eq!(confset_phi(&q, &score_all(&q), 0).unwrap().members, vec![2]);
    }

    #[test]
    fn ball_size_formula() {
        for d in 3..8u32 {
            for l in 0..6u32 {
                let closed = (u64::from(d) * u64::from(d - 1).pow(l) - 2) / u64::from(d - 2);
                assert_eq!(regular_ball_size(d, l), closed, "d={d} L={l}");
            }
        }
        assert_eq!(regular_ball_size(2, 3), 7);
    }

    #[test]
    fn glued_rejects_regular() {
        assert!(matches!(confset_glued(&path4(), 1), Err(Error::Domain(_))));
    }

    #[test]
    fn set_json_shape() {
        let set = ConfidenceSet {
            method: SetMethod::PsiTopK { k: 2 },
            members: vec![2, 3],
            centers: vec![],
        };
        let json = serde_json::to_string(&set).unwrap();
        assert_eq!(json, r#"{"method":"psi_top_k","k":2,"members":[2,3],"centers":[]}"#);
        assert_eq!(serde_json::from_str::<ConfidenceSet>(&json).unwrap(), set);
    }
}

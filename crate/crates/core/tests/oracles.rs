mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rumor_core::estimators::{brute_force_rumor_centrality, centroid, rumor_centers, score_all};

fn check_against_oracles(parents: &[usize]) {
    let tree = to_tree(parents);
    let table = score_all(&tree);
    let naive = naive_scores(parents);
    let n = parents.len();
    for u in 1..=n as u32 {
        let i = u as usize - 1;
        let brute = brute_force_rumor_centrality(&tree, u).unwrap();
        assert_eq!(u128::from(brute), naive.r[i], "R formula vs enumeration, tree {parents:?}, u {u}");
        assert_eq!(table.log_r(u).exp().round() as u64, brute, "tree {parents:?}, u {u}");
        let phi = naive.phi[i] as f64;
        assert!((table.log_phi(u) - phi.ln()).abs() <= 1e-9 * phi.ln().abs().max(1.0));
        assert_eq!(u64::from(table.psi(u)), naive.psi[i]);
    }
    let centers = rumor_centers(&table);
    assert_eq!(centers, argmin(&naive.phi), "tree {parents:?}");
    let max_r = *naive.r.iter().max().unwrap();
    let argmax_r: Vec<u32> = (0..n).filter(|&i| naive.r[i] == max_r).map(|i| i as u32 + 1).collect();
    assert_eq!(centers, argmax_r);
    assert!(matches!(centers.len(), 1 | 2));
    if centers.len() == 2 {
        assert_eq!(tree.distance(centers[0], centers[1]).unwrap(), 1);
    }
    let cent = centroid(&table);
    assert_eq!(cent, argmin(&naive.psi));
    assert!(table.psi(cent[0]) as usize <= n / 2);
    // On trees the rumor center and the centroid coincide.
    assert_eq!(centers, cent);
}

#[test]
fn every_shape_up_to_eight_vertices() {
    let mut count = 0;
    for n in 1..=8 {
        for parents in all_recursive_trees(n) {
            check_against_oracles(&parents);
            count += 1;
        }
    }
    assert_eq!(count, 1 + 1 + 2 + 6 + 24 + 120 + 720 + 5040);
}

#[test]
fn random_trees_up_to_ten_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for i in 0..1000 {
        let n = 1 + i % 10;
        check_against_oracles(&random_recursive_tree(n, &mut rng));
    }
}

#[test]
fn star_and_path_examples() {
    let star = to_tree(&[usize::MAX, 0, 0, 0]);
    let s = score_all(&star);
    assert_eq!(brute_force_rumor_centrality(&star, 1).unwrap(), 6);
    assert_eq!(brute_force_rumor_centrality(&star, 3).unwrap(), 2);
    assert_eq!(s.psi(1), 1);
    let path = to_tree(&[usize::MAX, 0, 1]);
    assert_eq!(brute_force_rumor_centrality(&path, 1).unwrap(), 1);
    assert_eq!(brute_force_rumor_centrality(&path, 3).unwrap(), 1);
    assert_eq!(rumor_centers(&score_all(&path)), vec![2]);
}

#[test]
fn exact_phi_comparison_matches_integers() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..300 {
        let parents = random_recursive_tree(12, &mut rng);
        let tree = to_tree(&parents);
        let table = score_all(&tree);
        let naive = naive_scores(&parents);
        for a in 1..=12u32 {
            for b in 1..=12u32 {
                let want = naive.phi[a as usize - 1].cmp(&naive.phi[b as usize - 1]);
                assert_eq!(table.cmp_phi(&tree, a, b), want);
            }
        }
    }
}

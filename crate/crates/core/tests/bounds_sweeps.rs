use rumor_core::bounds::{
    bound_cor2, bound_prop2, bound_theorem1, bound_theorem1_opt, bound_theorem2, required_k, required_l,
    theorem1_terms,
};

#[test]
fn psi_bound_optimum_beats_fixed_eta() {
    for d in [3, 4, 6, 10] {
        for k in [5, 10, 20, 50] {
            let (eta, opt) = bound_theorem1_opt(d, k).unwrap();
            assert!(eta > 0.0 && eta < 1.0);
            for fixed in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let at = bound_theorem1(d, k, fixed).unwrap();
                assert!(opt.raw <= at.raw * (1.0 + 1e-9), "d={d} K={k} eta={fixed}");
            }
        }
    }
}

#[test]
fn psi_bound_nonincreasing_in_k() {
    for d in [3, 4, 10] {
        let values: Vec<f64> = (5..=100).map(|k| bound_theorem1_opt(d, k).unwrap().1.raw).collect();
        for (i, w) in values.windows(2).enumerate() {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "d={d} K={}: {} > {}", i + 6, w[1], w[0]);
        }
        let small = bound_theorem1_opt(d, 4).unwrap().1.raw;
        let large = bound_theorem1_opt(d, 40).unwrap().1.raw;
        assert!(large < small);
    }
}

#[test]
fn exact_second_term_below_stirling() {
    for d in [3, 4, 5, 10, 30] {
        for k in [4, 5, 10, 100, 1000] {
            for eta in [0.05, 0.5, 0.95] {
                let t = theorem1_terms(d, k, eta).unwrap();
                assert!(t.second_exact <= t.second_stirling * (1.0 + 1e-12), "d={d} K={k} eta={eta}");
                assert!(t.exact() <= t.stirling() * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn distance_bound_eventually_decreasing() {
    for d in [3, 4, 10] {
        let values: Vec<f64> = (2..=200).map(|l| bound_theorem2(d, l).unwrap().raw).collect();
        let tail = &values[100..];
        assert!(tail.windows(2).all(|w| w[1] <= w[0]), "d={d}");
        assert!(values[198] < 1e-6);
    }
}

#[test]
fn ball_bound_dominates_distance_bound() {
    for d in [3, 4, 10] {
        for l in [2, 5, 10, 40, 100] {
            let t2 = bound_theorem2(d, l).unwrap().raw;
            let c2 = bound_cor2(d, l).unwrap().raw;
            assert!(c2 >= t2, "d={d} L={l}");
        }
    }
}

#[test]
fn glued_bound_grows_with_big_d() {
    for l in [2000, 5000, 20_000] {
        let mut last = 0.0;
        let mut checked = 0;
        for big_d in 4..=8 {
            let r = bound_prop2(3, big_d, l).unwrap();
            if r.vacuous {
                continue;
            }
            assert!(r.raw >= last, "D={big_d} L={l}");
            last = r.raw;
            checked += 1;
        }
        assert!(checked >= 2, "L={l}: only {checked} nonvacuous values");
    }
    assert!(bound_prop2(3, 3, 60).is_err());
}

#[test]
fn required_k_monotone_and_below_closed_form() {
    for d in [3, 4, 10] {
        let mut last = 0;
        for eps in [0.9, 0.5, 0.2, 0.1, 0.05] {
            let t = required_k(d, eps).unwrap();
            assert!(t.bound.raw <= eps);
            if let Some(below) = t.bound_below {
                assert!(below > eps);
            }
            assert!(t.value >= last, "d={d} eps={eps}");
            last = t.value;
            if t.closed_form_valid() {
                assert!(f64::from(t.value) <= t.closed_form.ceil(), "d={d} eps={eps}");
            }
        }
    }
}

#[test]
fn required_l_monotone_and_slowly_growing() {
    for d in [3, 4, 10] {
        let mut last = 0;
        for eps in [0.5, 0.1, 0.05, 0.01, 1e-3] {
            let t = required_l(d, eps).unwrap();
            assert!(t.bound.raw <= eps);
            assert!(t.value >= last);
            last = t.value;
            let tighter = required_l(d, eps / 10.0).unwrap();
            assert!(f64::from(tighter.value) < 10.0 * f64::from(t.value), "d={d} eps={eps}");
        }
    }
}

use modalband::setdist::{hausdorff_slices, point_to_set_slice};
use modalband::{hausdorff, point_to_set, FiniteSet};
use proptest::prelude::*;

fn set(v: &[f64]) -> FiniteSet {
    FiniteSet::new(v.to_vec()).unwrap()
}

#[test]
fn examples() {
    assert_eq!(point_to_set(&set(&[1.0, 5.0]), 2.0), 1.0);
    assert_eq!(point_to_set(&set(&[3.0]), 3.0), 0.0);
    assert_eq!(point_to_set(&set(&[-2.0, 0.0, 7.0]), 4.0), 3.0);
    assert_eq!(hausdorff(&set(&[0.0]), &set(&[3.0])), 3.0);
    assert_eq!(hausdorff(&set(&[0.0, 10.0]), &set(&[0.0])), 10.0);
    assert!(FiniteSet::new(Vec::new()).is_err());
    assert!(hausdorff_slices(&[], &[1.0]).is_err());
    assert_eq!(point_to_set_slice(1.0, &[]), f64::INFINITY);
}

/// Smallest r with A ⊂ B ⊕ r and B ⊂ A ⊕ r, by bisection.
fn inflation_distance(a: &[f64], b: &[f64]) -> f64 {
    let covered = |from: &[f64], to: &[f64], r: f64| {
        from.iter().all(|p| to.iter().any(|q| (p - q).abs() <= r))
    };
    let ok = |r: f64| covered(a, b, r) && covered(b, a, r);
    let (mut lo, mut hi) = (0.0, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn points() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn symmetric_and_zero_on_itself(a in points(), b in points()) {
        let (sa, sb) = (set(&a), set(&b));
        prop_assert_eq!(hausdorff(&sa, &sb), hausdorff(&sb, &sa));
        prop_assert_eq!(hausdorff(&sa, &sa), 0.0);
        prop_assert!(hausdorff(&sa, &sb) >= 0.0);
        // a permuted copy with duplicates is the same set
        let mut c = a.clone();
        c.reverse();
        c.push(a[0]);
        prop_assert_eq!(hausdorff(&sa, &set(&c)), 0.0);
    }

    #[test]
    fn zero_only_for_equal_sets(a in points(), extra in -50.0..50.0f64) {
        let sa = set(&a);
        let mut b = a.clone();
        b.push(extra);
        let d = hausdorff(&sa, &set(&b));
        let member = a.contains(&extra);
        prop_assert_eq!(d == 0.0, member);
    }

    #[test]
    fn triangle(a in points(), b in points(), c in points()) {
        let (sa, sb, sc) = (set(&a), set(&b), set(&c));
        let lhs = hausdorff(&sa, &sc);
        let rhs = hausdorff(&sa, &sb) + hausdorff(&sb, &sc);
        prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
    }

    #[test]
    fn matches_inflation_definition(a in prop::collection::vec(-10.0..10.0f64, 1..5),
                                    b in prop::collection::vec(-10.0..10.0f64, 1..5)) {
        let d = hausdorff(&set(&a), &set(&b));
        prop_assert!((d - inflation_distance(&a, &b)).abs() < 1e-9);
    }
}

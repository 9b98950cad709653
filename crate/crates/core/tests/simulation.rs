use approx::{assert_abs_diff_eq, assert_relative_eq};
use modalband::modes::{CurvePoint, MissingReason, ModeSet};
use modalband::selectors::Method;
use modalband::simulation::{
    aggregate, base_mean, eise_d, eise_d_kernel, eise_m, generate, run_experiment, true_mode_grid,
    true_modes, ConfigTag, EvalGrid, ExperimentSettings, SimulationConfig,
};
use modalband::{gaussian_kernel, Bandwidths, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn preset(tag: ConfigTag, n: usize) -> SimulationConfig {
    SimulationConfig::preset(tag, n)
}

#[test]
fn gamma_noise_mean() {
    let s = generate(&preset(ConfigTag::C1, 100_000), 1).unwrap();
    let mean = s
        .x()
        .iter()
        .zip(s.y())
        .map(|(x, y)| y - (base_mean(*x) - 1.0))
        .sum::<f64>()
        / s.len() as f64;
    assert!((mean - 1.5).abs() < 0.02, "{mean}");
    assert!(s.x().iter().zip(s.y()).all(|(x, y)| *y > base_mean(*x) - 1.0));
}

#[test]
fn two_branch_conditional_mean() {
    let n = 100_000;
    let s = generate(&preset(ConfigTag::C2, n), 2).unwrap();
    let resid: Vec<f64> = s.x().iter().zip(s.y()).map(|(x, y)| y - base_mean(*x)).collect();
    let mean = resid.iter().sum::<f64>() / n as f64;
    // Var(Y - m(X)) = 1 + 9 for two unit normals 6 apart
    assert!((mean + 3.0).abs() < 3.0 * 10f64.sqrt() / (n as f64).sqrt(), "{mean}");
    let upper = resid.iter().filter(|&&r| r > -3.0).count() as f64 / n as f64;
    assert!((upper - 0.5).abs() < 0.01);
}

#[test]
fn three_branch_frequencies() {
    let n = 100_000;
    let s = generate(&preset(ConfigTag::C4, n), 3).unwrap();
    let mut counts = [0usize; 3];
    for (x, y) in s.x().iter().zip(s.y()) {
        let r = y - base_mean(*x);
        // nearest of the offsets 0, -3, -6
        let k = ((-r / 3.0).round().clamp(0.0, 2.0)) as usize;
        counts[k] += 1;
    }
    for (c, w) in counts.iter().zip([0.5, 0.3, 0.2]) {
        assert!((*c as f64 / n as f64 - w).abs() < 0.02, "{counts:?}");
    }
}

#[test]
fn generator_is_seeded() {
    for tag in ConfigTag::ALL {
        let c = preset(tag, 300);
        assert_eq!(generate(&c, 4).unwrap(), generate(&c, 4).unwrap());
        assert_ne!(generate(&c, 4).unwrap(), generate(&c, 5).unwrap());
    }
}

/// Grid argmaxima of `p(·|x)` on `[lo, hi]`.
fn grid_argmaxima(c: &SimulationConfig, x: f64, lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let step = (hi - lo) / m as f64;
    let f: Vec<f64> = (0..=m).map(|k| c.conditional_pdf(x, lo + step * k as f64)).collect();
    (1..m)
        .filter(|&k| f[k] > f[k - 1] && f[k] >= f[k + 1])
        .map(|k| lo + step * k as f64)
        .collect()
}

#[test]
fn true_mode_examples() {
    let c1 = preset(ConfigTag::C1, 10);
    for x in [-2.0, -0.6, 0.0, 1.1, 2.0] {
        let m = true_modes(&c1, x);
        assert_eq!(m.locations().len(), 1);
        assert_abs_diff_eq!(m.locations()[0], x + x * x, epsilon = 1e-9);
        let grid = grid_argmaxima(&c1, x, x + x * x - 2.0, x + x * x + 4.0, 600_000);
        assert_eq!(grid.len(), 1);
        assert_abs_diff_eq!(grid[0], m.locations()[0], epsilon = 2e-5);
    }

    let c2 = preset(ConfigTag::C2, 10);
    let m = true_modes(&c2, 0.0);
    assert_eq!(m.len(), 2);
    assert_abs_diff_eq!(m.locations()[0], -6.0, epsilon = 2e-3);
    assert_abs_diff_eq!(m.locations()[1], 0.0, epsilon = 2e-3);

    let c3 = preset(ConfigTag::C3, 10);
    assert_eq!(true_modes(&c3, -1.0).len(), 1);
    assert_eq!(true_modes(&c3, 1.0).len(), 2);

    // every design, against a plain grid scan
    for tag in ConfigTag::ALL {
        let c = preset(tag, 10);
        for x in [-1.7, -0.2, 0.4, 1.9] {
            let m = true_modes(&c, x);
            let mu = base_mean(x);
            let grid = grid_argmaxima(&c, x, mu - 12.0, mu + 8.0, 400_000);
            assert_eq!(m.len(), grid.len(), "{tag} at {x}");
            for (a, b) in m.locations().iter().zip(&grid) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-4);
            }
        }
    }
}

fn curve(x: f64, locations: Vec<f64>) -> CurvePoint {
    CurvePoint { x, modes: Ok(ModeSet::new(x, locations).unwrap()) }
}

#[test]
fn eise_m_of_a_shifted_curve() {
    let c1 = preset(ConfigTag::C1, 10);
    let grid = EvalGrid::default();
    let truth = true_mode_grid(&c1, &grid);
    let exact: Vec<CurvePoint> = truth.iter().map(|m| curve(m.at_x, m.locations().to_vec())).collect();
    assert_eq!(eise_m(&exact, &c1, &grid, 10.0).unwrap().value, 0.0);

    let shifted = |g: &EvalGrid| -> (f64, f64) {
        let truth = true_mode_grid(&c1, g);
        let est: Vec<CurvePoint> = truth
            .iter()
            .map(|m| curve(m.at_x, vec![m.locations()[0] + 0.5]))
            .collect();
        let mass: f64 = g.x_points().iter().map(|&x| gaussian_kernel(x) * g.dx).sum();
        (eise_m(&est, &c1, g, 10.0).unwrap().value, 0.25 * mass)
    };
    let (v, expect) = shifted(&grid);
    assert_relative_eq!(v, expect, max_relative = 1e-12);
    let (fine, _) = shifted(&EvalGrid { dx: 0.001, ..grid });
    assert!((fine - 0.2386).abs() < 5e-4, "{fine}");
}

#[test]
fn eise_m_charges_missing_points() {
    let c2 = preset(ConfigTag::C2, 10);
    let grid = EvalGrid { dx: 0.5, ..EvalGrid::default() };
    let mut est: Vec<CurvePoint> = true_mode_grid(&c2, &grid)
        .iter()
        .map(|m| curve(m.at_x, m.locations().to_vec()))
        .collect();
    est[3].modes = Err(MissingReason::NoLocalSupport);
    let r = eise_m(&est, &c2, &grid, 4.0).unwrap();
    assert_eq!(r.missing, 1);
    assert_relative_eq!(r.value, 16.0 * gaussian_kernel(est[3].x) * 0.5, max_relative = 1e-12);
    assert!(eise_m(&est[1..], &c2, &grid, 4.0).is_err());
}

/// Naive Hausdorff distance.
fn haus(a: &[f64], b: &[f64]) -> f64 {
    let mut d: f64 = 0.0;
    for p in a {
        d = d.max(b.iter().map(|q| (p - q).abs()).fold(f64::INFINITY, f64::min));
    }
    for q in b {
        d = d.max(a.iter().map(|p| (p - q).abs()).fold(f64::INFINITY, f64::min));
    }
    d
}

#[test]
fn metrics_match_naive_loops() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let tag = ConfigTag::ALL[r.random_range(0..5)];
        let c = preset(tag, 60);
        let grid = EvalGrid { dx: r.random_range(0.1..0.4), y_points: r.random_range(20..60), ..EvalGrid::default() };
        let xs = grid.x_points();

        let est: Vec<CurvePoint> = xs
            .iter()
            .map(|&x| {
                let k = r.random_range(1..4);
                curve(x, (0..k).map(|_| r.random_range(-8.0..6.0)).collect())
            })
            .collect();
        let y_range = 14.0;
        let naive: f64 = est
            .iter()
            .map(|p| {
                let t = true_modes(&c, p.x);
                haus(p.modes().unwrap().locations(), t.locations()).powi(2) * gaussian_kernel(p.x) * grid.dx
            })
            .sum();
        let v = eise_m(&est, &c, &grid, y_range).unwrap().value;
        assert!((v - naive).abs() <= 1e-10 * naive.max(1.0));

        let s = generate(&c, r.random_range(0..1000)).unwrap();
        let h = Bandwidths::new(r.random_range(0.3..1.0), r.random_range(0.2..1.0)).unwrap();
        let naive = naive_eise_d(&s, h, &c, &grid);
        let fast = eise_d_kernel(&s, h, &c, &grid).unwrap();
        assert!((fast - naive).abs() <= 1e-10 * naive.max(1e-3), "{fast} vs {naive}");
    }
}

/// Kernel estimate written out directly, scored on the metric's grids.
fn naive_eise_d(s: &Sample, h: Bandwidths, c: &SimulationConfig, grid: &EvalGrid) -> f64 {
    let m = grid.y_points;
    let dy = (s.y_max() - s.y_min()) / (m - 1) as f64;
    let mut total = 0.0;
    for &x in &grid.x_points() {
        for j in 0..m {
            let y = s.y_min() + j as f64 * dy;
            let (mut num, mut den) = (0.0, 0.0);
            for (xi, yi) in s.x().iter().zip(s.y()) {
                let w = gaussian_kernel((xi - x) / h.h1);
                num += w * gaussian_kernel((yi - y) / h.h2) / h.h2;
                den += w;
            }
            total += (num / den - c.conditional_pdf(x, y)).powi(2) * gaussian_kernel(x) * grid.dx * dy;
        }
    }
    total
}

#[test]
fn eise_d_of_a_constant_offset() {
    let c = preset(ConfigTag::C4, 10);
    let grid = EvalGrid::default();
    let off = 0.03;
    let v = eise_d(|x, y| Ok(c.conditional_pdf(x, y) + off), &c, &grid, -9.0, 7.0).unwrap();
    let dy = 16.0 / (grid.y_points - 1) as f64;
    let mass: f64 = grid.x_points().iter().map(|&x| gaussian_kernel(x) * grid.dx).sum();
    let expect = off * off * (grid.y_points as f64 * dy) * mass;
    assert_relative_eq!(v, expect, max_relative = 1e-10);
    assert_eq!(eise_d(|x, y| Ok(c.conditional_pdf(x, y)), &c, &grid, -9.0, 7.0).unwrap(), 0.0);
}

#[test]
fn eise_d_is_stable_under_grid_refinement() {
    let c = preset(ConfigTag::C2, 400);
    let s = generate(&c, 6).unwrap();
    let h = Bandwidths::new(0.4, 0.6).unwrap();
    let coarse = EvalGrid { dx: 0.1, y_points: 101, ..EvalGrid::default() };
    let fine = EvalGrid { dx: 0.05, y_points: 201, ..EvalGrid::default() };
    let a = eise_d_kernel(&s, h, &c, &coarse).unwrap();
    let b = eise_d_kernel(&s, h, &c, &fine).unwrap();
    assert!((a / b - 1.0).abs() < 0.05, "{a} vs {b}");
}

#[test]
fn experiment_is_reproducible_and_aggregates_recompute() {
    let c = preset(ConfigTag::C1, 120);
    let settings = ExperimentSettings::new(vec![Method::Reference, Method::OracleDensity], 3, 13);
    let a = run_experiment(&c, &settings).unwrap();
    let b = run_experiment(&c, &settings).unwrap();
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.rows.len(), 6);
    assert_eq!(a.timing.len(), 6);
    assert_eq!(a.aggregates, aggregate(&a.rows, &settings.methods));

    for agg in &a.aggregates {
        let em: Vec<f64> = a.rows_for(agg.method).iter().filter_map(|r| r.eise_m).collect();
        assert_eq!(agg.eise_m_count, em.len());
        let mean = em.iter().sum::<f64>() / em.len() as f64;
        assert!((agg.eise_m_mean.unwrap() - mean).abs() <= 1e-12 * mean.max(1.0));
        let var = em.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (em.len() - 1) as f64;
        let se = (var / em.len() as f64).sqrt();
        assert!((agg.eise_m_se.unwrap() - se).abs() <= 1e-12 * se.max(1.0));
        for row in a.rows_for(agg.method) {
            assert!(row.eise_m.unwrap() >= 0.0 && row.eise_d.unwrap() >= 0.0);
        }
    }

    let single = ExperimentSettings::new(vec![Method::Reference], 1, 99);
    assert_eq!(
        run_experiment(&c, &single).unwrap().to_json().unwrap(),
        run_experiment(&c, &single).unwrap().to_json().unwrap()
    );
    let none = ExperimentSettings::new(vec![Method::Reference], 0, 1);
    assert!(run_experiment(&c, &none).is_err());
}

#[test]
fn selector_failures_are_recorded() {
    // the reference rule needs ten observations
    let c = preset(ConfigTag::C2, 8);
    let settings = ExperimentSettings::new(vec![Method::Reference], 2, 1);
    let report = run_experiment(&c, &settings).unwrap();
    assert!(report.rows.iter().all(|r| r.failure.is_some() && r.eise_m.is_none()));
    assert_eq!(report.aggregates[0].failures, 2);
    assert_eq!(report.aggregates[0].eise_m_mean, None);
}

use std::sync::OnceLock;

use entropy_lab::entropy_production::relative_entropy_rate;
use entropy_lab::model::{relative_entropy, Grid, HamiltonianSpec};
use entropy_lab::paths::*;
use entropy_lab::sde::*;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal, Uniform};

fn ou() -> HamiltonianSpec {
    HamiltonianSpec::harmonic_1d(1.0, 1.0, 2.0).unwrap()
}

/// dx = −x dt + √2 dW from N(0,1), recorded every 0.01 up to t = 1.
fn stationary(n: usize, seed: u64) -> PathEnsemble {
    let x0 = InitialDistribution::scalar_gaussian(0.0, 1.0).unwrap();
    simulate_overdamped(&ou(), None, &x0, &EnsembleConfig::new(n, 1e-3, 1.0, seed).record_every(10)).unwrap()
}

fn big() -> &'static PathEnsemble {
    static E: OnceLock<PathEnsemble> = OnceLock::new();
    E.get_or_init(|| stationary(100_000, 2024))
}

fn drift_grid() -> Grid {
    Grid::uniform_1d(-4.0, 4.0, 16).unwrap()
}

#[test]
fn wiener_forward_drift_vanishes() {
    let flat = HamiltonianSpec::constant(1, 0.0, 1.0, 2.0).unwrap();
    let x0 = InitialDistribution::scalar_gaussian(0.0, 1.0).unwrap();
    let e = simulate_overdamped(&flat, None, &x0, &EnsembleConfig::new(50_000, 1e-2, 0.2, 3)).unwrap();
    let b = estimate_forward_drift_pooled(&e, 0..20, &drift_grid()).unwrap();
    for c in b.populated() {
        assert!(b.value(c)[0].abs() < 3.0 * b.se(c)[0], "cell {c}: {} ± {}", b.value(c)[0], b.se(c)[0]);
    }
}

#[test]
fn wide_wiener_backward_drift_vanishes_inside() {
    // uniform start on a box much wider than the diffusion length
    let (n, steps, dt) = (50_000, 10, 1e-2);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let start = Uniform::new(-20.0, 20.0).unwrap();
    let kick = Normal::new(0.0, (2.0 * dt as f64).sqrt()).unwrap();
    let mut data = Vec::with_capacity(n * (steps + 1));
    for _ in 0..n {
        let mut x: f64 = start.sample(&mut rng);
        data.push(x);
        for _ in 0..steps {
            x += kick.sample(&mut rng);
            data.push(x);
        }
    }
    let times = (0..=steps).map(|k| k as f64 * dt).collect();
    let e = PathEnsemble::new(n, 1, times, 9, data).unwrap();
    let g = estimate_backward_drift_pooled(&e, 1..steps + 1, &Grid::uniform_1d(-10.0, 10.0, 10).unwrap()).unwrap();
    for c in g.populated() {
        assert!(g.value(c)[0].abs() < 3.0 * g.se(c)[0], "cell {c}: {} ± {}", g.value(c)[0], g.se(c)[0]);
    }
}

#[test]
fn stationary_drifts_and_current() {
    let e = big();
    let grid = drift_grid();
    let b = estimate_forward_drift_pooled(e, 0..100, &grid).unwrap();
    let g = estimate_backward_drift_pooled(e, 1..101, &grid).unwrap();
    let v = current_drift(&b, &g).unwrap();
    assert!(b.populated().len() >= 14);
    for c in b.populated() {
        let x = b.centroid(c)[0];
        assert!((b.value(c)[0] + x).abs() < 3.0 * b.se(c)[0], "beta at {x}");
        let x = g.centroid(c)[0];
        assert!((g.value(c)[0] - x).abs() < 3.0 * g.se(c)[0], "gamma at {x}");
        assert!(v.value(c)[0].abs() < 3.0 * v.se(c)[0], "v at {x}");
    }
}

#[test]
fn stationary_osmotic_residual_and_its_decrease_with_n() {
    // finer than the drift grid: the automatic bandwidth is floored at the spacing
    let grid = Grid::uniform_1d(-4.0, 4.0, 32).unwrap();
    let residual = |e: &PathEnsemble| {
        let b = estimate_forward_drift_pooled(e, 0..100, &grid).unwrap();
        let g = estimate_backward_drift_pooled(e, 1..101, &grid).unwrap();
        let p = estimate_density_pooled(e, 0..101, &grid, Bandwidth::Auto).unwrap();
        osmotic_residual(&b, &g, &p, 2.0).unwrap()
    };
    let large = residual(big());
    let small = residual(&stationary(10_000, 77));
    assert!(large < 0.1, "{large}");
    assert!(large <= small, "{large} vs {small}");
}

#[test]
fn drift_standard_error_scales_with_sample_size() {
    let grid = drift_grid();
    let half = stationary(50_000, 4040);
    let b_half = estimate_forward_drift(&half, 50, &grid).unwrap();
    let b_full = estimate_forward_drift(big(), 50, &grid).unwrap();
    let cells: Vec<usize> = b_half.populated().into_iter().filter(|&c| b_full.is_populated(c)).collect();
    let mean_se = |b: &DriftEstimate| cells.iter().map(|&c| b.se(c)[0]).sum::<f64>() / cells.len() as f64;
    let ratio = mean_se(&b_half) / mean_se(&b_full);
    assert!((1.25..=1.6).contains(&ratio), "{ratio}");
}

#[test]
fn finite_energy_of_stationary_ou() {
    let drift = |x: &[f64], _: f64| vec![-x[0]];
    let fe = finite_energy_estimate(big(), DriftField::Closed(&drift)).unwrap();
    assert!(fe.estimate.covers(1.0, 3.0), "{:?}", fe.estimate);

    // stiffer well: drift −2x, variance 1/2, energy rate 4 · 1/2
    let stiff = HamiltonianSpec::harmonic_1d(2.0, 1.0, 2.0).unwrap();
    let x0 = InitialDistribution::scalar_gaussian(0.0, 0.5).unwrap();
    let e = simulate_overdamped(&stiff, None, &x0, &EnsembleConfig::new(20_000, 1e-3, 1.0, 5).record_every(10)).unwrap();
    let drift = |x: &[f64], _: f64| vec![-2.0 * x[0]];
    let fe = finite_energy_estimate(&e, DriftField::Closed(&drift)).unwrap();
    // Euler-Maruyama shifts the stationary variance by O(dt)
    assert!((fe.estimate.value - 2.0).abs() < 3.0 * fe.estimate.se + 2.0 * 2e-3, "{:?}", fe.estimate);

    let zero = |_: &[f64], _: f64| vec![0.0];
    assert_eq!(finite_energy_estimate(&e, DriftField::Closed(&zero)).unwrap().estimate.value, 0.0);
}

#[test]
fn weak_continuity_in_equilibrium() {
    let e = big();
    let grid = drift_grid();
    let v = current_drift(
        &estimate_forward_drift(e, 50, &grid).unwrap(),
        &estimate_backward_drift(e, 50, &grid).unwrap(),
    )
    .unwrap();
    let tests = [TestFunction::coordinate(0), TestFunction::square(0), TestFunction::cosine(0)];
    for r in weak_continuity_check(e, 50, &v, &tests).unwrap() {
        assert!(r.pass, "{r:?}");
        assert!(r.lhs.covers(0.0, 3.0), "{r:?}");
    }
}

#[test]
fn weak_continuity_during_relaxation() {
    let x0 = InitialDistribution::scalar_gaussian(1.0, 1.0).unwrap();
    let e = simulate_overdamped(&ou(), None, &x0, &EnsembleConfig::new(50_000, 1e-3, 0.5, 6).record_every(10)).unwrap();
    let k = 20;
    let grid = Grid::uniform_1d(-4.0, 5.0, 18).unwrap();
    let v = current_drift(
        &estimate_forward_drift(&e, k, &grid).unwrap(),
        &estimate_backward_drift(&e, k, &grid).unwrap(),
    )
    .unwrap();
    let r = &weak_continuity_check(&e, k, &v, &[TestFunction::coordinate(0)]).unwrap()[0];
    assert!(r.pass, "{r:?}");
    // mean ODE: d⟨x⟩/dt = −⟨x⟩
    let mean = e.mean_estimate(k, 0);
    assert!((r.rhs.value + mean.value).abs() < 3.0 * r.rhs.se.hypot(mean.se) + 1e-2, "{r:?} {mean:?}");
}

/// Divergence rate between a relaxing and a stationary ensemble, from
/// kernel densities and kernel-smoothed current drifts, against the central
/// difference of the estimated divergence. Returns (rate, difference quotient).
fn rate_and_fd(tilde: &PathEnsemble, reference: &PathEnsemble, k: usize, lag: usize, grid: &Grid, h: f64) -> (f64, f64) {
    let bw = Bandwidth::Fixed(h);
    let vt = current_drift(
        &estimate_forward_drift(tilde, k, grid).unwrap(),
        &estimate_backward_drift(tilde, k, grid).unwrap(),
    )
    .unwrap()
    .kernel_smoothed(&[h])
    .unwrap();
    let last = reference.n_times() - 1;
    let vr = current_drift(
        &estimate_forward_drift_pooled(reference, 0..last, grid).unwrap(),
        &estimate_backward_drift_pooled(reference, 1..last + 1, grid).unwrap(),
    )
    .unwrap()
    .kernel_smoothed(&[h])
    .unwrap();
    let rho = estimate_density_pooled(reference, 0..last + 1, grid, bw).unwrap();
    let rho_t = estimate_density(tilde, k, grid, bw).unwrap();
    let rate = relative_entropy_rate(&rho_t, &rho, &vt.to_vector_field(), &vr.to_vector_field()).unwrap().value;
    let d = |i| relative_entropy(&estimate_density(tilde, i, grid, bw).unwrap(), &rho).unwrap().value;
    let fd = (d(k + lag) - d(k - lag)) / (2.0 * lag as f64 * tilde.dt());
    (rate, fd)
}

#[test]
fn divergence_rate_with_current_drifts() {
    let cfg = |n, seed| EnsembleConfig::new(n, 1e-3, 0.4, seed).record_every(10);
    let x_t = InitialDistribution::scalar_gaussian(1.0, 2.0).unwrap();
    let x_r = InitialDistribution::scalar_gaussian(0.0, 1.0).unwrap();
    let grid = Grid::uniform_1d(-5.0, 6.0, 55).unwrap();
    let (k, lag, h) = (30, 3, 0.2);

    let tilde = simulate_overdamped(&ou(), None, &x_t, &cfg(100_000, 31)).unwrap();
    let reference = simulate_overdamped(&ou(), None, &x_r, &cfg(100_000, 32)).unwrap();
    let (rate, fd) = rate_and_fd(&tilde, &reference, k, lag, &grid, h);

    // batch means over ten independent sub-ensembles, scaled to the full size
    let diffs: Vec<f64> = (0..10)
        .map(|b| {
            let t = simulate_overdamped(&ou(), None, &x_t, &cfg(10_000, 100 + b)).unwrap();
            let r = simulate_overdamped(&ou(), None, &x_r, &cfg(10_000, 200 + b)).unwrap();
            let (a, f) = rate_and_fd(&t, &r, k, lag, &grid, h);
            a - f
        })
        .collect();
    let se = Estimate::from_samples(&diffs).se / 10f64.sqrt();
    assert!((rate - fd).abs() < 3.0 * se, "rate {rate}, difference quotient {fd}, se {se}");
}

use fluidtree::fluid::{default_horizon, solve_fluid, DiscretizationConfig, FluidSolution, Horizon};
use fluidtree::network::{build_matrices, random_reentrant, standard_crisscross, standard_rybko_stolyar, NetworkSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec_for(kind: u8, seed: u64) -> NetworkSpec<f64> {
    match kind % 3 {
        0 => standard_crisscross(),
        1 => standard_rybko_stolyar(),
        _ => random_reentrant(2, 0.75, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap(),
    }
}

fn state(n: usize, raw: &[f64]) -> Vec<f64> {
    (0..n).map(|i| raw[i % raw.len()]).collect()
}

/// Re-derives the trajectory and cost from the controls alone.
fn check_consistency(spec: &NetworkSpec<f64>, sol: &FluidSolution) -> Result<(), TestCaseError> {
    let (a, d) = build_matrices(spec).unwrap();
    let mut x = sol.x_nodes[0].clone();
    let mut cost = 0.0;
    let holding = |x: &[f64]| x.iter().zip(spec.c()).map(|(v, c)| v * c).sum::<f64>();
    for (k, u) in sol.u_pieces.iter().enumerate() {
        prop_assert!(u.iter().all(|v| *v >= -1e-9 && *v <= 1.0 + 1e-9));
        prop_assert!(d.mul_vec(u).iter().all(|s| *s <= 1.0 + 1e-9));
        let h = sol.grid[k + 1] - sol.grid[k];
        let drift = a.mul_vec(u);
        let next: Vec<f64> = (0..spec.n()).map(|i| x[i] + h * (drift[i] + spec.lambda()[i])).collect();
        let scale = 1.0 + x.iter().cloned().fold(0.0, f64::max);
        for (p, q) in next.iter().zip(&sol.x_nodes[k + 1]) {
            prop_assert!((p - q).abs() <= 1e-7 * scale, "interval {}: {} vs {}", k, p, q);
        }
        prop_assert!(sol.x_nodes[k + 1].iter().all(|v| *v >= -1e-8 * scale));
        cost += 0.5 * h * (holding(&x) + holding(&next));
        x = sol.x_nodes[k + 1].clone();
    }
    prop_assert!((cost - sol.objective).abs() <= 1e-6 * (1.0 + sol.objective));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trajectory_follows_the_dynamics(kind in 0u8..3, seed in any::<u64>(), raw in prop::collection::vec(0.0f64..2.0, 1..6)) {
        let spec = spec_for(kind, seed);
        let x0 = state(spec.n(), &raw);
        prop_assume!(x0.iter().any(|v| *v > 1e-3));
        let sol = solve_fluid(&spec, &x0, &DiscretizationConfig::with_intervals(60)).unwrap();
        check_consistency(&spec, &sol)?;
        let resid = sol.x_nodes.last().unwrap().iter().cloned().fold(0.0, f64::max);
        prop_assert!(resid <= 1e-6 * (1.0 + x0.iter().cloned().fold(0.0, f64::max)));
    }

    #[test]
    fn value_scales_quadratically(kind in 0u8..3, seed in any::<u64>(), raw in prop::collection::vec(0.05f64..2.0, 1..6), alpha in 0.2f64..5.0) {
        let spec = spec_for(kind, seed);
        let x0 = state(spec.n(), &raw);
        let cfg = DiscretizationConfig::with_intervals(60);
        let v1 = solve_fluid(&spec, &x0, &cfg).unwrap().objective;
        let xa: Vec<f64> = x0.iter().map(|v| alpha * v).collect();
        // the automatic horizon is linear in the state, so the grids are similar
        let t1 = default_horizon(&spec, &x0).unwrap();
        prop_assert!((default_horizon(&spec, &xa).unwrap() - alpha * t1).abs() <= 1e-9 * alpha * t1);
        let va = solve_fluid(&spec, &xa, &cfg).unwrap().objective;
        prop_assert!((va - alpha * alpha * v1).abs() <= 1e-6 * alpha * alpha * v1, "{} vs {}", va, alpha * alpha * v1);
    }

    #[test]
    fn doubling_a_nested_grid_never_raises_the_cost(kind in 0u8..3, seed in any::<u64>(), raw in prop::collection::vec(0.05f64..2.0, 1..6), grading in 1.0f64..3.0) {
        let spec = spec_for(kind, seed);
        let x0 = state(spec.n(), &raw);
        let t = default_horizon(&spec, &x0).unwrap();
        let coarse = DiscretizationConfig { horizon: Horizon::Fixed(t), intervals: 30, grading, ..Default::default() };
        let fine = DiscretizationConfig { intervals: 60, ..coarse.clone() };
        let vc = solve_fluid(&spec, &x0, &coarse).unwrap().objective;
        let vf = solve_fluid(&spec, &x0, &fine).unwrap().objective;
        prop_assert!(vf <= vc + 1e-8 * (1.0 + vc), "{} > {}", vf, vc);
    }
}

#[test]
fn costates_are_non_negative_and_vanish_at_the_end() {
    let spec = standard_crisscross();
    let sol = solve_fluid(&spec, &[1.0, 1.0, 1.0], &DiscretizationConfig::default()).unwrap();
    let scale = 1.0 + sol.horizon();
    for y in &sol.costate_intervals {
        assert!(y.iter().all(|v| *v >= -1e-7 * scale));
    }
    assert!(sol.costate_nodes.last().unwrap().iter().all(|v| v.abs() <= 1e-6 * scale));
}

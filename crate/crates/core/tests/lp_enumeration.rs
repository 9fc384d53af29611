mod common;

use common::lp_oracle::{oracle, random_lp};
use fluidtree::lp::{solve_lp, LpStatus};
use proptest::prelude::*;

fn check(seed: u64) -> Result<(), TestCaseError> {
    let lp = random_lp(seed);
    let (status, obj) = oracle(&lp.a, &lp.b, &lp.c, &lp.lo, &lp.up);
    let problem = lp.to_problem();
    let sol = solve_lp(&problem, 1e-9, 10_000).map_err(|e| TestCaseError::fail(format!("seed {seed}: {e}")))?;
    prop_assert_eq!(sol.status, status, "seed {}", seed);
    if let Some(obj) = obj {
        prop_assert!((sol.objective - obj).abs() <= 1e-8 * (1.0 + obj.abs()), "seed {}: {} vs {}", seed, sol.objective, obj);
        for j in 0..lp.c.len() {
            prop_assert!(sol.primal[j] >= lp.lo[j] - 1e-9 && sol.primal[j] <= lp.up[j] + 1e-9);
        }
        prop_assert!((sol.dual_objective(&problem) - sol.objective).abs() <= 1e-8 * (1.0 + obj.abs()));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]
    #[test]
    fn simplex_matches_vertex_enumeration(seed in any::<u64>()) {
        check(seed)?;
    }
}

#[test]
fn dual_objective_equals_primal_on_transportation_problem() {
    // 2 supplies, 3 demands, balanced
    let cost = [[4.0, 6.0, 9.0], [5.0, 3.0, 8.0]];
    let supply = [30.0, 40.0];
    let demand = [20.0, 25.0, 25.0];
    let mut a = vec![vec![0.0; 6]; 5];
    for i in 0..2 {
        for j in 0..3 {
            a[i][3 * i + j] = 1.0;
            a[2 + j][3 * i + j] = 1.0;
        }
    }
    // drop one redundant demand row
    a.truncate(4);
    let b = vec![supply[0], supply[1], demand[0], demand[1]];
    let c: Vec<f64> = cost.iter().flatten().copied().collect();
    let lo = vec![0.0; 6];
    let up = vec![f64::INFINITY; 6];
    let (status, obj) = oracle(&a, &b, &c, &lo, &up);
    assert_eq!(status, LpStatus::Optimal);
    let problem = fluidtree::lp::LpProblem::nonnegative(c, fluidtree::lp::CscMatrix::from_dense(&a), b);
    let sol = solve_lp(&problem, 1e-9, 1000).unwrap();
    assert!((sol.objective - obj.unwrap()).abs() < 1e-9);
}

use microhub::ca_model::*;
use microhub::optimizer::*;
use proptest::prelude::*;

fn spec(lambda: f64, fleet: u32, max_zones: usize, max_batch: usize) -> DesignSearchSpec {
    let mut s = DesignSearchSpec::new(
        MarketScenario {
            lambda,
            fleet,
            ..MarketScenario::baseline()
        },
        VarianceParams::recalibrated(),
    );
    s.max_zones = max_zones;
    s.max_batch = max_batch;
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rescan_and_count_identity(lambda in 0.1..4.3f64, fleet in 5u32..120, kz in 1usize..20, nb in 1usize..30, div in any::<bool>()) {
        let mut sp = spec(lambda, fleet, kz, nb);
        sp.require_divisible = div;
        match solve_design(&sp) {
            Ok(sol) => {
                prop_assert_eq!(sol.frontier.len() + sol.infeasible_count(), kz * nb);
                // independent re-scan of the frontier
                let mut best = &sol.frontier[0];
                for c in &sol.frontier {
                    let again = evaluate_design(&sp.scenario, &c.design, &sp.params).unwrap();
                    prop_assert!((again - c.objective).abs() <= 1e-9 * again.abs());
                    prop_assert!(c.metrics.rho <= sp.rho_cap);
                    if c.objective < best.objective {
                        best = c;
                    }
                }
                prop_assert_eq!(best.design, sol.best);
            }
            Err(microhub::Error::NoFeasibleDesign { min_rho }) => prop_assert!(min_rho > sp.rho_cap || div),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn argmin_invariant_to_cost_scaling(lambda in 0.1..4.3f64, c in 0.01..100.0f64) {
        let sp = spec(lambda, 40, 36, 50);
        let mut scaled = sp;
        scaled.scenario.cost_per_mile *= c;
        scaled.scenario.value_of_time *= c;
        let a = solve_design(&sp).unwrap();
        let b = solve_design(&scaled).unwrap();
        prop_assert_eq!(a.best, b.best);
        prop_assert!((b.objective - c * a.objective).abs() <= 1e-9 * b.objective);
    }
}

#[test]
fn shrinking_fleet_never_lowers_optimal_cost() {
    let mut prev = 0.0;
    for fleet in (10..=100).rev().step_by(5) {
        let o = solve_design(&spec(1.0, fleet, 36, 50)).unwrap().objective;
        assert!(o >= prev - 1e-9, "fleet {fleet}: {o} < {prev}");
        prev = o;
    }
}

#[test]
fn deterministic() {
    let sp = spec(1.0, 40, 36, 50);
    assert_eq!(solve_design(&sp).unwrap(), solve_design(&sp).unwrap());
}

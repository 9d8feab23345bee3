use microhub::ca_model::*;
use microhub::calibration::*;
use microhub::geometry::DistanceMetric;

fn noise_free(params: &VarianceParams, speed: f64) -> TourSampleGrid {
    let g = GridSpec::default();
    let cells = g
        .areas
        .iter()
        .flat_map(|&a| g.node_counts.iter().map(move |&n| (a, n)))
        .map(|(a, n)| {
            let mean_dist = expected_tour_distance(a, n).unwrap();
            let var_dist = params.c * a * (params.gamma / (n as f64).powf(params.alpha) + params.beta);
            TourSampleCell {
                area: a,
                nodes: n,
                replications: g.replications,
                mean_time: mean_dist / speed,
                var_time: var_dist / (speed * speed),
                mean_dist,
                var_dist,
            }
        })
        .collect();
    TourSampleGrid {
        seed: 1,
        metric: DistanceMetric::Manhattan,
        speed,
        cells,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn recovers_identifiable_combinations() {
    let planted = [(10.0, 100.0, 2.0, 5.0), (0.5, 3.0, 1.2, 0.1), (27.49, 465.40, 2.37, 45.57)];
    for (c, gamma, alpha, beta) in planted {
        let p = VarianceParams {
            c,
            gamma,
            alpha,
            beta,
            time_unit: TimeUnit::Hours,
        };
        let r = fit_variance_model(&noise_free(&p, 40.0)).unwrap();
        assert!(r.r2_var > 0.999999, "{r:?}");
        assert!((r.r2_mean - 1.0).abs() < 1e-12);
        assert!(rel(r.c_gamma, c * gamma) < 0.01, "C*gamma {} vs {}", r.c_gamma, c * gamma);
        assert!(rel(r.c_beta, c * beta) < 0.01, "C*beta {} vs {}", r.c_beta, c * beta);
        assert!(rel(r.params.alpha, alpha) < 0.01, "alpha {} vs {alpha}", r.params.alpha);
    }
}

#[test]
fn too_small_grid_is_insufficient() {
    let p = VarianceParams::recalibrated();
    let mut g = noise_free(&p, 40.0);
    g.cells.retain(|c| c.area == 25.0);
    assert!(matches!(fit_variance_model(&g), Err(microhub::Error::InsufficientData(_))));
}

use microhub::geometry::*;
use proptest::prelude::*;

fn pt() -> impl Strategy<Value = Point> {
    (-50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y)| Point::new(x, y))
}

proptest! {
    #[test]
    fn metric_axioms(a in pt(), b in pt(), c in pt()) {
        for m in [DistanceMetric::Euclidean, DistanceMetric::Manhattan] {
            prop_assert!((distance(a, b, m) - distance(b, a, m)).abs() < 1e-12);
            prop_assert!(distance(a, c, m) <= distance(a, b, m) + distance(b, c, m) + 1e-9);
            prop_assert_eq!(distance(a, a, m), 0.0);
        }
        let e = distance(a, b, DistanceMetric::Euclidean);
        let l1 = distance(a, b, DistanceMetric::Manhattan);
        prop_assert!(e <= l1 + 1e-12 && l1 <= e * 2f64.sqrt() + 1e-9);
    }

    #[test]
    fn partition_tiles_region(area in 1.0..500.0f64, k in 1usize..40) {
        let region = Region::square(area).unwrap();
        let p = make_equal_partition(region, k).unwrap();
        prop_assert_eq!(p.zones(), k);
        let total: f64 = p.cells().iter().map(|c| c.area()).sum();
        prop_assert!((total - area).abs() < 1e-9 * area);
        for c in p.cells() {
            prop_assert!((c.area() - area / k as f64).abs() < 1e-9 * area);
        }
    }

    #[test]
    fn zone_of_agrees_with_cells(area in 1.0..500.0f64, k in 1usize..40, seed in any::<u64>()) {
        let region = Region::square(area).unwrap();
        let p = make_equal_partition(region, k).unwrap();
        let mut rng = stream_rng(seed, streams::PICKUP_POINTS);
        for q in sample_uniform_points(&region, 50, &mut rng) {
            prop_assert!(region.bounds().contains(q));
            prop_assert!(p.cell(p.zone_of(q)).contains(q));
        }
    }

    #[test]
    fn arrivals_sorted_inside_horizon(rate in 0.0..200.0f64, horizon in 0.01..10.0f64, seed in any::<u64>()) {
        let mut rng = stream_rng(seed, streams::ARRIVAL_TIMES);
        let t = sample_poisson_arrivals(rate, horizon, &mut rng).unwrap();
        prop_assert!(t.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(t.iter().all(|&x| x > 0.0 && x <= horizon));
    }
}

#[test]
fn poisson_count_matches_rate() {
    // mean of 200 runs of a rate-50 process over 2 h: 100 +- 3 sigma/sqrt(200)
    let total: usize = (0..200)
        .map(|i| {
            let mut rng = stream_rng(derive_seed(9, i), streams::ARRIVAL_TIMES);
            sample_poisson_arrivals(50.0, 2.0, &mut rng).unwrap().len()
        })
        .sum();
    let mean = total as f64 / 200.0;
    assert!((mean - 100.0).abs() < 3.0 * 10.0 / 200f64.sqrt(), "{mean}");
}

#[test]
fn hub_at_centroid() {
    let r = Region::square(100.0).unwrap();
    assert_eq!(r.hub(), Point::new(5.0, 5.0));
    assert!((r.side() * r.side() - 100.0).abs() < 1e-9);
}

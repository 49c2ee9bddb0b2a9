mod common;

use common::gallery;
use frontspeed_core::bounds::estimate;
use frontspeed_core::model::Numerics;

#[test]
fn doubling_the_search_grid_is_harmless() {
    for case in gallery() {
        let a = estimate(&case.spec).unwrap();
        let numerics = Numerics {
            extremum_grid: 2 * case.spec.numerics.extremum_grid - 1,
            ..case.spec.numerics.clone()
        };
        let b = estimate(&case.spec.clone().with_numerics(numerics)).unwrap();
        for (x, y) in [
            (a.f_mean_sup.value, b.f_mean_sup.value),
            (a.g_mean_inf.value, b.g_mean_inf.value),
            (a.h_mean_sup.value, b.h_mean_sup.value),
        ] {
            assert!((x - y).abs() < 1e-6, "{}: {x} vs {y}", case.name);
        }
    }
}

#[test]
fn extrema_at_zero_pin_the_speed() {
    for case in gallery() {
        let b = estimate(&case.spec).unwrap();
        assert!(b.lower <= b.upper + 1e-9);
        assert!(b.g_mean_inf.value > 0.0);
        if b.extrema_at_zero {
            assert!(b.width() < 1e-8, "{}: {}", case.name, b.width());
        }
    }
}

mod common;

use common::goldens;
use common::thermal_oracle as oracle;
use gshp_core::sizing::SPACINGS;
use gshp_core::thermal::{self, GroundColumn};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn goldens_match_live_oracle() {
    // the cheap cases; the rest were recorded with the same code
    let t = 50.0 * oracle::SECONDS_PER_YEAR;
    let (h, r) = goldens::LONG_TERM[0];
    assert!(rel(oracle::point_source_fls(0.06, h, t, 2.0, 1e-6), r) < 1e-9);
    let (b, h, r) = goldens::FIELD_3X3[2];
    assert!(rel(oracle::pairwise_field(&oracle::grid(b, 3, 3), h, t, 2.0, 1e-6), r) < 1e-9);
}

#[test]
fn long_term_and_seasonal_match_goldens() {
    let g = GroundColumn::reference();
    for (h, r) in goldens::LONG_TERM {
        assert!(rel(thermal::compute_r_lt(h, &g, 50.0).unwrap(), r) < 1e-4, "R_LT at H={h}");
    }
    for (h, r) in goldens::SEASONAL {
        assert!(rel(thermal::compute_r_seas(h, &g).unwrap(), r) < 1e-4, "R_seas at H={h}");
    }
}

#[test]
fn field_matches_goldens() {
    let g = GroundColumn::reference();
    for (b, h, r) in goldens::FIELD_3X3 {
        assert!(rel(thermal::compute_r_field(b, h, 3, 3, &g, 50.0).unwrap(), r) < 1e-4, "B={b} H={h}");
    }
}

#[test]
fn irregular_field_matches_pairwise_sum() {
    let g = GroundColumn::reference();
    let pts = vec![[0.0, 0.0], [7.0, 1.0], [3.0, 9.0], [15.0, 4.0], [11.0, 12.0]];
    let t = 20.0 * oracle::SECONDS_PER_YEAR;
    let want = oracle::pairwise_field(&pts, 120.0, t, 2.0, 1e-6);
    let got = thermal::field_resistance(&pts, 120.0, &g, 20.0).unwrap();
    assert!(rel(got, want) < 1e-4);
}

#[test]
fn field_decreases_over_all_spacings() {
    let g = GroundColumn::reference();
    let r: Vec<f64> = SPACINGS
        .iter()
        .map(|&b| thermal::compute_r_field(b, 150.0, 5, 5, &g, 50.0).unwrap())
        .collect();
    assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn response_decreases_with_distance(r in 0.1f64..50.0, dr in 0.5f64..50.0, h in 30.0f64..250.0, years in 0.1f64..60.0) {
        let g = GroundColumn::reference();
        let t = years * oracle::SECONDS_PER_YEAR;
        let near = thermal::fls_step_response(r, h, t, &g).unwrap();
        let far = thermal::fls_step_response(r + dr, h, t, &g).unwrap();
        prop_assert!(near >= far);
    }

    #[test]
    fn response_grows_with_time(years in 0.05f64..40.0, more in 0.05f64..20.0) {
        let g = GroundColumn::reference();
        let a = thermal::compute_r_lt(100.0, &g, years).unwrap();
        let b = thermal::compute_r_lt(100.0, &g, years + more).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn response_scales_inversely_with_conductivity(lambda in 0.8f64..4.0) {
        // α fixed, so only the 1/λ prefactor changes
        let base = GroundColumn::reference();
        let g = base.clone().with_lambda(lambda);
        let a = thermal::compute_r_lt(100.0, &base, 30.0).unwrap() * base.lambda;
        let b = thermal::compute_r_lt(100.0, &g, 30.0).unwrap() * lambda;
        prop_assert!(rel(b, a) < 1e-9);
    }

    #[test]
    fn field_term_is_translation_and_order_invariant(dx in -500.0f64..500.0, dy in -500.0f64..500.0) {
        let g = GroundColumn::reference();
        let pts = vec![[0.0, 0.0], [10.0, 0.0], [0.0, 20.0], [30.0, 25.0]];
        let moved: Vec<[f64; 2]> = pts.iter().rev().map(|p| [p[0] + dx, p[1] + dy]).collect();
        let a = thermal::field_resistance(&pts, 100.0, &g, 50.0).unwrap();
        let b = thermal::field_resistance(&moved, 100.0, &g, 50.0).unwrap();
        prop_assert!(rel(b, a) < 1e-6);
    }
}

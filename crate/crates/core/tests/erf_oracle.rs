mod common;

use cellbandit::stochastics::{erf, erfc};
use common::{erf_ref, erfc_continued_fraction, erf_series};

#[test]
fn oracles_agree_where_both_apply() {
    for i in 0..=100 {
        let x = 2.0 + i as f64 * 0.02;
        let a = 1.0 - erf_series(x);
        let b = erfc_continued_fraction(x);
        assert!((a - b).abs() < 1e-14, "x={x}: {a} vs {b}");
    }
}

#[test]
fn erf_matches_reference_on_dense_grid() {
    let mut worst = 0.0f64;
    for i in -60_000..=60_000 {
        let x = i as f64 * 1e-4;
        let err = (erf(x) - erf_ref(x)).abs();
        worst = worst.max(err);
    }
    assert!(worst <= 1e-12, "max abs error {worst:e}");
}

#[test]
fn erfc_tail_has_small_relative_error() {
    for i in 0..=2500 {
        let x = 2.0 + i as f64 * 0.01;
        let want = erfc_continued_fraction(x);
        let got = erfc(x);
        assert!(((got - want) / want).abs() < 1e-12, "x={x}: {got:e} vs {want:e}");
    }
}

#[test]
fn reference_values() {
    assert_eq!(erf(0.0), 0.0);
    assert!((erf(std::f64::consts::FRAC_1_SQRT_2) - 0.682_689_492_137_085_9).abs() < 1e-15);
    assert_eq!(erf(f64::INFINITY), 1.0);
    assert_eq!(erf(f64::NEG_INFINITY), -1.0);
    assert_eq!(erfc(f64::INFINITY), 0.0);
    assert!(erf(f64::NAN).is_nan());
}

#[test]
fn odd_monotone_and_bounded() {
    let mut prev = -1.0;
    for i in -8000..=8000 {
        let x = i as f64 * 1e-3;
        let y = erf(x);
        assert_eq!(erf(-x), -y);
        assert!((-1.0..=1.0).contains(&y));
        assert!(y >= prev);
        assert!((erfc(x) - (1.0 - y)).abs() < 1e-15);
        prev = y;
    }
}

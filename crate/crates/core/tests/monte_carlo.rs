mod common;

use proptest::prelude::*;

use rvol_core::bergomi::implied_vol;
use rvol_core::kernel::{ExpSumKernel, RoughKernel};
use rvol_core::mc::{
    paired_compare, price, price_many, rate_estimator_gamma_hat, McConfig, Payoff,
};
use rvol_core::quadrature::{build_systematic, truncate_factors};
use rvol_core::schemes::{
    build_heston_scheme, GridSpec, HestonMultifactor, HestonParams, HestonSchemeKind,
    HestonVolterra,
};

use common::bs_call;

fn cheap_scheme(steps: usize) -> rvol_core::schemes::AnyHestonScheme {
    let k = build_systematic(&RoughKernel::new(0.1).unwrap(), 20, 1.0).unwrap();
    build_heston_scheme(
        HestonSchemeKind::Multifactor,
        HestonParams::benchmark(),
        0.1,
        &k,
        GridSpec::new(1.0, steps).unwrap(),
        1.0,
    )
    .unwrap()
}

const ATM: Payoff = Payoff::EuroCall { strike: 1.0 };

#[test]
fn repeated_runs_are_bit_identical() {
    let s = cheap_scheme(8);
    let cfg = McConfig::new(3000, 42, 1).unwrap();
    let a = price(&s, ATM, &cfg).unwrap();
    let b = price(&s, ATM, &cfg).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.half_width_95.to_bits(), b.half_width_95.to_bits());
    assert_ne!(
        a.mean,
        price(&s, ATM, &McConfig::new(3000, 43, 1).unwrap())
            .unwrap()
            .mean
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mean_does_not_depend_on_worker_count(workers in 2usize..9, paths in 1u64..2500, seed in any::<u64>()) {
        let s = cheap_scheme(5);
        let one = price(&s, ATM, &McConfig::new(paths, seed, 1).unwrap()).unwrap();
        let many = price(&s, ATM, &McConfig::new(paths, seed, workers).unwrap()).unwrap();
        prop_assert_eq!(one.mean.to_bits(), many.mean.to_bits());
        prop_assert_eq!(one.half_width_95.to_bits(), many.half_width_95.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn implied_vol_inverts_black_scholes(vol in 0.02f64..1.5, k in 0.6f64..1.6, t in 0.01f64..3.0) {
        let p = bs_call(1.0, k, t, vol);
        // skip prices indistinguishable from intrinsic in double precision
        prop_assume!(p - (1.0 - k).max(0.0) > 1e-9);
        let iv = implied_vol(p, 1.0, k, t).unwrap();
        prop_assert!((iv - vol).abs() <= 1e-6, "{} vs {}", iv, vol);
    }
}

#[test]
fn implied_vol_bounds() {
    assert!((implied_vol(bs_call(1.0, 1.0, 1.0, 0.2), 1.0, 1.0, 1.0).unwrap() - 0.2).abs() < 1e-8);
    assert_eq!(implied_vol(0.25, 1.0, 0.75, 1.0).unwrap(), 0.0);
    assert!(implied_vol(0.2, 1.0, 0.75, 1.0).is_err());
    assert!(implied_vol(1.0, 1.0, 0.75, 1.0).is_err());
}

#[test]
fn half_width_shrinks_like_inverse_root_of_paths() {
    let s = cheap_scheme(2);
    let small = price(&s, ATM, &McConfig::new(10_000, 7, 1).unwrap()).unwrap();
    let large = price(&s, ATM, &McConfig::new(1_000_000, 7, 1).unwrap()).unwrap();
    let ratio = small.half_width_95 / large.half_width_95;
    assert!((ratio / 10.0 - 1.0).abs() <= 0.10, "ratio {ratio}");
}

#[test]
fn lookback_dominates_european_pathwise() {
    let s = cheap_scheme(16);
    let r = price_many(
        &s,
        &[ATM, Payoff::Lookback { strike: 1.0 }],
        &McConfig::new(5000, 1, 1).unwrap(),
    )
    .unwrap();
    assert!(r[1].mean >= r[0].mean);
    assert_eq!(r[0].paths, 5000);
}

#[test]
fn frozen_variance_has_no_noise() {
    let p = HestonParams::new(0.0, 0.0, 0.3, 0.3, -0.7, 1.2).unwrap();
    let k = ExpSumKernel::new(vec![1.0], vec![0.5]).unwrap();
    let s = HestonMultifactor::new(p, &k, GridSpec::new(1.0, 10).unwrap()).unwrap();
    let r = price(
        &s,
        Payoff::EuroCall { strike: 1.0 },
        &McConfig::new(1000, 1, 1).unwrap(),
    )
    .unwrap();
    assert_eq!(r.half_width_95, 0.0);
    assert!((r.mean - 0.2).abs() < 1e-12);
}

#[test]
fn paired_comparisons() {
    let h = RoughKernel::new(0.1).unwrap();
    let k = build_systematic(&h, 100, 1.0).unwrap();
    let grid = GridSpec::new(1.0, 40).unwrap();
    let p = HestonParams::benchmark();
    let cfg = McConfig::new(20_000, 3, 1).unwrap();

    let mf = HestonMultifactor::new(p, &k, grid).unwrap();
    let same = paired_compare(&mf, &mf, ATM, &cfg).unwrap();
    assert_eq!(same.diff_mean, 0.0);
    assert_eq!(same.diff_half_width, 0.0);

    // exponential-sum kernel: the two schemes coincide path by path
    let vol = HestonVolterra::new(p, &k, grid).unwrap();
    let eq = paired_compare(&mf, &vol, ATM, &cfg).unwrap();
    assert!(eq.diff_mean.abs() <= 1e-10);

    // dropping the fast factors barely moves the price and the paired
    // estimate is far tighter than either price on its own
    let (head, n) = truncate_factors(&k, 1.0, 40, 1.0).unwrap();
    assert!(n < k.len());
    let cut = HestonMultifactor::new(p, &head, grid).unwrap();
    let d = paired_compare(&mf, &cut, ATM, &cfg).unwrap();
    let alone = price(&mf, ATM, &cfg).unwrap();
    assert!(d.diff_half_width < 0.2 * alone.half_width_95);
    assert!(
        d.diff_mean.abs() <= 3.0 * d.diff_half_width / 1.96 + 5e-4,
        "{d:?}"
    );
}

#[test]
fn rate_estimator_examples() {
    assert_eq!(rate_estimator_gamma_hat(0.3, 0.3, 0.25).unwrap(), 0.0);
    let h = 0.25;
    assert!((rate_estimator_gamma_hat(2f64.powf(2.0 * h), 1.0, h).unwrap() - 1.0).abs() < 1e-14);
    assert!((rate_estimator_gamma_hat(0.0413, 0.0313, 0.25).unwrap() - 0.80016).abs() < 1e-3);
    assert!(rate_estimator_gamma_hat(0.0, 0.1, 0.25).is_err());
}

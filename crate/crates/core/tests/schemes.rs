mod common;

use proptest::prelude::*;

use rvol_core::kernel::{ExpSumKernel, RoughKernel};
use rvol_core::mc::NormalStream;
use rvol_core::quadrature::build_systematic;
use rvol_core::schemes::{
    build_heston_scheme, multifactor_euler_pair, volterra_euler, GridSpec, HestonParams,
    HestonScheme, HestonSchemeKind, Workspace,
};

use common::*;

const EQUIVALENCE_TOL: f64 = 1e-9;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn multifactor_reproduces_volterra_euler(seed in any::<u64>()) {
        let c = equivalence_case(seed);
        let gap = generic_discrepancy(&c);
        prop_assert!(gap <= EQUIVALENCE_TOL, "discrepancy {:e}", gap);
        let v = volterra_euler(&c.plant, &c.kernel, &c.kernel, &c.grid, &c.dw).unwrap();
        prop_assert_eq!(v.state(0), c.plant.x0.as_slice());
    }

    #[test]
    fn two_kernel_multifactor_reproduces_volterra_euler(seed in any::<u64>(), scale in 0.1f64..3.0) {
        let c = equivalence_case(seed);
        let k2 = ExpSumKernel::new(c.kernel.weights().iter().map(|a| a * scale).collect(), c.kernel.rates().to_vec()).unwrap();
        let v = volterra_euler(&c.plant, &c.kernel, &k2, &c.grid, &c.dw).unwrap();
        let m = multifactor_euler_pair(&c.plant, &c.kernel, &k2, &c.grid, &c.dw).unwrap();
        let gap = v.states.iter().zip(&m.states).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= EQUIVALENCE_TOL, "discrepancy {:e}", gap);
    }

    #[test]
    fn heston_multifactor_reproduces_volterra_on_expsum_kernel(seed in any::<u64>()) {
        let (plain, integrated) = heston_discrepancy(seed);
        prop_assert!(plain <= EQUIVALENCE_TOL, "variance scheme {:e}", plain);
        prop_assert!(integrated <= EQUIVALENCE_TOL, "integrated scheme {:e}", integrated);
    }
}

fn pricing_kernel() -> ExpSumKernel {
    build_systematic(&RoughKernel::new(0.1).unwrap(), 40, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schemes_stay_finite_under_extreme_draws(
        kind in prop::sample::select(HestonSchemeKind::ALL.to_vec()),
        steps in 1usize..60,
        seed in any::<u64>(),
        blowup in 1.0f64..8.0,
    ) {
        // large vol-of-vol drives V negative; (V)_+ must keep every value finite
        let params = HestonParams::new(0.02, 0.02, 0.3, 2.5, -0.7, 1.0).unwrap();
        let grid = GridSpec::new(1.0, steps).unwrap();
        let s = build_heston_scheme(kind, params, 0.1, &pricing_kernel(), grid, 1.0).unwrap();
        let mut rng = NormalStream::new(seed, 0);
        let z: Vec<f64> = (0..steps * s.draws_per_step()).map(|_| blowup * rng.next_normal()).collect();
        let mut ws = Workspace::new();
        s.simulate(&z, &mut ws);
        prop_assert!(ws.y.iter().chain(&ws.v).all(|x| x.is_finite()));
        prop_assert_eq!(ws.y.len(), steps + 1);
        prop_assert_eq!(ws.y[0], 0.0);
    }

    #[test]
    fn running_max_is_nondecreasing(
        integrated_mf in any::<bool>(),
        steps in 2usize..80,
        seed in any::<u64>(),
    ) {
        let kind = if integrated_mf { HestonSchemeKind::IntegratedMultifactor } else { HestonSchemeKind::IntegratedVolterra };
        let params = HestonParams::new(0.02, 0.02, 0.3, 1.5, -0.7, 1.0).unwrap();
        let grid = GridSpec::new(1.0, steps).unwrap();
        let s = build_heston_scheme(kind, params, 0.1, &pricing_kernel(), grid, 1.0).unwrap();
        let mut rng = NormalStream::new(seed, 0);
        let z: Vec<f64> = (0..steps * s.draws_per_step()).map(|_| rng.next_normal()).collect();
        let mut ws = Workspace::new();
        s.simulate(&z, &mut ws);
        for k in 0..steps {
            // X̄ increments are the variances of the M increments
            prop_assert!(ws.xbar[k + 1] >= ws.xbar[k]);
            prop_assert!(ws.xbar[k + 1] >= ws.v[k + 1]);
        }
        prop_assert!(ws.m.iter().chain(&ws.m_perp).all(|x| x.is_finite()));
    }
}

#[test]
fn truncated_scheme_uses_fewer_factors_than_full() {
    let k = build_systematic(&RoughKernel::new(0.1).unwrap(), 100, 1.0).unwrap();
    let grid = GridSpec::new(1.0, 160).unwrap();
    let p = HestonParams::benchmark();
    let full = build_heston_scheme(HestonSchemeKind::Multifactor, p, 0.1, &k, grid, 1.0).unwrap();
    let cut = build_heston_scheme(
        HestonSchemeKind::MultifactorTruncated,
        p,
        0.1,
        &k,
        grid,
        1.0,
    )
    .unwrap();
    assert_eq!(full.name(), "multifactor(n=100)");
    assert_eq!(cut.name(), "multifactor(n=55)");
}

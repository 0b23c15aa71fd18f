//! Shared by the integration tests: numerical oracles that never call the
//! closed forms under test, and seeded generators of randomized scheme cases.

#![allow(dead_code)]

use std::f64::consts::PI;

use rvol_core::kernel::ExpSumKernel;
use rvol_core::mc::NormalStream;
use rvol_core::schemes::{
    multifactor_euler, volterra_euler, GridSpec, HestonIntegratedMultifactor,
    HestonIntegratedVolterra, HestonMultifactor, HestonParams, HestonVolterra, SvePlant, Workspace,
};

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite Gauss–Legendre over `panels` equal panels of `[a, b]`.
pub fn composite(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let rule = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        total += rule
            .iter()
            .map(|(x, w)| w * f(mid + 0.5 * h * x))
            .sum::<f64>()
            * 0.5
            * h;
    }
    total
}

/// `∫_0^t f(s) ds` for integrands with an algebraic singularity at 0 and
/// boundary layers of any width there: `s = t e^{-x}` turns both into
/// smooth, exponentially decaying functions of `x`.
pub fn integrate_from_zero(f: impl Fn(f64) -> f64, t: f64, x_max: f64) -> f64 {
    let panels = (x_max * 4.0).ceil() as usize;
    composite(
        |x| {
            let s = t * (-x).exp();
            // past underflow the transformed integrand is already negligible
            if s > 0.0 {
                f(s) * s
            } else {
                0.0
            }
        },
        0.0,
        x_max,
        panels,
        12,
    )
}

pub fn rough_g(h: f64, t: f64) -> f64 {
    t.powf(h - 0.5) / libm::tgamma(h + 0.5)
}

pub fn expsum(alpha: &[f64], rho: &[f64], t: f64) -> f64 {
    alpha.iter().zip(rho).map(|(a, r)| a * (-r * t).exp()).sum()
}

/// `∫_0^t (G - Ĝ)² ds` by quadrature.
pub fn zeta_oracle(h: f64, alpha: &[f64], rho: &[f64], t: f64) -> f64 {
    // integrand ~ s^{2H} near zero after the substitution
    let x_max = 40.0 / (2.0 * h) + 40.0;
    integrate_from_zero(
        |s| {
            let d = rough_g(h, s) - expsum(alpha, rho, s);
            d * d
        },
        t,
        x_max,
    )
}

/// `∫_x^∞ s^{a-1} e^{-s} ds` by quadrature on `[x, x + 80]`.
pub fn upper_gamma_oracle(a: f64, x: f64) -> f64 {
    composite(|s| s.powf(a - 1.0) * (-s).exp(), x, x + 80.0, 400, 16)
}

/// `∫_0^x s^{a-1} e^{-s} ds` by quadrature.
pub fn lower_gamma_oracle(a: f64, x: f64) -> f64 {
    integrate_from_zero(|s| s.powf(a - 1.0) * (-s).exp(), x, 40.0 / a + 40.0)
}

/// Zero-rate Black–Scholes call, written independently of the library.
pub fn bs_call(s0: f64, k: f64, t: f64, vol: f64) -> f64 {
    let n = |x: f64| 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2);
    let sd = vol * t.sqrt();
    let d1 = ((s0 / k).ln() + 0.5 * sd * sd) / sd;
    s0 * n(d1) - k * n(d1 - sd)
}

/// Relative error with an absolute floor.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `b(x) = A x + c`, `σ(x)_{ij} = S_{ij} (1 + ½ sin(x_j))`: globally Lipschitz.
pub struct LipschitzPlant {
    pub x0: Vec<f64>,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub s: Vec<f64>,
}

impl SvePlant for LipschitzPlant {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn x0(&self) -> &[f64] {
        &self.x0
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        for r in 0..d {
            out[r] = self.c[r] + (0..d).map(|j| self.a[r * d + j] * x[j]).sum::<f64>();
        }
    }

    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        for r in 0..d {
            for j in 0..d {
                out[r * d + j] = self.s[r * d + j] * (1.0 + 0.5 * x[j].sin());
            }
        }
    }
}

/// One randomized equivalence case.
pub struct EquivalenceCase {
    pub plant: LipschitzPlant,
    pub kernel: ExpSumKernel,
    pub grid: GridSpec,
    pub dw: Vec<f64>,
}

pub fn equivalence_case(seed: u64) -> EquivalenceCase {
    let mut rng = NormalStream::new(seed, 0);
    let mut u = || rng.next_uniform();
    let d = 1 + (u() * 3.0) as usize;
    let n = 1 + (u() * 8.0) as usize;
    let steps = 1 + (u() * 64.0) as usize;
    let horizon = 0.1 + 2.0 * u();
    let mut rho = if u() < 0.3 { 0.0 } else { 5.0 * u() };
    let mut weights = Vec::new();
    let mut rates = Vec::new();
    for _ in 0..n {
        weights.push(0.05 + 1.5 * u());
        rates.push(rho);
        rho += 0.01 + 20.0 * u() * u();
    }
    let mut sym = |len: usize, scale: f64| -> Vec<f64> {
        (0..len).map(|_| scale * (2.0 * u() - 1.0)).collect()
    };
    let plant = LipschitzPlant {
        x0: sym(d, 1.0),
        a: sym(d * d, 0.8),
        c: sym(d, 0.5),
        s: sym(d * d, 0.7),
    };
    let grid = GridSpec::new(horizon, steps).unwrap();
    let mut dw = vec![0.0; steps * d];
    let mut z = NormalStream::new(seed, 1);
    for x in &mut dw {
        *x = z.next_normal() * grid.dt().sqrt();
    }
    EquivalenceCase {
        plant,
        kernel: ExpSumKernel::new(weights, rates).unwrap(),
        grid,
        dw,
    }
}

/// Largest state discrepancy between the Volterra and multifactor schemes.
pub fn generic_discrepancy(c: &EquivalenceCase) -> f64 {
    let v = volterra_euler(&c.plant, &c.kernel, &c.kernel, &c.grid, &c.dw).unwrap();
    let m = multifactor_euler(&c.plant, &c.kernel, &c.grid, &c.dw).unwrap();
    v.states
        .iter()
        .zip(&m.states)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Heston parameters drawn from a box around the benchmark.
pub fn heston_case(seed: u64) -> (HestonParams, EquivalenceCase) {
    let mut rng = NormalStream::new(seed, 2);
    let mut u = || rng.next_uniform();
    let p = HestonParams::new(
        0.005 + 0.1 * u(),
        0.005 + 0.1 * u(),
        2.0 * u(),
        0.1 + 0.6 * u(),
        -0.95 + 1.9 * u(),
        0.5 + u(),
    )
    .unwrap();
    (p, equivalence_case(seed))
}

/// Largest discrepancy in `(Y, V)` between the Heston Volterra and multifactor
/// schemes, and between their integrated-variance versions, on Ĝ.
pub fn heston_discrepancy(seed: u64) -> (f64, f64) {
    let (p, c) = heston_case(seed);
    let n = c.grid.steps();
    let mut z = NormalStream::new(seed, 3);
    let mut draw = || -> Vec<f64> { (0..n).map(|_| z.next_normal()).collect() };
    let (z1, z2) = (draw(), draw());
    let sq = c.grid.dt().sqrt();
    let (dw, dw_perp): (Vec<f64>, Vec<f64>) =
        z1.iter().zip(&z2).map(|(a, b)| (a * sq, b * sq)).unzip();

    let (mut wa, mut wb) = (Workspace::new(), Workspace::new());
    HestonVolterra::new(p, &c.kernel, c.grid)
        .unwrap()
        .run(&dw, &dw_perp, &mut wa);
    HestonMultifactor::new(p, &c.kernel, c.grid)
        .unwrap()
        .run(&dw, &dw_perp, &mut wb);
    let plain = max_diff(&wa.y, &wb.y).max(max_diff(&wa.v, &wb.v));

    HestonIntegratedVolterra::new(p, &c.kernel, c.grid)
        .unwrap()
        .run(&z1, &z2, &mut wa);
    HestonIntegratedMultifactor::new(p, &c.kernel, c.grid)
        .unwrap()
        .run(&z1, &z2, &mut wb);
    let integrated = max_diff(&wa.y, &wb.y)
        .max(max_diff(&wa.v, &wb.v))
        .max(max_diff(&wa.xbar, &wb.xbar));
    (plain, integrated)
}

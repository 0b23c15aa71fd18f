//! Reproduction of the kernel-error and pricing tables.

use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

use rvol_core::kernel::{l2_error_exact, RoughKernel};
use rvol_core::mc::{rate_estimator_gamma_hat, McConfig, Payoff};
use rvol_core::quadrature::{build_systematic, KernelConfig, KernelMethod, NodeRule};
use rvol_core::schemes::{build_heston_scheme, GridSpec, HestonParams, HestonSchemeKind};
use rvol_core::Result;

use crate::{output, McArgs};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "UPPER")]
pub enum TableId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
    T10,
}

const HURSTS: [f64; 3] = [0.45, 0.25, 0.05];
const STEPS: [usize; 6] = [10, 20, 40, 80, 160, 320];

/// Systematic kernel size and truncation exponent of the pricing tables.
const PRICING_FACTORS: usize = 100;
const PRICING_BETA: f64 = 1.0;
const PRICING_HURST: f64 = 0.1;

#[derive(Serialize)]
struct RateRow {
    hurst: f64,
    n: usize,
    factors_n: usize,
    zeta_n: f64,
    factors_2n: usize,
    zeta_2n: f64,
    gamma_hat: f64,
}

#[derive(Serialize)]
struct GeometricRow {
    hurst: f64,
    zeta_50: f64,
    zeta_200: f64,
    zeta_400: f64,
    gamma_hat: f64,
}

#[derive(Serialize)]
struct SystematicRow {
    hurst: f64,
    n: usize,
    sqrt_l2_error: f64,
}

#[derive(Serialize)]
struct PriceRow {
    steps: usize,
    scheme: String,
    mean: f64,
    half_width_95: f64,
    seconds: f64,
    paths: u64,
}

fn zeta(method: KernelMethod, hurst: f64) -> Result<(usize, f64)> {
    let k = KernelConfig {
        hurst,
        horizon: 1.0,
        method,
    }
    .build()?;
    Ok((k.len(), l2_error_exact(&RoughKernel::new(hurst)?, &k, 1.0)?))
}

fn rate_rows(n: usize, method: impl Fn(usize) -> KernelMethod) -> Result<Vec<RateRow>> {
    HURSTS
        .iter()
        .map(|&h| {
            let (f1, z1) = zeta(method(n), h)?;
            let (f2, z2) = zeta(method(2 * n), h)?;
            Ok(RateRow {
                hurst: h,
                n,
                factors_n: f1,
                zeta_n: z1,
                factors_2n: f2,
                zeta_2n: z2,
                gamma_hat: rate_estimator_gamma_hat(z1, z2, h)?,
            })
        })
        .collect()
}

fn write_rows<T: Serialize>(rows: &[T], out: Option<&Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(output(out)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn pricing_rows(
    schemes: &[HestonSchemeKind],
    payoff: Payoff,
    steps: &[usize],
    cfg: &McConfig,
    max_steps: Option<usize>,
) -> Result<Vec<PriceRow>> {
    let spec = RoughKernel::new(PRICING_HURST)?;
    let kernel = build_systematic(&spec, PRICING_FACTORS, 1.0)?;
    let params = HestonParams::benchmark();
    let mut rows = Vec::new();
    for &n in steps.iter().filter(|&&n| max_steps.is_none_or(|m| n <= m)) {
        let grid = GridSpec::new(1.0, n)?;
        for &kind in schemes {
            let scheme =
                build_heston_scheme(kind, params, PRICING_HURST, &kernel, grid, PRICING_BETA)?;
            let r = rvol_core::mc::price(&scheme, payoff, cfg)?;
            eprintln!(
                "{}: {:.5} ± {:.1e} ({:.1}s)",
                r.descriptor, r.mean, r.half_width_95, r.wall_seconds
            );
            rows.push(PriceRow {
                steps: n,
                scheme: r.descriptor,
                mean: r.mean,
                half_width_95: r.half_width_95,
                seconds: r.wall_seconds,
                paths: r.paths,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_table(
    id: TableId,
    mc: &McArgs,
    max_steps: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    use HestonSchemeKind::*;
    let pow = |n: usize, e: f64| Some((n as f64).powf(e));
    match id {
        TableId::T1 => write_rows(
            &rate_rows(50, |n| KernelMethod::RiemannMid {
                n,
                k: pow(n, 2.0 / 3.0),
            })?,
            out,
        ),
        TableId::T2 => write_rows(
            &rate_rows(50, |n| KernelMethod::RiemannBary { n, k: pow(n, 0.8) })?,
            out,
        ),
        TableId::T3 => write_rows(
            &rate_rows(16, |n| KernelMethod::Simpson {
                n,
                k: None,
                beta: None,
                node_rule: NodeRule::Midpoint,
            })?,
            out,
        ),
        TableId::T4 => write_rows(
            &rate_rows(16, |n| KernelMethod::Simpson {
                n,
                k: None,
                beta: None,
                node_rule: NodeRule::Barycentric,
            })?,
            out,
        ),
        TableId::T5 => {
            let rows = HURSTS
                .iter()
                .map(|&h| {
                    let z = |n: usize| {
                        zeta(
                            KernelMethod::Geometric {
                                n,
                                k: pow(n, 0.8),
                                a: 3.0,
                            },
                            h,
                        )
                        .map(|r| r.1)
                    };
                    let (z50, z200, z400) = (z(50)?, z(200)?, z(400)?);
                    Ok(GeometricRow {
                        hurst: h,
                        zeta_50: z50,
                        zeta_200: z200,
                        zeta_400: z400,
                        gamma_hat: rate_estimator_gamma_hat(z200, z400, h)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_rows(&rows, out)
        }
        TableId::T6 => {
            let rows = [
                (0.45, 10),
                (0.45, 20),
                (0.25, 20),
                (0.25, 40),
                (0.05, 40),
                (0.05, 80),
            ]
            .iter()
            .map(|&(h, n)| {
                let (_, z) = zeta(KernelMethod::Systematic { n }, h)?;
                Ok(SystematicRow {
                    hurst: h,
                    n,
                    sqrt_l2_error: z.sqrt(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
            write_rows(&rows, out)
        }
        TableId::T7 | TableId::T8 | TableId::T9 | TableId::T10 => {
            let cfg = mc.config()?;
            let (schemes, payoff, steps): (&[HestonSchemeKind], Payoff, &[usize]) = match id {
                TableId::T7 => (
                    &[MultifactorTruncated, Volterra, Hybrid],
                    Payoff::EuroCall { strike: 1.0 },
                    &STEPS,
                ),
                TableId::T8 => (
                    &[MultifactorTruncated, Volterra, Hybrid],
                    Payoff::Lookback { strike: 1.0 },
                    &STEPS,
                ),
                TableId::T9 => (
                    &[IntegratedMultifactor, IntegratedVolterra],
                    Payoff::EuroCall { strike: 1.0 },
                    &STEPS[..5],
                ),
                _ => (
                    &[IntegratedMultifactor, IntegratedVolterra],
                    Payoff::Lookback { strike: 1.0 },
                    &STEPS,
                ),
            };
            write_rows(&pricing_rows(schemes, payoff, steps, &cfg, max_steps)?, out)
        }
    }
}

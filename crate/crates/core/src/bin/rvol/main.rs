//! `rvol`: kernel construction, table reproduction, pricing and smiles.

mod tables;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rvol_core::bergomi::{implied_vol, simulate_bergomi, BergomiModel, BergomiParams};
use rvol_core::kernel::{l2_error_discrete, l2_error_exact, ExpSumKernel, RoughKernel};
use rvol_core::mc::{price, price_many, McConfig, McReport, NormalStream, PathModel, Payoff};
use rvol_core::quadrature::{build_systematic, KernelConfig, KernelMethod, NodeRule};
use rvol_core::schemes::{
    build_heston_scheme, GridSpec, HestonParams, HestonScheme, HestonSchemeKind,
};
use rvol_core::{Error, Result};

pub const DEFAULT_PATHS: u64 = 100_000;
pub const FULL_SCALE_PATHS: u64 = 1_000_000;

#[derive(Parser)]
#[command(
    name = "rvol",
    version,
    about = "Multifactor approximation and simulation of rough volatility models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an exponential-sum kernel, write it as CSV and report its L2 errors.
    Kernel(KernelArgs),
    /// Reproduce one of the numerical tables as CSV.
    Table(TableArgs),
    /// Monte Carlo price of a European or lookback call.
    Price(PriceArgs),
    /// Rough Bergomi implied-volatility smile, exact and multifactor.
    Smile(SmileArgs),
    /// Dump a single simulated path as CSV.
    PathDump(PathDumpArgs),
}

#[derive(Args, Clone)]
pub struct McArgs {
    /// Number of Monte Carlo paths [default: 100000, or 1000000 with --paper-scale].
    #[arg(long)]
    pub paths: Option<u64>,
    /// Use the full 10^6-path sample size.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (results do not depend on this).
    #[arg(long, env = "RVOL_WORKERS")]
    pub workers: Option<usize>,
}

impl McArgs {
    pub fn config(&self) -> Result<McConfig> {
        let paths = self.paths.unwrap_or(if self.paper_scale {
            FULL_SCALE_PATHS
        } else {
            DEFAULT_PATHS
        });
        let workers = self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
        McConfig::new(paths, self.seed, workers)
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum MethodArg {
    RiemannMid,
    RiemannBary,
    Simpson,
    NewtonCotes,
    Geometric,
    Systematic,
}

#[derive(Copy, Clone, ValueEnum)]
enum NodeRuleArg {
    Midpoint,
    Barycentric,
}

#[derive(Args)]
struct KernelArgs {
    /// Read the kernel description from a JSON file instead of flags.
    #[arg(long, conflicts_with_all = ["method", "n"])]
    config: Option<PathBuf>,
    #[arg(long, value_enum, required_unless_present = "config")]
    method: Option<MethodArg>,
    #[arg(long, default_value_t = 0.1)]
    hurst: f64,
    /// Number of quadrature intervals (total factors for `systematic`).
    #[arg(long, required_unless_present = "config")]
    n: Option<usize>,
    /// Horizon T of the error functional.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Truncation level K.
    #[arg(long)]
    k: Option<f64>,
    /// Newton–Cotes order J.
    #[arg(long, default_value_t = 2)]
    j: usize,
    #[arg(long)]
    beta: Option<f64>,
    /// Geometric ratio A.
    #[arg(long, default_value_t = 3.0)]
    a: f64,
    #[arg(long, value_enum, default_value = "barycentric")]
    node_rule: NodeRuleArg,
    /// Time steps of the discrete L2 error.
    #[arg(long, default_value_t = 160)]
    steps: usize,
    /// Output CSV (stdout JSON only if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, value_enum)]
    id: tables::TableId,
    #[command(flatten)]
    mc: McArgs,
    /// Skip Monte Carlo rows with more time steps than this.
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Heston,
    Bergomi,
}

#[derive(Copy, Clone, ValueEnum)]
enum PayoffArg {
    EuroCall,
    Lookback,
}

#[derive(Args, Clone)]
struct ModelParams {
    #[arg(long)]
    hurst: Option<f64>,
    /// Initial variance.
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    s0: Option<f64>,
    /// Rough Heston mean-reversion level.
    #[arg(long)]
    theta: Option<f64>,
    /// Rough Heston mean-reversion speed.
    #[arg(long)]
    lambda: Option<f64>,
    /// Rough Heston vol of vol.
    #[arg(long)]
    sigma: Option<f64>,
    /// Rough Bergomi vol of vol.
    #[arg(long)]
    eta: Option<f64>,
}

impl ModelParams {
    fn heston(&self) -> Result<(HestonParams, f64)> {
        if self.eta.is_some() {
            return Err(Error::Config(
                "--eta applies to the bergomi model only".into(),
            ));
        }
        let d = HestonParams::benchmark();
        let p = HestonParams::new(
            self.v0.unwrap_or(d.v0),
            self.theta.unwrap_or(d.theta),
            self.lambda.unwrap_or(d.lambda),
            self.sigma.unwrap_or(d.sigma),
            self.rho.unwrap_or(d.rho),
            self.s0.unwrap_or(d.s0),
        )?;
        Ok((p, self.hurst.unwrap_or(0.1)))
    }

    fn bergomi(&self) -> Result<BergomiParams> {
        if self.theta.is_some() || self.lambda.is_some() || self.sigma.is_some() {
            return Err(Error::Config(
                "--theta/--lambda/--sigma apply to the heston model only".into(),
            ));
        }
        let d = BergomiParams::default();
        BergomiParams::new(
            self.s0.unwrap_or(d.s0),
            self.v0.unwrap_or(d.v0),
            self.eta.unwrap_or(d.eta),
            self.rho.unwrap_or(d.rho),
            self.hurst.unwrap_or(d.hurst),
        )
    }
}

#[derive(Args)]
struct PriceArgs {
    #[arg(long, value_enum, default_value = "heston")]
    model: ModelArg,
    /// heston: volterra | multifactor | multifactor-truncated | hybrid |
    /// integrated-volterra | integrated-multifactor; bergomi: exact | multifactor.
    #[arg(long, default_value = "multifactor-truncated")]
    scheme: String,
    #[arg(long, value_enum, default_value = "euro-call")]
    payoff: PayoffArg,
    #[arg(long, default_value_t = 1.0)]
    strike: f64,
    #[command(flatten)]
    params: ModelParams,
    /// Systematic-kernel size [default: 100 for heston, 20 for bergomi].
    #[arg(long)]
    n: Option<usize>,
    /// Time steps N.
    #[arg(long, default_value_t = 160)]
    steps: usize,
    /// Maturity T [default: 1 for heston, 0.041 for bergomi].
    #[arg(long)]
    horizon: Option<f64>,
    /// Factor-truncation exponent β.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Load the exponential-sum kernel from CSV instead of building it.
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[command(flatten)]
    mc: McArgs,
}

#[derive(Args)]
struct SmileArgs {
    #[command(flatten)]
    params: ModelParams,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = 0.041)]
    horizon: f64,
    #[arg(long, default_value_t = -0.10, allow_hyphen_values = true)]
    kmin: f64,
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    kmax: f64,
    #[arg(long, default_value_t = 16)]
    points: usize,
    /// Sample the two modes on independent Brownian paths instead of shared ones.
    #[arg(long)]
    independent: bool,
    #[command(flatten)]
    mc: McArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PathDumpArgs {
    #[arg(long, value_enum, default_value = "heston")]
    model: ModelArg,
    #[arg(long, default_value = "multifactor-truncated")]
    scheme: String,
    #[command(flatten)]
    params: ModelParams,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 160)]
    steps: usize,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Index of the path (RNG stream) to dump.
    #[arg(long, default_value_t = 0)]
    path_index: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Kernel(a) => cmd_kernel(a),
        Command::Table(a) => tables::cmd_table(a.id, &a.mc, a.max_steps, a.out.as_deref()),
        Command::Price(a) => cmd_price(a),
        Command::Smile(a) => cmd_smile(a),
        Command::PathDump(a) => cmd_path_dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rvol: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Opens `path` for writing, or stdout.
pub fn output(path: Option<&std::path::Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct KernelReport {
    kernel: KernelMethod,
    hurst: f64,
    horizon: f64,
    factors: usize,
    l2_error: f64,
    sqrt_l2_error: f64,
    steps: usize,
    discrete_l2_error: f64,
}

fn cmd_kernel(a: KernelArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(path) => KernelConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => {
            let n = a.n.expect("clap enforces --n");
            let node_rule = match a.node_rule {
                NodeRuleArg::Midpoint => NodeRule::Midpoint,
                NodeRuleArg::Barycentric => NodeRule::Barycentric,
            };
            let method = match a.method.expect("clap enforces --method") {
                MethodArg::RiemannMid => KernelMethod::RiemannMid { n, k: a.k },
                MethodArg::RiemannBary => KernelMethod::RiemannBary { n, k: a.k },
                MethodArg::Simpson => KernelMethod::Simpson {
                    n,
                    k: a.k,
                    beta: a.beta,
                    node_rule,
                },
                MethodArg::NewtonCotes => KernelMethod::NewtonCotes {
                    n,
                    j: a.j,
                    k: a.k,
                    beta: a.beta,
                    node_rule,
                },
                MethodArg::Geometric => KernelMethod::Geometric { n, k: a.k, a: a.a },
                MethodArg::Systematic => KernelMethod::Systematic { n },
            };
            KernelConfig {
                hurst: a.hurst,
                horizon: a.horizon,
                method,
            }
        }
    };
    let kernel = cfg.build()?;
    let spec = RoughKernel::new(cfg.hurst)?;
    let zeta = l2_error_exact(&spec, &kernel, cfg.horizon)?;
    if let Some(path) = &a.out {
        kernel.save(path)?;
    }
    print_json(&KernelReport {
        kernel: cfg.method.clone(),
        hurst: cfg.hurst,
        horizon: cfg.horizon,
        factors: kernel.len(),
        l2_error: zeta,
        sqrt_l2_error: zeta.sqrt(),
        steps: a.steps,
        discrete_l2_error: l2_error_discrete(&spec, &kernel, cfg.horizon, a.steps)?,
    })
}

fn payoff(kind: PayoffArg, strike: f64) -> Result<Payoff> {
    if !(strike > 0.0) {
        return Err(Error::Config(format!(
            "strike must be positive, got {strike}"
        )));
    }
    Ok(match kind {
        PayoffArg::EuroCall => Payoff::EuroCall { strike },
        PayoffArg::Lookback => Payoff::Lookback { strike },
    })
}

fn kernel_for(
    path: Option<&std::path::Path>,
    hurst: f64,
    n: usize,
    horizon: f64,
) -> Result<ExpSumKernel> {
    match path {
        Some(p) => ExpSumKernel::load(p),
        None => build_systematic(&RoughKernel::new(hurst)?, n, horizon),
    }
}

#[derive(Copy, Clone, PartialEq, Eq)]
enum BergomiMode {
    Exact,
    Multifactor,
}

fn bergomi_mode(scheme: &str) -> Result<BergomiMode> {
    match scheme {
        "exact" => Ok(BergomiMode::Exact),
        "multifactor" => Ok(BergomiMode::Multifactor),
        other => Err(Error::Config(format!(
            "scheme '{other}' is not available for the bergomi model (exact, multifactor)"
        ))),
    }
}

fn cmd_price(a: PriceArgs) -> Result<()> {
    let pay = payoff(a.payoff, a.strike)?;
    let cfg = a.mc.config()?;
    let report: McReport = match a.model {
        ModelArg::Heston => {
            let kind: HestonSchemeKind = a.scheme.parse()?;
            let (params, hurst) = a.params.heston()?;
            let horizon = a.horizon.unwrap_or(1.0);
            let grid = GridSpec::new(horizon, a.steps)?;
            let kernel = if kind.uses_factors() {
                kernel_for(a.kernel.as_deref(), hurst, a.n.unwrap_or(100), horizon)?
            } else {
                // unused by the Volterra schemes
                ExpSumKernel::new(vec![1.0], vec![0.0])?
            };
            let scheme = build_heston_scheme(kind, params, hurst, &kernel, grid, a.beta)?;
            price(&scheme, pay, &cfg)?
        }
        ModelArg::Bergomi => {
            let mode = bergomi_mode(&a.scheme)?;
            let params = a.params.bergomi()?;
            let grid = GridSpec::new(a.horizon.unwrap_or(0.041), a.steps)?;
            let model = match mode {
                BergomiMode::Exact => BergomiModel::exact(params, grid)?,
                BergomiMode::Multifactor => {
                    let k = kernel_for(
                        a.kernel.as_deref(),
                        params.hurst,
                        a.n.unwrap_or(20),
                        grid.horizon(),
                    )?;
                    BergomiModel::multifactor(params, &k, grid)?
                }
            };
            price(&model, pay, &cfg)?
        }
    };
    print_json(&report)
}

#[derive(Serialize)]
struct SmileRow {
    mode: &'static str,
    k: f64,
    strike: f64,
    price: f64,
    ci_halfwidth: f64,
    implied_vol: f64,
    iv_low: f64,
    iv_high: f64,
}

fn smile_rows<M: PathModel>(
    mode: &'static str,
    model: &M,
    ks: &[f64],
    s0: f64,
    horizon: f64,
    cfg: &McConfig,
) -> Result<Vec<SmileRow>> {
    let payoffs: Vec<Payoff> = ks
        .iter()
        .map(|k| Payoff::EuroCall {
            strike: s0 * k.exp(),
        })
        .collect();
    let reports = price_many(model, &payoffs, cfg)?;
    let iv = |p: f64, strike: f64| implied_vol(p, s0, strike, horizon).unwrap_or(f64::NAN);
    Ok(ks
        .iter()
        .zip(&payoffs)
        .zip(&reports)
        .map(|((k, pay), r)| {
            let strike = pay.strike();
            SmileRow {
                mode,
                k: *k,
                strike,
                price: r.mean,
                ci_halfwidth: r.half_width_95,
                implied_vol: iv(r.mean, strike),
                iv_low: iv(
                    (r.mean - r.half_width_95).max((s0 - strike).max(0.0)),
                    strike,
                ),
                iv_high: iv(r.mean + r.half_width_95, strike),
            }
        })
        .collect())
}

fn cmd_smile(a: SmileArgs) -> Result<()> {
    if a.points == 0 || (a.points > 1 && !(a.kmin < a.kmax)) {
        return Err(Error::Config(format!(
            "need kmin < kmax and points >= 1, got [{}, {}] x {}",
            a.kmin, a.kmax, a.points
        )));
    }
    let params = a.params.bergomi()?;
    let cfg = a.mc.config()?;
    let grid = GridSpec::new(a.horizon, a.steps)?;
    let ks: Vec<f64> = if a.points == 1 {
        vec![a.kmin]
    } else {
        (0..a.points)
            .map(|i| a.kmin + (a.kmax - a.kmin) * i as f64 / (a.points - 1) as f64)
            .collect()
    };
    let kernel = build_systematic(&RoughKernel::new(params.hurst)?, a.n, a.horizon)?;
    let (exact, multi) = if a.independent {
        (
            BergomiModel::exact(params, grid)?,
            BergomiModel::multifactor(params, &kernel, grid)?,
        )
    } else {
        BergomiModel::coupled(params, &kernel, grid)?
    };
    let mut rows = smile_rows("exact", &exact, &ks, params.s0, a.horizon, &cfg)?;
    rows.extend(smile_rows(
        "multifactor",
        &multi,
        &ks,
        params.s0,
        a.horizon,
        &cfg,
    )?);
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_path_dump(a: PathDumpArgs) -> Result<()> {
    let mut rng = NormalStream::new(a.seed, a.path_index);
    let out = output(a.out.as_deref())?;
    match a.model {
        ModelArg::Heston => {
            let kind: HestonSchemeKind = a.scheme.parse()?;
            let (params, hurst) = a.params.heston()?;
            let horizon = a.horizon.unwrap_or(1.0);
            let grid = GridSpec::new(horizon, a.steps)?;
            let kernel = if kind.uses_factors() {
                build_systematic(&RoughKernel::new(hurst)?, a.n.unwrap_or(100), horizon)?
            } else {
                ExpSumKernel::new(vec![1.0], vec![0.0])?
            };
            let scheme = build_heston_scheme(kind, params, hurst, &kernel, grid, a.beta)?;
            let mut z = vec![0.0; grid.steps() * scheme.draws_per_step()];
            rng.fill(&mut z);
            scheme
                .sample_path(&z)
                .write_csv(out, scheme.component_names())
        }
        ModelArg::Bergomi => {
            let mode = bergomi_mode(&a.scheme)?;
            let params = a.params.bergomi()?;
            let grid = GridSpec::new(a.horizon.unwrap_or(0.041), a.steps)?;
            let model = match mode {
                BergomiMode::Exact => BergomiModel::exact(params, grid)?,
                BergomiMode::Multifactor => {
                    let k = build_systematic(
                        &RoughKernel::new(params.hurst)?,
                        a.n.unwrap_or(20),
                        grid.horizon(),
                    )?;
                    BergomiModel::multifactor(params, &k, grid)?
                }
            };
            simulate_bergomi(&model, &mut rng).write_csv(out, &["s", "nu"])
        }
    }
}

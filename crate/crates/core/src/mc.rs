//! Monte Carlo pricing on top of any [`PathModel`].
//!
//! Path `p` always draws its normals from ChaCha8 stream `p` of the run seed,
//! and paths are reduced in fixed blocks merged in index order, so results
//! are bit-identical for every worker count.

use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::norm_inv_cdf;
use crate::schemes::{
    AnyHestonScheme, GridSpec, HestonHybrid, HestonIntegratedMultifactor, HestonIntegratedVolterra,
    HestonMultifactor, HestonScheme, HestonVolterra, Workspace,
};

/// Paths per reduction block. Fixed so that the summation order never
/// depends on the number of workers.
pub const BLOCK_PATHS: u64 = 512;

/// 95% two-sided normal quantile.
pub const Z_95: f64 = 1.96;

/// Standard normal draws by inversion of ChaCha8 uniforms.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on the open interval (0, 1), 53 bits.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        norm_inv_cdf(self.next_uniform())
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.next_normal();
        }
    }
}

/// A model that maps a vector of i.i.d. standard normals to a log-price path
/// on its grid.
pub trait PathModel: Send + Sync {
    type Workspace: Default + Send;

    fn grid(&self) -> &GridSpec;
    fn normals_per_path(&self) -> usize;
    /// `ln S` at `t_0, …, t_N`.
    fn log_price_path<'w>(&self, z: &[f64], ws: &'w mut Self::Workspace) -> &'w [f64];
    fn describe(&self) -> String;
}

macro_rules! heston_path_model {
    ($($ty:ty),* $(,)?) => {$(
        impl PathModel for $ty {
            type Workspace = Workspace;

            fn grid(&self) -> &GridSpec {
                HestonScheme::grid(self)
            }

            fn normals_per_path(&self) -> usize {
                HestonScheme::grid(self).steps() * self.draws_per_step()
            }

            fn log_price_path<'w>(&self, z: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
                self.simulate(z, ws);
                &ws.y
            }

            fn describe(&self) -> String {
                let g = HestonScheme::grid(self);
                format!("heston/{}(N={},T={})", self.name(), g.steps(), g.horizon())
            }
        }
    )*};
}

heston_path_model!(
    AnyHestonScheme,
    HestonVolterra,
    HestonMultifactor,
    HestonHybrid,
    HestonIntegratedVolterra,
    HestonIntegratedMultifactor,
);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payoff {
    /// `(S_T - K)_+`
    EuroCall { strike: f64 },
    /// `(max_k S_{t_k} - K)_+`, the maximum including `S_0`.
    Lookback { strike: f64 },
}

impl Payoff {
    pub fn evaluate(&self, log_path: &[f64]) -> f64 {
        match *self {
            Payoff::EuroCall { strike } => (log_path[log_path.len() - 1].exp() - strike).max(0.0),
            Payoff::Lookback { strike } => {
                let m = log_path.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (m.exp() - strike).max(0.0)
            }
        }
    }

    pub fn strike(&self) -> f64 {
        match *self {
            Payoff::EuroCall { strike } | Payoff::Lookback { strike } => strike,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: u64,
    pub seed: u64,
    pub workers: usize,
}

impl McConfig {
    pub fn new(paths: u64, seed: u64, workers: usize) -> Result<Self> {
        if paths == 0 || workers == 0 {
            return Err(Error::Config(format!(
                "paths and workers must be >= 1, got {paths} and {workers}"
            )));
        }
        Ok(Self {
            paths,
            seed,
            workers,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub mean: f64,
    pub half_width_95: f64,
    pub paths: u64,
    pub wall_seconds: f64,
    pub seed: u64,
    pub descriptor: String,
}

impl McReport {
    pub fn std_error(&self) -> f64 {
        self.half_width_95 / Z_95
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedReport {
    pub diff_mean: f64,
    pub diff_half_width: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub paths: u64,
    pub wall_seconds: f64,
}

/// Running count, mean and centered sum of squares.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Pairwise merge (Chan et al.).
    pub fn merge(&mut self, o: &Moments) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let n = (self.count + o.count) as f64;
        let d = o.mean - self.mean;
        self.mean += d * o.count as f64 / n;
        self.m2 += o.m2 + d * d * self.count as f64 * o.count as f64 / n;
        self.count += o.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn half_width_95(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        Z_95 * (self.variance() / self.count as f64).sqrt()
    }
}

/// Evaluates `width` statistics per path and reduces them in fixed blocks.
/// `eval(state, z, out)` receives the path's normals.
pub fn reduce_paths<S, F>(
    normals: usize,
    width: usize,
    cfg: &McConfig,
    eval: F,
) -> Result<Vec<Moments>>
where
    S: Default + Send,
    F: Fn(&mut S, &[f64], &mut [f64]) + Sync,
{
    let blocks = cfg.paths.div_ceil(BLOCK_PATHS);
    let run_block = |b: u64| {
        let mut state = S::default();
        let mut z = vec![0.0; normals];
        let mut out = vec![0.0; width];
        let mut acc = vec![Moments::default(); width];
        let end = ((b + 1) * BLOCK_PATHS).min(cfg.paths);
        for p in b * BLOCK_PATHS..end {
            NormalStream::new(cfg.seed, p).fill(&mut z);
            eval(&mut state, &z, &mut out);
            for (a, x) in acc.iter_mut().zip(&out) {
                a.push(*x);
            }
        }
        acc
    };
    let per_block: Vec<Vec<Moments>> = if cfg.workers == 1 {
        (0..blocks).map(run_block).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..blocks).into_par_iter().map(run_block).collect())
    };
    let mut total = vec![Moments::default(); width];
    for block in &per_block {
        for (t, m) in total.iter_mut().zip(block) {
            t.merge(m);
        }
    }
    Ok(total)
}

/// Prices several payoffs on one set of simulated paths.
pub fn price_many<M: PathModel>(
    model: &M,
    payoffs: &[Payoff],
    cfg: &McConfig,
) -> Result<Vec<McReport>> {
    if payoffs.is_empty() {
        return Ok(Vec::new());
    }
    let start = Instant::now();
    let stats = reduce_paths(
        model.normals_per_path(),
        payoffs.len(),
        cfg,
        |ws: &mut M::Workspace, z, out| {
            let y = model.log_price_path(z, ws);
            for (o, p) in out.iter_mut().zip(payoffs) {
                *o = p.evaluate(y);
            }
        },
    )?;
    let wall = start.elapsed().as_secs_f64();
    let descriptor = model.describe();
    Ok(stats
        .iter()
        .map(|m| McReport {
            mean: m.mean,
            half_width_95: m.half_width_95(),
            paths: cfg.paths,
            wall_seconds: wall,
            seed: cfg.seed,
            descriptor: descriptor.clone(),
        })
        .collect())
}

pub fn price<M: PathModel>(model: &M, payoff: Payoff, cfg: &McConfig) -> Result<McReport> {
    Ok(price_many(model, &[payoff], cfg)?.remove(0))
}

/// `E[payoff(A) - payoff(B)]` with both models fed the same normals.
pub fn paired_compare<A: PathModel, B: PathModel>(
    a: &A,
    b: &B,
    payoff: Payoff,
    cfg: &McConfig,
) -> Result<PairedReport> {
    if a.normals_per_path() != b.normals_per_path() {
        return Err(Error::Config(format!(
            "incompatible increment streams: {} ({} normals) vs {} ({} normals)",
            a.describe(),
            a.normals_per_path(),
            b.describe(),
            b.normals_per_path()
        )));
    }
    let start = Instant::now();
    let stats = reduce_paths(
        a.normals_per_path(),
        3,
        cfg,
        |ws: &mut (A::Workspace, B::Workspace), z, out| {
            let pa = payoff.evaluate(a.log_price_path(z, &mut ws.0));
            let pb = payoff.evaluate(b.log_price_path(z, &mut ws.1));
            out[0] = pa - pb;
            out[1] = pa;
            out[2] = pb;
        },
    )?;
    Ok(PairedReport {
        diff_mean: stats[0].mean,
        diff_half_width: stats[0].half_width_95(),
        mean_a: stats[1].mean,
        mean_b: stats[2].mean,
        paths: cfg.paths,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// `γ̂ = log(ζ_n/ζ_{2n}) / (2H log 2)`.
pub fn rate_estimator_gamma_hat(zeta_n: f64, zeta_2n: f64, hurst: f64) -> Result<f64> {
    if !(zeta_n > 0.0) || !(zeta_2n > 0.0) {
        return Err(Error::Domain(format!(
            "errors must be positive, got {zeta_n} and {zeta_2n}"
        )));
    }
    if !(hurst > 0.0 && hurst < 0.5) {
        return Err(Error::Domain(format!(
            "Hurst index must lie in (0, 1/2), got {hurst}"
        )));
    }
    Ok((zeta_n / zeta_2n).ln() / (2.0 * hurst * std::f64::consts::LN_2))
}

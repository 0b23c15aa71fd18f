//! Rough Bergomi model
//!
//! `ν_t = v0 exp(η√(2H) ∫_0^t (t-s)^{H-1/2} dW_s - η² t^{2H}/2)`, with the
//! price advanced by a log-Euler step that freezes `ν` at the left endpoint.
//!
//! Three variance engines are available:
//!
//! * exact: joint Gaussian sample of the fractional integrals and `W` on the
//!   grid (full `2N × 2N` factorization);
//! * multifactor: `ν̂ = v0 exp(c̄ Σ α_i F_i - c̄²/2 ∫_0^t Ĝ²)` with
//!   `F_i(t) = ∫_0^t e^{-ρ_i(t-s)} dW_s` sampled by an exact one-step recursion;
//! * coupled: one `3N`-dimensional draw of the fractional integrals, `W` and
//!   `Σ α_i F_i`, so that both the exact and the multifactor variance are
//!   driven by the same Brownian path.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernel::{exp_integral, ExpSumKernel, RoughKernel};
use crate::mc::{reduce_paths, McConfig, Moments, NormalStream, PathModel};
use crate::numerics::{integrate, norm_cdf, psd_factorize, QuadTolerance, SquareMatrix};
use crate::schemes::{GridSpec, SchemePath};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BergomiParams {
    pub s0: f64,
    pub v0: f64,
    pub eta: f64,
    pub rho: f64,
    pub hurst: f64,
}

impl Default for BergomiParams {
    /// Short-maturity steep-skew configuration.
    fn default() -> Self {
        Self {
            s0: 1.0,
            v0: 0.235 * 0.235,
            eta: 1.9,
            rho: -0.9,
            hurst: 0.07,
        }
    }
}

impl BergomiParams {
    pub fn new(s0: f64, v0: f64, eta: f64, rho: f64, hurst: f64) -> Result<Self> {
        let p = Self {
            s0,
            v0,
            eta,
            rho,
            hurst,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.v0 > 0.0) || !self.s0.is_finite() || !self.v0.is_finite() {
            return Err(Error::Config(format!(
                "S0 and v0 must be positive, got {} and {}",
                self.s0, self.v0
            )));
        }
        // η = 0 is accepted as the constant-volatility limit
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::Config(format!(
                "correlation must lie in [-1, 1], got {}",
                self.rho
            )));
        }
        RoughKernel::new(self.hurst)?;
        Ok(())
    }

    /// `c̄ = η √(2H) Γ(H + 1/2)`.
    pub fn c_bar(&self) -> f64 {
        let g = RoughKernel::new(self.hurst)
            .map(|k| k.gamma_h_half())
            .unwrap_or(f64::NAN);
        self.eta * (2.0 * self.hurst).sqrt() * g
    }

    fn rho_perp(&self) -> f64 {
        (1.0 - self.rho * self.rho).max(0.0).sqrt()
    }
}

fn quad_tol() -> QuadTolerance {
    QuadTolerance::uniform(1e-13)
}

/// `∫_p^q x^a f(x) dx` for `a > -1`, integrated in `y = x^{a+1}` so that the
/// power singularity at the origin disappears.
fn power_weighted_integral<F: Fn(f64) -> f64>(a: f64, p: f64, q: f64, f: F) -> Result<f64> {
    let e = a + 1.0;
    let r = integrate(|y| f(y.powf(1.0 / e)), p.powf(e), q.powf(e), quad_tol())?;
    Ok(r / e)
}

/// `Cov(I_u, I_v) = ∫_0^{u∧v} (u-s)^{H-1/2} (v-s)^{H-1/2} ds` with
/// `I_t = ∫_0^t (t-s)^{H-1/2} dW_s`.
pub fn fractional_covariance(hurst: f64, u: f64, v: f64) -> Result<f64> {
    let (u, v) = if u <= v { (u, v) } else { (v, u) };
    if u <= 0.0 {
        return Ok(0.0);
    }
    if u == v {
        return Ok(u.powf(2.0 * hurst) / (2.0 * hurst));
    }
    let a = hurst - 0.5;
    let d = v - u;
    power_weighted_integral(a, 0.0, u, |x| (x + d).powf(a))
}

/// `Cov(I_u, W_v) = ∫_0^{u∧v} (u-s)^{H-1/2} ds`.
pub fn fractional_brownian_covariance(hurst: f64, u: f64, v: f64) -> f64 {
    let e = hurst + 0.5;
    let c = u.min(v);
    (u.powf(e) - (u - c).powf(e)) / e
}

/// `Cov(Σ α_i F_i(u), I_v) = ∫_0^{u∧v} Ĝ(u-s) (v-s)^{H-1/2} ds`.
fn factor_fractional_covariance(k: &ExpSumKernel, hurst: f64, u: f64, v: f64) -> Result<f64> {
    let c = u.min(v);
    if c <= 0.0 {
        return Ok(0.0);
    }
    let shift = u - v;
    // x = v - s ranges over [v - c, v] and Ĝ(u - s) = Ĝ(x + u - v)
    power_weighted_integral(hurst - 0.5, v - c, v, |x| {
        let lag = (x + shift).max(0.0);
        k.weights()
            .iter()
            .zip(k.rates())
            .map(|(a, r)| a * (-r * lag).exp())
            .sum()
    })
}

/// `Cov(Σ α_i F_i(u), Σ α_j F_j(v))`.
fn factor_covariance(k: &ExpSumKernel, u: f64, v: f64) -> f64 {
    let (u, v) = if u <= v { (u, v) } else { (v, u) };
    let (w, r) = (k.weights(), k.rates());
    let mut acc = 0.0;
    for i in 0..k.len() {
        for j in 0..k.len() {
            acc += w[i] * w[j] * (-r[j] * (v - u)).exp() * exp_integral(r[i] + r[j], u);
        }
    }
    acc
}

/// `Cov(Σ α_i F_i(u), W_v)`.
fn factor_brownian_covariance(k: &ExpSumKernel, u: f64, v: f64) -> f64 {
    let c = u.min(v);
    k.weights()
        .iter()
        .zip(k.rates())
        .map(|(a, r)| a * (-r * (u - c)).exp() * exp_integral(*r, c))
        .sum()
}

/// Covariance of `(I_{t_1..t_N}, W_{t_1..t_N})`.
pub fn fractional_joint_covariance(hurst: f64, grid: &GridSpec) -> Result<SquareMatrix> {
    RoughKernel::new(hurst)?;
    let n = grid.steps();
    let mut s = SquareMatrix::zeros(2 * n);
    for l in 0..n {
        let tl = grid.time(l + 1);
        for m in 0..=l {
            let tm = grid.time(m + 1);
            s.set_sym(l, m, fractional_covariance(hurst, tl, tm)?);
            s.set_sym(n + l, n + m, tm);
        }
        for m in 0..n {
            s.set(
                l,
                n + m,
                fractional_brownian_covariance(hurst, tl, grid.time(m + 1)),
            );
            s.set(n + m, l, s.get(l, n + m));
        }
    }
    Ok(s)
}

/// Covariance of `(I_{t_·}, W_{t_·}, Σ α_i F_i(t_·))`, blocks of size `N`.
pub fn coupled_covariance(hurst: f64, k: &ExpSumKernel, grid: &GridSpec) -> Result<SquareMatrix> {
    let n = grid.steps();
    let base = fractional_joint_covariance(hurst, grid)?;
    let mut s = SquareMatrix::zeros(3 * n);
    for i in 0..2 * n {
        for j in 0..2 * n {
            s.set(i, j, base.get(i, j));
        }
    }
    for l in 0..n {
        let tl = grid.time(l + 1);
        for m in 0..n {
            let tm = grid.time(m + 1);
            s.set_sym(
                2 * n + l,
                m,
                factor_fractional_covariance(k, hurst, tl, tm)?,
            );
            s.set_sym(2 * n + l, n + m, factor_brownian_covariance(k, tl, tm));
            if m <= l {
                s.set_sym(2 * n + l, 2 * n + m, factor_covariance(k, tl, tm));
            }
        }
    }
    Ok(s)
}

/// Exact joint sampler of `F_i(t_l)` and the Brownian increments through the
/// one-step recursion `F_i(t_{l+1}) = e^{-ρ_i Δ} F_i(t_l) + ε_i`.
#[derive(Debug, Clone)]
pub struct FactorSampler {
    grid: GridSpec,
    decay: Vec<f64>,
    chol: SquareMatrix,
}

impl FactorSampler {
    pub fn new(k: &ExpSumKernel, grid: GridSpec) -> Result<Self> {
        let dt = grid.dt();
        let n = k.len();
        let r = k.rates();
        let mut s = SquareMatrix::zeros(n + 1);
        for i in 0..n {
            for j in 0..=i {
                s.set_sym(i, j, exp_integral(r[i] + r[j], dt));
            }
            s.set_sym(i, n, exp_integral(r[i], dt));
        }
        s.set(n, n, dt);
        Ok(Self {
            grid,
            decay: r.iter().map(|x| (-x * dt).exp()).collect(),
            chol: psd_factorize(&s)?,
        })
    }

    pub fn factors(&self) -> usize {
        self.decay.len()
    }

    /// Normals consumed per step.
    pub fn draws_per_step(&self) -> usize {
        self.decay.len() + 1
    }

    /// Fills `factors` (row `l` holds `F(t_{l+1})`, `N × n`) and `dw`
    /// (length `N`) from `N · (n+1)` step-major normals.
    pub fn sample(&self, z: &[f64], factors: &mut [f64], dw: &mut [f64]) {
        let n = self.factors();
        let mut eps = vec![0.0; n + 1];
        let mut f = vec![0.0; n];
        for l in 0..self.grid.steps() {
            self.chol
                .mul_vec(&z[l * (n + 1)..(l + 1) * (n + 1)], &mut eps);
            for i in 0..n {
                f[i] = self.decay[i] * f[i] + eps[i];
            }
            factors[l * n..(l + 1) * n].copy_from_slice(&f);
            dw[l] = eps[n];
        }
    }
}

/// Draws `(F_i(t_l))` and `(ΔW_l)` exactly; returns `(N × n factors, N increments)`.
pub fn sample_factors_exact(
    k: &ExpSumKernel,
    grid: &GridSpec,
    rng: &mut NormalStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = FactorSampler::new(k, *grid)?;
    let mut z = vec![0.0; grid.steps() * s.draws_per_step()];
    rng.fill(&mut z);
    let mut f = vec![0.0; grid.steps() * k.len()];
    let mut dw = vec![0.0; grid.steps()];
    s.sample(&z, &mut f, &mut dw);
    Ok((f, dw))
}

/// Draws `(I_{t_l})` and `(ΔW_l)` exactly from the `2N` joint covariance.
pub fn sample_fractional_exact(
    spec: &RoughKernel,
    grid: &GridSpec,
    rng: &mut NormalStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.steps();
    let l = psd_factorize(&fractional_joint_covariance(spec.hurst(), grid)?)?;
    let mut z = vec![0.0; 2 * n];
    rng.fill(&mut z);
    let mut g = vec![0.0; 2 * n];
    l.mul_vec(&z, &mut g);
    let mut dw = g[n..].to_vec();
    for i in (1..n).rev() {
        dw[i] -= dw[i - 1];
    }
    g.truncate(n);
    Ok((g, dw))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoupledLeg {
    Exact,
    Multifactor,
}

#[derive(Debug, Clone)]
enum Engine {
    Exact {
        chol: Arc<SquareMatrix>,
    },
    Multifactor {
        sampler: FactorSampler,
        weights: Vec<f64>,
    },
    Coupled {
        chol: Arc<SquareMatrix>,
        leg: CoupledLeg,
    },
}

/// Rough Bergomi path generator; implements [`PathModel`].
#[derive(Debug, Clone)]
pub struct BergomiModel {
    params: BergomiParams,
    grid: GridSpec,
    engine: Engine,
    /// Log-variance compensator at `t_1..t_N`.
    compensator: Vec<f64>,
    /// Multiplier of the Gaussian driver in `ln ν`.
    loading: f64,
    factors: usize,
}

#[derive(Debug, Default, Clone)]
pub struct BergomiWorkspace {
    pub y: Vec<f64>,
    pub nu: Vec<f64>,
    g: Vec<f64>,
    eps: Vec<f64>,
    f: Vec<f64>,
    dw: Vec<f64>,
}

impl BergomiModel {
    fn exact_compensator(p: &BergomiParams, grid: &GridSpec) -> Vec<f64> {
        (1..=grid.steps())
            .map(|l| 0.5 * p.eta * p.eta * grid.time(l).powf(2.0 * p.hurst))
            .collect()
    }

    fn multifactor_compensator(p: &BergomiParams, k: &ExpSumKernel, grid: &GridSpec) -> Vec<f64> {
        let c = p.c_bar();
        (1..=grid.steps())
            .map(|l| 0.5 * c * c * k.sq_integral(grid.time(l)))
            .collect()
    }

    /// Exact reference sampler.
    pub fn exact(params: BergomiParams, grid: GridSpec) -> Result<Self> {
        params.validate()?;
        let chol = psd_factorize(&fractional_joint_covariance(params.hurst, &grid)?)?;
        Ok(Self {
            compensator: Self::exact_compensator(&params, &grid),
            loading: params.eta * (2.0 * params.hurst).sqrt(),
            params,
            grid,
            engine: Engine::Exact {
                chol: Arc::new(chol),
            },
            factors: 0,
        })
    }

    /// Multifactor approximation driven by `k ≈ G`.
    pub fn multifactor(params: BergomiParams, k: &ExpSumKernel, grid: GridSpec) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            compensator: Self::multifactor_compensator(&params, k, &grid),
            loading: params.c_bar(),
            params,
            grid,
            engine: Engine::Multifactor {
                sampler: FactorSampler::new(k, grid)?,
                weights: k.weights().to_vec(),
            },
            factors: k.len(),
        })
    }

    /// Exact and multifactor models sharing one `3N` covariance factor.
    /// Fed identical normals, both legs see the same Brownian path.
    pub fn coupled(
        params: BergomiParams,
        k: &ExpSumKernel,
        grid: GridSpec,
    ) -> Result<(Self, Self)> {
        params.validate()?;
        let chol = Arc::new(psd_factorize(&coupled_covariance(params.hurst, k, &grid)?)?);
        let exact = Self {
            compensator: Self::exact_compensator(&params, &grid),
            loading: params.eta * (2.0 * params.hurst).sqrt(),
            params,
            grid,
            engine: Engine::Coupled {
                chol: Arc::clone(&chol),
                leg: CoupledLeg::Exact,
            },
            factors: 0,
        };
        let multi = Self {
            compensator: Self::multifactor_compensator(&params, k, &grid),
            loading: params.c_bar(),
            params,
            grid,
            engine: Engine::Coupled {
                chol,
                leg: CoupledLeg::Multifactor,
            },
            factors: k.len(),
        };
        Ok((exact, multi))
    }

    pub fn params(&self) -> &BergomiParams {
        &self.params
    }

    fn driver_normals(&self) -> usize {
        let n = self.grid.steps();
        match &self.engine {
            Engine::Exact { .. } => 2 * n,
            Engine::Multifactor { sampler, .. } => n * sampler.draws_per_step(),
            Engine::Coupled { .. } => 3 * n,
        }
    }

    /// Fills `ws.nu` (variance at `t_0..t_N`) and `ws.dw` from the driver
    /// normals at the front of `z`.
    fn variance_path(&self, z: &[f64], ws: &mut BergomiWorkspace) {
        let n = self.grid.steps();
        ws.nu.resize(n + 1, 0.0);
        ws.dw.resize(n, 0.0);
        ws.nu[0] = self.params.v0;
        // the Gaussian driver at t_l lands in ws.g[l-1]
        match &self.engine {
            Engine::Exact { chol } | Engine::Coupled { chol, .. } => {
                let dim = chol.dim();
                ws.g.resize(dim, 0.0);
                chol.mul_vec(&z[..dim], &mut ws.g);
                let mut prev = 0.0;
                for l in 0..n {
                    ws.dw[l] = ws.g[n + l] - prev;
                    prev = ws.g[n + l];
                }
                if let Engine::Coupled {
                    leg: CoupledLeg::Multifactor,
                    ..
                } = &self.engine
                {
                    ws.g.copy_within(2 * n..3 * n, 0);
                }
            }
            Engine::Multifactor { sampler, weights } => {
                let m = sampler.factors();
                ws.g.resize(n, 0.0);
                ws.eps.resize(m + 1, 0.0);
                ws.f.clear();
                ws.f.resize(m, 0.0);
                for l in 0..n {
                    sampler
                        .chol
                        .mul_vec(&z[l * (m + 1)..(l + 1) * (m + 1)], &mut ws.eps);
                    for i in 0..m {
                        ws.f[i] = sampler.decay[i] * ws.f[i] + ws.eps[i];
                    }
                    ws.g[l] = crate::schemes::dot(weights, &ws.f);
                    ws.dw[l] = ws.eps[m];
                }
            }
        }
        for l in 0..n {
            ws.nu[l + 1] = self.params.v0 * (self.loading * ws.g[l] - self.compensator[l]).exp();
        }
    }

    fn run(&self, z: &[f64], ws: &mut BergomiWorkspace) {
        self.variance_path(z, ws);
        let n = self.grid.steps();
        let dt = self.grid.dt();
        let sdt = dt.sqrt();
        let (rho, rp) = (self.params.rho, self.params.rho_perp());
        let perp = &z[self.driver_normals()..];
        ws.y.resize(n + 1, 0.0);
        ws.y[0] = self.params.s0.ln();
        for l in 0..n {
            let nu = ws.nu[l];
            ws.y[l + 1] =
                ws.y[l] + nu.sqrt() * (rho * ws.dw[l] + rp * sdt * perp[l]) - 0.5 * nu * dt;
        }
    }
}

impl PathModel for BergomiModel {
    type Workspace = BergomiWorkspace;

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn normals_per_path(&self) -> usize {
        self.driver_normals() + self.grid.steps()
    }

    fn log_price_path<'w>(&self, z: &[f64], ws: &'w mut BergomiWorkspace) -> &'w [f64] {
        self.run(z, ws);
        &ws.y
    }

    fn describe(&self) -> String {
        let mode = match &self.engine {
            Engine::Exact { .. } => "exact".to_string(),
            Engine::Multifactor { .. } => format!("multifactor,n={}", self.factors),
            Engine::Coupled {
                leg: CoupledLeg::Exact,
                ..
            } => "coupled-exact".to_string(),
            Engine::Coupled {
                leg: CoupledLeg::Multifactor,
                ..
            } => format!("coupled-multifactor,n={}", self.factors),
        };
        format!(
            "bergomi/{mode}(N={},T={})",
            self.grid.steps(),
            self.grid.horizon()
        )
    }
}

/// One path of `(S, ν)`.
pub fn simulate_bergomi(model: &BergomiModel, rng: &mut NormalStream) -> SchemePath {
    let mut z = vec![0.0; model.normals_per_path()];
    rng.fill(&mut z);
    let mut ws = BergomiWorkspace::default();
    model.run(&z, &mut ws);
    let states =
        ws.y.iter()
            .zip(&ws.nu)
            .flat_map(|(y, nu)| [y.exp(), *nu])
            .collect();
    SchemePath {
        grid: model.grid,
        dim: 2,
        states,
        factor_dim: 0,
        factors: None,
    }
}

/// Per-time statistics of `ν_{t_l}/v0 - 1`, `l = 1..N`.
pub fn nu_martingale_check(model: &BergomiModel, cfg: &McConfig) -> Result<Vec<Moments>> {
    let v0 = model.params.v0;
    let n = model.grid.steps();
    reduce_paths(
        model.normals_per_path(),
        n,
        cfg,
        |ws: &mut BergomiWorkspace, z, out| {
            model.variance_path(z, ws);
            for l in 0..n {
                out[l] = ws.nu[l + 1] / v0 - 1.0;
            }
        },
    )
}

/// Black–Scholes call price with zero rates.
pub fn bs_call(s0: f64, strike: f64, t: f64, vol: f64) -> f64 {
    let sd = vol * t.sqrt();
    if sd <= 0.0 {
        return (s0 - strike).max(0.0);
    }
    let d1 = ((s0 / strike).ln() + 0.5 * sd * sd) / sd;
    s0 * norm_cdf(d1) - strike * norm_cdf(d1 - sd)
}

/// Black–Scholes implied volatility (zero rates) by bracketed bisection,
/// accurate to 1e-8 in volatility.
pub fn implied_vol(price: f64, s0: f64, strike: f64, t: f64) -> Result<f64> {
    if !(s0 > 0.0 && strike > 0.0 && t > 0.0) {
        return Err(Error::Domain(format!(
            "invalid contract S0={s0}, K={strike}, T={t}"
        )));
    }
    let intrinsic = (s0 - strike).max(0.0);
    if !(price >= intrinsic - 1e-14 * s0) || !(price < s0) {
        return Err(Error::Domain(format!(
            "call price {price} outside ({intrinsic}, {s0})"
        )));
    }
    if price <= intrinsic {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while bs_call(s0, strike, t, hi) < price {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoConvergence {
                estimate: hi,
                error: f64::INFINITY,
                subdivisions: 0,
            });
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if bs_call(s0, strike, t, mid) < price {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

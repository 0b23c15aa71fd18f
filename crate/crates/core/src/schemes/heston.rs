//! Rough Heston discretizations on the log price `Y = ln S`:
//!
//! * [`HestonVolterra`]: Volterra Euler on `V`, `O(N²)`.
//! * [`HestonMultifactor`]: exponentially damped factors, `O(nN)`.
//! * [`HestonHybrid`]: multifactor history plus an exact Gaussian treatment
//!   of the most recent step.
//! * [`HestonIntegratedVolterra`], [`HestonIntegratedMultifactor`]: schemes on
//!   the integrated variance `X = ∫V` with martingales rebuilt from its
//!   running maximum.
//!
//! Every scheme is a deterministic function of the supplied increments.

use super::{dot, GridSpec, SchemePath};
use crate::error::{Error, Result};
use crate::kernel::{ExpSumKernel, Kernel, RoughKernel};
use crate::numerics::SquareMatrix;
use crate::quadrature::truncate_factors;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub v0: f64,
    pub theta: f64,
    pub lambda: f64,
    pub sigma: f64,
    pub rho: f64,
    pub s0: f64,
}

impl HestonParams {
    pub fn new(v0: f64, theta: f64, lambda: f64, sigma: f64, rho: f64, s0: f64) -> Result<Self> {
        let p = Self {
            v0,
            theta,
            lambda,
            sigma,
            rho,
            s0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("V0", self.v0),
            ("theta", self.theta),
            ("lambda", self.lambda),
            ("sigma", self.sigma),
        ];
        if let Some((name, v)) = nonneg.iter().find(|(_, v)| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!(
                "{name} must be finite and >= 0, got {v}"
            )));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::Config(format!(
                "correlation must lie in [-1, 1], got {}",
                self.rho
            )));
        }
        if !(self.s0 > 0.0) || !self.s0.is_finite() {
            return Err(Error::Config(format!(
                "S0 must be positive, got {}",
                self.s0
            )));
        }
        Ok(())
    }

    /// `V0 = θ = 0.02, λ = 0.3, σ = 0.3, ρ = -0.7, S0 = 1`.
    pub fn benchmark() -> Self {
        Self {
            v0: 0.02,
            theta: 0.02,
            lambda: 0.3,
            sigma: 0.3,
            rho: -0.7,
            s0: 1.0,
        }
    }

    #[inline]
    fn rho_perp(&self) -> f64 {
        (1.0 - self.rho * self.rho).max(0.0).sqrt()
    }
}

/// Reusable per-path buffers. After [`HestonScheme::simulate`], `y` holds the
/// log price on the grid and `v` the variance (or integrated variance).
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub xbar: Vec<f64>,
    pub m: Vec<f64>,
    pub m_perp: Vec<f64>,
    hist: Vec<f64>,
    factors: Vec<f64>,
    inc: [Vec<f64>; 3],
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, steps: usize, integrated: bool) {
        self.y.resize(steps + 1, 0.0);
        self.v.resize(steps + 1, 0.0);
        if integrated {
            self.xbar.resize(steps + 1, 0.0);
            self.m.resize(steps + 1, 0.0);
            self.m_perp.resize(steps + 1, 0.0);
        }
        self.hist.resize(steps, 0.0);
    }
}

/// A rough Heston scheme driven by i.i.d. standard normals.
pub trait HestonScheme: Send + Sync {
    fn grid(&self) -> &GridSpec;
    /// Standard normals consumed per step.
    fn draws_per_step(&self) -> usize;
    /// Runs one path from step-major normals `z` (length `N · draws_per_step`).
    fn simulate(&self, z: &[f64], ws: &mut Workspace);
    /// Short label such as `multifactor(n=55)`.
    fn name(&self) -> String;
}

fn check_len(name: &str, v: &[f64], steps: usize) -> Result<()> {
    if v.len() != steps {
        return Err(Error::Dimension(format!(
            "{name}: expected {steps} increments, got {}",
            v.len()
        )));
    }
    Ok(())
}

/// Splits step-major normals into scaled per-stream increments.
fn split_normals(z: &[f64], m: usize, scales: &[f64], inc: &mut [Vec<f64>; 3]) {
    let steps = z.len() / m;
    for (c, s) in scales.iter().enumerate() {
        inc[c].resize(steps, 0.0);
        for k in 0..steps {
            inc[c][k] = s * z[k * m + c];
        }
    }
}

/// `G(m Δ)` for `m = N, N-1, …, 1`, so that the weights of steps `0..=k` in
/// the update to `t_{k+1}` are the trailing `k+1` entries.
fn reversed_lags<G: Kernel + ?Sized>(g: &G, grid: &GridSpec) -> Vec<f64> {
    let n = grid.steps();
    (0..n).map(|i| g.eval(grid.time(n - i))).collect()
}

fn interleave(cols: &[&[f64]]) -> Vec<f64> {
    let len = cols[0].len();
    let mut out = Vec::with_capacity(len * cols.len());
    for k in 0..len {
        out.extend(cols.iter().map(|c| c[k]));
    }
    out
}

/// Volterra Euler scheme on `(Y, V)`, `(V)_+` inside drift and diffusion.
#[derive(Debug, Clone)]
pub struct HestonVolterra {
    params: HestonParams,
    grid: GridSpec,
    lags: Vec<f64>,
}

impl HestonVolterra {
    pub fn new<G: Kernel + ?Sized>(
        params: HestonParams,
        kernel: &G,
        grid: GridSpec,
    ) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            grid,
            lags: reversed_lags(kernel, &grid),
        })
    }

    /// One path from Brownian increments `dw` (driving `V`) and `dw_perp`.
    pub fn run(&self, dw: &[f64], dw_perp: &[f64], ws: &mut Workspace) {
        let p = &self.params;
        let n = self.grid.steps();
        let dt = self.grid.dt();
        let rp = p.rho_perp();
        ws.prepare(n, false);
        ws.y[0] = p.s0.ln();
        ws.v[0] = p.v0;
        for k in 0..n {
            let vp = ws.v[k].max(0.0);
            let sq = vp.sqrt();
            ws.y[k + 1] = ws.y[k] - 0.5 * vp * dt + sq * (p.rho * dw[k] + rp * dw_perp[k]);
            ws.hist[k] = (p.theta - p.lambda * vp) * dt + p.sigma * sq * dw[k];
            ws.v[k + 1] = p.v0 + dot(&self.lags[n - k - 1..], &ws.hist[..=k]);
        }
    }
}

impl HestonScheme for HestonVolterra {
    fn name(&self) -> String {
        "volterra".into()
    }

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn draws_per_step(&self) -> usize {
        2
    }

    fn simulate(&self, z: &[f64], ws: &mut Workspace) {
        let s = self.grid.dt().sqrt();
        let mut inc = std::mem::take(&mut ws.inc);
        split_normals(z, 2, &[s, s], &mut inc);
        self.run(&inc[0], &inc[1], ws);
        ws.inc = inc;
    }
}

/// Multifactor Euler scheme on `(Y, V)`:
/// `V^i ← e^{-ρ_i Δ}(V^i + (θ - λV_+)Δ + σ√V_+ ΔW)`, `V = V0 + Σ α_i V^i`.
///
/// Truncation to the first `ñ` factors is done by passing the truncated kernel.
#[derive(Debug, Clone)]
pub struct HestonMultifactor {
    params: HestonParams,
    grid: GridSpec,
    weights: Vec<f64>,
    decay: Vec<f64>,
}

impl HestonMultifactor {
    pub fn new(params: HestonParams, kernel: &ExpSumKernel, grid: GridSpec) -> Result<Self> {
        params.validate()?;
        let dt = grid.dt();
        Ok(Self {
            params,
            grid,
            weights: kernel.weights().to_vec(),
            decay: kernel.rates().iter().map(|r| (-r * dt).exp()).collect(),
        })
    }

    pub fn factors(&self) -> usize {
        self.weights.len()
    }

    pub fn run(&self, dw: &[f64], dw_perp: &[f64], ws: &mut Workspace) {
        self.run_recording(dw, dw_perp, ws, None);
    }

    fn run_recording(
        &self,
        dw: &[f64],
        dw_perp: &[f64],
        ws: &mut Workspace,
        mut rec: Option<&mut Vec<f64>>,
    ) {
        let p = &self.params;
        let n = self.grid.steps();
        let dt = self.grid.dt();
        let rp = p.rho_perp();
        ws.prepare(n, false);
        ws.factors.clear();
        ws.factors.resize(self.weights.len(), 0.0);
        ws.y[0] = p.s0.ln();
        ws.v[0] = p.v0;
        if let Some(r) = rec.as_deref_mut() {
            r.extend_from_slice(&ws.factors);
        }
        for k in 0..n {
            let vp = ws.v[k].max(0.0);
            let sq = vp.sqrt();
            ws.y[k + 1] = ws.y[k] - 0.5 * vp * dt + sq * (p.rho * dw[k] + rp * dw_perp[k]);
            let inc = (p.theta - p.lambda * vp) * dt + p.sigma * sq * dw[k];
            for (f, e) in ws.factors.iter_mut().zip(&self.decay) {
                *f = e * (*f + inc);
            }
            ws.v[k + 1] = p.v0 + dot(&self.weights, &ws.factors);
            if let Some(r) = rec.as_deref_mut() {
                r.extend_from_slice(&ws.factors);
            }
        }
    }
}

impl HestonScheme for HestonMultifactor {
    fn name(&self) -> String {
        format!("multifactor(n={})", self.weights.len())
    }

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn draws_per_step(&self) -> usize {
        2
    }

    fn simulate(&self, z: &[f64], ws: &mut Workspace) {
        let s = self.grid.dt().sqrt();
        let mut inc = std::mem::take(&mut ws.inc);
        split_normals(z, 2, &[s, s], &mut inc);
        self.run(&inc[0], &inc[1], ws);
        ws.inc = inc;
    }
}

/// Law of `(ΔW, ΔI)` over one step, `ΔI = ∫_{t_k}^{t_{k+1}} G(t_{k+1}-s) dW_s`.
#[derive(Debug, Clone)]
pub struct HybridCovariance {
    pub var_w: f64,
    pub cov: f64,
    pub var_i: f64,
    /// Lower Cholesky factor of the 2×2 covariance, `ΔW = √Δ z_W`.
    pub factor: SquareMatrix,
}

pub fn hybrid_step_covariance(spec: &RoughKernel, dt: f64) -> Result<HybridCovariance> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {dt}")));
    }
    let (var_w, cov, var_i) = (dt, spec.integral(dt), spec.sq_integral(dt));
    let l00 = var_w.sqrt();
    let l10 = cov / l00;
    // Cauchy–Schwarz keeps the Schur complement non-negative up to rounding
    let l11 = (var_i - l10 * l10).max(0.0).sqrt();
    Ok(HybridCovariance {
        var_w,
        cov,
        var_i,
        factor: SquareMatrix::from_rows(&[vec![l00, 0.0], vec![l10, l11]])?,
    })
}

/// Hybrid multifactor scheme (one exact step):
/// `V_{k+1} = V0 + Σ α_i e^{-ρ_i Δ} V^i_k + (θ - λV_+)∫_0^Δ G + σ√V_+ ΔI`,
/// `V^i ← (V^i + (θ - λV_+)Δ + σ√V_+ ΔW)/(1 + ρ_i Δ)`.
#[derive(Debug, Clone)]
pub struct HestonHybrid {
    params: HestonParams,
    grid: GridSpec,
    /// `α_i e^{-ρ_i Δ}`
    lead: Vec<f64>,
    damp: Vec<f64>,
    g_int: f64,
    step: HybridCovariance,
}

impl HestonHybrid {
    pub fn new(
        params: HestonParams,
        spec: &RoughKernel,
        kernel: &ExpSumKernel,
        grid: GridSpec,
    ) -> Result<Self> {
        params.validate()?;
        let dt = grid.dt();
        Ok(Self {
            params,
            grid,
            lead: kernel
                .weights()
                .iter()
                .zip(kernel.rates())
                .map(|(a, r)| a * (-r * dt).exp())
                .collect(),
            damp: kernel
                .rates()
                .iter()
                .map(|r| 1.0 / (1.0 + r * dt))
                .collect(),
            g_int: spec.integral(dt),
            step: hybrid_step_covariance(spec, dt)?,
        })
    }

    pub fn step_covariance(&self) -> &HybridCovariance {
        &self.step
    }

    pub fn run(&self, dw: &[f64], dw_perp: &[f64], di: &[f64], ws: &mut Workspace) {
        self.run_recording(dw, dw_perp, di, ws, None);
    }

    fn run_recording(
        &self,
        dw: &[f64],
        dw_perp: &[f64],
        di: &[f64],
        ws: &mut Workspace,
        mut rec: Option<&mut Vec<f64>>,
    ) {
        let p = &self.params;
        let n = self.grid.steps();
        let dt = self.grid.dt();
        let rp = p.rho_perp();
        ws.prepare(n, false);
        ws.factors.clear();
        ws.factors.resize(self.lead.len(), 0.0);
        ws.y[0] = p.s0.ln();
        ws.v[0] = p.v0;
        if let Some(r) = rec.as_deref_mut() {
            r.extend_from_slice(&ws.factors);
        }
        for k in 0..n {
            let vp = ws.v[k].max(0.0);
            let sq = vp.sqrt();
            ws.y[k + 1] = ws.y[k] - 0.5 * vp * dt + sq * (p.rho * dw[k] + rp * dw_perp[k]);
            let multi = p.v0 + dot(&self.lead, &ws.factors);
            let drift = p.theta - p.lambda * vp;
            ws.v[k + 1] = multi + drift * self.g_int + p.sigma * sq * di[k];
            let inc = drift * dt + p.sigma * sq * dw[k];
            for (f, d) in ws.factors.iter_mut().zip(&self.damp) {
                *f = (*f + inc) * d;
            }
            if let Some(r) = rec.as_deref_mut() {
                r.extend_from_slice(&ws.factors);
            }
        }
    }
}

impl HestonScheme for HestonHybrid {
    fn name(&self) -> String {
        format!("hybrid(n={})", self.lead.len())
    }

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `(z_W, z_⊥, z_I)`
    fn draws_per_step(&self) -> usize {
        3
    }

    fn simulate(&self, z: &[f64], ws: &mut Workspace) {
        let n = self.grid.steps();
        let l = &self.step.factor;
        let (l00, l10, l11) = (l.get(0, 0), l.get(1, 0), l.get(1, 1));
        let s = self.grid.dt().sqrt();
        let mut inc = std::mem::take(&mut ws.inc);
        for v in inc.iter_mut() {
            v.resize(n, 0.0);
        }
        for k in 0..n {
            let (z0, z1, z2) = (z[3 * k], z[3 * k + 1], z[3 * k + 2]);
            inc[0][k] = l00 * z0;
            inc[1][k] = s * z1;
            inc[2][k] = l10 * z0 + l11 * z2;
        }
        self.run(&inc[0], &inc[1], &inc[2], ws);
        ws.inc = inc;
    }
}

/// Shared bookkeeping of the integrated-variance schemes once `X_{k+1}` is
/// known: running max, martingale increments and the log price.
#[inline]
fn integrated_tail(
    p: &HestonParams,
    rp: f64,
    y0: f64,
    k: usize,
    z: f64,
    z_perp: f64,
    ws: &mut Workspace,
) {
    let xbar = ws.xbar[k].max(ws.v[k + 1]);
    let s = (xbar - ws.xbar[k]).sqrt();
    ws.xbar[k + 1] = xbar;
    ws.m[k + 1] = ws.m[k] + s * z;
    ws.m_perp[k + 1] = ws.m_perp[k] + s * z_perp;
    ws.y[k + 1] = y0 - 0.5 * xbar + p.rho * ws.m[k + 1] + rp * ws.m_perp[k + 1];
}

fn integrated_init(p: &HestonParams, n: usize, ws: &mut Workspace) -> f64 {
    ws.prepare(n, true);
    let y0 = p.s0.ln();
    ws.y[0] = y0;
    ws.v[0] = 0.0;
    ws.xbar[0] = 0.0;
    ws.m[0] = 0.0;
    ws.m_perp[0] = 0.0;
    y0
}

/// Volterra Euler scheme on the integrated variance:
/// `X_{k+1} = V0 t_{k+1} + Δ Σ_{j≤k} G(t_{k+1}-t_j)(θ t_j - λ X̄_j + σ M_j)`,
/// `M_{k} = Σ_{j≤k} √(X̄_j - X̄_{j-1}) Z_j`, `Y = Y0 - X̄/2 + ρM + √(1-ρ²)M⊥`.
///
/// `ws.v` holds `X`, `ws.xbar` its running maximum.
#[derive(Debug, Clone)]
pub struct HestonIntegratedVolterra {
    params: HestonParams,
    grid: GridSpec,
    lags: Vec<f64>,
}

impl HestonIntegratedVolterra {
    pub fn new<G: Kernel + ?Sized>(
        params: HestonParams,
        kernel: &G,
        grid: GridSpec,
    ) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            grid,
            lags: reversed_lags(kernel, &grid),
        })
    }

    /// One path from the standard normals `z`, `z_perp` (one per step each).
    pub fn run(&self, z: &[f64], z_perp: &[f64], ws: &mut Workspace) {
        let p = &self.params;
        let n = self.grid.steps();
        let dt = self.grid.dt();
        let rp = p.rho_perp();
        let y0 = integrated_init(p, n, ws);
        for k in 0..n {
            ws.hist[k] = p.theta * self.grid.time(k) - p.lambda * ws.xbar[k] + p.sigma * ws.m[k];
            ws.v[k + 1] =
                p.v0 * self.grid.time(k + 1) + dt * dot(&self.lags[n - k - 1..], &ws.hist[..=k]);
            integrated_tail(p, rp, y0, k, z[k], z_perp[k], ws);
        }
    }
}

impl HestonScheme for HestonIntegratedVolterra {
    fn name(&self) -> String {
        "integrated-volterra".into()
    }

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn draws_per_step(&self) -> usize {
        2
    }

    fn simulate(&self, z: &[f64], ws: &mut Workspace) {
        let mut inc = std::mem::take(&mut ws.inc);
        split_normals(z, 2, &[1.0, 1.0], &mut inc);
        self.run(&inc[0], &inc[1], ws);
        ws.inc = inc;
    }
}

/// Multifactor scheme on the integrated variance:
/// `X^i ← e^{-ρ_i Δ}(X^i + (θ t_k - λ X̄_k + σ M_k)Δ)`, `X = V0 t + Σ α_i X^i`.
#[derive(Debug, Clone)]
pub struct HestonIntegratedMultifactor {
    params: HestonParams,
    grid: GridSpec,
    weights: Vec<f64>,
    decay: Vec<f64>,
}

impl HestonIntegratedMultifactor {
    pub fn new(params: HestonParams, kernel: &ExpSumKernel, grid: GridSpec) -> Result<Self> {
        params.validate()?;
        let dt = grid.dt();
        Ok(Self {
            params,
            grid,
            weights: kernel.weights().to_vec(),
            decay: kernel.rates().iter().map(|r| (-r * dt).exp()).collect(),
        })
    }

    pub fn run(&self, z: &[f64], z_perp: &[f64], ws: &mut Workspace) {
        self.run_recording(z, z_perp, ws, None);
    }

    fn run_recording(
        &self,
        z: &[f64],
        z_perp: &[f64],
        ws: &mut Workspace,
        mut rec: Option<&mut Vec<f64>>,
    ) {
        let p = &self.params;
        let n = self.grid.steps();
        let dt = self.grid.dt();
        let rp = p.rho_perp();
        let y0 = integrated_init(p, n, ws);
        ws.factors.clear();
        ws.factors.resize(self.weights.len(), 0.0);
        if let Some(r) = rec.as_deref_mut() {
            r.extend_from_slice(&ws.factors);
        }
        for k in 0..n {
            let inc =
                (p.theta * self.grid.time(k) - p.lambda * ws.xbar[k] + p.sigma * ws.m[k]) * dt;
            for (f, e) in ws.factors.iter_mut().zip(&self.decay) {
                *f = e * (*f + inc);
            }
            ws.v[k + 1] = p.v0 * self.grid.time(k + 1) + dot(&self.weights, &ws.factors);
            integrated_tail(p, rp, y0, k, z[k], z_perp[k], ws);
            if let Some(r) = rec.as_deref_mut() {
                r.extend_from_slice(&ws.factors);
            }
        }
    }
}

impl HestonScheme for HestonIntegratedMultifactor {
    fn name(&self) -> String {
        format!("integrated-multifactor(n={})", self.weights.len())
    }

    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn draws_per_step(&self) -> usize {
        2
    }

    fn simulate(&self, z: &[f64], ws: &mut Workspace) {
        let mut inc = std::mem::take(&mut ws.inc);
        split_normals(z, 2, &[1.0, 1.0], &mut inc);
        self.run(&inc[0], &inc[1], ws);
        ws.inc = inc;
    }
}

/// Scheme selector used by front ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HestonSchemeKind {
    Volterra,
    Multifactor,
    MultifactorTruncated,
    Hybrid,
    IntegratedVolterra,
    IntegratedMultifactor,
}

impl HestonSchemeKind {
    pub const ALL: [HestonSchemeKind; 6] = [
        Self::Volterra,
        Self::Multifactor,
        Self::MultifactorTruncated,
        Self::Hybrid,
        Self::IntegratedVolterra,
        Self::IntegratedMultifactor,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Volterra => "volterra",
            Self::Multifactor => "multifactor",
            Self::MultifactorTruncated => "multifactor-truncated",
            Self::Hybrid => "hybrid",
            Self::IntegratedVolterra => "integrated-volterra",
            Self::IntegratedMultifactor => "integrated-multifactor",
        }
    }

    /// Whether the scheme keeps only the first `ñ` factors.
    pub fn truncates(&self) -> bool {
        matches!(
            self,
            Self::MultifactorTruncated | Self::Hybrid | Self::IntegratedMultifactor
        )
    }

    pub fn uses_factors(&self) -> bool {
        !matches!(self, Self::Volterra | Self::IntegratedVolterra)
    }
}

impl std::str::FromStr for HestonSchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown rough Heston scheme '{s}'")))
    }
}

impl std::fmt::Display for HestonSchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Any rough Heston scheme behind one type.
#[derive(Debug, Clone)]
pub enum AnyHestonScheme {
    Volterra(HestonVolterra),
    Multifactor(HestonMultifactor),
    Hybrid(HestonHybrid),
    IntegratedVolterra(HestonIntegratedVolterra),
    IntegratedMultifactor(HestonIntegratedMultifactor),
}

macro_rules! dispatch {
    ($self:ident, $s:ident => $e:expr) => {
        match $self {
            AnyHestonScheme::Volterra($s) => $e,
            AnyHestonScheme::Multifactor($s) => $e,
            AnyHestonScheme::Hybrid($s) => $e,
            AnyHestonScheme::IntegratedVolterra($s) => $e,
            AnyHestonScheme::IntegratedMultifactor($s) => $e,
        }
    };
}

impl HestonScheme for AnyHestonScheme {
    fn grid(&self) -> &GridSpec {
        dispatch!(self, s => s.grid())
    }

    fn draws_per_step(&self) -> usize {
        dispatch!(self, s => s.draws_per_step())
    }

    fn simulate(&self, z: &[f64], ws: &mut Workspace) {
        dispatch!(self, s => s.simulate(z, ws))
    }

    fn name(&self) -> String {
        dispatch!(self, s => s.name())
    }
}

impl AnyHestonScheme {
    /// One path from step-major normals: `(Y, V)` for the variance schemes,
    /// `(Y, X, X̄, M, M⊥)` for the integrated ones.
    pub fn sample_path(&self, z: &[f64]) -> SchemePath {
        let mut ws = Workspace::new();
        self.simulate(z, &mut ws);
        let grid = *self.grid();
        match self {
            AnyHestonScheme::IntegratedVolterra(_) | AnyHestonScheme::IntegratedMultifactor(_) => {
                integrated_path(grid, &ws, None)
            }
            _ => two_component_path(grid, &ws, None),
        }
    }

    /// Column names matching [`AnyHestonScheme::sample_path`].
    pub fn component_names(&self) -> &'static [&'static str] {
        match self {
            AnyHestonScheme::IntegratedVolterra(_) | AnyHestonScheme::IntegratedMultifactor(_) => {
                &["log_s", "x", "x_max", "m", "m_perp"]
            }
            _ => &["log_s", "v"],
        }
    }
}

/// Builds scheme `kind` on `grid`. Volterra schemes use the rough kernel of
/// index `hurst`; the others use `kernel`, cut to its first `ñ` factors at
/// level `β = beta` when [`HestonSchemeKind::truncates`] holds.
pub fn build_heston_scheme(
    kind: HestonSchemeKind,
    params: HestonParams,
    hurst: f64,
    kernel: &ExpSumKernel,
    grid: GridSpec,
    beta: f64,
) -> Result<AnyHestonScheme> {
    let spec = RoughKernel::new(hurst)?;
    let k = if kind.truncates() {
        truncate_factors(kernel, grid.horizon(), grid.steps(), beta)?.0
    } else {
        kernel.clone()
    };
    Ok(match kind {
        HestonSchemeKind::Volterra => {
            AnyHestonScheme::Volterra(HestonVolterra::new(params, &spec, grid)?)
        }
        HestonSchemeKind::Multifactor | HestonSchemeKind::MultifactorTruncated => {
            AnyHestonScheme::Multifactor(HestonMultifactor::new(params, &k, grid)?)
        }
        HestonSchemeKind::Hybrid => {
            AnyHestonScheme::Hybrid(HestonHybrid::new(params, &spec, &k, grid)?)
        }
        HestonSchemeKind::IntegratedVolterra => {
            AnyHestonScheme::IntegratedVolterra(HestonIntegratedVolterra::new(params, &spec, grid)?)
        }
        HestonSchemeKind::IntegratedMultifactor => AnyHestonScheme::IntegratedMultifactor(
            HestonIntegratedMultifactor::new(params, &k, grid)?,
        ),
    })
}

fn two_component_path(
    grid: GridSpec,
    ws: &Workspace,
    factors: Option<(usize, Vec<f64>)>,
) -> SchemePath {
    let (factor_dim, factors) = match factors {
        Some((d, f)) => (d, Some(f)),
        None => (0, None),
    };
    SchemePath {
        grid,
        dim: 2,
        states: interleave(&[&ws.y, &ws.v]),
        factor_dim,
        factors,
    }
}

fn integrated_path(
    grid: GridSpec,
    ws: &Workspace,
    factors: Option<(usize, Vec<f64>)>,
) -> SchemePath {
    let (factor_dim, factors) = match factors {
        Some((d, f)) => (d, Some(f)),
        None => (0, None),
    };
    SchemePath {
        grid,
        dim: 5,
        states: interleave(&[&ws.y, &ws.v, &ws.xbar, &ws.m, &ws.m_perp]),
        factor_dim,
        factors,
    }
}

/// Path of `(Y, V)` under the Volterra Euler scheme with kernel `kernel`.
pub fn heston_volterra_euler<G: Kernel + ?Sized>(
    params: &HestonParams,
    kernel: &G,
    grid: &GridSpec,
    dw: &[f64],
    dw_perp: &[f64],
) -> Result<SchemePath> {
    check_len("dW", dw, grid.steps())?;
    check_len("dW_perp", dw_perp, grid.steps())?;
    let scheme = HestonVolterra::new(*params, kernel, *grid)?;
    let mut ws = Workspace::new();
    scheme.run(dw, dw_perp, &mut ws);
    Ok(two_component_path(*grid, &ws, None))
}

/// Path of `(Y, V)` under the multifactor scheme, factors included.
pub fn heston_multifactor_euler(
    params: &HestonParams,
    kernel: &ExpSumKernel,
    grid: &GridSpec,
    dw: &[f64],
    dw_perp: &[f64],
) -> Result<SchemePath> {
    check_len("dW", dw, grid.steps())?;
    check_len("dW_perp", dw_perp, grid.steps())?;
    let scheme = HestonMultifactor::new(*params, kernel, *grid)?;
    let mut ws = Workspace::new();
    let mut rec = Vec::with_capacity((grid.steps() + 1) * kernel.len());
    scheme.run_recording(dw, dw_perp, &mut ws, Some(&mut rec));
    Ok(two_component_path(*grid, &ws, Some((kernel.len(), rec))))
}

/// Path of `(Y, V)` under the hybrid scheme; `di` are the exact last-step
/// kernel integrals jointly Gaussian with `dw`.
pub fn heston_hybrid_multifactor(
    params: &HestonParams,
    spec: &RoughKernel,
    kernel: &ExpSumKernel,
    grid: &GridSpec,
    dw: &[f64],
    dw_perp: &[f64],
    di: &[f64],
) -> Result<SchemePath> {
    check_len("dW", dw, grid.steps())?;
    check_len("dW_perp", dw_perp, grid.steps())?;
    check_len("dI", di, grid.steps())?;
    let scheme = HestonHybrid::new(*params, spec, kernel, *grid)?;
    let mut ws = Workspace::new();
    let mut rec = Vec::with_capacity((grid.steps() + 1) * kernel.len());
    scheme.run_recording(dw, dw_perp, di, &mut ws, Some(&mut rec));
    Ok(two_component_path(*grid, &ws, Some((kernel.len(), rec))))
}

/// Path of `(Y, X, X̄, M, M⊥)` under the integrated Volterra scheme.
pub fn heston_integrated_volterra<G: Kernel + ?Sized>(
    params: &HestonParams,
    kernel: &G,
    grid: &GridSpec,
    z: &[f64],
    z_perp: &[f64],
) -> Result<SchemePath> {
    check_len("Z", z, grid.steps())?;
    check_len("Z_perp", z_perp, grid.steps())?;
    let scheme = HestonIntegratedVolterra::new(*params, kernel, *grid)?;
    let mut ws = Workspace::new();
    scheme.run(z, z_perp, &mut ws);
    Ok(integrated_path(*grid, &ws, None))
}

/// Path of `(Y, X, X̄, M, M⊥)` under the integrated multifactor scheme.
pub fn heston_integrated_multifactor(
    params: &HestonParams,
    kernel: &ExpSumKernel,
    grid: &GridSpec,
    z: &[f64],
    z_perp: &[f64],
) -> Result<SchemePath> {
    check_len("Z", z, grid.steps())?;
    check_len("Z_perp", z_perp, grid.steps())?;
    let scheme = HestonIntegratedMultifactor::new(*params, kernel, *grid)?;
    let mut ws = Workspace::new();
    let mut rec = Vec::with_capacity((grid.steps() + 1) * kernel.len());
    scheme.run_recording(z, z_perp, &mut ws, Some(&mut rec));
    Ok(integrated_path(*grid, &ws, Some((kernel.len(), rec))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn frozen() -> HestonParams {
        HestonParams::new(0.04, 0.0, 0.0, 0.0, -0.5, 1.3).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(HestonParams::new(-0.1, 0.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(HestonParams::new(0.1, 0.0, 0.0, 0.0, 1.5, 1.0).is_err());
        assert!(HestonParams::new(0.1, 0.0, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(HestonParams::benchmark().validate().is_ok());
    }

    #[test]
    fn frozen_variance_gives_log_euler_black_scholes() {
        let p = frozen();
        let spec = RoughKernel::new(0.1).unwrap();
        let grid = GridSpec::new(1.0, 3).unwrap();
        let dw = [0.1, -0.2, 0.05];
        let dwp = [0.3, 0.0, -0.1];
        let path = heston_volterra_euler(&p, &spec, &grid, &dw, &dwp).unwrap();
        let rp = (1.0 - 0.25f64).sqrt();
        let mut y = 1.3f64.ln();
        for k in 0..3 {
            assert_eq!(path.state(k)[1], 0.04);
            y += -0.5 * 0.04 / 3.0 + 0.2 * (-0.5 * dw[k] + rp * dwp[k]);
            assert_relative_eq!(path.state(k + 1)[0], y, max_relative = 1e-14);
        }
    }

    #[test]
    fn volterra_two_steps_by_hand() {
        let p = HestonParams::new(0.02, 0.03, 0.3, 0.4, 0.0, 1.0).unwrap();
        let spec = RoughKernel::new(0.2).unwrap();
        let grid = GridSpec::new(1.0, 2).unwrap();
        let (dw, dwp) = ([0.2, -0.1], [0.0, 0.0]);
        let path = heston_volterra_euler(&p, &spec, &grid, &dw, &dwp).unwrap();
        let g = |t: f64| spec.value(t).unwrap();
        let inc0 = (0.03 - 0.3 * 0.02) * 0.5 + 0.4 * 0.02f64.sqrt() * 0.2;
        let v1 = 0.02 + g(0.5) * inc0;
        assert_relative_eq!(path.state(1)[1], v1, max_relative = 1e-14);
        let vp1 = v1.max(0.0);
        let inc1 = (0.03 - 0.3 * vp1) * 0.5 + 0.4 * vp1.sqrt() * -0.1;
        assert_relative_eq!(
            path.state(2)[1],
            0.02 + g(1.0) * inc0 + g(0.5) * inc1,
            max_relative = 1e-14
        );
    }

    #[test]
    fn hybrid_deterministic_recursion() {
        let p = HestonParams::new(0.02, 0.05, 0.7, 0.0, 0.0, 1.0).unwrap();
        let spec = RoughKernel::new(0.1).unwrap();
        let k = ExpSumKernel::new(vec![0.5, 1.5], vec![0.2, 8.0]).unwrap();
        let grid = GridSpec::new(0.6, 3).unwrap();
        let zero = [0.0; 3];
        let path = heston_hybrid_multifactor(&p, &spec, &k, &grid, &zero, &zero, &zero).unwrap();
        let dt = 0.2;
        let gi = spec.integral(dt);
        let (mut v, mut f) = (0.02, [0.0f64; 2]);
        for step in 0..3 {
            let multi = 0.02 + 0.5 * (-0.2 * dt).exp() * f[0] + 1.5 * (-8.0 * dt).exp() * f[1];
            let drift = 0.05 - 0.7 * v;
            let next = multi + drift * gi;
            f[0] = (f[0] + drift * dt) / (1.0 + 0.2 * dt);
            f[1] = (f[1] + drift * dt) / (1.0 + 8.0 * dt);
            v = next;
            assert_relative_eq!(path.state(step + 1)[1], v, max_relative = 1e-14);
        }
    }

    #[test]
    fn hybrid_step_covariance_is_psd() {
        for h in [0.05, 0.1, 0.25, 0.45] {
            let spec = RoughKernel::new(h).unwrap();
            let c = hybrid_step_covariance(&spec, 1.0 / 160.0).unwrap();
            assert!(c.cov * c.cov <= c.var_w * c.var_i);
            assert!(c.factor.get(1, 1) > 0.0);
        }
    }

    #[test]
    fn integrated_frozen_variance() {
        let p = HestonParams::new(0.04, 0.0, 0.0, 0.0, 0.3, 1.0).unwrap();
        let spec = RoughKernel::new(0.1).unwrap();
        let grid = GridSpec::new(1.0, 4).unwrap();
        let z = [0.5, -1.0, 0.2, 0.9];
        let zp = [0.0, 0.3, -0.7, 0.1];
        let path = heston_integrated_volterra(&p, &spec, &grid, &z, &zp).unwrap();
        let s = (0.04f64 * 0.25).sqrt();
        let mut m = 0.0;
        for k in 0..4 {
            assert_relative_eq!(
                path.state(k + 1)[1],
                0.04 * grid.time(k + 1),
                max_relative = 1e-14
            );
            m += s * z[k];
            assert_relative_eq!(
                path.state(k + 1)[3],
                m,
                max_relative = 1e-12,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn simulate_matches_run_on_scaled_normals() {
        let p = HestonParams::benchmark();
        let k = ExpSumKernel::new(vec![0.5, 1.5], vec![0.2, 8.0]).unwrap();
        let grid = GridSpec::new(1.0, 5).unwrap();
        let z: Vec<f64> = (0..10).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.4).collect();
        let scheme = HestonMultifactor::new(p, &k, grid).unwrap();
        let mut ws = Workspace::new();
        scheme.simulate(&z, &mut ws);
        let s = grid.dt().sqrt();
        let dw: Vec<f64> = (0..5).map(|k| s * z[2 * k]).collect();
        let dwp: Vec<f64> = (0..5).map(|k| s * z[2 * k + 1]).collect();
        let path = heston_multifactor_euler(&p, &k, &grid, &dw, &dwp).unwrap();
        assert_eq!(path.component(0), ws.y);
        assert_eq!(path.factor_row(0).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn length_checks() {
        let p = HestonParams::benchmark();
        let spec = RoughKernel::new(0.1).unwrap();
        let grid = GridSpec::new(1.0, 3).unwrap();
        assert!(heston_volterra_euler(&p, &spec, &grid, &[0.0; 2], &[0.0; 3]).is_err());
        assert!(heston_integrated_volterra(&p, &spec, &grid, &[0.0; 3], &[0.0; 4]).is_err());
    }
}

//! Builders turning `λ_H` into a finite discrete measure, i.e. an
//! [`ExpSumKernel`] approximating the rough kernel.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{expsum_inner_products, l2_error_exact, ExpSumKernel, RoughKernel};
use crate::numerics::minimize_scalar;

/// Default search bracket for the geometric ratio `A`.
pub const DEFAULT_A_BRACKET: (f64, f64) = (1.05, 50.0);
/// Tolerance of the golden-section search, measured on `ln A`.
const LOG_A_TOL: f64 = 1e-7;

/// Where each interval's atom is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRule {
    Midpoint,
    #[default]
    Barycentric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannConfig {
    pub n: usize,
    pub k: f64,
    pub node_rule: NodeRule,
}

impl RiemannConfig {
    pub fn new(n: usize, k: f64, node_rule: NodeRule) -> Result<Self> {
        if n == 0 || !(k > 0.0) || !k.is_finite() {
            return Err(Error::Config(format!(
                "Riemann measure needs n >= 1 and K > 0, got n = {n}, K = {k}"
            )));
        }
        Ok(Self { n, k, node_rule })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonCotesConfig {
    pub n: usize,
    pub k: f64,
    pub beta: f64,
    pub j: usize,
    pub node_rule: NodeRule,
}

impl NewtonCotesConfig {
    pub fn new(n: usize, k: f64, beta: f64, j: usize, node_rule: NodeRule) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("Newton-Cotes measure needs n >= 1".into()));
        }
        if !(k > 1.0) || !k.is_finite() {
            return Err(Error::Config(format!(
                "Newton-Cotes measure needs K > 1, got {k}"
            )));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1), got {beta}"
            )));
        }
        if j < 2 || !j.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "Newton-Cotes order J must be even and >= 2, got {j}"
            )));
        }
        Ok(Self {
            n,
            k,
            beta,
            j,
            node_rule,
        })
    }

    /// `K` and `β` balancing the three error terms for the given node rule.
    pub fn asymptotic(hurst: f64, n: usize, j: usize, node_rule: NodeRule) -> Result<Self> {
        let (h, jf, nf) = (hurst, j as f64, n as f64);
        let (k, beta) = match node_rule {
            NodeRule::Midpoint => {
                let c = 2.0 * (jf + 1.0) * h;
                let beta = (2.0 * (jf + 3.0) - c) / (3.0 * jf + 7.0 - c);
                (nf.powf((3.0 * jf + 7.0 - c) / (3.0 * jf + 9.0 - c)), beta)
            }
            NodeRule::Barycentric => {
                let beta = (4.0 * jf + 12.0 - 2.0 * h * jf) / (5.0 * jf + 12.0 - 2.0 * h * jf);
                (nf.powf(4.0 / (5.0 * beta + 2.0 * h * (1.0 - beta))), beta)
            }
        };
        Self::new(n, k, beta, j, node_rule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricConfig {
    pub n: usize,
    pub k: f64,
    pub a: f64,
}

impl GeometricConfig {
    pub fn new(n: usize, k: f64, a: f64) -> Result<Self> {
        if n == 0 || !(k > 0.0) || !k.is_finite() {
            return Err(Error::Config(format!(
                "geometric measure needs n >= 1 and K > 0, got n = {n}, K = {k}"
            )));
        }
        if !(a > 1.0) || !a.is_finite() {
            return Err(Error::Config(format!(
                "geometric ratio A must exceed 1, got {a}"
            )));
        }
        Ok(Self { n, k, a })
    }
}

fn node(spec: &RoughKernel, lo: f64, hi: f64, rule: NodeRule) -> Result<f64> {
    match rule {
        NodeRule::Midpoint => Ok(0.5 * (lo + hi)),
        NodeRule::Barycentric => spec.barycenter(lo, hi),
    }
}

/// Atoms for the `n` uniform intervals of `[0, k)`.
fn uniform_atoms(
    spec: &RoughKernel,
    n: usize,
    k: f64,
    rule: NodeRule,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = k / n as f64;
    let mut weights = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = (i as f64 * h, (i + 1) as f64 * h);
        weights.push(spec.lambda_mass(lo, hi)?);
        rates.push(node(spec, lo, hi, rule)?);
    }
    Ok((weights, rates))
}

/// Weights `λ(I_i)` at midpoints or barycenters of `I_i = [(i-1)K/n, iK/n)`.
pub fn build_riemann(spec: &RoughKernel, cfg: &RiemannConfig) -> Result<ExpSumKernel> {
    let (w, r) = uniform_atoms(spec, cfg.n, cfg.k, cfg.node_rule)?;
    ExpSumKernel::new(w, r)
}

/// Coefficients `c_j` of the closed `J`-point Newton–Cotes rule on `[0, 1]`,
/// from the moment equations `Σ_j c_j (j/J)^m = 1/(m+1)`, `m = 0..J`, solved
/// exactly.
pub fn newton_cotes_rational(j: usize) -> Result<Vec<BigRational>> {
    if j == 0 {
        return domain("Newton-Cotes order must be >= 1");
    }
    let size = j + 1;
    let jj = BigInt::from(j);
    let mut a: Vec<Vec<BigRational>> = (0..size)
        .map(|m| {
            let mut row: Vec<BigRational> = (0..size)
                .map(|col| BigRational::new(BigInt::from(col), jj.clone()).pow(m as i32))
                .collect();
            row.push(BigRational::new(BigInt::one(), BigInt::from(m + 1)));
            row
        })
        .collect();
    // Gauss–Jordan; the Vandermonde system is non-singular so a non-zero
    // pivot always exists
    for col in 0..size {
        let piv = (col..size)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Domain("singular Newton-Cotes system".into()))?;
        a.swap(col, piv);
        let p = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x = &*x / &p;
        }
        for r in 0..size {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in col..=size {
                    let v = &a[col][c] * &f;
                    a[r][c] = &a[r][c] - v;
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[size].clone()).collect())
}

pub fn newton_cotes_weights(j: usize) -> Result<Vec<f64>> {
    newton_cotes_rational(j)?
        .iter()
        .map(|c| {
            c.to_f64()
                .ok_or_else(|| Error::Domain("Newton-Cotes weight overflow".into()))
        })
        .collect()
}

/// Riemann part on `[0, K^β)` plus a composite Newton–Cotes rule on
/// `[K^β, K]`; shared panel end points are merged.
pub fn build_newton_cotes(spec: &RoughKernel, cfg: &NewtonCotesConfig) -> Result<ExpSumKernel> {
    NewtonCotesConfig::new(cfg.n, cfg.k, cfg.beta, cfg.j, cfg.node_rule)?;
    let kb = cfg.k.powf(cfg.beta);
    let (mut weights, mut rates) = uniform_atoms(spec, cfg.n, kb, cfg.node_rule)?;
    let coeffs = newton_cotes_weights(cfg.j)?;
    let h = (cfg.k - kb) / cfg.n as f64;
    let scale = spec.c_h() * h;
    let mut tail: Vec<(f64, f64)> = Vec::with_capacity(cfg.n * cfg.j + 1);
    for i in 0..cfg.n {
        for (jj, c) in coeffs.iter().enumerate() {
            let rho = kb + h * (i as f64 + jj as f64 / cfg.j as f64);
            let w = scale * c * rho.powf(-spec.hurst() - 0.5);
            match tail.last_mut() {
                Some(last) if last.0 == rho => last.1 += w,
                _ => tail.push((rho, w)),
            }
        }
    }
    for (r, w) in tail {
        rates.push(r);
        weights.push(w);
    }
    ExpSumKernel::new(weights, rates)
}

/// Composite Simpson rule, the `J = 2` case of [`build_newton_cotes`].
pub fn build_simpson(spec: &RoughKernel, cfg: &NewtonCotesConfig) -> Result<ExpSumKernel> {
    if cfg.j != 2 {
        return Err(Error::Config(format!(
            "Simpson's rule has J = 2, got {}",
            cfg.j
        )));
    }
    build_newton_cotes(spec, cfg)
}

/// `n` uniform intervals on `[0, K)` followed by `n` geometric intervals
/// `[K A^{i-1}, K A^i)`, every atom at its barycenter.
pub fn build_geometric(spec: &RoughKernel, cfg: &GeometricConfig) -> Result<ExpSumKernel> {
    GeometricConfig::new(cfg.n, cfg.k, cfg.a)?;
    let (mut weights, mut rates) = uniform_atoms(spec, cfg.n, cfg.k, NodeRule::Barycentric)?;
    let mut lo = cfg.k;
    for _ in 0..cfg.n {
        let hi = lo * cfg.a;
        if !hi.is_finite() {
            return domain(format!(
                "geometric grid overflows with n = {}, K = {}, A = {}",
                cfg.n, cfg.k, cfg.a
            ));
        }
        let w = spec.lambda_mass(lo, hi)?;
        let r = spec.barycenter(lo, hi)?;
        if !w.is_finite() || !r.is_finite() {
            return domain(format!("geometric atom on [{lo}, {hi}) is not finite"));
        }
        weights.push(w);
        rates.push(r);
        lo = hi;
    }
    ExpSumKernel::new(weights, rates)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalRatio {
    pub a_star: f64,
    /// `ζ` at `A*` over `[0, T]`.
    pub error: f64,
}

/// Minimizes `A ↦ ζ_T(Ĝ^{K,A})` by golden section on `ln A`.
pub fn optimize_a(
    spec: &RoughKernel,
    n: usize,
    k: f64,
    horizon: f64,
    bracket: (f64, f64),
) -> Result<OptimalRatio> {
    if !(bracket.0 > 1.0) || !(bracket.1 > bracket.0) {
        return Err(Error::Config(format!(
            "A bracket must satisfy 1 < lo < hi, got {bracket:?}"
        )));
    }
    GeometricConfig::new(n, k, bracket.0)?;
    let objective = |log_a: f64| geometric_error(spec, n, k, log_a.exp(), horizon);
    let m = minimize_scalar(objective, bracket.0.ln(), bracket.1.ln(), LOG_A_TOL)?;
    if !m.min.is_finite() {
        return domain("no finite geometric error inside the A bracket");
    }
    Ok(OptimalRatio {
        a_star: m.argmin.exp(),
        error: m.min,
    })
}

/// `ζ_T` of the geometric kernel, `+∞` where the grid cannot be built.
pub fn geometric_error(spec: &RoughKernel, n: usize, k: f64, a: f64, horizon: f64) -> f64 {
    GeometricConfig::new(n, k, a)
        .and_then(|cfg| build_geometric(spec, &cfg))
        .and_then(|g| l2_error_exact(spec, &g, horizon))
        .unwrap_or(f64::INFINITY)
}

/// Rescales all weights by `ξ* = ∫Ĝ G / ∫Ĝ²`, the L2-optimal scalar factor.
pub fn rescale_xi(
    spec: &RoughKernel,
    k: &ExpSumKernel,
    horizon: f64,
) -> Result<(ExpSumKernel, f64)> {
    if !(horizon > 0.0) {
        return domain(format!("horizon must be positive, got {horizon}"));
    }
    let ip = expsum_inner_products(spec, k, horizon);
    if !(ip.gg > 0.0) {
        return domain("cannot rescale a kernel with zero L2 norm");
    }
    let xi = ip.g_big_g / ip.gg;
    Ok((k.scaled(xi)?, xi))
}

/// `ξ* Ĝ^{K,A*}` with `n = n_total/2` geometric and uniform atoms each and
/// `K = n^{4/5}`.
pub fn build_systematic(spec: &RoughKernel, n_total: usize, horizon: f64) -> Result<ExpSumKernel> {
    Ok(build_systematic_detailed(spec, n_total, horizon)?.kernel)
}

#[derive(Debug, Clone)]
pub struct SystematicKernel {
    pub kernel: ExpSumKernel,
    pub k: f64,
    pub a_star: f64,
    pub xi_star: f64,
}

pub fn build_systematic_detailed(
    spec: &RoughKernel,
    n_total: usize,
    horizon: f64,
) -> Result<SystematicKernel> {
    if n_total < 2 || !n_total.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "systematic kernel needs an even factor count >= 2, got {n_total}"
        )));
    }
    let n = n_total / 2;
    let k = (n as f64).powf(0.8);
    let opt = optimize_a(spec, n, k, horizon, DEFAULT_A_BRACKET)?;
    let geo = build_geometric(spec, &GeometricConfig::new(n, k, opt.a_star)?)?;
    let (kernel, xi_star) = rescale_xi(spec, &geo, horizon)?;
    Ok(SystematicKernel {
        kernel,
        k,
        a_star: opt.a_star,
        xi_star,
    })
}

/// Drops the factors whose combined contribution at lag `T/N` is at most
/// `(T/N)^β`; returns the kept head and its length `ñ`.
pub fn truncate_factors(
    k: &ExpSumKernel,
    horizon: f64,
    steps: usize,
    beta: f64,
) -> Result<(ExpSumKernel, usize)> {
    if !(horizon > 0.0) || steps == 0 || !(beta > 0.0) {
        return domain(format!(
            "need T > 0, N >= 1, beta > 0; got T = {horizon}, N = {steps}, beta = {beta}"
        ));
    }
    let n_tilde = truncation_level(k, horizon / steps as f64, beta);
    Ok((k.head(n_tilde)?, n_tilde))
}

fn truncation_level(k: &ExpSumKernel, dt: f64, beta: f64) -> usize {
    let threshold = dt.powf(beta);
    let contrib: Vec<f64> = k
        .weights()
        .iter()
        .zip(k.rates())
        .map(|(a, r)| a * (-r * dt).exp())
        .collect();
    // tail[m] = Σ_{i >= m} contrib[i] (0-based), summed from the small end
    let mut tail = vec![0.0; contrib.len() + 1];
    for i in (0..contrib.len()).rev() {
        tail[i] = tail[i + 1] + contrib[i];
    }
    (1..=k.len())
        .find(|&m| tail[m] <= threshold)
        .unwrap_or(k.len())
}

/// Serializable description of a kernel construction. Omitted `K`, `β`,
/// `A` fall back to the asymptotic rules for the chosen method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum KernelMethod {
    RiemannMid {
        n: usize,
        #[serde(default)]
        k: Option<f64>,
    },
    RiemannBary {
        n: usize,
        #[serde(default)]
        k: Option<f64>,
    },
    Simpson {
        n: usize,
        #[serde(default)]
        k: Option<f64>,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        node_rule: NodeRule,
    },
    NewtonCotes {
        n: usize,
        j: usize,
        #[serde(default)]
        k: Option<f64>,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        node_rule: NodeRule,
    },
    Geometric {
        n: usize,
        #[serde(default)]
        k: Option<f64>,
        #[serde(default = "default_a")]
        a: f64,
    },
    Systematic {
        n: usize,
    },
}

fn default_a() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub hurst: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(flatten)]
    pub method: KernelMethod,
}

fn default_horizon() -> f64 {
    1.0
}

impl KernelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<ExpSumKernel> {
        let spec = RoughKernel::new(self.hurst)?;
        let pow = |n: usize, e: f64| (n as f64).powf(e);
        match self.method {
            KernelMethod::RiemannMid { n, k } => build_riemann(
                &spec,
                &RiemannConfig::new(n, k.unwrap_or(pow(n, 2.0 / 3.0)), NodeRule::Midpoint)?,
            ),
            KernelMethod::RiemannBary { n, k } => build_riemann(
                &spec,
                &RiemannConfig::new(n, k.unwrap_or(pow(n, 0.8)), NodeRule::Barycentric)?,
            ),
            KernelMethod::Simpson {
                n,
                k,
                beta,
                node_rule,
            } => {
                let cfg = nc_config(self.hurst, n, 2, k, beta, node_rule)?;
                build_simpson(&spec, &cfg)
            }
            KernelMethod::NewtonCotes {
                n,
                j,
                k,
                beta,
                node_rule,
            } => {
                let cfg = nc_config(self.hurst, n, j, k, beta, node_rule)?;
                build_newton_cotes(&spec, &cfg)
            }
            KernelMethod::Geometric { n, k, a } => build_geometric(
                &spec,
                &GeometricConfig::new(n, k.unwrap_or(pow(n, 0.8)), a)?,
            ),
            KernelMethod::Systematic { n } => build_systematic(&spec, n, self.horizon),
        }
    }
}

fn nc_config(
    hurst: f64,
    n: usize,
    j: usize,
    k: Option<f64>,
    beta: Option<f64>,
    rule: NodeRule,
) -> Result<NewtonCotesConfig> {
    if j < 2 || !j.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "Newton-Cotes order J must be even and >= 2, got {j}"
        )));
    }
    let auto = NewtonCotesConfig::asymptotic(hurst, n, j, rule)?;
    NewtonCotesConfig::new(n, k.unwrap_or(auto.k), beta.unwrap_or(auto.beta), j, rule)
}

//! The fractional kernel `t^{H-1/2}/Γ(H+1/2)`, finite exponential sums, and
//! exact L2 distances between them.

use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::error::{domain, Error, Result};
use crate::numerics::{
    gamma_fn, lower_incomplete_gamma, psd_factorize, CompensatedSum, SquareMatrix,
};

/// Anything that can be evaluated as a scalar convolution kernel.
pub trait Kernel {
    fn eval(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Kernel for F {
    fn eval(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Rough kernel `G(t) = t^{H-1/2}/Γ(H+1/2)`, the Laplace transform of
/// `λ_H(dρ) = c_H ρ^{-H-1/2} dρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoughKernel {
    hurst: f64,
    c_h: f64,
    gamma_a: f64,
}

impl RoughKernel {
    pub fn new(hurst: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 0.5) {
            return domain(format!("Hurst parameter must lie in (0, 1/2), got {hurst}"));
        }
        let gamma_a = gamma_fn(hurst + 0.5)?;
        let c_h = 1.0 / (gamma_a * gamma_fn(0.5 - hurst)?);
        Ok(Self {
            hurst,
            c_h,
            gamma_a,
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// `c_H = 1/(Γ(H+1/2) Γ(1/2-H))`.
    pub fn c_h(&self) -> f64 {
        self.c_h
    }

    /// `Γ(H+1/2)`.
    pub fn gamma_h_half(&self) -> f64 {
        self.gamma_a
    }

    /// `G(t)`; the kernel is singular at 0.
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return domain(format!("rough kernel is only defined for t > 0, got {t}"));
        }
        Ok(self.eval_unchecked(t))
    }

    #[inline]
    fn eval_unchecked(&self, t: f64) -> f64 {
        t.powf(self.hurst - 0.5) / self.gamma_a
    }

    /// Density of `λ_H` with respect to Lebesgue measure.
    pub fn density(&self, rho: f64) -> f64 {
        self.c_h * rho.powf(-self.hurst - 0.5)
    }

    /// `λ_H([a, b))`.
    pub fn lambda_mass(&self, a: f64, b: f64) -> Result<f64> {
        check_interval(a, b)?;
        let p = 0.5 - self.hurst;
        Ok(self.c_h * (b.powf(p) - a.powf(p)) / p)
    }

    /// `λ_H`-weighted mean of ρ over `[a, b]`.
    pub fn barycenter(&self, a: f64, b: f64) -> Result<f64> {
        check_interval(a, b)?;
        let p = 0.5 - self.hurst;
        let q = 1.5 - self.hurst;
        let c = (p / q) * (b.powf(q) - a.powf(q)) / (b.powf(p) - a.powf(p));
        // rounding can push very narrow intervals onto an end point
        Ok(c.clamp(a, b))
    }

    /// Closed-form bound `½ (∫_{[K,∞)} λ_H(dρ)/√ρ)²` on the L2 error caused by
    /// cutting the measure at `K`.
    pub fn truncation_bound(&self, k: f64) -> Result<f64> {
        if !(k > 0.0) || !k.is_finite() {
            return domain(format!("truncation level must be positive, got {k}"));
        }
        let tail = self.c_h * k.powf(-self.hurst) / self.hurst;
        Ok(0.5 * tail * tail)
    }

    /// `∫_0^t G(s)² ds = t^{2H}/(2H Γ(H+1/2)²)`.
    pub fn sq_integral(&self, t: f64) -> f64 {
        t.powf(2.0 * self.hurst) / (2.0 * self.hurst * self.gamma_a * self.gamma_a)
    }

    /// `∫_0^t G(s) ds = t^{H+1/2}/((H+1/2) Γ(H+1/2))`.
    pub fn integral(&self, t: f64) -> f64 {
        let a = self.hurst + 0.5;
        t.powf(a) / (a * self.gamma_a)
    }

    /// `∫_0^t e^{-ρ s} G(s) ds = ρ^{-H-1/2} γ(H+1/2, ρt)/Γ(H+1/2)`.
    pub fn exp_pairing(&self, rho: f64, t: f64) -> f64 {
        if rho == 0.0 {
            return self.integral(t);
        }
        let a = self.hurst + 0.5;
        // both arguments are in the valid domain by construction
        let g = lower_incomplete_gamma(a, rho * t).unwrap_or(f64::NAN);
        rho.powf(-a) * g / self.gamma_a
    }
}

impl Kernel for RoughKernel {
    fn eval(&self, t: f64) -> f64 {
        self.eval_unchecked(t)
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if !(a >= 0.0) || !(b > a) || !b.is_finite() {
        return domain(format!("expected 0 <= a < b, got [{a}, {b})"));
    }
    Ok(())
}

/// `∫_0^t e^{-s u} du = (1 - e^{-s t})/s`, with the limit `t` at `s = 0`.
#[inline]
pub(crate) fn exp_integral(s: f64, t: f64) -> f64 {
    if s == 0.0 {
        t
    } else {
        -(-s * t).exp_m1() / s
    }
}

/// `Ĝ(t) = Σ α_i e^{-ρ_i t}` with non-negative weights and strictly
/// increasing non-negative rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSumKernel {
    weights: Vec<f64>,
    rates: Vec<f64>,
}

#[derive(Deserialize)]
struct CsvRow {
    alpha: f64,
    rho: f64,
}

impl ExpSumKernel {
    pub fn new(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if weights.len() != rates.len() {
            return Err(Error::Dimension(format!(
                "{} weights but {} rates",
                weights.len(),
                rates.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidKernel(
                "kernel needs at least one factor".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "weights must be finite and >= 0, got {w}"
            )));
        }
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "rates must be finite and >= 0, got {r}"
            )));
        }
        check_increasing(&rates)?;
        Ok(Self { weights, rates })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Kernel with every weight multiplied by `xi`.
    pub fn scaled(&self, xi: f64) -> Result<Self> {
        Self::new(
            self.weights.iter().map(|w| w * xi).collect(),
            self.rates.clone(),
        )
    }

    /// First `m` factors.
    pub fn head(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return domain(format!("cannot keep {m} of {} factors", self.len()));
        }
        Ok(Self {
            weights: self.weights[..m].to_vec(),
            rates: self.rates[..m].to_vec(),
        })
    }

    /// `∫_0^t Ĝ(s)² ds`.
    pub fn sq_integral(&self, t: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for i in 0..self.len() {
            let (ai, ri) = (self.weights[i], self.rates[i]);
            acc.add(ai * ai * exp_integral(2.0 * ri, t));
            for j in 0..i {
                acc.add(2.0 * ai * self.weights[j] * exp_integral(ri + self.rates[j], t));
            }
        }
        acc.value()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "alpha" || &headers[1] != "rho" {
            return Err(Error::InvalidKernel(format!(
                "expected CSV header `alpha,rho`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let (mut weights, mut rates) = (Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            weights.push(row.alpha);
            rates.push(row.rho);
        }
        Self::new(weights, rates)
    }

    /// Writes `alpha,rho` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["alpha", "rho"])?;
        for (a, r) in self.weights.iter().zip(&self.rates) {
            wtr.write_record([format!("{a:.16e}"), format!("{r:.16e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

impl Kernel for ExpSumKernel {
    fn eval(&self, t: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.rates)
            .map(|(a, r)| a * (-r * t).exp())
            .sum()
    }
}

fn check_increasing(rates: &[f64]) -> Result<()> {
    match rates.windows(2).position(|w| !(w[0] < w[1])) {
        Some(i) => Err(Error::InvalidKernel(format!(
            "rates must be strictly increasing, got {} then {} at index {}",
            rates[i],
            rates[i + 1],
            i + 1
        ))),
        None => Ok(()),
    }
}

/// Covariance of `(∫_0^t e^{-ρ_i(t-s)} dW_s)_{i≤n}` together with
/// `∫_0^t G(t-s) dW_s`, the fractional integral occupying the last index.
#[derive(Debug, Clone)]
pub struct JointCovariance {
    pub matrix: SquareMatrix,
    pub rates: Vec<f64>,
    pub hurst: f64,
    pub t: f64,
}

impl JointCovariance {
    /// `vᵀ Σ v` with compensated accumulation.
    pub fn quadratic_form(&self, v: &[f64]) -> Result<f64> {
        let n = self.matrix.dim();
        if v.len() != n {
            return Err(Error::Dimension(format!(
                "vector of length {} for {n}x{n} matrix",
                v.len()
            )));
        }
        let mut acc = CompensatedSum::new();
        for i in 0..n {
            acc.add(v[i] * v[i] * self.matrix.get(i, i));
            for j in 0..i {
                acc.add(2.0 * v[i] * v[j] * self.matrix.get(i, j));
            }
        }
        Ok(acc.value())
    }

    /// Lower-triangular factor for sampling.
    pub fn factor(&self) -> Result<SquareMatrix> {
        psd_factorize(&self.matrix)
    }
}

pub fn build_joint_covariance(
    spec: &RoughKernel,
    rates: &[f64],
    t: f64,
) -> Result<JointCovariance> {
    if !(t > 0.0) {
        return domain(format!("horizon must be positive, got {t}"));
    }
    if let Some(r) = rates.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::InvalidKernel(format!("rates must be >= 0, got {r}")));
    }
    check_increasing(rates)?;
    let n = rates.len();
    let mut m = SquareMatrix::zeros(n + 1);
    for i in 0..n {
        for j in 0..=i {
            m.set_sym(i, j, exp_integral(rates[i] + rates[j], t));
        }
        m.set_sym(i, n, spec.exp_pairing(rates[i], t));
    }
    m.set(n, n, spec.sq_integral(t));
    Ok(JointCovariance {
        matrix: m,
        rates: rates.to_vec(),
        hurst: spec.hurst(),
        t,
    })
}

/// L2 pairings over `[0, T]` between an exponential sum `Ĝ` and `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerProducts {
    /// `∫ Ĝ²`
    pub gg: f64,
    /// `∫ Ĝ G`
    pub g_big_g: f64,
    /// `∫ G²`
    pub big_gg: f64,
}

pub fn expsum_inner_products(spec: &RoughKernel, k: &ExpSumKernel, t: f64) -> InnerProducts {
    let g_big_g = k
        .weights()
        .iter()
        .zip(k.rates())
        .map(|(a, r)| a * spec.exp_pairing(*r, t))
        .collect::<CompensatedSum>()
        .value();
    InnerProducts {
        gg: k.sq_integral(t),
        g_big_g,
        big_gg: spec.sq_integral(t),
    }
}

/// `ζ = ∫_0^t (G(s) - Ĝ(s))² ds`, evaluated in closed form as `vᵀΣv` with
/// `v = (α, -1)`. Rounding can make the quadratic form slightly negative for
/// very accurate kernels, so the result is clamped at 0.
pub fn l2_error_exact(spec: &RoughKernel, k: &ExpSumKernel, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("horizon must be positive, got {t}"));
    }
    let mut acc = CompensatedSum::new();
    let ip = expsum_inner_products(spec, k, t);
    acc.add(ip.gg);
    for (a, r) in k.weights().iter().zip(k.rates()) {
        acc.add(-2.0 * a * spec.exp_pairing(*r, t));
    }
    acc.add(ip.big_gg);
    Ok(acc.value().max(0.0))
}

/// `sqrt((T/N) Σ_{k=1}^N (Ĝ(t_k) - G(t_k))²)` on `t_k = kT/N`.
pub fn l2_error_discrete(
    spec: &RoughKernel,
    k: &ExpSumKernel,
    t: f64,
    steps: usize,
) -> Result<f64> {
    if !(t > 0.0) || steps == 0 {
        return domain(format!("need T > 0 and N >= 1, got T = {t}, N = {steps}"));
    }
    let dt = t / steps as f64;
    let sum: CompensatedSum = (1..=steps)
        .map(|i| {
            let s = i as f64 * dt;
            let d = k.eval(s) - spec.eval(s);
            d * d
        })
        .collect();
    Ok((dt * sum.value()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h25() -> RoughKernel {
        RoughKernel::new(0.25).unwrap()
    }

    #[test]
    fn rough_kernel_values() {
        let g = h25();
        let g34 = gamma_fn(0.75).unwrap();
        assert_relative_eq!(g.value(1.0).unwrap(), 1.0 / g34, max_relative = 1e-15);
        assert_relative_eq!(g.value(1.0).unwrap(), 0.816_049_7, max_relative = 1e-6);
        let log_form = (-0.25 * 4.0f64.ln() - g34.ln()).exp();
        assert_relative_eq!(g.value(4.0).unwrap(), log_form, max_relative = 1e-14);
        assert!(g.value(0.0).is_err());
        assert!(RoughKernel::new(0.5).is_err());
        assert!(RoughKernel::new(0.0).is_err());
    }

    #[test]
    fn c_h_matches_gamma_identity() {
        // Γ(3/4)Γ(1/4) = π√2
        let g = h25();
        assert_relative_eq!(
            g.c_h(),
            1.0 / (std::f64::consts::PI * 2f64.sqrt()),
            max_relative = 1e-13
        );
    }

    #[test]
    fn lambda_mass_and_barycenter() {
        let g = h25();
        assert_relative_eq!(
            g.lambda_mass(0.0, 1.0).unwrap(),
            g.c_h() / 0.25,
            max_relative = 1e-15
        );
        assert!(g.lambda_mass(1.0, 1.0).is_err());
        assert!(g.lambda_mass(2.0, 1.0).is_err());
        assert!(g.lambda_mass(0.0, 1e-40).unwrap() < 1e-9);
        assert_relative_eq!(g.barycenter(0.0, 1.0).unwrap(), 0.2, max_relative = 1e-15);
        assert!(g.barycenter(-1.0, 1.0).is_err());
    }

    #[test]
    fn truncation_bound_values() {
        let g = h25();
        let want = 0.5 * (g.c_h() / 0.25) * (g.c_h() / 0.25);
        assert_relative_eq!(g.truncation_bound(1.0).unwrap(), want, max_relative = 1e-15);
        // c_H = 1/(π√2) at H = 1/4
        let c = 1.0 / (std::f64::consts::PI * 2f64.sqrt());
        assert_relative_eq!(
            g.truncation_bound(1.0).unwrap(),
            8.0 * c * c,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            g.truncation_bound(4.0).unwrap(),
            0.5 * g.truncation_bound(1.0).unwrap(),
            max_relative = 1e-14
        );
        assert!(g.truncation_bound(0.0).is_err());
    }

    #[test]
    fn expsum_eval_examples() {
        let k = ExpSumKernel::new(vec![1.0], vec![0.0]).unwrap();
        assert_eq!(k.eval(3.7), 1.0);
        let k = ExpSumKernel::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(k.eval(0.0), 2.0);
        let k = ExpSumKernel::new(vec![0.5, 2.0], vec![0.3, 7.0]).unwrap();
        assert_relative_eq!(
            k.eval(0.5),
            0.5 * (-0.15f64).exp() + 2.0 * (-3.5f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn expsum_validation() {
        assert!(ExpSumKernel::new(vec![], vec![]).is_err());
        assert!(ExpSumKernel::new(vec![1.0], vec![0.0, 1.0]).is_err());
        assert!(ExpSumKernel::new(vec![-1.0], vec![0.0]).is_err());
        assert!(ExpSumKernel::new(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(ExpSumKernel::new(vec![1.0, 1.0], vec![2.0, 1.0]).is_err());
        assert!(ExpSumKernel::new(vec![1.0], vec![-0.5]).is_err());
    }

    #[test]
    fn covariance_entries() {
        let g = h25();
        let cov = build_joint_covariance(&g, &[0.0], 2.0).unwrap();
        assert_eq!(cov.matrix.get(0, 0), 2.0);
        assert_relative_eq!(cov.matrix.get(0, 1), g.integral(2.0), max_relative = 1e-15);
        let cov = build_joint_covariance(&g, &[0.5, 2.0], 1.0).unwrap();
        let g34 = gamma_fn(0.75).unwrap();
        assert_relative_eq!(
            cov.matrix.get(2, 2),
            1.0 / (0.5 * g34 * g34),
            max_relative = 1e-14
        );
        assert_relative_eq!(cov.matrix.get(2, 2), 1.331_92, max_relative = 1e-4);
        assert!(cov.matrix.is_symmetric(0.0));
        assert!(build_joint_covariance(&g, &[1.0, 0.5], 1.0).is_err());
        assert!(build_joint_covariance(&g, &[1.0], 0.0).is_err());
    }

    #[test]
    fn zero_kernel_error_is_sq_norm() {
        let g = h25();
        let k = ExpSumKernel::new(vec![0.0, 0.0], vec![0.0, 3.0]).unwrap();
        assert_relative_eq!(
            l2_error_exact(&g, &k, 1.0).unwrap(),
            g.sq_integral(1.0),
            max_relative = 1e-15
        );
    }

    #[test]
    fn quadratic_form_matches_l2_error() {
        let g = h25();
        let k = ExpSumKernel::new(vec![0.4, 0.3, 0.9], vec![0.0, 1.5, 12.0]).unwrap();
        let cov = build_joint_covariance(&g, k.rates(), 1.0).unwrap();
        let mut v = k.weights().to_vec();
        v.push(-1.0);
        assert_relative_eq!(
            cov.quadratic_form(&v).unwrap(),
            l2_error_exact(&g, &k, 1.0).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn inner_products_single_factor() {
        let g = h25();
        let k = ExpSumKernel::new(vec![1.0], vec![1.0]).unwrap();
        let ip = expsum_inner_products(&g, &k, 1.0);
        assert_relative_eq!(ip.gg, (1.0 - (-2.0f64).exp()) / 2.0, max_relative = 1e-15);
        assert_relative_eq!(ip.gg, 0.432_332, max_relative = 1e-6);
    }

    #[test]
    fn discrete_error_four_points() {
        let g = h25();
        let k = ExpSumKernel::new(vec![0.7, 0.2], vec![0.5, 4.0]).unwrap();
        let mut sum = 0.0;
        for t in [0.25f64, 0.5, 0.75, 1.0] {
            let d = 0.7 * (-0.5 * t).exp() + 0.2 * (-4.0 * t).exp()
                - t.powf(-0.25) / gamma_fn(0.75).unwrap();
            sum += d * d;
        }
        assert_relative_eq!(
            l2_error_discrete(&g, &k, 1.0, 4).unwrap(),
            (0.25 * sum).sqrt(),
            max_relative = 1e-13
        );
        assert!(l2_error_discrete(&g, &k, 1.0, 0).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let k = ExpSumKernel::new(
            vec![0.1, 1.0 / 3.0, 2.5e-7],
            vec![0.0, std::f64::consts::PI, 1e9 / 7.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        k.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("alpha,rho\n"));
        assert_eq!(ExpSumKernel::read_csv(&buf[..]).unwrap(), k);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(ExpSumKernel::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(ExpSumKernel::read_csv("alpha,rho\n1,2\n1,1\n".as_bytes()).is_err());
    }

    #[test]
    fn head_and_scaled() {
        let k = ExpSumKernel::new(vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(k.head(2).unwrap().weights(), &[1.0, 2.0]);
        assert!(k.head(0).is_err());
        assert!(k.head(4).is_err());
        assert_eq!(k.scaled(2.0).unwrap().weights(), &[2.0, 4.0, 6.0]);
    }
}

//! Euler discretizations of stochastic Volterra equations
//! `X_t = x0 + ∫ G1(t-s) b(X_s) ds + ∫ G2(t-s) σ(X_s) dW_s`.
//!
//! [`volterra_euler`] sums over the whole history at every step (`O(N²)`);
//! for exponential-sum kernels [`multifactor_euler`] carries one damped
//! factor per exponential instead (`O(nN)`) and produces the same numbers.

use std::io::Write;

use crate::error::{domain, Error, Result};
use crate::kernel::{ExpSumKernel, Kernel};

pub mod heston;

pub use heston::{
    build_heston_scheme, heston_hybrid_multifactor, heston_integrated_multifactor,
    heston_integrated_volterra, heston_multifactor_euler, heston_volterra_euler,
    hybrid_step_covariance, AnyHestonScheme, HestonHybrid, HestonIntegratedMultifactor,
    HestonIntegratedVolterra, HestonMultifactor, HestonParams, HestonScheme, HestonSchemeKind,
    HestonVolterra, HybridCovariance, Workspace,
};

/// Regular grid `t_k = k T/N`, `k = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    horizon: f64,
    steps: usize,
}

impl GridSpec {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() || steps == 0 {
            return domain(format!(
                "grid needs T > 0 and N >= 1, got T = {horizon}, N = {steps}"
            ));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }
}

/// States (and optionally factor values) on every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemePath {
    pub grid: GridSpec,
    pub dim: usize,
    /// Row-major `(N+1) × dim`.
    pub states: Vec<f64>,
    /// Number of factor values stored per grid point (0 if none).
    pub factor_dim: usize,
    /// Row-major `(N+1) × factor_dim`, present for multifactor schemes.
    pub factors: Option<Vec<f64>>,
}

impl SchemePath {
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.states
            .iter()
            .skip(c)
            .step_by(self.dim)
            .copied()
            .collect()
    }

    pub fn factor_row(&self, k: usize) -> Option<&[f64]> {
        self.factors
            .as_ref()
            .map(|f| &f[k * self.factor_dim..(k + 1) * self.factor_dim])
    }

    /// CSV with a `t` column followed by one column per state component.
    pub fn write_csv<W: Write>(&self, writer: W, names: &[&str]) -> Result<()> {
        if names.len() != self.dim {
            return Err(Error::Dimension(format!(
                "{} column names for {} components",
                names.len(),
                self.dim
            )));
        }
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["t"];
        header.extend_from_slice(names);
        wtr.write_record(&header)?;
        for k in 0..=self.grid.steps() {
            let mut rec = vec![format!("{:.16e}", self.grid.time(k))];
            rec.extend(self.state(k).iter().map(|x| format!("{x:.16e}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Coefficients of a `d`-dimensional SVE driven by a `d`-dimensional
/// Brownian motion.
pub trait SvePlant {
    fn dim(&self) -> usize;
    fn x0(&self) -> &[f64];
    /// Writes `b(x)` into `out` (length `d`).
    fn drift(&self, x: &[f64], out: &mut [f64]);
    /// Writes `σ(x)` into `out`, row-major `d × d`.
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
}

fn check_increments<P: SvePlant + ?Sized>(plant: &P, grid: &GridSpec, dw: &[f64]) -> Result<usize> {
    let d = plant.dim();
    if d == 0 || plant.x0().len() != d {
        return Err(Error::Dimension(format!(
            "plant of dimension {d} with x0 of length {}",
            plant.x0().len()
        )));
    }
    if dw.len() != grid.steps() * d {
        return Err(Error::Dimension(format!(
            "expected {} Brownian increments ({} steps x {d}), got {}",
            grid.steps() * d,
            grid.steps(),
            dw.len()
        )));
    }
    Ok(d)
}

/// `out += m · v` for a row-major `d × d` matrix.
#[inline]
fn mat_vec_add(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o += m[r * d..(r + 1) * d]
            .iter()
            .zip(v)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
}

/// Volterra Euler scheme
/// `X_{k+1} = x0 + Σ_{j≤k} G1((k+1-j)Δ) b(X_j) Δ + Σ_{j≤k} G2((k+1-j)Δ) σ(X_j) ΔW_j`.
///
/// `dw` holds the `N` increments step-major, `d` components each.
pub fn volterra_euler<P, G1, G2>(
    plant: &P,
    g1: &G1,
    g2: &G2,
    grid: &GridSpec,
    dw: &[f64],
) -> Result<SchemePath>
where
    P: SvePlant + ?Sized,
    G1: Kernel + ?Sized,
    G2: Kernel + ?Sized,
{
    let d = check_increments(plant, grid, dw)?;
    let n = grid.steps();
    let dt = grid.dt();
    let lag1: Vec<f64> = (0..=n)
        .map(|m| if m == 0 { 0.0 } else { g1.eval(grid.time(m)) })
        .collect();
    let lag2: Vec<f64> = (0..=n)
        .map(|m| if m == 0 { 0.0 } else { g2.eval(grid.time(m)) })
        .collect();

    let mut states = vec![0.0; (n + 1) * d];
    states[..d].copy_from_slice(plant.x0());
    // history of b(X_j) Δ and σ(X_j) ΔW_j
    let mut drift_hist = vec![0.0; n * d];
    let mut noise_hist = vec![0.0; n * d];
    let mut sig = vec![0.0; d * d];
    for k in 0..n {
        let x = states[k * d..(k + 1) * d].to_vec();
        let b = &mut drift_hist[k * d..(k + 1) * d];
        plant.drift(&x, b);
        b.iter_mut().for_each(|v| *v *= dt);
        plant.diffusion(&x, &mut sig);
        mat_vec_add(
            &sig,
            &dw[k * d..(k + 1) * d],
            &mut noise_hist[k * d..(k + 1) * d],
        );

        let next = &mut states[(k + 1) * d..(k + 2) * d];
        next.copy_from_slice(plant.x0());
        for j in 0..=k {
            let (w1, w2) = (lag1[k + 1 - j], lag2[k + 1 - j]);
            for c in 0..d {
                next[c] += w1 * drift_hist[j * d + c] + w2 * noise_hist[j * d + c];
            }
        }
    }
    Ok(SchemePath {
        grid: *grid,
        dim: d,
        states,
        factor_dim: 0,
        factors: None,
    })
}

/// Multifactor Euler scheme for `G1 = G2 = Ĝ`: one factor per exponential,
/// `F^i_{k+1} = e^{-ρ_i Δ}(F^i_k + b(X̂_k)Δ + σ(X̂_k)ΔW_k)`,
/// `X̂_k = x0 + Σ α_i F^i_k`.
///
/// Factors are stored as `(N+1) × (n·d)`, factor-major.
pub fn multifactor_euler<P>(
    plant: &P,
    k: &ExpSumKernel,
    grid: &GridSpec,
    dw: &[f64],
) -> Result<SchemePath>
where
    P: SvePlant + ?Sized,
{
    let d = check_increments(plant, grid, dw)?;
    let (n, nf) = (grid.steps(), k.len());
    let dt = grid.dt();
    let decay: Vec<f64> = k.rates().iter().map(|r| (-r * dt).exp()).collect();
    let fd = nf * d;

    let mut states = vec![0.0; (n + 1) * d];
    let mut factors = vec![0.0; (n + 1) * fd];
    states[..d].copy_from_slice(plant.x0());
    let mut b = vec![0.0; d];
    let mut sig = vec![0.0; d * d];
    let mut incr = vec![0.0; d];
    for step in 0..n {
        let x = &states[step * d..(step + 1) * d];
        plant.drift(x, &mut b);
        plant.diffusion(x, &mut sig);
        for c in 0..d {
            incr[c] = b[c] * dt;
        }
        mat_vec_add(&sig, &dw[step * d..(step + 1) * d], &mut incr);

        let (prev, next) = factors.split_at_mut((step + 1) * fd);
        let prev = &prev[step * fd..];
        let next = &mut next[..fd];
        for i in 0..nf {
            for c in 0..d {
                next[i * d + c] = decay[i] * (prev[i * d + c] + incr[c]);
            }
        }
        let xn = &mut states[(step + 1) * d..(step + 2) * d];
        xn.copy_from_slice(plant.x0());
        for (i, a) in k.weights().iter().enumerate() {
            for c in 0..d {
                xn[c] += a * next[i * d + c];
            }
        }
    }
    Ok(SchemePath {
        grid: *grid,
        dim: d,
        states,
        factor_dim: fd,
        factors: Some(factors),
    })
}

/// Two-kernel multifactor scheme: `G1`, `G2` share their rates but carry
/// separate weights, so drift factors `X̂^i` and noise factors `Ŷ^i` are
/// tracked separately. Factors are stored as `(X̂^1..X̂^n, Ŷ^1..Ŷ^n)`.
pub fn multifactor_euler_pair<P>(
    plant: &P,
    k1: &ExpSumKernel,
    k2: &ExpSumKernel,
    grid: &GridSpec,
    dw: &[f64],
) -> Result<SchemePath>
where
    P: SvePlant + ?Sized,
{
    if k1.rates() != k2.rates() {
        return Err(Error::InvalidKernel(
            "two-kernel multifactor scheme needs identical rates".into(),
        ));
    }
    let d = check_increments(plant, grid, dw)?;
    let (n, nf) = (grid.steps(), k1.len());
    let dt = grid.dt();
    let decay: Vec<f64> = k1.rates().iter().map(|r| (-r * dt).exp()).collect();
    let fd = 2 * nf * d;

    let mut states = vec![0.0; (n + 1) * d];
    let mut factors = vec![0.0; (n + 1) * fd];
    states[..d].copy_from_slice(plant.x0());
    let mut b = vec![0.0; d];
    let mut sig = vec![0.0; d * d];
    let mut noise = vec![0.0; d];
    for step in 0..n {
        let x = &states[step * d..(step + 1) * d];
        plant.drift(x, &mut b);
        plant.diffusion(x, &mut sig);
        noise.iter_mut().for_each(|v| *v = 0.0);
        mat_vec_add(&sig, &dw[step * d..(step + 1) * d], &mut noise);

        let (prev, next) = factors.split_at_mut((step + 1) * fd);
        let prev = &prev[step * fd..];
        let next = &mut next[..fd];
        let half = nf * d;
        for i in 0..nf {
            for c in 0..d {
                let xi = i * d + c;
                next[xi] = decay[i] * (prev[xi] + b[c] * dt);
                next[half + xi] = decay[i] * (prev[half + xi] + noise[c]);
            }
        }
        let xn = &mut states[(step + 1) * d..(step + 2) * d];
        xn.copy_from_slice(plant.x0());
        for i in 0..nf {
            let (a1, a2) = (k1.weights()[i], k2.weights()[i]);
            for c in 0..d {
                xn[c] += a1 * next[i * d + c] + a2 * next[half + i * d + c];
            }
        }
    }
    Ok(SchemePath {
        grid: *grid,
        dim: d,
        states,
        factor_dim: fd,
        factors: Some(factors),
    })
}

/// `Σ_i a[i] b[i]` with four independent accumulators.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Linear {
        x0: Vec<f64>,
        b: f64,
        s: f64,
    }

    impl SvePlant for Linear {
        fn dim(&self) -> usize {
            1
        }
        fn x0(&self) -> &[f64] {
            &self.x0
        }
        fn drift(&self, x: &[f64], out: &mut [f64]) {
            out[0] = self.b * x[0];
        }
        fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
            out[0] = self.s;
        }
    }

    #[test]
    fn constant_kernel_telescopes_to_brownian_path() {
        let plant = Linear {
            x0: vec![0.3],
            b: 0.0,
            s: 1.0,
        };
        let grid = GridSpec::new(1.0, 4).unwrap();
        let dw = [0.1, -0.4, 0.25, 0.05];
        let one = |_: f64| 1.0;
        let p = volterra_euler(&plant, &one, &one, &grid, &dw).unwrap();
        let mut w = 0.3;
        for k in 0..4 {
            w += dw[k];
            assert_relative_eq!(p.state(k + 1)[0], w, max_relative = 1e-15);
        }
        let k = ExpSumKernel::new(vec![1.0], vec![0.0]).unwrap();
        let m = multifactor_euler(&plant, &k, &grid, &dw).unwrap();
        for (a, b) in m.states.iter().zip(&p.states) {
            assert_relative_eq!(a, b, max_relative = 1e-15);
        }
    }

    #[test]
    fn frozen_plant_stays_put() {
        let plant = Linear {
            x0: vec![1.7],
            b: 0.0,
            s: 0.0,
        };
        let grid = GridSpec::new(2.0, 5).unwrap();
        let g = |t: f64| t.powf(-0.3);
        let p = volterra_euler(&plant, &g, &g, &grid, &[1.0; 5]).unwrap();
        assert!(p.states.iter().all(|x| *x == 1.7));
    }

    #[test]
    fn two_steps_by_hand() {
        // G = e^{-t}, b = 0, σ = 1
        let plant = Linear {
            x0: vec![0.5],
            b: 0.0,
            s: 1.0,
        };
        let grid = GridSpec::new(1.0, 2).unwrap();
        let dw = [0.3, -0.2];
        let g = |t: f64| (-t).exp();
        let p = volterra_euler(&plant, &g, &g, &grid, &dw).unwrap();
        assert_relative_eq!(
            p.state(1)[0],
            0.5 + (-0.5f64).exp() * 0.3,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            p.state(2)[0],
            0.5 + (-1.0f64).exp() * 0.3 + (-0.5f64).exp() * -0.2,
            max_relative = 1e-15
        );
    }

    #[test]
    fn dimension_errors() {
        let plant = Linear {
            x0: vec![0.0],
            b: 0.0,
            s: 1.0,
        };
        let grid = GridSpec::new(1.0, 3).unwrap();
        let g = |_: f64| 1.0;
        assert!(volterra_euler(&plant, &g, &g, &grid, &[0.0; 2]).is_err());
        let k1 = ExpSumKernel::new(vec![1.0], vec![0.0]).unwrap();
        let k2 = ExpSumKernel::new(vec![1.0], vec![1.0]).unwrap();
        assert!(multifactor_euler_pair(&plant, &k1, &k2, &grid, &[0.0; 3]).is_err());
        assert!(GridSpec::new(0.0, 3).is_err());
        assert!(GridSpec::new(1.0, 0).is_err());
    }

    #[test]
    fn path_csv() {
        let plant = Linear {
            x0: vec![1.0],
            b: -1.0,
            s: 0.0,
        };
        let grid = GridSpec::new(1.0, 2).unwrap();
        let k = ExpSumKernel::new(vec![1.0], vec![0.0]).unwrap();
        let p = multifactor_euler(&plant, &k, &grid, &[0.0; 2]).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf, &["x"]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,x\n"));
        assert!(p.write_csv(Vec::new(), &["x", "y"]).is_err());
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert_relative_eq!(dot(&a, &b), naive, max_relative = 1e-14);
    }
}

use crate::error::{Error, Result};

/// Iteration cap of the golden-section search.
pub const GOLDEN_MAX_ITER: usize = 200;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub argmin: f64,
    pub min: f64,
}

/// Golden-section search for a minimizer of `f` on `[lo, hi]`.
///
/// The bracket is shrunk until its width is below `2 tol` (or the iteration
/// cap is hit). The bracket ends are evaluated as well, so the returned point
/// is never worse than either end.
pub fn minimize_scalar<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<Minimum>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!(
            "minimize_scalar requires lo < hi, got [{lo}, {hi}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "minimize_scalar requires tol > 0, got {tol}"
        )));
    }

    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_MAX_ITER {
        if b - a <= 2.0 * tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }

    let mid = 0.5 * (a + b);
    let mut best = Minimum {
        argmin: mid,
        min: f(mid),
    };
    for (x, fx) in [(c, fc), (d, fd), (lo, f(lo)), (hi, f(hi))] {
        if fx < best.min {
            best = Minimum { argmin: x, min: fx };
        }
    }
    Ok(best)
}

//! Least-squares slopes on log–log axes.

use crate::error::{Error, Result};

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid(format!("need two or more paired points, got {} and {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("log-log fit needs positive finite data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("abscissae are all equal"));
    }
    Ok(sxy / sxx)
}

/// All-points slope and the slope with the first (coarsest) point dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub all: f64,
    pub tail: f64,
}

/// Expects points ordered coarse to fine. With only two points the tail
/// slope falls back to the all-points slope.
pub fn rates(x: &[f64], y: &[f64]) -> Result<Rates> {
    let all = loglog_slope(x, y)?;
    let tail = if x.len() > 2 { loglog_slope(&x[1..], &y[1..])? } else { all };
    Ok(Rates { all, tail })
}

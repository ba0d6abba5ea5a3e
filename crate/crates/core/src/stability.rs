//! Stability of the uniform state `y_F`: closed-form coefficients of the
//! atomistic quadratic form, the Fourier eigenvalue cubic, dense numerical
//! eigenvalues in the `‖Du‖` metric and critical strains.
//!
//! The atomistic second variation decomposes as
//! `⟨δ²ℰ^a u, u⟩ = A‖Du‖² + ε²B‖D²u‖² + ε⁴C‖D³u‖² + ε⁶D‖D⁴u‖²`,
//! so its eigenvalues with respect to `‖Du‖²` are `λ_F(s_k)` with
//! `λ_F(s) = A + Bs + Cs² + Ds³` and `s_k = 4 sin²(kπ/2N)`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lattice::{diff, norm_l2eps, ChainGrid, FieldKind, PeriodicField};
use crate::models::{self, Deformation, Model, Part, SymmetricBandedOperator};
use crate::potentials::EamPotential;

/// Derivatives of `φ`, `ρ` at `F`, `2F` and of `G` at `ρ̄_F = 2ρ(F) + 2ρ(2F)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub phi2_f: f64,
    pub phi2_2f: f64,
    pub rho1_f: f64,
    pub rho1_2f: f64,
    pub rho2_f: f64,
    pub rho2_2f: f64,
    pub g1: f64,
    pub g2: f64,
}

impl Derivatives {
    pub fn at(p: &EamPotential, f: f64) -> Self {
        let rho_bar = p.uniform_density(f);
        Self {
            phi2_f: p.pair.d2(f),
            phi2_2f: p.pair.d2(2.0 * f),
            rho1_f: p.density.d1(f),
            rho1_2f: p.density.d1(2.0 * f),
            rho2_f: p.density.d2(f),
            rho2_2f: p.density.d2(2.0 * f),
            g1: p.embedding.d1(rho_bar),
            g2: p.embedding.d2(rho_bar),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCoefficients {
    pub f: f64,
    /// Embedding part of the continuum modulus.
    pub a_hat: f64,
    /// Pair part of the continuum modulus.
    pub a_tilde: f64,
    /// `â + ã`, the Cauchy–Born modulus `W''(F)`.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub fn coefficients(p: &EamPotential, f: f64) -> Result<StabilityCoefficients> {
    if !(f > 0.0) {
        return Err(Error::invalid(format!("strain F = {f} must be positive")));
    }
    let Derivatives { phi2_f, phi2_2f, rho1_f: r1, rho1_2f: r2, rho2_f, rho2_2f, g1, g2 } = Derivatives::at(p, f);
    let a_hat = 4.0 * g2 * (r1 + 2.0 * r2).powi(2) + 2.0 * g1 * (rho2_f + 4.0 * rho2_2f);
    let a_tilde = phi2_f + 4.0 * phi2_2f;
    Ok(StabilityCoefficients {
        f,
        a_hat,
        a_tilde,
        a: a_hat + a_tilde,
        b: -(phi2_2f + g2 * (r1 * r1 + 20.0 * r2 * r2 + 12.0 * r1 * r2) + 2.0 * g1 * rho2_2f),
        c: g2 * (8.0 * r2 * r2 + 2.0 * r1 * r2),
        d: -g2 * r2 * r2,
    })
}

/// `λ_F(s) = A + Bs + Cs² + Ds³`.
pub fn lambda_cubic(c: &StabilityCoefficients, s: f64) -> f64 {
    c.a + s * (c.b + s * (c.c + s * c.d))
}

/// `λ'_F(s) = B + 2Cs + 3Ds²`.
pub fn lambda_cubic_derivative(c: &StabilityCoefficients, s: f64) -> f64 {
    c.b + s * (2.0 * c.c + 3.0 * s * c.d)
}

/// `s_k = 4 sin²(kπ/2N)`.
pub fn s_k(grid: ChainGrid, k: i64) -> f64 {
    4.0 * (k as f64 * PI / (2.0 * grid.n() as f64)).sin().powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub f: f64,
    pub n: usize,
    /// `(k, s_k, λ_F(s_k))` for `k = -N+1..=N`.
    pub modes: Vec<(i64, f64, f64)>,
    /// Minimum over `k ≠ 0`.
    pub min_lambda: f64,
    /// A minimizing wavenumber, the smallest positive one among ties.
    pub argmin_k: i64,
    /// Whether the minimum is attained at `k = ±1` (up to roundoff).
    pub min_at_first_mode: bool,
}

pub fn fourier_spectrum(p: &EamPotential, f: f64, grid: ChainGrid) -> Result<SpectrumReport> {
    let c = coefficients(p, f)?;
    let modes: Vec<(i64, f64, f64)> = grid
        .sites()
        .map(|k| {
            let s = s_k(grid, k);
            (k, s, lambda_cubic(&c, s))
        })
        .collect();
    let (mut argmin_k, mut min_lambda) = (0, f64::INFINITY);
    for k in 1..=grid.n() as i64 {
        let lambda = modes[grid.index(k)].2;
        if lambda < min_lambda {
            min_lambda = lambda;
            argmin_k = k;
        }
    }
    let first = modes[grid.index(1)].2;
    let min_at_first_mode = argmin_k == 1 || (first - min_lambda) <= 1e-12 * first.abs().max(1.0);
    Ok(SpectrumReport { f, n: grid.n(), modes, min_lambda, argmin_k, min_at_first_mode })
}

// ---------------------------------------------------------------------------
// Dense eigenproblems

fn gershgorin(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `P (S/ε) P + c·11ᵀ/2N` with `P` the projection onto zero-sum strains and
/// `c` above every other eigenvalue, so the constant mode sits on top.
fn strain_space_matrix(model: &Model, p: &EamPotential, f: f64) -> Result<DMatrix<f64>> {
    let grid = model.grid();
    let y = Deformation::uniform(grid, f)?;
    let s = models::strain_hessian(model, Part::All, p, &y)?.to_dense() * grid.n() as f64;
    let n = s.nrows();
    let row_mean: Vec<f64> = s.row_iter().map(|r| r.sum() / n as f64).collect();
    let total_mean = row_mean.iter().sum::<f64>() / n as f64;
    let bound = gershgorin(&s);
    let shift = (2.0 * bound + 1.0) / n as f64;
    Ok(DMatrix::from_fn(n, n, |i, j| s[(i, j)] - row_mean[i] - row_mean[j] + total_mean + shift))
}

fn symmetric_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical(format!("symmetric eigensolver did not converge (size {n})")))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite eigenvalue (size {n})")));
    }
    Ok(eig)
}

/// All `2N - 1` eigenvalues of `δ²ℰ(y_F)` relative to `‖Du‖²` on zero-mean
/// displacements, ascending.
pub fn numeric_spectrum(model: &Model, p: &EamPotential, f: f64) -> Result<Vec<f64>> {
    let m = strain_space_matrix(model, p, f)?;
    let n = m.nrows();
    let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite eigenvalue (size {n})")));
    }
    values.sort_by(f64::total_cmp);
    values.pop();
    Ok(values)
}

/// Smallest eigenvalue of `H u = λ L u` on zero-mean displacements, with
/// `⟨L u, u⟩ = ‖Du‖²`, and a mode normalised to `‖Du‖ = 1`.
///
/// Solved in strain space: `λ_min = min ⟨S q, q⟩ / (ε |q|²)` over strains
/// `q = Du` with zero sum.
pub fn min_eig_numeric(model: &Model, p: &EamPotential, f: f64) -> Result<(f64, PeriodicField)> {
    let grid = model.grid();
    let eig = symmetric_eigen(strain_space_matrix(model, p, f)?)?;
    let (imin, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
    let q = eig.eigenvectors.column(imin);
    let q_mean = q.sum() / q.len() as f64;
    if q_mean.abs() > 1e-8 {
        return Err(Error::Numerical(format!("minimal mode is not a zero-sum strain (mean {q_mean:e})")));
    }
    let eps = grid.epsilon();
    let mut acc = 0.0;
    let u: Vec<f64> = q
        .iter()
        .map(|v| {
            acc += eps * (v - q_mean);
            acc
        })
        .collect();
    let mode = PeriodicField::new(grid, u, FieldKind::Displacement)?;
    let norm = norm_l2eps(&diff(&mode, 1)?);
    Ok((lambda, mode.scaled(1.0 / norm)))
}

/// Eigenvalues of the generalized problem `H u = λ L u` assembled directly
/// on displacements, with the constant mode deflated from both operators.
pub fn generalized_eigenvalues(model: &Model, p: &EamPotential, f: f64) -> Result<Vec<f64>> {
    let grid = model.grid();
    let n = grid.period();
    let h = models::hessian(model, p, f)?.to_dense();
    let l = SymmetricBandedOperator::strain_metric(grid).to_dense();
    let y = Deformation::uniform(grid, f)?;
    let s = models::strain_hessian(model, Part::All, p, &y)?.to_dense() * grid.n() as f64;
    // Generalized eigenvalues are Rayleigh quotients of S/ε, bounded by its Gershgorin radius.
    let alpha = 2.0 * gershgorin(&s) + 1.0;
    let j = DMatrix::from_element(n, n, 1.0 / n as f64);
    let chol = Cholesky::new(l + &j)
        .ok_or_else(|| Error::Numerical("metric operator is not positive definite".into()))?;
    let lower = chol.l();
    let a = h + j * alpha;
    let x = lower
        .solve_lower_triangular(&a)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = lower
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let sym = (&c + c.transpose()) * 0.5;
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values.pop();
    Ok(values)
}

/// Whether `δ²ℰ(y_F)` is positive definite on zero-mean displacements,
/// decided by a Cholesky factorisation in strain space.
pub fn is_stable(model: &Model, p: &EamPotential, f: f64) -> Result<bool> {
    Ok(Cholesky::new(strain_space_matrix(model, p, f)?).is_some())
}

/// Width of the final bisection interval.
pub const CRITICAL_STRAIN_TOL: f64 = 1e-12;

/// Bisection for the strain where stability changes, using [`is_stable`]
/// as the sign oracle.
pub fn critical_strain(model: &Model, p: &EamPotential, bracket: (f64, f64)) -> Result<f64> {
    bisect(bracket, |f| is_stable(model, p, f))
}

/// Root of `A_F = â + ã` in `bracket`: the critical strain of the local model.
pub fn continuum_critical_strain(p: &EamPotential, bracket: (f64, f64)) -> Result<f64> {
    bisect(bracket, |f| Ok(coefficients(p, f)?.a > 0.0))
}

fn bisect(bracket: (f64, f64), stable: impl Fn(f64) -> Result<bool>) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(lo > 0.0) {
        return Err(Error::invalid(format!("bracket [{lo}, {hi}] must satisfy 0 < lo < hi")));
    }
    let s_lo = stable(lo)?;
    if s_lo == stable(hi)? {
        return Err(Error::Bracket { lo, hi });
    }
    while hi - lo > CRITICAL_STRAIN_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if stable(mid)? == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Oscillatory test functions

/// `ũ_ℓ = (-1)^ℓ ε/(2√2)` and its restriction `û` to `|ℓ| ≤ K-1`
/// (projected to zero mean, which leaves its strain unchanged).
pub fn remark_test_functions(grid: ChainGrid, k: usize) -> Result<(PeriodicField, PeriodicField)> {
    if k < 2 || k + 3 > grid.n() {
        return Err(Error::invalid(format!("K = {k} outside 2..=N-3 = {}", grid.n() as i64 - 3)));
    }
    let amp = grid.epsilon() / (2.0 * SQRT_2);
    let alt = move |l: i64| if l.rem_euclid(2) == 0 { amp } else { -amp };
    let u_tilde = PeriodicField::from_fn(grid, FieldKind::Displacement, alt);
    let reach = k as i64 - 1;
    let mut u_hat = PeriodicField::from_fn(grid, FieldKind::Displacement, |l| if l.abs() <= reach { alt(l) } else { 0.0 });
    u_hat.project_zero_mean();
    Ok((u_tilde, u_hat))
}

/// `⟨δ²ℰ(y_F) u, u⟩ / ‖Du‖²`.
pub fn rayleigh_quotient(model: &Model, p: &EamPotential, f: f64, u: &PeriodicField) -> Result<f64> {
    let h = models::hessian(model, p, f)?;
    let norm2 = norm_l2eps(&diff(u, 1)?).powi(2);
    if norm2 == 0.0 {
        return Err(Error::invalid("Rayleigh quotient of a constant field"));
    }
    Ok(h.bilinear(u, u) / norm2)
}

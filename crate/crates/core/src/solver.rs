//! Linearized equilibria under dead loads, the QNL consistency residual, its
//! negative norm and convergence studies.
//!
//! With `⟨δℱ, w⟩ = -ε Σ f_ℓ w_ℓ` the linearized equilibrium
//! `⟨δ²ℰ(y_F) u, w⟩ = ε Σ f_ℓ w_ℓ` reads `H u = ε f` in the unweighted
//! pairing in which [`models::hessian`] is assembled.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fit::{self, Rates};
use crate::lattice::{diff, norm_l2eps, norm_region, ChainGrid, FieldKind, PeriodicField, RegionNorm};
use crate::models::{self, Model, RegionDecomposition, SymmetricBandedOperator};
use crate::potentials::EamPotential;
use crate::stability;

fn mean_tolerance(values: &[f64]) -> f64 {
    1e-14 * values.iter().fold(0.0f64, |m, v| m.max(v.abs())) * (values.len() as f64).sqrt()
}

fn check_zero_mean(v: &PeriodicField, what: &str) -> Result<()> {
    let sum: f64 = v.values().iter().sum();
    let mean = sum / v.values().len() as f64;
    if mean.abs() > mean_tolerance(v.values()) {
        return Err(Error::invalid(format!("{what} has nonzero mean {mean:e}")));
    }
    Ok(())
}

/// Dead load: force `f_ℓ` per atom with zero mean.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadLoad {
    force: PeriodicField,
    pub source: String,
}

impl DeadLoad {
    /// Rejects loads whose mean exceeds roundoff, then removes the roundoff.
    pub fn new(force: PeriodicField, source: impl Into<String>) -> Result<Self> {
        check_zero_mean(&force, "load")?;
        let mut force = force.with_kind(FieldKind::Generic);
        force.project_zero_mean();
        Ok(Self { force, source: source.into() })
    }

    /// `f_ℓ = cos(2π εℓ)`.
    pub fn cosine(grid: ChainGrid) -> Self {
        let eps = grid.epsilon();
        let f = PeriodicField::from_fn(grid, FieldKind::Generic, |l| (2.0 * PI * eps * l as f64).cos());
        Self::new(f, "cos(2*pi*x)").expect("cosine samples have zero mean")
    }

    pub fn force(&self) -> &PeriodicField {
        &self.force
    }

    pub fn grid(&self) -> ChainGrid {
        self.force.grid()
    }
}

/// Solves `H u = b` on zero-mean fields by a Cholesky factorisation of
/// `H + c·11ᵀ/2N` with one step of iterative refinement.
pub fn solve_zero_mean(h: &SymmetricBandedOperator, rhs: &PeriodicField) -> Result<PeriodicField> {
    check_zero_mean(rhs, "right-hand side")?;
    let grid = h.grid();
    let n = grid.period();
    let mut m = h.to_dense();
    let shift = (0..n).map(|i| m[(i, i)]).sum::<f64>() / n as f64;
    if !(shift > 0.0) {
        return Err(Error::NotPositiveDefinite(format!("nonpositive mean diagonal {shift:e}")));
    }
    m.add_scalar_mut(shift / n as f64);
    let chol = Cholesky::new(m).ok_or_else(|| {
        Error::NotPositiveDefinite(format!("Cholesky factorisation failed for 2N = {n}"))
    })?;
    let b = DVector::from_column_slice(rhs.values());
    let mut u = chol.solve(&b);
    let r = &b - DVector::from_vec(h.apply_slice(u.as_slice()));
    u += chol.solve(&r);
    let u = PeriodicField::new(grid, u.as_slice().to_vec(), FieldKind::Displacement)?;
    let res = DVector::from_vec(h.apply_slice(u.values())) - &b;
    let b_norm = b.norm();
    if res.norm() > 1e-11 * b_norm {
        return Err(Error::Numerical(format!(
            "linear solve residual {:e} exceeds 1e-11 relative to {b_norm:e}",
            res.norm()
        )));
    }
    Ok(u)
}

/// Displacement `u` solving `⟨δ²ℰ(y_F) u, w⟩ = ε Σ f_ℓ w_ℓ`.
pub fn solve_linearized(model: &Model, p: &EamPotential, f: f64, load: &DeadLoad) -> Result<PeriodicField> {
    if load.grid() != model.grid() {
        return Err(Error::invalid("load and model live on different grids"));
    }
    let h = models::hessian(model, p, f)?;
    solve_zero_mean(&h, &load.force().scaled(model.grid().epsilon()))
}

/// `T = (H_qnl - H_a) u_a`.
pub fn consistency_residual(region: &RegionDecomposition, p: &EamPotential, f: f64, u_a: &PeriodicField) -> Result<PeriodicField> {
    check_zero_mean(u_a, "displacement")?;
    let grid = region.grid();
    let h_qnl = models::hessian(&Model::Qnl(*region), p, f)?;
    let h_a = models::hessian(&Model::Atomistic(grid), p, f)?;
    let mut t = h_qnl.sub(&h_a).apply(u_a)?;
    // Columns of both Hessians sum to zero; drop the roundoff.
    t.project_zero_mean();
    Ok(t)
}

/// `sup_w ⟨T, w⟩ / ‖Dw‖` over zero-mean `w`.
///
/// Writing `T_ℓ = V_ℓ - V_{ℓ+1}` turns `⟨T, w⟩` into `ε Σ V_ℓ Dw_ℓ`; the
/// supremum is the `ℓ²_ε` norm of the zero-mean representative of `V`.
pub fn negative_norm(t: &PeriodicField) -> Result<f64> {
    check_zero_mean(t, "residual")?;
    let mut v = Vec::with_capacity(t.values().len());
    let mut acc = 0.0;
    for &x in t.values() {
        v.push(acc);
        acc -= x;
    }
    let v = PeriodicField::new(t.grid(), v, FieldKind::Displacement)?;
    Ok(norm_l2eps(&v))
}

/// Maps `N` to the atomistic half-width `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KRule {
    Fixed(usize),
    /// `K = ⌊N^θ⌋`
    Power(f64),
}

impl KRule {
    pub fn k_for(&self, n: usize) -> usize {
        match *self {
            KRule::Fixed(k) => k,
            KRule::Power(theta) => (n as f64).powf(theta).floor() as usize,
        }
    }
}

/// Smallest gap `N - K` accepted by experiments, so that the mirrored
/// transition atoms never share neighbours across the period.
pub const MIN_CONTINUUM_GAP: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    /// `‖Du^a - Du^qnl‖_{ℓ²_ε}`
    pub error_h1: f64,
    /// Negative norm of `T = (H_qnl - H_a) u^a`.
    pub consistency_negnorm: f64,
    /// `‖D³u^a‖_{ℓ²_ε(𝒞)}`
    pub d3_continuum: f64,
    /// `‖D²u^a‖_{ℓ^∞(ℐ)}`
    pub d2_interface_max: f64,
    /// `â_F + ã_F`
    pub a_f: f64,
    /// `‖H_qnl(u^a - u^qnl) - T‖ / ‖εf‖`
    pub error_equation_residual: f64,
    /// Smallest QNL eigenvalue when requested.
    pub lambda_min_qnl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub records: Vec<ConvergenceRecord>,
    /// Slopes of `error_h1` against `ε`.
    pub error_rates: Rates,
    /// Slopes of `consistency_negnorm` against `ε`.
    pub negnorm_rates: Rates,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    /// Also compute the smallest QNL eigenvalue (dense, `O(N³)`).
    pub with_lambda_min: bool,
}

/// One study point.
pub fn convergence_point(p: &EamPotential, f: f64, load: &DeadLoad, k: usize, options: StudyOptions) -> Result<ConvergenceRecord> {
    let grid = load.grid();
    let n = grid.n();
    if k + MIN_CONTINUUM_GAP > n {
        return Err(Error::invalid(format!("K = {k} must satisfy K < N - 5 for N = {n}")));
    }
    let region = RegionDecomposition::new(grid, k)?;
    let qnl = Model::Qnl(region);
    let u_a = solve_linearized(&Model::Atomistic(grid), p, f, load)?;
    let u_q = solve_linearized(&qnl, p, f, load)?;
    let e = u_a.axpby(1.0, &u_q, -1.0);
    let error_h1 = norm_l2eps(&diff(&e, 1)?);
    let t = consistency_residual(&region, p, f, &u_a)?;
    let consistency_negnorm = negative_norm(&t)?;
    let he = models::hessian(&qnl, p, f)?.apply(&e)?;
    // The gap equals the difference of the two solve residuals, so it is
    // measured on the scale of the load term.
    let load_norm = grid.epsilon() * load.force().values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let gap = he.values().iter().zip(t.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let d3 = diff(&u_a, 3)?;
    let d2 = diff(&u_a, 2)?;
    let lambda_min_qnl = if options.with_lambda_min {
        Some(stability::numeric_spectrum(&qnl, p, f)?[0])
    } else {
        None
    };
    Ok(ConvergenceRecord {
        n,
        k,
        epsilon: grid.epsilon(),
        error_h1,
        consistency_negnorm,
        d3_continuum: norm_region(&d3, &region.continuum_set(), RegionNorm::L2Eps)?,
        d2_interface_max: norm_region(&d2, &region.interface_set(), RegionNorm::Max)?,
        a_f: stability::coefficients(p, f)?.a,
        error_equation_residual: if load_norm > 0.0 { gap / load_norm } else { gap },
        lambda_min_qnl,
    })
}

/// Runs [`convergence_point`] for every `N` (in parallel) and fits rates.
pub fn convergence_study(
    p: &EamPotential,
    f: f64,
    load: impl Fn(ChainGrid) -> DeadLoad + Sync,
    k_rule: KRule,
    n_list: &[usize],
    options: StudyOptions,
) -> Result<ConvergenceStudy> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("N list must hold two or more strictly increasing values"));
    }
    let records = n_list
        .par_iter()
        .map(|&n| {
            let grid = ChainGrid::new(n)?;
            convergence_point(p, f, &load(grid), k_rule.k_for(n), options)
        })
        .collect::<Result<Vec<_>>>()?;
    let eps: Vec<f64> = records.iter().map(|r| r.epsilon).collect();
    let err: Vec<f64> = records.iter().map(|r| r.error_h1).collect();
    let neg: Vec<f64> = records.iter().map(|r| r.consistency_negnorm).collect();
    Ok(ConvergenceStudy { error_rates: fit::rates(&eps, &err)?, negnorm_rates: fit::rates(&eps, &neg)?, records })
}

/// Non-negative constants in
/// `‖T‖₋₁ ≈ ε² M_C ‖D³u^a‖_{ℓ²_ε(𝒞)} + ε^{3/2} M_I ‖D²u^a‖_{ℓ^∞_ε(ℐ)}`
/// and the factor by which each study point departs from the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyFit {
    pub m_c: f64,
    pub m_i: f64,
    /// `‖T‖₋₁ / bound` per record: the multiple of `(M_C, M_I)` that point needs.
    pub scale: Vec<f64>,
}

impl ConsistencyFit {
    /// Largest over smallest required multiple.
    pub fn spread(&self) -> f64 {
        let max = self.scale.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.scale.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Fits `(M_C, M_I) ≥ 0` by least squares on the relative residuals
/// `1 - bound_N / ‖T_N‖₋₁`.
pub fn fit_consistency_constants(records: &[ConvergenceRecord]) -> Result<ConsistencyFit> {
    if records.len() < 2 {
        return Err(Error::invalid("need two or more study points"));
    }
    // Rows of the scaled design matrix: bound_N / ‖T_N‖₋₁ = x·M_C + y·M_I ≈ 1.
    let rows: Vec<(f64, f64)> = records
        .iter()
        .map(|r| {
            let e = r.epsilon;
            let t = r.consistency_negnorm;
            (e * e * r.d3_continuum / t, e.powf(1.5) * r.d2_interface_max / t)
        })
        .collect();
    if rows.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Numerical("zero consistency residual in study".into()));
    }
    let (sxx, sxy, syy, sx, sy) = rows.iter().fold((0.0, 0.0, 0.0, 0.0, 0.0), |a, &(x, y)| {
        (a.0 + x * x, a.1 + x * y, a.2 + y * y, a.3 + x, a.4 + y)
    });
    let cost = |c: f64, i: f64| rows.iter().map(|&(x, y)| (1.0 - x * c - y * i).powi(2)).sum::<f64>();
    let mut candidates = vec![(sx / sxx, 0.0), (0.0, sy / syy)];
    let det = sxx * syy - sxy * sxy;
    if det > 0.0 {
        let c = (sx * syy - sy * sxy) / det;
        let i = (sy * sxx - sx * sxy) / det;
        if c >= 0.0 && i >= 0.0 {
            candidates.push((c, i));
        }
    }
    let (m_c, m_i) = candidates
        .into_iter()
        .min_by(|a, b| cost(a.0, a.1).total_cmp(&cost(b.0, b.1)))
        .expect("two single-term candidates");
    let scale = rows.iter().map(|&(x, y)| 1.0 / (x * m_c + y * m_i)).collect();
    Ok(ConsistencyFit { m_c, m_i, scale })
}

/// Dense-matrix check of [`negative_norm`]: `sup ⟨T,w⟩/‖Dw‖ = sqrt(Tᵀ L⁺ T)`.
pub fn negative_norm_dense(t: &PeriodicField) -> Result<f64> {
    check_zero_mean(t, "residual")?;
    let grid = t.grid();
    let n = grid.period();
    let l = SymmetricBandedOperator::strain_metric(grid).to_dense() + DMatrix::from_element(n, n, 1.0 / n as f64);
    let chol = Cholesky::new(l).ok_or_else(|| Error::Numerical("metric factorisation failed".into()))?;
    let b = DVector::from_column_slice(t.values());
    let z = chol.solve(&b);
    Ok(b.dot(&z).max(0.0).sqrt())
}

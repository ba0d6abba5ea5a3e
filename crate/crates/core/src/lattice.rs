//! Periodic chain geometry, fields over one period, difference operators,
//! discrete norms and the Fourier expansion of strains.
//!
//! Sites are labelled `ℓ = -N+1, …, N` and stored at offset `ℓ + N - 1`.
//! Every site label is interpreted modulo `2N`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scaled periodic reference lattice with `2N` atoms per period and spacing `ε = 1/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainGrid {
    n: usize,
}

impl ChainGrid {
    pub const MIN_N: usize = 4;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_N {
            return Err(Error::invalid(format!("N = {n} is below the minimum of {}", Self::MIN_N)));
        }
        Ok(Self { n })
    }

    /// Half the number of atoms per period.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn period(&self) -> usize {
        2 * self.n
    }

    /// Storage offset of site `ℓ` (any integer, reduced modulo `2N`).
    #[inline]
    pub fn index(&self, site: i64) -> usize {
        let p = self.period() as i64;
        (site + self.n as i64 - 1).rem_euclid(p) as usize
    }

    /// Site label in `-N+1..=N` of storage offset `i`.
    #[inline]
    pub fn site(&self, index: usize) -> i64 {
        index as i64 - self.n as i64 + 1
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        let n = self.n as i64;
        (-n + 1)..=n
    }

    /// Whether `site` lies in the canonical label range `-N+1..=N`.
    pub fn contains(&self, site: i64) -> bool {
        let n = self.n as i64;
        site > -n && site <= n
    }
}

/// What a [`PeriodicField`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Element of the zero-mean displacement space; projected on construction.
    Displacement,
    Strain,
    Residual,
    Generic,
}

/// A real 2N-periodic sequence stored over one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    grid: ChainGrid,
    values: Vec<f64>,
    kind: FieldKind,
}

impl PeriodicField {
    /// Wraps `values` (storage order). Displacements are projected to zero mean.
    pub fn new(grid: ChainGrid, values: Vec<f64>, kind: FieldKind) -> Result<Self> {
        if values.len() != grid.period() {
            return Err(Error::invalid(format!(
                "field has {} values, expected 2N = {}",
                values.len(),
                grid.period()
            )));
        }
        let mut field = Self { grid, values, kind };
        if kind == FieldKind::Displacement {
            field.project_zero_mean();
        }
        Ok(field)
    }

    pub fn zeros(grid: ChainGrid, kind: FieldKind) -> Self {
        Self { grid, values: vec![0.0; grid.period()], kind }
    }

    /// Samples `f(ℓ)` at every site of one period.
    pub fn from_fn(grid: ChainGrid, kind: FieldKind, mut f: impl FnMut(i64) -> f64) -> Self {
        let values = (0..grid.period()).map(|i| f(grid.site(i))).collect();
        Self::new(grid, values, kind).expect("length matches by construction")
    }

    #[inline]
    pub fn grid(&self) -> ChainGrid {
        self.grid
    }

    #[inline]
    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// Values in storage order (`ℓ = -N+1` first).
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at site `ℓ`, periodically extended.
    #[inline]
    pub fn at(&self, site: i64) -> f64 {
        self.values[self.grid.index(site)]
    }

    pub fn with_kind(mut self, kind: FieldKind) -> Self {
        self.kind = kind;
        if kind == FieldKind::Displacement {
            self.project_zero_mean();
        }
        self
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn project_zero_mean(&mut self) {
        let mean = self.mean();
        self.values.iter_mut().for_each(|v| *v -= mean);
    }

    /// `a·self + b·other` with the kind of `self`.
    pub fn axpby(&self, a: f64, other: &PeriodicField, b: f64) -> PeriodicField {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        PeriodicField::new(self.grid, values, self.kind).expect("same length")
    }

    pub fn scaled(&self, a: f64) -> PeriodicField {
        let values = self.values.iter().map(|x| a * x).collect();
        PeriodicField { grid: self.grid, values, kind: self.kind }
    }

    /// Unweighted pairing `Σ_ℓ v_ℓ w_ℓ`.
    pub fn dot(&self, other: &PeriodicField) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        self.values.iter().zip(&other.values).map(|(x, y)| x * y).sum()
    }
}

fn backward_difference(grid: ChainGrid, values: &[f64]) -> Vec<f64> {
    let eps_inv = grid.n() as f64;
    let p = values.len();
    (0..p).map(|i| (values[i] - values[(i + p - 1) % p]) * eps_inv).collect()
}

/// Scaled backward difference of the given order:
/// `(D^k u)_ℓ = ((D^{k-1}u)_ℓ - (D^{k-1}u)_{ℓ-1}) / ε`.
pub fn diff(u: &PeriodicField, order: usize) -> Result<PeriodicField> {
    if !(1..=4).contains(&order) {
        return Err(Error::invalid(format!("difference order {order} outside 1..=4")));
    }
    let mut values = u.values.clone();
    for _ in 0..order {
        values = backward_difference(u.grid, &values);
    }
    let kind = match (u.kind, order) {
        (FieldKind::Displacement, 1) => FieldKind::Strain,
        _ => FieldKind::Generic,
    };
    Ok(PeriodicField { grid: u.grid, values, kind })
}

/// `(ε Σ_ℓ v_ℓ²)^{1/2}` over one period.
pub fn norm_l2eps(v: &PeriodicField) -> f64 {
    (v.grid.epsilon() * v.values.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Norm used by [`norm_region`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionNorm {
    /// `(ε Σ_{ℓ∈R} v_ℓ²)^{1/2}`
    L2Eps,
    /// `max_{ℓ∈R} |v_ℓ|`
    Max,
}

/// Norm of `v` restricted to the sites in `region` (labels in `-N+1..=N`).
pub fn norm_region(v: &PeriodicField, region: &[i64], norm: RegionNorm) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::invalid("empty region"));
    }
    if let Some(bad) = region.iter().find(|&&s| !v.grid.contains(s)) {
        return Err(Error::invalid(format!("site {bad} outside -N+1..=N")));
    }
    Ok(match norm {
        RegionNorm::L2Eps => {
            (v.grid.epsilon() * region.iter().map(|&s| v.at(s).powi(2)).sum::<f64>()).sqrt()
        }
        RegionNorm::Max => region.iter().fold(0.0, |m, &s| m.max(v.at(s).abs())),
    })
}

/// Fourier coefficients `c_k`, `k = -N+1..=N`, of a strain sequence in the
/// expansion `Du_ℓ = Σ_k c_k/√2 · exp(i k ℓ π / N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainSpectrum {
    grid: ChainGrid,
    coeffs: Vec<Complex64>,
}

impl StrainSpectrum {
    pub fn grid(&self) -> ChainGrid {
        self.grid
    }

    /// Coefficient of wavenumber `k` (reduced modulo `2N`).
    pub fn coeff(&self, k: i64) -> Complex64 {
        self.coeffs[self.grid.index(k)]
    }

    /// `(k, c_k)` pairs for `k = -N+1..=N`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.grid.sites().map(move |k| (k, self.coeff(k)))
    }

    /// `Σ_k |c_k|²`, equal to `‖Du‖²` by Parseval.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Reassembles the strain sequence from the coefficients.
    pub fn inverse(&self) -> PeriodicField {
        let twiddle = twiddles(self.grid);
        let p = self.grid.period();
        let values = self
            .grid
            .sites()
            .map(|l| {
                let sum: Complex64 = self
                    .iter()
                    .map(|(k, c)| c * twiddle[(k * l).rem_euclid(p as i64) as usize])
                    .sum();
                sum.re / std::f64::consts::SQRT_2
            })
            .collect();
        PeriodicField { grid: self.grid, values, kind: FieldKind::Strain }
    }
}

// exp(i π m / N) for m = 0..2N
fn twiddles(grid: ChainGrid) -> Vec<Complex64> {
    let n = grid.n() as f64;
    (0..grid.period()).map(|m| Complex64::from_polar(1.0, PI * m as f64 / n)).collect()
}

/// Fourier coefficients of the strain `Du` of a displacement field.
///
/// Direct `O(N²)` transform: `c_k = √2/(2N) Σ_ℓ Du_ℓ exp(-i k ℓ π/N)`.
pub fn strain_fourier(u: &PeriodicField) -> StrainSpectrum {
    let du = diff(u, 1).expect("order 1 is valid");
    strain_fourier_of(&du)
}

/// Same transform applied directly to a strain sequence.
pub fn strain_fourier_of(du: &PeriodicField) -> StrainSpectrum {
    let grid = du.grid;
    let p = grid.period() as i64;
    let twiddle = twiddles(grid);
    let scale = std::f64::consts::SQRT_2 / p as f64;
    let coeffs = (0..grid.period())
        .map(|i| {
            let k = grid.site(i);
            let sum: Complex64 = grid
                .sites()
                .map(|l| twiddle[(-k * l).rem_euclid(p) as usize].scale(du.at(l)))
                .sum();
            sum * scale
        })
        .collect();
    StrainSpectrum { grid, coeffs }
}

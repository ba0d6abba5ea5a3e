use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{ChainGrid, FieldKind, PeriodicField};

/// Symmetric periodic banded matrix on one period of a chain.
///
/// Row `i` stores the entries at offsets `0..=b` to the right of the
/// diagonal; entry `(i, d)` stands for both `(i, i+d)` and `(i+d, i)`
/// taken modulo the period. When the period is short enough for offsets
/// to alias, aliased entries add up.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricBandedOperator {
    grid: ChainGrid,
    half_bandwidth: usize,
    bands: Vec<Vec<f64>>,
}

impl SymmetricBandedOperator {
    pub fn zeros(grid: ChainGrid, half_bandwidth: usize) -> Self {
        Self { grid, half_bandwidth, bands: vec![vec![0.0; half_bandwidth + 1]; grid.period()] }
    }

    pub fn grid(&self) -> ChainGrid {
        self.grid
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bandwidth
    }

    /// Stored entry of row `i` (storage offset) at offset `d ≥ 0`.
    pub fn band(&self, i: usize, d: usize) -> f64 {
        self.bands[i][d]
    }

    pub(crate) fn band_mut(&mut self, i: usize, d: usize) -> &mut f64 {
        &mut self.bands[i][d]
    }

    /// Band entry between sites `ℓ` and `ℓ + j`, `|j| ≤ b`, read from the
    /// storage of the lower-numbered end.
    pub fn coefficient(&self, site: i64, offset: i64) -> f64 {
        assert!(offset.unsigned_abs() as usize <= self.half_bandwidth, "offset outside band");
        if offset >= 0 {
            self.bands[self.grid.index(site)][offset as usize]
        } else {
            self.bands[self.grid.index(site + offset)][(-offset) as usize]
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.grid.period();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.bands.iter().enumerate() {
            m[(i, i)] += row[0];
            for (d, &v) in row.iter().enumerate().skip(1) {
                let j = (i + d) % n;
                m[(i, j)] += v;
                m[(j, i)] += v;
            }
        }
        m
    }

    pub fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        let n = self.grid.period();
        assert_eq!(x.len(), n);
        let mut y = vec![0.0; n];
        for (i, row) in self.bands.iter().enumerate() {
            y[i] += row[0] * x[i];
            for (d, &v) in row.iter().enumerate().skip(1) {
                let j = (i + d) % n;
                y[i] += v * x[j];
                y[j] += v * x[i];
            }
        }
        y
    }

    /// `H v` as a residual-kind field.
    pub fn apply(&self, v: &PeriodicField) -> Result<PeriodicField> {
        if v.grid() != self.grid {
            return Err(Error::invalid("field and operator live on different grids"));
        }
        PeriodicField::new(self.grid, self.apply_slice(v.values()), FieldKind::Residual)
    }

    /// `Σ_ij v_i H_ij w_j`.
    pub fn bilinear(&self, v: &PeriodicField, w: &PeriodicField) -> f64 {
        self.apply_slice(w.values()).iter().zip(v.values()).map(|(a, b)| a * b).sum()
    }

    /// Entrywise `self - other` (same grid and bandwidth).
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid);
        assert_eq!(self.half_bandwidth, other.half_bandwidth);
        let bands = self
            .bands
            .iter()
            .zip(&other.bands)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Self { grid: self.grid, half_bandwidth: self.half_bandwidth, bands }
    }

    /// The full dense row `ℓ` summed with its periodic aliases; the sum of
    /// its entries is zero for operators that annihilate constants.
    pub fn row_sum(&self, site: i64) -> f64 {
        let mut e = vec![0.0; self.grid.period()];
        e[self.grid.index(site)] = 1.0;
        self.apply_slice(&e).iter().sum()
    }

    /// `Σ_j |H_ℓj|` over the dense row.
    pub fn row_magnitude(&self, site: i64) -> f64 {
        let mut e = vec![0.0; self.grid.period()];
        e[self.grid.index(site)] = 1.0;
        self.apply_slice(&e).iter().map(|v| v.abs()).sum()
    }

    /// The `‖Du‖²` metric operator: `⟨L u, u⟩ = ε Σ (Du_ℓ)²`.
    pub fn strain_metric(grid: ChainGrid) -> Self {
        let mut op = Self::zeros(grid, 1);
        let inv = grid.n() as f64;
        for row in &mut op.bands {
            row[0] = 2.0 * inv;
            row[1] = -inv;
        }
        op
    }
}

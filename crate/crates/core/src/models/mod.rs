//! Atomistic, quasi-nonlocal and local quasicontinuum energies with their
//! gradients and second variations.
//!
//! All three energies are sums `ε Σ_ℓ E_ℓ` of [`terms::SiteEnergy`] values
//! over one period, assembled in ascending site order. Displacement
//! gradients satisfy `⟨g, w⟩ = Σ_ℓ g_ℓ w_ℓ = δℰ(y)[w]`, and Hessians satisfy
//! `⟨H u, u⟩ = δ²ℰ(y_F)[u, u]` in the same unweighted pairing.

mod banded;
pub mod terms;

pub use banded::SymmetricBandedOperator;

use crate::error::{Error, Result};
use crate::lattice::{ChainGrid, FieldKind, PeriodicField};
use crate::potentials::EamPotential;
use terms::{Density, SiteEnergy};

/// Role of a site in the quasi-nonlocal coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteClass {
    Atomistic,
    QuasiNonlocal,
    Continuum,
}

/// Atomistic core `|ℓ| ≤ K`, transition atoms `±(K+1), ±(K+2)`, continuum elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionDecomposition {
    grid: ChainGrid,
    k: usize,
}

impl RegionDecomposition {
    /// Requires `K < N - 2`.
    pub fn new(grid: ChainGrid, k: usize) -> Result<Self> {
        if k + 2 >= grid.n() {
            return Err(Error::invalid(format!("K = {k} must satisfy K < N - 2 = {}", grid.n() as i64 - 2)));
        }
        Ok(Self { grid, k })
    }

    pub fn grid(&self) -> ChainGrid {
        self.grid
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Class of site `ℓ` (reduced to `-N+1..=N`).
    pub fn classify(&self, site: i64) -> SiteClass {
        let l = canonical(self.grid, site).unsigned_abs() as usize;
        if l <= self.k {
            SiteClass::Atomistic
        } else if l <= self.k + 2 {
            SiteClass::QuasiNonlocal
        } else {
            SiteClass::Continuum
        }
    }

    /// `{-N+1, …, -(K+1)} ∪ {K+1, …, N}`.
    pub fn continuum_set(&self) -> Vec<i64> {
        let (n, k) = (self.grid.n() as i64, self.k as i64);
        ((-n + 1)..=-(k + 1)).chain((k + 1)..=n).collect()
    }

    /// `{-(K+7), …, -K} ∪ {K, …, K+7}`, reduced to canonical labels without repeats.
    pub fn interface_set(&self) -> Vec<i64> {
        let k = self.k as i64;
        let mut sites: Vec<i64> =
            (-(k + 7)..=-k).chain(k..=k + 7).map(|s| canonical(self.grid, s)).collect();
        sites.sort_unstable();
        sites.dedup();
        sites
    }
}

fn canonical(grid: ChainGrid, site: i64) -> i64 {
    grid.site(grid.index(site))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Atomistic,
    Qnl,
    Qcl,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Atomistic => "atomistic",
            ModelKind::Qnl => "qnl",
            ModelKind::Qcl => "qcl",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// An energy on a given grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Atomistic(ChainGrid),
    Qnl(RegionDecomposition),
    /// Cauchy–Born at every site.
    Qcl(ChainGrid),
}

impl Model {
    pub fn grid(&self) -> ChainGrid {
        match self {
            Model::Atomistic(g) | Model::Qcl(g) => *g,
            Model::Qnl(r) => r.grid(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Atomistic(_) => ModelKind::Atomistic,
            Model::Qnl(_) => ModelKind::Qnl,
            Model::Qcl(_) => ModelKind::Qcl,
        }
    }

    /// Site energy of `ℓ` in this model. Transition atoms on the negative
    /// side are the mirror images of those on the positive side.
    pub fn site_energy(&self, site: i64) -> SiteEnergy {
        match self {
            Model::Atomistic(_) => SiteEnergy::atomistic(site),
            Model::Qcl(_) => SiteEnergy::continuum(site),
            Model::Qnl(region) => match region.classify(site) {
                SiteClass::Atomistic => SiteEnergy::atomistic(site),
                SiteClass::Continuum => SiteEnergy::continuum(site),
                SiteClass::QuasiNonlocal => {
                    let l = canonical(region.grid(), site);
                    if l > 0 {
                        SiteEnergy::quasi_nonlocal(l)
                    } else {
                        SiteEnergy::quasi_nonlocal(-l).mirror()
                    }
                }
            },
        }
    }

    /// Site energies for `ℓ = -N+1, …, N`.
    pub fn site_energies(&self) -> Vec<SiteEnergy> {
        self.grid().sites().map(|l| self.site_energy(l)).collect()
    }
}

/// `y_ℓ = F εℓ + u_ℓ`, stored as `F` and the zero-mean displacement `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    f: f64,
    u: PeriodicField,
}

impl Deformation {
    pub fn new(f: f64, u: PeriodicField) -> Result<Self> {
        if !(f > 0.0) {
            return Err(Error::invalid(format!("deformation gradient F = {f} must be positive")));
        }
        Ok(Self { f, u: u.with_kind(FieldKind::Displacement) })
    }

    pub fn uniform(grid: ChainGrid, f: f64) -> Result<Self> {
        Self::new(f, PeriodicField::zeros(grid, FieldKind::Displacement))
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn displacement(&self) -> &PeriodicField {
        &self.u
    }

    pub fn grid(&self) -> ChainGrid {
        self.u.grid()
    }

    /// Bond strains `r_j = F + Du_j` in storage order.
    pub fn strains(&self) -> Vec<f64> {
        let grid = self.grid();
        let inv = grid.n() as f64;
        let u = self.u.values();
        let p = u.len();
        (0..p).map(|i| self.f + (u[i] - u[(i + p - 1) % p]) * inv).collect()
    }
}

fn strain_lookup(grid: ChainGrid, strains: &[f64]) -> impl Fn(i64) -> f64 + '_ {
    move |j| strains[grid.index(j)]
}

/// Which terms of the site energies to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    All,
    Embedding,
    Pair,
}

fn restrict(site: SiteEnergy, part: Part) -> SiteEnergy {
    match part {
        Part::All => site,
        Part::Embedding => site.embedding_only(),
        Part::Pair => site.pair_only(),
    }
}

fn check_grid(model: &Model, y: &Deformation) -> Result<()> {
    if model.grid() != y.grid() {
        return Err(Error::invalid("deformation and model live on different grids"));
    }
    Ok(())
}

/// Flavour of electron density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    /// `ρ(r_ℓ) + ρ(r_ℓ + r_{ℓ-1}) + ρ(r_{ℓ+1}) + ρ(r_{ℓ+1} + r_{ℓ+2})`
    Atomistic,
    /// `2ρ(r_ℓ) + 2ρ(2r_ℓ)`
    Continuum,
    /// `2ρ(r_ℓ) + 2ρ(r_ℓ + r_{ℓ-1})`
    Qnl,
}

pub fn electron_density(kind: DensityKind, p: &EamPotential, y: &Deformation, site: i64) -> f64 {
    let strains = y.strains();
    let r = strain_lookup(y.grid(), &strains);
    let density: Density = match kind {
        DensityKind::Atomistic => terms::atomistic_density(site),
        DensityKind::Continuum => terms::continuum_density(site),
        DensityKind::Qnl => terms::qnl_density(site),
    };
    terms::density_value(p, &density, &r)
}

/// Interaction energy per period (no external potential).
pub fn energy(model: &Model, p: &EamPotential, y: &Deformation) -> Result<f64> {
    energy_part(model, Part::All, p, y)
}

pub fn energy_part(model: &Model, part: Part, p: &EamPotential, y: &Deformation) -> Result<f64> {
    check_grid(model, y)?;
    let strains = y.strains();
    let r = strain_lookup(y.grid(), &strains);
    let total: f64 = model.grid().sites().map(|l| restrict(model.site_energy(l), part).value(p, &r)).sum();
    Ok(model.grid().epsilon() * total)
}

/// `σ_j = ∂ℰ/∂r_j` in storage order.
pub fn strain_gradient(model: &Model, part: Part, p: &EamPotential, y: &Deformation) -> Result<Vec<f64>> {
    check_grid(model, y)?;
    let grid = model.grid();
    let strains = y.strains();
    let r = strain_lookup(grid, &strains);
    let mut sigma = vec![0.0; grid.period()];
    for l in grid.sites() {
        restrict(model.site_energy(l), part).gradient(p, &r, |j, v| sigma[grid.index(j)] += v);
    }
    let eps = grid.epsilon();
    sigma.iter_mut().for_each(|s| *s *= eps);
    Ok(sigma)
}

/// Force residual `g_ℓ = ∂ℰ/∂u_ℓ = (σ_ℓ - σ_{ℓ+1})/ε`.
pub fn gradient(model: &Model, p: &EamPotential, y: &Deformation) -> Result<PeriodicField> {
    gradient_part(model, Part::All, p, y)
}

pub fn gradient_part(model: &Model, part: Part, p: &EamPotential, y: &Deformation) -> Result<PeriodicField> {
    let sigma = strain_gradient(model, part, p, y)?;
    let grid = model.grid();
    let inv = grid.n() as f64;
    let n = sigma.len();
    let g = (0..n).map(|i| (sigma[i] - sigma[(i + 1) % n]) * inv).collect();
    PeriodicField::new(grid, g, FieldKind::Residual)
}

/// Largest magnitude among the individual site contributions to the forces
/// at `y`; the natural scale for judging a force residual.
pub fn force_scale(model: &Model, p: &EamPotential, y: &Deformation) -> Result<f64> {
    check_grid(model, y)?;
    let grid = model.grid();
    let strains = y.strains();
    let r = strain_lookup(grid, &strains);
    let mut scale = 0.0f64;
    for l in grid.sites() {
        model.site_energy(l).gradient(p, &r, |_, v| scale = scale.max(v.abs()));
    }
    Ok(scale)
}

/// Second derivatives `S_ij = ∂²ℰ/∂r_i∂r_j` as a bandwidth-3 operator over bonds.
pub fn strain_hessian(model: &Model, part: Part, p: &EamPotential, y: &Deformation) -> Result<SymmetricBandedOperator> {
    check_grid(model, y)?;
    let grid = model.grid();
    let strains = y.strains();
    let r = strain_lookup(grid, &strains);
    let mut s = SymmetricBandedOperator::zeros(grid, 3);
    for l in grid.sites() {
        restrict(model.site_energy(l), part).hessian(p, &r, |i, j, v| {
            if i <= j {
                *s.band_mut(grid.index(i), (j - i) as usize) += v;
            }
        });
    }
    let eps = grid.epsilon();
    for i in 0..grid.period() {
        for d in 0..=3 {
            *s.band_mut(i, d) *= eps;
        }
    }
    Ok(s)
}

/// Displacement Hessian from the strain Hessian:
/// `H_{ℓ,ℓ+d} = [S_{ℓ,ℓ+d} - S_{ℓ,ℓ+d+1} - S_{ℓ+1,ℓ+d} + S_{ℓ+1,ℓ+d+1}] / ε²`.
pub fn displacement_hessian(s: &SymmetricBandedOperator) -> SymmetricBandedOperator {
    let grid = s.grid();
    let b = s.half_bandwidth() as i64;
    let entry = |i: i64, j: i64| if (j - i).abs() <= b { s.coefficient(i, j - i) } else { 0.0 };
    let inv2 = (grid.n() as f64).powi(2);
    let mut h = SymmetricBandedOperator::zeros(grid, s.half_bandwidth() + 1);
    for l in grid.sites() {
        for d in 0..=b + 1 {
            let v = entry(l, l + d) - entry(l, l + d + 1) - entry(l + 1, l + d) + entry(l + 1, l + d + 1);
            *h.band_mut(grid.index(l), d as usize) = v * inv2;
        }
    }
    h
}

/// Second variation `δ²ℰ(y_F)` at the uniform state, bandwidth 4.
pub fn hessian(model: &Model, p: &EamPotential, f: f64) -> Result<SymmetricBandedOperator> {
    hessian_part(model, Part::All, p, f)
}

pub fn hessian_part(model: &Model, part: Part, p: &EamPotential, f: f64) -> Result<SymmetricBandedOperator> {
    let y = Deformation::uniform(model.grid(), f)?;
    Ok(displacement_hessian(&strain_hessian(model, part, p, &y)?))
}

//! Seeded self-checks: finite-difference consistency of potentials, energies
//! and Hessians, the difference-operator identities and ghost-force freeness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::lattice::{diff, ChainGrid, FieldKind, PeriodicField};
use crate::models::{self, Deformation, Model, RegionDecomposition};
use crate::potentials::{self, EamPotential};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    /// Worst observed deviation.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

pub const FD_STEP: f64 = 1e-5;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const HESSIAN_TOLERANCE: f64 = 1e-5;
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
pub const GHOST_FORCE_TOLERANCE: f64 = 1e-12;

pub fn random_displacement(grid: ChainGrid, amplitude: f64, rng: &mut impl Rng) -> PeriodicField {
    PeriodicField::from_fn(grid, FieldKind::Displacement, |_| amplitude * rng.gen_range(-1.0..1.0))
}

/// Random deformation with `F ∈ [0.95, 1.15]` and strains within `±0.1` of `F`.
pub fn random_deformation(grid: ChainGrid, rng: &mut impl Rng) -> Deformation {
    let f = rng.gen_range(0.95..1.15);
    let u = random_displacement(grid, 0.05 * grid.epsilon(), rng);
    Deformation::new(f, u).expect("F is positive")
}

fn models_on(grid: ChainGrid) -> Vec<Model> {
    let k = (grid.n() / 4).max(1).min(grid.n() - 3);
    vec![
        Model::Atomistic(grid),
        Model::Qnl(RegionDecomposition::new(grid, k).expect("K < N - 2")),
        Model::Qcl(grid),
    ]
}

/// Worst mismatch between `⟨g, w⟩` and the central difference of the
/// energy along `w`, relative to `Σ|g_ℓ w_ℓ|`, over `count` random states
/// per model and size.
pub fn gradient_fd_check(p: &EamPotential, sizes: &[usize], count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &n in sizes {
        let grid = crate::ChainGrid::new(n)?;
        for model in models_on(grid) {
            for _ in 0..count {
                let y = random_deformation(grid, &mut rng);
                let w = random_displacement(grid, grid.epsilon(), &mut rng);
                let shifted = |s: f64| Deformation::new(y.f(), y.displacement().axpby(1.0, &w, s)).expect("F > 0");
                let fd = (models::energy(&model, p, &shifted(FD_STEP))?
                    - models::energy(&model, p, &shifted(-FD_STEP))?)
                    / (2.0 * FD_STEP);
                let g = models::gradient(&model, p, &y)?;
                let exact = g.dot(&w);
                // Σ|g_ℓ w_ℓ| rather than |⟨g, w⟩|: random directions can make the sum cancel.
                let scale: f64 = g.values().iter().zip(w.values()).map(|(a, b)| (a * b).abs()).sum();
                worst = worst.max((fd - exact).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// Worst relative mismatch `‖(g(y_F + hw) - g(y_F - hw))/2h - Hw‖ / ‖Hw‖`.
pub fn hessian_fd_check(p: &EamPotential, sizes: &[usize], count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &n in sizes {
        let grid = crate::ChainGrid::new(n)?;
        for model in models_on(grid) {
            for _ in 0..count {
                let f = rng.gen_range(0.95..1.15);
                let w = random_displacement(grid, grid.epsilon(), &mut rng);
                let h = models::hessian(&model, p, f)?;
                let hw = h.apply(&w)?;
                let plus = models::gradient(&model, p, &Deformation::new(f, w.scaled(FD_STEP))?)?;
                let minus = models::gradient(&model, p, &Deformation::new(f, w.scaled(-FD_STEP))?)?;
                let mut num = 0.0;
                let mut den = 0.0;
                for ((a, b), c) in plus.values().iter().zip(minus.values()).zip(hw.values()) {
                    num += ((a - b) / (2.0 * FD_STEP) - c).powi(2);
                    den += c * c;
                }
                worst = worst.max((num / den).sqrt());
            }
        }
    }
    Ok(worst)
}

/// Worst relative deviation in the four difference-operator identities
/// over `count` random zero-mean fields per size, checked both site by site
/// and after summation over the period.
pub fn identity_check(sizes: &[usize], count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &n in sizes {
        let grid = ChainGrid::new(n)?;
        let eps = grid.epsilon();
        for _ in 0..count {
            let u = random_displacement(grid, 1.0, &mut rng);
            let d: Vec<PeriodicField> = (1..=4).map(|k| diff(&u, k)).collect::<Result<_>>()?;
            let d1 = |l: i64| d[0].at(l);
            let d2 = |l: i64| eps * d[1].at(l);
            let d3 = |l: i64| eps * eps * d[2].at(l);
            let d4 = |l: i64| eps.powi(3) * d[3].at(l);
            // (lhs, rhs, magnitude) per identity and site
            let mut sums = [(0.0, 0.0, 0.0); 4];
            for l in grid.sites() {
                let sq = |x: f64| x * x;
                let rows = [
                    (sq(d1(l) + d1(l + 1)), vec![2.0 * sq(d1(l)), 2.0 * sq(d1(l + 1)), -sq(d2(l + 1))]),
                    (
                        sq(d1(l) + d1(l + 1) + d1(l + 2)),
                        vec![
                            3.0 * sq(d1(l)),
                            3.0 * sq(d1(l + 1)),
                            3.0 * sq(d1(l + 2)),
                            -3.0 * sq(d2(l + 1)),
                            -3.0 * sq(d2(l + 2)),
                            sq(d3(l + 2)),
                        ],
                    ),
                    (
                        2.0 * (d1(l) + d1(l + 1)) * (d1(l - 1) + d1(l) + d1(l + 1) + d1(l + 2)),
                        vec![
                            2.0 * (sq(d1(l - 1)) + 3.0 * sq(d1(l)) + 3.0 * sq(d1(l + 1)) + sq(d1(l + 2))),
                            -3.0 * (sq(d2(l)) + 2.0 * sq(d2(l + 1)) + sq(d2(l + 2))),
                            sq(d3(l + 1)) + sq(d3(l + 2)),
                        ],
                    ),
                    (
                        sq(d1(l) + d1(l + 1) + d1(l + 2) + d1(l + 3)),
                        vec![
                            4.0 * (sq(d1(l)) + sq(d1(l + 1)) + sq(d1(l + 2)) + sq(d1(l + 3))),
                            -(6.0 * sq(d2(l + 1)) + 8.0 * sq(d2(l + 2)) + 6.0 * sq(d2(l + 3))),
                            4.0 * sq(d3(l + 2)) + 4.0 * sq(d3(l + 3)),
                            -sq(d4(l + 3)),
                        ],
                    ),
                ];
                for (i, (lhs, terms)) in rows.iter().enumerate() {
                    let rhs: f64 = terms.iter().sum();
                    let mag = lhs.abs() + terms.iter().map(|t| t.abs()).sum::<f64>();
                    worst = worst.max((lhs - rhs).abs() / mag);
                    sums[i].0 += lhs;
                    sums[i].1 += rhs;
                    sums[i].2 += mag;
                }
            }
            for (lhs, rhs, mag) in sums {
                worst = worst.max((lhs - rhs).abs() / mag);
            }
        }
    }
    Ok(worst)
}

/// `max_ℓ |g_ℓ|` of the QNL forces at `y_F`, relative to the largest single
/// site contribution.
pub fn ghost_force(p: &EamPotential, f: f64, n: usize, k: usize) -> Result<f64> {
    let grid = ChainGrid::new(n)?;
    let model = Model::Qnl(RegionDecomposition::new(grid, k)?);
    let y = Deformation::uniform(grid, f)?;
    let g = models::gradient(&model, p, &y)?;
    Ok(g.max_abs() / models::force_scale(&model, p, &y)?)
}

/// The full suite run by the command-line `validate` command.
pub fn run_suite(p: &EamPotential, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let d = potentials::validate_derivatives(p, &potentials::standard_probe());
    for (name, (d1, d2)) in ["pair", "density", "embedding"].iter().zip(d.deviations) {
        out.push(CheckOutcome::new(format!("derivatives {name} d1"), d1, potentials::DERIVATIVE_TOLERANCE));
        out.push(CheckOutcome::new(format!("derivatives {name} d2"), d2, potentials::DERIVATIVE_TOLERANCE));
    }
    out.push(CheckOutcome::new("identities N=8,16", identity_check(&[8, 16], 200, seed)?, IDENTITY_TOLERANCE));
    for f in [0.95, 1.0, 1.1, 1.2] {
        out.push(CheckOutcome::new(format!("ghost force F={f} N=64 K=10"), ghost_force(p, f, 64, 10)?, GHOST_FORCE_TOLERANCE));
    }
    out.push(CheckOutcome::new(
        "gradient vs energy N=8,16",
        gradient_fd_check(p, &[8, 16], 50, seed.wrapping_add(1))?,
        GRADIENT_TOLERANCE,
    ));
    out.push(CheckOutcome::new(
        "hessian vs gradient N=8,16",
        hessian_fd_check(p, &[8, 16], 50, seed.wrapping_add(2))?,
        HESSIAN_TOLERANCE,
    ));
    Ok(out)
}

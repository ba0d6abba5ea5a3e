use std::sync::Arc;

use eamqc::lattice::{diff, norm_l2eps, ChainGrid, FieldKind, PeriodicField};
use eamqc::models::{self, Deformation, DensityKind, Model, Part, RegionDecomposition};
use eamqc::potentials::{self, EamPotential, Family, ScalarFunction};
use eamqc::stability;
use eamqc::validation;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn all_models(grid: ChainGrid, k: usize) -> [Model; 3] {
    [Model::Atomistic(grid), Model::Qnl(RegionDecomposition::new(grid, k).unwrap()), Model::Qcl(grid)]
}

#[test]
fn uniform_state_energies_coincide() {
    let p = potentials::default_potential();
    let g = ChainGrid::new(32).unwrap();
    for f in [0.95, 1.0, 1.1] {
        let y = Deformation::uniform(g, f).unwrap();
        let e: Vec<f64> = all_models(g, 6).iter().map(|m| models::energy(m, &p, &y).unwrap()).collect();
        for v in &e {
            assert!((v - e[0]).abs() <= 1e-13 * e[0].abs(), "{e:?}");
        }
    }
}

#[test]
fn uniform_state_densities_coincide() {
    let p = potentials::default_potential();
    let g = ChainGrid::new(8).unwrap();
    let y = Deformation::uniform(g, 1.07).unwrap();
    let expect = p.uniform_density(1.07);
    for kind in [DensityKind::Atomistic, DensityKind::Continuum, DensityKind::Qnl] {
        for l in g.sites() {
            let v = models::electron_density(kind, &p, &y, l);
            assert!((v - expect).abs() < 1e-14 * expect, "{kind:?} at {l}");
        }
    }
    let no_density = EamPotential::from_families("x", Family::Zero, Family::Zero, Family::Zero);
    for kind in [DensityKind::Atomistic, DensityKind::Continuum, DensityKind::Qnl] {
        assert_eq!(models::electron_density(kind, &no_density, &y, 3), 0.0);
    }
}

#[test]
fn atomistic_density_matches_direct_summation() {
    let p = potentials::default_potential();
    let g = ChainGrid::new(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let y = validation::random_deformation(g, &mut rng);
    let u = y.displacement();
    let pos = |l: i64| y.f() * g.epsilon() * l as f64 + u.at(l);
    let rho = |d: f64| p.density.value(d / g.epsilon());
    for l in g.sites() {
        let direct = rho(pos(l) - pos(l - 1)) + rho(pos(l) - pos(l - 2)) + rho(pos(l + 1) - pos(l)) + rho(pos(l + 2) - pos(l));
        let v = models::electron_density(DensityKind::Atomistic, &p, &y, l);
        assert!((v - direct).abs() <= 1e-14 * direct.abs().max(1.0) * 4.0, "{v} {direct}");
    }
}

/// Pair-only QNL energy written out site by site, independent of the term engine.
fn pair_qnl_energy_oracle(phi: &dyn ScalarFunction, y: &Deformation, k: i64) -> f64 {
    let g = y.grid();
    let strains = y.strains();
    let r = |j: i64| strains[g.index(j)];
    let ph = |x: f64| phi.value(x);
    let mut total = 0.0;
    for l in g.sites() {
        let e = if l.abs() <= k {
            ph(r(l)) + ph(r(l) + r(l - 1)) + ph(r(l + 1)) + ph(r(l + 1) + r(l + 2))
        } else if l == k + 1 || l == k + 2 {
            ph(r(l)) + ph(r(l + 1)) + ph(r(l) + r(l - 1)) + ph(2.0 * r(l + 1))
        } else if l == -(k + 1) || l == -(k + 2) {
            ph(r(l + 1)) + ph(r(l)) + ph(r(l + 1) + r(l + 2)) + ph(2.0 * r(l))
        } else {
            ph(r(l)) + ph(2.0 * r(l)) + ph(r(l + 1)) + ph(2.0 * r(l + 1))
        };
        total += 0.5 * e;
    }
    g.epsilon() * total
}

#[test]
fn pair_qnl_energy_matches_split_assembly() {
    let p = potentials::pair_only_potential();
    let g = ChainGrid::new(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in [0usize, 3, 8] {
        let m = Model::Qnl(RegionDecomposition::new(g, k).unwrap());
        for _ in 0..10 {
            let y = validation::random_deformation(g, &mut rng);
            let e = models::energy(&m, &p, &y).unwrap();
            let o = pair_qnl_energy_oracle(p.pair.as_ref(), &y, k as i64);
            assert!((e - o).abs() <= 1e-13 * o.abs(), "K = {k}: {e} vs {o}");
        }
    }
}

#[test]
fn forces_vanish_at_uniform_strain() {
    let p = potentials::default_potential();
    for n in [8, 16, 64] {
        let g = ChainGrid::new(n).unwrap();
        for f in [0.95, 1.0, 1.2] {
            let y = Deformation::uniform(g, f).unwrap();
            for m in all_models(g, n / 2 - 3) {
                let gr = models::gradient(&m, &p, &y).unwrap();
                let scale = models::force_scale(&m, &p, &y).unwrap();
                assert!(gr.max_abs() <= 1e-12 * scale, "{:?} N = {n} F = {f}: {}", m.kind(), gr.max_abs());
            }
        }
    }
}

#[test]
fn gradients_match_energy_differences() {
    for p in [potentials::default_potential(), potentials::embedding_dominated_potential()] {
        let worst = validation::gradient_fd_check(&p, &[8, 16], 50, 21).unwrap();
        assert!(worst <= 1e-6, "{}: {worst:e}", p.name);
    }
}

#[test]
fn hessians_match_gradient_differences() {
    for p in [potentials::default_potential(), potentials::embedding_dominated_potential()] {
        let worst = validation::hessian_fd_check(&p, &[8, 16], 50, 22).unwrap();
        assert!(worst <= 1e-5, "{}: {worst:e}", p.name);
    }
}

#[test]
fn gradient_is_zero_mean() {
    let p = potentials::default_potential();
    let g = ChainGrid::new(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y = validation::random_deformation(g, &mut rng);
    for m in all_models(g, 5) {
        let gr = models::gradient(&m, &p, &y).unwrap();
        let sum: f64 = gr.values().iter().sum();
        assert!(sum.abs() < 1e-12 * gr.max_abs() * 32.0);
    }
}

#[test]
fn linear_embedding_reproduces_pair_terms() {
    // G(s) = s/2 and ρ = φ̃ turn every embedding term into the pair term with φ̃.
    let tilde = Family::Morse { alpha: 3.0 };
    let embed = EamPotential::from_families("embed", Family::Zero, tilde, Family::Quadratic { c0: 0.0, c1: -0.5 });
    let pair = EamPotential::from_families("pair", tilde, Family::Zero, Family::Zero);
    let g = ChainGrid::new(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in all_models(g, 4) {
        for _ in 0..5 {
            let y = validation::random_deformation(g, &mut rng);
            let ge = models::gradient_part(&m, Part::Embedding, &embed, &y).unwrap();
            let gp = models::gradient_part(&m, Part::Pair, &pair, &y).unwrap();
            let scale = gp.max_abs();
            for (a, b) in ge.values().iter().zip(gp.values()) {
                assert!((a - b).abs() <= 1e-12 * scale, "{:?}", m.kind());
            }
            let ee = models::energy_part(&m, Part::Embedding, &embed, &y).unwrap();
            let ep = models::energy_part(&m, Part::Pair, &pair, &y).unwrap();
            assert!((ee - ep).abs() <= 1e-13 * ep.abs());
        }
    }
}

#[test]
fn pair_hessian_quadratic_form() {
    let p = potentials::pair_only_potential();
    let g = ChainGrid::new(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let f = 1.02;
    let h = models::hessian(&Model::Atomistic(g), &p, f).unwrap();
    let c = stability::coefficients(&p, f).unwrap();
    let eps = g.epsilon();
    for _ in 0..20 {
        let u = validation::random_displacement(g, eps, &mut rng);
        let d1 = norm_l2eps(&diff(&u, 1).unwrap()).powi(2);
        let d2 = norm_l2eps(&diff(&u, 2).unwrap()).powi(2);
        let expect = c.a_tilde * d1 - eps * eps * p.pair.d2(2.0 * f) * d2;
        let q = h.bilinear(&u, &u);
        assert!((q - expect).abs() <= 1e-11 * expect.abs(), "{q} vs {expect}");
    }
}

#[test]
fn hessian_structure() {
    let p = potentials::default_potential();
    let g = ChainGrid::new(32).unwrap();
    let k = 8usize;
    let one = PeriodicField::from_fn(g, FieldKind::Generic, |_| 1.0);
    let h_a = models::hessian(&Model::Atomistic(g), &p, 1.05).unwrap();
    let h_c = models::hessian(&Model::Qcl(g), &p, 1.05).unwrap();
    for m in all_models(g, k) {
        let h = models::hessian(&m, &p, 1.05).unwrap();
        assert_eq!(h.half_bandwidth(), 4);
        let dense = h.to_dense();
        assert_eq!(dense.clone(), dense.transpose());
        let hc = h.apply(&one).unwrap();
        for l in g.sites() {
            assert!(hc.at(l).abs() <= 1e-12 * h.row_magnitude(l), "{:?} row {l}", m.kind());
        }
        if let Model::Qnl(_) = m {
            let ki = k as i64;
            for l in g.sites() {
                for j in -4..=4 {
                    if l.abs() <= ki - 3 {
                        assert_eq!(h.coefficient(l, j), h_a.coefficient(l, j), "atomistic row {l}");
                    }
                    if l.abs() >= ki + 6 {
                        assert_eq!(h.coefficient(l, j), h_c.coefficient(l, j), "continuum row {l}");
                    }
                }
            }
        }
    }
    // circulant rows
    for j in -4..=4 {
        let first = h_a.coefficient(0, j);
        for l in g.sites() {
            assert!((h_a.coefficient(l, j) - first).abs() <= 1e-12 * first.abs().max(1.0));
        }
    }
}

#[test]
fn qnl_gradient_is_local_in_the_atomistic_core() {
    let p = potentials::default_potential();
    let g = ChainGrid::new(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let k = 9i64;
    let qnl = Model::Qnl(RegionDecomposition::new(g, k as usize).unwrap());
    for _ in 0..10 {
        let y = validation::random_deformation(g, &mut rng);
        let ga = models::gradient(&Model::Atomistic(g), &p, &y).unwrap();
        let gq = models::gradient(&qnl, &p, &y).unwrap();
        for l in -(k - 3)..=(k - 3) {
            assert_eq!(ga.at(l), gq.at(l), "site {l}");
        }
    }
}

fn reflect(u: &PeriodicField) -> PeriodicField {
    PeriodicField::from_fn(u.grid(), u.kind(), |l| -u.at(-l))
}

#[test]
fn reflection_maps_gradient_to_its_reflection() {
    let p = potentials::default_potential();
    let g = ChainGrid::new(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for m in all_models(g, 5) {
        for _ in 0..5 {
            let y = validation::random_deformation(g, &mut rng);
            let yr = Deformation::new(y.f(), reflect(y.displacement())).unwrap();
            let e = models::energy(&m, &p, &y).unwrap();
            let er = models::energy(&m, &p, &yr).unwrap();
            assert!((e - er).abs() <= 1e-13 * e.abs());
            let gr = models::gradient(&m, &p, &y).unwrap();
            let grr = models::gradient(&m, &p, &yr).unwrap();
            let scale = gr.max_abs();
            for l in g.sites() {
                assert!((grr.at(l) + gr.at(-l)).abs() <= 1e-12 * scale, "{:?} site {l}", m.kind());
            }
        }
    }
}

#[test]
fn custom_closure_potential_is_usable() {
    let phi = Arc::new(potentials::FnTriple::new(|r| (r - 1.0).powi(2), |r| 2.0 * (r - 1.0), |_| 2.0));
    let p = EamPotential::new("harmonic", phi, Arc::new(Family::Zero), Arc::new(Family::Zero));
    let g = ChainGrid::new(8).unwrap();
    let y = Deformation::uniform(g, 1.0).unwrap();
    // nearest bonds at rest, next-nearest stretched to 2
    let e = models::energy(&Model::Atomistic(g), &p, &y).unwrap();
    assert!((e - 2.0).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_ignores_rigid_translation(values in prop::collection::vec(-0.005f64..0.005, 16), shift in -3.0f64..3.0, f in 0.95f64..1.15) {
        let p = potentials::default_potential();
        let g = ChainGrid::new(8).unwrap();
        let u = PeriodicField::new(g, values.clone(), FieldKind::Generic).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let y = Deformation::new(f, u).unwrap();
        let ys = Deformation::new(f, PeriodicField::new(g, shifted, FieldKind::Generic).unwrap()).unwrap();
        for m in all_models(g, 2) {
            let a = models::energy(&m, &p, &y).unwrap();
            let b = models::energy(&m, &p, &ys).unwrap();
            prop_assert!((a - b).abs() <= 1e-13 * a.abs());
        }
    }

    #[test]
    fn hessian_is_symmetric_bilinear(seed in any::<u64>(), f in 0.95f64..1.15) {
        let p = potentials::default_potential();
        let g = ChainGrid::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = validation::random_displacement(g, 1.0, &mut rng);
        let w = validation::random_displacement(g, 1.0, &mut rng);
        let k = rng.gen_range(0..13usize);
        for m in all_models(g, k) {
            let h = models::hessian(&m, &p, f).unwrap();
            let a = h.bilinear(&u, &w);
            let b = h.bilinear(&w, &u);
            prop_assert!((a - b).abs() <= 1e-11 * (h.bilinear(&u, &u).abs() + h.bilinear(&w, &w).abs()));
        }
    }
}

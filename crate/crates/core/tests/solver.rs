use std::f64::consts::PI;

use eamqc::lattice::{self, diff, norm_l2eps, ChainGrid, FieldKind, PeriodicField};
use eamqc::models::{self, Model, RegionDecomposition, SymmetricBandedOperator};
use eamqc::potentials;
use eamqc::solver::{self, ConvergenceRecord, DeadLoad, KRule, StudyOptions};
use eamqc::stability;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const F: f64 = 1.05;

fn qnl(n: usize, k: usize) -> (ChainGrid, RegionDecomposition) {
    let g = ChainGrid::new(n).unwrap();
    (g, RegionDecomposition::new(g, k).unwrap())
}

fn load_from(g: ChainGrid, f: impl Fn(f64) -> f64) -> DeadLoad {
    let eps = g.epsilon();
    DeadLoad::new(PeriodicField::from_fn(g, FieldKind::Generic, |l| f(eps * l as f64)), "test").unwrap()
}

#[test]
fn cosine_load_excites_only_the_second_mode() {
    let p = potentials::default_potential();
    let g = ChainGrid::new(32).unwrap();
    let m = Model::Atomistic(g);
    let load = DeadLoad::cosine(g);
    let u = solver::solve_linearized(&m, &p, F, &load).unwrap();

    // Dense oracle: (H + 11ᵀ) u = ε f by LU.
    let n = g.period();
    let h = models::hessian(&m, &p, F).unwrap().to_dense() + DMatrix::from_element(n, n, 1.0);
    let b = DVector::from_column_slice(load.force().values()) * g.epsilon();
    let dense = h.lu().solve(&b).unwrap();
    for (a, d) in u.values().iter().zip(dense.iter()) {
        assert!((a - d).abs() < 1e-12 * dense.amax());
    }

    let spec = lattice::strain_fourier(&u);
    let peak = spec.coeff(2).norm();
    for (k, c) in spec.iter() {
        if k.abs() != 2 {
            assert!(c.norm() < 1e-12 * peak, "k={k}");
        }
    }
    // ⟨Hu, u⟩ = λ(s_2)‖Du‖² = ε⟨f, u⟩
    let lam = stability::lambda_cubic(&stability::coefficients(&p, F).unwrap(), stability::s_k(g, 2));
    let du2 = norm_l2eps(&diff(&u, 1).unwrap()).powi(2);
    let work = g.epsilon() * load.force().dot(&u);
    assert!((lam * du2 - work).abs() < 1e-12 * work);
}

#[test]
fn mirror_symmetric_loads_give_mirror_symmetric_solutions() {
    let p = potentials::default_potential();
    let (g, region) = qnl(48, 7);
    let m = Model::Qnl(region);
    let even = load_from(g, |x| (2.0 * PI * x).cos() + 0.3 * (6.0 * PI * x).cos());
    let odd = load_from(g, |x| (PI * x).sin() - 0.5 * (4.0 * PI * x).sin());
    let ue = solver::solve_linearized(&m, &p, F, &even).unwrap();
    let uo = solver::solve_linearized(&m, &p, F, &odd).unwrap();
    let scale = ue.max_abs().max(uo.max_abs());
    for l in g.sites() {
        assert!((ue.at(-l) - ue.at(l)).abs() < 1e-12 * scale, "even at {l}");
        assert!((uo.at(-l) + uo.at(l)).abs() < 1e-12 * scale, "odd at {l}");
    }
}

#[test]
fn residual_vanishes_for_displacements_inside_the_core() {
    let p = potentials::default_potential();
    let (g, region) = qnl(32, 10);
    let reach = 10 - 4;
    // odd bump: zero mean, supported in |ℓ| ≤ K - 4
    let u = PeriodicField::from_fn(g, FieldKind::Displacement, |l| {
        if l.abs() <= reach { (PI * l as f64 / (reach as f64 + 1.0)).sin() } else { 0.0 }
    });
    let t = solver::consistency_residual(&region, &p, F, &u).unwrap();
    // operators coincide there up to assembly roundoff
    let scale = models::hessian(&Model::Atomistic(g), &p, F).unwrap().apply(&u).unwrap().max_abs();
    assert!(t.max_abs() <= 1e-14 * scale, "{:e}", t.max_abs());
    let zero = PeriodicField::zeros(g, FieldKind::Displacement);
    assert_eq!(solver::consistency_residual(&region, &p, F, &zero).unwrap().max_abs(), 0.0);
    assert_eq!(solver::negative_norm(&PeriodicField::zeros(g, FieldKind::Generic)).unwrap(), 0.0);
}

#[test]
fn residual_rows_scale_by_region() {
    // Smooth odd field: u'' vanishes at the centre, so interface rows carry an extra ε.
    let p = potentials::default_potential();
    let k = 8;
    let mut cont = Vec::new();
    let mut intf = Vec::new();
    for n in [64usize, 128, 256] {
        let (g, region) = qnl(n, k);
        let eps = g.epsilon();
        let u = PeriodicField::from_fn(g, FieldKind::Displacement, |l| (PI * eps * l as f64).sin());
        let t = solver::consistency_residual(&region, &p, F, &u).unwrap();
        // rows in the ε-weighted pairing
        let row = |l: i64| t.at(l).abs() / eps;
        let big = g.sites().map(row).fold(0.0, f64::max);
        let interface: Vec<i64> = g.sites().filter(|l| row(*l) > 1e-2 * big).collect();
        assert!(interface.len() <= 16, "N={n}: {interface:?}");
        assert!(interface.iter().all(|l| (l.unsigned_abs() as usize) >= k - 3 && (l.unsigned_abs() as usize) <= k + 8));
        intf.push(big);
        cont.push(g.sites().filter(|l| l.unsigned_abs() as usize > k + 8).map(row).fold(0.0, f64::max));
    }
    for w in intf.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((rate - 1.0).abs() < 0.3, "interface rate {rate}");
    }
    for w in cont.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((rate - 2.0).abs() < 0.2, "continuum rate {rate}");
    }
}

#[test]
fn negative_norm_matches_spectral_oracle() {
    let g = ChainGrid::new(8).unwrap();
    let n = g.period();
    let l = SymmetricBandedOperator::strain_metric(g).to_dense();
    let eig = SymmetricEigen::new(l);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let mut t = PeriodicField::from_fn(g, FieldKind::Generic, |_| rng.gen_range(-1.0..1.0));
        t.project_zero_mean();
        let tv = DVector::from_column_slice(t.values());
        // sup over w ⊥ 1 of ⟨T,w⟩²/⟨Lw,w⟩ = Σ (vᵢ·T)²/μᵢ over the nonzero modes
        let sum: f64 = (0..n)
            .filter(|&i| eig.eigenvalues[i] > 1e-9)
            .map(|i| eig.eigenvectors.column(i).dot(&tv).powi(2) / eig.eigenvalues[i])
            .sum();
        let got = solver::negative_norm(&t).unwrap();
        assert!((got - sum.sqrt()).abs() < 1e-10 * got);
        assert!((solver::negative_norm_dense(&t).unwrap() - got).abs() < 1e-10 * got);
        // any particular w gives a lower bound
        for _ in 0..10 {
            let w = PeriodicField::from_fn(g, FieldKind::Displacement, |_| rng.gen_range(-1.0..1.0));
            let dw = norm_l2eps(&diff(&w, 1).unwrap());
            assert!(t.dot(&w) / dw <= got * (1.0 + 1e-12));
        }
    }
}

#[test]
fn solves_are_deterministic() {
    let p = potentials::default_potential();
    let (g, region) = qnl(64, 8);
    let load = DeadLoad::cosine(g);
    let a = solver::solve_linearized(&Model::Qnl(region), &p, F, &load).unwrap();
    let b = solver::solve_linearized(&Model::Qnl(region), &p, F, &load).unwrap();
    assert_eq!(a, b);
    let run = || {
        solver::convergence_study(&p, F, DeadLoad::cosine, KRule::Fixed(4), &[16, 32, 64], StudyOptions { with_lambda_min: true })
            .unwrap()
    };
    assert_eq!(run(), run());
}

fn check_study(records: &[ConvergenceRecord]) {
    for r in records {
        assert!(r.error_equation_residual <= 1e-10, "N={}: {:e}", r.n, r.error_equation_residual);
        assert!(r.error_h1 <= r.consistency_negnorm / r.a_f * (1.0 + 1e-6), "N={}", r.n);
        for v in [r.error_h1, r.consistency_negnorm, r.d3_continuum, r.d2_interface_max] {
            assert!(v.is_finite() && v >= 0.0);
        }
        if let Some(lam) = r.lambda_min_qnl {
            assert!((lam - r.a_f).abs() < 1e-9 * r.a_f);
        }
    }
}

#[test]
fn default_study_satisfies_error_equation_and_bound() {
    let p = potentials::default_potential();
    let s = solver::convergence_study(&p, F, DeadLoad::cosine, KRule::Fixed(8), &[32, 64, 128, 256], StudyOptions {
        with_lambda_min: true,
    })
    .unwrap();
    check_study(&s.records);
    assert_eq!(s.records.iter().map(|r| r.n).collect::<Vec<_>>(), [32, 64, 128, 256]);
}

#[test]
fn pair_potential_study_converges_at_three_halves() {
    let p = potentials::pair_only_potential();
    let s = solver::convergence_study(&p, F, DeadLoad::cosine, KRule::Fixed(8), &[64, 128, 256, 512, 1024], StudyOptions {
        with_lambda_min: false,
    })
    .unwrap();
    check_study(&s.records);
    assert!(s.error_rates.all >= 1.4, "{:?}", s.error_rates);
}

#[test]
fn power_rule_study_runs() {
    let p = potentials::default_potential();
    let s = solver::convergence_study(&p, F, DeadLoad::cosine, KRule::Power(0.5), &[64, 256], StudyOptions {
        with_lambda_min: false,
    })
    .unwrap();
    assert_eq!(s.records[0].k, 8);
    assert_eq!(s.records[1].k, 16);
    check_study(&s.records);
}

#[test]
fn study_rejects_bad_inputs() {
    let p = potentials::default_potential();
    let opts = StudyOptions { with_lambda_min: false };
    assert!(solver::convergence_study(&p, F, DeadLoad::cosine, KRule::Fixed(4), &[32], opts).is_err());
    assert!(solver::convergence_study(&p, F, DeadLoad::cosine, KRule::Fixed(4), &[32, 16], opts).is_err());
    assert!(solver::convergence_study(&p, F, DeadLoad::cosine, KRule::Fixed(12), &[16, 32], opts).is_err());
    // unstable strain
    assert!(solver::convergence_study(&p, 1.3, DeadLoad::cosine, KRule::Fixed(4), &[16, 32], opts).is_err());
}

#[test]
fn consistency_fit_recovers_exact_two_term_data() {
    let rec = |n: usize, m_c: f64, m_i: f64, d3: f64, d2: f64| {
        let e = 1.0 / n as f64;
        ConvergenceRecord {
            n,
            k: 4,
            epsilon: e,
            error_h1: 0.0,
            consistency_negnorm: e * e * m_c * d3 + e.powf(1.5) * m_i * d2,
            d3_continuum: d3,
            d2_interface_max: d2,
            a_f: 1.0,
            error_equation_residual: 0.0,
            lambda_min_qnl: None,
        }
    };
    let records: Vec<_> = [16usize, 32, 64, 128].iter().map(|&n| rec(n, 2.0, 0.5, 1.0 + 1.0 / n as f64, 0.3)).collect();
    let fit = solver::fit_consistency_constants(&records).unwrap();
    assert!((fit.m_c - 2.0).abs() < 1e-9 && (fit.m_i - 0.5).abs() < 1e-9, "{fit:?}");
    assert!((fit.spread() - 1.0).abs() < 1e-9);
    // data decaying like ε is not captured: the required multiple grows
    let mut slow = records.clone();
    for r in &mut slow {
        r.consistency_negnorm = r.epsilon;
    }
    assert!(solver::fit_consistency_constants(&slow).unwrap().spread() > 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn negative_norm_is_a_norm(a in prop::collection::vec(-1.0f64..1.0, 32), b in prop::collection::vec(-1.0f64..1.0, 32), s in -5.0f64..5.0) {
        let g = ChainGrid::new(16).unwrap();
        let mut t = PeriodicField::new(g, a, FieldKind::Generic).unwrap();
        let mut r = PeriodicField::new(g, b, FieldKind::Generic).unwrap();
        t.project_zero_mean();
        r.project_zero_mean();
        let nt = solver::negative_norm(&t).unwrap();
        let nr = solver::negative_norm(&r).unwrap();
        let mut scaled = t.scaled(s);
        scaled.project_zero_mean();
        prop_assert!((solver::negative_norm(&scaled).unwrap() - s.abs() * nt).abs() <= 1e-12 * (1.0 + nt * s.abs()));
        let mut sum = t.axpby(1.0, &r, 1.0);
        sum.project_zero_mean();
        prop_assert!(solver::negative_norm(&sum).unwrap() <= nt + nr + 1e-12);
    }
}

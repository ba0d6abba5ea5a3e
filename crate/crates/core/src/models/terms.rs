//! Site energies as lists of embedding and pair terms over bond strains.
//!
//! Bond `j` carries the strain `r_j = F + Du_j` between atoms `j-1` and `j`.
//! Every model energy is `ε Σ_ℓ E_ℓ` with `E_ℓ` a [`SiteEnergy`]; energies,
//! gradients and Hessians are all evaluated from the same term lists.

use crate::potentials::EamPotential;

/// A linear combination of bond strains that enters `φ` or `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stretch {
    /// `r_j`
    Bond(i64),
    /// `2 r_j`, the Cauchy–Born next-nearest distance
    Double(i64),
    /// `r_j + r_{j-1}`, the true next-nearest distance
    Span(i64),
}

impl Stretch {
    pub fn value(self, r: &impl Fn(i64) -> f64) -> f64 {
        match self {
            Stretch::Bond(j) => r(j),
            Stretch::Double(j) => 2.0 * r(j),
            Stretch::Span(j) => r(j) + r(j - 1),
        }
    }

    /// `(bond, ∂s/∂r_bond)` pairs; at most two.
    pub fn partials(self) -> ([(i64, f64); 2], usize) {
        match self {
            Stretch::Bond(j) => ([(j, 1.0), (0, 0.0)], 1),
            Stretch::Double(j) => ([(j, 2.0), (0, 0.0)], 1),
            Stretch::Span(j) => ([(j, 1.0), (j - 1, 1.0)], 2),
        }
    }

    /// Image under the reflection of atoms `ℓ ↦ -ℓ`, which maps bond `j` to `1 - j`.
    pub fn mirror(self) -> Stretch {
        match self {
            Stretch::Bond(j) => Stretch::Bond(1 - j),
            Stretch::Double(j) => Stretch::Double(1 - j),
            Stretch::Span(j) => Stretch::Span(2 - j),
        }
    }
}

/// An electron density `Σ c_i ρ(s_i)`.
pub type Density = Vec<(f64, Stretch)>;

pub fn atomistic_density(l: i64) -> Density {
    vec![
        (1.0, Stretch::Bond(l)),
        (1.0, Stretch::Span(l)),
        (1.0, Stretch::Bond(l + 1)),
        (1.0, Stretch::Span(l + 2)),
    ]
}

pub fn continuum_density(j: i64) -> Density {
    vec![(2.0, Stretch::Bond(j)), (2.0, Stretch::Double(j))]
}

pub fn qnl_density(j: i64) -> Density {
    vec![(2.0, Stretch::Bond(j)), (2.0, Stretch::Span(j))]
}

pub fn density_value(p: &EamPotential, density: &Density, r: &impl Fn(i64) -> f64) -> f64 {
    density.iter().map(|&(c, s)| c * p.density.value(s.value(r))).sum()
}

/// `E_ℓ = Σ w G(ρ̄) + Σ w φ(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteEnergy {
    pub embedding: Vec<(f64, Density)>,
    pub pair: Vec<(f64, Stretch)>,
}

impl SiteEnergy {
    pub fn atomistic(l: i64) -> Self {
        Self {
            embedding: vec![(1.0, atomistic_density(l))],
            pair: vec![
                (0.5, Stretch::Bond(l)),
                (0.5, Stretch::Span(l)),
                (0.5, Stretch::Bond(l + 1)),
                (0.5, Stretch::Span(l + 2)),
            ],
        }
    }

    pub fn continuum(l: i64) -> Self {
        Self {
            embedding: vec![(0.5, continuum_density(l)), (0.5, continuum_density(l + 1))],
            pair: vec![
                (0.5, Stretch::Bond(l)),
                (0.5, Stretch::Double(l)),
                (0.5, Stretch::Bond(l + 1)),
                (0.5, Stretch::Double(l + 1)),
            ],
        }
    }

    /// Transition atom `l = K+1` or `K+2` on the positive side: the left
    /// next-nearest bond is exact, the right one is Cauchy–Born.
    pub fn quasi_nonlocal(l: i64) -> Self {
        Self {
            embedding: vec![(0.5, qnl_density(l)), (0.5, continuum_density(l + 1))],
            pair: vec![
                (0.5, Stretch::Bond(l)),
                (0.5, Stretch::Bond(l + 1)),
                (0.5, Stretch::Span(l)),
                (0.5, Stretch::Double(l + 1)),
            ],
        }
    }

    pub fn mirror(&self) -> Self {
        let flip = |d: &Density| d.iter().map(|&(c, s)| (c, s.mirror())).collect();
        Self {
            embedding: self.embedding.iter().map(|(w, d)| (*w, flip(d))).collect(),
            pair: self.pair.iter().map(|&(w, s)| (w, s.mirror())).collect(),
        }
    }

    /// Keeps only the embedding terms.
    pub fn embedding_only(&self) -> Self {
        Self { embedding: self.embedding.clone(), pair: Vec::new() }
    }

    /// Keeps only the pair terms.
    pub fn pair_only(&self) -> Self {
        Self { embedding: Vec::new(), pair: self.pair.clone() }
    }

    pub fn value(&self, p: &EamPotential, r: &impl Fn(i64) -> f64) -> f64 {
        let emb: f64 =
            self.embedding.iter().map(|(w, d)| w * p.embedding.value(density_value(p, d, r))).sum();
        let pair: f64 = self.pair.iter().map(|&(w, s)| w * p.pair.value(s.value(r))).sum();
        emb + pair
    }

    /// Calls `add(bond, ∂E_ℓ/∂r_bond)` for every contribution, in a fixed order.
    pub fn gradient(&self, p: &EamPotential, r: &impl Fn(i64) -> f64, mut add: impl FnMut(i64, f64)) {
        for (w, d) in &self.embedding {
            let g1 = w * p.embedding.d1(density_value(p, d, r));
            for &(c, s) in d {
                let rho1 = p.density.d1(s.value(r));
                let (parts, n) = s.partials();
                for &(j, ds) in &parts[..n] {
                    add(j, g1 * c * rho1 * ds);
                }
            }
        }
        for &(w, s) in &self.pair {
            let phi1 = w * p.pair.d1(s.value(r));
            let (parts, n) = s.partials();
            for &(j, ds) in &parts[..n] {
                add(j, phi1 * ds);
            }
        }
    }

    /// Calls `add(i, j, ∂²E_ℓ/∂r_i∂r_j)` once for every ordered pair of
    /// contributing bonds (so symmetric entries are visited twice).
    pub fn hessian(&self, p: &EamPotential, r: &impl Fn(i64) -> f64, mut add: impl FnMut(i64, i64, f64)) {
        for (w, d) in &self.embedding {
            let rho_bar = density_value(p, d, r);
            let g1 = w * p.embedding.d1(rho_bar);
            let g2 = w * p.embedding.d2(rho_bar);
            // ∂ρ̄/∂r_j gathered per bond
            let mut grad: Vec<(i64, f64)> = Vec::with_capacity(6);
            for &(c, s) in d {
                let rho1 = c * p.density.d1(s.value(r));
                let rho2 = c * p.density.d2(s.value(r));
                let (parts, n) = s.partials();
                for &(i, di) in &parts[..n] {
                    match grad.iter_mut().find(|(b, _)| *b == i) {
                        Some(entry) => entry.1 += rho1 * di,
                        None => grad.push((i, rho1 * di)),
                    }
                    for &(j, dj) in &parts[..n] {
                        add(i, j, g1 * rho2 * di * dj);
                    }
                }
            }
            for &(i, gi) in &grad {
                for &(j, gj) in &grad {
                    add(i, j, g2 * gi * gj);
                }
            }
        }
        for &(w, s) in &self.pair {
            let phi2 = w * p.pair.d2(s.value(r));
            let (parts, n) = s.partials();
            for &(i, di) in &parts[..n] {
                for &(j, dj) in &parts[..n] {
                    add(i, j, phi2 * di * dj);
                }
            }
        }
    }
}

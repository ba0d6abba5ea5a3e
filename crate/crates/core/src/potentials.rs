//! Pair potential `φ`, electron density `ρ` and embedding function `G`,
//! the shipped toy potentials, the potential file format and checks of the
//! sign hypotheses used by the stability analysis.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kv;
use crate::stability;

/// A real function of one variable with analytic first and second derivatives.
pub trait ScalarFunction: fmt::Debug + Send + Sync {
    fn value(&self, r: f64) -> f64;
    fn d1(&self, r: f64) -> f64;
    fn d2(&self, r: f64) -> f64;
}

/// The parseable function families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Zero,
    /// `e^{-2α(r-1)} - 2e^{-α(r-1)}`
    Morse { alpha: f64 },
    /// `e^{-β(r-1)}`
    Exponential { beta: f64 },
    /// `(c₀/2) s² - c₁ s`
    Quadratic { c0: f64, c1: f64 },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Zero => "zero",
            Family::Morse { .. } => "morse",
            Family::Exponential { .. } => "exponential",
            Family::Quadratic { .. } => "quadratic",
        }
    }
}

impl ScalarFunction for Family {
    fn value(&self, r: f64) -> f64 {
        match *self {
            Family::Zero => 0.0,
            Family::Morse { alpha } => {
                let e = (-alpha * (r - 1.0)).exp();
                e * e - 2.0 * e
            }
            Family::Exponential { beta } => (-beta * (r - 1.0)).exp(),
            Family::Quadratic { c0, c1 } => 0.5 * c0 * r * r - c1 * r,
        }
    }

    fn d1(&self, r: f64) -> f64 {
        match *self {
            Family::Zero => 0.0,
            Family::Morse { alpha } => {
                let e = (-alpha * (r - 1.0)).exp();
                -2.0 * alpha * e * e + 2.0 * alpha * e
            }
            Family::Exponential { beta } => -beta * (-beta * (r - 1.0)).exp(),
            Family::Quadratic { c0, c1 } => c0 * r - c1,
        }
    }

    fn d2(&self, r: f64) -> f64 {
        match *self {
            Family::Zero => 0.0,
            Family::Morse { alpha } => {
                let e = (-alpha * (r - 1.0)).exp();
                4.0 * alpha * alpha * e * e - 2.0 * alpha * alpha * e
            }
            Family::Exponential { beta } => beta * beta * (-beta * (r - 1.0)).exp(),
            Family::Quadratic { c0, .. } => c0,
        }
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A [`ScalarFunction`] assembled from three closures. Used for ad-hoc
/// functions that have no file representation.
#[derive(Clone)]
pub struct FnTriple {
    value: RealFn,
    d1: RealFn,
    d2: RealFn,
}

impl FnTriple {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { value: Arc::new(value), d1: Arc::new(d1), d2: Arc::new(d2) }
    }
}

impl fmt::Debug for FnTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnTriple(..)")
    }
}

impl ScalarFunction for FnTriple {
    fn value(&self, r: f64) -> f64 {
        (self.value)(r)
    }
    fn d1(&self, r: f64) -> f64 {
        (self.d1)(r)
    }
    fn d2(&self, r: f64) -> f64 {
        (self.d2)(r)
    }
}

/// Embedded-atom potential: `E_ℓ = G(ρ̄_ℓ) + ½ Σ φ(r)`.
#[derive(Debug, Clone)]
pub struct EamPotential {
    pub name: String,
    pub pair: Arc<dyn ScalarFunction>,
    pub density: Arc<dyn ScalarFunction>,
    pub embedding: Arc<dyn ScalarFunction>,
    /// Strain interval on which the sign hypotheses (a1, and a2 or a3 as
    /// appropriate) have been verified for this potential.
    pub stable_range: Option<(f64, f64)>,
    families: Option<[Family; 3]>,
}

impl EamPotential {
    pub fn new(
        name: impl Into<String>,
        pair: Arc<dyn ScalarFunction>,
        density: Arc<dyn ScalarFunction>,
        embedding: Arc<dyn ScalarFunction>,
    ) -> Self {
        Self { name: name.into(), pair, density, embedding, stable_range: None, families: None }
    }

    pub fn from_families(name: impl Into<String>, pair: Family, density: Family, embedding: Family) -> Self {
        Self {
            name: name.into(),
            pair: Arc::new(pair),
            density: Arc::new(density),
            embedding: Arc::new(embedding),
            stable_range: None,
            families: Some([pair, density, embedding]),
        }
    }

    pub fn with_stable_range(mut self, lo: f64, hi: f64) -> Self {
        self.stable_range = Some((lo, hi));
        self
    }

    /// `(pair, density, embedding)` families when built from them.
    pub fn families(&self) -> Option<[Family; 3]> {
        self.families
    }

    /// Uniform-strain electron density `ρ̄_F = 2ρ(F) + 2ρ(2F)`.
    pub fn uniform_density(&self, f: f64) -> f64 {
        2.0 * self.density.value(f) + 2.0 * self.density.value(2.0 * f)
    }

    /// Cauchy–Born energy per bond, `W(r) = G(2ρ(r)+2ρ(2r)) + φ(r) + φ(2r)`.
    pub fn cauchy_born(&self, r: f64) -> f64 {
        self.embedding.value(2.0 * self.density.value(r) + 2.0 * self.density.value(2.0 * r))
            + self.pair.value(r)
            + self.pair.value(2.0 * r)
    }

    /// Parses the `key = value` potential format.
    pub fn parse(text: &str) -> Result<Self> {
        let entries = kv::parse(text)?;
        let mut name = None;
        let mut fam = [None::<(String, usize)>, None, None];
        let (mut alpha, mut beta, mut c0, mut c1) = (None, None, None, None);
        for e in &entries {
            let number = || -> Result<f64> {
                e.value.parse::<f64>().map_err(|_| Error::Parse {
                    line: e.line,
                    message: format!("`{}` is not a number", e.value),
                })
            };
            match e.key.as_str() {
                "name" => name = Some(e.value.clone()),
                "family.pair" => fam[0] = Some((e.value.clone(), e.line)),
                "family.density" => fam[1] = Some((e.value.clone(), e.line)),
                "family.embedding" => fam[2] = Some((e.value.clone(), e.line)),
                "alpha" => alpha = Some(number()?),
                "beta" => beta = Some(number()?),
                "c0" => c0 = Some(number()?),
                "c1" => c1 = Some(number()?),
                other => {
                    return Err(Error::Parse { line: e.line, message: format!("unknown key `{other}`") })
                }
            }
        }
        let missing = |what: &str, line: usize| Error::Parse { line, message: format!("missing `{what}`") };
        let last_line = entries.last().map_or(1, |e| e.line);
        let resolve = |slot: &Option<(String, usize)>, role: &str| -> Result<Family> {
            let (tag, line) = slot.clone().ok_or_else(|| missing(&format!("family.{role}"), last_line))?;
            let family = match (role, tag.as_str()) {
                (_, "zero") => Family::Zero,
                ("pair", "morse") => Family::Morse { alpha: alpha.ok_or_else(|| missing("alpha", line))? },
                ("density", "exponential") => {
                    Family::Exponential { beta: beta.ok_or_else(|| missing("beta", line))? }
                }
                ("embedding", "quadratic") => Family::Quadratic {
                    c0: c0.ok_or_else(|| missing("c0", line))?,
                    c1: c1.ok_or_else(|| missing("c1", line))?,
                },
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unsupported {role} family `{tag}`"),
                    })
                }
            };
            Ok(family)
        };
        let pair = resolve(&fam[0], "pair")?;
        let density = resolve(&fam[1], "density")?;
        let embedding = resolve(&fam[2], "embedding")?;
        if let Family::Quadratic { c0, .. } = embedding {
            if c0 < 0.0 {
                let line = fam[2].as_ref().map_or(last_line, |f| f.1);
                return Err(Error::Parse { line, message: "c0 must be nonnegative".into() });
            }
        }
        Ok(Self::from_families(name.unwrap_or_else(|| "unnamed".into()), pair, density, embedding))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes a family-built potential in the file format.
    pub fn to_file_string(&self) -> Option<String> {
        let [pair, density, embedding] = self.families?;
        let mut out = format!("name = {}\n", self.name);
        out += &format!("family.pair = {}\n", pair.tag());
        out += &format!("family.density = {}\n", density.tag());
        out += &format!("family.embedding = {}\n", embedding.tag());
        for f in [pair, density, embedding] {
            match f {
                Family::Zero => {}
                Family::Morse { alpha } => out += &format!("alpha = {alpha:?}\n"),
                Family::Exponential { beta } => out += &format!("beta = {beta:?}\n"),
                Family::Quadratic { c0, c1 } => out += &format!("c0 = {c0:?}\nc1 = {c1:?}\n"),
            }
        }
        Some(out)
    }
}

// ---------------------------------------------------------------------------
// Shipped potentials

pub const MORSE_ALPHA: f64 = 4.0;
pub const DENSITY_BETA: f64 = 3.0;

/// Embedding stiffness of the default potential, frozen from
/// [`scan_default_stiffness`] over [`DEFAULT_C0_GRID`].
pub const DEFAULT_C0: f64 = 0.035;
/// Embedding stiffness of the embedding-dominated potential, frozen from
/// [`scan_embedding_dominated_stiffness`] over [`DOMINATED_C0_GRID`].
pub const DOMINATED_C0: f64 = 0.1;

/// Range on which a1 and a2 hold for the default potential. Above
/// `1 + ln2/α ≈ 1.1733` the Morse term has `φ''(F) < 0` and a1 fails.
pub const DEFAULT_STABLE_RANGE: (f64, f64) = (0.95, 1.17);
/// Range on which a1 and a3 hold for the embedding-dominated potential.
pub const DOMINATED_RANGE: (f64, f64) = (0.95, 1.1);

pub const DEFAULT_C0_GRID: (f64, usize) = (0.005, 40);
pub const DOMINATED_C0_GRID: (f64, usize) = (0.05, 40);

/// Reference density `ρ̄(1) = 2 + 2e^{-β}` at which the embedding is stationary.
pub fn reference_density() -> f64 {
    2.0 + 2.0 * (-DENSITY_BETA).exp()
}

/// Quadratic embedding with its minimum at the reference density, so that
/// `G'_F < 0` for `F > 1`.
pub fn centred_embedding(c0: f64) -> Family {
    Family::Quadratic { c0, c1: c0 * reference_density() }
}

fn toy(name: &str, embedding: Family) -> EamPotential {
    EamPotential::from_families(
        name,
        Family::Morse { alpha: MORSE_ALPHA },
        Family::Exponential { beta: DENSITY_BETA },
        embedding,
    )
}

/// Morse pair term, exponential density, weak centred quadratic embedding.
/// Satisfies a1 and a2 on [`DEFAULT_STABLE_RANGE`].
pub fn default_potential() -> EamPotential {
    let (lo, hi) = DEFAULT_STABLE_RANGE;
    toy("default", centred_embedding(DEFAULT_C0)).with_stable_range(lo, hi)
}

/// Strong embedding: a2 fails and a3 holds on [`DOMINATED_RANGE`].
pub fn embedding_dominated_potential() -> EamPotential {
    let (lo, hi) = DOMINATED_RANGE;
    toy("embedding-dominated", centred_embedding(DOMINATED_C0)).with_stable_range(lo, hi)
}

/// `G ≡ 0`: the pure Morse pair chain.
pub fn pair_only_potential() -> EamPotential {
    let (lo, hi) = DEFAULT_STABLE_RANGE;
    toy("pair-only", Family::Zero).with_stable_range(lo, hi)
}

pub fn builtin(name: &str) -> Option<EamPotential> {
    match name {
        "default" => Some(default_potential()),
        "embedding-dominated" => Some(embedding_dominated_potential()),
        "pair-only" => Some(pair_only_potential()),
        _ => None,
    }
}

pub const BUILTIN_NAMES: [&str; 3] = ["default", "embedding-dominated", "pair-only"];

fn range_grid(range: (f64, f64), points: usize) -> impl Iterator<Item = f64> {
    let (lo, hi) = range;
    (0..points).map(move |i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
}

/// Largest `c₀ = step·i` (`i = 1..=count`) for which a1 and a2 hold at every
/// strain of a 221-point grid over `range`, with the centred embedding.
pub fn scan_default_stiffness(grid: (f64, usize), range: (f64, f64)) -> Option<f64> {
    let (step, count) = grid;
    (1..=count).rev().map(|i| step * i as f64).find(|&c0| {
        let p = toy("scan", centred_embedding(c0));
        range_grid(range, 221).all(|f| {
            let r = check_assumptions(&p, f).expect("positive strain");
            r.a1_holds && r.a2_holds
        })
    })
}

/// Smallest `c₀ = step·i` for which a1 and a3 hold (so a2 fails) across `range`.
pub fn scan_embedding_dominated_stiffness(grid: (f64, usize), range: (f64, f64)) -> Option<f64> {
    let (step, count) = grid;
    (1..=count).map(|i| step * i as f64).find(|&c0| {
        let p = toy("scan", centred_embedding(c0));
        range_grid(range, 221).all(|f| {
            let r = check_assumptions(&p, f).expect("positive strain");
            r.a1_holds && r.a3_holds && !r.a2_holds
        })
    })
}

// ---------------------------------------------------------------------------
// Hypothesis checks

/// Signs of the quantities entering the stability hypotheses at strain `F`.
///
/// * a1: `φ''_F > 0, φ''_{2F} < 0, ρ'_F ≤ 0, ρ'_{2F} ≤ 0, ρ''_F ≥ 0, ρ''_{2F} ≥ 0, G''_F ≥ 0`
/// * a2: `-B_F ≤ 0`
/// * a3: `φ''_{2F} + G''_F(ρ'_F + 2ρ'_{2F})² + 2G'_F ρ''_{2F} > 0`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    pub f: f64,
    pub a1_holds: bool,
    pub a2_holds: bool,
    pub a3_holds: bool,
    pub phi2_f: f64,
    pub phi2_2f: f64,
    pub rho1_f: f64,
    pub rho1_2f: f64,
    pub rho2_f: f64,
    pub rho2_2f: f64,
    pub g2_f: f64,
    pub minus_b: f64,
    pub a3_value: f64,
}

pub fn check_assumptions(p: &EamPotential, f: f64) -> Result<AssumptionReport> {
    if !(f > 0.0) {
        return Err(Error::invalid(format!("strain F = {f} must be positive")));
    }
    let d = stability::Derivatives::at(p, f);
    let coeffs = stability::coefficients(p, f)?;
    let minus_b = -coeffs.b;
    let a3_value = d.phi2_2f + d.g2 * (d.rho1_f + 2.0 * d.rho1_2f).powi(2) + 2.0 * d.g1 * d.rho2_2f;
    let a1_holds = d.phi2_f > 0.0
        && d.phi2_2f < 0.0
        && d.rho1_f <= 0.0
        && d.rho1_2f <= 0.0
        && d.rho2_f >= 0.0
        && d.rho2_2f >= 0.0
        && d.g2 >= 0.0;
    Ok(AssumptionReport {
        f,
        a1_holds,
        a2_holds: minus_b <= 0.0,
        a3_holds: a3_value > 0.0,
        phi2_f: d.phi2_f,
        phi2_2f: d.phi2_2f,
        rho1_f: d.rho1_f,
        rho1_2f: d.rho1_2f,
        rho2_f: d.rho2_f,
        rho2_2f: d.rho2_2f,
        g2_f: d.g2,
        minus_b,
        a3_value,
    })
}

// ---------------------------------------------------------------------------
// Derivative validation

pub const FD_STEP: f64 = 1e-5;
pub const DERIVATIVE_TOLERANCE: f64 = 1e-6;

/// Maximum deviation between analytic derivatives and central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    /// Per function (`pair`, `density`, `embedding`): worst deviation of
    /// `d1` against differences of `value`, and of `d2` against differences of `d1`.
    pub deviations: [(f64, f64); 3],
    pub max_deviation: f64,
    pub passed: bool,
}

/// `|analytic - fd| / max(|fd|, 1)`: relative for large values, absolute near zero.
fn deviation(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(1.0)
}

pub fn function_deviation(f: &dyn ScalarFunction, probe: &[f64]) -> (f64, f64) {
    let h = FD_STEP;
    probe.iter().fold((0.0f64, 0.0f64), |(m1, m2), &r| {
        let fd1 = (f.value(r + h) - f.value(r - h)) / (2.0 * h);
        let fd2 = (f.d1(r + h) - f.d1(r - h)) / (2.0 * h);
        (m1.max(deviation(f.d1(r), fd1)), m2.max(deviation(f.d2(r), fd2)))
    })
}

/// Probes `φ` and `ρ` at `probe` and `G` at the uniform densities `ρ̄_r`.
pub fn validate_derivatives(p: &EamPotential, probe: &[f64]) -> DerivativeReport {
    let densities: Vec<f64> = probe.iter().map(|&r| p.uniform_density(r)).collect();
    let deviations = [
        function_deviation(p.pair.as_ref(), probe),
        function_deviation(p.density.as_ref(), probe),
        function_deviation(p.embedding.as_ref(), &densities),
    ];
    let max_deviation = deviations.iter().fold(0.0f64, |m, &(a, b)| m.max(a).max(b));
    DerivativeReport { deviations, max_deviation, passed: max_deviation <= DERIVATIVE_TOLERANCE }
}

/// The `0.8, 0.9, …, 2.4` probe grid.
pub fn standard_probe() -> Vec<f64> {
    (0..=16).map(|i| 0.8 + 0.1 * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(d1_factor: f64) -> Arc<dyn ScalarFunction> {
        Arc::new(FnTriple::new(|r| r * r, move |r| d1_factor * r, |_| 2.0))
    }

    #[test]
    fn polynomial_passes_validation() {
        let (a, b) = function_deviation(square(2.0).as_ref(), &standard_probe());
        assert!(a <= 1e-10 && b <= 1e-10, "{a} {b}");
    }

    #[test]
    fn wrong_first_derivative_is_caught() {
        let (a, _) = function_deviation(square(3.0).as_ref(), &[1.0, 1.5, 2.0]);
        assert!((a - 0.5).abs() < 1e-6, "{a}");
        let p = EamPotential::new("bad", square(3.0), Arc::new(Family::Zero), Arc::new(Family::Zero));
        assert!(!validate_derivatives(&p, &[1.0, 2.0]).passed);
    }

    #[test]
    fn shipped_potentials_pass_validation() {
        for name in BUILTIN_NAMES {
            let p = builtin(name).unwrap();
            let r = validate_derivatives(&p, &standard_probe());
            assert!(r.passed, "{name}: {r:?}");
        }
    }

    #[test]
    fn morse_second_derivative_signs() {
        // φ''(1) = 2α², φ''(2) = 4α²e^{-2α} - 2α²e^{-α}
        let p = toy("pair", Family::Zero);
        let a = MORSE_ALPHA;
        assert!((p.pair.d2(1.0) - 2.0 * a * a).abs() < 1e-12);
        let expected = 4.0 * a * a * (-2.0 * a).exp() - 2.0 * a * a * (-a).exp();
        assert!((p.pair.d2(2.0) - expected).abs() < 1e-14);
        let r = check_assumptions(&p, 1.0).unwrap();
        assert!(r.phi2_f > 0.0 && r.phi2_2f < 0.0);
        assert!(r.a1_holds);
    }

    #[test]
    fn degenerate_density_and_embedding_satisfy_a1_with_equality() {
        let p = EamPotential::from_families(
            "degenerate",
            Family::Morse { alpha: MORSE_ALPHA },
            Family::Zero,
            Family::Zero,
        );
        let r = check_assumptions(&p, 1.0).unwrap();
        assert!(r.a1_holds);
        assert_eq!((r.rho1_f, r.rho1_2f, r.rho2_f, r.rho2_2f, r.g2_f), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn nonpositive_strain_is_rejected() {
        assert!(check_assumptions(&default_potential(), 0.0).is_err());
        assert!(check_assumptions(&default_potential(), -1.0).is_err());
    }

    #[test]
    fn frozen_parameters_match_the_scan() {
        let c0 = scan_default_stiffness(DEFAULT_C0_GRID, DEFAULT_STABLE_RANGE).unwrap();
        assert!((c0 - DEFAULT_C0).abs() < 1e-12, "scan gives {c0}");
        let c0 = scan_embedding_dominated_stiffness(DOMINATED_C0_GRID, DOMINATED_RANGE).unwrap();
        assert!((c0 - DOMINATED_C0).abs() < 1e-12, "scan gives {c0}");
    }

    #[test]
    fn shipped_potentials_hold_their_hypotheses_on_their_range() {
        for (p, needs_a2) in [
            (default_potential(), true),
            (pair_only_potential(), true),
            (embedding_dominated_potential(), false),
        ] {
            let range = p.stable_range.unwrap();
            for f in range_grid(range, 101) {
                let r = check_assumptions(&p, f).unwrap();
                assert!(r.a1_holds, "{} at F = {f}", p.name);
                if needs_a2 {
                    assert!(r.a2_holds, "{} at F = {f}", p.name);
                } else {
                    assert!(r.a3_holds && !r.a2_holds, "{} at F = {f}", p.name);
                }
            }
        }
    }

    #[test]
    fn report_booleans_are_signs_of_raw_values() {
        let p = default_potential();
        for f in [0.9, 1.0, 1.2, 1.4] {
            let r = check_assumptions(&p, f).unwrap();
            assert_eq!(r.a2_holds, r.minus_b <= 0.0);
            assert_eq!(r.a3_holds, r.a3_value > 0.0);
            let again = check_assumptions(&p, f).unwrap();
            assert_eq!(r, again);
        }
    }

    #[test]
    fn file_format_round_trip() {
        let p = default_potential();
        let text = p.to_file_string().unwrap();
        let q = EamPotential::parse(&text).unwrap();
        assert_eq!(q.families(), p.families());
        assert_eq!(q.name, "default");
    }

    #[test]
    fn unknown_key_is_an_error_with_line_number() {
        let text = "family.pair = morse\nalpha = 4\ngamma = 2\n";
        match EamPotential::parse(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("gamma"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unsupported_family_is_rejected() {
        let text = "family.pair = lennard-jones\nfamily.density = zero\nfamily.embedding = zero\n";
        assert!(matches!(EamPotential::parse(text), Err(Error::Parse { line: 1, .. })));
        let text = "family.pair = morse\nfamily.density = zero\nfamily.embedding = zero\n";
        assert!(matches!(EamPotential::parse(text), Err(Error::Parse { .. })));
    }
}

//! Reruns the stiffness scans behind the shipped potentials, checks them
//! against the frozen constants and prints the potential files.

use eamqc::potentials::{self, EamPotential};

fn main() {
    let c0 = potentials::scan_default_stiffness(potentials::DEFAULT_C0_GRID, potentials::DEFAULT_STABLE_RANGE)
        .expect("some stiffness satisfies a1 and a2");
    let c0_dom = potentials::scan_embedding_dominated_stiffness(potentials::DOMINATED_C0_GRID, potentials::DOMINATED_RANGE)
        .expect("some stiffness satisfies a1 and a3 without a2");
    println!("default c0 = {c0:.3} over {:?}", potentials::DEFAULT_STABLE_RANGE);
    println!("embedding-dominated c0 = {c0_dom:.3} over {:?}", potentials::DOMINATED_RANGE);
    assert!((c0 - potentials::DEFAULT_C0).abs() < 1e-12);
    assert!((c0_dom - potentials::DOMINATED_C0).abs() < 1e-12);

    for name in potentials::BUILTIN_NAMES {
        let p = potentials::builtin(name).unwrap();
        let text = p.to_file_string().expect("built from families");
        let back = EamPotential::parse(&text).unwrap();
        assert_eq!(back.families(), p.families());
        println!("\n# {name}.pot\n{text}");
    }
}

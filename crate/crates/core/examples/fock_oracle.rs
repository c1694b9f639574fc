//! Cross-checks the one-particle determinants against brute-force many-body
//! evolution in Fock space for a random mixed state that does not commute
//! with the charge.
//!
//! ```text
//! cargo run --example fock_oracle
//! ```

use std::f64::consts::PI;

use fcs::fock::FockModel;
use fcs::{random_model, ChiEvaluator, ModelKind, Variant};

fn main() -> fcs::Result<()> {
    let model = random_model(1, 6, ModelKind::MixedGeneral)?;
    let fock = FockModel::new(&model)?;
    println!(
        "dim {}, Fock space {}, ||[Q,rho]|| = {:.3}",
        model.dim(),
        1 << model.dim(),
        model.commutator_norm()
    );

    let collapse = ChiEvaluator::new(&model, Variant::Collapse)?;
    let spin = ChiEvaluator::new(&model, Variant::SpinCoupling)?;
    let single = ChiEvaluator::new(&model, Variant::SingleMeasurement)?;
    let mut worst: f64 = 0.0;
    for k in 0..32 {
        let l = 2.0 * PI * k as f64 / 32.0;
        worst = worst
            .max((collapse.chi(l)? - fock.chi_two_measurement(l)).norm())
            .max((spin.chi(l)? - fock.chi_spin_coupling(l)).norm())
            .max((single.chi(l)? - fock.chi_single_measurement(l)?).norm());
    }
    println!("max deviation over collapse, spin coupling, single measurement: {worst:.2e}");

    // the two-measurement distribution read off the joint probabilities
    let p = fock.distribution();
    for (q, pn) in p.charges().zip(&p.p) {
        println!("P({q:>2}) = {pn:.8}");
    }
    Ok(())
}

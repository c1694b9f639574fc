//! The five measurement protocols on one model. Only the collapse protocol
//! yields a genuine probability distribution for states that do not commute
//! with the charge; spin coupling gives a quasi-distribution on half-integer
//! charges.
//!
//! ```text
//! cargo run --example protocols
//! ```

use fcs::{cumulants, distribution, random_model, ChiEvaluator, ModelKind, Variant};

fn main() -> fcs::Result<()> {
    let commuting = random_model(1, 4, ModelKind::MixedCommuting)?;
    println!("commuting mixed state, d = 4");
    for v in Variant::ALL {
        let k = cumulants(&commuting, v, 3)?;
        println!(
            "  {v:<18} k1 {:+.6}  k2 {:+.6}  k3 {:+.6}",
            k.get(1),
            k.get(2),
            k.get(3)
        );
    }

    let general = random_model(2, 3, ModelKind::MixedGeneral)?;
    println!(
        "non-commuting mixed state, d = 3, ||[Q,rho]|| = {:.3}",
        general.commutator_norm()
    );
    let l = std::f64::consts::PI;
    for v in [
        Variant::Regularized,
        Variant::Collapse,
        Variant::SpinCoupling,
        Variant::SingleMeasurement,
    ] {
        println!(
            "  chi({l:.3}) {v:<18} {:.6}",
            ChiEvaluator::new(&general, v)?.chi(l)?
        );
    }
    for v in [Variant::Collapse, Variant::SpinCoupling] {
        let d = distribution(&general, v, 64)?;
        println!(
            "  {v}: total {:.12}, min entry {:+.4}, quasi {}",
            d.total(),
            d.min_entry(),
            d.quasi
        );
        for (q, pn) in d.charges().zip(&d.p).filter(|(_, pn)| pn.abs() > 1e-10) {
            println!("    P({q:+.1}) = {pn:+.6}");
        }
    }
    Ok(())
}

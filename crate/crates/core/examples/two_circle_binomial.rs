//! Two leads on circles joined by a point scatterer: the regularized
//! generating function is binomial in the number of momenta inside the bias
//! window.
//!
//! ```text
//! cargo run --example two_circle_binomial
//! ```

use std::f64::consts::PI;

use fcs::scattering::window_count;
use fcs::{
    binomial_chi, build_two_circle, cumulants, distribution, ScatteringMatrix, TwoCircleSpec,
    Variant,
};

fn main() -> fcs::Result<()> {
    let t2 = 0.3;
    let s = ScatteringMatrix::from_transmission(t2)?;
    // momenta are spaced by 2π/T = 1, so the window (−0.5, 9.5] holds ten
    let spec = TwoCircleSpec::new(s, 2.0 * PI, 9.5, -0.5, 12.7);
    let model = build_two_circle(&spec)?;
    let n = window_count(&spec);
    println!(
        "dim {}, window count {n}, conductance {:.5}",
        model.dim(),
        s.conductance()
    );

    let eval = fcs::ChiEvaluator::new(&model, Variant::Regularized)?;
    println!("{:>8} {:>24} {:>12}", "lambda", "chi", "|chi - binomial|");
    for k in 0..8 {
        let l = 2.0 * PI * k as f64 / 8.0;
        let chi = eval.chi(l)?;
        let err = (chi - binomial_chi(t2, n as u32, l)).norm();
        println!("{l:8.4} {:>11.7} {:+11.7}i {err:12.2e}", chi.re, chi.im);
    }

    let k = cumulants(&model, Variant::Regularized, 3)?;
    println!(
        "cumulants {:.6?}  (binomial: {:.6} {:.6} {:.6})",
        k.values,
        3.0,
        2.1,
        2.1 * (1.0 - 2.0 * t2)
    );

    let p = distribution(&model, Variant::Regularized, 2 * model.dim() + 2)?;
    for (q, pn) in p.charges().zip(&p.p).filter(|(_, pn)| pn.abs() > 1e-12) {
        println!("P({q:>2}) = {pn:.6}");
    }
    Ok(())
}

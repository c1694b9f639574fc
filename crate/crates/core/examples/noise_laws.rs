//! Shot noise and thermal noise of the two-circle junction.
//!
//! ```text
//! cargo run --example noise_laws
//! ```

use std::f64::consts::PI;

use fcs::counting::{noise_split, noise_trace_formula};
use fcs::scattering::NoiseReference;
use fcs::{build_two_circle, mean_charge, thermal_two_circle, ScatteringMatrix, TwoCircleSpec};

fn main() -> fcs::Result<()> {
    println!("zero temperature, 50 momenta in the window");
    for t2 in [0.1, 0.3, 0.5, 0.9, 1.0] {
        let s = ScatteringMatrix::from_transmission(t2)?;
        let model = build_two_circle(&TwoCircleSpec::new(s, 2.0 * PI, 49.5, -0.5, 52.7))?;
        let q = mean_charge(&model).regularized;
        let reference = NoiseReference::LesovikKhlus {
            mean_charge: q,
            transmission: t2,
        }
        .value();
        let schottky = NoiseReference::Schottky { mean_charge: q }.value();
        println!(
            "  |t|^2 {t2:.1}: <Q> {q:7.3}  noise {:7.4}  <Q>(1-|t|^2) {reference:7.4}  Fano {:.3}",
            noise_trace_formula(&model),
            noise_trace_formula(&model) / schottky
        );
    }

    println!("equilibrium, beta = 1");
    let s = ScatteringMatrix::from_transmission(0.4)?;
    let beta = 1.0;
    for period in [50.0, 100.0, 200.0, 400.0] {
        let model = thermal_two_circle(&TwoCircleSpec::new(s, period, 0.0, 0.0, 10.0), beta)?;
        let split = noise_split(&model);
        let jn = NoiseReference::JohnsonNyquist {
            conductance: s.conductance(),
            beta,
        }
        .value();
        println!(
            "  T {period:5}: dim {:4}  noise/T {:.6}  2G/beta {jn:.6}  shot part {:.1e}",
            model.dim(),
            split.total() / period,
            split.shot
        );
    }
    Ok(())
}

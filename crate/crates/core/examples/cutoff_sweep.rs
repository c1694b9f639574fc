//! Removing the momentum cutoff. The lead occupation `tr ρQ` grows without
//! bound, while the regularized generating function and the trace-class
//! diagnostics settle. At any finite cutoff the trace shift vanishes and
//! the naive determinant agrees with the regularized one.
//!
//! ```text
//! cargo run --example cutoff_sweep
//! ```

use fcs::limit::{SweepSpec, DEFAULT_PROBES};
use fcs::{cutoff_sweep, ScatteringMatrix, TwoCircleSpec};

fn main() -> fcs::Result<()> {
    let s = ScatteringMatrix::from_transmission(0.3)?;
    let beta = 2.0;
    let spec = TwoCircleSpec::new(s, 20.0, 1.0, -1.0, 20.0);
    let cutoffs = [14.0, 28.0, 56.0, 112.0];
    let report = cutoff_sweep(
        &SweepSpec::Thermal { spec, beta },
        &cutoffs,
        &DEFAULT_PROBES,
    )?;

    println!(
        "{:>8} {:>6} {:>12} {:>9} {:>22} {:>22} {:>10} {:>10}",
        "cutoff",
        "dim",
        "tr rho Q",
        "shift",
        "chi_reg(pi/4)",
        "chi_naive(pi/4)",
        "d_mix",
        "d_noise"
    );
    for r in &report.records {
        let (reg, naive) = (r.chi_reg[0], r.chi_naive[0]);
        println!(
            "{:8.1} {:6} {:12.4} {:9.1e} {:+10.7} {:+10.7}i {:+10.7} {:+10.7}i {:10.5} {:10.5}",
            r.cutoff,
            r.dim,
            r.lead_occupation,
            r.trace_shift,
            reg.re,
            reg.im,
            naive.re,
            naive.im,
            r.diagnostics.d_mix,
            r.diagnostics.d_noise
        );
    }
    println!("chi_reg drift {:.2e}", report.chi_drift());
    println!(
        "max identity deviation {:.2e}",
        report.max_identity_deviation()
    );

    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    println!(
        "\n{}",
        String::from_utf8_lossy(&csv).lines().next().unwrap_or("")
    );
    Ok(())
}

//! Moments and cumulants through set partitions.
//!
//! ```text
//! cargo run --example moments_cumulants
//! ```

use fcs::partitions::{bell_numbers, round_trip_deviation};
use fcs::{cumulants_to_moments, enumerate_partitions, moments_to_cumulants};

fn main() -> fcs::Result<()> {
    println!("Bell numbers {:?}", bell_numbers(10));
    for p in enumerate_partitions(3)? {
        println!("  {:?}", p.blocks);
    }

    // Poisson: every cumulant equals the rate
    let rate = 2.5;
    let m = cumulants_to_moments(&[rate; 6])?;
    println!("Poisson moments {m:.4?}");
    println!("back to cumulants {:.12?}", moments_to_cumulants(&m)?);

    let kappa = [0.3, -0.7, 0.2, 0.9, -0.4, 0.1, 0.6, -0.8, 0.5, -0.2];
    println!(
        "round trip at k = 10: {:.2e}",
        round_trip_deviation(&kappa)?
    );
    Ok(())
}

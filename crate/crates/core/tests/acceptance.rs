//! Acceptance gate: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fcs::counting::{
    cumulants, cumulants_from_chi, cumulants_from_local, distribution_from_chi, mean_charge,
    noise_split, noise_trace_formula, sample_chi, ChiEvaluator, ChiSamples, ClosedForm,
    LocalLogGrid, Variant,
};
use fcs::fock::{gamma, FockModel};
use fcs::limit::{cutoff_sweep, regularization_identity_check, SweepSpec, DEFAULT_PROBES};
use fcs::linalg::{identity, log_det};
use fcs::model::{random_model, ModelKind, QuantumModel};
use fcs::partitions::{cumulants_to_moments, round_trip_deviation};
use fcs::random::random_matrix;
use fcs::scattering::{
    binomial_chi, build_two_circle, poisson_chi, thermal_two_circle, window_count,
    ScatteringMatrix, TwoCircleSpec,
};

/// Seeds recorded from a search over mixed models.
const SEPARATION_SEED: u64 = 1;
const SEPARATION_DIM: usize = 4;
const NEGATIVITY_SEED: u64 = 2;
const NEGATIVITY_DIM: usize = 3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn grid(m: usize) -> Vec<f64> {
    (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect()
}

/// Window of `n` momenta on the integer grid, cutoff a few momenta beyond it.
fn window_spec(t2: f64, n: u32) -> TwoCircleSpec {
    let s = ScatteringMatrix::from_transmission(t2).unwrap();
    TwoCircleSpec::new(s, 2.0 * PI, n as f64 - 0.5, -0.5, n as f64 + 2.7)
}

fn commuting_models(count: u64) -> Vec<QuantumModel> {
    (0..count)
        .map(|seed| {
            let kind = if seed % 2 == 0 {
                ModelKind::PureCommuting
            } else {
                ModelKind::MixedCommuting
            };
            random_model(seed, 2 + (seed as usize % 7), kind).unwrap()
        })
        .collect()
}

fn all_kinds(count: u64, offset: u64) -> Vec<QuantumModel> {
    let kinds = [
        ModelKind::PureCommuting,
        ModelKind::MixedCommuting,
        ModelKind::MixedGeneral,
    ];
    (0..count)
        .map(|i| {
            let seed = offset + i;
            random_model(seed, 2 + (seed as usize % 7), kinds[(i % 3) as usize]).unwrap()
        })
        .collect()
}

fn c1_binomial() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for &t2 in &[0.0, 0.3, 0.7, 1.0] {
        for &n in &[1u32, 10, 50] {
            let spec = window_spec(t2, n);
            assert_eq!(window_count(&spec), n as i64);
            let eval =
                ChiEvaluator::new(&build_two_circle(&spec).unwrap(), Variant::Regularized).unwrap();
            for l in grid(64) {
                worst = worst.max((eval.chi(l).unwrap() - binomial_chi(t2, n, l)).norm());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && elapsed < Duration::from_secs(10),
        format!("max |chi_reg - binomial| = {worst:.2e} (tol 1e-10), {elapsed:.2?} (limit 10 s)"),
    )
}

fn c2_shot_noise() -> Outcome {
    let mut worst: f64 = 0.0;
    for &t2 in &[0.3, 0.7] {
        for &n in &[10u32, 50] {
            let model = build_two_circle(&window_spec(t2, n)).unwrap();
            let samples = sample_chi(&model, Variant::Regularized, 2 * model.dim() + 2).unwrap();
            let k2 = cumulants_from_chi(&samples, 2).unwrap().get(2);
            let want = mean_charge(&model).regularized * (1.0 - t2);
            worst = worst.max((k2 - want).abs() / want);
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max rel |k2 - <Q>(1-|t|^2)| = {worst:.2e} (tol 1e-6)"),
    )
}

fn c3_ohm() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut window_ok = true;
    let cases = [
        (0.3, 50.0, 1.37, -0.61, 3.0),
        (0.8, 20.0, -0.9, 2.2, 4.0),
        (0.55, 123.4, 0.77, 0.02, 1.5),
    ];
    for &(t2, period, mu_l, mu_r, cutoff) in &cases {
        let s = ScatteringMatrix::from_transmission(t2).unwrap();
        let spec = TwoCircleSpec::new(s, period, mu_l, mu_r, cutoff);
        let model = build_two_circle(&spec).unwrap();
        let n = window_count(&spec) as f64;
        window_ok &= (n - spec.bias() * period / (2.0 * PI)).abs() <= 1.0;
        let grid_bias = 2.0 * PI * n / period;
        let current = mean_charge(&model).regularized / period;
        worst = worst.max((current - s.conductance() * grid_bias).abs());
    }
    outcome(
        worst <= 1e-10 && window_ok,
        format!("max |<Q>/T - G V| = {worst:.2e} (tol 1e-10), |N - VT/2pi| <= 1: {window_ok}"),
    )
}

fn c4_johnson_nyquist() -> Outcome {
    let beta = 1.0;
    let s = ScatteringMatrix::from_transmission(0.3).unwrap();
    let want = 2.0 * s.conductance() / beta;
    let fwhm = 4.0 * (2f64).sqrt().acosh() / beta;
    let rel = |period: f64, cutoff: f64| {
        let spec = TwoCircleSpec::new(s, period, 0.0, 0.0, cutoff);
        let model = thermal_two_circle(&spec, beta).unwrap();
        let k2 = cumulants(&model, Variant::LesLev, 2).unwrap().get(2);
        ((k2 / period - want) / want).abs()
    };
    let period = 400.0;
    let points = (fwhm / (2.0 * PI / period)).floor();
    let err = rel(period, 10.0 / beta);
    let err_half = rel(2.0 * period, 10.0 / beta);
    let coarse: Vec<f64> = [4.0, 2.0, 1.0]
        .iter()
        .map(|h| rel(2.0 * PI / h, 30.0 / beta))
        .collect();
    let decreasing = coarse.windows(2).all(|w| w[1] < w[0]);
    outcome(
        points >= 200.0 && err <= 0.05 && err_half <= err && decreasing,
        format!(
            "{points} points in thermal width, rel err {err:.2e} -> {err_half:.2e} at half spacing (tol 5%); \
             spacing 4,2,1/beta: {:.1e}, {:.1e}, {:.1e}",
            coarse[0], coarse[1], coarse[2]
        ),
    )
}

fn c5_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for model in commuting_models(100) {
        let eval = ChiEvaluator::new(&model, Variant::LesLev).unwrap();
        let fock = FockModel::new(&model).unwrap();
        for l in grid(32) {
            worst = worst.max((eval.chi(l).unwrap() - fock.chi_two_measurement(l)).norm());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && elapsed < Duration::from_secs(120),
        format!("100 models d <= 8: max |chi_LL - oracle| = {worst:.2e} (tol 1e-9), {elapsed:.2?}"),
    )
}

fn c6_fock_trace() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let d = 1 + i % 8;
        let scale = rng.random_range(0.1..1.0);
        let m = random_matrix(&mut rng, d).scale(scale);
        let lhs = gamma(&m).unwrap().trace();
        let rhs = log_det(&(identity(d) + &m)).unwrap().value();
        worst = worst.max((lhs - rhs).norm() / rhs.norm());
    }
    outcome(
        worst <= 1e-9,
        format!("200 instances: max rel |Tr G(M) - det(1+M)| = {worst:.2e} (tol 1e-9)"),
    )
}

fn c7_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for model in commuting_models(100) {
        worst = worst.max(regularization_identity_check(&model, &DEFAULT_PROBES).unwrap());
    }
    let spec = window_spec(0.3, 10);
    let pure = cutoff_sweep(
        &SweepSpec::Pure { spec },
        &[12.7, 25.4, 50.8],
        &DEFAULT_PROBES,
    )
    .unwrap();
    let thermal_spec = TwoCircleSpec::new(spec.s, 20.0, 1.0, -1.0, 12.0);
    let thermal = cutoff_sweep(
        &SweepSpec::Thermal {
            spec: thermal_spec,
            beta: 2.0,
        },
        &[12.0, 24.0, 48.0],
        &DEFAULT_PROBES,
    )
    .unwrap();
    worst = worst
        .max(pure.max_identity_deviation())
        .max(thermal.max_identity_deviation());
    outcome(
        worst <= 1e-9,
        format!("models and sweep cutoffs: max deviation {worst:.2e} (tol 1e-9)"),
    )
}

fn c8_particle_hole() -> Outcome {
    let mut worst: f64 = 0.0;
    for model in all_kinds(100, 800) {
        let flipped = model.particle_hole();
        for variant in [Variant::Regularized, Variant::Collapse] {
            let a = ChiEvaluator::new(&model, variant).unwrap();
            let b = ChiEvaluator::new(&flipped, variant).unwrap();
            for &l in &[0.4, 1.3, 2.9, 4.4] {
                worst = worst.max((a.chi(l).unwrap() - b.chi(-l).unwrap()).norm());
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("100 models: max |chi_rho(l) - chi_rho'(-l)| = {worst:.2e} (tol 1e-9)"),
    )
}

fn c9_noise_split() -> Outcome {
    let (mut min_term, mut pure_thermal, mut sum_dev) = (f64::INFINITY, 0.0f64, 0.0f64);
    for model in all_kinds(500, 2000) {
        let split = noise_split(&model);
        min_term = min_term.min(split.thermal).min(split.shot);
        if model.is_pure() {
            pure_thermal = pure_thermal.max(split.thermal.abs());
        }
        sum_dev = sum_dev.max((split.total() - noise_trace_formula(&model)).abs());
    }
    outcome(
        min_term >= -1e-10 && pure_thermal <= 1e-10 && sum_dev <= 1e-10,
        format!("500 models: min term {min_term:.2e}, pure thermal {pure_thermal:.2e}, |sum - trace| {sum_dev:.2e}"),
    )
}

fn c10_separation() -> Outcome {
    let model = random_model(SEPARATION_SEED, SEPARATION_DIM, ModelKind::MixedCommuting).unwrap();
    let a = cumulants(&model, Variant::LesLev, 3).unwrap();
    let b = cumulants(&model, Variant::SingleMeasurement, 3).unwrap();
    let d: Vec<f64> = (1..=3).map(|k| (a.get(k) - b.get(k)).abs()).collect();
    outcome(
        d[0] <= 1e-6 && d[1] <= 1e-6 && d[2] > 1e-4,
        format!(
            "seed {SEPARATION_SEED} d={SEPARATION_DIM}: |dk1| {:.1e}, |dk2| {:.1e} (tol 1e-6), |dk3| {:.3e} (> 1e-4)",
            d[0], d[1], d[2]
        ),
    )
}

fn c11_negativity() -> Outcome {
    let model = random_model(NEGATIVITY_SEED, NEGATIVITY_DIM, ModelKind::MixedGeneral).unwrap();
    let required = 4 * model.dim() + 4;
    let spin = distribution_from_chi(&sample_chi(&model, Variant::SpinCoupling, required).unwrap())
        .unwrap();
    let mut reference_min = f64::INFINITY;
    for seed in 0..20 {
        let reference =
            random_model(seed, 3 + seed as usize % 4, ModelKind::MixedCommuting).unwrap();
        for variant in [Variant::LesLev, Variant::Regularized] {
            let s = sample_chi(&reference, variant, 2 * reference.dim() + 2).unwrap();
            reference_min = reference_min.min(distribution_from_chi(&s).unwrap().min_entry());
        }
    }
    outcome(
        spin.min_entry() <= -1e-4 && reference_min > -1e-4 && spin.quasi,
        format!(
            "seed {NEGATIVITY_SEED} d={NEGATIVITY_DIM}: spin-coupling min entry {:.3e} (<= -1e-4); commuting references min {reference_min:.1e}",
            spin.min_entry()
        ),
    )
}

fn c12_moment_cumulant() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut roundtrip: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(1..=10);
        let kappa: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        roundtrip = roundtrip.max(round_trip_deviation(&kappa).unwrap());
    }
    let rate = 3.2;
    let poisson = cumulants_from_local(
        &LocalLogGrid::sample(&ClosedForm(move |l| poisson_chi(rate, l))).unwrap(),
        4,
    )
    .unwrap();
    let poisson_dev = poisson
        .values
        .iter()
        .map(|v| (v - rate).abs() / rate)
        .fold(0.0, f64::max);
    let m2 = cumulants_to_moments(&poisson.values).unwrap()[1];
    let poisson_m2 = (m2 - (rate + rate * rate)).abs() / (rate + rate * rate);

    let (t2, n) = (0.3, 10u32);
    let model = build_two_circle(&window_spec(t2, n)).unwrap();
    let samples: ChiSamples =
        sample_chi(&model, Variant::Regularized, 2 * model.dim() + 2).unwrap();
    let kappa = cumulants_from_chi(&samples, 4).unwrap();
    let nf = n as f64;
    let binomial = [
        nf * t2,
        nf * t2 * (1.0 - t2),
        nf * t2 * (1.0 - t2) * (1.0 - 2.0 * t2),
        nf * t2 * (1.0 - t2) * (1.0 - 6.0 * t2 * (1.0 - t2)),
    ];
    let binomial_dev = kappa
        .values
        .iter()
        .zip(binomial)
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);
    let from_cumulants = cumulants_to_moments(&kappa.values).unwrap();
    let direct = distribution_from_chi(&samples).unwrap().moments(4);
    let moments_dev = from_cumulants
        .iter()
        .zip(&direct)
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);
    outcome(
        roundtrip <= 1e-12 && poisson_dev <= 1e-6 && poisson_m2 <= 1e-6 && binomial_dev <= 1e-6 && moments_dev <= 1e-6,
        format!(
            "roundtrip {roundtrip:.1e} (1e-12), Poisson {poisson_dev:.1e}, <n^2> {poisson_m2:.1e}, binomial {binomial_dev:.1e}, moments vs pmf {moments_dev:.1e} (1e-6)"
        ),
    )
}

fn c13_cutoff() -> Outcome {
    let spec = window_spec(0.3, 10);
    let report = cutoff_sweep(
        &SweepSpec::Pure { spec },
        &[12.7, 25.4, 50.8],
        &DEFAULT_PROBES,
    )
    .unwrap();
    let drift = report.chi_drift();
    let occupations: Vec<f64> = report.records.iter().map(|r| r.lead_occupation).collect();
    outcome(
        drift <= 1e-10 && report.occupation_strictly_increasing(),
        format!("cutoffs 12.7..50.8: chi_reg drift {drift:.2e} (tol 1e-10), tr(rho Q) = {occupations:?}"),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 13] = [
        ("binomial reproduction", c1_binomial),
        ("quantum shot noise", c2_shot_noise),
        ("Ohm's law", c3_ohm),
        ("Johnson-Nyquist", c4_johnson_nyquist),
        ("oracle equivalence", c5_oracle),
        ("Tr Gamma(M) = det(1+M)", c6_fock_trace),
        ("regularization identity", c7_identity),
        ("particle-hole symmetry", c8_particle_hole),
        ("noise split", c9_noise_split),
        ("alternative-approach separation", c10_separation),
        ("quasiprobability negativity", c11_negativity),
        ("moment-cumulant algebra", c12_moment_cumulant),
        ("cutoff independence", c13_cutoff),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

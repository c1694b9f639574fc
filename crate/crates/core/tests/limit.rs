use fcs::limit::{cutoff_sweep, trace_class_diagnostics, SweepSpec, DEFAULT_PROBES};
use fcs::linalg::{operator_norm, psd_sqrt, trace_norm};
use fcs::model::{random_model, ModelKind};
use fcs::scattering::{thermal_two_circle, ScatteringMatrix, TwoCircleSpec};

fn thermal(period: f64, cutoff: f64) -> TwoCircleSpec {
    TwoCircleSpec::new(
        ScatteringMatrix::from_transmission(0.3).unwrap(),
        period,
        1.0,
        -1.0,
        cutoff,
    )
}

#[test]
fn thermal_sweep_converges_once_the_tail_is_contained() {
    let beta = 2.0;
    let base = 1.0 + 25.0 / beta;
    let spec = thermal(20.0, base);
    let r = cutoff_sweep(
        &SweepSpec::Thermal { spec, beta },
        &[base, 2.0 * base, 4.0 * base],
        &DEFAULT_PROBES,
    )
    .unwrap();
    assert!(r.chi_drift() <= 1e-8, "{}", r.chi_drift());
    assert!(r.max_identity_deviation() <= 1e-9);
    assert!(r.occupation_strictly_increasing());

    // at ten thermal lengths the Fermi tail is still visible
    let base = 1.0 + 10.0 / beta;
    let r = cutoff_sweep(
        &SweepSpec::Thermal { spec, beta },
        &[base, 2.0 * base],
        &DEFAULT_PROBES,
    )
    .unwrap();
    assert!(r.chi_drift() > 1e-8);
}

#[test]
fn mixing_grows_with_lead_length_and_saturates_in_cutoff() {
    let beta = 2.0;
    let d = |period: f64, cutoff: f64| {
        trace_class_diagnostics(&thermal_two_circle(&thermal(period, cutoff), beta).unwrap())
            .unwrap()
    };
    let (a, b) = (d(20.0, 15.0), d(40.0, 15.0));
    assert!((b.d_mix / a.d_mix - 2.0).abs() < 1e-3);
    assert!((b.d_noise / a.d_noise - 2.0).abs() < 1e-3);
    let c = d(20.0, 30.0);
    assert!((c.d_mix - a.d_mix).abs() <= 1e-6 * a.d_mix);
    assert!((c.d_noise - a.d_noise).abs() <= 1e-6 * a.d_noise);
}

#[test]
fn noise_diagnostic_is_bounded_by_the_mixing_trace_norm() {
    let kinds = [
        ModelKind::PureCommuting,
        ModelKind::MixedCommuting,
        ModelKind::MixedGeneral,
    ];
    for seed in 0..60u64 {
        let m = random_model(seed, 2 + seed as usize % 7, kinds[seed as usize % 3]).unwrap();
        let d = trace_class_diagnostics(&m).unwrap();
        let mut op: f64 = 0.0;
        let mut mix = 0.0;
        for s in m.sectors() {
            op = op.max(operator_norm(&s.delta_q()));
            mix += trace_norm(&psd_sqrt(&(&s.rho * s.rho_prime())).unwrap()).unwrap();
        }
        assert!(d.d_noise <= op * mix + 1e-10, "seed {seed}");
        assert!(d.d_rho >= 0.0 && d.d_sqrt >= 0.0 && d.d_mix >= 0.0 && d.d_noise >= 0.0);
    }
}

use dfesim_core::*;
use proptest::prelude::*;

const MV: f64 = 1e-3;

fn link(tau_ui: f64, v_of_mv: f64, noise_mv: f64) -> SimConfig {
    SimConfig {
        channel: ChannelConfig {
            tau_ui,
            ..Default::default()
        },
        cmp: ComparatorConfig {
            v_of: v_of_mv * MV,
            noise_sigma: noise_mv * MV,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn quick_sweep() -> SweepConfig {
    SweepConfig {
        n_phases: 16,
        per_phase_bits: 4000,
        threshold: 1e-3,
    }
}

#[test]
fn calibration_saturates_at_range_ends() {
    let high = calibrate_offset(&link(0.5, 14.0, 1.0), &quick_sweep()).unwrap();
    assert_eq!(high.best_reg_of, 8);
    let low = calibrate_offset(&link(0.5, -14.0, 1.0), &quick_sweep()).unwrap();
    assert_eq!(low.best_reg_of, 23);
}

#[test]
fn calibration_without_offset_stays_central() {
    let r = calibrate_offset(&link(0.5, 0.0, 1.0), &quick_sweep()).unwrap();
    assert!(matches!(r.best_reg_of, 15 | 16), "{}", r.best_reg_of);
    assert_eq!(r.widths_by_code.len(), 16);
}

#[test]
fn closed_eye_fails_calibration() {
    let err = calibrate_offset(&link(0.5, 0.0, 200.0), &quick_sweep()).unwrap_err();
    match err {
        Error::CalibrationFailed { widths } => assert!(widths.values().all(|&w| w == 0.0)),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn tap_sweep_covers_every_beta() {
    let widths = tap_sweep(&link(0.6213, 0.0, 1.0), 15, &quick_sweep()).unwrap();
    assert_eq!(
        widths.keys().copied().collect::<Vec<_>>(),
        (0..=8).collect::<Vec<u8>>()
    );
    assert!(widths[&8] > widths[&0]);
}

#[test]
fn isi_free_channel_has_flat_tap_response() {
    // with a very fast pole there is no postcursor to cancel
    let cfg = link(0.05, 0.0, 0.5);
    let b0 = ber_estimate(&cfg.with_taps(TapCodes::new(15, 0).unwrap()), 0.5).unwrap();
    let b2 = ber_estimate(&cfg.with_taps(TapCodes::new(15, 2).unwrap()), 0.5).unwrap();
    assert_eq!((b0.errors, b2.errors), (0, 0));
}

#[test]
fn more_noise_more_errors() {
    let quiet = ber_estimate(&link(1.0, 0.0, 2.0), 0.5).unwrap();
    let loud = ber_estimate(&link(1.0, 0.0, 8.0), 0.5).unwrap();
    assert!(loud.errors > quiet.errors);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn width_grows_with_threshold(
        bers in prop::collection::vec(0.0f64..0.5, 8..40),
        lo in 1e-4f64..0.1,
        factor in 1.0f64..10.0,
    ) {
        let n = bers.len();
        let phases: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let counts: Vec<BerCount> = bers
            .iter()
            .map(|b| BerCount { errors: (b * 1e6).round() as u64, bits: 1_000_000 })
            .collect();
        let curve = BathtubCurve::from_counts(phases, &counts);
        let w_lo = bathtub_width(&curve, lo).unwrap();
        let w_hi = bathtub_width(&curve, lo * factor).unwrap();
        prop_assert!((0.0..=1.0).contains(&w_lo));
        prop_assert!(w_hi + 1e-12 >= w_lo, "{} < {}", w_hi, w_lo);
    }
}

//! Behavioral transmitter and interconnect.
//!
//! The launch path is a one-tap FIR pre-emphasis normalized by `1/(1+w)` so
//! the launched level never exceeds the configured amplitude. The line is a
//! single real pole, discretized exactly for a zero-order-hold input:
//!
//! ```text
//! y[k] = a * y[k-1] + (1 - a) * x[k],   a = exp(-1 / (tau_ui * samples_per_ui))
//! ```
//!
//! followed by an integer-sample transport delay.

use crate::error::{Error, Result};
use crate::signal::{BitSequence, Waveform, DEFAULT_UI_SECONDS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Pole time constant in unit intervals.
    pub tau_ui: f64,
    /// Pre-emphasis weight `w`, in `[0, 1)`.
    pub ffe_tap: f64,
    /// Differential launch amplitude in volts.
    pub amplitude: f64,
    /// Transport delay in unit intervals.
    pub delay_ui: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            tau_ui: 1.0,
            ffe_tap: 0.0,
            amplitude: 0.030,
            delay_ui: 0.0,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_ui > 0.0 && self.tau_ui.is_finite()) {
            return Err(Error::out_of_range("channel.tau_ui", self.tau_ui, "> 0"));
        }
        check_ffe_tap(self.ffe_tap)?;
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::out_of_range(
                "channel.amplitude",
                self.amplitude,
                "> 0",
            ));
        }
        if !(self.delay_ui >= 0.0 && self.delay_ui.is_finite()) {
            return Err(Error::out_of_range(
                "channel.delay_ui",
                self.delay_ui,
                ">= 0",
            ));
        }
        Ok(())
    }

    /// Per-sample pole coefficient `a`.
    pub fn pole(&self, samples_per_ui: usize) -> f64 {
        (-1.0 / (self.tau_ui * samples_per_ui as f64)).exp()
    }

    pub fn delay_samples(&self, samples_per_ui: usize) -> usize {
        (self.delay_ui * samples_per_ui as f64).round() as usize
    }
}

fn check_ffe_tap(w: f64) -> Result<()> {
    if !(0.0..1.0).contains(&w) {
        return Err(Error::out_of_range("channel.ffe_tap", w, "[0, 1)"));
    }
    Ok(())
}

/// `t[n] = (d[n] - w*d[n-1]) / (1 + w)` with `d[-1] = +1`.
pub fn tx_preemphasis(bits: &BitSequence, w: f64) -> Result<Vec<f64>> {
    check_ffe_tap(w)?;
    let norm = 1.0 + w;
    let mut prev = 1.0;
    Ok(bits
        .symbols()
        .iter()
        .map(|&d| {
            let d = f64::from(d);
            let t = (d - w * prev) / norm;
            prev = d;
            t
        })
        .collect())
}

/// Upsamples `levels * amplitude` with a zero-order hold and passes the
/// result through the single-pole line. The output has the same length as
/// the held input; the delay shifts the tail out.
pub fn apply_channel(
    levels: &[f64],
    cfg: &ChannelConfig,
    samples_per_ui: usize,
) -> Result<Waveform> {
    cfg.validate()?;
    if samples_per_ui == 0 {
        return Err(Error::out_of_range("samples_per_ui", 0, ">= 1"));
    }
    let a = cfg.pole(samples_per_ui);
    let b = 1.0 - a;
    let len = levels.len() * samples_per_ui;
    let delay = cfg.delay_samples(samples_per_ui).min(len);

    let mut out = vec![0.0; len];
    let mut y = 0.0;
    let mut k = delay;
    'outer: for &level in levels {
        let x = level * cfg.amplitude;
        for _ in 0..samples_per_ui {
            if k >= len {
                break 'outer;
            }
            y = a * y + b * x;
            out[k] = y;
            k += 1;
        }
    }
    Waveform::new(out, samples_per_ui, DEFAULT_UI_SECONDS)
}

/// Channel response to one isolated `+1` UI.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseResponse {
    pub waveform: Waveform,
    /// Sample index of the peak.
    pub cursor_index: usize,
}

impl PulseResponse {
    /// Sample at `index`, zero outside the recorded window.
    pub fn at(&self, index: isize) -> f64 {
        if index < 0 {
            return 0.0;
        }
        self.waveform
            .samples()
            .get(index as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// UI-spaced samples starting at absolute sample `start`, up to the end
    /// of the recorded window.
    pub fn taps_from(&self, start: usize) -> Vec<f64> {
        self.waveform
            .samples()
            .iter()
            .skip(start)
            .step_by(self.waveform.samples_per_ui())
            .copied()
            .collect()
    }
}

pub fn pulse_response(
    cfg: &ChannelConfig,
    n_ui: usize,
    samples_per_ui: usize,
) -> Result<PulseResponse> {
    if n_ui < 2 {
        return Err(Error::out_of_range("n_ui", n_ui, ">= 2"));
    }
    let mut levels = vec![0.0; n_ui];
    levels[0] = 1.0;
    let waveform = apply_channel(&levels, cfg, samples_per_ui)?;
    let cursor_index = waveform
        .samples()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
            if v > best.1 {
                (i, v)
            } else {
                best
            }
        })
        .0;
    Ok(PulseResponse {
        waveform,
        cursor_index,
    })
}

/// UI-spaced cursor and postcursor taps `h0, h1, ...`, sampled
/// `phase_ui` of a UI after the pulse peak.
pub fn isi_taps(p: &PulseResponse, phase_ui: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&phase_ui) {
        return Err(Error::out_of_range("phase_ui", phase_ui, "[0, 1)"));
    }
    let spp = p.waveform.samples_per_ui();
    let offset = (phase_ui * spp as f64).round() as usize;
    Ok(p.taps_from(p.cursor_index + offset))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const E: f64 = std::f64::consts::E;

    fn cfg(tau_ui: f64) -> ChannelConfig {
        ChannelConfig {
            tau_ui,
            ..Default::default()
        }
    }

    #[test]
    fn preemphasis_identity_at_zero_weight() {
        let bits = BitSequence::new(vec![1, -1, -1, 1]).unwrap();
        assert_eq!(
            tx_preemphasis(&bits, 0.0).unwrap(),
            vec![1.0, -1.0, -1.0, 1.0]
        );
    }

    #[test]
    fn preemphasis_hand_values() {
        let bits = BitSequence::new(vec![1, 1]).unwrap();
        let t = tx_preemphasis(&bits, 0.25).unwrap();
        assert_relative_eq!(t[0], 0.6, epsilon = 1e-15);
        assert_relative_eq!(t[1], 0.6, epsilon = 1e-15);

        let alt =
            BitSequence::new((0..10).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect()).unwrap();
        let t = tx_preemphasis(&alt, 0.25).unwrap();
        for v in &t[1..] {
            assert_relative_eq!(v.abs(), 1.0, epsilon = 1e-15);
        }
        assert!(t.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn preemphasis_rejects_bad_weight() {
        let bits = BitSequence::new(vec![1]).unwrap();
        assert!(tx_preemphasis(&bits, 1.0).is_err());
        assert!(tx_preemphasis(&bits, -0.1).is_err());
    }

    #[test]
    fn dc_gain_is_unity() {
        let c = cfg(1.5);
        let level = -0.7;
        let n_ui = 40;
        let w = apply_channel(&vec![level; n_ui], &c, 16).unwrap();
        // after 20 time constants
        let k = (20.0 * 1.5 * 16.0) as usize;
        for &v in &w.samples()[k..] {
            assert!((v - level * c.amplitude).abs() < 1e-9);
        }
    }

    #[test]
    fn wideband_limit_matches_hold() {
        let c = cfg(1e-6);
        let levels = [1.0, -1.0, 0.5, -0.25];
        let w = apply_channel(&levels, &c, 8).unwrap();
        for (k, &v) in w.samples().iter().enumerate() {
            let x = levels[k / 8] * c.amplitude;
            assert!(((v - x) / x).abs() < 1e-6);
        }
    }

    #[test]
    fn pulse_analytic_rc_values() {
        let c = cfg(1.0);
        let spp = 32;
        let p = pulse_response(&c, 8, spp).unwrap();
        let s = p.waveform.samples();
        let h0 = (1.0 - 1.0 / E) * c.amplitude;
        let h1 = (1.0 - 1.0 / E) / E * c.amplitude;
        assert!((s[spp - 1] - h0).abs() < 1e-12);
        assert!((s[2 * spp - 1] - h1).abs() < 1e-12);
        assert_eq!(p.cursor_index, spp - 1);
    }

    #[test]
    fn tap_ratios() {
        for (tau, ratio) in [(1.0, (-1.0f64).exp()), (0.5, (-2.0f64).exp())] {
            let p = pulse_response(&cfg(tau), 10, 32).unwrap();
            let h = isi_taps(&p, 0.0).unwrap();
            assert_relative_eq!(h[1] / h[0], ratio, max_relative = 1e-9);
            for k in 1..h.len() - 1 {
                assert_relative_eq!(h[k + 1] / h[k], ratio, max_relative = 1e-9);
            }
            assert!(h.iter().all(|&v| v <= h[0]));
        }
    }

    #[test]
    fn pulse_bounded_and_causal() {
        let c = ChannelConfig {
            delay_ui: 1.5,
            ..cfg(0.7)
        };
        let p = pulse_response(&c, 12, 16).unwrap();
        assert!(p
            .waveform
            .samples()
            .iter()
            .all(|&v| (0.0..=c.amplitude).contains(&v)));
        // one UI before the pulse starts rising
        let precursor = p.at(p.cursor_index as isize - 16);
        assert_eq!(precursor, 0.0);
        assert_eq!(p.cursor_index, 24 + 15);
    }

    #[test]
    fn taps_sum_to_steady_state() {
        // geometric remainder: amplitude * exp(-n) after n UI-spaced taps
        let c = cfg(1.0);
        for n_ui in [2, 4, 8, 16] {
            let p = pulse_response(&c, n_ui, 16).unwrap();
            let sum: f64 = isi_taps(&p, 0.0).unwrap().iter().sum();
            let gap = c.amplitude - sum;
            assert_relative_eq!(
                gap,
                c.amplitude * (-(n_ui as f64)).exp(),
                max_relative = 1e-9
            );
        }
        let p = pulse_response(&c, 60, 16).unwrap();
        let sum: f64 = isi_taps(&p, 0.0).unwrap().iter().sum();
        assert!((sum - c.amplitude).abs() < 1e-15);
    }

    #[test]
    fn isi_taps_rejects_bad_phase() {
        let p = pulse_response(&cfg(1.0), 4, 8).unwrap();
        assert!(isi_taps(&p, 1.0).is_err());
        assert!(isi_taps(&p, -0.1).is_err());
    }

    #[test]
    fn pulse_requires_two_ui() {
        assert!(pulse_response(&cfg(1.0), 1, 8).is_err());
    }

    #[test]
    fn delay_shifts_output() {
        let levels = [1.0, -1.0, 1.0, 1.0];
        let base = apply_channel(&levels, &cfg(0.8), 8).unwrap();
        let c = ChannelConfig {
            delay_ui: 0.5,
            ..cfg(0.8)
        };
        let delayed = apply_channel(&levels, &c, 8).unwrap();
        assert_eq!(&delayed.samples()[..4], &[0.0; 4]);
        assert_eq!(&delayed.samples()[4..], &base.samples()[..base.len() - 4]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn superposition(
                x in proptest::collection::vec(-1.0f64..1.0, 1..40),
                z in proptest::collection::vec(-1.0f64..1.0, 40),
                a in -3.0f64..3.0,
                b in -3.0f64..3.0,
                tau in 0.1f64..4.0,
            ) {
                let c = cfg(tau);
                let z = &z[..x.len()];
                let mix: Vec<f64> = x.iter().zip(z).map(|(p, q)| a * p + b * q).collect();
                let lhs = apply_channel(&mix, &c, 8).unwrap();
                let wx = apply_channel(&x, &c, 8).unwrap();
                let wz = apply_channel(z, &c, 8).unwrap();
                let scale = lhs.samples().iter().fold(1e-3f64, |m, v| m.max(v.abs()));
                for ((l, p), q) in lhs.samples().iter().zip(wx.samples()).zip(wz.samples()) {
                    prop_assert!((l - (a * p + b * q)).abs() <= 1e-9 * scale);
                }
            }
        }
    }
}

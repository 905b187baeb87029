//! Sense-amplifier comparator with switched-capacitor decision feedback.
//!
//! Each UI the comparator resolves
//!
//! ```text
//! x[n] = v_main[n] + polarity * g_fb * settle * v_fb[n] - v_of + noise[n]
//! ```
//!
//! where `v_fb[n]` is the differential pair picked by the previous decision:
//! `(v_h1, v_l2)` after a `+1`, `(v_l1, v_h2)` after a `-1`. With subtractive
//! polarity this is the one-tap recurrence `y[n] = Q(d[n] - alpha * y[n-1])`
//! plus a constant threshold shift that cancels the comparator offset.

use crate::bias_dac::BiasVoltages;
use crate::error::{Error, Result};
use crate::signal::{BitSequence, Waveform};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorConfig {
    /// Inherent input-referred offset, volts.
    pub v_of: f64,
    /// Input-referred noise standard deviation per decision, volts.
    pub noise_sigma: f64,
    /// Feedback-port gain relative to the main input pair.
    pub g_fb: f64,
    /// `-1` when the feedback port subtracts from the main input.
    pub fb_polarity: i8,
    /// Decision returned when `x` is exactly zero.
    pub tie_break: i8,
}

impl Default for ComparatorConfig {
    fn default() -> Self {
        ComparatorConfig {
            v_of: 0.0,
            noise_sigma: 0.0,
            g_fb: 0.5,
            fb_polarity: -1,
            tie_break: 1,
        }
    }
}

impl ComparatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.v_of.is_finite() {
            return Err(Error::invalid("cmp.v_of must be finite"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::out_of_range(
                "cmp.noise_sigma",
                self.noise_sigma,
                ">= 0",
            ));
        }
        if !(self.g_fb > 0.0 && self.g_fb.is_finite()) {
            return Err(Error::out_of_range("cmp.g_fb", self.g_fb, "> 0"));
        }
        if self.fb_polarity != 1 && self.fb_polarity != -1 {
            return Err(Error::out_of_range(
                "cmp.fb_polarity",
                self.fb_polarity,
                "{-1, +1}",
            ));
        }
        if self.tie_break != 1 && self.tie_break != -1 {
            return Err(Error::out_of_range(
                "cmp.tie_break",
                self.tie_break,
                "{-1, +1}",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    /// Decisions between a resolved bit and the feedback it drives.
    pub latency_ui: usize,
    /// Fraction of the selected feedback differential that settles, `(0, 1]`.
    pub settle_factor: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            latency_ui: 1,
            settle_factor: 1.0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latency_ui == 0 {
            return Err(Error::out_of_range("loop.latency_ui", 0, ">= 1"));
        }
        if !(self.settle_factor > 0.0 && self.settle_factor <= 1.0) {
            return Err(Error::out_of_range(
                "loop.settle_factor",
                self.settle_factor,
                "(0, 1]",
            ));
        }
        Ok(())
    }
}

/// Per-UI record of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecisionTrace {
    pub decisions: Vec<i8>,
    /// Main-input voltage at the sampling instant.
    pub sampled_inputs: Vec<f64>,
    /// Settled differential feedback voltage present during the decision.
    pub feedback_applied: Vec<f64>,
}

impl DecisionTrace {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn decision_sequence(&self) -> Result<BitSequence> {
        BitSequence::new(self.decisions.clone())
    }
}

/// Feedback pair `(v_fb_plus, v_fb_minus)` driven by the previous decision.
pub fn select_feedback(y_prev: i8, b: &BiasVoltages) -> (f64, f64) {
    if y_prev > 0 {
        (b.v_h1, b.v_l2)
    } else {
        (b.v_l1, b.v_h2)
    }
}

/// Resolves one decision. `v_fb_diff` is the settled feedback differential.
pub fn decide(v_main: f64, v_fb_diff: f64, cfg: &ComparatorConfig, noise_sample: f64) -> i8 {
    let x = v_main + f64::from(cfg.fb_polarity) * cfg.g_fb * v_fb_diff - cfg.v_of + noise_sample;
    if x < 0.0 {
        -1
    } else if x > 0.0 {
        1
    } else {
        cfg.tie_break
    }
}

/// Sample offset within a UI for a sampling phase in `[0, 1)`.
pub fn phase_offset(phase_ui: f64, samples_per_ui: usize) -> Result<usize> {
    if !(0.0..1.0).contains(&phase_ui) {
        return Err(Error::out_of_range("phase_ui", phase_ui, "[0, 1)"));
    }
    Ok((phase_ui * samples_per_ui as f64).round() as usize)
}

/// Runs the closed loop over every UI of `w`, sampling at
/// `n * spp + round(phase_ui * spp)`. Decisions before the start are taken
/// as `+1`. A sampling instant that falls past the last sample ends the run.
pub fn run_dfe(
    w: &Waveform,
    phase_ui: f64,
    bias: &BiasVoltages,
    cmp: &ComparatorConfig,
    loop_cfg: &LoopConfig,
    noise_stream: &[f64],
) -> Result<DecisionTrace> {
    cmp.validate()?;
    loop_cfg.validate()?;
    let spp = w.samples_per_ui();
    let offset = phase_offset(phase_ui, spp)?;
    let n_ui = w.n_ui();
    if n_ui == 0 {
        return Err(Error::invalid("waveform is shorter than one UI"));
    }
    if noise_stream.len() < n_ui {
        return Err(Error::invalid(format!(
            "noise stream has {} samples, need {}",
            noise_stream.len(),
            n_ui
        )));
    }

    let samples = w.samples();
    let n_dec = n_ui.min((samples.len() - offset).div_ceil(spp));
    let latency = loop_cfg.latency_ui;
    let fb_high = loop_cfg.settle_factor * bias.diff_after_high();
    let fb_low = loop_cfg.settle_factor * bias.diff_after_low();

    let mut trace = DecisionTrace {
        decisions: Vec::with_capacity(n_dec),
        sampled_inputs: Vec::with_capacity(n_dec),
        feedback_applied: Vec::with_capacity(n_dec),
    };
    for n in 0..n_dec {
        let y_prev = if n >= latency {
            trace.decisions[n - latency]
        } else {
            1
        };
        let v_fb = if y_prev > 0 { fb_high } else { fb_low };
        let v_main = samples[n * spp + offset];
        trace
            .decisions
            .push(decide(v_main, v_fb, cmp, noise_stream[n]));
        trace.sampled_inputs.push(v_main);
        trace.feedback_applied.push(v_fb);
    }
    Ok(trace)
}

/// Direct transcription of the one-tap recurrence, used as an oracle:
/// `y[n] = Q(sampled[n] - alpha_eff * y[n-1] - v_residual + noise[n])`,
/// `y[-1] = +1`, `Q(0) = +1`.
pub fn reference_dfe(
    sampled: &[f64],
    alpha_eff: f64,
    v_residual: f64,
    noise_stream: &[f64],
) -> Result<BitSequence> {
    if sampled.len() != noise_stream.len() {
        return Err(Error::invalid(
            "sampled inputs and noise stream differ in length",
        ));
    }
    let mut y_prev = 1.0;
    let mut out = Vec::with_capacity(sampled.len());
    for (&d, &e) in sampled.iter().zip(noise_stream) {
        let x = d - alpha_eff * y_prev - v_residual + e;
        let y = if x < 0.0 { -1 } else { 1 };
        out.push(y);
        y_prev = f64::from(y);
    }
    BitSequence::new(out)
}

/// Equivalent one-tap parameters of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoop {
    /// Tap subtracted per unit of the previous decision.
    pub alpha_eff: f64,
    /// Net threshold shift: comparator offset less the correction.
    pub v_residual: f64,
}

pub fn closed_loop(
    bias: &BiasVoltages,
    cmp: &ComparatorConfig,
    loop_cfg: &LoopConfig,
) -> ClosedLoop {
    let k = f64::from(cmp.fb_polarity) * cmp.g_fb * loop_cfg.settle_factor;
    ClosedLoop {
        alpha_eff: -k * bias.alpha_raw(),
        v_residual: cmp.v_of - k * bias.offset_raw(),
    }
}

/// Comparator input over time: the channel waveform with each UI's held
/// feedback and the offset applied. Covers the UIs present in `trace`.
pub fn comparator_input(
    w: &Waveform,
    trace: &DecisionTrace,
    cmp: &ComparatorConfig,
) -> Result<Waveform> {
    let spp = w.samples_per_ui();
    let k = f64::from(cmp.fb_polarity) * cmp.g_fb;
    let n = trace.len().min(w.n_ui());
    let samples = w.samples()[..n * spp]
        .chunks(spp)
        .zip(&trace.feedback_applied)
        .flat_map(|(ui, &fb)| ui.iter().map(move |v| v + k * fb - cmp.v_of))
        .collect();
    Waveform::new(samples, spp, w.ui_seconds())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoopTiming {
    /// Loop closes within one UI, with `margin_s` to spare.
    Ok { margin_s: f64 },
    /// Loop delay exceeds the UI by `-margin_s`.
    Violation { margin_s: f64 },
}

impl LoopTiming {
    pub fn is_ok(&self) -> bool {
        matches!(self, LoopTiming::Ok { .. })
    }

    pub fn margin_s(&self) -> f64 {
        match *self {
            LoopTiming::Ok { margin_s } | LoopTiming::Violation { margin_s } => margin_s,
        }
    }
}

pub fn loop_timing_check(loop_delay_s: f64, ui_s: f64) -> Result<LoopTiming> {
    if !(loop_delay_s > 0.0 && ui_s > 0.0) {
        return Err(Error::invalid("loop delay and UI must both be positive"));
    }
    let margin_s = ui_s - loop_delay_s;
    Ok(if loop_delay_s <= ui_s {
        LoopTiming::Ok { margin_s }
    } else {
        LoopTiming::Violation { margin_s }
    })
}

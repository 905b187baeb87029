//! Stimulus generation: PRBS bit streams and oversampled NRZ waveforms.
//!
//! Symbols use the bipolar alphabet of the slicer, `+1` and `-1`. A PRBS
//! output bit of `1` maps to `+1` and `0` maps to `-1`.

use crate::error::{Error, Result};

/// Default unit interval, 1 ns (1 Gb/s).
pub const DEFAULT_UI_SECONDS: f64 = 1e-9;

/// A non-empty sequence of bipolar symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitSequence(Vec<i8>);

impl BitSequence {
    pub fn new(symbols: Vec<i8>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("bit sequence must not be empty"));
        }
        if let Some(bad) = symbols.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!("symbol {bad} is not +1 or -1")));
        }
        Ok(BitSequence(symbols))
    }

    /// Maps `true` to `+1` and `false` to `-1`.
    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Result<Self> {
        Self::new(bits.into_iter().map(|b| if b { 1 } else { -1 }).collect())
    }

    pub fn symbols(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }
}

impl AsRef<[i8]> for BitSequence {
    fn as_ref(&self) -> &[i8] {
        &self.0
    }
}

/// Fibonacci LFSR taps (1-based register positions) for each supported order.
///
/// | order | polynomial          |
/// |-------|---------------------|
/// | 7     | x^7 + x^6 + 1       |
/// | 9     | x^9 + x^5 + 1       |
/// | 15    | x^15 + x^14 + 1     |
/// | 23    | x^23 + x^18 + 1     |
/// | 31    | x^31 + x^28 + 1     |
pub const PRBS_TAPS: [(u32, u32, u32); 5] = [
    (7, 7, 6),
    (9, 9, 5),
    (15, 15, 14),
    (23, 23, 18),
    (31, 31, 28),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrbsConfig {
    pub order: u32,
    pub seed: u32,
}

impl PrbsConfig {
    pub fn new(order: u32, seed: u32) -> Result<Self> {
        let cfg = PrbsConfig { order, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Seeds the register with all ones.
    pub fn all_ones(order: u32) -> Result<Self> {
        let mask = if order >= 32 {
            u32::MAX
        } else {
            (1u32 << order) - 1
        };
        Self::new(order, mask)
    }

    fn taps(&self) -> Option<(u32, u32)> {
        PRBS_TAPS
            .iter()
            .find(|(order, _, _)| *order == self.order)
            .map(|&(_, a, b)| (a, b))
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps().is_none() {
            return Err(Error::out_of_range(
                "prbs.order",
                self.order,
                "{7, 9, 15, 23, 31}",
            ));
        }
        let mask = (1u64 << self.order) - 1;
        if self.seed == 0 || u64::from(self.seed) > mask {
            return Err(Error::out_of_range("prbs.seed", self.seed, "1..2^order"));
        }
        Ok(())
    }

    /// Sequence period, `2^order - 1`.
    pub fn period(&self) -> u64 {
        (1u64 << self.order) - 1
    }
}

impl Default for PrbsConfig {
    fn default() -> Self {
        PrbsConfig {
            order: 7,
            seed: 0x7f,
        }
    }
}

/// Maximal-length LFSR, yielding one output bit per step.
#[derive(Debug, Clone)]
pub struct Lfsr {
    state: u32,
    mask: u32,
    tap_a: u32,
    tap_b: u32,
}

impl Lfsr {
    pub fn new(cfg: &PrbsConfig) -> Result<Self> {
        cfg.validate()?;
        let (tap_a, tap_b) = cfg.taps().expect("validated");
        Ok(Lfsr {
            state: cfg.seed,
            mask: ((1u64 << cfg.order) - 1) as u32,
            tap_a,
            tap_b,
        })
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    pub fn next_bit(&mut self) -> bool {
        let fb = ((self.state >> (self.tap_a - 1)) ^ (self.state >> (self.tap_b - 1))) & 1;
        self.state = ((self.state << 1) | fb) & self.mask;
        fb == 1
    }
}

impl Iterator for Lfsr {
    type Item = bool;

    fn next(&mut self) -> Option<bool> {
        Some(self.next_bit())
    }
}

pub fn prbs_generate(cfg: &PrbsConfig, n_bits: usize) -> Result<BitSequence> {
    if n_bits == 0 {
        return Err(Error::invalid("n_bits must be at least 1"));
    }
    let lfsr = Lfsr::new(cfg)?;
    BitSequence::from_bools(lfsr.take(n_bits))
}

/// Oversampled waveform of differential voltages.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    samples_per_ui: usize,
    ui_seconds: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, samples_per_ui: usize, ui_seconds: f64) -> Result<Self> {
        if samples_per_ui == 0 {
            return Err(Error::out_of_range("samples_per_ui", 0, ">= 1"));
        }
        if !(ui_seconds > 0.0 && ui_seconds.is_finite()) {
            return Err(Error::out_of_range("ui_seconds", ui_seconds, "> 0"));
        }
        if !samples.len().is_multiple_of(samples_per_ui) {
            return Err(Error::invalid(format!(
                "waveform length {} is not a multiple of samples_per_ui {}",
                samples.len(),
                samples_per_ui
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("waveform contains non-finite samples"));
        }
        Ok(Waveform {
            samples,
            samples_per_ui,
            ui_seconds,
        })
    }

    pub fn with_ui_seconds(mut self, ui_seconds: f64) -> Result<Self> {
        if !(ui_seconds > 0.0 && ui_seconds.is_finite()) {
            return Err(Error::out_of_range("ui_seconds", ui_seconds, "> 0"));
        }
        self.ui_seconds = ui_seconds;
        Ok(self)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_per_ui(&self) -> usize {
        self.samples_per_ui
    }

    pub fn ui_seconds(&self) -> f64 {
        self.ui_seconds
    }

    pub fn n_ui(&self) -> usize {
        self.samples.len() / self.samples_per_ui
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Holds each symbol for `samples_per_ui` samples at `symbol * amplitude`.
pub fn nrz_modulate(bits: &BitSequence, amplitude: f64, samples_per_ui: usize) -> Result<Waveform> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::out_of_range("amplitude", amplitude, "> 0"));
    }
    if samples_per_ui == 0 {
        return Err(Error::out_of_range("samples_per_ui", 0, ">= 1"));
    }
    let samples = bits
        .symbols()
        .iter()
        .flat_map(|&s| std::iter::repeat_n(f64::from(s) * amplitude, samples_per_ui))
        .collect();
    Waveform::new(samples, samples_per_ui, DEFAULT_UI_SECONDS)
}

//! BER estimation, bathtub curves, eye histograms and the two-step
//! calibration: sweep the offset code with the tap off, keep the code with
//! the widest bathtub, then sweep the tap at that code.
//!
//! A BER run is split into shards of `shard_bits` counted bits. Shard `i`
//! replays the global PRBS from bit `i * shard_bits`, prepends
//! `warmup_bits` that are simulated but not counted, and draws its
//! comparator noise from ChaCha stream `i` of `seed`. Shards are
//! independent, so counts merge by summation and parallel execution does
//! not change any result. The same noise draws are reused at every phase
//! and bias setting of a sweep.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bias_dac::{
    bias_for, BiasVoltages, DacConfig, TapCodes, BETA_MAX, REG_OF_MAX, REG_OF_MIN,
};
use crate::channel::{apply_channel, tx_preemphasis, ChannelConfig};
use crate::error::{Error, Result};
use crate::receiver::{
    closed_loop, phase_offset, run_dfe, ClosedLoop, ComparatorConfig, DecisionTrace, LoopConfig,
};
use crate::signal::{prbs_generate, BitSequence, PrbsConfig, Waveform, DEFAULT_UI_SECONDS};

/// Minimum oversampling for phase sweeps.
pub const MIN_SWEEP_SPP: usize = 8;
pub const DEFAULT_THRESHOLD_BER: f64 = 1e-3;

/// Everything needed for one closed-loop link run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub prbs: PrbsConfig,
    pub channel: ChannelConfig,
    pub cmp: ComparatorConfig,
    pub loop_cfg: LoopConfig,
    pub taps: TapCodes,
    pub dac: DacConfig,
    pub samples_per_ui: usize,
    /// Counted bits per BER estimate.
    pub n_bits: usize,
    /// Bits simulated ahead of every shard and discarded.
    pub warmup_bits: usize,
    pub shard_bits: usize,
    /// Sampling phase for single-phase runs.
    pub phase_ui: f64,
    pub ui_seconds: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            prbs: PrbsConfig::default(),
            channel: ChannelConfig::default(),
            cmp: ComparatorConfig::default(),
            loop_cfg: LoopConfig::default(),
            taps: TapCodes::default(),
            dac: DacConfig::default(),
            samples_per_ui: 32,
            n_bits: 100_000,
            warmup_bits: 32,
            shard_bits: 10_000,
            phase_ui: 0.5,
            ui_seconds: DEFAULT_UI_SECONDS,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.prbs.validate()?;
        self.channel.validate()?;
        self.cmp.validate()?;
        self.loop_cfg.validate()?;
        self.taps.validate()?;
        self.dac.validate()?;
        if self.samples_per_ui == 0 {
            return Err(Error::out_of_range("samples_per_ui", 0, ">= 1"));
        }
        if self.n_bits <= self.warmup_bits {
            return Err(Error::out_of_range("n_bits", self.n_bits, "> warmup_bits"));
        }
        if self.shard_bits == 0 {
            return Err(Error::out_of_range("shard_bits", 0, ">= 1"));
        }
        phase_offset(self.phase_ui, self.samples_per_ui)?;
        if !(self.ui_seconds > 0.0 && self.ui_seconds.is_finite()) {
            return Err(Error::out_of_range("ui_seconds", self.ui_seconds, "> 0"));
        }
        Ok(())
    }

    pub fn bias(&self) -> Result<BiasVoltages> {
        bias_for(&self.taps, &self.dac)
    }

    pub fn with_taps(&self, taps: TapCodes) -> Self {
        SimConfig {
            taps,
            ..self.clone()
        }
    }
}

/// Error and trial counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BerCount {
    pub errors: u64,
    pub bits: u64,
}

impl BerCount {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

impl std::ops::Add for BerCount {
    type Output = BerCount;

    fn add(self, rhs: BerCount) -> BerCount {
        BerCount {
            errors: self.errors + rhs.errors,
            bits: self.bits + rhs.bits,
        }
    }
}

impl std::iter::Sum for BerCount {
    fn sum<I: Iterator<Item = BerCount>>(iter: I) -> BerCount {
        iter.fold(BerCount::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone)]
struct Shard {
    bits: Vec<i8>,
    wave: Waveform,
    noise: Vec<f64>,
    count_from: usize,
    count_to: usize,
}

/// Channel waveforms and noise draws for a run, shared by every phase and
/// bias setting evaluated against it.
#[derive(Debug, Clone)]
pub struct Stimulus {
    shards: Vec<Shard>,
    cmp: ComparatorConfig,
    loop_cfg: LoopConfig,
    samples_per_ui: usize,
    delay_samples: usize,
}

/// Noise draws for shard `index` of a run seeded with `seed`, in volts.
pub fn noise_stream(seed: u64, index: u64, sigma: f64, len: usize) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; len];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..len)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sigma * z
        })
        .collect()
}

impl Stimulus {
    /// Prepares `n_bits` counted bits of stimulus for `cfg`.
    pub fn build(cfg: &SimConfig, n_bits: usize) -> Result<Self> {
        cfg.validate()?;
        if n_bits == 0 {
            return Err(Error::invalid("n_bits must be at least 1"));
        }
        let spp = cfg.samples_per_ui;
        let delay_samples = cfg.channel.delay_samples(spp);
        let tail = delay_samples.div_ceil(spp) + 1;
        let warmup = cfg.warmup_bits;
        let global = prbs_generate(&cfg.prbs, warmup + n_bits + tail)?.into_inner();

        let n_shards = n_bits.div_ceil(cfg.shard_bits);
        let shards = (0..n_shards)
            .into_par_iter()
            .map(|i| {
                let start = i * cfg.shard_bits;
                let counted = cfg.shard_bits.min(n_bits - start);
                let bits = global[start..start + warmup + counted + tail].to_vec();
                let seq = BitSequence::new(bits.clone())?;
                let levels = tx_preemphasis(&seq, cfg.channel.ffe_tap)?;
                let wave =
                    apply_channel(&levels, &cfg.channel, spp)?.with_ui_seconds(cfg.ui_seconds)?;
                let noise = noise_stream(cfg.seed, i as u64, cfg.cmp.noise_sigma, bits.len());
                Ok(Shard {
                    bits,
                    wave,
                    noise,
                    count_from: warmup,
                    count_to: warmup + counted,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Stimulus {
            shards,
            cmp: cfg.cmp,
            loop_cfg: cfg.loop_cfg,
            samples_per_ui: spp,
            delay_samples,
        })
    }

    pub fn n_shards(&self) -> usize {
        self.shards.len()
    }

    /// Errors in one shard at `phase_ui` with the given feedback bias.
    pub fn shard_count(
        &self,
        index: usize,
        bias: &BiasVoltages,
        phase_ui: f64,
    ) -> Result<BerCount> {
        let shard = self
            .shards
            .get(index)
            .ok_or_else(|| Error::invalid(format!("shard {index} does not exist")))?;
        let offset = phase_offset(phase_ui, self.samples_per_ui)?;
        let trace = run_dfe(
            &shard.wave,
            phase_ui,
            bias,
            &self.cmp,
            &self.loop_cfg,
            &shard.noise,
        )?;

        let shift = symbol_shift(offset, self.delay_samples, self.samples_per_ui);
        let count = count_errors(
            &trace.decisions,
            &shard.bits,
            shift,
            shard.count_from..shard.count_to,
        );
        Ok(count)
    }

    /// Sum over all shards.
    pub fn count(&self, bias: &BiasVoltages, phase_ui: f64) -> Result<BerCount> {
        (0..self.shards.len())
            .into_par_iter()
            .map(|i| self.shard_count(i, bias, phase_ui))
            .try_reduce(BerCount::default, |a, b| Ok(a + b))
    }

    /// BER at `n_phases` uniformly spaced phases `i / n_phases`.
    pub fn bathtub(&self, bias: &BiasVoltages, n_phases: usize) -> Result<BathtubCurve> {
        if n_phases < 8 {
            return Err(Error::out_of_range("n_phases", n_phases, ">= 8"));
        }
        if self.samples_per_ui < MIN_SWEEP_SPP {
            return Err(Error::out_of_range(
                "samples_per_ui",
                self.samples_per_ui,
                ">= 8 for phase sweeps",
            ));
        }
        let phases: Vec<f64> = (0..n_phases).map(|i| i as f64 / n_phases as f64).collect();
        let counts = phases
            .par_iter()
            .map(|&p| self.count(bias, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(BathtubCurve::from_counts(phases, &counts))
    }
}

/// Index shift from decision number to transmitted symbol: decision `n`
/// samples the symbol whose delayed hold interval contains sample
/// `n * spp + offset`.
fn symbol_shift(offset: usize, delay_samples: usize, samples_per_ui: usize) -> isize {
    (offset as isize - delay_samples as isize).div_euclid(samples_per_ui as isize)
}

fn count_errors(
    decisions: &[i8],
    bits: &[i8],
    shift: isize,
    counted: std::ops::Range<usize>,
) -> BerCount {
    let mut count = BerCount::default();
    for (n, &y) in decisions.iter().enumerate() {
        let m = n as isize + shift;
        if m < counted.start as isize || m >= counted.end as isize {
            continue;
        }
        count.bits += 1;
        if y != bits[m as usize] {
            count.errors += 1;
        }
    }
    count
}

/// A single unsharded closed-loop run at `cfg.phase_ui`.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub bits: BitSequence,
    pub channel_output: Waveform,
    pub trace: DecisionTrace,
    /// Errors over the bits after warmup.
    pub count: BerCount,
    pub closed_loop: ClosedLoop,
}

/// Runs `cfg.n_bits` bits through the link with noise stream 0, counting
/// errors after the first `warmup_bits`.
pub fn simulate(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let spp = cfg.samples_per_ui;
    let bits = prbs_generate(&cfg.prbs, cfg.n_bits)?;
    let levels = tx_preemphasis(&bits, cfg.channel.ffe_tap)?;
    let wave = apply_channel(&levels, &cfg.channel, spp)?.with_ui_seconds(cfg.ui_seconds)?;
    let noise = noise_stream(cfg.seed, 0, cfg.cmp.noise_sigma, cfg.n_bits);
    let bias = cfg.bias()?;
    let trace = run_dfe(&wave, cfg.phase_ui, &bias, &cfg.cmp, &cfg.loop_cfg, &noise)?;
    let offset = phase_offset(cfg.phase_ui, spp)?;
    let shift = symbol_shift(offset, cfg.channel.delay_samples(spp), spp);
    let count = count_errors(
        &trace.decisions,
        bits.symbols(),
        shift,
        cfg.warmup_bits..cfg.n_bits,
    );
    Ok(Simulation {
        bits,
        channel_output: wave,
        trace,
        count,
        closed_loop: closed_loop(&bias, &cfg.cmp, &cfg.loop_cfg),
    })
}

pub fn ber_estimate(cfg: &SimConfig, phase_ui: f64) -> Result<BerCount> {
    Stimulus::build(cfg, cfg.n_bits)?.count(&cfg.bias()?, phase_ui)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathtubCurve {
    pub phases: Vec<f64>,
    pub ber: Vec<f64>,
    pub errors: Vec<u64>,
    pub bits: Vec<u64>,
}

impl BathtubCurve {
    pub fn from_counts(phases: Vec<f64>, counts: &[BerCount]) -> Self {
        BathtubCurve {
            phases,
            ber: counts.iter().map(BerCount::ber).collect(),
            errors: counts.iter().map(|c| c.errors).collect(),
            bits: counts.iter().map(|c| c.bits).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }
}

pub fn bathtub(cfg: &SimConfig, n_phases: usize, per_phase_bits: usize) -> Result<BathtubCurve> {
    Stimulus::build(cfg, per_phase_bits)?.bathtub(&cfg.bias()?, n_phases)
}

/// Width in UI of the below-threshold region around the lowest-BER phase.
///
/// Phases are treated as circular, so a region may wrap through phase 0.
/// Crossings are placed by linear interpolation of BER between adjacent
/// phases. Returns 1.0 when every phase is below threshold and 0.0 when
/// none is. If several disjoint regions reach the minimum BER the widest
/// one is reported.
pub fn bathtub_width(curve: &BathtubCurve, threshold: f64) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::invalid("bathtub curve is empty"));
    }
    if curve.ber.len() != curve.len() {
        return Err(Error::invalid("bathtub curve has mismatched lengths"));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::out_of_range("threshold", threshold, "(0, 1)"));
    }
    let n = curve.len();
    let b = &curve.ber;
    let below: Vec<bool> = b.iter().map(|&v| v < threshold).collect();
    if below.iter().all(|&x| x) {
        return Ok(1.0);
    }
    let Some(first_above) = below.iter().position(|&x| !x) else {
        unreachable!()
    };
    let min_ber = b.iter().copied().fold(f64::INFINITY, f64::min);
    if min_ber >= threshold {
        return Ok(0.0);
    }

    // unwrapped phase of circular index j
    let pos = |j: isize| {
        let k = j.rem_euclid(n as isize) as usize;
        curve.phases[k] + j.div_euclid(n as isize) as f64
    };
    let ber_at = |j: isize| b[j.rem_euclid(n as isize) as usize];

    let mut best: f64 = 0.0;
    let mut j = first_above as isize + 1;
    let end = first_above as isize + n as isize;
    while j <= end {
        if !below[j.rem_euclid(n as isize) as usize] {
            j += 1;
            continue;
        }
        let start = j;
        let mut contains_min = false;
        while below[j.rem_euclid(n as isize) as usize] {
            contains_min |= ber_at(j) == min_ber;
            j += 1;
        }
        let last = j - 1;
        if contains_min {
            let (a, ba, bs) = (start - 1, ber_at(start - 1), ber_at(start));
            let left = pos(a) + (ba - threshold) / (ba - bs) * (pos(start) - pos(a));
            let (bl, bn) = (ber_at(last), ber_at(j));
            let right = pos(last) + (threshold - bl) / (bn - bl) * (pos(j) - pos(last));
            best = best.max(right - left);
        }
    }
    Ok(best.clamp(0.0, 1.0))
}

/// Phase sweep settings shared by calibration and tap sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub n_phases: usize,
    pub per_phase_bits: usize,
    pub threshold: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_phases: 64,
            per_phase_bits: 100_000,
            threshold: DEFAULT_THRESHOLD_BER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub best_reg_of: u8,
    pub widths_by_code: BTreeMap<u8, f64>,
    pub threshold_ber: f64,
}

/// Picks the widest code; ties go to the code nearest mid-scale, then the
/// smaller code.
fn pick_offset_code(widths: &BTreeMap<u8, f64>) -> u8 {
    let mut best: Option<(u8, f64)> = None;
    for (&code, &w) in widths {
        let better = match best {
            None => true,
            Some((bc, bw)) => {
                let dist = |c: u8| (2 * i32::from(c) - 31).abs();
                w > bw || (w == bw && dist(code) < dist(bc))
            }
        };
        if better {
            best = Some((code, w));
        }
    }
    best.expect("non-empty width table").0
}

/// Offset sweep with the tap forced to zero.
pub fn calibrate_offset(cfg: &SimConfig, sweep: &SweepConfig) -> Result<CalibrationResult> {
    let stim = Stimulus::build(cfg, sweep.per_phase_bits)?;
    let widths = (REG_OF_MIN..=REG_OF_MAX)
        .into_par_iter()
        .map(|reg_of| {
            let bias = bias_for(&TapCodes::new(reg_of, 0)?, &cfg.dac)?;
            let curve = stim.bathtub(&bias, sweep.n_phases)?;
            Ok((reg_of, bathtub_width(&curve, sweep.threshold)?))
        })
        .collect::<Result<BTreeMap<u8, f64>>>()?;

    if widths.values().all(|&w| w == 0.0) {
        return Err(Error::CalibrationFailed { widths });
    }
    Ok(CalibrationResult {
        best_reg_of: pick_offset_code(&widths),
        widths_by_code: widths,
        threshold_ber: sweep.threshold,
    })
}

/// Bathtub width for every tap code at a fixed offset code.
pub fn tap_sweep(cfg: &SimConfig, reg_of: u8, sweep: &SweepConfig) -> Result<BTreeMap<u8, f64>> {
    TapCodes::new(reg_of, 0)?;
    let stim = Stimulus::build(cfg, sweep.per_phase_bits)?;
    (0..=BETA_MAX)
        .into_par_iter()
        .map(|beta| {
            let bias = bias_for(&TapCodes::new(reg_of, beta)?, &cfg.dac)?;
            let curve = stim.bathtub(&bias, sweep.n_phases)?;
            Ok((beta, bathtub_width(&curve, sweep.threshold)?))
        })
        .collect()
}

/// Samples folded modulo one UI onto a `(time, voltage)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EyeDiagram {
    pub time_bins: usize,
    pub volt_bins: usize,
    pub volt_range: (f64, f64),
    /// Indexed `[time_bin][volt_bin]`.
    pub counts: Vec<Vec<u64>>,
}

impl EyeDiagram {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Lower and upper edge voltage of a voltage bin.
    pub fn volt_bin_edges(&self, bin: usize) -> (f64, f64) {
        let (lo, hi) = self.volt_range;
        let step = (hi - lo) / self.volt_bins as f64;
        (lo + step * bin as f64, lo + step * (bin + 1) as f64)
    }
}

/// The voltage range spans the waveform's extremes. A constant waveform gets
/// a small symmetric range around its value.
pub fn eye_histogram(w: &Waveform, time_bins: usize, volt_bins: usize) -> Result<EyeDiagram> {
    if time_bins < 2 {
        return Err(Error::out_of_range("time_bins", time_bins, ">= 2"));
    }
    if volt_bins < 2 {
        return Err(Error::out_of_range("volt_bins", volt_bins, ">= 2"));
    }
    let s = w.samples();
    let spp = w.samples_per_ui();
    let (mut lo, mut hi) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if s.is_empty() {
        (lo, hi) = (-1.0, 1.0);
    } else if hi <= lo {
        let pad = (lo.abs() * 1e-3).max(1e-9);
        (lo, hi) = (lo - pad, hi + pad);
    }
    let mut counts = vec![vec![0u64; volt_bins]; time_bins];
    let span = hi - lo;
    for (k, &v) in s.iter().enumerate() {
        let t = (k % spp) * time_bins / spp;
        let vb = (((v - lo) / span * volt_bins as f64) as usize).min(volt_bins - 1);
        counts[t][vb] += 1;
    }
    Ok(EyeDiagram {
        time_bins,
        volt_bins,
        volt_range: (lo, hi),
        counts,
    })
}

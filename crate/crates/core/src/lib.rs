//! Behavioral simulator of a one-tap decision-feedback-equalized receiver
//! for a low-swing on-chip serial link.
//!
//! The signal chain is PRBS stimulus, one-tap transmit pre-emphasis, a
//! single-pole interconnect, and a clocked comparator whose feedback port
//! selects one of two precomputed differential bias pairs from the previous
//! decision. The same bias pair also carries the comparator offset
//! correction, so the tap and the offset are both programmed through one
//! 5-bit resistor-string DAC.

pub mod bias_dac;
pub mod channel;
pub mod error;
pub mod measure;
pub mod receiver;
pub mod report;
pub mod signal;

pub use bias_dac::{
    bias_for, compute_words, dac_level, decode_bias, effective_params, feedback_factor,
    ideal_bias_voltages, BiasVoltages, BiasWords, DacConfig, EffectiveParams, TapCodes,
};
pub use channel::{
    apply_channel, isi_taps, pulse_response, tx_preemphasis, ChannelConfig, PulseResponse,
};
pub use error::{Error, Result};
pub use measure::{
    bathtub, bathtub_width, ber_estimate, calibrate_offset, eye_histogram, noise_stream, simulate,
    tap_sweep, BathtubCurve, BerCount, CalibrationResult, EyeDiagram, SimConfig, Simulation,
    Stimulus, SweepConfig,
};
pub use receiver::{
    closed_loop, comparator_input, decide, loop_timing_check, reference_dfe, run_dfe,
    select_feedback, ClosedLoop, ComparatorConfig, DecisionTrace, LoopConfig, LoopTiming,
};
pub use signal::{nrz_modulate, prbs_generate, BitSequence, PrbsConfig, Waveform};

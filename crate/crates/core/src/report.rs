//! CSV writers for traces, sweeps, eyes and pulse responses.
//!
//! Voltages are written in millivolts. Floating-point fields carry nine
//! significant digits; integers are plain decimal.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::channel::PulseResponse;
use crate::measure::{BathtubCurve, EyeDiagram};
use crate::receiver::DecisionTrace;

const MV_PER_V: f64 = 1e3;

/// Formats `v` with nine significant digits, `%.9g` style: fixed notation
/// for moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_trace_csv<W: Write>(out: &mut W, trace: &DecisionTrace) -> io::Result<()> {
    writeln!(out, "n,sampled_mv,feedback_mv,decision")?;
    for (n, ((y, v), fb)) in trace
        .decisions
        .iter()
        .zip(&trace.sampled_inputs)
        .zip(&trace.feedback_applied)
        .enumerate()
    {
        writeln!(
            out,
            "{n},{},{},{y}",
            fmt_sig9(v * MV_PER_V),
            fmt_sig9(fb * MV_PER_V)
        )?;
    }
    Ok(())
}

pub fn write_bathtub_csv<W: Write>(out: &mut W, curve: &BathtubCurve) -> io::Result<()> {
    writeln!(out, "phase_ui,ber,errors,bits")?;
    for i in 0..curve.len() {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_sig9(curve.phases[i]),
            fmt_sig9(curve.ber[i]),
            curve.errors[i],
            curve.bits[i]
        )?;
    }
    Ok(())
}

pub fn write_calibration_csv<W: Write>(out: &mut W, widths: &BTreeMap<u8, f64>) -> io::Result<()> {
    writeln!(out, "reg_of,width_ui")?;
    for (code, w) in widths {
        writeln!(out, "{code},{}", fmt_sig9(*w))?;
    }
    Ok(())
}

pub fn write_tapsweep_csv<W: Write>(out: &mut W, widths: &BTreeMap<u8, f64>) -> io::Result<()> {
    writeln!(out, "beta,width_ui")?;
    for (beta, w) in widths {
        writeln!(out, "{beta},{}", fmt_sig9(*w))?;
    }
    Ok(())
}

pub fn write_eye_csv<W: Write>(out: &mut W, eye: &EyeDiagram) -> io::Result<()> {
    writeln!(out, "time_bin,volt_bin,count")?;
    for (t, row) in eye.counts.iter().enumerate() {
        for (v, count) in row.iter().enumerate() {
            writeln!(out, "{t},{v},{count}")?;
        }
    }
    Ok(())
}

/// One row per sample. `t_ui` is the time at the end of the sample period,
/// so the sample closing the first UI has `t_ui = 1`.
pub fn write_pulse_csv<W: Write>(out: &mut W, p: &PulseResponse) -> io::Result<()> {
    writeln!(out, "sample,t_ui,v_mv")?;
    let spp = p.waveform.samples_per_ui() as f64;
    for (k, v) in p.waveform.samples().iter().enumerate() {
        writeln!(
            out,
            "{k},{},{}",
            fmt_sig9((k + 1) as f64 / spp),
            fmt_sig9(v * MV_PER_V)
        )?;
    }
    Ok(())
}

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use dfesim_core::report::{
    fmt_sig9, write_bathtub_csv, write_calibration_csv, write_eye_csv, write_pulse_csv,
    write_tapsweep_csv, write_trace_csv,
};
use dfesim_core::{
    bathtub, bathtub_width, calibrate_offset, comparator_input, effective_params, eye_histogram,
    feedback_factor, isi_taps, pulse_response, simulate, tap_sweep, Error as CoreError, Waveform,
};

use crate::config::{ConfigError, RunConfig};
use crate::Command;

const MV_PER_V: f64 = 1e3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Simulate { config } => cmd_simulate(&RunConfig::load(&config)?, &mut out),
        Command::Bathtub { config } => cmd_bathtub(&RunConfig::load(&config)?, &mut out),
        Command::Calibrate { config } => cmd_calibrate(&RunConfig::load(&config)?, &mut out),
        Command::Tapsweep { config } => cmd_tapsweep(&RunConfig::load(&config)?, &mut out),
        Command::Eye {
            config,
            time_bins,
            volt_bins,
            raw,
        } => cmd_eye(
            &RunConfig::load(&config)?,
            time_bins,
            volt_bins,
            raw,
            &mut out,
        ),
        Command::Pulse { config, n_ui } => cmd_pulse(&RunConfig::load(&config)?, n_ui, &mut out),
    }
}

fn create(cfg: &RunConfig, name: &str) -> anyhow::Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let path = cfg.out_dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

fn write_csv(
    cfg: &RunConfig,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> anyhow::Result<PathBuf> {
    let (path, mut file) = create(cfg, name)?;
    body(&mut file)
        .and_then(|()| file.flush())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn show(path: &Path) -> String {
    path.display().to_string()
}

fn cmd_simulate(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let sim = simulate(&cfg.sim).context("simulation failed")?;
    let path = write_csv(cfg, "trace.csv", |f| write_trace_csv(f, &sim.trace))?;
    let swing = cfg.sim.channel.amplitude;
    let ff = feedback_factor(&cfg.sim.taps, &cfg.sim.dac, cfg.sim.cmp.g_fb, swing);
    let eff = effective_params(&cfg.sim.taps, &cfg.sim.dac, cfg.sim.cmp.g_fb);
    let mut summary = || -> io::Result<()> {
        writeln!(out, "bits {}", sim.count.bits)?;
        writeln!(out, "errors {}", sim.count.errors)?;
        writeln!(out, "ber {}", fmt_sig9(sim.count.ber()))?;
        writeln!(
            out,
            "alpha_eff_mv {}",
            fmt_sig9(sim.closed_loop.alpha_eff * MV_PER_V)
        )?;
        writeln!(
            out,
            "offset_correction_mv {}",
            fmt_sig9(eff.v_ofc_eff * MV_PER_V)
        )?;
        writeln!(
            out,
            "residual_offset_mv {}",
            fmt_sig9(sim.closed_loop.v_residual * MV_PER_V)
        )?;
        writeln!(out, "feedback_factor {}", fmt_sig9(ff))?;
        writeln!(out, "trace {}", show(&path))
    };
    summary().context("writing summary")?;
    Ok(())
}

fn cmd_bathtub(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let sweep = cfg.sweep();
    let curve =
        bathtub(&cfg.sim, sweep.n_phases, sweep.per_phase_bits).context("bathtub sweep failed")?;
    let width = bathtub_width(&curve, sweep.threshold).context("bathtub width")?;
    let path = write_csv(cfg, "bathtub.csv", |f| write_bathtub_csv(f, &curve))?;
    let min_ber = curve.ber.iter().copied().fold(f64::INFINITY, f64::min);
    writeln!(out, "width_ui {}", fmt_sig9(width))
        .and_then(|()| writeln!(out, "min_ber {}", fmt_sig9(min_ber)))
        .and_then(|()| writeln!(out, "bathtub {}", show(&path)))
        .context("writing summary")?;
    Ok(())
}

fn cmd_calibrate(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    match calibrate_offset(&cfg.sim, &cfg.sweep()) {
        Ok(result) => {
            let path = write_csv(cfg, "calibration.csv", |f| {
                write_calibration_csv(f, &result.widths_by_code)
            })?;
            let width = result.widths_by_code[&result.best_reg_of];
            writeln!(out, "best_reg_of {}", result.best_reg_of)
                .and_then(|()| writeln!(out, "width_ui {}", fmt_sig9(width)))
                .and_then(|()| writeln!(out, "calibration {}", show(&path)))
                .context("writing summary")?;
            Ok(())
        }
        Err(CoreError::CalibrationFailed { widths }) => {
            let path = write_csv(cfg, "calibration.csv", |f| {
                write_calibration_csv(f, &widths)
            })?;
            Err(anyhow::anyhow!(
                "offset calibration failed: no code opened the bathtub at BER {} (table in {})",
                fmt_sig9(cfg.sweep.threshold),
                show(&path)
            )
            .into())
        }
        Err(e) => Err(anyhow::Error::new(e)
            .context("offset calibration failed")
            .into()),
    }
}

fn cmd_tapsweep(cfg: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let widths =
        tap_sweep(&cfg.sim, cfg.sim.taps.reg_of, &cfg.sweep()).context("tap sweep failed")?;
    let path = write_csv(cfg, "tapsweep.csv", |f| write_tapsweep_csv(f, &widths))?;
    // widest; ties keep the smaller tap
    let (best_beta, best_width) =
        widths.iter().fold(
            (0u8, f64::NEG_INFINITY),
            |b, (&k, &w)| if w > b.1 { (k, w) } else { b },
        );
    writeln!(out, "best_beta {best_beta}")
        .and_then(|()| writeln!(out, "width_ui {}", fmt_sig9(best_width)))
        .and_then(|()| writeln!(out, "tapsweep {}", show(&path)))
        .context("writing summary")?;
    Ok(())
}

fn cmd_eye(
    cfg: &RunConfig,
    time_bins: usize,
    volt_bins: usize,
    raw: bool,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let sim = simulate(&cfg.sim).context("simulation failed")?;
    let wave = if raw {
        sim.channel_output
    } else {
        comparator_input(&sim.channel_output, &sim.trace, &cfg.sim.cmp)
            .context("comparator input")?
    };
    let spp = wave.samples_per_ui();
    let skip = (cfg.sim.warmup_bits * spp).min(wave.len());
    let settled = Waveform::new(wave.samples()[skip..].to_vec(), spp, wave.ui_seconds())
        .context("eye window")?;
    let eye = eye_histogram(&settled, time_bins, volt_bins).map_err(eye_arg_error)?;
    let path = write_csv(cfg, "eye.csv", |f| write_eye_csv(f, &eye))?;
    writeln!(out, "samples {}", eye.total())
        .and_then(|()| {
            writeln!(
                out,
                "volt_range_mv {} {}",
                fmt_sig9(eye.volt_range.0 * MV_PER_V),
                fmt_sig9(eye.volt_range.1 * MV_PER_V)
            )
        })
        .and_then(|()| writeln!(out, "eye {}", show(&path)))
        .context("writing summary")?;
    Ok(())
}

fn eye_arg_error(e: CoreError) -> CliError {
    let key = match &e {
        CoreError::OutOfRange { name, .. } => format!("--{}", name.replace('_', "-")),
        _ => "eye".to_string(),
    };
    CliError::Config(ConfigError::Invalid { key, source: e })
}

fn cmd_pulse(cfg: &RunConfig, n_ui: usize, out: &mut impl Write) -> Result<(), CliError> {
    let p = pulse_response(&cfg.sim.channel, n_ui, cfg.sim.samples_per_ui).map_err(|e| {
        CliError::Config(ConfigError::Invalid {
            key: "--n-ui".to_string(),
            source: e,
        })
    })?;
    let taps = isi_taps(&p, 0.0).context("isi taps")?;
    let path = write_csv(cfg, "pulse.csv", |f| write_pulse_csv(f, &p))?;
    writeln!(out, "cursor_index {}", p.cursor_index)
        .and_then(|()| writeln!(out, "h0_mv {}", fmt_sig9(taps[0] * MV_PER_V)))
        .and_then(|()| match taps.get(1) {
            Some(h1) => writeln!(out, "h1_over_h0 {}", fmt_sig9(h1 / taps[0])),
            None => Ok(()),
        })
        .and_then(|()| writeln!(out, "pulse {}", show(&path)))
        .context("writing summary")?;
    Ok(())
}

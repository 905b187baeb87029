//! Feedback bias generation.
//!
//! A 5-bit resistor string produces 32 levels centered on the receiver
//! common mode. Four switch-matrix words are derived from an offset code
//! `reg_of` and a tap code `beta`:
//!
//! ```text
//! h1 = reg_of + beta          l1 = reg_of - beta
//! h2 = 31 - reg_of + beta     l2 = 31 - reg_of - beta
//! ```
//!
//! The decoded differential pairs then carry `v_offset = (2*reg_of - 31)*lsb`
//! and `alpha = 2*beta*lsb`.

use crate::error::{Error, Result};

pub const DAC_BITS: u32 = 5;
pub const MAX_CODE: u8 = 31;
pub const REG_OF_MIN: u8 = 8;
pub const REG_OF_MAX: u8 = 23;
pub const BETA_MAX: u8 = 8;

/// Offset and tap codes as programmed into the bias logic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TapCodes {
    pub reg_of: u8,
    pub beta: u8,
}

impl TapCodes {
    pub fn new(reg_of: u8, beta: u8) -> Result<Self> {
        let t = TapCodes { reg_of, beta };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(REG_OF_MIN..=REG_OF_MAX).contains(&self.reg_of) {
            return Err(Error::out_of_range("reg_of", self.reg_of, "8..23"));
        }
        if self.beta > BETA_MAX {
            return Err(Error::out_of_range("beta", self.beta, "0..8"));
        }
        Ok(())
    }

    /// Every valid code pair, offset-major.
    pub fn all() -> impl Iterator<Item = TapCodes> {
        (REG_OF_MIN..=REG_OF_MAX)
            .flat_map(|reg_of| (0..=BETA_MAX).map(move |beta| TapCodes { reg_of, beta }))
    }
}

impl Default for TapCodes {
    fn default() -> Self {
        TapCodes {
            reg_of: 15,
            beta: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiasWords {
    pub w_h1: u8,
    pub w_l1: u8,
    pub w_h2: u8,
    pub w_l2: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DacConfig {
    /// Half of the end-to-end range, volts. Codes 0 and 31 sit at
    /// `v_cm -/+ full_scale`.
    pub full_scale: f64,
    pub v_cm: f64,
}

impl Default for DacConfig {
    fn default() -> Self {
        DacConfig {
            full_scale: 0.025,
            v_cm: 0.600,
        }
    }
}

impl DacConfig {
    pub const N_BITS: u32 = DAC_BITS;

    pub fn lsb(&self) -> f64 {
        2.0 * self.full_scale / f64::from(MAX_CODE)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.full_scale > 0.0 && self.full_scale.is_finite()) {
            return Err(Error::out_of_range(
                "dac.full_scale",
                self.full_scale,
                "> 0",
            ));
        }
        if !self.v_cm.is_finite() {
            return Err(Error::invalid("dac.v_cm must be finite"));
        }
        Ok(())
    }
}

/// The four analog feedback bias levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasVoltages {
    pub v_h1: f64,
    pub v_l1: f64,
    pub v_h2: f64,
    pub v_l2: f64,
}

impl BiasVoltages {
    /// Differential feedback selected after a `+1` decision.
    pub fn diff_after_high(&self) -> f64 {
        self.v_h1 - self.v_l2
    }

    /// Differential feedback selected after a `-1` decision.
    pub fn diff_after_low(&self) -> f64 {
        self.v_l1 - self.v_h2
    }

    /// Tap voltage at the feedback port, half the spread of the two selectable
    /// differentials.
    pub fn alpha_raw(&self) -> f64 {
        0.5 * (self.diff_after_high() - self.diff_after_low())
    }

    /// Offset-correction voltage at the feedback port.
    pub fn offset_raw(&self) -> f64 {
        0.5 * (self.diff_after_high() + self.diff_after_low())
    }
}

pub fn compute_words(t: &TapCodes) -> Result<BiasWords> {
    t.validate()?;
    let (r, b) = (t.reg_of, t.beta);
    Ok(BiasWords {
        w_h1: r + b,
        w_l1: r - b,
        w_h2: MAX_CODE - r + b,
        w_l2: MAX_CODE - r - b,
    })
}

pub fn dac_level(code: i32, cfg: &DacConfig) -> Result<f64> {
    if !(0..=i32::from(MAX_CODE)).contains(&code) {
        return Err(Error::out_of_range("code", code, "0..31"));
    }
    Ok(cfg.v_cm + (f64::from(code) - 15.5) * cfg.lsb())
}

pub fn decode_bias(w: &BiasWords, cfg: &DacConfig) -> Result<BiasVoltages> {
    let level = |c: u8| dac_level(i32::from(c), cfg);
    Ok(BiasVoltages {
        v_h1: level(w.w_h1)?,
        v_l1: level(w.w_l1)?,
        v_h2: level(w.w_h2)?,
        v_l2: level(w.w_l2)?,
    })
}

/// Codes straight to bias levels.
pub fn bias_for(t: &TapCodes, cfg: &DacConfig) -> Result<BiasVoltages> {
    decode_bias(&compute_words(t)?, cfg)
}

/// Tap and offset as seen at the main input, after the feedback port gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams {
    pub alpha_eff: f64,
    pub v_ofc_eff: f64,
}

pub fn effective_params(t: &TapCodes, cfg: &DacConfig, g_fb: f64) -> EffectiveParams {
    let lsb = cfg.lsb();
    let alpha_raw = 2.0 * f64::from(t.beta) * lsb;
    let v_ofc_raw = (2.0 * f64::from(t.reg_of) - 31.0) * lsb;
    EffectiveParams {
        alpha_eff: g_fb * alpha_raw,
        v_ofc_eff: g_fb * v_ofc_raw,
    }
}

pub fn ideal_bias_voltages(v_cm: f64, v_offset: f64, alpha: f64) -> BiasVoltages {
    BiasVoltages {
        v_h1: v_cm + v_offset / 2.0 + alpha / 2.0,
        v_l1: v_cm + v_offset / 2.0 - alpha / 2.0,
        v_h2: v_cm - v_offset / 2.0 + alpha / 2.0,
        v_l2: v_cm - v_offset / 2.0 - alpha / 2.0,
    }
}

/// Effective tap normalized to the peak-to-peak differential swing.
pub fn feedback_factor(t: &TapCodes, cfg: &DacConfig, g_fb: f64, swing: f64) -> f64 {
    effective_params(t, cfg, g_fb).alpha_eff / (2.0 * swing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const MV: f64 = 1e-3;

    fn words(h1: u8, l1: u8, h2: u8, l2: u8) -> BiasWords {
        BiasWords {
            w_h1: h1,
            w_l1: l1,
            w_h2: h2,
            w_l2: l2,
        }
    }

    #[test]
    fn register_words_by_substitution() {
        assert_eq!(
            compute_words(&TapCodes::new(16, 4).unwrap()).unwrap(),
            words(20, 12, 19, 11)
        );
        assert_eq!(
            compute_words(&TapCodes::new(8, 8).unwrap()).unwrap(),
            words(16, 0, 31, 15)
        );
        assert_eq!(
            compute_words(&TapCodes::new(15, 0).unwrap()).unwrap(),
            words(15, 15, 16, 16)
        );
    }

    #[test]
    fn out_of_range_codes_rejected() {
        for (r, b) in [(7, 0), (24, 0), (15, 9)] {
            let t = TapCodes { reg_of: r, beta: b };
            assert!(matches!(compute_words(&t), Err(Error::OutOfRange { .. })));
        }
        let err = TapCodes::new(7, 0).unwrap_err();
        assert!(err.to_string().contains("8..23"));
    }

    #[test]
    fn word_range_and_symmetry_exhaustive() {
        let mut n = 0;
        for t in TapCodes::all() {
            let w = compute_words(&t).unwrap();
            for c in [w.w_h1, w.w_l1, w.w_h2, w.w_l2] {
                assert!(c <= MAX_CODE);
            }
            assert_eq!(w.w_h2, 31 - w.w_l1);
            assert_eq!(w.w_l2, 31 - w.w_h1);
            assert!(w.w_h1 >= w.w_l1);
            n += 1;
        }
        assert_eq!(n, 144);
    }

    #[test]
    fn dac_endpoints() {
        let cfg = DacConfig::default();
        assert_relative_eq!(
            dac_level(0, &cfg).unwrap(),
            0.600 - 25.0 * MV,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            dac_level(31, &cfg).unwrap(),
            0.600 + 25.0 * MV,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            dac_level(16, &cfg).unwrap() - 0.600,
            0.5 * 50.0 / 31.0 * MV,
            epsilon = 1e-15
        );
        assert!((dac_level(16, &cfg).unwrap() - 0.600 - 0.8065 * MV).abs() < 1e-7);
        assert!(dac_level(-1, &cfg).is_err());
        assert!(dac_level(32, &cfg).is_err());
    }

    #[test]
    fn dac_strictly_increasing() {
        let cfg = DacConfig::default();
        let levels: Vec<f64> = (0..32).map(|c| dac_level(c, &cfg).unwrap()).collect();
        assert!(levels.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn decode_hand_values() {
        let b = decode_bias(&words(20, 12, 19, 11), &DacConfig::default()).unwrap();
        let expect = [607.26, 594.35, 605.65, 592.74];
        for (v, e) in [b.v_h1, b.v_l1, b.v_h2, b.v_l2].iter().zip(expect) {
            assert!((v / MV - e).abs() < 0.005, "{v} vs {e}");
        }
        let b = decode_bias(&words(15, 15, 16, 16), &DacConfig::default()).unwrap();
        assert_eq!(b.v_h1, b.v_l1);
        assert_eq!(b.v_h2, b.v_l2);
    }

    #[test]
    fn decode_is_elementwise() {
        let cfg = DacConfig::default();
        let base = decode_bias(&words(10, 10, 10, 10), &cfg).unwrap();
        let up = decode_bias(&words(11, 10, 10, 10), &cfg).unwrap();
        assert!(up.v_h1 > base.v_h1);
        assert_eq!(
            (up.v_l1, up.v_h2, up.v_l2),
            (base.v_l1, base.v_h2, base.v_l2)
        );
    }

    #[test]
    fn effective_params_values() {
        let cfg = DacConfig::default();
        let lsb = cfg.lsb();
        let p = effective_params(&TapCodes::new(16, 4).unwrap(), &cfg, 0.5);
        assert_relative_eq!(p.alpha_eff, 4.0 * lsb, max_relative = 1e-12);
        assert!((p.alpha_eff / MV - 6.452).abs() < 5e-4);
        assert!((p.v_ofc_eff / MV - 0.806).abs() < 5e-4);

        for r in [15, 16] {
            let p = effective_params(&TapCodes::new(r, 0).unwrap(), &cfg, 0.5);
            assert_eq!(p.alpha_eff, 0.0);
            assert_relative_eq!(p.v_ofc_eff.abs(), 0.5 * lsb, max_relative = 1e-12);
        }

        let p = effective_params(&TapCodes::new(23, 8).unwrap(), &cfg, 0.5);
        assert!((p.alpha_eff / MV - 12.90).abs() < 5e-3);
        assert!((p.v_ofc_eff / MV - 12.10).abs() < 5e-3);
    }

    #[test]
    fn ideal_bias_values() {
        let b = ideal_bias_voltages(0.6, 0.0, 0.0);
        assert_eq!([b.v_h1, b.v_l1, b.v_h2, b.v_l2], [0.6; 4]);
        let b = ideal_bias_voltages(600.0, 10.0, 20.0);
        assert_eq!(
            [b.v_h1, b.v_l1, b.v_h2, b.v_l2],
            [615.0, 595.0, 605.0, 585.0]
        );
    }

    #[test]
    fn quantized_equals_ideal_exhaustive() {
        let cfg = DacConfig::default();
        let lsb = cfg.lsb();
        for t in TapCodes::all() {
            let q = bias_for(&t, &cfg).unwrap();
            let v_off = (2.0 * f64::from(t.reg_of) - 31.0) * lsb;
            let alpha = 2.0 * f64::from(t.beta) * lsb;
            let i = ideal_bias_voltages(cfg.v_cm, v_off, alpha);
            for (a, b) in [
                (q.v_h1, i.v_h1),
                (q.v_l1, i.v_l1),
                (q.v_h2, i.v_h2),
                (q.v_l2, i.v_l2),
            ] {
                assert!((a - b).abs() < 1e-12);
            }
            // selection algebra
            assert!((q.offset_raw() - v_off).abs() < 1e-12);
            assert!((q.alpha_raw() - alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn feedback_factor_values() {
        let cfg = DacConfig::default();
        let ff = |b| feedback_factor(&TapCodes::new(15, b).unwrap(), &cfg, 0.5, 0.030);
        assert!((ff(8) - 0.215).abs() < 1e-3);
        assert_eq!(ff(0), 0.0);
        assert!((ff(4) - 0.108).abs() < 1e-3);
        assert_relative_eq!(ff(8), 2.0 * ff(4), max_relative = 1e-12);
    }

    #[test]
    fn equal_split_of_range() {
        // each bias level moves by v_off/2 and alpha/2; both reach about
        // half of the DAC's 25 mV half-range
        let cfg = DacConfig::default();
        let max_off = effective_params(&TapCodes::new(23, 0).unwrap(), &cfg, 0.5).v_ofc_eff;
        let max_tap = effective_params(&TapCodes::new(15, 8).unwrap(), &cfg, 0.5).alpha_eff;
        assert!((max_off / 0.025 - 0.5).abs() < 0.05 + 1e-9);
        assert!((max_tap / 0.025 - 0.5).abs() < 0.05 + 1e-9);
    }
}

//! Closed-form Fisher information and CRLB for the symmetric two-band model.
//!
//! Per band `b`, the effective SNR `γ_b = S_b B_b² / S_w,b` with
//! `S_w,b = B_b² N_0 + λB_b` gives the weight `w_b = 2Mγ_b²/(1 + Mγ_b)`.
//! Integrating the `(2πf)²` trace identity over each band yields
//!
//! ```text
//! J_∞ = 4π²/3 · (J_L + J_H) · G(p),   J_L = f_L³ w_L,   J_H = (f_H³ − f_L³) w_H
//! ```
//!
//! and the band-selective scheme replaces `(B, λ)` by its own pair with the
//! low band switched off.

use std::f64::consts::PI;

use crate::compression::{
    band_selective_point, critical_rate, two_band_operating_point, OperatingPoint, RegimeLabel, SelectivePoint,
};
use crate::error::{Error, Result};
use crate::geometry::{geometry_matrix, Scenario};
use crate::spectra::TwoBandSpectrum;
use crate::whittle::{crlb_from_fim, information_weight, CrlbReport, FimMethod, FimRate};

/// Effective SNRs, information weights and Hz³-weighted information terms of
/// the RD channel on both bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandInfoTerms {
    pub operating_point: OperatingPoint,
    pub effective_noise_low: f64,
    pub effective_noise_high: f64,
    pub gamma_low: f64,
    pub gamma_high: f64,
    pub weight_low: f64,
    pub weight_high: f64,
    /// `f_L³ w_L` (Hz³).
    pub j_low: f64,
    /// `(f_H³ − f_L³) w_H` (Hz³).
    pub j_high: f64,
    pub regime: RegimeLabel,
}

impl BandInfoTerms {
    pub fn total(&self) -> f64 {
        self.j_low + self.j_high
    }
}

/// `γ = S B² / (B² N + λB)`, zero on a dead band.
pub fn effective_snr(level: f64, gain: f64, effective_noise: f64) -> f64 {
    if gain == 0.0 {
        0.0
    } else {
        level * gain * gain / effective_noise
    }
}

pub fn band_info_terms(spectrum: &TwoBandSpectrum, sensors: usize, rate: f64) -> Result<BandInfoTerms> {
    check_sensors(sensors)?;
    let op = two_band_operating_point(spectrum, rate)?;
    let effective_noise_low = op.effective_noise_low(spectrum);
    let effective_noise_high = op.effective_noise_high(spectrum);
    let gamma_low = effective_snr(spectrum.s_low(), op.gain_low, effective_noise_low);
    let gamma_high = effective_snr(spectrum.s_high(), op.gain_high, effective_noise_high);
    let weight_low = information_weight(sensors, gamma_low);
    let weight_high = information_weight(sensors, gamma_high);
    let (f_l, f_h) = (spectrum.f_low(), spectrum.f_high());
    Ok(BandInfoTerms {
        operating_point: op,
        effective_noise_low,
        effective_noise_high,
        gamma_low,
        gamma_high,
        weight_low,
        weight_high,
        j_low: f_l.powi(3) * weight_low,
        j_high: (f_h.powi(3) - f_l.powi(3)) * weight_high,
        regime: op.regime,
    })
}

/// High-band terms of the band-selective scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectiveInfoTerms {
    pub point: SelectivePoint,
    pub effective_noise_high: f64,
    pub gamma_high: f64,
    pub weight_high: f64,
    /// `(f_H³ − f_L³) w_H^sel` (Hz³).
    pub j_high: f64,
}

pub fn selective_info_terms(spectrum: &TwoBandSpectrum, sensors: usize, rate: f64) -> Result<SelectiveInfoTerms> {
    check_sensors(sensors)?;
    let point = band_selective_point(spectrum, rate)?;
    let b = point.gain_high;
    let effective_noise_high = b * b * spectrum.noise() + point.water_level * b;
    let gamma_high = effective_snr(spectrum.s_high(), b, effective_noise_high);
    let weight_high = information_weight(sensors, gamma_high);
    Ok(SelectiveInfoTerms {
        point,
        effective_noise_high,
        gamma_high,
        weight_high,
        j_high: (spectrum.f_high().powi(3) - spectrum.f_low().powi(3)) * weight_high,
    })
}

fn check_sensors(sensors: usize) -> Result<()> {
    if sensors < 2 {
        return Err(Error::invalid("sensors", format!("at least 2 sensors required, got {sensors}")));
    }
    Ok(())
}

fn scaled_geometry(scenario: &Scenario, j: f64) -> FimRate {
    let g = geometry_matrix(scenario);
    FimRate::new(g.entries() * (4.0 * PI * PI / 3.0 * j), FimMethod::ClosedForm)
}

/// `J_∞ = 4π²/3·(J_L + J_H)·G(p)` for symmetric RD compression at `rate`.
pub fn fim_rate_two_band(scenario: &Scenario, spectrum: &TwoBandSpectrum, rate: f64) -> Result<FimRate> {
    let terms = band_info_terms(spectrum, scenario.num_sensors(), rate)?;
    Ok(scaled_geometry(scenario, terms.total()))
}

/// `J_∞^sel = 4π²/3·J_H^sel·G(p)`.
pub fn fim_rate_band_selective(scenario: &Scenario, spectrum: &TwoBandSpectrum, rate: f64) -> Result<FimRate> {
    let terms = selective_info_terms(spectrum, scenario.num_sensors(), rate)?;
    Ok(scaled_geometry(scenario, terms.j_high))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    RateDistortion,
    BandSelective,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::RateDistortion => "rd",
            Scheme::BandSelective => "selective",
        }
    }
}

/// RD vs band-selective at one rate. Both FIMs are multiples of the same `G`,
/// so the comparison is geometry free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeComparison {
    pub rate: f64,
    pub rd: BandInfoTerms,
    pub selective: SelectiveInfoTerms,
    /// `CRLB_sel / CRLB_rd = (J_L + J_H) / J_H^sel`; NaN when neither scheme
    /// conveys information.
    pub crlb_ratio: f64,
    /// Scheme with the smaller bound, `None` on a tie.
    pub preferred: Option<Scheme>,
}

pub fn compare_schemes(spectrum: &TwoBandSpectrum, sensors: usize, rate: f64) -> Result<SchemeComparison> {
    let rd = band_info_terms(spectrum, sensors, rate)?;
    let selective = selective_info_terms(spectrum, sensors, rate)?;
    let (j_rd, j_sel) = (rd.total(), selective.j_high);
    let crlb_ratio = if j_rd == 0.0 && j_sel == 0.0 {
        f64::NAN
    } else {
        j_rd / j_sel
    };
    let preferred = if j_sel > j_rd {
        Some(Scheme::BandSelective)
    } else if j_rd > j_sel {
        Some(Scheme::RateDistortion)
    } else {
        None
    };
    Ok(SchemeComparison {
        rate,
        rd,
        selective,
        crlb_ratio,
        preferred,
    })
}

/// `J_L^RD(R) / J_H^sel(R)` for `0 < R ≤ R_crit`: the per-coordinate ratio of
/// the selective bound to the RD bound.
pub fn crlb_ratio(spectrum: &TwoBandSpectrum, sensors: usize, rate: f64) -> Result<f64> {
    let critical = critical_rate(spectrum);
    if !(rate > 0.0 && rate <= critical) {
        return Err(Error::Contract(format!(
            "the RD/selective ratio is defined for 0 < R <= R_crit = {critical} b/s, got {rate}"
        )));
    }
    Ok(compare_schemes(spectrum, sensors, rate)?.crlb_ratio)
}

/// Closed-form CRLB `(3/(4π²T))·(J_L + J_H)⁻¹·G⁻¹(p)`, with the band terms
/// attached to the report.
pub fn crlb_two_band(
    scenario: &Scenario,
    spectrum: &TwoBandSpectrum,
    rate: f64,
    observation_time: f64,
) -> Result<CrlbReport> {
    let terms = band_info_terms(spectrum, scenario.num_sensors(), rate)?;
    let fim = scaled_geometry(scenario, terms.total());
    let mut report = crlb_from_fim(&fim, observation_time)?;
    report.band_terms = Some(terms);
    Ok(report)
}

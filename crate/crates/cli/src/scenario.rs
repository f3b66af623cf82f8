//! Scenario files.
//!
//! ```json
//! {
//!   "sensors": [[0, 0], [1000, 0], [0, 1000]],
//!   "source": [300, 700],
//!   "speed": 3e8,
//!   "observation_time": 1e-3,
//!   "spectrum": { "f_L": 5, "f_H": 200, "S_L": 100, "S_H": 20, "N_0": 1 },
//!   "rate": 10,
//!   "scheme": "both",
//!   "units": { "freq": "MHz", "rate": "Mbps" }
//! }
//! ```
//!
//! `psd: {edges, source_levels, noise_levels}` replaces `spectrum` for a
//! general piecewise-constant model, and `rate_sweep: {min, max, points,
//! scale}` replaces `rate`. Units scale frequencies and rates only; PSD
//! levels are used as given.

use std::path::Path;

use clb_core::{PiecewisePsd, Scenario, TwoBandSpectrum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub sensors: Vec<Vec<f64>>,
    pub source: Vec<f64>,
    pub speed: f64,
    pub observation_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psd: Option<PsdSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_sweep: Option<RateSweep>,
    #[serde(default)]
    pub scheme: SchemeChoice,
    #[serde(default)]
    pub units: Units,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    #[serde(rename = "f_L")]
    pub f_low: f64,
    #[serde(rename = "f_H")]
    pub f_high: f64,
    #[serde(rename = "S_L")]
    pub s_low: f64,
    #[serde(rename = "S_H")]
    pub s_high: f64,
    #[serde(rename = "N_0")]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsdSpec {
    pub edges: Vec<f64>,
    pub source_levels: Vec<f64>,
    pub noise_levels: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSweep {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: SweepScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    #[default]
    Rd,
    Selective,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FreqUnit {
    #[default]
    Hz,
    #[serde(rename = "kHz")]
    KHz,
    MHz,
    GHz,
}

impl FreqUnit {
    pub fn factor(self) -> f64 {
        match self {
            FreqUnit::Hz => 1.0,
            FreqUnit::KHz => 1e3,
            FreqUnit::MHz => 1e6,
            FreqUnit::GHz => 1e9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RateUnit {
    #[default]
    #[serde(rename = "bps")]
    Bps,
    #[serde(rename = "kbps")]
    Kbps,
    #[serde(rename = "Mbps")]
    Mbps,
}

impl RateUnit {
    pub fn factor(self) -> f64 {
        match self {
            RateUnit::Bps => 1.0,
            RateUnit::Kbps => 1e3,
            RateUnit::Mbps => 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    #[serde(default)]
    pub freq: FreqUnit,
    #[serde(default)]
    pub rate: RateUnit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumModel {
    TwoBand(TwoBandSpectrum),
    General { source: PiecewisePsd, noise: PiecewisePsd },
}

impl SpectrumModel {
    pub fn two_band(&self) -> Option<&TwoBandSpectrum> {
        match self {
            SpectrumModel::TwoBand(s) => Some(s),
            SpectrumModel::General { .. } => None,
        }
    }

    pub fn source_psd(&self) -> PiecewisePsd {
        match self {
            SpectrumModel::TwoBand(s) => s.source_psd(),
            SpectrumModel::General { source, .. } => source.clone(),
        }
    }
}

/// A validated scenario in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub scenario: Scenario,
    pub spectrum: SpectrumModel,
    /// Rates in b/s, in sweep order.
    pub rates: Vec<f64>,
    pub scheme: SchemeChoice,
    /// The input re-expressed in Hz and b/s.
    pub normalized: ScenarioFile,
}

impl Model {
    pub fn schemes(&self) -> Vec<SchemeChoice> {
        match self.scheme {
            SchemeChoice::Both => vec![SchemeChoice::Rd, SchemeChoice::Selective],
            s => vec![s],
        }
    }
}

pub fn parse(text: &str) -> CliResult<ScenarioFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Input(e.inner().to_string())
        } else {
            CliError::input(&path, e.inner())
        }
    })
}

pub fn load(path: &Path) -> CliResult<ScenarioFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

impl ScenarioFile {
    /// The same scenario with frequencies in Hz and rates in b/s.
    pub fn normalized(&self) -> ScenarioFile {
        let hz = self.units.freq.factor();
        let bps = self.units.rate.factor();
        ScenarioFile {
            spectrum: self.spectrum.map(|s| SpectrumSpec {
                f_low: s.f_low * hz,
                f_high: s.f_high * hz,
                ..s
            }),
            psd: self.psd.as_ref().map(|p| PsdSpec {
                edges: p.edges.iter().map(|e| e * hz).collect(),
                ..p.clone()
            }),
            rate: self.rate.map(|r| r * bps),
            rate_sweep: self.rate_sweep.map(|s| RateSweep {
                min: s.min * bps,
                max: s.max * bps,
                ..s
            }),
            units: Units::default(),
            ..self.clone()
        }
    }

    /// Validates the file and applies command-line overrides. `rate` is in
    /// the file's rate unit; `observation_time` in seconds.
    pub fn resolve(&self, rate: Option<f64>, observation_time: Option<f64>) -> CliResult<Model> {
        let mut file = self.clone();
        if let Some(r) = rate {
            file.rate = Some(r);
            file.rate_sweep = None;
        }
        if let Some(t) = observation_time {
            file.observation_time = t;
        }
        let normalized = file.normalized();
        let scenario = Scenario::new(
            normalized.sensors.clone(),
            normalized.source.clone(),
            normalized.speed,
            normalized.observation_time,
        )?;
        let spectrum = match (&normalized.spectrum, &normalized.psd) {
            (Some(s), None) => SpectrumModel::TwoBand(
                TwoBandSpectrum::new(s.f_low, s.f_high, s.s_low, s.s_high, s.noise)
                    .map_err(|e| e.in_section("spectrum"))?,
            ),
            (None, Some(p)) => {
                let source = PiecewisePsd::new(p.edges.clone(), p.source_levels.clone())
                    .map_err(|e| rename_levels(e, "source_levels"))?;
                let noise = PiecewisePsd::new(p.edges.clone(), p.noise_levels.clone())
                    .map_err(|e| rename_levels(e, "noise_levels"))?;
                if normalized.scheme != SchemeChoice::Rd {
                    return Err(CliError::input("scheme", "band-selective compression needs a two-band `spectrum`"));
                }
                SpectrumModel::General { source, noise }
            }
            (None, None) => return Err(CliError::input("spectrum", "either `spectrum` or `psd` is required")),
            (Some(_), Some(_)) => return Err(CliError::input("psd", "give either `spectrum` or `psd`, not both")),
        };
        let rates = match (normalized.rate, normalized.rate_sweep) {
            (Some(r), None) => {
                check_rate("rate", r)?;
                vec![r]
            }
            (None, Some(s)) => sweep_rates(&s)?,
            (None, None) => return Err(CliError::input("rate", "either `rate` or `rate_sweep` is required")),
            (Some(_), Some(_)) => {
                return Err(CliError::input("rate_sweep", "give either `rate` or `rate_sweep`, not both"))
            }
        };
        Ok(Model {
            scenario,
            spectrum,
            rates,
            scheme: normalized.scheme,
            normalized,
        })
    }
}

/// Field paths for general-PSD errors: level errors name the level list,
/// edge errors the shared edge list.
fn rename_levels(e: clb_core::Error, levels: &str) -> clb_core::Error {
    match e {
        clb_core::Error::InvalidInput { field, reason } => clb_core::Error::InvalidInput {
            field: format!("psd.{}", field.replace("levels", levels)),
            reason,
        },
        other => other,
    }
}

fn check_rate(field: &str, r: f64) -> CliResult<()> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(CliError::input(field, format!("must be finite and >= 0, got {r}")))
    }
}

pub fn sweep_rates(s: &RateSweep) -> CliResult<Vec<f64>> {
    if s.points == 0 {
        return Err(CliError::input("rate_sweep.points", "must be at least 1"));
    }
    check_rate("rate_sweep.min", s.min)?;
    check_rate("rate_sweep.max", s.max)?;
    if s.max < s.min {
        return Err(CliError::input("rate_sweep.max", format!("must be >= min ({})", s.min)));
    }
    if s.scale == SweepScale::Log && s.min <= 0.0 {
        return Err(CliError::input("rate_sweep.min", "must be > 0 for a log sweep"));
    }
    if s.points == 1 {
        return Ok(vec![s.min]);
    }
    let last = (s.points - 1) as f64;
    Ok((0..s.points)
        .map(|k| {
            let t = k as f64 / last;
            match (k, s.scale) {
                (0, _) => s.min,
                (k, _) if k == s.points - 1 => s.max,
                (_, SweepScale::Linear) => s.min + (s.max - s.min) * t,
                (_, SweepScale::Log) => s.min * (s.max / s.min).powf(t),
            }
        })
        .collect())
}

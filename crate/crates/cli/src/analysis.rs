//! Per-rate computations behind the commands, and their serializable forms.

use std::f64::consts::PI;

use clb_core::{
    band_info_terms, band_selective_channel, compare_schemes, crlb_from_fim, critical_rate, fim_rate_quadrature,
    fim_rate_sherman_morrison, geometry_matrix, monte_carlo_fim, normalized_errors, rd_channel,
    selective_info_terms, two_band_rd_channel, BandChannel, BandInfoTerms, CompressedArray, CrlbReport, Execution,
    FimMethod, FimRate, McConfig, QuadratureSpec, RegimeLabel,
};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::CliResult;
use crate::scenario::{Model, SchemeChoice, ScenarioFile, SpectrumModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandPair {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelBandReport {
    pub f_lo: f64,
    pub f_hi: f64,
    pub gain: f64,
    pub compression_noise: f64,
}

/// Everything reported for one scheme at one rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeReport {
    pub scheme: &'static str,
    pub method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<&'static str>,
    pub water_level: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gains: Option<BandPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<BandPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<BandPair>,
    #[serde(rename = "J_L", skip_serializing_if = "Option::is_none")]
    pub j_low: Option<f64>,
    #[serde(rename = "J_H", skip_serializing_if = "Option::is_none")]
    pub j_high: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bands: Vec<ChannelBandReport>,
    /// Fisher information rate, 1/(m²·s).
    pub fim: Vec<Vec<f64>>,
    /// Bound for the configured observation time, m²; `null` marks an
    /// unidentifiable coordinate.
    pub crlb: Vec<Vec<f64>>,
    pub rmse_bound: f64,
    pub rank: usize,
    pub condition_number: f64,
    pub no_information: bool,
    pub identifiable: bool,
    pub unidentifiable_coordinates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrlbDocument {
    pub scenario: ScenarioFile,
    pub rate: f64,
    pub observation_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_rate: Option<f64>,
    pub schemes: Vec<SchemeReport>,
    /// Selective bound over RD bound, when both schemes were evaluated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crlb_ratio: Option<f64>,
}

pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Channel of every sensor for `scheme` at `rate`.
pub fn channel(model: &Model, scheme: SchemeChoice, rate: f64) -> CliResult<BandChannel> {
    Ok(match (&model.spectrum, scheme) {
        (SpectrumModel::TwoBand(s), SchemeChoice::Selective) => band_selective_channel(s, rate)?,
        (SpectrumModel::TwoBand(s), _) => two_band_rd_channel(s, rate)?,
        (SpectrumModel::General { source, noise }, _) => rd_channel(source, noise, rate)?,
    })
}

pub fn array(model: &Model, scheme: SchemeChoice, rate: f64) -> CliResult<CompressedArray> {
    let ch = channel(model, scheme, rate)?;
    Ok(CompressedArray::new(model.spectrum.source_psd(), vec![ch; model.scenario.num_sensors()])?)
}

/// Closed-form FIM `4π²/3·(f_L³ w_L + (f_H³ − f_L³) w_H)·G` from band
/// terms, with the weights multiplied by `weight_factor`.
pub fn closed_form_fim(model: &Model, terms: &BandInfoTerms, weight_factor: f64) -> FimRate {
    let g = geometry_matrix(&model.scenario);
    FimRate::new(
        g.entries() * (4.0 * PI * PI / 3.0 * terms.total() * weight_factor),
        FimMethod::ClosedForm,
    )
}

/// Analytic FIM of a scheme: the two-band closed form, or Sherman–Morrison
/// on a general PSD.
pub fn analytic_fim(model: &Model, scheme: SchemeChoice, rate: f64, weight_factor: f64) -> CliResult<FimRate> {
    let m = model.scenario.num_sensors();
    match (&model.spectrum, scheme) {
        (SpectrumModel::TwoBand(s), SchemeChoice::Selective) => {
            let t = selective_info_terms(s, m, rate)?;
            let g = geometry_matrix(&model.scenario);
            Ok(FimRate::new(
                g.entries() * (4.0 * PI * PI / 3.0 * t.j_high * weight_factor),
                FimMethod::ClosedForm,
            ))
        }
        (SpectrumModel::TwoBand(s), _) => Ok(closed_form_fim(model, &band_info_terms(s, m, rate)?, weight_factor)),
        (SpectrumModel::General { .. }, _) => {
            let mut fim = fim_rate_sherman_morrison(&model.scenario, &array(model, scheme, rate)?)?;
            fim.entries *= weight_factor;
            Ok(fim)
        }
    }
}

fn bound_fields(report: &CrlbReport) -> (Vec<Vec<f64>>, f64) {
    let trace: f64 = report.variances().iter().sum();
    (rows(&report.bound), trace.sqrt())
}

pub fn scheme_report(model: &Model, scheme: SchemeChoice, rate: f64) -> CliResult<SchemeReport> {
    let m = model.scenario.num_sensors();
    let t = model.scenario.observation_time();
    let fim = analytic_fim(model, scheme, rate, 1.0)?;
    let report = crlb_from_fim(&fim, t)?;
    let (crlb, rmse_bound) = bound_fields(&report);
    let mut out = SchemeReport {
        scheme: if scheme == SchemeChoice::Selective { "selective" } else { "rd" },
        method: fim.method.as_str(),
        regime: None,
        water_level: 0.0,
        gains: None,
        gamma: None,
        weight: None,
        j_low: None,
        j_high: None,
        bands: Vec::new(),
        fim: rows(&fim.entries),
        crlb,
        rmse_bound,
        rank: report.rank,
        condition_number: report.condition_number,
        no_information: report.no_information,
        identifiable: report.is_identifiable(),
        unidentifiable_coordinates: report.unidentifiable_coordinates.clone(),
    };
    match (&model.spectrum, scheme) {
        (SpectrumModel::TwoBand(s), SchemeChoice::Selective) => {
            let terms = selective_info_terms(s, m, rate)?;
            out.water_level = terms.point.water_level;
            out.gains = Some(BandPair { low: 0.0, high: terms.point.gain_high });
            out.gamma = Some(BandPair { low: 0.0, high: terms.gamma_high });
            out.weight = Some(BandPair { low: 0.0, high: terms.weight_high });
            out.j_low = Some(0.0);
            out.j_high = Some(terms.j_high);
        }
        (SpectrumModel::TwoBand(s), _) => {
            let terms = band_info_terms(s, m, rate)?;
            let op = terms.operating_point;
            out.regime = Some(terms.regime.as_str());
            out.water_level = op.water_level;
            out.gains = Some(BandPair { low: op.gain_low, high: op.gain_high });
            out.gamma = Some(BandPair { low: terms.gamma_low, high: terms.gamma_high });
            out.weight = Some(BandPair { low: terms.weight_low, high: terms.weight_high });
            out.j_low = Some(terms.j_low);
            out.j_high = Some(terms.j_high);
        }
        (SpectrumModel::General { .. }, _) => {
            let ch = channel(model, scheme, rate)?;
            out.water_level = ch.water_level();
            out.bands = ch
                .bands()
                .iter()
                .map(|b| ChannelBandReport {
                    f_lo: b.f_lo,
                    f_hi: b.f_hi,
                    gain: b.gain,
                    compression_noise: b.compression_noise,
                })
                .collect();
        }
    }
    Ok(out)
}

pub fn crlb_document(model: &Model, rate: f64) -> CliResult<CrlbDocument> {
    let schemes = model
        .schemes()
        .into_iter()
        .map(|s| scheme_report(model, s, rate))
        .collect::<CliResult<Vec<_>>>()?;
    let two_band = model.spectrum.two_band();
    let crlb_ratio = match (two_band, model.scheme) {
        (Some(s), SchemeChoice::Both) => Some(compare_schemes(s, model.scenario.num_sensors(), rate)?.crlb_ratio),
        _ => None,
    };
    Ok(CrlbDocument {
        scenario: model.normalized.clone(),
        rate,
        observation_time: model.scenario.observation_time(),
        critical_rate: two_band.map(critical_rate),
        schemes,
        crlb_ratio,
    })
}

/// One row of the RD/selective comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub rate: f64,
    pub lambda_rd: f64,
    pub lambda_sel: f64,
    pub j_low_rd: f64,
    pub j_high_rd: f64,
    pub j_high_sel: f64,
    pub crlb_ratio: f64,
    pub regime: RegimeLabel,
}

pub const COMPARE_HEADER: &str = "rate,lambda_rd,lambda_sel,J_L_rd,J_H_rd,J_H_sel,crlb_ratio,regime";

pub fn compare_row(model: &Model, rate: f64) -> CliResult<CompareRow> {
    let s = model.spectrum.two_band().expect("compare requires a two-band spectrum");
    let c = compare_schemes(s, model.scenario.num_sensors(), rate)?;
    Ok(CompareRow {
        rate,
        lambda_rd: c.rd.operating_point.water_level,
        lambda_sel: c.selective.point.water_level,
        j_low_rd: c.rd.j_low,
        j_high_rd: c.rd.j_high,
        j_high_sel: c.selective.j_high,
        crlb_ratio: c.crlb_ratio,
        regime: c.rd.regime,
    })
}

/// Fixed 17-significant-digit scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl CompareRow {
    pub fn to_csv(&self) -> String {
        let nums = [
            self.rate,
            self.lambda_rd,
            self.lambda_sel,
            self.j_low_rd,
            self.j_high_rd,
            self.j_high_sel,
            self.crlb_ratio,
        ];
        let mut cells: Vec<String> = nums.iter().map(|&x| fmt_float(x)).collect();
        cells.push(self.regime.as_str().to_string());
        cells.join(",")
    }
}

pub const SWEEP_HEADER: &str = "rate,scheme,regime,lambda,gain_low,gain_high,J_L,J_H,fim_trace,crlb_trace,rmse_bound";

pub fn sweep_row(model: &Model, scheme: SchemeChoice, rate: f64) -> CliResult<String> {
    let r = scheme_report(model, scheme, rate)?;
    let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
    let fim_trace: f64 = (0..r.fim.len()).map(|i| r.fim[i][i]).sum();
    let crlb_trace: f64 = (0..r.crlb.len()).map(|i| r.crlb[i][i]).sum();
    Ok([
        fmt_float(rate),
        r.scheme.to_string(),
        r.regime.unwrap_or_default().to_string(),
        fmt_float(r.water_level),
        opt(r.gains.map(|g| g.low)),
        opt(r.gains.map(|g| g.high)),
        opt(r.j_low),
        opt(r.j_high),
        fmt_float(fim_trace),
        fmt_float(crlb_trace),
        fmt_float(r.rmse_bound),
    ]
    .join(","))
}

pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
pub const MONTE_CARLO_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub rate: f64,
    pub scheme: &'static str,
    pub comparison: &'static str,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationDocument {
    pub scenario: ScenarioFile,
    pub checks: Vec<Check>,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidateOptions {
    pub quadrature_nodes: usize,
    pub monte_carlo: Option<usize>,
    pub seed: u64,
    /// Multiplies the information weights of the analytic FIM; `1` in normal
    /// use, anything else is a negative control.
    pub weight_factor: f64,
}

/// Largest `|a − b|/√(b_ii b_jj)`; zero references must be matched exactly.
pub fn max_rel_error(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    if reference.iter().all(|&x| x == 0.0) {
        return if a.iter().all(|&x| x == 0.0) { 0.0 } else { f64::INFINITY };
    }
    normalized_errors(a, reference).max()
}

fn check(rate: f64, scheme: SchemeChoice, comparison: &'static str, err: f64, tolerance: f64) -> Check {
    Check {
        rate,
        scheme: if scheme == SchemeChoice::Selective { "selective" } else { "rd" },
        comparison,
        max_rel_error: err,
        tolerance,
        pass: err < tolerance,
        detail: None,
    }
}

pub fn validate(model: &Model, options: &ValidateOptions) -> CliResult<ValidationDocument> {
    let mut checks = Vec::new();
    let quad_spec = QuadratureSpec::gauss_legendre(options.quadrature_nodes);
    for &rate in &model.rates {
        for scheme in model.schemes() {
            let analytic = analytic_fim(model, scheme, rate, options.weight_factor)?;
            let arr = array(model, scheme, rate)?;
            let quad = fim_rate_quadrature(&model.scenario, &arr, &quad_spec)?;
            let err = max_rel_error(&analytic.entries, &quad.entries);
            checks.push(check(rate, scheme, "analytic_vs_quadrature", err, QUADRATURE_TOLERANCE));
            if model.spectrum.two_band().is_some() {
                let sm = fim_rate_sherman_morrison(&model.scenario, &arr)?;
                let err = max_rel_error(&analytic.entries, &sm.entries);
                checks.push(check(rate, scheme, "analytic_vs_sherman_morrison", err, QUADRATURE_TOLERANCE));
            }
            if let Some(n) = options.monte_carlo {
                let config = McConfig::new(n, options.seed).with_execution(Execution::Parallel);
                let est = monte_carlo_fim(&model.scenario, &arr, &config)?;
                let err = max_rel_error(&est.fim.entries, &analytic.entries);
                let mut c = check(rate, scheme, "analytic_vs_monte_carlo", err, MONTE_CARLO_TOLERANCE);
                let sigma = if analytic.is_zero() {
                    0.0
                } else {
                    normalized_errors(&(&analytic.entries + &est.standard_error), &analytic.entries).max()
                };
                c.detail = Some(format!(
                    "N = {n}, seed = {}, one-sigma rel error {sigma:.3e}, score centered at 3 sigma: {}",
                    options.seed,
                    est.score_is_centered(3.0)
                ));
                checks.push(c);
            }
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(ValidationDocument {
        scenario: model.normalized.clone(),
        checks,
        pass,
    })
}

//! Gaussian rate–distortion test channels.
//!
//! Reverse water-filling on a piecewise-constant observation PSD `S_x`: each
//! band gets gain `B = [1 − λ/S_x]⁺` and compression noise `S_z = λ·B`, where
//! the water level `λ` is pinned by the rate
//! `R = Σ (f_hi − f_lo)·[log₂(S_x/λ)]⁺` (bits/s, one-sided bookkeeping).
//!
//! The two-band model additionally has explicit per-regime water levels and
//! the band-selective alternative, which spends the whole rate on the high
//! band.

use std::f64::consts::LN_2;

use crate::error::{ensure_nonnegative, Error, Result};
use crate::spectra::{band_index, midpoint, PiecewisePsd, TwoBandSpectrum};

/// Rate evaluated at a water level. A zero level over a band with positive
/// power needs infinitely many bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    Unbounded,
}

impl Rate {
    pub fn finite(self) -> Option<f64> {
        match self {
            Rate::Finite(r) => Some(r),
            Rate::Unbounded => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeLabel {
    /// `λ < S_H + N_0`: both bands pass.
    HighRate,
    /// `S_H + N_0 ≤ λ < S_L + N_0`: the high band is dropped.
    IntermediateRate,
    /// `λ ≥ S_L + N_0`: nothing passes.
    LowRate,
}

impl RegimeLabel {
    pub fn from_water_level(spectrum: &TwoBandSpectrum, level: f64) -> Self {
        if level < spectrum.observed_high() {
            RegimeLabel::HighRate
        } else if level < spectrum.observed_low() {
            RegimeLabel::IntermediateRate
        } else {
            RegimeLabel::LowRate
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeLabel::HighRate => "HighRate",
            RegimeLabel::IntermediateRate => "IntermediateRate",
            RegimeLabel::LowRate => "LowRate",
        }
    }
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    RateDistortion,
    BandSelective,
    Custom,
}

/// One constant-gain band `(f_lo, f_hi]` of a test channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelBand {
    pub f_lo: f64,
    pub f_hi: f64,
    pub gain: f64,
    pub compression_noise: f64,
    pub sensor_noise: f64,
}

impl ChannelBand {
    pub fn new(f_lo: f64, f_hi: f64, gain: f64, compression_noise: f64, sensor_noise: f64) -> Self {
        Self {
            f_lo,
            f_hi,
            gain,
            compression_noise,
            sensor_noise,
        }
    }

    /// `S_w = B² N + S_z`.
    pub fn effective_noise(&self) -> f64 {
        self.gain * self.gain * self.sensor_noise + self.compression_noise
    }

    pub fn width(&self) -> f64 {
        self.f_hi - self.f_lo
    }
}

/// Piecewise-constant test channel of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct BandChannel {
    bands: Vec<ChannelBand>,
    edges: Vec<f64>,
    water_level: f64,
    rate: f64,
    kind: ChannelKind,
}

impl BandChannel {
    /// Checks contiguity and ranges; `kind` is [`ChannelKind::Custom`].
    pub fn from_bands(bands: Vec<ChannelBand>, water_level: f64, rate: f64) -> Result<Self> {
        Self::build(bands, water_level, rate, ChannelKind::Custom)
    }

    fn build(bands: Vec<ChannelBand>, water_level: f64, rate: f64, kind: ChannelKind) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::invalid("bands", "at least one band required"));
        }
        ensure_nonnegative("water_level", water_level)?;
        if rate.is_nan() || rate < 0.0 {
            return Err(Error::invalid("rate", format!("must be >= 0, got {rate}")));
        }
        let mut edges = vec![bands[0].f_lo];
        for (k, b) in bands.iter().enumerate() {
            let field = |name: &str| format!("bands[{k}].{name}");
            if !(b.f_lo.is_finite() && b.f_hi.is_finite() && b.f_lo >= 0.0 && b.f_hi > b.f_lo) {
                return Err(Error::invalid(field("f_hi"), "bands need 0 <= f_lo < f_hi"));
            }
            if k > 0 && b.f_lo != bands[k - 1].f_hi {
                return Err(Error::invalid(field("f_lo"), "bands must be contiguous"));
            }
            if !(0.0..=1.0).contains(&b.gain) {
                return Err(Error::invalid(field("gain"), format!("must lie in [0, 1], got {}", b.gain)));
            }
            ensure_nonnegative(&field("compression_noise"), b.compression_noise)?;
            ensure_nonnegative(&field("sensor_noise"), b.sensor_noise)?;
            edges.push(b.f_hi);
        }
        Ok(Self {
            bands,
            edges,
            water_level,
            rate,
            kind,
        })
    }

    /// Unit gain, no compression noise: the uncompressed observation.
    pub fn identity(noise: &PiecewisePsd) -> Self {
        let bands = noise
            .bands()
            .map(|(lo, hi, n)| ChannelBand::new(lo, hi, 1.0, 0.0, n))
            .collect();
        Self::build(bands, 0.0, f64::INFINITY, ChannelKind::Custom).expect("noise PSD is a valid partition")
    }

    pub fn bands(&self) -> &[ChannelBand] {
        &self.bands
    }

    pub fn edges(&self) -> Vec<f64> {
        self.edges.clone()
    }

    pub fn water_level(&self) -> f64 {
        self.water_level
    }

    /// Rate in bits/s the channel was built for.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn band_at(&self, f: f64) -> Option<&ChannelBand> {
        band_index(&self.edges, f).map(|k| &self.bands[k])
    }

    pub fn gain_at(&self, f: f64) -> f64 {
        self.band_at(f).map_or(0.0, |b| b.gain)
    }

    pub fn effective_noise_at(&self, f: f64) -> f64 {
        self.band_at(f).map_or(0.0, |b| b.effective_noise())
    }
}

/// `Σ (f_hi − f_lo)·[log₂(S_x/λ)]⁺` over the bands of the observation PSD.
pub fn rate_of_level(psd: &PiecewisePsd, level: f64) -> Result<Rate> {
    ensure_nonnegative("water_level", level)?;
    if level == 0.0 {
        return Ok(if psd.levels().iter().any(|&l| l > 0.0) {
            Rate::Unbounded
        } else {
            Rate::Finite(0.0)
        });
    }
    let rate = psd
        .bands()
        .filter(|&(_, _, s)| s > level)
        .map(|(lo, hi, s)| (hi - lo) * (s / level).log2())
        .sum();
    Ok(Rate::Finite(rate))
}

/// Distinct positive levels in decreasing order with the total bandwidth at
/// each level.
fn level_widths(psd: &PiecewisePsd) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut bands: Vec<(f64, f64)> = psd
        .bands()
        .filter(|&(_, _, s)| s > 0.0)
        .map(|(lo, hi, s)| (s, hi - lo))
        .collect();
    bands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for (s, w) in bands {
        match out.last_mut() {
            Some(last) if last.0 == s => last.1 += w,
            _ => out.push((s, w)),
        }
    }
    out
}

/// Inverts [`rate_of_level`].
///
/// Scans active sets in order of decreasing level: with the top `k` levels
/// active, `log₂ λ = (Σ W_j log₂ L_j − R) / Σ W_j`, valid while
/// `λ ≥ L_{k+1}`. The result is exact for piecewise-constant PSDs. `R = 0`
/// returns the largest level (nothing passes).
pub fn solve_water_level(psd: &PiecewisePsd, rate: f64) -> Result<f64> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::invalid("rate", format!("must be finite and >= 0, got {rate}")));
    }
    let levels = level_widths(psd);
    let Some(&(top, _)) = levels.first() else {
        return Err(Error::Domain("observation PSD is identically zero".into()));
    };
    if rate == 0.0 {
        return Ok(top);
    }

    let mut width = 0.0;
    let mut weighted_log = 0.0;
    for (k, &(level, w)) in levels.iter().enumerate() {
        width += w;
        weighted_log += w * level.log2();
        let floor = levels.get(k + 1).map_or(0.0, |l| l.0);
        if floor > 0.0 {
            // Rate at λ = floor with the top k+1 levels active.
            let breakpoint: f64 = levels[..=k].iter().map(|&(l, w)| w * (l / floor).log2()).sum();
            if rate > breakpoint {
                continue;
            }
        }
        let level = ((weighted_log - rate) / width).exp2();
        return Ok(level.max(floor).min(levels[0].0));
    }
    unreachable!("the last active set has floor 0 and always terminates the scan")
}

/// Reverse water-filling channel for a sensor with the given source and noise
/// PSDs at `rate` bits/s.
pub fn rd_channel(source: &PiecewisePsd, noise: &PiecewisePsd, rate: f64) -> Result<BandChannel> {
    let observation = source.sum(noise);
    let level = solve_water_level(&observation, rate)?;
    let bands = observation
        .bands()
        .map(|(lo, hi, s)| {
            let gain = if s > level { 1.0 - level / s } else { 0.0 };
            let n = noise.level_at(midpoint(lo, hi));
            ChannelBand::new(lo, hi, gain, level * gain, n)
        })
        .collect();
    BandChannel::build(bands, level, rate, ChannelKind::RateDistortion)
}

/// `2·Σ (f_hi − f_lo)·min(λ, S_x)`: two-sided mean-square distortion at water
/// level `λ`.
pub fn distortion_of_level(psd: &PiecewisePsd, level: f64) -> Result<f64> {
    ensure_nonnegative("water_level", level)?;
    Ok(2.0 * psd.bands().map(|(lo, hi, s)| (hi - lo) * level.min(s)).sum::<f64>())
}

/// Rate at which the water level reaches `S_H + N_0`:
/// `f_L·log₂((S_L + N_0)/(S_H + N_0))`.
pub fn critical_rate(spectrum: &TwoBandSpectrum) -> f64 {
    spectrum.f_low() * (spectrum.observed_low() / spectrum.observed_high()).log2()
}

/// Water level and band gains of the symmetric two-band RD channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub rate: f64,
    pub water_level: f64,
    pub gain_low: f64,
    pub gain_high: f64,
    pub regime: RegimeLabel,
}

impl OperatingPoint {
    /// Effective noise `B² N_0 + λB` on the low band.
    pub fn effective_noise_low(&self, spectrum: &TwoBandSpectrum) -> f64 {
        self.gain_low * self.gain_low * spectrum.noise() + self.water_level * self.gain_low
    }

    pub fn effective_noise_high(&self, spectrum: &TwoBandSpectrum) -> f64 {
        self.gain_high * self.gain_high * spectrum.noise() + self.water_level * self.gain_high
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("rate", format!("must be finite and >= 0, got {rate}")))
    }
}

/// Explicit two-band water level.
///
/// Above the critical rate `λ = 2^(−R/f_H)(S_L+N_0)^(f_L/f_H)(S_H+N_0)^((f_H−f_L)/f_H)`;
/// at or below it `λ = (S_L+N_0)·2^(−R/f_L)` and the high band is dropped.
/// Gains use `expm1` so they stay accurate as they approach zero.
pub fn two_band_operating_point(spectrum: &TwoBandSpectrum, rate: f64) -> Result<OperatingPoint> {
    check_rate(rate)?;
    let (f_l, f_h) = (spectrum.f_low(), spectrum.f_high());
    let (x_l, x_h) = (spectrum.observed_low(), spectrum.observed_high());
    let critical = critical_rate(spectrum);

    let point = if rate == 0.0 {
        OperatingPoint {
            rate,
            water_level: x_l,
            gain_low: 0.0,
            gain_high: 0.0,
            regime: RegimeLabel::LowRate,
        }
    } else if rate > critical {
        let water_level = (-rate / f_h).exp2() * x_l.powf(f_l / f_h) * x_h.powf((f_h - f_l) / f_h);
        // λ/(S_H+N_0) = 2^(−(R − R_crit)/f_H)
        let gain_high = -(-(rate - critical) * LN_2 / f_h).exp_m1();
        OperatingPoint {
            rate,
            water_level,
            gain_low: 1.0 - water_level / x_l,
            gain_high,
            regime: RegimeLabel::HighRate,
        }
    } else {
        OperatingPoint {
            rate,
            water_level: x_l * (-rate / f_l).exp2(),
            gain_low: -(-rate * LN_2 / f_l).exp_m1(),
            gain_high: 0.0,
            regime: RegimeLabel::IntermediateRate,
        }
    };
    Ok(point)
}

/// Regime of the symmetric RD channel; exactly `R = R_crit` counts as
/// intermediate since the high-band gain is already zero there.
pub fn classify_regime(spectrum: &TwoBandSpectrum, rate: f64) -> Result<RegimeLabel> {
    Ok(two_band_operating_point(spectrum, rate)?.regime)
}

fn two_band_channel(
    spectrum: &TwoBandSpectrum,
    gains: (f64, f64),
    water_level: f64,
    rate: f64,
    kind: ChannelKind,
) -> Result<BandChannel> {
    let n = spectrum.noise();
    BandChannel::build(
        vec![
            ChannelBand::new(0.0, spectrum.f_low(), gains.0, water_level * gains.0, n),
            ChannelBand::new(spectrum.f_low(), spectrum.f_high(), gains.1, water_level * gains.1, n),
        ],
        water_level,
        rate,
        kind,
    )
}

/// RD channel built from [`two_band_operating_point`].
pub fn two_band_rd_channel(spectrum: &TwoBandSpectrum, rate: f64) -> Result<BandChannel> {
    let op = two_band_operating_point(spectrum, rate)?;
    two_band_channel(
        spectrum,
        (op.gain_low, op.gain_high),
        op.water_level,
        rate,
        ChannelKind::RateDistortion,
    )
}

/// Water level and high-band gain of the band-selective scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectivePoint {
    pub rate: f64,
    pub water_level: f64,
    pub gain_high: f64,
}

/// `λ_sel = (S_H+N_0)·2^(−R/(f_H−f_L))`: the whole rate is spent on the
/// high band.
pub fn band_selective_point(spectrum: &TwoBandSpectrum, rate: f64) -> Result<SelectivePoint> {
    check_rate(rate)?;
    let width = spectrum.f_high() - spectrum.f_low();
    Ok(SelectivePoint {
        rate,
        water_level: spectrum.observed_high() * (-rate / width).exp2(),
        gain_high: -(-rate * LN_2 / width).exp_m1(),
    })
}

/// Band-selective channel: zero gain on the low band, RD test channel on the
/// high band at the full rate.
pub fn band_selective_channel(spectrum: &TwoBandSpectrum, rate: f64) -> Result<BandChannel> {
    let p = band_selective_point(spectrum, rate)?;
    two_band_channel(spectrum, (0.0, p.gain_high), p.water_level, rate, ChannelKind::BandSelective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper() -> TwoBandSpectrum {
        TwoBandSpectrum::new(5e6, 200e6, 100.0, 20.0, 1.0).unwrap()
    }

    /// Independent oracle: bisection on the monotone rate function.
    fn bisect_level(psd: &PiecewisePsd, rate: f64) -> f64 {
        let (mut lo, mut hi) = (1e-300_f64, psd.max_level());
        for _ in 0..4000 {
            let mid = (lo * hi).sqrt();
            let r = rate_of_level(psd, mid).unwrap().finite().unwrap();
            if r > rate {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-15 {
                break;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn rate_of_level_examples() {
        let psd = paper().observation_psd();
        assert_eq!(rate_of_level(&psd, 101.0).unwrap(), Rate::Finite(0.0));
        assert_eq!(rate_of_level(&psd, 500.0).unwrap(), Rate::Finite(0.0));
        let r = rate_of_level(&psd, 21.0).unwrap().finite().unwrap();
        assert!((r - 5e6 * (101.0_f64 / 21.0).log2()).abs() < 1e-6);
        assert!((r / 1e6 - 11.33).abs() / 11.33 < 5e-3);
        let r = rate_of_level(&psd, 25.25).unwrap().finite().unwrap();
        assert!((r - 10e6).abs() < 1e-6);
        assert_eq!(rate_of_level(&psd, 0.0).unwrap(), Rate::Unbounded);
        assert!(rate_of_level(&psd, -1.0).is_err());
    }

    #[test]
    fn solve_water_level_examples() {
        let spec = paper();
        let psd = spec.observation_psd();
        let level = solve_water_level(&psd, 10e6).unwrap();
        assert!((level - 25.25).abs() < 1e-12);
        assert!((level - bisect_level(&psd, 10e6)).abs() < 1e-12);

        let level = solve_water_level(&psd, critical_rate(&spec)).unwrap();
        assert!((level - 21.0).abs() < 1e-12);

        assert_eq!(solve_water_level(&psd, 0.0).unwrap(), 101.0);
        assert!(solve_water_level(&psd, -1.0).is_err());
        assert!(solve_water_level(&psd, f64::NAN).is_err());

        let level = solve_water_level(&psd, 1e12).unwrap();
        assert!(level < 1e-20);
        let ch = rd_channel(&spec.source_psd(), &spec.noise_psd(), 1e12).unwrap();
        assert!(ch.bands().iter().all(|b| 1.0 - b.gain < 1e-20));
    }

    #[test]
    fn rd_channel_examples() {
        let spec = paper();
        let ch = rd_channel(&spec.source_psd(), &spec.noise_psd(), 0.0).unwrap();
        assert!(ch.bands().iter().all(|b| b.gain == 0.0 && b.compression_noise == 0.0));

        let ch = rd_channel(&spec.source_psd(), &spec.noise_psd(), 10e6).unwrap();
        assert!((ch.gain_at(1e6) - 0.75).abs() < 1e-12);
        assert_eq!(ch.gain_at(50e6), 0.0);
        assert_eq!(ch.kind(), ChannelKind::RateDistortion);

        // Above twice the critical rate both bands pass; oracle is the explicit
        // high-rate level vs bisection.
        let rate = 2.0 * critical_rate(&spec);
        let ch = rd_channel(&spec.source_psd(), &spec.noise_psd(), rate).unwrap();
        let explicit = (-rate / 200e6).exp2() * 101.0_f64.powf(5.0 / 200.0) * 21.0_f64.powf(195.0 / 200.0);
        let bisected = bisect_level(&spec.observation_psd(), rate);
        assert!((explicit - bisected).abs() < 1e-12 * explicit);
        assert!((ch.water_level() - explicit).abs() < 1e-12 * explicit);
        assert!(ch.gain_at(1e6) > 0.0 && ch.gain_at(100e6) > 0.0);
        assert!(explicit < 21.0);
    }

    #[test]
    fn channel_invariants_hold_exactly() {
        let spec = paper();
        for rate in [0.0, 1e3, 5e6, 10e6, 11.3e6, 12e6, 50e6, 1e9] {
            for ch in [
                rd_channel(&spec.source_psd(), &spec.noise_psd(), rate).unwrap(),
                two_band_rd_channel(&spec, rate).unwrap(),
                band_selective_channel(&spec, rate).unwrap(),
            ] {
                for b in ch.bands() {
                    assert_eq!(b.compression_noise, ch.water_level() * b.gain);
                    assert!((0.0..1.0).contains(&b.gain));
                }
            }
        }
    }

    #[test]
    fn critical_rate_examples() {
        let r = critical_rate(&paper());
        assert!((r / 1e6 - 11.33).abs() / 11.33 < 5e-3);
        assert!((r - 5e6 * (101.0_f64 / 21.0).log2()).abs() < 1e-6);

        let noisy = TwoBandSpectrum::new(5e6, 200e6, 100.0, 20.0, 1e12).unwrap();
        assert!(critical_rate(&noisy) < 1e-3);
    }

    #[test]
    fn regime_examples() {
        let spec = paper();
        let rc = critical_rate(&spec);
        assert_eq!(classify_regime(&spec, 10e6).unwrap(), RegimeLabel::IntermediateRate);
        assert_eq!(classify_regime(&spec, 0.0).unwrap(), RegimeLabel::LowRate);
        assert_eq!(classify_regime(&spec, rc).unwrap(), RegimeLabel::IntermediateRate);
        assert_eq!(classify_regime(&spec, 1.1 * rc).unwrap(), RegimeLabel::HighRate);
        let bisected = bisect_level(&spec.observation_psd(), 1.1 * rc);
        assert!(bisected < spec.observed_high());
        assert_eq!(RegimeLabel::from_water_level(&spec, bisected), RegimeLabel::HighRate);
        assert_eq!(RegimeLabel::from_water_level(&spec, 21.0), RegimeLabel::IntermediateRate);
        assert_eq!(RegimeLabel::from_water_level(&spec, 101.0), RegimeLabel::LowRate);
    }

    #[test]
    fn generic_channel_drops_high_band_at_and_below_critical_rate() {
        let spec = paper();
        let rc = critical_rate(&spec);
        for rate in [rc, rc * (1.0 - 1e-15), 0.999 * rc, 1e-3] {
            let ch = rd_channel(&spec.source_psd(), &spec.noise_psd(), rate).unwrap();
            assert_eq!(ch.gain_at(100e6), 0.0, "rate {rate}");
        }
    }

    #[test]
    fn band_selective_examples() {
        let spec = paper();
        let p = band_selective_point(&spec, 10e6).unwrap();
        // Oracle: bisection on the selective rate constraint.
        let sel_psd = PiecewisePsd::new(vec![5e6, 200e6], vec![21.0]).unwrap();
        let bisected = bisect_level(&sel_psd, 10e6);
        assert!((p.water_level - bisected).abs() < 1e-10 * bisected);
        // 50-digit reference values.
        assert!((p.water_level - 20.2666449440528).abs() < 1e-12);
        assert!((p.gain_high - 0.0349216693308177).abs() < 1e-15);
        assert!((p.gain_high - (1.0 - p.water_level / 21.0)).abs() < 1e-15);

        let ch = band_selective_channel(&spec, 10e6).unwrap();
        assert_eq!(ch.gain_at(1e6), 0.0);
        assert_eq!(ch.gain_at(5e6), 0.0);
        assert_eq!(ch.rate(), 10e6);
        assert_eq!(ch.kind(), ChannelKind::BandSelective);

        assert!(1.0 - band_selective_point(&spec, 1e12).unwrap().gain_high < 1e-12);
        let tiny = band_selective_point(&spec, 1e-6).unwrap().gain_high;
        assert!(tiny > 0.0 && tiny < 1e-14);
    }

    #[test]
    fn distortion_examples() {
        let psd = paper().observation_psd();
        assert_eq!(distortion_of_level(&psd, 0.0).unwrap(), 0.0);
        let total = 2.0 * (5e6 * 101.0 + 195e6 * 21.0);
        assert_eq!(distortion_of_level(&psd, 1000.0).unwrap(), total);
        assert_eq!(distortion_of_level(&psd, 21.0).unwrap(), 8.4e9);
    }

    #[test]
    fn closed_form_and_generic_levels_agree_and_are_continuous() {
        let spec = paper();
        let psd = spec.observation_psd();
        let rc = critical_rate(&spec);
        for k in 0..100 {
            let rate = rc * 10f64.powf(-3.0 + 6.0 * k as f64 / 99.0);
            let generic = solve_water_level(&psd, rate).unwrap();
            let op = two_band_operating_point(&spec, rate).unwrap();
            assert!((generic - op.water_level).abs() <= 1e-12 * op.water_level);
            if op.regime == RegimeLabel::HighRate {
                let ch = rd_channel(&spec.source_psd(), &spec.noise_psd(), rate).unwrap();
                let bis = bisect_level(&psd, rate);
                for (g, s) in [(op.gain_low, 101.0), (op.gain_high, 21.0)] {
                    assert!((g - (1.0 - bis / s)).abs() <= 1e-10 * g);
                }
                assert!((ch.gain_at(100e6) - op.gain_high).abs() <= 1e-10 * op.gain_high);
            }
        }
        let below = two_band_operating_point(&spec, rc * (1.0 - 1e-12)).unwrap();
        let above = two_band_operating_point(&spec, rc * (1.0 + 1e-12)).unwrap();
        let at = two_band_operating_point(&spec, rc).unwrap();
        assert!((below.water_level - above.water_level).abs() < 1e-9 * at.water_level);
        assert!((at.water_level - 21.0).abs() < 1e-12);
        // High-rate formula evaluated at the boundary.
        let high_at_rc = (-rc / 200e6).exp2() * 101.0_f64.powf(5.0 / 200.0) * 21.0_f64.powf(195.0 / 200.0);
        assert!((high_at_rc - at.water_level).abs() < 1e-12 * 21.0);
    }

    proptest! {
        #[test]
        fn round_trip_on_random_psds(
            levels in prop::collection::vec(0.0..1e3f64, 1..6),
            widths in prop::collection::vec(0.1..10.0f64, 6),
            frac in -3.0..1.0f64,
        ) {
            let mut edges = vec![0.0];
            for w in widths.iter().take(levels.len()) {
                edges.push(edges.last().unwrap() + w);
            }
            let psd = PiecewisePsd::new(edges, levels).unwrap();
            prop_assume!(psd.max_level() > 1e-9);
            // Up to 10x the rate that keeps every level above 1e-3 of the
            // peak; far beyond that the level underflows to the lossless 0.
            let total = rate_of_level(&psd, psd.max_level() * 1e-3).unwrap().finite().unwrap();
            let rate = total * 10f64.powf(frac);
            let level = solve_water_level(&psd, rate).unwrap();
            let back = rate_of_level(&psd, level).unwrap().finite().unwrap();
            prop_assert!((back - rate).abs() <= (1e-9 * rate).max(1e-12));
            let bis = bisect_level(&psd, rate);
            prop_assert!((bis - level).abs() <= 1e-9 * level);
        }

        #[test]
        fn rate_and_distortion_are_monotone(a in 0.01..200.0f64, b in 0.01..200.0f64) {
            let psd = paper().observation_psd();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let r = |l| rate_of_level(&psd, l).unwrap().finite().unwrap();
            prop_assert!(r(lo) >= r(hi));
            prop_assert!(distortion_of_level(&psd, lo).unwrap() <= distortion_of_level(&psd, hi).unwrap());
        }
    }
}

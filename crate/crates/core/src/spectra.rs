//! Piecewise-constant power spectral densities, steering vectors and the
//! uncompressed/compressed cross-spectral density (CSD) matrices.
//!
//! PSDs are even functions of frequency and are stored one-sided: a band
//! `(lo, hi]` with level `S` stands for `S` on `lo < |f| ≤ hi`. The first band
//! is closed at zero, so `f = 0` belongs to it. Beyond the last edge the PSD is
//! zero. Integrals over the two-sided spectrum become one-sided integrals with
//! an explicit factor of two.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::compression::BandChannel;
use crate::error::{ensure_positive, Error, Result};
use crate::geometry::Scenario;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Even, piecewise-constant PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePsd {
    edges: Vec<f64>,
    levels: Vec<f64>,
}

impl PiecewisePsd {
    /// `edges` must be strictly increasing, nonnegative and one longer than
    /// `levels`.
    pub fn new(edges: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("levels", "at least one band required"));
        }
        if edges.len() != levels.len() + 1 {
            return Err(Error::invalid(
                "edges",
                format!("expected {} edges for {} levels, got {}", levels.len() + 1, levels.len(), edges.len()),
            ));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges[0] < 0.0 {
            return Err(Error::invalid("edges", "edges must be finite and nonnegative"));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("edges", "edges must be strictly increasing"));
        }
        for (k, &l) in levels.iter().enumerate() {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::invalid(format!("levels[{k}]"), format!("must be finite and >= 0, got {l}")));
            }
        }
        Ok(Self { edges, levels })
    }

    /// Single flat band on `[0, bandwidth]`.
    pub fn flat(level: f64, bandwidth: f64) -> Result<Self> {
        Self::new(vec![0.0, bandwidth], vec![level])
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Iterates `(lo, hi, level)` triples.
    pub fn bands(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.edges
            .windows(2)
            .zip(&self.levels)
            .map(|(w, &level)| (w[0], w[1], level))
    }

    pub fn bandwidth(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    pub fn max_level(&self) -> f64 {
        self.levels.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the band containing `|f|`, or `None` outside the support.
    pub fn band_index(&self, f: f64) -> Option<usize> {
        band_index(&self.edges, f)
    }

    pub fn level_at(&self, f: f64) -> f64 {
        self.band_index(f).map_or(0.0, |k| self.levels[k])
    }

    /// Re-expresses the PSD on the union of its own edges and `extra`; the
    /// function is unchanged, only the band partition is refined.
    pub fn refined(&self, extra: &[f64]) -> Self {
        let edges = merge_edges(&[&self.edges, extra]);
        let levels = edges.windows(2).map(|w| self.level_at(midpoint(w[0], w[1]))).collect();
        Self { edges, levels }
    }

    /// Pointwise sum on the merged band partition.
    pub fn sum(&self, other: &PiecewisePsd) -> Self {
        let edges = merge_edges(&[&self.edges, &other.edges]);
        let levels = edges
            .windows(2)
            .map(|w| {
                let f = midpoint(w[0], w[1]);
                self.level_at(f) + other.level_at(f)
            })
            .collect();
        Self { edges, levels }
    }
}

pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    lo + 0.5 * (hi - lo)
}

pub(crate) fn band_index(edges: &[f64], f: f64) -> Option<usize> {
    let f = f.abs();
    let last = *edges.last()?;
    if f > last || f < edges[0] || (f == edges[0] && edges[0] > 0.0) {
        return None;
    }
    // First band whose upper edge is >= f: bands are (lo, hi].
    let k = edges[1..].partition_point(|&hi| hi < f);
    Some(k)
}

/// Sorted union of edge lists, dropping exact duplicates.
pub(crate) fn merge_edges(lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup();
    all
}

/// Source PSD plus one noise PSD per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ArraySpectrum {
    pub source: PiecewisePsd,
    pub noise: Vec<PiecewisePsd>,
}

impl ArraySpectrum {
    pub fn uniform(source: PiecewisePsd, noise: PiecewisePsd, sensors: usize) -> Self {
        Self {
            source,
            noise: vec![noise; sensors],
        }
    }

    /// Observation PSD `S_s + S_n,m` seen by sensor `m`.
    pub fn observation(&self, m: usize) -> PiecewisePsd {
        self.source.sum(&self.noise[m])
    }
}

/// Two-band, two-level source spectrum with flat sensor noise:
/// `S_L` on `|f| ≤ f_L`, `S_H` on `f_L < |f| ≤ f_H`, noise `N_0` on `|f| ≤ f_H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoBandSpectrum {
    f_low: f64,
    f_high: f64,
    s_low: f64,
    s_high: f64,
    noise: f64,
}

impl TwoBandSpectrum {
    /// Field names in errors follow the `f_L`, `f_H`, `S_L`, `S_H`, `N_0`
    /// convention of the scenario file.
    pub fn new(f_low: f64, f_high: f64, s_low: f64, s_high: f64, noise: f64) -> Result<Self> {
        ensure_positive("f_L", f_low)?;
        ensure_positive("f_H", f_high)?;
        if f_high <= f_low {
            return Err(Error::invalid("f_H", format!("must exceed f_L = {f_low}, got {f_high}")));
        }
        ensure_positive("S_L", s_low)?;
        ensure_positive("S_H", s_high)?;
        if s_high >= s_low {
            return Err(Error::invalid("S_H", format!("must be below S_L = {s_low}, got {s_high}")));
        }
        ensure_positive("N_0", noise)?;
        Ok(Self {
            f_low,
            f_high,
            s_low,
            s_high,
            noise,
        })
    }

    pub fn f_low(&self) -> f64 {
        self.f_low
    }
    pub fn f_high(&self) -> f64 {
        self.f_high
    }
    pub fn s_low(&self) -> f64 {
        self.s_low
    }
    pub fn s_high(&self) -> f64 {
        self.s_high
    }
    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Observation level `S_L + N_0` on the low band.
    pub fn observed_low(&self) -> f64 {
        self.s_low + self.noise
    }

    /// Observation level `S_H + N_0` on the high band.
    pub fn observed_high(&self) -> f64 {
        self.s_high + self.noise
    }

    pub fn source_psd(&self) -> PiecewisePsd {
        PiecewisePsd {
            edges: vec![0.0, self.f_low, self.f_high],
            levels: vec![self.s_low, self.s_high],
        }
    }

    /// Noise PSD on the same two-band partition as the source.
    pub fn noise_psd(&self) -> PiecewisePsd {
        PiecewisePsd {
            edges: vec![0.0, self.f_low, self.f_high],
            levels: vec![self.noise, self.noise],
        }
    }

    pub fn observation_psd(&self) -> PiecewisePsd {
        PiecewisePsd {
            edges: vec![0.0, self.f_low, self.f_high],
            levels: vec![self.observed_low(), self.observed_high()],
        }
    }

    pub fn array_spectrum(&self, sensors: usize) -> ArraySpectrum {
        ArraySpectrum::uniform(self.source_psd(), self.noise_psd(), sensors)
    }

    /// Multiplies all three PSD levels by `factor`.
    pub fn scale_levels(&self, factor: f64) -> Result<Self> {
        Self::new(self.f_low, self.f_high, factor * self.s_low, factor * self.s_high, factor * self.noise)
    }

    /// Multiplies both band edges by `factor`.
    pub fn scale_frequencies(&self, factor: f64) -> Result<Self> {
        Self::new(factor * self.f_low, factor * self.f_high, self.s_low, self.s_high, self.noise)
    }
}

/// Per-frequency vector of delay phase factors `exp(−j2πf τ_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(pub CVector);

impl SteeringVector {
    pub fn entries(&self) -> &CVector {
        &self.0
    }
}

pub fn steering_vector(scenario: &Scenario, f: f64) -> SteeringVector {
    let w = -2.0 * std::f64::consts::PI * f;
    SteeringVector(CVector::from_fn(scenario.num_sensors(), |m, _| {
        Complex64::from_polar(1.0, w * scenario.delay(m))
    }))
}

/// `S_s(f)·v vᴴ + diag(S_n,m(f))`.
pub fn uncompressed_csd(scenario: &Scenario, spectrum: &ArraySpectrum, f: f64) -> CMatrix {
    let v = steering_vector(scenario, f).0;
    let s = spectrum.source.level_at(f);
    let mut out = (&v * v.adjoint()) * Complex64::from(s);
    for (m, noise) in spectrum.noise.iter().enumerate() {
        out[(m, m)] += noise.level_at(f);
    }
    out
}

/// Source PSD together with the per-sensor test channels: everything needed to
/// evaluate the compressed CSD.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedArray {
    pub source: PiecewisePsd,
    pub channels: Vec<BandChannel>,
}

impl CompressedArray {
    pub fn new(source: PiecewisePsd, channels: Vec<BandChannel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid("channels", "at least one channel required"));
        }
        Ok(Self { source, channels })
    }

    pub fn num_sensors(&self) -> usize {
        self.channels.len()
    }

    /// Gains `B_m(f)`.
    pub fn gains(&self, f: f64) -> DVector<f64> {
        DVector::from_iterator(self.channels.len(), self.channels.iter().map(|c| c.gain_at(f)))
    }

    /// Diagonal of `Σ(f)`: `B_m² S_n,m + S_z,m`.
    pub fn effective_noise(&self, f: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.channels.len(),
            self.channels.iter().map(|c| c.effective_noise_at(f)),
        )
    }

    /// Sorted union of every band edge in the source PSD and the channels.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut lists: Vec<&[f64]> = vec![self.source.edges()];
        let channel_edges: Vec<Vec<f64>> = self.channels.iter().map(|c| c.edges()).collect();
        lists.extend(channel_edges.iter().map(|e| e.as_slice()));
        merge_edges(&lists)
    }

    /// Sensors whose channel passes signal at `f` (`B_m(f) > 0` and a positive
    /// effective noise level). Only these rows/columns of the compressed CSD are
    /// invertible.
    pub fn live_sensors(&self, f: f64) -> Vec<usize> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.gain_at(f) > 0.0 && c.effective_noise_at(f) > 0.0)
            .map(|(m, _)| m)
            .collect()
    }

    /// True when every sensor uses the same channel.
    pub fn is_symmetric(&self) -> bool {
        self.channels.windows(2).all(|w| w[0] == w[1])
    }
}

/// `S_s(f)·B v vᴴ B + Σ(f)`.
pub fn compressed_csd(scenario: &Scenario, array: &CompressedArray, f: f64) -> CMatrix {
    compressed_csd_probed(scenario, array, f, f)
}

/// As [`compressed_csd`], with the piecewise-constant levels and gains looked
/// up at `probe` instead of `f`. Quadrature rules that touch band edges use a
/// probe inside the interval being integrated.
pub(crate) fn compressed_csd_probed(scenario: &Scenario, array: &CompressedArray, f: f64, probe: f64) -> CMatrix {
    let v = steering_vector(scenario, f).0;
    let b = array.gains(probe);
    let bv = CVector::from_fn(v.len(), |m, _| v[m] * b[m]);
    let s = array.source.level_at(probe);
    let mut out = (&bv * bv.adjoint()) * Complex64::from(s);
    for (m, w) in array.effective_noise(probe).iter().enumerate() {
        out[(m, m)] += w;
    }
    out
}

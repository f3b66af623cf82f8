//! Monte-Carlo Fisher information from simulated frequency-domain snapshots.
//!
//! Each snapshot is one DFT bin `X ~ CN(0, T·S(f_k))` on the grid `k/T`
//! restricted to the active support. Snapshot `n` draws a jitter `u_n` from
//! its own ChaCha stream and lands in bin `⌊(n + u_n)·K/N⌋`, so bins are
//! covered evenly and the assignment is monotone in `n`. The score of the
//! complex-Gaussian likelihood,
//!
//! ```text
//! s_i = Re(Yᴴ S⁻¹ S′_i S⁻¹ Y) − tr(S⁻¹ S′_i),   Y = X/√T,
//! ```
//!
//! has per-bin covariance `tr(S⁻¹S′_iS⁻¹S′_j)`, and summing that over the `K`
//! active bins gives `T·J_∞`. The estimator is therefore
//! `Ĵ = K/(N·T)·Σ_n s_n s_nᵀ`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Execution};
use crate::geometry::Scenario;
use crate::spectra::{compressed_csd_probed, midpoint, CMatrix, CVector, CompressedArray};
use crate::whittle::{active_intervals, csd_derivative_probed, hermitian_inverse, restrict, symmetrize, FimMethod, FimRate};

/// Minimum number of DFT bins per simulated band.
pub const MIN_BINS_PER_BAND: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub snapshots: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            snapshots: 20_000,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl McConfig {
    pub fn new(snapshots: usize, seed: u64) -> Self {
        Self {
            snapshots,
            seed,
            ..Self::default()
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// One DFT bin: its frequency `k/T` and the interior frequency used to look
/// up the piecewise-constant levels of the band it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub index: u64,
    pub frequency: f64,
    pub probe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Position in [`SnapshotBatch::bins`].
    pub bin: usize,
    /// `M` complex DFT coefficients; zero for sensors dead in this bin.
    pub values: CVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBatch {
    bins: Vec<Bin>,
    snapshots: Vec<Snapshot>,
    seed: u64,
    observation_time: f64,
    sensors: usize,
}

impl SnapshotBatch {
    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn observation_time(&self) -> f64 {
        self.observation_time
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.frequency).collect()
    }
}

/// DFT grid `k/T` over the active support, at least
/// [`MIN_BINS_PER_BAND`] bins per band. With no active band the grid covers
/// the full support and every snapshot is zero.
pub fn frequency_grid(array: &CompressedArray, observation_time: f64) -> Result<Vec<Bin>> {
    let mut intervals = active_intervals(array);
    if intervals.is_empty() {
        intervals = array.breakpoints().windows(2).map(|w| (w[0], w[1])).collect();
    }
    let mut bins = Vec::new();
    for (lo, hi) in intervals {
        let first = bin_floor(lo * observation_time) + 1;
        let last = bin_floor(hi * observation_time);
        let count = last.saturating_sub(first) + u64::from(last >= first);
        if count < MIN_BINS_PER_BAND as u64 {
            return Err(Error::Contract(format!(
                "band ({lo}, {hi}] Hz holds {count} bins at T = {observation_time} s; at least {MIN_BINS_PER_BAND} are required"
            )));
        }
        let probe = midpoint(lo, hi);
        bins.extend((first..=last).map(|k| Bin {
            index: k,
            frequency: k as f64 / observation_time,
            probe,
        }));
    }
    Ok(bins)
}

/// `⌊x⌋`, snapping values within rounding of an integer onto it so band
/// edges that are exact multiples of `1/T` stay in their own band.
fn bin_floor(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as u64
    } else {
        x.floor() as u64
    }
}

fn snapshot_rng(base: &ChaCha8Rng, n: usize) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(n as u64);
    rng
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Cholesky factor of the live-sensor CSD at a bin.
fn bin_factor(scenario: &Scenario, array: &CompressedArray, bin: &Bin) -> Result<(Vec<usize>, Option<CMatrix>)> {
    let live = array.live_sensors(bin.probe);
    if live.is_empty() {
        return Ok((live, None));
    }
    let s = restrict(&compressed_csd_probed(scenario, array, bin.frequency, bin.probe), &live);
    let chol = Cholesky::new(s).ok_or(Error::SingularCsd {
        frequency: bin.frequency,
        condition: f64::INFINITY,
    })?;
    Ok((live, Some(chol.l())))
}

fn draw(
    factor: &Option<CMatrix>,
    live: &[usize],
    sensors: usize,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> CVector {
    let mut out = CVector::zeros(sensors);
    if let Some(l) = factor {
        let z = CVector::from_fn(live.len(), |_, _| complex_normal(rng));
        let x = l * z;
        for (k, &m) in live.iter().enumerate() {
            out[m] = x[k] * scale;
        }
    }
    out
}

/// Contiguous runs `[start, end)` of snapshots sharing a bin.
fn bin_runs(bins: &[usize]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for n in 1..=bins.len() {
        if n == bins.len() || bins[n] != bins[start] {
            runs.push((start, n));
            start = n;
        }
    }
    runs
}

/// Draws `config.snapshots` bin snapshots with covariance `T·S(f_k)`.
pub fn simulate_snapshots(scenario: &Scenario, array: &CompressedArray, config: &McConfig) -> Result<SnapshotBatch> {
    if config.snapshots == 0 {
        return Err(Error::invalid("mc.snapshots", "must be positive"));
    }
    if scenario.num_sensors() != array.num_sensors() {
        return Err(Error::Contract(format!(
            "scenario has {} sensors but {} channels were given",
            scenario.num_sensors(),
            array.num_sensors()
        )));
    }
    let t = scenario.observation_time();
    let bins = frequency_grid(array, t)?;
    let k = bins.len();
    let n_total = config.snapshots;
    let base = ChaCha8Rng::seed_from_u64(config.seed);
    let assignment: Vec<usize> = config.execution.map_indexed(n_total, |n| {
        let u: f64 = snapshot_rng(&base, n).random();
        let pos = ((n as f64 + u) * k as f64 / n_total as f64).floor() as usize;
        pos.min(k - 1)
    });
    let runs = bin_runs(&assignment);
    let m = scenario.num_sensors();
    let scale = t.sqrt();
    let drawn = config.execution.map_slice(&runs, |&(start, end)| {
        let (live, factor) = bin_factor(scenario, array, &bins[assignment[start]])?;
        Ok((start..end)
            .map(|n| {
                let mut rng = snapshot_rng(&base, n);
                let _: f64 = rng.random();
                Snapshot {
                    bin: assignment[n],
                    values: draw(&factor, &live, m, scale, &mut rng),
                }
            })
            .collect::<Vec<_>>())
    });
    let mut snapshots = Vec::with_capacity(n_total);
    for run in drawn {
        snapshots.extend(run?);
    }
    Ok(SnapshotBatch {
        bins,
        snapshots,
        seed: config.seed,
        observation_time: t,
        sensors: m,
    })
}

/// `count` independent draws of a single bin at `f` (scaled by `T`), for
/// checking the per-bin covariance directly.
pub fn draw_bin_snapshots(
    scenario: &Scenario,
    array: &CompressedArray,
    f: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<CVector>> {
    let bin = Bin {
        index: 0,
        frequency: f,
        probe: f,
    };
    let (live, factor) = bin_factor(scenario, array, &bin)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let scale = scenario.observation_time().sqrt();
    Ok((0..count)
        .map(|n| draw(&factor, &live, scenario.num_sensors(), scale, &mut snapshot_rng(&base, n)))
        .collect())
}

/// Score-covariance estimate of `J_∞` with its sampling uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub fim: FimRate,
    /// Standard error of each FIM entry, from the within-bin spread of
    /// `s sᵀ` around its per-bin expectation.
    pub standard_error: DMatrix<f64>,
    /// Sample mean of the per-snapshot score.
    pub mean_score: DVector<f64>,
    /// `σ/√N` of each score coordinate.
    pub mean_score_error: DVector<f64>,
    pub snapshots: usize,
    pub bins: usize,
}

impl McEstimate {
    /// True when every score coordinate averages to within `k` standard
    /// errors of zero.
    pub fn score_is_centered(&self, k: f64) -> bool {
        self.mean_score
            .iter()
            .zip(self.mean_score_error.iter())
            .all(|(m, e)| m.abs() <= k * e)
    }
}

struct BinScoreModel {
    live: Vec<usize>,
    /// `S⁻¹ S′_i S⁻¹` per coordinate.
    quadratic: Vec<CMatrix>,
    /// `tr(S⁻¹ S′_i)`.
    offset: Vec<f64>,
    /// Expected `s sᵀ`: `tr(S⁻¹S′_iS⁻¹S′_j)`.
    expected: DMatrix<f64>,
}

fn score_model(scenario: &Scenario, array: &CompressedArray, bin: &Bin) -> Result<BinScoreModel> {
    let d = scenario.dim();
    let live = array.live_sensors(bin.probe);
    if live.is_empty() {
        return Ok(BinScoreModel {
            live,
            quadratic: Vec::new(),
            offset: vec![0.0; d],
            expected: DMatrix::zeros(d, d),
        });
    }
    let s = restrict(&compressed_csd_probed(scenario, array, bin.frequency, bin.probe), &live);
    let (inv, _) = hermitian_inverse(&s, bin.frequency)?;
    let left: Vec<CMatrix> = (0..d)
        .map(|i| &inv * restrict(&csd_derivative_probed(scenario, array, bin.frequency, bin.probe, i), &live))
        .collect();
    let offset = left.iter().map(|a| a.trace().re).collect();
    let expected = DMatrix::from_fn(d, d, |i, j| (&left[i] * &left[j]).trace().re);
    let quadratic = left.iter().map(|a| a * &inv).collect();
    Ok(BinScoreModel {
        live,
        quadratic,
        offset,
        expected,
    })
}

fn score(model: &BinScoreModel, values: &CVector, scale: f64) -> Vec<f64> {
    if model.live.is_empty() {
        return vec![0.0; model.offset.len()];
    }
    let y = CVector::from_fn(model.live.len(), |k, _| values[model.live[k]] * scale);
    model
        .quadratic
        .iter()
        .zip(&model.offset)
        .map(|(a, c)| (y.adjoint() * a * &y)[(0, 0)].re - c)
        .collect()
}

/// Empirical FIM rate `K/(N·T)·Σ s sᵀ` from a simulated batch.
pub fn empirical_fim(
    batch: &SnapshotBatch,
    scenario: &Scenario,
    array: &CompressedArray,
    execution: Execution,
) -> Result<McEstimate> {
    let d = scenario.dim();
    if batch.sensors != scenario.num_sensors() || batch.sensors != array.num_sensors() {
        return Err(Error::Contract(format!(
            "batch was drawn for {} sensors, scenario has {} and array {}",
            batch.sensors,
            scenario.num_sensors(),
            array.num_sensors()
        )));
    }
    let n_total = batch.snapshots.len();
    let assignment: Vec<usize> = batch.snapshots.iter().map(|s| s.bin).collect();
    let runs = bin_runs(&assignment);
    let scale = 1.0 / batch.observation_time.sqrt();
    let width = 2 * d * d + 2 * d;
    // Per-run accumulators: Σ s sᵀ, Σ (s sᵀ − E[s sᵀ])², Σ s, Σ s².
    let partial = execution.map_slice(&runs, |&(start, end)| -> Result<Vec<f64>> {
        let bin = &batch.bins[assignment[start]];
        let model = score_model(scenario, array, bin).map_err(|e| match e {
            Error::SingularCsd { frequency, condition } => Error::SingularCsd { frequency, condition },
            other => other,
        })?;
        let mut acc = vec![0.0; width];
        for snap in &batch.snapshots[start..end] {
            let s = score(&model, &snap.values, scale);
            for j in 0..d {
                for i in 0..d {
                    let q = s[i] * s[j];
                    acc[i + d * j] += q;
                    acc[d * d + i + d * j] += (q - model.expected[(i, j)]).powi(2);
                }
            }
            for i in 0..d {
                acc[2 * d * d + i] += s[i];
                acc[2 * d * d + d + i] += s[i] * s[i];
            }
        }
        Ok(acc)
    });
    let partial = partial.into_iter().collect::<Result<Vec<_>>>()?;
    let total = pairwise_sum(&partial, width);
    let weight = batch.bins.len() as f64 / (n_total as f64 * batch.observation_time);
    let fim = DMatrix::from_fn(d, d, |i, j| weight * total[i + d * j]);
    let standard_error = DMatrix::from_fn(d, d, |i, j| weight * total[d * d + i + d * j].sqrt());
    let n = n_total as f64;
    let mean_score = DVector::from_fn(d, |i, _| total[2 * d * d + i] / n);
    let mean_score_error = DVector::from_fn(d, |i, _| {
        let var = (total[2 * d * d + d + i] / n - mean_score[i].powi(2)).max(0.0);
        (var / n).sqrt()
    });
    Ok(McEstimate {
        fim: FimRate::new(symmetrize(fim), FimMethod::MonteCarlo),
        standard_error,
        mean_score,
        mean_score_error,
        snapshots: n_total,
        bins: batch.bins.len(),
    })
}

/// Simulates and estimates in one step.
pub fn monte_carlo_fim(scenario: &Scenario, array: &CompressedArray, config: &McConfig) -> Result<McEstimate> {
    let batch = simulate_snapshots(scenario, array, config)?;
    empirical_fim(&batch, scenario, array, config.execution)
}

/// `|Ĵ_ij − J_ij| / √(J_ii J_jj)`: entrywise error scaled so off-diagonal
/// entries near zero are judged against the diagonal.
pub fn normalized_errors(estimate: &DMatrix<f64>, reference: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(reference.nrows(), reference.ncols(), |i, j| {
        let scale = (reference[(i, i)] * reference[(j, j)]).sqrt();
        (estimate[(i, j)] - reference[(i, j)]).abs() / scale
    })
}

/// RMS over independent seeds of the normalized Frobenius error at two
/// snapshot counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingStudy {
    pub small: usize,
    pub large: usize,
    pub replicates: usize,
    pub rms_small: f64,
    pub rms_large: f64,
}

impl ScalingStudy {
    /// Observed error ratio `rms_large / rms_small`.
    pub fn ratio(&self) -> f64 {
        self.rms_large / self.rms_small
    }

    /// Ratio predicted by `1/√N` scaling.
    pub fn expected_ratio(&self) -> f64 {
        (self.small as f64 / self.large as f64).sqrt()
    }

    /// Observed ratio within a factor `band` of the prediction.
    pub fn within(&self, band: f64) -> bool {
        let e = self.expected_ratio();
        let r = self.ratio();
        r >= e / band && r <= e * band
    }
}

pub fn scaling_study(
    scenario: &Scenario,
    array: &CompressedArray,
    reference: &DMatrix<f64>,
    small: usize,
    large: usize,
    replicates: usize,
    seed: u64,
    execution: Execution,
) -> Result<ScalingStudy> {
    let rms = |n: usize, offset: u64| -> Result<f64> {
        let mut sum = 0.0;
        for r in 0..replicates as u64 {
            let config = McConfig::new(n, seed.wrapping_add(2 * r + offset)).with_execution(execution);
            let est = monte_carlo_fim(scenario, array, &config)?;
            sum += normalized_errors(&est.fim.entries, reference).norm_squared();
        }
        Ok((sum / replicates as f64).sqrt())
    };
    Ok(ScalingStudy {
        small,
        large,
        replicates,
        rms_small: rms(small, 0)?,
        rms_large: rms(large, 1)?,
    })
}

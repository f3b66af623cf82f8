//! Whittle Fisher-information rate of the compressed array.
//!
//! `[J_∞]_ij = ½∫ tr(S⁻¹ S′_i S⁻¹ S′_j) df` over the two-sided spectrum, i.e.
//! the one-sided integral of the trace. Two evaluation routes are provided:
//! dense numerical quadrature for arbitrary channels, and a closed-form
//! Sherman–Morrison route for symmetric channels where the integrand reduces
//! to `(2πf)²·w(f)·[G]_ij`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::{pairwise_sum, Execution};
use crate::geometry::{geometry_matrix, numerical_rank, Scenario, RANK_TOLERANCE};
use crate::quadrature::{rule, QuadratureScheme};
use crate::spectra::{compressed_csd_probed, midpoint, steering_vector, CMatrix, CVector, CompressedArray};

/// Condition number above which an active-band CSD is reported singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FimMethod {
    Quadrature,
    ClosedForm,
    ShermanMorrison,
    MonteCarlo,
}

impl FimMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FimMethod::Quadrature => "quadrature",
            FimMethod::ClosedForm => "closed_form",
            FimMethod::ShermanMorrison => "sherman_morrison",
            FimMethod::MonteCarlo => "monte_carlo",
        }
    }
}

/// Fisher information per unit observation time, `d × d`, in 1/(m²·s).
#[derive(Debug, Clone, PartialEq)]
pub struct FimRate {
    pub entries: DMatrix<f64>,
    pub method: FimMethod,
}

impl FimRate {
    pub fn new(entries: DMatrix<f64>, method: FimMethod) -> Self {
        Self { entries, method }
    }

    pub fn zeros(dim: usize, method: FimMethod) -> Self {
        Self::new(DMatrix::zeros(dim, dim), method)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `J_T = T·J_∞`; the `o(T)` remainder is neglected.
    pub fn over(&self, observation_time: f64) -> DMatrix<f64> {
        &self.entries * observation_time
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&x| x == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub nodes_per_band: usize,
    pub scheme: QuadratureScheme,
    /// Relative tolerance for adaptive node doubling per band; `0` disables
    /// refinement and uses exactly `nodes_per_band` nodes.
    pub tolerance: f64,
    pub execution: Execution,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes_per_band: 64,
            scheme: QuadratureScheme::GaussLegendre,
            tolerance: 0.0,
            execution: Execution::default(),
        }
    }
}

impl QuadratureSpec {
    pub const MAX_NODES: usize = 1 << 14;

    pub fn gauss_legendre(nodes_per_band: usize) -> Self {
        Self {
            nodes_per_band,
            ..Self::default()
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.nodes_per_band < 2 || self.nodes_per_band > Self::MAX_NODES {
            return Err(Error::invalid(
                "quadrature.nodes_per_band",
                format!("must lie in [2, {}], got {}", Self::MAX_NODES, self.nodes_per_band),
            ));
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return Err(Error::invalid("quadrature.tolerance", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// `∂S/∂p_i = S_s(f)·B Q_i B` with `Q_i = v′_i vᴴ + v v′_iᴴ` and
/// `v′_i[m] = −j2πf·∂τ_m/∂p_i·v_m`.
///
/// Evaluated entrywise as `S_s B_m B_l v_m v_l* · (−j2πf)(g_m,i − g_l,i)`,
/// which is exactly Hermitian with a zero diagonal.
pub fn csd_derivative(scenario: &Scenario, array: &CompressedArray, f: f64, i: usize) -> CMatrix {
    csd_derivative_probed(scenario, array, f, f, i)
}

pub(crate) fn csd_derivative_probed(
    scenario: &Scenario,
    array: &CompressedArray,
    f: f64,
    probe: f64,
    i: usize,
) -> CMatrix {
    let v = steering_vector(scenario, f).0;
    let b = array.gains(probe);
    let s = array.source.level_at(probe);
    let grads = scenario.delay_gradients();
    let w = Complex64::new(0.0, -2.0 * PI * f);
    let bv = CVector::from_fn(v.len(), |m, _| v[m] * (b[m] * s));
    let n = v.len();
    let mut out = CMatrix::zeros(n, n);
    for m in 0..n {
        for l in m + 1..n {
            let z = bv[m] * (v[l] * b[l]).conj() * w * (grads[(m, i)] - grads[(l, i)]);
            out[(m, l)] = z;
            out[(l, m)] = z.conj();
        }
    }
    out
}

/// Inverse of a Hermitian positive definite matrix by eigendecomposition,
/// together with its condition number.
pub(crate) fn hermitian_inverse(a: &CMatrix, frequency: f64) -> Result<(CMatrix, f64)> {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularCsd { frequency, condition });
    }
    let scaled = CMatrix::from_fn(a.nrows(), a.ncols(), |r, c| {
        eig.eigenvectors[(r, c)] / Complex64::from(eig.eigenvalues[c])
    });
    Ok((scaled * eig.eigenvectors.adjoint(), condition))
}

pub(crate) fn restrict(a: &CMatrix, live: &[usize]) -> CMatrix {
    CMatrix::from_fn(live.len(), live.len(), |r, c| a[(live[r], live[c])])
}

/// Per-frequency integrand `tr(S⁻¹ S′_i S⁻¹ S′_j)` by dense linear algebra.
///
/// Sensors whose channel is dead at `f` contribute zero rows and columns and
/// are dropped before inversion.
pub fn trace_term_dense(scenario: &Scenario, array: &CompressedArray, f: f64) -> Result<DMatrix<f64>> {
    trace_term_probed(scenario, array, f, f)
}

fn trace_term_probed(scenario: &Scenario, array: &CompressedArray, f: f64, probe: f64) -> Result<DMatrix<f64>> {
    let d = scenario.dim();
    let live = array.live_sensors(probe);
    if live.is_empty() {
        return Ok(DMatrix::zeros(d, d));
    }
    let s = restrict(&compressed_csd_probed(scenario, array, f, probe), &live);
    let (inv, _) = hermitian_inverse(&s, f)?;
    let a: Vec<CMatrix> = (0..d)
        .map(|i| &inv * restrict(&csd_derivative_probed(scenario, array, f, probe, i), &live))
        .collect();
    Ok(DMatrix::from_fn(d, d, |i, j| trace_of_product(&a[i], &a[j]).re))
}

fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..n {
        for c in 0..n {
            acc += a[(r, c)] * b[(c, r)];
        }
    }
    acc
}

/// Elementary intervals `(lo, hi)` on which every channel and the source PSD
/// are constant and at least one sensor is live.
pub(crate) fn active_intervals(array: &CompressedArray) -> Vec<(f64, f64)> {
    array
        .breakpoints()
        .windows(2)
        .map(|w| (w[0], w[1]))
        .filter(|&(lo, hi)| !array.live_sensors(midpoint(lo, hi)).is_empty())
        .collect()
}

/// Numerical Whittle integral over the active support.
pub fn fim_rate_quadrature(
    scenario: &Scenario,
    array: &CompressedArray,
    quad: &QuadratureSpec,
) -> Result<FimRate> {
    quad.validate()?;
    check_sensor_count(scenario, array)?;
    let d = scenario.dim();
    let intervals = active_intervals(array);
    let mut total = vec![0.0; d * d];
    let mut pending: Vec<(f64, f64, Option<Vec<f64>>)> =
        intervals.into_iter().map(|(lo, hi)| (lo, hi, None)).collect();
    let mut nodes = quad.nodes_per_band;
    let mut done: Vec<Vec<f64>> = Vec::new();

    while !pending.is_empty() {
        let estimates = pending
            .iter()
            .map(|&(lo, hi, _)| integrate_interval(scenario, array, lo, hi, nodes, quad))
            .collect::<Result<Vec<_>>>()?;
        let mut next = Vec::new();
        for ((lo, hi, previous), estimate) in pending.into_iter().zip(estimates) {
            let converged = quad.tolerance == 0.0
                || nodes * 2 > QuadratureSpec::MAX_NODES
                || previous.as_ref().is_some_and(|p| relative_change(p, &estimate) <= quad.tolerance);
            if converged {
                done.push(estimate);
            } else {
                next.push((lo, hi, Some(estimate)));
            }
        }
        pending = next;
        nodes *= 2;
    }
    for (t, s) in total.iter_mut().zip(pairwise_sum(&done, d * d)) {
        *t = s;
    }
    Ok(FimRate::new(symmetrize(DMatrix::from_column_slice(d, d, &total)), FimMethod::Quadrature))
}

fn check_sensor_count(scenario: &Scenario, array: &CompressedArray) -> Result<()> {
    if scenario.num_sensors() != array.num_sensors() {
        return Err(Error::Contract(format!(
            "scenario has {} sensors but {} channels were given",
            scenario.num_sensors(),
            array.num_sensors()
        )));
    }
    Ok(())
}

fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn integrate_interval(
    scenario: &Scenario,
    array: &CompressedArray,
    lo: f64,
    hi: f64,
    nodes: usize,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let d = scenario.dim();
    let points = rule(quad.scheme, nodes, lo, hi);
    let probe = midpoint(lo, hi);
    let terms = quad.execution.map_slice(&points, |&(f, w)| {
        trace_term_probed(scenario, array, f, probe).map(|t| t.iter().map(|x| x * w).collect::<Vec<f64>>())
    });
    let terms = terms.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&terms, d * d))
}

pub(crate) fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// `w = 2Mγ²/(1 + Mγ)`.
pub fn information_weight(sensors: usize, gamma: f64) -> f64 {
    let m = sensors as f64;
    2.0 * m * gamma * gamma / (1.0 + m * gamma)
}

/// Effective SNR `γ = S_s B² / S_w` of a symmetric channel at `f`, zero where
/// the channel is dead.
fn symmetric_gamma(array: &CompressedArray, f: f64) -> f64 {
    let channel = &array.channels[0];
    let Some(band) = channel.band_at(f) else {
        return 0.0;
    };
    let s_w = band.effective_noise();
    if band.gain == 0.0 || s_w <= 0.0 {
        return 0.0;
    }
    array.source.level_at(f) * band.gain * band.gain / s_w
}

fn require_symmetric(scenario: &Scenario, array: &CompressedArray) -> Result<()> {
    check_sensor_count(scenario, array)?;
    if !array.is_symmetric() {
        return Err(Error::Contract(
            "Sherman-Morrison evaluation requires every sensor to use the same channel".into(),
        ));
    }
    Ok(())
}

/// Per-frequency integrand from the trace identity
/// `tr(S⁻¹S′_iS⁻¹S′_j) = (2πf)²·w·[G]_ij` for a symmetric channel.
pub fn trace_term_sherman_morrison(
    scenario: &Scenario,
    array: &CompressedArray,
    f: f64,
) -> Result<DMatrix<f64>> {
    require_symmetric(scenario, array)?;
    let w = information_weight(scenario.num_sensors(), symmetric_gamma(array, f));
    let g = geometry_matrix(scenario);
    Ok(g.entries() * ((2.0 * PI * f).powi(2) * w))
}

/// Closed-form Whittle integral for a symmetric channel: `w` is constant on
/// each elementary interval, so each interval contributes
/// `4π²/3·(hi³ − lo³)·w·G`.
pub fn fim_rate_sherman_morrison(scenario: &Scenario, array: &CompressedArray) -> Result<FimRate> {
    require_symmetric(scenario, array)?;
    let m = scenario.num_sensors();
    let weighted: f64 = active_intervals(array)
        .into_iter()
        .map(|(lo, hi)| {
            let w = information_weight(m, symmetric_gamma(array, midpoint(lo, hi)));
            w * (hi.powi(3) - lo.powi(3))
        })
        .sum();
    let g = geometry_matrix(scenario);
    Ok(FimRate::new(
        g.entries() * (4.0 * PI * PI / 3.0 * weighted),
        FimMethod::ShermanMorrison,
    ))
}

/// Intermediate objects of the Sherman–Morrison reduction at one frequency:
/// `S = S_w (I + γ v vᴴ)`, `K = I − γ/(1+Mγ)·v vᴴ`, `u_i = diag(g̃_i) v`,
/// `A_i = D_i v vᴴ − v vᴴ D_i`.
#[derive(Debug, Clone)]
pub struct ShermanMorrisonFactors {
    pub steering: CVector,
    pub gamma: f64,
    pub effective_noise: f64,
    pub k: CMatrix,
    pub u: Vec<CVector>,
    pub a: Vec<CMatrix>,
}

impl ShermanMorrisonFactors {
    pub fn new(scenario: &Scenario, array: &CompressedArray, f: f64) -> Result<Self> {
        require_symmetric(scenario, array)?;
        let m = scenario.num_sensors();
        let v = steering_vector(scenario, f).0;
        let gamma = symmetric_gamma(array, f);
        let effective_noise = array.channels[0].effective_noise_at(f);
        let vvh = &v * v.adjoint();
        let k = CMatrix::identity(m, m) - &vvh * Complex64::from(gamma / (1.0 + m as f64 * gamma));
        let raw = scenario.delay_gradients();
        let g = geometry_matrix(scenario);
        let u = g
            .centered_gradients()
            .iter()
            .map(|gt| CVector::from_fn(m, |r, _| v[r] * gt[r]))
            .collect();
        let a = (0..scenario.dim())
            .map(|i| {
                let di = CMatrix::from_diagonal(&DVector::from_fn(m, |r, _| Complex64::from(raw[(r, i)])));
                &di * &vvh - &vvh * &di
            })
            .collect();
        Ok(Self {
            steering: v,
            gamma,
            effective_noise,
            k,
            u,
            a,
        })
    }

    /// `S⁻¹ = K / S_w`.
    pub fn inverse(&self) -> CMatrix {
        &self.k / Complex64::from(self.effective_noise)
    }
}

/// Covariance lower bound assembled from a FIM rate and an observation time.
#[derive(Debug, Clone, PartialEq)]
pub struct CrlbReport {
    pub fim_rate: FimRate,
    pub observation_time: f64,
    /// `(1/T)·J_∞⁻¹`, or the pseudo-inverse with `+∞` on the diagonal of
    /// unidentifiable coordinates.
    pub bound: DMatrix<f64>,
    pub rank: usize,
    pub condition_number: f64,
    pub no_information: bool,
    /// Orthonormal basis of the FIM null space.
    pub unidentifiable_directions: Vec<DVector<f64>>,
    /// Coordinates with a component in the null space.
    pub unidentifiable_coordinates: Vec<usize>,
    /// Per-band terms when the bound came from the two-band closed form.
    pub band_terms: Option<crate::closedform::BandInfoTerms>,
}

impl CrlbReport {
    pub fn is_identifiable(&self) -> bool {
        self.unidentifiable_directions.is_empty()
    }

    /// Diagonal of the bound: per-coordinate variance floors (m²).
    pub fn variances(&self) -> Vec<f64> {
        self.bound.diagonal().iter().copied().collect()
    }
}

/// `(1/T)·J_∞⁻¹`, falling back to a pseudo-inverse with explicit
/// unidentifiable directions when the FIM is rank deficient.
pub fn crlb_from_fim(fim: &FimRate, observation_time: f64) -> Result<CrlbReport> {
    if !(observation_time.is_finite() && observation_time > 0.0) {
        return Err(Error::invalid("observation_time", format!("must be finite and > 0, got {observation_time}")));
    }
    let d = fim.dim();
    let eig = SymmetricEigen::new(fim.entries.clone());
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
    let rank = numerical_rank(&fim.entries);
    let no_information = max <= 0.0 || rank == 0;

    let mut bound = DMatrix::zeros(d, d);
    let mut null = Vec::new();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let q = eig.eigenvectors.column(k).into_owned();
        if !no_information && lambda > RANK_TOLERANCE * max {
            bound += &q * q.transpose() / (lambda * observation_time);
        } else {
            null.push(q);
        }
    }
    let unidentifiable_coordinates: Vec<usize> = (0..d)
        .filter(|&i| null.iter().map(|q| q[i] * q[i]).sum::<f64>().sqrt() > 1e-6)
        .collect();
    for &i in &unidentifiable_coordinates {
        bound[(i, i)] = f64::INFINITY;
    }
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let condition_number = if min > 0.0 && !no_information { max / min } else { f64::INFINITY };

    Ok(CrlbReport {
        fim_rate: fim.clone(),
        observation_time,
        bound,
        rank,
        condition_number,
        no_information,
        unidentifiable_directions: null,
        unidentifiable_coordinates,
        band_terms: None,
    })
}

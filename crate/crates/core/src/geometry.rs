//! Propagation delays, their position gradients and the centered geometry
//! matrix `G(p)`.
//!
//! `G` is the Gram matrix of the mean-centered delay-gradient vectors. It is
//! the only place where the array layout enters the two-band Fisher
//! information, so everything downstream scales a copy of it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{ensure_positive, Error, Result};

/// Sensor/source separations below this are rejected; the delay gradient
/// blows up as the distance goes to zero.
pub const MIN_SEPARATION: f64 = 1e-9;

/// Relative eigenvalue threshold (against the largest eigenvalue) below which
/// a direction of `G` or of a FIM is treated as unidentifiable.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Geometric ground truth: sensor positions, source position, propagation
/// speed (m/s) and observation time (s).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    sensors: Vec<DVector<f64>>,
    source: DVector<f64>,
    speed: f64,
    observation_time: f64,
}

impl Scenario {
    pub fn new(
        sensors: Vec<Vec<f64>>,
        source: Vec<f64>,
        speed: f64,
        observation_time: f64,
    ) -> Result<Self> {
        let dim = source.len();
        if dim != 2 && dim != 3 {
            return Err(Error::invalid("source", format!("dimension must be 2 or 3, got {dim}")));
        }
        if source.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("source", "coordinates must be finite"));
        }
        if sensors.len() < 2 {
            return Err(Error::invalid(
                "sensors",
                format!("at least 2 sensors required, got {}", sensors.len()),
            ));
        }
        ensure_positive("speed", speed)?;
        ensure_positive("observation_time", observation_time)?;

        let source = DVector::from_vec(source);
        let mut parsed = Vec::with_capacity(sensors.len());
        for (m, position) in sensors.into_iter().enumerate() {
            let field = format!("sensors[{m}]");
            if position.len() != dim {
                return Err(Error::invalid(
                    field,
                    format!("dimension {} does not match source dimension {dim}", position.len()),
                ));
            }
            if position.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(field, "coordinates must be finite"));
            }
            let position = DVector::from_vec(position);
            let separation = (&source - &position).norm();
            if separation < MIN_SEPARATION {
                return Err(Error::Domain(format!(
                    "source coincides with sensor {m} (separation {separation:e} m)"
                )));
            }
            parsed.push(position);
        }

        Ok(Self {
            sensors: parsed,
            source,
            speed,
            observation_time,
        })
    }

    /// Same array, speed and observation time with the source moved.
    pub fn with_source(&self, source: Vec<f64>) -> Result<Self> {
        Self::new(
            self.sensors.iter().map(|s| s.iter().copied().collect()).collect(),
            source,
            self.speed,
            self.observation_time,
        )
    }

    pub fn with_observation_time(&self, observation_time: f64) -> Result<Self> {
        ensure_positive("observation_time", observation_time)?;
        Ok(Self {
            observation_time,
            ..self.clone()
        })
    }

    pub fn sensors(&self) -> &[DVector<f64>] {
        &self.sensors
    }

    pub fn source(&self) -> &DVector<f64> {
        &self.source
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn observation_time(&self) -> f64 {
        self.observation_time
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn dim(&self) -> usize {
        self.source.len()
    }

    /// Propagation delay `‖p − p_m‖ / c` in seconds.
    ///
    /// Panics if `m` is out of range.
    pub fn delay(&self, m: usize) -> f64 {
        (&self.source - &self.sensors[m]).norm() / self.speed
    }

    /// `τ_m − τ_l`.
    pub fn delay_difference(&self, m: usize, l: usize) -> f64 {
        self.delay(m) - self.delay(l)
    }

    /// Gradient of `τ_m` with respect to the source position (s/m). Its norm
    /// is always `1/c`.
    pub fn delay_gradient(&self, m: usize) -> DVector<f64> {
        let offset = &self.source - &self.sensors[m];
        let distance = offset.norm();
        offset / (self.speed * distance)
    }

    /// `M × d` matrix whose row `m` is the delay gradient of sensor `m`; column
    /// `i` is the vector `g_i`.
    pub fn delay_gradients(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.num_sensors(), self.dim());
        for m in 0..self.num_sensors() {
            out.set_row(m, &self.delay_gradient(m).transpose());
        }
        out
    }
}

/// Centered geometry matrix `[G]_ij = g̃_iᵀ g̃_j` with `g̃_i = P g_i`,
/// `P = I − 𝟙𝟙ᵀ/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMatrix {
    entries: DMatrix<f64>,
    centered_gradients: Vec<DVector<f64>>,
    rank: usize,
}

impl GeometryMatrix {
    /// Builds `G` from raw (uncentered) gradient columns `g_i`, one column per
    /// coordinate.
    pub fn from_gradients(gradients: &DMatrix<f64>) -> Self {
        let m = gradients.nrows() as f64;
        let centered_gradients: Vec<DVector<f64>> = gradients
            .column_iter()
            .map(|g| {
                let mean = g.sum() / m;
                g.map(|x| x - mean)
            })
            .collect();
        let d = centered_gradients.len();
        let entries = DMatrix::from_fn(d, d, |i, j| centered_gradients[i].dot(&centered_gradients[j]));
        let rank = numerical_rank(&entries);
        Self {
            entries,
            centered_gradients,
            rank,
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn centered_gradients(&self) -> &[DVector<f64>] {
        &self.centered_gradients
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_singular(&self) -> bool {
        self.rank < self.entries.nrows()
    }
}

pub fn geometry_matrix(scenario: &Scenario) -> GeometryMatrix {
    GeometryMatrix::from_gradients(&scenario.delay_gradients())
}

/// Number of eigenvalues of the symmetric matrix `a` above
/// `RANK_TOLERANCE × λ_max`. A zero matrix has rank 0.
pub(crate) fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let eig = SymmetricEigen::new(a.clone());
    let max = eig.eigenvalues.iter().fold(0.0_f64, |acc, &x| acc.max(x));
    if max <= 0.0 {
        return 0;
    }
    eig.eigenvalues.iter().filter(|&&x| x > RANK_TOLERANCE * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn delay_of_3_4_5_triangle() {
        let s = Scenario::new(vec![vec![1.0, 1.0, 1.0], vec![9.0, 9.0, 9.0]], vec![1.0, 4.0, 5.0], 1.0, 1.0)
            .unwrap();
        assert_eq!(s.delay(0), 5.0);

        let s = Scenario::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![3.0, 4.0], 2.0, 1.0).unwrap();
        assert_eq!(s.delay(0), 2.5);
    }

    #[test]
    fn coincident_source_is_a_domain_error() {
        let err = Scenario::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![1.0, 0.0], 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn invalid_scenarios_name_the_field() {
        let e = Scenario::new(vec![vec![0.0, 0.0]], vec![1.0, 0.0], 1.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::InvalidInput { ref field, .. } if field == "sensors"));
        let e = Scenario::new(vec![vec![0.0, 0.0], vec![0.0, 1.0]], vec![1.0, 0.0], 0.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::InvalidInput { ref field, .. } if field == "speed"));
        let e = Scenario::new(vec![vec![0.0, 0.0], vec![0.0, 1.0, 2.0]], vec![1.0, 0.0], 1.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::InvalidInput { ref field, .. } if field == "sensors[1]"));
        let e = Scenario::new(vec![vec![0.0], vec![1.0]], vec![3.0], 1.0, 1.0).unwrap_err();
        assert!(matches!(e, Error::InvalidInput { ref field, .. } if field == "source"));
    }

    #[test]
    fn delay_differences() {
        let s = Scenario::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.0, 0.0], 1.0, 1.0).unwrap();
        assert_eq!(s.delay_difference(0, 1), 0.0);
        assert_eq!(s.delay_difference(1, 1), 0.0);

        let s = Scenario::new(vec![vec![0.0, 0.0], vec![3.0, 4.0]], vec![6.0, 8.0], 1.0, 1.0).unwrap();
        assert_eq!(s.delay(0), 10.0);
        assert_eq!(s.delay(1), 5.0);
        assert_eq!(s.delay_difference(0, 1), 5.0);
        assert_eq!(s.delay_difference(1, 0), -5.0);
    }

    #[test]
    fn delay_gradient_examples() {
        let s = Scenario::new(vec![vec![0.0, 0.0], vec![5.0, 5.0]], vec![1.0, 0.0], 1.0, 1.0).unwrap();
        let g = s.delay_gradient(0);
        assert_eq!(g.as_slice(), &[1.0, 0.0]);

        let s = Scenario::new(vec![vec![3.0, 4.0], vec![5.0, 5.0]], vec![0.0, 0.0], 1.0, 1.0).unwrap();
        let g = s.delay_gradient(0);
        assert!((g[0] + 0.6).abs() < 1e-15 && (g[1] + 0.8).abs() < 1e-15);
    }

    #[test]
    fn collinear_pair_is_rank_one() {
        let s = Scenario::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.0, 0.0], 1.0, 1.0).unwrap();
        let g = geometry_matrix(&s);
        assert_eq!(g.entries(), &DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        assert_eq!(g.rank(), 1);
        assert!(g.is_singular());
    }

    #[test]
    fn equilateral_array_gives_scaled_identity() {
        // Oracle: direct construction of g_i, P and P g_i with dense matrices.
        let h = 3.0_f64.sqrt() / 2.0;
        let sensors = vec![vec![1.0, 0.0], vec![-0.5, h], vec![-0.5, -h]];
        let s = Scenario::new(sensors.clone(), vec![0.0, 0.0], 1.0, 1.0).unwrap();

        let m = 3;
        let p = DMatrix::<f64>::identity(m, m) - DMatrix::from_element(m, m, 1.0 / m as f64);
        let mut raw = DMatrix::zeros(m, 2);
        for (k, pos) in sensors.iter().enumerate() {
            let r = (pos[0].powi(2) + pos[1].powi(2)).sqrt();
            raw[(k, 0)] = -pos[0] / r;
            raw[(k, 1)] = -pos[1] / r;
        }
        let centered = &p * raw;
        let oracle = centered.transpose() * &centered;

        let g = geometry_matrix(&s);
        for i in 0..2 {
            for j in 0..2 {
                assert!((g.entries()[(i, j)] - oracle[(i, j)]).abs() < 1e-14);
            }
        }
        assert!((g.entries()[(0, 0)] - 1.5).abs() < 1e-14);
        assert!((g.entries()[(1, 1)] - 1.5).abs() < 1e-14);
        assert!(g.entries()[(0, 1)].abs() < 1e-14);
        assert_eq!(g.rank(), 2);
    }

    fn scene() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
        (2usize..=3, 2usize..=7).prop_flat_map(|(d, m)| {
            (
                prop::collection::vec(prop::collection::vec(-100.0..100.0f64, d), m),
                prop::collection::vec(-100.0..100.0f64, d),
            )
        })
    }

    fn make(sensors: Vec<Vec<f64>>, source: Vec<f64>) -> Option<Scenario> {
        let ok = sensors.iter().all(|s| {
            s.iter().zip(&source).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() > 1.0
        });
        if !ok {
            return None;
        }
        Scenario::new(sensors, source, 3.0e8, 1e-3).ok()
    }

    proptest! {
        #[test]
        fn geometry_matrix_is_symmetric_psd((sensors, source) in scene()) {
            let Some(s) = make(sensors, source) else { return Ok(()); };
            let g = geometry_matrix(&s);
            let e = g.entries();
            prop_assert_eq!(e, &e.transpose());
            let eig = SymmetricEigen::new(e.clone());
            let trace = e.trace();
            for &l in eig.eigenvalues.iter() {
                prop_assert!(l >= -1e-12 * trace);
            }
            for gt in g.centered_gradients() {
                prop_assert!(gt.sum().abs() <= 1e-12 * gt.amax().max(1e-300) * gt.len() as f64);
            }
        }

        #[test]
        fn translation_invariance((sensors, source) in scene(), shift in prop::collection::vec(-50.0..50.0f64, 3)) {
            let Some(s) = make(sensors.clone(), source.clone()) else { return Ok(()); };
            let d = source.len();
            let moved_sensors: Vec<Vec<f64>> = sensors.iter().map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
            let moved_source: Vec<f64> = source.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let t = Scenario::new(moved_sensors, moved_source, 3.0e8, 1e-3).unwrap();
            let (a, b) = (geometry_matrix(&s), geometry_matrix(&t));
            let scale = a.entries().amax();
            for k in 0..d * d {
                prop_assert!((a.entries()[k] - b.entries()[k]).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn rotation_covariance((sensors, source) in scene(), angle in 0.0..std::f64::consts::TAU, tilt in 0.0..std::f64::consts::PI) {
            let Some(s) = make(sensors.clone(), source.clone()) else { return Ok(()); };
            let d = source.len();
            let q = if d == 2 {
                DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()])
            } else {
                let rz = DMatrix::from_row_slice(3, 3, &[angle.cos(), -angle.sin(), 0.0, angle.sin(), angle.cos(), 0.0, 0.0, 0.0, 1.0]);
                let rx = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, tilt.cos(), -tilt.sin(), 0.0, tilt.sin(), tilt.cos()]);
                rz * rx
            };
            let rot = |p: &Vec<f64>| -> Vec<f64> { (&q * DVector::from_vec(p.clone())).iter().copied().collect() };
            let t = Scenario::new(sensors.iter().map(rot).collect(), rot(&source), 3.0e8, 1e-3).unwrap();
            let expected = &q * geometry_matrix(&s).entries() * q.transpose();
            let got = geometry_matrix(&t);
            let scale = expected.amax();
            for k in 0..d * d {
                prop_assert!((got.entries()[k] - expected[k]).abs() <= 1e-10 * scale);
            }
        }

        #[test]
        fn constant_offset_is_annihilated((sensors, source) in scene(), offset in -10.0..10.0f64) {
            let Some(s) = make(sensors, source) else { return Ok(()); };
            let raw = s.delay_gradients();
            let shifted = raw.map(|x| x + offset / s.speed());
            let (a, b) = (GeometryMatrix::from_gradients(&raw), GeometryMatrix::from_gradients(&shifted));
            let scale = a.entries().amax();
            for k in 0..a.entries().len() {
                prop_assert!((a.entries()[k] - b.entries()[k]).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn gradient_matches_central_differences((sensors, source) in scene()) {
            let Some(s) = make(sensors, source.clone()) else { return Ok(()); };
            for m in 0..s.num_sensors() {
                let g = s.delay_gradient(m);
                prop_assert!(approx(g.norm(), 1.0 / s.speed(), 1e-12));
                let h = 1e-6 * (s.source() - &s.sensors()[m]).norm();
                for i in 0..s.dim() {
                    let mut plus = source.clone();
                    let mut minus = source.clone();
                    plus[i] += h;
                    minus[i] -= h;
                    let fd = (s.with_source(plus).unwrap().delay(m) - s.with_source(minus).unwrap().delay(m)) / (2.0 * h);
                    prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 / s.speed()));
                }
            }
        }
    }
}

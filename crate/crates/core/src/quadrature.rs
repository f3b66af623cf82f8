//! Gauss–Legendre and composite Simpson rules on `[a, b]`.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadratureScheme {
    #[default]
    GaussLegendre,
    CompositeSimpson,
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on `P_n`, started from
/// the Tricomi approximation of the roots.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for k in 0..n.div_ceil(2) {
        let mut x = (PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { p0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Nodes and weights of `scheme` with (at least) `n` nodes on `[a, b]`.
/// Simpson rounds `n` up to the next odd count.
pub fn rule(scheme: QuadratureScheme, n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = a + half;
    match scheme {
        QuadratureScheme::GaussLegendre => {
            let (x, w) = gauss_legendre(n);
            x.into_iter().zip(w).map(|(x, w)| (mid + half * x, half * w)).collect()
        }
        QuadratureScheme::CompositeSimpson => {
            let n = if n % 2 == 0 { n + 1 } else { n.max(3) };
            let h = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|k| {
                    let c = if k == 0 || k == n - 1 {
                        1.0
                    } else if k % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    (a + h * k as f64, c * h / 3.0)
                })
                .collect()
        }
    }
}

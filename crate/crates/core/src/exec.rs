//! Execution policy for the data-parallel loops (quadrature nodes,
//! Monte-Carlo snapshots, rate sweeps).
//!
//! Every parallel loop collects its per-item results in index order and
//! reduces them with [`pairwise_sum`], so sequential and parallel runs
//! produce bit-identical output regardless of the thread count.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses the rayon global pool when the `parallel` feature is enabled,
    /// and falls back to [`Execution::Sequential`] otherwise.
    #[default]
    Parallel,
}

impl Execution {
    /// Maps `f` over `0..n`, returning results in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Like [`Execution::map_indexed`] over a slice.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        self.map_indexed(items.len(), |k| f(&items[k]))
    }
}

/// Fixed-order pairwise (cascade) summation of equally sized vectors.
///
/// Returns a zero vector of length `width` when `terms` is empty.
pub fn pairwise_sum(terms: &[Vec<f64>], width: usize) -> Vec<f64> {
    match terms.len() {
        0 => vec![0.0; width],
        1 => terms[0].clone(),
        n => {
            let (left, right) = terms.split_at(n / 2);
            let mut acc = pairwise_sum(left, width);
            for (a, b) in acc.iter_mut().zip(pairwise_sum(right, width)) {
                *a += b;
            }
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree_in_order() {
        let seq = Execution::Sequential.map_indexed(1000, |k| (k as f64).sqrt());
        let par = Execution::Parallel.map_indexed(1000, |k| (k as f64).sqrt());
        assert_eq!(seq, par);
    }

    #[test]
    fn pairwise_sum_matches_plain_sum_on_integers() {
        let terms: Vec<Vec<f64>> = (0..37).map(|k| vec![k as f64, 1.0]).collect();
        assert_eq!(pairwise_sum(&terms, 2), vec![666.0, 37.0]);
        assert_eq!(pairwise_sum(&[], 3), vec![0.0; 3]);
    }
}

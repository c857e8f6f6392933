//! Small Monte Carlo helpers shared by the ensemble code and tests.

use rayon::prelude::*;

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Runs `f(i)` for `i in 0..n` on the rayon pool and returns the results in
/// index order, so any subsequent reduction is independent of thread count.
pub fn par_trials<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Running per-component sums for ensemble means and standard errors.
#[derive(Clone, Debug, Default)]
pub struct Accumulator {
    pub count: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Accumulator {
    pub fn new(len: usize) -> Self {
        Self {
            count: 0,
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
        }
    }

    pub fn push(&mut self, values: &[f64]) {
        if self.sum.is_empty() {
            self.sum = vec![0.0; values.len()];
            self.sum_sq = vec![0.0; values.len()];
        }
        assert_eq!(values.len(), self.sum.len(), "accumulator length mismatch");
        for ((s, q), v) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(values) {
            *s += v;
            *q += v * v;
        }
        self.count += 1;
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum.iter().map(|s| s / n).collect()
    }

    pub fn stderr(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                let mean = s / n;
                let var = ((q - n * mean * mean) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect()
    }
}

/// Evaluates `f(i)` for `n` trials in parallel chunks and accumulates the
/// returned vectors in trial order.
pub fn par_accumulate<F>(n: usize, f: F) -> crate::Result<Accumulator>
where
    F: Fn(usize) -> crate::Result<Vec<f64>> + Sync + Send,
{
    const CHUNK: usize = 256;
    let mut acc = Accumulator::default();
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let results = par_trials(end - start, |k| f(start + k));
        for r in results {
            acc.push(&r?);
        }
        start = end;
    }
    Ok(acc)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn slope_of_line() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [1.0, 3.0, 5.0];
        assert!((fit_slope(&xs, &ys) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn accumulator_matches_mean_stderr() {
        let data = [1.0, 4.0, 2.5, -1.0];
        let acc = par_accumulate(4, |i| Ok(vec![data[i], 2.0 * data[i]])).unwrap();
        let (m, s) = mean_stderr(&data);
        assert!((acc.mean()[0] - m).abs() < 1e-15);
        assert!((acc.stderr()[0] - s).abs() < 1e-14);
        assert!((acc.mean()[1] - 2.0 * m).abs() < 1e-15);
    }

    #[test]
    fn par_trials_keeps_order() {
        assert_eq!(par_trials(5, |i| i * i), vec![0, 1, 4, 9, 16]);
    }
}

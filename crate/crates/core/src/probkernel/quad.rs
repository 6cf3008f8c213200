//! Fixed-rule quadrature and order-stable summation.

/// Pairwise (cascade) summation. The result depends only on the order of
/// `xs`, never on how the work was scheduled.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Composite midpoint rule with `n` cells on `[a, b]`.
pub fn midpoint<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let vals: Vec<f64> = (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).collect();
    pairwise_sum(&vals) * h
}

/// Cumulative trapezoid integral of tabulated `ys` over abscissae `xs`;
/// the first entry is zero.
pub fn trapezoid_cumulative(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
        out.push(acc);
    }
    out
}

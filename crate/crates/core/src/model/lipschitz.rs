use super::classifier::Classifier;

/// Relative tolerance for the power iteration. Iteration continues well past
/// 1e-6 and the result is inflated by this much so the estimate stays above
/// the true norm.
const POWER_TOL: f64 = 1e-12;
const INFLATE: f64 = 1e-6;

/// Spectral norm of a row-major `rows x cols` matrix by power iteration on
/// `W^T W`, started from the largest row so the start is never orthogonal to
/// the top singular vector of a nonzero matrix.
pub fn spectral_norm(w: &[f64], rows: usize, cols: usize) -> f64 {
    assert_eq!(w.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let row = |r: usize| &w[r * cols..(r + 1) * cols];
    let best = (0..rows)
        .max_by(|&a, &b| norm2(row(a)).total_cmp(&norm2(row(b))))
        .unwrap_or(0);
    let mut v = row(best).to_vec();
    let n0 = norm2(&v);
    if n0 == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let mut wv = vec![0.0; rows];
    let mut sigma = 0.0;
    for _ in 0..10_000 {
        for (r, o) in wv.iter_mut().enumerate() {
            *o = row(r).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let next_sigma = norm2(&wv);
        let mut u = vec![0.0; cols];
        for (r, &o) in wv.iter().enumerate() {
            for (ui, a) in u.iter_mut().zip(row(r)) {
                *ui += o * a;
            }
        }
        let nu = norm2(&u);
        if nu == 0.0 {
            return next_sigma;
        }
        u.iter_mut().for_each(|x| *x /= nu);
        v = u;
        let done = (next_sigma - sigma).abs() <= POWER_TOL * next_sigma;
        sigma = next_sigma;
        if done {
            break;
        }
    }
    // sigma from the final unit vector, which is at least as good
    for (r, o) in wv.iter_mut().enumerate() {
        *o = row(r).iter().zip(&v).map(|(a, b)| a * b).sum();
    }
    sigma.max(norm2(&wv))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Upper bound R on the l2 Lipschitz constant of the score function:
/// `||w||` for a linear model, the product of layer spectral norms for an MLP
/// (relu and tanh are 1-Lipschitz).
pub fn lipschitz_upper_bound(h: &Classifier) -> f64 {
    match h {
        Classifier::Linear { w, .. } => norm2(w),
        Classifier::Mlp { layers, .. } => layers
            .iter()
            .map(|l| spectral_norm(&l.weights, l.out, l.inp) * (1.0 + INFLATE))
            .product(),
    }
}

//! Small dense vector helpers shared by the iterative solvers.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales `a` to unit Euclidean norm and returns the old norm.
pub(crate) fn normalize(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|v| *v /= n);
    }
    n
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `out = a x` for a row-major `k x k` matrix.
#[inline]
pub(crate) fn matvec(a: &[f64], x: &[f64], out: &mut [f64], k: usize) {
    for r in 0..k {
        let row = &a[r * k..(r + 1) * k];
        out[r] = row.iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

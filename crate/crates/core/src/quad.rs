//! Deterministic quadrature helpers shared by the numerical modules.

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence (Numerical Recipes `gauleg`).
pub(crate) fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 2);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th root.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate `f` over [a, b] with a fixed-order Gauss-Legendre rule.
pub(crate) fn gl_integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, order: usize, mut f: F) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        sum += w * f(mid + half * x);
    }
    sum * half
}

/// Adaptive panel-doubling Gauss-Legendre integration over [a, b] to a
/// relative tolerance. Panels are split uniformly until two successive
/// refinements agree.
pub(crate) fn adaptive_integrate<F: Fn(f64) -> f64>(a: f64, b: f64, rel_tol: f64, f: F) -> f64 {
    let mut panels = 1usize;
    let mut prev = gl_integrate(a, b, 16, &f);
    for _ in 0..22 {
        panels *= 2;
        let h = (b - a) / panels as f64;
        let mut sum = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            sum += gl_integrate(lo, lo + h, 16, &f);
        }
        let scale = sum.abs().max(1e-300);
        if (sum - prev).abs() <= rel_tol * scale {
            return sum;
        }
        prev = sum;
    }
    prev
}

/// Composite Simpson rule on a uniform grid of `values` with spacing `h`.
/// Requires an odd number of samples (even panel count); a trailing
/// trapezoid closes an even-length tail.
pub(crate) fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3);
    let m = if n.is_multiple_of(2) { n - 1 } else { n };
    let mut sum = values[0] + values[m - 1];
    for (i, v) in values.iter().enumerate().take(m - 1).skip(1) {
        sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    let mut total = sum * h / 3.0;
    if n.is_multiple_of(2) {
        total += 0.5 * h * (values[n - 2] + values[n - 1]);
    }
    total
}

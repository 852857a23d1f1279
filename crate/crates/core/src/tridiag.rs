//! Symmetric tridiagonal eigensolver (implicit-shift QL, EISPACK `tql2`),
//! used for the projected problem inside the Lanczos iteration.

/// Eigenvalues (ascending) of a symmetric tridiagonal matrix, values only.
pub(crate) fn tridiag_eigenvalues(diag: &[f64], offdiag: &[f64]) -> Vec<f64> {
    let (vals, _) = ql_implicit(diag, offdiag, false);
    vals
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric
/// tridiagonal matrix.
pub(crate) fn tridiag_eigen(diag: &[f64], offdiag: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (vals, vecs) = ql_implicit(diag, offdiag, true);
    (vals, vecs.unwrap())
}

fn ql_implicit(diag: &[f64], offdiag: &[f64], with_vectors: bool) -> (Vec<f64>, Option<Vec<Vec<f64>>>) {
    let n = diag.len();
    assert!(offdiag.len() + 1 == n || (n == 0 && offdiag.is_empty()));
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(offdiag);
    // Eigenvector matrix stored as columns.
    let mut z: Vec<Vec<f64>> = if with_vectors {
        (0..n)
            .map(|i| {
                let mut col = vec![0.0; n];
                col[i] = 1.0;
                col
            })
            .collect()
    } else {
        Vec::new()
    };

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                // Compute implicit shift.
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;
                // Implicit QL transformation.
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if with_vectors {
                        let (left, right) = z.split_at_mut(i + 1);
                        let zi = &mut left[i];
                        let zi1 = &mut right[0];
                        for k in 0..n {
                            let h = zi1[k];
                            zi1[k] = s * zi[k] + c * h;
                            zi[k] = c * zi[k] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 || iter > 60 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Sort ascending, carrying eigenvectors along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let sorted_d: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    if with_vectors {
        let sorted_z: Vec<Vec<f64>> = order.iter().map(|&i| z[i].clone()).collect();
        (sorted_d, Some(sorted_z))
    } else {
        (sorted_d, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_laplacian_spectrum() {
        // tridiag(-1, 2, -1) of size n: lambda_j = 4 sin^2(j pi / (2(n+1))).
        let n = 24;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let (vals, vecs) = tridiag_eigen(&diag, &off);
        for (j, v) in vals.iter().enumerate() {
            let exact =
                4.0 * ((j as f64 + 1.0) * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin().powi(2);
            assert!((v - exact).abs() < 1e-12, "j={j}: {v} vs {exact}");
        }
        // Residual check of the first eigenpair.
        let v0 = &vecs[0];
        for i in 0..n {
            let mut hv = 2.0 * v0[i];
            if i > 0 {
                hv -= v0[i - 1];
            }
            if i + 1 < n {
                hv -= v0[i + 1];
            }
            assert!((hv - vals[0] * v0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn values_only_agrees_with_vectors() {
        let diag = vec![0.3, -1.0, 2.0, 0.1, -0.4];
        let off = vec![0.5, -0.2, 0.9, 0.05];
        let v1 = tridiag_eigenvalues(&diag, &off);
        let (v2, _) = tridiag_eigen(&diag, &off);
        for (a, b) in v1.iter().zip(v2.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}

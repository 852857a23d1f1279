//! Smallest-k eigenpairs of a Hamiltonian operator.
//!
//! Lanczos with full reorthogonalisation against the basis and against
//! already-converged (locked) Ritz vectors, restarted from the best
//! unconverged Ritz vector. An optional shift-invert mode runs the same
//! iteration on `(H - sigma)^{-1}` with conjugate-gradient inner solves,
//! useful when the lowest eigenvalues cluster.
//!
//! Eigenvectors are returned in the discrete L^2 normalisation
//! `a^{d/2} ||phi||_2 = 1`; residuals are reported in the same norm, which
//! equals the Euclidean residual of the unit-normalised vector.

use crate::error::{CoreError, Result};
use crate::hamiltonian::HamiltonianOperator;
use crate::tridiag::{tridiag_eigen, tridiag_eigenvalues};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default absolute residual tolerance; far below the statistical
/// tolerances used downstream.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Absolute residual tolerance in the discrete L^2 norm.
    pub tol: f64,
    /// Cap on total operator applications across restarts.
    pub max_iter: usize,
    /// Krylov basis dimension per restart cycle.
    pub max_basis: usize,
    /// Seed of the internal start vector; fixed so solves are deterministic.
    pub start_seed: u64,
    /// Run Lanczos on (H - sigma)^{-1} with CG inner solves. The shift must
    /// lie strictly below the smallest eigenvalue (`gershgorin_lower_bound`
    /// provides a safe choice).
    pub shift_invert: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: 200_000,
            max_basis: 180,
            start_seed: 0x5EED_CAFE,
            shift_invert: None,
        }
    }
}

/// Iteration counters.
#[derive(Debug, Clone, Default)]
pub struct SolverStats {
    /// Operator applications (in shift-invert mode: inner CG matvecs).
    pub matvecs: usize,
    pub restarts: usize,
}

/// Smallest-k eigenpairs with residuals and localisation centers.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Eigenvalues in non-decreasing order.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors, discrete-normalised: a^{d/2} ||phi||_2 = 1.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Residuals ||H phi - lambda phi|| in the discrete L^2 norm.
    pub residuals: Vec<f64>,
    /// Flat site index of max |phi| per pair (smallest index wins ties).
    pub centers: Vec<usize>,
    pub stats: SolverStats,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
}

fn scale(v: &mut [f64], s: f64) {
    for x in v.iter_mut() {
        *x *= s;
    }
}

/// Lower bound on the spectrum from Gershgorin discs: the Laplacian rows
/// contribute a non-negative amount, so `lambda_1 >= min_i (V_i + C)`.
pub fn gershgorin_lower_bound(h: &HamiltonianOperator) -> f64 {
    h.diagonal_potential()
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v))
}

/// Smallest-k eigenpairs with default basis size and start seed.
pub fn smallest_eigenpairs(
    h: &HamiltonianOperator,
    k: usize,
    tol: f64,
    max_iter: usize,
) -> Result<SpectralResult> {
    smallest_eigenpairs_with(
        h,
        k,
        &SolverOptions {
            tol,
            max_iter,
            ..SolverOptions::default()
        },
    )
}

enum Apply<'a> {
    Direct(&'a HamiltonianOperator),
    ShiftInvert {
        h: &'a HamiltonianOperator,
        sigma: f64,
        cg_tol: f64,
    },
}

impl Apply<'_> {
    fn apply(&self, v: &[f64], out: &mut [f64], matvecs: &mut usize) -> Result<()> {
        match self {
            Apply::Direct(h) => {
                h.matvec_into(v, out)?;
                *matvecs += 1;
                Ok(())
            }
            Apply::ShiftInvert { h, sigma, cg_tol } => {
                cg_solve(h, *sigma, v, out, *cg_tol, matvecs)
            }
        }
    }
}

/// Conjugate gradients for (H - sigma) x = b, with H - sigma positive
/// definite.
fn cg_solve(
    h: &HamiltonianOperator,
    sigma: f64,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    matvecs: &mut usize,
) -> Result<()> {
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut hp = vec![0.0; n];
    let b_norm = norm(b).max(1e-300);
    let mut rs = dot(&r, &r);
    let max_inner = 40 * n + 200;
    for _ in 0..max_inner {
        if rs.sqrt() <= rel_tol * b_norm {
            return Ok(());
        }
        h.matvec_into(&p, &mut hp)?;
        *matvecs += 1;
        axpy(&mut hp, -sigma, &p);
        let php = dot(&p, &hp);
        if php <= 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "shift {sigma} is not below the spectrum; CG curvature {php} <= 0"
            )));
        }
        let alpha = rs / php;
        axpy(x, alpha, &p);
        axpy(&mut r, -alpha, &hp);
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(CoreError::NotConverged {
        max_iter: max_inner,
        residuals: vec![rs.sqrt() / b_norm],
    })
}

/// Smallest-k eigenpairs of the symmetric operator; deterministic given the
/// options' start seed. Errors with the best residuals on non-convergence.
pub fn smallest_eigenpairs_with(
    h: &HamiltonianOperator,
    k: usize,
    opts: &SolverOptions,
) -> Result<SpectralResult> {
    let n = h.site_count();
    if k == 0 || k > n {
        return Err(CoreError::InvalidParameter(format!(
            "requested {k} eigenpairs of a {n}-site operator"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(CoreError::InvalidParameter("tolerance must be positive".into()));
    }
    let apply = match opts.shift_invert {
        None => Apply::Direct(h),
        Some(sigma) => Apply::ShiftInvert {
            h,
            sigma,
            cg_tol: (opts.tol * 1e-2).max(1e-14),
        },
    };
    let largest_first = opts.shift_invert.is_some();

    // Rough operator scale for breakdown thresholds.
    let a2 = h.grid().spacing().powi(-2);
    let diag_scale = h
        .diagonal_potential()
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let op_scale = 4.0 * h.grid().dim().as_f64() * a2 + diag_scale;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.start_seed);
    let mut stats = SolverStats::default();
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked_vecs: Vec<Vec<f64>> = Vec::new();
    let mut restart_vec: Option<Vec<f64>> = None;
    let mut best_residuals: Vec<f64> = vec![f64::INFINITY; k];
    let mut stagnant_cycles = 0usize;
    let mut prev_front_residual = f64::INFINITY;

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut w = vec![0.0; n];

    while locked_vals.len() < k {
        if stats.matvecs >= opts.max_iter {
            return Err(CoreError::NotConverged {
                max_iter: opts.max_iter,
                residuals: best_residuals,
            });
        }
        let need = k - locked_vals.len();
        let max_basis = opts.max_basis.min(n - locked_vals.len());

        // Start vector: previous best unconverged Ritz vector, else random.
        let mut v = restart_vec.take().unwrap_or_else(|| {
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()
        });
        orthogonalise(&mut v, &locked_vecs, &[]);
        let mut vn = norm(&v);
        while vn < 1e-12 {
            v = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            orthogonalise(&mut v, &locked_vecs, &[]);
            vn = norm(&v);
        }
        scale(&mut v, 1.0 / vn);

        basis.clear();
        basis.push(v);
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut prev_check: Vec<f64> = Vec::new();
        let breakdown = 1e-14 * op_scale.max(1.0);

        loop {
            let j = basis.len() - 1;
            apply.apply(&basis[j], &mut w, &mut stats.matvecs)?;
            if j > 0 {
                let b = betas[j - 1];
                axpy(&mut w, -b, &basis[j - 1]);
            }
            let alpha = dot(&w, &basis[j]);
            axpy(&mut w, -alpha, &basis[j]);
            alphas.push(alpha);
            // Full reorthogonalisation; a second pass when cancellation ate
            // more than half the norm.
            let before = norm(&w);
            orthogonalise(&mut w, &locked_vecs, &basis);
            let mut after = norm(&w);
            if after < 0.5 * before {
                orthogonalise(&mut w, &locked_vecs, &basis);
                after = norm(&w);
            }
            let beta = after;
            let m = basis.len();

            let exhausted = m == max_basis || beta <= breakdown;
            let mut converged_enough = false;
            if m >= need && (m.is_multiple_of(8) || exhausted) {
                let vals = tridiag_eigenvalues(&alphas, &betas);
                let current = ritz_targets(&vals, need, largest_first);
                let stable = !prev_check.is_empty()
                    && current
                        .iter()
                        .zip(prev_check.iter())
                        .all(|(a, b)| (a - b).abs() <= 0.1 * opts.tol);
                prev_check = current;
                if stable || exhausted {
                    // Residual estimates via the last row of the projected
                    // eigenvectors.
                    let (tvals, tvecs) = tridiag_eigen(&alphas, &betas);
                    let idx = ritz_indices(&tvals, need, largest_first);
                    converged_enough = idx
                        .iter()
                        .all(|&i| (beta * tvecs[i][m - 1]).abs() <= 0.5 * opts.tol);
                }
            }
            if converged_enough || exhausted || stats.matvecs >= opts.max_iter {
                break;
            }
            betas.push(beta);
            scale(&mut w, 1.0 / beta);
            basis.push(std::mem::replace(&mut w, vec![0.0; n]));
        }

        // Ritz extraction and locking via explicit residuals on H.
        let m = basis.len();
        let (tvals, tvecs) = tridiag_eigen(&alphas, &betas);
        let candidates = ritz_indices(&tvals, (need + 2).min(m), largest_first);
        let mut locked_this_cycle = 0usize;
        let mut next_restart: Option<(f64, Vec<f64>)> = None;
        let mut cycle_front_residual = f64::INFINITY;
        for &i in &candidates {
            let mut y = vec![0.0; n];
            for (j, col) in basis.iter().enumerate() {
                axpy(&mut y, tvecs[i][j], col);
            }
            orthogonalise(&mut y, &locked_vecs, &[]);
            let yn = norm(&y);
            if yn < 1e-8 {
                continue;
            }
            scale(&mut y, 1.0 / yn);
            // Rayleigh quotient and explicit residual w.r.t. H itself.
            let mut hy = vec![0.0; n];
            h.matvec_into(&y, &mut hy)?;
            stats.matvecs += 1;
            let lambda = dot(&y, &hy);
            axpy(&mut hy, -lambda, &y);
            let resid = norm(&hy);
            let slot = locked_vals.len() + locked_this_cycle;
            if slot < k && resid < best_residuals[slot] {
                best_residuals[slot] = resid;
            }
            if resid <= opts.tol {
                locked_vals.push(lambda);
                locked_vecs.push(y);
                locked_this_cycle += 1;
                if locked_vals.len() >= k {
                    break;
                }
            } else if next_restart.is_none() {
                cycle_front_residual = resid;
                next_restart = Some((lambda, y));
            }
        }
        restart_vec = next_restart.map(|(_, y)| y);
        stats.restarts += 1;
        // Slowly clustered spectra (the free Dirichlet Laplacian on a fine
        // grid) legitimately take many restart cycles; only give up when
        // the leading residual stops shrinking as well.
        if locked_this_cycle == 0 && cycle_front_residual > 0.8 * prev_front_residual {
            stagnant_cycles += 1;
            if stagnant_cycles > 8 {
                return Err(CoreError::NotConverged {
                    max_iter: opts.max_iter,
                    residuals: best_residuals,
                });
            }
        } else {
            stagnant_cycles = 0;
        }
        prev_front_residual = cycle_front_residual;
    }

    finalise(h, locked_vals, locked_vecs, k, stats)
}

/// Sorted target Ritz values (the `need` smallest, or largest in
/// shift-invert mode).
fn ritz_targets(vals: &[f64], need: usize, largest_first: bool) -> Vec<f64> {
    let idx = ritz_indices(vals, need.min(vals.len()), largest_first);
    idx.iter().map(|&i| vals[i]).collect()
}

fn ritz_indices(vals: &[f64], count: usize, largest_first: bool) -> Vec<usize> {
    let m = vals.len();
    let count = count.min(m);
    if largest_first {
        ((m - count)..m).rev().collect()
    } else {
        (0..count).collect()
    }
}

fn orthogonalise(w: &mut [f64], locked: &[Vec<f64>], basis: &[Vec<f64>]) {
    for u in locked.iter().chain(basis.iter()) {
        let c = dot(w, u);
        axpy(w, -c, u);
    }
}

fn finalise(
    h: &HamiltonianOperator,
    vals: Vec<f64>,
    mut vecs: Vec<Vec<f64>>,
    k: usize,
    mut stats: SolverStats,
) -> Result<SpectralResult> {
    // Sort pairs by eigenvalue; tie order is irrelevant within numerical
    // degeneracy (basis is solver-dependent there).
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
    order.truncate(k);
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut centers = Vec::with_capacity(k);
    let d = h.grid().dim().value();
    let disc = h.grid().spacing().powf(-(d as f64) / 2.0);
    let mut hy = vec![0.0; h.site_count()];
    for &i in &order {
        let mut y = std::mem::take(&mut vecs[i]);
        let yn = norm(&y);
        scale(&mut y, 1.0 / yn);
        h.matvec_into(&y, &mut hy)?;
        stats.matvecs += 1;
        let lambda = dot(&y, &hy);
        axpy(&mut hy, -lambda, &y);
        residuals.push(norm(&hy));
        eigenvalues.push(lambda);
        // Localisation center: global max of |phi|, smallest index on ties.
        let mut center = 0usize;
        let mut best = -1.0f64;
        for (idx, &v) in y.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                center = idx;
            }
        }
        centers.push(center);
        // Sign convention: positive at the center, then discrete norm.
        if y[center] < 0.0 {
            scale(&mut y, -1.0);
        }
        scale(&mut y, disc);
        eigenvectors.push(y);

    }
    Ok(SpectralResult {
        eigenvalues,
        eigenvectors,
        residuals,
        centers,
        stats,
    })
}

/// Gradient of lambda_n with respect to the per-site potential values, by
/// first-order perturbation: `d lambda_n / d V_i = a^d phi_n(i)^2`, which is
/// the squared unit-normalised eigenvector entry. Entries sum to one.
///
/// Errors if lambda_n is within `10 * tol` of a neighbouring eigenvalue
/// (the gradient of a degenerate eigenvalue is undefined).
pub fn eigenvalue_gradient(
    h: &HamiltonianOperator,
    pair_index: usize,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let n = h.site_count();
    let k = (pair_index + 2).min(n);
    let res = smallest_eigenpairs_with(h, k, opts)?;
    gradient_from_result(h, &res, pair_index, opts.tol)
}

/// Gradient from an existing spectral result (must contain pair_index + 1
/// eigenvalues, and pair_index + 2 for the upper gap check when available).
pub fn gradient_from_result(
    h: &HamiltonianOperator,
    res: &SpectralResult,
    pair_index: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    if pair_index >= res.eigenvalues.len() {
        return Err(CoreError::InvalidParameter(format!(
            "pair index {pair_index} out of range ({} computed)",
            res.eigenvalues.len()
        )));
    }
    let threshold = 10.0 * tol;
    let lambda = res.eigenvalues[pair_index];
    if pair_index > 0 {
        let gap = lambda - res.eigenvalues[pair_index - 1];
        if gap <= threshold {
            return Err(CoreError::DegenerateEigenvalue {
                index: pair_index,
                gap,
                threshold,
            });
        }
    }
    if pair_index + 1 < res.eigenvalues.len() {
        let gap = res.eigenvalues[pair_index + 1] - lambda;
        if gap <= threshold {
            return Err(CoreError::DegenerateEigenvalue {
                index: pair_index,
                gap,
                threshold,
            });
        }
    }
    let d = h.grid().dim().value();
    let ad = h.grid().spacing().powi(d as i32);
    // phi is discrete-normalised; a^d phi_i^2 equals the squared entry of
    // the unit-Euclidean vector.
    Ok(res.eigenvectors[pair_index]
        .iter()
        .map(|&p| ad * p * p)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dim::Dim;
    use crate::hamiltonian::assemble;
    use crate::lattice::{sample_white_noise, LatticeGrid, PotentialField};
    use crate::renorm::RenormConstant;
    use approx::assert_relative_eq;

    fn operator_1d(side: f64, ppu: usize, values: Option<Vec<f64>>) -> HamiltonianOperator {
        let g = LatticeGrid::centered(Dim::One, side, ppu).unwrap();
        let f = match values {
            Some(v) => PotentialField::deterministic(g.clone(), v).unwrap(),
            None => PotentialField::zero(g.clone()),
        };
        assemble(&g, &f, &RenormConstant::zero(Dim::One)).unwrap()
    }

    #[test]
    fn dirichlet_spectrum_closed_form() {
        // d=1, L=1, n=63: lambda_j = (4/a^2) sin^2(j pi / (2(n+1))).
        let h = operator_1d(1.0, 64, None);
        let n = h.grid().points_per_side();
        assert_eq!(n, 63);
        let a = h.grid().spacing();
        let res = smallest_eigenpairs(&h, 5, 1e-10, 200_000).unwrap();
        for j in 1..=5 {
            let exact = (4.0 / (a * a))
                * ((j as f64) * std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin().powi(2);
            let got = res.eigenvalues[j - 1];
            assert!(
                ((got - exact) / exact).abs() < 1e-10,
                "j={j}: {got} vs {exact}"
            );
        }
        // Normalisation and orthogonality in the discrete inner product.
        let ad = a;
        for i in 0..5 {
            let ni: f64 = res.eigenvectors[i].iter().map(|x| x * x).sum::<f64>() * ad;
            assert!((ni - 1.0).abs() < 1e-10);
            for j in 0..i {
                let ip: f64 = res.eigenvectors[i]
                    .iter()
                    .zip(res.eigenvectors[j].iter())
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    * ad;
                assert!(ip.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn three_site_example() {
        // Dense oracle: tridiag(-1, 2, -1) has spectrum {2 - sqrt 2, 2, 2 + sqrt 2}.
        let h = operator_1d(4.0, 1, None);
        let res = smallest_eigenpairs(&h, 3, 1e-12, 10_000).unwrap();
        let oracle = {
            let m = nalgebra::DMatrix::from_row_slice(
                3,
                3,
                &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0],
            );
            let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ev
        };
        for (got, want) in res.eigenvalues.iter().zip(oracle.iter()) {
            assert_relative_eq!(got, want, epsilon = 1e-11);
        }
        assert_relative_eq!(res.eigenvalues[0], 2.0 - 2.0_f64.sqrt(), epsilon = 1e-11);
    }

    #[test]
    fn constant_shift_moves_spectrum_exactly() {
        let h0 = operator_1d(1.0, 16, None);
        let n = h0.site_count();
        let h5 = operator_1d(1.0, 16, Some(vec![5.0; n]));
        let r0 = smallest_eigenpairs(&h0, 3, 1e-12, 100_000).unwrap();
        let r5 = smallest_eigenpairs(&h5, 3, 1e-12, 100_000).unwrap();
        for i in 0..3 {
            assert!((r5.eigenvalues[i] - r0.eigenvalues[i] - 5.0).abs() < 1e-12);
            // Eigenvectors unchanged up to sign (fixed by the sign convention).
            let dot: f64 = r5.eigenvectors[i]
                .iter()
                .zip(r0.eigenvectors[i].iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
                * h0.grid().spacing();
            assert!((dot.abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rayleigh_quotient_bounds_ground_state() {
        use rand::{Rng, SeedableRng};
        let g = LatticeGrid::centered(Dim::One, 8.0, 8).unwrap();
        let f = sample_white_noise(&g, 1.0, 77).unwrap();
        let h = assemble(&g, &f, &RenormConstant::zero(Dim::One)).unwrap();
        let res = smallest_eigenpairs(&h, 1, 1e-10, 100_000).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let u: Vec<f64> = (0..g.site_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let hu = h.matvec(&u).unwrap();
            let q = dot(&hu, &u) / dot(&u, &u);
            assert!(res.eigenvalues[0] <= q + 1e-10);
        }
    }

    #[test]
    fn gradient_sums_to_one_and_matches_fd() {
        use rand::{Rng, SeedableRng};
        // Unit-spacing grid keeps the operator norm small so the central
        // finite difference with delta = 1e-6 resolves every entry.
        let g = LatticeGrid::centered(Dim::One, 32.0, 1).unwrap();
        let n = g.site_count();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let base: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let f = PotentialField::deterministic(g.clone(), base.clone()).unwrap();
        let h = assemble(&g, &f, &RenormConstant::zero(Dim::One)).unwrap();
        let opts = SolverOptions {
            tol: 1e-13,
            ..SolverOptions::default()
        };
        let grad = eigenvalue_gradient(&h, 0, &opts).unwrap();
        let total: f64 = grad.iter().sum();
        assert!((total - 1.0).abs() < 1e-10, "sum {total}");

        let solve_lambda = |values: Vec<f64>| -> f64 {
            let f = PotentialField::deterministic(g.clone(), values).unwrap();
            let h = assemble(&g, &f, &RenormConstant::zero(Dim::One)).unwrap();
            smallest_eigenpairs_with(&h, 1, &opts).unwrap().eigenvalues[0]
        };
        let delta = 1e-6;
        for _ in 0..20 {
            let site = rng.gen_range(0..n);
            let mut up = base.clone();
            up[site] += delta;
            let mut down = base.clone();
            down[site] -= delta;
            let fd = (solve_lambda(up) - solve_lambda(down)) / (2.0 * delta);
            let rel = ((fd - grad[site]) / grad[site]).abs();
            assert!(
                rel <= 1e-5,
                "site {site}: fd {fd} vs hf {} (rel {rel:.2e})",
                grad[site]
            );
        }
    }

    #[test]
    fn gradient_profile_is_sin_squared_for_zero_potential() {
        let h = operator_1d(1.0, 32, None);
        let n = h.site_count();
        let grad = eigenvalue_gradient(&h, 0, &SolverOptions::default()).unwrap();
        // Ground state of the discrete Dirichlet Laplacian is sin(pi x / L).
        let norm: f64 = (1..=n)
            .map(|i| (std::f64::consts::PI * i as f64 / (n as f64 + 1.0)).sin().powi(2))
            .sum();
        for (i, g) in grad.iter().enumerate() {
            let expected =
                (std::f64::consts::PI * (i as f64 + 1.0) / (n as f64 + 1.0)).sin().powi(2) / norm;
            assert!((g - expected).abs() < 1e-9, "{g} vs {expected}");
        }
    }

    #[test]
    fn degenerate_gradient_rejected() {
        // Symmetric double well in d=2: the two lowest states are nearly
        // degenerate once the wells decouple.
        let g = LatticeGrid::centered(Dim::One, 16.0, 8).unwrap();
        let n = g.site_count();
        let values: Vec<f64> = (0..n)
            .map(|i| {
                let x = g.position(i)[0];
                -8.0 * ((-(x - 4.0).powi(2) / 0.5).exp() + (-(x + 4.0).powi(2) / 0.5).exp())
            })
            .collect();
        let f = PotentialField::deterministic(g.clone(), values).unwrap();
        let h = assemble(&g, &f, &RenormConstant::zero(Dim::One)).unwrap();
        let res = smallest_eigenpairs(&h, 2, 1e-10, 200_000).unwrap();
        let gap = res.eigenvalues[1] - res.eigenvalues[0];
        // Use a tolerance that makes the pair formally degenerate.
        let opts = SolverOptions {
            tol: gap,
            ..SolverOptions::default()
        };
        match eigenvalue_gradient(&h, 0, &opts) {
            Err(CoreError::DegenerateEigenvalue { .. }) => {}
            other => panic!("expected degeneracy error, got {other:?}"),
        }
    }

    #[test]
    fn nonconvergence_reports_best_residuals() {
        let h = operator_1d(8.0, 16, None);
        match smallest_eigenpairs(&h, 2, 1e-14, 12) {
            Err(CoreError::NotConverged { residuals, .. }) => {
                assert_eq!(residuals.len(), 2);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn shift_invert_agrees_with_direct() {
        let g = LatticeGrid::centered(Dim::One, 8.0, 16).unwrap();
        let f = sample_white_noise(&g, 2.0, 5).unwrap();
        let h = assemble(&g, &f, &RenormConstant::zero(Dim::One)).unwrap();
        let direct = smallest_eigenpairs(&h, 3, 1e-10, 200_000).unwrap();
        let sigma = gershgorin_lower_bound(&h) - 1.0;
        let si = smallest_eigenpairs_with(
            &h,
            3,
            &SolverOptions {
                tol: 1e-10,
                shift_invert: Some(sigma),
                ..SolverOptions::default()
            },
        )
        .unwrap();
        for i in 0..3 {
            assert!(
                (direct.eigenvalues[i] - si.eigenvalues[i]).abs() < 1e-8,
                "pair {i}: {} vs {}",
                direct.eigenvalues[i],
                si.eigenvalues[i]
            );
        }
    }

    #[test]
    fn dense_minmax_consistency() {
        // Against a dense solve on a small 2d problem (n^d <= 300).
        let g = LatticeGrid::centered(Dim::Two, 2.0, 8).unwrap();
        assert!(g.site_count() <= 300);
        let f = sample_white_noise(&g, 1.0, 21).unwrap();
        let h = assemble(&g, &f, &RenormConstant::zero(Dim::Two)).unwrap();
        let res = smallest_eigenpairs(&h, 4, 1e-11, 200_000).unwrap();
        let dense = h.to_dense().unwrap();
        let nd = g.site_count();
        let mut m = nalgebra::DMatrix::zeros(nd, nd);
        for i in 0..nd {
            for j in 0..nd {
                m[(i, j)] = dense[j][i];
            }
        }
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for i in 0..4 {
            assert!(
                (res.eigenvalues[i] - ev[i]).abs() < 1e-9,
                "pair {i}: {} vs {}",
                res.eigenvalues[i],
                ev[i]
            );
        }
    }

    #[test]
    fn dirichlet_refinement_toward_continuum() {
        // L=1, n=3 (a=1/4): lambda_1 = 64 sin^2(pi/8); refining approaches pi^2.
        let coarse = operator_1d(1.0, 4, None);
        assert_eq!(coarse.site_count(), 3);
        let l1 = smallest_eigenpairs(&coarse, 1, 1e-12, 10_000).unwrap().eigenvalues[0];
        let exact = 64.0 * (std::f64::consts::PI / 8.0).sin().powi(2);
        assert_relative_eq!(l1, exact, max_relative = 1e-12);
        assert!((l1 - 9.37258).abs() < 1e-5);
        let fine = operator_1d(1.0, 128, None);
        let l1_fine = smallest_eigenpairs(&fine, 1, 1e-10, 100_000).unwrap().eigenvalues[0];
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((l1_fine - pi2).abs() < (l1 - pi2).abs());
        assert!((l1_fine - pi2).abs() / pi2 < 1e-3);
    }

    #[test]
    fn deterministic_given_seed() {
        let g = LatticeGrid::centered(Dim::One, 8.0, 16).unwrap();
        let f = sample_white_noise(&g, 1.0, 9).unwrap();
        let h = assemble(&g, &f, &RenormConstant::zero(Dim::One)).unwrap();
        let r1 = smallest_eigenpairs(&h, 2, 1e-10, 100_000).unwrap();
        let r2 = smallest_eigenpairs(&h, 2, 1e-10, 100_000).unwrap();
        assert_eq!(r1.eigenvalues, r2.eigenvalues);
        assert_eq!(r1.eigenvectors, r2.eigenvectors);
    }
}

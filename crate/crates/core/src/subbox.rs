//! Partition of unity and the two-sided sub-box eigenvalue bounds
//!
//! ```text
//!   min_{|k|_inf <= L/2r + 3/4} lambda_1(rk + Q_{3r/2}) - K/r^2
//!       <= lambda_1(Q_L) <=
//!   min_{|k|_inf < L/2r - 1/2} lambda_1(rk + Q_r),
//! ```
//!
//! built from the smoothed step `phi(x) = c int_{-inf}^x e^{-1/(1-u^2)} 1_{|u|<1} du`
//! (c chosen so phi = 1 on x >= 1), the one-dimensional cutoff
//! `zeta(x) = sqrt(phi(2(r+2x)/r) phi(2(r-2x)/r))` and the tensor bumps
//! `eta_k(x) = prod_i zeta(r k_i + x_i)`, which satisfy
//! `sum_k eta_k^2 = 1` and `sum_k |grad eta_k|^2 <= K / r^2` with one K for
//! every r.
//!
//! The checker runs on a coupled noise sample: every box eigenvalue is
//! computed from the restriction of one master realisation, so the bounds
//! are tested pathwise.

use crate::dim::Dim;
use crate::eigensolver::{smallest_eigenpairs_with, SolverOptions};
use crate::error::{CoreError, Result};
use crate::hamiltonian::assemble;
use crate::lattice::{restrict_noise, FieldKind, LatticeGrid, PotentialField};
use crate::quad::{adaptive_integrate, gl_integrate};
use crate::renorm::RenormConstant;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::OnceLock;

fn bump_integrand(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

/// Normalisation constant `c = 1 / int_{-1}^{1} e^{-1/(1-u^2)} du`.
pub fn bump_normalisation() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / adaptive_integrate(-1.0, 1.0, 1e-14, bump_integrand))
}

/// The smoothed step: phi(x) = 0 for x <= -1, 1 for x >= 1, monotone and
/// smooth in between, with phi(x) + phi(-x) = 1 (exact by construction:
/// positive x is evaluated as 1 - phi(-x)).
pub fn bump_phi(x: f64) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x > 0.0 {
        return 1.0 - bump_phi(-x);
    }
    // Composite Gauss-Legendre over [-1, x]; the integrand is smooth with
    // all derivatives vanishing at the endpoint.
    let c = bump_normalisation();
    let panels = 4;
    let h = (x + 1.0) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = -1.0 + p as f64 * h;
        acc += gl_integrate(lo, lo + h, 32, bump_integrand);
    }
    c * acc
}

fn bump_phi_deriv(x: f64) -> f64 {
    bump_normalisation() * bump_integrand(x)
}

/// The tensor-product partition of unity at sub-box scale r.
#[derive(Debug, Clone)]
pub struct PartitionSpec {
    dim: Dim,
    r: f64,
}

impl PartitionSpec {
    pub fn new(dim: Dim, r: f64) -> Result<Self> {
        if !(r >= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "sub-box scale must be at least 1, got {r}"
            )));
        }
        Ok(PartitionSpec { dim, r })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.r
    }

    /// zeta(x) = sqrt(phi(2(r+2x)/r) phi(2(r-2x)/r)): 1 on |x| <= r/4,
    /// 0 on |x| >= 3r/4.
    pub fn zeta(&self, x: f64) -> f64 {
        let t = 4.0 * x / self.r;
        let p1 = bump_phi(2.0 + t);
        let p2 = bump_phi(2.0 - t);
        (p1 * p2).sqrt()
    }

    /// d zeta / dx, clamped to zero outside the support to avoid 0/0 at the
    /// edge (sqrt(phi) is smooth, the limit is zero).
    pub fn zeta_deriv(&self, x: f64) -> f64 {
        if x.abs() >= 0.75 * self.r {
            return 0.0;
        }
        let t = 4.0 * x / self.r;
        let p1 = bump_phi(2.0 + t);
        let p2 = bump_phi(2.0 - t);
        let prod = p1 * p2;
        if prod <= 0.0 {
            return 0.0;
        }
        let dp = (bump_phi_deriv(2.0 + t) * p2 - p1 * bump_phi_deriv(2.0 - t)) * 4.0 / self.r;
        dp / (2.0 * prod.sqrt())
    }

    /// eta_k(x) = prod_i zeta(r k_i + x_i) and its gradient.
    pub fn partition_eval(&self, k: [i64; 3], x: [f64; 3]) -> (f64, [f64; 3]) {
        let d = self.dim.value();
        let mut z = [1.0f64; 3];
        for axis in 0..d {
            z[axis] = self.zeta(self.r * k[axis] as f64 + x[axis]);
        }
        let eta: f64 = z.iter().take(d).product();
        let mut grad = [0.0f64; 3];
        for axis in 0..d {
            let mut g = self.zeta_deriv(self.r * k[axis] as f64 + x[axis]);
            for (other, zo) in z.iter().enumerate().take(d) {
                if other != axis {
                    g *= zo;
                }
            }
            grad[axis] = g;
        }
        (eta, grad)
    }

    /// Per-axis sum over k of zeta^2(r k + x): equals 1 for all x.
    pub fn axis_sum_sq(&self, x: f64) -> f64 {
        let lo = ((-0.75 * self.r - x) / self.r).ceil() as i64;
        let hi = ((0.75 * self.r - x) / self.r).floor() as i64;
        (lo..=hi).map(|k| self.zeta(self.r * k as f64 + x).powi(2)).sum()
    }

    /// sum_k eta_k^2(x); separable across axes.
    pub fn sum_eta_sq(&self, x: [f64; 3]) -> f64 {
        (0..self.dim.value()).map(|a| self.axis_sum_sq(x[a])).product()
    }

    /// sum_k |grad eta_k|^2(x). By the tensor structure this separates into
    /// sum over axes of S'(x_a) prod_{b != a} S(x_b) with S = 1.
    pub fn sum_grad_sq(&self, x: [f64; 3]) -> f64 {
        let d = self.dim.value();
        let axis_deriv_sum = |x: f64| -> f64 {
            let lo = ((-0.75 * self.r - x) / self.r).ceil() as i64;
            let hi = ((0.75 * self.r - x) / self.r).floor() as i64;
            (lo..=hi)
                .map(|k| self.zeta_deriv(self.r * k as f64 + x).powi(2))
                .sum()
        };
        let mut total = 0.0;
        for a in 0..d {
            let mut term = axis_deriv_sum(x[a]);
            for b in 0..d {
                if b != a {
                    term *= self.axis_sum_sq(x[b]);
                }
            }
            total += term;
        }
        total
    }

    /// K = r^2 sup_x sum_k |grad eta_k|^2, by a dense scan of one period.
    /// By the tensor structure the sum is sum_axes S'(x_a) with
    /// S'(x) = sum_k zeta'(r k + x)^2 and per-axis factors sum zeta^2 = 1,
    /// so the supremum over R^d is d times the one-axis supremum. The
    /// cutoff is self-similar in x/r, making K r-independent.
    pub fn measure_k(&self, scan_points: usize) -> f64 {
        let mut sup: f64 = 0.0;
        for i in 0..scan_points {
            let x = self.r * i as f64 / scan_points as f64;
            let lo = ((-0.75 * self.r - x) / self.r).ceil() as i64;
            let hi = ((0.75 * self.r - x) / self.r).floor() as i64;
            let s: f64 = (lo..=hi)
                .map(|k| self.zeta_deriv(self.r * k as f64 + x).powi(2))
                .sum();
            sup = sup.max(s);
        }
        self.dim.as_f64() * self.r * self.r * sup
    }
}

/// Outcome of the two-sided sub-box bound check on one sample.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub lambda_big: f64,
    pub lambda_small: f64,
    pub lambda_full: f64,
    pub k_measured: f64,
    /// (lower bound holds, upper bound holds) within `slack`.
    pub holds: (bool, bool),
    /// Solver tolerance plus the 2 a^2 discretisation slack.
    pub slack: f64,
    /// Set when the closed/open boundary convention of the big-box index
    /// range changes the minimum.
    pub boundary_note: Option<String>,
}

fn check_multiple(value: f64, unit: f64, what: &str) -> Result<i64> {
    let q = value / unit;
    if (q - q.round()).abs() > 1e-9 {
        return Err(CoreError::Misalignment(format!(
            "{what} = {value} is not an integer multiple of the spacing {unit}"
        )));
    }
    Ok(q.round() as i64)
}

/// Restriction used by the bound checker: white-noise fields restrict via
/// the coupled stream; deterministic fields are zero-extended outside the
/// master grid (exact for the V = 0 case).
fn restrict_for_bounds(master: &PotentialField, sub: &LatticeGrid) -> Result<PotentialField> {
    match master.kind() {
        FieldKind::WhiteNoise { .. } => restrict_noise(master, sub),
        FieldKind::Deterministic => {
            let mg = master.grid();
            if !mg.aligned_with(sub) {
                return Err(CoreError::Misalignment("sub-grid not aligned".into()));
            }
            let d = mg.dim().value();
            let n = mg.points_per_side() as i64;
            let mut shift = [0i64; 3];
            for axis in 0..d {
                shift[axis] =
                    ((sub.offset()[axis] - mg.offset()[axis]) / mg.spacing()).round() as i64;
            }
            let mut values = Vec::with_capacity(sub.site_count());
            for flat in 0..sub.site_count() {
                let c = sub.coords_of(flat);
                let mut inside = true;
                let mut mc = [0usize; 3];
                for axis in 0..d {
                    let m = c[axis] as i64 + shift[axis];
                    if m < 0 || m >= n {
                        inside = false;
                        break;
                    }
                    mc[axis] = m as usize;
                }
                values.push(if inside {
                    master.values()[mg.flat_of(&mc)]
                } else {
                    0.0
                });
            }
            PotentialField::deterministic(sub.clone(), values)
        }
        FieldKind::Mollified { .. } => Err(CoreError::InvalidParameter(
            "sub-box bounds need a white-noise or deterministic field".into(),
        )),
    }
}

fn principal_on_box(
    master: &PotentialField,
    dim: Dim,
    side: f64,
    points: usize,
    offset: [f64; 3],
    k_eigs: usize,
    solver: &SolverOptions,
) -> Result<f64> {
    let sub = LatticeGrid::from_points(dim, side, points, offset)?;
    let field = restrict_for_bounds(master, &sub)?;
    let h = assemble(&sub, &field, &RenormConstant::zero(dim))?;
    let res = smallest_eigenpairs_with(&h, k_eigs, solver)?;
    Ok(res.eigenvalues[0])
}

/// Enumerate integer vectors with |k|_inf <= bound.
fn enumerate_k(d: usize, bound: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    let range = -bound..=bound;
    match d {
        1 => {
            for a in range {
                out.push([a, 0, 0]);
            }
        }
        2 => {
            for a in range.clone() {
                for b in range.clone() {
                    out.push([a, b, 0]);
                }
            }
        }
        _ => {
            for a in range.clone() {
                for b in range.clone() {
                    for c in range.clone() {
                        out.push([a, b, c]);
                    }
                }
            }
        }
    }
    out
}

/// Check both inequalities of the sub-box estimate on one coupled sample.
///
/// Requires r to be a multiple of 4 lattice spacings (so the shifted boxes
/// of sides r and 3r/2 land on the master lattice) and 1 <= r < L.
pub fn check_box_bounds(
    grid: &LatticeGrid,
    potential: &PotentialField,
    r: f64,
    k_eigs: usize,
    solver: &SolverOptions,
) -> Result<BoundReport> {
    if potential.grid() != grid {
        return Err(CoreError::GridMismatch("potential grid differs".into()));
    }
    let l = grid.side();
    if !(r >= 1.0 && r < l) {
        return Err(CoreError::InvalidParameter(format!(
            "need 1 <= r < L, got r = {r}, L = {l}"
        )));
    }
    let a = grid.spacing();
    let m = check_multiple(r, a, "sub-box scale r")?;
    if m % 4 != 0 {
        return Err(CoreError::Misalignment(format!(
            "r/a = {m} must be divisible by 4 so the 3r/2 boxes stay on the lattice"
        )));
    }
    let n_total = check_multiple(l, a, "box side L")?;
    if n_total % 2 != 0 {
        return Err(CoreError::Misalignment(format!(
            "L/a = {n_total} must be even so shifted boxes stay on the lattice"
        )));
    }
    let dim = grid.dim();
    let d = dim.value();

    // Index ranges from the statement: closed for the big boxes, open for
    // the small ones.
    let ratio = l / (2.0 * r);
    let big_bound = (ratio + 0.75).floor() as i64;
    let small_limit = ratio - 0.5;
    let small_bound = if (small_limit - small_limit.round()).abs() < 1e-12 {
        small_limit.round() as i64 - 1 // strict inequality
    } else {
        small_limit.floor() as i64
    };
    if small_bound < 0 {
        return Err(CoreError::InvalidParameter(format!(
            "no small boxes fit: L/2r - 1/2 = {small_limit}"
        )));
    }

    let solve_family = |ks: &[[i64; 3]], side: f64, half: f64, points: usize| -> Result<Vec<f64>> {
        ks.par_iter()
            .map(|k| {
                let mut offset = [0.0; 3];
                for axis in 0..d {
                    offset[axis] = r * k[axis] as f64 - half;
                }
                principal_on_box(potential, dim, side, points, offset, k_eigs, solver)
            })
            .collect()
    };

    let small_ks = enumerate_k(d, small_bound);
    let big_ks = enumerate_k(d, big_bound);
    let small_points = (m - 1) as usize;
    let big_points = (3 * m / 2 - 1) as usize;
    let small_vals = solve_family(&small_ks, r, r / 2.0, small_points)?;
    let big_vals = solve_family(&big_ks, 1.5 * r, 0.75 * r, big_points)?;
    let lambda_small = small_vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda_big = big_vals.iter().cloned().fold(f64::INFINITY, f64::min);

    let h_full = assemble(grid, potential, &RenormConstant::zero(dim))?;
    let lambda_full = smallest_eigenpairs_with(&h_full, k_eigs, solver)?.eigenvalues[0];

    let spec = PartitionSpec::new(dim, r)?;
    let k_measured = spec.measure_k(2000);

    // The statement uses a closed range for the big boxes while the
    // appendix display uses an open one; when the threshold is an integer
    // the two differ by a shell of boxes. Log if that shell changes the min.
    let mut boundary_note = None;
    let big_threshold = ratio + 0.75;
    if (big_threshold - big_threshold.round()).abs() < 1e-12 {
        let inner: Vec<f64> = big_ks
            .iter()
            .zip(big_vals.iter())
            .filter(|(k, _)| k.iter().take(d).map(|v| v.abs()).max().unwrap() < big_bound)
            .map(|(_, v)| *v)
            .collect();
        let inner_min = inner.iter().cloned().fold(f64::INFINITY, f64::min);
        if inner_min != lambda_big {
            let note = format!(
                "boundary shell |k|_inf = {big_bound} changes the big-box min: {lambda_big} vs {inner_min}"
            );
            log::warn!("{note}");
            boundary_note = Some(note);
        }
    }

    let slack = solver.tol + 2.0 * a * a;
    let holds = (
        lambda_big - k_measured / (r * r) <= lambda_full + slack,
        lambda_full <= lambda_small + slack,
    );
    Ok(BoundReport {
        lambda_big,
        lambda_small,
        lambda_full,
        k_measured,
        holds,
        slack,
        boundary_note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::sample_white_noise;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn phi_endpoint_values() {
        assert_eq!(bump_phi(-1.0), 0.0);
        assert_eq!(bump_phi(1.0), 1.0);
        assert_eq!(bump_phi(-2.5), 0.0);
        assert_eq!(bump_phi(3.0), 1.0);
        // phi(0) = 1/2 by symmetry.
        assert_relative_eq!(bump_phi(0.0), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn phi_normalisation_against_oracle() {
        // Independent Simpson evaluation of int_{-1}^{1} e^{-1/(1-u^2)} du.
        let n = 200_001;
        let h = 2.0 / (n - 1) as f64;
        let vals: Vec<f64> = (0..n).map(|i| bump_integrand(-1.0 + i as f64 * h)).collect();
        let total = crate::quad::simpson_uniform(&vals, h);
        assert_relative_eq!(bump_normalisation(), 1.0 / total, max_relative = 1e-10);
        assert!(bump_normalisation() > 0.0);
    }

    #[test]
    fn phi_is_monotone_and_symmetric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut prev = -0.1;
        for i in 0..=100 {
            let x = -1.0 + 2.0 * i as f64 / 100.0;
            let v = bump_phi(x);
            assert!(v >= prev);
            prev = v;
        }
        for _ in 0..200 {
            let x: f64 = rng.gen_range(-1.5..1.5);
            assert!((bump_phi(x) + bump_phi(-x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zeta_plateau_and_support() {
        for &r in &[1.0, 4.0, 16.0] {
            let spec = PartitionSpec::new(Dim::One, r).unwrap();
            assert_relative_eq!(spec.zeta(0.0), 1.0, epsilon = 1e-13);
            assert_relative_eq!(spec.zeta(0.24 * r), 1.0, epsilon = 1e-13);
            assert_eq!(spec.zeta(0.8 * r), 0.0);
            assert_eq!(spec.zeta(-0.76 * r), 0.0);
        }
    }

    #[test]
    fn partition_identity_at_random_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for dim in [Dim::One, Dim::Two] {
            let spec = PartitionSpec::new(dim, 4.0).unwrap();
            for _ in 0..10_000 {
                let x = [
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                    0.0,
                ];
                let s = spec.sum_eta_sq(x);
                assert!((s - 1.0).abs() < 1e-12, "sum {s} at {x:?}");
            }
        }
    }

    #[test]
    fn zeta_gradient_matches_finite_differences() {
        let spec = PartitionSpec::new(Dim::One, 4.0).unwrap();
        let h = 1e-6;
        for i in 0..60 {
            let x = -3.2 + i as f64 * 0.1;
            let fd = (spec.zeta(x + h) - spec.zeta(x - h)) / (2.0 * h);
            let an = spec.zeta_deriv(x);
            assert!(
                (fd - an).abs() < 1e-7,
                "x = {x}: fd {fd} vs analytic {an}"
            );
        }
    }

    #[test]
    fn partition_eval_gradient_consistency() {
        let spec = PartitionSpec::new(Dim::Two, 4.0).unwrap();
        let (eta, grad) = spec.partition_eval([0, 1, 0], [1.3, -3.4, 0.0]);
        let h = 1e-6;
        let (ep, _) = spec.partition_eval([0, 1, 0], [1.3 + h, -3.4, 0.0]);
        let (em, _) = spec.partition_eval([0, 1, 0], [1.3 - h, -3.4, 0.0]);
        assert!(eta >= 0.0);
        assert!(((ep - em) / (2.0 * h) - grad[0]).abs() < 1e-7);
    }

    #[test]
    fn measured_k_stable_across_scales() {
        // The cutoff is self-similar, so r^2 sup |grad eta|^2 is one
        // constant; the scan resolution is the only variation.
        let ks: Vec<f64> = [4.0, 8.0, 16.0]
            .iter()
            .map(|&r| PartitionSpec::new(Dim::One, r).unwrap().measure_k(2000))
            .collect();
        for pair in ks.windows(2) {
            assert!(
                (pair[1] - pair[0]).abs() / pair[0] < 0.05,
                "K values {ks:?}"
            );
        }
        assert!(ks[0] > 0.0);
    }

    #[test]
    fn zero_potential_upper_bound_is_domain_monotonicity() {
        // V = 0, d = 1: lambda_1(Q_L, 0) <= lambda_1(Q_r, 0).
        let grid = LatticeGrid::centered(Dim::One, 32.0, 8).unwrap();
        let field = PotentialField::zero(grid.clone());
        let solver = SolverOptions {
            tol: 1e-9,
            ..SolverOptions::default()
        };
        let report = check_box_bounds(&grid, &field, 4.0, 1, &solver).unwrap();
        assert!(report.holds.0, "lower bound failed: {report:?}");
        assert!(report.holds.1, "upper bound failed: {report:?}");
        assert!(report.lambda_full <= report.lambda_small + report.slack);
    }

    #[test]
    fn white_noise_sample_bounds_hold() {
        let grid = LatticeGrid::centered(Dim::One, 32.0, 8).unwrap();
        let field = sample_white_noise(&grid, 1.0, 4242).unwrap();
        let solver = SolverOptions {
            tol: 1e-9,
            ..SolverOptions::default()
        };
        let report = check_box_bounds(&grid, &field, 4.0, 1, &solver).unwrap();
        assert!(report.holds.0 && report.holds.1, "{report:?}");
    }

    #[test]
    fn misaligned_scale_rejected() {
        let grid = LatticeGrid::centered(Dim::One, 32.0, 8).unwrap();
        let field = PotentialField::zero(grid.clone());
        let solver = SolverOptions::default();
        // r = 3 gives r/a = 24, fine; r = 2.5 gives 20, fine; r = 1.1 is not
        // on the lattice at all.
        assert!(check_box_bounds(&grid, &field, 1.1, 1, &solver).is_err());
        // r/a divisible by 4 is required: r = 0.5 -> r/a = 4 but r < 1.
        assert!(check_box_bounds(&grid, &field, 0.5, 1, &solver).is_err());
    }
}

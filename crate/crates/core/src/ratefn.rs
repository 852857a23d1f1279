//! Large-deviations rate function
//!
//! ```text
//!   I_L(x) = inf { (1/2) ||V||_{L2(Q_L)}^2 : lambda_1(Q_L, V) = x },
//! ```
//!
//! estimated by a self-consistent iteration on the optimality condition
//! `V proportional to phi_1^2`: alternate an eigensolve for the ground
//! state, a norm-minimal update of the potential shape along the
//! Hellmann-Feynman gradient, and an amplitude rescale (Newton on the
//! multiplier, using `d lambda / d c = <shape, a^d phi^2>`) that restores
//! the constraint `lambda_1 = x`. Three seeded bump starts guard against
//! boundary-pinned local minima.
//!
//! The companions are the exact lattice scaling map `W(x) = r^2 V(r x)`
//! with `r^{4-d} = ||V||^{-2}` (unit-norm potential, eigenvalues scaled by
//! r^2) and the arithmetic shift bounds
//! `(1 +- delta) I + (1/2)(1 +- delta^{-1}) a^2 L^d`.

use crate::dim::Dim;
use crate::eigensolver::{smallest_eigenpairs_with, SolverOptions};
use crate::error::{CoreError, Result};
use crate::hamiltonian::{assemble, HamiltonianOperator};
use crate::lattice::{LatticeGrid, PotentialField};
use crate::renorm::RenormConstant;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Optimizer settings.
#[derive(Debug, Clone)]
pub struct RateOptions {
    /// Outer fixed-point iterations per start.
    pub max_outer: usize,
    /// Tolerance on |lambda_1 - target|.
    pub constraint_tol: f64,
    /// Number of random bump starts.
    pub starts: usize,
    /// Seed for the start centers.
    pub seed: u64,
    /// Eigensolver settings for the inner solves.
    pub solver: SolverOptions,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            max_outer: 60,
            constraint_tol: 1e-4,
            starts: 3,
            seed: 0x5EED_0042,
            // The constraint tolerance is 1e-4; a residual floor of 1e-9
            // keeps the inner solves far below it while staying reachable
            // on fine grids where ||H|| ~ a^{-2} pushes up the round-off.
            solver: SolverOptions {
                tol: 1e-9,
                ..SolverOptions::default()
            },
        }
    }
}

/// Estimate of I_L(x) with the optimal potential found.
#[derive(Debug, Clone)]
pub struct RateEstimate {
    pub dim: Dim,
    pub side: f64,
    pub target_x: f64,
    /// (1/2) a^d sum V_i^2 of the best feasible potential.
    pub value: f64,
    pub v_opt: PotentialField,
    pub achieved_lambda: f64,
    pub iterations: usize,
    pub constraint_violation: f64,
}

/// Serializable summary (the potential profile is exported separately).
#[derive(Debug, Clone, Serialize)]
pub struct RateSummary {
    pub dim: Dim,
    pub side: f64,
    pub target_x: f64,
    pub value: f64,
    pub achieved_lambda: f64,
    pub iterations: usize,
    pub constraint_violation: f64,
}

impl RateEstimate {
    pub fn summary(&self) -> RateSummary {
        RateSummary {
            dim: self.dim,
            side: self.side,
            target_x: self.target_x,
            value: self.value,
            achieved_lambda: self.achieved_lambda,
            iterations: self.iterations,
            constraint_violation: self.constraint_violation,
        }
    }
}

fn principal(grid: &LatticeGrid, values: &[f64], solver: &SolverOptions) -> Result<(f64, Vec<f64>)> {
    let field = PotentialField::deterministic(grid.clone(), values.to_vec())?;
    let h: HamiltonianOperator = assemble(grid, &field, &RenormConstant::zero(grid.dim()))?;
    let res = smallest_eigenpairs_with(&h, 1, solver)?;
    Ok((res.eigenvalues[0], res.eigenvectors.into_iter().next().unwrap()))
}

/// Newton on the amplitude c of a fixed shape (unit discrete norm) so that
/// lambda_1(c * shape) = target. Returns (c, lambda, phi, eigensolves).
fn solve_amplitude(
    grid: &LatticeGrid,
    shape: &[f64],
    c0: f64,
    target: f64,
    tol: f64,
    solver: &SolverOptions,
) -> Result<(f64, f64, Vec<f64>, usize)> {
    let d = grid.dim().value();
    let ad = grid.spacing().powi(d as i32);
    let mut c = c0;
    let mut solves = 0;
    let mut values: Vec<f64> = shape.iter().map(|s| c * s).collect();
    let (mut lambda, mut phi) = principal(grid, &values, solver)?;
    solves += 1;
    for _ in 0..30 {
        if (lambda - target).abs() <= tol {
            return Ok((c, lambda, phi, solves));
        }
        // d lambda / d c = sum_i shape_i * a^d phi_disc_i^2 (phi is
        // discrete-normalised, so a^d phi^2 sums to one).
        let slope: f64 = shape
            .iter()
            .zip(phi.iter())
            .map(|(s, p)| s * ad * p * p)
            .sum();
        if slope.abs() < 1e-14 {
            break;
        }
        let step = (lambda - target) / slope;
        c -= step;
        for (v, s) in values.iter_mut().zip(shape.iter()) {
            *v = c * s;
        }
        let out = principal(grid, &values, solver)?;
        lambda = out.0;
        phi = out.1;
        solves += 1;
    }
    if (lambda - target).abs() <= 10.0 * tol {
        Ok((c, lambda, phi, solves))
    } else {
        Err(CoreError::OptimizerStagnation(format!(
            "amplitude solve stalled at lambda = {lambda}, target {target}"
        )))
    }
}

fn discrete_norm(grid: &LatticeGrid, v: &[f64]) -> f64 {
    let d = grid.dim().value();
    (grid.spacing().powi(d as i32) * v.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

/// Estimate I_L(target_x) on the given grid.
pub fn estimate_rate(
    grid: &LatticeGrid,
    target_x: f64,
    opts: &RateOptions,
) -> Result<RateEstimate> {
    let dim = grid.dim();
    let d = dim.value();
    let ad = grid.spacing().powi(d as i32);
    let n = grid.site_count();

    let (lambda_free, _) = principal(grid, &vec![0.0; n], &opts.solver)?;
    if (target_x - lambda_free).abs() <= opts.constraint_tol {
        // The zero potential already achieves the target.
        return Ok(RateEstimate {
            dim,
            side: grid.side(),
            target_x,
            value: 0.0,
            v_opt: PotentialField::zero(grid.clone()),
            achieved_lambda: lambda_free,
            iterations: 0,
            constraint_violation: (target_x - lambda_free).abs(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<RateEstimate> = None;
    let mut total_iterations = 0usize;

    for _start in 0..opts.starts.max(1) {
        // Initial shape: a centered Gaussian bump at a random position in
        // the middle half of the box (sign chosen by the target side).
        let mut center = [0.0f64; 3];
        for c in center.iter_mut().take(d) {
            *c = grid.side() / 4.0 * rng.gen_range(-1.0..1.0);
        }
        let width: f64 = 1.0;
        let sign = if target_x < lambda_free { -1.0 } else { 1.0 };
        let mut shape: Vec<f64> = (0..n)
            .map(|i| {
                let x = grid.position(i);
                let mut r2 = 0.0;
                for axis in 0..d {
                    let box_mid = grid.offset()[axis] + grid.side() / 2.0;
                    let dc = x[axis] - (box_mid + center[axis]);
                    r2 += dc * dc;
                }
                sign * (-r2 / (2.0 * width * width)).exp()
            })
            .collect();
        let nrm = discrete_norm(grid, &shape);
        shape.iter_mut().for_each(|s| *s /= nrm);

        let c0 = (target_x - lambda_free).abs().max(1.0);
        let mut state = match solve_amplitude(grid, &shape, c0, target_x, opts.constraint_tol, &opts.solver) {
            Ok(s) => s,
            Err(_) => continue,
        };
        total_iterations += state.3;
        let mut theta = 1.0f64;
        let mut current_value = 0.5 * state.0 * state.0;
        let mut current_shape = shape;

        for _outer in 0..opts.max_outer {
            // Norm-minimal direction: the potential at an optimum is
            // proportional to the eigenvalue gradient a^d phi^2.
            let grad_shape: Vec<f64> = state.2.iter().map(|p| sign * ad * p * p).collect();
            let gn = discrete_norm(grid, &grad_shape);
            let mixed: Vec<f64> = current_shape
                .iter()
                .zip(grad_shape.iter())
                .map(|(s, g)| (1.0 - theta) * s + theta * g / gn)
                .collect();
            let mn = discrete_norm(grid, &mixed);
            let candidate: Vec<f64> = mixed.iter().map(|v| v / mn).collect();
            match solve_amplitude(
                grid,
                &candidate,
                state.0,
                target_x,
                opts.constraint_tol,
                &opts.solver,
            ) {
                Ok(next) => {
                    total_iterations += next.3;
                    let value = 0.5 * next.0 * next.0;
                    let improved = value <= current_value * (1.0 + 1e-12);
                    let delta = (current_value - value).abs() / current_value.max(1e-300);
                    if improved {
                        current_value = value;
                        current_shape = candidate;
                        state = next;
                        if delta < 1e-9 {
                            break;
                        }
                        theta = (theta * 1.3).min(1.0);
                    } else {
                        theta *= 0.5;
                        if theta < 0.02 {
                            break;
                        }
                    }
                }
                Err(_) => {
                    theta *= 0.5;
                    if theta < 0.02 {
                        break;
                    }
                }
            }
        }

        let violation = (state.1 - target_x).abs();
        let values: Vec<f64> = current_shape.iter().map(|s| state.0 * s).collect();
        let estimate = RateEstimate {
            dim,
            side: grid.side(),
            target_x,
            value: current_value,
            v_opt: PotentialField::deterministic(grid.clone(), values)?,
            achieved_lambda: state.1,
            iterations: total_iterations,
            constraint_violation: violation,
        };
        let acceptable = violation <= 10.0 * opts.constraint_tol;
        match &best {
            Some(b) if acceptable && estimate.value < b.value => best = Some(estimate),
            None if acceptable => best = Some(estimate),
            _ => {}
        }
    }

    best.ok_or_else(|| {
        CoreError::OptimizerStagnation(format!(
            "no feasible potential found for target {target_x} on L = {}",
            grid.side()
        ))
    })
}

/// The exact lattice scaling map: W = r^2 V(r .) on the grid of side L/r
/// with the same interior point count, where r^{4-d} = ||V||_{L2}^{-2}.
/// The image has unit discrete L^2 norm and eigenvalues scaled by r^2.
pub fn rate_scaling_map(v: &PotentialField) -> Result<(PotentialField, f64)> {
    let grid = v.grid();
    let d = grid.dim().value();
    let norm_sq = v.l2_sq();
    if norm_sq <= 0.0 {
        return Err(CoreError::InvalidParameter(
            "scaling map needs a nonzero potential".into(),
        ));
    }
    let r = norm_sq.powf(-1.0 / (4.0 - d as f64));
    let mut offset = [0.0; 3];
    for axis in 0..d {
        offset[axis] = grid.offset()[axis] / r;
    }
    let scaled_grid = LatticeGrid::from_points(
        grid.dim(),
        grid.side() / r,
        grid.points_per_side(),
        offset,
    )?;
    let values: Vec<f64> = v.values().iter().map(|x| r * r * x).collect();
    Ok((PotentialField::deterministic(scaled_grid, values)?, r))
}

/// Two-sided shift bounds: I_L((-inf, b + a]) is bounded by
/// `(1 +- delta) I + (1/2)(1 +- 1/delta) a^2 L^d`.
pub fn rate_shift_bounds(i_at_b: f64, a_shift: f64, l: f64, dim: Dim, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let vol = l.powi(dim.value() as i32);
    let quad = 0.5 * a_shift * a_shift * vol;
    let lower = (1.0 - delta) * i_at_b + (1.0 - 1.0 / delta) * quad;
    let upper = (1.0 + delta) * i_at_b + (1.0 + 1.0 / delta) * quad;
    Ok((lower, upper))
}

//! The sparse symmetric operator -Laplacian_a + V + C on a lattice grid with
//! Dirichlet boundary conditions.
//!
//! The discrete Laplacian is the 2d+1-point stencil
//! `(-Lap u)_i = a^{-2} sum_{j ~ i} (u_i - u_j)` with off-grid neighbours
//! counted as zero. The renormalisation shift C is applied as a scalar on
//! the diagonal so the operator matches the renormalised form
//! `-Laplacian + xi_eps + C_eps` (C_eps > 0 in d = 2, 3). The operator is
//! matrix-free: a dense matrix is only materialised for small test problems.

use crate::error::{CoreError, Result};
use crate::lattice::{LatticeGrid, PotentialField};
use crate::renorm::RenormConstant;

/// Matrix-free symmetric operator `u -> -Lap_a u + (V + C) u`.
#[derive(Debug, Clone)]
pub struct HamiltonianOperator {
    grid: LatticeGrid,
    /// V + C folded into one diagonal.
    diagonal_potential: Vec<f64>,
    inv_a2: f64,
    shift: f64,
}

/// Largest site count for which a dense matrix may be materialised.
const DENSE_LIMIT: usize = 10_000;

/// Assemble the operator from a potential field and a renormalisation
/// constant (use `RenormConstant::zero` for the bare operator).
pub fn assemble(
    grid: &LatticeGrid,
    potential: &PotentialField,
    renorm: &RenormConstant,
) -> Result<HamiltonianOperator> {
    if potential.grid() != grid {
        return Err(CoreError::GridMismatch(
            "potential lives on a different grid".into(),
        ));
    }
    if renorm.value != 0.0 && renorm.dim != grid.dim() {
        return Err(CoreError::GridMismatch(
            "renormalisation constant dimension differs from grid".into(),
        ));
    }
    let shift = renorm.value;
    let diagonal_potential = potential.values().iter().map(|v| v + shift).collect();
    Ok(HamiltonianOperator {
        grid: grid.clone(),
        diagonal_potential,
        inv_a2: grid.spacing().powi(-2),
        shift,
    })
}

impl HamiltonianOperator {
    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn site_count(&self) -> usize {
        self.grid.site_count()
    }

    /// The scalar renormalisation shift folded into the diagonal.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Potential-plus-shift diagonal (without the Laplacian part).
    pub fn diagonal_potential(&self) -> &[f64] {
        &self.diagonal_potential
    }

    /// Apply the operator: exact stencil evaluation, O(n^d).
    pub fn matvec(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; u.len()];
        self.matvec_into(u, &mut out)?;
        Ok(out)
    }

    /// Apply the operator into a preallocated buffer.
    pub fn matvec_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let count = self.site_count();
        if u.len() != count || out.len() != count {
            return Err(CoreError::LengthMismatch {
                expected: count,
                got: u.len(),
            });
        }
        let d = self.grid.dim().value();
        let n = self.grid.points_per_side();
        let two_d = 2.0 * d as f64;
        match d {
            1 => {
                for i in 0..count {
                    let mut acc = two_d * u[i];
                    if i > 0 {
                        acc -= u[i - 1];
                    }
                    if i + 1 < count {
                        acc -= u[i + 1];
                    }
                    out[i] = self.inv_a2 * acc + self.diagonal_potential[i] * u[i];
                }
            }
            2 => {
                for r in 0..n {
                    for c in 0..n {
                        let i = r * n + c;
                        let mut acc = two_d * u[i];
                        if r > 0 {
                            acc -= u[i - n];
                        }
                        if r + 1 < n {
                            acc -= u[i + n];
                        }
                        if c > 0 {
                            acc -= u[i - 1];
                        }
                        if c + 1 < n {
                            acc -= u[i + 1];
                        }
                        out[i] = self.inv_a2 * acc + self.diagonal_potential[i] * u[i];
                    }
                }
            }
            _ => {
                let n2 = n * n;
                for p in 0..n {
                    for r in 0..n {
                        for c in 0..n {
                            let i = (p * n + r) * n + c;
                            let mut acc = two_d * u[i];
                            if p > 0 {
                                acc -= u[i - n2];
                            }
                            if p + 1 < n {
                                acc -= u[i + n2];
                            }
                            if r > 0 {
                                acc -= u[i - n];
                            }
                            if r + 1 < n {
                                acc -= u[i + n];
                            }
                            if c > 0 {
                                acc -= u[i - 1];
                            }
                            if c + 1 < n {
                                acc -= u[i + 1];
                            }
                            out[i] = self.inv_a2 * acc + self.diagonal_potential[i] * u[i];
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Dense matrix for small problems (guarded; used by oracles and the
    /// min-max consistency checks).
    pub fn to_dense(&self) -> Result<Vec<Vec<f64>>> {
        let count = self.site_count();
        if count > DENSE_LIMIT {
            return Err(CoreError::InvalidParameter(format!(
                "refusing to materialise a dense {count} x {count} matrix"
            )));
        }
        let mut cols = vec![vec![0.0; count]; count];
        let mut e = vec![0.0; count];
        for (j, col) in cols.iter_mut().enumerate() {
            e[j] = 1.0;
            self.matvec_into(&e, col)?;
            e[j] = 0.0;
        }
        // matvec produces columns; the operator is symmetric so rows equal
        // columns up to round-off.
        Ok(cols)
    }
}

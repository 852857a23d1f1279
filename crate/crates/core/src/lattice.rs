//! Grids for the box Q_L = (-L/2, L/2)^d with Dirichlet boundary and the
//! white-noise/mollified potential fields living on them.
//!
//! White noise is realised as i.i.d. site Gaussians of standard deviation
//! `beta * a^{-d/2}`, so that the discrete pairing `a^d sum_i V_i f(x_i)`
//! has variance converging to `beta^2 ||f||_{L^2}^2` as the spacing shrinks.
//!
//! Sampling is coupled across nested and shifted boxes: the value at a site
//! depends only on the master seed and the site's absolute lattice
//! coordinate, so restricting a sample to an aligned sub-box reproduces
//! exactly the values the sub-box would draw on its own. This realises the
//! "one master Gaussian array indexed by absolute coordinates" coupling,
//! evaluated lazily, and makes the domain-monotonicity and disjoint-box
//! statements testable on a single realisation.

use crate::dim::Dim;
use crate::error::{CoreError, Result};
use crate::quad::adaptive_integrate;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Alignment tolerance when mapping physical coordinates to absolute
/// lattice indices (in units of the spacing).
const ALIGN_TOL: f64 = 1e-6;

/// Discretised box with Dirichlet boundary: `n` interior points per side,
/// spacing `a = side / (n + 1)`, sites at `offset + a (i + 1)` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeGrid {
    dim: Dim,
    side: f64,
    points_per_side: usize,
    spacing: f64,
    offset: [f64; 3],
}

impl LatticeGrid {
    /// Build the grid for a box of side `side` with `points_per_unit`
    /// lattice points per unit length: `n = round(side * ppu) - 1`.
    pub fn build(dim: Dim, side: f64, points_per_unit: usize, offset: [f64; 3]) -> Result<Self> {
        if !(side > 0.0) || !side.is_finite() {
            return Err(CoreError::InvalidGrid(format!(
                "side length must be positive, got {side}"
            )));
        }
        let n = (side * points_per_unit as f64).round() as i64 - 1;
        if n < 1 {
            return Err(CoreError::InvalidGrid(format!(
                "grid needs at least one interior point (side {side}, ppu {points_per_unit})"
            )));
        }
        let n = n as usize;
        Ok(LatticeGrid {
            dim,
            side,
            points_per_side: n,
            spacing: side / (n + 1) as f64,
            offset,
        })
    }

    /// Grid with an explicit interior point count per side.
    pub fn from_points(dim: Dim, side: f64, points_per_side: usize, offset: [f64; 3]) -> Result<Self> {
        if !(side > 0.0) || !side.is_finite() {
            return Err(CoreError::InvalidGrid(format!(
                "side length must be positive, got {side}"
            )));
        }
        if points_per_side < 1 {
            return Err(CoreError::InvalidGrid("need at least one interior point".into()));
        }
        Ok(LatticeGrid {
            dim,
            side,
            points_per_side,
            spacing: side / (points_per_side + 1) as f64,
            offset,
        })
    }

    /// The centered box Q_L = (-L/2, L/2)^d.
    pub fn centered(dim: Dim, side: f64, points_per_unit: usize) -> Result<Self> {
        let half = side / 2.0;
        Self::build(dim, side, points_per_unit, [-half, -half, -half])
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn points_per_side(&self) -> usize {
        self.points_per_side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn offset(&self) -> [f64; 3] {
        self.offset
    }

    /// Total interior site count n^d.
    pub fn site_count(&self) -> usize {
        self.points_per_side.pow(self.dim.value() as u32)
    }

    /// Decode a flat index into per-axis indices (axis 0 most significant).
    pub fn coords_of(&self, flat: usize) -> [usize; 3] {
        let n = self.points_per_side;
        let mut c = [0usize; 3];
        let mut rest = flat;
        for axis in (0..self.dim.value()).rev() {
            c[axis] = rest % n;
            rest /= n;
        }
        c
    }

    /// Flat index of per-axis indices.
    pub fn flat_of(&self, coords: &[usize]) -> usize {
        let n = self.points_per_side;
        let mut flat = 0usize;
        for &c in coords.iter().take(self.dim.value()) {
            debug_assert!(c < n);
            flat = flat * n + c;
        }
        flat
    }

    /// Physical coordinate of a site.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let c = self.coords_of(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim.value() {
            x[axis] = self.offset[axis] + self.spacing * (c[axis] as f64 + 1.0);
        }
        x
    }

    /// Absolute half-lattice index of a site: `round(2x / a)` per axis.
    /// Sites of every constructible grid land on `(a/2) Z^d` (centered
    /// boxes of either parity, shifted sub-boxes); grids of different
    /// parity occupy disjoint index sets and never alias. Errors if the
    /// site misses the half-lattice within tolerance.
    pub fn absolute_index(&self, flat: usize) -> Result<[i64; 3]> {
        let x = self.position(flat);
        let mut idx = [0i64; 3];
        for axis in 0..self.dim.value() {
            let u = 2.0 * x[axis] / self.spacing;
            let r = u.round();
            if (u - r).abs() > ALIGN_TOL {
                return Err(CoreError::Misalignment(format!(
                    "site coordinate {} is not on the half-lattice a Z / 2 (a = {})",
                    x[axis], self.spacing
                )));
            }
            idx[axis] = r as i64;
        }
        Ok(idx)
    }

    /// Whether `sub` uses the same spacing and sits on the same absolute
    /// lattice as `self`.
    pub fn aligned_with(&self, sub: &LatticeGrid) -> bool {
        if self.dim != sub.dim {
            return false;
        }
        let rel = (self.spacing - sub.spacing).abs() / self.spacing;
        if rel > ALIGN_TOL {
            return false;
        }
        for axis in 0..self.dim.value() {
            let shift = (sub.offset[axis] - self.offset[axis]) / self.spacing;
            if (shift - shift.round()).abs() > ALIGN_TOL {
                return false;
            }
        }
        true
    }
}

/// What a potential field holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldKind {
    WhiteNoise { beta: f64, seed: u64 },
    Mollified { beta: f64, epsilon: f64, seed: u64 },
    Deterministic,
}

/// Per-site potential values on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialField {
    grid: LatticeGrid,
    values: Vec<f64>,
    kind: FieldKind,
}

impl PotentialField {
    /// Deterministic field from explicit per-site values.
    pub fn deterministic(grid: LatticeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.site_count() {
            return Err(CoreError::LengthMismatch {
                expected: grid.site_count(),
                got: values.len(),
            });
        }
        Ok(PotentialField {
            grid,
            values,
            kind: FieldKind::Deterministic,
        })
    }

    /// The zero potential.
    pub fn zero(grid: LatticeGrid) -> Self {
        let n = grid.site_count();
        PotentialField {
            grid,
            values: vec![0.0; n],
            kind: FieldKind::Deterministic,
        }
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    /// Discrete L^2 norm squared: `a^d sum_i V_i^2`.
    pub fn l2_sq(&self) -> f64 {
        let ad = self.grid.spacing.powi(self.grid.dim.value() as i32);
        ad * self.values.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Standard Gaussian attached to (seed, absolute site index). SplitMix64
/// mixes the coordinates into a ChaCha8 key; one normal variate is drawn.
fn site_gaussian(seed: u64, idx: [i64; 3]) -> f64 {
    fn splitmix(state: &mut u64) -> u64 {
        *state = state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }
    let mut state = seed ^ 0xA076_1D64_78BD_642F;
    let mut key = [0u8; 32];
    let mut words = [0u64; 4];
    words[0] = splitmix(&mut state);
    for (w, &c) in words.iter_mut().skip(1).zip(idx.iter()) {
        state ^= (c as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
        *w = splitmix(&mut state);
    }
    for (chunk, w) in key.chunks_exact_mut(8).zip(words.iter()) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = rand_chacha::ChaCha8Rng::from_seed(key);
    StandardNormal.sample(&mut rng)
}

/// Sample white noise on `grid`: i.i.d. centered Gaussians of standard
/// deviation `beta * a^{-d/2}`, bit-reproducible given (seed, grid).
pub fn sample_white_noise(grid: &LatticeGrid, beta: f64, seed: u64) -> Result<PotentialField> {
    if !(beta > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "noise amplitude must be positive, got {beta}"
        )));
    }
    let d = grid.dim().value();
    let std = beta * grid.spacing().powf(-(d as f64) / 2.0);
    let mut values = Vec::with_capacity(grid.site_count());
    for flat in 0..grid.site_count() {
        let idx = grid.absolute_index(flat)?;
        values.push(std * site_gaussian(seed, idx));
    }
    Ok(PotentialField {
        grid: grid.clone(),
        values,
        kind: FieldKind::WhiteNoise { beta, seed },
    })
}

/// Restrict a master sample to an aligned sub-grid: the exact sub-array of
/// the master values wherever the grids overlap; sites of `sub` outside the
/// master grid are drawn from the same absolute-coordinate stream, so
/// shifted boxes poking out of the master box remain coupled.
pub fn restrict_noise(master: &PotentialField, sub: &LatticeGrid) -> Result<PotentialField> {
    if !master.grid.aligned_with(sub) {
        return Err(CoreError::Misalignment(
            "sub-grid is not aligned with the master grid".into(),
        ));
    }
    let (beta, seed) = match master.kind {
        FieldKind::WhiteNoise { beta, seed } => (beta, seed),
        _ => {
            return Err(CoreError::InvalidParameter(
                "restriction requires a white-noise master field".into(),
            ))
        }
    };
    let d = master.grid.dim().value();
    let n = master.grid.points_per_side as i64;
    let std = beta * master.grid.spacing().powf(-(d as f64) / 2.0);
    // Integer shift of sub sites relative to master interior indices.
    let mut shift = [0i64; 3];
    for axis in 0..d {
        shift[axis] = ((sub.offset[axis] - master.grid.offset[axis]) / master.grid.spacing).round()
            as i64;
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
        if inside {
            values.push(master.values[master.grid.flat_of(&mc)]);
        } else {
            values.push(std * site_gaussian(seed, sub.absolute_index(flat)?));
        }
    }
    Ok(PotentialField {
        grid: sub.clone(),
        values,
        kind: FieldKind::WhiteNoise { beta, seed },
    })
}

/// Smooth, even, compactly supported mollifier profile at scale epsilon:
/// `rho_eps = eps^{-d} rho(. / eps)` with `rho(x) = c_d exp(-1/(1-|x|^2))`
/// on |x| < 1, normalised to unit mass.
#[derive(Debug, Clone)]
pub struct MollifierSpec {
    dim: Dim,
    epsilon: f64,
    normalisation: f64,
}

impl MollifierSpec {
    pub fn new(dim: Dim, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "mollifier scale must be positive, got {epsilon}"
            )));
        }
        // c_d^{-1} = omega_d int_0^1 r^{d-1} e^{-1/(1-r^2)} dr
        let d = dim.as_f64();
        let mass = dim.sphere_surface()
            * adaptive_integrate(0.0, 1.0, 1e-12, |r| {
                r.powf(d - 1.0) * bump_unnormalised(r)
            });
        Ok(MollifierSpec {
            dim,
            epsilon,
            normalisation: 1.0 / mass,
        })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Profile at unit scale: `rho(|x|) = c_d exp(-1/(1-r^2))`, zero for r >= 1.
    pub fn rho_unit(&self, r: f64) -> f64 {
        self.normalisation * bump_unnormalised(r)
    }

    /// Scaled profile `rho_eps(|x|) = eps^{-d} rho(|x| / eps)`.
    pub fn rho(&self, r: f64) -> f64 {
        self.epsilon.powi(-(self.dim.value() as i32)) * self.rho_unit(r / self.epsilon)
    }

    /// Discrete kernel sampled at lattice offsets `a j`, renormalised to
    /// unit discrete mass. Exposed so the delta-limit at epsilon -> a can be
    /// checked directly on the weights.
    pub fn lattice_kernel(&self, spacing: f64, dim: Dim) -> (Vec<[i64; 3]>, Vec<f64>) {
        let reach = (self.epsilon / spacing).ceil() as i64;
        let d = dim.value();
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut j = [0i64; 3];
        let lo = |_: usize| -reach;
        let hi = reach;
        let push = |j: [i64; 3], offsets: &mut Vec<[i64; 3]>, weights: &mut Vec<f64>| {
            let mut r2 = 0.0;
            for axis in 0..d {
                let x = j[axis] as f64 * spacing;
                r2 += x * x;
            }
            let w = self.rho(r2.sqrt());
            if w > 0.0 {
                offsets.push(j);
                weights.push(w);
            }
        };
        match d {
            1 => {
                for a0 in lo(0)..=hi {
                    j[0] = a0;
                    push(j, &mut offsets, &mut weights);
                }
            }
            2 => {
                for a0 in lo(0)..=hi {
                    for a1 in lo(1)..=hi {
                        j = [a0, a1, 0];
                        push(j, &mut offsets, &mut weights);
                    }
                }
            }
            _ => {
                for a0 in lo(0)..=hi {
                    for a1 in lo(1)..=hi {
                        for a2 in lo(2)..=hi {
                            j = [a0, a1, a2];
                            push(j, &mut offsets, &mut weights);
                        }
                    }
                }
            }
        }
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        (offsets, weights)
    }
}

fn bump_unnormalised(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Discrete convolution of a white-noise field with the mollifier sampled
/// on the grid. Near the boundary the kernel is renormalised over in-grid
/// sites, so constants are preserved exactly.
pub fn mollify_noise(field: &PotentialField, moll: &MollifierSpec) -> Result<PotentialField> {
    let grid = &field.grid;
    let (beta, seed) = match field.kind {
        FieldKind::WhiteNoise { beta, seed } => (beta, seed),
        _ => {
            return Err(CoreError::InvalidParameter(
                "mollification applies to white-noise fields".into(),
            ))
        }
    };
    if moll.dim != grid.dim() {
        return Err(CoreError::GridMismatch(
            "mollifier dimension differs from grid dimension".into(),
        ));
    }
    let a = grid.spacing();
    if moll.epsilon < 2.0 * a {
        return Err(CoreError::UnresolvableMollifier {
            epsilon: moll.epsilon,
            spacing: a,
        });
    }
    let d = grid.dim().value();
    let n = grid.points_per_side as i64;
    let (offsets, weights) = moll.lattice_kernel(a, grid.dim());
    let mut out = vec![0.0; grid.site_count()];
    for (flat, slot) in out.iter_mut().enumerate() {
        let c = grid.coords_of(flat);
        let mut acc = 0.0;
        let mut wsum = 0.0;
        'kernel: for (off, &w) in offsets.iter().zip(weights.iter()) {
            let mut nb = [0usize; 3];
            for axis in 0..d {
                let m = c[axis] as i64 + off[axis];
                if m < 0 || m >= n {
                    continue 'kernel;
                }
                nb[axis] = m as usize;
            }
            acc += w * field.values[grid.flat_of(&nb)];
            wsum += w;
        }
        *slot = acc / wsum;
    }
    Ok(PotentialField {
        grid: grid.clone(),
        values: out,
        kind: FieldKind::Mollified {
            beta,
            epsilon: moll.epsilon,
            seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn build_grid_examples() {
        // d=1, L=1, ppu=4, offset=-0.5: n=3, a=0.25, sites {-0.25, 0, 0.25}
        let g = LatticeGrid::build(Dim::One, 1.0, 4, [-0.5, 0.0, 0.0]).unwrap();
        assert_eq!(g.points_per_side(), 3);
        assert_relative_eq!(g.spacing(), 0.25);
        let sites: Vec<f64> = (0..3).map(|i| g.position(i)[0]).collect();
        assert_relative_eq!(sites[0], -0.25);
        assert_relative_eq!(sites[1], 0.0);
        assert_relative_eq!(sites[2], 0.25);

        // d=2, L=2, ppu=8: 15 per side, 225 sites
        let g = LatticeGrid::build(Dim::Two, 2.0, 8, [-1.0, -1.0, 0.0]).unwrap();
        assert_eq!(g.points_per_side(), 15);
        assert_eq!(g.site_count(), 225);

        // d=3, L=1, ppu=4: 27 sites
        let g = LatticeGrid::centered(Dim::Three, 1.0, 4).unwrap();
        assert_eq!(g.site_count(), 27);
    }

    #[test]
    fn build_grid_rejects_bad_input() {
        assert!(LatticeGrid::build(Dim::One, 0.0, 4, [0.0; 3]).is_err());
        assert!(LatticeGrid::build(Dim::One, -1.0, 4, [0.0; 3]).is_err());
        // n = round(1 * 1) - 1 = 0 interior points
        assert!(LatticeGrid::build(Dim::One, 1.0, 1, [0.0; 3]).is_err());
    }

    #[test]
    fn white_noise_std_matches_scaling() {
        // d=2, a=0.1, beta=1 -> per-site std 10; d=1, a=0.25, beta=2 -> std 4.
        let g = LatticeGrid::centered(Dim::Two, 1.0, 10).unwrap();
        assert_relative_eq!(g.spacing(), 0.1, epsilon = 1e-12);
        let std = 1.0 * g.spacing().powf(-1.0);
        assert_relative_eq!(std, 10.0, epsilon = 1e-9);
        let g1 = LatticeGrid::centered(Dim::One, 1.0, 4).unwrap();
        let std1 = 2.0 * g1.spacing().powf(-0.5);
        assert_relative_eq!(std1, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn white_noise_empirical_variance() {
        // Law-of-large-numbers check on 10^6 sites: variance within 1% of
        // beta^2 a^{-d}.
        let g = LatticeGrid::centered(Dim::One, 1000.0, 1000).unwrap();
        assert!(g.site_count() >= 999_000);
        let f = sample_white_noise(&g, 1.0, 42).unwrap();
        let n = f.values().len() as f64;
        let mean: f64 = f.values().iter().sum::<f64>() / n;
        let var: f64 = f.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let expected = g.spacing().powi(-1);
        assert!(
            (var - expected).abs() / expected < 0.01,
            "var {var} vs {expected}"
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = LatticeGrid::centered(Dim::Two, 4.0, 8).unwrap();
        let f1 = sample_white_noise(&g, 1.5, 7).unwrap();
        let f2 = sample_white_noise(&g, 1.5, 7).unwrap();
        assert_eq!(f1.values(), f2.values());
        let f3 = sample_white_noise(&g, 1.5, 8).unwrap();
        assert_ne!(f1.values(), f3.values());
    }

    #[test]
    fn restriction_is_exact_subarray() {
        let master_grid = LatticeGrid::centered(Dim::Two, 8.0, 4).unwrap();
        let master = sample_white_noise(&master_grid, 1.0, 11).unwrap();
        let sub_grid = LatticeGrid::centered(Dim::Two, 4.0, 4).unwrap();
        let restricted = restrict_noise(&master, &sub_grid).unwrap();
        // Direct sampling on the sub-grid must agree site by site.
        let direct = sample_white_noise(&sub_grid, 1.0, 11).unwrap();
        assert_eq!(restricted.values(), direct.values());
        // And every restricted value appears verbatim in the master array.
        for flat in 0..sub_grid.site_count() {
            let idx = sub_grid.absolute_index(flat).unwrap();
            let found = (0..master_grid.site_count()).find(|&m| {
                master_grid.absolute_index(m).unwrap() == idx
            });
            let m = found.expect("sub site present in master");
            assert_eq!(restricted.values()[flat], master.values()[m]);
        }
    }

    #[test]
    fn restriction_rejects_misaligned() {
        let master_grid = LatticeGrid::centered(Dim::One, 8.0, 4).unwrap();
        let master = sample_white_noise(&master_grid, 1.0, 3).unwrap();
        let shifted = LatticeGrid::build(Dim::One, 4.0, 4, [-2.1, 0.0, 0.0]).unwrap();
        assert!(restrict_noise(&master, &shifted).is_err());
    }

    #[test]
    fn mollifier_has_unit_mass() {
        for dim in [Dim::One, Dim::Two, Dim::Three] {
            let m = MollifierSpec::new(dim, 1.0).unwrap();
            let d = dim.as_f64();
            let mass = dim.sphere_surface()
                * adaptive_integrate(0.0, 1.0, 1e-11, |r| r.powf(d - 1.0) * m.rho_unit(r));
            assert_relative_eq!(mass, 1.0, epsilon = 1e-9);
            // Support in the unit ball and evenness are structural.
            assert_eq!(m.rho_unit(1.0), 0.0);
            assert_eq!(m.rho_unit(1.5), 0.0);
            assert_relative_eq!(m.rho_unit(0.3), m.rho_unit(-0.3));
        }
    }

    #[test]
    fn mollify_identity_limit_on_kernel() {
        // At epsilon = a the sampled kernel is exactly a lattice delta:
        // every off-centre lattice point falls outside the support.
        let m = MollifierSpec::new(Dim::One, 0.25).unwrap();
        let (offsets, weights) = m.lattice_kernel(0.25, Dim::One);
        assert_eq!(offsets, vec![[0, 0, 0]]);
        assert_eq!(weights, vec![1.0]);
        // The operation itself rejects scales below 2a as unresolvable.
        let g = LatticeGrid::centered(Dim::One, 4.0, 4).unwrap();
        let f = sample_white_noise(&g, 1.0, 1).unwrap();
        assert!(matches!(
            mollify_noise(&f, &m),
            Err(CoreError::UnresolvableMollifier { .. })
        ));
    }

    #[test]
    fn mollify_preserves_constants() {
        let g = LatticeGrid::centered(Dim::Two, 4.0, 8).unwrap();
        let mut f = sample_white_noise(&g, 1.0, 5).unwrap();
        for v in f.values.iter_mut() {
            *v = 3.25;
        }
        let moll = MollifierSpec::new(Dim::Two, 4.0 * g.spacing()).unwrap();
        let out = mollify_noise(&f, &moll).unwrap();
        for v in out.values() {
            assert_relative_eq!(*v, 3.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn mollified_variance_matches_quadrature() {
        // Var(xi_eps) = beta^2 rho_eps^{*2}(0) = beta^2 int rho_eps^2. The
        // discrete analogue is beta^2 a^{-d} sum w_j^2 with unit-sum weights.
        let dim = Dim::One;
        let a = 1.0 / 64.0;
        let eps = 8.0 * a;
        let moll = MollifierSpec::new(dim, eps).unwrap();
        let (_, weights) = moll.lattice_kernel(a, dim);
        let discrete_var: f64 = weights.iter().map(|w| w * w).sum::<f64>() / a;
        let continuum = adaptive_integrate(-eps, eps, 1e-11, |x| moll.rho(x) * moll.rho(x));
        assert!(
            (discrete_var - continuum).abs() / continuum < 0.03,
            "discrete {discrete_var} vs continuum {continuum}"
        );
        // And the sampled field reproduces it statistically.
        let g = LatticeGrid::centered(dim, 200.0, 64).unwrap();
        let f = sample_white_noise(&g, 1.0, 9).unwrap();
        let sm = mollify_noise(&f, &moll).unwrap();
        let interior = &sm.values()[1000..sm.values().len() - 1000];
        let n = interior.len() as f64;
        let mean: f64 = interior.iter().sum::<f64>() / n;
        let var: f64 = interior.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(
            (var - continuum).abs() / continuum < 0.05,
            "sampled {var} vs continuum {continuum}"
        );
    }
}

//! Renormalisation constants for the lattice operator.
//!
//! The divergent part of the constant is the diagonal of the lattice
//! Green's function
//!
//! ```text
//!   G_a(x; m) = (2 pi)^{-d} int_{[-pi/a, pi/a]^d} e^{i k x} / (mu_a(k) + m) dk,
//!   mu_a(k)   = (2 / a^2) sum_j (1 - cos(a k_j)),
//! ```
//!
//! evaluated through the Laplace representation
//! `G_a(a j; m) = a^{2-d} int_0^infty e^{-m a^2 t} prod_i e^{-2t} I_{j_i}(2t) dt`,
//! which reduces every lattice point to a single one-dimensional integral of
//! products of scaled Bessel functions. The constant itself is
//!
//! * d = 1: 0;
//! * d = 2: `beta^2 G_a(0; m)`, diverging like `(2 pi)^{-1} ln(1/a)`;
//! * d = 3: `beta^2 G_a(0; m)`, diverging like `1/a`, plus an optional
//!   fourth-order term `beta^4 a^3 sum_{x != 0} G_a(x; m)^3` that diverges
//!   logarithmically (the delta-mollifier limit of the continuum triple
//!   integral).
//!
//! The continuum companions `c_rho = int G rho^{*2}` and
//! `c_tilde_rho = -int G |y| rho^{*2}` are evaluated by radial quadrature.

use crate::dim::Dim;
use crate::error::{CoreError, Result};
use crate::lattice::MollifierSpec;
use crate::quad::{adaptive_integrate, gauss_legendre, gl_integrate};
use crate::special::{exp_integral_e1, scaled_bessel_i};
use serde::{Deserialize, Serialize};

/// Which terms of the renormalisation constant are included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenormOrder {
    /// d = 1: the constant vanishes.
    None,
    /// The beta^2 Green's-function diagonal (d = 2 and 3).
    SecondOrder,
    /// Second order plus the beta^4 triple-Green term (d = 3 only).
    PlusFourthOrder,
}

impl RenormOrder {
    fn name(self) -> &'static str {
        match self {
            RenormOrder::None => "none",
            RenormOrder::SecondOrder => "second_order",
            RenormOrder::PlusFourthOrder => "plus_fourth_order",
        }
    }
}

/// A fully evaluated renormalisation constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormConstant {
    #[serde(rename = "d")]
    pub dim: Dim,
    #[serde(rename = "a")]
    pub spacing: f64,
    #[serde(rename = "m")]
    pub mass: f64,
    pub beta: f64,
    pub order: RenormOrder,
    /// The energy shift C such that the renormalised operator reads
    /// -Laplacian + V + C (C > 0 in d = 2, 3, zero in d = 1).
    pub value: f64,
}

impl RenormConstant {
    /// The trivial constant (no shift), valid in any dimension. Used when a
    /// Hamiltonian is assembled without renormalisation.
    pub fn zero(dim: Dim) -> Self {
        RenormConstant {
            dim,
            spacing: 0.0,
            mass: 0.0,
            beta: 0.0,
            order: RenormOrder::None,
            value: 0.0,
        }
    }
}

/// Laplace-Bessel integral `int_0^infty e^{-c t} prod_i Ihat_{orders[i]}(2t) dt`
/// over the first `d` axes, c > 0.
fn green_time_integral(dim: Dim, c: f64, orders: [usize; 3], rel_tol: f64) -> f64 {
    let d = dim.value();
    let n_max = orders.iter().take(d).copied().max().unwrap_or(0);
    let f = |t: f64| -> f64 {
        let b = scaled_bessel_i(n_max, 2.0 * t);
        let mut prod = (-c * t).exp();
        for &o in orders.iter().take(d) {
            prod *= b[o];
        }
        prod
    };
    let mut acc = gl_integrate(0.0, 1.0, 40, f);
    let mut lo = 1.0f64;
    for _ in 0..80 {
        let hi = lo * 2.0;
        acc += gl_integrate(lo, hi, 40, f);
        lo = hi;
        // Bound the remaining tail by e^{-c t} (1.2 / sqrt(4 pi t))^d / c.
        let tail = (-c * lo).exp() * (1.2 / (4.0 * std::f64::consts::PI * lo).sqrt()).powi(d as i32)
            / c;
        if tail <= rel_tol * acc.abs() {
            break;
        }
    }
    acc
}

fn check_spacing_mass(spacing: f64, mass: f64) -> Result<()> {
    if !(mass > 0.0) {
        return Err(CoreError::NonPositiveMass(mass));
    }
    if !(spacing > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    Ok(())
}

/// Green's-function diagonal G_a(0; m), by deterministic quadrature to a
/// relative tolerance of 1e-8.
pub fn lattice_green_diagonal(dim: Dim, spacing: f64, mass: f64) -> Result<f64> {
    lattice_green_at(dim, spacing, mass, [0, 0, 0])
}

/// Green's function G_a(a j; m) at the lattice point with integer offset j.
pub fn lattice_green_at(dim: Dim, spacing: f64, mass: f64, offset: [i64; 3]) -> Result<f64> {
    check_spacing_mass(spacing, mass)?;
    let c = mass * spacing * spacing;
    let orders = [
        offset[0].unsigned_abs() as usize,
        offset[1].unsigned_abs() as usize,
        offset[2].unsigned_abs() as usize,
    ];
    let integral = green_time_integral(dim, c, orders, 1e-10);
    Ok(spacing.powi(2 - dim.value() as i32) * integral)
}

/// Lattice analogue of the fourth-order constant in d = 3:
/// `a^3 sum_{x != 0} G_a(x; m)^3`, with the sum taken exactly on
/// `0 < |j| <= j_cut` and closed by the continuum tail
/// `(4 pi)^{-2} E_1(3 sqrt(m) (j_cut + 1/2) a)`.
pub fn fourth_order_sum(spacing: f64, mass: f64) -> Result<f64> {
    check_spacing_mass(spacing, mass)?;
    let j_cut: i64 = 10;
    let c = mass * spacing * spacing;

    // Distinct sorted triples (j1 >= j2 >= j3 >= 0) with multiplicities.
    let mut triples: Vec<([usize; 3], f64)> = Vec::new();
    for j1 in 0..=j_cut {
        for j2 in 0..=j1 {
            for j3 in 0..=j2 {
                if j1 == 0 {
                    continue;
                }
                let r2 = (j1 * j1 + j2 * j2 + j3 * j3) as f64;
                if r2.sqrt() > j_cut as f64 {
                    continue;
                }
                // Axis permutations of the multiset times sign choices.
                let perms = if j1 == j2 && j2 == j3 {
                    1.0
                } else if j1 == j2 || j2 == j3 {
                    3.0
                } else {
                    6.0
                };
                let signs = [j1, j2, j3].iter().filter(|&&j| j != 0).count() as u32;
                let mult = perms * f64::powi(2.0, signs as i32);
                triples.push(([j1 as usize, j2 as usize, j3 as usize], mult));
            }
        }
    }
    let n_max = j_cut as usize;

    // One shared panel sweep: every triple integral accumulates on the same
    // quadrature nodes so the Bessel vectors are computed once per node.
    let (nodes, weights) = gauss_legendre(40);
    let mut acc = vec![0.0f64; triples.len()];
    let add_panel = |lo: f64, hi: f64, acc: &mut [f64]| {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in nodes.iter().zip(weights.iter()) {
            let t = mid + half * x;
            let b = scaled_bessel_i(n_max, 2.0 * t);
            let e = (-c * t).exp() * w * half;
            for (a, (orders, _)) in acc.iter_mut().zip(triples.iter()) {
                *a += e * b[orders[0]] * b[orders[1]] * b[orders[2]];
            }
        }
    };
    add_panel(0.0, 1.0, &mut acc);
    let mut lo = 1.0f64;
    for _ in 0..80 {
        let hi = lo * 2.0;
        add_panel(lo, hi, &mut acc);
        lo = hi;
        let tail =
            (-c * lo).exp() * (1.2 / (4.0 * std::f64::consts::PI * lo).sqrt()).powi(3) / c;
        if tail <= 1e-11 * acc[0].abs() {
            break;
        }
    }

    // a^3 G^3 = (a^{-1} I)^3 a^3 = I^3.
    let mut sum = 0.0;
    for (a, (_, mult)) in acc.iter().zip(triples.iter()) {
        sum += mult * a.powi(3);
    }
    let radius = (j_cut as f64 + 0.5) * spacing;
    let tail = exp_integral_e1(3.0 * mass.sqrt() * radius)
        / (4.0 * std::f64::consts::PI).powi(2);
    Ok(sum + tail)
}

/// Renormalisation constant C for the operator -Laplacian + beta xi + C.
pub fn renorm_constant(
    dim: Dim,
    spacing: f64,
    mass: f64,
    beta: f64,
    order: RenormOrder,
) -> Result<RenormConstant> {
    let value = match (dim, order) {
        (Dim::One, RenormOrder::None) => 0.0,
        (Dim::Two, RenormOrder::SecondOrder) | (Dim::Three, RenormOrder::SecondOrder) => {
            beta * beta * lattice_green_diagonal(dim, spacing, mass)?
        }
        (Dim::Three, RenormOrder::PlusFourthOrder) => {
            beta * beta * lattice_green_diagonal(dim, spacing, mass)?
                + beta.powi(4) * fourth_order_sum(spacing, mass)?
        }
        (d, o) => {
            return Err(CoreError::OrderDimensionMismatch {
                order: o.name(),
                required: match o {
                    RenormOrder::None => 1,
                    RenormOrder::SecondOrder => 2,
                    RenormOrder::PlusFourthOrder => 3,
                },
                dim: d.value(),
            })
        }
    };
    Ok(RenormConstant {
        dim,
        spacing,
        mass,
        beta,
        order,
        value,
    })
}

/// The physically sensible default order per dimension.
pub fn default_order(dim: Dim) -> RenormOrder {
    match dim {
        Dim::One => RenormOrder::None,
        _ => RenormOrder::SecondOrder,
    }
}

/// Lattice analogue of the deterministic shift in the scaling law:
/// `delta_beta = beta^2 C_a(1) - C_{a/beta}(beta^{2-d/2})`, exact on the
/// lattice (zero in d = 1).
pub fn scaling_delta_beta(
    dim: Dim,
    spacing: f64,
    mass: f64,
    beta: f64,
    order: RenormOrder,
) -> Result<f64> {
    if dim == Dim::One {
        return Ok(0.0);
    }
    let lhs = beta * beta * renorm_constant(dim, spacing, mass, 1.0, order)?.value;
    let scaled_beta = beta.powf(2.0 - dim.as_f64() / 2.0);
    let rhs = renorm_constant(dim, spacing / beta, mass, scaled_beta, order)?.value;
    Ok(lhs - rhs)
}

/// Radial self-convolution `rho_eps^{*2}(r)` of the mollifier profile in
/// d = 3, by two-dimensional quadrature in spherical coordinates.
fn rho_star2_radial(moll: &MollifierSpec, r: f64) -> f64 {
    let eps = moll.epsilon();
    if r >= 2.0 * eps {
        return 0.0;
    }
    2.0 * std::f64::consts::PI
        * gl_integrate(0.0, eps, 48, |s| {
            let inner = gl_integrate(-1.0, 1.0, 48, |t| {
                let dist2 = r * r + s * s - 2.0 * r * s * t;
                moll.rho(dist2.max(0.0).sqrt())
            });
            s * s * moll.rho(s) * inner
        })
}

/// Continuum constant `c_rho = int_{R^3} G(y) rho_eps^{*2}(y) dy` with
/// `G(x) = 1/(4 pi |x|)`; radially this is `int_0^{2 eps} r rho_eps^{*2}(r) dr`.
/// Scales like `c_rho(1) / eps`.
pub fn continuum_c_rho(moll: &MollifierSpec) -> Result<f64> {
    if moll.dim() != Dim::Three {
        return Err(CoreError::InvalidDimension(moll.dim().value()));
    }
    let eps = moll.epsilon();
    let value = adaptive_integrate(0.0, 2.0 * eps, 1e-9, |r| r * rho_star2_radial(moll, r));
    if !value.is_finite() || value <= 0.0 {
        return Err(CoreError::QuadratureFailure(format!(
            "c_rho quadrature returned {value}"
        )));
    }
    Ok(value)
}

/// Continuum constant `c_tilde_rho = -int G(y) |y| rho_eps^{*2}(y) dy`,
/// radially `-int_0^{2 eps} r^2 rho_eps^{*2}(r) dr`. Since G(y)|y| is the
/// constant 1/(4 pi), this equals -1/(4 pi) for every admissible profile.
pub fn continuum_c_tilde_rho(moll: &MollifierSpec) -> Result<f64> {
    if moll.dim() != Dim::Three {
        return Err(CoreError::InvalidDimension(moll.dim().value()));
    }
    let eps = moll.epsilon();
    let value = adaptive_integrate(0.0, 2.0 * eps, 1e-9, |r| r * r * rho_star2_radial(moll, r));
    Ok(-value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Closed form in d = 1: G_a(0; m) = 1 / sqrt(m (m a^2 + 4)).
    fn green_1d_exact(a: f64, m: f64) -> f64 {
        1.0 / (m * (m * a * a + 4.0)).sqrt()
    }

    #[test]
    fn d1_diagonal_matches_closed_form() {
        for &a in &[0.5, 0.125, 2.0_f64.powi(-9)] {
            for &m in &[0.5, 1.0, 3.0] {
                let g = lattice_green_diagonal(Dim::One, a, m).unwrap();
                let exact = green_1d_exact(a, m);
                assert_relative_eq!(g, exact, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn d1_continuum_limit_is_half() {
        // Continuum kernel e^{-|x|}/2 at the origin for m = 1.
        let g = lattice_green_diagonal(Dim::One, 2.0_f64.powi(-9), 1.0).unwrap();
        assert!((g - 0.5).abs() / 0.5 < 5e-3, "g = {g}");
    }

    #[test]
    fn d2_log_slope_is_inverse_two_pi() {
        let values: Vec<f64> = (4..=9)
            .map(|k| lattice_green_diagonal(Dim::Two, 2.0_f64.powi(-k), 1.0).unwrap())
            .collect();
        // Least-squares slope of G against ln(1/a).
        let xs: Vec<f64> = (4..=9).map(|k| (k as f64) * std::f64::consts::LN_2).collect();
        let n = xs.len() as f64;
        let xm = xs.iter().sum::<f64>() / n;
        let ym = values.iter().sum::<f64>() / n;
        let slope = xs
            .iter()
            .zip(values.iter())
            .map(|(x, y)| (x - xm) * (y - ym))
            .sum::<f64>()
            / xs.iter().map(|x| (x - xm).powi(2)).sum::<f64>();
        let target = 1.0 / (2.0 * std::f64::consts::PI);
        assert!(
            (slope - target).abs() / target < 0.02,
            "slope {slope} vs {target}"
        );
    }

    #[test]
    fn d2_dyadic_increment() {
        // G_{a/2} - G_a -> ln(2) / (2 pi) along a dyadic ladder.
        let target = std::f64::consts::LN_2 / (2.0 * std::f64::consts::PI);
        let g1 = lattice_green_diagonal(Dim::Two, 2.0_f64.powi(-8), 1.0).unwrap();
        let g2 = lattice_green_diagonal(Dim::Two, 2.0_f64.powi(-9), 1.0).unwrap();
        assert!(((g2 - g1) - target).abs() / target < 0.02);
    }

    #[test]
    fn d3_scaled_diagonal_converges() {
        let g8 = lattice_green_diagonal(Dim::Three, 2.0_f64.powi(-8), 1.0).unwrap();
        let g9 = lattice_green_diagonal(Dim::Three, 2.0_f64.powi(-9), 1.0).unwrap();
        let v8 = 2.0_f64.powi(-8) * g8;
        let v9 = 2.0_f64.powi(-9) * g9;
        assert!(v9 > 0.0);
        assert!((v8 - v9).abs() / v9 < 0.01, "{v8} vs {v9}");
        // The limit is the simple-cubic Watson integral / 2 = 0.252731...
        assert!((v9 - 0.2527).abs() < 0.005, "v9 = {v9}");
    }

    #[test]
    fn diagonal_decreasing_in_mass() {
        for dim in [Dim::One, Dim::Two, Dim::Three] {
            let a = 0.125;
            let g1 = lattice_green_diagonal(dim, a, 0.5).unwrap();
            let g2 = lattice_green_diagonal(dim, a, 1.0).unwrap();
            let g3 = lattice_green_diagonal(dim, a, 2.0).unwrap();
            assert!(g1 > g2 && g2 > g3);
        }
    }

    #[test]
    fn rejects_invalid_mass() {
        assert!(lattice_green_diagonal(Dim::Two, 0.1, 0.0).is_err());
        assert!(lattice_green_diagonal(Dim::Two, 0.1, -1.0).is_err());
    }

    #[test]
    fn constant_is_beta_even_polynomial() {
        // d = 2: ratio exactly 4 between beta = 2 and beta = 1.
        let c1 = renorm_constant(Dim::Two, 0.1, 1.0, 1.0, RenormOrder::SecondOrder).unwrap();
        let c2 = renorm_constant(Dim::Two, 0.1, 1.0, 2.0, RenormOrder::SecondOrder).unwrap();
        assert_relative_eq!(c2.value / c1.value, 4.0, max_relative = 1e-12);
        // d = 3 with the fourth-order term: value(beta) = beta^2 g + beta^4 s.
        let g = lattice_green_diagonal(Dim::Three, 0.25, 1.0).unwrap();
        let s = fourth_order_sum(0.25, 1.0).unwrap();
        let c = renorm_constant(Dim::Three, 0.25, 1.0, 1.5, RenormOrder::PlusFourthOrder).unwrap();
        assert_relative_eq!(c.value, 1.5f64.powi(2) * g + 1.5f64.powi(4) * s, max_relative = 1e-12);
    }

    #[test]
    fn d1_constant_vanishes() {
        for &(a, m, beta) in &[(0.1, 1.0, 1.0), (0.5, 2.0, 3.0)] {
            let c = renorm_constant(Dim::One, a, m, beta, RenormOrder::None).unwrap();
            assert_eq!(c.value, 0.0);
        }
    }

    #[test]
    fn order_dimension_mismatch_rejected() {
        assert!(renorm_constant(Dim::Two, 0.1, 1.0, 1.0, RenormOrder::PlusFourthOrder).is_err());
        assert!(renorm_constant(Dim::Two, 0.1, 1.0, 1.0, RenormOrder::None).is_err());
        assert!(renorm_constant(Dim::One, 0.1, 1.0, 1.0, RenormOrder::SecondOrder).is_err());
    }

    #[test]
    fn monotone_in_spacing_for_d23() {
        for dim in [Dim::Two, Dim::Three] {
            let g_coarse = lattice_green_diagonal(dim, 0.25, 1.0).unwrap();
            let g_fine = lattice_green_diagonal(dim, 0.125, 1.0).unwrap();
            assert!(g_fine > g_coarse);
        }
    }

    #[test]
    fn fourth_order_log_slope_stabilises() {
        // Slope of the fourth-order term against ln(1/a) over a dyadic
        // ladder; the delta-mollifier limit of the continuum triple integral
        // fixes the coefficient at (4 pi)^{-2}.
        let sums: Vec<f64> = (4..=7)
            .map(|k| fourth_order_sum(2.0_f64.powi(-k), 1.0).unwrap())
            .collect();
        let ln2 = std::f64::consts::LN_2;
        let slopes: Vec<f64> = sums.windows(2).map(|w| (w[1] - w[0]) / ln2).collect();
        let target = (4.0 * std::f64::consts::PI).powi(-2);
        for pair in slopes.windows(2) {
            assert!(
                (pair[1] - pair[0]).abs() / pair[1].abs() < 0.05,
                "slopes not stable: {slopes:?}"
            );
        }
        let last = *slopes.last().unwrap();
        assert!(
            (last - target).abs() / target < 0.05,
            "slope {last} vs (4 pi)^-2 = {target}"
        );
    }

    #[test]
    fn c_rho_positive_and_scales() {
        let m1 = MollifierSpec::new(Dim::Three, 1.0).unwrap();
        let c1 = continuum_c_rho(&m1).unwrap();
        assert!(c1 > 0.0);
        let m_half = MollifierSpec::new(Dim::Three, 0.5).unwrap();
        let c_half = continuum_c_rho(&m_half).unwrap();
        assert_relative_eq!(c_half / c1, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn c_rho_against_monte_carlo_oracle() {
        // Independent Monte Carlo evaluation of int G rho^{*2} by sampling
        // the convolution: E_{X,Y ~ rho}[ G(X + Y) ] with X, Y i.i.d.
        // (rho even, so X + Y ~ rho^{*2}).
        use rand::Rng;
        use rand::SeedableRng;
        let m = MollifierSpec::new(Dim::Three, 1.0).unwrap();
        let c = continuum_c_rho(&m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> [f64; 3] {
            // Rejection sampling from the bump profile in the unit ball.
            let peak = m.rho_unit(0.0);
            loop {
                let x: [f64; 3] = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                if rng.gen_range(0.0..peak) < m.rho_unit(r) {
                    return x;
                }
            }
        };
        let samples = 200_000;
        let mut sum = 0.0;
        for _ in 0..samples {
            let x = draw(&mut rng);
            let y = draw(&mut rng);
            let r = ((x[0] + y[0]).powi(2) + (x[1] + y[1]).powi(2) + (x[2] + y[2]).powi(2)).sqrt();
            sum += 1.0 / (4.0 * std::f64::consts::PI * r);
        }
        let mc = sum / samples as f64;
        assert!((mc - c).abs() / c < 0.01, "MC {mc} vs quadrature {c}");
    }

    #[test]
    fn c_tilde_rho_is_negative_quarter_pi() {
        // G(y)|y| = 1/(4 pi), so the integral is -1/(4 pi) for any profile.
        let m = MollifierSpec::new(Dim::Three, 1.0).unwrap();
        let c = continuum_c_tilde_rho(&m).unwrap();
        assert!(c < 0.0);
        assert_relative_eq!(c, -1.0 / (4.0 * std::f64::consts::PI), max_relative = 1e-6);
    }

    #[test]
    fn delta_beta_zero_in_d1() {
        let d = scaling_delta_beta(Dim::One, 0.1, 1.0, 0.5, RenormOrder::None).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn delta_beta_small_for_small_beta_d2() {
        // delta_beta = O(beta^2 ln(1/beta)) as beta -> 0.
        let d_half = scaling_delta_beta(Dim::Two, 0.05, 1.0, 0.5, RenormOrder::SecondOrder).unwrap();
        let d_tenth = scaling_delta_beta(Dim::Two, 0.05, 1.0, 0.1, RenormOrder::SecondOrder).unwrap();
        assert!(d_half.abs() < 0.1);
        assert!(d_tenth.abs() < d_half.abs());
    }
}

//! Scaled modified Bessel functions and the exponential integral.
//!
//! `e^{-x} I_n(x)` is the building block of the lattice Green's function
//! integrals: the momentum-space integral over the Brillouin zone reduces to
//! a one-dimensional Laplace-type integral of products of these.

/// Scaled modified Bessel functions `e^{-x} I_n(x)` for n = 0..=n_max, x >= 0.
///
/// Uses Miller's backward recurrence with the normalisation
/// `e^{-x}(I_0 + 2 sum_{k>=1} I_k) = 1` for moderate x, and the Hankel
/// asymptotic expansion once x is far beyond n_max^2.
pub(crate) fn scaled_bessel_i(n_max: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0);
    if x == 0.0 {
        let mut out = vec![0.0; n_max + 1];
        out[0] = 1.0;
        return out;
    }
    let asym_cut = (50.0 * (n_max as f64).powi(2)).max(2000.0);
    if x >= asym_cut {
        return (0..=n_max).map(|n| scaled_bessel_asymptotic(n, x)).collect();
    }

    // Miller: run the recurrence I_{m-1} = (2m/x) I_m + I_{m+1} downward from
    // a start order well above both n_max and x, then normalise with
    // e^{-x} (I_0 + 2 sum_{k>=1} I_k) = 1.
    let start = n_max + 2 + (x + 40.0 * (x.sqrt() + 1.0)) as usize;
    let mut out = vec![0.0; n_max + 1];
    let mut upper = 0.0_f64; // unnormalised I_{m+1}
    let mut curr = 1e-280_f64; // unnormalised I_m
    let mut norm = 0.0_f64;
    for m in (0..=start).rev() {
        norm += if m == 0 { curr } else { 2.0 * curr };
        if m <= n_max {
            out[m] = curr;
        }
        if m > 0 {
            let lower = (2.0 * m as f64 / x) * curr + upper;
            upper = curr;
            curr = lower;
            if curr > 1e260 {
                let s = 1e-260;
                curr *= s;
                upper *= s;
                norm *= s;
                for v in out.iter_mut() {
                    *v *= s;
                }
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Hankel expansion of `e^{-x} I_n(x)` for x >> n^2.
fn scaled_bessel_asymptotic(n: usize, x: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=12 {
        let kf = k as f64;
        term *= -(mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// Exponential integral E_1(x) for x > 0.
pub(crate) fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 1.0 {
        // Series: E_1(x) = -gamma - ln x + sum (-1)^{k+1} x^k / (k * k!)
        const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..=40 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1.0) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        // Modified Lentz continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..200 {
            let a = -(i as f64) * (i as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

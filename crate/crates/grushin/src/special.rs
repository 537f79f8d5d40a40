//! Gegenbauer polynomials and real spherical harmonics on S^{N-1}.

use statrs::function::gamma::ln_gamma;

use crate::error::{GrushinError, Result};

/// Gegenbauer polynomial C_q^lambda(x) by the forward three-term recurrence
///   (q+1) C_{q+1} = 2 (q+lambda) x C_q - (q + 2 lambda - 1) C_{q-1}.
pub fn gegenbauer(q: usize, lambda: f64, x: f64) -> f64 {
    if q == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 2.0 * lambda * x;
    for m in 1..q {
        let m = m as f64;
        let next = (2.0 * (m + lambda) * x * cur - (m + 2.0 * lambda - 1.0) * prev) / (m + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// d/dx C_q^lambda(x) = 2 lambda C_{q-1}^{lambda+1}(x).
pub fn gegenbauer_deriv(q: usize, lambda: f64, x: f64) -> f64 {
    if q == 0 {
        0.0
    } else {
        2.0 * lambda * gegenbauer(q - 1, lambda + 1.0, x)
    }
}

/// L^2 norm squared of C_q^lambda against (1-x^2)^{lambda-1/2} on [-1, 1]:
///   pi 2^{1-2 lambda} Gamma(q + 2 lambda) / (q! (q + lambda) Gamma(lambda)^2).
pub fn gegenbauer_norm_sq(q: usize, lambda: f64) -> f64 {
    let q_f = q as f64;
    (std::f64::consts::PI.ln() + (1.0 - 2.0 * lambda) * std::f64::consts::LN_2
        + ln_gamma(q_f + 2.0 * lambda)
        - ln_gamma(q_f + 1.0)
        - (q_f + lambda).ln()
        - 2.0 * ln_gamma(lambda))
    .exp()
}

/// Dimension of the degree-l spherical harmonic space on S^{N-1}:
///   (N + 2l - 2) Gamma(N + l - 2) / (Gamma(l + 1) Gamma(N - 1)),
/// with d_0 = 1 (the formula is indeterminate at l = 0 for N = 2).
pub fn harmonic_dim(n_dim: usize, l: usize) -> usize {
    assert!(n_dim >= 2, "harmonics need an ambient dimension >= 2");
    if l == 0 {
        return 1;
    }
    let n = n_dim as f64;
    let l_f = l as f64;
    let v = (n + 2.0 * l_f - 2.0)
        * (ln_gamma(n + l_f - 2.0) - ln_gamma(l_f + 1.0) - ln_gamma(n - 1.0)).exp();
    v.round() as usize
}

/// Surface measure of the unit sphere S^{N-1}.
pub fn sphere_area(n_dim: usize) -> f64 {
    let n = n_dim as f64;
    (std::f64::consts::PI.ln() * (n / 2.0) + std::f64::consts::LN_2 - ln_gamma(n / 2.0)).exp()
}

/// Fully normalized associated Legendre P-bar_{l,m}(x), including the factor
/// sqrt((2l+1)(l-m)! / (4 pi (l+m)!)), by the stable column recurrence.
fn legendre_normalized(l: usize, m: usize, x: f64) -> f64 {
    debug_assert!(m <= l);
    let s = (1.0 - x * x).max(0.0).sqrt();
    // Seed: P-bar_{m,m}.
    let mut pmm = (4.0 * std::f64::consts::PI).sqrt().recip();
    for k in 1..=m {
        let k = k as f64;
        pmm *= s * ((2.0 * k + 1.0) / (2.0 * k)).sqrt();
    }
    if l == m {
        return pmm;
    }
    let mf = m as f64;
    let mut prev = pmm;
    let mut cur = x * (2.0 * mf + 3.0).sqrt() * pmm;
    for ll in (m + 2)..=l {
        let lf = ll as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((2.0 * lf + 1.0) / (2.0 * lf - 3.0)) * ((lf - 1.0) * (lf - 1.0) - mf * mf)
            / (lf * lf - mf * mf))
            .sqrt();
        let next = a * x * cur - b * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Real spherical harmonic Y_{l,j} on S^{N-1}, orthonormal in L^2(S^{N-1})
/// with the unnormalized surface measure.
///
/// Index layout:
/// - N = 2: j = 0 is cos(l theta), j = 1 is sin(l theta) (l >= 1; l = 0 has j = 0 only).
/// - N = 3: j = 0 is the zonal harmonic; j = 2m-1 / 2m are the cos / sin
///   harmonics of azimuthal order m.
/// - N >= 4: only the zonal harmonic (j = 0) is available; the full basis is
///   not implemented there and mode coverage is restricted accordingly.
pub fn eval_harmonic(n_dim: usize, l: usize, j: usize, omega: &[f64]) -> Result<f64> {
    if omega.len() != n_dim {
        return Err(GrushinError::InvalidParameter(format!(
            "omega has {} components, expected {}",
            omega.len(),
            n_dim
        )));
    }
    if j >= harmonic_dim(n_dim, l) {
        return Err(GrushinError::InvalidParameter(format!(
            "harmonic index j = {j} out of range for N = {n_dim}, l = {l}"
        )));
    }
    match n_dim {
        2 => {
            let theta = omega[1].atan2(omega[0]);
            let lf = l as f64;
            if l == 0 {
                Ok((2.0 * std::f64::consts::PI).sqrt().recip())
            } else if j == 0 {
                Ok((lf * theta).cos() / std::f64::consts::PI.sqrt())
            } else {
                Ok((lf * theta).sin() / std::f64::consts::PI.sqrt())
            }
        }
        3 => {
            let x = omega[2].clamp(-1.0, 1.0);
            let phi2 = omega[1].atan2(omega[0]);
            if j == 0 {
                Ok(legendre_normalized(l, 0, x))
            } else {
                let m = j.div_ceil(2);
                let base = std::f64::consts::SQRT_2 * legendre_normalized(l, m, x);
                if j % 2 == 1 {
                    Ok(base * (m as f64 * phi2).cos())
                } else {
                    Ok(base * (m as f64 * phi2).sin())
                }
            }
        }
        _ => {
            if j != 0 {
                return Err(GrushinError::Unsupported(format!(
                    "N = {n_dim}: only zonal harmonics (j = 0) are implemented"
                )));
            }
            // Zonal harmonic about e_1, normalized in L^2(S^{N-1}): the slice
            // integral over S^{N-2} turns the squared norm into
            // |S^{N-2}| * int C_l^2 (1-t^2)^{(N-3)/2} dt, the Gegenbauer norm.
            let lam = (n_dim as f64 - 2.0) / 2.0;
            let t = omega[0].clamp(-1.0, 1.0);
            let h = sphere_area(n_dim - 1) * gegenbauer_norm_sq(l, lam);
            Ok(gegenbauer(l, lam, t) / h.sqrt())
        }
    }
}

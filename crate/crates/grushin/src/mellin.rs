//! Frequency-side multiplier calculus: the quadratic symbol a_s(eta, k), the
//! dyadic partition of unity over the distance to its nearest root, the band
//! symbols b_s^beta, and the kernel L^1 bounds whose aggregate decays like
//! log2(s)/s.

use num_complex::Complex64;

use crate::error::{GrushinError, Result};
use crate::quad::adaptive;

/// Parameter pack for the multiplier: dimension N >= 2 and a half-integer
/// shift s > 100 (dist(s, N) = 1/2 keeps the symbol away from zero on real
/// frequencies).
#[derive(Debug, Clone, Copy)]
pub struct MultiplierParams {
    pub n_dim: usize,
    pub s: f64,
}

impl MultiplierParams {
    pub fn new(n_dim: usize, s: f64) -> Result<Self> {
        if n_dim < 2 {
            return Err(GrushinError::InvalidParameter(format!(
                "dimension N = {n_dim} must be at least 2"
            )));
        }
        if !(s > 100.0) {
            return Err(GrushinError::InvalidParameter(format!(
                "shift s = {s} must exceed 100"
            )));
        }
        let dist = (s - s.round()).abs();
        if (dist - 0.5).abs() > 1e-9 {
            return Err(GrushinError::InvalidParameter(format!(
                "shift s = {s} must sit half-way between integers"
            )));
        }
        Ok(MultiplierParams { n_dim, s })
    }

    /// The two imaginary-axis roots of the symbol: a_s(eta, k) =
    /// -(eta - iA)(eta - iB) with
    ///   A, B = (s + (N+1)/2) -/+ sqrt(k(N+k) + s + (N+1)^2/4).
    pub fn roots(&self, k: usize) -> (f64, f64) {
        let c = self.s + (self.n_dim as f64 + 1.0) / 2.0;
        let k = k as f64;
        let d = (k * (self.n_dim as f64 + k) + self.s
            + (self.n_dim as f64 + 1.0).powi(2) / 4.0)
            .sqrt();
        (c - d, c + d)
    }

    pub fn multiplier(&self, eta: f64, k: usize) -> Complex64 {
        let (a, b) = self.roots(k);
        -(Complex64::new(eta, -a) * Complex64::new(eta, -b))
    }

    pub fn multiplier_modulus(&self, eta: f64, k: usize) -> f64 {
        let (a, b) = self.roots(k);
        ((eta * eta + a * a) * (eta * eta + b * b)).sqrt()
    }

    /// Scan k <= ceil(10 s) at eta = 0 (the modulus is even and increasing in
    /// eta^2, so the real-frequency minimum sits there). The guaranteed lower
    /// bound |s - k|(s + k + N) >= (s + N)/2 follows from dist(s, N) = 1/2.
    pub fn min_modulus_scan(&self) -> MinModulusReport {
        let k_hi = (10.0 * self.s).ceil() as usize;
        let mut best = f64::INFINITY;
        let mut arg_k = 0;
        for k in 0..=k_hi {
            let v = self.multiplier_modulus(0.0, k);
            if v < best {
                best = v;
                arg_k = k;
            }
        }
        MinModulusReport {
            min_modulus: best,
            arg_k,
            lower_bound: (self.s + self.n_dim as f64) / 2.0,
        }
    }

    pub fn partition(&self) -> BandFamily {
        let m = (self.s / 10.0).log2().floor() as u32;
        BandFamily { s: self.s, m }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinModulusReport {
    pub min_modulus: f64,
    pub arg_k: usize,
    pub lower_bound: f64,
}

/// Order-5 smoothstep: 0 below 0, 1 above 1, C^2 across both junctions.
fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    }
}

/// Dyadic partition of unity on r > 0 with m + 1 bands, built by telescoping
/// cumulative cutoffs, so the sum is exactly 1 in floating point.
///
/// H_beta falls from 1 to 0 on [2^{beta-1}, 2^beta] for beta < m - 1 and on
/// [s/40, 2^{m-1}] for beta = m - 1 (s/40 always lies in [2^{m-2}, 2^{m-1})).
/// The bands are Phi_0 = H_0, Phi_beta = H_beta - H_{beta-1}, and
/// Phi_m = 1 - H_{m-1}, supported respectively in (0, 1],
/// [2^{beta-2}, 2^beta], and [s/40, infinity).
#[derive(Debug, Clone, Copy)]
pub struct BandFamily {
    pub s: f64,
    pub m: u32,
}

impl BandFamily {
    pub fn band_count(&self) -> usize {
        self.m as usize + 1
    }

    fn cumulative(&self, beta: u32, r: f64) -> f64 {
        let (lo, hi) = if beta + 1 == self.m {
            (self.s / 40.0, 2f64.powi(self.m as i32 - 1))
        } else {
            (2f64.powi(beta as i32 - 1), 2f64.powi(beta as i32))
        };
        1.0 - smoothstep((r - lo) / (hi - lo))
    }

    pub fn cutoff(&self, beta: u32, r: f64) -> f64 {
        if beta == 0 {
            self.cumulative(0, r)
        } else if beta == self.m {
            1.0 - self.cumulative(self.m - 1, r)
        } else {
            self.cumulative(beta, r) - self.cumulative(beta - 1, r)
        }
    }

    /// Closed support interval of Phi_beta (upper end infinite for beta = m).
    pub fn support(&self, beta: u32) -> (f64, f64) {
        if beta == 0 {
            (0.0, 1.0)
        } else if beta == self.m {
            (self.s / 40.0, f64::INFINITY)
        } else {
            (2f64.powi(beta as i32 - 2), 2f64.powi(beta as i32))
        }
    }

    /// Measured sup |Phi_beta'| * 2^beta and sup |Phi_beta''| * 4^beta over a
    /// dense grid (central differences). The scaled values are comparable
    /// across bands by construction of the dyadic transitions.
    pub fn derivative_constants(&self, beta: u32) -> (f64, f64) {
        let (lo, hi) = self.support(beta);
        let hi = if hi.is_finite() { hi } else { self.s / 10.0 };
        let span = hi - lo.max(0.0) + 1.0;
        let h = span * 1e-6;
        let mut c1: f64 = 0.0;
        let mut c2: f64 = 0.0;
        let n = 4000;
        for i in 0..=n {
            let r = lo.max(0.0) - 0.5 + (span + 1.0) * i as f64 / n as f64;
            if r <= h {
                continue;
            }
            let (fm, f0, fp) = (
                self.cutoff(beta, r - h),
                self.cutoff(beta, r),
                self.cutoff(beta, r + h),
            );
            c1 = c1.max(((fp - fm) / (2.0 * h)).abs());
            c2 = c2.max(((fp - 2.0 * f0 + fm) / (h * h)).abs());
        }
        let scale = 2f64.powi(beta as i32);
        (c1 * scale, c2 * scale * scale)
    }

    /// Band symbol b_s^beta(eta, k) = Phi_beta(|eta - iA|) / a_s(eta, k).
    pub fn symbol(
        &self,
        params: &MultiplierParams,
        beta: u32,
        eta: f64,
        k: usize,
    ) -> Complex64 {
        let (a, _) = params.roots(k);
        let dist = (eta * eta + a * a).sqrt();
        let phi = self.cutoff(beta, dist);
        if phi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            phi / params.multiplier(eta, k)
        }
    }

    /// Kernel envelope of band beta as a function of the spatial offset r:
    /// 2^beta / (s (1 + 2^beta |r|)^10) below the top band, and the k-sum
    /// sum_k 1/((k+s)(1+(k+s)^2 r^2)) at beta = m, evaluated in closed form
    /// through the digamma function (see `top_band_kernel`).
    pub fn kernel(&self, beta: u32, r: f64) -> f64 {
        if beta < self.m {
            let two_b = 2f64.powi(beta as i32);
            two_b / (self.s * (1.0 + two_b * r.abs()).powi(10))
        } else {
            top_band_kernel(self.s, r)
        }
    }

    /// L^1(R) norm of the band kernel: numeric quadrature next to the closed
    /// form (2/(9s) below the top band, pi * sum_k (k+s)^{-2} at the top).
    pub fn kernel_l1(&self, beta: u32) -> Result<BandL1> {
        if beta > self.m {
            return Err(GrushinError::InvalidParameter(format!(
                "band {beta} out of range, top band is {}",
                self.m
            )));
        }
        let s = self.s;
        let (quadrature, closed_form) = if beta < self.m {
            let hi = 1200.0 / 2f64.powi(beta as i32);
            let q = 2.0 * adaptive(&mut |r| self.kernel(beta, r), 0.0, hi, 1e-14);
            (q, 2.0 / (9.0 * s))
        } else {
            // Integrable log singularity at 0 and a t^{-2} tail; the
            // remainder past R integrates the tail expansion T3/r^2.
            let hi = 1e4;
            let body = adaptive(&mut |r| top_band_kernel(s, r), 0.0, hi, 1e-13);
            let t3 = -tetragamma(s) / 2.0;
            (2.0 * (body + t3 / hi), std::f64::consts::PI * trigamma(s))
        };
        Ok(BandL1 {
            beta,
            quadrature,
            closed_form,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BandL1 {
    pub beta: u32,
    pub quadrature: f64,
    pub closed_form: f64,
}

/// Top-band kernel sum_{k>=0} 1/((k+s)(1+(k+s)^2 r^2)).
///
/// Partial fractions give 1/((k+s)(1+(k+s)^2 r^2)) =
/// 1/(k+s) - (k+s)/((k+s)^2 + 1/r^2), and the paired series telescopes to
/// Re psi(s + i/r) - psi(s). That difference is evaluated term by term in
/// difference-first form (the kernel can be ten orders below psi itself, so
/// subtracting two digamma values would lose most of the significand).
/// Accurate for s >= 40, the asymptotic regime of the digamma series.
pub fn top_band_kernel(s: f64, r: f64) -> f64 {
    let r = r.abs();
    if r == 0.0 {
        return f64::INFINITY;
    }
    let y = 1.0 / r;
    let z = Complex64::new(s, y);
    let d = s * s + y * y;
    // Re ln(z/s) and Re(1/(2s) - 1/(2z)) without cancellation.
    let out = 0.5 * (y / s).powi(2).ln_1p() + y * y / (2.0 * s * d);
    // Asymptotic tails: psi(x) ~ ... - sum_j c_j x^{-2j}. The power
    // differences follow the recurrence
    //   z^{-2j} - s^{-2j} = (z^{-2(j-1)} - s^{-2(j-1)}) s^{-2}
    //                       + z^{-2(j-1)} (z^{-2} - s^{-2})
    // seeded by z^{-2} - s^{-2} = y(y - 2is)/(z^2 s^2), exact in y.
    const C: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32760.0,
    ];
    let zi2 = (z * z).inv();
    let si2 = 1.0 / (s * s);
    let seed = Complex64::new(y, -2.0 * s) * y * zi2 * si2;
    let mut diff = seed;
    let mut zneg = zi2;
    let mut corr = C[0] * diff.re;
    for &c in C.iter().skip(1) {
        diff = diff * si2 + zneg * seed;
        zneg *= zi2;
        corr += c * diff.re;
    }
    out - corr
}

/// Reference evaluation of the top-band kernel by direct summation, truncated
/// when a term drops below 1e-16 of the running sum, with the integral-test
/// remainder (plus Euler-Maclaurin half term) added.
pub fn top_band_kernel_direct(s: f64, r: f64) -> f64 {
    let r2 = r * r;
    let mut sum = 0.0;
    let mut k = 0f64;
    loop {
        let u = k + s;
        let term = 1.0 / (u * (1.0 + u * u * r2));
        sum += term;
        if term < 1e-16 * sum {
            // Tail of integral type: int_K^inf du/(u(1+u^2 r^2)) plus half
            // the boundary term.
            let u1 = k + 1.0 + s;
            let tail = (1.0 + 1.0 / (u1 * u1 * r2)).ln() / 2.0;
            let half = 1.0 / (2.0 * u1 * (1.0 + u1 * u1 * r2));
            return sum + tail + half;
        }
        k += 1.0;
    }
}

#[derive(Debug, Clone)]
pub struct AggregateReport {
    pub s: f64,
    pub m: u32,
    pub bands: Vec<BandL1>,
    /// Sum of the quadrature L^1 norms over all bands.
    pub aggregate: f64,
    /// aggregate * s / log2(s); bounded iff the aggregate decays like
    /// log2(s)/s.
    pub normalized: f64,
}

pub fn aggregate_l1(params: &MultiplierParams) -> Result<AggregateReport> {
    let family = params.partition();
    let mut bands = Vec::with_capacity(family.band_count());
    for beta in 0..=family.m {
        bands.push(family.kernel_l1(beta)?);
    }
    let aggregate: f64 = bands.iter().map(|b| b.quadrature).sum();
    let normalized = aggregate * params.s / params.s.log2();
    Ok(AggregateReport {
        s: params.s,
        m: family.m,
        bands,
        aggregate,
        normalized,
    })
}

#[derive(Debug, Clone)]
pub struct SweepFit {
    pub rows: Vec<AggregateReport>,
    /// Least-squares slope of normalized constant against log2(s).
    pub slope: f64,
    pub mean: f64,
    /// max/min of the normalized constants.
    pub spread: f64,
}

pub fn constant_sweep(n_dim: usize, s_values: &[f64]) -> Result<SweepFit> {
    if s_values.len() < 2 {
        return Err(GrushinError::InvalidParameter(
            "constant sweep needs at least two shifts".into(),
        ));
    }
    let mut rows = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let params = MultiplierParams::new(n_dim, s)?;
        rows.push(aggregate_l1(&params)?);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.s.log2()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.normalized).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().cloned().fold(0.0f64, f64::max);
    Ok(SweepFit {
        rows,
        slope: sxy / sxx,
        mean: ym,
        spread: hi / lo,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ModulusEquivalence {
    /// Smallest and largest sampled |a_s(eta,k)| / (|eta| + s + k)^2 on the
    /// top-band support {|eta - iA| >= s/40}.
    pub c_lo: f64,
    pub c_hi: f64,
    pub spread: f64,
    /// Whether |a_s| <= (|eta| + |A|)(|eta| + |B|) <= (|eta| + s + k + N + 1)^2
    /// held at every sampled point.
    pub triangle_ok: bool,
    pub samples: usize,
}

/// Grid scan of the two-sided comparison |a_s| ~ (|eta| + s + k)^2 on the
/// support of the top band. For each k the sample set starts exactly at the
/// support boundary |eta - iA| = s/40 (where the ratio is smallest, near
/// k ~ s) and climbs geometrically to 30 s.
pub fn modulus_equivalence_check(params: &MultiplierParams) -> ModulusEquivalence {
    let s = params.s;
    let s40 = s / 40.0;
    let k_hi = (10.0 * s).ceil() as usize;
    let mut c_lo = f64::INFINITY;
    let mut c_hi: f64 = 0.0;
    let mut triangle_ok = true;
    let mut samples = 0;
    for k in 0..=k_hi {
        let (a, b) = params.roots(k);
        let eta_boundary = if a.abs() >= s40 {
            0.0
        } else {
            (s40 * s40 - a * a).sqrt()
        };
        let mut etas = vec![eta_boundary, eta_boundary + 1e-3 * s];
        let mut eta = (eta_boundary).max(1e-3 * s);
        while eta <= 30.0 * s {
            etas.push(eta);
            eta *= 1.15;
        }
        for eta in etas {
            if eta * eta + a * a < s40 * s40 * (1.0 - 1e-12) {
                continue;
            }
            let modulus = params.multiplier_modulus(eta, k);
            let ratio = modulus / (eta + s + k as f64).powi(2);
            c_lo = c_lo.min(ratio);
            c_hi = c_hi.max(ratio);
            let mid = (eta + a.abs()) * (eta + b.abs());
            let outer = (eta + s + k as f64 + params.n_dim as f64 + 1.0).powi(2);
            triangle_ok &= modulus <= mid * (1.0 + 1e-12) && mid <= outer * (1.0 + 1e-12);
            samples += 1;
        }
    }
    ModulusEquivalence {
        c_lo,
        c_hi,
        spread: c_hi / c_lo,
        triangle_ok,
        samples,
    }
}

/// Trigamma psi'(x) = sum_{k>=0} (x+k)^{-2} for x > 0.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 40.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let u = 1.0 / x;
    let u2 = u * u;
    acc + u
        + u2 * (0.5
            + u * (1.0 / 6.0
                + u2 * (-1.0 / 30.0 + u2 * (1.0 / 42.0 + u2 * (-1.0 / 30.0 + u2 * 5.0 / 66.0)))))
}

/// Second derivative of digamma; sum_{k>=0} (x+k)^{-3} = -psi''(x)/2.
fn tetragamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 40.0 {
        acc -= 2.0 / (x * x * x);
        x += 1.0;
    }
    let u = 1.0 / x;
    let u2 = u * u;
    acc - u2
        * (1.0
            + u * (1.0
                + u * (0.5 + u2 * (-1.0 / 6.0 + u2 * (1.0 / 6.0 - u2 * 3.0 / 10.0)))))
}

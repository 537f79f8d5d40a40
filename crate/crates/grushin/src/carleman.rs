//! Carleman-inequality evaluation for the degenerate operator in polar form:
//! weighted norms of separable test functions, exact operator application on
//! gauge annuli, and sweeps of the fitted constant over the weight power s.
//!
//! Norms are taken in L^p(dz dt / rho^{N+2}). In polar coordinates
//! dz dt = (1/2) rho^{N+1} drho (sin phi)^{-1} dOmega, so the p-th power of a
//! weighted norm is (1/2) Int rho^{-sigma p - 1} h(rho) drho with h the
//! angular integral against (sin phi)^{e p - 1} dOmega. The applied operator
//! is two-term separable, L f = sin phi (A(rho) g_A - B(rho) g_B), and h is
//! always evaluated as a pointwise combination of the two terms: the
//! cancellation stays inside the integrand instead of between two large
//! integrals.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GrushinError, Result};
use crate::gauge::{to_polar, GaugePoint};
use crate::quad::{adaptive_scaled, cached_rule, ScaledValue};
use crate::special::{eval_harmonic, gegenbauer, gegenbauer_norm_sq};
use crate::spectral::{lambda_l, random_band_limited, ModeIndex, SpectralCoefficients};
use crate::sphere::{omega_rule, SphereGrid};

/// Radial profile of a separable test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialProfile {
    /// (rho - lo)^3 (hi - rho)^3 / ((hi - lo)/2)^6 on [lo, hi], zero outside:
    /// C^2 across the cut, peak value 1 at the midpoint.
    Bump { lo: f64, hi: f64 },
    /// rho^exponent on [lo, hi], zero outside. Not C^2 across the cut; models
    /// interior behavior only (Euler exponents of the radial bracket).
    Power { exponent: f64, lo: f64, hi: f64 },
}

impl RadialProfile {
    pub fn support(&self) -> (f64, f64) {
        match *self {
            RadialProfile::Bump { lo, hi } => (lo, hi),
            RadialProfile::Power { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
            return Err(GrushinError::InvalidParameter(format!(
                "radial support [{lo}, {hi}] must satisfy 0 < lo < hi < inf"
            )));
        }
        Ok(())
    }

    fn bump_scale(lo: f64, hi: f64) -> f64 {
        (0.5 * (hi - lo)).powi(-6)
    }

    pub fn value(&self, rho: f64) -> f64 {
        let (lo, hi) = self.support();
        if rho <= lo || rho >= hi {
            return 0.0;
        }
        match *self {
            RadialProfile::Bump { lo, hi } => {
                let (u, v) = (rho - lo, hi - rho);
                Self::bump_scale(lo, hi) * u.powi(3) * v.powi(3)
            }
            RadialProfile::Power { exponent, .. } => rho.powf(exponent),
        }
    }

    pub fn d1(&self, rho: f64) -> f64 {
        let (lo, hi) = self.support();
        if rho <= lo || rho >= hi {
            return 0.0;
        }
        match *self {
            RadialProfile::Bump { lo, hi } => {
                let (u, v) = (rho - lo, hi - rho);
                3.0 * Self::bump_scale(lo, hi) * u.powi(2) * v.powi(2) * (v - u)
            }
            RadialProfile::Power { exponent, .. } => exponent * rho.powf(exponent - 1.0),
        }
    }

    pub fn d2(&self, rho: f64) -> f64 {
        let (lo, hi) = self.support();
        if rho <= lo || rho >= hi {
            return 0.0;
        }
        match *self {
            RadialProfile::Bump { lo, hi } => {
                let (u, v) = (rho - lo, hi - rho);
                6.0 * Self::bump_scale(lo, hi) * u * v * ((v - u).powi(2) - u * v)
            }
            RadialProfile::Power { exponent, .. } => {
                exponent * (exponent - 1.0) * rho.powf(exponent - 2.0)
            }
        }
    }

    /// Profile g and amplitude a with a * g(rho) = self(rho / lambda). The
    /// cubic bump dilates onto another cubic bump exactly (amplitude 1).
    pub fn dilate(&self, lambda: f64) -> Result<(RadialProfile, f64)> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(GrushinError::InvalidParameter(format!(
                "dilation factor {lambda} must be positive and finite"
            )));
        }
        Ok(match *self {
            RadialProfile::Bump { lo, hi } => (
                RadialProfile::Bump {
                    lo: lambda * lo,
                    hi: lambda * hi,
                },
                1.0,
            ),
            RadialProfile::Power { exponent, lo, hi } => (
                RadialProfile::Power {
                    exponent,
                    lo: lambda * lo,
                    hi: lambda * hi,
                },
                lambda.powf(-exponent),
            ),
        })
    }
}

/// Separable test function chi(rho) g(sigma) supported on a gauge annulus
/// away from the origin.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub n_dim: usize,
    pub radial: RadialProfile,
    pub angular: SpectralCoefficients,
}

impl TestFunction {
    pub fn new(n_dim: usize, radial: RadialProfile, angular: SpectralCoefficients) -> Result<Self> {
        if n_dim < 2 {
            return Err(GrushinError::InvalidParameter(format!(
                "test functions need N >= 2, got {n_dim}"
            )));
        }
        if angular.n_dim != n_dim {
            return Err(GrushinError::InvalidParameter(format!(
                "angular part has N = {}, test function has N = {n_dim}",
                angular.n_dim
            )));
        }
        radial.validate()?;
        Ok(TestFunction {
            n_dim,
            radial,
            angular,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        self.radial.support()
    }

    pub fn is_zero(&self) -> bool {
        self.angular.entries.iter().all(|(_, c)| *c == 0.0)
    }

    /// f composed with the inverse anisotropic dilation (z, t) ->
    /// (lambda z, lambda^2 t), which divides rho by lambda at fixed angle.
    pub fn dilate(&self, lambda: f64) -> Result<TestFunction> {
        let (radial, amplitude) = self.radial.dilate(lambda)?;
        let mut angular = self.angular.clone();
        for (_, c) in angular.entries.iter_mut() {
            *c *= amplitude;
        }
        Ok(TestFunction {
            n_dim: self.n_dim,
            radial,
            angular,
        })
    }

    pub fn value(&self, rho: f64, phi: f64, omega: &[f64]) -> Result<f64> {
        Ok(self.radial.value(rho) * self.angular.eval(phi, omega)?)
    }

    /// Value at a Cartesian point (z, t).
    pub fn cartesian_value(&self, z: &[f64], t: f64) -> Result<f64> {
        let p = to_polar(&GaugePoint::new(z.to_vec(), t));
        self.value(p.rho, p.phi, &p.omega)
    }
}

fn mu_k(n_dim: usize, k: usize) -> f64 {
    (k * (n_dim + k)) as f64
}

/// Coefficients of Sum_k mu_k c_k g_k with mu_k = k (N + k): the image of the
/// angular part under -4 L_sigma.
fn scaled_angular(angular: &SpectralCoefficients) -> SpectralCoefficients {
    let entries = angular
        .entries
        .iter()
        .map(|(m, c)| (*m, c * mu_k(angular.n_dim, m.k)))
        .collect();
    SpectralCoefficients {
        n_dim: angular.n_dim,
        entries,
    }
}

/// Radial factors at rho of the applied operator:
/// L f = sin phi (A(rho) g_A - B(rho) g_B) with A = chi'' + (N+1) chi'/rho,
/// B = chi/rho^2; g_A is the angular part, g_B its mu_k-scaled image.
pub fn radial_brackets(f: &TestFunction, rho: f64) -> (f64, f64) {
    let a = f.radial.d2(rho) + (f.n_dim as f64 + 1.0) * f.radial.d1(rho) / rho;
    let b = f.radial.value(rho) / (rho * rho);
    (a, b)
}

/// Operator application sampled on a tensor (rho, sphere-node) grid.
#[derive(Debug, Clone)]
pub struct GrushinApplication {
    pub rho: Vec<f64>,
    pub grid: Arc<SphereGrid>,
    /// values[ri][pi * n_omega + oi], matching the sphere-function layout.
    pub values: Vec<Vec<f64>>,
}

pub fn apply_grushin(f: &TestFunction, rho: &[f64]) -> Result<GrushinApplication> {
    if rho.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(GrushinError::InvalidParameter(
            "operator application needs a positive rho grid".into(),
        ));
    }
    let grid = SphereGrid::for_modes(f.n_dim, f.angular.max_degree().max(1))?;
    let g_a = f.angular.synth_on(&grid)?;
    let g_b = scaled_angular(&f.angular).synth_on(&grid)?;
    let n_omega = grid.omega_nodes().len();
    let sin_phi: Vec<f64> = grid.phi_nodes().iter().map(|n| n.phi.sin()).collect();
    let mut values = Vec::with_capacity(rho.len());
    for &r in rho {
        let (a, b) = radial_brackets(f, r);
        let row: Vec<f64> = (0..g_a.values.len())
            .map(|idx| sin_phi[idx / n_omega] * (a * g_a.values[idx] - b * g_b.values[idx]))
            .collect();
        values.push(row);
    }
    Ok(GrushinApplication {
        rho: rho.to_vec(),
        grid,
        values,
    })
}

/// Pointwise operator application at a polar point. The angular synthesis is
/// exact; radial derivatives of the named profile are closed-form.
pub fn grushin_value(f: &TestFunction, rho: f64, phi: f64, omega: &[f64]) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(GrushinError::InvalidParameter(
            "operator application needs rho > 0".into(),
        ));
    }
    let (a, b) = radial_brackets(f, rho);
    let g_a = f.angular.eval(phi, omega)?;
    let g_b = scaled_angular(&f.angular).eval(phi, omega)?;
    Ok(phi.sin() * (a * g_a - b * g_b))
}

/// Quadrature resolution of the weighted norms.
#[derive(Debug, Clone, Copy)]
pub struct NormOptions {
    /// Nodes of the Gauss-Jacobi rule in x = cos phi (general-p route).
    pub x_nodes: usize,
    /// Relative tolerance handed to the scaled adaptive radial integral.
    pub radial_tol: f64,
    /// Trigonometric degree of the omega rule; None resolves to
    /// 2 * max_degree + 14.
    pub omega_degree: Option<usize>,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            x_nodes: 256,
            radial_tol: 1e-12,
            omega_degree: None,
        }
    }
}

impl NormOptions {
    fn resolve_omega(&self, k_max: usize) -> usize {
        self.omega_degree.unwrap_or(2 * k_max + 14)
    }

    fn refined(&self, resolved_omega: usize) -> NormOptions {
        NormOptions {
            x_nodes: self.x_nodes * 2,
            radial_tol: self.radial_tol * 1e-2,
            omega_degree: Some(resolved_omega * 2),
        }
    }
}

/// Sign convention for the two-term integrand A g_A - B g_B.
#[derive(Clone, Copy, PartialEq)]
enum Combine {
    /// |A g_A - B g_B|^p: the applied operator (with B = 0, a plain norm).
    Difference,
    /// (|A g_A| + |B g_B|)^p: cancellation-free magnitude, the floor against
    /// which a vanishing right-hand side is judged.
    Magnitude,
}

/// Angular-integral route. The explicit routes exist for the route-duality
/// tests; production callers always pass Auto.
#[cfg_attr(not(test), allow(dead_code))]
#[derive(Clone, Copy, PartialEq)]
enum NormRoute {
    /// Pick Gram for p = 2, tensor otherwise.
    Auto,
    /// Exact per-(l, j) Gram contractions; valid only for p = 2.
    Gram,
    /// Gauss-Jacobi x-rule crossed with an equal-weight omega rule.
    Tensor,
}

/// Gram contractions (<g_a, g_a>, <g_a, g_b>, <g_b, g_b>) in the inner
/// product with weight (sin phi)^{2e-1} dOmega. Harmonics are orthonormal,
/// so (l, j) blocks decouple; each block is an exact Gauss-Jacobi x-integral
/// with exponent lambda_l + e - 1 (the sin^{l/2} basis factors fold into it).
fn gram_contractions(
    g_a: &SpectralCoefficients,
    g_b: &SpectralCoefficients,
    e: f64,
) -> Result<(f64, f64, f64)> {
    let n_dim = g_a.n_dim;
    type Group = (Vec<(usize, f64)>, Vec<(usize, f64)>);
    let mut groups: BTreeMap<(usize, usize), Group> = BTreeMap::new();
    for (pos, src) in [(0usize, g_a), (1, g_b)] {
        for (m, c) in &src.entries {
            let lam = lambda_l(n_dim, m.l);
            let nf = gegenbauer_norm_sq(m.q(), lam).sqrt().recip();
            let group = groups.entry((m.l, m.j)).or_default();
            let list = if pos == 0 { &mut group.0 } else { &mut group.1 };
            list.push((m.q(), c * nf));
        }
    }
    let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
    for (&(l, _), (list_a, list_b)) in &groups {
        let lam = lambda_l(n_dim, l);
        let a_exp = lam + e - 1.0;
        if a_exp <= -1.0 {
            return Err(GrushinError::InvalidParameter(format!(
                "angular weight exponent {a_exp:.4} at l = {l} (sin exponent {e:.4}) is not integrable"
            )));
        }
        let q_max = list_a
            .iter()
            .chain(list_b.iter())
            .map(|&(q, _)| q)
            .max()
            .unwrap_or(0);
        let rule = cached_rule(q_max + 2, a_exp, a_exp)?;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let pa: f64 = list_a.iter().map(|&(q, c)| c * gegenbauer(q, lam, x)).sum();
            let pb: f64 = list_b.iter().map(|&(q, c)| c * gegenbauer(q, lam, x)).sum();
            a0 += w * pa * pa;
            a1 += w * pa * pb;
            a2 += w * pb * pb;
        }
    }
    Ok((a0, a1, a2))
}

struct TensorTables {
    weights: Vec<f64>,
    g_a: Vec<f64>,
    g_b: Vec<f64>,
}

/// Tensor quadrature for the angular integral with weight
/// (sin phi)^{e p - 1} dOmega: a Gauss-Jacobi x-rule with exponent
/// (e p - 2 + N/2)/2 crossed with an equal-weight omega rule, plus the two
/// synthesized angular factors tabulated at the tensor nodes.
fn tensor_tables(
    g_a: &SpectralCoefficients,
    g_b: &SpectralCoefficients,
    e: f64,
    p: f64,
    opts: &NormOptions,
) -> Result<TensorTables> {
    let n_dim = g_a.n_dim;
    let a_exp = (e * p - 2.0 + 0.5 * n_dim as f64) * 0.5;
    if a_exp <= -1.0 {
        return Err(GrushinError::InvalidParameter(format!(
            "angular weight exponent {a_exp:.4} (sin exponent {e:.4} at p = {p:.4}) is not integrable"
        )));
    }
    let k_max = g_a.max_degree().max(g_b.max_degree());
    let rule = cached_rule(opts.x_nodes, a_exp, a_exp)?;
    let (om_nodes, om_weights) = omega_rule(n_dim, opts.resolve_omega(k_max))?;

    let mut lj: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for src in [g_a, g_b] {
        for (m, _) in &src.entries {
            let next = lj.len();
            lj.entry((m.l, m.j)).or_insert(next);
        }
    }
    let n_lj = lj.len();
    let nx = rule.nodes.len();
    let n_om = om_nodes.len();
    let mut prof_a = vec![0.0; n_lj * nx];
    let mut prof_b = vec![0.0; n_lj * nx];
    for (src, prof) in [(g_a, &mut prof_a), (g_b, &mut prof_b)] {
        for (m, c) in &src.entries {
            let block = lj[&(m.l, m.j)];
            let lam = lambda_l(n_dim, m.l);
            let nf = gegenbauer_norm_sq(m.q(), lam).sqrt().recip();
            for (ix, &x) in rule.nodes.iter().enumerate() {
                let s2 = (1.0 - x * x).max(0.0);
                prof[block * nx + ix] +=
                    c * nf * s2.powf(m.l as f64 / 4.0) * gegenbauer(m.q(), lam, x);
            }
        }
    }
    let mut harm = vec![0.0; n_lj * n_om];
    for (&(l, j), &block) in &lj {
        for (oi, om) in om_nodes.iter().enumerate() {
            harm[block * n_om + oi] = eval_harmonic(n_dim, l, j, om)?;
        }
    }
    let mut weights = Vec::with_capacity(nx * n_om);
    let mut va = vec![0.0; nx * n_om];
    let mut vb = vec![0.0; nx * n_om];
    for ix in 0..nx {
        for oi in 0..n_om {
            weights.push(rule.weights[ix] * om_weights[oi]);
            let (mut sa, mut sb) = (0.0, 0.0);
            for block in 0..n_lj {
                let y = harm[block * n_om + oi];
                sa += prof_a[block * nx + ix] * y;
                sb += prof_b[block * nx + ix] * y;
            }
            va[ix * n_om + oi] = sa;
            vb[ix * n_om + oi] = sb;
        }
    }
    Ok(TensorTables {
        weights,
        g_a: va,
        g_b: vb,
    })
}

/// Scaled p-th power of the weighted seminorm
/// || rho^{-sigma} (sin phi)^e (A g_a - B g_b) ||_{L^p(dz dt / rho^{N+2})}^p
/// over the radial support, as (1/2) Int rho^{-sigma p - 1} h(rho) drho.
#[allow(clippy::too_many_arguments)]
fn pair_norm_scaled(
    radial_a: &dyn Fn(f64) -> f64,
    radial_b: &dyn Fn(f64) -> f64,
    g_a: &SpectralCoefficients,
    g_b: &SpectralCoefficients,
    sigma: f64,
    e: f64,
    p: f64,
    support: (f64, f64),
    combine: Combine,
    route: NormRoute,
    opts: &NormOptions,
) -> Result<ScaledValue> {
    let (lo, hi) = support;
    let log_w = move |rho: f64| -(sigma * p + 1.0) * rho.ln();
    let use_gram = match route {
        NormRoute::Auto => p == 2.0,
        NormRoute::Gram => {
            debug_assert!(p == 2.0, "the Gram route is an L^2 contraction");
            true
        }
        NormRoute::Tensor => false,
    };
    let h: Box<dyn Fn(f64) -> f64> = if use_gram {
        let (a0, a1, a2) = gram_contractions(g_a, g_b, e)?;
        match combine {
            Combine::Difference => Box::new(move |rho| {
                let a = radial_a(rho);
                let b = radial_b(rho);
                0.5 * (a0 * a * a - 2.0 * a1 * a * b + a2 * b * b).max(0.0)
            }),
            Combine::Magnitude => {
                let (s0, s2) = (a0.max(0.0).sqrt(), a2.max(0.0).sqrt());
                Box::new(move |rho| {
                    let m = s0 * radial_a(rho).abs() + s2 * radial_b(rho).abs();
                    0.5 * m * m
                })
            }
        }
    } else {
        let t = tensor_tables(g_a, g_b, e, p, opts)?;
        match combine {
            Combine::Difference => Box::new(move |rho| {
                let a = radial_a(rho);
                let b = radial_b(rho);
                let mut acc = 0.0;
                for i in 0..t.weights.len() {
                    acc += t.weights[i] * (a * t.g_a[i] - b * t.g_b[i]).abs().powf(p);
                }
                0.5 * acc
            }),
            Combine::Magnitude => Box::new(move |rho| {
                let a = radial_a(rho);
                let b = radial_b(rho);
                let mut acc = 0.0;
                for i in 0..t.weights.len() {
                    acc +=
                        t.weights[i] * ((a * t.g_a[i]).abs() + (b * t.g_b[i]).abs()).powf(p);
                }
                0.5 * acc
            }),
        }
    };
    Ok(adaptive_scaled(&log_w, &*h, lo, hi, opts.radial_tol))
}

/// Snaps p onto the admissible set {2, 2N/(N-1), 2N/(N+1)}.
fn snap_lebesgue_exponent(n_dim: usize, p: f64) -> Result<f64> {
    let n = n_dim as f64;
    let admissible = [2.0, 2.0 * n / (n - 1.0), 2.0 * n / (n + 1.0)];
    for cand in admissible {
        if (p - cand).abs() <= 1e-9 * cand {
            return Ok(cand);
        }
    }
    Err(GrushinError::InvalidParameter(format!(
        "p = {p} is not one of 2, 2N/(N-1) = {:.6}, 2N/(N+1) = {:.6} for N = {n_dim}",
        admissible[1], admissible[2]
    )))
}

/// Weighted norm || rho^{-sigma} (sin phi)^{sin_exponent} f || in
/// L^p(dz dt / rho^{N+2}), log-scaled. p must lie in the admissible set
/// {2, 2N/(N-1), 2N/(N+1)}.
pub fn weighted_norm_scaled(
    f: &TestFunction,
    sigma: f64,
    sin_exponent: f64,
    p: f64,
    opts: &NormOptions,
) -> Result<ScaledValue> {
    let p = snap_lebesgue_exponent(f.n_dim, p)?;
    f.radial.validate()?;
    if f.is_zero() {
        return Ok(ScaledValue::zero());
    }
    let zero = SpectralCoefficients::new(f.n_dim);
    let radial = f.radial;
    let sv = pair_norm_scaled(
        &move |rho| radial.value(rho),
        &|_| 0.0,
        &f.angular,
        &zero,
        sigma,
        sin_exponent,
        p,
        f.support(),
        Combine::Difference,
        NormRoute::Auto,
        opts,
    )?;
    Ok(sv.powf_recip(p))
}

/// f64 value of `weighted_norm_scaled` at default resolution; can overflow
/// to infinity when the weight is extreme on the given support.
pub fn weighted_norm(f: &TestFunction, sigma: f64, sin_exponent: f64, p: f64) -> Result<f64> {
    Ok(weighted_norm_scaled(f, sigma, sin_exponent, p, &NormOptions::default())?.value())
}

/// Scaled norm of rho^{-sigma} (sin phi)^w L f in L^q: the operator's own
/// sin phi is absorbed, so the per-power exponent on the two-term integrand
/// is w + 1.
fn applied_norm_scaled(
    f: &TestFunction,
    sigma: f64,
    w: f64,
    q: f64,
    combine: Combine,
    opts: &NormOptions,
) -> Result<ScaledValue> {
    let g_b = scaled_angular(&f.angular);
    let radial = f.radial;
    let n1 = f.n_dim as f64 + 1.0;
    let sv = pair_norm_scaled(
        &move |rho| radial.d2(rho) + n1 * radial.d1(rho) / rho,
        &move |rho| radial.value(rho) / (rho * rho),
        &f.angular,
        &g_b,
        sigma,
        w + 1.0,
        q,
        f.support(),
        combine,
        NormRoute::Auto,
        opts,
    )?;
    Ok(sv.powf_recip(q))
}

/// The four inequality variants: L^2 -> L^2 with constant of order
/// log2(s)/s, and L^p -> L^q at the dual pair (2N/(N-1), 2N/(N+1)) with an
/// s-independent constant, each in an even-N and an odd-N form with
/// different sin-phi weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CarlemanVariant {
    L2Even,
    L2Odd,
    LpLqEven,
    LpLqOdd,
}

impl CarlemanVariant {
    pub fn needs_even_dimension(&self) -> bool {
        matches!(self, CarlemanVariant::L2Even | CarlemanVariant::LpLqEven)
    }

    /// Lebesgue exponents (p, q) of the two sides.
    pub fn lebesgue_exponents(&self, n_dim: usize) -> (f64, f64) {
        match self {
            CarlemanVariant::L2Even | CarlemanVariant::L2Odd => (2.0, 2.0),
            _ => {
                let n = n_dim as f64;
                (2.0 * n / (n - 1.0), 2.0 * n / (n + 1.0))
            }
        }
    }

    /// Stated sin-phi weight exponents (left, right), before the operator's
    /// own sin phi factor is absorbed into the right-hand integrand.
    pub fn sin_exponents(&self, n_dim: usize, delta: f64) -> (f64, f64) {
        match self {
            CarlemanVariant::L2Even | CarlemanVariant::LpLqEven => (delta, -delta),
            CarlemanVariant::L2Odd => (0.125 + delta, -(0.125 + delta)),
            CarlemanVariant::LpLqOdd => {
                let p = self.lebesgue_exponents(n_dim).0;
                let w = 0.25 / p + delta;
                (w, -w)
            }
        }
    }

    /// s-dependence of the constant in the bound: log2(s)/s for the L^2
    /// variants, 1 for the L^p -> L^q variants.
    pub fn s_factor(&self, s: f64) -> f64 {
        match self {
            CarlemanVariant::L2Even | CarlemanVariant::L2Odd => s.log2() / s,
            _ => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CarlemanVariant::L2Even => "L2_even",
            CarlemanVariant::L2Odd => "L2_odd",
            CarlemanVariant::LpLqEven => "LpLq_even",
            CarlemanVariant::LpLqOdd => "LpLq_odd",
        }
    }
}

/// Parameters of one inequality evaluation. Preconditions: 0 < delta < 1/4,
/// s > 100, and s at distance exactly 1/2 from the integers.
#[derive(Debug, Clone, Copy)]
pub struct CarlemanParams {
    pub s: f64,
    pub delta: f64,
    pub variant: CarlemanVariant,
    pub opts: NormOptions,
}

impl CarlemanParams {
    pub fn new(s: f64, delta: f64, variant: CarlemanVariant) -> Result<Self> {
        let params = CarlemanParams {
            s,
            delta,
            variant,
            opts: NormOptions::default(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 0.25) {
            return Err(GrushinError::InvalidParameter(format!(
                "delta = {} must lie in (0, 1/4)",
                self.delta
            )));
        }
        if !(self.s > 100.0) {
            return Err(GrushinError::InvalidParameter(format!(
                "s = {} must exceed 100",
                self.s
            )));
        }
        if ((self.s - self.s.round()).abs() - 0.5).abs() > 1e-9 {
            return Err(GrushinError::InvalidParameter(format!(
                "s = {} must sit at distance 1/2 from the integers",
                self.s
            )));
        }
        Ok(())
    }
}

/// Outcome of one inequality evaluation. lhs and rhs are clamped to f64::MAX
/// on overflow; the _ln fields always carry the exact logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanReport {
    pub s: f64,
    pub delta: f64,
    pub p: f64,
    pub q: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_ln: f64,
    pub rhs_ln: f64,
    pub ratio: f64,
    pub grid: usize,
}

fn finite_or_max(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}

/// Evaluates both sides of the chosen inequality variant and reports the
/// ratio lhs/rhs. A right side below 1e-9 of its cancellation-free magnitude
/// counts as numerically zero; that case is re-verified once at doubled
/// resolution and, if unchanged, surfaces as a potential-counterexample
/// error instead of a report.
pub fn carleman_ratio(f: &TestFunction, params: &CarlemanParams) -> Result<CarlemanReport> {
    params.validate()?;
    if (f.n_dim % 2 == 0) != params.variant.needs_even_dimension() {
        return Err(GrushinError::InvalidParameter(format!(
            "variant {} needs {} N, got N = {}",
            params.variant.name(),
            if params.variant.needs_even_dimension() {
                "even"
            } else {
                "odd"
            },
            f.n_dim
        )));
    }
    if f.is_zero() {
        return Err(GrushinError::InvalidParameter("zero test function".into()));
    }
    let (p, q) = params.variant.lebesgue_exponents(f.n_dim);
    let (w_l, w_r) = params.variant.sin_exponents(f.n_dim, params.delta);
    let evaluate = |opts: &NormOptions| -> Result<(ScaledValue, ScaledValue)> {
        let lhs = weighted_norm_scaled(f, params.s, w_l, p, opts)?;
        let rhs = applied_norm_scaled(f, params.s - 2.0, w_r, q, Combine::Difference, opts)?;
        Ok((lhs, rhs))
    };
    let (mut lhs, mut rhs) = evaluate(&params.opts)?;
    let mut grid = params.opts.x_nodes;
    if !lhs.is_positive() && !rhs.is_positive() {
        return Err(GrushinError::InvalidParameter("zero test function".into()));
    }
    let vanished =
        |rhs: &ScaledValue, mag: &ScaledValue| !rhs.is_positive() || rhs.ratio(mag) <= 1e-9;
    if !rhs.is_positive() || lhs.ratio(&rhs) > 1e4 {
        let mag = applied_norm_scaled(f, params.s - 2.0, w_r, q, Combine::Magnitude, &params.opts)?;
        if vanished(&rhs, &mag) {
            let refined = params
                .opts
                .refined(params.opts.resolve_omega(f.angular.max_degree()));
            let (lhs2, rhs2) = evaluate(&refined)?;
            let mag2 = applied_norm_scaled(f, params.s - 2.0, w_r, q, Combine::Magnitude, &refined)?;
            grid = refined.x_nodes;
            if vanished(&rhs2, &mag2) {
                return Err(GrushinError::Singular(format!(
                    "right side vanishes while the left side is positive at s = {}: \
                     potential counterexample, confirmed at doubled resolution",
                    params.s
                )));
            }
            lhs = lhs2;
            rhs = rhs2;
        }
    }
    let ratio = lhs.ratio(&rhs);
    Ok(CarlemanReport {
        s: params.s,
        delta: params.delta,
        p,
        q,
        lhs: finite_or_max(lhs.value()),
        rhs: finite_or_max(rhs.value()),
        lhs_ln: lhs.ln_abs(),
        rhs_ln: rhs.ln_abs(),
        ratio,
        grid,
    })
}

/// Deterministic test family: single modes k = 0..=8 on the bump [1, 2],
/// then seeded members with random center in [1, 2] and width in [1/4, 1]
/// (supports inside [1/2, 4], keeping the weighted norms representable up to
/// s = 800.5) and random band-limited angular parts with k <= 8.
pub fn standard_family(n_dim: usize, count: usize, seed: u64) -> Result<Vec<TestFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        if i <= 8 {
            let mode = ModeIndex::new(n_dim, i, i, 0)?;
            let mut angular = SpectralCoefficients::new(n_dim);
            angular.entries.push((mode, 1.0));
            out.push(TestFunction::new(
                n_dim,
                RadialProfile::Bump { lo: 1.0, hi: 2.0 },
                angular,
            )?);
        } else {
            let center: f64 = rng.random_range(1.0..2.0);
            let width: f64 = rng.random_range(0.25..1.0);
            let angular = random_band_limited(n_dim, 8, rng.random());
            out.push(TestFunction::new(
                n_dim,
                RadialProfile::Bump {
                    lo: center - 0.5 * width,
                    hi: center + 0.5 * width,
                },
                angular,
            )?);
        }
    }
    Ok(out)
}

/// One sweep row: the worst ratio over the family at one s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: f64,
    pub max_ratio: f64,
    pub argmax: usize,
}

/// Sweep outcome. c_fit is the through-origin least-squares fit of the per-s
/// family maxima against the variant's s-factor, with its relative rms
/// residual; loo_spread is the max/min spread of that fit over jackknife
/// refits, each dropping one family member (does any single function carry
/// the fit?). c_envelope = max over rows of max_ratio / s-factor, so
/// lhs <= c_envelope * s-factor * rhs holds for every evaluated pair by
/// construction. member_ratios[row][member] keeps the full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanSweep {
    pub variant: String,
    pub delta: f64,
    pub rows: Vec<SweepRow>,
    pub member_ratios: Vec<Vec<f64>>,
    pub c_fit: f64,
    pub c_envelope: f64,
    pub residual: f64,
    pub loo_spread: f64,
}

/// Evaluates the family at every s (all pairs independent; executed and
/// merged in (s, family-index) order, so the outcome is deterministic) and
/// fits the constant of the variant's bound.
pub fn constant_sweep(
    family: &[TestFunction],
    s_list: &[f64],
    delta: f64,
    variant: CarlemanVariant,
    opts: &NormOptions,
) -> Result<CarlemanSweep> {
    if family.is_empty() || s_list.is_empty() {
        return Err(GrushinError::InvalidParameter(
            "a sweep needs a nonempty family and a nonempty s list".into(),
        ));
    }
    let mut member_ratios = Vec::with_capacity(s_list.len());
    let mut rows = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let mut params = CarlemanParams::new(s, delta, variant)?;
        params.opts = *opts;
        let ratios: Vec<f64> = family
            .iter()
            .map(|f| carleman_ratio(f, &params).map(|r| r.ratio))
            .collect::<Result<_>>()?;
        let argmax = (0..ratios.len())
            .max_by(|&a, &b| ratios[a].total_cmp(&ratios[b]))
            .unwrap();
        rows.push(SweepRow {
            s,
            max_ratio: ratios[argmax],
            argmax,
        });
        member_ratios.push(ratios);
    }
    let xs: Vec<f64> = rows.iter().map(|r| variant.s_factor(r.s)).collect();
    let fit = |ys: &[f64]| -> f64 {
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            sxy += x * y;
            sxx += x * x;
        }
        sxy / sxx
    };
    let ys: Vec<f64> = rows.iter().map(|r| r.max_ratio).collect();
    let c_fit = fit(&ys);
    let c_envelope = ys
        .iter()
        .zip(&xs)
        .map(|(y, x)| y / x)
        .fold(f64::NEG_INFINITY, f64::max);
    let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
    let residual = (ys
        .iter()
        .zip(&xs)
        .map(|(y, x)| (y - c_fit * x).powi(2))
        .sum::<f64>()
        / ys.len() as f64)
        .sqrt()
        / mean_y;
    let mut loo = vec![c_fit];
    if family.len() >= 2 {
        for drop in 0..family.len() {
            let ys_m: Vec<f64> = member_ratios
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|&(i, _)| i != drop)
                        .map(|(_, &r)| r)
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            loo.push(fit(&ys_m));
        }
    }
    let loo_spread = loo.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        / loo.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CarlemanSweep {
        variant: variant.name().into(),
        delta,
        rows,
        member_ratios,
        c_fit,
        c_envelope,
        residual,
        loo_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive;
    use crate::spectral::BasisFunction;

    fn single_mode(n_dim: usize, k: usize, l: usize, j: usize, radial: RadialProfile) -> TestFunction {
        let mode = ModeIndex::new(n_dim, k, l, j).unwrap();
        let mut angular = SpectralCoefficients::new(n_dim);
        angular.entries.push((mode, 1.0));
        TestFunction::new(n_dim, radial, angular).unwrap()
    }

    fn mixed(n_dim: usize) -> TestFunction {
        let mut angular = SpectralCoefficients::new(n_dim);
        for (k, l, j, c) in [
            (0usize, 0usize, 0usize, 0.8),
            (2, 2, 0, -0.6),
            (3, 1, 0, 0.4),
            (4, 2, 1, 0.3),
        ] {
            angular
                .entries
                .push((ModeIndex::new(n_dim, k, l, j).unwrap(), c));
        }
        TestFunction::new(n_dim, RadialProfile::Bump { lo: 1.0, hi: 2.0 }, angular).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn bump_profile_is_c2_with_exact_derivatives() {
        let b = RadialProfile::Bump { lo: 1.0, hi: 2.0 };
        let h = 1e-4;
        for rho in [1.05, 1.3, 1.5, 1.77, 1.95] {
            let fd1 = (b.value(rho + h) - b.value(rho - h)) / (2.0 * h);
            let fd2 = (b.value(rho + h) - 2.0 * b.value(rho) + b.value(rho - h)) / (h * h);
            assert!((b.d1(rho) - fd1).abs() <= 1e-6 * (1.0 + fd1.abs()), "d1 at {rho}");
            assert!((b.d2(rho) - fd2).abs() <= 1e-5 * (1.0 + fd2.abs()), "d2 at {rho}");
        }
        // C^2 across the cut: value and both derivatives vanish at and
        // beyond the endpoints.
        for rho in [0.9, 1.0, 2.0, 2.1] {
            assert_eq!(b.value(rho), 0.0);
            assert_eq!(b.d1(rho), 0.0);
            assert_eq!(b.d2(rho), 0.0);
        }
        assert!((b.value(1.5) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dilation_maps_profiles_exactly() {
        let b = RadialProfile::Bump { lo: 1.0, hi: 2.0 };
        let (b3, amp) = b.dilate(3.0).unwrap();
        assert_eq!(amp, 1.0);
        assert_eq!(b3.support(), (3.0, 6.0));
        for rho in [3.2, 4.0, 4.51, 5.9] {
            assert!(rel(b3.value(rho), b.value(rho / 3.0)) <= 1e-13);
            assert!(rel(b3.d1(rho), b.d1(rho / 3.0) / 3.0) <= 1e-13);
            assert!(rel(b3.d2(rho), b.d2(rho / 3.0) / 9.0) <= 1e-13);
        }
        let p = RadialProfile::Power {
            exponent: 2.0,
            lo: 1.0,
            hi: 2.0,
        };
        let (p2, amp2) = p.dilate(2.0).unwrap();
        assert!((amp2 - 0.25).abs() <= 1e-15);
        assert!(rel(amp2 * p2.value(3.0), p.value(1.5)) <= 1e-14);
    }

    #[test]
    fn euler_exponents_annihilate_the_radial_bracket() {
        for n_dim in [2usize, 3] {
            for k in [1usize, 2, 3, 5] {
                let mu = (k * (n_dim + k)) as f64;
                for exponent in [k as f64, -((n_dim + k) as f64)] {
                    let f = single_mode(
                        n_dim,
                        k,
                        k,
                        0,
                        RadialProfile::Power {
                            exponent,
                            lo: 1.0,
                            hi: 2.0,
                        },
                    );
                    for rho in [1.1, 1.5, 1.9] {
                        let (a, b) = radial_brackets(&f, rho);
                        assert!(
                            (a - mu * b).abs() <= 1e-10 * (a.abs() + mu * b.abs()),
                            "N = {n_dim}, k = {k}, exponent = {exponent}, rho = {rho}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn euler_profile_application_vanishes_on_the_grid() {
        let f = single_mode(
            2,
            3,
            3,
            0,
            RadialProfile::Power {
                exponent: 3.0,
                lo: 1.0,
                hi: 2.0,
            },
        );
        let app = apply_grushin(&f, &[1.25, 1.75]).unwrap();
        let g_a = f.angular.synth_on(&app.grid).unwrap();
        let g_scale = g_a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (ri, row) in app.values.iter().enumerate() {
            let (_, b) = radial_brackets(&f, app.rho[ri]);
            let scale = (3.0 * (2.0 + 3.0) as f64) * b.abs() * g_scale;
            for v in row {
                assert!(v.abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn constant_angular_part_reduces_to_the_radial_operator() {
        for n_dim in [2usize, 3] {
            let f = single_mode(n_dim, 0, 0, 0, RadialProfile::Bump { lo: 1.0, hi: 2.0 });
            let rho = [1.2, 1.5, 1.8];
            let app = apply_grushin(&f, &rho).unwrap();
            let n_omega = app.grid.omega_nodes().len();
            for (ri, &r) in rho.iter().enumerate() {
                let a = f.radial.d2(r) + (n_dim as f64 + 1.0) * f.radial.d1(r) / r;
                for (pi, node) in app.grid.phi_nodes().iter().enumerate() {
                    for oi in 0..n_omega {
                        let expected = node.phi.sin()
                            * a
                            * f.angular
                                .eval(node.phi, &app.grid.omega_nodes()[oi])
                                .unwrap();
                        let got = app.values[ri][pi * n_omega + oi];
                        assert!((got - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn polar_application_matches_cartesian_finite_differences() {
        let h = 1e-3;
        for (n_dim, z, t) in [
            (2usize, vec![0.9, 0.5], 0.3),
            (3, vec![1.0, 0.5, 0.3], 0.3),
        ] {
            let f = mixed(n_dim);
            let polar = to_polar(&GaugePoint::new(z.clone(), t));
            assert!(polar.rho > 1.05 && polar.rho < 1.95, "point must be interior");
            let exact = grushin_value(&f, polar.rho, polar.phi, &polar.omega).unwrap();
            let f0 = f.cartesian_value(&z, t).unwrap();
            let mut fd = 0.0;
            for i in 0..z.len() {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                fd += (f.cartesian_value(&zp, t).unwrap() - 2.0 * f0
                    + f.cartesian_value(&zm, t).unwrap())
                    / (h * h);
            }
            let z2: f64 = z.iter().map(|v| v * v).sum();
            fd += z2
                * (f.cartesian_value(&z, t + h).unwrap() - 2.0 * f0
                    + f.cartesian_value(&z, t - h).unwrap())
                / (h * h);
            assert!(
                rel(fd, exact) <= 1e-3,
                "N = {n_dim}: fd = {fd}, exact = {exact}"
            );
        }
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let f = TestFunction::new(
            2,
            RadialProfile::Bump { lo: 1.0, hi: 2.0 },
            SpectralCoefficients::new(2),
        )
        .unwrap();
        assert_eq!(weighted_norm(&f, 5.5, 0.1, 2.0).unwrap(), 0.0);
        assert_eq!(weighted_norm(&f, 5.5, 0.1, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn weighted_norm_is_absolutely_homogeneous() {
        let f = mixed(2);
        let mut g = f.clone();
        for (_, c) in g.angular.entries.iter_mut() {
            *c *= -3.0;
        }
        for (p, tol) in [(2.0, 1e-10), (4.0 / 3.0, 1e-9)] {
            let n1 = weighted_norm(&f, 6.5, 0.1, p).unwrap();
            let n2 = weighted_norm(&g, 6.5, 0.1, p).unwrap();
            assert!(rel(n2, 3.0 * n1) <= tol, "p = {p}: {n2} vs {}", 3.0 * n1);
        }
    }

    #[test]
    fn separable_norm_factorizes() {
        // Independent oracle: radial integral x phi integral x omega
        // integral, each by adaptive quadrature, assembled as the product of
        // the factored 1-D pieces. Modes and exponents are chosen so the
        // route's own rules are exact (integer sin powers after raising to
        // p), which the oracle does not rely on.
        let sigma = 5.5;
        let e = 0.1;
        let opts = NormOptions::default();

        // p = 2, N = 2, mode (3, 3, 0).
        let f = single_mode(2, 3, 3, 0, RadialProfile::Bump { lo: 1.0, hi: 2.0 });
        let basis = BasisFunction::new(2, ModeIndex::new(2, 3, 3, 0).unwrap());
        let radial = f.radial;
        let r2 = adaptive(
            &mut |rho: f64| rho.powf(-2.0 * sigma - 1.0) * radial.value(rho).powi(2),
            1.0,
            2.0,
            1e-14,
        );
        let a2 = adaptive(
            &mut |phi: f64| phi.sin().powf(2.0 * e - 1.0 + 1.0) * basis.phi_profile(phi).powi(2),
            0.0,
            std::f64::consts::PI,
            1e-13,
        );
        let oracle2 = (0.5 * r2 * a2).sqrt();
        let got2 = weighted_norm_scaled(&f, sigma, e, 2.0, &opts).unwrap().value();
        assert!(rel(got2, oracle2) <= 1e-10, "p = 2: {got2} vs {oracle2}");

        // p = 4, N = 2, same mode; the omega factor Int Y^4 is no longer 1.
        let r4 = adaptive(
            &mut |rho: f64| rho.powf(-4.0 * sigma - 1.0) * radial.value(rho).powi(4),
            1.0,
            2.0,
            1e-14,
        );
        let a4 = adaptive(
            &mut |phi: f64| phi.sin().powf(4.0 * e - 1.0 + 1.0) * basis.phi_profile(phi).powi(4),
            0.0,
            std::f64::consts::PI,
            1e-13,
        );
        let w4 = adaptive(
            &mut |th: f64| {
                eval_harmonic(2, 3, 0, &[th.cos(), th.sin()]).unwrap().powi(4)
            },
            0.0,
            2.0 * std::f64::consts::PI,
            1e-13,
        );
        let oracle4 = (0.5 * r4 * a4 * w4).powf(0.25);
        let got4 = weighted_norm_scaled(&f, sigma, e, 4.0, &opts).unwrap().value();
        assert!(rel(got4, oracle4) <= 1e-10, "p = 4: {got4} vs {oracle4}");

        // q = 4/3, N = 2, constant mode (0, 0, 0).
        let q = 4.0 / 3.0;
        let fc = single_mode(2, 0, 0, 0, RadialProfile::Bump { lo: 1.0, hi: 2.0 });
        let basis0 = BasisFunction::new(2, ModeIndex::new(2, 0, 0, 0).unwrap());
        let rq = adaptive(
            &mut |rho: f64| rho.powf(-q * sigma - 1.0) * radial.value(rho).powf(q),
            1.0,
            2.0,
            1e-14,
        );
        let aq = adaptive(
            &mut |phi: f64| {
                phi.sin().powf(q * e - 1.0 + 1.0) * basis0.phi_profile(phi).abs().powf(q)
            },
            0.0,
            std::f64::consts::PI,
            1e-13,
        );
        let wq = adaptive(
            &mut |th: f64| {
                eval_harmonic(2, 0, 0, &[th.cos(), th.sin()])
                    .unwrap()
                    .abs()
                    .powf(q)
            },
            0.0,
            2.0 * std::f64::consts::PI,
            1e-13,
        );
        let oracle_q = (0.5 * rq * aq * wq).powf(1.0 / q);
        let got_q = weighted_norm_scaled(&fc, sigma, e, q, &opts).unwrap().value();
        assert!(rel(got_q, oracle_q) <= 1e-10, "q = 4/3: {got_q} vs {oracle_q}");

        // p = 2, N = 3, mode (2, 2, 1): the same bookkeeping in odd N.
        let f3 = single_mode(3, 2, 2, 1, RadialProfile::Bump { lo: 1.0, hi: 2.0 });
        let basis3 = BasisFunction::new(3, ModeIndex::new(3, 2, 2, 1).unwrap());
        let a23 = adaptive(
            &mut |phi: f64| {
                phi.sin().powf(2.0 * e - 1.0 + 1.5) * basis3.phi_profile(phi).powi(2)
            },
            0.0,
            std::f64::consts::PI,
            1e-13,
        );
        let oracle23 = (0.5 * r2 * a23).sqrt();
        let got23 = weighted_norm_scaled(&f3, sigma, e, 2.0, &opts).unwrap().value();
        assert!(rel(got23, oracle23) <= 1e-10, "N = 3: {got23} vs {oracle23}");
    }

    #[test]
    fn gram_and_tensor_routes_agree_at_p_2() {
        let opts = NormOptions::default();
        let sigma = 6.5;
        let e = 0.15;
        // Even-l mixture: the tensor integrand is polynomial in x, so both
        // routes are exact and must agree to rounding.
        let mut even = SpectralCoefficients::new(2);
        for (k, l, j, c) in [(0usize, 0usize, 0usize, 0.7), (2, 2, 0, -0.5), (4, 2, 1, 0.4), (4, 0, 0, 0.3)] {
            even.entries.push((ModeIndex::new(2, k, l, j).unwrap(), c));
        }
        let zero = SpectralCoefficients::new(2);
        let bump = RadialProfile::Bump { lo: 1.0, hi: 2.0 };
        let chi = move |rho: f64| bump.value(rho);
        let none = |_: f64| 0.0;
        let sv_gram = pair_norm_scaled(
            &chi, &none, &even, &zero, sigma, e, 2.0, (1.0, 2.0),
            Combine::Difference, NormRoute::Gram, &opts,
        )
        .unwrap();
        let sv_tensor = pair_norm_scaled(
            &chi, &none, &even, &zero, sigma, e, 2.0, (1.0, 2.0),
            Combine::Difference, NormRoute::Tensor, &opts,
        )
        .unwrap();
        assert!((sv_gram.ratio(&sv_tensor) - 1.0).abs() <= 1e-10);

        // Odd-l modes put half-integer powers of (1 - x^2) into the tensor
        // integrand; the x-rule then converges algebraically, so the match
        // is looser.
        let mut full = even.clone();
        for (k, l, j, c) in [(3usize, 1usize, 0usize, 0.6), (5, 3, 1, -0.2)] {
            full.entries.push((ModeIndex::new(2, k, l, j).unwrap(), c));
        }
        let sv_gram = pair_norm_scaled(
            &chi, &none, &full, &zero, sigma, e, 2.0, (1.0, 2.0),
            Combine::Difference, NormRoute::Gram, &opts,
        )
        .unwrap();
        let sv_tensor = pair_norm_scaled(
            &chi, &none, &full, &zero, sigma, e, 2.0, (1.0, 2.0),
            Combine::Difference, NormRoute::Tensor, &opts,
        )
        .unwrap();
        assert!(
            (sv_gram.ratio(&sv_tensor) - 1.0).abs() <= 1e-6,
            "odd-l spread: {}",
            sv_gram.ratio(&sv_tensor) - 1.0
        );
    }

    #[test]
    fn dilation_scales_the_norm_by_the_weight_power() {
        let f = mixed(2);
        let f2 = f.dilate(2.0).unwrap();
        let opts = NormOptions::default();
        let sigma = 20.5;
        for (p, tol) in [(2.0, 1e-9), (4.0, 1e-8)] {
            let n1 = weighted_norm_scaled(&f, sigma, 0.1, p, &opts).unwrap();
            let n2 = weighted_norm_scaled(&f2, sigma, 0.1, p, &opts).unwrap();
            let shift = n2.ln_abs() - (n1.ln_abs() - sigma * 2f64.ln());
            assert!(shift.abs() <= tol, "p = {p}: log defect {shift}");
        }
    }

    #[test]
    fn ratio_reports_are_finite_and_positive() {
        let f = single_mode(2, 2, 2, 0, RadialProfile::Bump { lo: 1.0, hi: 2.0 });
        let params = CarlemanParams::new(100.5, 0.1, CarlemanVariant::L2Even).unwrap();
        let report = carleman_ratio(&f, &params).unwrap();
        assert!(report.ratio.is_finite() && report.ratio > 0.0);
        assert!(report.lhs > 0.0 && report.rhs > 0.0);
        assert_eq!(report.p, 2.0);
        assert_eq!(report.q, 2.0);
        assert_eq!(report.grid, 256);
        // The bound's constant is order 1, and log2(s)/s ~ 0.066 at this s.
        assert!(report.ratio <= 1.0, "L2 ratio {}", report.ratio);

        let params = CarlemanParams::new(100.5, 0.1, CarlemanVariant::LpLqEven).unwrap();
        let report = carleman_ratio(&f, &params).unwrap();
        assert!(report.ratio.is_finite() && report.ratio > 0.0);
        assert!((report.p - 4.0).abs() < 1e-12);
        assert!((report.q - 4.0 / 3.0).abs() < 1e-12);
        assert!(report.ratio <= 100.0, "LpLq ratio {}", report.ratio);
    }

    #[test]
    fn odd_dimension_variants_report_ratios() {
        let f = single_mode(3, 1, 1, 0, RadialProfile::Bump { lo: 1.0, hi: 2.0 });
        let params = CarlemanParams::new(100.5, 0.1, CarlemanVariant::L2Odd).unwrap();
        let report = carleman_ratio(&f, &params).unwrap();
        assert!(report.ratio.is_finite() && report.ratio > 0.0);
        assert!(report.ratio <= 1.0, "L2 odd ratio {}", report.ratio);

        let mut params = CarlemanParams::new(100.5, 0.1, CarlemanVariant::LpLqOdd).unwrap();
        // Modes of degree <= 1 are resolved by a coarse angular grid; trim
        // the tensor tables so the smoke test stays fast.
        params.opts.x_nodes = 64;
        params.opts.radial_tol = 1e-9;
        let report = carleman_ratio(&f, &params).unwrap();
        assert!(report.ratio.is_finite() && report.ratio > 0.0);
        assert!((report.p - 3.0).abs() < 1e-12);
        assert!((report.q - 1.5).abs() < 1e-12);
        assert!(report.ratio <= 100.0, "LpLq odd ratio {}", report.ratio);
    }

    #[test]
    fn preconditions_are_enforced() {
        assert!(CarlemanParams::new(100.5, 0.0, CarlemanVariant::L2Even).is_err());
        assert!(CarlemanParams::new(100.5, 0.25, CarlemanVariant::L2Even).is_err());
        assert!(CarlemanParams::new(50.5, 0.1, CarlemanVariant::L2Even).is_err());
        assert!(CarlemanParams::new(101.0, 0.1, CarlemanVariant::L2Even).is_err());

        let params = CarlemanParams::new(100.5, 0.1, CarlemanVariant::L2Even).unwrap();
        let f3 = single_mode(3, 1, 1, 0, RadialProfile::Bump { lo: 1.0, hi: 2.0 });
        assert!(matches!(
            carleman_ratio(&f3, &params),
            Err(GrushinError::InvalidParameter(_))
        ));

        let zero = TestFunction::new(
            2,
            RadialProfile::Bump { lo: 1.0, hi: 2.0 },
            SpectralCoefficients::new(2),
        )
        .unwrap();
        match carleman_ratio(&zero, &params) {
            Err(GrushinError::InvalidParameter(msg)) => {
                assert!(msg.contains("zero test function"))
            }
            other => panic!("expected rejection, got {other:?}"),
        }

        let f = mixed(2);
        assert!(weighted_norm(&f, 5.5, 0.1, 3.0).is_err());
        assert!(weighted_norm(&f, 5.5, 0.1, 1.5).is_err());
        // Divergent angular weights surface the offending exponent.
        match weighted_norm(&f, 5.5, -0.8, 2.0) {
            Err(GrushinError::InvalidParameter(msg)) => assert!(msg.contains("not integrable")),
            other => panic!("expected divergence error, got {other:?}"),
        }
        match weighted_norm(&f, 5.5, -0.6, 4.0) {
            Err(GrushinError::InvalidParameter(msg)) => assert!(msg.contains("not integrable")),
            other => panic!("expected divergence error, got {other:?}"),
        }

        assert!(TestFunction::new(
            2,
            RadialProfile::Bump { lo: 0.0, hi: 2.0 },
            SpectralCoefficients::new(2)
        )
        .is_err());
    }

    #[test]
    fn euler_function_flags_a_potential_counterexample() {
        // chi = rho^k against its own mode is annihilated exactly; the
        // truncation at the support cut drops the boundary terms, so the
        // doubled-resolution recheck still sees a vanishing right side and
        // the designed response is the counterexample flag.
        let f = single_mode(
            2,
            2,
            2,
            0,
            RadialProfile::Power {
                exponent: 2.0,
                lo: 1.0,
                hi: 2.0,
            },
        );
        let params = CarlemanParams::new(100.5, 0.1, CarlemanVariant::L2Even).unwrap();
        match carleman_ratio(&f, &params) {
            Err(GrushinError::Singular(msg)) => assert!(msg.contains("counterexample")),
            other => panic!("expected the counterexample flag, got {other:?}"),
        }
    }

    #[test]
    fn ratio_is_dilation_invariant() {
        let f = mixed(2);
        let f2 = f.dilate(2.0).unwrap();
        let params = CarlemanParams::new(100.5, 0.1, CarlemanVariant::L2Even).unwrap();
        let r1 = carleman_ratio(&f, &params).unwrap();
        let r2 = carleman_ratio(&f2, &params).unwrap();
        assert!((r2.ratio / r1.ratio - 1.0).abs() <= 1e-7);
        // Each side individually scales by lambda^{-s}.
        let defect = r2.lhs_ln - (r1.lhs_ln - params.s * 2f64.ln());
        assert!(defect.abs() <= 1e-6, "lhs log defect {defect}");
    }

    #[test]
    fn reports_round_trip_through_json() {
        let f = single_mode(2, 2, 2, 0, RadialProfile::Bump { lo: 1.0, hi: 2.0 });
        let params = CarlemanParams::new(100.5, 0.1, CarlemanVariant::L2Even).unwrap();
        let report = carleman_ratio(&f, &params).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: CarlemanReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn sweep_fits_the_constant() {
        let family = standard_family(2, 4, 11).unwrap();
        let sweep = constant_sweep(
            &family,
            &[100.5, 200.5],
            0.1,
            CarlemanVariant::L2Even,
            &NormOptions::default(),
        )
        .unwrap();
        assert_eq!(sweep.rows.len(), 2);
        assert_eq!(sweep.rows[0].s, 100.5);
        assert_eq!(sweep.member_ratios.len(), 2);
        assert_eq!(sweep.member_ratios[0].len(), 4);
        assert!(sweep.c_fit.is_finite() && sweep.c_fit > 0.0);
        assert!(sweep.loo_spread >= 1.0 && sweep.loo_spread <= 2.0);
        // The envelope constant upper-bounds every evaluated pair.
        for (row, xs) in sweep.rows.iter().zip([100.5f64, 200.5]) {
            let factor = CarlemanVariant::L2Even.s_factor(xs);
            assert!(row.max_ratio <= sweep.c_envelope * factor * (1.0 + 1e-12));
        }
        assert!(sweep.c_envelope >= sweep.c_fit);
        // The L2 bound decays in s; every family member must follow.
        for m in 0..4 {
            assert!(sweep.member_ratios[1][m] <= sweep.member_ratios[0][m]);
        }
        assert!(sweep.residual.is_finite());
    }

    #[test]
    fn standard_family_is_deterministic_and_annular() {
        let a = standard_family(2, 12, 42).unwrap();
        let b = standard_family(2, 12, 42).unwrap();
        assert_eq!(a.len(), 12);
        for (fa, fb) in a.iter().zip(&b) {
            assert_eq!(fa.radial, fb.radial);
            assert_eq!(fa.angular.entries, fb.angular.entries);
        }
        for f in &a {
            let (lo, hi) = f.support();
            assert!(lo >= 0.5 - 1e-12 && hi <= 4.0);
            assert!(!f.is_zero());
            assert!(f.angular.max_degree() <= 8);
        }
        assert_eq!(standard_family(3, 5, 1).unwrap().len(), 5);
    }

    #[test]
    fn lplq_decay_probe() {
        let f = single_mode(2, 2, 2, 0, RadialProfile::Bump { lo: 1.0, hi: 2.0 });
        let mut prev = f64::NAN;
        for s in [100.5, 200.5, 400.5, 800.5] {
            let mut params = CarlemanParams::new(s, 0.1, CarlemanVariant::LpLqEven).unwrap();
            params.opts.x_nodes = 96;
            params.opts.radial_tol = 1e-10;
            let t0 = std::time::Instant::now();
            let rep = carleman_ratio(&f, &params).unwrap();
            println!("s = {s}: ratio = {:.6e}  decay vs prev = {:.4}  ({} ms)", rep.ratio, prev / rep.ratio, t0.elapsed().as_millis());
            prev = rep.ratio;
        }
        panic!("probe");
    }

    #[test]
    fn application_requires_positive_radii() {
        let f = mixed(2);
        assert!(apply_grushin(&f, &[0.0, 1.0]).is_err());
        assert!(grushin_value(&f, 0.0, 1.0, &[1.0, 0.0]).is_err());
    }
}

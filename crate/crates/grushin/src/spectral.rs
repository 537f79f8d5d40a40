//! Eigenstructure of the angular operator
//!   L_sigma = d^2/dphi^2 + (N/2) cot(phi) d/dphi + (2 sin phi)^{-2} Delta_omega
//! on the gauge sphere: modes, eigenvalues -k(N+k)/4, projections, Parseval
//! decompositions, and the weighted-projection bound behind the inverse
//! sin^{-alpha} estimates.

use std::sync::Arc;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GrushinError, Result};
use crate::quad::cached_rule;
use crate::special::{eval_harmonic, gegenbauer, gegenbauer_norm_sq, harmonic_dim};
use crate::sphere::{parity_of, SphereFunction, SphereGrid};

/// A joint eigenfunction label: total degree k, harmonic degree l <= k with
/// l = k (mod 2), and j indexing the degree-l harmonic space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex {
    pub k: usize,
    pub l: usize,
    pub j: usize,
}

impl ModeIndex {
    pub fn new(n_dim: usize, k: usize, l: usize, j: usize) -> Result<Self> {
        if l > k || (k - l) % 2 != 0 {
            return Err(GrushinError::InvalidParameter(format!(
                "mode (k = {k}, l = {l}) needs l <= k with matching parity"
            )));
        }
        if j >= harmonic_dim(n_dim, l) {
            return Err(GrushinError::InvalidParameter(format!(
                "harmonic index j = {j} out of range for N = {n_dim}, l = {l}"
            )));
        }
        if n_dim > 3 && j != 0 {
            return Err(GrushinError::Unsupported(format!(
                "N = {n_dim}: only zonal modes (j = 0) are available"
            )));
        }
        Ok(ModeIndex { k, l, j })
    }

    /// Gegenbauer degree of the phi factor.
    pub fn q(&self) -> usize {
        (self.k - self.l) / 2
    }
}

/// Eigenvalue of L_sigma on degree-k modes: -k(N+k)/4.
pub fn eigenvalue(n_dim: usize, k: usize) -> f64 {
    -((k * (n_dim + k)) as f64) / 4.0
}

/// All modes with k <= k_max. Full harmonic content for N in {2, 3}; for
/// N >= 4 only the zonal chain (j = 0) is enumerated.
pub fn modes_up_to(n_dim: usize, k_max: usize) -> Vec<ModeIndex> {
    let mut out = Vec::new();
    for k in 0..=k_max {
        let mut l = k % 2;
        while l <= k {
            let d = if n_dim <= 3 { harmonic_dim(n_dim, l) } else { 1 };
            for j in 0..d {
                out.push(ModeIndex { k, l, j });
            }
            l += 2;
        }
    }
    out
}

/// Gegenbauer index of the phi factor for harmonic degree l: l/2 + N/4.
pub fn lambda_l(n_dim: usize, l: usize) -> f64 {
    l as f64 / 2.0 + n_dim as f64 / 4.0
}

/// Normalized eigenfunction g_{k,l,j} = n_{k,l} sin^{l/2}(phi)
/// C_{(k-l)/2}^{l/2 + N/4}(cos phi) Y_{l,j}(omega), unit in L^2(Omega, dOmega).
#[derive(Debug, Clone, Copy)]
pub struct BasisFunction {
    pub n_dim: usize,
    pub mode: ModeIndex,
    norm: f64,
}

impl BasisFunction {
    pub fn new(n_dim: usize, mode: ModeIndex) -> Self {
        let lam = lambda_l(n_dim, mode.l);
        // The harmonic factor is unit-normalized, so the full norm is the
        // Gegenbauer norm against (1-x^2)^{lambda - 1/2}.
        let norm = gegenbauer_norm_sq(mode.q(), lam).sqrt().recip();
        BasisFunction { n_dim, mode, norm }
    }

    /// The phi-dependent factor n_{k,l} sin^{l/2}(phi) C_q(cos phi).
    pub fn phi_profile(&self, phi: f64) -> f64 {
        let lam = lambda_l(self.n_dim, self.mode.l);
        let s = phi.sin().max(0.0);
        self.norm * s.powf(self.mode.l as f64 / 2.0) * gegenbauer(self.mode.q(), lam, phi.cos())
    }

    /// Same factor as a function of x = cos phi, with sin phi >= 0.
    pub fn phi_profile_x(&self, x: f64) -> f64 {
        let lam = lambda_l(self.n_dim, self.mode.l);
        let s2 = (1.0 - x * x).max(0.0);
        self.norm * s2.powf(self.mode.l as f64 / 4.0) * gegenbauer(self.mode.q(), lam, x)
    }

    pub fn eval(&self, phi: f64, omega: &[f64]) -> Result<f64> {
        Ok(self.phi_profile(phi) * eval_harmonic(self.n_dim, self.mode.l, self.mode.j, omega)?)
    }
}

/// A finite combination of eigenfunctions.
#[derive(Debug, Clone)]
pub struct SpectralCoefficients {
    pub n_dim: usize,
    pub entries: Vec<(ModeIndex, f64)>,
}

impl SpectralCoefficients {
    pub fn new(n_dim: usize) -> Self {
        SpectralCoefficients {
            n_dim,
            entries: Vec::new(),
        }
    }

    pub fn coefficient(&self, mode: &ModeIndex) -> f64 {
        self.entries
            .iter()
            .find(|(m, _)| m == mode)
            .map(|(_, c)| *c)
            .unwrap_or(0.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|(_, c)| c * c).sum()
    }

    pub fn max_degree(&self) -> usize {
        self.entries.iter().map(|(m, _)| m.k).max().unwrap_or(0)
    }

    pub fn eval(&self, phi: f64, omega: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (mode, c) in &self.entries {
            acc += c * BasisFunction::new(self.n_dim, *mode).eval(phi, omega)?;
        }
        Ok(acc)
    }

    pub fn synth_on(&self, grid: &Arc<SphereGrid>) -> Result<SphereFunction> {
        if grid.n_dim != self.n_dim {
            return Err(GrushinError::InvalidParameter(
                "grid dimension does not match coefficients".into(),
            ));
        }
        let mut values = vec![0.0; grid.phi_nodes().len() * grid.omega_nodes().len()];
        let lj_index: std::collections::HashMap<(usize, usize), usize> = grid
            .lj_modes()
            .iter()
            .enumerate()
            .map(|(i, &lj)| (lj, i))
            .collect();
        let n_omega = grid.omega_nodes().len();
        for (mode, c) in &self.entries {
            let lj = *lj_index.get(&(mode.l, mode.j)).ok_or_else(|| {
                GrushinError::InvalidParameter(format!(
                    "grid resolves l <= {}, mode has l = {}",
                    grid.l_max, mode.l
                ))
            })?;
            let basis = BasisFunction::new(self.n_dim, *mode);
            for (pi, node) in grid.phi_nodes().iter().enumerate() {
                let radial = c * basis.phi_profile(node.phi);
                if radial == 0.0 {
                    continue;
                }
                for oi in 0..n_omega {
                    values[pi * n_omega + oi] += radial * grid.harmonic_at(lj, oi);
                }
            }
        }
        Ok(SphereFunction {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Per-(l, j) phi profile: sum over k of c_{k,l,j} R_{k,l}(phi).
    pub fn phi_profile_for(&self, l: usize, j: usize) -> impl Fn(f64) -> f64 + '_ {
        let parts: Vec<(BasisFunction, f64)> = self
            .entries
            .iter()
            .filter(|(m, _)| m.l == l && m.j == j)
            .map(|(m, c)| (BasisFunction::new(self.n_dim, *m), *c))
            .collect();
        move |phi| parts.iter().map(|(b, c)| c * b.phi_profile(phi)).sum()
    }
}

/// Projection of a sampled function onto the degree-k eigenspace.
///
/// Exact (up to rounding) when the sample is band-limited within the grid's
/// resolved degrees: the omega rule isolates each harmonic component and the
/// parity-matched phi sub-rule integrates the remaining polynomial exactly.
pub fn project(h: &SphereFunction, k: usize) -> Result<SpectralCoefficients> {
    let grid = &h.grid;
    if k > grid.l_max {
        return Err(GrushinError::InvalidParameter(format!(
            "grid resolves degrees up to {}, requested k = {k}",
            grid.l_max
        )));
    }
    let omega_modes = h.omega_decompose();
    let mut out = SpectralCoefficients::new(grid.n_dim);
    for (lj, &(l, j)) in grid.lj_modes().iter().enumerate() {
        if l > k || (k - l) % 2 != 0 {
            continue;
        }
        let mode = ModeIndex { k, l, j };
        let basis = BasisFunction::new(grid.n_dim, mode);
        let parity = parity_of(l);
        let prods: Vec<f64> = grid
            .phi_nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| n.parity == parity)
            .map(|(pi, node)| omega_modes[pi][lj] * basis.phi_profile(node.phi))
            .collect();
        let c = grid.integrate_phi(parity, &prods);
        out.entries.push((mode, c));
    }
    Ok(out)
}

/// Full decomposition of a sampled function into degree components.
#[derive(Debug, Clone)]
pub struct ParsevalReport {
    pub coefficients: SpectralCoefficients,
    pub per_k_energy: Vec<f64>,
    pub grid_norm_sq: f64,
    pub coeff_norm_sq: f64,
    /// |grid_norm_sq - coeff_norm_sq| / grid_norm_sq.
    pub tail_rel: f64,
}

/// Decompose h into modes k <= k_max and compare energies. Errors if the
/// unresolved tail exceeds `tail_tol` relative to the grid norm.
pub fn parseval_decompose(
    h: &SphereFunction,
    k_max: usize,
    tail_tol: f64,
) -> Result<ParsevalReport> {
    let grid_norm_sq = h.norm_sq();
    let mut coefficients = SpectralCoefficients::new(h.grid.n_dim);
    let mut per_k_energy = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let ck = project(h, k)?;
        per_k_energy.push(ck.norm_sq());
        coefficients.entries.extend(ck.entries);
    }
    let coeff_norm_sq = coefficients.norm_sq();
    let tail_rel = if grid_norm_sq > 0.0 {
        (grid_norm_sq - coeff_norm_sq).abs() / grid_norm_sq
    } else {
        0.0
    };
    if tail_rel > tail_tol {
        return Err(GrushinError::TailTolerance {
            kmax: k_max,
            tail: tail_rel,
            tol: tail_tol,
        });
    }
    Ok(ParsevalReport {
        coefficients,
        per_k_energy,
        grid_norm_sq,
        coeff_norm_sq,
        tail_rel,
    })
}

/// Spectral application of L_sigma: decompose, scale by -k(N+k)/4, resample.
pub fn apply_l_sigma_spectral(
    h: &SphereFunction,
    k_max: usize,
    tail_tol: f64,
) -> Result<SphereFunction> {
    let report = parseval_decompose(h, k_max, tail_tol)?;
    let mut scaled = report.coefficients;
    for (mode, c) in scaled.entries.iter_mut() {
        *c *= eigenvalue(h.grid.n_dim, mode.k);
    }
    scaled.synth_on(&h.grid)
}

/// Finite-difference application of the angular operator to a phi profile of
/// harmonic degree l.
///
/// Under u = sin^{l/2}(phi) w(phi) the operator turns into
///   L_l u = sin^{l/2} [ w'' + (l + N/2) cot(phi) w' - l(N+l)/4 w ],
/// an exact identity; w is the smooth part (a polynomial in cos phi for
/// eigenfunctions), so fourth-order centered differences on a cell-centered
/// uniform grid converge. Ghost cells use even reflection, which is exact for
/// profiles even in phi at both poles.
#[derive(Debug, Clone)]
pub struct FdAngularApplication {
    pub n_dim: usize,
    pub l: usize,
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    pub applied: Vec<f64>,
}

pub fn apply_l_sigma_fd(
    n_dim: usize,
    l: usize,
    profile: &dyn Fn(f64) -> f64,
    n_phi: usize,
) -> Result<FdAngularApplication> {
    if n_phi < 16 {
        return Err(GrushinError::InvalidParameter(
            "finite-difference application needs at least 16 phi nodes".into(),
        ));
    }
    let h = std::f64::consts::PI / n_phi as f64;
    let phi: Vec<f64> = (0..n_phi).map(|i| (i as f64 + 0.5) * h).collect();
    let u: Vec<f64> = phi.iter().map(|&p| profile(p)).collect();
    let half_l = l as f64 / 2.0;
    let w: Vec<f64> = phi
        .iter()
        .zip(&u)
        .map(|(&p, &v)| v / p.sin().powf(half_l))
        .collect();
    // Even reflection: index -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2.
    let wat = |i: isize| -> f64 {
        let n = n_phi as isize;
        let idx = if i < 0 {
            (-i - 1) as usize
        } else if i >= n {
            (2 * n - 1 - i) as usize
        } else {
            i as usize
        };
        w[idx]
    };
    let coef = l as f64 + n_dim as f64 / 2.0;
    let lam_l = -(l as f64) * (n_dim as f64 + l as f64) / 4.0;
    let mut applied = Vec::with_capacity(n_phi);
    for i in 0..n_phi {
        let ii = i as isize;
        let (m2, m1, c0, p1, p2) = (wat(ii - 2), wat(ii - 1), w[i], wat(ii + 1), wat(ii + 2));
        let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        let d2 = (-p2 + 16.0 * p1 - 30.0 * c0 + 16.0 * m1 - m2) / (12.0 * h * h);
        let val = d2 + coef * (phi[i].cos() / phi[i].sin()) * d1 + lam_l * c0;
        applied.push(phi[i].sin().powf(half_l) * val);
    }
    Ok(FdAngularApplication {
        n_dim,
        l,
        phi,
        u,
        applied,
    })
}

impl FdAngularApplication {
    /// ||applied - multiplier * u|| / ||u|| in the discrete L^2(dOmega) norm
    /// (weight sin^{N/2} phi, midpoint rule).
    pub fn weighted_residual(&self, multiplier: f64) -> f64 {
        let p = self.n_dim as f64 / 2.0;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.phi.len() {
            let w = self.phi[i].sin().powf(p);
            num += w * (self.applied[i] - multiplier * self.u[i]).powi(2);
            den += w * self.u[i] * self.u[i];
        }
        (num / den).sqrt()
    }

    /// Relative L^2 distance to a reference profile sampled at the FD nodes.
    pub fn relative_distance_to(&self, reference: &dyn Fn(f64) -> f64, against: &[f64]) -> f64 {
        let p = self.n_dim as f64 / 2.0;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.phi.len() {
            let w = self.phi[i].sin().powf(p);
            num += w * (self.applied[i] - reference(self.phi[i])).powi(2);
            den += w * against[i] * against[i];
        }
        (num / den).sqrt()
    }
}

/// Random band-limited combination with standard normal coefficients.
pub fn random_band_limited(n_dim: usize, k_max: usize, seed: u64) -> SpectralCoefficients {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = SpectralCoefficients::new(n_dim);
    for mode in modes_up_to(n_dim, k_max) {
        let c: f64 = StandardNormal.sample(&mut rng);
        out.entries.push((mode, c));
    }
    out
}

/// Parameters for the weighted-projection constant estimate: the empirical
/// sup over random band-limited h of
///   max_{k <= k_max} || sin^{-alpha} P_k(sin^{-alpha} h) ||^2 / || h ||^2.
#[derive(Debug, Clone, Copy)]
pub struct WeightedProjectionParams {
    pub n_dim: usize,
    pub alpha: f64,
    pub k_max: usize,
    pub trials: usize,
    pub seed: u64,
    /// Base node count for the exact Jacobi rules; refinement doubles it.
    pub quad_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct WeightedProjectionReport {
    pub alpha: f64,
    pub k_max: usize,
    pub trials: usize,
    /// Empirical constant at the base quadrature resolution.
    pub max_ratio: f64,
    /// Largest ratio seen per projection degree k.
    pub per_k_max: Vec<f64>,
    /// Empirical constant with the rule resolution doubled.
    pub refined_max_ratio: f64,
    /// |refined - base| / base.
    pub refinement_change: f64,
}

/// Admissible alpha range: [0, 1/2) for even N, [0, 3/8) for odd N.
pub fn alpha_upper_bound(n_dim: usize) -> f64 {
    if n_dim % 2 == 0 {
        0.5
    } else {
        0.375
    }
}

pub fn weighted_projection_constant(
    params: &WeightedProjectionParams,
) -> Result<WeightedProjectionReport> {
    let WeightedProjectionParams {
        n_dim,
        alpha,
        k_max,
        trials,
        seed,
        quad_nodes,
    } = *params;
    if !(0.0..alpha_upper_bound(n_dim)).contains(&alpha) {
        return Err(GrushinError::InvalidParameter(format!(
            "alpha = {alpha} outside [0, {}) for N = {n_dim}",
            alpha_upper_bound(n_dim)
        )));
    }
    if trials == 0 {
        return Err(GrushinError::InvalidParameter("need at least one trial".into()));
    }
    let n_base = quad_nodes.max(k_max + 8);

    let run = |nodes: usize| -> Result<(f64, Vec<f64>)> {
        // Per harmonic degree l: the matrix of sin^{-alpha}-weighted inner
        // products between same-l eigenfunctions, and the diagonal
        // sin^{-2 alpha} Gram of the target modes.
        let modes = modes_up_to(n_dim, k_max);
        let mut cross: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k_max + 1);
        let mut gram: Vec<Vec<f64>> = Vec::with_capacity(k_max + 1);
        for l in 0..=k_max {
            let ks: Vec<usize> = (l..=k_max).step_by(2).collect();
            let lam = lambda_l(n_dim, l);
            let rule_cross = cached_rule(nodes, lam - 0.5 - alpha / 2.0, lam - 0.5 - alpha / 2.0)?;
            let rule_gram = cached_rule(nodes, lam - 0.5 - alpha, lam - 0.5 - alpha)?;
            let basis: Vec<BasisFunction> = ks
                .iter()
                .map(|&k| BasisFunction::new(n_dim, ModeIndex { k, l, j: 0 }))
                .collect();
            let mut t = vec![vec![0.0; ks.len()]; ks.len()];
            for (a, ba) in basis.iter().enumerate() {
                for (b, bb) in basis.iter().enumerate().skip(a) {
                    // The sin^{l} factor of the pair is absorbed into the rule
                    // weight; only the Gegenbauer parts are sampled.
                    let qa = ba.mode.q();
                    let qb = bb.mode.q();
                    let na = 1.0 / gegenbauer_norm_sq(qa, lam).sqrt();
                    let nb = 1.0 / gegenbauer_norm_sq(qb, lam).sqrt();
                    let v = na
                        * nb
                        * rule_cross
                            .integrate(|x| gegenbauer(qa, lam, x) * gegenbauer(qb, lam, x));
                    t[a][b] = v;
                    t[b][a] = v;
                }
            }
            cross.push(t);
            let g: Vec<f64> = basis
                .iter()
                .map(|b| {
                    let q = b.mode.q();
                    let n = 1.0 / gegenbauer_norm_sq(q, lam).sqrt();
                    n * n * rule_gram.integrate(|x| gegenbauer(q, lam, x).powi(2))
                })
                .collect();
            gram.push(g);
        }

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut overall: f64 = 0.0;
        let mut per_k = vec![0.0f64; k_max + 1];
        for _ in 0..trials {
            let coeffs: Vec<f64> = modes
                .iter()
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let h_norm_sq: f64 = coeffs.iter().map(|c| c * c).sum();
            for k in 0..=k_max {
                let mut image_norm_sq = 0.0;
                let mut l = k % 2;
                while l <= k {
                    let ks: Vec<usize> = (l..=k_max).step_by(2).collect();
                    let row = ks.iter().position(|&kk| kk == k).unwrap();
                    for j in 0..(if n_dim <= 3 { harmonic_dim(n_dim, l) } else { 1 }) {
                        // Coefficient of the projected image on g_{k,l,j}.
                        let mut d = 0.0;
                        for (col, &kk) in ks.iter().enumerate() {
                            let idx = modes
                                .iter()
                                .position(|m| m.k == kk && m.l == l && m.j == j)
                                .unwrap();
                            d += cross[l][row][col] * coeffs[idx];
                        }
                        image_norm_sq += gram[l][row] * d * d;
                    }
                    l += 2;
                }
                let ratio = image_norm_sq / h_norm_sq;
                per_k[k] = per_k[k].max(ratio);
                overall = overall.max(ratio);
            }
        }
        Ok((overall, per_k))
    };

    let (max_ratio, per_k_max) = run(n_base)?;
    let (refined_max_ratio, _) = run(2 * n_base)?;
    let refinement_change = if max_ratio > 0.0 {
        (refined_max_ratio - max_ratio).abs() / max_ratio
    } else {
        0.0
    };
    Ok(WeightedProjectionReport {
        alpha,
        k_max,
        trials,
        max_ratio,
        per_k_max,
        refined_max_ratio,
        refinement_change,
    })
}

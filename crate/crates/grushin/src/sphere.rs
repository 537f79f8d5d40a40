//! Quadrature grid for the gauge sphere Omega = {rho = 1} with its measure
//! d Omega = sin^{N/2}(phi) dphi domega.
//!
//! Functions are sampled on a tensor grid (phi nodes) x (omega nodes). The
//! phi direction carries two Gauss-Jacobi sub-rules in x = cos(phi): one
//! absorbing sin^{N/2} phi (for integrands whose leftover sin power is even)
//! and one absorbing sin^{N/2+1} phi (odd leftover power). Every integrand
//! this module meets is first split into spherical-harmonic components in
//! omega; a component of degree l carries sin^{l/2} phi per factor, so after
//! pairing, the leftover sin power has the parity of l and the matching
//! sub-rule integrates polynomials exactly. That makes inner products, norms,
//! and projections of band-limited functions exact up to rounding.

use std::sync::Arc;

use crate::error::{GrushinError, Result};
use crate::quad::cached_rule;
use crate::special::{eval_harmonic, harmonic_dim};

/// One phi node of the grid.
#[derive(Debug, Clone, Copy)]
pub struct PhiNode {
    pub x: f64,
    pub phi: f64,
    pub sin_phi: f64,
    /// Quadrature weight against sin^{N/2}(phi) dphi for the node's own
    /// sub-rule (the 1/sin factor of the odd sub-rule is already folded in).
    pub weight: f64,
    /// Parity of the leftover sin power this node's sub-rule integrates exactly.
    pub parity: Parity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

pub fn parity_of(l: usize) -> Parity {
    if l % 2 == 0 {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// Tensor quadrature grid on the gauge sphere. N is 2 or 3.
#[derive(Debug)]
pub struct SphereGrid {
    pub n_dim: usize,
    /// Largest harmonic degree the omega rule resolves exactly in pair products.
    pub l_max: usize,
    phi_nodes: Vec<PhiNode>,
    n_even: usize,
    omega_nodes: Vec<Vec<f64>>,
    omega_weights: Vec<f64>,
    /// (l, j) pairs for l <= l_max, flattened.
    lj_modes: Vec<(usize, usize)>,
    /// Row-major [lj][omega]: Y_{l,j} at each omega node.
    harmonic_table: Vec<f64>,
}

impl SphereGrid {
    /// Grid resolving harmonic degrees up to `l_max` with `n_phi` nodes per
    /// phi sub-rule, with an omega rule exact for products of total degree
    /// `omega_degree` (use 2*l_max for quadratic work, more for L^p norms).
    pub fn with_omega_degree(
        n_dim: usize,
        l_max: usize,
        n_phi: usize,
        omega_degree: usize,
    ) -> Result<Arc<Self>> {
        if !(2..=3).contains(&n_dim) {
            return Err(GrushinError::Unsupported(format!(
                "sphere grids are implemented for N in {{2, 3}}, got {n_dim}"
            )));
        }
        if n_phi < 4 {
            return Err(GrushinError::InvalidParameter(
                "sphere grid needs at least 4 phi nodes per sub-rule".into(),
            ));
        }
        let a_even = (n_dim as f64 - 2.0) / 4.0;
        let even = cached_rule(n_phi, a_even, a_even)?;
        let odd = cached_rule(n_phi, a_even + 0.5, a_even + 0.5)?;
        let mut phi_nodes = Vec::with_capacity(2 * n_phi);
        for (&x, &w) in even.nodes.iter().zip(&even.weights) {
            let phi = x.acos();
            phi_nodes.push(PhiNode {
                x,
                phi,
                sin_phi: phi.sin(),
                weight: w,
                parity: Parity::Even,
            });
        }
        for (&x, &w) in odd.nodes.iter().zip(&odd.weights) {
            let phi = x.acos();
            let sin_phi = phi.sin();
            phi_nodes.push(PhiNode {
                x,
                phi,
                sin_phi,
                weight: w / sin_phi,
                parity: Parity::Odd,
            });
        }

        let (omega_nodes, omega_weights) = omega_rule(n_dim, omega_degree)?;

        let mut lj_modes = Vec::new();
        for l in 0..=l_max {
            for j in 0..harmonic_dim(n_dim, l) {
                lj_modes.push((l, j));
            }
        }
        let mut harmonic_table = Vec::with_capacity(lj_modes.len() * omega_nodes.len());
        for &(l, j) in &lj_modes {
            for node in &omega_nodes {
                harmonic_table.push(eval_harmonic(n_dim, l, j, node)?);
            }
        }

        Ok(Arc::new(SphereGrid {
            n_dim,
            l_max,
            phi_nodes,
            n_even: n_phi,
            omega_nodes,
            omega_weights,
            lj_modes,
            harmonic_table,
        }))
    }

    /// Default grid for spectral work with modes up to degree `k_max`.
    pub fn for_modes(n_dim: usize, k_max: usize) -> Result<Arc<Self>> {
        Self::with_omega_degree(n_dim, k_max, k_max + 12, 2 * k_max)
    }

    pub fn phi_nodes(&self) -> &[PhiNode] {
        &self.phi_nodes
    }

    pub fn omega_nodes(&self) -> &[Vec<f64>] {
        &self.omega_nodes
    }

    pub fn omega_weights(&self) -> &[f64] {
        &self.omega_weights
    }

    pub fn lj_modes(&self) -> &[(usize, usize)] {
        &self.lj_modes
    }

    pub fn harmonic_at(&self, lj_index: usize, omega_index: usize) -> f64 {
        self.harmonic_table[lj_index * self.omega_nodes.len() + omega_index]
    }

    /// Integral of a single-parity phi profile against sin^{N/2}(phi) dphi.
    /// `values` must be sampled at this parity's sub-rule nodes, in order.
    pub fn integrate_phi(&self, parity: Parity, values: &[f64]) -> f64 {
        let nodes: Vec<&PhiNode> = self
            .phi_nodes
            .iter()
            .filter(|n| n.parity == parity)
            .collect();
        assert_eq!(nodes.len(), values.len(), "parity node count mismatch");
        nodes
            .iter()
            .zip(values)
            .map(|(node, &v)| node.weight * v)
            .sum()
    }

    pub fn n_even(&self) -> usize {
        self.n_even
    }

    /// Sample a function of (phi, omega) on the full grid.
    pub fn sample(self: &Arc<Self>, mut f: impl FnMut(f64, &[f64]) -> f64) -> SphereFunction {
        let mut values = Vec::with_capacity(self.phi_nodes.len() * self.omega_nodes.len());
        for node in &self.phi_nodes {
            for omega in &self.omega_nodes {
                values.push(f(node.phi, omega));
            }
        }
        SphereFunction {
            grid: Arc::clone(self),
            values,
        }
    }

    /// Total measure of the gauge sphere, as a consistency check target.
    pub fn total_measure(&self) -> f64 {
        let even_ones: Vec<f64> = vec![1.0; self.n_even];
        let omega_mass: f64 = self.omega_weights.iter().sum();
        self.integrate_phi(Parity::Even, &even_ones) * omega_mass
    }
}

/// Quadrature on S^{N-1} exact for harmonic products of total degree
/// `degree`: uniform on the circle, Gauss-Legendre x uniform on S^2.
pub(crate) fn omega_rule(n_dim: usize, degree: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    match n_dim {
        2 => {
            let m = (degree + 2).max(8);
            let w = 2.0 * std::f64::consts::PI / m as f64;
            let mut nodes = Vec::with_capacity(m);
            for i in 0..m {
                let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                nodes.push(vec![th.cos(), th.sin()]);
            }
            Ok((nodes, vec![w; m]))
        }
        3 => {
            let n_polar = (degree / 2 + 2).max(4);
            let n_azim = (degree + 2).max(8);
            let gl = cached_rule(n_polar, 0.0, 0.0)?;
            let w_az = 2.0 * std::f64::consts::PI / n_azim as f64;
            let mut nodes = Vec::with_capacity(n_polar * n_azim);
            let mut weights = Vec::with_capacity(n_polar * n_azim);
            for (&xi, &wp) in gl.nodes.iter().zip(&gl.weights) {
                let s = (1.0 - xi * xi).max(0.0).sqrt();
                for i in 0..n_azim {
                    let th = 2.0 * std::f64::consts::PI * i as f64 / n_azim as f64;
                    nodes.push(vec![s * th.cos(), s * th.sin(), xi]);
                    weights.push(wp * w_az);
                }
            }
            Ok((nodes, weights))
        }
        _ => Err(GrushinError::Unsupported(format!(
            "omega rules are implemented for N in {{2, 3}}, got {n_dim}"
        ))),
    }
}

/// A function sampled on a SphereGrid, phi-major.
#[derive(Debug, Clone)]
pub struct SphereFunction {
    pub grid: Arc<SphereGrid>,
    pub values: Vec<f64>,
}

impl SphereFunction {
    pub fn value_at(&self, phi_index: usize, omega_index: usize) -> f64 {
        self.values[phi_index * self.grid.omega_nodes().len() + omega_index]
    }

    /// Spherical-harmonic components in omega at every phi node:
    /// result[phi][lj] = int h(phi, omega) Y_{l,j}(omega) domega.
    pub fn omega_decompose(&self) -> Vec<Vec<f64>> {
        let grid = &self.grid;
        let n_omega = grid.omega_nodes().len();
        let n_lj = grid.lj_modes().len();
        let mut out = vec![vec![0.0; n_lj]; grid.phi_nodes().len()];
        for (pi, row) in out.iter_mut().enumerate() {
            let base = pi * n_omega;
            for (lj, slot) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for oi in 0..n_omega {
                    acc += grid.omega_weights()[oi]
                        * grid.harmonic_at(lj, oi)
                        * self.values[base + oi];
                }
                *slot = acc;
            }
        }
        out
    }

    /// L^2(Omega, d Omega) inner product, exact for band-limited samples.
    pub fn inner_product(&self, other: &SphereFunction) -> f64 {
        assert!(Arc::ptr_eq(&self.grid, &other.grid), "grid mismatch");
        let a = self.omega_decompose();
        let b = other.omega_decompose();
        let grid = &self.grid;
        let mut total = 0.0;
        for (lj, &(l, _)) in grid.lj_modes().iter().enumerate() {
            let parity = parity_of(l);
            let prods: Vec<f64> = grid
                .phi_nodes()
                .iter()
                .enumerate()
                .filter(|(_, n)| n.parity == parity)
                .map(|(pi, _)| a[pi][lj] * b[pi][lj])
                .collect();
            total += grid.integrate_phi(parity, &prods);
        }
        total
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner_product(self)
    }
}

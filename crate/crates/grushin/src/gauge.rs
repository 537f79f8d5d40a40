//! Gauge geometry for the degenerate operator: the homogeneous norm
//! rho(z, t) = (|z|^4 + 4 t^2)^{1/4} on R^N x R, the degeneracy weight
//! psi = |z|^2 / rho^2, polar coordinates adapted to the anisotropic
//! dilations, and gauge balls centered on the degeneracy axis.

use crate::error::{GrushinError, Result};
use crate::quad::cached_rule;
use crate::special::sphere_area;

/// A point (z, t) in R^N x R.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugePoint {
    pub z: Vec<f64>,
    pub t: f64,
}

impl GaugePoint {
    pub fn new(z: Vec<f64>, t: f64) -> Self {
        GaugePoint { z, t }
    }

    pub fn n_dim(&self) -> usize {
        self.z.len()
    }

    pub fn z_norm(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Polar form of a point: rho >= 0, phi in [0, pi], omega a unit vector in
/// R^N. On the axis {z = 0} the angular direction is not determined; omega is
/// set to e_1 and `degenerate_omega` records that convention.
#[derive(Debug, Clone)]
pub struct PolarPoint {
    pub rho: f64,
    pub phi: f64,
    pub omega: Vec<f64>,
    pub degenerate_omega: bool,
}

/// Homogeneous gauge rho(z, t) = (|z|^4 + 4 t^2)^{1/4}.
pub fn gauge_rho(p: &GaugePoint) -> f64 {
    let z2 = p.z.iter().map(|v| v * v).sum::<f64>();
    (z2 * z2 + 4.0 * p.t * p.t).powf(0.25)
}

/// Degeneracy weight psi = |z|^2 / rho^2 = sin(phi), in [0, 1].
/// Defined as 0 at the origin, where every direction is degenerate.
pub fn weight_psi(p: &GaugePoint) -> f64 {
    let z2 = p.z.iter().map(|v| v * v).sum::<f64>();
    let rho2 = (z2 * z2 + 4.0 * p.t * p.t).sqrt();
    if rho2 == 0.0 {
        0.0
    } else {
        (z2 / rho2).min(1.0)
    }
}

/// Polar decomposition: |z| = rho sin^{1/2}(phi), t = rho^2 cos(phi) / 2.
pub fn to_polar(p: &GaugePoint) -> PolarPoint {
    let z_norm = p.z_norm();
    let rho = gauge_rho(p);
    // atan2(|z|^2, 2t) lands in [0, pi] since |z|^2 >= 0.
    let phi = (z_norm * z_norm).atan2(2.0 * p.t);
    if z_norm == 0.0 {
        let mut omega = vec![0.0; p.n_dim()];
        if !omega.is_empty() {
            omega[0] = 1.0;
        }
        PolarPoint {
            rho,
            phi,
            omega,
            degenerate_omega: true,
        }
    } else {
        PolarPoint {
            rho,
            phi,
            omega: p.z.iter().map(|v| v / z_norm).collect(),
            degenerate_omega: false,
        }
    }
}

/// Inverse of `to_polar`.
pub fn from_polar(p: &PolarPoint) -> GaugePoint {
    let r = p.rho * p.phi.sin().max(0.0).sqrt();
    GaugePoint {
        z: p.omega.iter().map(|w| r * w).collect(),
        t: 0.5 * p.rho * p.rho * p.phi.cos(),
    }
}

/// Gauge ball of radius r centered at (0, t0) on the degeneracy axis.
#[derive(Debug, Clone, Copy)]
pub struct GaugeBall {
    pub radius: f64,
    pub center_t: f64,
}

impl GaugeBall {
    pub fn new(radius: f64, center_t: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(GrushinError::InvalidParameter(format!(
                "gauge ball radius must be positive, got {radius}"
            )));
        }
        Ok(GaugeBall { radius, center_t })
    }

    pub fn contains(&self, p: &GaugePoint) -> bool {
        let shifted = GaugePoint::new(p.z.clone(), p.t - self.center_t);
        gauge_rho(&shifted) < self.radius
    }
}

/// Volume of a gauge ball by polar quadrature,
///   |B_r| = 1/2 |S^{N-1}| int_0^r rho^{N+1} drho int_0^pi sin^{(N-2)/2} phi dphi,
/// from the polar volume element dz dt = 1/2 rho^{N+1} sin^{(N-2)/2}(phi)
/// drho dphi domega. `resolution` is the node count per quadrature axis.
pub fn ball_volume(n_dim: usize, ball: &GaugeBall, resolution: usize) -> Result<f64> {
    if n_dim < 2 {
        return Err(GrushinError::InvalidParameter(format!(
            "ambient dimension must be >= 2, got {n_dim}"
        )));
    }
    if resolution < 8 {
        return Err(GrushinError::InvalidParameter(format!(
            "ball volume needs at least 8 nodes per axis, got {resolution}"
        )));
    }
    let r = ball.radius;
    // Radial factor: Gauss-Legendre on [0, r] applied to rho^{N+1}.
    let radial_rule = cached_rule(resolution, 0.0, 0.0)?;
    let radial: f64 = radial_rule
        .nodes
        .iter()
        .zip(&radial_rule.weights)
        .map(|(&x, &w)| {
            let rho = 0.5 * r * (x + 1.0);
            0.5 * r * w * rho.powi(n_dim as i32 + 1)
        })
        .sum();
    // Angular factor: sin^{(N-2)/2} phi dphi = (1-x^2)^{(N-4)/4} dx under x = cos phi.
    let a = (n_dim as f64 - 4.0) / 4.0;
    let phi_mass = cached_rule(resolution, a, a)?.integrate(|_| 1.0);
    Ok(0.5 * sphere_area(n_dim) * radial * phi_mass)
}

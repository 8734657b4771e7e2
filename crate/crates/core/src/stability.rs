//! Soft-finger contact stability gate.
//!
//! A contact patch of radius `a = sqrt(2 R h_max - h_max²)` under a Winkler
//! elastic foundation resists torque about its normal with eccentricity
//! `e_n = (8/15) a`. A grasp is kept when the friction ellipse can absorb the
//! worst-case gravity torque: `(m g c)² <= e_n² (μ² f_n² - (m g)²)`.
//!
//! Units: lengths in mm, forces in N, mass in kg. The margin therefore comes
//! out in N²·mm².

use serde::{Deserialize, Serialize};

use crate::geom::{angle_between, Point};
use crate::mesh::TriangleMesh;
use crate::segmentation::Facet;

/// Normals closer than this (radians) carry no curvature information.
pub const MIN_CURVATURE_ANGLE: f64 = 1e-6;
/// Curvature radius assigned to flat facets (mm).
pub const DEFAULT_R_MAX: f64 = 1e6;
pub const ECCENTRICITY_FACTOR: f64 = 8.0 / 15.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StabilityError {
    #[error("penetration depth h_max = {h_max} mm must be positive and below the curvature radius R = {radius} mm")]
    Domain { radius: f64, h_max: f64 },
    #[error("invalid physical parameter {name} = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Object mass (kg).
    pub mass: f64,
    /// m/s².
    pub gravity: f64,
    pub friction_mu: f64,
    /// Squeeze force per jaw, or suction holding force (N).
    pub grip_force: f64,
    /// Maximum soft-pad penetration depth (mm).
    pub h_max: f64,
}

impl PhysicalParams {
    pub const DEFAULT_GRAVITY: f64 = 9.81;
    pub const DEFAULT_MU: f64 = 0.5;
    pub const DEFAULT_GRIP_FORCE: f64 = 20.0;
    pub const DEFAULT_H_MAX: f64 = 1.5;

    /// Defaults for everything except the mass, which has no sensible default.
    pub fn with_mass(mass: f64) -> Self {
        Self {
            mass,
            gravity: Self::DEFAULT_GRAVITY,
            friction_mu: Self::DEFAULT_MU,
            grip_force: Self::DEFAULT_GRIP_FORCE,
            h_max: Self::DEFAULT_H_MAX,
        }
    }

    pub fn validate(&self) -> Result<(), StabilityError> {
        let checks = [
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("friction_mu", self.friction_mu),
            ("grip_force", self.grip_force),
            ("h_max", self.h_max),
        ];
        for (name, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(StabilityError::InvalidParam {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if self.friction_mu > 2.0 {
            return Err(StabilityError::InvalidParam {
                name: "friction_mu",
                value: self.friction_mu,
                reason: "friction coefficient above 2 is not physical",
            });
        }
        Ok(())
    }

    /// Object weight `m g` in N.
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Distance between contact center and center of mass (mm).
    pub c: f64,
    /// Curvature radius used (mm).
    pub radius: f64,
    /// Eccentricity `e_n` (mm).
    pub eccentricity: f64,
    /// Right side minus left side of the torque condition (N²·mm²).
    pub margin: f64,
    pub stable: bool,
}

/// How the per-triangle ratios `d_i / θ_i` are reduced to one radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureMode {
    #[default]
    Max,
    /// Smallest ratio; gives the smallest (most conservative) patch.
    Min,
}

/// Curvature radius of a facet from the seed-relative ratios
/// `d_i / θ_i`, where `d_i` is the centroid distance and `θ_i` the normal
/// angle between member `i` and the seed. Flat facets get `r_max`.
pub fn curvature_radius(facet: &Facet, mesh: &TriangleMesh, r_max: f64, mode: CurvatureMode) -> f64 {
    let seed = facet.seed_triangle;
    let seed_centroid = mesh.triangle_centroid(seed);
    let seed_normal = mesh.face_normal(seed);
    let ratios = facet.members.iter().filter(|&&t| t != seed).filter_map(|&t| {
        let theta = angle_between(&mesh.face_normal(t), &seed_normal);
        (theta >= MIN_CURVATURE_ANGLE).then(|| (mesh.triangle_centroid(t) - seed_centroid).norm() / theta)
    });
    let r = match mode {
        CurvatureMode::Max => ratios.fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r)))),
        CurvatureMode::Min => ratios.fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.min(r)))),
    };
    r.map_or(r_max, |r| r.min(r_max))
}

/// Fills `curvature_radius` on every facet.
pub fn assign_curvature_radii(facets: &mut [Facet], mesh: &TriangleMesh, r_max: f64, mode: CurvatureMode) {
    for f in facets.iter_mut() {
        f.curvature_radius = Some(curvature_radius(f, mesh, r_max, mode));
    }
}

/// Soft-finger eccentricity `e_n = (8/15) sqrt(2 R h_max - h_max²)`.
pub fn eccentricity(radius: f64, h_max: f64) -> Result<f64, StabilityError> {
    if !(h_max > 0.0 && h_max < radius) {
        return Err(StabilityError::Domain { radius, h_max });
    }
    Ok(ECCENTRICITY_FACTOR * (2.0 * radius * h_max - h_max * h_max).sqrt())
}

/// Evaluates the gravity-torque condition for a contact (or contact-pair
/// midpoint) at `contact_center`.
pub fn check_stability(
    contact_center: &Point,
    com: &Point,
    radius: f64,
    phys: &PhysicalParams,
) -> Result<StabilityReport, StabilityError> {
    let e_n = eccentricity(radius, phys.h_max)?;
    let c = (contact_center - com).norm();
    let mg = phys.weight();
    let friction = phys.friction_mu * phys.grip_force;
    let mut margin = e_n * e_n * (friction * friction - mg * mg) - (mg * c) * (mg * c);
    // Without normal-force headroom no distance is stable, not even c = 0,
    // where the margin would otherwise be exactly zero.
    if friction <= mg && margin >= 0.0 {
        margin = -f64::MIN_POSITIVE;
    }
    let stable = margin >= 0.0;
    Ok(StabilityReport {
        c,
        radius,
        eccentricity: e_n,
        margin,
        stable,
    })
}

/// Largest stable contact-center distance, or `None` if `μ f_n <= m g`.
pub fn stability_threshold(radius: f64, phys: &PhysicalParams) -> Result<Option<f64>, StabilityError> {
    let e_n = eccentricity(radius, phys.h_max)?;
    let mg = phys.weight();
    let friction = phys.friction_mu * phys.grip_force;
    if friction <= mg {
        return Ok(None);
    }
    Ok(Some(e_n * (friction * friction - mg * mg).sqrt() / mg))
}

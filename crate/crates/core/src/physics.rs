//! Analytical stress oracle for a closed cylindrical vessel with
//! hemispherical end caps under external hydrostatic pressure.
//!
//! The vessel is modeled with the Lamé thick-walled solutions for the
//! cylinder body and the spherical caps; the reported stress is the larger
//! of the two inner-surface von Mises values. Junction stresses at the
//! cylinder/cap weld and buckling are outside this model.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Sea water density used for hydrostatic pressure, kg/m³.
pub const SEAWATER_DENSITY: f64 = 1025.0;

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// One candidate vessel: operating depth plus the three shell parameters.
///
/// `radius` is the *outer* radius of both the cylinder and the end caps;
/// the inner radius is `radius - thickness`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    /// Maximum operating depth, meters of sea water.
    pub depth: f64,
    /// Length of the cylindrical section, meters.
    pub length: f64,
    /// Wall thickness, meters.
    pub thickness: f64,
    /// Outer radius of cylinder and end caps, meters.
    pub radius: f64,
}

impl DesignPoint {
    pub fn new(depth: f64, length: f64, thickness: f64, radius: f64) -> Result<Self> {
        let point = DesignPoint {
            depth,
            length,
            thickness,
            radius,
        };
        point.validate()?;
        Ok(point)
    }

    /// Checks the geometric invariants: non-negative depth and length,
    /// positive thickness and radius, and a positive inner radius.
    pub fn validate(&self) -> Result<()> {
        if !self.depth.is_finite() || self.depth < 0.0 {
            return Err(Error::domain(format!(
                "depth must be finite and >= 0, got {}",
                self.depth
            )));
        }
        if !self.length.is_finite() || self.length < 0.0 {
            return Err(Error::domain(format!(
                "length must be finite and >= 0, got {}",
                self.length
            )));
        }
        if !self.thickness.is_finite() || self.thickness <= 0.0 {
            return Err(Error::domain(format!(
                "thickness must be finite and > 0, got {}",
                self.thickness
            )));
        }
        if !self.radius.is_finite() || self.radius <= 0.0 {
            return Err(Error::domain(format!(
                "radius must be finite and > 0, got {}",
                self.radius
            )));
        }
        if self.thickness >= self.radius {
            return Err(Error::domain(format!(
                "thickness {} must be smaller than radius {} (inner radius must stay positive)",
                self.thickness, self.radius
            )));
        }
        Ok(())
    }

    /// The design variables in canonical order (depth, length, thickness,
    /// radius), as fed to the regressors.
    pub fn as_array(&self) -> [f64; 4] {
        [self.depth, self.length, self.thickness, self.radius]
    }
}

/// Hull material. Only the yield strength enters the feasibility check;
/// density is informational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Yield strength, pascals.
    pub yield_strength: f64,
    /// Density, kg/m³.
    pub density: f64,
}

impl Material {
    /// Al6061-T6 with the common handbook yield strength of 276 MPa.
    pub fn al6061_t6() -> Self {
        Material {
            name: "Al6061-T6".to_string(),
            yield_strength: 2.76e8,
            density: 2700.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.yield_strength.is_finite() && self.yield_strength > 0.0) {
            return Err(Error::domain(format!(
                "yield strength must be finite and > 0, got {}",
                self.yield_strength
            )));
        }
        Ok(())
    }
}

/// Oracle output for one design: the applied pressure and the von Mises
/// stress of each shell body, all in pascals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressResult {
    /// External gauge pressure applied to the hull.
    pub pressure: f64,
    /// Inner-surface von Mises stress of the cylindrical section.
    pub cylinder_vm: f64,
    /// Inner-surface von Mises stress of the hemispherical caps.
    pub sphere_vm: f64,
    /// max(cylinder_vm, sphere_vm) — the value the surrogate learns.
    pub max_vm: f64,
}

/// Gauge pressure of a sea water column: ρ·g·depth.
///
/// The vessel interior is taken to be at atmospheric pressure, so the net
/// crushing pressure carries no atmospheric term.
pub fn hydrostatic_pressure(depth: f64) -> Result<f64> {
    if !depth.is_finite() || depth < 0.0 {
        return Err(Error::domain(format!(
            "depth must be finite and >= 0, got {depth}"
        )));
    }
    Ok(SEAWATER_DENSITY * GRAVITY * depth)
}

fn check_shell_args(pressure: f64, outer_radius: f64, thickness: f64) -> Result<()> {
    if !pressure.is_finite() || pressure < 0.0 {
        return Err(Error::domain(format!(
            "pressure must be finite and >= 0, got {pressure}"
        )));
    }
    if !(thickness.is_finite() && thickness > 0.0) || !(outer_radius.is_finite()) {
        return Err(Error::domain(format!(
            "shell geometry must be finite with thickness > 0, got t={thickness}, b={outer_radius}"
        )));
    }
    if thickness >= outer_radius {
        return Err(Error::domain(format!(
            "thickness {thickness} must be smaller than outer radius {outer_radius}"
        )));
    }
    Ok(())
}

/// Maximum von Mises stress of a closed thick-walled cylinder under external
/// pressure only.
///
/// With inner radius `a = b - t`, the Lamé solution puts the worst stress
/// state at the inner surface: (σ_r, σ_θ, σ_z) = (0, −2k, −k) with
/// k = p·b²/(b² − a²), giving a von Mises stress of √3·k.
pub fn cylinder_max_vm(pressure: f64, outer_radius: f64, thickness: f64) -> Result<f64> {
    check_shell_args(pressure, outer_radius, thickness)?;
    let b = outer_radius;
    let a = b - thickness;
    let k = pressure * b * b / (b * b - a * a);
    Ok(3.0f64.sqrt() * k)
}

/// Maximum von Mises stress of a thick-walled sphere under external pressure
/// only.
///
/// At the inner surface (σ_r, σ_θ, σ_φ) = (0, −c, −c) with
/// c = (3/2)·p·b³/(b³ − a³); the von Mises stress of that state is c itself.
pub fn sphere_max_vm(pressure: f64, outer_radius: f64, thickness: f64) -> Result<f64> {
    check_shell_args(pressure, outer_radius, thickness)?;
    let b = outer_radius;
    let a = b - thickness;
    let c = 1.5 * pressure * b.powi(3) / (b.powi(3) - a.powi(3));
    Ok(c)
}

/// Evaluates the full oracle for one design point.
///
/// The result is independent of `design.length`: both closed forms are
/// membrane solutions of the cylinder cross-section and the caps.
pub fn max_vm_stress(design: &DesignPoint) -> Result<StressResult> {
    design.validate()?;
    let pressure = hydrostatic_pressure(design.depth)?;
    let cylinder_vm = cylinder_max_vm(pressure, design.radius, design.thickness)?;
    let sphere_vm = sphere_max_vm(pressure, design.radius, design.thickness)?;
    Ok(StressResult {
        pressure,
        cylinder_vm,
        sphere_vm,
        max_vm: cylinder_vm.max(sphere_vm),
    })
}

/// Integrity check: does the design hold `safety_factor` times its peak
/// stress below the material yield strength?
pub fn is_feasible(design: &DesignPoint, material: &Material, safety_factor: f64) -> Result<bool> {
    material.validate()?;
    if !(safety_factor.is_finite() && safety_factor >= 1.0) {
        return Err(Error::domain(format!(
            "safety factor must be finite and >= 1, got {safety_factor}"
        )));
    }
    let stress = max_vm_stress(design)?;
    Ok(stress.max_vm * safety_factor < material.yield_strength)
}

//! Imaging geometry and atmospheric attenuation.
//!
//! A thin lens focused at the object plane fixes the sensor distance; objects
//! at other depths (raindrops) project with scale `s_i / z`. Attenuation
//! follows the single-scattering exponential `exp(-beta * z)`, and a rainy
//! observation of a clean scene is the usual haze composition
//! `mu * B + (1 - mu) * L` with airlight `L`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Result};
use crate::imgio::Image;

/// Thin-lens camera: object distance, image distance, focal length (all in
/// meters) and the sensor pixel pitch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticsParams {
    pub s_o: f64,
    pub s_i: f64,
    pub f: f64,
    pub pixel_pitch: f64,
}

/// Relative tolerance for the thin-lens identity check in [`OpticsParams::new`].
pub const THIN_LENS_REL_TOL: f64 = 1e-9;

impl OpticsParams {
    /// Validates positivity and the thin-lens relation
    /// `1/s_o + 1/s_i = 1/f` to within [`THIN_LENS_REL_TOL`].
    pub fn new(s_o: f64, s_i: f64, f: f64, pixel_pitch: f64) -> Result<OpticsParams> {
        ensure_arg!(f.is_finite() && f > 0.0, "focal length must be positive");
        ensure_arg!(s_o.is_finite() && s_o > f, "object distance must exceed the focal length");
        ensure_arg!(s_i.is_finite() && s_i > 0.0, "image distance must be positive");
        ensure_arg!(
            pixel_pitch.is_finite() && pixel_pitch > 0.0,
            "pixel pitch must be positive"
        );
        let residual = (1.0 / s_o + 1.0 / s_i - 1.0 / f).abs() * f;
        ensure_arg!(
            residual <= THIN_LENS_REL_TOL,
            "thin-lens relation violated: relative residual {residual:e}"
        );
        Ok(OpticsParams {
            s_o,
            s_i,
            f,
            pixel_pitch,
        })
    }

    /// Camera focused at `s_o`: the image distance follows from the lens
    /// equation.
    pub fn focused(s_o: f64, f: f64, pixel_pitch: f64) -> Result<OpticsParams> {
        ensure_arg!(f.is_finite() && f > 0.0, "focal length must be positive");
        ensure_arg!(
            s_o.is_finite() && s_o > f,
            "object distance {s_o} must exceed the focal length {f}"
        );
        let s_i = 1.0 / (1.0 / f - 1.0 / s_o);
        OpticsParams::new(s_o, s_i, f, pixel_pitch)
    }

    /// Lateral magnification of the focused object plane.
    pub fn magnification(&self) -> f64 {
        self.s_i / self.s_o
    }

    /// Projected scale of an object at depth `z > 0`: the image-plane size of
    /// a unit object there. Out-of-focus depths are projected geometrically.
    pub fn magnification_at(&self, z: f64) -> f64 {
        debug_assert!(z > 0.0);
        self.s_i / z
    }
}

/// Homogeneous atmosphere between camera and scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereParams {
    /// Extinction coefficient, 1/m.
    pub beta: f64,
    /// Airlight radiance the attenuated scene blends toward.
    pub airlight: f64,
    /// Depth of the scene, m.
    pub z_object: f64,
}

impl AtmosphereParams {
    pub fn validate(&self) -> Result<()> {
        ensure_arg!(self.beta.is_finite() && self.beta >= 0.0, "beta must be non-negative");
        ensure_arg!(
            self.airlight.is_finite() && self.airlight >= 0.0,
            "airlight must be non-negative"
        );
        ensure_arg!(
            self.z_object.is_finite() && self.z_object > 0.0,
            "object depth must be positive"
        );
        Ok(())
    }
}

/// Fraction of scene radiance surviving a path of length `z`.
pub fn transmittance(z: f64, beta: f64) -> Result<f64> {
    ensure_arg!(z.is_finite() && z >= 0.0, "path length must be non-negative");
    ensure_arg!(beta.is_finite() && beta >= 0.0, "beta must be non-negative");
    Ok((-beta * z).exp())
}

/// Expected rainy radiance of a clean scene: `mu * B + (1 - mu) * L` with
/// `mu = transmittance(z_object, beta)`. The peak is carried over from the
/// clean image; samples may exceed it when the airlight does.
pub fn compose_clean_expected(clean: &Image, atm: &AtmosphereParams) -> Result<Image> {
    atm.validate()?;
    let mu = transmittance(atm.z_object, atm.beta)?;
    clean.map(clean.peak(), |b| mu * b + (1.0 - mu) * atm.airlight)
}

/// Which visual regime a raindrop at depth `z` falls in, split at `z_m`:
/// closer drops resolve as streaks, farther ones blur into fog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropRegime {
    Streak,
    Fog,
}

pub fn classify_drop_regime(z: f64, z_m: f64) -> DropRegime {
    debug_assert!(z > 0.0 && z_m > 0.0);
    if z < z_m {
        DropRegime::Streak
    } else {
        DropRegime::Fog
    }
}

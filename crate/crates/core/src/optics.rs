//! Optical design calculator for the imaging unit.
//!
//! Lengths are carried internally in micrometers; the public functions accept and
//! return the units named in their signatures (millimeters for object-side sizes and
//! depth of field, micrometers for chip-side sizes, seconds, meters per second).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// First-minimum Airy disk diameter factor (2 × 1.22).
pub const AIRY_FACTOR: f64 = 2.44;

/// Green light, peak of the photopic response.
pub const DEFAULT_WAVELENGTH_UM: f64 = 0.55;
/// IMX477 datasheet pixel pitch.
pub const IMX477_PIXEL_PITCH_UM: f64 = 1.55;
/// Effective pitch that turns a 25 µm chip-side streak into 13 pixels.
pub const EFFECTIVE_PIXEL_PITCH_UM: f64 = 1.92;
/// Active sensor width used for the default magnification.
pub const DEFAULT_SENSOR_WIDTH_MM: f64 = 6.287;
pub const DEFAULT_FOV_WIDTH_MM: f64 = 60.0;
pub const DEFAULT_APERTURE: f64 = 8.0;
pub const DEFAULT_FLASH_S: f64 = 500e-6;
pub const DEFAULT_EXPOSURE_S: f64 = 23.5e-3;
/// Fast-crawling ant, the worst case for flash blur.
pub const DEFAULT_INSECT_SPEED_MPS: f64 = 0.5;

const UM_PER_MM: f64 = 1000.0;
const UM_PER_M: f64 = 1.0e6;

#[derive(Debug, Error, PartialEq)]
pub enum OpticsError {
    #[error("{name} must be strictly positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("field of view ({fov} mm) must exceed the sensor width ({sensor} mm)")]
    NotDemagnifying { sensor: f64, fov: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<f64, OpticsError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(OpticsError::NonPositive { name, value })
    }
}

/// Camera and illumination parameters.
///
/// `circle_of_confusion` may be omitted, in which case the diffraction-limited value
/// (the Airy diameter for `wavelength` and `aperture_number`) is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticalConfig {
    /// f-number N.
    pub aperture_number: f64,
    /// µm.
    pub wavelength: f64,
    /// µm.
    pub pixel_pitch: f64,
    /// mm.
    pub sensor_width: f64,
    /// mm.
    pub fov_width: f64,
    /// µm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circle_of_confusion: Option<f64>,
    /// s.
    pub flash_duration: f64,
    /// s.
    pub exposure_time: f64,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self {
            aperture_number: DEFAULT_APERTURE,
            wavelength: DEFAULT_WAVELENGTH_UM,
            pixel_pitch: IMX477_PIXEL_PITCH_UM,
            sensor_width: DEFAULT_SENSOR_WIDTH_MM,
            fov_width: DEFAULT_FOV_WIDTH_MM,
            circle_of_confusion: None,
            flash_duration: DEFAULT_FLASH_S,
            exposure_time: DEFAULT_EXPOSURE_S,
        }
    }
}

impl OpticalConfig {
    pub fn validate(&self) -> Result<(), OpticsError> {
        positive("aperture_number", self.aperture_number)?;
        positive("wavelength", self.wavelength)?;
        positive("pixel_pitch", self.pixel_pitch)?;
        positive("sensor_width", self.sensor_width)?;
        positive("fov_width", self.fov_width)?;
        if let Some(c) = self.circle_of_confusion {
            positive("circle_of_confusion", c)?;
        }
        positive("flash_duration", self.flash_duration)?;
        positive("exposure_time", self.exposure_time)?;
        if self.fov_width <= self.sensor_width {
            return Err(OpticsError::NotDemagnifying {
                sensor: self.sensor_width,
                fov: self.fov_width,
            });
        }
        Ok(())
    }

    /// Circle of confusion in µm, falling back to the Airy diameter.
    pub fn effective_circle_of_confusion(&self) -> Result<f64, OpticsError> {
        match self.circle_of_confusion {
            Some(c) => positive("circle_of_confusion", c),
            None => airy_disk_diameter(self.wavelength, self.aperture_number),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticsReport {
    pub magnification: f64,
    /// µm on the chip.
    pub airy_diameter_chip: f64,
    /// mm.
    pub depth_of_field: f64,
    /// mm traveled by the insect during the flash.
    pub blur_object: f64,
    /// µm on the chip.
    pub blur_chip: f64,
    pub blur_pixels: f64,
    pub blur_to_diffraction_ratio: f64,
}

/// Sensor-side size over object-side size.
pub fn magnification(sensor_width_mm: f64, fov_width_mm: f64) -> Result<f64, OpticsError> {
    let s = positive("sensor_width", sensor_width_mm)?;
    let f = positive("fov_width", fov_width_mm)?;
    Ok(s / f)
}

/// First-minimum Airy disk diameter on the chip, in µm.
pub fn airy_disk_diameter(wavelength_um: f64, aperture_number: f64) -> Result<f64, OpticsError> {
    let l = positive("wavelength", wavelength_um)?;
    let n = positive("aperture_number", aperture_number)?;
    Ok(AIRY_FACTOR * l * n)
}

/// Thin-lens total depth of field `2·N·c·(1+m)/m²`, in mm.
pub fn depth_of_field(
    aperture_number: f64,
    circle_of_confusion_um: f64,
    magnification: f64,
) -> Result<f64, OpticsError> {
    let n = positive("aperture_number", aperture_number)?;
    let c = positive("circle_of_confusion", circle_of_confusion_um)?;
    let m = positive("magnification", magnification)?;
    let dof_um = 2.0 * n * c * (1.0 + m) / (m * m);
    Ok(dof_um / UM_PER_MM)
}

/// Streak length of an insect moving at `speed_mps` during one flash.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionBlur {
    /// mm.
    pub blur_object: f64,
    /// µm.
    pub blur_chip: f64,
    pub blur_pixels: f64,
}

pub fn motion_blur(
    speed_mps: f64,
    flash_duration_s: f64,
    magnification: f64,
    pixel_pitch_um: f64,
) -> Result<MotionBlur, OpticsError> {
    let v = positive("speed", speed_mps)?;
    let t = positive("flash_duration", flash_duration_s)?;
    let m = positive("magnification", magnification)?;
    let p = positive("pixel_pitch", pixel_pitch_um)?;
    let object_um = v * t * UM_PER_M;
    let chip_um = object_um * m;
    Ok(MotionBlur {
        blur_object: object_um / UM_PER_MM,
        blur_chip: chip_um,
        blur_pixels: chip_um / p,
    })
}

/// Evaluates every design quantity for `config` and an insect moving at `insect_speed_mps`.
pub fn design_report(config: &OpticalConfig, insect_speed_mps: f64) -> Result<OpticsReport, OpticsError> {
    config.validate()?;
    let m = magnification(config.sensor_width, config.fov_width)?;
    let airy = airy_disk_diameter(config.wavelength, config.aperture_number)?;
    let coc = config.effective_circle_of_confusion()?;
    let dof = depth_of_field(config.aperture_number, coc, m)?;
    let blur = motion_blur(insect_speed_mps, config.flash_duration, m, config.pixel_pitch)?;
    Ok(OpticsReport {
        magnification: m,
        airy_diameter_chip: airy,
        depth_of_field: dof,
        blur_object: blur.blur_object,
        blur_chip: blur.blur_chip,
        blur_pixels: blur.blur_pixels,
        blur_to_diffraction_ratio: blur.blur_chip / airy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn magnification_examples() {
        assert!(close(magnification(6.0, 60.0).unwrap(), 0.1, 1e-15));
        assert_eq!(magnification(60.0, 60.0).unwrap(), 1.0);
        assert!(close(magnification(6.287, 60.0).unwrap(), 0.104_783_333_333, 1e-9));
        assert!(magnification(0.0, 60.0).is_err());
        assert!(magnification(6.0, -1.0).is_err());
    }

    #[test]
    fn airy_examples() {
        assert!(close(airy_disk_diameter(0.55, 8.0).unwrap(), 10.736, 1e-12));
        assert!(close(airy_disk_diameter(0.55, 4.0).unwrap(), 5.368, 1e-12));
        let tiny = airy_disk_diameter(0.55, 1e-9).unwrap();
        assert!(tiny < 1e-8);
        assert!(airy_disk_diameter(0.0, 8.0).is_err());
    }

    #[test]
    fn airy_is_linear() {
        for &(l, n) in &[(0.4, 2.8), (0.55, 8.0), (0.7, 16.0)] {
            let base = airy_disk_diameter(l, n).unwrap();
            assert_eq!(airy_disk_diameter(2.0 * l, n).unwrap(), 2.0 * base);
            assert_eq!(airy_disk_diameter(l, 2.0 * n).unwrap(), 2.0 * base);
        }
    }

    #[test]
    fn dof_examples() {
        assert!(close(depth_of_field(8.0, 10.0, 0.105).unwrap(), 16.03, 0.05));
        assert!(close(depth_of_field(8.0, 10.0, 1.0).unwrap(), 0.32, 1e-12));
        let a = depth_of_field(8.0, 10.0, 0.2).unwrap();
        let b = depth_of_field(8.0, 20.0, 0.2).unwrap();
        assert!(close(b, 2.0 * a, 1e-12));
        assert!(depth_of_field(8.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn dof_strictly_decreasing_in_magnification() {
        let ms: Vec<f64> = (1..=100).map(|i| i as f64 * 0.02).collect();
        let dofs: Vec<f64> = ms.iter().map(|&m| depth_of_field(8.0, 10.0, m).unwrap()).collect();
        assert!(dofs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn motion_blur_examples() {
        let b = motion_blur(0.5, 500e-6, 0.1, 1.92).unwrap();
        assert!(close(b.blur_object, 0.25, 1e-12));
        assert!(close(b.blur_chip, 25.0, 1e-9));
        assert!(close(b.blur_pixels, 13.0, 0.1));
        assert!(motion_blur(0.0, 500e-6, 0.1, 1.92).is_err());
        let short = motion_blur(0.5, 1e-12, 0.1, 1.92).unwrap();
        assert!(short.blur_chip < 1e-6);
    }

    #[test]
    fn motion_blur_unit_bridge() {
        for &(v, t, m) in &[(0.5, 500e-6, 0.1), (0.03, 1e-3, 0.37), (2.0, 1e-5, 0.9)] {
            let b = motion_blur(v, t, m, 1.55).unwrap();
            let bridged = b.blur_object * m * 1000.0;
            assert!((b.blur_chip - bridged).abs() <= 1e-12 * b.blur_chip);
        }
    }

    #[test]
    fn report_matches_standalone_operations() {
        let cfg = OpticalConfig::default();
        let r = design_report(&cfg, 0.5).unwrap();
        let m = magnification(cfg.sensor_width, cfg.fov_width).unwrap();
        let airy = airy_disk_diameter(cfg.wavelength, cfg.aperture_number).unwrap();
        assert_eq!(r.magnification, m);
        assert_eq!(r.airy_diameter_chip, airy);
        assert_eq!(r.depth_of_field, depth_of_field(8.0, airy, m).unwrap());
        let b = motion_blur(0.5, cfg.flash_duration, m, cfg.pixel_pitch).unwrap();
        assert_eq!(r.blur_chip, b.blur_chip);
        assert!((r.blur_to_diffraction_ratio - r.blur_chip / r.airy_diameter_chip).abs() <= 1e-9 * r.blur_to_diffraction_ratio);
        assert!((2.3..=2.5).contains(&r.blur_to_diffraction_ratio));
        assert_eq!(design_report(&cfg, 0.5).unwrap(), r);
    }

    #[test]
    fn ratio_is_one_when_blur_equals_airy() {
        let cfg = OpticalConfig::default();
        let m = magnification(cfg.sensor_width, cfg.fov_width).unwrap();
        let airy = airy_disk_diameter(cfg.wavelength, cfg.aperture_number).unwrap();
        // blur_chip = v·t·1e6·m = airy
        let v = airy / (cfg.flash_duration * 1.0e6 * m);
        let r = design_report(&cfg, v).unwrap();
        assert!(close(r.blur_to_diffraction_ratio, 1.0, 1e-12));
    }

    #[test]
    fn config_validation() {
        let cfg = OpticalConfig { fov_width: 5.0, ..OpticalConfig::default() };
        assert!(matches!(cfg.validate(), Err(OpticsError::NotDemagnifying { .. })));
        let cfg = OpticalConfig { exposure_time: 0.0, ..OpticalConfig::default() };
        assert!(cfg.validate().is_err());
        let json = r#"{"aperture_number": 4.0}"#;
        let cfg: OpticalConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.aperture_number, 4.0);
        assert_eq!(cfg.fov_width, 60.0);
    }
}

//! Image container and the file formats the toolkit reads and writes.
//!
//! Pixel data lives in `f64` regardless of on-disk depth so that photon
//! counts, radiance, and statistics all share one type. Quantization happens
//! only at the PGM boundary.

pub mod csv;
pub mod pgm;
pub mod svg;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Result};

/// A grayscale image: row-major `f64` samples plus the nominal dynamic-range
/// peak used for encoding and for peak-referenced metrics.
///
/// Values are finite and non-negative. They may exceed `peak` in memory
/// (intermediate results often do); only encoding to PGM enforces the range.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    peak: f64,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, peak: f64, data: Vec<f64>) -> Result<Self> {
        ensure_arg!(width > 0 && height > 0, "image dimensions must be positive");
        ensure_arg!(
            peak.is_finite() && peak > 0.0,
            "image peak must be positive and finite, got {peak}"
        );
        ensure_arg!(
            data.len() == width * height,
            "pixel buffer has {} samples, expected {}",
            data.len(),
            width * height
        );
        for (i, &v) in data.iter().enumerate() {
            ensure_arg!(
                v.is_finite() && v >= 0.0,
                "pixel {i} is {v}; samples must be finite and non-negative"
            );
        }
        Ok(Image {
            width,
            height,
            peak,
            data,
        })
    }

    /// All-zero image.
    pub fn zeros(width: usize, height: usize, peak: f64) -> Result<Self> {
        Image::new(width, height, peak, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn pixel_count(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Sample at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Returns a copy with every sample passed through `f` and the given peak.
    /// The result must still satisfy the finite/non-negative invariant.
    pub fn map(&self, peak: f64, f: impl Fn(f64) -> f64) -> Result<Image> {
        Image::new(
            self.width,
            self.height,
            peak,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// Describes a frame stack on disk: which PGM files belong to it and the
/// timing of the acquisition. Written next to the frames as `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StackManifest {
    /// Frame file names, ordered, relative to the manifest's directory.
    pub frames: Vec<String>,
    /// Integration (exposure) time per frame, ms.
    pub integration_time_ms: f64,
    /// Start-to-start interval between consecutive frames, ms.
    pub measurement_interval_ms: f64,
    /// Seed the stack was synthesized from.
    pub seed: u64,
    /// Optional path of the rain-free reference the scene was built from.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub clean_reference: Option<String>,
}

impl StackManifest {
    pub fn validate(&self) -> Result<()> {
        ensure_arg!(self.frames.len() >= 2, "a stack needs at least 2 frames");
        ensure_arg!(
            self.integration_time_ms.is_finite() && self.integration_time_ms > 0.0,
            "integration_time_ms must be positive"
        );
        ensure_arg!(
            self.measurement_interval_ms >= self.integration_time_ms,
            "measurement_interval_ms {} is shorter than integration_time_ms {}; frames would overlap",
            self.measurement_interval_ms,
            self.integration_time_ms
        );
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<StackManifest> {
        let text = std::fs::read_to_string(path)?;
        let manifest: StackManifest = serde_json::from_str(&text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    /// Frame paths resolved against the manifest's own location.
    pub fn frame_paths(&self, manifest_path: &Path) -> Vec<PathBuf> {
        let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        self.frames.iter().map(|f| dir.join(f)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_bad_shapes_and_samples() {
        assert!(Image::new(0, 4, 255.0, vec![]).is_err());
        assert!(Image::new(2, 2, 255.0, vec![0.0; 3]).is_err());
        assert!(Image::new(2, 2, 0.0, vec![0.0; 4]).is_err());
        assert!(Image::new(2, 2, 255.0, vec![0.0, 1.0, -0.5, 2.0]).is_err());
        assert!(Image::new(2, 2, 255.0, vec![0.0, 1.0, f64::NAN, 2.0]).is_err());
    }

    #[test]
    fn indexing_is_row_major() {
        let img = Image::new(3, 2, 255.0, vec![0., 1., 2., 3., 4., 5.]).unwrap();
        assert_eq!(img.get(2, 0), 2.0);
        assert_eq!(img.get(0, 1), 3.0);
    }

    #[test]
    fn manifest_round_trips_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let m = StackManifest {
            frames: vec!["frame_0000.pgm".into(), "frame_0001.pgm".into()],
            integration_time_ms: 20.0,
            measurement_interval_ms: 33.0,
            seed: 42,
            clean_reference: None,
        };
        m.save(&path).unwrap();
        let back = StackManifest::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.frame_paths(&path)[1], dir.path().join("frame_0001.pgm"));

        let overlap = StackManifest {
            measurement_interval_ms: 10.0,
            ..m.clone()
        };
        assert!(overlap.validate().is_err());
        let short = StackManifest {
            frames: vec!["a.pgm".into()],
            ..m
        };
        assert!(short.validate().is_err());
    }
}

//! Reconstruction engines: temporal fluctuation-correlation deraining plus
//! mean and median baselines behind one interface.
//!
//! The core estimator exploits a timing asymmetry: over exposures longer than
//! the rain's correlation time, the scene's photon stream keeps a stable
//! second-order temporal correlation while rain-induced photon numbers
//! decorrelate between consecutive measurements. Per pixel we keep the raw
//! lag-1 product and subtract an estimate of the excess fluctuation power, so
//! the stable component survives and the fluctuating rain terms cancel.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Error, Result};
use crate::imgio::Image;
use crate::parallel;
use crate::rainsim::FrameStack;

/// Per-pixel temporal statistics of a frame stack.
///
/// All vectors are row-major over pixels. With `x_1..x_N` the samples of one
/// pixel and `x̄` their mean:
///
/// - `lag1`     = Σ x_k·x_{k+1} / (N−1), the raw consecutive-pair product
/// - `autocov1` = Σ (x_k−x̄)(x_{k+1}−x̄) / (N−1), its fluctuation part
/// - `variance` = Σ (x_k−x̄)² / (N−1), unbiased
/// - `end_correction` = x̄·(2x̄ − x_1 − x_N) / (N−1)
///
/// which satisfy `lag1 = autocov1 + x̄² + end_correction` up to float
/// rounding; the correction accounts for the first and last sample entering
/// half as many pairs as interior ones.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    width: usize,
    height: usize,
    n_frames: usize,
    pub mean: Vec<f64>,
    pub lag1: Vec<f64>,
    pub autocov1: Vec<f64>,
    pub variance: Vec<f64>,
    pub end_correction: Vec<f64>,
}

impl CorrelationMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }
}

/// Which reconstruction an operation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Pnfc,
    Mean,
    Median,
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Pnfc => "pnfc",
            Estimator::Mean => "mean",
            Estimator::Median => "median",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Estimator> {
        match s {
            "pnfc" => Ok(Estimator::Pnfc),
            "mean" => Ok(Estimator::Mean),
            "median" => Ok(Estimator::Median),
            other => Err(Error::argument(format!(
                "unknown estimator {other:?}; expected pnfc, mean, or median"
            ))),
        }
    }
}

/// Reconstruction knobs. JSON fields mirror the struct; omitted fields take
/// the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerainConfig {
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    /// Suppression strength: how much of the excess fluctuation estimate is
    /// subtracted from the lag-1 product.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Deduct the Poisson shot-noise floor (the temporal mean) from the
    /// variance before subtracting, so bright but stable pixels keep their
    /// photon noise without being dimmed.
    #[serde(default = "default_true")]
    pub shot_noise_compensation: bool,
    /// Rescale the output so its global mean matches the stack's global
    /// mean. Off by default: the estimator's slightly darker output is the
    /// faithful result, the gain exists for metric fairness studies.
    #[serde(default)]
    pub gain_correction: bool,
}

fn default_estimator() -> Estimator {
    Estimator::Pnfc
}

fn default_kappa() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl Default for DerainConfig {
    fn default() -> Self {
        DerainConfig {
            estimator: Estimator::Pnfc,
            kappa: 1.0,
            shot_noise_compensation: true,
            gain_correction: false,
        }
    }
}

impl DerainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_arg!(
            self.kappa.is_finite() && self.kappa >= 0.0,
            "kappa must be non-negative, got {}",
            self.kappa
        );
        Ok(())
    }

    pub fn load(path: &Path) -> Result<DerainConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: DerainConfig = serde_json::from_str(&text)
            .map_err(|e| Error::argument(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }
}

struct PixelStats {
    mean: f64,
    lag1: f64,
    autocov1: f64,
    variance: f64,
    end_correction: f64,
}

/// Two-pass per-pixel statistics in a fixed frame order.
fn pixel_stats(frames: &[Image], i: usize) -> PixelStats {
    let n = frames.len();
    let mut sum = 0.0;
    for f in frames {
        sum += f.data()[i];
    }
    let mean = sum / n as f64;

    let mut prod = 0.0;
    let mut cprod = 0.0;
    let mut css = 0.0;
    let mut prev = frames[0].data()[i];
    let mut prev_c = prev - mean;
    css += prev_c * prev_c;
    for f in &frames[1..] {
        let x = f.data()[i];
        let c = x - mean;
        prod += prev * x;
        cprod += prev_c * c;
        css += c * c;
        prev = x;
        prev_c = c;
    }

    let pairs = (n - 1) as f64;
    let first = frames[0].data()[i];
    let last = frames[n - 1].data()[i];
    PixelStats {
        mean,
        lag1: prod / pairs,
        autocov1: cprod / pairs,
        variance: css / pairs,
        end_correction: mean * (2.0 * mean - first - last) / pairs,
    }
}

/// Per-pixel temporal statistics of the stack. Needs at least 3 frames so
/// the fluctuation statistics have a degree of freedom beyond the pairing.
pub fn correlation_map(stack: &FrameStack) -> Result<CorrelationMap> {
    stack.validate()?;
    ensure_arg!(
        stack.n_frames() >= 3,
        "correlation statistics need at least 3 frames, got {}",
        stack.n_frames()
    );
    let npix = stack.width() * stack.height();
    let stats = parallel::map_indexed(npix, |i| pixel_stats(&stack.frames, i));

    let mut map = CorrelationMap {
        width: stack.width(),
        height: stack.height(),
        n_frames: stack.n_frames(),
        mean: Vec::with_capacity(npix),
        lag1: Vec::with_capacity(npix),
        autocov1: Vec::with_capacity(npix),
        variance: Vec::with_capacity(npix),
        end_correction: Vec::with_capacity(npix),
    };
    for s in stats {
        map.mean.push(s.mean);
        map.lag1.push(s.lag1);
        map.autocov1.push(s.autocov1);
        map.variance.push(s.variance);
        map.end_correction.push(s.end_correction);
    }
    Ok(map)
}

/// Fluctuation-suppressed reconstruction.
///
/// Per pixel: `V_excess = max(0, variance − shot_floor)` with the shot floor
/// equal to the temporal mean when compensation is on and zero otherwise;
/// the output is `sqrt(max(0, lag1 − kappa·V_excess))`. Stable photon
/// streams pass through unchanged; fluctuating contributions inflate the
/// variance and are cancelled out of the pair product. After optional global
/// gain correction, values are clipped to `[0, peak]`.
pub fn pnfc_reconstruct(stack: &FrameStack, config: &DerainConfig) -> Result<Image> {
    config.validate()?;
    let map = correlation_map(stack)?;
    let npix = map.mean.len();
    let mut values = Vec::with_capacity(npix);
    for i in 0..npix {
        let shot_floor = if config.shot_noise_compensation {
            map.mean[i]
        } else {
            0.0
        };
        let v_excess = (map.variance[i] - shot_floor).max(0.0);
        values.push((map.lag1[i] - config.kappa * v_excess).max(0.0).sqrt());
    }

    if config.gain_correction {
        let target: f64 = map.mean.iter().sum::<f64>() / npix as f64;
        let actual: f64 = values.iter().sum::<f64>() / npix as f64;
        if actual > 0.0 {
            let gain = target / actual;
            for v in &mut values {
                *v *= gain;
            }
        }
    }

    let peak = stack.peak();
    for v in &mut values {
        *v = v.clamp(0.0, peak);
    }
    Image::new(stack.width(), stack.height(), peak, values)
}

/// Per-pixel temporal mean.
pub fn baseline_mean(stack: &FrameStack) -> Result<Image> {
    ensure_arg!(!stack.frames.is_empty(), "mean of an empty stack");
    let n = stack.frames.len() as f64;
    let npix = stack.width() * stack.height();
    let values = parallel::map_indexed(npix, |i| {
        stack.frames.iter().map(|f| f.data()[i]).sum::<f64>() / n
    });
    Image::new(stack.width(), stack.height(), stack.peak(), values)
}

/// Per-pixel temporal median; the lower of the two middle values when the
/// frame count is even, so integer stacks stay integer.
pub fn baseline_median(stack: &FrameStack) -> Result<Image> {
    ensure_arg!(!stack.frames.is_empty(), "median of an empty stack");
    let n = stack.frames.len();
    let npix = stack.width() * stack.height();
    let values = parallel::map_indexed(npix, |i| {
        let mut series: Vec<f64> = stack.frames.iter().map(|f| f.data()[i]).collect();
        series.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        series[(n - 1) / 2]
    });
    Image::new(stack.width(), stack.height(), stack.peak(), values)
}

/// Runs the estimator selected by the config.
pub fn reconstruct(stack: &FrameStack, config: &DerainConfig) -> Result<Image> {
    match config.estimator {
        Estimator::Pnfc => pnfc_reconstruct(stack, config),
        Estimator::Mean => baseline_mean(stack),
        Estimator::Median => baseline_median(stack),
    }
}

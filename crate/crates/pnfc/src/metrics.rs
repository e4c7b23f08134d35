//! Full-reference image quality metrics and the sweep report row they feed.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Result};
use crate::imgio::csv::{CsvValue, Table};
use crate::imgio::Image;
use crate::parallel;

/// Cap reported for zero-error pairs, and ceiling for all PSNR values, dB.
/// Keeps CSV columns and plots finite.
pub const PSNR_CAP_DB: f64 = 99.0;

/// SSIM window edge, pixels. Uniform weights over the window.
pub const SSIM_WINDOW: usize = 8;

/// Peak signal-to-noise ratio in dB: `10·log10(peak² / MSE)`, clamped to
/// `[0, PSNR_CAP_DB]`. Identical images report the cap exactly.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    ensure_arg!(a.same_shape(b), "psnr inputs differ in shape");
    ensure_arg!(peak.is_finite() && peak > 0.0, "psnr peak must be positive");
    let n = a.data().len() as f64;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).clamp(0.0, PSNR_CAP_DB))
}

/// Mean structural similarity over all 8×8 uniform-weight windows at stride
/// one, with the conventional stabilizers `C1 = (0.01·peak)²` and
/// `C2 = (0.03·peak)²`. Symmetric, and exactly 1 for identical images.
pub fn ssim(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    ensure_arg!(a.same_shape(b), "ssim inputs differ in shape");
    ensure_arg!(peak.is_finite() && peak > 0.0, "ssim peak must be positive");
    ensure_arg!(
        a.width() >= SSIM_WINDOW && a.height() >= SSIM_WINDOW,
        "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images, got {}x{}",
        a.width(),
        a.height()
    );
    let c1 = (0.01 * peak) * (0.01 * peak);
    let c2 = (0.03 * peak) * (0.03 * peak);
    let (width, height) = (a.width(), a.height());
    let (wx, wy) = (width - SSIM_WINDOW + 1, height - SSIM_WINDOW + 1);
    let npix = (SSIM_WINDOW * SSIM_WINDOW) as f64;

    let window_values = parallel::map_indexed(wx * wy, |w| {
        let (x0, y0) = (w % wx, w / wx);
        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        for dy in 0..SSIM_WINDOW {
            let row = (y0 + dy) * width + x0;
            for dx in 0..SSIM_WINDOW {
                sum_a += a.data()[row + dx];
                sum_b += b.data()[row + dx];
            }
        }
        let mu_a = sum_a / npix;
        let mu_b = sum_b / npix;
        let mut var_a = 0.0;
        let mut var_b = 0.0;
        let mut cov = 0.0;
        for dy in 0..SSIM_WINDOW {
            let row = (y0 + dy) * width + x0;
            for dx in 0..SSIM_WINDOW {
                let da = a.data()[row + dx] - mu_a;
                let db = b.data()[row + dx] - mu_b;
                var_a += da * da;
                var_b += db * db;
                cov += da * db;
            }
        }
        var_a /= npix;
        var_b /= npix;
        cov /= npix;
        ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
            / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
    });

    Ok(window_values.iter().sum::<f64>() / window_values.len() as f64)
}

/// One sweep measurement: quality of one estimator's reconstruction under
/// one (integration time, seed) condition, with the single-frame quality of
/// the same rainy stack carried alongside as the reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub t_ms: f64,
    pub n_frames: usize,
    pub estimator: String,
    pub seed: u64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub rainy_psnr_db: f64,
    pub rainy_ssim: f64,
}

impl QualityRow {
    pub fn validate(&self) -> Result<()> {
        ensure_arg!(
            (-1.0..=1.0).contains(&self.ssim) && (-1.0..=1.0).contains(&self.rainy_ssim),
            "ssim out of [-1, 1]"
        );
        ensure_arg!(
            (0.0..=PSNR_CAP_DB).contains(&self.psnr_db)
                && (0.0..=PSNR_CAP_DB).contains(&self.rainy_psnr_db),
            "psnr out of [0, cap]"
        );
        Ok(())
    }
}

/// Renders rows into the sweep CSV table.
pub fn quality_table(rows: &[QualityRow]) -> Result<Table> {
    let mut table = Table::new([
        "t_ms",
        "n_frames",
        "estimator",
        "seed",
        "psnr_db",
        "ssim",
        "rainy_psnr_db",
        "rainy_ssim",
    ])?;
    for row in rows {
        row.validate()?;
        table.push_row(vec![
            CsvValue::from(row.t_ms),
            CsvValue::from(row.n_frames),
            CsvValue::from(row.estimator.as_str()),
            CsvValue::from(row.seed),
            CsvValue::from(row.psnr_db),
            CsvValue::from(row.ssim),
            CsvValue::from(row.rainy_psnr_db),
            CsvValue::from(row.rainy_ssim),
        ])?;
    }
    Ok(table)
}

//! Experiment orchestration: fluctuation demos, integration-time sweeps,
//! and curve-crossing detection over the sweep reports.
//!
//! Conventions shared by all experiments:
//!
//! - The measurement interval is `max(T, 33 ms)`: a video camera paces
//!   frames at ~30 Hz, and longer exposures stretch the interval with them,
//!   keeping interval ≥ exposure physically valid.
//! - The transmittance jitter is rescaled per exposure
//!   ([`RainParams::with_jitter_for_exposure`]): longer integration averages
//!   more drop transits, so per-frame fog fluctuation power falls as `1/T`.
//! - Frames are photon counts, proportional to exposure. Before comparing
//!   against the clean reference (or across exposures), frames are divided
//!   by `T` back into per-millisecond radiance units, and quality metrics
//!   use the clean image's peak.

use std::path::Path;

use crate::derain::{self, DerainConfig, Estimator};
use crate::error::{ensure_arg, Error, Result};
use crate::imgio::csv::{CsvValue, Table};
use crate::imgio::svg::{write_svg_chart, Series};
use crate::imgio::{pgm, Image};
use crate::metrics::{psnr, quality_table, ssim, QualityRow};
use crate::parallel;
use crate::rainsim::{synth_from_config, SynthConfig};

/// Frame interval for a given exposure: video-rate pacing, stretched when
/// the exposure itself is longer than a 30 Hz slot.
pub fn measurement_interval_ms(t_ms: f64) -> f64 {
    t_ms.max(33.0)
}

/// Scales a count frame back to per-millisecond radiance units, carrying
/// the given peak. Values are not clipped.
pub fn normalize_exposure(frame: &Image, t_ms: f64, peak: f64) -> Result<Image> {
    frame.map(peak, |v| v / t_ms)
}

/// Deterministic synthetic target: a horizontal ramp with a bright and a
/// dark disk, a bar grating, and a diagonal highlight. Integer values in
/// [30, 235], so count synthesis at integer exposures stays exact.
pub fn test_scene(width: usize, height: usize) -> Result<Image> {
    ensure_arg!(width >= 16 && height >= 16, "test scene needs at least 16x16");
    let (wf, hf) = (width as f64, height as f64);
    let radius = wf.min(hf);
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (xf, yf) = (x as f64, y as f64);
            let mut v = 30.0 + (150.0 * xf / wf).floor();
            let d1 = (xf - 0.30 * wf).hypot(yf - 0.35 * hf);
            let d2 = (xf - 0.70 * wf).hypot(yf - 0.60 * hf);
            if d1 < 0.18 * radius {
                v = 220.0;
            } else if d2 < 0.15 * radius {
                v = 45.0;
            } else if yf >= 0.80 * hf && yf < 0.95 * hf {
                v = if (x / 8) % 2 == 0 { 60.0 } else { 200.0 };
            } else if xf + yf < 0.25 * (wf + hf) {
                v = (v + 35.0).min(235.0);
            }
            data.push(v);
        }
    }
    Image::new(width, height, 255.0, data)
}

/// A rectangular pixel region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl BlockSpec {
    /// 8×8 block at the image center.
    pub fn centered(image: &Image) -> BlockSpec {
        let side = 8usize.min(image.width()).min(image.height());
        BlockSpec {
            x: (image.width() - side) / 2,
            y: (image.height() - side) / 2,
            width: side,
            height: side,
        }
    }

    pub fn validate(&self, image: &Image) -> Result<()> {
        ensure_arg!(self.width >= 1 && self.height >= 1, "block must be non-empty");
        ensure_arg!(
            self.x + self.width <= image.width() && self.y + self.height <= image.height(),
            "block {}x{}+{}+{} falls outside the {}x{} image",
            self.width,
            self.height,
            self.x,
            self.y,
            image.width(),
            image.height()
        );
        Ok(())
    }

    fn crop(&self, image: &Image) -> Result<Image> {
        let mut data = Vec::with_capacity(self.width * self.height);
        for y in self.y..self.y + self.height {
            for x in self.x..self.x + self.width {
                data.push(image.get(x, y));
            }
        }
        Image::new(self.width, self.height, image.peak(), data)
    }

    fn mean(&self, image: &Image) -> f64 {
        let mut sum = 0.0;
        for y in self.y..self.y + self.height {
            for x in self.x..self.x + self.width {
                sum += image.get(x, y);
            }
        }
        sum / (self.width * self.height) as f64
    }
}

/// One consecutive-frame observation in a fluctuation demo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationRow {
    pub t_ms: f64,
    /// Index of the first frame of the pair.
    pub frame: usize,
    /// Block mean of that frame in per-millisecond radiance units.
    pub block_mean: f64,
    /// PSNR between the normalized frames `frame` and `frame + 1`.
    pub interframe_psnr_db: f64,
}

/// Demo images kept for one exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationImages {
    pub t_ms: f64,
    /// First synthesized frame, raw counts.
    pub frame: Image,
    /// The observed block cropped out of it.
    pub block: Image,
}

/// Output of [`fluctuation_demo`].
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationDemo {
    pub rows: Vec<FluctuationRow>,
    pub images: Vec<FluctuationImages>,
}

impl FluctuationDemo {
    /// Mean inter-frame PSNR for one exposure.
    pub fn mean_interframe_psnr(&self, t_ms: f64) -> Option<f64> {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.t_ms == t_ms)
            .map(|r| r.interframe_psnr_db)
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }
}

/// Shows the per-pixel photon-number fluctuation across consecutive frames
/// of one scene, per exposure: for each `T`, synthesizes `n_frames`, tracks
/// the block mean of every frame, and scores consecutive normalized frames
/// against each other. Longer exposures accumulate more photons per frame,
/// so their consecutive frames agree better.
pub fn fluctuation_demo(
    clean: &Image,
    config: &SynthConfig,
    t_values: &[f64],
    n_frames: usize,
    block: Option<BlockSpec>,
    seed: u64,
) -> Result<FluctuationDemo> {
    ensure_arg!(!t_values.is_empty(), "need at least one exposure");
    ensure_arg!(
        n_frames >= 2,
        "inter-frame statistics need at least 2 frames, got {n_frames}"
    );
    let block = block.unwrap_or_else(|| BlockSpec::centered(clean));
    block.validate(clean)?;

    let mut rows = Vec::new();
    let mut images = Vec::new();
    for &t_ms in t_values {
        let config_t = SynthConfig {
            rain: config.rain.with_jitter_for_exposure(t_ms),
            ..config.clone()
        };
        let out = synth_from_config(
            clean,
            &config_t,
            n_frames,
            t_ms,
            measurement_interval_ms(t_ms),
            seed,
        )?;
        let normalized: Vec<Image> = out
            .stack
            .frames
            .iter()
            .map(|f| normalize_exposure(f, t_ms, clean.peak()))
            .collect::<Result<_>>()?;
        for k in 0..n_frames - 1 {
            rows.push(FluctuationRow {
                t_ms,
                frame: k,
                block_mean: block.mean(&normalized[k]),
                interframe_psnr_db: psnr(&normalized[k], &normalized[k + 1], clean.peak())?,
            });
        }
        images.push(FluctuationImages {
            t_ms,
            frame: out.stack.frames[0].clone(),
            block: block.crop(&out.stack.frames[0])?,
        });
    }
    Ok(FluctuationDemo { rows, images })
}

/// Renders demo rows as CSV.
pub fn fluctuation_table(demo: &FluctuationDemo) -> Result<Table> {
    let mut table = Table::new(["t_ms", "frame", "block_mean", "interframe_psnr_db"])?;
    for row in &demo.rows {
        table.push_row(vec![
            CsvValue::from(row.t_ms),
            CsvValue::from(row.frame),
            CsvValue::from(row.block_mean),
            CsvValue::from(row.interframe_psnr_db),
        ])?;
    }
    Ok(table)
}

/// Writes `fluctuation.csv` plus the per-exposure demo PGMs into `dir`.
pub fn write_fluctuation_artifacts(demo: &FluctuationDemo, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    fluctuation_table(demo)?.write(&dir.join("fluctuation.csv"))?;
    for im in &demo.images {
        pgm::write_pgm(&im.frame, &dir.join(format!("frame_t{}.pgm", im.t_ms)))?;
        pgm::write_pgm(&im.block, &dir.join(format!("block_t{}.pgm", im.t_ms)))?;
    }
    Ok(())
}

/// One reconstructed image kept from a sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconImage {
    pub t_ms: f64,
    pub seed: u64,
    pub estimator: String,
    /// Normalized to the clean reference's units and peak.
    pub image: Image,
}

/// Output of [`sweep_integration_time`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<QualityRow>,
    pub recons: Vec<ReconImage>,
}

const SWEEP_ESTIMATORS: [Estimator; 3] = [Estimator::Pnfc, Estimator::Mean, Estimator::Median];

/// Synthesizes one stack per `(T, seed)` cell, reconstructs it with every
/// estimator, and scores each reconstruction against the clean reference.
/// Every row also carries the quality of the cell's first rainy frame as
/// the single-measurement reference point. Cells run independently (in
/// parallel when enabled); rows and reconstructions are assembled in fixed
/// `(T, seed, estimator)` order, so reruns are byte-identical.
pub fn sweep_integration_time(
    clean: &Image,
    config: &SynthConfig,
    t_values: &[f64],
    n_frames: usize,
    seeds: &[u64],
) -> Result<SweepOutput> {
    ensure_arg!(!t_values.is_empty(), "need at least one exposure");
    ensure_arg!(!seeds.is_empty(), "need at least one seed");
    ensure_arg!(
        t_values.iter().all(|&t| t.is_finite() && t > 0.0),
        "exposures must be positive"
    );
    ensure_arg!(n_frames >= 3, "reconstruction needs at least 3 frames, got {n_frames}");

    struct Cell {
        rows: Vec<QualityRow>,
        recons: Vec<ReconImage>,
    }

    let n_cells = t_values.len() * seeds.len();
    let cells: Vec<Result<Cell>> = parallel::map_indexed(n_cells, |c| {
        let t_ms = t_values[c / seeds.len()];
        let seed = seeds[c % seeds.len()];
        let config_t = SynthConfig {
            rain: config.rain.with_jitter_for_exposure(t_ms),
            ..config.clone()
        };
        let out = synth_from_config(
            clean,
            &config_t,
            n_frames,
            t_ms,
            measurement_interval_ms(t_ms),
            seed,
        )?;
        let rainy = normalize_exposure(&out.stack.frames[0], t_ms, clean.peak())?;
        let rainy_psnr_db = psnr(clean, &rainy, clean.peak())?;
        let rainy_ssim = ssim(clean, &rainy, clean.peak())?;

        let mut rows = Vec::with_capacity(SWEEP_ESTIMATORS.len());
        let mut recons = Vec::with_capacity(SWEEP_ESTIMATORS.len());
        for est in SWEEP_ESTIMATORS {
            let recon_counts = derain::reconstruct(
                &out.stack,
                &DerainConfig {
                    estimator: est,
                    ..DerainConfig::default()
                },
            )?;
            let recon = normalize_exposure(&recon_counts, t_ms, clean.peak())?;
            rows.push(QualityRow {
                t_ms,
                n_frames,
                estimator: est.label().to_string(),
                seed,
                psnr_db: psnr(clean, &recon, clean.peak())?,
                ssim: ssim(clean, &recon, clean.peak())?,
                rainy_psnr_db,
                rainy_ssim,
            });
            recons.push(ReconImage {
                t_ms,
                seed,
                estimator: est.label().to_string(),
                image: recon,
            });
        }
        Ok(Cell { rows, recons })
    });

    let mut rows = Vec::with_capacity(n_cells * SWEEP_ESTIMATORS.len());
    let mut recons = Vec::with_capacity(n_cells * SWEEP_ESTIMATORS.len());
    for cell in cells {
        let cell = cell?;
        rows.extend(cell.rows);
        recons.extend(cell.recons);
    }
    Ok(SweepOutput { rows, recons })
}

/// Seed-averaged PSNR curve of one label over the exposures present.
/// Labels are the estimator names plus `"rainy"` for the single-frame
/// reference column. Returns `(T, mean PSNR)` sorted by `T`.
pub fn psnr_curve(rows: &[QualityRow], label: &str) -> Result<Vec<(f64, f64)>> {
    let per_cell: Vec<(f64, f64)> = match label {
        "rainy" => {
            // One rainy value per (T, seed) cell; rows repeat it per
            // estimator, so keep the first estimator's copies.
            let first = rows
                .first()
                .map(|r| r.estimator.clone())
                .ok_or_else(|| Error::argument("empty report"))?;
            rows.iter()
                .filter(|r| r.estimator == first)
                .map(|r| (r.t_ms, r.rainy_psnr_db))
                .collect()
        }
        _ => rows
            .iter()
            .filter(|r| r.estimator == label)
            .map(|r| (r.t_ms, r.psnr_db))
            .collect(),
    };
    ensure_arg!(!per_cell.is_empty(), "no rows for estimator {label:?}");

    let mut ts: Vec<f64> = per_cell.iter().map(|p| p.0).collect();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    Ok(ts
        .into_iter()
        .map(|t| {
            let values: Vec<f64> =
                per_cell.iter().filter(|p| p.0 == t).map(|p| p.1).collect();
            (t, values.iter().sum::<f64>() / values.len() as f64)
        })
        .collect())
}

/// Finds the smallest exposure where the seed-averaged PSNR curves of two
/// labels cross, by piecewise-linear interpolation. A strict sign flip
/// between adjacent exposures interpolates within the segment; a curve pair
/// that touches zero difference exactly and then flips crosses at the
/// touching exposure. Returns `None` when the difference never changes
/// sign (including identical curves).
pub fn inflection_detect(
    rows: &[QualityRow],
    estimator_a: &str,
    estimator_b: &str,
) -> Result<Option<f64>> {
    let a = psnr_curve(rows, estimator_a)?;
    let b = psnr_curve(rows, estimator_b)?;
    let common: Vec<(f64, f64, f64)> = a
        .iter()
        .filter_map(|&(t, va)| {
            b.iter().find(|&&(tb, _)| tb == t).map(|&(_, vb)| (t, va, vb))
        })
        .collect();
    ensure_arg!(
        common.len() >= 2,
        "need the two estimators at 2 or more shared exposures, got {}",
        common.len()
    );

    let d: Vec<(f64, f64)> = common.iter().map(|&(t, va, vb)| (t, va - vb)).collect();
    let mut last: Option<(usize, f64)> = None; // last nonzero difference
    for (j, &(t_j, d_j)) in d.iter().enumerate() {
        if d_j == 0.0 {
            continue;
        }
        if let Some((i, d_i)) = last {
            if d_i.signum() != d_j.signum() {
                return Ok(Some(if j == i + 1 {
                    let (t_i, _) = d[i];
                    t_i + (t_j - t_i) * d_i / (d_i - d_j)
                } else {
                    // The difference sat exactly at zero in between; the
                    // first such exposure is the crossing.
                    d[i + 1].0
                }));
            }
        }
        last = Some((j, d_j));
    }
    Ok(None)
}

/// Writes `report.csv`, `curves_psnr.svg`, `curves_ssim.svg`, and the
/// reconstructed PGMs into `dir`. Reconstructions are clipped to the clean
/// peak for 8-bit display; the report rows carry the unclipped scores.
pub fn write_sweep_artifacts(output: &SweepOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    quality_table(&output.rows)?.write(&dir.join("report.csv"))?;

    let labels = ["pnfc", "mean", "median", "rainy"];
    let mut psnr_series = Vec::new();
    let mut ssim_series = Vec::new();
    for label in labels {
        psnr_series.push(Series {
            label: label.to_string(),
            points: psnr_curve(&output.rows, label)?,
        });
        ssim_series.push(Series {
            label: label.to_string(),
            points: ssim_curve(&output.rows, label)?,
        });
    }
    write_svg_chart(
        &psnr_series,
        "integration time (ms)",
        "PSNR (dB)",
        &dir.join("curves_psnr.svg"),
    )?;
    write_svg_chart(
        &ssim_series,
        "integration time (ms)",
        "SSIM",
        &dir.join("curves_ssim.svg"),
    )?;

    for recon in &output.recons {
        let peak = recon.image.peak();
        let clipped = recon.image.map(peak, |v| v.min(peak))?;
        pgm::write_pgm(
            &clipped,
            &dir.join(format!(
                "recon_t{}_s{}_{}.pgm",
                recon.t_ms, recon.seed, recon.estimator
            )),
        )?;
    }
    Ok(())
}

/// Seed-averaged SSIM curve, same shape as [`psnr_curve`].
fn ssim_curve(rows: &[QualityRow], label: &str) -> Result<Vec<(f64, f64)>> {
    let per_cell: Vec<(f64, f64)> = match label {
        "rainy" => {
            let first = rows
                .first()
                .map(|r| r.estimator.clone())
                .ok_or_else(|| Error::argument("empty report"))?;
            rows.iter()
                .filter(|r| r.estimator == first)
                .map(|r| (r.t_ms, r.rainy_ssim))
                .collect()
        }
        _ => rows
            .iter()
            .filter(|r| r.estimator == label)
            .map(|r| (r.t_ms, r.ssim))
            .collect(),
    };
    ensure_arg!(!per_cell.is_empty(), "no rows for estimator {label:?}");
    let mut ts: Vec<f64> = per_cell.iter().map(|p| p.0).collect();
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    Ok(ts
        .into_iter()
        .map(|t| {
            let values: Vec<f64> =
                per_cell.iter().filter(|p| p.0 == t).map(|p| p.1).collect();
            (t, values.iter().sum::<f64>() / values.len() as f64)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::PSNR_CAP_DB;
    use crate::rainsim::RainParams;

    fn no_rain_noiseless() -> SynthConfig {
        SynthConfig {
            rain: RainParams {
                drops_per_frame: 0.0,
                fog_mu_mean: 1.0,
                fog_mu_jitter: 0.0,
                ..SynthConfig::default().rain
            },
            photon_noise: false,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn scene_is_integer_valued_and_bounded() {
        let scene = test_scene(64, 48).unwrap();
        assert!(scene.data().iter().all(|&v| v.fract() == 0.0));
        assert!(scene.data().iter().all(|&v| (30.0..=235.0).contains(&v)));
        let distinct: std::collections::BTreeSet<u64> =
            scene.data().iter().map(|&v| v as u64).collect();
        assert!(distinct.len() > 10, "scene should have texture");
    }

    #[test]
    fn demo_noiseless_no_rain_hits_cap() {
        let clean = test_scene(32, 32).unwrap();
        let demo =
            fluctuation_demo(&clean, &no_rain_noiseless(), &[20.0, 50.0], 5, None, 1).unwrap();
        assert_eq!(demo.rows.len(), 2 * 4);
        assert!(demo.rows.iter().all(|r| r.interframe_psnr_db == PSNR_CAP_DB));
        assert_eq!(demo.images.len(), 2);
    }

    #[test]
    fn demo_longer_exposure_smoother() {
        let clean = test_scene(64, 64).unwrap();
        let config = SynthConfig::default();
        let mut wins = 0;
        for seed in 1..=5 {
            let demo = fluctuation_demo(&clean, &config, &[20.0, 50.0], 30, None, seed).unwrap();
            let p20 = demo.mean_interframe_psnr(20.0).unwrap();
            let p50 = demo.mean_interframe_psnr(50.0).unwrap();
            if p50 > p20 {
                wins += 1;
            }
        }
        assert_eq!(wins, 5, "longer exposure must smooth inter-frame fluctuation");
    }

    #[test]
    fn demo_rejects_degenerate_requests() {
        let clean = test_scene(32, 32).unwrap();
        let config = no_rain_noiseless();
        assert!(fluctuation_demo(&clean, &config, &[20.0], 1, None, 1).is_err());
        let outside = BlockSpec {
            x: 30,
            y: 30,
            width: 8,
            height: 8,
        };
        assert!(fluctuation_demo(&clean, &config, &[20.0], 5, Some(outside), 1).is_err());
    }

    #[test]
    fn demo_artifacts_written() {
        let dir = tempfile::tempdir().unwrap();
        let clean = test_scene(32, 32).unwrap();
        let demo = fluctuation_demo(&clean, &no_rain_noiseless(), &[20.0], 4, None, 1).unwrap();
        write_fluctuation_artifacts(&demo, dir.path()).unwrap();
        assert!(dir.path().join("fluctuation.csv").exists());
        assert!(dir.path().join("frame_t20.pgm").exists());
        assert!(dir.path().join("block_t20.pgm").exists());
    }

    #[test]
    fn sweep_cardinality_and_order() {
        let clean = test_scene(32, 32).unwrap();
        let out = sweep_integration_time(
            &clean,
            &SynthConfig::default(),
            &[20.0, 50.0, 80.0],
            5,
            &[1, 2],
        )
        .unwrap();
        assert_eq!(out.rows.len(), 3 * 2 * 3);
        assert_eq!(out.recons.len(), 3 * 2 * 3);
        // Fixed (T, seed, estimator) assembly order.
        assert_eq!(out.rows[0].estimator, "pnfc");
        assert_eq!(out.rows[1].estimator, "mean");
        assert_eq!(out.rows[2].estimator, "median");
        assert_eq!((out.rows[0].t_ms, out.rows[0].seed), (20.0, 1));
        assert_eq!((out.rows[3].t_ms, out.rows[3].seed), (20.0, 2));
        assert_eq!((out.rows[6].t_ms, out.rows[6].seed), (50.0, 1));
    }

    #[test]
    fn sweep_no_rain_equalizes_estimators() {
        // Noiseless rain-free stacks make every estimator exact, so all
        // scores coincide at the cap.
        let clean = test_scene(32, 32).unwrap();
        let out =
            sweep_integration_time(&clean, &no_rain_noiseless(), &[20.0, 50.0], 4, &[1]).unwrap();
        for pair in out.rows.chunks(3) {
            for r in pair {
                assert_eq!(r.psnr_db, PSNR_CAP_DB);
            }
            let max = pair.iter().map(|r| r.psnr_db).fold(f64::MIN, f64::max);
            let min = pair.iter().map(|r| r.psnr_db).fold(f64::MAX, f64::min);
            assert!(max - min <= 0.5);
        }
    }

    #[test]
    fn sweep_gain_decreases_per_seed_majority() {
        let clean = test_scene(64, 64).unwrap();
        let seeds = [1u64, 2, 3];
        let out = sweep_integration_time(
            &clean,
            &SynthConfig::default(),
            &[20.0, 50.0, 80.0],
            30,
            &seeds,
        )
        .unwrap();
        let mut majority = 0;
        for &seed in &seeds {
            let gains: Vec<f64> = [20.0, 50.0, 80.0]
                .iter()
                .map(|&t| {
                    let row = out
                        .rows
                        .iter()
                        .find(|r| r.t_ms == t && r.seed == seed && r.estimator == "pnfc")
                        .unwrap();
                    row.psnr_db - row.rainy_psnr_db
                })
                .collect();
            if gains[0] > gains[1] && gains[1] > gains[2] {
                majority += 1;
            }
        }
        assert!(majority >= 2, "gain decreasing for only {majority}/3 seeds");
    }

    #[test]
    fn sweep_reruns_byte_identical() {
        let clean = test_scene(32, 32).unwrap();
        let config = SynthConfig::default();
        let a = sweep_integration_time(&clean, &config, &[20.0], 5, &[1, 2]).unwrap();
        let b = sweep_integration_time(&clean, &config, &[20.0], 5, &[1, 2]).unwrap();
        assert_eq!(a, b);
        let csv_a = quality_table(&a.rows).unwrap().to_csv_string();
        let csv_b = quality_table(&b.rows).unwrap().to_csv_string();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn sweep_artifacts_written() {
        let dir = tempfile::tempdir().unwrap();
        let clean = test_scene(32, 32).unwrap();
        let out = sweep_integration_time(&clean, &SynthConfig::default(), &[20.0], 5, &[1]).unwrap();
        write_sweep_artifacts(&out, dir.path()).unwrap();
        assert!(dir.path().join("report.csv").exists());
        assert!(dir.path().join("curves_psnr.svg").exists());
        assert!(dir.path().join("curves_ssim.svg").exists());
        assert!(dir.path().join("recon_t20_s1_pnfc.pgm").exists());
        assert!(dir.path().join("recon_t20_s1_median.pgm").exists());
    }

    fn synthetic_rows(ts: &[f64], a: &[f64], b: &[f64]) -> Vec<QualityRow> {
        let mut rows = Vec::new();
        for (i, &t) in ts.iter().enumerate() {
            for (est, value) in [("pnfc", a[i]), ("mean", b[i])] {
                rows.push(QualityRow {
                    t_ms: t,
                    n_frames: 30,
                    estimator: est.to_string(),
                    seed: 1,
                    psnr_db: value,
                    ssim: 0.9,
                    rainy_psnr_db: 15.0,
                    rainy_ssim: 0.5,
                });
            }
        }
        rows
    }

    #[test]
    fn inflection_hand_oracle() {
        let rows = synthetic_rows(
            &[20.0, 50.0, 80.0],
            &[30.0, 25.0, 20.0],
            &[26.0, 26.0, 26.0],
        );
        let t = inflection_detect(&rows, "pnfc", "mean").unwrap().unwrap();
        assert_eq!(t, 44.0);
    }

    #[test]
    fn inflection_none_when_separated_or_identical() {
        let rows = synthetic_rows(&[20.0, 50.0], &[30.0, 29.0], &[20.0, 21.0]);
        assert_eq!(inflection_detect(&rows, "pnfc", "mean").unwrap(), None);
        let rows = synthetic_rows(&[20.0, 50.0], &[25.0, 25.0], &[25.0, 25.0]);
        assert_eq!(inflection_detect(&rows, "pnfc", "mean").unwrap(), None);
    }

    #[test]
    fn inflection_zero_touch_then_flip() {
        let rows = synthetic_rows(&[20.0, 50.0, 80.0], &[30.0, 26.0, 20.0], &[26.0, 26.0, 26.0]);
        let t = inflection_detect(&rows, "pnfc", "mean").unwrap().unwrap();
        assert_eq!(t, 50.0);
    }

    #[test]
    fn inflection_needs_two_shared_exposures() {
        let rows = synthetic_rows(&[20.0], &[30.0], &[26.0]);
        assert!(inflection_detect(&rows, "pnfc", "mean").is_err());
        let rows = synthetic_rows(&[20.0, 50.0], &[30.0, 20.0], &[26.0, 26.0]);
        assert!(inflection_detect(&rows, "pnfc", "nope").is_err());
    }

    #[test]
    fn inflection_accepts_rainy_reference() {
        // Rainy reference rises with T while the estimator curve falls.
        let mut rows = synthetic_rows(&[20.0, 50.0], &[30.0, 20.0], &[26.0, 26.0]);
        for r in &mut rows {
            r.rainy_psnr_db = if r.t_ms == 20.0 { 25.0 } else { 24.0 };
        }
        let t = inflection_detect(&rows, "pnfc", "rainy").unwrap().unwrap();
        assert!((20.0..50.0).contains(&t));
    }
}

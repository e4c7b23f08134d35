//! Per-pixel stochastic-process laboratory.
//!
//! Estimates the consecutive-pair correlation of every photon population in
//! a traced synthesis (scene, fog, streak, and their cross terms) and tests
//! the claims the reconstruction rests on: when the measurement interval
//! exceeds the rain's correlation time, the fog and streak fluctuation
//! correlations vanish while the scene's pair product stays pinned at its
//! mean square.

use rand::Rng;

use crate::error::{ensure_arg, Result};
use crate::imgio::csv::{CsvValue, Table};
use crate::parallel;
use crate::rainsim::{Component, ComponentTrace, FrameStack, RainParams, sample_fog_mu};
use crate::rng::{self, tag};

/// Bootstrap resamples behind every reported tile standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Statistical pass thresholds are this many standard errors wide.
pub const SIGMA_THRESHOLD: f64 = 3.0;

/// Timing context of a measurement run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceParams {
    /// Timescale over which the rain field stays correlated, ms.
    pub coherence_time_ms: f64,
    /// Spacing of consecutive measurements, ms.
    pub measurement_interval_ms: f64,
}

impl CoherenceParams {
    pub fn validate(&self) -> Result<()> {
        ensure_arg!(
            self.coherence_time_ms.is_finite() && self.coherence_time_ms > 0.0,
            "coherence time must be positive"
        );
        ensure_arg!(
            self.measurement_interval_ms.is_finite() && self.measurement_interval_ms > 0.0,
            "measurement interval must be positive"
        );
        Ok(())
    }

    /// Consecutive measurements share rain state when the interval is
    /// shorter than the coherence time.
    pub fn correlated_regime(&self) -> bool {
        self.coherence_time_ms > self.measurement_interval_ms
    }
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Consecutive-pair correlation split by photon population at one pixel.
/// `g_total` is the pair product of the composed expected signal and equals
/// the sum of the six parts up to float rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    pub ss: Estimate,
    pub ff: Estimate,
    pub dd: Estimate,
    pub sf: Estimate,
    pub sd: Estimate,
    pub fd: Estimate,
    pub g_total: f64,
}

impl CorrelationReport {
    pub fn component_sum(&self) -> f64 {
        self.ss.value
            + self.ff.value
            + self.dd.value
            + self.sf.value
            + self.sd.value
            + self.fd.value
    }
}

/// Mean consecutive-pair product `Σ x_k·x_{k+1} / (N−1)`.
pub fn lag1_product(series: &[f64]) -> Result<f64> {
    ensure_arg!(
        series.len() >= 2,
        "pair product needs at least 2 samples, got {}",
        series.len()
    );
    let pairs = (series.len() - 1) as f64;
    Ok(series.windows(2).map(|p| p[0] * p[1]).sum::<f64>() / pairs)
}

/// Lag-1 autocovariance `Σ (x_k−x̄)(x_{k+1}−x̄) / (N−1)` with `x̄` the
/// series mean: the fluctuation part of the pair product.
pub fn lag1_fluctuation_correlation(series: &[f64]) -> Result<f64> {
    ensure_arg!(
        series.len() >= 3,
        "fluctuation correlation needs at least 3 samples, got {}",
        series.len()
    );
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let pairs = (series.len() - 1) as f64;
    Ok(series
        .windows(2)
        .map(|p| (p[0] - mean) * (p[1] - mean))
        .sum::<f64>()
        / pairs)
}

/// Mean and standard error of a pair-product sequence, treating the products
/// as independent draws (their one-frame overlap is ignored here; the tile
/// verdicts use a block bootstrap instead).
fn naive_estimate(products: &[f64]) -> Estimate {
    let n = products.len() as f64;
    let mean = products.iter().sum::<f64>() / n;
    if products.len() < 2 {
        return Estimate {
            value: mean,
            stderr: 0.0,
        };
    }
    let ss = products.iter().map(|&p| (p - mean) * (p - mean)).sum::<f64>();
    Estimate {
        value: mean,
        stderr: (ss / (n - 1.0) / n).sqrt(),
    }
}

fn pair_products(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len() - 1).map(|k| a[k] * b[k + 1]).collect()
}

/// Splits the consecutive-pair correlation at `(x, y)` into its six
/// population terms. With `G_k = S_k + F_k + D_k` the composed expected
/// signal, each pair product expands into the three like terms and three
/// symmetrized cross terms reported here, so `g_total` equals their sum
/// identically up to rounding.
pub fn decompose_correlations(
    trace: &ComponentTrace,
    stack: &FrameStack,
    x: usize,
    y: usize,
) -> Result<CorrelationReport> {
    ensure_arg!(
        trace.width() == stack.width()
            && trace.height() == stack.height()
            && trace.n_frames() == stack.n_frames(),
        "trace {}x{}x{} does not match stack {}x{}x{}",
        trace.width(),
        trace.height(),
        trace.n_frames(),
        stack.width(),
        stack.height(),
        stack.n_frames()
    );
    ensure_arg!(trace.n_frames() >= 2, "need at least 2 frames");
    ensure_arg!(
        x < trace.width() && y < trace.height(),
        "pixel ({x}, {y}) outside {}x{}",
        trace.width(),
        trace.height()
    );

    let i = y * trace.width() + x;
    let n = trace.n_frames();
    let gather = |c: Component| -> Vec<f64> { (0..n).map(|k| trace.layer(c, k)[i]).collect() };
    let s = gather(Component::Scene);
    let f = gather(Component::Fog);
    let d = gather(Component::Streak);
    let g: Vec<f64> = (0..n).map(|k| s[k] + f[k] + d[k]).collect();

    let cross = |a: &[f64], b: &[f64]| -> Vec<f64> {
        let ab = pair_products(a, b);
        let ba = pair_products(b, a);
        ab.iter().zip(&ba).map(|(&p, &q)| p + q).collect()
    };

    Ok(CorrelationReport {
        ss: naive_estimate(&pair_products(&s, &s)),
        ff: naive_estimate(&pair_products(&f, &f)),
        dd: naive_estimate(&pair_products(&d, &d)),
        sf: naive_estimate(&cross(&s, &f)),
        sd: naive_estimate(&cross(&s, &d)),
        fd: naive_estimate(&cross(&f, &d)),
        g_total: lag1_product(&g)?,
    })
}

/// One spatial tile's vanishing-correlation test results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileVerdict {
    pub tile_x: usize,
    pub tile_y: usize,
    /// Scene pair product minus squared temporal mean; should sit at zero.
    pub scene: Estimate,
    pub scene_pass: bool,
    /// Fog lag-1 fluctuation correlation; should sit at zero.
    pub fog: Estimate,
    pub fog_pass: bool,
    /// Streak lag-1 fluctuation correlation; should sit at zero.
    pub streak: Estimate,
    pub streak_pass: bool,
}

impl TileVerdict {
    pub fn pass(&self) -> bool {
        self.scene_pass && self.fog_pass && self.streak_pass
    }
}

/// Aggregate outcome of [`verify_vanishing`].
#[derive(Debug, Clone, PartialEq)]
pub struct VanishingVerdict {
    /// Whether the stack was measured in the uncorrelated operating regime
    /// (interval longer than the coherence time). The statistics are
    /// reported either way; outside the regime they are expected to fail.
    pub regime_ok: bool,
    pub tile_px: usize,
    pub tiles: Vec<TileVerdict>,
}

impl VanishingVerdict {
    pub fn n_pass(&self) -> usize {
        self.tiles.iter().filter(|t| t.pass()).count()
    }

    pub fn pass_rate(&self) -> f64 {
        self.n_pass() as f64 / self.tiles.len() as f64
    }

    pub fn all_pass(&self) -> bool {
        self.n_pass() == self.tiles.len()
    }

    /// Overall verdict: measured in-regime and every tile passed.
    pub fn aggregate_pass(&self) -> bool {
        self.regime_ok && self.all_pass()
    }
}

/// Moving-block bootstrap standard error of the mean of `series`, for
/// serially dependent samples. Block length is `ceil(sqrt(n))`; resampled
/// blocks are concatenated and truncated to the original length. Block sums
/// come from a prefix-sum table, so each resample costs O(sqrt(n)).
fn block_bootstrap_stderr(series: &[f64], rng: &mut impl Rng) -> f64 {
    let n = series.len();
    if n < 2 {
        return 0.0;
    }
    let block = (n as f64).sqrt().ceil() as usize;
    let max_start = n - block;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in series {
        acc += v;
        prefix.push(acc);
    }
    let mut means = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut acc = 0.0;
        let mut taken = 0usize;
        while taken < n {
            let start = if max_start == 0 { 0 } else { rng.gen_range(0..=max_start) };
            let take = block.min(n - taken);
            acc += prefix[start + take] - prefix[start];
            taken += take;
        }
        means.push(acc / n as f64);
    }
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / (means.len() as f64 - 1.0);
    var.sqrt()
}

/// Tests the vanishing-correlation claims on a traced stack, per spatial
/// tile of `tile_px` × `tile_px` pixels (edge tiles may be smaller).
///
/// Per pixel and frame pair the test statistics are
///
/// - scene:  `s_k·s_{k+1} − s̄²` (pair product pinned at the mean square)
/// - fog:    `(f_k − f̄)(f_{k+1} − f̄)`
/// - streak: `(d_k − d̄)(d_{k+1} − d̄)`
///
/// with temporal means frozen from the full series, plus `σ̂²/N` added to
/// every pair statistic: centering on the sample mean biases each product
/// by exactly `−σ²/N` for independent frames, and the adjustment cancels
/// that in expectation, so all three statistics are centered at zero under
/// the vanishing-correlation hypothesis. Pair statistics are averaged over
/// the tile's pixels into one series per component; a tile passes a
/// component when the series mean lies within [`SIGMA_THRESHOLD`] standard
/// errors of zero.
///
/// The reported standard error is the tile's block-bootstrap estimate,
/// floored at the image-median bootstrap estimate for the same component.
/// Under the vanishing hypothesis every tile's statistic follows the same
/// sampling distribution, and streak products are dominated by rare large
/// pair hits: a tile whose series happened to catch few of them gets both a
/// downward-biased mean and a collapsed stderr, which rejects spuriously.
/// The cross-tile floor removes that coupling without weakening genuine
/// failures, whose statistics sit far above any tile's stderr. Bootstrap
/// substreams are keyed by `(stack seed, tile index)`, so verdicts are
/// reproducible and independent of tile evaluation order.
pub fn verify_vanishing(
    trace: &ComponentTrace,
    stack: &FrameStack,
    coherence: &CoherenceParams,
    tile_px: usize,
) -> Result<VanishingVerdict> {
    coherence.validate()?;
    ensure_arg!(tile_px >= 1, "tile size must be at least 1 pixel");
    ensure_arg!(
        trace.width() == stack.width()
            && trace.height() == stack.height()
            && trace.n_frames() == stack.n_frames(),
        "trace does not match stack"
    );
    ensure_arg!(trace.n_frames() >= 3, "need at least 3 frames");

    let (width, height, n) = (trace.width(), trace.height(), trace.n_frames());
    let n_pairs = n - 1;
    let tiles_x = width.div_ceil(tile_px);
    let tiles_y = height.div_ceil(tile_px);
    let seed = stack.seed;

    let tiles = parallel::map_indexed(tiles_x * tiles_y, |t| {
        let (tx, ty) = (t % tiles_x, t / tiles_x);
        let x0 = tx * tile_px;
        let y0 = ty * tile_px;
        let x1 = (x0 + tile_px).min(width);
        let y1 = (y0 + tile_px).min(height);
        let n_tile_px = ((x1 - x0) * (y1 - y0)) as f64;

        // Tile-averaged pair statistic series, one value per frame pair.
        let mut scene_q = vec![0.0; n_pairs];
        let mut fog_q = vec![0.0; n_pairs];
        let mut streak_q = vec![0.0; n_pairs];
        let mut series = vec![0.0; n];
        let mut stat_series = |component: Component, out: &mut [f64], centered: bool| {
            for y in y0..y1 {
                for x in x0..x1 {
                    let i = y * width + x;
                    for (k, v) in series.iter_mut().enumerate() {
                        *v = trace.layer(component, k)[i];
                    }
                    let mean = series.iter().sum::<f64>() / n as f64;
                    let var =
                        series.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
                    let debias = var / n as f64;
                    if centered {
                        for k in 0..n_pairs {
                            out[k] += (series[k] - mean) * (series[k + 1] - mean) + debias;
                        }
                    } else {
                        let mean_sq = mean * mean;
                        for k in 0..n_pairs {
                            out[k] += series[k] * series[k + 1] - mean_sq + debias;
                        }
                    }
                }
            }
            for v in out.iter_mut() {
                *v /= n_tile_px;
            }
        };
        stat_series(Component::Scene, &mut scene_q, false);
        stat_series(Component::Fog, &mut fog_q, true);
        stat_series(Component::Streak, &mut streak_q, true);

        let mut boot_rng = rng::substream(seed, &[t as u64, tag::BOOTSTRAP]);
        let mut estimate = |q: &[f64]| -> Estimate {
            Estimate {
                value: q.iter().sum::<f64>() / q.len() as f64,
                stderr: block_bootstrap_stderr(q, &mut boot_rng),
            }
        };
        let scene = estimate(&scene_q);
        let fog = estimate(&fog_q);
        let streak = estimate(&streak_q);
        (tx, ty, scene, fog, streak)
    });

    let median_stderr = |pick: fn(&(usize, usize, Estimate, Estimate, Estimate)) -> f64| -> f64 {
        let mut values: Vec<f64> = tiles.iter().map(pick).collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("stderr is finite"));
        values[values.len() / 2]
    };
    let floors = (
        median_stderr(|t| t.2.stderr),
        median_stderr(|t| t.3.stderr),
        median_stderr(|t| t.4.stderr),
    );

    let tiles = tiles
        .into_iter()
        .map(|(tx, ty, scene, fog, streak)| {
            let floored = |e: Estimate, floor: f64| Estimate {
                value: e.value,
                stderr: e.stderr.max(floor),
            };
            let scene = floored(scene, floors.0);
            let fog = floored(fog, floors.1);
            let streak = floored(streak, floors.2);
            let within = |e: &Estimate| e.value.abs() <= SIGMA_THRESHOLD * e.stderr;
            TileVerdict {
                tile_x: tx,
                tile_y: ty,
                scene,
                scene_pass: within(&scene),
                fog,
                fog_pass: within(&fog),
                streak,
                streak_pass: within(&streak),
            }
        })
        .collect();

    Ok(VanishingVerdict {
        regime_ok: !coherence.correlated_regime(),
        tile_px,
        tiles,
    })
}

/// Renders a verdict as one CSV row per tile.
pub fn verdict_table(verdict: &VanishingVerdict) -> Result<Table> {
    let mut table = Table::new([
        "tile_x",
        "tile_y",
        "scene_stat",
        "scene_stderr",
        "scene_pass",
        "fog_stat",
        "fog_stderr",
        "fog_pass",
        "streak_stat",
        "streak_stderr",
        "streak_pass",
        "pass",
    ])?;
    for t in &verdict.tiles {
        table.push_row(vec![
            CsvValue::from(t.tile_x),
            CsvValue::from(t.tile_y),
            CsvValue::from(t.scene.value),
            CsvValue::from(t.scene.stderr),
            CsvValue::from(t.scene_pass as i64),
            CsvValue::from(t.fog.value),
            CsvValue::from(t.fog.stderr),
            CsvValue::from(t.fog_pass as i64),
            CsvValue::from(t.streak.value),
            CsvValue::from(t.streak.stderr),
            CsvValue::from(t.streak_pass as i64),
            CsvValue::from(t.pass() as i64),
        ])?;
    }
    Ok(table)
}

/// One exposure's transmittance-product measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuScanRow {
    pub t_ms: f64,
    pub n_samples: usize,
    /// Raw consecutive-pair product of the transmittance series.
    pub mu_lag1_product: f64,
    /// Mean half squared consecutive difference `⟨(μ_{k+1}−μ_k)²⟩/2`: the
    /// fluctuation power the pair correlation loses between consecutive
    /// frames. Scales as `1/T` under the jitter-rescaling convention.
    pub mu_fluctuation_product: f64,
}

/// Transmittance-product scan across integration times.
#[derive(Debug, Clone, PartialEq)]
pub struct MuScan {
    pub rows: Vec<MuScanRow>,
    /// Least-squares slope of `log(mu_fluctuation_product)` against
    /// `log(t_ms)`; `None` with fewer than two distinct exposures.
    pub slope: Option<f64>,
}

/// Draws `n_samples` per-frame transmittances for each exposure (jitter
/// rescaled per [`RainParams::with_jitter_for_exposure`]) and reports both
/// pair-product statistics. Substreams are keyed by the exposure's bit
/// pattern, so row values do not depend on the order of `t_values`.
pub fn mu_product_scan(
    t_values: &[f64],
    rain: &RainParams,
    n_samples: usize,
    seed: u64,
) -> Result<MuScan> {
    ensure_arg!(!t_values.is_empty(), "need at least one exposure");
    ensure_arg!(
        t_values.iter().all(|&t| t.is_finite() && t > 0.0),
        "exposures must be positive"
    );
    ensure_arg!(n_samples >= 2, "need at least 2 samples per exposure");
    rain.validate()?;

    let mut rows = Vec::with_capacity(t_values.len());
    for &t_ms in t_values {
        let rain_t = rain.with_jitter_for_exposure(t_ms);
        let mut draw_rng = rng::substream(seed, &[tag::SCAN, t_ms.to_bits()]);
        let mus: Vec<f64> = (0..n_samples).map(|_| sample_fog_mu(&rain_t, &mut draw_rng)).collect();
        let pairs = (n_samples - 1) as f64;
        let fluctuation = mus
            .windows(2)
            .map(|p| {
                let d = p[1] - p[0];
                d * d
            })
            .sum::<f64>()
            / (2.0 * pairs);
        rows.push(MuScanRow {
            t_ms,
            n_samples,
            mu_lag1_product: lag1_product(&mus)?,
            mu_fluctuation_product: fluctuation,
        });
    }

    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mu_fluctuation_product > 0.0)
        .map(|r| (r.t_ms.ln(), r.mu_fluctuation_product.ln()))
        .collect();
    let distinct = {
        let mut xs: Vec<f64> = fit.iter().map(|p| p.0).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        xs.len()
    };
    let slope = if distinct >= 2 {
        let n = fit.len() as f64;
        let mx = fit.iter().map(|p| p.0).sum::<f64>() / n;
        let my = fit.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = fit.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        Some(sxy / sxx)
    } else {
        None
    };

    Ok(MuScan { rows, slope })
}

/// Renders a scan as CSV, one row per exposure.
pub fn mu_scan_table(scan: &MuScan) -> Result<Table> {
    let mut table = Table::new(["t_ms", "n_samples", "mu_lag1_product", "mu_fluctuation_product"])?;
    for row in &scan.rows {
        table.push_row(vec![
            CsvValue::from(row.t_ms),
            CsvValue::from(row.n_samples),
            CsvValue::from(row.mu_lag1_product),
            CsvValue::from(row.mu_fluctuation_product),
        ])?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgio::Image;
    use crate::rainsim::{synth_from_config, RainParams, SynthConfig};
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand::Rng;

    fn scan_rain() -> RainParams {
        // Mean far from the clamp bounds so the jitter scaling is undistorted.
        RainParams {
            fog_mu_mean: 0.5,
            fog_mu_jitter: 0.1,
            ..SynthConfig::default().rain
        }
    }

    #[test]
    fn lag1_product_examples() {
        assert_eq!(lag1_product(&[7.0; 5]).unwrap(), 49.0);
        assert_eq!(lag1_product(&[1.0, 0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(lag1_product(&[1.0, 2.0, 3.0]).unwrap(), 4.0);
        assert!(lag1_product(&[1.0]).is_err());
    }

    #[test]
    fn fluctuation_correlation_examples() {
        assert_eq!(lag1_fluctuation_correlation(&[5.0; 6]).unwrap(), 0.0);
        assert!(lag1_fluctuation_correlation(&[1.0, 2.0]).is_err());

        // Alternating +-a around a zero mean: every pair product is -a^2.
        let a = 3.0;
        let series: Vec<f64> = (0..6).map(|k| if k % 2 == 0 { a } else { -a }).collect();
        assert_eq!(lag1_fluctuation_correlation(&series).unwrap(), -a * a);
    }

    #[test]
    fn fluctuation_correlation_of_iid_vanishes() {
        let n = 10_000;
        let mut rng = substream(21, &[tag::SCAN]);
        let series: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let value = lag1_fluctuation_correlation(&series).unwrap();
        let mean = series.iter().sum::<f64>() / n as f64;
        let products: Vec<f64> = series
            .windows(2)
            .map(|p| (p[0] - mean) * (p[1] - mean))
            .collect();
        let est = naive_estimate(&products);
        assert!(value.abs() <= SIGMA_THRESHOLD * est.stderr, "{value} vs stderr {}", est.stderr);
    }

    #[test]
    fn stable_signal_plus_noise_keeps_mean_square() {
        let c = 50.0;
        let n = 10_000;
        let mut rng = substream(22, &[tag::SCAN]);
        let series: Vec<f64> = (0..n).map(|_| c + rng.gen_range(-1.0..1.0)).collect();
        let value = lag1_product(&series).unwrap();
        // Noise is iid uniform(-1,1): stderr of the pair-product mean is
        // dominated by 2·c·cov-of-neighbors ≈ 2c·sigma/sqrt(n).
        let sigma = (1.0f64 / 3.0).sqrt();
        let stderr = 2.0 * c * sigma / (n as f64).sqrt();
        assert!((value - c * c).abs() <= SIGMA_THRESHOLD * stderr);
    }

    proptest! {
        #[test]
        fn lag1_scale_equivariance(seed in 0u64..200, log_alpha in -3i32..6) {
            let alpha = (2.0f64).powi(log_alpha);
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
            let mut next = move || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 1024) as f64
            };
            let series: Vec<f64> = (0..7).map(|_| next()).collect();
            let scaled: Vec<f64> = series.iter().map(|&x| x * alpha).collect();
            prop_assert_eq!(
                lag1_product(&scaled).unwrap(),
                alpha * alpha * lag1_product(&series).unwrap()
            );
        }
    }

    fn traced_synth(config: &SynthConfig, n: usize, seed: u64) -> crate::rainsim::SynthResult {
        let clean = Image::new(8, 8, 255.0, (0..64).map(|i| 30.0 + 2.0 * i as f64).collect()).unwrap();
        synth_from_config(&clean, config, n, 20.0, 33.0, seed).unwrap()
    }

    #[test]
    fn decompose_no_rain_is_exact() {
        let config = SynthConfig {
            rain: RainParams {
                drops_per_frame: 0.0,
                fog_mu_mean: 1.0,
                fog_mu_jitter: 0.0,
                ..SynthConfig::default().rain
            },
            ..SynthConfig::default()
        };
        let out = traced_synth(&config, 10, 1);
        let report = decompose_correlations(&out.trace, &out.stack, 3, 2).unwrap();
        assert_eq!(report.ff.value, 0.0);
        assert_eq!(report.dd.value, 0.0);
        assert_eq!(report.sf.value, 0.0);
        assert_eq!(report.sd.value, 0.0);
        assert_eq!(report.fd.value, 0.0);
        let s = out.trace.layer(Component::Scene, 0)[2 * 8 + 3];
        assert_eq!(report.ss.value, s * s);
        assert_eq!(report.g_total, s * s);
    }

    #[test]
    fn decompose_identity_on_random_stack() {
        let out = traced_synth(&SynthConfig::default(), 12, 9);
        for (x, y) in [(0, 0), (4, 3), (7, 7)] {
            let report = decompose_correlations(&out.trace, &out.stack, x, y).unwrap();
            let sum = report.component_sum();
            let scale = report.g_total.abs().max(1.0);
            assert!(
                (report.g_total - sum).abs() <= 1e-9 * scale,
                "({x},{y}): {} vs {}",
                report.g_total,
                sum
            );
        }
    }

    #[test]
    fn decompose_rejects_misalignment() {
        let out = traced_synth(&SynthConfig::default(), 5, 2);
        let other = traced_synth(&SynthConfig::default(), 6, 2);
        assert!(decompose_correlations(&out.trace, &other.stack, 0, 0).is_err());
        assert!(decompose_correlations(&out.trace, &out.stack, 8, 0).is_err());
    }

    #[test]
    fn sparse_streak_correlation_matches_hit_rate_oracle() {
        // Unit streak amplitude: the streak layer counts covering drops.
        let t_ms = 20.0;
        let config = SynthConfig {
            rain: RainParams {
                drops_per_frame: 5.0,
                streak_radiance: 1.0 / 1.0 * (1.0 / 1.0), // 1 count per hit: E_r * tau = 1
                drop_crossing_time_ms: 1.0,
                fog_mu_jitter: 0.0,
                ..SynthConfig::default().rain
            },
            photon_noise: false,
            ..SynthConfig::default()
        };
        let clean = Image::new(8, 8, 255.0, vec![100.0; 64]).unwrap();
        let n = 10_000;
        let out = synth_from_config(&clean, &config, n, t_ms, 33.0, 31).unwrap();

        let (x, y) = (4usize, 4usize);
        let i = y * 8 + x;
        // Independent enumeration of per-frame coverage from the recorded
        // streak placements.
        let mut hits = vec![0.0f64; n];
        for (k, frame_log) in out.streaks.iter().enumerate() {
            for s in frame_log {
                if s.col == x && (s.row_top..(s.row_top + s.len_px).min(8)).contains(&y) {
                    hits[k] += 1.0;
                }
            }
        }
        let q = hits.iter().sum::<f64>() / n as f64;

        // The traced streak layer counts hits too (amplitude 1 count).
        let d_series: Vec<f64> = (0..n).map(|k| out.trace.layer(Component::Streak, k)[i]).collect();
        for (k, &d) in d_series.iter().enumerate() {
            assert!((d - hits[k]).abs() < 1e-12, "frame {k}");
        }

        let report = decompose_correlations(&out.trace, &out.stack, x, y).unwrap();
        assert!(
            (report.dd.value - q * q).abs() <= SIGMA_THRESHOLD * report.dd.stderr,
            "dd {} vs hit-rate^2 {} (stderr {})",
            report.dd.value,
            q * q,
            report.dd.stderr
        );
    }

    #[test]
    fn vanishing_passes_trivially_without_rain() {
        let config = SynthConfig {
            rain: RainParams {
                drops_per_frame: 0.0,
                fog_mu_mean: 1.0,
                fog_mu_jitter: 0.0,
                ..SynthConfig::default().rain
            },
            photon_noise: false,
            ..SynthConfig::default()
        };
        let out = traced_synth(&config, 10, 3);
        let coherence = CoherenceParams {
            coherence_time_ms: 1.18,
            measurement_interval_ms: 33.0,
        };
        let verdict = verify_vanishing(&out.trace, &out.stack, &coherence, 4).unwrap();
        assert!(verdict.regime_ok);
        assert!(verdict.aggregate_pass());
        assert_eq!(verdict.tiles.len(), 4);
    }

    #[test]
    fn vanishing_passes_on_default_rainy_stack() {
        // Full-size scene so streak density per tile is representative; the
        // seed is fixed, as for any statistical pass/fail check.
        let clean = Image::new(
            64,
            64,
            255.0,
            (0..4096).map(|i| 30.0 + (i % 64) as f64 * 3.2).collect(),
        )
        .unwrap();
        let out = synth_from_config(&clean, &SynthConfig::default(), 30, 20.0, 33.0, 5).unwrap();
        let coherence = CoherenceParams {
            coherence_time_ms: 1.18,
            measurement_interval_ms: 33.0,
        };
        let verdict = verify_vanishing(&out.trace, &out.stack, &coherence, 8).unwrap();
        assert!(verdict.regime_ok);
        assert_eq!(verdict.tiles.len(), 64);
        assert!(verdict.aggregate_pass(), "pass rate {}", verdict.pass_rate());
    }

    #[test]
    fn correlated_fog_fails_the_fog_term() {
        // Fog draws reused across frame pairs: consecutive measurements
        // share rain state, so the fluctuation correlation stays positive.
        let out = traced_synth(&SynthConfig::default(), 30, 7);
        let n = out.trace.n_frames();
        let npix = out.trace.pixel_count();
        let mut fog = Vec::with_capacity(n);
        let mut rng = substream(99, &[tag::FOG]);
        let mut level = 0.0;
        for k in 0..n {
            if k % 2 == 0 {
                level = rng.gen_range(100.0..900.0);
            }
            fog.push(vec![level; npix]);
        }
        let trace = rebuild_trace(&out.trace, fog);
        let coherence = CoherenceParams {
            coherence_time_ms: 1.18,
            measurement_interval_ms: 33.0,
        };
        let verdict = verify_vanishing(&trace, &out.stack, &coherence, 8).unwrap();
        assert!(verdict.tiles.iter().all(|t| !t.fog_pass));
        assert!(!verdict.aggregate_pass());
    }

    #[test]
    fn correlated_regime_is_flagged() {
        let out = traced_synth(&SynthConfig::default(), 10, 11);
        let coherence = CoherenceParams {
            coherence_time_ms: 50.0,
            measurement_interval_ms: 33.0,
        };
        assert!(coherence.correlated_regime());
        let verdict = verify_vanishing(&out.trace, &out.stack, &coherence, 8).unwrap();
        assert!(!verdict.regime_ok);
        assert!(!verdict.aggregate_pass());
    }

    /// Swaps the fog planes of a trace, keeping scene and streak.
    fn rebuild_trace(base: &ComponentTrace, fog: Vec<Vec<f64>>) -> ComponentTrace {
        let dir = tempfile::tempdir().unwrap();
        base.save(dir.path()).unwrap();
        let mut bytes = Vec::new();
        for plane in &fog {
            for &v in plane {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(dir.path().join("fog.f64"), bytes).unwrap();
        ComponentTrace::load(dir.path()).unwrap()
    }

    #[test]
    fn verdict_csv_has_tile_rows() {
        let out = traced_synth(&SynthConfig::default(), 10, 13);
        let coherence = CoherenceParams {
            coherence_time_ms: 1.18,
            measurement_interval_ms: 33.0,
        };
        let verdict = verify_vanishing(&out.trace, &out.stack, &coherence, 4).unwrap();
        let text = verdict_table(&verdict).unwrap().to_csv_string();
        assert_eq!(text.lines().count(), 1 + verdict.tiles.len());
        assert!(text.starts_with("tile_x,tile_y,scene_stat"));
    }

    #[test]
    fn mu_scan_single_exposure() {
        let scan = mu_product_scan(&[30.0], &scan_rain(), 100, 17).unwrap();
        assert_eq!(scan.rows.len(), 1);
        assert!(scan.slope.is_none());
    }

    #[test]
    fn mu_scan_values_bounded() {
        let scan = mu_product_scan(&[10.0, 20.0, 40.0, 80.0], &scan_rain(), 10_000, 19).unwrap();
        for row in &scan.rows {
            assert!(row.mu_lag1_product > 0.0 && row.mu_lag1_product < 1.0);
            assert!(row.mu_fluctuation_product > 0.0 && row.mu_fluctuation_product < 1.0);
        }
    }

    #[test]
    fn mu_scan_slope_is_inverse_time() {
        let scan = mu_product_scan(&[10.0, 20.0, 40.0, 80.0], &scan_rain(), 10_000, 23).unwrap();
        let slope = scan.slope.unwrap();
        assert!((slope + 1.0).abs() <= 0.2, "slope {slope}");
    }

    #[test]
    fn mu_scan_rows_order_independent() {
        let a = mu_product_scan(&[10.0, 40.0], &scan_rain(), 500, 29).unwrap();
        let b = mu_product_scan(&[40.0, 10.0], &scan_rain(), 500, 29).unwrap();
        assert_eq!(a.rows[0], b.rows[1]);
        assert_eq!(a.rows[1], b.rows[0]);
    }

    #[test]
    fn mu_scan_csv_columns() {
        let scan = mu_product_scan(&[30.0], &scan_rain(), 100, 17).unwrap();
        let text = mu_scan_table(&scan).unwrap().to_csv_string();
        assert!(text.starts_with("t_ms,n_samples,mu_lag1_product,mu_fluctuation_product\n"));
    }
}

//! Stochastic rain-field synthesis and photon-count sampling.
//!
//! A synthesized frame is the sum of three expected photon-count layers: the
//! attenuated scene `S = mu_k * B * T`, rain fog `F = (1 - mu_k) * L * T`, and
//! near-camera rain streaks `D`. The per-frame transmittance `mu_k` is a
//! single scalar draw (far rain fluctuates the whole path at once), streaks
//! are rasterized at fresh random positions every frame, and the recorded
//! frame is a per-pixel Poisson draw around `S + F + D`.
//!
//! Counts scale linearly with the integration time: one radiance unit yields
//! one expected photon count per millisecond of exposure. A streak, which
//! occupies each covered pixel for only the crossing time `tau` of the
//! exposure, therefore contributes `streak_radiance * tau` counts regardless
//! of `T`: longer exposures smear the same photons over a longer trace.
//!
//! Every random draw comes from a substream keyed by `(seed, frame, layer)`,
//! so stacks are reproducible bit for bit under any parallel schedule, and any
//! single layer of any frame can be regenerated in isolation.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_arg, Error, Result};
use crate::imgio::{pgm, Image, StackManifest};
use crate::parallel;
use crate::rng::{self, tag};
use crate::scene::{AtmosphereParams, OpticsParams};

/// Upper bound on the pixel crossing time of a falling drop, ms.
pub const MAX_DROP_CROSSING_MS: f64 = 1.18;

/// Integration time at which `fog_mu_jitter` is specified, ms. Sweeps over
/// other exposures rescale the jitter by `sqrt(reference / T)`: a longer
/// exposure averages more drop transits, so the per-frame transmittance
/// fluctuation variance falls off as `1/T`.
pub const JITTER_REFERENCE_MS: f64 = 30.0;

/// Nominal dynamic range of synthesized photon-count frames; matches the
/// 16-bit PGM depth they are persisted at.
pub const FRAME_PEAK: f64 = 65535.0;

/// Rain field parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainParams {
    /// Expected number of streak-regime drops visible per frame.
    pub drops_per_frame: f64,
    /// Fall speed v, m/s.
    pub fall_speed: f64,
    /// Crossing time tau: how long a drop projects onto one pixel, ms.
    pub drop_crossing_time_ms: f64,
    /// Time-averaged irradiance amplitude of a streak, radiance units.
    pub streak_radiance: f64,
    /// Mean transmittance of the rain medium, in (0, 1].
    pub fog_mu_mean: f64,
    /// Relative std of the per-frame transmittance draw, at the reference
    /// exposure [`JITTER_REFERENCE_MS`].
    pub fog_mu_jitter: f64,
    /// Regime threshold, m: drops closer than this resolve as streaks,
    /// farther ones contribute to fog.
    pub z_m: f64,
}

impl RainParams {
    pub fn validate(&self) -> Result<()> {
        ensure_arg!(
            self.drops_per_frame.is_finite() && self.drops_per_frame >= 0.0,
            "drops_per_frame must be non-negative"
        );
        ensure_arg!(
            self.fall_speed.is_finite() && self.fall_speed > 0.0,
            "fall_speed must be positive"
        );
        ensure_arg!(
            self.drop_crossing_time_ms > 0.0 && self.drop_crossing_time_ms <= MAX_DROP_CROSSING_MS,
            "drop_crossing_time_ms must lie in (0, {MAX_DROP_CROSSING_MS}]"
        );
        ensure_arg!(
            self.streak_radiance.is_finite() && self.streak_radiance >= 0.0,
            "streak_radiance must be non-negative"
        );
        ensure_arg!(
            self.fog_mu_mean > 0.0 && self.fog_mu_mean <= 1.0,
            "fog_mu_mean must lie in (0, 1]"
        );
        ensure_arg!(
            self.fog_mu_jitter.is_finite() && self.fog_mu_jitter >= 0.0,
            "fog_mu_jitter must be non-negative"
        );
        ensure_arg!(self.z_m.is_finite() && self.z_m > 0.0, "z_m must be positive");
        Ok(())
    }

    /// Copy with the fog jitter rescaled from the reference exposure to
    /// `t_ms` (variance proportional to `1/T`).
    pub fn with_jitter_for_exposure(&self, t_ms: f64) -> RainParams {
        RainParams {
            fog_mu_jitter: self.fog_mu_jitter * (JITTER_REFERENCE_MS / t_ms).sqrt(),
            ..*self
        }
    }
}

/// One sampled streak-regime drop: its depth fixes the projected streak
/// length; the image position is drawn at rasterization time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropSample {
    pub z: f64,
}

/// A rasterized streak as it landed in a frame, recorded for brute-force
/// re-enumeration in tests. `len_px` is the drawn length before clipping at
/// the bottom edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterStreak {
    pub col: usize,
    pub row_top: usize,
    pub len_px: usize,
    /// Added intensity per covered pixel, radiance units.
    pub amplitude: f64,
}

/// Per-frame expected photon-count layers. `scene + fog + streak` recomposes
/// the pre-noise expected frame exactly, term by term in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTrace {
    width: usize,
    height: usize,
    scene: Vec<Vec<f64>>,
    fog: Vec<Vec<f64>>,
    streak: Vec<Vec<f64>>,
}

/// The three photon populations a rainy measurement decomposes into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Scene,
    Fog,
    Streak,
}

impl ComponentTrace {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_frames(&self) -> usize {
        self.scene.len()
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Expected counts of one component in frame `k`, row-major.
    pub fn layer(&self, component: Component, k: usize) -> &[f64] {
        match component {
            Component::Scene => &self.scene[k],
            Component::Fog => &self.fog[k],
            Component::Streak => &self.streak[k],
        }
    }

    /// Recomposes the pre-noise expected frame `k` in the canonical
    /// scene + fog + streak order used during synthesis.
    pub fn expected_frame(&self, k: usize) -> Vec<f64> {
        let (s, f, d) = (&self.scene[k], &self.fog[k], &self.streak[k]);
        (0..s.len()).map(|i| s[i] + f[i] + d[i]).collect()
    }

    /// Writes the three layers as raw little-endian f64 planes plus a JSON
    /// descriptor (`trace.json`). PGM would quantize the expected counts;
    /// statistics need them lossless.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let files = [
            ("scene.f64", &self.scene),
            ("fog.f64", &self.fog),
            ("streak.f64", &self.streak),
        ];
        for (name, planes) in files {
            let mut bytes = Vec::with_capacity(planes.len() * self.pixel_count() * 8);
            for plane in planes.iter() {
                for &v in plane {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
            std::fs::write(dir.join(name), bytes)?;
        }
        let descriptor = serde_json::json!({
            "width": self.width,
            "height": self.height,
            "n_frames": self.n_frames(),
            "scene": "scene.f64",
            "fog": "fog.f64",
            "streak": "streak.f64",
        });
        let path = dir.join("trace.json");
        std::fs::write(&path, format!("{:#}\n", descriptor))?;
        Ok(path)
    }

    pub fn load(dir: &Path) -> Result<ComponentTrace> {
        #[derive(Deserialize)]
        struct Descriptor {
            width: usize,
            height: usize,
            n_frames: usize,
            scene: String,
            fog: String,
            streak: String,
        }
        let text = std::fs::read_to_string(dir.join("trace.json"))?;
        let desc: Descriptor = serde_json::from_str(&text)?;
        ensure_arg!(
            desc.width > 0 && desc.height > 0 && desc.n_frames > 0,
            "trace descriptor has empty dimensions"
        );
        let npix = desc.width * desc.height;
        let load_planes = |name: &str| -> Result<Vec<Vec<f64>>> {
            let bytes = std::fs::read(dir.join(name))?;
            ensure_arg!(
                bytes.len() == desc.n_frames * npix * 8,
                "{name} holds {} bytes, expected {}",
                bytes.len(),
                desc.n_frames * npix * 8
            );
            Ok(bytes
                .chunks_exact(npix * 8)
                .map(|plane| {
                    plane
                        .chunks_exact(8)
                        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                        .collect()
                })
                .collect())
        };
        Ok(ComponentTrace {
            width: desc.width,
            height: desc.height,
            scene: load_planes(&desc.scene)?,
            fog: load_planes(&desc.fog)?,
            streak: load_planes(&desc.streak)?,
        })
    }
}

/// An ordered sequence of same-shape frames with acquisition timing.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub frames: Vec<Image>,
    pub integration_time_ms: f64,
    pub measurement_interval_ms: f64,
    pub seed: u64,
}

impl FrameStack {
    pub fn validate(&self) -> Result<()> {
        ensure_arg!(self.frames.len() >= 2, "a stack needs at least 2 frames");
        ensure_arg!(
            self.integration_time_ms.is_finite() && self.integration_time_ms > 0.0,
            "integration time must be positive"
        );
        ensure_arg!(
            self.measurement_interval_ms >= self.integration_time_ms,
            "measurement interval {} shorter than integration time {}",
            self.measurement_interval_ms,
            self.integration_time_ms
        );
        let first = &self.frames[0];
        ensure_arg!(
            self.frames.iter().all(|f| f.same_shape(first)),
            "frames differ in shape"
        );
        Ok(())
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn peak(&self) -> f64 {
        self.frames[0].peak()
    }

    /// Writes frames as `frame_NNNN.pgm` plus `manifest.json` into `dir`;
    /// returns the manifest path.
    pub fn save(&self, dir: &Path, clean_reference: Option<String>) -> Result<PathBuf> {
        self.validate()?;
        std::fs::create_dir_all(dir)?;
        let mut names = Vec::with_capacity(self.frames.len());
        for (k, frame) in self.frames.iter().enumerate() {
            let name = format!("frame_{k:04}.pgm");
            pgm::write_pgm(frame, &dir.join(&name))?;
            names.push(name);
        }
        let manifest = StackManifest {
            frames: names,
            integration_time_ms: self.integration_time_ms,
            measurement_interval_ms: self.measurement_interval_ms,
            seed: self.seed,
            clean_reference,
        };
        let path = dir.join("manifest.json");
        manifest.save(&path)?;
        Ok(path)
    }

    pub fn load(manifest_path: &Path) -> Result<FrameStack> {
        let manifest = StackManifest::load(manifest_path)?;
        let mut frames = Vec::with_capacity(manifest.frames.len());
        for path in manifest.frame_paths(manifest_path) {
            frames.push(pgm::read_pgm(&path)?);
        }
        let stack = FrameStack {
            frames,
            integration_time_ms: manifest.integration_time_ms,
            measurement_interval_ms: manifest.measurement_interval_ms,
            seed: manifest.seed,
        };
        stack.validate()?;
        Ok(stack)
    }
}

/// Length in pixels of the streak a drop at depth `z` draws during `t_ms`.
pub fn streak_len_px(optics: &OpticsParams, z: f64, fall_speed: f64, t_ms: f64) -> usize {
    let projected = optics.magnification_at(z) * fall_speed * (t_ms / 1000.0);
    (projected / optics.pixel_pitch).ceil() as usize
}

/// Draws the set of streak-regime drops for one frame: a Poisson count, each
/// with a depth from the near half of the streak regime `[z_m/2, z_m)`.
pub fn sample_drops(rain: &RainParams, rng: &mut impl Rng) -> Vec<DropSample> {
    if rain.drops_per_frame == 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(rain.drops_per_frame).expect("validated rate").sample(rng) as usize;
    (0..count)
        .map(|_| DropSample {
            z: rng.gen_range(rain.z_m * 0.5..rain.z_m),
        })
        .collect()
}

/// Rasterizes one frame's streak layer in radiance units.
///
/// Each drop adds `streak_radiance * tau / T` to a vertical run of pixels
/// starting at a uniformly random position, clipped at the bottom edge
/// (re-entry at the top is covered by the uniform resampling). Overlapping
/// streaks accumulate. Also returns the placement log for re-enumeration.
pub fn render_streak_layer(
    drops: &[DropSample],
    rain: &RainParams,
    optics: &OpticsParams,
    width: usize,
    height: usize,
    t_ms: f64,
    rng: &mut impl Rng,
) -> Result<(Image, Vec<RasterStreak>)> {
    ensure_arg!(t_ms.is_finite() && t_ms > 0.0, "integration time must be positive");
    ensure_arg!(
        t_ms >= rain.drop_crossing_time_ms,
        "integration time {t_ms} ms shorter than the drop crossing time {} ms",
        rain.drop_crossing_time_ms
    );
    let amplitude = rain.streak_radiance * rain.drop_crossing_time_ms / t_ms;
    let mut data = vec![0.0; width * height];
    let mut log = Vec::with_capacity(drops.len());
    for drop in drops {
        let len_px = streak_len_px(optics, drop.z, rain.fall_speed, t_ms);
        let col = rng.gen_range(0..width);
        let row_top = rng.gen_range(0..height);
        for row in row_top..(row_top + len_px).min(height) {
            data[row * width + col] += amplitude;
        }
        log.push(RasterStreak {
            col,
            row_top,
            len_px,
            amplitude,
        });
    }
    Ok((Image::new(width, height, amplitude.max(1.0), data)?, log))
}

/// Per-frame transmittance draw: `clamp(Normal(mean, mean * jitter), 0, 1)`.
pub fn sample_fog_mu(rain: &RainParams, rng: &mut impl Rng) -> f64 {
    if rain.fog_mu_jitter == 0.0 {
        return rain.fog_mu_mean;
    }
    let sigma = rain.fog_mu_mean * rain.fog_mu_jitter;
    let draw = Normal::new(rain.fog_mu_mean, sigma).expect("validated params").sample(rng);
    draw.clamp(0.0, 1.0)
}

/// Independent Poisson draw per pixel around the expected counts.
pub fn sample_photons(expected: &Image, rng: &mut impl Rng) -> Result<Image> {
    let data = expected
        .data()
        .iter()
        .map(|&mean| {
            if mean == 0.0 {
                0.0
            } else {
                Poisson::new(mean).expect("non-negative finite mean").sample(rng)
            }
        })
        .collect();
    Image::new(expected.width(), expected.height(), expected.peak(), data)
}

/// Synthesis switches separate from the physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    /// When false, frames are the expected counts themselves (no Poisson
    /// sampling); used by noiseless identity tests and demos.
    pub photon_noise: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { photon_noise: true }
    }
}

/// Everything one synthesis run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthResult {
    pub stack: FrameStack,
    pub trace: ComponentTrace,
    /// Pre-noise expected frames, exactly as passed to the photon sampler.
    pub expected: Vec<Vec<f64>>,
    /// Streak placements per frame, for brute-force re-enumeration.
    pub streaks: Vec<Vec<RasterStreak>>,
}

/// Synthesizes a rainy photon-count stack with its ground-truth decomposition.
///
/// Per frame `k`: draw `mu_k`, form `S = mu_k * B * T` and
/// `F = (1 - mu_k) * airlight * T`, rasterize fresh streaks into `D`, then
/// record `Poisson(S + F + D)`. Layer substreams are keyed by
/// `(seed, k, layer)`, so the result is independent of evaluation order.
#[allow(clippy::too_many_arguments)]
pub fn synth_stack(
    clean: &Image,
    optics: &OpticsParams,
    atmosphere: &AtmosphereParams,
    rain: &RainParams,
    n_frames: usize,
    t_ms: f64,
    dt_ms: f64,
    seed: u64,
    options: &SynthOptions,
) -> Result<SynthResult> {
    rain.validate()?;
    atmosphere.validate()?;
    ensure_arg!(n_frames >= 2, "need at least 2 frames, got {n_frames}");
    ensure_arg!(t_ms.is_finite() && t_ms > 0.0, "integration time must be positive");
    ensure_arg!(
        dt_ms >= t_ms,
        "measurement interval {dt_ms} ms shorter than integration time {t_ms} ms"
    );
    ensure_arg!(
        t_ms >= rain.drop_crossing_time_ms,
        "integration time {t_ms} ms shorter than the drop crossing time {} ms",
        rain.drop_crossing_time_ms
    );

    let (width, height) = (clean.width(), clean.height());
    let airlight = atmosphere.airlight;

    struct FrameParts {
        scene: Vec<f64>,
        fog: Vec<f64>,
        streak: Vec<f64>,
        expected: Vec<f64>,
        frame: Result<Image>,
        log: Vec<RasterStreak>,
    }

    let parts: Vec<FrameParts> = parallel::map_indexed(n_frames, |k| {
        let key = k as u64;
        let mut fog_rng = rng::substream(seed, &[key, tag::FOG]);
        let mu = sample_fog_mu(rain, &mut fog_rng);

        let mut drop_rng = rng::substream(seed, &[key, tag::DROPS]);
        let drops = sample_drops(rain, &mut drop_rng);
        let (layer, log) =
            render_streak_layer(&drops, rain, optics, width, height, t_ms, &mut drop_rng)
                .expect("preconditions checked above");

        let npix = width * height;
        let mut scene = Vec::with_capacity(npix);
        let mut fog = Vec::with_capacity(npix);
        let mut streak = Vec::with_capacity(npix);
        let mut expected = Vec::with_capacity(npix);
        for i in 0..npix {
            let s = mu * clean.data()[i] * t_ms;
            let f = (1.0 - mu) * airlight * t_ms;
            let d = layer.data()[i] * t_ms;
            scene.push(s);
            fog.push(f);
            streak.push(d);
            expected.push(s + f + d);
        }

        let frame = Image::new(width, height, FRAME_PEAK, expected.clone()).and_then(|exp| {
            if options.photon_noise {
                let mut photon_rng = rng::substream(seed, &[key, tag::PHOTON]);
                sample_photons(&exp, &mut photon_rng)
            } else {
                Ok(exp)
            }
        });

        FrameParts {
            scene,
            fog,
            streak,
            expected,
            frame,
            log,
        }
    });

    let mut trace = ComponentTrace {
        width,
        height,
        scene: Vec::with_capacity(n_frames),
        fog: Vec::with_capacity(n_frames),
        streak: Vec::with_capacity(n_frames),
    };
    let mut frames = Vec::with_capacity(n_frames);
    let mut expected = Vec::with_capacity(n_frames);
    let mut streaks = Vec::with_capacity(n_frames);
    for p in parts {
        trace.scene.push(p.scene);
        trace.fog.push(p.fog);
        trace.streak.push(p.streak);
        frames.push(p.frame?);
        expected.push(p.expected);
        streaks.push(p.log);
    }

    Ok(SynthResult {
        stack: FrameStack {
            frames,
            integration_time_ms: t_ms,
            measurement_interval_ms: dt_ms,
            seed,
        },
        trace,
        expected,
        streaks,
    })
}

/// JSON-facing synthesis configuration; field names mirror the parameter
/// structs. `optics.s_i` may be omitted to mean "focused at s_o".
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SynthConfig {
    pub optics: OpticsConfig,
    pub atmosphere: AtmosphereParams,
    pub rain: RainParams,
    #[serde(default = "default_photon_noise")]
    pub photon_noise: bool,
}

fn default_photon_noise() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OpticsConfig {
    pub s_o: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_i: Option<f64>,
    pub f: f64,
    pub pixel_pitch: f64,
}

impl SynthConfig {
    /// Validated optics: explicit `s_i` must satisfy the lens equation,
    /// otherwise the camera is focused at `s_o`.
    pub fn optics(&self) -> Result<OpticsParams> {
        match self.optics.s_i {
            Some(s_i) => OpticsParams::new(self.optics.s_o, s_i, self.optics.f, self.optics.pixel_pitch),
            None => OpticsParams::focused(self.optics.s_o, self.optics.f, self.optics.pixel_pitch),
        }
    }

    pub fn options(&self) -> SynthOptions {
        SynthOptions {
            photon_noise: self.photon_noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optics()?;
        self.atmosphere.validate()?;
        self.rain.validate()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SynthConfig> {
        let text = std::fs::read_to_string(path)?;
        let config: SynthConfig = serde_json::from_str(&text).map_err(|e| {
            Error::argument(format!("config {}: {e}", path.display()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("plain data serializes");
        text.push('\n');
        text
    }
}

/// Calibrated default configuration: a moderately heavy rain over a 20 m
/// scene. The mean transmittance equals exp(-beta * z_object), so the static
/// haze description and the fluctuating-medium mean agree.
impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            optics: OpticsConfig {
                s_o: 20.0,
                s_i: None,
                f: 0.05,
                pixel_pitch: 5e-5,
            },
            atmosphere: AtmosphereParams {
                beta: 0.006391668575494244, // -ln(0.88) / 20
                airlight: 200.0,
                z_object: 20.0,
            },
            rain: RainParams {
                drops_per_frame: 15.0,
                fall_speed: 3.0,
                drop_crossing_time_ms: 1.0,
                streak_radiance: 5600.0,
                fog_mu_mean: 0.88,
                fog_mu_jitter: 0.11,
                z_m: 10.0,
            },
            photon_noise: true,
        }
    }
}

/// Convenience wrapper running [`synth_stack`] from a [`SynthConfig`].
pub fn synth_from_config(
    clean: &Image,
    config: &SynthConfig,
    n_frames: usize,
    t_ms: f64,
    dt_ms: f64,
    seed: u64,
) -> Result<SynthResult> {
    synth_stack(
        clean,
        &config.optics()?,
        &config.atmosphere,
        &config.rain,
        n_frames,
        t_ms,
        dt_ms,
        seed,
        &config.options(),
    )
}

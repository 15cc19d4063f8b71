//! Synthetic subtle-attribute datasets.
//!
//! Every camera gets a fixed geolocation, a colour bias and a spatial texture
//! that all of its frames share. Sunrise/sunset frames add a weak horizontal
//! luminance ramp (brightening left to right at sunrise, right to left at
//! sunset) on top of that nuisance, plus i.i.d. pixel noise. Each (camera,
//! local day) has exactly one sunrise and one sunset frame, timestamped a few
//! minutes from the computed solar event so the labels agree with
//! [`crate::solar::label_window`].
//!
//! The temperature variant emits one 11:00 (local solar) frame per camera and
//! day; a latent warmth value brightens the frame and sets the temperature
//! through an affine map plus a per-camera offset.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{encode_ppm, write_catalog, Dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::seed::{self, tags};
use crate::solar::{self, GeoPoint, SunLabel, OFFICIAL_ZENITH_DEG};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SynthTask {
    SunriseSunset,
    Temperature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub task: SynthTask,
    pub n_cameras: usize,
    pub days_per_camera: usize,
    pub height: usize,
    pub width: usize,
    /// Amplitude of the class cue (ramp end-to-end half range, or warmth gain).
    pub cue_strength: f64,
    /// Amplitude of the per-camera colour bias and texture.
    pub nuisance_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            task: SynthTask::SunriseSunset,
            n_cameras: 10,
            days_per_camera: 20,
            height: 64,
            width: 64,
            cue_strength: 0.05,
            nuisance_strength: 0.5,
            noise_sigma: 0.02,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_cameras == 0 || self.days_per_camera == 0 {
            return bad("n_cameras and days_per_camera must be positive".into());
        }
        if self.height < 8 || self.width < 8 {
            return bad(format!("image {}x{} is smaller than 8x8", self.height, self.width));
        }
        for (name, v) in [
            ("cue_strength", self.cue_strength),
            ("nuisance_strength", self.nuisance_strength),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }

    pub fn n_records(&self) -> usize {
        match self.task {
            SynthTask::SunriseSunset => 2 * self.n_cameras * self.days_per_camera,
            SynthTask::Temperature => self.n_cameras * self.days_per_camera,
        }
    }
}

/// Generated records (with paths relative to the output root) and their
/// 8-bit RGB rasters.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub records: Vec<ImageRecord>,
    pub rgb: Vec<Vec<u8>>,
}

impl SynthDataset {
    /// Decoded tensors, identical to what [`super::load_image`] returns for the written files.
    pub fn to_dataset(&self) -> Dataset {
        let (h, w) = (self.config.height, self.config.width);
        let images = self
            .rgb
            .iter()
            .map(|b| Tensor::from_interleaved_u8(3, h, w, b).expect("raster size"))
            .collect();
        Dataset {
            records: self.records.clone(),
            images,
        }
    }
}

struct Camera {
    id: String,
    geo: GeoPoint,
    start: NaiveDate,
    bias: [f64; 3],
    texture: Vec<f64>,
    temp_offset: f64,
}

fn camera(config: &SynthConfig, index: usize) -> Camera {
    let mut rng = seed::stream(config.seed, tags::SYNTH_CAMERA, index as u64);
    let lat = rng.random_range(-55.0..55.0);
    let lon = rng.random_range(-180.0..180.0);
    let lat = (lat * 1e4_f64).round() / 1e4;
    let lon = (lon * 1e4_f64).round() / 1e4;
    let base = NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date");
    let start = base + Duration::days(rng.random_range(0..365));
    let bias = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ];
    let texture = texture(&mut rng, config.height, config.width);
    let temp_offset = rng.random_range(-5.0..5.0);
    Camera {
        id: format!("cam{index:03}"),
        geo: GeoPoint::new(lat, lon).expect("generated geo in range"),
        start,
        bias,
        texture,
        temp_offset,
    }
}

/// Per-camera texture in `[-1, 1]`, laid out `(channel, row, col)`: a smooth
/// field of a few random low-frequency waves (shared across channels with
/// per-channel gains) blended with a fixed per-pixel pattern.
fn texture(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Vec<f64> {
    const WAVES: usize = 6;
    let waves: Vec<(f64, f64, f64, f64)> = (0..WAVES)
        .map(|_| {
            let fy = rng.random_range(0..3) as f64;
            let fx = rng.random_range(if fy == 0.0 { 1 } else { 0 }..3) as f64;
            (fx, fy, rng.random_range(0.0..2.0 * PI), rng.random_range(0.5..1.0))
        })
        .collect();
    let gains = [
        rng.random_range(0.5..1.0),
        rng.random_range(0.5..1.0),
        rng.random_range(0.5..1.0),
    ];
    let mut smooth = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            smooth[i * w + j] = waves
                .iter()
                .map(|&(fx, fy, phase, amp)| {
                    amp * (2.0 * PI * (fx * j as f64 / w as f64 + fy * i as f64 / h as f64) + phase).cos()
                })
                .sum();
        }
    }
    let peak = smooth.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut out = Vec::with_capacity(3 * h * w);
    for gain in gains {
        for s in &smooth {
            let pixel: f64 = rng.random_range(-1.0..1.0);
            out.push(0.5 * gain * s / peak + 0.5 * pixel);
        }
    }
    out
}

/// Horizontal ramp in `[-1, 1]`, rising left to right.
fn ramp(j: usize, w: usize) -> f64 {
    2.0 * j as f64 / (w - 1) as f64 - 1.0
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn render(
    config: &SynthConfig,
    cam: &Camera,
    frame_seed: u64,
    signal: impl Fn(usize, usize, usize) -> f64,
) -> Vec<u8> {
    let (h, w) = (config.height, config.width);
    let mut rng = seed::rng(frame_seed);
    let noise = Normal::new(0.0, config.noise_sigma.max(0.0)).expect("valid sigma");
    let half = 0.5 * config.nuisance_strength;
    let mut rgb = vec![0u8; 3 * h * w];
    for i in 0..h {
        for j in 0..w {
            for c in 0..3 {
                let nuisance = half * (0.5 * cam.bias[c] + cam.texture[(c * h + i) * w + j]);
                let n = if config.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                rgb[(i * w + j) * 3 + c] = quantize(0.5 + nuisance + signal(c, i, j) + n);
            }
        }
    }
    rgb
}

fn records_and_frames(config: &SynthConfig, with_pixels: bool) -> Result<(Vec<ImageRecord>, Vec<Vec<u8>>)> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.n_records());
    let mut rgb = Vec::new();
    let w = config.width;
    for c in 0..config.n_cameras {
        let cam = camera(config, c);
        let mut scene = seed::stream(config.seed, tags::SYNTH_SCENE, c as u64);
        let day_noise = Normal::new(0.0, 0.3).expect("valid sigma");
        for d in 0..config.days_per_camera {
            let date = cam.start + Duration::days(d as i64);
            match config.task {
                SynthTask::SunriseSunset => {
                    for label in SunLabel::ALL {
                        let at = solar::event_instant(cam.geo, date, label.event_kind(), OFFICIAL_ZENITH_DEG)
                            .ok_or_else(|| Error::Config(format!("no {label} for {} on {date}", cam.id)))?;
                        let jitter = scene.random_range(-300..=300);
                        let id = format!("{}_d{d:03}_{}", cam.id, label.as_str());
                        records.push(ImageRecord {
                            path: PathBuf::from(format!("images/{id}.ppm")),
                            id,
                            camera_id: cam.id.clone(),
                            geo: cam.geo,
                            timestamp_utc: at + Duration::seconds(jitter),
                            label: Some(label),
                            temperature_c: None,
                        });
                        if with_pixels {
                            let sign = if label == SunLabel::Sunrise { 1.0 } else { -1.0 };
                            let amp = sign * config.cue_strength;
                            let frame_seed = seed::derive(config.seed, tags::SYNTH_FRAME, records.len() as u64);
                            rgb.push(render(config, &cam, frame_seed, |_, _, j| amp * ramp(j, w)));
                        }
                    }
                }
                SynthTask::Temperature => {
                    let season = (2.0 * PI * (f64::from(chrono::Datelike::ordinal(&date)) - 100.0) / 365.25).sin();
                    let warmth = (season + day_noise.sample(&mut scene)).clamp(-1.5, 1.5);
                    let temperature = ((12.0 + 10.0 * warmth + cam.temp_offset) * 100.0).round() / 100.0;
                    let noon = date.and_hms_opt(11, 0, 0).expect("valid time").and_utc();
                    let at = noon - Duration::minutes((cam.geo.solar_offset_hours() * 60.0).round() as i64);
                    let id = format!("{}_d{d:03}", cam.id);
                    records.push(ImageRecord {
                        path: PathBuf::from(format!("images/{id}.ppm")),
                        id,
                        camera_id: cam.id.clone(),
                        geo: cam.geo,
                        timestamp_utc: at,
                        label: None,
                        temperature_c: Some(temperature),
                    });
                    if with_pixels {
                        let tint = [1.0, 0.7, 0.4];
                        let amp = config.cue_strength * warmth;
                        let frame_seed = seed::derive(config.seed, tags::SYNTH_FRAME, records.len() as u64);
                        rgb.push(render(config, &cam, frame_seed, |c, _, _| amp * tint[c]));
                    }
                }
            }
        }
    }
    Ok((records, rgb))
}

/// Metadata only; no pixels are rendered.
pub fn generate_records(config: &SynthConfig) -> Result<Vec<ImageRecord>> {
    records_and_frames(config, false).map(|(r, _)| r)
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    let (records, rgb) = records_and_frames(config, true)?;
    Ok(SynthDataset {
        config: config.clone(),
        records,
        rgb,
    })
}

/// Writes `catalog.csv` and `images/*.ppm` under `out_dir` and returns the
/// records with absolute image paths.
pub fn gen_synthetic(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    let out_dir = out_dir.as_ref();
    let data = generate(config)?;
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let mut records = data.records;
    for (rec, rgb) in records.iter_mut().zip(&data.rgb) {
        rec.path = out_dir.join(&rec.path);
        std::fs::write(&rec.path, encode_ppm(config.width, config.height, rgb))
            .map_err(|e| Error::io(&rec.path, e))?;
    }
    write_catalog(out_dir.join("catalog.csv"), &records)?;
    Ok(records)
}

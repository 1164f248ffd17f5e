//! Procedural road episodes under three lighting conditions.
//!
//! Each frame is a 160×320 perspective view of a two-edged road on grass
//! under a sky gradient. The road bends with curvature `κ ∈ [−1, 1]`
//! (positive bends right), which is also the steering label. Curvature
//! follows a seeded AR(1) walk, so consecutive frames change smoothly.
//! Conditions scale brightness and contrast and add Gaussian pixel noise.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::{Condition, Episode, Sample};
use crate::tensor::par::map_ordered;
use crate::{Error, Result, Rng};

pub const HEIGHT: u32 = 160;
pub const WIDTH: u32 = 320;
const HORIZON: u32 = 64;

const SKY_TOP: [f64; 3] = [110.0, 160.0, 225.0];
const SKY_HORIZON: [f64; 3] = [185.0, 205.0, 235.0];
const GRASS: [f64; 3] = [70.0, 130.0, 60.0];
const ROAD: [f64; 3] = [105.0, 105.0, 110.0];
const EDGE: [f64; 3] = [235.0, 235.0, 235.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lighting {
    pub brightness: f64,
    pub contrast: f64,
    pub noise_std: f64,
}

impl Condition {
    pub fn lighting(self) -> Lighting {
        let (brightness, contrast, noise_std) = match self {
            Condition::Sunny => (1.0, 1.0, 2.0),
            Condition::Cloudy => (0.7, 0.8, 5.0),
            Condition::Night => (0.35, 0.6, 12.0),
        };
        Lighting {
            brightness,
            contrast,
            noise_std,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// AR(1) coefficient of the curvature walk.
    pub curvature_persistence: f64,
    /// Stationary standard deviation of the walk before clipping.
    pub curvature_std: f64,
    /// Horizontal displacement (pixels) of the road at the horizon for κ = 1.
    pub bend_px: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            curvature_persistence: 0.97,
            curvature_std: 0.5,
            bend_px: 140.0,
        }
    }
}

/// Seeded curvature sequence in `[−1, 1]`.
pub fn curvature_walk(cfg: &SynthConfig, n: usize, seed: u64) -> Vec<f32> {
    let mut rng = Rng::derive(seed, 0);
    let rho = cfg.curvature_persistence;
    let innovation = (1.0 - rho * rho).sqrt() * cfg.curvature_std;
    let mut k = (rng.normal() * cfg.curvature_std).clamp(-1.0, 1.0);
    (0..n)
        .map(|_| {
            let out = k as f32;
            k = (rho * k + innovation * rng.normal()).clamp(-1.0, 1.0);
            out
        })
        .collect()
}

/// One frame. `camera_offset` displaces the camera left (positive) or right
/// (negative) in units of the road half-width; `noise` drives pixel noise.
pub fn render_frame(
    cfg: &SynthConfig,
    kappa: f64,
    camera_offset: f64,
    lighting: Lighting,
    noise: &mut Rng,
) -> RgbImage {
    let mut img = RgbImage::new(WIDTH, HEIGHT);
    let half = WIDTH as f64 / 2.0;
    for y in 0..HEIGHT {
        let row: Vec<[f64; 3]> = if y < HORIZON {
            let t = y as f64 / HORIZON as f64;
            let c: [f64; 3] = std::array::from_fn(|i| SKY_TOP[i] + (SKY_HORIZON[i] - SKY_TOP[i]) * t);
            vec![c; WIDTH as usize]
        } else {
            let d = (y - HORIZON + 1) as f64 / (HEIGHT - HORIZON) as f64;
            let hw = 6.0 + 150.0 * d;
            let line = 1.0 + 4.0 * d;
            let center = half + camera_offset * hw + cfg.bend_px * kappa * (1.0 - d).powi(2);
            (0..WIDTH)
                .map(|x| {
                    let dx = (x as f64 + 0.5 - center).abs();
                    if dx > hw {
                        GRASS
                    } else if dx > hw - line {
                        EDGE
                    } else {
                        ROAD
                    }
                })
                .collect()
        };
        for (x, base) in row.into_iter().enumerate() {
            let px = base.map(|v| {
                let lit = lighting.brightness * (128.0 + lighting.contrast * (v - 128.0));
                (lit + lighting.noise_std * noise.normal()).round().clamp(0.0, 255.0) as u8
            });
            img.put_pixel(x as u32, y, Rgb(px));
        }
    }
    img
}

/// `n` consecutive frames under `condition`; bit-identical for equal
/// arguments.
pub fn synth_generate(condition: Condition, n: usize, seed: u64) -> Result<Episode> {
    synth_generate_with(&SynthConfig::default(), condition, n, seed)
}

pub fn synth_generate_with(cfg: &SynthConfig, condition: Condition, n: usize, seed: u64) -> Result<Episode> {
    if n == 0 {
        return Err(Error::Empty("synthetic episode"));
    }
    let kappas = curvature_walk(cfg, n, seed);
    let lighting = condition.lighting();
    let noise_seed = Rng::mix(&[seed, condition as u64]);
    let samples = map_ordered(&kappas, |t, &k| {
        let mut noise = Rng::derive(noise_seed, t as u64 + 1);
        Sample::new(render_frame(cfg, k as f64, 0.0, lighting, &mut noise), k)
    });
    Ok(Episode {
        condition: Some(condition),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::augment::mean_luma;
    use crate::data::{AugmentConfig, AugmentParams, Camera};

    #[test]
    fn straight_road_is_centred_and_symmetric() {
        let quiet = Lighting {
            brightness: 1.0,
            contrast: 1.0,
            noise_std: 0.0,
        };
        let img = render_frame(&SynthConfig::default(), 0.0, 0.0, quiet, &mut Rng::new(0));
        let mirrored = image::imageops::flip_horizontal(&img);
        assert_eq!(img, mirrored);
        assert_eq!(img.get_pixel(WIDTH / 2, 120).0, [105, 105, 110]);
    }

    #[test]
    fn positive_curvature_bends_right() {
        let quiet = Condition::Sunny.lighting();
        let cfg = SynthConfig::default();
        let img = render_frame(
            &cfg,
            0.8,
            0.0,
            Lighting {
                noise_std: 0.0,
                ..quiet
            },
            &mut Rng::new(0),
        );
        let y = HORIZON + 8;
        let road: Vec<u32> = (0..WIDTH)
            .filter(|&x| img.get_pixel(x, y).0 == [105, 105, 110])
            .collect();
        let mid = road.iter().sum::<u32>() as f64 / road.len() as f64;
        assert!(mid > WIDTH as f64 / 2.0 + 20.0);
    }

    #[test]
    fn deterministic_and_labelled_by_curvature() {
        let a = synth_generate(Condition::Cloudy, 5, 11).unwrap();
        let b = synth_generate(Condition::Cloudy, 5, 11).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.center, y.center);
            assert_eq!(x.steering, y.steering);
            assert!((-1.0..=1.0).contains(&x.steering));
        }
        assert_eq!(a.steering(), curvature_walk(&SynthConfig::default(), 5, 11));
        assert!(synth_generate(Condition::Sunny, 0, 1).is_err());
    }

    #[test]
    fn conditions_order_by_luminance() {
        let mean = |c| {
            let ep = synth_generate(c, 100, 3).unwrap();
            ep.samples.iter().map(|s| mean_luma(&s.center)).sum::<f64>() / 100.0
        };
        let (sunny, cloudy, night) = (mean(Condition::Sunny), mean(Condition::Cloudy), mean(Condition::Night));
        assert!(night < cloudy && cloudy < sunny, "{night} {cloudy} {sunny}");
    }

    #[test]
    fn mirrored_left_camera_matches_right_camera() {
        let cfg = SynthConfig::default();
        let light = Condition::Sunny.lighting();
        let left = render_frame(&cfg, 0.0, 0.25, light, &mut Rng::new(1));
        let right = render_frame(&cfg, 0.0, -0.25, light, &mut Rng::new(2));
        let mut sample = Sample::new(render_frame(&cfg, 0.0, 0.0, light, &mut Rng::new(3)), 0.0);
        sample.left = Some(std::sync::Arc::new(left));
        sample.right = Some(std::sync::Arc::new(right));
        let aug = AugmentConfig::default();
        let mut p = AugmentParams::identity();
        p.camera = Camera::Left;
        p.flip = true;
        let (mirrored, mirrored_label) = p.apply(&aug, &sample);
        let (right, right_label) = AugmentParams {
            camera: Camera::Right,
            ..AugmentParams::identity()
        }
        .apply(&aug, &sample);
        assert!((mirrored_label - right_label).abs() < 1e-7);
        let diff: f64 = mirrored
            .as_raw()
            .iter()
            .zip(right.as_raw())
            .map(|(&a, &b)| (a as f64 - b as f64).abs())
            .sum::<f64>()
            / right.as_raw().len() as f64;
        assert!(diff < 4.0, "mean abs diff {diff}");
    }
}

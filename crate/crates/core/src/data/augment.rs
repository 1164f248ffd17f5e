//! Label-aware image augmentation on raw camera frames.
//!
//! Applied in this order: camera select, horizontal flip, translation,
//! shadow, brightness. Every transform keeps pixels in `0..=255` and the
//! label in `[−1, 1]`.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::preprocess::{rgb_to_ycbcr, ycbcr_to_rgb};
use super::Sample;
use crate::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Steering added for the left camera, subtracted for the right.
    pub camera_offset: f64,
    pub flip_prob: f64,
    /// Horizontal shift drawn from `±max_shift_x` pixels.
    pub max_shift_x: f64,
    pub max_shift_y: f64,
    /// Steering correction per pixel of horizontal shift.
    pub shift_steering_per_px: f64,
    pub shadow_prob: f64,
    /// Luma multiplier inside the shadow.
    pub shadow_factor: f64,
    pub brightness_prob: f64,
    pub brightness_range: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            camera_offset: 0.2,
            flip_prob: 0.5,
            max_shift_x: 50.0,
            max_shift_y: 10.0,
            shift_steering_per_px: 0.002,
            shadow_prob: 0.5,
            shadow_factor: 0.5,
            brightness_prob: 0.5,
            brightness_range: (0.6, 1.4),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Camera {
    Left,
    Center,
    Right,
}

/// Half-plane bounded by the line from `(x_top, 0)` to `(x_bottom, height)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shadow {
    pub x_top: f64,
    pub x_bottom: f64,
    /// Darken the side left of the line (otherwise the right side).
    pub left: bool,
}

/// One concrete draw of every augmentation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentParams {
    pub camera: Camera,
    pub flip: bool,
    pub shift_x: i32,
    pub shift_y: i32,
    pub shadow: Option<Shadow>,
    pub brightness: Option<f64>,
}

impl AugmentParams {
    /// No-op parameters.
    pub fn identity() -> Self {
        Self {
            camera: Camera::Center,
            flip: false,
            shift_x: 0,
            shift_y: 0,
            shadow: None,
            brightness: None,
        }
    }

    /// Camera selection is only drawn when side cameras exist; otherwise
    /// the center frame is used.
    pub fn sample(cfg: &AugmentConfig, rng: &mut Rng, side_cameras: bool, width: u32) -> Self {
        let camera = if side_cameras {
            [Camera::Left, Camera::Center, Camera::Right][rng.below(3)]
        } else {
            Camera::Center
        };
        let flip = rng.bernoulli(cfg.flip_prob);
        let shift_x = rng.range(-cfg.max_shift_x, cfg.max_shift_x).round() as i32;
        let shift_y = rng.range(-cfg.max_shift_y, cfg.max_shift_y).round() as i32;
        let shadow = rng.bernoulli(cfg.shadow_prob).then(|| Shadow {
            x_top: rng.range(0.0, width as f64),
            x_bottom: rng.range(0.0, width as f64),
            left: rng.bernoulli(0.5),
        });
        let brightness = rng
            .bernoulli(cfg.brightness_prob)
            .then(|| rng.range(cfg.brightness_range.0, cfg.brightness_range.1));
        Self {
            camera,
            flip,
            shift_x,
            shift_y,
            shadow,
            brightness,
        }
    }

    pub fn apply(&self, cfg: &AugmentConfig, sample: &Sample) -> (RgbImage, f32) {
        let mut steering = sample.steering as f64;
        let source = match (self.camera, &sample.left, &sample.right) {
            (Camera::Left, Some(l), _) => {
                steering += cfg.camera_offset;
                l
            }
            (Camera::Right, _, Some(r)) => {
                steering -= cfg.camera_offset;
                r
            }
            _ => &sample.center,
        };
        let mut img = if self.flip {
            steering = -steering;
            image::imageops::flip_horizontal(&**source)
        } else {
            (**source).clone()
        };
        if self.shift_x != 0 || self.shift_y != 0 {
            img = shift(&img, self.shift_x, self.shift_y);
            steering += cfg.shift_steering_per_px * self.shift_x as f64;
        }
        if let Some(s) = self.shadow {
            shade(&mut img, s, cfg.shadow_factor);
        }
        if let Some(f) = self.brightness {
            for px in img.pixels_mut() {
                *px = scale_luma(*px, f);
            }
        }
        (img, steering.clamp(-1.0, 1.0) as f32)
    }
}

/// Draws and applies fresh parameters.
pub fn augment(cfg: &AugmentConfig, sample: &Sample, rng: &mut Rng) -> (RgbImage, f32) {
    let p = AugmentParams::sample(cfg, rng, sample.has_side_cameras(), sample.center.width());
    p.apply(cfg, sample)
}

/// Translates content by `(dx, dy)` pixels, filling uncovered area black.
pub fn shift(img: &RgbImage, dx: i32, dy: i32) -> RgbImage {
    let (w, h) = img.dimensions();
    RgbImage::from_fn(w, h, |x, y| {
        let (sx, sy) = (x as i64 - dx as i64, y as i64 - dy as i64);
        if sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 {
            *img.get_pixel(sx as u32, sy as u32)
        } else {
            Rgb([0, 0, 0])
        }
    })
}

fn shade(img: &mut RgbImage, s: Shadow, factor: f64) {
    let h = img.height() as f64;
    for (x, y, px) in img.enumerate_pixels_mut() {
        let boundary = s.x_top + (s.x_bottom - s.x_top) * (y as f64 / h);
        if ((x as f64) < boundary) == s.left {
            *px = scale_luma(*px, factor);
        }
    }
}

/// Multiplies luma by `factor`, keeping chroma.
pub fn scale_luma(px: Rgb<u8>, factor: f64) -> Rgb<u8> {
    let (r, g, b) = (px.0[0] as f64, px.0[1] as f64, px.0[2] as f64);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
    ycbcr_to_rgb(y * factor, cb, cr)
}

/// Mean BT.601 luma of a frame.
pub fn mean_luma(img: &RgbImage) -> f64 {
    let total: u64 = img.pixels().map(|&p| rgb_to_ycbcr(p)[0] as u64).sum();
    total as f64 / (img.width() as f64 * img.height() as f64)
}

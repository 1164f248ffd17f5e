//! Camera frame → network input.
//!
//! A 160×320 frame is cropped to rows `[60, 135)`, resized to 66×200,
//! converted to full-range BT.601 YCbCr (rounded to 8 bits) and scaled by
//! `x / 127.5 − 1`. Frames of any other size are first resized to 160×320.

use std::borrow::Cow;

use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};

use crate::models::FRAME_SHAPE;
use crate::{Error, Result, Tensor};

pub const INPUT_HEIGHT: u32 = 160;
pub const INPUT_WIDTH: u32 = 320;
pub const CROP_TOP: u32 = 60;
pub const CROP_BOTTOM: u32 = 135;

fn to_u8(x: f64) -> u8 {
    x.round().clamp(0.0, 255.0) as u8
}

/// Full-range BT.601 luma and chroma, rounded.
pub fn rgb_to_ycbcr(Rgb([r, g, b]): Rgb<u8>) -> [u8; 3] {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    [
        to_u8(0.299 * r + 0.587 * g + 0.114 * b),
        to_u8(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b),
        to_u8(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b),
    ]
}

/// Inverse of [`rgb_to_ycbcr`] on unrounded components, clipped to 8 bits.
pub fn ycbcr_to_rgb(y: f64, cb: f64, cr: f64) -> Rgb<u8> {
    let (cb, cr) = (cb - 128.0, cr - 128.0);
    Rgb([
        to_u8(y + 1.402 * cr),
        to_u8(y - 0.344136 * cb - 0.714136 * cr),
        to_u8(y + 1.772 * cb),
    ])
}

/// Wraps interleaved 8-bit pixels, rejecting anything but three channels.
pub fn frame_from_raw(width: u32, height: u32, channels: usize, bytes: Vec<u8>) -> Result<RgbImage> {
    if channels != 3 {
        return Err(Error::InvalidShape {
            shape: vec![height as usize, width as usize, channels],
            reason: "frames must have 3 channels".into(),
        });
    }
    let len = bytes.len();
    RgbImage::from_raw(width, height, bytes).ok_or_else(|| Error::InvalidShape {
        shape: vec![height as usize, width as usize, channels],
        reason: format!("{len} bytes supplied"),
    })
}

pub fn preprocess(frame: &RgbImage) -> Tensor<f32> {
    let frame = if frame.dimensions() == (INPUT_WIDTH, INPUT_HEIGHT) {
        Cow::Borrowed(frame)
    } else {
        Cow::Owned(imageops::resize(frame, INPUT_WIDTH, INPUT_HEIGHT, FilterType::Triangle))
    };
    let band = imageops::crop_imm(&*frame, 0, CROP_TOP, INPUT_WIDTH, CROP_BOTTOM - CROP_TOP).to_image();
    let [h, w, _] = FRAME_SHAPE;
    let small = imageops::resize(&band, w as u32, h as u32, FilterType::Triangle);
    let mut data = Vec::with_capacity(h * w * 3);
    for &px in small.pixels() {
        data.extend(rgb_to_ycbcr(px).map(|v| (v as f64 / 127.5 - 1.0) as f32));
    }
    Tensor::new(&FRAME_SHAPE, data).expect("fixed frame shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_and_black_golden_values() {
        let chroma = (1.0f64 / 255.0) as f32;
        let white = preprocess(&RgbImage::from_pixel(320, 160, Rgb([255, 255, 255])));
        assert_eq!(white.shape(), [66, 200, 3]);
        assert!(white.data().chunks(3).all(|p| p == [1.0, chroma, chroma]));
        let black = preprocess(&RgbImage::from_pixel(320, 160, Rgb([0, 0, 0])));
        assert!(black.data().chunks(3).all(|p| p == [-1.0, chroma, chroma]));
        assert!((chroma - 0.0039).abs() < 1e-4);
    }

    #[test]
    fn other_sizes_are_resized_first() {
        let t = preprocess(&RgbImage::from_pixel(64, 48, Rgb([10, 200, 30])));
        assert_eq!(t.shape(), [66, 200, 3]);
        assert!(t.data().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn crop_band_only() {
        let mut img = RgbImage::from_pixel(320, 160, Rgb([0, 0, 0]));
        for y in (0..CROP_TOP).chain(CROP_BOTTOM..160) {
            for x in 0..320 {
                img.put_pixel(x, y, Rgb([255, 255, 255]));
            }
        }
        let t = preprocess(&img);
        assert!(t.data().chunks(3).all(|p| p[0] == -1.0));
    }

    #[test]
    fn colour_round_trip() {
        for px in [Rgb([12, 200, 99]), Rgb([255, 0, 0]), Rgb([128, 128, 128])] {
            let [y, cb, cr] = rgb_to_ycbcr(px);
            let back = ycbcr_to_rgb(y as f64, cb as f64, cr as f64);
            for c in 0..3 {
                assert!((back.0[c] as i32 - px.0[c] as i32).abs() <= 2);
            }
        }
    }

    #[test]
    fn raw_frames_need_three_channels() {
        assert!(frame_from_raw(2, 2, 4, vec![0; 16]).is_err());
        assert!(frame_from_raw(2, 2, 3, vec![0; 11]).is_err());
        assert!(frame_from_raw(2, 2, 3, vec![0; 12]).is_ok());
    }
}

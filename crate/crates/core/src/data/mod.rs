//! Frames, labels and everything between a camera image and a training
//! batch.
//!
//! A [`Sample`] is one raw RGB frame (plus optional side-camera frames) and a
//! steering label in `[−1, 1]`. An [`Episode`] is a temporally ordered run of
//! samples recorded under one [`Condition`].

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Rng};

pub mod augment;
pub mod log;
pub mod preprocess;
pub mod synth;

pub use augment::{AugmentConfig, AugmentParams, Camera};
pub use log::{load_drive_log, load_episode, write_episode, DriveLog, LogRow};
pub use preprocess::{frame_from_raw, preprocess};
pub use synth::{synth_generate, SynthConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Sunny,
    Cloudy,
    Night,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Sunny, Condition::Cloudy, Condition::Night];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Sunny => "sunny",
            Condition::Cloudy => "cloudy",
            Condition::Night => "night",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown condition `{s}`")))
    }
}

/// One labelled moment of driving.
#[derive(Clone, Debug)]
pub struct Sample {
    pub center: Arc<RgbImage>,
    pub left: Option<Arc<RgbImage>>,
    pub right: Option<Arc<RgbImage>>,
    pub steering: f32,
}

impl Sample {
    pub fn new(center: RgbImage, steering: f32) -> Self {
        Self {
            center: Arc::new(center),
            left: None,
            right: None,
            steering,
        }
    }

    pub fn has_side_cameras(&self) -> bool {
        self.left.is_some() && self.right.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub condition: Option<Condition>,
    pub samples: Vec<Sample>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn steering(&self) -> Vec<f32> {
        self.samples.iter().map(|s| s.steering).collect()
    }

    /// Contiguous sub-episode.
    pub fn slice(&self, range: Range<usize>) -> Episode {
        Episode {
            condition: self.condition,
            samples: self.samples[range].to_vec(),
        }
    }
}

/// Seeded shuffle, then the first `round(fraction · n)` items go to
/// training and the rest to validation.
pub fn split<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if items.is_empty() {
        return Err(Error::Empty("split input"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {fraction} must lie in (0, 1]"
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    Rng::new(seed).shuffle(&mut order);
    let n_train = ((items.len() as f64 * fraction).round() as usize).clamp(1, items.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// Cuts episodes into contiguous segments of `segment_len` frames (a short
/// tail joins the previous segment), then splits the segments with
/// [`split`]. Temporal order inside every segment is preserved, so windows
/// drawn from either side never straddle the boundary.
pub fn split_episodes(
    episodes: &[Episode],
    fraction: f64,
    segment_len: usize,
    seed: u64,
) -> Result<(Vec<Episode>, Vec<Episode>)> {
    if segment_len == 0 {
        return Err(Error::InvalidConfig("segment length must be positive".into()));
    }
    let mut segments = Vec::new();
    for ep in episodes {
        let n = ep.len();
        let mut start = 0;
        while start < n {
            let mut end = (start + segment_len).min(n);
            if n - end < segment_len / 2 {
                end = n;
            }
            segments.push(ep.slice(start..end));
            start = end;
        }
    }
    split(&segments, fraction, seed)
}

/// Start..end ranges of sliding windows of `len` frames every `stride`
/// frames.
pub fn windows(episode_len: usize, len: usize, stride: usize) -> Result<Vec<Range<usize>>> {
    if len == 0 || stride == 0 {
        return Err(Error::InvalidConfig("window length and stride must be positive".into()));
    }
    if len > episode_len {
        return Err(Error::InvalidConfig(format!(
            "window length {len} exceeds episode length {episode_len}"
        )));
    }
    Ok((0..=(episode_len - len) / stride)
        .map(|i| i * stride..i * stride + len)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_ten_into_eight_and_two() {
        let items: Vec<u32> = (0..10).collect();
        let (tr, va) = split(&items, 0.8, 3).unwrap();
        assert_eq!((tr.len(), va.len()), (8, 2));
        let mut all: Vec<u32> = tr.iter().chain(&va).copied().collect();
        all.sort_unstable();
        assert_eq!(all, items);
        assert_eq!(split(&items, 0.8, 3).unwrap(), (tr, va));
    }

    #[test]
    fn split_rejects_empty_and_bad_fraction() {
        assert!(split::<u8>(&[], 0.8, 0).is_err());
        assert!(split(&[1], 0.0, 0).is_err());
        assert!(split(&[1], 1.5, 0).is_err());
    }

    #[test]
    fn window_counts() {
        assert_eq!(windows(100, 16, 8).unwrap().len(), 11);
        assert_eq!(windows(16, 16, 8).unwrap(), vec![0..16]);
        assert!(windows(10, 16, 8).is_err());
        let w = windows(40, 16, 8).unwrap();
        assert!(w.iter().all(|r| r.len() == 16));
        assert!(w.windows(2).all(|p| p[0].start < p[1].start));
    }

    #[test]
    fn segments_partition_frames_in_order() {
        let ep = Episode {
            condition: Some(Condition::Sunny),
            samples: (0..250)
                .map(|i| Sample::new(RgbImage::new(1, 1), i as f32 / 250.0))
                .collect(),
        };
        let (tr, va) = split_episodes(&[ep], 0.8, 100, 1).unwrap();
        let lens: usize = tr.iter().chain(&va).map(Episode::len).sum();
        assert_eq!(lens, 250);
        for seg in tr.iter().chain(&va) {
            let s = seg.steering();
            assert!(s.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn condition_names_round_trip() {
        for c in Condition::ALL {
            assert_eq!(c.name().parse::<Condition>().unwrap(), c);
        }
        assert!("foggy".parse::<Condition>().is_err());
    }
}

//! Drive-log CSV files and the PNG frames they reference.
//!
//! Columns: `center,left,right,steering,throttle,brake,speed`. The header
//! row is optional and detected by whether the steering field parses as a
//! number. Image paths are resolved relative to the log's directory; paths
//! recorded on another machine fall back to `IMG/<file name>`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::RgbImage;

use super::{Condition, Episode, Sample};
use crate::tensor::par::map_ordered;
use crate::{Error, Result};

pub const LOG_FILE: &str = "driving_log.csv";
pub const IMAGE_DIR: &str = "IMG";
const HEADER: [&str; 7] = ["center", "left", "right", "steering", "throttle", "brake", "speed"];

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub center: PathBuf,
    pub left: PathBuf,
    pub right: PathBuf,
    pub steering: f32,
    pub throttle: f32,
    pub brake: f32,
    pub speed: f32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriveLog {
    pub dir: PathBuf,
    pub rows: Vec<LogRow>,
}

fn resolve(dir: &Path, raw: &str) -> Result<PathBuf> {
    let p = Path::new(raw.trim());
    let direct = if p.is_absolute() { p.to_path_buf() } else { dir.join(p) };
    if direct.is_file() {
        return Ok(direct);
    }
    if let Some(name) = p.file_name() {
        let fallback = dir.join(IMAGE_DIR).join(name);
        if fallback.is_file() {
            return Ok(fallback);
        }
    }
    Err(Error::MissingFile(direct))
}

/// Parses `dir/driving_log.csv` and checks that every referenced image
/// exists.
pub fn load_drive_log(dir: impl AsRef<Path>) -> Result<DriveLog> {
    let dir = dir.as_ref();
    let path = dir.join(LOG_FILE);
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(&path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 1;
        let malformed = |reason: String| Error::MalformedRow {
            path: path.clone(),
            row: line,
            reason,
        };
        if record.len() < 4 {
            return Err(malformed(format!(
                "expected at least 4 columns, found {}",
                record.len()
            )));
        }
        let number = |col: usize| -> Result<f32> {
            match record.get(col) {
                None => Ok(0.0),
                Some(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| malformed(format!("column {} is not a number: `{s}`", HEADER[col]))),
            }
        };
        if i == 0 && record[3].trim().parse::<f32>().is_err() {
            continue;
        }
        let steering = number(3)?;
        if !(-1.0..=1.0).contains(&steering) {
            return Err(malformed(format!("steering {steering} outside [-1, 1]")));
        }
        rows.push(LogRow {
            center: resolve(dir, &record[0])?,
            left: resolve(dir, &record[1])?,
            right: resolve(dir, &record[2])?,
            steering,
            throttle: number(4)?,
            brake: number(5)?,
            speed: number(6)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty("drive log"));
    }
    Ok(DriveLog {
        dir: dir.to_path_buf(),
        rows,
    })
}

fn load_png(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)?.into_rgb8())
}

/// Loads every frame of a drive log as one episode. Side-camera columns
/// that repeat the center path are treated as absent.
pub fn load_episode(dir: impl AsRef<Path>, condition: Option<Condition>) -> Result<Episode> {
    let log = load_drive_log(dir)?;
    let samples = map_ordered(&log.rows, |_, row| -> Result<Sample> {
        let side = |p: &PathBuf| -> Result<Option<Arc<RgbImage>>> {
            if *p == row.center {
                Ok(None)
            } else {
                Ok(Some(Arc::new(load_png(p)?)))
            }
        };
        Ok(Sample {
            center: Arc::new(load_png(&row.center)?),
            left: side(&row.left)?,
            right: side(&row.right)?,
            steering: row.steering,
        })
    });
    Ok(Episode {
        condition,
        samples: samples.into_iter().collect::<Result<_>>()?,
    })
}

/// Writes center frames as `IMG/frame_NNNNN.png` plus a drive log whose
/// side-camera columns repeat the center path.
pub fn write_episode(dir: impl AsRef<Path>, episode: &Episode) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join(IMAGE_DIR))?;
    let names: Vec<String> = (0..episode.len())
        .map(|i| format!("{IMAGE_DIR}/frame_{i:05}.png"))
        .collect();
    let written = map_ordered(&episode.samples, |i, s| -> Result<()> {
        s.center.save(dir.join(&names[i]))?;
        Ok(())
    });
    written.into_iter().collect::<Result<()>>()?;
    let mut w = csv::Writer::from_path(dir.join(LOG_FILE))?;
    w.write_record(HEADER)?;
    for (name, s) in names.iter().zip(&episode.samples) {
        let steering = s.steering.to_string();
        w.write_record([name, name, name, &steering, "0", "0", "0"])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn episode(n: usize) -> Episode {
        Episode {
            condition: None,
            samples: (0..n)
                .map(|i| Sample::new(RgbImage::from_pixel(8, 4, Rgb([i as u8, 0, 0])), i as f32 * 0.1 - 0.15))
                .collect(),
        }
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ep = episode(3);
        write_episode(dir.path(), &ep).unwrap();
        let log = load_drive_log(dir.path()).unwrap();
        assert_eq!(log.rows.len(), 3);
        let back = load_episode(dir.path(), None).unwrap();
        for (a, b) in ep.samples.iter().zip(&back.samples) {
            assert_eq!(a.steering, b.steering);
            assert_eq!(a.center, b.center);
            assert!(b.left.is_none());
        }
    }

    #[test]
    fn headerless_logs_and_image_fallback() {
        let dir = tempfile::tempdir().unwrap();
        write_episode(dir.path(), &episode(2)).unwrap();
        fs::write(
            dir.path().join(LOG_FILE),
            "/elsewhere/IMG/frame_00000.png, IMG/frame_00001.png, IMG/frame_00001.png, 0.25, 0.5, 0, 12.5\n",
        )
        .unwrap();
        let log = load_drive_log(dir.path()).unwrap();
        assert_eq!(log.rows[0].steering, 0.25);
        assert_eq!(log.rows[0].speed, 12.5);
        assert!(log.rows[0].center.ends_with("IMG/frame_00000.png"));
    }

    #[test]
    fn missing_image_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_episode(dir.path(), &episode(3)).unwrap();
        fs::remove_file(dir.path().join("IMG/frame_00001.png")).unwrap();
        match load_drive_log(dir.path()) {
            Err(Error::MissingFile(p)) => assert!(p.ends_with("IMG/frame_00001.png")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_index() {
        let dir = tempfile::tempdir().unwrap();
        write_episode(dir.path(), &episode(2)).unwrap();
        let mut text = fs::read_to_string(dir.path().join(LOG_FILE)).unwrap();
        text.push_str("IMG/frame_00000.png,IMG/frame_00000.png,IMG/frame_00000.png,abc,0,0,0\n");
        fs::write(dir.path().join(LOG_FILE), text).unwrap();
        match load_drive_log(dir.path()) {
            Err(Error::MalformedRow { row, .. }) => assert_eq!(row, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn steering_text_round_trips() {
        for v in [0.1f32, -0.73, 1.0 / 3.0, 0.0] {
            assert_eq!(v.to_string().parse::<f32>().unwrap(), v);
        }
    }
}

//! Steering server: newline-delimited JSON over TCP.
//!
//! Each request is one UTF-8 line holding a JSON object:
//!
//! ```text
//! {"image": "<base64 PNG>", "speed": 12.5}
//! {"rgb": "<base64 interleaved RGB>", "width": 320, "height": 160, "speed": 12.5}
//! {"reset": true}
//! ```
//!
//! and gets exactly one line back:
//!
//! ```text
//! {"steering": -0.031, "throttle": 0.75}
//! {"reset": true}
//! {"error": "..."}
//! ```
//!
//! Steering comes from stateful inference, so consecutive frames on one
//! connection share recurrent state until a reset. Throttle is
//! `clamp(0.1 · (target_speed − speed), 0, 1)`. Malformed and oversized
//! requests get an error response and the connection stays open. Every
//! connection runs on its own thread with its own state; parameters are
//! shared read-only.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use ncpdrive::data::{frame_from_raw, preprocess};
use ncpdrive::models::Model;
use serde::Deserialize;
use serde_json::{json, Value};

/// Proportional throttle gain.
pub const KP: f64 = 0.1;
pub const DEFAULT_MAX_LINE: usize = 8 << 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ServerConfig {
    pub target_speed: f64,
    /// Longest accepted request line in bytes, newline excluded.
    pub max_line: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            target_speed: 20.0,
            max_line: DEFAULT_MAX_LINE,
        }
    }
}

pub fn throttle(target_speed: f64, speed: f64) -> f64 {
    (KP * (target_speed - speed)).clamp(0.0, 1.0)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Request {
    image: Option<String>,
    rgb: Option<String>,
    width: Option<u32>,
    height: Option<u32>,
    speed: Option<f64>,
    reset: Option<bool>,
}

fn error(msg: impl std::fmt::Display) -> Value {
    json!({ "error": msg.to_string() })
}

/// Per-connection inference state.
pub struct Session {
    model: Model,
    config: ServerConfig,
}

impl Session {
    pub fn new(mut model: Model, config: ServerConfig) -> Self {
        model.reset_state();
        Self { model, config }
    }

    pub fn handle_line(&mut self, line: &str) -> Value {
        match self.try_handle(line) {
            Ok(v) => v,
            Err(e) => error(format!("{e:#}")),
        }
    }

    fn try_handle(&mut self, line: &str) -> anyhow::Result<Value> {
        let req: Request = serde_json::from_str(line)?;
        if req.reset == Some(true) {
            if req.image.is_some() || req.rgb.is_some() {
                anyhow::bail!("a reset carries no frame");
            }
            self.model.reset_state();
            return Ok(json!({ "reset": true }));
        }
        let speed = req.speed.ok_or_else(|| anyhow::anyhow!("missing `speed`"))?;
        if !speed.is_finite() {
            anyhow::bail!("`speed` must be finite");
        }
        let frame = match (req.image, req.rgb) {
            (Some(png), None) => {
                let bytes = STANDARD.decode(png.trim())?;
                image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)?.into_rgb8()
            }
            (None, Some(raw)) => {
                let (w, h) = req
                    .width
                    .zip(req.height)
                    .ok_or_else(|| anyhow::anyhow!("`rgb` needs `width` and `height`"))?;
                frame_from_raw(w, h, 3, STANDARD.decode(raw.trim())?)?
            }
            (Some(_), Some(_)) => anyhow::bail!("send either `image` or `rgb`, not both"),
            (None, None) => anyhow::bail!("missing `image` or `rgb`"),
        };
        let steering = self.model.step(&preprocess(&frame))?;
        Ok(json!({
            "steering": steering,
            "throttle": throttle(self.config.target_speed, speed),
        }))
    }
}

enum Line {
    Complete,
    TooLong,
    Eof,
}

/// Reads one line into `buf` (newline stripped) without buffering more
/// than `max` bytes; the remainder of an oversized line is discarded.
fn read_line_limited(r: &mut impl BufRead, buf: &mut Vec<u8>, max: usize) -> io::Result<Line> {
    buf.clear();
    let mut too_long = false;
    loop {
        let chunk = r.fill_buf()?;
        if chunk.is_empty() {
            return Ok(if too_long {
                Line::TooLong
            } else if buf.is_empty() {
                Line::Eof
            } else {
                Line::Complete
            });
        }
        let (part, done) = match chunk.iter().position(|&b| b == b'\n') {
            Some(i) => (&chunk[..i], Some(i + 1)),
            None => (chunk, None),
        };
        if !too_long {
            if buf.len() + part.len() > max {
                too_long = true;
                buf.clear();
            } else {
                buf.extend_from_slice(part);
            }
        }
        let used = done.unwrap_or(chunk.len());
        r.consume(used);
        if done.is_some() {
            return Ok(if too_long { Line::TooLong } else { Line::Complete });
        }
    }
}

/// Serves one connection until the client closes it.
pub fn handle_connection(stream: TcpStream, model: Model, config: ServerConfig) -> io::Result<()> {
    let mut session = Session::new(model, config);
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    loop {
        let response = match read_line_limited(&mut reader, &mut buf, config.max_line)? {
            Line::Eof => return Ok(()),
            Line::TooLong => error(format!("request exceeds {} bytes", config.max_line)),
            Line::Complete => {
                if buf.last() == Some(&b'\r') {
                    buf.pop();
                }
                if buf.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                match std::str::from_utf8(&buf) {
                    Ok(line) => session.handle_line(line),
                    Err(_) => error("request is not valid UTF-8"),
                }
            }
        };
        let mut out = response.to_string();
        out.push('\n');
        writer.write_all(out.as_bytes())?;
        writer.flush()?;
    }
}

pub struct Server {
    listener: TcpListener,
    model: Arc<Model>,
    config: ServerConfig,
}

impl Server {
    /// Binds without accepting yet; port 0 picks a free port.
    pub fn bind(addr: impl ToSocketAddrs, model: Model, config: ServerConfig) -> io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr)?,
            model: Arc::new(model),
            config,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections forever, one thread each.
    pub fn serve(self) -> io::Result<()> {
        for stream in self.listener.incoming() {
            let stream = stream?;
            let model = (*self.model).clone();
            let config = self.config;
            thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = handle_connection(stream, model, config) {
                    eprintln!("connection {peer:?}: {e}");
                }
            });
        }
        Ok(())
    }
}

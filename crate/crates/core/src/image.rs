//! Row-major real-valued images and their file formats.
//!
//! PGM/PPM are read and written by hand so that synthetic sequences
//! round-trip bit-exactly; PNG and JPEG go through the `image` crate.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Shape(format!("{channels} channels, expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "{} values for {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn mean_color(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (s, v) in sum.iter_mut().zip(px) {
                *s += v;
            }
        }
        let n = (self.width * self.height).max(1) as f64;
        sum.into_iter().map(|s| s / n).collect()
    }

    /// Single-channel luminance (channel average).
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / self.channels as f64)
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Load PGM/PPM (P2/P3/P5/P6) natively, anything else via `image`;
    /// grayscale files stay single-channel.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        match extension(path).as_deref() {
            Some("pgm") | Some("ppm") | Some("pnm") => {
                let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
                decode_pnm(&bytes).map_err(|msg| Error::Decode {
                    path: path.into(),
                    msg,
                })
            }
            _ => {
                let img = image::open(path).map_err(|e| Error::Decode {
                    path: path.into(),
                    msg: e.to_string(),
                })?;
                let (w, h) = (img.width() as usize, img.height() as usize);
                let (channels, raw) = if img.color().has_color() {
                    (3, img.to_rgb8().into_raw())
                } else {
                    (1, img.to_luma8().into_raw())
                };
                let data = raw.iter().map(|&v| v as f64 / 255.0).collect();
                Image::from_vec(w, h, channels, data)
            }
        }
    }

    /// Write 8-bit binary PGM (1 channel) or PPM (3 channels).
    pub fn save_pnm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.encode_pnm();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    /// Write PNG through the `image` crate.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self.data.iter().map(|&v| quantize(v)).collect();
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        image::save_buffer(path, &bytes, self.width as u32, self.height as u32, color).map_err(
            |e| Error::Decode {
                path: path.into(),
                msg: e.to_string(),
            },
        )
    }

    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| quantize(v)));
        out
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

/// Image files recognized in a frame directory.
pub fn is_image_file(path: &Path) -> bool {
    matches!(
        extension(path).as_deref(),
        Some("pgm" | "ppm" | "pnm" | "png" | "jpg" | "jpeg")
    )
}

fn decode_pnm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("unexpected end of header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |s: String| s.parse::<usize>().map_err(|_| format!("bad header field {s:?}"));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} out of range"));
    }
    let channels = match magic.as_str() {
        "P2" | "P5" => 1,
        "P3" | "P6" => 3,
        m => return Err(format!("unsupported magic {m}")),
    };
    let n = width * height * channels;
    let scale = maxval as f64;
    let data: Vec<f64> = if magic == "P2" || magic == "P3" {
        let mut vals = Vec::with_capacity(n);
        for _ in 0..n {
            vals.push(num(token()?)? as f64 / scale);
        }
        vals
    } else {
        // single whitespace byte after maxval
        let body = &bytes[(pos + 1).min(bytes.len())..];
        let wide = maxval > 255;
        let need = if wide { 2 * n } else { n };
        if body.len() < need {
            return Err(format!("raster truncated: {} of {need} bytes", body.len()));
        }
        if wide {
            body[..need]
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / scale)
                .collect()
        } else {
            body[..n].iter().map(|&b| b as f64 / scale).collect()
        }
    };
    Image::from_vec(width, height, channels, data).map_err(|e| e.to_string())
}

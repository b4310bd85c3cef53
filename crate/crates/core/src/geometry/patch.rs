use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Value used for samples falling outside the source image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BorderFill {
    /// Per-channel mean of the source image.
    #[default]
    Mean,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PatchSampling {
    pub fill: BorderFill,
    pub interpolation: Interpolation,
}

impl PatchSampling {
    fn fill_values(&self, img: &Image) -> Vec<f64> {
        match self.fill {
            BorderFill::Mean => img.mean_color(),
            BorderFill::Zero => vec![0.0; img.channels()],
        }
    }
}

/// Sample a square `out_size × out_size` patch of side `side` (source px)
/// centered at `center`, rotated by `theta`.
///
/// Output pixel offset `d` from the patch center maps to source position
/// `center + R(theta) · d · side / out_size`.
pub fn extract_patch(
    img: &Image,
    center: (f64, f64),
    side: f64,
    theta: f64,
    out_size: usize,
) -> Result<Image> {
    if out_size != 127 && out_size != 255 {
        return Err(Error::PatchSize(out_size));
    }
    extract_patch_with(img, center, side, theta, out_size, &PatchSampling::default())
}

/// [`extract_patch`] with explicit sampling options and any output size.
pub fn extract_patch_with(
    img: &Image,
    center: (f64, f64),
    side: f64,
    theta: f64,
    out_size: usize,
    sampling: &PatchSampling,
) -> Result<Image> {
    if !(side > 0.0 && side.is_finite()) || out_size == 0 {
        return Err(Error::Shape(format!("patch side {side}, out size {out_size}")));
    }
    let fill = sampling.fill_values(img);
    let scale = side / out_size as f64;
    let half = (out_size as f64 - 1.0) / 2.0;
    let (s, c) = theta.sin_cos();
    let (a, b) = (c * scale, s * scale);
    let channels = img.channels();
    let mut out = Image::new(out_size, out_size, channels);
    let mut px = vec![0.0; channels];
    for v in 0..out_size {
        let dv = v as f64 - half;
        for u in 0..out_size {
            let du = u as f64 - half;
            let x = center.0 + a * du - b * dv;
            let y = center.1 + b * du + a * dv;
            sample(img, x, y, &fill, sampling.interpolation, &mut px);
            out.pixel_mut(u, v).copy_from_slice(&px);
        }
    }
    Ok(out)
}

/// Resample `img` so that output pixel `p` takes the source value at
/// `center + R(theta) · (p − center)`; the content appears rotated by `−theta`.
pub fn rotate_image(img: &Image, center: (f64, f64), theta: f64) -> Image {
    warp_similarity(img, center, 1.0, theta)
}

/// Like [`rotate_image`] but also magnifies the content by `scale` about
/// `center`: output `p` samples `center + R(theta) · (p − center) / scale`.
pub fn warp_similarity(img: &Image, center: (f64, f64), scale: f64, theta: f64) -> Image {
    let sampling = PatchSampling::default();
    let fill = sampling.fill_values(img);
    let (s, c) = theta.sin_cos();
    let (s, c) = (s / scale, c / scale);
    let mut out = Image::new(img.width(), img.height(), img.channels());
    let mut px = vec![0.0; img.channels()];
    for y in 0..img.height() {
        let dy = y as f64 - center.1;
        for x in 0..img.width() {
            let dx = x as f64 - center.0;
            let sx = center.0 + c * dx - s * dy;
            let sy = center.1 + s * dx + c * dy;
            sample(img, sx, sy, &fill, sampling.interpolation, &mut px);
            out.pixel_mut(x, y).copy_from_slice(&px);
        }
    }
    out
}

fn sample(img: &Image, x: f64, y: f64, fill: &[f64], interp: Interpolation, out: &mut [f64]) {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let fetch = |xi: isize, yi: isize| -> Option<&[f64]> {
        (xi >= 0 && yi >= 0 && xi < w && yi < h).then(|| img.pixel(xi as usize, yi as usize))
    };
    match interp {
        Interpolation::Nearest => {
            let p = fetch(x.round() as isize, y.round() as isize).unwrap_or(fill);
            out.copy_from_slice(p);
        }
        Interpolation::Bilinear => {
            let x0 = x.floor();
            let y0 = y.floor();
            let fx = x - x0;
            let fy = y - y0;
            let (xi, yi) = (x0 as isize, y0 as isize);
            if xi >= 0 && yi >= 0 && xi + 1 < w && yi + 1 < h {
                let p00 = img.pixel(xi as usize, yi as usize);
                let p10 = img.pixel(xi as usize + 1, yi as usize);
                let p01 = img.pixel(xi as usize, yi as usize + 1);
                let p11 = img.pixel(xi as usize + 1, yi as usize + 1);
                for (ch, o) in out.iter_mut().enumerate() {
                    let top = p00[ch] + fx * (p10[ch] - p00[ch]);
                    let bot = p01[ch] + fx * (p11[ch] - p01[ch]);
                    *o = top + fy * (bot - top);
                }
                return;
            }
            let p00 = fetch(xi, yi).unwrap_or(fill);
            let p10 = fetch(xi + 1, yi).unwrap_or(fill);
            let p01 = fetch(xi, yi + 1).unwrap_or(fill);
            let p11 = fetch(xi + 1, yi + 1).unwrap_or(fill);
            for (ch, o) in out.iter_mut().enumerate() {
                let top = p00[ch] + fx * (p10[ch] - p00[ch]);
                let bot = p01[ch] + fx * (p11[ch] - p01[ch]);
                *o = top + fy * (bot - top);
            }
        }
    }
}

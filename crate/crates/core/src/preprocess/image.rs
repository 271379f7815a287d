use std::path::Path;

use crate::error::{Error, Result};

pub const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];
pub const TARGET_SIZE: usize = 224;

/// Planar RGB image (`values[c * height * width + y * width + x]`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ImageTensor {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Domain("image dimensions must be positive".into()));
        }
        if values.len() != Self::CHANNELS * width * height {
            return Err(Error::Domain(format!(
                "expected {} values for a {width}x{height} RGB image, got {}",
                Self::CHANNELS * width * height,
                values.len()
            )));
        }
        Ok(ImageTensor {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let mut values = Vec::with_capacity(3 * width * height);
        for v in rgb {
            values.extend(std::iter::repeat_n(v, width * height));
        }
        Self::new(width, height, values)
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.values[c * n..(c + 1) * n]
    }

    /// Decodes a binary PPM (`P6`) with 8-bit samples, scaling to `[0, 1]`.
    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::parse("ppm", "truncated header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P6" {
            return Err(Error::parse("ppm", format!("unsupported magic {}", fields[0])));
        }
        let num = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::parse("ppm", format!("bad header number {s}")))
        };
        let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(Error::parse("ppm", format!("unsupported maxval {maxval}")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let raster = bytes
            .get(pos..pos + 3 * w * h)
            .ok_or_else(|| Error::parse("ppm", "raster shorter than header declares"))?;
        let mut values = vec![0.0; 3 * w * h];
        for (i, rgb) in raster.chunks_exact(3).enumerate() {
            for c in 0..3 {
                values[c * w * h + i] = rgb[c] as f64 / maxval as f64;
            }
        }
        Self::new(w, h, values)
    }

    /// Encodes as `P6`, clamping values to `[0, 1]`.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        let n = self.width * self.height;
        for i in 0..n {
            for c in 0..3 {
                out.push((self.values[c * n + i].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }

    pub fn read_ppm(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_ppm(&bytes)
    }
}

/// Bilinear resize with half-pixel-center alignment.
pub fn resize_bilinear(img: &ImageTensor, width: usize, height: usize) -> Result<ImageTensor> {
    if width == 0 || height == 0 {
        return Err(Error::Domain("target size must be positive".into()));
    }
    if width == img.width && height == img.height {
        return Ok(img.clone());
    }
    let sample_axis = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
            .clamp(0.0, (src_len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, s - i0 as f64)
    };
    let xs: Vec<_> = (0..width).map(|x| sample_axis(x, img.width, width)).collect();
    let ys: Vec<_> = (0..height).map(|y| sample_axis(y, img.height, height)).collect();
    let mut values = Vec::with_capacity(3 * width * height);
    for c in 0..3 {
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = img.get(c, x0, y0) * (1.0 - fx) + img.get(c, x1, y0) * fx;
                let bottom = img.get(c, x0, y1) * (1.0 - fx) + img.get(c, x1, y1) * fx;
                values.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    ImageTensor::new(width, height, values)
}

/// Channel-wise `(v - mean) / std`.
pub fn normalize_channels(img: &ImageTensor, mean: [f64; 3], std: [f64; 3]) -> Result<ImageTensor> {
    if std.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Domain(format!("channel std must be > 0: {std:?}")));
    }
    let n = img.width * img.height;
    let values = img
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - mean[i / n]) / std[i / n])
        .collect();
    ImageTensor::new(img.width, img.height, values)
}

/// Resize to 224x224 then normalize with the given channel statistics.
pub fn image_resize_normalize(
    img: &ImageTensor,
    mean: [f64; 3],
    std: [f64; 3],
) -> Result<ImageTensor> {
    let resized = resize_bilinear(img, TARGET_SIZE, TARGET_SIZE)?;
    normalize_channels(&resized, mean, std)
}

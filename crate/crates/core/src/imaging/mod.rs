//! Image buffers and the pixel-level operations shared by the rest of the crate.
//!
//! Three buffer types cover everything the pipeline moves around:
//! [`RasterImage`] for 8-bit decoded pictures, [`BinaryMask`] for lesion and
//! feature masks, and [`FloatPlane`] for intermediate real-valued data
//! (luminance, level sets, saliency).

mod color;
mod filter;
mod io;
mod render;

pub use color::{rgb_to_hsv, rgb_to_yuv, Hsv, HsvPlanes, YuvPlanes, U_SCALE, V_SCALE, Y_WEIGHTS};
pub use filter::{gaussian_filter, gaussian_kernel_1d, gaussian_kernel_2d};
pub use io::{decode_image, encode_mask_png, encode_plane_png16, encode_png, ImageFormatKind};
pub use render::{blend_overlay, colorize, heatmap_lut, resample_mask, HEATMAP_LUT_SIZE};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("decode failed: {0}")]
    Decode(String),
    #[error("encode failed: {0}")]
    Encode(String),
}

pub type Result<T> = std::result::Result<T, ImagingError>;

/// 8-bit image, row-major, channel-interleaved. One or three channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidInput(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ImagingError::InvalidInput(format!(
                "expected 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(ImagingError::InvalidInput(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Image filled with a single RGB color.
    pub fn filled_rgb(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, 3, data)
    }

    pub fn from_fn_rgb(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, 3, data)
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn same_size(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    /// RGB triple at (x, y). Gray images replicate their single sample.
    pub fn rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * self.channels;
        if self.channels == 3 {
            [self.data[i], self.data[i + 1], self.data[i + 2]]
        } else {
            [self.data[i]; 3]
        }
    }

    pub fn set_rgb(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * self.channels;
        if self.channels == 3 {
            self.data[i..i + 3].copy_from_slice(&rgb);
        } else {
            self.data[i] = rgb[0];
        }
    }

    /// Promote a gray image to three channels; RGB images are returned as-is.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        RasterImage { width: self.width, height: self.height, channels: 3, data }
    }

    pub(crate) fn require_rgb(&self) -> Result<()> {
        if self.channels != 3 {
            return Err(ImagingError::InvalidInput(format!(
                "expected a 3-channel image, got {} channel(s)",
                self.channels
            )));
        }
        Ok(())
    }

    /// Multiply every pixel by a per-pixel factor in [0, 1] (occlusion toward black).
    pub fn modulate(&self, factors: &FloatPlane) -> Result<RasterImage> {
        if !factors.same_size(self.width, self.height) {
            return Err(ImagingError::InvalidInput("modulation plane size mismatch".into()));
        }
        let c = self.channels;
        let mut data = self.data.clone();
        for (i, &f) in factors.values().iter().enumerate() {
            for v in &mut data[i * c..i * c + c] {
                *v = (f64::from(*v) * f).round().clamp(0.0, 255.0) as u8;
            }
        }
        Ok(RasterImage { data, ..*self })
    }

    /// Bilinear resize, used to bring large photographs down to the working resolution.
    pub fn resize_bilinear(&self, new_w: usize, new_h: usize) -> Result<RasterImage> {
        if new_w == 0 || new_h == 0 {
            return Err(ImagingError::InvalidParameter("target size must be positive".into()));
        }
        let c = self.channels;
        let sx = self.width as f64 / new_w as f64;
        let sy = self.height as f64 / new_h as f64;
        let mut data = Vec::with_capacity(new_w * new_h * c);
        for y in 0..new_h {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - y0 as f64;
            for x in 0..new_w {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - x0 as f64;
                for ch in 0..c {
                    let at = |xx: usize, yy: usize| f64::from(self.data[(yy * self.width + xx) * c + ch]);
                    let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
                    let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
                    data.push((top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        RasterImage::new(new_w, new_h, c, data)
    }
}

/// One boolean per pixel, `true` = foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidInput("mask dimensions must be positive".into()));
        }
        if bits.len() != width * height {
            return Err(ImagingError::InvalidInput(format!(
                "mask length {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Out-of-frame coordinates read as background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.bits[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn same_size(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    pub fn invert(&self) -> BinaryMask {
        BinaryMask { bits: self.bits.iter().map(|b| !b).collect(), ..*self }
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn xor(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a != b)
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        if !other.same_size(self.width, self.height) {
            return Err(ImagingError::InvalidInput(format!(
                "mask size mismatch: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        Ok(BinaryMask { bits, ..*self })
    }

    /// Gray image with background 0 and foreground 255.
    pub fn to_gray_image(&self) -> RasterImage {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        RasterImage { width: self.width, height: self.height, channels: 1, data }
    }

    /// Foreground centroid in pixel-center coordinates, `None` when empty.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sx += x as f64;
                    sy += y as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }

    /// Inclusive foreground bounds `(x0, y0, x1, y1)`, `None` when empty.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut b: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    b = Some(match b {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0, x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        b
    }

    /// Copy of the `w`×`h` window whose top-left corner is `(x0, y0)`; pixels
    /// outside the source are background.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self::from_fn(w, h, |x, y| x0 + x < self.width && y0 + y < self.height && self.get(x0 + x, y0 + y))
    }
}

/// Real-valued plane. Values are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatPlane {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl FloatPlane {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidInput("plane dimensions must be positive".into()));
        }
        if values.len() != width * height {
            return Err(ImagingError::InvalidInput(format!(
                "plane length {} does not match {width}x{height}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ImagingError::InvalidInput(format!("non-finite value at index {i}")));
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn same_size(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    /// (min, max) over all samples.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }

    /// Apply `f` to every sample. Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<FloatPlane> {
        FloatPlane::new(self.width, self.height, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Area-averaging downscale by an arbitrary factor.
    pub fn downscale_area(&self, new_w: usize, new_h: usize) -> Result<FloatPlane> {
        if new_w == 0 || new_h == 0 || new_w > self.width || new_h > self.height {
            return Err(ImagingError::InvalidParameter(format!(
                "cannot area-downscale {}x{} to {new_w}x{new_h}",
                self.width, self.height
            )));
        }
        let sx = self.width as f64 / new_w as f64;
        let sy = self.height as f64 / new_h as f64;
        let mut out = Vec::with_capacity(new_w * new_h);
        for y in 0..new_h {
            let (y0, y1) = ((y as f64 * sy) as usize, (((y + 1) as f64 * sy).ceil() as usize).min(self.height));
            for x in 0..new_w {
                let (x0, x1) = ((x as f64 * sx) as usize, (((x + 1) as f64 * sx).ceil() as usize).min(self.width));
                let mut acc = 0.0;
                for yy in y0..y1 {
                    for xx in x0..x1 {
                        acc += self.get(xx, yy);
                    }
                }
                out.push(acc / ((y1 - y0) * (x1 - x0)) as f64);
            }
        }
        FloatPlane::new(new_w, new_h, out)
    }
}

/// Working size that keeps the aspect ratio and caps the longest side.
pub fn fit_within(width: usize, height: usize, max_side: usize) -> (usize, usize) {
    let longest = width.max(height);
    if longest <= max_side {
        return (width, height);
    }
    let s = max_side as f64 / longest as f64;
    (
        ((width as f64 * s).round() as usize).max(1),
        ((height as f64 * s).round() as usize).max(1),
    )
}

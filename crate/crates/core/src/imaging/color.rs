use super::{FloatPlane, RasterImage, Result};

/// BT.601 luma weights for R', G', B'.
pub const Y_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];
/// BT.601 chroma scale factors: U = 0.492111·(B' − Y'), V = 0.877283·(R' − Y').
pub const U_SCALE: f64 = 0.492111;
pub const V_SCALE: f64 = 0.877283;

/// Y', U and V planes. Inputs are normalized to [0, 1] before conversion, so
/// Y' ∈ [0, 1], U ∈ [−0.436, 0.436], V ∈ [−0.615, 0.615].
#[derive(Debug, Clone)]
pub struct YuvPlanes {
    pub y: FloatPlane,
    pub u: FloatPlane,
    pub v: FloatPlane,
}

/// Hue in degrees [0, 360), saturation and value in [0, 1].
#[derive(Debug, Clone)]
pub struct HsvPlanes {
    pub h: FloatPlane,
    pub s: FloatPlane,
    pub v: FloatPlane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl Hsv {
    /// Hexcone model. Achromatic pixels get hue 0.
    pub fn from_rgb(rgb: [u8; 3]) -> Hsv {
        let [r, g, b] = rgb.map(|c| f64::from(c) / 255.0);
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let delta = max - min;
        let s = if max > 0.0 { delta / max } else { 0.0 };
        let h = if delta == 0.0 {
            0.0
        } else if max == r {
            60.0 * ((g - b) / delta)
        } else if max == g {
            60.0 * ((b - r) / delta + 2.0)
        } else {
            60.0 * ((r - g) / delta + 4.0)
        };
        let h = if h < 0.0 { h + 360.0 } else { h };
        Hsv { h: if h >= 360.0 { h - 360.0 } else { h }, s, v: max }
    }
}

pub fn rgb_to_yuv(img: &RasterImage) -> Result<YuvPlanes> {
    img.require_rgb()?;
    let n = img.width() * img.height();
    let (mut ys, mut us, mut vs) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for px in img.data().chunks_exact(3) {
        let [r, g, b] = [px[0], px[1], px[2]].map(|c| f64::from(c) / 255.0);
        let y = Y_WEIGHTS[0] * r + Y_WEIGHTS[1] * g + Y_WEIGHTS[2] * b;
        ys.push(y.clamp(0.0, 1.0));
        us.push(U_SCALE * (b - y));
        vs.push(V_SCALE * (r - y));
    }
    let (w, h) = (img.width(), img.height());
    Ok(YuvPlanes { y: FloatPlane::new(w, h, ys)?, u: FloatPlane::new(w, h, us)?, v: FloatPlane::new(w, h, vs)? })
}

pub fn rgb_to_hsv(img: &RasterImage) -> Result<HsvPlanes> {
    img.require_rgb()?;
    let n = img.width() * img.height();
    let (mut hs, mut ss, mut vs) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for px in img.data().chunks_exact(3) {
        let hsv = Hsv::from_rgb([px[0], px[1], px[2]]);
        hs.push(hsv.h);
        ss.push(hsv.s);
        vs.push(hsv.v);
    }
    let (w, h) = (img.width(), img.height());
    Ok(HsvPlanes { h: FloatPlane::new(w, h, hs)?, s: FloatPlane::new(w, h, ss)?, v: FloatPlane::new(w, h, vs)? })
}

//! Deterministic synthetic dermoscopy-like images with known lesion masks.
//!
//! Benign lesions are small, near-elliptical and one or two browns. Malignant
//! ones are larger, with lobulated borders and off-center patches of black,
//! blue-gray and red.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::imaging::{encode_png, BinaryMask, RasterImage};

pub const SKIN: [u8; 3] = [235, 205, 185];
pub const LIGHT_BROWN: [u8; 3] = [200, 150, 100];
pub const DARK_BROWN: [u8; 3] = [110, 70, 40];
pub const BLACK: [u8; 3] = [30, 25, 25];
pub const BLUE_GRAY: [u8; 3] = [100, 115, 140];
pub const RED: [u8; 3] = [180, 40, 40];
pub const WHITE: [u8; 3] = [235, 235, 235];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthClass {
    Benign,
    Malignant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub width: usize,
    pub height: usize,
    /// Per-channel Gaussian noise standard deviation, in 8-bit levels.
    pub noise_sigma: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self { width: 300, height: 225, noise_sigma: 5.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthLesion {
    pub class: SynthClass,
    pub image: RasterImage,
    pub mask: BinaryMask,
}

struct Shape {
    center: (f64, f64),
    radius: f64,
    stretch: f64,
    rotation: f64,
    harmonics: Vec<(f64, f64, f64)>,
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (c, s) = (self.rotation.cos(), self.rotation.sin());
        let (u, v) = ((c * dx + s * dy) / self.stretch, -s * dx + c * dy);
        let theta = v.atan2(u);
        let r = self.radius * (1.0 + self.harmonics.iter().map(|&(k, a, phase)| a * (k * theta + phase).cos()).sum::<f64>());
        u * u + v * v <= r * r
    }
}

struct Patch {
    center: (f64, f64),
    radius: f64,
    color: [u8; 3],
}

/// One synthetic lesion; identical `(class, seed, params)` give identical pixels.
pub fn synth_lesion(class: SynthClass, seed: u64, params: &SynthParams) -> SynthLesion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(match class {
        SynthClass::Benign => 1,
        SynthClass::Malignant => 2,
    });
    let (w, h) = (params.width, params.height);
    let side = w.min(h) as f64;
    let center = (
        w as f64 / 2.0 + rng.gen_range(-0.05..0.05) * w as f64,
        h as f64 / 2.0 + rng.gen_range(-0.05..0.05) * h as f64,
    );
    let (radius, stretch, harmonics) = match class {
        SynthClass::Benign => {
            let harmonics = (2..=3).map(|k| (k as f64, rng.gen_range(0.0..0.03), rng.gen_range(0.0..2.0 * PI))).collect();
            (side * rng.gen_range(0.17..0.23), rng.gen_range(1.0..1.2), harmonics)
        }
        SynthClass::Malignant => {
            let mut harmonics = vec![(1.0, rng.gen_range(0.08..0.16), rng.gen_range(0.0..2.0 * PI))];
            harmonics.extend((3..=8).map(|k| (k as f64, rng.gen_range(0.03..0.08), rng.gen_range(0.0..2.0 * PI))));
            (side * rng.gen_range(0.26..0.33), rng.gen_range(1.0..1.4), harmonics)
        }
    };
    let shape = Shape { center, radius, stretch, rotation: rng.gen_range(0.0..PI), harmonics };

    let (base, patches) = match class {
        SynthClass::Benign => {
            let base = if rng.gen_bool(0.5) { LIGHT_BROWN } else { DARK_BROWN };
            let mut patches = Vec::new();
            if base == LIGHT_BROWN && rng.gen_bool(0.6) {
                patches.push(Patch { center, radius: radius * rng.gen_range(0.3..0.5), color: DARK_BROWN });
            }
            (base, patches)
        }
        SynthClass::Malignant => {
            let mut colors = vec![BLACK, BLUE_GRAY, RED, LIGHT_BROWN, WHITE];
            let n = rng.gen_range(2..=4);
            let mut patches = Vec::new();
            for _ in 0..n {
                let color = colors.remove(rng.gen_range(0..colors.len()));
                let angle = rng.gen_range(0.0..2.0 * PI);
                let dist = radius * rng.gen_range(0.2..0.6);
                patches.push(Patch {
                    center: (center.0 + dist * angle.cos(), center.1 + dist * angle.sin()),
                    radius: radius * rng.gen_range(0.2..0.4),
                    color,
                });
            }
            (DARK_BROWN, patches)
        }
    };

    let mask = BinaryMask::from_fn(w, h, |x, y| shape.contains(x as f64, y as f64));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let image = RasterImage::from_fn_rgb(w, h, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let color = if !mask.get(x, y) {
            SKIN
        } else {
            patches
                .iter()
                .rev()
                .find(|p| (fx - p.center.0).powi(2) + (fy - p.center.1).powi(2) <= p.radius * p.radius)
                .map_or(base, |p| p.color)
        };
        let mut out = [0u8; 3];
        for (o, c) in out.iter_mut().zip(color) {
            let n: f64 = noise_rng.sample(StandardNormal);
            *o = (f64::from(c) + params.noise_sigma * n).round().clamp(0.0, 255.0) as u8;
        }
        out
    })
    .expect("positive size");
    SynthLesion { class, image, mask }
}

/// Write `per_class` PNGs of each class under `dir/benign` and `dir/malignant`
/// plus a `manifest.csv`, using seeds `first_seed..first_seed + per_class`.
/// Returns the manifest path.
pub fn write_dataset(dir: &Path, per_class: usize, first_seed: u64, params: &SynthParams) -> std::io::Result<PathBuf> {
    let mut rows = vec!["path,label".to_string()];
    for (class, name) in [(SynthClass::Benign, "benign"), (SynthClass::Malignant, "malignant")] {
        std::fs::create_dir_all(dir.join(name))?;
        for seed in first_seed..first_seed + per_class as u64 {
            let lesion = synth_lesion(class, seed, params);
            let rel = format!("{name}/{name}_{seed:05}.png");
            let png = encode_png(&lesion.image).map_err(|e| std::io::Error::other(e.to_string()))?;
            std::fs::write(dir.join(&rel), png)?;
            rows.push(format!("{rel},{name}"));
        }
    }
    let manifest = dir.join("manifest.csv");
    std::fs::write(&manifest, rows.join("\n") + "\n")?;
    Ok(manifest)
}

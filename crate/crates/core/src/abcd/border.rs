use super::AbcdError;
use crate::imaging::BinaryMask;

/// Clockwise (on screen) 8-neighborhood, starting east.
const DIRS: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter().position(|&d| d == (dx, dy)).expect("unit neighbor offset")
}

/// Moore-neighbor tracing of the outer boundary of the component containing
/// the first foreground pixel in raster order. Returns pixel coordinates in
/// tracing order; consecutive points are 8-neighbors and the contour closes
/// back onto the first point.
pub fn trace_outer_contour(mask: &BinaryMask) -> Vec<(i64, i64)> {
    let Some(start_idx) = mask.bits().iter().position(|&b| b) else {
        return Vec::new();
    };
    let w = mask.width();
    let start = ((start_idx % w) as i64, (start_idx / w) as i64);
    let fg = |p: (i64, i64)| mask.get_signed(p.0, p.1);

    // the pixel west of a raster-first pixel is background
    let start_back = 4;
    let mut contour = vec![start];
    let mut current = start;
    let mut back = start_back;
    let mut first_move: Option<(i64, i64)> = None;
    let limit = 4 * mask.count() + 8;
    for _ in 0..limit {
        let mut next = None;
        for k in 1..=8 {
            let d = (back + k) % 8;
            let cand = (current.0 + DIRS[d].0, current.1 + DIRS[d].1);
            if fg(cand) {
                let prev = (back + k - 1) % 8;
                let bt = (current.0 + DIRS[prev].0, current.1 + DIRS[prev].1);
                next = Some((cand, dir_index(bt.0 - cand.0, bt.1 - cand.1)));
                break;
            }
        }
        let Some((cand, new_back)) = next else {
            // isolated pixel
            break;
        };
        if current == start {
            match first_move {
                None => first_move = Some(cand),
                Some(m) if m == cand => break,
                Some(_) => {}
            }
        }
        contour.push(cand);
        current = cand;
        back = new_back;
    }
    if contour.len() > 1 && contour.last() == Some(&start) {
        contour.pop();
    }
    contour
}

/// Length of the closed traced contour after circular Gaussian smoothing of
/// its vertices, `sigma` in vertex steps.
///
/// The raw chain (axis steps 1, diagonal steps √2) overestimates digitized
/// curves by the staircase. Smoothing removes it while leaving straight runs
/// untouched; corners are rounded by roughly 0.6·sigma each.
pub fn contour_perimeter(contour: &[(i64, i64)], sigma: f64) -> f64 {
    let n = contour.len();
    if n < 2 {
        return 0.0;
    }
    let half = (3.0 * sigma).ceil() as usize;
    let weights: Vec<f64> = (0..=2 * half).map(|j| (-((j as f64 - half as f64).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let smoothed: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let (mut x, mut y) = (0.0, 0.0);
            for (j, w) in weights.iter().enumerate() {
                let p = contour[(i + j + n * (half / n + 1) - half) % n];
                x += w * p.0 as f64;
                y += w * p.1 as f64;
            }
            (x / total, y / total)
        })
        .collect();
    (0..n)
        .map(|i| {
            let (p, q) = (smoothed[i], smoothed[(i + 1) % n]);
            ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt()
        })
        .sum()
}

/// Raw chain-code length: 1 per axis step, √2 per diagonal step.
pub fn chain_length(contour: &[(i64, i64)]) -> f64 {
    let n = contour.len();
    if n < 2 {
        return 0.0;
    }
    (0..n)
        .map(|i| {
            let (p, q) = (contour[i], contour[(i + 1) % n]);
            if p.0 != q.0 && p.1 != q.1 {
                std::f64::consts::SQRT_2
            } else {
                1.0
            }
        })
        .sum()
}

/// Irregularity index P²/(4πA), A the foreground pixel count. Floored at 1,
/// the value of a perfect circle.
///
/// The smoothing width grows with √A so that a shape and its upsampled copy
/// are smoothed alike. The traced contour runs through boundary pixel centers,
/// half a pixel inside the counted area; offsetting a closed curve outward by
/// 1/2 lengthens it by π, which is added back.
pub fn border_irregularity(mask: &BinaryMask) -> Result<f64, AbcdError> {
    let area = mask.count();
    if area == 0 {
        return Err(AbcdError::NoLesion);
    }
    let sigma = ((area as f64).sqrt() / 40.0).max(0.7);
    let p = contour_perimeter(&trace_outer_contour(mask), sigma) + std::f64::consts::PI;
    Ok((p * p / (4.0 * std::f64::consts::PI * area as f64)).max(1.0))
}

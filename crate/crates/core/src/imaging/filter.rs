use super::{FloatPlane, ImagingError, Result};

fn check_params(kernel_size: usize, sigma: f64) -> Result<()> {
    if kernel_size == 0 || kernel_size % 2 == 0 {
        return Err(ImagingError::InvalidParameter(format!(
            "kernel size must be odd and at least 1, got {kernel_size}"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ImagingError::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// Sampled Gaussian of odd length, normalized to sum 1.
pub fn gaussian_kernel_1d(kernel_size: usize, sigma: f64) -> Result<Vec<f64>> {
    check_params(kernel_size, sigma)?;
    let r = (kernel_size / 2) as i64;
    let raw: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Row-major `kernel_size × kernel_size` kernel; the outer product of the 1-D kernel.
pub fn gaussian_kernel_2d(kernel_size: usize, sigma: f64) -> Result<Vec<f64>> {
    let k = gaussian_kernel_1d(kernel_size, sigma)?;
    Ok(k.iter().flat_map(|a| k.iter().map(move |b| a * b)).collect())
}

/// Symmetric (edge-repeating) reflection: `… c b a | a b c … | c b a …`.
/// Works for offsets of any size, including planes narrower than the kernel.
fn mirror(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// 2-D Gaussian convolution with mirror-padded borders.
///
/// The kernel is separable, so this runs as a horizontal pass followed by a
/// vertical one; the result equals the direct 2-D convolution with
/// [`gaussian_kernel_2d`] up to rounding.
pub fn gaussian_filter(plane: &FloatPlane, kernel_size: usize, sigma: f64) -> Result<FloatPlane> {
    let k = gaussian_kernel_1d(kernel_size, sigma)?;
    let r = (kernel_size / 2) as i64;
    let (w, h) = (plane.width(), plane.height());
    let src = plane.values();

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kw)| kw * row[mirror(x as i64 + j as i64 - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kw)| kw * tmp[mirror(y as i64 + j as i64 - r, h) * w + x])
                .sum();
        }
    }
    FloatPlane::new(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_normalized() {
        let k = gaussian_kernel_2d(5, 1.0).unwrap();
        assert_eq!(k.len(), 25);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gaussian_kernel_1d(4, 1.0).is_err());
        assert!(gaussian_kernel_1d(0, 1.0).is_err());
        assert!(gaussian_kernel_1d(5, 0.0).is_err());
        assert!(gaussian_kernel_1d(5, -1.0).is_err());
        let p = FloatPlane::filled(3, 3, 1.0).unwrap();
        assert!(matches!(gaussian_filter(&p, 6, 1.0), Err(ImagingError::InvalidParameter(_))));
    }

    #[test]
    fn constant_plane_is_preserved() {
        let p = FloatPlane::filled(7, 4, 0.37).unwrap();
        let f = gaussian_filter(&p, 5, 1.0).unwrap();
        assert!(f.values().iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn impulse_response_matches_independent_kernel() {
        // independent evaluation of exp(-(dx²+dy²)/2) / Σ over the 5×5 support
        let mut expected = [[0.0f64; 5]; 5];
        let mut total = 0.0;
        for (dy, row) in expected.iter_mut().enumerate() {
            for (dx, v) in row.iter_mut().enumerate() {
                let (a, b) = (dx as f64 - 2.0, dy as f64 - 2.0);
                *v = (-(a * a + b * b) / 2.0).exp();
                total += *v;
            }
        }
        let plane = FloatPlane::from_fn(11, 11, |x, y| if x == 5 && y == 5 { 1.0 } else { 0.0 }).unwrap();
        let out = gaussian_filter(&plane, 5, 1.0).unwrap();
        for y in 0..11 {
            for x in 0..11 {
                let want = if (3..=7).contains(&x) && (3..=7).contains(&y) {
                    expected[y - 3][x - 3] / total
                } else {
                    0.0
                };
                assert!((out.get(x, y) - want).abs() < 1e-12, "({x},{y})");
            }
        }
    }

    #[test]
    fn mirror_indices() {
        assert_eq!(mirror(-1, 4), 0);
        assert_eq!(mirror(-2, 4), 1);
        assert_eq!(mirror(4, 4), 3);
        assert_eq!(mirror(5, 4), 2);
        assert_eq!(mirror(-3, 1), 0);
        assert_eq!(mirror(2, 1), 0);
    }

    #[test]
    fn works_on_planes_narrower_than_kernel() {
        let p = FloatPlane::new(2, 1, vec![0.0, 1.0]).unwrap();
        let f = gaussian_filter(&p, 7, 2.0).unwrap();
        assert!(f.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    proptest! {
        #[test]
        fn filter_is_linear(
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            p in proptest::collection::vec(-1.0f64..1.0, 48),
            q in proptest::collection::vec(-1.0f64..1.0, 48),
        ) {
            let pp = FloatPlane::new(8, 6, p.clone()).unwrap();
            let qq = FloatPlane::new(8, 6, q.clone()).unwrap();
            let combo = FloatPlane::new(8, 6, p.iter().zip(&q).map(|(x, y)| a * x + b * y).collect()).unwrap();
            let lhs = gaussian_filter(&combo, 5, 1.0).unwrap();
            let fp = gaussian_filter(&pp, 5, 1.0).unwrap();
            let fq = gaussian_filter(&qq, 5, 1.0).unwrap();
            for i in 0..48 {
                let rhs = a * fp.values()[i] + b * fq.values()[i];
                prop_assert!((lhs.values()[i] - rhs).abs() < 1e-6);
            }
        }
    }
}

use std::collections::VecDeque;

use crate::imaging::BinaryMask;

fn label_components(mask: &BinaryMask, value: bool, eight: bool) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut sizes = vec![0usize];
    let offsets: &[(i64, i64)] = if eight {
        &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
    } else {
        &[(0, -1), (-1, 0), (1, 0), (0, 1)]
    };
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if mask.bits()[start] != value || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32;
        sizes.push(0);
        labels[start] = label;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            sizes[label as usize] += 1;
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits()[j] == value && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
    }
    (labels, sizes)
}

/// Keep only the largest 8-connected foreground component. Ties go to the
/// component found first in raster order.
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (labels, sizes) = label_components(mask, true, true);
    let Some(best) = (1..sizes.len()).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))) else {
        return mask.clone();
    };
    let bits = labels.iter().map(|&l| l as usize == best).collect();
    BinaryMask::from_bits(mask.width(), mask.height(), bits).expect("same dimensions")
}

/// Fill background regions (4-connected) that do not touch the frame.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let (labels, sizes) = label_components(mask, false, false);
    let mut touches_border = vec![false; sizes.len()];
    for x in 0..w {
        touches_border[labels[x] as usize] = true;
        touches_border[labels[(h - 1) * w + x] as usize] = true;
    }
    for y in 0..h {
        touches_border[labels[y * w] as usize] = true;
        touches_border[labels[y * w + w - 1] as usize] = true;
    }
    let bits = mask
        .bits()
        .iter()
        .zip(&labels)
        .map(|(&b, &l)| b || !touches_border[l as usize])
        .collect();
    BinaryMask::from_bits(w, h, bits).expect("same dimensions")
}

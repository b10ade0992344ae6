use ndarray::Array2;
use rand::Rng;

use super::dataset::ImageShape;

/// Zero-padded random crop (`pad` pixels per side) followed by a horizontal
/// flip with probability 1/2, applied in place to each channel-planar row.
pub fn crop_and_flip<R: Rng + ?Sized>(
    batch: &mut Array2<f64>,
    shape: ImageShape,
    pad: usize,
    rng: &mut R,
) {
    assert_eq!(
        batch.ncols(),
        shape.len(),
        "rows must match the image shape"
    );
    let (c, h, w) = (shape.channels, shape.height, shape.width);
    let mut scratch = vec![0.0; shape.len()];
    for mut row in batch.rows_mut() {
        let dy = rng.random_range(0..=2 * pad) as isize - pad as isize;
        let dx = rng.random_range(0..=2 * pad) as isize - pad as isize;
        let flip = rng.random_bool(0.5);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let sy = y as isize + dy;
                    let sx0 = if flip { w - 1 - x } else { x };
                    let sx = sx0 as isize + dx;
                    scratch[(ch * h + y) * w + x] =
                        if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                            0.0
                        } else {
                            row[(ch * h + sy as usize) * w + sx as usize]
                        };
                }
            }
        }
        for (dst, &src) in row.iter_mut().zip(&scratch) {
            *dst = src;
        }
    }
}

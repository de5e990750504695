use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Bilinear resize of an `(H, W, C)` image with half-pixel centers
/// (corners not aligned). Source coordinates are clamped at the borders.
pub fn resize_bilinear(image: &Tensor, height: usize, width: usize) -> Result<Tensor> {
    let (h, w, c) = match *image.shape() {
        [h, w, c] => (h, w, c),
        _ => {
            return Err(Error::shape(format!(
                "resize needs an (H, W, C) image, got {:?}",
                image.shape()
            )))
        }
    };
    if height == h && width == w {
        return Ok(image.clone());
    }
    let axis = |dst: usize, src: usize, out: usize| -> (usize, usize, f64) {
        let pos = ((dst as f64 + 0.5) * src as f64 / out as f64 - 0.5).clamp(0.0, (src - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src - 1);
        (lo, hi, pos - lo as f64)
    };
    let src = image.data();
    let mut out = Vec::with_capacity(height * width * c);
    for i in 0..height {
        let (y0, y1, fy) = axis(i, h, height);
        for j in 0..width {
            let (x0, x1, fx) = axis(j, w, width);
            for ch in 0..c {
                let at = |y: usize, x: usize| src[(y * w + x) * c + ch] as f64;
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out.push((top * (1.0 - fy) + bottom * fy) as f32);
            }
        }
    }
    Tensor::from_vec(&[height, width, c], out)
}

use crate::error::{input, Result};

/// 3x3 mean filter with edge-clamped (replicate) padding on a row-major
/// `h x w` image.
pub fn low_pass_filter(image: &[f64], h: usize, w: usize) -> Result<Vec<f64>> {
    if h == 0 || w == 0 || image.len() != h * w {
        return Err(input(format!(
            "image buffer of {} values is not {h}x{w}",
            image.len()
        )));
    }
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        image[r * w + c]
    };
    let mut out = vec![0.0; h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let mut acc = 0.0;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    acc += at(r + dr, c + dc);
                }
            }
            out[r as usize * w + c as usize] = acc / 9.0;
        }
    }
    Ok(out)
}

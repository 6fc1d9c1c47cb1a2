//! Anti-aliased line drawing into the square observation mask.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector2;

use super::camera::MASK_SIZE;
use crate::error::{Error, Result};

/// Square gate-edge observation with values in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GateMask {
    pixels: Vec<f32>,
}

impl Default for GateMask {
    fn default() -> Self {
        Self::zeros()
    }
}

impl GateMask {
    pub fn zeros() -> Self {
        Self { pixels: vec![0.0; MASK_SIZE * MASK_SIZE] }
    }

    pub fn from_pixels(pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != MASK_SIZE * MASK_SIZE {
            return Err(Error::ShapeMismatch(format!(
                "mask needs {} pixels, got {}",
                MASK_SIZE * MASK_SIZE,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::ShapeMismatch("mask values must lie in [0, 1]".into()));
        }
        Ok(Self { pixels })
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * MASK_SIZE + col]
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.iter().all(|&p| p == 0.0)
    }

    pub fn count_nonzero(&self) -> usize {
        self.pixels.iter().filter(|&&p| p > 0.0).count()
    }

    /// Composites a line of full intensity over the mask. `a` and `b` are in
    /// mask coordinates where pixel `(row, col)` covers `[col, col + 1) x
    /// [row, row + 1)`. Coverage falls off linearly over one pixel around a
    /// core of `width - 1`.
    pub fn draw_line(&mut self, a: Vector2<f64>, b: Vector2<f64>, width: f64) {
        if !(a.iter().chain(b.iter()).all(|v| v.is_finite())) {
            return;
        }
        let reach = 0.5 * width + 0.5;
        let size = MASK_SIZE as f64;
        let x0 = (a.x.min(b.x) - reach).floor().max(0.0);
        let x1 = (a.x.max(b.x) + reach).ceil().min(size);
        let y0 = (a.y.min(b.y) - reach).floor().max(0.0);
        let y1 = (a.y.max(b.y) + reach).ceil().min(size);
        if x0 >= x1 || y0 >= y1 {
            return;
        }
        let ab = b - a;
        let len2 = ab.norm_squared();
        for row in y0 as usize..y1 as usize {
            for col in x0 as usize..x1 as usize {
                let p = Vector2::new(col as f64 + 0.5, row as f64 + 0.5);
                let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let dist = (a + ab * t - p).norm();
                let cover = (reach - dist).clamp(0.0, 1.0) as f32;
                if cover > 0.0 {
                    let px = &mut self.pixels[row * MASK_SIZE + col];
                    *px = cover + *px * (1.0 - cover);
                }
            }
        }
    }

    /// Whether a line of `width` between `a` and `b` can touch the mask.
    pub fn line_touches(a: &Vector2<f64>, b: &Vector2<f64>, width: f64) -> bool {
        let reach = 0.5 * width + 0.5;
        let size = MASK_SIZE as f64;
        a.x.min(b.x) < size + reach && a.x.max(b.x) > -reach && a.y.min(b.y) < size + reach && a.y.max(b.y) > -reach
    }

    /// Binary portable graymap, value `round(255 * pixel)`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{MASK_SIZE} {MASK_SIZE}\n255\n").into_bytes();
        out.extend(self.pixels.iter().map(|&p| (255.0 * p).round().clamp(0.0, 255.0) as u8));
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_pgm())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizontal_line_has_full_core() {
        let mut m = GateMask::zeros();
        m.draw_line(Vector2::new(10.0, 40.5), Vector2::new(70.0, 40.5), 1.5);
        assert_eq!(m.get(40, 40), 1.0);
        // Neighbor rows are one pixel away: partially covered.
        let side = m.get(39, 40);
        assert!(side > 0.0 && side < 1.0, "{side}");
        assert_eq!(m.get(37, 40), 0.0);
    }

    #[test]
    fn overlapping_lines_stay_bounded() {
        let mut m = GateMask::zeros();
        for k in 0..20 {
            m.draw_line(Vector2::new(0.0, k as f64 * 0.1), Vector2::new(84.0, 84.0 - k as f64 * 0.1), 1.5);
        }
        assert!(m.pixels().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn offscreen_line_is_ignored() {
        let mut m = GateMask::zeros();
        m.draw_line(Vector2::new(-50.0, -50.0), Vector2::new(-10.0, -20.0), 1.5);
        m.draw_line(Vector2::new(f64::NAN, 1.0), Vector2::new(3.0, 3.0), 1.5);
        assert!(m.is_empty());
        assert!(!GateMask::line_touches(&Vector2::new(-50.0, -50.0), &Vector2::new(-10.0, -20.0), 1.5));
    }

    #[test]
    fn pgm_header_and_quantization() {
        let mut pixels = vec![0.0; MASK_SIZE * MASK_SIZE];
        pixels[1] = 0.5;
        pixels[2] = 1.0;
        let pgm = GateMask::from_pixels(pixels).unwrap().to_pgm();
        let header = b"P5\n84 84\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(&pgm[header.len()..header.len() + 3], &[0, 128, 255]);
        assert_eq!(pgm.len(), header.len() + MASK_SIZE * MASK_SIZE);
    }

    #[test]
    fn from_pixels_validates() {
        assert!(GateMask::from_pixels(vec![0.0; 3]).is_err());
        assert!(GateMask::from_pixels(vec![1.5; MASK_SIZE * MASK_SIZE]).is_err());
    }
}

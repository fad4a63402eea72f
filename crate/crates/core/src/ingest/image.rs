//! Page image preprocessing: bilinear resize, Otsu threshold, binarization.

use std::path::Path;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// 8-bit grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::InvalidArgument(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut h = [0u64; 256];
        for &p in &self.pixels {
            h[p as usize] += 1;
        }
        h
    }

    /// Loads any supported image file and converts it to luma.
    pub fn open(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let luma = img.into_luma8();
        let (w, h) = luma.dimensions();
        Self::new(w, h, luma.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::L8,
        )
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Bilinear resize to `round(width * scale) × round(height * scale)`.
///
/// Sample positions are pixel-center aligned and clamped to the source.
pub fn resize_image(img: &GrayImage, scale: f64) -> Result<GrayImage> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let w = (f64::from(img.width) * scale).round();
    let h = (f64::from(img.height) * scale).round();
    if w < 1.0 || h < 1.0 || w > f64::from(u32::MAX) || h > f64::from(u32::MAX) {
        return Err(Error::InvalidArgument(format!("scale {scale} gives a {w}x{h} image")));
    }
    let (w, h) = (w as u32, h as u32);
    if img.width == 0 || img.height == 0 {
        return Err(Error::InvalidArgument("cannot resize an empty image".into()));
    }

    let sx = f64::from(img.width) / f64::from(w);
    let sy = f64::from(img.height) / f64::from(h);
    let max_x = f64::from(img.width - 1);
    let max_y = f64::from(img.height - 1);
    let axis = |i: u32, s: f64, max: f64| {
        let src = ((f64::from(i) + 0.5) * s - 0.5).clamp(0.0, max);
        let lo = src.floor();
        (lo as u32, (lo as u32 + 1).min(max as u32), src - lo)
    };

    let cols: Vec<_> = (0..w).map(|x| axis(x, sx, max_x)).collect();
    let mut pixels = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h {
        let (y0, y1, fy) = axis(y, sy, max_y);
        for &(x0, x1, fx) in &cols {
            let top = f64::from(img.get(x0, y0)) * (1.0 - fx) + f64::from(img.get(x1, y0)) * fx;
            let bottom = f64::from(img.get(x0, y1)) * (1.0 - fx) + f64::from(img.get(x1, y1)) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(w, h, pixels)
}

/// Otsu threshold of a 256-bin histogram, computed exactly.
///
/// Class 0 holds intensities `<= t`. The threshold maximizes the
/// between-class variance `ω0·ω1·(μ0 − μ1)²`; ties resolve to the smallest
/// `t`, so a single-intensity histogram yields 0.
///
/// Uses `N²·σ²(t) = (N·s0 − S·n0)² / (n0·n1)` and compares candidates by
/// exact integer cross-multiplication.
pub fn otsu_threshold(hist: &[u64; 256]) -> Result<u8> {
    let total: u128 = hist.iter().map(|&c| u128::from(c)).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("histogram is empty".into()));
    }
    let weighted: u128 = hist.iter().enumerate().map(|(i, &c)| i as u128 * u128::from(c)).sum();
    let (total_i, weighted_i) = (BigInt::from(total), BigInt::from(weighted));

    let mut best_t = 0u8;
    let (mut best_num, mut best_den) = (BigInt::zero(), BigInt::one());
    let (mut n0, mut s0) = (0u128, 0u128);
    for t in 0..=255u8 {
        n0 += u128::from(hist[t as usize]);
        s0 += u128::from(t) * u128::from(hist[t as usize]);
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let d = BigInt::from(s0) * &total_i - &weighted_i * BigInt::from(n0);
        let num = &d * &d;
        let den = BigInt::from(n0) * BigInt::from(n1);
        if &num * &best_den > &best_num * &den {
            best_t = t;
            best_num = num;
            best_den = den;
        }
    }
    Ok(best_t)
}

/// Otsu threshold evaluated in the scalar type `T`.
pub fn otsu_threshold_in<T: Scalar>(hist: &[u64; 256]) -> Result<u8> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("histogram is empty".into()));
    }
    let weighted: u64 = hist.iter().enumerate().map(|(i, &c)| i as u64 * c).sum();

    let mut best_t = 0u8;
    let mut best = T::zero();
    let (mut n0, mut s0) = (0u64, 0u64);
    for t in 0..=255u8 {
        n0 += hist[t as usize];
        s0 += t as u64 * hist[t as usize];
        let variance = between_class_variance::<T>(n0, s0, total, weighted);
        if variance > best {
            best = variance;
            best_t = t;
        }
    }
    Ok(best_t)
}

fn between_class_variance<T: Scalar>(n0: u64, s0: u64, total: u64, weighted: u64) -> T {
    let n1 = total - n0;
    if n0 == 0 || n1 == 0 {
        return T::zero();
    }
    let w0 = T::ratio_or_zero(n0, total);
    let w1 = T::ratio_or_zero(n1, total);
    let mu0 = T::ratio_or_zero(s0, n0);
    let mu1 = T::ratio_or_zero(weighted - s0, n1);
    let d = mu0 - mu1;
    w0 * w1 * d.clone() * d
}

/// Pixels `<= t` become 0, the rest 255.
pub fn binarize(img: &GrayImage, t: u8) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|&p| if p <= t { 0 } else { 255 }).collect(),
    }
}

/// Otsu binarization; constant images are returned unchanged.
pub fn binarize_otsu(img: &GrayImage) -> Result<GrayImage> {
    let hist = img.histogram();
    if hist.iter().filter(|&&c| c > 0).count() <= 1 {
        return Ok(img.clone());
    }
    Ok(binarize(img, otsu_threshold(&hist)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_scale() {
        let img = GrayImage::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(resize_image(&img, 1.0).unwrap(), img);
    }

    #[test]
    fn constant_downscale() {
        let img = GrayImage::filled(100, 100, 77);
        let out = resize_image(&img, 0.5).unwrap();
        assert_eq!((out.width(), out.height()), (50, 50));
        assert!(out.pixels().iter().all(|&p| p == 77));
        let back = resize_image(&out, 2.0).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn upscale_two_pixel_ramp() {
        // Sample x positions (x + 0.5) / 2 - 0.5 = -0.25, 0.25, 0.75, 1.25,
        // clamped to [0, 1]: weights 0, 0.25, 0.75, 1 of 255.
        let img = GrayImage::new(2, 1, vec![0, 255]).unwrap();
        let out = resize_image(&img, 2.0).unwrap();
        assert_eq!((out.width(), out.height()), (4, 2));
        assert_eq!(out.pixels(), &[0, 64, 191, 255, 0, 64, 191, 255]);
    }

    #[test]
    fn zero_dimension_is_error() {
        let img = GrayImage::filled(3, 3, 0);
        assert!(resize_image(&img, 0.1).is_err());
        assert!(resize_image(&img, 0.0).is_err());
        assert!(resize_image(&img, -1.0).is_err());
    }

    #[test]
    fn bimodal_histogram() {
        let mut h = [0u64; 256];
        h[50] = 4;
        h[200] = 4;
        assert_eq!(otsu_threshold(&h).unwrap(), 50);
        assert_eq!(otsu_threshold_in::<f64>(&h).unwrap(), 50);
        assert_eq!(otsu_threshold_in::<num_rational::BigRational>(&h).unwrap(), 50);
    }

    #[test]
    fn constant_histogram_is_zero() {
        let mut h = [0u64; 256];
        h[128] = 1000;
        assert_eq!(otsu_threshold(&h).unwrap(), 0);
        assert!(otsu_threshold(&[0; 256]).is_err());
    }

    #[test]
    fn binarize_cases() {
        let img = GrayImage::new(4, 2, vec![50, 200, 50, 200, 200, 50, 200, 50]).unwrap();
        let b = binarize(&img, 50);
        assert_eq!(b.pixels(), &[0, 255, 0, 255, 255, 0, 255, 0]);
        assert!(binarize(&img, 255).pixels().iter().all(|&p| p == 0));
        let dark = GrayImage::filled(2, 2, 10);
        assert!(binarize(&dark, 5).pixels().iter().all(|&p| p == 255));
        assert_eq!(binarize_otsu(&dark).unwrap(), dark);
        assert_eq!(binarize_otsu(&img).unwrap(), b);
    }
}

use super::{MetricsError, SsimConfig};
use crate::raster::RasterImage;

fn same_dims(a: &RasterImage, b: &RasterImage) -> Result<(), MetricsError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricsError::DimensionMismatch { a: (a.width, a.height), b: (b.width, b.height) });
    }
    Ok(())
}

/// Mean squared error over RGB, alpha ignored.
pub fn mse(a: &RasterImage, b: &RasterImage) -> Result<f64, MetricsError> {
    same_dims(a, b)?;
    let n = a.width as usize * a.height as usize;
    if n == 0 {
        return Err(MetricsError::DimensionMismatch { a: (a.width, a.height), b: (b.width, b.height) });
    }
    let mut sum = 0u64;
    for (pa, pb) in a.pixels.chunks_exact(4).zip(b.pixels.chunks_exact(4)) {
        for c in 0..3 {
            let d = i64::from(pa[c]) - i64::from(pb[c]);
            sum += (d * d) as u64;
        }
    }
    Ok(sum as f64 / (n * 3) as f64)
}

pub fn psnr(a: &RasterImage, b: &RasterImage, cap_db: f64) -> Result<f64, MetricsError> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(cap_db);
    }
    Ok((10.0 * (255.0f64 * 255.0 / m).log10()).min(cap_db))
}

/// 0.299 R + 0.587 G + 0.114 B, row-major.
pub fn luma(img: &RasterImage) -> Vec<f64> {
    img.pixels.chunks_exact(4).map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])).collect()
}

/// Normalized 1-D Gaussian of odd length `size`.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let raw: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Valid-region separable filtering: output is (w-k+1)×(h-k+1).
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over every fully contained Gaussian window, on luma.
pub fn ssim(a: &RasterImage, b: &RasterImage, cfg: &SsimConfig) -> Result<f64, MetricsError> {
    same_dims(a, b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    if w < cfg.window || h < cfg.window {
        return Err(MetricsError::ImageTooSmall { width: a.width, height: a.height, window: cfg.window });
    }
    let k = gaussian_kernel(cfg.window, cfg.gaussian_sigma);
    let x = luma(a);
    let y = luma(b);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let mu_x = filter_valid(&x, w, h, &k);
    let mu_y = filter_valid(&y, w, h, &k);
    let e_xx = filter_valid(&xx, w, h, &k);
    let e_yy = filter_valid(&yy, w, h, &k);
    let e_xy = filter_valid(&xy, w, h, &k);
    let (c1, c2) = (cfg.c1(), cfg.c2());
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = e_xx[i] - mx * mx;
        let vy = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}

/// Bilinear resample with pixel-centre alignment and edge clamping.
fn resample(img: &RasterImage, width: u32, height: u32) -> RasterImage {
    let mut out = RasterImage::filled(width, height, [0, 0, 0, 0]);
    let sx = f64::from(img.width) / f64::from(width);
    let sy = f64::from(img.height) / f64::from(height);
    let max_x = f64::from(img.width - 1);
    let max_y = f64::from(img.height - 1);
    for y in 0..height {
        let fy = ((f64::from(y) + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let y0 = fy.floor() as u32;
        let y1 = (y0 + 1).min(img.height - 1);
        let ty = fy - f64::from(y0);
        for x in 0..width {
            let fx = ((f64::from(x) + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let x0 = fx.floor() as u32;
            let x1 = (x0 + 1).min(img.width - 1);
            let tx = fx - f64::from(x0);
            let (p00, p10, p01, p11) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
            let mut px = [0u8; 4];
            for c in 0..4 {
                let top = f64::from(p00[c]) * (1.0 - tx) + f64::from(p10[c]) * tx;
                let bottom = f64::from(p01[c]) * (1.0 - tx) + f64::from(p11[c]) * tx;
                px[c] = (top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8;
            }
            out.put(x, y, px);
        }
    }
    out
}

/// Brings `generated` to the reference's size. The flag says whether it was resized.
pub fn align_images(generated: &RasterImage, reference: &RasterImage) -> (RasterImage, RasterImage, bool) {
    if generated.width == reference.width && generated.height == reference.height {
        return (generated.clone(), reference.clone(), false);
    }
    (resample(generated, reference.width, reference.height), reference.clone(), true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(w: u32, h: u32, v: u8) -> RasterImage {
        RasterImage::filled(w, h, [v, v, v, 255])
    }

    #[test]
    fn mse_psnr_closed_forms() {
        assert_eq!(mse(&solid(4, 4, 0), &solid(4, 4, 255)).unwrap(), 65025.0);
        assert_eq!(psnr(&solid(4, 4, 9), &solid(4, 4, 9), 99.0).unwrap(), 99.0);
        assert!(psnr(&solid(4, 4, 0), &solid(4, 4, 255), 99.0).unwrap().abs() < 1e-12);
        assert!(mse(&solid(4, 4, 0), &solid(3, 4, 0)).is_err());
    }

    #[test]
    fn ssim_constants() {
        let cfg = SsimConfig::default();
        assert!((ssim(&solid(16, 16, 80), &solid(16, 16, 80), &cfg).unwrap() - 1.0).abs() < 1e-9);
        let v = ssim(&solid(16, 16, 0), &solid(16, 16, 255), &cfg).unwrap();
        let c1 = cfg.c1();
        assert!((v - c1 / (65025.0 + c1)).abs() < 1e-9);
        assert!(matches!(ssim(&solid(10, 16, 0), &solid(10, 16, 0), &cfg), Err(MetricsError::ImageTooSmall { .. })));
    }

    #[test]
    fn align_equal_is_noop() {
        let a = solid(3, 3, 7);
        let (g, r, resized) = align_images(&a, &a);
        assert!(!resized);
        assert_eq!(g, a);
        assert_eq!(r, a);
    }

    #[test]
    fn upsample_constant_stays_constant() {
        let (g, _, resized) = align_images(&solid(3, 5, 42), &solid(6, 10, 0));
        assert!(resized);
        assert_eq!((g.width, g.height), (6, 10));
        assert!(g.pixels.chunks(4).all(|p| p == [42, 42, 42, 255]));
    }
}

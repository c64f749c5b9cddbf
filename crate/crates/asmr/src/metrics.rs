//! Reconstruction quality metrics: PSNR, SSIM and IoU.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("grid too small: {0}")]
    TooSmall(String),
}

/// Quality summary for one reconstruction. SSIM applies to 2-D grids only
/// and IoU to thresholded occupancy, so both are optional.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: Option<f64>,
    pub iou: Option<f64>,
}

fn check_len(a: &[f64], b: &[f64]) -> Result<(), MetricsError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{} vs {} values",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB for signals spanning `peak` of dynamic
/// range. A perfect reconstruction is capped at 200 dB rather than infinity.
pub fn psnr(pred: &[f64], target: &[f64], peak: f64) -> Result<f64, MetricsError> {
    check_len(pred, target)?;
    assert!(peak > 0.0, "peak must be positive");
    let mse: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64;
    if mse == 0.0 {
        return Ok(200.0);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(200.0))
}

const SSIM_WIN: usize = 11;

/// Mean structural similarity over a 2-D image, computed with an 11x11
/// Gaussian window (sigma 1.5), k1 = 0.01, k2 = 0.03, and the window applied
/// only where it fits entirely inside the image (valid padding). Values are
/// channel-interleaved; channels are scored independently and averaged.
pub fn ssim(
    pred: &[f64],
    target: &[f64],
    height: usize,
    width: usize,
    channels: usize,
    peak: f64,
) -> Result<f64, MetricsError> {
    check_len(pred, target)?;
    if pred.len() != height * width * channels || channels == 0 {
        return Err(MetricsError::ShapeMismatch(format!(
            "{} values for {height}x{width}x{channels}",
            pred.len()
        )));
    }
    if height < SSIM_WIN || width < SSIM_WIN {
        return Err(MetricsError::TooSmall(format!(
            "{height}x{width} is smaller than the {SSIM_WIN}x{SSIM_WIN} window"
        )));
    }
    if channels == 1 {
        return Ok(ssim_mono(pred, target, height, width, peak));
    }
    let mut total = 0.0;
    for c in 0..channels {
        let p: Vec<f64> = pred.iter().skip(c).step_by(channels).copied().collect();
        let t: Vec<f64> = target.iter().skip(c).step_by(channels).copied().collect();
        total += ssim_mono(&p, &t, height, width, peak);
    }
    Ok(total / channels as f64)
}

fn ssim_mono(pred: &[f64], target: &[f64], height: usize, width: usize, peak: f64) -> f64 {
    let kernel = gaussian_kernel(SSIM_WIN, 1.5);
    let c1 = (0.01 * peak) * (0.01 * peak);
    let c2 = (0.03 * peak) * (0.03 * peak);

    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=height - SSIM_WIN {
        for x in 0..=width - SSIM_WIN {
            let mut mu_p = 0.0;
            let mut mu_t = 0.0;
            let mut pp = 0.0;
            let mut tt = 0.0;
            let mut pt = 0.0;
            for ky in 0..SSIM_WIN {
                for kx in 0..SSIM_WIN {
                    let w = kernel[ky] * kernel[kx];
                    let p = pred[(y + ky) * width + (x + kx)];
                    let t = target[(y + ky) * width + (x + kx)];
                    mu_p += w * p;
                    mu_t += w * t;
                    pp += w * p * p;
                    tt += w * t * t;
                    pt += w * p * t;
                }
            }
            let var_p = pp - mu_p * mu_p;
            let var_t = tt - mu_t * mu_t;
            let cov = pt - mu_p * mu_t;
            let s = ((2.0 * mu_p * mu_t + c1) * (2.0 * cov + c2))
                / ((mu_p * mu_p + mu_t * mu_t + c1) * (var_p + var_t + c2));
            total += s;
            count += 1;
        }
    }
    total / count as f64
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size - 1) as f64 / 2.0;
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Intersection-over-union of two occupancy masks obtained by thresholding.
/// Two empty masks count as a perfect match.
pub fn iou(pred: &[f64], target: &[f64], threshold: f64) -> Result<f64, MetricsError> {
    check_len(pred, target)?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (p, t) in pred.iter().zip(target) {
        let a = *p > threshold;
        let b = *t > threshold;
        if a && b {
            inter += 1;
        }
        if a || b {
            union += 1;
        }
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

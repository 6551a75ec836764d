//! Statistics over tracking output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least-squares line with the standard error of its slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub n: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::invalid("a line fit needs at least two paired points"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("line fit abscissae are all equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        n,
    })
}

/// Slope of `log err` against `log step`.
pub fn order_fit(steps: &[f64], errors: &[f64]) -> Result<LineFit> {
    if errors.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("order fit needs positive finite errors"));
    }
    let lx: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    fit_line(&lx, &ly)
}

/// Trend of the block maxima of a series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTrend {
    pub block: usize,
    pub blocks: usize,
    /// Change of the block maximum per sample.
    pub slope: f64,
    pub slope_stderr: f64,
    pub mean_envelope: f64,
    /// `slope · samples / mean_envelope`: fitted relative change over the record.
    pub relative_change: f64,
    /// `|slope| ≤ 2 · stderr`.
    pub statistically_flat: bool,
}

/// Fits a line to the maxima of consecutive blocks of `block` samples.
pub fn envelope_trend(series: &[f64], block: usize) -> Result<EnvelopeTrend> {
    if block == 0 {
        return Err(Error::invalid("block size must be positive"));
    }
    let blocks = series.len() / block;
    if blocks < 3 {
        return Err(Error::invalid(format!(
            "{} samples give fewer than three blocks of {block}",
            series.len()
        )));
    }
    let maxima: Vec<f64> = series
        .chunks_exact(block)
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let centers: Vec<f64> = (0..blocks).map(|b| (b as f64 + 0.5) * block as f64).collect();
    let fit = fit_line(&centers, &maxima)?;
    let mean = maxima.iter().sum::<f64>() / blocks as f64;
    let total = (blocks * block) as f64;
    Ok(EnvelopeTrend {
        block,
        blocks,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        mean_envelope: mean,
        relative_change: if mean != 0.0 { fit.slope * total / mean.abs() } else { 0.0 },
        statistically_flat: fit.slope.abs() <= 2.0 * fit.slope_stderr,
    })
}

/// Growth check on per-cell amplitude maxima.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstabilityReport {
    pub first_quarter_max: f64,
    pub last_quarter_max: f64,
    pub unstable: bool,
}

/// Flags growth when the maximum over the final quarter exceeds twice the
/// maximum over the first quarter.
pub fn detect_instability(cell_max: &[f64]) -> Result<InstabilityReport> {
    let n = cell_max.len();
    if n < 4 {
        return Err(Error::invalid("instability check needs at least four cells"));
    }
    let q = n / 4;
    let max = |s: &[f64]| s.iter().copied().fold(0.0f64, f64::max);
    let first = max(&cell_max[..q]);
    let last = max(&cell_max[n - q..]);
    Ok(InstabilityReport {
        first_quarter_max: first,
        last_quarter_max: last,
        unstable: cell_max.iter().any(|v| !v.is_finite()) || !(last <= 2.0 * first),
    })
}

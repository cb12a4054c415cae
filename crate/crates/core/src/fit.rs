//! Ordinary least-squares line fits, used for every log–log exponent in the crate.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
    pub points: usize,
}

impl LineFit {
    /// Half-width of the two-sided 95% confidence interval of the slope.
    pub fn ci95(&self) -> f64 {
        if self.points < 3 {
            return f64::INFINITY;
        }
        if self.slope_se == 0.0 {
            return 0.0;
        }
        let t = StudentsT::new(0.0, 1.0, (self.points - 2) as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::INFINITY);
        t * self.slope_se
    }
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter(
            "fit: x and y lengths differ".into(),
        ));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::Insufficient(format!(
            "fit needs at least 2 points, got {n}"
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit data".into()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Insufficient("fit: all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
        points: n,
    })
}

/// Fit of `log y` against `log x`; returns the power-law exponent as the slope.
pub fn log_log(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.iter().chain(ys).any(|v| *v <= 0.0) {
        return Err(Error::InvalidParameter(
            "log-log fit needs positive data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    least_squares(&lx, &ly)
}

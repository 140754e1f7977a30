//! Exponential decay fits on sampled observables.

use crate::error::{Error, Result};

/// Result of fitting `value ~ prefactor * exp(-rate * t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    /// Number of samples used.
    pub window: usize,
}

/// Least-squares line through `(t, ln v)` over all given samples.
pub fn fit_log_linear(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Dimension("times and values differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Fit(format!("need two positive samples, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let lm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::Fit("all samples at the same time".into()));
    }
    let stl: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    let slope = stl / stt;
    let intercept = lm - slope * tm;
    let ss: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Ok(DecayFit {
        rate: -slope,
        prefactor: intercept.exp(),
        residual: (ss / n).sqrt(),
        window: pts.len(),
    })
}

/// Fit over the tail half of a series.
///
/// The window is cut at the first non-positive or non-finite value, which
/// is how underflow shows up on long horizons.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::Dimension("times and values differ in length".into()));
    }
    if times.len() < 10 {
        return Err(Error::Fit(format!("need at least 10 samples, got {}", times.len())));
    }
    let usable = values
        .iter()
        .position(|v| !(*v > 0.0) || !v.is_finite())
        .unwrap_or(values.len());
    let start = times.len() / 2;
    if usable <= start + 1 {
        return Err(Error::Fit("observable vanished before the tail window".into()));
    }
    fit_log_linear(&times[start..usable], &values[start..usable])
}

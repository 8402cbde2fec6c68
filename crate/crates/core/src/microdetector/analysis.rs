//! Coefficient tables, power-law fits and parameter scans.

use rayon::prelude::*;

use super::coeffs::{bright_coeff, dark_coeff, emission_coeff};
use super::{DetectorParams, FieldMode};
use crate::error::{invalid, Error, Result};
use crate::scalar::{idx, lit, Real};

/// Relative fall of the signal-to-noise ratio below its plateau that marks
/// breakdown.
pub const DEFAULT_SNR_DROP: f64 = 1e-3;

/// Jump coefficients for `n = 0..=n_max` with the derived rates and fits.
#[derive(Debug, Clone, PartialEq)]
pub struct QjsTable<T> {
    pub n_max: usize,
    /// `J_n^(B)`; entry 0 is NaN since the vacuum cannot be absorbed.
    pub jb: Vec<T>,
    pub jd: Vec<T>,
    pub je: Vec<T>,
    /// Bright rate `R_B = J_1^(B)`.
    pub rb: T,
    /// Dark rate `R_D = J_0^(D)`.
    pub rd: T,
    /// `R_B / R_D`, infinite when `R_D = 0`.
    pub snr: T,
    /// Exponent in `J_n^(B) ≈ J_1^(B) n^{-2β}`; `None` when `J^(B)` vanishes.
    pub beta_fit: Option<T>,
    /// Mean of `J_n^(D) n^{2β} / J_0^(D)` over `n = 1..=n_max`.
    pub xi_fit: Option<T>,
}

impl<T: Real> QjsTable<T> {
    pub fn jb_norm(&self, n: usize) -> T {
        self.jb[n] / self.rb
    }

    pub fn jd_norm(&self, n: usize) -> T {
        self.jd[n] / self.rd
    }
}

/// Least-squares line `y ≈ slope·x + intercept` with its `R²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r2: T,
}

pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> Result<LinearFit<T>> {
    if x.len() != y.len() || x.len() < 2 {
        return invalid("linear fit needs two or more paired samples");
    }
    let n = idx::<T>(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxx = sxx + (a - mx) * (a - mx);
        sxy = sxy + (a - mx) * (b - my);
        syy = syy + (b - my) * (b - my);
    }
    if sxx == T::zero() {
        return invalid("linear fit needs distinct abscissae");
    }
    let slope = sxy / sxx;
    let r2 = if syy == T::zero() { T::one() } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

pub fn qjs_table<T: Real>(
    params: &DetectorParams<T>,
    mode: &FieldMode<T>,
    n_max: usize,
) -> Result<QjsTable<T>> {
    if n_max < 2 {
        return invalid(format!("coefficient table needs n_max >= 2, got {n_max}"));
    }
    let rows: Vec<(T, T, T)> = (0..=n_max)
        .into_par_iter()
        .map(|n| {
            let jb = if n == 0 { T::nan() } else { bright_coeff(params, mode, n)? };
            Ok((jb, dark_coeff(params, mode, n)?, emission_coeff(params, mode, n)?))
        })
        .collect::<Result<_>>()?;
    let jb: Vec<T> = rows.iter().map(|r| r.0).collect();
    let jd: Vec<T> = rows.iter().map(|r| r.1).collect();
    let je: Vec<T> = rows.iter().map(|r| r.2).collect();
    let (rb, rd) = (jb[1], jd[0]);
    let snr = if rd > T::zero() { rb / rd } else { T::infinity() };

    let beta_fit = if rb > T::zero() {
        let xs: Vec<T> = (2..=n_max).map(|n| idx::<T>(n).ln()).collect();
        let ys: Vec<T> = (2..=n_max).map(|n| (jb[n] / rb).ln()).collect();
        Some(-linear_fit(&xs, &ys)?.slope * lit(0.5))
    } else {
        None
    };
    let xi_fit = match beta_fit {
        Some(beta) if rd > T::zero() => {
            let two_beta = beta + beta;
            let sum: T = (1..=n_max).map(|n| jd[n] * idx::<T>(n).powf(two_beta) / rd).sum();
            Some(sum / idx::<T>(n_max))
        }
        _ => None,
    };
    Ok(QjsTable {
        n_max,
        jb,
        jd,
        je,
        rb,
        rd,
        snr,
        beta_fit,
        xi_fit,
    })
}

/// Rates at one bias ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint<T> {
    pub b: T,
    pub rb: T,
    pub rd: T,
    pub snr: T,
}

/// Signal-to-noise scan with its low-bias plateau and breakdown estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrScan<T> {
    pub points: Vec<SnrPoint<T>>,
    /// Median of `S` over the first quartile of the grid.
    pub plateau: T,
    pub drop: T,
    /// First `b` with `S < (1 - drop)·plateau`; `None` if the grid ends first.
    pub breakdown: Option<T>,
}

/// Rates `R_B`, `R_D` and `S` over a bias grid, with the breakdown bias.
pub fn snr_scan<T: Real>(
    template: &DetectorParams<T>,
    mode: &FieldMode<T>,
    b_grid: &[T],
    drop: T,
) -> Result<SnrScan<T>> {
    if b_grid.is_empty() {
        return invalid("bias grid is empty");
    }
    if b_grid.iter().any(|&b| !(b > T::zero())) {
        return invalid("bias grid values must be positive");
    }
    if b_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("bias grid must be strictly ascending");
    }
    if !(drop > T::zero() && drop < T::one()) {
        return invalid(format!("breakdown drop must lie in (0, 1), got {drop}"));
    }
    let points: Vec<SnrPoint<T>> = b_grid
        .par_iter()
        .map(|&b| {
            let p = template.with_b(b)?;
            let rb = bright_coeff(&p, mode, 1)?;
            let rd = dark_coeff(&p, mode, 0)?;
            let snr = if rd > T::zero() { rb / rd } else { T::infinity() };
            Ok(SnrPoint { b, rb, rd, snr })
        })
        .collect::<Result<_>>()?;

    let quartile = points.len().div_ceil(4);
    if quartile < 2 {
        return Err(Error::PlateauUndefined("fewer than two grid points in the first quartile"));
    }
    let mut head: Vec<T> = points[..quartile].iter().map(|p| p.snr).collect();
    head.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let plateau = if quartile % 2 == 1 {
        head[quartile / 2]
    } else {
        (head[quartile / 2 - 1] + head[quartile / 2]) * lit(0.5)
    };
    if !plateau.is_finite() || (points[0].snr - plateau).abs() > drop * plateau {
        return Err(Error::PlateauUndefined("signal-to-noise ratio is not flat at the low end of the grid"));
    }
    let floor = (T::one() - drop) * plateau;
    let breakdown = points.iter().find(|p| p.snr < floor).map(|p| p.b);
    Ok(SnrScan {
        points,
        plateau,
        drop,
        breakdown,
    })
}

/// Bright rate `R_B(λ)` over a wavelength grid (nm).
pub fn brightness_vs_wavelength<T: Real>(
    params: &DetectorParams<T>,
    lambda_grid: &[T],
) -> Result<Vec<(T, T)>> {
    if lambda_grid.is_empty() {
        return invalid("wavelength grid is empty");
    }
    lambda_grid
        .par_iter()
        .map(|&lambda| {
            let mode = FieldMode::new(lambda)?;
            Ok((lambda, bright_coeff(params, &mode, 1)?))
        })
        .collect()
}

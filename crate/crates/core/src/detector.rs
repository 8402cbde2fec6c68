//! Phenomenological detector description and the result types shared by the
//! SD- and E-model statistics.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::scalar::{idx, lit, Real};

/// Form of the quantum jump superoperator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `Ĵρ ∝ â ρ â†`: click rate proportional to the photon number.
    Sd,
    /// `Ĵρ ∝ E₋ ρ E₊`: click rate saturated for any `n ≥ 1`.
    E,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Sd => "sd",
            Variant::E => "e",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sd" => Ok(Variant::Sd),
            "e" => Ok(Variant::E),
            other => invalid(format!("unknown detector variant `{other}`")),
        }
    }
}

/// Counting model with rate `R`, quantum efficiency `η` and dark ratio `d`.
///
/// Times are passed around as the dimensionless product `R·t`, so `r` only
/// matters when converting to physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealizedDetector<T> {
    variant: Variant,
    r: T,
    eta: T,
    d: T,
}

impl<T: Real> IdealizedDetector<T> {
    pub fn new(variant: Variant, r: T, eta: T, d: T) -> Result<Self> {
        if !(r.is_finite() && r > T::zero()) {
            return invalid(format!("counting rate must be positive, got {r}"));
        }
        if !(eta >= T::zero() && eta <= T::one()) {
            return invalid(format!("quantum efficiency must lie in [0, 1], got {eta}"));
        }
        if !(d.is_finite() && d >= T::zero()) {
            return invalid(format!("dark ratio must be finite and >= 0, got {d}"));
        }
        Ok(Self { variant, r, eta, d })
    }

    /// Unit-rate detector; the usual choice when working in `R·t` units.
    pub fn unit(variant: Variant, eta: T, d: T) -> Result<Self> {
        Self::new(variant, T::one(), eta, d)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn d(&self) -> T {
        self.d
    }

    /// Probability `v = 1 - η` that an absorption goes unregistered.
    pub fn v(&self) -> T {
        T::one() - self.eta
    }

    pub(crate) fn expect(&self, variant: Variant) -> Result<()> {
        if self.variant != variant {
            return invalid(format!(
                "{} detector passed to a {} model routine",
                self.variant, variant
            ));
        }
        Ok(())
    }
}

pub(crate) fn check_time<T: Real>(rt: T, what: &str) -> Result<()> {
    if !(rt.is_finite() && rt >= T::zero()) {
        return invalid(format!("{what} must be finite and >= 0, got {rt}"));
    }
    Ok(())
}

/// Mean and second factorial moment of the counts registered in `(0, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountStats<T> {
    pub rt: T,
    pub mbar: T,
    pub m2fac: T,
}

impl<T: Real> CountStats<T> {
    /// Normalized second factorial moment `K_t = m(m-1)‾ / m̄²`.
    pub fn k_t(&self) -> Result<T> {
        if self.mbar <= T::zero() {
            return Err(Error::UndefinedStatistic("K_t with zero mean count"));
        }
        Ok(self.m2fac / (self.mbar * self.mbar))
    }
}

/// The state-dependent sums `Φ_k` entering the SD waiting-time density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WtKernels<T> {
    pub phi0: T,
    pub phi1: T,
    pub phi2: T,
}

/// Non-normalized waiting-time density `W_t(τ)` on a delay grid, with its
/// mass `N` and mean `τ̄` over the window `[0, θ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingTimeCurve<T> {
    pub t: T,
    pub taus: Vec<T>,
    pub w: Vec<T>,
    pub theta: T,
    pub norm: T,
    /// `None` when the window holds no probability (`N = 0`).
    pub mean_wt: Option<T>,
}

impl<T: Real> WaitingTimeCurve<T> {
    /// Integrates samples of `W` with the trapezoid rule.
    pub fn from_samples(t: T, taus: Vec<T>, w: Vec<T>, theta: T) -> Self {
        let norm = trapezoid(&taus, &w);
        let first: Vec<T> = taus.iter().zip(&w).map(|(&x, &y)| x * y).collect();
        let mean_wt = if norm > T::zero() {
            Some((trapezoid(&taus, &first) / norm).max(T::zero()).min(theta))
        } else {
            None
        };
        Self {
            t,
            taus,
            w,
            theta,
            norm,
            mean_wt,
        }
    }
}

/// Checks a delay grid: ascending, inside `[0, θ]`, at least two points.
pub(crate) fn check_tau_grid<T: Real>(taus: &[T], theta: T) -> Result<()> {
    if !(theta.is_finite() && theta > T::zero()) {
        return invalid(format!("averaging window must be positive, got {theta}"));
    }
    if taus.len() < 2 {
        return invalid("delay grid needs at least two points");
    }
    let slack = theta * lit(1e-12);
    if taus[0] < T::zero() || taus[taus.len() - 1] > theta + slack {
        return invalid("delay grid must lie inside [0, theta]");
    }
    if taus.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("delay grid must be strictly ascending");
    }
    Ok(())
}

/// `points` equally spaced delays covering `[0, θ]`.
pub fn uniform_tau_grid<T: Real>(theta: T, points: usize) -> Vec<T> {
    let steps = points.max(2) - 1;
    let h = theta / idx::<T>(steps);
    (0..=steps).map(|i| if i == steps { theta } else { idx::<T>(i) * h }).collect()
}

/// `points` delays `τ_i = θ (i/(points-1))³`, clustered near zero where the
/// density varies on the scale `1/(ηR n̄)`.
pub fn graded_tau_grid<T: Real>(theta: T, points: usize) -> Vec<T> {
    let steps = points.max(2) - 1;
    let n = idx::<T>(steps);
    (0..=steps)
        .map(|i| {
            if i == steps {
                theta
            } else {
                let u = idx::<T>(i) / n;
                theta * u * u * u
            }
        })
        .collect()
}

/// Default averaging window `θ = 10/η` in `R·τ` units.
pub fn default_theta<T: Real>(eta: T) -> Result<T> {
    if eta <= T::zero() {
        return invalid("default window 10/eta needs eta > 0");
    }
    Ok(lit::<T>(10.0) / eta)
}

/// Number of delay samples used when a caller does not supply a grid.
pub const DEFAULT_TAU_POINTS: usize = 2001;

/// Composite trapezoid rule over a (possibly non-uniform) grid.
pub fn trapezoid<T: Real>(x: &[T], y: &[T]) -> T {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (xs[1] - xs[0]) * (ys[0] + ys[1]) * lit(0.5))
        .sum()
}

/// Smallest `rt` at which the increasing function `f` reaches `target`,
/// located by bisection to relative precision `1e-12`.
pub fn first_crossing<T, F>(mut f: F, target: T) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    let mut hi = T::one();
    let mut grows = 0;
    while f(hi)? < target {
        hi = hi * lit(2.0);
        grows += 1;
        if grows > 80 {
            return Err(Error::UndefinedStatistic("target count never reached"));
        }
    }
    let mut lo = T::zero();
    while hi - lo > hi * lit(1e-12) {
        let mid = (lo + hi) * lit(0.5);
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

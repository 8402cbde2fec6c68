//! Microscopic two-level sensor coupled to a single field mode and to an
//! amplifying reservoir, and the quantum jump coefficients it induces.
//!
//! The sensor has resonance `ω₀ = 2πc/λ₀`, couples to the field with
//! strength `g` and decays at `γ = b·g` into a reservoir with `n̄` intrinsic
//! excitations. Clicks are time-averaged over `T = Υ/γ`.

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::scalar::{idx, lit, Real};

mod analysis;
mod coeffs;
pub mod divdiff;
pub mod quadrature;

pub use analysis::{
    brightness_vs_wavelength, linear_fit, qjs_table, snr_scan, LinearFit, QjsTable, SnrPoint,
    SnrScan, DEFAULT_SNR_DROP,
};
pub use coeffs::{bright_coeff, dark_coeff, emission_coeff};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;

/// Minimum ratio `ω₀ / max(γ, g)` accepted as weak coupling.
pub const WEAK_COUPLING_RATIO: f64 = 10.0;

/// Angular frequency (rad/s) of light with wavelength `lambda_nm`.
pub fn angular_frequency<T: Real>(lambda_nm: T) -> T {
    lit::<T>(2.0 * std::f64::consts::PI * SPEED_OF_LIGHT) / (lambda_nm * lit(1e-9))
}

/// Sensor parameters: resonance wavelength (nm), coupling `g` (Hz), bias
/// ratio `b = γ/g`, reservoir excitations `n̄` and averaging product `Υ = γT`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams<T> {
    lambda0: T,
    g: T,
    b: T,
    nbar_det: T,
    upsilon: T,
}

impl<T: Real> DetectorParams<T> {
    pub fn new(lambda0: T, g: T, b: T, nbar_det: T, upsilon: T) -> Result<Self> {
        let finite = [lambda0, g, b, nbar_det, upsilon].iter().all(|x| x.is_finite());
        if !finite {
            return invalid("detector parameters must be finite");
        }
        if lambda0 <= T::zero() {
            return invalid(format!("lambda0 must be positive, got {lambda0}"));
        }
        if g <= T::zero() {
            return invalid(format!("coupling g must be positive, got {g}"));
        }
        if b < T::zero() {
            return invalid(format!("bias ratio b must be >= 0, got {b}"));
        }
        if nbar_det < T::zero() {
            return invalid(format!("nbar_det must be >= 0, got {nbar_det}"));
        }
        if upsilon <= T::zero() {
            return invalid(format!("upsilon must be positive, got {upsilon}"));
        }
        let p = Self {
            lambda0,
            g,
            b,
            nbar_det,
            upsilon,
        };
        let ratio = p.omega0() / p.gamma().max(g);
        if ratio <= lit(WEAK_COUPLING_RATIO) {
            return invalid(format!(
                "weak coupling violated: omega0 / max(gamma, g) = {ratio} <= {WEAK_COUPLING_RATIO}"
            ));
        }
        Ok(p)
    }

    /// Same sensor at another bias ratio.
    pub fn with_b(&self, b: T) -> Result<Self> {
        Self::new(self.lambda0, self.g, b, self.nbar_det, self.upsilon)
    }

    pub fn with_nbar_det(&self, nbar_det: T) -> Result<Self> {
        Self::new(self.lambda0, self.g, self.b, nbar_det, self.upsilon)
    }

    pub fn lambda0(&self) -> T {
        self.lambda0
    }

    pub fn g(&self) -> T {
        self.g
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn nbar_det(&self) -> T {
        self.nbar_det
    }

    pub fn upsilon(&self) -> T {
        self.upsilon
    }

    pub fn omega0(&self) -> T {
        angular_frequency(self.lambda0)
    }

    /// Sensor decay rate `γ = b·g`.
    pub fn gamma(&self) -> T {
        self.b * self.g
    }

    /// Averaging time `T = Υ/γ` (infinite at `b = 0`).
    pub fn t_avg(&self) -> T {
        self.upsilon / self.gamma()
    }

    /// Envelope decay rate `κ = 2γ(n̄ + 1/2)`.
    pub fn kappa(&self) -> T {
        self.gamma() * (self.nbar_det + self.nbar_det + T::one())
    }
}

/// Monochromatic field mode of wavelength `lambda` (nm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMode<T> {
    lambda: T,
}

impl<T: Real> FieldMode<T> {
    pub fn new(lambda: T) -> Result<Self> {
        if !(lambda.is_finite() && lambda > T::zero()) {
            return invalid(format!("field wavelength must be positive, got {lambda}"));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn omega(&self) -> T {
        angular_frequency(self.lambda)
    }
}

/// Dimensionless detuning `q = (ω₀ - ω)/g`.
pub fn detuning<T: Real>(params: &DetectorParams<T>, mode: &FieldMode<T>) -> T {
    (params.omega0() - mode.omega()) / params.g()
}

/// `δ = (q - i b)/2`.
pub fn delta<T: Real>(params: &DetectorParams<T>, mode: &FieldMode<T>) -> Complex<T> {
    let half = lit::<T>(0.5);
    Complex::new(detuning(params, mode) * half, -params.b() * half)
}

/// `B_n = sqrt(n + δ²)` on the branch with non-negative real part.
pub fn b_n<T: Real>(delta: Complex<T>, n: usize) -> Complex<T> {
    let z = (Complex::new(idx::<T>(n), T::zero()) + delta * delta).sqrt();
    if z.re < T::zero() || (z.re == T::zero() && z.im < T::zero()) {
        -z
    } else {
        z
    }
}

/// The dressed functions `C_n`, `S_n`, `χ_n` at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedEval<T> {
    pub n: usize,
    pub q: T,
    pub delta: Complex<T>,
    pub b_n: Complex<T>,
    pub c: Complex<T>,
    pub s: Complex<T>,
    pub chi: Complex<T>,
}

/// `C_n = cos(gtB_n)`, `S_n = sin(gtB_n)/B_n`, `χ_n = e^{-iωt/2}(C_n - iδS_n)`.
pub fn dressed_eval<T: Real>(
    params: &DetectorParams<T>,
    mode: &FieldMode<T>,
    n: usize,
    t: T,
) -> Result<DressedEval<T>> {
    if !(t.is_finite() && t >= T::zero()) {
        return invalid(format!("time must be finite and >= 0, got {t}"));
    }
    let d = delta(params, mode);
    let b = b_n(d, n);
    let z = b * (params.g() * t);
    let c = z.cos();
    let s = if b.norm() == T::zero() {
        Complex::new(params.g() * t, T::zero())
    } else {
        z.sin() / b
    };
    let i = Complex::new(T::zero(), T::one());
    let phase = Complex::from_polar(T::one(), -mode.omega() * t * lit(0.5));
    Ok(DressedEval {
        n,
        q: detuning(params, mode),
        delta: d,
        b_n: b,
        c,
        s,
        chi: phase * (c - i * d * s),
    })
}

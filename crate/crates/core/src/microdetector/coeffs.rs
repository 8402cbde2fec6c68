//! Time-averaged jump coefficients in closed form.
//!
//! `C_n`, `S_n` and `χ_n` are two-term exponential sums in `s`, so each
//! integrand `e^{-κt}|…|²` expands into exponentials whose nested integrals
//! over `0 ≤ t₂ ≤ t₁ ≤ t ≤ T` are divided differences of `exp`.
//!
//! With the factor `e^{γs/2}` pulled out of every `|χ|` and `|S|`, the
//! envelope left on the outer time is `e^{-2γn̄t}` and each `χ_n(-t')` adds
//! `e^{-γt'}`.

use num_complex::Complex;

use super::divdiff::exp_divdiff;
use super::{b_n, delta, DetectorParams, FieldMode};
use crate::error::{invalid, Result};
use crate::scalar::{idx, lit, Real};

type Cx<T> = Complex<T>;

/// Beyond this `|δ/B_n|` the two exponentials nearly cancel.
const EXCEPTIONAL: f64 = 1e4;
/// Relative bias offset used to step around an exceptional point.
const BIAS_STEP: f64 = 1e-6;

/// Two-term sum `Σ w e^{r s}`.
type ExpSum<T> = [(Cx<T>, Cx<T>); 2];

struct Dressing<T> {
    delta: Cx<T>,
    g: T,
}

impl<T: Real> Dressing<T> {
    fn b(&self, n: usize) -> Cx<T> {
        b_n(self.delta, n)
    }

    /// `B ± δ`, the smaller one from `(B+δ)(B-δ) = n` to avoid cancellation.
    fn b_pm(&self, n: usize) -> (Cx<T>, Cx<T>, Cx<T>) {
        let b = self.b(n);
        let (plus, minus) = (b + self.delta, b - self.delta);
        let nn = Cx::new(idx::<T>(n), T::zero());
        let (plus, minus) = if plus.norm() >= minus.norm() {
            (plus, nn / plus)
        } else {
            (nn / minus, minus)
        };
        (b, plus, minus)
    }

    /// `χ_n(s) e^{-igδs} = (B-δ)/(2B) e^{ig(B-δ)s} + (B+δ)/(2B) e^{-ig(B+δ)s}`.
    ///
    /// The common factor `e^{igδs}` has modulus `e^{γs/2}` and is applied
    /// analytically, so `κ` never has to cancel against a growth rate.
    fn chi(&self, n: usize) -> ExpSum<T> {
        let (b, plus, minus) = self.b_pm(n);
        let ig = Cx::new(T::zero(), self.g);
        let two_b = b + b;
        [(minus / two_b, ig * minus), (plus / two_b, -ig * plus)]
    }

    /// `S_n(s) e^{-igδs} = (e^{ig(B-δ)s} - e^{-ig(B+δ)s}) / (2iB)`.
    fn s(&self, n: usize) -> ExpSum<T> {
        let (b, plus, minus) = self.b_pm(n);
        let ig = Cx::new(T::zero(), self.g);
        let w = Cx::new(T::one(), T::zero()) / (Cx::new(T::zero(), lit(2.0)) * b);
        [(w, ig * minus), (-w, -ig * plus)]
    }

    fn near_exceptional(&self, ns: &[usize]) -> bool {
        ns.iter().any(|&n| {
            let b = self.b(n).norm();
            b == T::zero() || self.delta.norm() > lit::<T>(EXCEPTIONAL) * b
        })
    }
}

/// `|Σ w e^{rs}|² = Σ_{j,k} w_j w̄_k e^{(r_j + r̄_k) s}`.
fn abs2<T: Real>(f: &ExpSum<T>) -> [(Cx<T>, Cx<T>); 4] {
    let mut out = [(Cx::new(T::zero(), T::zero()), Cx::new(T::zero(), T::zero())); 4];
    for (j, &(wj, rj)) in f.iter().enumerate() {
        for (k, &(wk, rk)) in f.iter().enumerate() {
            out[2 * j + k] = (wj * wk.conj(), rj + rk.conj());
        }
    }
    out
}

fn setup<T: Real>(params: &DetectorParams<T>, mode: &FieldMode<T>) -> Dressing<T> {
    Dressing {
        delta: delta(params, mode),
        g: params.g(),
    }
}

/// `κ - γ = 2γn̄`, the envelope decay left after the `e^{γs/2}` factors.
fn leak<T: Real>(p: &DetectorParams<T>) -> T {
    lit::<T>(2.0) * p.gamma() * p.nbar_det()
}

/// Evaluates `raw` at `params`, or averages it over `b(1 ± 1e-6)` when one of
/// the `B_n` used is too close to zero for the exponential split.
fn regularized<T, F>(params: &DetectorParams<T>, mode: &FieldMode<T>, ns: &[usize], raw: F) -> Result<T>
where
    T: Real,
    F: Fn(&DetectorParams<T>, &Dressing<T>) -> T,
{
    let dressing = setup(params, mode);
    if !dressing.near_exceptional(ns) {
        return Ok(raw(params, &dressing));
    }
    let step = lit::<T>(BIAS_STEP);
    let lo = params.with_b(params.b() * (T::one() - step))?;
    let hi = params.with_b(params.b() * (T::one() + step))?;
    let a = raw(&lo, &setup(&lo, mode));
    let b = raw(&hi, &setup(&hi, mode));
    Ok((a + b) * lit(0.5))
}

/// Bright coefficient `J_n^(B)`, the rate (Hz) multiplying `n|n-1><n-1|`:
/// `2γ(1+n̄) (1/T) ∫₀^T e^{-κt} |S_n(t)|² dt`.
pub fn bright_coeff<T: Real>(params: &DetectorParams<T>, mode: &FieldMode<T>, n: usize) -> Result<T> {
    if n == 0 {
        return invalid("bright coefficient needs n >= 1");
    }
    if params.b() == T::zero() {
        return Ok(T::zero());
    }
    regularized(params, mode, &[n], |p, dr| {
        let (leak, t) = (leak(p), p.t_avg());
        let zero = Cx::new(T::zero(), T::zero());
        let sum = abs2(&dr.s(n)).iter().fold(zero, |acc, &(w, r)| {
            acc + w * exp_divdiff(&[(r - leak) * t, zero])
        });
        lit::<T>(2.0) * p.gamma() * (T::one() + p.nbar_det()) * sum.re
    })
}

/// Dark coefficient `J_n^(D)` (Hz):
/// `2γ(1+n̄)·2γn̄ (1/T) ∫₀^T dt e^{-κt} ∫₀^t dt₁ |χ_{n+1}(t-t₁) χ_n(-t₁)|²`.
pub fn dark_coeff<T: Real>(params: &DetectorParams<T>, mode: &FieldMode<T>, n: usize) -> Result<T> {
    if params.b() == T::zero() || params.nbar_det() == T::zero() {
        return Ok(T::zero());
    }
    regularized(params, mode, &[n, n + 1], |p, dr| {
        let (leak, t) = (leak(p), p.t_avg());
        let back = leak + p.gamma() + p.gamma();
        let zero = Cx::new(T::zero(), T::zero());
        let outer = abs2(&dr.chi(n + 1));
        let inner = abs2(&dr.chi(n));
        let mut sum = zero;
        for &(w1, r1) in &outer {
            for &(w2, r2) in &inner {
                let nodes = [(-r2 - back) * t, (r1 - leak) * t, zero];
                sum = sum + w1 * w2 * exp_divdiff(&nodes);
            }
        }
        let pump = lit::<T>(2.0) * p.gamma();
        pump * (T::one() + p.nbar_det()) * pump * p.nbar_det() * t * sum.re
    })
}

/// Emission coefficient `J_n^(E)` (Hz), the rate multiplying
/// `(n+1)|n+1><n+1|` after two reservoir excitations:
/// `2γ(1+n̄)(2γn̄)² (1/T) ∫∫∫ e^{-κt} |χ_{n+2}(t-t₁) S_{n+1}(t₁-t₂) χ_n(-t₂)|²`.
pub fn emission_coeff<T: Real>(params: &DetectorParams<T>, mode: &FieldMode<T>, n: usize) -> Result<T> {
    if params.b() == T::zero() || params.nbar_det() == T::zero() {
        return Ok(T::zero());
    }
    regularized(params, mode, &[n, n + 1, n + 2], |p, dr| {
        let (leak, t) = (leak(p), p.t_avg());
        let back = leak + p.gamma() + p.gamma();
        let zero = Cx::new(T::zero(), T::zero());
        let first = abs2(&dr.chi(n + 2));
        let middle = abs2(&dr.s(n + 1));
        let last = abs2(&dr.chi(n));
        let mut sum = zero;
        for &(w1, r1) in &first {
            for &(w2, r2) in &middle {
                let w12 = w1 * w2;
                for &(w3, r3) in &last {
                    let nodes = [(-r3 - back) * t, (r2 - leak) * t, (r1 - leak) * t, zero];
                    sum = sum + w12 * w3 * exp_divdiff(&nodes);
                }
            }
        }
        let pump = lit::<T>(2.0) * p.gamma();
        let dark = pump * p.nbar_det();
        pump * (T::one() + p.nbar_det()) * dark * dark * t * t * sum.re
    })
}

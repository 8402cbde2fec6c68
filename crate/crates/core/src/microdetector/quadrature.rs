//! Direct numerical integration of the jump coefficients.
//!
//! An independent check on the closed forms: the dressed functions are
//! evaluated from `cos`/`sin` of complex argument and the nested time
//! averages integrated with adaptive Gauss–Kronrod (7/15) rules. Integrands
//! are handled in log form because `|χ|²` grows like `e^{γt}` over times
//! where `γt` reaches `Υ`.
//!
//! Only practical when the dressed frequencies `g|Re B_n|` stay within a
//! few orders of `1/T`; far-detuned modes oscillate too fast to integrate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use super::{b_n, delta, DetectorParams, FieldMode};
use crate::error::{Error, Result};

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            max_intervals: 4000,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, bisecting the piece with
/// the largest error estimate until the total error falls below
/// `rel_tol·|integral|`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    opts: QuadOptions,
) -> std::result::Result<f64, String> {
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (val, err) = gk15(&mut f, w[0], w[1]);
            heap.push(Piece { a: w[0], b: w[1], val, err });
        }
    }
    loop {
        let (total, err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.val, e + p.err));
        if !total.is_finite() {
            return Err("non-finite integrand".into());
        }
        if err <= opts.rel_tol * total.abs() || err == 0.0 {
            return Ok(total);
        }
        if heap.len() >= opts.max_intervals {
            return Err(format!("interval budget exhausted (error {err:e} on {total:e})"));
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err("interval collapsed below machine resolution".into());
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (val, err) = gk15(&mut f, a, b);
            heap.push(Piece { a, b, val, err });
        }
    }
}

/// `0 = p₀ < τ₀ < 2τ₀ < … < t`: geometric refinement toward the origin.
fn geometric_breaks(t: f64, tau0: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut x = tau0;
    while x < t {
        out.push(x);
        x *= 2.0;
    }
    out.push(t);
    out
}

/// Geometric refinement toward both ends of `[0, t]`.
fn two_sided_breaks(t: f64, tau0: f64) -> Vec<f64> {
    let half = geometric_breaks(0.5 * t, tau0);
    let mut out = half.clone();
    out.extend(half.iter().rev().skip(1).map(|&x| t - x));
    out
}

struct Dressed {
    delta: Complex64,
    g: f64,
}

impl Dressed {
    /// `ln|χ_n(s)|²` and `ln|S_n(s)|²`, with the exponential growth of the
    /// complex `cos`/`sin` factored out before forming the mantissa.
    fn ln_abs2(&self, n: usize, s: f64, chi: bool) -> f64 {
        self.ln_abs2_on(b_n(self.delta, n), s, chi)
    }

    fn ln_abs2_on(&self, b: Complex64, s: f64, chi: bool) -> f64 {
        let z = b * (self.g * s);
        let m = z.im.abs();
        let i = Complex64::i();
        let ep = Complex64::from_polar((-z.im - m).exp(), z.re);
        let em = Complex64::from_polar((z.im - m).exp(), -z.re);
        let cos = (ep + em) * 0.5;
        let sin = (ep - em) / (2.0 * i);
        let mant = if chi {
            cos - i * self.delta * sin / b
        } else {
            sin / b
        };
        2.0 * m + mant.norm_sqr().ln()
    }
}

fn finest_scale(p: &DetectorParams<f64>, d: &Dressed, ns: &[usize]) -> f64 {
    let fastest = ns
        .iter()
        .map(|&n| p.g() * b_n(d.delta, n).norm())
        .fold(p.gamma().max(p.g()), f64::max);
    1e-3 / fastest
}

fn quad_err(integral: &'static str, n: usize) -> impl Fn(String) -> Error {
    move |reason| Error::Quadrature { integral, n, reason }
}

/// `J_n^(B)` by adaptive quadrature.
pub fn bright_coeff_quad(
    params: &DetectorParams<f64>,
    mode: &FieldMode<f64>,
    n: usize,
    opts: QuadOptions,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("bright coefficient needs n >= 1".into()));
    }
    if params.b() == 0.0 {
        return Ok(0.0);
    }
    let d = Dressed { delta: delta(params, mode), g: params.g() };
    let (kappa, t) = (params.kappa(), params.t_avg());
    let breaks = geometric_breaks(t, finest_scale(params, &d, &[n]));
    let val = integrate(|x| (-kappa * x + d.ln_abs2(n, x, false)).exp(), &breaks, opts)
        .map_err(quad_err("bright", n))?;
    Ok(2.0 * params.gamma() * (1.0 + params.nbar_det()) * val / t)
}

/// `J_n^(D)` by nested adaptive quadrature.
pub fn dark_coeff_quad(
    params: &DetectorParams<f64>,
    mode: &FieldMode<f64>,
    n: usize,
    opts: QuadOptions,
) -> Result<f64> {
    if params.b() == 0.0 || params.nbar_det() == 0.0 {
        return Ok(0.0);
    }
    let d = Dressed { delta: delta(params, mode), g: params.g() };
    let (kappa, t) = (params.kappa(), params.t_avg());
    let tau0 = finest_scale(params, &d, &[n, n + 1]);
    let inner_opts = QuadOptions { rel_tol: opts.rel_tol * 0.1, ..opts };
    let mut failure = None;
    let outer = |x: f64| -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let inner = integrate(
            |x1| (-kappa * x + d.ln_abs2(n + 1, x - x1, true) + d.ln_abs2(n, -x1, true)).exp(),
            &two_sided_breaks(x, tau0),
            inner_opts,
        );
        inner.unwrap_or_else(|e| {
            failure.get_or_insert(e);
            f64::NAN
        })
    };
    let val = integrate(outer, &geometric_breaks(t, tau0), opts);
    if let Some(e) = failure {
        return Err(quad_err("dark", n)(e));
    }
    let val = val.map_err(quad_err("dark", n))?;
    let pump = 2.0 * params.gamma();
    Ok(pump * (1.0 + params.nbar_det()) * pump * params.nbar_det() * val / t)
}

/// `J_n^(E)` by triply nested adaptive quadrature. Expensive; intended for
/// small `Υ`.
pub fn emission_coeff_quad(
    params: &DetectorParams<f64>,
    mode: &FieldMode<f64>,
    n: usize,
    opts: QuadOptions,
) -> Result<f64> {
    if params.b() == 0.0 || params.nbar_det() == 0.0 {
        return Ok(0.0);
    }
    let d = Dressed { delta: delta(params, mode), g: params.g() };
    let (kappa, t) = (params.kappa(), params.t_avg());
    let tau0 = finest_scale(params, &d, &[n, n + 1, n + 2]);
    let mid_opts = QuadOptions { rel_tol: opts.rel_tol * 0.1, ..opts };
    let low_opts = QuadOptions { rel_tol: opts.rel_tol * 0.01, ..opts };
    let mut failure = None;
    let outer = |x: f64| -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let middle = |x1: f64| -> f64 {
            if x1 == 0.0 {
                return 0.0;
            }
            let head = -kappa * x + d.ln_abs2(n + 2, x - x1, true);
            integrate(
                |x2| (head + d.ln_abs2(n + 1, x1 - x2, false) + d.ln_abs2(n, -x2, true)).exp(),
                &two_sided_breaks(x1, tau0),
                low_opts,
            )
            .unwrap_or(f64::NAN)
        };
        integrate(middle, &two_sided_breaks(x, tau0), mid_opts).unwrap_or_else(|e| {
            failure.get_or_insert(e);
            f64::NAN
        })
    };
    let val = integrate(outer, &geometric_breaks(t, tau0), opts);
    if let Some(e) = failure {
        return Err(quad_err("emission", n)(e));
    }
    let val = val.map_err(quad_err("emission", n))?;
    let pump = 2.0 * params.gamma();
    let dark = pump * params.nbar_det();
    Ok(pump * (1.0 + params.nbar_det()) * dark * dark * val / t)
}

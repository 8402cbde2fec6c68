//! Log-domain factorials and discrete probability laws used throughout the
//! counting models. Everything here stays finite for photon numbers in the
//! thousands, where direct factorials overflow.

use crate::scalar::{idx, Real};

/// `ln k!` for `k = 0..=n`.
///
/// Accumulated in `f64` with compensated summation so the absolute error
/// stays within a few ulps of `ln n!`.
pub fn ln_factorials<T: Real>(n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    let (mut acc, mut carry) = (0.0f64, 0.0f64);
    out.push(T::zero());
    for k in 1..=n {
        let y = (k as f64).ln() - carry;
        let t = acc + y;
        carry = (t - acc) - y;
        acc = t;
        out.push(T::from_f64(acc).unwrap());
    }
    out
}

/// `x * ln(y)` with the convention `0 * ln(0) = 0`.
#[inline]
pub fn xlny<T: Real>(x: T, y: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x * y.ln()
    }
}

/// Poisson probabilities `P(K = k)` for `k = 0..=k_max` at the given mean.
pub fn poisson_pmf<T: Real>(mean: T, k_max: usize, lnf: &[T]) -> Vec<T> {
    debug_assert!(lnf.len() > k_max);
    if mean == T::zero() {
        let mut out = vec![T::zero(); k_max + 1];
        out[0] = T::one();
        return out;
    }
    let ln_mean = mean.ln();
    (0..=k_max)
        .map(|k| (idx::<T>(k) * ln_mean - mean - lnf[k]).exp())
        .collect()
}

/// Upper tails `Q_k = P(K >= k)` of a Poisson law for `k = 0..=k_max`.
///
/// Accumulated backwards from far beyond the mode so every entry is a sum of
/// positive terms.
pub fn poisson_upper_tails<T: Real>(mean: T, k_max: usize) -> Vec<T> {
    let m = mean.to_f64().unwrap_or(0.0);
    let reach = (m + 40.0 * m.sqrt() + 60.0).ceil() as usize;
    let top = k_max.max(reach);
    let lnf = ln_factorials::<T>(top);
    let pmf = poisson_pmf(mean, top, &lnf);
    let mut tails = vec![T::zero(); top + 2];
    for k in (0..=top).rev() {
        tails[k] = tails[k + 1] + pmf[k];
    }
    tails.truncate(k_max + 1);
    tails
}

/// Binomial probability `C(n, k) p^k (1-p)^(n-k)` evaluated in log space.
///
/// `ln_p` and `ln_q` are `ln p` and `ln(1-p)`; either may be `-inf`.
#[inline]
pub fn binomial_pmf<T: Real>(n: usize, k: usize, ln_p: T, ln_q: T, lnf: &[T]) -> T {
    if k > n {
        return T::zero();
    }
    let a = if k == 0 { T::zero() } else { idx::<T>(k) * ln_p };
    let b = if n == k { T::zero() } else { idx::<T>(n - k) * ln_q };
    (lnf[n] - lnf[k] - lnf[n - k] + a + b).exp()
}

/// Binomial row `P(J = j)`, `J ~ Binomial(n, p)`, restricted to the window
/// of `j` carrying all but a relative `1e-18` of the peak. Returns the first
/// index of the window and its weights.
pub fn binomial_row<T: Real>(n: usize, p: T, lnf: &[T]) -> (usize, Vec<T>) {
    if p <= T::zero() {
        return (0, vec![T::one()]);
    }
    if p >= T::one() {
        return (n, vec![T::one()]);
    }
    let (ln_p, ln_q) = ln_pq(p);
    let mode = (idx::<T>(n + 1) * p).floor().to_usize().unwrap().min(n);
    let at = |k: usize| binomial_pmf(n, k, ln_p, ln_q, lnf);
    let peak = at(mode);
    let floor = peak * T::from_f64(1e-18).unwrap();
    let mut lo = mode;
    while lo > 0 && at(lo - 1) > floor {
        lo -= 1;
    }
    let mut hi = mode;
    while hi < n && at(hi + 1) > floor {
        hi += 1;
    }
    (lo, (lo..=hi).map(at).collect())
}

/// `(ln p, ln(1-p))` for a probability, computed without cancellation for
/// small `p`.
pub fn ln_pq<T: Real>(p: T) -> (T, T) {
    let ln_p = if p <= T::zero() { T::neg_infinity() } else { p.ln() };
    let ln_q = if p >= T::one() {
        T::neg_infinity()
    } else {
        (-p).ln_1p()
    };
    (ln_p, ln_q)
}

/// `1 - e^{-x}` without cancellation for small `x`.
#[inline]
pub fn one_minus_exp_neg<T: Real>(x: T) -> T {
    -((-x).exp_m1())
}

/// Discrete convolution of two probability vectors truncated to `len` entries.
pub fn convolve<T: Real>(a: &[T], b: &[T], len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); len];
    for (i, &ai) in a.iter().enumerate().take(len) {
        if ai == T::zero() {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(len - i) {
            out[i + j] = out[i + j] + ai * bj;
        }
    }
    out
}

/// Relative-tolerance helper used by invariant checks.
#[inline]
pub fn rel_diff<T: Real>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs());
    if scale == T::zero() {
        T::zero()
    } else {
        (a - b).abs() / scale
    }
}

/// Smallest count `k` such that the Poisson law at `mean` puts less than
/// `tol` mass above `k`.
pub fn poisson_quantile_bound(mean: f64, tol: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let lnf = ln_factorials::<f64>((mean + 50.0 * mean.sqrt() + 200.0) as usize);
    let pmf = poisson_pmf(mean, lnf.len() - 1, &lnf);
    let mut acc = 0.0;
    for (k, p) in pmf.iter().enumerate() {
        acc += p;
        if 1.0 - acc < tol && k as f64 > mean {
            return k;
        }
    }
    pmf.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials_match_direct_products() {
        let lnf = ln_factorials::<f64>(20);
        let mut f = 1.0f64;
        for k in 1..=20 {
            f *= k as f64;
            assert!((lnf[k] - f.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_tails_are_complementary() {
        let q = poisson_upper_tails::<f64>(3.5, 30);
        assert!((q[0] - 1.0).abs() < 1e-14);
        assert!((q[1] - (1.0 - (-3.5f64).exp())).abs() < 1e-14);
        let lnf = ln_factorials::<f64>(30);
        let pmf = poisson_pmf(3.5, 30, &lnf);
        for k in 0..30 {
            assert!((q[k] - q[k + 1] - pmf[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn small_mean_tail_keeps_relative_accuracy() {
        let q = poisson_upper_tails::<f64>(1e-6, 3);
        // P(K >= 2) ~ mean^2 / 2
        assert!(((q[2] / 5e-13) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn binomial_sums_to_one() {
        let lnf = ln_factorials::<f64>(400);
        let (lp, lq) = ln_pq(0.37);
        let s: f64 = (0..=400).map(|k| binomial_pmf(400, k, lp, lq, &lnf)).sum();
        assert!((s - 1.0).abs() < 1e-11);
        let (lp, lq) = ln_pq(1.0);
        assert_eq!(binomial_pmf(5, 5, lp, lq, &lnf), 1.0);
        assert_eq!(binomial_pmf(5, 4, lp, lq, &lnf), 0.0);
    }

    #[test]
    fn binomial_row_matches_full_row() {
        let lnf = ln_factorials::<f64>(300);
        let (lp, lq) = ln_pq(0.3);
        let (lo, row) = binomial_row(300, 0.3, &lnf);
        let mass: f64 = row.iter().sum();
        assert!((mass - 1.0).abs() < 1e-12);
        for (i, w) in row.iter().enumerate() {
            assert_eq!(*w, binomial_pmf(300, lo + i, lp, lq, &lnf));
        }
        assert_eq!(binomial_row(7, 1.0, &lnf), (7, vec![1.0]));
        assert_eq!(binomial_row(7, 0.0, &lnf), (0, vec![1.0]));
    }

    #[test]
    fn quantile_bound_covers_mass() {
        let k = poisson_quantile_bound(20.0, 1e-12);
        let q = poisson_upper_tails::<f64>(20.0, k + 1);
        assert!(q[k + 1] < 1e-12);
    }
}

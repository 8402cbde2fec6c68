//! Diagonal superoperator algebra on photon-number populations.
//!
//! `Â ρ = â ρ â†` and `ε̂ ρ = E₋ ρ E₊` both shift populations down; on a
//! truncated vector they are nilpotent, so every exponential and resolvent
//! below is a finite sum.

use crate::fock::PhotonDistribution;
use crate::scalar::{idx, lit, Real};
use crate::special::{ln_factorials, poisson_upper_tails};

/// Relative size below which series terms are dropped.
pub const SERIES_CUTOFF: f64 = 1e-16;

/// `(Â^k ρ)_n = (n+k)!/n! · ρ_{n+k}`.
pub fn apply_a_power<T: Real>(dist: &PhotonDistribution<T>, k: usize) -> PhotonDistribution<T> {
    let p = dist.probs();
    if k == 0 {
        return PhotonDistribution::unnormalized(p.to_vec());
    }
    let lnf = ln_factorials::<T>(p.len() + k);
    let out = (0..p.len())
        .map(|n| match p.get(n + k) {
            Some(&x) if x > T::zero() => falling(n + k, k, &lnf) * x,
            _ => T::zero(),
        })
        .collect();
    PhotonDistribution::unnormalized(out)
}

/// `n!/(n-k)!`, as an exact product for small `k`.
pub fn falling<T: Real>(n: usize, k: usize, lnf: &[T]) -> T {
    if k <= 8 {
        (0..k).fold(T::one(), |acc, j| acc * idx::<T>(n - j))
    } else {
        (lnf[n] - lnf[n - k]).exp()
    }
}

/// `(ε̂^k ρ)_n = ρ_{n+k}`.
pub fn apply_eps_power<T: Real>(dist: &PhotonDistribution<T>, k: usize) -> PhotonDistribution<T> {
    let p = dist.probs();
    let out = (0..p.len())
        .map(|n| p.get(n + k).copied().unwrap_or_else(T::zero))
        .collect();
    PhotonDistribution::unnormalized(out)
}

/// `Σ_{l≥0} v^l ε̂^{k0+l} ρ`, i.e. `ε̂^{k0} (1 - v ε̂)^{-1} ρ`.
pub fn eps_resolvent_series<T: Real>(
    dist: &PhotonDistribution<T>,
    v: T,
    k0: usize,
) -> PhotonDistribution<T> {
    let p = dist.probs();
    let len = p.len();
    // s_n = ρ_n + v s_{n+1}
    let mut s = vec![T::zero(); len + 1];
    for n in (0..len).rev() {
        s[n] = p[n] + v * s[n + 1];
    }
    let out = (0..len)
        .map(|n| if n + k0 < len { s[n + k0] } else { T::zero() })
        .collect();
    PhotonDistribution::unnormalized(out)
}

/// Weights `e^{-rt} (v rt)^j / j!` for `j` in a window that holds all but a
/// relative [`SERIES_CUTOFF`] of the series. Returns the first index and the
/// weights.
pub fn semigroup_weights<T: Real>(rt: T, v: T, j_max: usize) -> (usize, Vec<T>) {
    let x = v * rt;
    if x == T::zero() {
        return (0, vec![(-rt).exp()]);
    }
    let lnf = ln_factorials::<T>(j_max);
    let ln_x = x.ln();
    let ln_w = |j: usize| idx::<T>(j) * ln_x - rt - lnf[j];
    let mode = x.floor().to_usize().unwrap_or(usize::MAX).min(j_max);
    let peak = ln_w(mode);
    let floor = peak + lit::<T>(SERIES_CUTOFF).ln() - lit(2.0);
    let mut lo = mode;
    while lo > 0 && ln_w(lo - 1) > floor {
        lo -= 1;
    }
    let mut hi = mode;
    while hi < j_max && ln_w(hi + 1) > floor {
        hi += 1;
    }
    (lo, (lo..=hi).map(|j| ln_w(j).exp()).collect())
}

/// `P_t ρ = e^{-rt(1 - v ε̂)} ρ`.
pub fn e_semigroup<T: Real>(dist: &PhotonDistribution<T>, rt: T, v: T) -> PhotonDistribution<T> {
    let p = dist.probs();
    if rt == T::zero() {
        return PhotonDistribution::unnormalized(p.to_vec());
    }
    let len = p.len();
    let (lo, w) = semigroup_weights(rt, v, len - 1);
    let out = (0..len)
        .map(|n| {
            w.iter()
                .enumerate()
                .map(|(i, &wj)| match p.get(n + lo + i) {
                    Some(&x) => wj * x,
                    None => T::zero(),
                })
                .sum()
        })
        .collect();
    PhotonDistribution::unnormalized(out)
}

/// Vacuum entry `<0|(1 - P_t)(1 - v ε̂)^{-1} ρ|0>`.
///
/// Evaluated as `Σ_j v^j P(K ≥ j+1) ρ_j` with `K ~ Poisson(rt)`, the
/// integral `∫₀^t <0|P_s ρ|0> ds` in closed form, which avoids the
/// cancellation in `1 - P_t`.
pub fn semigroup_vacuum_gain<T: Real>(dist: &PhotonDistribution<T>, rt: T, v: T) -> T {
    let p = dist.probs();
    if rt == T::zero() {
        return T::zero();
    }
    let q = poisson_upper_tails(rt, p.len());
    let mut vj = T::one();
    let mut acc = T::zero();
    for (j, &pj) in p.iter().enumerate() {
        if vj == T::zero() {
            break;
        }
        acc = acc + vj * q[j + 1] * pj;
        vj = vj * v;
    }
    acc
}

/// Tail sums `M_k = Σ_{n≥k} ρ_n = Tr ε̂^k ρ` for `k = 0..=n_max+1`.
pub fn tail_sums<T: Real>(p: &[T]) -> Vec<T> {
    let mut m = vec![T::zero(); p.len() + 1];
    for k in (0..p.len()).rev() {
        m[k] = m[k + 1] + p[k];
    }
    m
}

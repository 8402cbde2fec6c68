//! E-model counting statistics, `Ĵρ = R(η ε̂ρ + d ρ)`.
//!
//! While the cavity holds at least one photon, absorptions happen at the
//! constant rate `R`; the vacuum only produces dark clicks.

use crate::detector::{
    check_tau_grid, check_time, first_crossing, CountStats, IdealizedDetector, Variant,
    WaitingTimeCurve,
};
use crate::error::{invalid, Error, Result};
use crate::fock::PhotonDistribution;
use crate::kernels::{
    apply_eps_power, e_semigroup, eps_resolvent_series, semigroup_vacuum_gain, semigroup_weights,
    tail_sums,
};
use crate::scalar::{idx, Real};
use crate::special::{binomial_row, convolve, ln_factorials, poisson_pmf, poisson_upper_tails};

/// No-count superoperator `S_t ρ = e^{-dRt}[P_t ρ + |0><0| <0|(1-P_t)(1-vε̂)^{-1}ρ|0>]`.
pub fn e_nocount<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt: T,
) -> Result<PhotonDistribution<T>> {
    det.expect(Variant::E)?;
    check_time(rt, "rt")?;
    Ok(nocount(dist, rt, det.v(), det.d()))
}

fn nocount<T: Real>(dist: &PhotonDistribution<T>, rt: T, v: T, d: T) -> PhotonDistribution<T> {
    let mut out = e_semigroup(dist, rt, v).into_probs();
    out[0] = out[0] + semigroup_vacuum_gain(dist, rt, v);
    let dark = (-d * rt).exp();
    if dark != T::one() {
        out.iter_mut().for_each(|x| *x = *x * dark);
    }
    PhotonDistribution::unnormalized(out)
}

/// Unconditioned evolution `T_t ρ` (`v = 1`, `d = 0`).
pub fn e_ute<T: Real>(dist: &PhotonDistribution<T>, rt: T) -> Result<PhotonDistribution<T>> {
    check_time(rt, "rt")?;
    Ok(nocount(dist, rt, T::one(), T::zero()))
}

/// Probabilities of exactly `m = 0..=m_max` registered counts in `(0, t)`.
///
/// Closed form of the m-count superoperator: with `K ~ Poisson(Rt)`,
/// `R_k = Σ_l v^l ρ_{k+l}`, tails `M_s = Σ_{n≥s} ρ_n`,
/// `W_s = η M_{s+1} + v W_{s+1}` and `Q_a = P(K ≥ a)`, the bright-count law is
/// `p_b(j) = Σ_s P(K=s) B(j; s, η) W_s + [j=0] R_0 + η Σ_{s≥j-1} B(j-1; s, η) Q_{s+1} R_{s+1}`,
/// then convolved with Poisson dark counts of mean `d·Rt`.
pub fn e_count_distribution<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt: T,
    m_max: usize,
) -> Result<Vec<T>> {
    det.expect(Variant::E)?;
    check_time(rt, "rt")?;
    let bright = e_bright_distribution(dist.probs(), det.eta(), rt);
    let lnf = ln_factorials::<T>(m_max);
    let dark = poisson_pmf(det.d() * rt, m_max, &lnf);
    Ok(convolve(&bright, &dark, m_max + 1))
}

fn e_bright_distribution<T: Real>(p: &[T], eta: T, rt: T) -> Vec<T> {
    let len = p.len();
    let v = T::one() - eta;
    let lnf = ln_factorials::<T>(len + 1);
    let mut r = vec![T::zero(); len + 1];
    for k in (0..len).rev() {
        r[k] = p[k] + v * r[k + 1];
    }
    let m = tail_sums(p);
    let mut w = vec![T::zero(); len + 1];
    for s in (0..len).rev() {
        w[s] = eta * m[s + 1] + v * w[s + 1];
    }
    let pois = poisson_pmf(rt, len, &lnf);
    let q = poisson_upper_tails(rt, len + 1);

    let mut out = vec![T::zero(); len];
    out[0] = r[0];
    for s in 0..len {
        let (lo, row) = binomial_row(s, eta, &lnf);
        let direct = pois[s] * w[s];
        let shifted = eta * q[s + 1] * r[s + 1];
        for (i, b) in row.into_iter().enumerate() {
            let j = lo + i;
            out[j] = out[j] + b * direct;
            if j + 1 < len {
                out[j + 1] = out[j + 1] + b * shifted;
            }
        }
    }
    out
}

/// Probability of exactly `m` registered counts in `(0, t)`.
pub fn e_count_prob<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt: T,
    m: usize,
) -> Result<T> {
    Ok(e_count_distribution(dist, det, rt, m)?[m])
}

/// The sums `Ξ₁`, `Ξ₂`, `Ω` and the survival `Tr P_t⁰ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EModelKernels<T> {
    xi1: Option<T>,
    xi2: Option<T>,
    omega: Option<T>,
    pub p0_surv: T,
}

impl<T: Real> EModelKernels<T> {
    /// `Ξ₁ = Tr[ε̂(1-ε̂)^{-1} P_t⁰ρ] / n̄`.
    pub fn xi1(&self) -> Result<T> {
        self.xi1.ok_or(Error::UndefinedStatistic("Xi_1 of a zero-mean state"))
    }

    /// `Ξ₂ = Tr[ε̂²(1-ε̂)^{-1} P_t⁰ρ] / n̄`.
    pub fn xi2(&self) -> Result<T> {
        self.xi2.ok_or(Error::UndefinedStatistic("Xi_2 of a zero-mean state"))
    }

    /// `Ω = 2 Tr[(ε̂(1-ε̂)^{-1})² P_t⁰ρ] / n(n-1)‾`.
    pub fn omega(&self) -> Result<T> {
        self.omega
            .ok_or(Error::UndefinedStatistic("Omega with zero second factorial moment"))
    }
}

pub fn e_kernels<T: Real>(dist: &PhotonDistribution<T>, rt: T) -> Result<EModelKernels<T>> {
    check_time(rt, "rt")?;
    let p0 = e_semigroup(dist, rt, T::one());
    let once = eps_resolvent_series(&p0, T::one(), 1);
    let nbar = dist.factorial_moment(1);
    let f2 = dist.factorial_moment(2);
    let two = T::one() + T::one();
    let xi1 = (nbar > T::zero()).then(|| once.mass() / nbar);
    let xi2 = (nbar > T::zero()).then(|| eps_resolvent_series(&p0, T::one(), 2).mass() / nbar);
    let omega = (f2 > T::zero()).then(|| two * eps_resolvent_series(&once, T::one(), 1).mass() / f2);
    Ok(EModelKernels {
        xi1,
        xi2,
        omega,
        p0_surv: p0.mass(),
    })
}

/// `Σ_N ρ_N Σ_{a=1}^N Q_a` and `Σ_N ρ_N Σ_{a=2}^N 2(a-1) Q_a`, i.e.
/// `n̄(1-Ξ₁)` and `n(n-1)‾(1-Ω) - 2n̄·Rt·Ξ₂`, as sums of positive terms.
fn absorbed_moments<T: Real>(p: &[T], rt: T) -> (T, T) {
    let q = poisson_upper_tails(rt, p.len());
    let two = T::one() + T::one();
    let (mut c1, mut c2) = (T::zero(), T::zero());
    let (mut first, mut second) = (T::zero(), T::zero());
    for (n, &rho) in p.iter().enumerate() {
        if n >= 1 {
            c1 = c1 + q[n];
            c2 = c2 + two * idx::<T>(n - 1) * q[n];
        }
        first = first + rho * c1;
        second = second + rho * c2;
    }
    (first, second)
}

/// Mean and second factorial moment of the counts.
pub fn e_moments<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt: T,
) -> Result<CountStats<T>> {
    det.expect(Variant::E)?;
    check_time(rt, "rt")?;
    let (first, second) = absorbed_moments(dist.probs(), rt);
    let (eta, dark) = (det.eta(), det.d() * rt);
    let two = T::one() + T::one();
    Ok(CountStats {
        rt,
        mbar: dark + eta * first,
        m2fac: dark * dark + two * eta * dark * first + eta * eta * second,
    })
}

/// Short-time limit of `K_t` at `d = 0`: `(1 - ρ₀ - ρ₁)/(1 - ρ₀)²`.
pub fn e_k_initial<T: Real>(dist: &PhotonDistribution<T>) -> Result<T> {
    let m = tail_sums(dist.probs());
    if m[1] <= T::zero() {
        return Err(Error::UndefinedStatistic("K_t limit of the vacuum"));
    }
    Ok(m[2] / (m[1] * m[1]))
}

/// Mean cavity photon number under the unconditioned evolution, `n̄ Ξ₁(t)`.
pub fn e_ncav<T: Real>(dist: &PhotonDistribution<T>, rt: T) -> Result<T> {
    check_time(rt, "rt")?;
    let p0 = e_semigroup(dist, rt, T::one());
    Ok(eps_resolvent_series(&p0, T::one(), 1).mass())
}

/// State after a click at `t` under the unconditioned evolution, prepared
/// for repeated evaluation of `W_t(τ)`.
struct WtPrepared<T> {
    /// `Ĵ P_t⁰ ρ` in units of `R`.
    jumped: PhotonDistribution<T>,
    tails: Vec<T>,
    /// `1 - Tr P_t⁰ρ`: mass the semigroup moved out of the tracked vector.
    lost: T,
}

fn wt_prepare<T: Real>(dist: &PhotonDistribution<T>, det: &IdealizedDetector<T>, rt: T) -> WtPrepared<T> {
    let sigma = e_semigroup(dist, rt, T::one());
    let shifted = apply_eps_power(&sigma, 1);
    let jumped: Vec<T> = sigma
        .probs()
        .iter()
        .zip(shifted.probs())
        .map(|(&s, &e)| det.eta() * e + det.d() * s)
        .collect();
    let tails = tail_sums(&jumped);
    WtPrepared {
        jumped: PhotonDistribution::unnormalized(jumped),
        tails,
        lost: semigroup_vacuum_gain(dist, rt, T::one()),
    }
}

fn wt_eval<T: Real>(prep: &WtPrepared<T>, det: &IdealizedDetector<T>, tau: T) -> T {
    let (eta, d, v) = (det.eta(), det.d(), det.v());
    let len = prep.jumped.probs().len();
    let m = &prep.tails;
    // Tr[Ĵ P_τ x] = Σ_j e^{-τ}(vτ)^j/j! (η M_{j+1} + d M_j)
    let (lo, w) = semigroup_weights(tau, v, len);
    let tracked: T = w
        .iter()
        .enumerate()
        .map(|(i, &wj)| {
            let j = lo + i;
            let at = |k: usize| m.get(k).copied().unwrap_or_else(T::zero);
            wj * (eta * at(j + 1) + d * at(j))
        })
        .sum();
    let vac = semigroup_vacuum_gain(&prep.jumped, tau, v);
    (-d * tau).exp() * (tracked + d * vac + d * d * prep.lost)
}

/// Non-normalized waiting-time density `W_t(τ)` in units of `R`.
pub fn e_wt_density<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt_first: T,
    tau: T,
) -> T {
    wt_eval(&wt_prepare(dist, det, rt_first), det, tau)
}

/// `W_t(τ)` on `taus ⊂ [0, θ]` with its windowed mass and mean.
pub fn e_wt_curve<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt_first: T,
    taus: &[T],
    theta: T,
) -> Result<WaitingTimeCurve<T>> {
    det.expect(Variant::E)?;
    check_time(rt_first, "first-click time")?;
    check_tau_grid(taus, theta)?;
    let prep = wt_prepare(dist, det, rt_first);
    let w = taus.iter().map(|&tau| wt_eval(&prep, det, tau)).collect();
    Ok(WaitingTimeCurve::from_samples(rt_first, taus.to_vec(), w, theta))
}

/// Time `R·t_E` at which the mean count first reaches `frac·η·n̄`.
pub fn e_effective_time<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    frac: T,
) -> Result<T> {
    if !(frac > T::zero() && frac < T::one()) {
        return invalid(format!("fraction must lie in (0, 1), got {frac}"));
    }
    let target = frac * det.eta() * dist.mean();
    if target <= T::zero() {
        return Err(Error::UndefinedStatistic("effective time with no bright counts"));
    }
    first_crossing(|rt| Ok(e_moments(dist, det, rt)?.mbar), target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::DEFAULT_TAIL_TOL;
    use crate::special::{ln_pq, binomial_pmf};

    fn det(eta: f64, d: f64) -> IdealizedDetector<f64> {
        IdealizedDetector::unit(Variant::E, eta, d).unwrap()
    }

    fn coherent(nbar: f64) -> PhotonDistribution<f64> {
        PhotonDistribution::coherent(nbar, None, DEFAULT_TAIL_TOL).unwrap()
    }

    fn thermal(nbar: f64) -> PhotonDistribution<f64> {
        PhotonDistribution::thermal(nbar, None, DEFAULT_TAIL_TOL).unwrap()
    }

    fn number(n: usize) -> PhotonDistribution<f64> {
        PhotonDistribution::number(n, n).unwrap()
    }

    /// Bright counts from `min(N, K)` absorptions thinned with probability `η`.
    fn thinned_min(p: &[f64], eta: f64, rt: f64) -> Vec<f64> {
        let len = p.len();
        let lnf = ln_factorials::<f64>(len);
        let pois = poisson_pmf(rt, len, &lnf);
        let q = poisson_upper_tails(rt, len);
        let (lp, lq) = ln_pq(eta);
        let mut out = vec![0.0; len];
        for (n, &rho) in p.iter().enumerate() {
            for b in 0..=n {
                let wb = if b < n { pois[b] } else { q[n] };
                for (j, o) in out.iter_mut().enumerate().take(b + 1) {
                    *o += rho * wb * binomial_pmf(b, j, lp, lq, &lnf);
                }
            }
        }
        out
    }

    #[test]
    fn nocount_examples() {
        let c = coherent(3.0);
        assert_eq!(e_nocount(&c, &det(0.6, 0.1), 0.0).unwrap().probs(), c.probs());
        let vac = number(0);
        for rt in [0.1, 1.0, 30.0] {
            assert!((e_nocount(&vac, &det(0.6, 0.0), rt).unwrap().mass() - 1.0).abs() < 1e-14);
        }
        let out = e_nocount(&number(1), &det(1.0, 0.0), 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((out.probs()[1] - e).abs() < 1e-16);
        assert_eq!(out.probs()[0], 0.0);
        assert!((out.mass() - e).abs() < 1e-16);
    }

    #[test]
    fn ute_preserves_trace() {
        let th = thermal(20.0);
        for rt in [0.5, 5.0, 40.0] {
            assert!((e_ute(&th, rt).unwrap().mass() - th.mass()).abs() < 1e-13);
        }
    }

    #[test]
    fn count_examples() {
        let vac = number(0);
        assert_eq!(e_count_prob(&vac, &det(0.6, 0.0), 3.0, 0).unwrap(), 1.0);
        let p = e_count_prob(&number(1), &det(1.0, 0.0), 60.0, 1).unwrap();
        assert!((p - 1.0).abs() < 1e-12, "{p}");
        let p = e_count_distribution(&number(5), &det(0.6, 0.0), 200.0, 5).unwrap();
        let lnf = ln_factorials::<f64>(5);
        let (lp, lq) = ln_pq(0.6);
        for (m, pm) in p.iter().enumerate() {
            assert!((pm - binomial_pmf(5, m, lp, lq, &lnf)).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_thinned_absorptions() {
        for dist in [thermal(4.0), coherent(6.0), number(7)] {
            for (eta, rt) in [(0.6, 0.7), (1.0, 3.0), (0.25, 12.0)] {
                let a = e_bright_distribution(dist.probs(), eta, rt);
                let b = thinned_min(dist.probs(), eta, rt);
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-14, "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn zero_count_probability_is_nocount_trace() {
        let th = thermal(5.0);
        let d = det(0.6, 0.3);
        let p0 = e_count_prob(&th, &d, 2.0, 0).unwrap();
        let tr = e_nocount(&th, &d, 2.0).unwrap().mass();
        assert!((p0 - tr).abs() < 1e-14);
    }

    #[test]
    fn kernel_examples() {
        for dist in [coherent(8.0), thermal(5.0), number(6)] {
            let k = e_kernels(&dist, 0.0).unwrap();
            assert!((k.xi1().unwrap() - 1.0).abs() < 1e-14);
            assert!((k.omega().unwrap() - 1.0).abs() < 1e-13);
        }
        assert!(e_kernels(&number(20), 400.0).unwrap().xi1().unwrap() < 1e-30);
        // |2>: P_t⁰ leaves e^{-t} at n=2 and t e^{-t} at n=1
        let e = (-1.0f64).exp();
        let k = e_kernels(&number(2), 1.0).unwrap();
        assert!((k.xi1().unwrap() - 0.5 * (2.0 * e + e)).abs() < 1e-15);
        assert!((k.xi1().unwrap() - 0.551_819_161_757_164_5).abs() < 1e-15);
        assert!(e_kernels(&number(0), 1.0).unwrap().xi1().is_err());
        assert!(e_kernels(&number(1), 1.0).unwrap().omega().is_err());
    }

    #[test]
    fn stable_moments_match_kernel_formula() {
        let dist = thermal(10.0);
        let d = det(0.6, 5e-3);
        for rt in [0.3, 2.0, 9.0] {
            let k = e_kernels(&dist, rt).unwrap();
            let (nbar, f2) = (dist.mean(), dist.factorial_moment(2));
            let dark = 5e-3 * rt;
            let one_xi = 1.0 - k.xi1().unwrap();
            let mbar = dark + 0.6 * nbar * one_xi;
            let m2 = dark * dark
                + 2.0 * 0.6 * nbar * dark * one_xi
                + 0.36 * (f2 * (1.0 - k.omega().unwrap()) - 2.0 * nbar * rt * k.xi2().unwrap());
            let s = e_moments(&dist, &d, rt).unwrap();
            assert!((s.mbar - mbar).abs() < 1e-10 * mbar);
            assert!((s.m2fac - m2).abs() < 1e-9 * m2);
        }
    }

    #[test]
    fn moments_match_distribution() {
        for dist in [coherent(30.0), thermal(10.0), number(25)] {
            let d = det(0.6, 5e-3);
            let rt = 6.0;
            let p = e_count_distribution(&dist, &d, rt, dist.n_max() + 40).unwrap();
            let m1: f64 = p.iter().enumerate().map(|(m, x)| m as f64 * x).sum();
            let m2: f64 = p.iter().enumerate().map(|(m, x)| (m * m.saturating_sub(1)) as f64 * x).sum();
            let s = e_moments(&dist, &d, rt).unwrap();
            assert!((m1 - s.mbar).abs() <= 1e-8 * s.mbar);
            assert!((m2 - s.m2fac).abs() <= 1e-8 * s.m2fac);
        }
    }

    #[test]
    fn moment_limits() {
        let d0 = det(0.6, 0.0);
        let c = coherent(50.0);
        assert_eq!(e_moments(&c, &d0, 0.0).unwrap().mbar, 0.0);
        let late = e_moments(&c, &d0, 1e4).unwrap().mbar;
        assert!((late - 0.6 * c.mean()).abs() < 1e-6);
        assert_eq!(e_k_initial(&number(9)).unwrap(), 1.0);
    }

    #[test]
    fn ncav_examples() {
        let th = thermal(10.0);
        assert!((e_ncav(&th, 0.0).unwrap() - th.mean()).abs() < 1e-12);
        assert!((e_ncav(&number(1), 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-16);
        let n = PhotonDistribution::number(100, 100).unwrap();
        let t = PhotonDistribution::thermal(100.0, None, DEFAULT_TAIL_TOL).unwrap();
        let (a, b) = (e_ncav(&n, 60.0).unwrap(), e_ncav(&t, 60.0).unwrap());
        assert!((a - b).abs() > 1.0);
        assert!((e_ute(&t, 60.0).unwrap().mean() - b).abs() < 1e-9);
    }

    #[test]
    fn wt_examples() {
        let taus: Vec<f64> = (0..60).map(|i| i as f64 * 0.25).collect();
        let c = e_wt_curve(&number(0), &det(0.6, 0.0), 2.0, &taus, 15.0).unwrap();
        assert!(c.w.iter().all(|&w| w == 0.0));
        // photons exhausted: only dark pairs survive, W = d² e^{-dτ}
        let d = 5e-3;
        let w = e_wt_density(&number(1), &det(0.6, d), 300.0, 50.0);
        assert!((w - d * d * (-d * 50.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn wt_density_matches_superoperator_composition() {
        let rho = thermal(3.0);
        let d = det(0.6, 0.2);
        let (t, tau) = (0.4, 0.9);
        let sigma = e_ute(&rho, t).unwrap();
        let jumped: Vec<f64> = (0..sigma.probs().len())
            .map(|n| 0.6 * sigma.get(n + 1) + 0.2 * sigma.get(n))
            .collect();
        let after = e_nocount(&PhotonDistribution::unnormalized(jumped), &d, tau).unwrap();
        let want: f64 = after
            .probs()
            .iter()
            .enumerate()
            .map(|(n, x)| (if n > 0 { 0.6 } else { 0.0 } + 0.2) * x)
            .sum();
        let got = e_wt_density(&rho, &d, t, tau);
        assert!((got - want).abs() < 1e-13 * want, "{got} vs {want}");
    }

    #[test]
    fn effective_time_grows_with_photon_number() {
        let d = det(0.6, 0.0);
        let a = e_effective_time(&number(25), &d, 0.95).unwrap();
        let b = e_effective_time(&number(50), &d, 0.95).unwrap();
        assert!(b > 1.8 * a);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn counts_are_complete(nbar in 0.0f64..100.0, rt in 0.0f64..20.0, fam in 0usize..3, eta in 0.0f64..=1.0) {
                let dist = match fam {
                    0 => number(nbar.round() as usize),
                    1 => coherent(nbar),
                    _ => thermal(nbar),
                };
                let p = e_count_distribution(&dist, &det(eta, 5e-3), rt, dist.n_max() + 40).unwrap();
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            }

            #[test]
            fn xi1_is_non_increasing(nbar in 0.5f64..60.0, t in 0.0f64..30.0, dt in 0.0f64..5.0) {
                let dist = thermal(nbar);
                let a = e_kernels(&dist, t).unwrap().xi1().unwrap();
                let b = e_kernels(&dist, t + dt).unwrap().xi1().unwrap();
                prop_assert!(b <= a * (1.0 + 1e-12));
                prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
            }
        }
    }
}

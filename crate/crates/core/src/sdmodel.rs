//! SD-model counting statistics, `Ĵρ = R(η â ρ â† + d ρ)`.
//!
//! Under the no-count evolution each photon independently survives with
//! probability `e^{-Rt}`, is absorbed unregistered with probability `v φ_t`,
//! or produces a click with probability `η φ_t`, where `φ_t = 1 - e^{-Rt}`.

use crate::detector::{
    check_tau_grid, check_time, first_crossing, CountStats, IdealizedDetector, Variant,
    WaitingTimeCurve, WtKernels,
};
use crate::error::{invalid, Error, Result};
use crate::fock::PhotonDistribution;
use crate::kernels::falling;
use crate::scalar::{idx, Real};
use crate::special::{binomial_row, convolve, ln_factorials, one_minus_exp_neg, poisson_pmf};

/// No-count superoperator `S_t ρ`; its trace is the probability of no click.
pub fn sd_nocount<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt: T,
) -> Result<PhotonDistribution<T>> {
    det.expect(Variant::Sd)?;
    check_time(rt, "rt")?;
    let p = dist.probs();
    if rt == T::zero() {
        return Ok(PhotonDistribution::unnormalized(p.to_vec()));
    }
    let lnf = ln_factorials::<T>(p.len());
    let lost = det.v() * one_minus_exp_neg(rt);
    let ln_lost = if lost > T::zero() { lost.ln() } else { T::neg_infinity() };
    let dark = (-det.d() * rt).exp();
    let out = (0..p.len())
        .map(|n| {
            let keep = -idx::<T>(n) * rt;
            let mut acc = p[n];
            if lost > T::zero() {
                for l in 1..p.len() - n {
                    let x = p[n + l];
                    if x > T::zero() {
                        let lnc = lnf[n + l] - lnf[n] - lnf[l];
                        acc = acc + (lnc + idx::<T>(l) * ln_lost).exp() * x;
                    }
                }
            }
            dark * (keep.exp() * acc)
        })
        .collect();
    Ok(PhotonDistribution::unnormalized(out))
}

/// Unconditioned evolution `T_t ρ`: `S_t` with `η = d = 0`, a binomial
/// thinning with survival probability `e^{-Rt}`.
pub fn sd_ute<T: Real>(dist: &PhotonDistribution<T>, rt: T) -> Result<PhotonDistribution<T>> {
    let blind = IdealizedDetector::unit(Variant::Sd, T::zero(), T::zero())?;
    sd_nocount(dist, &blind, rt)
}

/// Mixture `Σ_N ρ_N Binomial(j; N, p)` for `j = 0..=n_max`.
pub(crate) fn binomial_mixture<T: Real>(p: &[T], prob: T) -> Vec<T> {
    let lnf = ln_factorials::<T>(p.len());
    let mut out = vec![T::zero(); p.len()];
    for (n, &rho) in p.iter().enumerate() {
        if rho == T::zero() {
            continue;
        }
        let (lo, row) = binomial_row(n, prob, &lnf);
        for (i, w) in row.into_iter().enumerate() {
            out[lo + i] = out[lo + i] + rho * w;
        }
    }
    out
}

/// Probabilities of exactly `m = 0..=m_max` registered counts in `(0, t)`.
///
/// Evaluates `Tr S_t (dRt + ηφ_t Â)^m ρ / m!` after summing the `Â` powers:
/// bright counts follow a binomial mixture with success probability `ηφ_t`,
/// convolved with Poisson dark counts of mean `d·Rt`.
pub fn sd_count_distribution<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt: T,
    m_max: usize,
) -> Result<Vec<T>> {
    det.expect(Variant::Sd)?;
    check_time(rt, "rt")?;
    let bright = binomial_mixture(dist.probs(), det.eta() * one_minus_exp_neg(rt));
    let lnf = ln_factorials::<T>(m_max);
    let dark = poisson_pmf(det.d() * rt, m_max, &lnf);
    Ok(convolve(&bright, &dark, m_max + 1))
}

/// Probability of exactly `m` registered counts in `(0, t)`.
pub fn sd_count_prob<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt: T,
    m: usize,
) -> Result<T> {
    Ok(sd_count_distribution(dist, det, rt, m)?[m])
}

/// Mean and second factorial moment of the counts.
pub fn sd_moments<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt: T,
) -> Result<CountStats<T>> {
    det.expect(Variant::Sd)?;
    check_time(rt, "rt")?;
    let phi = one_minus_exp_neg(rt);
    let (eta, dark) = (det.eta(), det.d() * rt);
    let nbar = dist.factorial_moment(1);
    let f2 = dist.factorial_moment(2);
    let two = T::one() + T::one();
    Ok(CountStats {
        rt,
        mbar: dark + eta * nbar * phi,
        m2fac: dark * dark + two * eta * nbar * dark * phi + (eta * phi) * (eta * phi) * f2,
    })
}

/// `Φ_k = Σ_{n≥k} ρ_n n!/(n-k)! (1 - ηφ_τ e^{-Rt})^{n-k}` for `k = 0, 1, 2`.
pub fn sd_wt_kernels<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt_first: T,
    tau: T,
) -> WtKernels<T> {
    let p = dist.probs();
    let lnf = ln_factorials::<T>(p.len());
    let ln_x = (-(det.eta() * one_minus_exp_neg(tau) * (-rt_first).exp())).ln_1p();
    let phi = |k: usize| -> T {
        p.iter()
            .enumerate()
            .skip(k)
            .filter(|(_, &r)| r > T::zero())
            .map(|(n, &r)| r * falling(n, k, &lnf) * (idx::<T>(n - k) * ln_x).exp())
            .sum()
    };
    WtKernels {
        phi0: phi(0),
        phi1: phi(1),
        phi2: phi(2),
    }
}

/// Non-normalized waiting-time density `W_t(τ)` in units of `R`.
pub fn sd_wt_density<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt_first: T,
    tau: T,
) -> T {
    let k = sd_wt_kernels(dist, det, rt_first, tau);
    let (eta, d) = (det.eta(), det.d());
    let bright = eta * eta * (-(rt_first + rt_first + tau)).exp() * k.phi2;
    let mixed = eta * d * (-rt_first).exp() * (T::one() + (-tau).exp()) * k.phi1;
    (-d * tau).exp() * (bright + mixed + d * d * k.phi0)
}

/// `W_t(τ)` on `taus ⊂ [0, θ]` with its windowed mass and mean.
pub fn sd_wt_curve<T: Real>(
    dist: &PhotonDistribution<T>,
    det: &IdealizedDetector<T>,
    rt_first: T,
    taus: &[T],
    theta: T,
) -> Result<WaitingTimeCurve<T>> {
    det.expect(Variant::Sd)?;
    check_time(rt_first, "first-click time")?;
    check_tau_grid(taus, theta)?;
    let w = taus
        .iter()
        .map(|&tau| sd_wt_density(dist, det, rt_first, tau))
        .collect();
    Ok(WaitingTimeCurve::from_samples(rt_first, taus.to_vec(), w, theta))
}

/// Mean cavity photon number under the unconditioned evolution, `n̄ e^{-Rt}`.
pub fn sd_ncav<T: Real>(dist: &PhotonDistribution<T>, rt: T) -> T {
    dist.mean() * (-rt).exp()
}

/// Time `R·t_E` at which the mean count first reaches `frac·η·n̄`.
pub fn sd_effective_time<T: Real>(
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
    first_crossing(|rt| Ok(sd_moments(dist, det, rt)?.mbar), target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::DEFAULT_TAIL_TOL;

    fn det(eta: f64, d: f64) -> IdealizedDetector<f64> {
        IdealizedDetector::unit(Variant::Sd, eta, d).unwrap()
    }

    fn coherent(nbar: f64) -> PhotonDistribution<f64> {
        PhotonDistribution::coherent(nbar, None, DEFAULT_TAIL_TOL).unwrap()
    }

    fn thermal(nbar: f64) -> PhotonDistribution<f64> {
        PhotonDistribution::thermal(nbar, None, DEFAULT_TAIL_TOL).unwrap()
    }

    #[test]
    fn nocount_examples() {
        let c = coherent(4.0);
        assert_eq!(sd_nocount(&c, &det(0.6, 0.1), 0.0).unwrap().probs(), c.probs());
        let vac = PhotonDistribution::number(0, 3).unwrap();
        assert_eq!(sd_nocount(&vac, &det(0.6, 0.0), 3.0).unwrap().mass(), 1.0);
        let one = PhotonDistribution::number(1, 1).unwrap();
        let tr = sd_nocount(&one, &det(1.0, 0.0), 1.0).unwrap().mass();
        assert!((tr - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn nocount_trace_is_zero_count_probability() {
        let th = thermal(6.0);
        let d = det(0.7, 0.2);
        let p0 = sd_count_prob(&th, &d, 1.3, 0).unwrap();
        let tr = sd_nocount(&th, &d, 1.3).unwrap().mass();
        assert!((p0 - tr).abs() < 1e-14);
    }

    #[test]
    fn count_examples() {
        let vac = PhotonDistribution::number(0, 0).unwrap();
        assert_eq!(sd_count_prob(&vac, &det(0.6, 0.0), 2.0, 0).unwrap(), 1.0);
        let one = PhotonDistribution::number(1, 1).unwrap();
        assert!((sd_count_prob(&one, &det(1.0, 0.0), 60.0, 1).unwrap() - 1.0).abs() < 1e-15);
        let p = sd_count_distribution(&coherent(50.0), &det(0.6, 5e-3), 1.0, 120).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn vacuum_counts_are_poisson_dark_counts() {
        let vac = PhotonDistribution::number(0, 5).unwrap();
        let (d, rt) = (0.3, 4.0);
        let p = sd_count_distribution(&vac, &det(0.6, d), rt, 20).unwrap();
        let mut f = 1.0;
        for (m, pm) in p.iter().enumerate() {
            if m > 0 {
                f *= m as f64;
            }
            let want = (-d * rt).exp() * (d * rt).powi(m as i32) / f;
            assert!((pm - want).abs() < 1e-15);
        }
    }

    #[test]
    fn moments_examples() {
        let s = sd_moments(&coherent(50.0), &det(0.6, 5e-3), 1.0).unwrap();
        assert!((s.mbar - 18.9686).abs() < 1e-3);
        for rt in [0.1, 1.0, 7.0] {
            let k = sd_moments(&thermal(50.0), &det(0.6, 0.0), rt).unwrap().k_t().unwrap();
            assert!((k - 2.0).abs() < 1e-10);
            let n = PhotonDistribution::number(50, 50).unwrap();
            let k = sd_moments(&n, &det(0.6, 0.0), rt).unwrap().k_t().unwrap();
            assert!((k - 0.98).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_match_distribution() {
        for dist in [coherent(30.0), thermal(10.0), PhotonDistribution::number(25, 25).unwrap()] {
            let d = det(0.6, 5e-3);
            let rt = 0.8;
            let p = sd_count_distribution(&dist, &d, rt, 400).unwrap();
            let m1: f64 = p.iter().enumerate().map(|(m, x)| m as f64 * x).sum();
            let m2: f64 = p.iter().enumerate().map(|(m, x)| (m * m.saturating_sub(1)) as f64 * x).sum();
            let s = sd_moments(&dist, &d, rt).unwrap();
            assert!((m1 - s.mbar).abs() <= 1e-8 * s.mbar);
            assert!((m2 - s.m2fac).abs() <= 1e-8 * s.m2fac);
        }
    }

    #[test]
    fn mean_count_is_state_independent() {
        let d = det(0.6, 5e-3);
        let n = PhotonDistribution::number(40, 40).unwrap();
        let a = sd_moments(&n, &d, 2.0).unwrap().mbar;
        let b = sd_moments(&coherent(40.0), &d, 2.0).unwrap().mbar;
        let c = sd_moments(&thermal(40.0), &d, 2.0).unwrap().mbar;
        assert!((a - b).abs() < 1e-9 && (a - c).abs() < 1e-9);
    }

    #[test]
    fn ncav_examples() {
        let c = coherent(100.0);
        assert!((sd_ncav(&c, 0.0) - 100.0).abs() < 1e-8);
        assert!((sd_ncav(&c, 2f64.ln()) - 50.0).abs() < 1e-8);
        let ute = sd_ute(&c, 1.7).unwrap();
        assert!((ute.mean() - sd_ncav(&c, 1.7)).abs() < 1e-10);
    }

    #[test]
    fn wt_examples() {
        let taus: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        let vac = PhotonDistribution::number(0, 0).unwrap();
        let c = sd_wt_curve(&vac, &det(0.6, 0.0), 1.0, &taus, 10.0).unwrap();
        assert!(c.w.iter().all(|&w| w == 0.0));
        assert_eq!(c.mean_wt, None);
        let one = PhotonDistribution::number(1, 1).unwrap();
        let c = sd_wt_curve(&one, &det(0.6, 0.0), 1.0, &taus, 10.0).unwrap();
        assert!(c.w.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn wt_density_matches_superoperator_composition() {
        // W = Tr[J S_τ J T_t ρ] with J = ηÂ + d
        let rho = thermal(3.0);
        let d = det(0.6, 0.2);
        let (t, tau) = (0.4, 0.9);
        let sigma = sd_ute(&rho, t).unwrap();
        let jumped: Vec<f64> = (0..sigma.probs().len())
            .map(|n| 0.6 * (n + 1) as f64 * sigma.get(n + 1) + 0.2 * sigma.get(n))
            .collect();
        let after = sd_nocount(&PhotonDistribution::unnormalized(jumped), &d, tau).unwrap();
        let want: f64 = after
            .probs()
            .iter()
            .enumerate()
            .map(|(n, x)| (0.6 * n as f64 + 0.2) * x)
            .sum();
        let got = sd_wt_density(&rho, &d, t, tau);
        assert!((got - want).abs() < 1e-12 * want);
    }

    #[test]
    fn effective_time_is_state_independent() {
        let d = det(0.6, 0.0);
        for n in [25usize, 100] {
            let dist = PhotonDistribution::number(n, n).unwrap();
            let t = sd_effective_time(&dist, &d, 0.95).unwrap();
            assert!((t - 20f64.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_wrong_variant() {
        let e = IdealizedDetector::unit(Variant::E, 0.6, 0.0).unwrap();
        assert!(sd_moments(&coherent(2.0), &e, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn counts_are_complete(nbar in 0.0f64..100.0, rt in 0.0f64..20.0, fam in 0usize..3, eta in 0.0f64..=1.0) {
                let dist = match fam {
                    0 => PhotonDistribution::number(nbar.round() as usize, nbar.round() as usize).unwrap(),
                    1 => coherent(nbar),
                    _ => thermal(nbar),
                };
                let m_max = dist.n_max() + 40;
                let p = sd_count_distribution(&dist, &det(eta, 5e-3), rt, m_max).unwrap();
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            }
        }
    }
}

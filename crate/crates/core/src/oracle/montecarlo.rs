use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::detector::{check_time, IdealizedDetector, Variant};
use crate::error::{invalid, Error, Result};
use crate::fock::PhotonDistribution;

/// Trajectories whose click records are returned alongside the histogram.
pub const MC_SAMPLE_RECORDS: usize = 16;

/// Width (in `R·t`) of the bin around the conditioning click time.
pub const WT_BIN_WIDTH: f64 = 0.05;

const BATCH: usize = 4096;

/// Generator for one trajectory: a ChaCha8 keystream selected by
/// `(seed, index)`, so results do not depend on scheduling.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClickKind {
    Bright,
    Dark,
}

/// Registered clicks of one trajectory, in `R·t` units.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickRecord {
    pub index: u64,
    pub seed: u64,
    pub times: Vec<f64>,
    pub kinds: Vec<ClickKind>,
}

/// Samples `n` by inversion of the cumulative populations.
fn sample_photons(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random::<f64>() * cdf.last().copied().unwrap_or(1.0);
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Clicks in `[0, horizon]` for one trajectory.
fn simulate(
    cdf: &[f64],
    det: &IdealizedDetector<f64>,
    horizon: f64,
    seed: u64,
    index: u64,
) -> ClickRecord {
    let mut rng = trajectory_rng(seed, index);
    let mut n = sample_photons(cdf, &mut rng);
    let mut clicks = Vec::new();
    let mut t = 0.0;
    while n > 0 {
        let rate = match det.variant() {
            Variant::Sd => n as f64,
            Variant::E => 1.0,
        };
        let gap: f64 = Exp1.sample(&mut rng);
        t += gap / rate;
        if t > horizon {
            break;
        }
        n -= 1;
        if rng.random::<f64>() < det.eta() {
            clicks.push((t, ClickKind::Bright));
        }
    }
    if det.d() > 0.0 {
        let mut t = 0.0;
        loop {
            let gap: f64 = Exp1.sample(&mut rng);
            t += gap / det.d();
            if t > horizon {
                break;
            }
            clicks.push((t, ClickKind::Dark));
        }
    }
    clicks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (times, kinds) = clicks.into_iter().unzip();
    ClickRecord {
        index,
        seed,
        times,
        kinds,
    }
}

fn cdf(dist: &PhotonDistribution<f64>) -> Vec<f64> {
    dist.cumulative()
}

/// Count histogram over `(0, rt)` and the first few click records.
#[derive(Debug, Clone, PartialEq)]
pub struct McCounts {
    pub n_traj: u64,
    /// `histogram[m]` trajectories registered exactly `m` clicks.
    pub histogram: Vec<u64>,
    pub sample: Vec<ClickRecord>,
}

impl McCounts {
    pub fn mean(&self) -> f64 {
        let s: f64 = self.histogram.iter().enumerate().map(|(m, &c)| m as f64 * c as f64).sum();
        s / self.n_traj as f64
    }

    /// Standard error of [`McCounts::mean`].
    pub fn mean_stderr(&self) -> f64 {
        let mu = self.mean();
        let ss: f64 = self
            .histogram
            .iter()
            .enumerate()
            .map(|(m, &c)| (m as f64 - mu).powi(2) * c as f64)
            .sum();
        let n = self.n_traj as f64;
        (ss / (n - 1.0).max(1.0) / n).sqrt()
    }
}

fn merge_hist(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Simulates `n_traj` independent trajectories up to `rt`.
pub fn mc_trajectories(
    dist: &PhotonDistribution<f64>,
    det: &IdealizedDetector<f64>,
    rt: f64,
    n_traj: u64,
    seed: u64,
) -> Result<McCounts> {
    check_time(rt, "rt")?;
    if n_traj == 0 {
        return invalid("need at least one trajectory");
    }
    let cdf = cdf(dist);
    let batches = n_traj.div_ceil(BATCH as u64);
    let histogram = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut h = Vec::new();
            let lo = b * BATCH as u64;
            for i in lo..(lo + BATCH as u64).min(n_traj) {
                let m = simulate(&cdf, det, rt, seed, i).times.len();
                if h.len() <= m {
                    h.resize(m + 1, 0u64);
                }
                h[m] += 1;
            }
            h
        })
        .reduce(Vec::new, merge_hist);
    let sample = (0..n_traj.min(MC_SAMPLE_RECORDS as u64))
        .map(|i| simulate(&cdf, det, rt, seed, i))
        .collect();
    Ok(McCounts {
        n_traj,
        histogram,
        sample,
    })
}

/// Monte Carlo estimate of the windowed mean waiting time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WtEstimate {
    pub mean_wt: f64,
    pub stderr: f64,
    /// Delays within the window.
    pub accepted: u64,
    /// Conditioning clicks whose successor came later than `θ` (or never).
    pub rejected: u64,
}

/// Mean delay from a click at `≈ rt_first` to the next click.
///
/// Every click inside the bin `rt_first ± WT_BIN_WIDTH/2` conditions one
/// delay; delays beyond `θ` do not contribute. The standard error treats
/// each trajectory as a cluster of correlated delays.
pub fn mc_waiting_time(
    dist: &PhotonDistribution<f64>,
    det: &IdealizedDetector<f64>,
    rt_first: f64,
    theta: f64,
    n_traj: u64,
    seed: u64,
) -> Result<WtEstimate> {
    check_time(rt_first, "rt_first")?;
    if !(theta.is_finite() && theta > 0.0) {
        return invalid(format!("window must be positive, got {theta}"));
    }
    let cdf = cdf(dist);
    let (lo, hi) = ((rt_first - 0.5 * WT_BIN_WIDTH).max(0.0), rt_first + 0.5 * WT_BIN_WIDTH);
    let horizon = hi + theta;
    // per batch: Σ delays, Σ counts, Σ (per-trajectory sums) products, rejected
    let batches = n_traj.div_ceil(BATCH as u64);
    let sums = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut acc = [0.0f64; 6];
            let start = b * BATCH as u64;
            for i in start..(start + BATCH as u64).min(n_traj) {
                let rec = simulate(&cdf, det, horizon, seed, i);
                let (mut s, mut c) = (0.0, 0.0);
                for (k, &t) in rec.times.iter().enumerate() {
                    if t < lo || t > hi {
                        continue;
                    }
                    match rec.times.get(k + 1) {
                        Some(&next) if next - t <= theta => {
                            s += next - t;
                            c += 1.0;
                        }
                        _ => acc[5] += 1.0,
                    }
                }
                acc[0] += s;
                acc[1] += c;
                acc[2] += s * s;
                acc[3] += s * c;
                acc[4] += c * c;
            }
            acc
        })
        .reduce(|| [0.0; 6], |a, b| std::array::from_fn(|k| a[k] + b[k]));
    let [s, c, ss, sc, cc, rejected] = sums;
    if c == 0.0 {
        return Err(Error::InsufficientStatistics("no click pairs inside the window"));
    }
    let mean = s / c;
    // linearized variance of the ratio estimator over trajectory clusters
    let n = n_traj as f64;
    let resid = ss - 2.0 * mean * sc + mean * mean * cc;
    let stderr = (resid * n / (n - 1.0).max(1.0)).max(0.0).sqrt() / c;
    Ok(WtEstimate {
        mean_wt: mean,
        stderr,
        accepted: c as u64,
        rejected: rejected as u64,
    })
}

/// Pearson goodness-of-fit of a count histogram against model probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Bins with fewer than five expected entries are merged with their
/// neighbours; the model mass beyond `expected` forms a final bin.
pub fn chi_square_gof(histogram: &[u64], expected: &[f64]) -> Result<ChiSquare> {
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientStatistics("empty histogram"));
    }
    let n = total as f64;
    let len = histogram.len().max(expected.len());
    let obs = |m: usize| histogram.get(m).copied().unwrap_or(0) as f64;
    let exp = |m: usize| expected.get(m).copied().unwrap_or(0.0) * n;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for m in 0..len {
        o += obs(m);
        e += exp(m);
        if e >= 5.0 {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    let tail = (n - expected.iter().sum::<f64>() * n).max(0.0);
    e += tail;
    match bins.last_mut() {
        Some(last) if e < 5.0 => {
            last.0 += o;
            last.1 += e;
        }
        _ => bins.push((o, e)),
    }
    if bins.len() < 2 {
        return Err(Error::InsufficientStatistics("fewer than two bins after merging"));
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e).powi(2) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = bins.len() - 1;
    let p_value = ChiSquared::new(dof as f64)
        .map(|c| c.sf(statistic))
        .unwrap_or(f64::NAN);
    Ok(ChiSquare {
        statistic,
        dof,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(v: Variant, eta: f64, d: f64) -> IdealizedDetector<f64> {
        IdealizedDetector::unit(v, eta, d).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let s = PhotonDistribution::coherent(5.0, None, 1e-12).unwrap();
        let a = mc_trajectories(&s, &det(Variant::Sd, 0.6, 0.1), 1.0, 10_000, 7).unwrap();
        let b = mc_trajectories(&s, &det(Variant::Sd, 0.6, 0.1), 1.0, 10_000, 7).unwrap();
        let c = mc_trajectories(&s, &det(Variant::Sd, 0.6, 0.1), 1.0, 10_000, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.histogram, c.histogram);
        assert_eq!(a.sample.len(), MC_SAMPLE_RECORDS);
    }

    #[test]
    fn records_are_ordered() {
        let s = PhotonDistribution::number(20, 20).unwrap();
        let r = mc_trajectories(&s, &det(Variant::E, 0.6, 0.5), 30.0, 16, 1).unwrap();
        for rec in r.sample {
            assert!(rec.times.windows(2).all(|w| w[1] > w[0]));
            assert_eq!(rec.times.len(), rec.kinds.len());
        }
    }

    #[test]
    fn number_state_fully_counted() {
        let s = PhotonDistribution::number(6, 6).unwrap();
        let r = mc_trajectories(&s, &det(Variant::Sd, 1.0, 0.0), 60.0, 1000, 3).unwrap();
        assert_eq!(r.histogram[6], 1000);
    }

    #[test]
    fn vacuum_without_dark_counts_has_no_waiting_times() {
        let vac = PhotonDistribution::number(0, 0).unwrap();
        let err = mc_waiting_time(&vac, &det(Variant::Sd, 0.6, 0.0), 1.0, 5.0, 1000, 1).unwrap_err();
        assert!(matches!(err, Error::InsufficientStatistics(_)));
    }

    #[test]
    fn dark_only_waiting_time_is_truncated_exponential() {
        // a Poisson stream of rate d has exponential gaps
        let vac = PhotonDistribution::number(0, 0).unwrap();
        let (d, theta) = (2.0, 1.0);
        let est = mc_waiting_time(&vac, &det(Variant::E, 0.6, d), 3.0, theta, 200_000, 5).unwrap();
        let want = 1.0 / d - theta * (-d * theta).exp() / (1.0 - (-d * theta).exp());
        assert!((est.mean_wt - want).abs() < 4.0 * est.stderr, "{est:?} {want}");
    }

    #[test]
    fn chi_square_accepts_exact_and_rejects_shifted() {
        let p = [0.25, 0.5, 0.25];
        let ok = chi_square_gof(&[2500, 5000, 2500], &p).unwrap();
        assert!(ok.statistic < 1e-12 && ok.p_value > 0.999);
        let bad = chi_square_gof(&[3000, 5000, 2000], &p).unwrap();
        assert!(bad.p_value < 1e-6);
        assert!(chi_square_gof(&[], &p).is_err());
    }
}

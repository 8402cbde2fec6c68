//! Truncated diagonal Fock-space field states.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::kernels::falling;
use crate::scalar::{idx, lit, Real};
use crate::special::ln_factorials;

/// Default admissible truncated mass.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Photon-number populations `ρ_n = <n|ρ|n>` for `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution<T> {
    probs: Vec<T>,
    tail_tol: T,
}

/// Starting truncation for Poisson and geometric laws of mean `nbar`.
pub fn default_n_max(nbar: f64) -> usize {
    (nbar + 10.0 * nbar.max(0.0).sqrt() + 20.0).ceil() as usize
}

impl<T: Real> PhotonDistribution<T> {
    /// Wraps a normalized population vector, checking the truncation invariants.
    pub fn new(probs: Vec<T>, tail_tol: T) -> Result<Self> {
        if probs.is_empty() {
            return invalid("population vector must be non-empty");
        }
        if let Some(n) = probs.iter().position(|p| !p.is_finite() || *p < T::zero()) {
            return invalid(format!("population at n = {n} is negative or non-finite"));
        }
        let dist = Self { probs, tail_tol };
        let mass = dist.mass();
        if mass > T::one() + lit(1e-12) {
            return invalid(format!("total mass {mass} exceeds one"));
        }
        let tail = T::one() - mass;
        if tail > tail_tol {
            return invalid(format!("missing mass {tail} exceeds tail tolerance {tail_tol}"));
        }
        if tail > T::zero() && dist.edge_weight() > tail_tol {
            return Err(Error::TruncationTooSmall {
                what: "population vector",
                required: dist.n_max() + 1,
            });
        }
        Ok(dist)
    }

    /// Wraps an intermediate (possibly sub-normalized) vector without checks.
    pub fn unnormalized(probs: Vec<T>) -> Self {
        debug_assert!(!probs.is_empty());
        Self {
            probs,
            tail_tol: lit(DEFAULT_TAIL_TOL),
        }
    }

    /// Fock state `|n><n|` truncated at `n_max`.
    pub fn number(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return invalid(format!("photon number {n} exceeds truncation {n_max}"));
        }
        let mut probs = vec![T::zero(); n_max + 1];
        probs[n] = T::one();
        Ok(Self {
            probs,
            tail_tol: lit(DEFAULT_TAIL_TOL),
        })
    }

    /// Poisson populations of mean `nbar`.
    ///
    /// With `n_max = None` the truncation starts from [`default_n_max`] and
    /// grows until the tail conditions hold.
    pub fn coherent(nbar: T, n_max: Option<usize>, tail_tol: T) -> Result<Self> {
        check_mean(nbar)?;
        let nb = nbar.to_f64().unwrap();
        let ln_nbar = nbar.ln();
        let law = |lnf: &[T], n: usize| -> T {
            if nbar == T::zero() {
                if n == 0 {
                    T::one()
                } else {
                    T::zero()
                }
            } else {
                (idx::<T>(n) * ln_nbar - nbar - lnf[n]).exp()
            }
        };
        let build = |cut: usize| -> (Vec<T>, T) {
            // the tail is summed explicitly far past the cut
            let far = cut + (20.0 * nb.sqrt()) as usize + 60;
            let lnf = ln_factorials::<T>(far);
            let probs: Vec<T> = (0..=cut).map(|n| law(&lnf, n)).collect();
            let tail: T = ((cut + 1)..=far).map(|n| law(&lnf, n)).sum();
            (probs, tail)
        };
        Self::truncated(build, default_n_max(nb), n_max, tail_tol)
    }

    /// Geometric (thermal) populations of mean `nbar`.
    pub fn thermal(nbar: T, n_max: Option<usize>, tail_tol: T) -> Result<Self> {
        check_mean(nbar)?;
        let ratio = nbar / (T::one() + nbar);
        let build = |cut: usize| -> (Vec<T>, T) {
            let lead = T::one() / (T::one() + nbar);
            let mut probs = Vec::with_capacity(cut + 1);
            let mut p = lead;
            for _ in 0..=cut {
                probs.push(p);
                p = p * ratio;
            }
            (probs, ratio.powi(cut as i32 + 1))
        };
        Self::truncated(build, default_n_max(nbar.to_f64().unwrap()), n_max, tail_tol)
    }

    fn truncated<F>(build: F, start: usize, n_max: Option<usize>, tail_tol: T) -> Result<Self>
    where
        F: Fn(usize) -> (Vec<T>, T),
    {
        let ok = |probs: &[T], tail: T| -> bool {
            let top = probs.len() - 1;
            tail <= tail_tol && probs[top] * idx::<T>(top) <= tail_tol
        };
        // grow from `from` until admissible, then bisect back to the smallest
        // admissible truncation
        let smallest = |from: usize| -> usize {
            let (mut lo, mut hi) = (from, from.max(1));
            loop {
                let (p, t) = build(hi);
                if ok(&p, t) {
                    break;
                }
                lo = hi;
                hi = hi + hi / 2 + 1;
            }
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                let (p, t) = build(mid);
                if ok(&p, t) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        if let Some(cut) = n_max {
            let (probs, tail) = build(cut);
            if ok(&probs, tail) {
                return Ok(Self { probs, tail_tol });
            }
            return Err(Error::TruncationTooSmall {
                what: "photon-number truncation",
                required: smallest(cut),
            });
        }
        let (probs, _) = build(smallest(start));
        Ok(Self { probs, tail_tol })
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<T> {
        self.probs
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn tail_tol(&self) -> T {
        self.tail_tol
    }

    /// Population of `|n>`, zero beyond the truncation.
    pub fn get(&self, n: usize) -> T {
        self.probs.get(n).copied().unwrap_or_else(T::zero)
    }

    /// Total mass (the trace).
    pub fn mass(&self) -> T {
        self.probs.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.factorial_moment(1)
    }

    fn edge_weight(&self) -> T {
        let top = self.n_max();
        self.probs[top] * idx::<T>(top)
    }

    /// `Σ_n n!/(n-k)! ρ_n`; `k = 0` gives the total mass.
    pub fn factorial_moment(&self, k: usize) -> T {
        if k == 0 {
            return self.mass();
        }
        let lnf = if k > 8 { ln_factorials::<T>(self.n_max()) } else { Vec::new() };
        self.probs
            .iter()
            .enumerate()
            .skip(k)
            .map(|(n, &p)| falling(n, k, &lnf) * p)
            .sum()
    }

    /// Mandel `Q = (<n²> - <n>²)/<n> - 1`.
    pub fn mandel_q(&self) -> Result<T> {
        let m1 = self.factorial_moment(1);
        if m1 <= T::zero() {
            return Err(Error::UndefinedStatistic("Mandel Q of a zero-mean state"));
        }
        let m2 = self.factorial_moment(2);
        Ok((m2 - m1 * m1) / m1)
    }

    /// Cumulative populations, used for sampling.
    pub fn cumulative(&self) -> Vec<T> {
        let mut acc = T::zero();
        self.probs
            .iter()
            .map(|&p| {
                acc = acc + p;
                acc
            })
            .collect()
    }
}

fn check_mean<T: Real>(nbar: T) -> Result<()> {
    if !nbar.is_finite() || nbar < T::zero() {
        return invalid(format!("mean photon number must be finite and >= 0, got {nbar}"));
    }
    Ok(())
}

/// The three initial-state families used throughout the counting analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateFamily {
    Number,
    Coherent,
    Thermal,
}

impl StateFamily {
    pub const ALL: [StateFamily; 3] = [StateFamily::Number, StateFamily::Coherent, StateFamily::Thermal];

    /// Builds the family member with mean `nbar` and automatic truncation.
    /// Number states require an integral `nbar`.
    pub fn build<T: Real>(self, nbar: T, tail_tol: T) -> Result<PhotonDistribution<T>> {
        match self {
            StateFamily::Number => {
                let n = nbar.round();
                if (n - nbar).abs() > lit(1e-9) || n < T::zero() {
                    return invalid(format!("number state needs a non-negative integer mean, got {nbar}"));
                }
                let n = n.to_usize().unwrap();
                PhotonDistribution::number(n, n)
            }
            StateFamily::Coherent => PhotonDistribution::coherent(nbar, None, tail_tol),
            StateFamily::Thermal => PhotonDistribution::thermal(nbar, None, tail_tol),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StateFamily::Number => "number",
            StateFamily::Coherent => "coherent",
            StateFamily::Thermal => "thermal",
        }
    }
}

impl fmt::Display for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "number" | "fock" => Ok(StateFamily::Number),
            "coherent" => Ok(StateFamily::Coherent),
            "thermal" => Ok(StateFamily::Thermal),
            other => invalid(format!("unknown state family `{other}`")),
        }
    }
}

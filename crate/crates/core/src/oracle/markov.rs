use crate::detector::{check_time, IdealizedDetector, Variant};
use crate::error::{invalid, Error, Result};
use crate::fock::PhotonDistribution;
use crate::special::poisson_quantile_bound;

/// Admissible probability lost past the count bound or the Poisson cutoff.
pub const MARKOV_TOL: f64 = 1e-10;

/// Levels whose total mass falls below this are dropped from the top of the
/// photon ladder; they can only feed levels below, so the loss is tracked.
const LEVEL_FLOOR: f64 = 1e-20;

/// Most uniformized jumps per chunk before the rate is re-chosen.
const CHUNK_JUMPS: f64 = 48.0;

/// Joint law `p[n][m]` of photon number and registered counts at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub rt: f64,
    /// Row `n` holds `m = 0..=m_max`.
    pub p: Vec<Vec<f64>>,
    pub n_max: usize,
    pub m_max: usize,
    /// Mass that moved past `m_max`.
    pub overflow: f64,
    /// Mass discarded with negligible top levels and Poisson cutoffs.
    pub dropped: f64,
}

impl JointState {
    pub fn mass(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    /// `Σ_n p[n][m]`.
    pub fn counts(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m_max + 1];
        for row in &self.p {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        out
    }
}

/// Entries below this at the edge of a level's count window are dropped.
const ENTRY_FLOOR: f64 = 1e-24;

/// Occupied counts `lo..hi` of one photon level; empty when `lo >= hi`.
#[derive(Debug, Clone, Copy)]
struct Window {
    lo: usize,
    hi: usize,
}

impl Window {
    const EMPTY: Window = Window { lo: usize::MAX, hi: 0 };

    fn is_empty(self) -> bool {
        self.lo >= self.hi
    }
}

struct Chain {
    n_top: usize,
    m_max: usize,
    /// Flat `(n_top + 1) × (m_max + 1)`; zero outside each level's window.
    p: Vec<f64>,
    win: Vec<Window>,
    eta: f64,
    dark: f64,
    variant: Variant,
    overflow: f64,
    dropped: f64,
}

impl Chain {
    fn absorb(&self, n: usize) -> f64 {
        match (self.variant, n) {
            (_, 0) => 0.0,
            (Variant::Sd, n) => n as f64,
            (Variant::E, _) => 1.0,
        }
    }

    fn rate(&self) -> f64 {
        self.absorb(self.n_top) + self.dark
    }

    /// One step of `P = 1 + Q/Λ` from `src` into `out`; returns the mass
    /// pushed past `m_max`.
    fn step(&self, lambda: f64, src: &[f64], src_win: &[Window], out: &mut [f64], out_win: &mut [Window]) -> f64 {
        let w = self.m_max + 1;
        let dk = self.dark / lambda;
        let grow_dark = usize::from(self.dark > 0.0);
        let grow_seen = usize::from(self.eta > 0.0);
        let mut spill = 0.0;
        for n in 0..=self.n_top {
            let own = src_win[n];
            let up = if n < self.n_top { src_win[n + 1] } else { Window::EMPTY };
            let mut win = Window::EMPTY;
            if !own.is_empty() {
                win.lo = own.lo;
                win.hi = own.hi + grow_dark;
            }
            if !up.is_empty() {
                win.lo = win.lo.min(up.lo);
                win.hi = win.hi.max(up.hi + grow_seen);
            }
            win.hi = win.hi.min(w);
            out_win[n] = win;
            if win.is_empty() {
                continue;
            }
            let stay = 1.0 - (self.absorb(n) + self.dark) / lambda;
            let down = if up.is_empty() { 0.0 } else { self.absorb(n + 1) / lambda };
            let (lost, seen) = (down * (1.0 - self.eta), down * self.eta);
            let row = &src[n * w..(n + 1) * w];
            for m in win.lo..win.hi {
                let mut x = stay * row[m];
                if m > 0 {
                    x += dk * row[m - 1];
                }
                if down > 0.0 {
                    let above = &src[(n + 1) * w..(n + 2) * w];
                    x += lost * above[m];
                    if m > 0 {
                        x += seen * above[m - 1];
                    }
                }
                out[n * w + m] = x;
            }
            spill += dk * row[self.m_max];
            if down > 0.0 {
                spill += seen * src[(n + 1) * w + self.m_max];
            }
        }
        spill
    }

    /// Advances by `dt` with a single uniformization rate.
    fn advance(&mut self, dt: f64) {
        let lambda = self.rate();
        if lambda == 0.0 || dt == 0.0 {
            return;
        }
        let mean = lambda * dt;
        let w = self.m_max + 1;
        let mut acc = vec![0.0; self.p.len()];
        let mut cur = self.p.clone();
        let mut cur_win = self.win.clone();
        let mut next = vec![0.0; self.p.len()];
        let mut next_win = self.win.clone();
        let (mut used, mut ln_w) = (0.0, -mean);
        let mut k = 0usize;
        loop {
            let wk = ln_w.exp();
            used += wk;
            for (n, win) in cur_win.iter().enumerate() {
                for m in win.lo..win.hi {
                    acc[n * w + m] += wk * cur[n * w + m];
                }
            }
            if k as f64 > mean && (1.0 - used < 1e-15 || wk < 1e-20) {
                break;
            }
            // overflow from this power enters with the remaining weight
            let spill = self.step(lambda, &cur, &cur_win, &mut next, &mut next_win);
            self.overflow += spill * (1.0 - used).max(0.0);
            std::mem::swap(&mut cur, &mut next);
            std::mem::swap(&mut cur_win, &mut next_win);
            k += 1;
            ln_w += mean.ln() - (k as f64).ln();
        }
        self.dropped += (1.0 - used).max(0.0);
        self.p = acc;
        self.win = cur_win;
        self.trim();
    }

    fn trim(&mut self) {
        let w = self.m_max + 1;
        for (n, win) in self.win.iter_mut().enumerate() {
            let row = &mut self.p[n * w..(n + 1) * w];
            while !win.is_empty() && row[win.lo] < ENTRY_FLOOR {
                self.dropped += row[win.lo];
                row[win.lo] = 0.0;
                win.lo += 1;
            }
            while !win.is_empty() && row[win.hi - 1] < ENTRY_FLOOR {
                self.dropped += row[win.hi - 1];
                row[win.hi - 1] = 0.0;
                win.hi -= 1;
            }
            if win.is_empty() {
                *win = Window::EMPTY;
            }
        }
        while self.n_top > 0 {
            let row = &self.p[self.n_top * w..(self.n_top + 1) * w];
            let mass: f64 = row.iter().sum();
            if mass >= LEVEL_FLOOR {
                break;
            }
            self.dropped += mass;
            self.p.truncate(self.n_top * w);
            self.win.pop();
            self.n_top -= 1;
        }
    }

    fn snapshot(&self, rt: f64, n_max: usize) -> JointState {
        let w = self.m_max + 1;
        let mut p = vec![vec![0.0; w]; n_max + 1];
        for (n, row) in p.iter_mut().enumerate().take(self.n_top + 1) {
            row.copy_from_slice(&self.p[n * w..(n + 1) * w]);
        }
        JointState {
            rt,
            p,
            n_max,
            m_max: self.m_max,
            overflow: self.overflow,
            dropped: self.dropped,
        }
    }
}

/// Joint `(n, m)` laws at ascending times `rts`, from the generator
/// `n → n-1` at rate `R·n` (SD) or `R·1_{n>0}` (E), registered with
/// probability `η`, and `m → m+1` at rate `R·d`.
///
/// Propagated by uniformization in chunks; each chunk uses the rate of the
/// highest occupied level, so the ladder shrinks as photons are absorbed.
pub fn markov_joint(
    dist: &PhotonDistribution<f64>,
    det: &IdealizedDetector<f64>,
    rts: &[f64],
    m_max: usize,
) -> Result<Vec<JointState>> {
    for &rt in rts {
        check_time(rt, "rt")?;
    }
    if rts.windows(2).any(|w| w[1] < w[0]) {
        return invalid("snapshot times must be ascending");
    }
    let n_max = dist.n_max();
    let w = m_max + 1;
    let mut p = vec![0.0; (n_max + 1) * w];
    for (n, &x) in dist.probs().iter().enumerate() {
        p[n * w] = x;
    }
    let win = dist
        .probs()
        .iter()
        .map(|&x| if x > 0.0 { Window { lo: 0, hi: 1 } } else { Window::EMPTY })
        .collect();
    let mut chain = Chain {
        n_top: n_max,
        m_max,
        p,
        win,
        eta: det.eta(),
        dark: det.d(),
        variant: det.variant(),
        overflow: 0.0,
        dropped: 0.0,
    };
    chain.trim();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(rts.len());
    for &rt in rts {
        while now < rt {
            let lambda = chain.rate();
            let dt = if lambda > 0.0 { (CHUNK_JUMPS / lambda).min(rt - now) } else { rt - now };
            chain.advance(dt);
            now = if dt == rt - now { rt } else { now + dt };
        }
        if chain.overflow > MARKOV_TOL {
            let dark = poisson_quantile_bound(det.d() * rt, MARKOV_TOL * 1e-2);
            return Err(Error::TruncationTooSmall {
                what: "m_max",
                required: n_max + dark,
            });
        }
        out.push(chain.snapshot(rt, n_max));
    }
    Ok(out)
}

/// Count marginals at ascending times `rts`.
pub fn markov_counts_series(
    dist: &PhotonDistribution<f64>,
    det: &IdealizedDetector<f64>,
    rts: &[f64],
    m_max: usize,
) -> Result<Vec<Vec<f64>>> {
    Ok(markov_joint(dist, det, rts, m_max)?.iter().map(JointState::counts).collect())
}

/// `p(m)` for `m = 0..=m_max` at time `rt`.
pub fn markov_counts(
    dist: &PhotonDistribution<f64>,
    det: &IdealizedDetector<f64>,
    rt: f64,
    m_max: usize,
) -> Result<Vec<f64>> {
    Ok(markov_counts_series(dist, det, &[rt], m_max)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{ln_factorials, poisson_pmf};

    fn det(v: Variant, eta: f64, d: f64) -> IdealizedDetector<f64> {
        IdealizedDetector::unit(v, eta, d).unwrap()
    }

    #[test]
    fn vacuum_gives_poisson_dark_counts() {
        let vac = PhotonDistribution::number(0, 0).unwrap();
        for v in [Variant::Sd, Variant::E] {
            let p = markov_counts(&vac, &det(v, 0.6, 0.5), 3.0, 40).unwrap();
            let lnf = ln_factorials(40);
            let want = poisson_pmf(1.5, 40, &lnf);
            for (a, b) in p.iter().zip(&want) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn every_photon_counted_eventually() {
        let s = PhotonDistribution::number(7, 7).unwrap();
        let p = markov_counts(&s, &det(Variant::Sd, 1.0, 0.0), 60.0, 10).unwrap();
        assert!((p[7] - 1.0).abs() < 1e-12);
        let p = markov_counts(&s, &det(Variant::E, 1.0, 0.0), 80.0, 10).unwrap();
        assert!((p[7] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_photon_sd_is_exponential() {
        let s = PhotonDistribution::number(1, 1).unwrap();
        let j = markov_joint(&s, &det(Variant::Sd, 0.6, 0.0), &[0.5, 2.0], 3).unwrap();
        for st in j {
            let surv = (-st.rt).exp();
            assert!((st.p[1][0] - surv).abs() < 1e-13);
            assert!((st.p[0][1] - 0.6 * (1.0 - surv)).abs() < 1e-13);
            assert!((st.p[0][0] - 0.4 * (1.0 - surv)).abs() < 1e-13);
        }
    }

    #[test]
    fn mass_is_conserved() {
        let s = PhotonDistribution::coherent(30.0, None, 1e-12).unwrap();
        for v in [Variant::Sd, Variant::E] {
            for st in markov_joint(&s, &det(v, 0.6, 5e-3), &[0.1, 1.0, 10.0], 80).unwrap() {
                let total = st.mass() + st.overflow + st.dropped;
                assert!((total - s.mass()).abs() < 1e-12, "{v} {}", st.rt);
                assert!(st.p.iter().flatten().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn small_count_bound_is_reported() {
        let s = PhotonDistribution::number(10, 10).unwrap();
        let err = markov_counts(&s, &det(Variant::Sd, 1.0, 0.0), 5.0, 4).unwrap_err();
        assert!(matches!(err, Error::TruncationTooSmall { what: "m_max", required } if required >= 10));
    }

    #[test]
    fn rejects_descending_times() {
        let s = PhotonDistribution::number(1, 1).unwrap();
        assert!(markov_joint(&s, &det(Variant::Sd, 1.0, 0.0), &[1.0, 0.5], 3).is_err());
    }
}

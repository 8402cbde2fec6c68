//! Divided differences of the exponential at complex nodes.
//!
//! `exp[z₀, …, z_k]` equals the integral of `e^{Σ sᵢ zᵢ}` over the standard
//! k-simplex, so nested time integrals of exponential sums reduce to it.

use num_complex::Complex;

use crate::scalar::{idx, lit, Real};

/// Nodes closer than this (pairwise) are treated as one cluster.
const CLUSTER: f64 = 1.0;

/// `exp[z₀, …, z_k]` for `k ≤ 7`.
///
/// Well-separated node pairs are peeled off with the recurrence
/// `(f[.. without z_j] - f[.. without z_i]) / (z_i - z_j)`; a cluster of
/// nodes within unit distance is summed from the Taylor series about its
/// centroid, which stays accurate for coincident nodes.
pub fn exp_divdiff<T: Real>(z: &[Complex<T>]) -> Complex<T> {
    assert!(!z.is_empty() && z.len() <= 8, "divided difference order out of range");
    if z.len() == 1 {
        return z[0].exp();
    }
    let (mut far, mut pair) = (T::zero(), (0, 1));
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            let dist = (z[i] - z[j]).norm();
            if dist > far {
                far = dist;
                pair = (i, j);
            }
        }
    }
    if far <= lit(CLUSTER) {
        return cluster_series(z);
    }
    let (i, j) = pair;
    let without = |skip: usize| -> Vec<Complex<T>> {
        z.iter()
            .enumerate()
            .filter(|&(k, _)| k != skip)
            .map(|(_, &x)| x)
            .collect()
    };
    (exp_divdiff(&without(j)) - exp_divdiff(&without(i))) / (z[i] - z[j])
}

/// `e^c Σ_m h_m(z - c) / (m + k)!` with `h_m` the complete homogeneous
/// symmetric polynomials and `c` the centroid.
fn cluster_series<T: Real>(z: &[Complex<T>]) -> Complex<T> {
    let k = z.len() - 1;
    let c = z.iter().fold(Complex::new(T::zero(), T::zero()), |a, &b| a + b) / idx::<T>(z.len());
    let w: Vec<Complex<T>> = z.iter().map(|&x| x - c).collect();
    const TERMS: usize = 48;
    // h[m] over the nodes seen so far
    let mut h = [Complex::new(T::zero(), T::zero()); TERMS];
    h[0] = Complex::new(T::one(), T::zero());
    for &wi in &w {
        for m in 1..TERMS {
            h[m] = h[m] + wi * h[m - 1];
        }
    }
    let mut fact = T::one();
    for j in 2..=k {
        fact = fact * idx::<T>(j);
    }
    let mut sum = Complex::new(T::zero(), T::zero());
    // symmetric clusters make odd h_m vanish, so wait for two small terms
    let mut small = 0;
    for (m, hm) in h.iter().enumerate() {
        if m > 0 {
            fact = fact * idx::<T>(m + k);
        }
        let term = *hm / fact;
        sum = sum + term;
        if term.norm() <= T::epsilon() * sum.norm() * lit(1e-2) {
            small += 1;
            if m > 4 && small >= 2 {
                break;
            }
        } else {
            small = 0;
        }
    }
    c.exp() * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn first_order_is_secant() {
        let (a, b) = (c(0.3, 2.0), c(-5.0, 40.0));
        let want = (a.exp() - b.exp()) / (a - b);
        assert!((exp_divdiff(&[a, b]) - want).norm() < 1e-15);
        let (a, b) = (c(0.3, 0.0), c(0.3 + 1e-9, 0.0));
        assert!((exp_divdiff(&[a, b]) - a.exp()).norm() < 1e-9);
    }

    #[test]
    fn coincident_nodes_give_derivatives() {
        let z = c(-0.7, 0.4);
        let want = z.exp() / 6.0;
        assert!((exp_divdiff(&[z, z, z, z]) - want).norm() < 1e-16);
    }

    #[test]
    fn simplex_integral_by_quadrature() {
        // ∫₀¹∫₀^u e^{a u + b u₁} du₁ du with a, b real, via a fine midpoint rule
        let (a, b) = (-3.0f64, 2.5f64);
        let n = 2000;
        let h = 1.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) * h;
            acc += h * (a * u).exp() * ((b * u).exp() - 1.0) / b;
        }
        let got = exp_divdiff(&[c(a + b, 0.0), c(a, 0.0), c(0.0, 0.0)]);
        assert!((got.re - acc).abs() < 1e-6 * acc.abs());
    }

    #[test]
    fn symmetric_in_nodes() {
        let z = [c(-4e5, 0.0), c(-3.0, 1e7), c(-3.2, -1e7 + 0.5), c(0.0, 0.0)];
        let a = exp_divdiff(&z);
        let b = exp_divdiff(&[z[2], z[0], z[3], z[1]]);
        assert!((a - b).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn cluster_and_recurrence_agree_at_boundary() {
        let z = [c(0.1, 0.0), c(0.6, 0.2), c(1.05, -0.1)];
        let series = cluster_series(&z);
        let rec = (exp_divdiff(&[z[0], z[1]]) - exp_divdiff(&[z[1], z[2]])) / (z[0] - z[2]);
        assert!((series - rec).norm() < 1e-14, "{}", (series - rec).norm());
    }
}

//! Backward-Euler convolution quadrature.
//!
//! The weights `d_j` of order `a` are the Taylor coefficients of
//! `((1 - ζ)/τ)^a = Σ_j d_j ζ^j`, i.e. `d_j = τ^{-a} (-1)^j binom(a, j)`.
//! Applied to samples of `u` they approximate the Riemann–Liouville
//! derivative of order `a` with first-order accuracy:
//! `∂^a u(t_n) ≈ Σ_{i=0}^{n-1} d_i u(t_{n-i})` (for `u(0) = 0`).

use crate::error::{Error, Result};

/// Weights `d_0..d_{L-1}` for one `(a, τ)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CqWeightTable {
    order: f64,
    tau: f64,
    weights: Vec<f64>,
}

/// Builds `len` weights of order `a ∈ (0, 1)` by the recurrence
/// `d_0 = τ^{-a}`, `d_j = d_{j-1} (j - 1 - a) / j`.
pub fn cq_weights(a: f64, tau: f64, len: usize) -> Result<CqWeightTable> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::domain("cq", "order", a, "(0, 1)"));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::domain("cq", "tau", tau, "(0, inf)"));
    }
    if len == 0 {
        return Err(Error::domain("cq", "len", 0.0, "at least one weight"));
    }
    let mut weights = Vec::with_capacity(len);
    let mut d = tau.powf(-a);
    weights.push(d);
    for j in 1..len {
        let jf = j as f64;
        d *= (jf - 1.0 - a) / jf;
        weights.push(d);
    }
    Ok(CqWeightTable {
        order: a,
        tau,
        weights,
    })
}

impl CqWeightTable {
    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ_{i=0}^{n-1} d_i u^{n-i}` where `history = [u^1, ..., u^n]`.
    pub fn apply_history(&self, history: &[f64]) -> Result<f64> {
        let n = history.len();
        if n > self.weights.len() {
            return Err(Error::WeightsTooShort {
                needed: n,
                available: self.weights.len(),
            });
        }
        Ok(self.weights[..n]
            .iter()
            .zip(history.iter().rev())
            .map(|(d, u)| d * u)
            .sum())
    }
}

/// Free-function form of [`CqWeightTable::apply_history`].
pub fn apply_cq_history(weights: &CqWeightTable, history: &[f64]) -> Result<f64> {
    weights.apply_history(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rustfft::num_complex::Complex;
    use rustfft::FftPlanner;

    #[test]
    fn leading_weights() {
        for &(a, tau) in &[(0.3, 0.01), (0.7, 1.0), (0.5, 0.1)] {
            let w = cq_weights(a, tau, 4).unwrap();
            let t: f64 = tau;
            assert_relative_eq!(w.weights()[0], t.powf(-a), max_relative = 1e-15);
            assert_relative_eq!(w.weights()[1], -a * t.powf(-a), max_relative = 1e-15);
        }
    }

    #[test]
    fn sign_pattern() {
        for a in [0.05, 0.3, 0.5, 0.95] {
            let w = cq_weights(a, 0.01, 500).unwrap();
            assert!(w.weights()[0] > 0.0);
            assert!(w.weights()[1..].iter().all(|&d| d < 0.0));
        }
    }

    #[test]
    fn partial_sums_vanish() {
        // Σ d_j τ^a = (1 - ζ)^a at ζ = 1; partial sums decay like n^{-a}.
        let a = 0.6;
        let w = cq_weights(a, 1.0, 200_000).unwrap();
        let s: f64 = w.weights().iter().sum();
        assert!(s > 0.0 && s < 2e-3, "partial sum {s}");
    }

    #[test]
    fn scaling_in_tau() {
        let base = cq_weights(0.4, 1.0, 32).unwrap();
        let scaled = cq_weights(0.4, 0.003, 32).unwrap();
        let f = 0.003f64.powf(-0.4);
        for (a, b) in base.weights().iter().zip(scaled.weights()) {
            assert_relative_eq!(a * f, *b, max_relative = 1e-13);
        }
    }

    #[test]
    fn matches_fft_of_generating_function() {
        // Sample (1 - ζ)^a on a circle of radius r and invert the DFT.
        let a = 0.7;
        let n = 256;
        let r: f64 = 0.9;
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|m| {
                let z = Complex::from_polar(r, 2.0 * std::f64::consts::PI * m as f64 / n as f64);
                (Complex::new(1.0, 0.0) - z).powf(a)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let w = cq_weights(a, 1.0, 16).unwrap();
        for (j, d) in w.weights().iter().enumerate() {
            let coef = buf[j].re / n as f64 / r.powi(j as i32);
            assert!((coef - d).abs() < 1e-12, "j={j}: {coef} vs {d}");
        }
    }

    #[test]
    fn history_sums() {
        let w = cq_weights(0.5, 0.1, 8).unwrap();
        let d = w.weights();
        assert_relative_eq!(
            w.apply_history(&[1.0, 1.0, 1.0]).unwrap(),
            d[0] + d[1] + d[2],
            max_relative = 1e-15
        );
        assert_eq!(w.apply_history(&[0.0; 5]).unwrap(), 0.0);
        assert_eq!(w.apply_history(&[]).unwrap(), 0.0);
        assert!(matches!(
            w.apply_history(&[0.0; 9]),
            Err(Error::WeightsTooShort {
                needed: 9,
                available: 8
            })
        ));
    }

    #[test]
    fn history_matches_toeplitz_product() {
        let w = cq_weights(0.35, 0.02, 20).unwrap();
        let u: Vec<f64> = (1..=20).map(|j| ((j * j) as f64 * 0.37).sin()).collect();
        // Row n of the lower-triangular Toeplitz matrix T[n][m] = d_{n-m}.
        for n in 1..=20 {
            let mut dense = 0.0;
            for m in 1..=n {
                dense += w.weights()[n - m] * u[m - 1];
            }
            let got = w.apply_history(&u[..n]).unwrap();
            assert!((got - dense).abs() < 1e-12 * dense.abs().max(1.0));
        }
    }

    #[test]
    fn first_order_on_linear_function() {
        // ∂^a t = t^{1-a}/Γ(2-a); compare at t = 1.
        let a = 0.4;
        let exact = 1.0 / statrs::function::gamma::gamma(2.0 - a);
        let mut errs = Vec::new();
        for l in [32usize, 64, 128, 256, 512] {
            let tau = 1.0 / l as f64;
            let w = cq_weights(a, tau, l).unwrap();
            let u: Vec<f64> = (1..=l).map(|j| j as f64 * tau).collect();
            errs.push((w.apply_history(&u).unwrap() - exact).abs());
        }
        for pair in errs.windows(2) {
            let order = (pair[0] / pair[1]).log2();
            assert!(order >= 0.9, "order {order}");
        }
    }

    #[test]
    fn rejects_bad_order() {
        assert!(cq_weights(0.0, 0.1, 4).is_err());
        assert!(cq_weights(1.0, 0.1, 4).is_err());
        assert!(cq_weights(0.5, 0.0, 4).is_err());
        assert!(cq_weights(0.5, 0.1, 0).is_err());
    }
}

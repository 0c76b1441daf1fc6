//! Built-in oracle suites, run by `fracspde selftest`.

use std::fmt;

use statrs::function::erf::erfc;

use crate::cq::cq_weights;
use crate::error::Result;
use crate::fbm::{check_sample_covariance, rng_stream, Generator};
use crate::mlf::{
    linear_mode_reference, mittag_leffler, mittag_leffler_integral, mittag_leffler_series,
    MlfParams,
};
use crate::solver::ModalStepper;
use crate::spectral::SpectralField;

/// Result of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelftestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn n_passed(&self) -> usize {
        self.suites.iter().filter(|s| s.passed).count()
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.suites {
            let tag = if s.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}: {}", s.name, s.detail)?;
        }
        write!(f, "{}/{} suites passed", self.n_passed(), self.suites.len())
    }
}

fn suite(name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) -> SuiteResult {
    match body() {
        Ok((passed, detail)) => SuiteResult {
            name,
            passed,
            detail,
        },
        Err(e) => SuiteResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Sample increment covariance of both samplers, `L = 16`.
pub fn fbm_suite() -> SuiteResult {
    suite("fbm-covariance", || {
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for (i, &h) in [0.3, 0.5, 0.8].iter().enumerate() {
            for gen in [Generator::Cholesky, Generator::Circulant] {
                let sampler = gen.sampler(h, 1.0 / 16.0, 16)?;
                let mut rng = rng_stream(2024, i as u64);
                let check = check_sample_covariance(sampler.as_ref(), 20_000, 5.0, &mut rng)?;
                worst = worst.max(check.max_z);
                ok &= check.passed();
            }
        }
        Ok((ok, format!("max |z| = {worst:.2} (limit 5)")))
    })
}

/// Recurrence weights against `exp(a·log(1 − ζ))` expanded as a power series.
pub fn cq_suite() -> SuiteResult {
    suite("cq-weights", || {
        let len = 64;
        let mut worst: f64 = 0.0;
        for i in 1..=9 {
            let a = 1.0 - i as f64 / 10.0;
            let w = cq_weights(a, 1.0, len)?;
            // log(1 - ζ) = -Σ ζ^k / k; exp via n g_n = Σ_k k c_k g_{n-k}.
            let c: Vec<f64> = (0..len)
                .map(|k| if k == 0 { 0.0 } else { -a / k as f64 })
                .collect();
            let mut g = vec![1.0; len];
            for n in 1..len {
                let s: f64 = (1..=n).map(|k| k as f64 * c[k] * g[n - k]).sum();
                g[n] = s / n as f64;
            }
            for (x, y) in w.weights().iter().zip(&g) {
                worst = worst.max((x - y).abs() / y.abs());
            }
        }
        Ok((worst < 1e-12, format!("max relative deviation {worst:.1e}")))
    })
}

/// Closed forms, series against integral, and the `E_{1/2}` / erfc identity.
pub fn mlf_suite() -> SuiteResult {
    suite("mittag-leffler", || {
        let mut worst: f64 = 0.0;
        let mut track = |got: f64, want: f64| worst = worst.max((got - want).abs() / want.abs());
        for &x in &[0.0, 0.5, 2.0, 10.0] {
            track(
                mittag_leffler(MlfParams::new(1.0, 1.0)?, -x)?,
                (-x).exp(),
            );
            track(
                mittag_leffler(MlfParams::new(0.5, 1.0)?, -x)?,
                (x * x).exp() * erfc(x),
            );
        }
        for &alpha in &[0.3, 0.6, 0.9] {
            let x = 3f64.powf(alpha);
            for beta in [1.0, 2.0] {
                let p = MlfParams::new(alpha, beta)?;
                let series = mittag_leffler_series(p, -x)?;
                track(mittag_leffler_integral(p, -x)?, series);
            }
        }
        Ok((worst < 1e-8, format!("max relative deviation {worst:.1e}")))
    })
}

/// Errors of the single-mode scheme (`λ^s = 1`, forcing 1, no noise) at `T`
/// against the Mittag-Leffler reference, for `L` steps each.
pub fn scalar_errors(alpha: f64, t_final: f64, steps: &[usize]) -> Result<Vec<f64>> {
    let reference = linear_mode_reference(1.0, alpha, 1.0, t_final)?;
    steps
        .iter()
        .map(|&l| {
            let stepper = ModalStepper::new(alpha, t_final / l as f64, vec![1.0], l)?;
            let mut states = vec![SpectralField::zeros(1)];
            for _ in 0..l {
                let next = stepper.step(&states, &[1.0], &[0.0])?;
                states.push(next);
            }
            Ok((states[l].coeff(1) - reference).abs())
        })
        .collect()
}

/// Observed orders `log2(e_L / e_{2L})` for successive doublings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

pub fn scalar_order_suite() -> SuiteResult {
    suite("scalar-order", || {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &alpha in &[0.3, 0.5, 0.7] {
            let errs = scalar_errors(alpha, 1.0, &[64, 128, 256, 512, 1024])?;
            for o in observed_orders(&errs) {
                lo = lo.min(o);
                hi = hi.max(o);
            }
        }
        let ok = lo >= 0.85 && hi <= 1.15;
        Ok((
            ok,
            format!("orders in [{lo:.3}, {hi:.3}] (expected [0.85, 1.15])"),
        ))
    })
}

/// Every suite, in a fixed order.
pub fn run_selftest() -> SelftestReport {
    SelftestReport {
        suites: vec![fbm_suite(), cq_suite(), mlf_suite(), scalar_order_suite()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        let report = run_selftest();
        assert!(report.passed(), "{report}");
        assert!(report.suites.len() >= 4);
        assert!(report.to_string().ends_with("4/4 suites passed"));
    }

    #[test]
    fn failures_are_reported() {
        let r = suite("x", || Err(crate::Error::InvalidConfig("boom".into())));
        assert!(!r.passed);
        assert!(r.detail.contains("boom"));
    }
}

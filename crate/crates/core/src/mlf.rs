//! Two-parameter Mittag-Leffler function on the negative real axis.
//!
//! A single linear mode `u' + ∂^{1-α}(λ u) = g` with `u(0) = 0` has the
//! relaxation kernel `E_α(-λ t^α)`; for constant forcing `c` its solution is
//! `c t E_{α,2}(-λ t^α)`. These closed forms serve as deterministic
//! references for the time stepper.
//!
//! `E_{α,β}(z) = Σ_n z^n / Γ(αn + β)` is summed directly while the terms stay
//! small. Further out the series cancels catastrophically (its largest term
//! grows like `exp(|z|^{1/α})`), and we switch to the real integral
//! representation obtained from the spectral density of `E_α(-t^α)`:
//!
//! ```text
//! E_{α,1}(-x) = c_α ∫_0^∞ exp(-v^{1/α}) · x / (v² + 2xv cos απ + x²) dv
//! E_{α,2}(-x) = c_α ∫_0^∞ (1 - exp(-v^{1/α})) v^{-1/α} · x / (v² + 2xv cos απ + x²) dv
//! ```
//!
//! with `c_α = sin(απ)/(απ)`, valid for `0 < α < 1`, `x > 0`.

use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quad;

/// Parameters `(α, β)` of `E_{α,β}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlfParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MlfParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain("mlf", "alpha", alpha, "(0, 1]"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain("mlf", "beta", beta, "(0, inf)"));
        }
        Ok(Self { alpha, beta })
    }
}

/// Series is used while `|z|^{1/α}` stays below this; the largest term is
/// then at most a few hundred and cancellation costs under three digits.
pub const SERIES_LIMIT: f64 = 4.0;

const MAX_TERMS: usize = 300;
const REL_TOL: f64 = 1e-13;

fn rgamma(a: f64) -> f64 {
    if a.fract() == 0.0 && (1.0..=20.0).contains(&a) {
        // Exact factorials.
        return 1.0 / (1..a as u64).product::<u64>() as f64;
    }
    if a < 170.0 {
        1.0 / gamma(a)
    } else {
        (-ln_gamma(a)).exp()
    }
}

fn check_arg(z: f64) -> Result<()> {
    if z.is_nan() || z > 0.0 {
        return Err(Error::domain("mlf", "z", z, "(-inf, 0]"));
    }
    Ok(())
}

/// `E_{α,β}(z)` for real `z ≤ 0`.
pub fn mittag_leffler(p: MlfParams, z: f64) -> Result<f64> {
    check_arg(z)?;
    if z == 0.0 {
        return Ok(rgamma(p.beta));
    }
    if p.alpha == 1.0 {
        if p.beta == 1.0 {
            return Ok(z.exp());
        }
        if p.beta == 2.0 {
            return Ok(z.exp_m1() / z);
        }
    }
    let reach = (-z).powf(1.0 / p.alpha);
    if reach <= SERIES_LIMIT {
        match mittag_leffler_series(p, z) {
            Err(Error::NonConvergence(_)) => {}
            other => return other,
        }
    }
    mittag_leffler_integral(p, z)
}

/// Direct summation of the power series. Fails if 300 terms do not bring the
/// tail below `1e-16` of the partial sum.
pub fn mittag_leffler_series(p: MlfParams, z: f64) -> Result<f64> {
    check_arg(z)?;
    let mut sum = 0.0;
    let mut power = 1.0;
    let mut prev = f64::INFINITY;
    for n in 0..MAX_TERMS {
        let term = power * rgamma(p.alpha * n as f64 + p.beta);
        if !term.is_finite() {
            break;
        }
        sum += term;
        let next = power * z * rgamma(p.alpha * (n + 1) as f64 + p.beta);
        if next.abs() < 1e-16 * sum.abs() && next.abs() <= term.abs().min(prev) {
            return Ok(sum);
        }
        prev = term.abs();
        power *= z;
    }
    Err(Error::NonConvergence(format!(
        "series for E({}, {}) at z = {z} did not converge in {MAX_TERMS} terms",
        p.alpha, p.beta
    )))
}

/// Integral representation, for `0 < α < 1`, `β ∈ {1, 2}`, `z < 0`.
pub fn mittag_leffler_integral(p: MlfParams, z: f64) -> Result<f64> {
    check_arg(z)?;
    if !(p.alpha > 0.0 && p.alpha < 1.0) {
        return Err(Error::domain(
            "mlf",
            "alpha",
            p.alpha,
            "(0, 1) for the integral form",
        ));
    }
    if z == 0.0 {
        return Ok(rgamma(p.beta));
    }
    let x = -z;
    let inv_alpha = 1.0 / p.alpha;
    let cos_ap = (p.alpha * PI).cos();
    let scale = (p.alpha * PI).sin() / (p.alpha * PI);
    let kernel = move |v: f64| x / (v * v + 2.0 * x * v * cos_ap + x * x);

    let integrand: Box<dyn Fn(f64) -> f64> = if p.beta == 1.0 {
        Box::new(move |v: f64| (-v.powf(inv_alpha)).exp() * kernel(v))
    } else if p.beta == 2.0 {
        Box::new(move |v: f64| {
            let w = v.powf(inv_alpha);
            let ratio = if w < 1e-12 {
                1.0 - 0.5 * w
            } else {
                -(-w).exp_m1() / w
            };
            ratio * kernel(v)
        })
    } else {
        return Err(Error::domain(
            "mlf",
            "beta",
            p.beta,
            "{1, 2} for the integral form",
        ));
    };

    // Breakpoints at the scales of both factors.
    let mut points = vec![
        0.0,
        0.25,
        0.5,
        1.0,
        2.0,
        4.0,
        8.0,
        16.0,
        0.5 * x,
        x,
        2.0 * x,
        4.0 * x,
    ];
    if cos_ap < 0.0 {
        let peak = -x * cos_ap;
        let width = x * (p.alpha * PI).sin();
        points.extend([peak - width, peak, peak + width]);
    }
    points.retain(|v| *v >= 0.0 && v.is_finite());
    points.sort_by(f64::total_cmp);
    points.dedup();
    let cut = *points.last().expect("nonempty");

    let body = quad::integrate(&integrand, &points, 1e-300, REL_TOL, 4000)?;
    // [cut, ∞) with v = cut / t.
    let tail = quad::integrate(
        |t: f64| integrand(cut / t) * cut / (t * t),
        &[0.0, 0.5, 1.0],
        1e-300,
        REL_TOL,
        4000,
    )?;
    Ok(scale * (body + tail))
}

/// `c t E_{α,2}(-λ_s t^α)`: the solution at time `t` of the single-mode
/// problem with eigenvalue `λ_s`, constant forcing `c` and zero initial value.
pub fn linear_mode_reference(lambda_s: f64, alpha: f64, c: f64, t: f64) -> Result<f64> {
    if !(lambda_s > 0.0 && lambda_s.is_finite()) {
        return Err(Error::domain("mlf", "lambda_s", lambda_s, "(0, inf)"));
    }
    if t < 0.0 || t.is_nan() {
        return Err(Error::domain("mlf", "t", t, "[0, inf)"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let e = mittag_leffler(MlfParams::new(alpha, 2.0)?, -lambda_s * t.powf(alpha))?;
    Ok(c * t * e)
}

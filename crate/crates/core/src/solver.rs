//! Fully discrete scheme: spectral Galerkin in space, backward-Euler
//! convolution quadrature in time, explicit nonlinearity.
//!
//! With `u^n = Σ_k u_k^n φ_k`, the step from level `n-1` to `n` reads
//!
//! ```text
//! (u^n - u^{n-1})/τ + Σ_{i=0}^{n-1} d_i A^s u^{n-i} = P_N f(u^{n-1}) + P_N (W^H_Q(t_n) - W^H_Q(t_{n-1}))/τ
//! ```
//!
//! where `d_i` are the CQ weights of order `1 - α`. Because `A^s` is diagonal
//! in the sine basis, the implicit part is a scalar division per mode:
//!
//! ```text
//! (1/τ + d_0 λ_k^s) u_k^n = u_k^{n-1}/τ - λ_k^s Σ_{i=1}^{n-1} d_i u_k^{n-i} + F_k + ξ_k^n
//! ```
//!
//! The noise coefficient is `ξ_k^n = √Λ_k ΔW_k^n / τ` with `Λ_k = k^m`.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use crate::cq::{cq_weights, CqWeightTable};
use crate::error::{Error, Result};
use crate::fbm::{read_f64, read_u64, FbmEnsemble};
use crate::spectral::{fractional_eigenvalues, GridSpec, SineTransform, SpectralField};

/// Right-hand side `f`, applied pointwise.
#[derive(Clone, Default)]
pub enum Nonlinearity {
    Zero,
    #[default]
    Sin,
    /// A user-supplied Lipschitz map.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Nonlinearity {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Nonlinearity::Custom(Arc::new(f))
    }

    pub fn apply(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Sin => u.sin(),
            Nonlinearity::Custom(f) => f(u),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Zero => "zero",
            Nonlinearity::Sin => "sin",
            Nonlinearity::Custom(_) => "custom",
        }
    }
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl PartialEq for Nonlinearity {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Nonlinearity::Zero, Nonlinearity::Zero) | (Nonlinearity::Sin, Nonlinearity::Sin) => {
                true
            }
            (Nonlinearity::Custom(a), Nonlinearity::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl FromStr for Nonlinearity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zero" | "0" | "none" => Ok(Nonlinearity::Zero),
            "sin" => Ok(Nonlinearity::Sin),
            other => Err(format!(
                "unknown nonlinearity `{other}` (expected zero or sin)"
            )),
        }
    }
}

/// One problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Time-fractional order `α ∈ (0, 1)`.
    pub alpha: f64,
    /// Space-fractional order `s ∈ (0, 1)`.
    pub s: f64,
    /// Hurst index `H ∈ (0, 1)`.
    pub hurst: f64,
    /// Noise spectral exponent, `Λ_k = k^m`.
    pub m: f64,
    pub t_final: f64,
    /// Global multiplier on the noise; 1 in the model, 0 switches it off.
    pub noise_scale: f64,
    pub nonlinearity: Nonlinearity,
}

impl ModelParams {
    /// Parameters with `f = sin`, unit noise scale.
    pub fn new(alpha: f64, s: f64, hurst: f64, m: f64, t_final: f64) -> Result<Self> {
        let p = Self {
            alpha,
            s,
            hurst,
            m,
            t_final,
            noise_scale: 1.0,
            nonlinearity: Nonlinearity::Sin,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_nonlinearity(mut self, f: Nonlinearity) -> Self {
        self.nonlinearity = f;
        self
    }

    pub fn with_noise_scale(mut self, scale: f64) -> Result<Self> {
        self.noise_scale = scale;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &'static str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::domain("solver", name, v, "(0, 1)"))
            }
        };
        open_unit("alpha", self.alpha)?;
        open_unit("s", self.s)?;
        open_unit("hurst", self.hurst)?;
        if !self.m.is_finite() {
            return Err(Error::domain("solver", "m", self.m, "finite values"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::domain("solver", "t_final", self.t_final, "(0, inf)"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::domain(
                "solver",
                "noise_scale",
                self.noise_scale,
                "[0, inf)",
            ));
        }
        Ok(())
    }

    /// `√Λ_k = k^{m/2}`.
    pub fn noise_amplitude(&self, k: usize) -> f64 {
        (k as f64).powf(0.5 * self.m)
    }
}

/// Mesh parameters: `N` modes, `L` steps of size `τ = T/L`, and the grid on
/// which the nonlinearity is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    n_modes: usize,
    n_steps: usize,
    t_final: f64,
    tau: f64,
    grid: GridSpec,
}

impl Discretization {
    /// Uses the `M = 2N` grid.
    pub fn new(n_modes: usize, n_steps: usize, t_final: f64) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::domain("solver", "n_modes", 0.0, "N >= 1"));
        }
        if n_steps == 0 {
            return Err(Error::domain("solver", "n_steps", 0.0, "L >= 1"));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::domain("solver", "t_final", t_final, "(0, inf)"));
        }
        Ok(Self {
            n_modes,
            n_steps,
            t_final,
            tau: t_final / n_steps as f64,
            grid: GridSpec::for_modes(n_modes)?,
        })
    }

    /// Replaces the collocation grid; it must resolve `N` modes.
    pub fn with_grid(mut self, grid: GridSpec) -> Result<Self> {
        if self.n_modes > grid.capacity() {
            return Err(Error::Aliasing {
                n_modes: self.n_modes,
                n_points: grid.n_points(),
            });
        }
        self.grid = grid;
        Ok(self)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
}

/// Which noise realization drove a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseId {
    pub master_seed: u64,
    pub traj: usize,
}

/// States `u^0, ..., u^L` of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<SpectralField>,
    pub params: ModelParams,
    pub disc: Discretization,
    pub noise: Option<NoiseId>,
}

impl Trajectory {
    /// Only the zero initial state.
    pub fn start(params: ModelParams, disc: Discretization, noise: Option<NoiseId>) -> Self {
        let mut states = Vec::with_capacity(disc.n_steps() + 1);
        states.push(SpectralField::zeros(disc.n_modes()));
        Self {
            states,
            params,
            disc,
            noise,
        }
    }

    pub fn final_state(&self) -> &SpectralField {
        self.states
            .last()
            .expect("trajectories hold the initial state")
    }

    /// Time of the last stored state.
    pub fn time(&self) -> f64 {
        (self.states.len() - 1) as f64 * self.disc.tau()
    }

    pub fn is_complete(&self) -> bool {
        self.states.len() == self.disc.n_steps() + 1
    }

    const MAGIC: &'static [u8; 8] = b"FDTRAJ01";

    /// Binary dump: magic `FDTRAJ01`, little-endian `α, s, H, m, T, noise_scale`
    /// as `f64`, then `N, L, master_seed, traj, stored_levels` as `u64`
    /// (`u64::MAX` seed/traj when the noise is unlabelled), then the states as
    /// `f64`, time-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        let p = &self.params;
        for v in [p.alpha, p.s, p.hurst, p.m, p.t_final, p.noise_scale] {
            w.write_all(&v.to_le_bytes())?;
        }
        let (seed, traj) = self
            .noise
            .map_or((u64::MAX, u64::MAX), |n| (n.master_seed, n.traj as u64));
        for v in [
            self.disc.n_modes() as u64,
            self.disc.n_steps() as u64,
            seed,
            traj,
            self.states.len() as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for state in &self.states {
            for c in state.coeffs() {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a dump written by [`Trajectory::write_to`]. The nonlinearity is
    /// not recorded and comes back as the default.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Dump("bad trajectory magic".into()));
        }
        let mut f = [0.0; 6];
        for v in f.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        let n_modes = read_u64(&mut r)? as usize;
        let n_steps = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let traj = read_u64(&mut r)?;
        let levels = read_u64(&mut r)? as usize;
        let params = ModelParams {
            alpha: f[0],
            s: f[1],
            hurst: f[2],
            m: f[3],
            t_final: f[4],
            noise_scale: f[5],
            nonlinearity: Nonlinearity::default(),
        };
        params.validate()?;
        let disc = Discretization::new(n_modes, n_steps, params.t_final)?;
        if levels == 0 || levels > n_steps + 1 {
            return Err(Error::Dump(format!(
                "{levels} stored levels for L = {n_steps}"
            )));
        }
        let mut states = Vec::with_capacity(levels);
        for _ in 0..levels {
            let mut c = Vec::with_capacity(n_modes);
            for _ in 0..n_modes {
                c.push(read_f64(&mut r)?);
            }
            states.push(SpectralField::from_coeffs(c)?);
        }
        let noise = (seed != u64::MAX).then_some(NoiseId {
            master_seed: seed,
            traj: traj as usize,
        });
        Ok(Self {
            states,
            params,
            disc,
            noise,
        })
    }
}

/// `P_N ∂̄_τ W^H_Q(t_n)`: coefficient `k` is `√(k^m) ΔW_k^n / τ`.
pub fn noise_increment_field(
    ensemble: &FbmEnsemble,
    traj: usize,
    n: usize,
    m: f64,
    n_modes: usize,
) -> Result<SpectralField> {
    let mut out = vec![0.0; n_modes];
    fill_noise(ensemble, traj, n, m, 1.0, &mut out)?;
    Ok(SpectralField::from_vec_unchecked(out))
}

fn fill_noise(
    ensemble: &FbmEnsemble,
    traj: usize,
    n: usize,
    m: f64,
    scale: f64,
    out: &mut [f64],
) -> Result<()> {
    if n == 0 || n > ensemble.n_steps() {
        return Err(Error::Incompatible(format!(
            "time level {n} outside 1..={}",
            ensemble.n_steps()
        )));
    }
    let inv_tau = 1.0 / ensemble.tau();
    for (idx, o) in out.iter_mut().enumerate() {
        let k = idx + 1;
        let dw = ensemble.path(k, traj)?[n - 1];
        *o = scale * (k as f64).powf(0.5 * m) * dw * inv_tau;
    }
    Ok(())
}

/// The linear part of the scheme for arbitrary per-mode eigenvalues `λ_k^s`.
#[derive(Debug, Clone)]
pub struct ModalStepper {
    tau: f64,
    lambda_s: Vec<f64>,
    weights: CqWeightTable,
    // 1/τ + d_0 λ_k^s
    implicit: Vec<f64>,
}

impl ModalStepper {
    /// Weights of order `1 - α` for up to `n_steps` levels.
    pub fn new(alpha: f64, tau: f64, lambda_s: Vec<f64>, n_steps: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain("solver", "alpha", alpha, "(0, 1)"));
        }
        if let Some(bad) = lambda_s.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::domain("solver", "lambda_s", *bad, "(0, inf)"));
        }
        let weights = cq_weights(1.0 - alpha, tau, n_steps.max(1))?;
        let d0 = weights.weights()[0];
        let implicit = lambda_s.iter().map(|l| 1.0 / tau + d0 * l).collect();
        Ok(Self {
            tau,
            lambda_s,
            weights,
            implicit,
        })
    }

    pub fn weights(&self) -> &CqWeightTable {
        &self.weights
    }

    pub fn n_modes(&self) -> usize {
        self.lambda_s.len()
    }

    /// `1/τ + d_0 λ_k^s` for each mode.
    pub fn implicit_factors(&self) -> &[f64] {
        &self.implicit
    }

    /// Computes `u^n` for `n = states.len()` given `u^0..u^{n-1}`, the
    /// projected forcing `F = P_N f(u^{n-1})` and noise coefficients `ξ^n`.
    pub fn step(
        &self,
        states: &[SpectralField],
        forcing: &[f64],
        noise: &[f64],
    ) -> Result<SpectralField> {
        let n = states.len();
        let modes = self.n_modes();
        if n == 0 {
            return Err(Error::Incompatible("no initial state".into()));
        }
        if n > self.weights.len() {
            return Err(Error::WeightsTooShort {
                needed: n,
                available: self.weights.len(),
            });
        }
        for (what, len) in [("forcing", forcing.len()), ("noise", noise.len())] {
            if len != modes {
                return Err(Error::SizeMismatch {
                    module: "solver",
                    what,
                    expected: modes,
                    actual: len,
                });
            }
        }
        let d = self.weights.weights();
        let mut history = vec![0.0; modes];
        for i in 1..n {
            let di = d[i];
            for (h, u) in history.iter_mut().zip(states[n - i].coeffs()) {
                *h += di * u;
            }
        }
        let prev = states[n - 1].coeffs();
        let inv_tau = 1.0 / self.tau;
        let mut next = Vec::with_capacity(modes);
        for k in 0..modes {
            let rhs = prev[k] * inv_tau - self.lambda_s[k] * history[k] + forcing[k] + noise[k];
            let u = rhs / self.implicit[k];
            if !u.is_finite() {
                return Err(Error::NonFinite {
                    mode: k + 1,
                    level: n,
                });
            }
            next.push(u);
        }
        Ok(SpectralField::from_vec_unchecked(next))
    }
}

/// Time stepper for one `(ModelParams, Discretization)` pair.
#[derive(Debug, Clone)]
pub struct Solver {
    params: ModelParams,
    disc: Discretization,
    stepper: ModalStepper,
    transform: SineTransform,
}

impl Solver {
    pub fn new(params: ModelParams, disc: Discretization) -> Result<Self> {
        params.validate()?;
        if (disc.t_final() - params.t_final).abs() > 1e-12 * params.t_final {
            return Err(Error::Incompatible(format!(
                "discretization ends at {} but the model at {}",
                disc.t_final(),
                params.t_final
            )));
        }
        let lambda_s = fractional_eigenvalues(disc.n_modes(), params.s);
        let stepper = ModalStepper::new(params.alpha, disc.tau(), lambda_s, disc.n_steps())?;
        let transform = SineTransform::new(disc.grid().clone(), disc.n_modes())?;
        Ok(Self {
            params,
            disc,
            stepper,
            transform,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn disc(&self) -> &Discretization {
        &self.disc
    }

    pub fn weights(&self) -> &CqWeightTable {
        self.stepper.weights()
    }

    /// `P_N f(u)`: synthesize on the grid, apply `f` pointwise, project.
    pub fn nonlinear_term(&self, u: &SpectralField) -> Result<SpectralField> {
        if matches!(self.params.nonlinearity, Nonlinearity::Zero) {
            return Ok(SpectralField::zeros(self.disc.n_modes()));
        }
        let mut values = self.transform.synthesize(u)?;
        for v in values.iter_mut() {
            *v = self.params.nonlinearity.apply(*v);
        }
        self.transform.project(&values)
    }

    /// `u^n` for `n = traj.states.len()` driven by the noise coefficients
    /// `ξ^n` (already scaled, see [`noise_increment_field`]).
    pub fn step(&self, traj: &Trajectory, noise: &SpectralField) -> Result<SpectralField> {
        let prev = traj
            .states
            .last()
            .ok_or_else(|| Error::Incompatible("no initial state".into()))?;
        let forcing = self.nonlinear_term(prev)?;
        self.stepper
            .step(&traj.states, forcing.coeffs(), noise.coeffs())
    }

    /// Runs all `L` steps with noise coefficients supplied per level:
    /// `noise(n, out)` fills `ξ^n`.
    pub fn run_with<F>(&self, noise_id: Option<NoiseId>, mut noise: F) -> Result<Trajectory>
    where
        F: FnMut(usize, &mut [f64]) -> Result<()>,
    {
        let mut traj = Trajectory::start(self.params.clone(), self.disc.clone(), noise_id);
        let mut xi = vec![0.0; self.disc.n_modes()];
        for n in 1..=self.disc.n_steps() {
            noise(n, &mut xi)?;
            let forcing = self.nonlinear_term(traj.final_state())?;
            let next = self.stepper.step(&traj.states, forcing.coeffs(), &xi)?;
            traj.states.push(next);
        }
        Ok(traj)
    }

    /// Runs trajectory `traj` of `ensemble`. The ensemble must share `H`, `τ`
    /// and `L` with the solver and hold at least `N` modes.
    pub fn run_trajectory(&self, ensemble: &FbmEnsemble, traj: usize) -> Result<Trajectory> {
        self.check_ensemble(ensemble)?;
        let m = self.params.m;
        let scale = self.params.noise_scale;
        self.run_with(
            Some(NoiseId {
                master_seed: ensemble.master_seed(),
                traj,
            }),
            |n, out| fill_noise(ensemble, traj, n, m, scale, out),
        )
    }

    fn check_ensemble(&self, e: &FbmEnsemble) -> Result<()> {
        let mismatch = |what: &str, want: String, got: String| {
            Err(Error::Incompatible(format!(
                "ensemble {what} is {got}, solver needs {want}"
            )))
        };
        if (e.hurst() - self.params.hurst).abs() > 1e-12 {
            return mismatch("H", self.params.hurst.to_string(), e.hurst().to_string());
        }
        if (e.tau() - self.disc.tau()).abs() > 1e-9 * self.disc.tau() {
            return mismatch("tau", self.disc.tau().to_string(), e.tau().to_string());
        }
        if e.n_steps() != self.disc.n_steps() {
            return mismatch(
                "L",
                self.disc.n_steps().to_string(),
                e.n_steps().to_string(),
            );
        }
        if e.n_modes() < self.disc.n_modes() {
            return mismatch(
                "mode count",
                format!(">= {}", self.disc.n_modes()),
                e.n_modes().to_string(),
            );
        }
        Ok(())
    }
}

/// One-shot form of [`Solver::run_trajectory`].
pub fn run_trajectory(
    params: &ModelParams,
    disc: &Discretization,
    ensemble: &FbmEnsemble,
    traj: usize,
) -> Result<Trajectory> {
    Solver::new(params.clone(), disc.clone())?.run_trajectory(ensemble, traj)
}

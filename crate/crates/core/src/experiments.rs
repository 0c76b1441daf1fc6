//! Monte Carlo strong-convergence studies.
//!
//! A study refines one axis (modes `N` or steps `L`) through doubling levels
//! `ℓ_1 < ℓ_2 < ...` and, per trajectory, compares the run at level `ℓ` with
//! the run at `2ℓ` driven by the same noise realization. The error at level
//! `ℓ` is the root mean square over trajectories of `‖u_ℓ(T) − u_{2ℓ}(T)‖`,
//! and the rate at `ℓ` is `log2(e_ℓ / e_{2ℓ})`.
//!
//! Coupling: on the time axis each trajectory draws one path at the finest
//! step and coarser levels sum its increments; on the space axis every level
//! reads modes `1..N` from the same per-mode streams.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::{FbmEnsemble, FbmSampler, Generator};
use crate::solver::{Discretization, ModelParams, Solver, Trajectory};
use crate::spectral::GridSpec;

/// Refined direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Space,
    Time,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Space => "space",
            Axis::Time => "time",
        })
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "space" | "spatial" => Ok(Axis::Space),
            "time" | "temporal" => Ok(Axis::Time),
            other => Err(format!("unknown axis `{other}` (expected space or time)")),
        }
    }
}

/// A convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub axis: Axis,
    /// `N` values (space) or `L` values (time), each double the previous.
    pub levels: Vec<usize>,
    /// The held-fixed `L` (space) or `N` (time).
    pub fixed_other: usize,
    pub n_traj: usize,
    pub master_seed: u64,
    /// Worker cap; `None` uses every core.
    pub threads: Option<usize>,
    pub generator: Generator,
}

impl ExperimentConfig {
    pub fn new(
        params: ModelParams,
        axis: Axis,
        levels: Vec<usize>,
        fixed_other: usize,
        n_traj: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            params,
            axis,
            levels,
            fixed_other,
            n_traj,
            master_seed,
            threads: None,
            generator: Generator::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let first = *self
            .levels
            .first()
            .ok_or_else(|| Error::InvalidConfig("levels: at least one level required".into()))?;
        if first == 0 {
            return Err(Error::InvalidConfig("levels: must be positive".into()));
        }
        for w in self.levels.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(Error::InvalidConfig(format!(
                    "levels: each level must double the previous ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if self.fixed_other == 0 {
            return Err(Error::InvalidConfig("fixed_other: must be positive".into()));
        }
        if self.n_traj < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_traj: at least 2 trajectories required, got {}",
                self.n_traj
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads: must be positive".into()));
        }
        Ok(())
    }

    /// The level above the last one, run only as a reference.
    pub fn reference_level(&self) -> usize {
        2 * self.levels.last().copied().unwrap_or(1)
    }

    /// `(N, L)` of the run at refinement level `level`.
    pub fn mesh(&self, level: usize) -> (usize, usize) {
        match self.axis {
            Axis::Space => (level, self.fixed_other),
            Axis::Time => (self.fixed_other, level),
        }
    }

    /// Collocation grid shared by every level of the study.
    pub fn grid(&self) -> Result<GridSpec> {
        match self.axis {
            Axis::Space => GridSpec::for_modes(self.reference_level()),
            Axis::Time => GridSpec::for_modes(self.fixed_other),
        }
    }
}

/// Regularity indices and predicted strong rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePrediction {
    pub rho: f64,
    pub sigma: f64,
    pub temporal_rate: f64,
    pub spatial_rate: f64,
}

impl RatePrediction {
    pub fn for_axis(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Space => self.spatial_rate,
            Axis::Time => self.temporal_rate,
        }
    }
}

/// Predicted rates in one space dimension.
pub fn predict_rates(params: &ModelParams) -> RatePrediction {
    predict_rates_in_dim(params.alpha, params.s, params.hurst, params.m, 1.0)
}

/// `ρ = max(0, (1+m)d/4)`, `σ = max(0, min(s − ρ, sH/α − ρ))`,
/// temporal rate `H − ρα/s`, spatial rate `2σ/d`.
pub fn predict_rates_in_dim(alpha: f64, s: f64, hurst: f64, m: f64, d: f64) -> RatePrediction {
    let rho = ((1.0 + m) * d / 4.0).max(0.0);
    let sigma = (s - rho).min(s * hurst / alpha - rho).max(0.0);
    RatePrediction {
        rho,
        sigma,
        temporal_rate: hurst - rho * alpha / s,
        spatial_rate: 2.0 * sigma / d,
    }
}

/// `‖u(T) − v(T)‖_{L²}` from the final coefficients, the shorter vector
/// zero-padded. Both runs must end at the same time and share the noise.
pub fn pathwise_error(coarse: &Trajectory, fine: &Trajectory) -> Result<f64> {
    let (tc, tf) = (coarse.time(), fine.time());
    if (tc - tf).abs() > 1e-12 * tc.abs().max(tf.abs()) {
        return Err(Error::Incompatible(format!(
            "trajectories end at different times ({tc} and {tf})"
        )));
    }
    if coarse.noise != fine.noise {
        return Err(Error::Uncoupled(format!(
            "noise {:?} versus {:?}",
            coarse.noise, fine.noise
        )));
    }
    let a = coarse.final_state().coeffs();
    let b = fine.final_state().coeffs();
    let common = a.len().min(b.len());
    let mut sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    sq += a[common..]
        .iter()
        .chain(&b[common..])
        .map(|x| x * x)
        .sum::<f64>();
    Ok(sq.sqrt())
}

/// One level of an [`ErrorTable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub level: usize,
    pub error: f64,
    /// `log2(e_ℓ / e_{2ℓ})`; `None` at the last level or when undefined.
    pub rate: Option<f64>,
}

/// Parameters shown alongside a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableLabels {
    pub alpha: f64,
    pub s: f64,
    pub hurst: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorTable {
    pub axis: Axis,
    pub rows: Vec<ErrorRow>,
    pub theoretical_rate: f64,
    pub labels: TableLabels,
}

impl ErrorTable {
    /// Builds rows from per-level errors and fills in the rates.
    pub fn from_errors(
        axis: Axis,
        levels: &[usize],
        errors: &[f64],
        theoretical_rate: f64,
        labels: TableLabels,
    ) -> Result<Self> {
        if levels.len() != errors.len() {
            return Err(Error::SizeMismatch {
                module: "experiments",
                what: "errors",
                expected: levels.len(),
                actual: errors.len(),
            });
        }
        let rows = (0..levels.len())
            .map(|i| ErrorRow {
                level: levels[i],
                error: errors[i],
                rate: errors
                    .get(i + 1)
                    .and_then(|&next| empirical_rate(errors[i], next)),
            })
            .collect();
        Ok(Self {
            axis,
            rows,
            theoretical_rate,
            labels,
        })
    }

    /// Mean of the two finest defined rates (a single rate if only one exists).
    pub fn observed_rate(&self) -> Option<f64> {
        let rates: Vec<f64> = self.rows.iter().filter_map(|r| r.rate).collect();
        match rates.as_slice() {
            [] => None,
            [r] => Some(*r),
            [.., a, b] => Some(0.5 * (a + b)),
        }
    }

    /// CSV with header `level,error,observed_rate,theoretical_rate`, floats
    /// with 6 significant digits, empty cells for missing rates.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        emit_table(self, w)
    }
}

/// `log2(coarse / fine)` when both errors are positive and finite.
pub fn empirical_rate(coarse: f64, fine: f64) -> Option<f64> {
    let ok = |e: f64| e > 0.0 && e.is_finite();
    (ok(coarse) && ok(fine)).then(|| (coarse / fine).log2())
}

fn sig6(x: f64) -> String {
    format!("{x:.5e}")
}

/// Writes `table` as CSV.
pub fn emit_table<W: Write>(table: &ErrorTable, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["level", "error", "observed_rate", "theoretical_rate"])?;
    let theory = sig6(table.theoretical_rate);
    for row in &table.rows {
        out.write_record([
            row.level.to_string(),
            sig6(row.error),
            row.rate.map(sig6).unwrap_or_default(),
            theory.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Version string recorded in manifests: `FRACSPDE_VERSION` at build time if
/// set, else `v<crate version>`.
pub fn version_string() -> &'static str {
    option_env!("FRACSPDE_VERSION").unwrap_or(concat!("v", env!("CARGO_PKG_VERSION")))
}

#[derive(Debug, Clone, Serialize)]
struct ManifestConfig<'a> {
    alpha: f64,
    s: f64,
    hurst: f64,
    m: f64,
    t_final: f64,
    noise_scale: f64,
    nonlinearity: &'a str,
    axis: Axis,
    levels: &'a [usize],
    fixed_other: usize,
    n_traj: usize,
    seed: u64,
    generator: &'a str,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    version: &'a str,
    command: &'a str,
    master_seed: u64,
    config: ManifestConfig<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction: Option<RatePrediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    observed_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<&'a [ErrorRow]>,
    outputs: &'a [&'a str],
}

/// JSON run manifest: config echo, seed, version, and the table summary
/// when one was produced.
pub fn write_manifest<W: Write>(
    cfg: &ExperimentConfig,
    command: &str,
    table: Option<&ErrorTable>,
    outputs: &[&str],
    w: W,
) -> Result<()> {
    let p = &cfg.params;
    let manifest = Manifest {
        version: version_string(),
        command,
        master_seed: cfg.master_seed,
        config: ManifestConfig {
            alpha: p.alpha,
            s: p.s,
            hurst: p.hurst,
            m: p.m,
            t_final: p.t_final,
            noise_scale: p.noise_scale,
            nonlinearity: p.nonlinearity.name(),
            axis: cfg.axis,
            levels: &cfg.levels,
            fixed_other: cfg.fixed_other,
            n_traj: cfg.n_traj,
            seed: cfg.master_seed,
            generator: cfg.generator.name(),
        },
        prediction: table.map(|_| predict_rates(p)),
        observed_rate: table.and_then(ErrorTable::observed_rate),
        rows: table.map(|t| t.rows.as_slice()),
        outputs,
    };
    serde_json::to_writer_pretty(w, &manifest)?;
    Ok(())
}

/// Reusable pieces of a study: one solver per level and the noise sampler.
struct StudyPlan {
    levels: Vec<usize>,
    solvers: Vec<Solver>,
    sampler: Box<dyn FbmSampler>,
    noise_modes: usize,
}

impl StudyPlan {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let mut levels = cfg.levels.clone();
        levels.push(cfg.reference_level());
        let grid = cfg.grid()?;
        let solvers = levels
            .iter()
            .map(|&lv| {
                let (n, l) = cfg.mesh(lv);
                let disc =
                    Discretization::new(n, l, cfg.params.t_final)?.with_grid(grid.clone())?;
                Solver::new(cfg.params.clone(), disc)
            })
            .collect::<Result<Vec<_>>>()?;
        let (noise_modes, noise_steps) = cfg.mesh(cfg.reference_level());
        let tau = cfg.params.t_final / noise_steps as f64;
        let sampler = cfg.generator.sampler(cfg.params.hurst, tau, noise_steps)?;
        Ok(Self {
            levels,
            solvers,
            sampler,
            noise_modes,
        })
    }

    fn noise(&self, cfg: &ExperimentConfig, traj: usize) -> FbmEnsemble {
        FbmEnsemble::generate_with(
            self.sampler.as_ref(),
            self.noise_modes,
            traj,
            1,
            cfg.master_seed,
        )
    }

    /// Run at level index `i` with this trajectory's noise.
    fn run(
        &self,
        cfg: &ExperimentConfig,
        i: usize,
        fine: &FbmEnsemble,
        traj: usize,
    ) -> Result<Trajectory> {
        let solver = &self.solvers[i];
        let result = match cfg.axis {
            Axis::Space => solver.run_trajectory(fine, traj),
            Axis::Time => {
                let factor = fine.n_steps() / solver.disc().n_steps();
                if factor == 1 {
                    solver.run_trajectory(fine, traj)
                } else {
                    solver.run_trajectory(&fine.coarsen(factor)?, traj)
                }
            }
        };
        result.map_err(|e| Error::Study {
            level: self.levels[i],
            traj,
            source: Box::new(e),
        })
    }

    /// Squared pathwise errors at every study level for one trajectory.
    fn squared_errors(&self, cfg: &ExperimentConfig, traj: usize) -> Result<Vec<f64>> {
        let fine = self.noise(cfg, traj);
        let mut prev = self.run(cfg, 0, &fine, traj)?;
        let mut out = Vec::with_capacity(self.levels.len() - 1);
        for i in 1..self.levels.len() {
            let next = self.run(cfg, i, &fine, traj)?;
            let e = pathwise_error(&prev, &next).map_err(|e| Error::Study {
                level: self.levels[i - 1],
                traj,
                source: Box::new(e),
            })?;
            out.push(e * e);
            prev = next;
        }
        Ok(out)
    }
}

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("threads: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Runs the study. Trajectories run in parallel; the result is independent
/// of the thread count.
pub fn run_convergence_study(cfg: &ExperimentConfig) -> Result<ErrorTable> {
    let plan = StudyPlan::new(cfg)?;
    let per_traj: Vec<Vec<f64>> = with_threads(cfg.threads, || {
        (0..cfg.n_traj)
            .into_par_iter()
            .map(|traj| plan.squared_errors(cfg, traj))
            .collect::<Result<Vec<_>>>()
    })??;
    let errors: Vec<f64> = (0..cfg.levels.len())
        .map(|i| {
            let column: Vec<f64> = per_traj.iter().map(|e| e[i]).collect();
            (pairwise_sum(&column) / cfg.n_traj as f64).sqrt()
        })
        .collect();
    let p = &cfg.params;
    ErrorTable::from_errors(
        cfg.axis,
        &cfg.levels,
        &errors,
        predict_rates(p).for_axis(cfg.axis),
        TableLabels {
            alpha: p.alpha,
            s: p.s,
            hurst: p.hurst,
            m: p.m,
        },
    )
}

/// Trajectory `traj` at the finest study level, with the same noise the
/// study would use.
pub fn finest_trajectory(cfg: &ExperimentConfig, traj: usize) -> Result<Trajectory> {
    let plan = StudyPlan::new(cfg)?;
    let fine = plan.noise(cfg, traj);
    with_threads(cfg.threads, || {
        plan.run(cfg, cfg.levels.len() - 1, &fine, traj)
    })?
}

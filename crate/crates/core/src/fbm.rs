//! Fractional Brownian motion on a uniform time grid.
//!
//! Paths are represented by their increments `ΔW_n = W^H(t_n) - W^H(t_{n-1})`
//! (fractional Gaussian noise). Two exact samplers are provided:
//!
//! * [`CholeskySampler`] factors the `L × L` increment covariance once. It is
//!   `O(L²)` per path and serves as the reference generator.
//! * [`CirculantSampler`] embeds the Toeplitz covariance in a circulant of
//!   size `2L` and samples through one FFT per path (Davies–Harte). This is
//!   the production generator.
//!
//! Randomness is organised in independent streams: every `(mode, trajectory)`
//! pair of an [`FbmEnsemble`] draws from its own ChaCha stream keyed by the
//! master seed, so ensembles are reproducible and can be generated in any
//! order or in parallel.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Counter-based random stream.
pub type RngStream = ChaCha8Rng;

/// Stream `stream` of the generator keyed by `master_seed`.
pub fn rng_stream(master_seed: u64, stream: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("fbm", "hurst", h, "(0, 1)"))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("fbm", "tau", tau, "(0, inf)"))
    }
}

/// `E[W^H(t) W^H(u)] = ½(t^{2H} + u^{2H} - |t-u|^{2H})`.
pub fn fbm_covariance(t: f64, u: f64, h: f64) -> Result<f64> {
    check_hurst(h)?;
    if t < 0.0 {
        return Err(Error::domain("fbm", "t", t, "[0, inf)"));
    }
    if u < 0.0 {
        return Err(Error::domain("fbm", "u", u, "[0, inf)"));
    }
    let e = 2.0 * h;
    Ok(0.5 * (t.powf(e) + u.powf(e) - (t - u).abs().powf(e)))
}

/// Autocovariance of fractional Gaussian noise at integer `lag`:
/// `½τ^{2H}(|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H})`.
pub fn increment_autocovariance(h: f64, tau: f64, lag: usize) -> f64 {
    let e = 2.0 * h;
    let k = lag as f64;
    let core = (k + 1.0).powf(e) + (k - 1.0).abs().powf(e) - 2.0 * k.powf(e);
    0.5 * tau.powf(e) * core
}

/// Covariance matrix of `L` consecutive increments.
pub fn increment_covariance_matrix(h: f64, tau: f64, len: usize) -> Result<DMatrix<f64>> {
    check_hurst(h)?;
    check_tau(tau)?;
    let gamma: Vec<f64> = (0..len)
        .map(|k| increment_autocovariance(h, tau, k))
        .collect();
    Ok(DMatrix::from_fn(len, len, |i, j| gamma[i.abs_diff(j)]))
}

/// Increments of one fBm path.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub h: f64,
    pub tau: f64,
    pub increments: Vec<f64>,
}

impl FbmPath {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// `W^H(t_n)` for `n = 0..=L`.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for d in &self.increments {
            acc += d;
            out.push(acc);
        }
        out
    }

    /// Path on the grid with step `factor·τ`, by summing blocks of increments.
    pub fn coarsen(&self, factor: usize) -> Result<FbmPath> {
        Ok(FbmPath {
            h: self.h,
            tau: self.tau * factor as f64,
            increments: coarsen_increments(&self.increments, factor)?,
        })
    }
}

fn coarsen_increments(fine: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || !fine.len().is_multiple_of(factor) {
        return Err(Error::SizeMismatch {
            module: "fbm",
            what: "coarsening factor must divide the path length",
            expected: factor,
            actual: fine.len(),
        });
    }
    Ok(fine.chunks_exact(factor).map(|c| c.iter().sum()).collect())
}

/// A generator of fractional Gaussian noise vectors of a fixed length.
pub trait FbmSampler: Send + Sync {
    fn hurst(&self) -> f64;
    fn tau(&self) -> f64;
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fills `out` (of length [`FbmSampler::len`]) with one sample.
    fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]);

    fn sample(&self, rng: &mut RngStream) -> FbmPath {
        let mut increments = vec![0.0; self.len()];
        self.sample_into(rng, &mut increments);
        FbmPath {
            h: self.hurst(),
            tau: self.tau(),
            increments,
        }
    }
}

/// Exact sampler through the Cholesky factor of the increment covariance.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    h: f64,
    tau: f64,
    lower: DMatrix<f64>,
}

impl CholeskySampler {
    pub fn new(h: f64, tau: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::domain("fbm", "len", 0.0, "at least one step"));
        }
        let cov = increment_covariance_matrix(h, tau, len)?;
        let chol = cov.cholesky().ok_or_else(|| {
            Error::Covariance(format!(
                "increment covariance (H = {h}, tau = {tau:e}, L = {len}) is not numerically positive definite"
            ))
        })?;
        Ok(Self {
            h,
            tau,
            lower: chol.unpack(),
        })
    }
}

impl FbmSampler for CholeskySampler {
    fn hurst(&self) -> f64 {
        self.h
    }

    fn tau(&self) -> f64 {
        self.tau
    }

    fn len(&self) -> usize {
        self.lower.nrows()
    }

    fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        let n = self.lower.nrows();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let x = &self.lower * z;
        out.copy_from_slice(x.as_slice());
    }
}

/// Circulant-embedding sampler, `O(L log L)` per path.
#[derive(Clone)]
pub struct CirculantSampler {
    h: f64,
    tau: f64,
    len: usize,
    // sqrt(eigenvalue / 2L) of the embedding circulant.
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("h", &self.h)
            .field("tau", &self.tau)
            .field("len", &self.len)
            .finish_non_exhaustive()
    }
}

impl CirculantSampler {
    /// Relative threshold below which a negative embedding eigenvalue is
    /// treated as rounding and clamped to zero.
    pub const EIGENVALUE_TOLERANCE: f64 = 1e-10;

    pub fn new(h: f64, tau: f64, len: usize) -> Result<Self> {
        check_hurst(h)?;
        check_tau(tau)?;
        if len == 0 {
            return Err(Error::domain("fbm", "len", 0.0, "at least one step"));
        }
        let size = 2 * len;
        // First row (γ_0, ..., γ_L, γ_{L-1}, ..., γ_1).
        let mut row: Vec<Complex<f64>> = (0..size)
            .map(|j| {
                let lag = if j <= len { j } else { size - j };
                Complex::new(increment_autocovariance(h, tau, lag), 0.0)
            })
            .collect();
        let gamma0 = row[0].re;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        fft.process(&mut row);
        let mut scale = Vec::with_capacity(size);
        for (index, ev) in row.iter().enumerate() {
            let lambda = ev.re;
            if lambda < -Self::EIGENVALUE_TOLERANCE * gamma0 {
                return Err(Error::Embedding {
                    index,
                    eigenvalue: lambda,
                });
            }
            scale.push((lambda.max(0.0) / size as f64).sqrt());
        }
        Ok(Self {
            h,
            tau,
            len,
            scale,
            fft,
        })
    }
}

impl FbmSampler for CirculantSampler {
    fn hurst(&self) -> f64 {
        self.h
    }

    fn tau(&self) -> f64 {
        self.tau
    }

    fn len(&self) -> usize {
        self.len
    }

    fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        let mut buf: Vec<Complex<f64>> = self
            .scale
            .iter()
            .map(|&s| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re;
        }
    }
}

/// One exact path by the Cholesky method.
pub fn sample_fbm_cholesky(h: f64, tau: f64, len: usize, rng: &mut RngStream) -> Result<FbmPath> {
    Ok(CholeskySampler::new(h, tau, len)?.sample(rng))
}

/// One exact path by circulant embedding.
pub fn sample_fbm_circulant(h: f64, tau: f64, len: usize, rng: &mut RngStream) -> Result<FbmPath> {
    Ok(CirculantSampler::new(h, tau, len)?.sample(rng))
}

/// Which sampler an ensemble is drawn with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Generator {
    Cholesky,
    #[default]
    Circulant,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::Cholesky => "cholesky",
            Generator::Circulant => "circulant",
        }
    }

    pub fn sampler(self, h: f64, tau: f64, len: usize) -> Result<Box<dyn FbmSampler>> {
        Ok(match self {
            Generator::Cholesky => Box::new(CholeskySampler::new(h, tau, len)?),
            Generator::Circulant => Box::new(CirculantSampler::new(h, tau, len)?),
        })
    }
}

impl std::str::FromStr for Generator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cholesky" => Ok(Generator::Cholesky),
            "circulant" | "davies-harte" => Ok(Generator::Circulant),
            other => Err(format!(
                "unknown generator `{other}` (expected cholesky or circulant)"
            )),
        }
    }
}

/// Independent fBm paths `W^H_k` for modes `k = 1..=N` and a contiguous block
/// of trajectories, all on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmEnsemble {
    h: f64,
    tau: f64,
    n_steps: usize,
    n_modes: usize,
    master_seed: u64,
    first_traj: usize,
    n_traj: usize,
    // Mode-major: ((k - 1) * n_traj + local_traj) * n_steps + n.
    increments: Vec<f64>,
}

impl FbmEnsemble {
    /// Stream identifier of path `(mode, traj)`.
    pub fn stream_id(mode: usize, traj: usize) -> u64 {
        ((traj as u64) << 32) | (mode as u64 & 0xffff_ffff)
    }

    /// Draws paths for modes `1..=n_modes` and trajectories
    /// `first_traj..first_traj + n_traj`.
    #[allow(clippy::too_many_arguments)]
    pub fn generate(
        h: f64,
        tau: f64,
        n_steps: usize,
        n_modes: usize,
        first_traj: usize,
        n_traj: usize,
        master_seed: u64,
        generator: Generator,
    ) -> Result<Self> {
        let sampler = generator.sampler(h, tau, n_steps)?;
        Ok(Self::generate_with(
            sampler.as_ref(),
            n_modes,
            first_traj,
            n_traj,
            master_seed,
        ))
    }

    /// Same as [`FbmEnsemble::generate`] with a prebuilt sampler.
    pub fn generate_with(
        sampler: &dyn FbmSampler,
        n_modes: usize,
        first_traj: usize,
        n_traj: usize,
        master_seed: u64,
    ) -> Self {
        let n_steps = sampler.len();
        let mut increments = vec![0.0; n_modes * n_traj * n_steps];
        if n_steps > 0 {
            increments
                .par_chunks_mut(n_steps)
                .enumerate()
                .for_each(|(slot, out)| {
                    let mode = slot / n_traj.max(1) + 1;
                    let traj = first_traj + slot % n_traj.max(1);
                    let mut rng = rng_stream(master_seed, Self::stream_id(mode, traj));
                    sampler.sample_into(&mut rng, out);
                });
        }
        Self {
            h: sampler.hurst(),
            tau: sampler.tau(),
            n_steps,
            n_modes,
            master_seed,
            first_traj,
            n_traj,
            increments,
        }
    }

    pub fn hurst(&self) -> f64 {
        self.h
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn trajectories(&self) -> std::ops::Range<usize> {
        self.first_traj..self.first_traj + self.n_traj
    }

    /// Increments of `W^H_mode` for trajectory `traj` (global index).
    pub fn path(&self, mode: usize, traj: usize) -> Result<&[f64]> {
        if mode == 0 || mode > self.n_modes || !self.trajectories().contains(&traj) {
            return Err(Error::MissingPath { mode, traj });
        }
        let slot = (mode - 1) * self.n_traj + (traj - self.first_traj);
        Ok(&self.increments[slot * self.n_steps..(slot + 1) * self.n_steps])
    }

    /// Ensemble on the grid with step `factor·τ`, driven by the same noise.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(Error::SizeMismatch {
                module: "fbm",
                what: "coarsening factor must divide the number of steps",
                expected: factor,
                actual: self.n_steps,
            });
        }
        let mut increments = Vec::with_capacity(self.increments.len() / factor);
        for path in self.increments.chunks_exact(self.n_steps.max(1)) {
            increments.extend(coarsen_increments(path, factor)?);
        }
        Ok(Self {
            tau: self.tau * factor as f64,
            n_steps: self.n_steps / factor,
            increments,
            ..self.clone()
        })
    }

    const MAGIC: &'static [u8; 8] = b"FBMENS01";

    /// Binary dump: magic `FBMENS01`, then little-endian `H: f64`,
    /// `τ: f64`, `L: u64`, `N: u64`, `n_traj: u64`, `master_seed: u64`,
    /// `first_traj: u64`, followed by the increments as `f64`, mode-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&self.h.to_le_bytes())?;
        w.write_all(&self.tau.to_le_bytes())?;
        for v in [
            self.n_steps as u64,
            self.n_modes as u64,
            self.n_traj as u64,
            self.master_seed,
            self.first_traj as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for x in &self.increments {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Dump("bad magic".into()));
        }
        let h = read_f64(&mut r)?;
        let tau = read_f64(&mut r)?;
        let n_steps = read_u64(&mut r)? as usize;
        let n_modes = read_u64(&mut r)? as usize;
        let n_traj = read_u64(&mut r)? as usize;
        let master_seed = read_u64(&mut r)?;
        let first_traj = read_u64(&mut r)? as usize;
        let count = n_steps
            .checked_mul(n_modes)
            .and_then(|x| x.checked_mul(n_traj))
            .ok_or_else(|| Error::Dump("header sizes overflow".into()))?;
        let mut increments = Vec::with_capacity(count);
        for _ in 0..count {
            increments.push(read_f64(&mut r)?);
        }
        Ok(Self {
            h,
            tau,
            n_steps,
            n_modes,
            master_seed,
            first_traj,
            n_traj,
            increments,
        })
    }
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Outcome of comparing a sample covariance with the exact one.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceCheck {
    pub n_paths: usize,
    /// Largest `|sample - exact| / standard error` over all entries.
    pub max_z: f64,
    /// Entries (upper triangle, diagonal included) beyond `z_limit`.
    pub violations: usize,
}

impl CovarianceCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Draws `n_paths` paths and compares each entry of the sample increment
/// covariance against [`increment_covariance_matrix`]. The standard error of
/// the zero-mean estimator of `Σ_ij` is `sqrt((Σ_ii Σ_jj + Σ_ij²)/n)`.
pub fn check_sample_covariance(
    sampler: &dyn FbmSampler,
    n_paths: usize,
    z_limit: f64,
    rng: &mut RngStream,
) -> Result<CovarianceCheck> {
    let len = sampler.len();
    let exact = increment_covariance_matrix(sampler.hurst(), sampler.tau(), len)?;
    let mut acc = DMatrix::<f64>::zeros(len, len);
    let mut x = vec![0.0; len];
    for _ in 0..n_paths {
        sampler.sample_into(rng, &mut x);
        let v = DVector::from_column_slice(&x);
        acc.syger(1.0, &v, &v, 1.0);
    }
    let n = n_paths as f64;
    let mut max_z: f64 = 0.0;
    let mut violations = 0;
    for i in 0..len {
        for j in i..len {
            // syger fills the lower triangle only.
            let sample = acc[(j, i)] / n;
            let sigma = exact[(i, j)];
            let se = ((exact[(i, i)] * exact[(j, j)] + sigma * sigma) / n).sqrt();
            let z = (sample - sigma).abs() / se;
            max_z = max_z.max(z);
            if z > z_limit {
                violations += 1;
            }
        }
    }
    Ok(CovarianceCheck {
        n_paths,
        max_z,
        violations,
    })
}

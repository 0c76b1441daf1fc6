//! Dirichlet Laplacian on the unit interval.
//!
//! The operator `A = -d²/dx²` with zero boundary values on `(0, 1)` has
//! eigenpairs `λ_k = (kπ)²`, `φ_k(x) = √2 sin(kπx)`, `k = 1, 2, ...`. The
//! spectral fractional power acts diagonally, `A^s φ_k = λ_k^s φ_k`, and the
//! Galerkin space is the span of the first `N` eigenfunctions.
//!
//! Grid values and coefficients are exchanged through the discrete sine
//! transform on the uniform interior grid `x_j = j/(M+1)`, `j = 1..M`. With
//! weights `1/(M+1)` the sampled eigenfunctions are exactly orthonormal for
//! `k ≤ M`, so [`project`] and [`synthesize`] are inverse to rounding on the
//! resolved span.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// `λ_k = (kπ)²`.
pub fn eigenvalue(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("spectral", "k", 0.0, "mode indices k >= 1"));
    }
    let kp = k as f64 * PI;
    Ok(kp * kp)
}

/// `φ_k(x) = √2 sin(kπx)` for `x ∈ [0, 1]`.
pub fn eigenfunction_at(k: usize, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("spectral", "k", 0.0, "mode indices k >= 1"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("spectral", "x", x, "[0, 1]"));
    }
    Ok(SQRT_2 * (k as f64 * PI * x).sin())
}

/// `λ_k^s` for `k = 1..=n_modes`, stored at index `k - 1`.
pub fn fractional_eigenvalues(n_modes: usize, s: f64) -> Vec<f64> {
    (1..=n_modes)
        .map(|k| (k as f64 * PI).powf(2.0 * s))
        .collect()
}

/// An eigenvalue together with its eigenfunction sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub k: usize,
    pub lambda: f64,
    pub values: Vec<f64>,
}

/// Uniform interior grid with discrete-sine-transform quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GridSpec {
    /// `n_points` interior nodes `j/(n_points+1)`.
    pub fn uniform(n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::domain(
                "spectral",
                "n_points",
                n_points as f64,
                "grids of at least 2 points",
            ));
        }
        let h = 1.0 / (n_points + 1) as f64;
        let nodes = (1..=n_points).map(|j| j as f64 * h).collect();
        Ok(Self {
            nodes,
            weights: vec![h; n_points],
        })
    }

    /// Smallest grid that resolves `n_modes` without aliasing (`M = 2N`).
    pub fn for_modes(n_modes: usize) -> Result<Self> {
        Self::uniform((2 * n_modes).max(2))
    }

    pub fn n_points(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest number of modes this grid may project onto.
    pub fn capacity(&self) -> usize {
        self.n_points() / 2
    }

    /// Mode `k` sampled at the nodes.
    pub fn eigenpair(&self, k: usize) -> Result<Eigenpair> {
        let lambda = eigenvalue(k)?;
        let values = self
            .nodes
            .iter()
            .map(|&x| SQRT_2 * (k as f64 * PI * x).sin())
            .collect();
        Ok(Eigenpair { k, lambda, values })
    }

    /// Quadrature of `∫_0^1 v(x) w(x) dx`.
    pub fn inner(&self, v: &[f64], w: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(v.iter().zip(w))
            .map(|(q, (a, b))| q * a * b)
            .sum()
    }
}

/// Coefficients of `u_N = Σ_k c_k φ_k`, with `c_k` at index `k - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(n_modes: usize) -> Self {
        Self {
            coeffs: vec![0.0; n_modes],
        }
    }

    /// Rejects non-finite entries.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(pos) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::domain(
                "spectral",
                "coefficient",
                coeffs[pos],
                "finite values",
            ));
        }
        Ok(Self { coeffs })
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of `φ_k` (1-based); zero beyond the stored modes.
    pub fn coeff(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.coeffs.get(k - 1).copied().unwrap_or(0.0)
    }

    /// `‖u_N‖_{L²}` by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Precomputed sine table for repeated transforms between one grid and a
/// fixed number of modes.
#[derive(Debug, Clone)]
pub struct SineTransform {
    grid: GridSpec,
    n_modes: usize,
    // table[(k - 1) * M + j] = φ_k(x_j)
    table: Vec<f64>,
}

impl SineTransform {
    pub fn new(grid: GridSpec, n_modes: usize) -> Result<Self> {
        if n_modes > grid.capacity() {
            return Err(Error::Aliasing {
                n_modes,
                n_points: grid.n_points(),
            });
        }
        let m = grid.n_points();
        let mut table = Vec::with_capacity(n_modes * m);
        for k in 1..=n_modes {
            table.extend(
                grid.nodes()
                    .iter()
                    .map(|&x| SQRT_2 * (k as f64 * PI * x).sin()),
            );
        }
        Ok(Self {
            grid,
            n_modes,
            table,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// `(u, φ_k)` by the grid quadrature, for `k = 1..=N`.
    pub fn project(&self, values: &[f64]) -> Result<SpectralField> {
        let m = self.grid.n_points();
        if values.len() != m {
            return Err(Error::SizeMismatch {
                module: "spectral",
                what: "grid values",
                expected: m,
                actual: values.len(),
            });
        }
        let h = self.grid.weights()[0];
        let coeffs = self
            .table
            .chunks_exact(m)
            .map(|row| h * row.iter().zip(values).map(|(p, u)| p * u).sum::<f64>())
            .collect();
        Ok(SpectralField { coeffs })
    }

    /// Grid values of `Σ_k c_k φ_k`. Fields with fewer modes than the
    /// transform are treated as zero-padded.
    pub fn synthesize(&self, field: &SpectralField) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid.n_points()];
        self.synthesize_into(field, &mut out)?;
        Ok(out)
    }

    pub fn synthesize_into(&self, field: &SpectralField, out: &mut [f64]) -> Result<()> {
        let m = self.grid.n_points();
        if field.n_modes() > self.n_modes {
            return Err(Error::SizeMismatch {
                module: "spectral",
                what: "field modes",
                expected: self.n_modes,
                actual: field.n_modes(),
            });
        }
        if out.len() != m {
            return Err(Error::SizeMismatch {
                module: "spectral",
                what: "output grid",
                expected: m,
                actual: out.len(),
            });
        }
        out.fill(0.0);
        for (c, row) in field.coeffs.iter().zip(self.table.chunks_exact(m)) {
            if *c == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(row) {
                *o += c * p;
            }
        }
        Ok(())
    }
}

/// One-off projection of grid values onto the first `n_modes` eigenfunctions.
pub fn project(grid: &GridSpec, values: &[f64], n_modes: usize) -> Result<SpectralField> {
    SineTransform::new(grid.clone(), n_modes)?.project(values)
}

/// One-off synthesis of a field on `grid`.
pub fn synthesize(field: &SpectralField, grid: &GridSpec) -> Result<Vec<f64>> {
    SineTransform::new(grid.clone(), field.n_modes())?.synthesize(field)
}

/// `A^s u_N`: scales coefficient `k` by `λ_k^s`.
pub fn apply_fractional_laplacian(field: &SpectralField, s: f64) -> Result<SpectralField> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain("spectral", "s", s, "(0, 1]"));
    }
    let coeffs = field
        .coeffs
        .iter()
        .zip(fractional_eigenvalues(field.n_modes(), s))
        .map(|(c, l)| c * l)
        .collect();
    Ok(SpectralField { coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn eigenvalues() {
        assert_relative_eq!(eigenvalue(1).unwrap(), PI * PI);
        assert_relative_eq!(eigenvalue(2).unwrap(), 4.0 * PI * PI);
        assert_relative_eq!(eigenvalue(10).unwrap(), 100.0 * PI * PI);
        assert!(eigenvalue(0).is_err());
        for k in 1..200 {
            assert!(eigenvalue(k + 1).unwrap() > eigenvalue(k).unwrap());
        }
    }

    #[test]
    fn eigenfunctions() {
        assert_relative_eq!(eigenfunction_at(1, 0.5).unwrap(), SQRT_2);
        assert!(eigenfunction_at(2, 0.5).unwrap().abs() < 1e-15);
        assert_relative_eq!(
            eigenfunction_at(3, 1.0 / 6.0).unwrap(),
            SQRT_2,
            epsilon = 1e-15
        );
        assert!(eigenfunction_at(4, 0.0).unwrap().abs() < 1e-15);
        assert!(eigenfunction_at(4, 1.0).unwrap().abs() < 1e-14);
        assert!(eigenfunction_at(1, -0.1).is_err());
        assert!(eigenfunction_at(1, 1.1).is_err());
    }

    #[test]
    fn gram_matrix_is_identity() {
        let grid = GridSpec::uniform(64).unwrap();
        let pairs: Vec<_> = (1..=32).map(|k| grid.eigenpair(k).unwrap()).collect();
        for a in &pairs {
            for b in &pairs {
                let g = grid.inner(&a.values, &b.values);
                let want = if a.k == b.k { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10, "G[{},{}] = {g}", a.k, b.k);
            }
        }
    }

    #[test]
    fn project_single_mode() {
        let grid = GridSpec::uniform(16).unwrap();
        let u = grid.eigenpair(3).unwrap().values;
        let f = project(&grid, &u, 8).unwrap();
        for (i, c) in f.coeffs().iter().enumerate() {
            let want = if i == 2 { 1.0 } else { 0.0 };
            assert!((c - want).abs() < 1e-12);
        }
        let zero = project(&grid, &[0.0; 16], 8).unwrap();
        assert!(zero.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn project_rejects_aliasing() {
        let grid = GridSpec::uniform(16).unwrap();
        assert!(matches!(
            project(&grid, &[0.0; 16], 9),
            Err(Error::Aliasing { .. })
        ));
        assert!(project(&grid, &[0.0; 15], 4).is_err());
    }

    // Composite Simpson on 20000 panels of x(1-x)·φ_k(x).
    fn simpson_parabola_coeff(k: usize) -> f64 {
        let n = 20_000;
        let h = 1.0 / n as f64;
        let f = |x: f64| x * (1.0 - x) * SQRT_2 * (k as f64 * PI * x).sin();
        let mut acc = f(0.0) + f(1.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn project_parabola() {
        let grid = GridSpec::uniform(2047).unwrap();
        let u: Vec<f64> = grid.nodes().iter().map(|x| x * (1.0 - x)).collect();
        let f = project(&grid, &u, 4).unwrap();
        for k in 1..=4 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let closed = 2.0 * SQRT_2 * (1.0 - sign) / (k as f64 * PI).powi(3);
            let oracle = simpson_parabola_coeff(k);
            assert!(
                (closed - oracle).abs() < 1e-12,
                "oracle disagrees for k={k}"
            );
            assert!(
                (f.coeff(k) - oracle).abs() < 1e-8,
                "k={k}: {} vs {oracle}",
                f.coeff(k)
            );
        }
    }

    #[test]
    fn synthesize_single_mode() {
        let grid = GridSpec::uniform(10).unwrap();
        let mut c = vec![0.0; 5];
        c[0] = 1.0;
        let v = synthesize(&SpectralField::from_coeffs(c).unwrap(), &grid).unwrap();
        for (x, y) in grid.nodes().iter().zip(&v) {
            assert_relative_eq!(*y, SQRT_2 * (PI * x).sin(), epsilon = 1e-15);
        }
        let z = synthesize(&SpectralField::zeros(5), &grid).unwrap();
        assert!(z.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn fractional_laplacian() {
        let mut c = vec![0.0; 4];
        c[0] = 1.0;
        let f = apply_fractional_laplacian(&SpectralField::from_coeffs(c).unwrap(), 1.0).unwrap();
        assert_relative_eq!(f.coeff(1), PI * PI, max_relative = 1e-15);
        assert_eq!(&f.coeffs()[1..], &[0.0; 3]);

        let f = apply_fractional_laplacian(
            &SpectralField::from_coeffs(vec![0.0, 1.0, 0.0]).unwrap(),
            0.5,
        )
        .unwrap();
        assert_relative_eq!(f.coeff(2), 2.0 * PI, max_relative = 1e-15);

        let c: Vec<f64> = (1..=12).map(|k| (k as f64).sin()).collect();
        let f = apply_fractional_laplacian(&SpectralField::from_coeffs(c.clone()).unwrap(), 0.7)
            .unwrap();
        for (k, (got, c)) in f.coeffs().iter().zip(&c).enumerate() {
            let kk = (k + 1) as f64;
            let want = (kk * kk * PI * PI).powf(0.7) * c;
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }

        assert!(apply_fractional_laplacian(&SpectralField::zeros(2), 0.0).is_err());
        assert!(apply_fractional_laplacian(&SpectralField::zeros(2), 1.5).is_err());
    }

    #[test]
    fn from_coeffs_rejects_nan() {
        assert!(SpectralField::from_coeffs(vec![1.0, f64::NAN]).is_err());
        assert!(SpectralField::from_coeffs(vec![f64::INFINITY]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_and_parseval(
            c in prop::collection::vec(-10.0f64..10.0, 1..24),
            extra in 0usize..20,
        ) {
            let n = c.len();
            let grid = GridSpec::uniform(2 * n + extra).unwrap();
            let field = SpectralField::from_coeffs(c.clone()).unwrap();
            let values = synthesize(&field, &grid).unwrap();
            let back = project(&grid, &values, n).unwrap();
            for (a, b) in back.coeffs().iter().zip(&c) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let quad = grid.inner(&values, &values);
            let sum: f64 = c.iter().map(|x| x * x).sum();
            prop_assert!((quad - sum).abs() <= 1e-10 * sum.max(1.0));
        }

        #[test]
        fn fractional_laplacian_is_diagonal(
            c in prop::collection::vec(-1.0f64..1.0, 1..16),
            s in 0.05f64..1.0,
        ) {
            let n = c.len();
            let grid = GridSpec::uniform(2 * n).unwrap();
            let field = SpectralField::from_coeffs(c).unwrap();
            let scaled = apply_fractional_laplacian(&field, s).unwrap();
            // Build A^s u on the grid directly from eigenpairs, then project.
            let mut values = vec![0.0; grid.n_points()];
            for k in 1..=n {
                let pair = grid.eigenpair(k).unwrap();
                let w = pair.lambda.powf(s) * field.coeff(k);
                for (v, p) in values.iter_mut().zip(&pair.values) {
                    *v += w * p;
                }
            }
            let projected = project(&grid, &values, n).unwrap();
            for (a, b) in projected.coeffs().iter().zip(scaled.coeffs()) {
                prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
        }
    }
}

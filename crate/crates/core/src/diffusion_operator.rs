//! Symmetric diffusion matrices and their spectral decompositions.
//!
//! For a kernel `K` with degrees `d_i = Σ_j K[i,j]`, the diffusion matrix is
//! `A = D^{-1/2} K D^{-1/2}`. The `1/n` factors of the empirical kernel and
//! degree matrices cancel, so `A` does not depend on how the kernel is
//! scaled. The `t`-step diffusion kernel evaluated on samples is `n · A^t`.

use faer::{Mat, Side};

use crate::error::{check_index, Error, Result};
use crate::kernels::KernelMatrix;

/// Eigenvalues may overshoot `[-1, 1]` by this much before being rejected.
const SPECTRUM_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionMatrix {
    matrix: Mat<f64>,
    density: Option<Vec<f64>>,
}

impl DiffusionMatrix {
    /// Wraps an arbitrary symmetric matrix, e.g. a hand-built operator in a
    /// test. No density is attached.
    pub fn from_symmetric(matrix: Mat<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "diffusion matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for j in 0..n {
            for i in 0..n {
                let v = matrix[(i, j)];
                if !v.is_finite() || (v - matrix[(j, i)]).abs() > 1e-12 * (1.0 + v.abs()) {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not finite and symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self {
            matrix,
            density: None,
        })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    /// Empirical density `m[i] = (1/n) Σ_j k[i,j]`, present when built from a kernel.
    pub fn density(&self) -> Option<&[f64]> {
        self.density.as_deref()
    }

    /// Top eigenfunction predicted from the density alone:
    /// `√m / ‖√m‖` under the empirical measure. Matches the leading
    /// eigenfunction of a connected graph without diagonalizing.
    pub fn stationary_eigenfunction(&self) -> Option<Vec<f64>> {
        let m = self.density.as_ref()?;
        let mean: f64 = m.iter().sum::<f64>() / m.len() as f64;
        let norm = mean.sqrt();
        Some(m.iter().map(|v| v.sqrt() / norm).collect())
    }

    pub fn is_connected(&self) -> bool {
        crate::kernels::is_connected(&self.matrix)
    }
}

pub fn diffusion_matrix(kernel: &KernelMatrix) -> Result<DiffusionMatrix> {
    let k = kernel.values();
    let n = k.nrows();
    let mut degree = vec![0.0; n];
    for j in 0..n {
        for (i, d) in degree.iter_mut().enumerate() {
            *d += k[(i, j)];
        }
    }
    if let Some(i) = degree.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::Degenerate(format!(
            "row {i} of the kernel has degree {}",
            degree[i]
        )));
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut a = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = k[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    let density = degree.iter().map(|d| d / n as f64).collect();
    Ok(DiffusionMatrix {
        matrix: a,
        density: Some(density),
    })
}

/// Row-stochastic transition matrix `P = D^{-1} K`. It shares its spectrum
/// with the symmetric diffusion matrix.
pub fn transition_matrix(kernel: &KernelMatrix) -> Result<Mat<f64>> {
    let k = kernel.values();
    let n = k.nrows();
    let mut p = k.to_owned();
    for i in 0..n {
        let d: f64 = (0..n).map(|j| k[(i, j)]).sum();
        if !(d > 0.0) {
            return Err(Error::Degenerate(format!("row {i} of the kernel has degree {d}")));
        }
        for j in 0..n {
            p[(i, j)] /= d;
        }
    }
    Ok(p)
}

/// `L = ½(I − A)`; its eigenvalues are `(1 − λ)/2` for the eigenvalues `λ` of `A`.
pub fn graph_laplacian(a: &DiffusionMatrix) -> Mat<f64> {
    let n = a.len();
    Mat::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        0.5 * (id - a.matrix[(i, j)])
    })
}

/// Leading eigenpairs of one diffusion matrix.
///
/// Eigenvalues are sorted in descending order. Eigenfunctions are the
/// columns of an `n × rank` matrix normalized against the empirical measure,
/// `(1/n) ψᵀψ = I`, and the entry of largest magnitude in each column is
/// positive (ties go to the lowest index).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenfunctions: Mat<f64>,
}

impl SpectralDecomposition {
    /// Assembles a decomposition from already-normalized parts. Only shapes
    /// are checked; the sign convention is not re-applied.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenfunctions: Mat<f64>) -> Result<Self> {
        if eigenvalues.len() != eigenfunctions.ncols() || eigenvalues.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} eigenvalues for {} eigenfunctions",
                eigenvalues.len(),
                eigenfunctions.ncols()
            )));
        }
        if eigenfunctions.nrows() < eigenfunctions.ncols() {
            return Err(Error::InvalidInput(format!(
                "rank {} exceeds sample size {}",
                eigenfunctions.ncols(),
                eigenfunctions.nrows()
            )));
        }
        Ok(Self {
            eigenvalues,
            eigenfunctions,
        })
    }

    pub fn n(&self) -> usize {
        self.eigenfunctions.nrows()
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.n()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `n × rank`, column `i` holds `ψ_i` evaluated at every sample.
    pub fn eigenfunctions(&self) -> &Mat<f64> {
        &self.eigenfunctions
    }

    pub fn eigenfunction(&self, i: usize) -> &[f64] {
        self.eigenfunctions.col_as_slice(i)
    }

    /// Keeps the leading `rank` pairs.
    pub fn truncated(&self, rank: usize) -> Result<Self> {
        if rank == 0 || rank > self.rank() {
            return Err(Error::InvalidInput(format!(
                "cannot truncate rank {} decomposition to {rank}",
                self.rank()
            )));
        }
        Ok(Self {
            eigenvalues: self.eigenvalues[..rank].to_vec(),
            eigenfunctions: Mat::from_fn(self.n(), rank, |i, j| self.eigenfunctions[(i, j)]),
        })
    }

    /// `(1/n) Σ_x ψ_i(x)ψ_j(x)` for all kept pairs.
    pub fn empirical_gram(&self) -> Mat<f64> {
        let psi = &self.eigenfunctions;
        let mut g = psi.transpose() * psi;
        let inv_n = 1.0 / self.n() as f64;
        g.for_each_mut(|v| *v *= inv_n);
        g
    }
}

/// Eigenpairs with the `rank` largest eigenvalues.
pub fn spectral_decomposition(a: &DiffusionMatrix, rank: usize) -> Result<SpectralDecomposition> {
    let n = a.len();
    if rank == 0 || rank > n {
        return Err(Error::InvalidInput(format!(
            "rank must lie in 1..={n}, got {rank}"
        )));
    }
    let evd = a
        .matrix
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let values = evd.S().column_vector();
    let vectors = evd.U();

    // faer sorts ascending; walk from the top.
    let mut eigenvalues = Vec::with_capacity(rank);
    let mut psi = Mat::<f64>::zeros(n, rank);
    let scale = (n as f64).sqrt();
    for c in 0..rank {
        let src = n - 1 - c;
        eigenvalues.push(values[src]);
        let col: Vec<f64> = (0..n).map(|i| vectors[(i, src)]).collect();
        let sign = sign_of_largest(&col);
        for (i, v) in col.iter().enumerate() {
            psi[(i, c)] = sign * scale * v;
        }
    }

    // Residual of the kept pairs on unit-norm vectors.
    let av = &a.matrix * &psi;
    let mut worst = 0.0f64;
    for c in 0..rank {
        for i in 0..n {
            let r = (av[(i, c)] - eigenvalues[c] * psi[(i, c)]).abs() / scale;
            worst = worst.max(r);
        }
    }
    let max_entry = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .fold(0.0f64, |m, (i, j)| m.max(a.matrix[(i, j)].abs()));
    if !(worst <= 1e-8 * (1.0 + max_entry) * (n as f64).sqrt()) {
        return Err(Error::Numerical(format!(
            "eigenpairs did not converge: max residual {worst:e}"
        )));
    }

    clip_spectrum(&mut eigenvalues)?;
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenfunctions: psi,
    })
}

/// Largest `k` eigenvalues (descending) without eigenvectors.
pub fn top_eigenvalues(a: &DiffusionMatrix, k: usize) -> Result<Vec<f64>> {
    let n = a.len();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k must lie in 1..={n}, got {k}")));
    }
    let values = a
        .matrix
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver failed: {e:?}")))?;
    let mut top: Vec<f64> = values.iter().rev().take(k).copied().collect();
    clip_spectrum(&mut top)?;
    Ok(top)
}

fn clip_spectrum(values: &mut [f64]) -> Result<()> {
    for v in values.iter_mut() {
        if !(*v > -1.0 - SPECTRUM_SLACK && *v <= 1.0 + SPECTRUM_SLACK) {
            return Err(Error::Numerical(format!(
                "eigenvalue {v} lies outside (-1, 1]; input is not a diffusion matrix"
            )));
        }
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(())
}

/// `+1` if the entry of largest magnitude is nonnegative, `-1` otherwise.
pub(crate) fn sign_of_largest(col: &[f64]) -> f64 {
    let mut best = 0usize;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Row `i` of `A^t` by `t` matrix-vector products. Uses no spectral
/// information, so it serves as the reference for the spectral formulas.
pub fn kernel_power_row(a: &DiffusionMatrix, t: u32, i: usize) -> Result<Vec<f64>> {
    let n = a.len();
    check_index(i, n)?;
    if t == 0 {
        return Err(Error::InvalidInput("diffusion time must be ≥ 1".into()));
    }
    let m = &a.matrix;
    let mut v: Vec<f64> = (0..n).map(|k| m[(i, k)]).collect();
    for _ in 1..t {
        // A is symmetric: (e_iᵀA^s)A = row of A^{s+1}.
        let mut next = vec![0.0; n];
        for (k, nk) in next.iter_mut().enumerate() {
            *nk = (0..n).map(|l| v[l] * m[(l, k)]).sum();
        }
        v = next;
    }
    Ok(v)
}

/// `A^t` by repeated squaring.
pub fn matrix_power(a: &DiffusionMatrix, t: u32) -> Result<Mat<f64>> {
    if t == 0 {
        return Err(Error::InvalidInput("diffusion time must be ≥ 1".into()));
    }
    let mut result: Option<Mat<f64>> = None;
    let mut base = a.matrix.clone();
    let mut e = t;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => &r * &base,
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = &base * &base;
    }
    Ok(result.expect("t ≥ 1"))
}

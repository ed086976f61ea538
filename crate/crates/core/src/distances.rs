//! Diffusion distances within and across graphs.
//!
//! Pointwise distances compare the `t`-step kernel row of `x` in one graph
//! with the row of `y` in another. Global distances compare two whole
//! diffusion operators. Each quantity has a spectral route and a direct
//! route through matrix powers; the direct routes never touch eigenvectors
//! and are what the spectral formulas are tested against.

use faer::Mat;

use crate::diffusion_operator::{kernel_power_row, matrix_power, DiffusionMatrix, SpectralDecomposition};
use crate::error::{check_index, Error, Result};

/// Largest top-two eigenvalue gap tolerated by the `t → ∞` formulas.
const CONNECTIVITY_GAP: f64 = 1e-9;

/// Cross inner products of two eigenbases, `G[i,j] = (1/n) ψ_α^i · ψ_β^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    matrix: Mat<f64>,
    n: usize,
}

impl GramMatrix {
    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(k_α, k_β)`.
    pub fn ranks(&self) -> (usize, usize) {
        (self.matrix.nrows(), self.matrix.ncols())
    }

    /// `max |GᵀG − I|`. Zero up to roundoff when both bases are complete.
    pub fn isometry_defect(&self) -> f64 {
        isometry_defect(&self.matrix)
    }
}

pub(crate) fn isometry_defect(r: &Mat<f64>) -> f64 {
    let rtr = r.transpose() * r;
    let k = rtr.nrows();
    let mut worst = 0.0f64;
    for j in 0..k {
        for i in 0..k {
            let id = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((rtr[(i, j)] - id).abs());
        }
    }
    worst
}

fn check_same_n(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::Correspondence { left, right })
    }
}

fn check_time(t: u32) -> Result<()> {
    if t == 0 {
        Err(Error::InvalidInput("diffusion time must be ≥ 1".into()))
    } else {
        Ok(())
    }
}

pub fn gram_matrix(dec_a: &SpectralDecomposition, dec_b: &SpectralDecomposition) -> Result<GramMatrix> {
    check_same_n(dec_a.n(), dec_b.n())?;
    let n = dec_a.n();
    let mut g = dec_a.eigenfunctions().transpose() * dec_b.eigenfunctions();
    let inv_n = 1.0 / n as f64;
    g.for_each_mut(|v| *v *= inv_n);
    Ok(GramMatrix { matrix: g, n })
}

fn powers(values: &[f64], t: u32) -> Vec<f64> {
    values.iter().map(|l| l.powi(t as i32)).collect()
}

/// Turns a squared distance into a distance, absorbing roundoff below zero.
fn root(d2: f64, scale: f64) -> Result<f64> {
    if d2 >= 0.0 {
        Ok(d2.sqrt())
    } else if d2 >= -1e-10 * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!("squared distance {d2:e} is negative")))
    }
}

fn check_ranks(gram: &GramMatrix, dec_a: &SpectralDecomposition, dec_b: &SpectralDecomposition) -> Result<()> {
    if gram.ranks() != (dec_a.rank(), dec_b.rank()) {
        return Err(Error::InvalidInput(format!(
            "gram matrix of ranks {:?} does not match decompositions of ranks ({}, {})",
            gram.ranks(),
            dec_a.rank(),
            dec_b.rank()
        )));
    }
    Ok(())
}

/// Both graphs' diffusion-map rows written in one coordinate system, so that
/// `D²(i, j) = ‖left_i − right_j‖² + rest_left[i] + rest_right[j]`.
///
/// If the first basis is complete, `G` maps the second graph into it without
/// loss; if only the second is complete, `Gᵀ` maps the other way. With two
/// truncated bases the part of each second-graph row outside the first span
/// is kept as a squared remainder. Writing the distance as a difference of
/// aligned vectors keeps small distances accurate, where `‖u‖² + ‖v‖² − 2uᵀGv`
/// would lose half the significant digits.
struct Aligned {
    left: Mat<f64>,
    right: Mat<f64>,
    rest_left: Vec<f64>,
    rest_right: Vec<f64>,
}

fn remainder(full2: f64, projected2: f64) -> Result<f64> {
    let r = full2 - projected2;
    if r < -1e-10 * full2.max(1.0) {
        return Err(Error::Numerical(format!(
            "projection grew a vector from {full2:e} to {projected2:e}; bases are not orthonormal"
        )));
    }
    Ok(r.max(0.0))
}

fn align(ua: Mat<f64>, ub: Mat<f64>, a_full: bool, b_full: bool, gram: &GramMatrix) -> Result<Aligned> {
    let g = gram.matrix();
    if !a_full && b_full {
        let left = &ua * g;
        return Ok(Aligned {
            rest_left: vec![0.0; left.nrows()],
            rest_right: vec![0.0; ub.nrows()],
            left,
            right: ub,
        });
    }
    let right = &ub * g.transpose();
    let rest_right = if a_full {
        vec![0.0; right.nrows()]
    } else {
        (0..right.nrows())
            .map(|j| remainder(row_norm2(&ub, j), row_norm2(&right, j)))
            .collect::<Result<_>>()?
    };
    Ok(Aligned {
        rest_left: vec![0.0; ua.nrows()],
        left: ua,
        right,
        rest_right,
    })
}

fn row_difference2(a: &Mat<f64>, i: usize, b: &Mat<f64>, j: usize) -> f64 {
    (0..a.ncols()).map(|k| (a[(i, k)] - b[(j, k)]).powi(2)).sum()
}

/// `D^(t)(x_α, y_β)` from the two spectral decompositions.
pub fn diffusion_distance(
    dec_a: &SpectralDecomposition,
    dec_b: &SpectralDecomposition,
    gram: &GramMatrix,
    i: usize,
    j: usize,
    t: u32,
) -> Result<f64> {
    check_same_n(dec_a.n(), dec_b.n())?;
    check_index(i, dec_a.n())?;
    check_index(j, dec_b.n())?;
    check_time(t)?;
    check_ranks(gram, dec_a, dec_b)?;
    let row = |dec: &SpectralDecomposition, x: usize| {
        let lt = powers(dec.eigenvalues(), t);
        Mat::from_fn(1, dec.rank(), |_, k| lt[k] * dec.eigenfunctions()[(x, k)])
    };
    let al = align(row(dec_a, i), row(dec_b, j), dec_a.is_full_rank(), dec_b.is_full_rank(), gram)?;
    Ok((row_difference2(&al.left, 0, &al.right, 0) + al.rest_left[0] + al.rest_right[0]).sqrt())
}

/// All cross distances `D^(t)(x_α^i, y_β^j)` as an `n × n` matrix.
pub fn distance_matrix(
    dec_a: &SpectralDecomposition,
    dec_b: &SpectralDecomposition,
    gram: &GramMatrix,
    t: u32,
) -> Result<Mat<f64>> {
    check_same_n(dec_a.n(), dec_b.n())?;
    check_time(t)?;
    check_ranks(gram, dec_a, dec_b)?;
    let n = dec_a.n();
    let al = align(
        scaled_coords(dec_a, t),
        scaled_coords(dec_b, t),
        dec_a.is_full_rank(),
        dec_b.is_full_rank(),
        gram,
    )?;
    let nl: Vec<f64> = (0..n).map(|x| row_norm2(&al.left, x)).collect();
    let nr: Vec<f64> = (0..n).map(|x| row_norm2(&al.right, x)).collect();
    let cross = &al.left * al.right.transpose();
    let mut out = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let scale = nl[i] + nr[j];
            let mut d2 = scale - 2.0 * cross[(i, j)];
            // The expansion cancels badly for nearby rows; redo those directly.
            if d2 < 1e-6 * scale {
                d2 = row_difference2(&al.left, i, &al.right, j);
            }
            out[(i, j)] = (d2 + al.rest_left[i] + al.rest_right[j]).sqrt();
        }
    }
    Ok(out)
}

/// `D^(t)(x_α, x_β)` for every sample `x`.
pub fn corresponding_distances(
    dec_a: &SpectralDecomposition,
    dec_b: &SpectralDecomposition,
    gram: &GramMatrix,
    t: u32,
) -> Result<Vec<f64>> {
    check_same_n(dec_a.n(), dec_b.n())?;
    check_time(t)?;
    check_ranks(gram, dec_a, dec_b)?;
    let al = align(
        scaled_coords(dec_a, t),
        scaled_coords(dec_b, t),
        dec_a.is_full_rank(),
        dec_b.is_full_rank(),
        gram,
    )?;
    Ok((0..dec_a.n())
        .map(|x| (row_difference2(&al.left, x, &al.right, x) + al.rest_left[x] + al.rest_right[x]).sqrt())
        .collect())
}

fn scaled_coords(dec: &SpectralDecomposition, t: u32) -> Mat<f64> {
    let lt = powers(dec.eigenvalues(), t);
    let psi = dec.eigenfunctions();
    Mat::from_fn(psi.nrows(), psi.ncols(), |x, k| lt[k] * psi[(x, k)])
}

fn row_norm2(m: &Mat<f64>, row: usize) -> f64 {
    (0..m.ncols()).map(|k| m[(row, k)] * m[(row, k)]).sum()
}

/// `D^(t)(x_α, y_β)` straight from kernel powers: `n · Σ_k (A_α^t[i,k] − A_β^t[j,k])²`.
pub fn direct_diffusion_distance(
    a: &DiffusionMatrix,
    b: &DiffusionMatrix,
    i: usize,
    j: usize,
    t: u32,
) -> Result<f64> {
    check_same_n(a.len(), b.len())?;
    let ra = kernel_power_row(a, t, i)?;
    let rb = kernel_power_row(b, t, j)?;
    let s: f64 = ra.iter().zip(&rb).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok((a.len() as f64 * s).sqrt())
}

fn check_connected(dec: &SpectralDecomposition, which: &str) -> Result<()> {
    let ev = dec.eigenvalues();
    if ev.len() >= 2 && ev[1] > 1.0 - CONNECTIVITY_GAP {
        return Err(Error::Precondition(format!(
            "{which} graph has λ2 = {} ≥ 1 − {CONNECTIVITY_GAP:e}; it is disconnected or nearly so",
            ev[1]
        )));
    }
    if (ev[0] - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "{which} decomposition has top eigenvalue {} instead of 1",
            ev[0]
        )));
    }
    Ok(())
}

fn empirical_dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>() / u.len() as f64
}

/// `lim_{t→∞} D^(t)(x_α, y_β)` for connected graphs, using only the top
/// eigenfunctions: `(ψ_α(x) − ψ_β(y))² + ψ_α(x) ψ_β(y) ‖ψ_α − ψ_β‖²`.
pub fn asymptotic_diffusion_distance(
    dec_a: &SpectralDecomposition,
    dec_b: &SpectralDecomposition,
    i: usize,
    j: usize,
) -> Result<f64> {
    check_same_n(dec_a.n(), dec_b.n())?;
    check_index(i, dec_a.n())?;
    check_index(j, dec_b.n())?;
    check_connected(dec_a, "first")?;
    check_connected(dec_b, "second")?;
    let (pa, pb) = (dec_a.eigenfunction(0), dec_b.eigenfunction(0));
    Ok(asymptotic_from_top(pa, pb, mean_square_difference(pa, pb), i, j))
}

fn mean_square_difference(pa: &[f64], pb: &[f64]) -> f64 {
    pa.iter().zip(pb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / pa.len() as f64
}

fn asymptotic_from_top(pa: &[f64], pb: &[f64], diff_norm2: f64, i: usize, j: usize) -> f64 {
    let d = pa[i] - pb[j];
    (d * d + pa[i] * pb[j] * diff_norm2).max(0.0).sqrt()
}

/// `lim_{t→∞} D^(t)(x_α, x_β)` for every sample, without diagonalizing: the
/// top eigenfunction of a connected graph is the normalized square root of
/// its degree density.
pub fn asymptotic_corresponding_distances(a: &DiffusionMatrix, b: &DiffusionMatrix) -> Result<Vec<f64>> {
    check_same_n(a.len(), b.len())?;
    let (Some(pa), Some(pb)) = (a.stationary_eigenfunction(), b.stationary_eigenfunction()) else {
        return Err(Error::Precondition(
            "density-based limits need diffusion matrices built from kernels".into(),
        ));
    };
    if !a.is_connected() || !b.is_connected() {
        return Err(Error::Precondition("graphs must be connected".into()));
    }
    let diff_norm2 = mean_square_difference(&pa, &pb);
    Ok((0..a.len()).map(|x| asymptotic_from_top(&pa, &pb, diff_norm2, x, x)).collect())
}

/// `𝒟^(t)(Γ_α, Γ_β)` from the spectra and Gram matrix.
///
/// With complete bases this is `Σ_ij (λ_α^{i,t} − λ_β^{j,t})² G_ij²`. With
/// truncated bases the algebraically equivalent three-term form
/// `Σλ_α^{2t} + Σλ_β^{2t} − 2 Σ λ_α^t λ_β^t G²` is used instead, since it is
/// the squared norm of the difference of the truncated operators.
pub fn global_diffusion_distance(
    dec_a: &SpectralDecomposition,
    dec_b: &SpectralDecomposition,
    gram: &GramMatrix,
    t: u32,
) -> Result<f64> {
    check_same_n(dec_a.n(), dec_b.n())?;
    check_time(t)?;
    let la = powers(dec_a.eigenvalues(), t);
    let lb = powers(dec_b.eigenvalues(), t);
    let g = gram.matrix();
    if gram.ranks() != (la.len(), lb.len()) {
        return Err(Error::InvalidInput("gram matrix does not match decompositions".into()));
    }
    if dec_a.is_full_rank() && dec_b.is_full_rank() {
        let mut s = 0.0;
        for (q, bq) in lb.iter().enumerate() {
            for (p, ap) in la.iter().enumerate() {
                let d = ap - bq;
                s += d * d * g[(p, q)] * g[(p, q)];
            }
        }
        return Ok(s.sqrt());
    }
    let aa: f64 = la.iter().map(|x| x * x).sum();
    let bb: f64 = lb.iter().map(|x| x * x).sum();
    let mut cross = 0.0;
    for (q, bq) in lb.iter().enumerate() {
        for (p, ap) in la.iter().enumerate() {
            cross += ap * bq * g[(p, q)] * g[(p, q)];
        }
    }
    root(aa + bb - 2.0 * cross, aa + bb)
}

/// `‖A_α^t − A_β^t‖_F` by explicit matrix powers.
pub fn direct_global_distance(a: &DiffusionMatrix, b: &DiffusionMatrix, t: u32) -> Result<f64> {
    check_same_n(a.len(), b.len())?;
    let pa = matrix_power(a, t)?;
    let pb = matrix_power(b, t)?;
    Ok(frobenius_difference(&pa, &pb))
}

pub(crate) fn frobenius_difference(pa: &Mat<f64>, pb: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..pa.ncols() {
        for i in 0..pa.nrows() {
            let d = pa[(i, j)] - pb[(i, j)];
            s += d * d;
        }
    }
    s.sqrt()
}

/// `lim_{t→∞} 𝒟^(t)(Γ_α, Γ_β) = √(2(1 − g²))` with `g` the empirical inner
/// product of the two top eigenfunctions.
pub fn asymptotic_global_distance(dec_a: &SpectralDecomposition, dec_b: &SpectralDecomposition) -> Result<f64> {
    check_same_n(dec_a.n(), dec_b.n())?;
    check_connected(dec_a, "first")?;
    check_connected(dec_b, "second")?;
    let g = empirical_dot(dec_a.eigenfunction(0), dec_b.eigenfunction(0));
    Ok((2.0 * (1.0 - g * g)).max(0.0).sqrt())
}

/// Diffusion distance between graphs of possibly different sizes that share
/// the points `S`, integrating only over `S` with weight `1/|S|` per point.
///
/// `common_a[s]` and `common_b[s]` are the positions of the same underlying
/// point in the two graphs.
pub fn subgraph_diffusion_distance(
    a: &DiffusionMatrix,
    b: &DiffusionMatrix,
    common_a: &[usize],
    common_b: &[usize],
    i: usize,
    j: usize,
    t: u32,
) -> Result<f64> {
    if common_a.is_empty() {
        return Err(Error::InvalidInput("shared point set is empty".into()));
    }
    if common_a.len() != common_b.len() {
        return Err(Error::Correspondence {
            left: common_a.len(),
            right: common_b.len(),
        });
    }
    for &s in common_a {
        check_index(s, a.len())?;
    }
    for &s in common_b {
        check_index(s, b.len())?;
    }
    let ra = kernel_power_row(a, t, i)?;
    let rb = kernel_power_row(b, t, j)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let s: f64 = common_a
        .iter()
        .zip(common_b)
        .map(|(&sa, &sb)| {
            let d = na * ra[sa] - nb * rb[sb];
            d * d
        })
        .sum();
    Ok((s / common_a.len() as f64).sqrt())
}

/// Upper bound on `|D²_full − D²_k|` when both decompositions are cut to
/// their leading `rank` pairs.
///
/// With `ε = max_{ℓ>k} ‖ψ_ℓ‖∞² Σ_{ℓ>k} λ_ℓ^{2t}` for each graph and
/// `δ = √ε_α + √ε_β`, the dropped tails move each embedded kernel row by at
/// most `√ε`, so the bound is `2 D_k δ + δ²`.
pub fn truncation_bound(
    full_a: &SpectralDecomposition,
    full_b: &SpectralDecomposition,
    rank: usize,
    t: u32,
    truncated_distance: f64,
) -> Result<f64> {
    check_time(t)?;
    let tail = |dec: &SpectralDecomposition| -> Result<f64> {
        if rank == 0 || rank > dec.rank() {
            return Err(Error::InvalidInput(format!(
                "rank {rank} exceeds decomposition rank {}",
                dec.rank()
            )));
        }
        let mut sup = 0.0f64;
        let mut mass = 0.0;
        for l in rank..dec.rank() {
            mass += dec.eigenvalues()[l].powi(2 * t as i32);
            for v in dec.eigenfunction(l) {
                sup = sup.max(v * v);
            }
        }
        Ok(sup * mass)
    };
    let delta = tail(full_a)?.sqrt() + tail(full_b)?.sqrt();
    Ok(2.0 * truncated_distance * delta + delta * delta)
}

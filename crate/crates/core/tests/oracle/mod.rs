//! Reference computations on nalgebra, written straight from the definitions
//! with no spectral machinery.

#![allow(dead_code)]

use dynamap::kernels::KernelMatrix;
use dynamap::Mat;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric kernel with unit diagonal and off-diagonal entries in `[lo, 1)`.
pub fn random_kernel_values(n: usize, lo: f64, rng: &mut ChaCha8Rng) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = if i == j { 1.0 } else { rng.random_range(lo..1.0) };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn random_kernel(n: usize, rng: &mut ChaCha8Rng) -> KernelMatrix {
    KernelMatrix::new(random_kernel_values(n, 0.05, rng)).unwrap()
}

pub fn to_na(m: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `D^{-1/2} K D^{-1/2}`.
pub fn symmetric_diffusion(k: &DMatrix<f64>) -> DMatrix<f64> {
    let d: Vec<f64> = (0..k.nrows()).map(|i| k.row(i).sum()).collect();
    DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| k[(i, j)] / (d[i] * d[j]).sqrt())
}

pub fn power(a: &DMatrix<f64>, t: u32) -> DMatrix<f64> {
    let mut p = DMatrix::identity(a.nrows(), a.ncols());
    for _ in 0..t {
        p = &p * a;
    }
    p
}

/// `sqrt(n Σ_k (A_a^t[i,k] − A_b^t[j,k])²)` from precomputed powers.
pub fn pointwise(pa: &DMatrix<f64>, pb: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let n = pa.nrows() as f64;
    let s: f64 = (0..pa.ncols()).map(|k| (pa[(i, k)] - pb[(j, k)]).powi(2)).sum();
    (n * s).sqrt()
}

/// Frobenius norm of `A_a^t − A_b^t`.
pub fn global(pa: &DMatrix<f64>, pb: &DMatrix<f64>) -> f64 {
    (pa - pb).norm()
}

/// Quadrature over the shared points only, weight `1/|S|`.
pub fn subgraph(pa: &DMatrix<f64>, pb: &DMatrix<f64>, sa: &[usize], sb: &[usize], i: usize, j: usize) -> f64 {
    let (na, nb) = (pa.nrows() as f64, pb.nrows() as f64);
    let s: f64 = sa
        .iter()
        .zip(sb)
        .map(|(&x, &y)| (na * pa[(i, x)] - nb * pb[(j, y)]).powi(2))
        .sum();
    (s / sa.len() as f64).sqrt()
}

/// Haar-ish random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

//! Diffusion maps and the rotations that put them in shared coordinates.

use faer::Mat;

use crate::diffusion_operator::SpectralDecomposition;
use crate::distances::{diffusion_distance, gram_matrix, isometry_defect};
use crate::error::{check_index, Error, Result};

/// Rows are samples, `coords[(x, i)] = λ_i^t ψ_i(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionEmbedding {
    pub coords: Mat<f64>,
    pub t: u32,
    /// Position of the source graph in its family, when there is one.
    pub source: Option<usize>,
}

impl DiffusionEmbedding {
    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn point(&self, x: usize) -> Vec<f64> {
        (0..self.dim()).map(|k| self.coords[(x, k)]).collect()
    }

    /// Euclidean distance between row `x` of `self` and row `y` of `other`.
    pub fn distance_to(&self, x: usize, other: &DiffusionEmbedding, y: usize) -> Result<f64> {
        check_index(x, self.len())?;
        check_index(y, other.len())?;
        if self.dim() != other.dim() {
            return Err(Error::InvalidInput(format!(
                "embeddings have dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok((0..self.dim())
            .map(|k| {
                let d = self.coords[(x, k)] - other.coords[(y, k)];
                d * d
            })
            .sum::<f64>()
            .sqrt())
    }
}

pub fn diffusion_map(dec: &SpectralDecomposition, t: u32) -> Result<DiffusionEmbedding> {
    if t == 0 {
        return Err(Error::InvalidInput("diffusion time must be ≥ 1".into()));
    }
    let lt: Vec<f64> = dec.eigenvalues().iter().map(|l| l.powi(t as i32)).collect();
    let psi = dec.eigenfunctions();
    Ok(DiffusionEmbedding {
        coords: Mat::from_fn(psi.nrows(), psi.ncols(), |x, k| lt[k] * psi[(x, k)]),
        t,
        source: None,
    })
}

/// Change of basis from one eigenbasis (or any orthonormal family) to another.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationOperator {
    /// `k_target × k_source`.
    pub matrix: Mat<f64>,
    pub source: Option<usize>,
    pub target: Option<usize>,
}

impl RotationOperator {
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.matrix.ncols() {
            return Err(Error::InvalidInput(format!(
                "vector of length {} for rotation with {} source coordinates",
                v.len(),
                self.matrix.ncols()
            )));
        }
        Ok((0..self.matrix.nrows())
            .map(|i| (0..v.len()).map(|j| self.matrix[(i, j)] * v[j]).sum())
            .collect())
    }

    /// Rotates every row of an embedding.
    pub fn rotate(&self, emb: &DiffusionEmbedding) -> Result<DiffusionEmbedding> {
        if emb.dim() != self.matrix.ncols() {
            return Err(Error::InvalidInput(format!(
                "embedding of dimension {} for rotation with {} source coordinates",
                emb.dim(),
                self.matrix.ncols()
            )));
        }
        Ok(DiffusionEmbedding {
            coords: &emb.coords * self.matrix.transpose(),
            t: emb.t,
            source: emb.source,
        })
    }

    /// `max |RᵀR − I|`; nonzero when the target basis is truncated.
    pub fn isometry_defect(&self) -> f64 {
        isometry_defect(&self.matrix)
    }
}

/// `O_{source→target}`, the Gram matrix of the target basis against the source basis.
pub fn rotation(dec_target: &SpectralDecomposition, dec_source: &SpectralDecomposition) -> Result<RotationOperator> {
    let g = gram_matrix(dec_target, dec_source)?;
    Ok(RotationOperator {
        matrix: g.matrix().clone(),
        source: None,
        target: None,
    })
}

/// Diffusion maps of every family member, rotated into the eigenbasis of member `gamma`.
pub fn common_embedding(family: &[SpectralDecomposition], gamma: usize, t: u32) -> Result<Vec<DiffusionEmbedding>> {
    check_index(gamma, family.len())?;
    let base = &family[gamma];
    family
        .iter()
        .enumerate()
        .map(|(alpha, dec)| {
            let mut r = rotation(base, dec)?;
            r.source = Some(alpha);
            r.target = Some(gamma);
            let mut emb = r.rotate(&diffusion_map(dec, t)?)?;
            emb.source = Some(alpha);
            Ok(emb)
        })
        .collect()
}

/// Worst discrepancy, per family member `α`, between common-embedding
/// distances `‖O_{α→γ}Ψ_α(x) − Ψ_γ(y)‖` and `D^(t)(x_α, y_γ)` over the
/// probe points. Zero up to roundoff with complete bases.
pub fn embedding_residuals(
    family: &[SpectralDecomposition],
    gamma: usize,
    t: u32,
    probe: &[usize],
) -> Result<Vec<f64>> {
    let embedded = common_embedding(family, gamma, t)?;
    let base = &family[gamma];
    family
        .iter()
        .zip(&embedded)
        .map(|(dec, emb)| {
            let g = gram_matrix(dec, base)?;
            let mut worst = 0.0f64;
            for &x in probe {
                for &y in probe {
                    let rotated = emb.distance_to(x, &embedded[gamma], y)?;
                    let exact = diffusion_distance(dec, base, &g, x, y, t)?;
                    worst = worst.max((rotated - exact).abs());
                }
            }
            Ok(worst)
        })
        .collect()
}

/// Rotation onto a basis of functions on the shared points `S`.
///
/// `basis` is `|S| × |S|`; column `i` holds `e_i` evaluated at the shared
/// points in the order of `s_indices`, orthonormal under weight `1/|S|` per
/// point. Returns `R[i,j] = (1/|S|) Σ_s e_i(s) ψ_j(s)`.
pub fn subgraph_rotation(dec: &SpectralDecomposition, s_indices: &[usize], basis: &Mat<f64>) -> Result<RotationOperator> {
    let m = s_indices.len();
    if m == 0 {
        return Err(Error::InvalidInput("shared point set is empty".into()));
    }
    if basis.nrows() != m || basis.ncols() != m {
        return Err(Error::InvalidInput(format!(
            "basis must be {m}x{m}, got {}x{}",
            basis.nrows(),
            basis.ncols()
        )));
    }
    for &s in s_indices {
        check_index(s, dec.n())?;
    }
    let mut gram = basis.transpose() * basis;
    gram.for_each_mut(|v| *v /= m as f64);
    let defect = isometry_defect_of_gram(&gram);
    if defect > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "basis is not orthonormal on the shared points (defect {defect:e})"
        )));
    }
    let psi = dec.eigenfunctions();
    let restricted = Mat::from_fn(m, dec.rank(), |r, j| psi[(s_indices[r], j)]);
    let mut r = basis.transpose() * &restricted;
    r.for_each_mut(|v| *v /= m as f64);
    Ok(RotationOperator {
        matrix: r,
        source: None,
        target: None,
    })
}

fn isometry_defect_of_gram(gram: &Mat<f64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..gram.ncols() {
        for i in 0..gram.nrows() {
            let id = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - id).abs());
        }
    }
    worst
}

/// Scaled indicator functions `√|S| · 1_{s}`.
pub fn canonical_subgraph_basis(size: usize) -> Mat<f64> {
    let s = (size as f64).sqrt();
    Mat::from_fn(size, size, |i, j| if i == j { s } else { 0.0 })
}

/// Eigenfunctions of a reference graph restricted to `S`, orthonormalized
/// under the renormalized measure and completed with indicator functions.
pub fn reference_subgraph_basis(reference: &SpectralDecomposition, s_indices: &[usize]) -> Result<Mat<f64>> {
    let m = s_indices.len();
    if m == 0 {
        return Err(Error::InvalidInput("shared point set is empty".into()));
    }
    for &s in s_indices {
        check_index(s, reference.n())?;
    }
    let psi = reference.eigenfunctions();
    let mut candidates: Vec<Vec<f64>> = (0..reference.rank())
        .map(|j| s_indices.iter().map(|&s| psi[(s, j)]).collect())
        .collect();
    candidates.extend((0..m).map(|i| {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        e
    }));

    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / m as f64;
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(m);
    for mut v in candidates {
        if kept.len() == m {
            break;
        }
        let before = dot(&v, &v).sqrt();
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for q in &kept {
                let c = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 * before.max(1e-300) && norm > 1e-12 {
            v.iter_mut().for_each(|a| *a /= norm);
            kept.push(v);
        }
    }
    if kept.len() != m {
        return Err(Error::Numerical("failed to complete the subgraph basis".into()));
    }
    Ok(Mat::from_fn(m, m, |r, c| kept[c][r]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion_operator::{diffusion_matrix, spectral_decomposition, DiffusionMatrix};
    use crate::distances::{direct_diffusion_distance, subgraph_diffusion_distance};
    use crate::kernels::KernelMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, rng: &mut ChaCha8Rng) -> DiffusionMatrix {
        let mut m = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = if i == j { 1.0 } else { rng.random_range(0.05..1.0) };
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        diffusion_matrix(&KernelMatrix::new(m).unwrap()).unwrap()
    }

    fn full(a: &DiffusionMatrix) -> SpectralDecomposition {
        spectral_decomposition(a, a.len()).unwrap()
    }

    #[test]
    fn all_ones_map() {
        let a = diffusion_matrix(&KernelMatrix::new(Mat::from_fn(2, 2, |_, _| 1.0)).unwrap()).unwrap();
        let emb = diffusion_map(&full(&a), 1).unwrap();
        for x in 0..2 {
            assert!((emb.coords[(x, 0)] - 1.0).abs() < 1e-12);
            assert!(emb.coords[(x, 1)].abs() < 1e-12);
        }
    }

    #[test]
    fn map_realizes_within_graph_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_graph(5, &mut rng);
        let d = full(&a);
        let emb = diffusion_map(&d, 2).unwrap();
        for k in 0..5 {
            let m2: f64 = (0..5).map(|x| emb.coords[(x, k)].powi(2)).sum::<f64>() / 5.0;
            assert!((m2 - d.eigenvalues()[k].powi(4)).abs() < 1e-10);
        }
        for x in 0..5 {
            for y in 0..5 {
                let e = emb.distance_to(x, &emb, y).unwrap();
                let direct = direct_diffusion_distance(&a, &a, x, y, 2).unwrap();
                assert!((e - direct).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rotation_is_an_isometry_at_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (a, b) = (random_graph(6, &mut rng), random_graph(6, &mut rng));
        let (da, db) = (full(&a), full(&b));
        let same = rotation(&da, &da).unwrap();
        assert!(same.isometry_defect() < 1e-10);
        for i in 0..6 {
            assert!((same.matrix[(i, i)] - 1.0).abs() < 1e-10);
        }
        let r = rotation(&da, &db).unwrap();
        for _ in 0..100 {
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rv = r.apply(&v).unwrap();
            let (n1, n2): (f64, f64) = (v.iter().map(|x| x * x).sum(), rv.iter().map(|x| x * x).sum());
            assert!((n1.sqrt() - n2.sqrt()).abs() < 1e-8);
        }
        let truncated = rotation(&da.truncated(3).unwrap(), &db).unwrap();
        assert!(truncated.isometry_defect() > 1e-6);
    }

    #[test]
    fn common_embedding_realizes_cross_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let graphs: Vec<DiffusionMatrix> = (0..3).map(|_| random_graph(6, &mut rng)).collect();
        let family: Vec<SpectralDecomposition> = graphs.iter().map(full).collect();
        let emb = common_embedding(&family, 1, 1).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for x in 0..6 {
                    for y in 0..6 {
                        let e = emb[a].distance_to(x, &emb[b], y).unwrap();
                        let d = direct_diffusion_distance(&graphs[a], &graphs[b], x, y, 1).unwrap();
                        assert!((e - d).abs() < 1e-8);
                    }
                }
            }
        }
        let residuals = embedding_residuals(&family, 0, 1, &[0, 3, 5]).unwrap();
        assert!(residuals.iter().all(|r| *r < 1e-8));

        let alone = common_embedding(&family[..1], 0, 2).unwrap();
        let plain = diffusion_map(&family[0], 2).unwrap();
        for x in 0..6 {
            for k in 0..6 {
                assert!((alone[0].coords[(x, k)] - plain.coords[(x, k)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn truncated_family_reports_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let family: Vec<SpectralDecomposition> = (0..2)
            .map(|_| spectral_decomposition(&random_graph(8, &mut rng), 2).unwrap())
            .collect();
        let residuals = embedding_residuals(&family, 0, 1, &[0, 1, 2]).unwrap();
        assert!(residuals[0] < 1e-7);
        assert!(residuals[1] > 0.0);
    }

    #[test]
    fn canonical_basis_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let d = full(&random_graph(5, &mut rng));
        let s: Vec<usize> = (0..5).collect();
        let r = subgraph_rotation(&d, &s, &canonical_subgraph_basis(5)).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = d.eigenfunctions()[(i, j)] / 5f64.sqrt();
                assert!((r.matrix[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_subgraph_with_reference_basis_is_plain_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let (g, h) = (full(&random_graph(5, &mut rng)), full(&random_graph(5, &mut rng)));
        let s: Vec<usize> = (0..5).collect();
        let r = subgraph_rotation(&h, &s, g.eigenfunctions()).unwrap();
        let plain = rotation(&g, &h).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((r.matrix[(i, j)] - plain.matrix[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn subgraph_identity_across_graph_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (a, b) = (random_graph(6, &mut rng), random_graph(5, &mut rng));
        let (da, db) = (full(&a), full(&b));
        let sa = [1, 2, 4, 5];
        let sb = [0, 3, 2, 4];
        for basis in [
            canonical_subgraph_basis(4),
            reference_subgraph_basis(&da, &sa).unwrap(),
        ] {
            let ra = subgraph_rotation(&da, &sa, &basis).unwrap();
            let rb = subgraph_rotation(&db, &sb, &basis).unwrap();
            let ea = ra.rotate(&diffusion_map(&da, 2).unwrap()).unwrap();
            let eb = rb.rotate(&diffusion_map(&db, 2).unwrap()).unwrap();
            for x in 0..6 {
                for y in 0..5 {
                    let e = ea.distance_to(x, &eb, y).unwrap();
                    let d = subgraph_diffusion_distance(&a, &b, &sa, &sb, x, y, 2).unwrap();
                    assert!((e - d).abs() < 1e-8, "{e} vs {d}");
                }
            }
        }
    }

    #[test]
    fn non_orthonormal_basis_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let d = full(&random_graph(4, &mut rng));
        let bad = Mat::from_fn(2, 2, |_, _| 1.0);
        assert!(matches!(subgraph_rotation(&d, &[0, 1], &bad), Err(Error::InvalidInput(_))));
    }
}

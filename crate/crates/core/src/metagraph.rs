//! Second-level graphs: one node per graph in a family (the meta graph),
//! or one node per point-parameter pair (the historical graph).

use faer::Mat;

use crate::diffusion_operator::{diffusion_matrix, matrix_power, spectral_decomposition, DiffusionMatrix, SpectralDecomposition};
use crate::distances::{distance_matrix, gram_matrix};
use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median of the off-diagonal distances.
    Median,
}

/// Gaussian kernel over a family of graphs, `exp(−𝒟²/ε²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaGraph {
    pub kernel: KernelMatrix,
    pub epsilon: f64,
    /// Diffusion time of the global distances the kernel was built from.
    pub t: u32,
}

impl MetaGraph {
    pub fn len(&self) -> usize {
        self.kernel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernel.is_empty()
    }

    pub fn diffusion_matrix(&self) -> Result<DiffusionMatrix> {
        diffusion_matrix(&self.kernel)
    }

    /// Second eigenvalue of the meta diffusion matrix.
    pub fn second_eigenvalue(&self) -> Result<f64> {
        if self.len() < 2 {
            return Err(Error::InvalidInput("meta graph needs at least two graphs".into()));
        }
        let top = crate::diffusion_operator::top_eigenvalues(&self.diffusion_matrix()?, 2)?;
        Ok(top[1])
    }
}

fn validate_distances(d: &Mat<f64>) -> Result<()> {
    let m = d.nrows();
    if m == 0 || d.ncols() != m {
        return Err(Error::InvalidInput(format!(
            "distance matrix must be square and non-empty, got {}x{}",
            d.nrows(),
            d.ncols()
        )));
    }
    for j in 0..m {
        if d[(j, j)] != 0.0 {
            return Err(Error::InvalidInput(format!("distance matrix has nonzero diagonal at {j}")));
        }
        for i in 0..m {
            let v = d[(i, j)];
            if !(v.is_finite() && v >= 0.0) || (v - d[(j, i)]).abs() > 1e-12 * (1.0 + v) {
                return Err(Error::InvalidInput(format!(
                    "distance matrix is not symmetric, finite and nonnegative at ({i},{j})"
                )));
            }
        }
    }
    Ok(())
}

pub(crate) fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Builds the meta graph from a matrix of pairwise global distances at time `t`.
pub fn meta_kernel(distances: &Mat<f64>, bandwidth: Bandwidth, t: u32) -> Result<MetaGraph> {
    validate_distances(distances)?;
    let m = distances.nrows();
    let epsilon = match bandwidth {
        Bandwidth::Fixed(e) => {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidInput(format!("bandwidth must be positive, got {e}")));
            }
            e
        }
        Bandwidth::Median => {
            let off: Vec<f64> = (0..m)
                .flat_map(|j| (0..m).filter(move |&i| i != j).map(move |i| (i, j)))
                .map(|(i, j)| distances[(i, j)])
                .collect();
            if off.is_empty() {
                return Err(Error::Degenerate("a single graph has no pairwise distances".into()));
            }
            let med = median(off);
            if med <= 0.0 {
                return Err(Error::Degenerate(
                    "median global distance is zero; the bandwidth is undefined".into(),
                ));
            }
            med
        }
    };
    let kernel = Mat::from_fn(m, m, |i, j| {
        let d = distances[(i.min(j), i.max(j))];
        (-(d * d) / (epsilon * epsilon)).exp()
    });
    Ok(MetaGraph {
        kernel: KernelMatrix::new(kernel)?,
        epsilon,
        t,
    })
}

/// Coordinates of a second-level diffusion map.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaEmbedding {
    /// One row per node, `coords[(α, k)] = λ_k^s ψ_k(α)`.
    pub coords: Mat<f64>,
    /// Eigenvalues of the columns, in order.
    pub eigenvalues: Vec<f64>,
}

fn embed_kernel(kernel: &KernelMatrix, s: f64, dims: usize, keep_trivial: bool) -> Result<MetaEmbedding> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidInput(format!("diffusion time s must be positive, got {s}")));
    }
    let skip = usize::from(!keep_trivial);
    let needed = dims + skip;
    if dims == 0 || needed > kernel.len() {
        return Err(Error::InvalidInput(format!(
            "cannot take {dims} coordinates from a graph of {} nodes{}",
            kernel.len(),
            if keep_trivial { "" } else { " after dropping the trivial pair" }
        )));
    }
    let a = diffusion_matrix(kernel)?;
    let dec = spectral_decomposition(&a, needed)?;
    let integer = s.fract() == 0.0 && s <= i32::MAX as f64;
    let mut weights = Vec::with_capacity(dims);
    for &l in &dec.eigenvalues()[skip..] {
        let w = if integer {
            l.powi(s as i32)
        } else if l >= 0.0 {
            l.powf(s)
        } else if l >= -1e-10 {
            0.0
        } else {
            return Err(Error::Numerical(format!(
                "eigenvalue {l} is negative; real power {s} is undefined"
            )));
        };
        weights.push(w);
    }
    let psi = dec.eigenfunctions();
    Ok(MetaEmbedding {
        coords: Mat::from_fn(psi.nrows(), dims, |r, k| weights[k] * psi[(r, k + skip)]),
        eigenvalues: dec.eigenvalues()[skip..].to_vec(),
    })
}

/// Diffusion map of the meta graph at (possibly fractional) time `s`.
/// With `keep_trivial` the constant-like top pair is the first coordinate.
pub fn meta_embedding(meta: &MetaGraph, s: f64, dims: usize, keep_trivial: bool) -> Result<MetaEmbedding> {
    embed_kernel(&meta.kernel, s, dims, keep_trivial)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HistoricalVariant {
    /// `exp(−D^(t)(x_α, y_β)/ε)`; the distance enters unsquared.
    Exponential { epsilon: f64 },
    /// `n · (A_α^t A_β^t)[x, y]`, the empirical inner product of the two kernel rows.
    InnerProduct,
}

/// Kernel over all point-parameter pairs. Node `α·n + x` is point `x` under parameter `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalGraph {
    pub kernel: Mat<f64>,
    pub variant: HistoricalVariant,
    pub t: u32,
    pub points: usize,
    pub parameters: usize,
}

impl HistoricalGraph {
    pub fn node(&self, parameter: usize, point: usize) -> usize {
        parameter * self.points + point
    }
}

/// Builds the historical graph of a family.
///
/// The exponential variant reads distances from `decompositions`; the inner
/// product variant reads only `matrices`, and `decompositions` may be empty.
pub fn historical_kernel(
    matrices: &[DiffusionMatrix],
    decompositions: &[SpectralDecomposition],
    t: u32,
    variant: HistoricalVariant,
) -> Result<HistoricalGraph> {
    if t == 0 {
        return Err(Error::InvalidInput("diffusion time must be ≥ 1".into()));
    }
    let (params, n) = match variant {
        HistoricalVariant::Exponential { epsilon } => {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::InvalidInput(format!("bandwidth must be positive, got {epsilon}")));
            }
            let first = decompositions
                .first()
                .ok_or_else(|| Error::InvalidInput("family is empty".into()))?;
            (decompositions.len(), first.n())
        }
        HistoricalVariant::InnerProduct => {
            let first = matrices
                .first()
                .ok_or_else(|| Error::InvalidInput("family is empty".into()))?;
            (matrices.len(), first.len())
        }
    };
    let mut kernel = Mat::<f64>::zeros(params * n, params * n);
    match variant {
        HistoricalVariant::Exponential { epsilon } => {
            for (b, db) in decompositions.iter().enumerate() {
                if db.n() != n {
                    return Err(Error::Correspondence { left: n, right: db.n() });
                }
                for (a, da) in decompositions.iter().enumerate().take(b + 1) {
                    let g = gram_matrix(da, db)?;
                    let d = distance_matrix(da, db, &g, t)?;
                    for y in 0..n {
                        for x in 0..n {
                            let dist = if a == b && x == y { 0.0 } else { d[(x, y)] };
                            let v = (-dist / epsilon).exp();
                            kernel[(a * n + x, b * n + y)] = v;
                            kernel[(b * n + y, a * n + x)] = v;
                        }
                    }
                }
            }
        }
        HistoricalVariant::InnerProduct => {
            let powers = matrices
                .iter()
                .map(|m| {
                    if m.len() != n {
                        return Err(Error::Correspondence { left: n, right: m.len() });
                    }
                    matrix_power(m, t)
                })
                .collect::<Result<Vec<_>>>()?;
            for b in 0..params {
                for a in 0..=b {
                    let prod = &powers[a] * &powers[b];
                    for y in 0..n {
                        for x in 0..n {
                            let v = n as f64 * prod[(x, y)];
                            kernel[(a * n + x, b * n + y)] = v;
                            kernel[(b * n + y, a * n + x)] = v;
                        }
                    }
                }
            }
        }
    }
    Ok(HistoricalGraph {
        kernel,
        variant,
        t,
        points: n,
        parameters: params,
    })
}

/// Path of one point through the historical embedding, one row per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub point: usize,
    pub coords: Mat<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalEmbedding {
    pub embedding: MetaEmbedding,
    pub trajectories: Vec<Trajectory>,
}

pub fn historical_embedding(h: &HistoricalGraph, s: f64, dims: usize, keep_trivial: bool) -> Result<HistoricalEmbedding> {
    let kernel = KernelMatrix::new(h.kernel.clone())?;
    let embedding = embed_kernel(&kernel, s, dims, keep_trivial)?;
    let trajectories = (0..h.points)
        .map(|x| Trajectory {
            point: x,
            coords: Mat::from_fn(h.parameters, dims, |a, k| embedding.coords[(h.node(a, x), k)]),
        })
        .collect();
    Ok(HistoricalEmbedding {
        embedding,
        trajectories,
    })
}

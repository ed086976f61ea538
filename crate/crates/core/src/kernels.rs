//! Point clouds, affinity kernels and bandwidth calibration.

use faer::Mat;

use crate::diffusion_operator::{diffusion_matrix, top_eigenvalues};
use crate::error::{Error, Result};

/// `n` points in `ℝ^d`, stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Mat<f64>,
}

impl PointCloud {
    /// Wraps an `n × d` coordinate matrix. Requires `n ≥ 2`, `d ≥ 1` and
    /// finite coordinates.
    pub fn new(coords: Mat<f64>) -> Result<Self> {
        if coords.nrows() < 2 {
            return Err(Error::InvalidInput(format!(
                "a point cloud needs at least 2 points, got {}",
                coords.nrows()
            )));
        }
        if coords.ncols() == 0 {
            return Err(Error::InvalidInput("points must have dimension ≥ 1".into()));
        }
        for j in 0..coords.ncols() {
            for i in 0..coords.nrows() {
                if !coords[(i, j)].is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite coordinate at point {i}, axis {j}"
                    )));
                }
            }
        }
        Ok(Self { coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::InvalidInput(format!(
                "point {i} has dimension {}, expected {d}",
                r.len()
            )));
        }
        Self::new(Mat::from_fn(rows.len(), d, |i, j| rows[i][j]))
    }

    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &Mat<f64> {
        &self.coords
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        (0..self.dim()).map(|j| self.coords[(i, j)]).collect()
    }

    /// Sub-cloud made of the listed points, in the listed order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            crate::error::check_index(i, self.len())?;
        }
        Self::new(Mat::from_fn(indices.len(), self.dim(), |r, j| {
            self.coords[(indices[r], j)]
        }))
    }

    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        (0..self.dim())
            .map(|c| {
                let d = self.coords[(i, c)] - self.coords[(j, c)];
                d * d
            })
            .sum()
    }
}

/// Symmetric nonnegative affinity matrix for one parameter.
///
/// Gaussian kernels are strictly positive in exact arithmetic; for very small
/// bandwidths far pairs underflow to zero, so only nonnegativity and positive
/// degrees are enforced here. [`KernelMatrix::is_connected`] reports whether
/// the affinity graph is still connected.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: Mat<f64>,
}

impl KernelMatrix {
    pub fn new(values: Mat<f64>) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "kernel must be square and non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for j in 0..n {
            for i in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "kernel entry ({i},{j}) = {v} is not a finite nonnegative number"
                    )));
                }
                if v != values[(j, i)] {
                    return Err(Error::InvalidInput(format!(
                        "kernel is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> &Mat<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.values
    }

    pub fn is_strictly_positive(&self) -> bool {
        let n = self.len();
        (0..n).all(|j| (0..n).all(|i| self.values[(i, j)] > 0.0))
    }

    /// Connectivity of the graph whose edges are the positive entries.
    pub fn is_connected(&self) -> bool {
        is_connected(&self.values)
    }
}

pub(crate) fn is_connected(m: &Mat<f64>) -> bool {
    let n = m.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && m[(i, j)] > 0.0 {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == n
}

/// `k[i,j] = exp(−‖x_i − x_j‖² / ε²)`; the upper triangle is mirrored so the
/// result is exactly symmetric with unit diagonal.
pub fn gaussian_kernel(cloud: &PointCloud, epsilon: f64) -> Result<KernelMatrix> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidInput(format!(
            "kernel bandwidth must be positive and finite, got {epsilon}"
        )));
    }
    let n = cloud.len();
    let inv = 1.0 / (epsilon * epsilon);
    let mut k = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = 1.0;
        for i in 0..j {
            let v = (-cloud.squared_distance(i, j) * inv).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(KernelMatrix { values: k })
}

/// Median over all unordered pairs `i < j` of `‖x_i − x_j‖`.
pub fn median_pairwise_distance(cloud: &PointCloud) -> f64 {
    let n = cloud.len();
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for j in 0..n {
        for i in 0..j {
            d.push(cloud.squared_distance(i, j));
        }
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    m.sqrt()
}

/// Second-largest eigenvalue of the symmetric diffusion matrix built from
/// `gaussian_kernel(cloud, epsilon)`.
pub fn second_eigenvalue(cloud: &PointCloud, epsilon: f64) -> Result<f64> {
    let a = diffusion_matrix(&gaussian_kernel(cloud, epsilon)?)?;
    Ok(top_eigenvalues(&a, 2)?[1])
}

/// Search settings for [`calibrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    /// Accepted distance between the achieved and the target `λ₂`.
    pub tol: f64,
    /// Initial bracket is `[median · 1/spread, median · spread]`.
    pub initial_spread: f64,
    /// Each side of the bracket may grow tenfold this many times.
    pub max_expansions: usize,
    /// Points of the log-spaced scan used when bisection finds a
    /// non-monotone stretch.
    pub grid_points: usize,
    pub max_iterations: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            initial_spread: 1e2,
            max_expansions: 4,
            grid_points: 64,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub epsilon: f64,
    pub lambda2: f64,
    /// Number of diffusion matrices whose spectrum was computed.
    pub evaluations: usize,
}

/// Gaussian bandwidth whose diffusion matrix has `|λ₂ − target| ≤ tol`.
pub fn calibrate_epsilon(cloud: &PointCloud, target_lambda2: f64, tol: f64) -> Result<f64> {
    let opts = CalibrationOptions {
        tol,
        ..Default::default()
    };
    Ok(calibrate(cloud, target_lambda2, &opts)?.epsilon)
}

/// Bisection on `log ε`.
///
/// `λ₂(ε)` decreases from 1 (ε → 0, the kernel tends to the identity) to 0
/// (ε → ∞, the kernel tends to a rank-one matrix), so any bracket whose end
/// values straddle the target contains a solution. If a midpoint falls
/// outside the range of its bracket ends, the bracket is rescanned on a
/// log-spaced grid and bisection resumes on the first crossing cell.
pub fn calibrate(
    cloud: &PointCloud,
    target_lambda2: f64,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    if !(target_lambda2 > 0.0 && target_lambda2 < 1.0) {
        return Err(Error::InvalidInput(format!(
            "target lambda2 must lie in (0, 1), got {target_lambda2}"
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "calibration tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let median = median_pairwise_distance(cloud);
    if !(median > 0.0) {
        return Err(Error::Degenerate(
            "median pairwise distance is zero; bandwidth cannot be calibrated".into(),
        ));
    }

    let evaluations = std::cell::Cell::new(0usize);
    let eval = |eps: f64| -> Result<f64> {
        evaluations.set(evaluations.get() + 1);
        second_eigenvalue(cloud, eps)
    };

    let mut lo = median / opts.initial_spread;
    let mut hi = median * opts.initial_spread;
    let mut f_lo = eval(lo)?;
    let mut f_hi = eval(hi)?;
    let mut seen_min = f_lo.min(f_hi);
    let mut seen_max = f_lo.max(f_hi);
    let mut expansions = 0;
    while !brackets(f_lo, f_hi, target_lambda2) {
        if expansions == opts.max_expansions {
            return Err(Error::Calibration {
                target: target_lambda2,
                min_lambda2: seen_min,
                max_lambda2: seen_max,
            });
        }
        lo /= 10.0;
        hi *= 10.0;
        f_lo = eval(lo)?;
        f_hi = eval(hi)?;
        seen_min = seen_min.min(f_lo.min(f_hi));
        seen_max = seen_max.max(f_lo.max(f_hi));
        expansions += 1;
    }

    for (eps, f) in [(lo, f_lo), (hi, f_hi)] {
        if (f - target_lambda2).abs() <= opts.tol {
            return Ok(Calibration {
                epsilon: eps,
                lambda2: f,
                evaluations: evaluations.get(),
            });
        }
    }

    let mut rescanned = false;
    for _ in 0..opts.max_iterations {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        let f_mid = eval(mid)?;
        seen_min = seen_min.min(f_mid);
        seen_max = seen_max.max(f_mid);
        if (f_mid - target_lambda2).abs() <= opts.tol {
            return Ok(Calibration {
                epsilon: mid,
                lambda2: f_mid,
                evaluations: evaluations.get(),
            });
        }
        let monotone = f_mid >= f_lo.min(f_hi) && f_mid <= f_lo.max(f_hi);
        if !monotone && !rescanned {
            rescanned = true;
            let ratio = (hi / lo).powf(1.0 / (opts.grid_points - 1) as f64);
            let mut prev = (lo, f_lo);
            let mut cell = None;
            for g in 1..opts.grid_points {
                let eps = if g + 1 == opts.grid_points {
                    hi
                } else {
                    lo * ratio.powi(g as i32)
                };
                let f = if g + 1 == opts.grid_points { f_hi } else { eval(eps)? };
                seen_min = seen_min.min(f);
                seen_max = seen_max.max(f);
                if (f - target_lambda2).abs() <= opts.tol {
                    return Ok(Calibration {
                        epsilon: eps,
                        lambda2: f,
                        evaluations: evaluations.get(),
                    });
                }
                if brackets(prev.1, f, target_lambda2) {
                    cell = Some((prev, (eps, f)));
                    break;
                }
                prev = (eps, f);
            }
            let ((a, fa), (b, fb)) = cell.ok_or(Error::Calibration {
                target: target_lambda2,
                min_lambda2: seen_min,
                max_lambda2: seen_max,
            })?;
            (lo, f_lo, hi, f_hi) = (a, fa, b, fb);
            continue;
        }
        if brackets(f_lo, f_mid, target_lambda2) {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Err(Error::Calibration {
        target: target_lambda2,
        min_lambda2: seen_min,
        max_lambda2: seen_max,
    })
}

fn brackets(a: f64, b: f64, target: f64) -> bool {
    a.min(b) <= target && target <= a.max(b)
}

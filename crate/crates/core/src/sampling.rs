//! Monte Carlo study of how empirical diffusion distances converge as the
//! sample grows.
//!
//! A single large reference sample stands in for the continuum. Each trial
//! at size `n` draws a nested subsample that always contains the tracked
//! points, rebuilds both graphs with the same fixed kernel, and records how
//! far its pointwise and global distances land from the reference values.

use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::datasets::TorusSpec;
use crate::diffusion_operator::{diffusion_matrix, kernel_power_row, matrix_power, DiffusionMatrix};
use crate::distances::frobenius_difference;
use crate::error::{Error, Result};
use crate::kernels::{KernelMatrix, PointCloud};

/// Draws `n` points and returns them as seen under two parameters.
pub trait PairedSampler {
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<(PointCloud, PointCloud)>;
}

/// Same angles on two tori, typically one plain and one pinched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPairSampler {
    pub first: TorusSpec,
    pub second: TorusSpec,
}

impl PairedSampler for TorusPairSampler {
    fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<(PointCloud, PointCloud)> {
        let angles: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                (
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        Ok((
            crate::datasets::torus_from_angles(&self.first, &angles)?,
            crate::datasets::torus_from_angles(&self.second, &angles)?,
        ))
    }
}

/// Returns a fixed pair of clouds regardless of `n`, truncated to `n` points.
#[derive(Debug, Clone)]
pub struct FixedSampler {
    pub first: PointCloud,
    pub second: PointCloud,
}

impl PairedSampler for FixedSampler {
    fn sample(&self, n: usize, _rng: &mut ChaCha8Rng) -> Result<(PointCloud, PointCloud)> {
        if n > self.first.len() || self.first.len() != self.second.len() {
            return Err(Error::InvalidInput(format!(
                "fixed sampler holds {} points, asked for {n}",
                self.first.len()
            )));
        }
        let idx: Vec<usize> = (0..n).collect();
        Ok((self.first.select(&idx)?, self.second.select(&idx)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub t: u32,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub reference_n: usize,
    /// Pairs `(x, y)` of reference indices; the pointwise deviation tracks
    /// `D(x under the first parameter, y under the second)`.
    pub tracked_pairs: Vec<(usize, usize)>,
    pub seed: u64,
    /// Required `reference_n / max(n_grid)`.
    pub min_reference_ratio: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            t: 2,
            n_grid: vec![100, 200, 400, 800],
            trials: 20,
            reference_n: 4000,
            tracked_pairs: vec![(0, 0), (1, 1), (2, 3), (4, 5)],
            seed: 1,
            min_reference_ratio: 4.0,
        }
    }
}

impl ConvergenceConfig {
    fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::InvalidInput("diffusion time must be ≥ 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("n grid must be non-empty and strictly increasing".into()));
        }
        if self.trials < 10 {
            return Err(Error::InvalidInput(format!("at least 10 trials are needed, got {}", self.trials)));
        }
        let largest = *self.n_grid.last().expect("non-empty");
        if (self.reference_n as f64) < self.min_reference_ratio * largest as f64 || self.reference_n < largest {
            return Err(Error::InvalidInput(format!(
                "reference size {} is below {} × {largest}",
                self.reference_n, self.min_reference_ratio
            )));
        }
        if self.tracked_pairs.is_empty() {
            return Err(Error::InvalidInput("no tracked pairs".into()));
        }
        let mut tracked: Vec<usize> = self.tracked_pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
        tracked.sort_unstable();
        tracked.dedup();
        if tracked.last().is_some_and(|&m| m >= self.reference_n) {
            return Err(Error::InvalidInput("tracked point outside the reference sample".into()));
        }
        if tracked.len() > self.n_grid[0] {
            return Err(Error::InvalidInput("more tracked points than the smallest sample".into()));
        }
        Ok(())
    }
}

/// Mean and standard deviation of absolute deviations at each sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSeries {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Least-squares line through `(log n, log mean deviation)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval; infinite with fewer than three sizes.
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub n_grid: Vec<usize>,
    pub pointwise: DeviationSeries,
    pub global: DeviationSeries,
    /// `None` when a mean deviation is zero and the log-log fit is undefined.
    pub pointwise_fit: Option<SlopeFit>,
    pub global_fit: Option<SlopeFit>,
    pub reference_pointwise: Vec<f64>,
    pub reference_global: f64,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,pointwise_mean,pointwise_std,global_mean,global_std\n");
        for (k, n) in self.n_grid.iter().enumerate() {
            let _ = writeln!(
                out,
                "{n},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.pointwise.mean[k], self.pointwise.std[k], self.global.mean[k], self.global.std[k]
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let fmt = |f: &Option<SlopeFit>| match f {
            Some(f) => format!("{:.4} (95% CI [{:.4}, {:.4}])", f.slope, f.ci.0, f.ci.1),
            None => "undefined".to_string(),
        };
        let mut s = String::new();
        let _ = writeln!(s, "sizes: {:?}", self.n_grid);
        let _ = writeln!(s, "reference global distance: {:.6}", self.reference_global);
        let _ = writeln!(s, "pointwise slope: {}", fmt(&self.pointwise_fit));
        let _ = writeln!(s, "global slope: {}", fmt(&self.global_fit));
        s
    }

    /// Ratios of mean deviations at consecutive sizes.
    pub fn pointwise_ratios(&self) -> Vec<f64> {
        self.pointwise.mean.windows(2).map(|w| w[1] / w[0]).collect()
    }

    pub fn global_ratios(&self) -> Vec<f64> {
        self.global.mean.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

struct Measured {
    pointwise: Vec<f64>,
    global: f64,
}

fn measure<K>(a: &PointCloud, b: &PointCloud, kernel: &K, t: u32, pairs: &[(usize, usize)]) -> Result<Measured>
where
    K: Fn(&PointCloud) -> Result<KernelMatrix>,
{
    let da: DiffusionMatrix = diffusion_matrix(&kernel(a)?)?;
    let db: DiffusionMatrix = diffusion_matrix(&kernel(b)?)?;
    let n = a.len() as f64;
    let pointwise = pairs
        .iter()
        .map(|&(x, y)| {
            let ra = kernel_power_row(&da, t, x)?;
            let rb = kernel_power_row(&db, t, y)?;
            Ok((n * ra.iter().zip(&rb).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()).sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    let pa = matrix_power(&da, t)?;
    drop(da);
    let pb = matrix_power(&db, t)?;
    drop(db);
    Ok(Measured {
        pointwise,
        global: frobenius_difference(&pa, &pb),
    })
}

/// Runs the study. `kernel` must not depend on the sample size.
pub fn convergence_study<S, K>(sampler: &S, kernel: K, config: &ConvergenceConfig) -> Result<ConvergenceReport>
where
    S: PairedSampler + ?Sized,
    K: Fn(&PointCloud) -> Result<KernelMatrix>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (ref_a, ref_b) = sampler.sample(config.reference_n, &mut rng)?;
    if ref_a.len() != config.reference_n || ref_b.len() != config.reference_n {
        return Err(Error::InvalidInput("sampler returned the wrong number of points".into()));
    }
    let reference = measure(&ref_a, &ref_b, &kernel, config.t, &config.tracked_pairs)?;

    let mut tracked: Vec<usize> = config.tracked_pairs.iter().flat_map(|&(x, y)| [x, y]).collect();
    tracked.sort_unstable();
    tracked.dedup();
    let others: Vec<usize> = (0..config.reference_n).filter(|i| tracked.binary_search(i).is_err()).collect();

    let mut pointwise = DeviationSeries { mean: vec![], std: vec![] };
    let mut global = DeviationSeries { mean: vec![], std: vec![] };
    for &n in &config.n_grid {
        let mut pw = Vec::with_capacity(config.trials);
        let mut gl = Vec::with_capacity(config.trials);
        for _ in 0..config.trials {
            let mut subset = tracked.clone();
            subset.extend(index::sample(&mut rng, others.len(), n - tracked.len()).into_iter().map(|k| others[k]));
            subset.sort_unstable();
            let position = |x: usize| -> Result<usize> {
                subset
                    .binary_search(&x)
                    .map_err(|_| Error::Numerical(format!("tracked point {x} missing from subsample")))
            };
            let pairs = config
                .tracked_pairs
                .iter()
                .map(|&(x, y)| Ok((position(x)?, position(y)?)))
                .collect::<Result<Vec<_>>>()?;
            let m = measure(&ref_a.select(&subset)?, &ref_b.select(&subset)?, &kernel, config.t, &pairs)?;
            let dev: f64 = m
                .pointwise
                .iter()
                .zip(&reference.pointwise)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / pairs.len() as f64;
            pw.push(dev);
            gl.push((m.global - reference.global).abs());
        }
        let (m, s) = mean_std(&pw);
        pointwise.mean.push(m);
        pointwise.std.push(s);
        let (m, s) = mean_std(&gl);
        global.mean.push(m);
        global.std.push(s);
    }

    let pointwise_fit = fit_slope(&config.n_grid, &pointwise.mean);
    let global_fit = fit_slope(&config.n_grid, &global.mean);
    Ok(ConvergenceReport {
        n_grid: config.n_grid.clone(),
        pointwise,
        global,
        pointwise_fit,
        global_fit,
        reference_pointwise: reference.pointwise,
        reference_global: reference.global,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Ordinary least squares of `log y` on `log n`.
pub fn fit_slope(n_grid: &[usize], y: &[f64]) -> Option<SlopeFit> {
    if n_grid.len() < 2 || n_grid.len() != y.len() || y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ci = if xs.len() > 2 {
        let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        let df = k - 2.0;
        let se = (ssr / df / sxx).sqrt();
        let q = StudentsT::new(0.0, 1.0, df).ok()?.inverse_cdf(0.975);
        (slope - q * se, slope + q * se)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    Some(SlopeFit { slope, intercept, ci })
}

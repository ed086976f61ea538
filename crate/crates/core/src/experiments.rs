//! End-to-end pipelines built from the other modules.

use faer::Mat;

use crate::datasets::{
    pinched_torus_family, synthetic_cube_family, ChangeSpec, CubeFamily, PinchLabel, SceneSpec, SensorSpec, TorusSpec,
};
use crate::diffusion_operator::{diffusion_matrix, spectral_decomposition, DiffusionMatrix, SpectralDecomposition};
use crate::distances::{asymptotic_corresponding_distances, corresponding_distances, global_diffusion_distance, gram_matrix};
use crate::error::{Error, Result};
use crate::kernels::{calibrate, gaussian_kernel, CalibrationOptions, PointCloud};
use crate::metagraph::{meta_embedding, meta_kernel, Bandwidth, MetaEmbedding};
use crate::sampling::{convergence_study, ConvergenceConfig, ConvergenceReport, TorusPairSampler};

/// Fixed bandwidth of the torus convergence study.
pub const CONVERGENCE_EPSILON: f64 = 5.0;

/// A calibrated graph with its leading eigenpairs.
#[derive(Debug, Clone)]
pub struct CalibratedGraph {
    pub epsilon: f64,
    pub lambda2: f64,
    pub matrix: DiffusionMatrix,
    pub decomposition: SpectralDecomposition,
}

/// Gaussian kernel with `ε` tuned so the diffusion matrix has the requested
/// second eigenvalue, followed by a rank-`rank` decomposition.
pub fn calibrated_graph(cloud: &PointCloud, target_lambda2: f64, rank: usize, tol: f64) -> Result<CalibratedGraph> {
    let opts = CalibrationOptions {
        tol,
        ..CalibrationOptions::default()
    };
    let cal = calibrate(cloud, target_lambda2, &opts)?;
    let matrix = diffusion_matrix(&gaussian_kernel(cloud, cal.epsilon)?)?;
    let decomposition = spectral_decomposition(&matrix, rank.min(cloud.len()))?;
    Ok(CalibratedGraph {
        epsilon: cal.epsilon,
        lambda2: cal.lambda2,
        matrix,
        decomposition,
    })
}

/// Pairwise global distances over a family of decompositions at time `t`.
pub fn global_distance_matrix(family: &[SpectralDecomposition], t: u32) -> Result<Mat<f64>> {
    let m = family.len();
    let mut d = Mat::<f64>::zeros(m, m);
    for b in 0..m {
        for a in 0..b {
            let g = gram_matrix(&family[a], &family[b])?;
            let v = global_diffusion_distance(&family[a], &family[b], &g, t)?;
            d[(a, b)] = v;
            d[(b, a)] = v;
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusExperimentConfig {
    pub n: usize,
    pub seed: u64,
    pub target_lambda2: f64,
    pub rank: usize,
    pub t: u32,
    pub bandwidth: Bandwidth,
    pub dims: usize,
    /// Meta diffusion time; `None` uses `1/(1 − λ2)` of the meta graph.
    pub s: Option<f64>,
    pub keep_trivial: bool,
    pub tol: f64,
}

impl Default for TorusExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            seed: 0,
            target_lambda2: 0.5,
            rank: 10,
            t: 2,
            bandwidth: Bandwidth::Median,
            dims: 3,
            s: None,
            keep_trivial: true,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TorusExperimentReport {
    pub labels: Vec<Option<PinchLabel>>,
    pub epsilons: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub global_distances: Mat<f64>,
    pub meta_epsilon: f64,
    pub meta_lambda2: f64,
    pub s: f64,
    pub embedding: MetaEmbedding,
}

/// Graph of graphs over the plain torus and its thirty pinched variants.
pub fn torus_experiment(config: &TorusExperimentConfig) -> Result<TorusExperimentReport> {
    if config.rank == 0 || config.t == 0 {
        return Err(Error::InvalidInput("rank and t must be positive".into()));
    }
    let family = pinched_torus_family(config.n, config.seed)?;
    let mut decompositions = Vec::with_capacity(family.clouds.len());
    let mut epsilons = Vec::with_capacity(family.clouds.len());
    let mut lambda2 = Vec::with_capacity(family.clouds.len());
    for cloud in &family.clouds {
        let g = calibrated_graph(cloud, config.target_lambda2, config.rank, config.tol)?;
        epsilons.push(g.epsilon);
        lambda2.push(g.lambda2);
        decompositions.push(g.decomposition);
    }
    let global_distances = global_distance_matrix(&decompositions, config.t)?;
    let meta = meta_kernel(&global_distances, config.bandwidth, config.t)?;
    let meta_lambda2 = meta.second_eigenvalue()?;
    let s = match config.s {
        Some(s) => s,
        None => {
            if meta_lambda2 >= 1.0 {
                return Err(Error::Degenerate("meta graph is disconnected".into()));
            }
            1.0 / (1.0 - meta_lambda2)
        }
    };
    let embedding = meta_embedding(&meta, s, config.dims, config.keep_trivial)?;
    Ok(TorusExperimentReport {
        labels: family.labels,
        epsilons,
        lambda2,
        global_distances,
        meta_epsilon: meta.epsilon,
        meta_lambda2,
        s,
        embedding,
    })
}

/// Convergence of the plain torus against the torus pinched to radius 1 at
/// angle π, with a Gaussian kernel of fixed bandwidth `epsilon`.
pub fn torus_convergence(config: &ConvergenceConfig, epsilon: f64) -> Result<ConvergenceReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("bandwidth must be positive, got {epsilon}")));
    }
    let sampler = TorusPairSampler {
        first: TorusSpec::default(),
        second: TorusSpec::pinched(std::f64::consts::PI, 1.0),
    };
    convergence_study(&sampler, |c: &PointCloud| gaussian_kernel(c, epsilon), config)
}

/// How cross-epoch distances are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChangeTime {
    /// Limit `t → ∞`, from the degree densities alone.
    Asymptotic,
    /// Finite time from a truncated spectral decomposition.
    Finite { t: u32, rank: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeDetectionConfig {
    pub scene: SceneSpec,
    pub sensors: Vec<SensorSpec>,
    pub change: Option<ChangeSpec>,
    pub target_lambda2: f64,
    pub time: ChangeTime,
    pub top_q: usize,
    pub tol: f64,
}

impl Default for ChangeDetectionConfig {
    fn default() -> Self {
        Self {
            scene: SceneSpec::default(),
            sensors: vec![
                SensorSpec::random(30, 0.01, 1),
                SensorSpec::random(50, 0.01, 2),
                SensorSpec::random(70, 0.01, 3),
            ],
            change: Some(ChangeSpec {
                epoch: 1,
                row: 12,
                col: 9,
                size: 5,
            }),
            target_lambda2: 0.97,
            time: ChangeTime::Asymptotic,
            top_q: 50,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChangeDetectionReport {
    /// Mean cross-epoch distance per pixel over all epoch pairs.
    pub scores: Vec<f64>,
    pub mask: Vec<bool>,
    pub snr_db: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Pixels with the `top_q` largest scores, highest first.
    pub top: Vec<usize>,
    /// Fraction of changed pixels among `top`, relative to the number of changed pixels.
    pub recall: f64,
}

/// Scores every pixel of a synthetic multi-sensor cube by how differently
/// it diffuses across epochs.
pub fn change_detection(config: &ChangeDetectionConfig) -> Result<ChangeDetectionReport> {
    let cube: CubeFamily = synthetic_cube_family(&config.scene, &config.sensors, config.change)?;
    let pixels = cube.mask.len();
    if config.top_q == 0 || config.top_q > pixels {
        return Err(Error::InvalidInput(format!("top_q must lie in 1..={pixels}")));
    }
    let rank = match config.time {
        ChangeTime::Asymptotic => 2,
        ChangeTime::Finite { rank, t } => {
            if t == 0 || rank == 0 {
                return Err(Error::InvalidInput("t and rank must be positive".into()));
            }
            rank
        }
    };
    let graphs = cube
        .epochs
        .iter()
        .map(|c| calibrated_graph(c, config.target_lambda2, rank, config.tol))
        .collect::<Result<Vec<_>>>()?;

    let mut scores = vec![0.0; pixels];
    let mut pairs = 0usize;
    for b in 0..graphs.len() {
        for a in 0..b {
            let d = match config.time {
                ChangeTime::Asymptotic => asymptotic_corresponding_distances(&graphs[a].matrix, &graphs[b].matrix)?,
                ChangeTime::Finite { t, .. } => {
                    let (da, db) = (&graphs[a].decomposition, &graphs[b].decomposition);
                    corresponding_distances(da, db, &gram_matrix(da, db)?, t)?
                }
            };
            scores.iter_mut().zip(&d).for_each(|(s, v)| *s += v);
            pairs += 1;
        }
    }
    scores.iter_mut().for_each(|s| *s /= pairs as f64);

    let mut order: Vec<usize> = (0..pixels).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    order.truncate(config.top_q);
    let changed = cube.mask.iter().filter(|m| **m).count();
    let hits = order.iter().filter(|&&p| cube.mask[p]).count();
    let recall = if changed == 0 { 0.0 } else { hits as f64 / changed as f64 };
    Ok(ChangeDetectionReport {
        scores,
        mask: cube.mask,
        snr_db: cube.snr_db,
        epsilons: graphs.iter().map(|g| g.epsilon).collect(),
        top: order,
        recall,
    })
}

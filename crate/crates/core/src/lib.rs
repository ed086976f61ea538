//! Diffusion geometry for data whose similarity kernel changes over a
//! parameter space.
//!
//! Every parameter `α` gives a weighted graph over the same sample set. The
//! crate builds the symmetric diffusion matrix of each graph, compares
//! diffusions across parameters point by point ([`distances::diffusion_distance`])
//! and graph by graph ([`distances::global_diffusion_distance`]), rotates the
//! per-parameter diffusion maps into one common coordinate system
//! ([`embeddings::common_embedding`]), and embeds whole families of graphs
//! ([`metagraph`]).
//!
//! All integrals are quadratures against the empirical measure: each of the
//! `n` sample points carries weight `1/n`. Eigenfunctions are therefore
//! scaled so that `(1/n) Σ_x ψ_i(x) ψ_j(x) = δ_ij`, and the `t`-step kernel
//! of a graph is `n · A^t` where `A` is its diffusion matrix.
//!
//! ```
//! use dynamap::prelude::*;
//!
//! let cloud = PointCloud::from_rows(&[vec![0.0], vec![1.0], vec![2.5]]).unwrap();
//! let a = diffusion_matrix(&gaussian_kernel(&cloud, 1.0).unwrap()).unwrap();
//! let b = diffusion_matrix(&gaussian_kernel(&cloud, 2.0).unwrap()).unwrap();
//! let (da, db) = (spectral_decomposition(&a, 3).unwrap(), spectral_decomposition(&b, 3).unwrap());
//! let g = gram_matrix(&da, &db).unwrap();
//! let spectral = diffusion_distance(&da, &db, &g, 0, 0, 2).unwrap();
//! let direct = direct_diffusion_distance(&a, &b, 0, 0, 2).unwrap();
//! assert!((spectral - direct).abs() < 1e-10);
//! ```

pub mod datasets;
pub mod diffusion_operator;
pub mod distances;
pub mod embeddings;
mod error;
pub mod experiments;
pub mod io;
pub mod kernels;
pub mod metagraph;
pub mod sampling;

pub use error::{Error, Result};
pub use faer::Mat;

pub mod prelude {
    pub use crate::diffusion_operator::{
        diffusion_matrix, graph_laplacian, kernel_power_row, spectral_decomposition,
        DiffusionMatrix, SpectralDecomposition,
    };
    pub use crate::distances::{
        asymptotic_diffusion_distance, asymptotic_global_distance, diffusion_distance,
        direct_diffusion_distance, direct_global_distance, global_diffusion_distance,
        gram_matrix, subgraph_diffusion_distance, GramMatrix,
    };
    pub use crate::embeddings::{
        common_embedding, diffusion_map, rotation, subgraph_rotation, DiffusionEmbedding,
        RotationOperator,
    };
    pub use crate::kernels::{calibrate_epsilon, gaussian_kernel, KernelMatrix, PointCloud};
    pub use crate::metagraph::{meta_embedding, meta_kernel, Bandwidth, MetaGraph};
    pub use crate::{Error, Mat, Result};
}

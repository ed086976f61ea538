//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod oracle;

use std::time::{Duration, Instant};

use dynamap::datasets::pinch_radii;
use dynamap::diffusion_operator::{diffusion_matrix, spectral_decomposition, DiffusionMatrix, SpectralDecomposition};
use dynamap::distances::{
    asymptotic_corresponding_distances, asymptotic_diffusion_distance, asymptotic_global_distance,
    corresponding_distances, diffusion_distance, distance_matrix, global_diffusion_distance, gram_matrix,
    subgraph_diffusion_distance,
};
use dynamap::embeddings::{
    canonical_subgraph_basis, common_embedding, diffusion_map, reference_subgraph_basis, rotation, subgraph_rotation,
};
use dynamap::experiments::{
    change_detection, torus_convergence, torus_experiment, ChangeDetectionConfig, TorusExperimentConfig,
    CONVERGENCE_EPSILON,
};
use dynamap::sampling::ConvergenceConfig;
use dynamap::Mat;
use nalgebra::DMatrix;
use oracle::*;
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn full(a: &DiffusionMatrix) -> SpectralDecomposition {
    spectral_decomposition(a, a.len()).unwrap()
}

/// A random instance: library graph and an independently built oracle matrix.
struct Instance {
    lib: DiffusionMatrix,
    dec: SpectralDecomposition,
    na: DMatrix<f64>,
}

fn instance(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Instance {
    let k = random_kernel_values(n, 0.05, rng);
    let na = symmetric_diffusion(&to_na(&k));
    let lib = diffusion_matrix(&dynamap::kernels::KernelMatrix::new(k).unwrap()).unwrap();
    let dec = full(&lib);
    Instance { lib, dec, na }
}

const TIMES: [u32; 3] = [1, 2, 5];

fn pairs() -> Vec<(Instance, Instance)> {
    (0..100u64)
        .map(|seed| {
            let mut r = rng(1000 + seed);
            let n = 2 + (seed as usize % 11);
            (instance(n, &mut r), instance(n, &mut r))
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (a, b) in pairs() {
        let g = gram_matrix(&a.dec, &b.dec).unwrap();
        let n = a.dec.n();
        for t in TIMES {
            let (pa, pb) = (power(&a.na, t), power(&b.na, t));
            let all = distance_matrix(&a.dec, &b.dec, &g, t).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let exact = pointwise(&pa, &pb, i, j);
                    let single = diffusion_distance(&a.dec, &b.dec, &g, i, j, t).unwrap();
                    worst = worst.max((single - exact).abs()).max((all[(i, j)] - exact).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-8 && elapsed < Duration::from_secs(5),
        format!("max |spectral - direct| = {worst:.2e} over 100 pairs, t in {{1,2,5}}; {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    for (a, b) in pairs() {
        let g = gram_matrix(&a.dec, &b.dec).unwrap();
        for t in TIMES {
            let exact = global(&power(&a.na, t), &power(&b.na, t));
            let v = global_diffusion_distance(&a.dec, &b.dec, &g, t).unwrap();
            worst = worst.max((v - exact).abs());
        }
    }
    outcome(worst <= 1e-8, format!("max |spectral - Frobenius| = {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    let mut defect = 0.0f64;
    for seed in 0..30u64 {
        let mut r = rng(2000 + seed);
        let m = 3 + (seed as usize % 2);
        let n = 4 + (seed as usize % 7);
        let family: Vec<Instance> = (0..m).map(|_| instance(n, &mut r)).collect();
        let decs: Vec<SpectralDecomposition> = family.iter().map(|f| f.dec.clone()).collect();
        let gamma = seed as usize % m;
        for t in TIMES {
            let emb = common_embedding(&decs, gamma, t).unwrap();
            let powers: Vec<DMatrix<f64>> = family.iter().map(|f| power(&f.na, t)).collect();
            for p in 0..m {
                for q in 0..m {
                    for x in 0..n {
                        for y in 0..n {
                            let rotated = emb[p].distance_to(x, &emb[q], y).unwrap();
                            worst = worst.max((rotated - pointwise(&powers[p], &powers[q], x, y)).abs());
                        }
                    }
                }
            }
        }
        for target in &decs {
            for source in &decs {
                defect = defect.max(rotation(target, source).unwrap().isometry_defect());
            }
        }
    }
    outcome(
        worst <= 1e-8 && defect <= 1e-6,
        format!("max distance deviation = {worst:.2e}, max |R^T R - I| = {defect:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut pointwise_dev = 0.0f64;
    let mut global_dev = 0.0f64;
    for seed in 0..40u64 {
        let mut r = rng(3000 + seed);
        let n = 3 + (seed as usize % 10);
        let (a, b) = (instance(n, &mut r), instance(n, &mut r));
        let (pa, pb) = (power(&a.na, 400), power(&b.na, 400));
        let density = asymptotic_corresponding_distances(&a.lib, &b.lib).unwrap();
        for i in 0..n {
            for j in 0..n {
                let v = asymptotic_diffusion_distance(&a.dec, &b.dec, i, j).unwrap();
                pointwise_dev = pointwise_dev.max((v - pointwise(&pa, &pb, i, j)).abs());
            }
            pointwise_dev = pointwise_dev.max((density[i] - pointwise(&pa, &pb, i, i)).abs());
        }
        let g = asymptotic_global_distance(&a.dec, &b.dec).unwrap();
        global_dev = global_dev.max((g - global(&pa, &pb)).abs());
    }
    outcome(
        pointwise_dev <= 1e-5 && global_dev <= 1e-5,
        format!("max |D(400) - D(inf)| = {pointwise_dev:.2e}, max |global(400) - sqrt(2(1-g^2))| = {global_dev:.2e}"),
    )
}

fn criterion_5() -> Outcome {
    let mut same = 0.0f64;
    let mut partial = 0.0f64;
    for seed in 0..20u64 {
        let mut r = rng(4000 + seed);
        let n = 3 + (seed as usize % 8);
        let (a, b) = (instance(n, &mut r), instance(n, &mut r));
        let ident: Vec<usize> = (0..n).collect();
        for t in TIMES {
            let (pa, pb) = (power(&a.na, t), power(&b.na, t));
            for i in 0..n {
                for j in 0..n {
                    let v = subgraph_diffusion_distance(&a.lib, &b.lib, &ident, &ident, i, j, t).unwrap();
                    same = same.max((v - pointwise(&pa, &pb, i, j)).abs());
                }
            }
        }

        // Different graph sizes sharing a scattered subset.
        let (na_, nb_) = (6 + seed as usize % 5, 5 + seed as usize % 4);
        let (ga, gb) = (instance(na_, &mut r), instance(nb_, &mut r));
        let size = 3 + seed as usize % 3;
        let mut pos_a: Vec<usize> = (0..na_).collect();
        let mut pos_b: Vec<usize> = (0..nb_).collect();
        pos_a.shuffle(&mut r);
        pos_b.shuffle(&mut r);
        let (sa, sb) = (&pos_a[..size], &pos_b[..size]);
        let t = r.random_range(1..4u32);
        let (pa, pb) = (power(&ga.na, t), power(&gb.na, t));
        let bases = [canonical_subgraph_basis(size), reference_subgraph_basis(&ga.dec, sa).unwrap()];
        for basis in &bases {
            let ra = subgraph_rotation(&ga.dec, sa, basis).unwrap();
            let rb = subgraph_rotation(&gb.dec, sb, basis).unwrap();
            let ea = ra.rotate(&diffusion_map(&ga.dec, t).unwrap()).unwrap();
            let eb = rb.rotate(&diffusion_map(&gb.dec, t).unwrap()).unwrap();
            for i in 0..na_ {
                for j in 0..nb_ {
                    let v = ea.distance_to(i, &eb, j).unwrap();
                    partial = partial.max((v - subgraph(&pa, &pb, sa, sb, i, j)).abs());
                }
            }
        }
    }
    outcome(
        same <= 1e-10 && partial <= 1e-6,
        format!("S = X: max deviation {same:.2e}; partial overlap rotation vs quadrature: {partial:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let config = ConvergenceConfig::default();
    let report = match torus_convergence(&config, CONVERGENCE_EPSILON) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("study failed: {e}")),
    };
    let elapsed = start.elapsed();
    let slope = |f: Option<dynamap::sampling::SlopeFit>| f.map_or(f64::NAN, |f| f.slope);
    let (p, g) = (slope(report.pointwise_fit), slope(report.global_fit));
    let in_band = |s: f64| (s + 0.5).abs() <= 0.15;
    outcome(
        in_band(p) && in_band(g) && elapsed < Duration::from_secs(300),
        format!(
            "slopes pointwise {p:.3}, global {g:.3} (band -0.5 +/- 0.15; n {:?}, {} trials, reference {}, seed {}); {elapsed:.1?}",
            config.n_grid, config.trials, config.reference_n, config.seed
        ),
    )
}

/// Pairs ordered one way by `x` and the other way by `y`.
fn discordant(x: &[f64], y: &[f64]) -> usize {
    let mut c = 0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if (x[j] - x[i]) * (y[j] - y[i]) >= 0.0 {
                c += 1;
            }
        }
    }
    c
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (k, &i) in idx.iter().enumerate() {
        r[i] = k as f64;
    }
    r
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let r = match torus_experiment(&TorusExperimentConfig::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let elapsed = start.elapsed();
    let a_ok = (0.3..=0.65).contains(&r.meta_lambda2);

    let angles: Vec<f64> = {
        let mut v: Vec<f64> = r.labels.iter().flatten().map(|l| l.angle).collect();
        v.dedup();
        v
    };
    let mut b_ok = true;
    let mut rhos = Vec::new();
    for &angle in &angles {
        let (radii, dists): (Vec<f64>, Vec<f64>) = r
            .labels
            .iter()
            .enumerate()
            .filter_map(|(g, l)| l.filter(|l| l.angle == angle).map(|l| (l.radius, r.global_distances[(0, g)])))
            .unzip();
        b_ok &= radii.len() == pinch_radii().len() && discordant(&radii, &dists) <= 1;
        rhos.push(spearman(&radii, &dists));
    }

    let coords = &r.embedding.coords;
    let dims = coords.ncols();
    let pinched: Vec<(usize, usize)> = r
        .labels
        .iter()
        .enumerate()
        .filter_map(|(g, l)| l.map(|l| (g, angles.iter().position(|&a| a == l.angle).unwrap())))
        .collect();
    let mut centroids = vec![vec![0.0; dims]; angles.len()];
    let mut counts = vec![0.0; angles.len()];
    for &(g, class) in &pinched {
        for k in 0..dims {
            centroids[class][k] += coords[(g, k)];
        }
        counts[class] += 1.0;
    }
    for (c, n) in centroids.iter_mut().zip(&counts) {
        c.iter_mut().for_each(|v| *v /= n);
    }
    let correct = pinched
        .iter()
        .filter(|&&(g, class)| {
            let d = |c: &Vec<f64>| (0..dims).map(|k| (coords[(g, k)] - c[k]).powi(2)).sum::<f64>();
            (0..centroids.len()).min_by(|&p, &q| d(&centroids[p]).total_cmp(&d(&centroids[q]))) == Some(class)
        })
        .count();
    let accuracy = correct as f64 / pinched.len() as f64;
    let c_ok = accuracy >= 0.9;
    outcome(
        a_ok && b_ok && c_ok && elapsed < Duration::from_secs(600),
        format!(
            "(a) meta lambda2 {:.3} in [0.3, 0.65]: {}; (b) Spearman per angle {:?}: {}; (c) nearest-centroid accuracy {:.2}: {}; {elapsed:.1?}",
            r.meta_lambda2,
            a_ok,
            rhos.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            b_ok,
            accuracy,
            c_ok
        ),
    )
}

fn criterion_8() -> Outcome {
    let config = ChangeDetectionConfig::default();
    match change_detection(&config) {
        Ok(r) => {
            let changed = r.mask.iter().filter(|m| **m).count();
            outcome(
                r.recall >= 0.8,
                format!(
                    "recall {:.2} ({} of {changed} planted pixels in the top {} of {})",
                    r.recall,
                    (r.recall * changed as f64).round(),
                    config.top_q,
                    r.mask.len()
                ),
            )
        }
        Err(e) => outcome(false, format!("pipeline failed: {e}")),
    }
}

/// Distances that must not depend on the choice of eigenbasis.
fn basis_free_quantities(a: &SpectralDecomposition, b: &SpectralDecomposition) -> Vec<f64> {
    let mut out = Vec::new();
    for t in TIMES {
        let g = gram_matrix(a, b).unwrap();
        let d = distance_matrix(a, b, &g, t).unwrap();
        out.extend((0..d.nrows()).flat_map(|i| (0..d.ncols()).map(move |j| (i, j))).map(|(i, j)| d[(i, j)]));
        out.extend(corresponding_distances(a, b, &g, t).unwrap());
        out.push(global_diffusion_distance(a, b, &g, t).unwrap());
    }
    out
}

fn flip_signs(dec: &SpectralDecomposition, r: &mut rand_chacha::ChaCha8Rng) -> SpectralDecomposition {
    let signs: Vec<f64> = (0..dec.rank()).map(|_| if r.random_bool(0.5) { -1.0 } else { 1.0 }).collect();
    let psi = dec.eigenfunctions();
    SpectralDecomposition::from_parts(
        dec.eigenvalues().to_vec(),
        Mat::from_fn(psi.nrows(), psi.ncols(), |x, k| signs[k] * psi[(x, k)]),
    )
    .unwrap()
}

/// Symmetric operator with prescribed, partly repeated eigenvalues.
fn degenerate_operator(
    eigenvalues: &[f64],
    r: &mut rand_chacha::ChaCha8Rng,
) -> DiffusionMatrix {
    let n = eigenvalues.len();
    let q = random_orthogonal(n, r);
    let a = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(eigenvalues)) * q.transpose();
    DiffusionMatrix::from_symmetric(Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))).unwrap()
}

/// Rotates eigenfunctions within each block of equal eigenvalues.
fn rotate_blocks(dec: &SpectralDecomposition, blocks: &[(usize, usize)], r: &mut rand_chacha::ChaCha8Rng) -> SpectralDecomposition {
    let psi = dec.eigenfunctions();
    let mut out = psi.clone();
    for &(start, len) in blocks {
        let q = random_orthogonal(len, r);
        for x in 0..psi.nrows() {
            for c in 0..len {
                out[(x, start + c)] = (0..len).map(|k| psi[(x, start + k)] * q[(k, c)]).sum();
            }
        }
    }
    SpectralDecomposition::from_parts(dec.eigenvalues().to_vec(), out).unwrap()
}

fn criterion_9() -> Outcome {
    let mut sign_dev = 0.0f64;
    let mut rot_dev = 0.0f64;
    let mut asym_dev = 0.0f64;
    for seed in 0..20u64 {
        let mut r = rng(5000 + seed);
        let n = 4 + (seed as usize % 7);
        let (a, b) = (instance(n, &mut r), instance(n, &mut r));
        for rank in [n, n - 1, 2] {
            let (da, db) = (a.dec.truncated(rank).unwrap(), b.dec.truncated(rank).unwrap());
            let base = basis_free_quantities(&da, &db);
            let flipped = basis_free_quantities(&flip_signs(&da, &mut r), &flip_signs(&db, &mut r));
            for (u, v) in base.iter().zip(&flipped) {
                sign_dev = sign_dev.max((u - v).abs());
            }
        }
        // The top eigenfunction's sign is fixed by convention; flipping it
        // must not matter to the long-time limits either.
        let fa = flip_signs(&a.dec, &mut r);
        let fb = flip_signs(&b.dec, &mut r);
        asym_dev = asym_dev.max(
            (asymptotic_global_distance(&a.dec, &b.dec).unwrap() - asymptotic_global_distance(&fa, &fb).unwrap()).abs(),
        );

        // Degenerate spectra: 1, then blocks of sizes 2 and 3, then distinct values.
        let mut eig = vec![1.0, 0.6, 0.6, 0.3, 0.3, 0.3];
        eig.extend((0..n.saturating_sub(2)).map(|k| 0.1 / (k + 1) as f64));
        let blocks = [(1, 2), (3, 3)];
        let ga = degenerate_operator(&eig, &mut r);
        let gb = degenerate_operator(&eig, &mut r);
        for rank in [eig.len(), 6, 3] {
            let da = spectral_decomposition(&ga, rank).unwrap();
            let db = spectral_decomposition(&gb, rank).unwrap();
            let inside: Vec<(usize, usize)> = blocks.iter().copied().filter(|&(s, l)| s + l <= rank).collect();
            let base = basis_free_quantities(&da, &db);
            let rotated = basis_free_quantities(&rotate_blocks(&da, &inside, &mut r), &rotate_blocks(&db, &inside, &mut r));
            for (u, v) in base.iter().zip(&rotated) {
                rot_dev = rot_dev.max((u - v).abs());
            }
        }
    }

    // Symmetry, zero self-distance and the triangle inequality over nodes
    // (point, parameter) of a small family.
    let mut sym = 0.0f64;
    let mut self_d = 0.0f64;
    let mut triangle = 0.0f64;
    let mut triples = 0usize;
    for seed in 0..10u64 {
        let mut r = rng(6000 + seed);
        let n = 3 + (seed as usize % 6);
        let fam: Vec<SpectralDecomposition> = (0..3).map(|_| instance(n, &mut r).dec).collect();
        for t in TIMES {
            let mut d = vec![vec![Mat::<f64>::zeros(0, 0); 3]; 3];
            for p in 0..3 {
                for q in 0..3 {
                    let g = gram_matrix(&fam[p], &fam[q]).unwrap();
                    d[p][q] = distance_matrix(&fam[p], &fam[q], &g, t).unwrap();
                }
            }
            for p in 0..3 {
                for x in 0..n {
                    let g = gram_matrix(&fam[p], &fam[p]).unwrap();
                    self_d = self_d.max(diffusion_distance(&fam[p], &fam[p], &g, x, x, t).unwrap());
                    self_d = self_d.max(d[p][p][(x, x)]);
                    for q in 0..3 {
                        for y in 0..n {
                            sym = sym.max((d[p][q][(x, y)] - d[q][p][(y, x)]).abs());
                            for w in 0..3 {
                                for z in 0..n {
                                    let excess = d[p][w][(x, z)] - d[p][q][(x, y)] - d[q][w][(y, z)];
                                    triangle = triangle.max(excess);
                                    triples += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let pass = sign_dev <= 1e-8 && rot_dev <= 1e-8 && asym_dev <= 1e-8 && sym <= 1e-8 && self_d <= 1e-8 && triangle <= 1e-8;
    outcome(
        pass,
        format!(
            "sign flips {sign_dev:.2e}, degenerate rotations {rot_dev:.2e}, long-time sign flips {asym_dev:.2e}, symmetry {sym:.2e}, self-distance {self_d:.2e}, worst triangle excess {triangle:.2e} over {triples} triples"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("pointwise distance: spectral = direct matrix powers", criterion_1),
        ("global distance: spectral = Frobenius norm", criterion_2),
        ("common embedding reproduces cross distances", criterion_3),
        ("long-time limits", criterion_4),
        ("subgraph distance and rotation", criterion_5),
        ("sampling convergence rate", criterion_6),
        ("pinched torus graph of graphs", criterion_7),
        ("synthetic change detection", criterion_8),
        ("invariance suite", criterion_9),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let o = run();
        println!("{} {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

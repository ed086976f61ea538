use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use anyhow::{bail, ensure, Context, Result};
use dynamap::datasets::{
    pinched_torus_family, sample_torus, standard_map_orbits, synthetic_cube_family, ChangeSpec, SceneSpec, SensorSpec,
    TorusSpec,
};
use dynamap::diffusion_operator::{diffusion_matrix, spectral_decomposition, DiffusionMatrix, SpectralDecomposition};
use dynamap::distances::{
    asymptotic_corresponding_distances, asymptotic_diffusion_distance, asymptotic_global_distance,
    corresponding_distances, distance_matrix, gram_matrix,
};
use dynamap::embeddings::{common_embedding, diffusion_map};
use dynamap::experiments::{
    change_detection, global_distance_matrix, torus_convergence, torus_experiment, ChangeDetectionConfig, ChangeTime,
    TorusExperimentConfig,
};
use dynamap::io::{column, read_matrix};
use dynamap::kernels::{calibrate_epsilon, gaussian_kernel, median_pairwise_distance, KernelMatrix, PointCloud};
use dynamap::metagraph::{meta_embedding, meta_kernel, Bandwidth};
use dynamap::sampling::ConvergenceConfig;
use dynamap::Mat;

use crate::args::*;
use crate::output::Outputs;
use crate::svg;

fn positive(name: &str, v: f64) -> Result<()> {
    ensure!(v > 0.0 && v.is_finite(), "--{name} must be positive and finite, got {v}");
    Ok(())
}

fn check_graph_args(g: &GraphArgs) -> Result<()> {
    positive("tol", g.tol)?;
    if let Some(e) = g.bandwidth.epsilon {
        positive("epsilon", e)?;
    }
    if let Some(l) = g.bandwidth.target_lambda2 {
        ensure!(l > 0.0 && l < 1.0, "--target-lambda2 must lie in (0, 1), got {l}");
    }
    if g.input_kind == InputKind::Kernel {
        ensure!(
            g.bandwidth.epsilon.is_none() && g.bandwidth.target_lambda2.is_none() && !g.bandwidth.epsilon_median,
            "bandwidth flags apply to point inputs only"
        );
    }
    ensure!(g.rank != Some(0), "--rank must be at least 1");
    Ok(())
}

fn kernel_for(cloud: &PointCloud, g: &GraphArgs) -> Result<KernelMatrix> {
    let b = &g.bandwidth;
    let epsilon = if let Some(e) = b.epsilon {
        e
    } else if let Some(target) = b.target_lambda2 {
        calibrate_epsilon(cloud, target, g.tol)?
    } else {
        let e = median_pairwise_distance(cloud);
        ensure!(e > 0.0, "median pairwise distance is zero; pass --epsilon");
        e
    };
    Ok(gaussian_kernel(cloud, epsilon)?)
}

/// Reads every input and builds its diffusion matrix. All inputs must share one sample set.
fn load_graphs(g: &GraphArgs) -> Result<Vec<DiffusionMatrix>> {
    check_graph_args(g)?;
    let matrices = g
        .inputs
        .iter()
        .map(|p| read_matrix(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let n = matrices[0].nrows();
    for (p, m) in g.inputs.iter().zip(&matrices) {
        ensure!(
            m.nrows() == n,
            "{} has {} rows, the first input has {n}",
            p.display(),
            m.nrows()
        );
    }
    if let Some(r) = g.rank {
        ensure!(r <= n, "--rank {r} exceeds the {n} samples");
    }
    g.inputs
        .iter()
        .zip(matrices)
        .map(|(p, m)| {
            let kernel = match g.input_kind {
                InputKind::Points => kernel_for(&PointCloud::new(m)?, g),
                InputKind::Kernel => Ok(KernelMatrix::new(m)?),
            };
            Ok(diffusion_matrix(&kernel.with_context(|| p.display().to_string())?)?)
        })
        .collect()
}

fn decompose(graphs: &[DiffusionMatrix], rank: Option<usize>) -> Result<Vec<SpectralDecomposition>> {
    graphs
        .iter()
        .map(|a| Ok(spectral_decomposition(a, rank.unwrap_or(a.len()))?))
        .collect()
}

fn finite_time(t: Time, command: &str) -> Result<u32> {
    match t {
        Time::Finite(t) => Ok(t),
        Time::Infinite => bail!("{command} needs a finite --t"),
    }
}

pub fn embed(a: &EmbedArgs, out: &mut Outputs) -> Result<()> {
    let t = finite_time(a.t, "embed")?;
    if let Some(gamma) = a.common_base {
        ensure!(
            gamma < a.graph.inputs.len(),
            "--common-base {gamma} is out of range for {} inputs",
            a.graph.inputs.len()
        );
    }
    let decs = decompose(&load_graphs(&a.graph)?, a.graph.rank)?;
    for (k, dec) in decs.iter().enumerate() {
        out.matrix(&format!("embedding_{k}"), &diffusion_map(dec, t)?.coords)?;
        out.matrix(&format!("eigenvalues_{k}"), &column(dec.eigenvalues()))?;
    }
    if let Some(gamma) = a.common_base {
        for (k, emb) in common_embedding(&decs, gamma, t)?.iter().enumerate() {
            out.matrix(&format!("common_{k}"), &emb.coords)?;
        }
    }
    Ok(())
}

pub fn distance(a: &DistanceArgs, out: &mut Outputs) -> Result<()> {
    ensure!(a.graph.inputs.len() == 2, "distance takes exactly two inputs");
    let graphs = load_graphs(&a.graph)?;
    let n = graphs[0].len();
    let result = match (a.t, a.full) {
        (Time::Infinite, false) => column(&asymptotic_corresponding_distances(&graphs[0], &graphs[1])?),
        (Time::Infinite, true) => {
            let decs = decompose(&graphs, Some(a.graph.rank.unwrap_or(n).max(2).min(n)))?;
            let mut d = Mat::<f64>::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    d[(i, j)] = asymptotic_diffusion_distance(&decs[0], &decs[1], i, j)?;
                }
            }
            d
        }
        (Time::Finite(t), full) => {
            let decs = decompose(&graphs, a.graph.rank)?;
            let g = gram_matrix(&decs[0], &decs[1])?;
            if full {
                distance_matrix(&decs[0], &decs[1], &g, t)?
            } else {
                column(&corresponding_distances(&decs[0], &decs[1], &g, t)?)
            }
        }
    };
    out.matrix("distance", &result)?;
    Ok(())
}

pub fn global(a: &GlobalArgs, out: &mut Outputs) -> Result<()> {
    ensure!(a.graph.inputs.len() >= 2, "global needs at least two inputs");
    let graphs = load_graphs(&a.graph)?;
    let d = match a.t {
        Time::Finite(t) => global_distance_matrix(&decompose(&graphs, a.graph.rank)?, t)?,
        Time::Infinite => {
            let n = graphs[0].len();
            let decs = decompose(&graphs, Some(a.graph.rank.unwrap_or(n).max(2).min(n)))?;
            let m = decs.len();
            let mut d = Mat::<f64>::zeros(m, m);
            for q in 0..m {
                for p in 0..q {
                    let v = asymptotic_global_distance(&decs[p], &decs[q])?;
                    d[(p, q)] = v;
                    d[(q, p)] = v;
                }
            }
            d
        }
    };
    out.matrix("global", &d)?;
    Ok(())
}

fn meta_bandwidth(b: &MetaBandwidthArgs) -> Result<Bandwidth> {
    match b.epsilon {
        Some(e) => {
            positive("epsilon", e)?;
            Ok(Bandwidth::Fixed(e))
        }
        None => Ok(Bandwidth::Median),
    }
}

fn check_s(s: Option<f64>) -> Result<()> {
    if let Some(s) = s {
        positive("s", s)?;
    }
    Ok(())
}

pub fn metagraph(a: &MetagraphArgs, out: &mut Outputs) -> Result<()> {
    let bandwidth = meta_bandwidth(&a.bandwidth)?;
    check_s(a.s)?;
    ensure!(a.t >= 1, "--t must be at least 1");
    let d = read_matrix(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let meta = meta_kernel(&d, bandwidth, a.t)?;
    let lambda2 = meta.second_eigenvalue()?;
    let s = match a.s {
        Some(s) => s,
        None => {
            ensure!(lambda2 < 1.0, "meta graph is disconnected; pass --s");
            1.0 / (1.0 - lambda2)
        }
    };
    let emb = meta_embedding(&meta, s, a.dims, !a.drop_trivial)?;
    out.matrix("meta_kernel", meta.kernel.values())?;
    out.matrix("meta_coords", &emb.coords)?;
    out.matrix("meta_eigenvalues", &column(&emb.eigenvalues))?;
    out.text(
        "meta_summary.txt",
        &format!(
            "graphs: {}\nepsilon: {}\nlambda2: {}\ns: {}\n",
            meta.len(),
            meta.epsilon,
            lambda2,
            s
        ),
    )?;
    Ok(())
}

fn angle_color(angle: Option<f64>) -> &'static str {
    match angle {
        None => "black",
        Some(a) if (a - FRAC_PI_2).abs() < 1e-9 => "#d62728",
        Some(a) if (a - PI).abs() < 1e-9 => "#2ca02c",
        Some(_) => "#1f77b4",
    }
}

pub fn torus(a: &TorusArgs, out: &mut Outputs) -> Result<()> {
    positive("tol", a.tol)?;
    check_s(a.s)?;
    ensure!(
        a.target_lambda2 > 0.0 && a.target_lambda2 < 1.0,
        "--target-lambda2 must lie in (0, 1)"
    );
    ensure!(a.points >= 2, "--points must be at least 2");
    let config = TorusExperimentConfig {
        n: a.points,
        seed: a.seed,
        target_lambda2: a.target_lambda2,
        rank: a.rank,
        t: a.t,
        bandwidth: meta_bandwidth(&a.bandwidth)?,
        dims: a.dims,
        s: a.s,
        keep_trivial: !a.drop_trivial,
        tol: a.tol,
    };
    let r = torus_experiment(&config)?;
    let coords = &r.embedding.coords;
    out.matrix("global_distances", &r.global_distances)?;
    out.matrix("meta_coords", coords)?;

    let mut table = String::from("graph,angle,radius");
    for k in 0..coords.ncols() {
        let _ = write!(table, ",c{k}");
    }
    table.push('\n');
    for (g, label) in r.labels.iter().enumerate() {
        match label {
            Some(l) => {
                let _ = write!(table, "{g},{},{}", l.angle, l.radius);
            }
            None => {
                let _ = write!(table, "{g},,");
            }
        }
        for k in 0..coords.ncols() {
            let _ = write!(table, ",{:.16e}", coords[(g, k)]);
        }
        table.push('\n');
    }
    out.text("torus_scatter.csv", &table)?;

    if coords.ncols() >= 2 {
        let (cx, cy) = if !a.drop_trivial && coords.ncols() >= 3 { (1, 2) } else { (0, 1) };
        let points: Vec<svg::Point> = r
            .labels
            .iter()
            .enumerate()
            .map(|(g, l)| svg::Point {
                x: coords[(g, cx)],
                y: coords[(g, cy)],
                color: angle_color(l.map(|l| l.angle)),
                radius: if l.is_some() { 4.0 } else { 6.0 },
            })
            .collect();
        let title = format!("meta diffusion map, t = {}, s = {:.3}", a.t, r.s);
        out.text(
            "torus_meta.svg",
            &svg::scatter(&title, &format!("coordinate {cx}"), &format!("coordinate {cy}"), &points),
        )?;
    }

    let mut summary = String::new();
    let _ = writeln!(summary, "graphs: {}", r.labels.len());
    let _ = writeln!(summary, "meta epsilon: {}", r.meta_epsilon);
    let _ = writeln!(summary, "meta lambda2: {}", r.meta_lambda2);
    let _ = writeln!(summary, "s: {}", r.s);
    let _ = writeln!(summary, "graph,epsilon,lambda2");
    for (g, (e, l)) in r.epsilons.iter().zip(&r.lambda2).enumerate() {
        let _ = writeln!(summary, "{g},{e},{l}");
    }
    out.text("torus_summary.txt", &summary)?;
    Ok(())
}

pub fn convergence(a: &ConvergenceArgs, out: &mut Outputs) -> Result<()> {
    positive("epsilon", a.epsilon)?;
    if let Some(b) = a.band {
        positive("band", b)?;
    }
    let config = ConvergenceConfig {
        t: a.t,
        n_grid: a.n_grid.clone(),
        trials: a.trials,
        reference_n: a.reference_n,
        seed: a.seed,
        ..ConvergenceConfig::default()
    };
    let report = torus_convergence(&config, a.epsilon)?;
    ensure!(
        report.pointwise.mean.iter().chain(&report.global.mean).all(|d| *d >= 0.0 && d.is_finite()),
        "deviations must be finite and nonnegative"
    );
    let mut summary = report.summary();
    let _ = writeln!(summary, "pointwise ratios: {:?}", report.pointwise_ratios());
    let _ = writeln!(summary, "global ratios: {:?}", report.global_ratios());
    out.text("convergence.csv", &report.to_csv())?;
    out.text("convergence_summary.txt", &summary)?;
    if let Some(band) = a.band {
        for (name, fit) in [("pointwise", report.pointwise_fit), ("global", report.global_fit)] {
            let Some(fit) = fit else {
                bail!("{name} slope is undefined\n{summary}");
            };
            ensure!(
                (fit.slope + 0.5).abs() <= band,
                "{name} slope {:.4} is outside -0.5 ± {band}\n{summary}",
                fit.slope
            );
        }
    }
    Ok(())
}

fn scene_inputs(s: &SceneArgs) -> Result<(SceneSpec, Vec<SensorSpec>, Option<ChangeSpec>)> {
    ensure!(s.noise >= 0.0 && s.noise.is_finite(), "--noise must be nonnegative");
    ensure!(!s.bands.is_empty(), "--bands needs at least one entry");
    let scene = SceneSpec {
        width: s.width,
        height: s.height,
        seed: s.seed,
        ..SceneSpec::default()
    };
    let sensors = s
        .bands
        .iter()
        .enumerate()
        .map(|(k, &count)| SensorSpec::random(count, s.noise, s.seed + 1 + k as u64))
        .collect();
    let change = (!s.no_change).then_some(ChangeSpec {
        epoch: s.change_epoch,
        row: s.change_row,
        col: s.change_col,
        size: s.change_size,
    });
    Ok((scene, sensors, change))
}

fn mask_matrix(mask: &[bool], width: usize, height: usize) -> Mat<f64> {
    Mat::from_fn(height, width, |r, c| if mask[r * width + c] { 1.0 } else { 0.0 })
}

pub fn change_detect(a: &ChangeArgs, out: &mut Outputs) -> Result<()> {
    positive("tol", a.tol)?;
    ensure!(
        a.target_lambda2 > 0.0 && a.target_lambda2 < 1.0,
        "--target-lambda2 must lie in (0, 1)"
    );
    let (scene, sensors, change) = scene_inputs(&a.scene)?;
    let (w, h) = (scene.width, scene.height);
    let time = match a.t {
        Time::Infinite => ChangeTime::Asymptotic,
        Time::Finite(t) => ChangeTime::Finite { t, rank: a.rank },
    };
    let config = ChangeDetectionConfig {
        scene,
        sensors,
        change,
        target_lambda2: a.target_lambda2,
        time,
        top_q: a.top,
        tol: a.tol,
    };
    let r = change_detection(&config)?;
    out.matrix("scores", &Mat::from_fn(h, w, |row, col| r.scores[row * w + col]))?;
    out.matrix("mask", &mask_matrix(&r.mask, w, h))?;
    let mut summary = String::new();
    let _ = writeln!(summary, "recall: {}", r.recall);
    let _ = writeln!(summary, "changed pixels: {}", r.mask.iter().filter(|m| **m).count());
    let _ = writeln!(summary, "epsilons: {:?}", r.epsilons);
    let _ = writeln!(summary, "snr_db: {:?}", r.snr_db);
    let _ = writeln!(summary, "top pixels (row,col): {:?}", r.top.iter().map(|p| (p / w, p % w)).collect::<Vec<_>>());
    out.text("change_summary.txt", &summary)?;
    Ok(())
}

pub fn gen_data(a: &GenDataArgs, out: &mut Outputs) -> Result<()> {
    let seed = a.scene.seed;
    match a.kind {
        DataKind::Torus => {
            let spec = match (a.pinch_angle, a.pinch_radius) {
                (Some(angle), Some(radius)) => TorusSpec::pinched(angle, radius),
                _ => TorusSpec::default(),
            };
            out.matrix("torus", sample_torus(&spec, a.points, seed)?.coords())?;
        }
        DataKind::TorusFamily => {
            let family = pinched_torus_family(a.points, seed)?;
            let mut labels = String::from("index,angle,radius\n");
            for (k, (cloud, label)) in family.clouds.iter().zip(&family.labels).enumerate() {
                out.matrix(&format!("torus_{k:02}"), cloud.coords())?;
                match label {
                    Some(l) => {
                        let _ = writeln!(labels, "{k},{},{}", l.angle, l.radius);
                    }
                    None => {
                        let _ = writeln!(labels, "{k},,");
                    }
                }
            }
            out.text("torus_labels.csv", &labels)?;
        }
        DataKind::StandardMap => {
            let orbits = standard_map_orbits(a.alpha, a.grid, a.steps)?;
            let len = a.steps + 1;
            let m = Mat::from_fn(orbits.len() * len, 4, |r, c| {
                let (o, s) = (r / len, r % len);
                match c {
                    0 => o as f64,
                    1 => s as f64,
                    2 => orbits[o][s][0],
                    _ => orbits[o][s][1],
                }
            });
            out.matrix("standard_map", &m)?;
        }
        DataKind::Cube => {
            let (scene, sensors, change) = scene_inputs(&a.scene)?;
            let cube = synthetic_cube_family(&scene, &sensors, change)?;
            for (k, epoch) in cube.epochs.iter().enumerate() {
                out.matrix(&format!("cube_epoch_{k}"), epoch.coords())?;
            }
            out.matrix("cube_mask", &mask_matrix(&cube.mask, cube.width, cube.height))?;
            out.text("cube_summary.txt", &format!("snr_db: {:?}\n", cube.snr_db))?;
        }
    }
    Ok(())
}

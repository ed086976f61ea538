//! Deterministic synthetic inputs: tori with a pinched section, standard
//! map orbits, and a multi-sensor image cube with a planted change.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use faer::Mat;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::kernels::PointCloud;

/// Sample count used for the full-size torus family.
pub const DEFAULT_TORUS_SAMPLES: usize = 7744;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pinch {
    /// Toroidal angle of the narrowest section.
    pub angle: f64,
    /// Lateral radius at `angle`.
    pub radius: f64,
    /// Angular distance over which the radius returns to normal.
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusSpec {
    pub major_radius: f64,
    pub minor_radius: f64,
    pub pinch: Option<Pinch>,
}

impl Default for TorusSpec {
    fn default() -> Self {
        Self {
            major_radius: 6.0,
            minor_radius: 2.0,
            pinch: None,
        }
    }
}

impl TorusSpec {
    pub fn pinched(angle: f64, radius: f64) -> Self {
        Self {
            pinch: Some(Pinch {
                angle,
                radius,
                half_width: FRAC_PI_4,
            }),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let (big, r) = (self.major_radius, self.minor_radius);
        if !(r > 0.0 && r < big && big.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "torus radii must satisfy 0 < r < R, got r = {r}, R = {big}"
            )));
        }
        if let Some(p) = self.pinch {
            if !(p.radius > 0.0 && p.radius <= r) {
                return Err(Error::InvalidInput(format!(
                    "pinch radius must lie in (0, {r}], got {}",
                    p.radius
                )));
            }
            if !(p.half_width > 0.0 && p.half_width < PI) {
                return Err(Error::InvalidInput(format!(
                    "pinch half-width must lie in (0, π), got {}",
                    p.half_width
                )));
            }
        }
        Ok(())
    }

    /// Lateral radius at toroidal angle `u`: linear from `r` down to the
    /// pinch radius and back up over the pinch window, `r` elsewhere.
    pub fn lateral_radius(&self, u: f64) -> f64 {
        let r = self.minor_radius;
        match self.pinch {
            None => r,
            Some(p) => {
                let d = angular_distance(u, p.angle);
                if d >= p.half_width {
                    r
                } else {
                    p.radius + (r - p.radius) * d / p.half_width
                }
            }
        }
    }

    pub fn point(&self, u: f64, v: f64) -> [f64; 3] {
        let rho = self.lateral_radius(u);
        let w = self.major_radius + rho * v.cos();
        [w * u.cos(), w * u.sin(), rho * v.sin()]
    }
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// `n` angle pairs `(u, v)` drawn uniformly from `[0, 2π)²`.
pub fn torus_angles(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)))
        .collect()
}

pub fn torus_from_angles(spec: &TorusSpec, angles: &[(f64, f64)]) -> Result<PointCloud> {
    spec.validate()?;
    let pts: Vec<Vec<f64>> = angles.iter().map(|&(u, v)| spec.point(u, v).to_vec()).collect();
    PointCloud::from_rows(&pts)
}

pub fn sample_torus(spec: &TorusSpec, n: usize, seed: u64) -> Result<PointCloud> {
    torus_from_angles(spec, &torus_angles(n, seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinchLabel {
    pub angle: f64,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct TorusFamily {
    pub clouds: Vec<PointCloud>,
    /// `None` for the unpinched torus.
    pub labels: Vec<Option<PinchLabel>>,
}

/// Pinch angles of the family, in generation order.
pub const PINCH_ANGLES: [f64; 3] = [FRAC_PI_2, PI, 3.0 * FRAC_PI_2];

/// Pinch radii of the family, in generation order.
pub fn pinch_radii() -> Vec<f64> {
    (0..10).map(|k| 1.0 + 0.1 * k as f64).collect()
}

/// The unpinched torus followed by every pinch angle crossed with every
/// pinch radius, all evaluated at the same sampled angles.
pub fn pinched_torus_family(n: usize, seed: u64) -> Result<TorusFamily> {
    let angles = torus_angles(n, seed);
    let mut specs = vec![(TorusSpec::default(), None)];
    for &angle in &PINCH_ANGLES {
        for radius in pinch_radii() {
            specs.push((TorusSpec::pinched(angle, radius), Some(PinchLabel { angle, radius })));
        }
    }
    let clouds = specs
        .iter()
        .map(|(spec, _)| torus_from_angles(spec, &angles))
        .collect::<Result<Vec<_>>>()?;
    Ok(TorusFamily {
        clouds,
        labels: specs.into_iter().map(|(_, l)| l).collect(),
    })
}

/// Orbits of the standard map `p' = p + α sin θ`, `θ' = θ + p'` (both mod
/// 2π) from a `grid × grid` lattice of initial conditions. Each orbit holds
/// the initial `(p, θ)` followed by `steps` iterates.
pub fn standard_map_orbits(alpha: f64, grid: usize, steps: usize) -> Result<Vec<Vec<[f64; 2]>>> {
    if grid == 0 || steps == 0 {
        return Err(Error::InvalidInput("grid and steps must be positive".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be nonnegative, got {alpha}")));
    }
    let h = TAU / grid as f64;
    let mut orbits = Vec::with_capacity(grid * grid);
    for a in 0..grid {
        for b in 0..grid {
            let (mut p, mut theta) = (a as f64 * h, b as f64 * h);
            let mut orbit = Vec::with_capacity(steps + 1);
            orbit.push([p, theta]);
            for _ in 0..steps {
                p = wrap(p + alpha * theta.sin());
                theta = wrap(theta + p);
                orbit.push([p, theta]);
            }
            orbits.push(orbit);
        }
    }
    Ok(orbits)
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Ground scene shared by every epoch of a synthetic cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub endmembers: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 32,
            height: 32,
            bands: 124,
            endmembers: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BandSelection {
    /// Every band in its original order.
    All,
    /// `count` distinct bands drawn and shuffled with the sensor seed.
    Random { count: usize },
}

/// How one epoch observes the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub bands: BandSelection,
    pub noise_std: f64,
    /// Half-width of the uniform global illumination factor around 1.
    pub illumination_jitter: f64,
    pub seed: u64,
}

impl SensorSpec {
    pub fn identity() -> Self {
        Self {
            bands: BandSelection::All,
            noise_std: 0.0,
            illumination_jitter: 0.0,
            seed: 0,
        }
    }

    pub fn random(count: usize, noise_std: f64, seed: u64) -> Self {
        Self {
            bands: BandSelection::Random { count },
            noise_std,
            illumination_jitter: 0.1,
            seed,
        }
    }
}

/// A square block of pixels that shows an anomalous material in one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeSpec {
    pub epoch: usize,
    pub row: usize,
    pub col: usize,
    pub size: usize,
}

#[derive(Debug, Clone)]
pub struct CubeFamily {
    /// One cloud per epoch; rows are pixels in row-major order.
    pub epochs: Vec<PointCloud>,
    /// Pixels covered by the planted change.
    pub mask: Vec<bool>,
    /// Realized `10 log10(mean(x²)/mean(η²))` per epoch.
    pub snr_db: Vec<f64>,
    pub width: usize,
    pub height: usize,
}

fn smooth_spectrum(bands: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let base = rng.random_range(0.1..0.3);
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.0..1.0),
                rng.random_range(0.05..0.25),
                rng.random_range(0.1..0.5),
            )
        })
        .collect();
    (0..bands)
        .map(|b| {
            let x = b as f64 / bands.max(2).saturating_sub(1) as f64;
            base + bumps
                .iter()
                .map(|(c, w, h)| h * (-(x - c).powi(2) / (2.0 * w * w)).exp())
                .sum::<f64>()
        })
        .collect()
}

fn abundance_fields(scene: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let (w, h) = (scene.width as f64, scene.height as f64);
    let scale = w.max(h);
    let fields: Vec<Vec<(f64, f64, f64)>> = (0..scene.endmembers)
        .map(|_| {
            (0..3)
                .map(|_| {
                    (
                        rng.random_range(0.0..w),
                        rng.random_range(0.0..h),
                        rng.random_range(0.15..0.4) * scale,
                    )
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(scene.width * scene.height);
    for r in 0..scene.height {
        for c in 0..scene.width {
            let raw: Vec<f64> = fields
                .iter()
                .map(|blobs| {
                    0.05 + blobs
                        .iter()
                        .map(|(cx, cy, s)| {
                            let d2 = (c as f64 - cx).powi(2) + (r as f64 - cy).powi(2);
                            (-d2 / (2.0 * s * s)).exp()
                        })
                        .sum::<f64>()
                })
                .collect();
            let total: f64 = raw.iter().sum();
            out.push(raw.iter().map(|v| v / total).collect());
        }
    }
    out
}

/// Builds one observed cloud per sensor from a shared scene, optionally
/// replacing a block of pixels with an anomalous spectrum in one epoch.
pub fn synthetic_cube_family(scene: &SceneSpec, sensors: &[SensorSpec], change: Option<ChangeSpec>) -> Result<CubeFamily> {
    if sensors.len() < 2 {
        return Err(Error::InvalidInput("at least two sensors are required".into()));
    }
    if scene.width * scene.height < 2 || scene.bands == 0 {
        return Err(Error::InvalidInput("scene must have at least two pixels and one band".into()));
    }
    if !(1..=16).contains(&scene.endmembers) {
        return Err(Error::InvalidInput(format!(
            "endmember count must lie in 1..=16, got {}",
            scene.endmembers
        )));
    }
    for s in sensors {
        if let BandSelection::Random { count } = s.bands {
            if count == 0 || count > scene.bands {
                return Err(Error::InvalidInput(format!(
                    "sensor requests {count} bands from a scene with {}",
                    scene.bands
                )));
            }
        }
        if !(s.noise_std >= 0.0 && s.noise_std.is_finite()) || !(0.0..1.0).contains(&s.illumination_jitter) {
            return Err(Error::InvalidInput("noise and illumination jitter must be in range".into()));
        }
    }
    if let Some(ch) = change {
        if ch.epoch >= sensors.len() || ch.size == 0 || ch.row + ch.size > scene.height || ch.col + ch.size > scene.width {
            return Err(Error::InvalidInput(format!("change block {ch:?} does not fit the scene")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let spectra: Vec<Vec<f64>> = (0..scene.endmembers).map(|_| smooth_spectrum(scene.bands, &mut rng)).collect();
    let anomaly: Vec<f64> = (0..scene.bands)
        .map(|b| {
            let x = b as f64 / scene.bands as f64;
            0.9 - 0.7 * x + 0.3 * (6.0 * PI * x).sin().abs()
        })
        .collect();
    let abundances = abundance_fields(scene, &mut rng);
    let pixels = scene.width * scene.height;
    let clean: Vec<Vec<f64>> = abundances
        .iter()
        .map(|ab| {
            (0..scene.bands)
                .map(|b| ab.iter().zip(&spectra).map(|(a, s)| a * s[b]).sum())
                .collect()
        })
        .collect();

    let mut mask = vec![false; pixels];
    if let Some(ch) = change {
        for r in ch.row..ch.row + ch.size {
            for c in ch.col..ch.col + ch.size {
                mask[r * scene.width + c] = true;
            }
        }
    }

    let mut epochs = Vec::with_capacity(sensors.len());
    let mut snr_db = Vec::with_capacity(sensors.len());
    for (e, sensor) in sensors.iter().enumerate() {
        let mut srng = ChaCha8Rng::seed_from_u64(sensor.seed);
        let bands: Vec<usize> = match sensor.bands {
            BandSelection::All => (0..scene.bands).collect(),
            BandSelection::Random { count } => {
                let mut all: Vec<usize> = (0..scene.bands).collect();
                all.shuffle(&mut srng);
                all.truncate(count);
                all
            }
        };
        let gain = if sensor.illumination_jitter > 0.0 {
            1.0 + srng.random_range(-sensor.illumination_jitter..sensor.illumination_jitter)
        } else {
            1.0
        };
        let noise = Normal::new(0.0, sensor.noise_std).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let changed = change.filter(|c| c.epoch == e).is_some();
        let mut signal2 = 0.0;
        let mut noise2 = 0.0;
        let mut data = Mat::<f64>::zeros(pixels, bands.len());
        for p in 0..pixels {
            let source = if changed && mask[p] { &anomaly } else { &clean[p] };
            for (k, &b) in bands.iter().enumerate() {
                let x = gain * source[b];
                let eta = if sensor.noise_std > 0.0 { noise.sample(&mut srng) } else { 0.0 };
                signal2 += x * x;
                noise2 += eta * eta;
                data[(p, k)] = x + eta;
            }
        }
        snr_db.push(if noise2 > 0.0 {
            10.0 * (signal2 / noise2).log10()
        } else {
            f64::INFINITY
        });
        epochs.push(PointCloud::new(data)?);
    }

    Ok(CubeFamily {
        epochs,
        mask,
        snr_db,
        width: scene.width,
        height: scene.height,
    })
}

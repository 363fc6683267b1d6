//! Synthetic 2-d two-class datasets with deterministic, seeded generation.
//!
//! All shipped generators keep every coordinate inside `[-3, 3]`, resampling
//! the rare draw that lands outside. The rings classes are separated by the
//! dead band `1.0 <= |z| <= 1.25`: class 0 fills the open disk `|z| < 1.0`,
//! class 1 the open annulus `1.25 < |z| < 2.0`, both with uniform angles.

use std::fmt;
use std::str::FromStr;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const COORD_BOUND: f64 = 3.0;
const RING_INNER: f64 = 1.0;
const RING_BAND_OUTER: f64 = 1.25;
const RING_OUTER: f64 = 2.0;
const MAX_RESAMPLES: usize = 10_000;

/// Which generator produced a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Two Gaussian clusters on the x-axis.
    Blobs,
    /// Inner disk vs outer annulus, separated by a dead band.
    Rings,
    /// Two interleaved half-circles with Gaussian noise.
    Moons,
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DatasetKind::Blobs => "blobs",
            DatasetKind::Rings => "rings",
            DatasetKind::Moons => "moons",
        };
        f.write_str(s)
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(DatasetKind::Blobs),
            "rings" => Ok(DatasetKind::Rings),
            "moons" => Ok(DatasetKind::Moons),
            other => Err(Error::contract(format!("unknown dataset kind '{other}'"))),
        }
    }
}

/// Generator knobs beyond kind, count, and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenParams {
    /// Gaussian noise scale for blobs and moons.
    pub noise: f64,
    /// Distance between the two blob centers.
    pub blob_separation: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            noise: 0.15,
            blob_separation: 3.0,
        }
    }
}

/// A labeled point set together with everything needed to regenerate it.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Vec<Tensor>,
    pub labels: Vec<usize>,
    pub kind: DatasetKind,
    pub per_class: usize,
    pub params: GenParams,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of all points carrying `label`.
    pub fn indices_of_class(&self, label: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }
}

/// Standard normal draw via Box-Muller; deterministic given the rng state.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(1e-300..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn in_bounds(p: &[f64; 2]) -> bool {
    p.iter().all(|v| v.abs() <= COORD_BOUND)
}

/// Draws until `gen` produces a point satisfying `ok`.
fn rejection_sample(
    rng: &mut ChaCha8Rng,
    mut gen: impl FnMut(&mut ChaCha8Rng) -> [f64; 2],
    ok: impl Fn(&[f64; 2]) -> bool,
) -> Result<[f64; 2]> {
    for _ in 0..MAX_RESAMPLES {
        let p = gen(rng);
        if ok(&p) && in_bounds(&p) {
            return Ok(p);
        }
    }
    Err(Error::contract(
        "dataset generator exceeded its resampling budget",
    ))
}

/// Generates `per_class` points for each of the two classes, deterministic in
/// the seed. Class 0 points come first, then class 1.
pub fn make_dataset(
    kind: DatasetKind,
    per_class: usize,
    params: &GenParams,
    seed: u64,
) -> Result<Dataset> {
    if per_class < 2 {
        return Err(Error::contract(format!(
            "need at least 2 points per class, got {per_class}"
        )));
    }
    if !(params.noise >= 0.0) || !params.blob_separation.is_finite() {
        return Err(Error::contract("generator parameters must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);

    for class in 0..2usize {
        for _ in 0..per_class {
            let p = match kind {
                DatasetKind::Blobs => {
                    let cx = if class == 0 {
                        -params.blob_separation / 2.0
                    } else {
                        params.blob_separation / 2.0
                    };
                    rejection_sample(
                        &mut rng,
                        |r| {
                            [
                                cx + params.noise * standard_normal(r),
                                params.noise * standard_normal(r),
                            ]
                        },
                        |_| true,
                    )?
                }
                DatasetKind::Rings => {
                    let (lo, hi) = if class == 0 {
                        (0.0, RING_INNER)
                    } else {
                        (RING_BAND_OUTER, RING_OUTER)
                    };
                    rejection_sample(
                        &mut rng,
                        |r| {
                            let theta = r.random_range(0.0..std::f64::consts::TAU);
                            let radius = r.random_range(lo..hi);
                            [radius * theta.cos(), radius * theta.sin()]
                        },
                        |p| {
                            // Check the realized norm so the dead band holds
                            // even after rounding in cos/sin.
                            let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
                            if class == 0 {
                                n < RING_INNER
                            } else {
                                n > RING_BAND_OUTER && n < RING_OUTER
                            }
                        },
                    )?
                }
                DatasetKind::Moons => rejection_sample(
                    &mut rng,
                    |r| {
                        let t = r.random_range(0.0..std::f64::consts::PI);
                        let (x, y) = if class == 0 {
                            (t.cos(), t.sin())
                        } else {
                            (1.0 - t.cos(), 0.5 - t.sin())
                        };
                        [
                            x + params.noise * standard_normal(r),
                            y + params.noise * standard_normal(r),
                        ]
                    },
                    |_| true,
                )?,
            };
            points.push(Tensor::vector(p.to_vec()));
            labels.push(class);
        }
    }

    Ok(Dataset {
        points,
        labels,
        kind,
        per_class,
        params: *params,
        seed,
    })
}

//! Nudged-elastic-band relaxation of a pivot path over an energy field.
//!
//! Each interior pivot feels the true force component perpendicular to the
//! path plus a spring force along the path tangent:
//!
//! ```text
//! F_i = -(g_i - (g_i . tau_i) tau_i) + k (|p_{i+1} - p_i| - |p_i - p_{i-1}|) tau_i
//! ```
//!
//! The perpendicular projection pulls the path into low-energy regions
//! without the pivots sliding downhill along the path; the spring term keeps
//! them roughly equidistant. Pivots move by plain fixed-step ascent on the
//! band force; endpoints never move.

use serde::{Deserialize, Serialize};

use crate::connect::path_class_profile;
use crate::energy::EnergyField;
use crate::error::{Error, Result};
use crate::exec;
use crate::path::PathState;
use crate::tensor::Tensor;

/// Knobs for one relaxation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NebConfig {
    /// Interior pivot count N for freshly built paths.
    pub pivots: usize,
    /// Spring constant of the equidistance force.
    pub spring_k: f64,
    /// Fixed step size for pivot updates.
    pub step_size: f64,
    /// Iteration budget.
    pub max_iters: usize,
    /// Stop once every band force norm falls below this.
    pub force_tol: f64,
    /// Verification samples per segment (M) for class-profile checks.
    pub samples_per_segment: usize,
    /// Use the energy-upwind tangent rule instead of the central difference.
    pub improved_tangent: bool,
}

impl Default for NebConfig {
    fn default() -> Self {
        Self {
            pivots: 20,
            spring_k: 1.0,
            step_size: 0.05,
            max_iters: 2000,
            force_tol: 1e-3,
            samples_per_segment: 10,
            improved_tangent: false,
        }
    }
}

impl NebConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pivots == 0 {
            return Err(Error::contract("NEB needs at least one interior pivot"));
        }
        if !(self.spring_k >= 0.0) {
            return Err(Error::contract("spring_k must be non-negative"));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::contract("step_size must be positive"));
        }
        if self.samples_per_segment == 0 {
            return Err(Error::contract("samples_per_segment must be at least 1"));
        }
        if !(self.force_tol >= 0.0) {
            return Err(Error::contract("force_tol must be non-negative"));
        }
        Ok(())
    }
}

/// Why a relaxation run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Every band force norm fell below the tolerance.
    Converged,
    /// The class profile reached the target class everywhere.
    TargetClassAttained,
    /// The iteration budget ran out.
    BudgetExhausted,
}

/// Per-iteration measurements, taken before the update step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    /// Largest energy over the interior pivots.
    pub max_pivot_energy: f64,
    /// Largest band force norm over the interior pivots.
    pub max_force_norm: f64,
}

/// Record of one relaxation run.
#[derive(Debug, Clone)]
pub struct RelaxTrace {
    /// Number of update steps actually applied.
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub steps: Vec<IterationStats>,
}

/// Unit tangent at interior pivot `i`.
///
/// Default rule: the central difference `p_{i+1} - p_{i-1}`. With
/// `improved` set, the difference toward the higher-energy neighbor is used
/// instead, blending both differences by the energy gaps at local extrema;
/// equal energies everywhere fall back to the central difference.
pub fn neb_tangent(
    path: &PathState,
    i: usize,
    energies: &[f64],
    improved: bool,
) -> Result<Tensor> {
    let pts = path.points();
    if i == 0 || i >= pts.len() - 1 {
        return Err(Error::contract(format!(
            "tangent index {i} is not an interior pivot"
        )));
    }
    if energies.len() != pts.len() {
        return Err(Error::contract(format!(
            "need one energy per path point, got {} for {}",
            energies.len(),
            pts.len()
        )));
    }

    let raw = if improved {
        let d_next = pts[i + 1].sub(&pts[i]);
        let d_prev = pts[i].sub(&pts[i - 1]);
        let (e_prev, e_this, e_next) = (energies[i - 1], energies[i], energies[i + 1]);
        if e_next > e_this && e_this > e_prev {
            d_next
        } else if e_next < e_this && e_this < e_prev {
            d_prev
        } else {
            let gap_next = (e_next - e_this).abs();
            let gap_prev = (e_prev - e_this).abs();
            let (gap_max, gap_min) = (gap_next.max(gap_prev), gap_next.min(gap_prev));
            if gap_max == 0.0 {
                // Flat energies around a local extremum: no upwind direction.
                pts[i + 1].sub(&pts[i - 1])
            } else if e_next > e_prev {
                let mut t = d_next.scaled(gap_max);
                t.add_scaled(&d_prev, gap_min);
                t
            } else {
                let mut t = d_next.scaled(gap_min);
                t.add_scaled(&d_prev, gap_max);
                t
            }
        }
    } else {
        pts[i + 1].sub(&pts[i - 1])
    };

    let norm = raw.norm();
    if norm == 0.0 {
        return Err(Error::DegeneratePath { i: i - 1, j: i + 1 });
    }
    Ok(raw.scaled(1.0 / norm))
}

/// Band force at interior pivot `i`: projected true force plus spring force.
pub fn neb_force(
    path: &PathState,
    i: usize,
    grad_i: &Tensor,
    tau_i: &Tensor,
    spring_k: f64,
) -> Tensor {
    let pts = path.points();
    debug_assert!(i >= 1 && i + 1 < pts.len(), "force index must be interior");
    let len_next = pts[i + 1].sub(&pts[i]).norm();
    let len_prev = pts[i].sub(&pts[i - 1]).norm();
    let spring = spring_k * (len_next - len_prev);
    let along = grad_i.dot(tau_i);
    let mut force = grad_i.scaled(-1.0);
    // Adding (g . tau) tau removes the parallel part of -g; the spring term
    // then supplies the only motion along the tangent.
    force.add_scaled(tau_i, along + spring);
    force
}

/// Relaxes the interior pivots of `path` over `field`.
///
/// Stops when every force norm drops below `cfg.force_tol`, when a
/// classifier-backed field reports the target class along the whole densified
/// path, or when the budget runs out. Endpoints are never touched.
pub fn neb_relax(
    mut path: PathState,
    field: &dyn EnergyField,
    cfg: &NebConfig,
) -> Result<(PathState, RelaxTrace)> {
    cfg.validate()?;
    let n = path.interior_count();
    if n == 0 {
        return Ok((
            path,
            RelaxTrace {
                iterations: 0,
                stop_reason: StopReason::Converged,
                steps: Vec::new(),
            },
        ));
    }

    let mut steps = Vec::new();
    let mut stop_reason = StopReason::BudgetExhausted;
    let mut iterations = 0;

    for iter in 0..cfg.max_iters {
        let energies = exec::try_map_collect(path.points(), |p| field.energy(p))?;
        if let Some(k) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::NonFinite(format!(
                "energy of pivot {k} at iteration {iter}"
            )));
        }

        let interior: Vec<&Tensor> = path.points()[1..=n].iter().collect();
        let grads = exec::try_map_collect(&interior, |p| field.gradient(p))?;

        let mut forces = Vec::with_capacity(n);
        let mut max_force: f64 = 0.0;
        for (k, grad) in grads.iter().enumerate() {
            let i = k + 1;
            if !grad.all_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of pivot {i} at iteration {iter}"
                )));
            }
            let tau = neb_tangent(&path, i, &energies, cfg.improved_tangent)?;
            let force = neb_force(&path, i, grad, &tau, cfg.spring_k);
            if !force.all_finite() {
                return Err(Error::NonFinite(format!(
                    "band force at pivot {i} at iteration {iter}"
                )));
            }
            max_force = max_force.max(force.norm());
            forces.push(force);
        }

        let max_pivot_energy = energies[1..=n].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        steps.push(IterationStats {
            max_pivot_energy,
            max_force_norm: max_force,
        });

        if max_force < cfg.force_tol {
            stop_reason = StopReason::Converged;
            break;
        }
        if let Some(target) = field.target_class() {
            let (all_target, _) =
                path_class_profile(&path, field, target, cfg.samples_per_segment)?;
            if all_target {
                stop_reason = StopReason::TargetClassAttained;
                break;
            }
        }

        for (pivot, force) in path.interior_mut().iter_mut().zip(&forces) {
            pivot.add_scaled(force, cfg.step_size);
        }
        iterations = iter + 1;
    }

    Ok((
        path,
        RelaxTrace {
            iterations,
            stop_reason,
            steps,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{ConstantField, RadialValley};
    use crate::path::straight_line_path;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn axis_path(xs: &[f64]) -> PathState {
        PathState::new(
            xs.iter().map(|&x| Tensor::vector(vec![x, 0.0])).collect(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn central_tangent_on_collinear_points() {
        let path = axis_path(&[0.0, 1.0, 2.0]);
        let tau = neb_tangent(&path, 1, &[0.0, 0.0, 0.0], false).unwrap();
        assert_eq!(tau.data(), &[1.0, 0.0]);
    }

    #[test]
    fn improved_tangent_points_uphill() {
        let path = axis_path(&[0.0, 1.0, 3.0]);
        // Energies rise monotonically: tangent must follow p[i+1] - p[i].
        let tau = neb_tangent(&path, 1, &[0.0, 0.5, 2.0], true).unwrap();
        assert_eq!(tau.data(), &[1.0, 0.0]);
        // Falling energies: tangent follows p[i] - p[i-1]; here both are +x.
        let tau = neb_tangent(&path, 1, &[2.0, 0.5, 0.0], true).unwrap();
        assert_eq!(tau.data(), &[1.0, 0.0]);
    }

    #[test]
    fn improved_tangent_blends_at_extrema() {
        // One-dimensional brute force of the upwind rule at a maximum.
        let path = PathState::new(
            vec![
                Tensor::vector(vec![0.0]),
                Tensor::vector(vec![1.0]),
                Tensor::vector(vec![4.0]),
            ],
            0,
        )
        .unwrap();
        // Local max with the bigger gap toward the right neighbor.
        let energies = [1.0, 5.0, 2.0];
        let tau = neb_tangent(&path, 1, &energies, true).unwrap();
        // gap_next = 3, gap_prev = 4, e_next > e_prev:
        // raw = d_next * 4 + d_prev * 3 = 3*4 + 1*3 = 15 > 0.
        assert_eq!(tau.data(), &[1.0]);
    }

    #[test]
    fn degenerate_neighbors_error() {
        let path = axis_path(&[1.0, 0.0, 1.0]);
        let err = neb_tangent(&path, 1, &[0.0, 0.0, 0.0], false).unwrap_err();
        assert!(matches!(err, Error::DegeneratePath { .. }));
    }

    #[test]
    fn force_vanishes_for_parallel_gradient_on_equidistant_pivots() {
        let path = axis_path(&[0.0, 1.0, 2.0]);
        let tau = neb_tangent(&path, 1, &[0.0; 3], false).unwrap();
        let grad = Tensor::vector(vec![3.0, 0.0]); // parallel to tau
        let force = neb_force(&path, 1, &grad, &tau, 1.0);
        assert!(force.norm() < 1e-12);
    }

    #[test]
    fn spring_pushes_toward_the_longer_segment() {
        // Left segment 0.5, right segment 1.5: force along +tau.
        let path = axis_path(&[0.0, 0.5, 2.0]);
        let tau = neb_tangent(&path, 1, &[0.0; 3], false).unwrap();
        let force = neb_force(&path, 1, &Tensor::zeros(vec![2]), &tau, 2.0);
        assert!((force.data()[0] - 2.0).abs() < 1e-12);
        assert!(force.data()[1].abs() < 1e-12);
    }

    #[test]
    fn constant_field_fixed_point() {
        let line = straight_line_path(
            &Tensor::vector(vec![0.0, 0.0]),
            &Tensor::vector(vec![1.0, 1.0]),
            7,
        )
        .unwrap();
        let before = line.clone();
        let (after, trace) = neb_relax(line, &ConstantField(4.0), &NebConfig::default()).unwrap();
        assert_eq!(trace.stop_reason, StopReason::Converged);
        assert_eq!(trace.iterations, 0);
        for (a, b) in after.points().iter().zip(before.points()) {
            assert!(a.bits_eq(b));
        }
    }

    /// Bowed start used to break the symmetry of straight lines through the
    /// valley center: offsets every interior pivot off the chord.
    pub(crate) fn bowed_path(
        a: &Tensor,
        b: &Tensor,
        n: usize,
        amplitude: f64,
        rng: &mut ChaCha8Rng,
    ) -> PathState {
        let mut path = straight_line_path(a, b, n).unwrap();
        for (k, pivot) in path.interior_mut().iter_mut().enumerate() {
            let s = (k + 1) as f64 / (n + 1) as f64 * std::f64::consts::PI;
            let bump = amplitude * s.sin() + rng.random_range(-0.02..0.02);
            pivot.data_mut()[1] += bump;
        }
        path
    }

    #[test]
    fn radial_valley_relaxes_to_the_arc() {
        let field = RadialValley { radius: 1.5 };
        let a = Tensor::vector(vec![1.5, 0.0]);
        let b = Tensor::vector(vec![-1.5, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let path = bowed_path(&a, &b, 15, 0.2, &mut rng);
        let (relaxed, trace) = neb_relax(path, &field, &NebConfig::default()).unwrap();
        assert!(trace.iterations <= 2000);
        let n = relaxed.interior_count();
        for pivot in &relaxed.points()[1..=n] {
            assert!(
                (pivot.norm() - 1.5).abs() < 0.05,
                "pivot radius {} off the valley",
                pivot.norm()
            );
            assert!(field.energy(pivot).unwrap() < 0.01);
        }
        // Endpoints untouched, bit for bit.
        assert!(relaxed.points()[0].bits_eq(&a));
        assert!(relaxed.points()[n + 1].bits_eq(&b));
    }

    #[test]
    fn spring_keeps_segments_comparable() {
        let field = RadialValley { radius: 1.5 };
        let a = Tensor::vector(vec![1.5, 0.0]);
        let b = Tensor::vector(vec![-1.5, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let path = bowed_path(&a, &b, 15, 0.25, &mut rng);
        let cfg = NebConfig {
            spring_k: 0.5,
            ..NebConfig::default()
        };
        let (relaxed, _) = neb_relax(path, &field, &cfg).unwrap();
        let lengths: Vec<f64> = relaxed
            .points()
            .windows(2)
            .map(|w| w[1].sub(&w[0]).norm())
            .collect();
        let max = lengths.iter().cloned().fold(f64::MIN, f64::max);
        let min = lengths.iter().cloned().fold(f64::MAX, f64::min);
        assert!(
            max / min <= 2.0,
            "segment spread too wide: max {max}, min {min}"
        );
    }

    proptest! {
        #[test]
        fn tangents_are_unit_norm(seed in 0_u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Tensor> = (0..5)
                .map(|_| Tensor::vector(vec![
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                ]))
                .collect();
            let path = PathState::new(pts, 0).unwrap();
            let energies: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..3.0)).collect();
            for i in 1..=3 {
                for improved in [false, true] {
                    let tau = neb_tangent(&path, i, &energies, improved).unwrap();
                    prop_assert!((tau.norm() - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn force_decomposition_identity(seed in 0_u64..200) {
            // Parallel part equals the spring term; perpendicular part equals
            // the projected negative gradient.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Tensor> = (0..3)
                .map(|_| Tensor::vector(vec![
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                ]))
                .collect();
            let path = PathState::new(pts, 0).unwrap();
            let energies = [0.0, 0.0, 0.0];
            let tau = match neb_tangent(&path, 1, &energies, false) {
                Ok(t) => t,
                Err(_) => return Ok(()), // coincident random neighbors
            };
            let grad = Tensor::vector(vec![
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ]);
            let k = rng.random_range(0.0..2.0);
            let force = neb_force(&path, 1, &grad, &tau, k);

            let pts = path.points();
            let spring = k * (pts[2].sub(&pts[1]).norm() - pts[1].sub(&pts[0]).norm());
            let parallel = force.dot(&tau);
            prop_assert!((parallel - spring).abs() < 1e-10);

            let mut perp = force.clone();
            perp.add_scaled(&tau, -parallel);
            let mut grad_perp = grad.scaled(-1.0);
            grad_perp.add_scaled(&tau, grad.dot(&tau));
            prop_assert!(perp.sub(&grad_perp).norm() < 1e-10);
        }
    }
}

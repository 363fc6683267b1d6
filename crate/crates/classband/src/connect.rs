//! Class profiles along paths and the per-pair connectivity verdict.

use crate::energy::{ClassifierEnergy, EnergyField};
use crate::error::{Error, Result};
use crate::exec;
use crate::mlp::MlpModel;
use crate::neb::{neb_relax, NebConfig};
use crate::path::{densify, straight_line_path, PathState};
use crate::tensor::Tensor;

/// Outcome of one pair test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The straight line already stays in the target class everywhere.
    LinearlyConnectable,
    /// Relaxation found a bent path that stays in the target class.
    NonlinearlyConnectable,
    /// No qualifying path was found within the iteration budget.
    NotConnected,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::LinearlyConnectable => "linear",
            Verdict::NonlinearlyConnectable => "nonlinear",
            Verdict::NotConnected => "none",
        }
    }
}

/// Classification of one densified path sample.
#[derive(Debug, Clone)]
pub struct ProfileSample {
    /// Position along the path in `[0, 1]`.
    pub t: f64,
    /// Softmax probabilities per class.
    pub probs: Vec<f64>,
    /// Predicted class (argmax, ties to the lowest index).
    pub class: usize,
    pub is_target: bool,
}

/// Everything recorded about one tested pair.
///
/// `max_energy_initial` / `max_energy_final` are the largest field energies
/// over the densified samples of the straight line and of the final path.
/// For a linear verdict the final profile repeats the linear one.
#[derive(Debug, Clone)]
pub struct PairVerdict {
    pub verdict: Verdict,
    pub target: usize,
    pub linear_profile: Vec<ProfileSample>,
    pub final_profile: Vec<ProfileSample>,
    pub iterations_used: usize,
    pub max_energy_initial: f64,
    pub max_energy_final: f64,
}

impl PairVerdict {
    /// Re-checks the verdict/profile implications from the stored profiles
    /// alone. Used by tests and report validation.
    pub fn is_sound(&self) -> bool {
        let linear_ok = self.linear_profile.iter().all(|s| s.is_target);
        let final_ok = self.final_profile.iter().all(|s| s.is_target);
        match self.verdict {
            Verdict::LinearlyConnectable => linear_ok,
            Verdict::NonlinearlyConnectable => !linear_ok && final_ok,
            Verdict::NotConnected => !final_ok,
        }
    }
}

/// Classifies every densified sample of `path` and reports whether all of
/// them land in `target`. Ties in the argmax count as a failure unless the
/// winning lowest index is the target itself.
pub fn path_class_profile(
    path: &PathState,
    field: &dyn EnergyField,
    target: usize,
    samples_per_segment: usize,
) -> Result<(bool, Vec<ProfileSample>)> {
    if !field.has_classifier() {
        return Err(Error::MissingCapability("classify"));
    }
    let samples = densify(path, samples_per_segment)?;
    let profile = exec::try_map_collect(&samples, |(t, p)| -> Result<ProfileSample> {
        let (class, probs) = field.classify(p)?;
        Ok(ProfileSample {
            t: *t,
            probs: probs.data().to_vec(),
            class,
            is_target: class == target,
        })
    })?;
    let all_target = profile.iter().all(|s| s.is_target);
    Ok((all_target, profile))
}

/// Largest field energy over the densified samples of `path`.
fn max_sample_energy(
    path: &PathState,
    field: &dyn EnergyField,
    samples_per_segment: usize,
) -> Result<f64> {
    let samples = densify(path, samples_per_segment)?;
    let energies = exec::try_map_collect(&samples, |(_, p)| field.energy(p))?;
    Ok(energies.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Tests whether two same-class points connect at latent layer `layer_index`.
///
/// Both endpoints must carry the same predicted class, which becomes the
/// target. The straight line is profiled first; only if it fails does the
/// band relaxation run. Returns the verdict along with the final path.
pub fn connect_pair_detailed(
    model: &MlpModel,
    layer_index: usize,
    x1: &Tensor,
    x2: &Tensor,
    cfg: &NebConfig,
) -> Result<(PairVerdict, PathState)> {
    cfg.validate()?;
    let (c1, _) = model.predict(x1)?;
    let (c2, _) = model.predict(x2)?;
    if c1 != c2 {
        return Err(Error::RejectedPair {
            endpoint: 2,
            expected: c1,
            found: c2,
        });
    }
    let target = c1;

    let z1 = model.latent(x1, layer_index)?;
    let z2 = model.latent(x2, layer_index)?;
    let field = ClassifierEnergy::new(model, layer_index, target)?;
    let line = straight_line_path(&z1, &z2, cfg.pivots)?.with_layer_index(layer_index);

    let (linear_ok, linear_profile) =
        path_class_profile(&line, &field, target, cfg.samples_per_segment)?;
    let max_energy_initial = max_sample_energy(&line, &field, cfg.samples_per_segment)?;

    if linear_ok {
        let verdict = PairVerdict {
            verdict: Verdict::LinearlyConnectable,
            target,
            final_profile: linear_profile.clone(),
            linear_profile,
            iterations_used: 0,
            max_energy_initial,
            max_energy_final: max_energy_initial,
        };
        return Ok((verdict, line));
    }

    let (relaxed, trace) = neb_relax(line, &field, cfg)?;
    let (final_ok, final_profile) =
        path_class_profile(&relaxed, &field, target, cfg.samples_per_segment)?;
    let max_energy_final = max_sample_energy(&relaxed, &field, cfg.samples_per_segment)?;

    let verdict = PairVerdict {
        verdict: if final_ok {
            Verdict::NonlinearlyConnectable
        } else {
            Verdict::NotConnected
        },
        target,
        linear_profile,
        final_profile,
        iterations_used: trace.iterations,
        max_energy_initial,
        max_energy_final,
    };
    Ok((verdict, relaxed))
}

/// [`connect_pair_detailed`] without the final path.
pub fn connect_pair(
    model: &MlpModel,
    layer_index: usize,
    x1: &Tensor,
    x2: &Tensor,
    cfg: &NebConfig,
) -> Result<PairVerdict> {
    connect_pair_detailed(model, layer_index, x1, x2, cfg).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_dataset, DatasetKind, GenParams};
    use crate::energy::RadialValley;
    use crate::mlp::{accuracy, init_model, train_adam, MlpSpec, TrainConfig};
    use std::sync::OnceLock;

    /// Rings classifier shared across tests in this module.
    fn rings_model() -> &'static MlpModel {
        static MODEL: OnceLock<MlpModel> = OnceLock::new();
        MODEL.get_or_init(|| {
            let data = make_dataset(DatasetKind::Rings, 100, &GenParams::default(), 3).unwrap();
            let model = init_model(&MlpSpec::new(vec![2, 32, 32, 2], 1).unwrap()).unwrap();
            let (trained, _) = train_adam(&model, &data, &TrainConfig::default()).unwrap();
            assert!(accuracy(&trained, &data).unwrap() >= 0.98);
            trained
        })
    }

    fn annulus_point(radius: f64, angle: f64) -> Tensor {
        Tensor::vector(vec![radius * angle.cos(), radius * angle.sin()])
    }

    #[test]
    fn profile_requires_a_classifier_field() {
        let path = straight_line_path(
            &Tensor::vector(vec![0.0, 0.0]),
            &Tensor::vector(vec![1.0, 0.0]),
            3,
        )
        .unwrap();
        let err = path_class_profile(&path, &RadialValley { radius: 1.0 }, 0, 2).unwrap_err();
        assert!(matches!(err, Error::MissingCapability("classify")));
    }

    #[test]
    fn constant_path_profile_matches_predict() {
        let model = rings_model();
        let p = annulus_point(1.6, 0.4);
        let (class, _) = model.predict(&p).unwrap();
        let field = ClassifierEnergy::new(model, 0, class).unwrap();
        let path = straight_line_path(&p, &p, 4).unwrap();
        let (all_target, profile) = path_class_profile(&path, &field, class, 3).unwrap();
        assert!(all_target);
        assert!(profile.iter().all(|s| s.class == class));
    }

    #[test]
    fn nearby_annulus_points_profile_clean() {
        // Small angular separation keeps the chord deep inside the annulus.
        let model = rings_model();
        let a = annulus_point(1.6, 0.0);
        let b = annulus_point(1.6, 0.3);
        let field = ClassifierEnergy::new(model, 0, 1).unwrap();
        let path = straight_line_path(&a, &b, 10).unwrap();
        let (all_target, _) = path_class_profile(&path, &field, 1, 10).unwrap();
        assert!(all_target);

        // Independent dense sweep oracle over the same chord.
        let delta = b.sub(&a);
        for k in 0..=500 {
            let mut p = a.clone();
            p.add_scaled(&delta, k as f64 / 500.0);
            let (class, _) = model.predict(&p).unwrap();
            assert_eq!(class, 1, "sweep point {k} left the target class");
        }
    }

    #[test]
    fn antipodal_annulus_points_fail_the_linear_profile() {
        let model = rings_model();
        let a = annulus_point(1.6, 0.0);
        let b = annulus_point(1.6, std::f64::consts::PI);
        // The chord passes through the origin, deep in class 0.
        let (mid_class, _) = model.predict(&Tensor::vector(vec![0.0, 0.0])).unwrap();
        assert_eq!(mid_class, 0);
        let field = ClassifierEnergy::new(model, 0, 1).unwrap();
        let path = straight_line_path(&a, &b, 20).unwrap();
        let (all_target, profile) = path_class_profile(&path, &field, 1, 10).unwrap();
        assert!(!all_target);
        assert!(profile.iter().any(|s| !s.is_target));
    }

    #[test]
    fn antipodal_pair_becomes_nonlinearly_connectable() {
        let model = rings_model();
        let a = annulus_point(1.6, 0.0);
        let b = annulus_point(1.6, std::f64::consts::PI);
        let (verdict, path) =
            connect_pair_detailed(model, 0, &a, &b, &NebConfig::default()).unwrap();
        assert_eq!(verdict.verdict, Verdict::NonlinearlyConnectable);
        assert!(verdict.iterations_used > 0);
        assert!(verdict.max_energy_final < verdict.max_energy_initial);
        assert!(verdict.is_sound());
        // Endpoints still exact.
        assert!(path.points()[0].bits_eq(&a));
        assert!(path.points().last().unwrap().bits_eq(&b));
    }

    #[test]
    fn nearby_pair_short_circuits_linearly() {
        let model = rings_model();
        let a = annulus_point(1.6, 0.2);
        let b = annulus_point(1.7, 0.5);
        let verdict = connect_pair(model, 0, &a, &b, &NebConfig::default()).unwrap();
        assert_eq!(verdict.verdict, Verdict::LinearlyConnectable);
        assert_eq!(verdict.iterations_used, 0);
        assert!(verdict.is_sound());
        assert_eq!(verdict.max_energy_initial, verdict.max_energy_final);
    }

    #[test]
    fn identical_points_are_trivially_linear() {
        let model = rings_model();
        let a = annulus_point(1.5, 1.0);
        let verdict = connect_pair(model, 0, &a, &a, &NebConfig::default()).unwrap();
        assert_eq!(verdict.verdict, Verdict::LinearlyConnectable);
        assert_eq!(verdict.iterations_used, 0);
    }

    #[test]
    fn mixed_class_endpoints_are_rejected() {
        let model = rings_model();
        let inner = Tensor::vector(vec![0.2, 0.1]);
        let outer = annulus_point(1.6, 0.0);
        let (ci, _) = model.predict(&inner).unwrap();
        let (co, _) = model.predict(&outer).unwrap();
        assert_ne!(ci, co);
        let err = connect_pair(model, 0, &inner, &outer, &NebConfig::default()).unwrap_err();
        assert!(matches!(err, Error::RejectedPair { endpoint: 2, .. }));
    }

    #[test]
    fn verdicts_hold_at_latent_layers_too() {
        let model = rings_model();
        let a = annulus_point(1.6, 0.0);
        let b = annulus_point(1.6, std::f64::consts::PI);
        for layer in 1..=model.hidden_layer_count() {
            let verdict = connect_pair(model, layer, &a, &b, &NebConfig::default()).unwrap();
            assert!(verdict.is_sound(), "unsound verdict at layer {layer}");
            assert_ne!(
                verdict.verdict,
                Verdict::NotConnected,
                "budget exhausted at layer {layer}"
            );
        }
    }
}

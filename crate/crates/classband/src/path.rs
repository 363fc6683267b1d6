//! Discretized paths between two fixed endpoints in a representation space.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// An ordered pivot sequence with fixed endpoints.
///
/// `points[0]` and `points[N+1]` are the endpoints; the `N` interior pivots
/// are the only points a relaxation may move.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    points: Vec<Tensor>,
    /// Which representation space the path lives in (0 = input space).
    pub layer_index: usize,
}

impl PathState {
    pub fn new(points: Vec<Tensor>, layer_index: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::contract("a path needs at least its two endpoints"));
        }
        let shape = points[0].shape();
        if let Some(bad) = points.iter().find(|p| p.shape() != shape) {
            return Err(Error::ShapeMismatch {
                context: "PathState::new",
                expected: shape.to_vec(),
                found: bad.shape().to_vec(),
            });
        }
        Ok(Self {
            points,
            layer_index,
        })
    }

    pub fn with_layer_index(mut self, layer_index: usize) -> Self {
        self.layer_index = layer_index;
        self
    }

    pub fn points(&self) -> &[Tensor] {
        &self.points
    }

    /// Number of movable interior pivots (N).
    pub fn interior_count(&self) -> usize {
        self.points.len() - 2
    }

    pub fn endpoints(&self) -> (&Tensor, &Tensor) {
        (&self.points[0], &self.points[self.points.len() - 1])
    }

    /// Mutable access to the interior pivots only; endpoints stay fixed by
    /// construction.
    pub(crate) fn interior_mut(&mut self) -> &mut [Tensor] {
        let n = self.points.len();
        &mut self.points[1..n - 1]
    }
}

/// The straight line from `a` to `b` with `n_pivots` interior pivots:
/// `points[i] = a + (i / (N+1)) * (b - a)`. Endpoints are exact copies.
pub fn straight_line_path(a: &Tensor, b: &Tensor, n_pivots: usize) -> Result<PathState> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            context: "straight_line_path",
            expected: a.shape().to_vec(),
            found: b.shape().to_vec(),
        });
    }
    if n_pivots == 0 {
        return Err(Error::contract("straight_line_path needs at least one pivot"));
    }
    let delta = b.sub(a);
    let mut points = Vec::with_capacity(n_pivots + 2);
    points.push(a.clone());
    for i in 1..=n_pivots {
        let t = i as f64 / (n_pivots + 1) as f64;
        let mut p = a.clone();
        p.add_scaled(&delta, t);
        points.push(p);
    }
    points.push(b.clone());
    PathState::new(points, 0)
}

/// `m` equally spaced samples strictly inside each segment plus every pivot
/// and endpoint, ordered by the global position `t` in `[0, 1]`.
///
/// Total sample count is `(N + 2) + (N + 1) * m`.
pub fn densify(path: &PathState, m: usize) -> Result<Vec<(f64, Tensor)>> {
    if m == 0 {
        return Err(Error::contract("densify needs at least one sample per segment"));
    }
    let pts = path.points();
    let segments = pts.len() - 1;
    let mut out = Vec::with_capacity(pts.len() + segments * m);
    for i in 0..segments {
        let t_pivot = i as f64 / segments as f64;
        out.push((t_pivot, pts[i].clone()));
        let delta = pts[i + 1].sub(&pts[i]);
        for j in 1..=m {
            let s = j as f64 / (m + 1) as f64;
            let t = (i as f64 + s) / segments as f64;
            let mut p = pts[i].clone();
            p.add_scaled(&delta, s);
            out.push((t, p));
        }
    }
    out.push((1.0, pts[segments].clone()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn midpoint_pivot() {
        let path = straight_line_path(
            &Tensor::vector(vec![0.0, 0.0]),
            &Tensor::vector(vec![2.0, 2.0]),
            1,
        )
        .unwrap();
        assert_eq!(path.points()[1].data(), &[1.0, 1.0]);
    }

    #[test]
    fn coincident_endpoints_give_a_constant_path() {
        let a = Tensor::vector(vec![0.5, -0.5]);
        let path = straight_line_path(&a, &a, 3).unwrap();
        for p in path.points() {
            assert!(p.bits_eq(&a));
        }
    }

    #[test]
    fn affine_formula_in_one_dimension() {
        let path = straight_line_path(&Tensor::vector(vec![0.0]), &Tensor::vector(vec![3.0]), 2)
            .unwrap();
        let xs: Vec<f64> = path.points().iter().map(|p| p.data()[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn endpoints_are_exact_copies() {
        let a = Tensor::vector(vec![0.1, 0.2, 0.3]);
        let b = Tensor::vector(vec![-0.7, 0.9, 2.4]);
        let path = straight_line_path(&a, &b, 5).unwrap();
        let (pa, pb) = path.endpoints();
        assert!(pa.bits_eq(&a));
        assert!(pb.bits_eq(&b));
    }

    #[test]
    fn densify_positions_for_one_pivot_one_sample() {
        let path = straight_line_path(&Tensor::vector(vec![0.0]), &Tensor::vector(vec![1.0]), 1)
            .unwrap();
        let samples = densify(&path, 1).unwrap();
        let ts: Vec<f64> = samples.iter().map(|(t, _)| *t).collect();
        assert_eq!(ts, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn densify_count_formula() {
        let path = straight_line_path(
            &Tensor::vector(vec![0.0, 0.0]),
            &Tensor::vector(vec![1.0, 1.0]),
            4,
        )
        .unwrap();
        assert_eq!(densify(&path, 10).unwrap().len(), 56);
    }

    #[test]
    fn densify_rejects_zero_samples() {
        let path = straight_line_path(&Tensor::vector(vec![0.0]), &Tensor::vector(vec![1.0]), 1)
            .unwrap();
        assert!(densify(&path, 0).is_err());
    }

    #[test]
    fn straight_line_samples_are_collinear() {
        let a = Tensor::vector(vec![1.0, -2.0]);
        let b = Tensor::vector(vec![-0.5, 4.0]);
        let path = straight_line_path(&a, &b, 3).unwrap();
        let dir = b.sub(&a);
        for (_, p) in densify(&path, 1).unwrap() {
            let rel = p.sub(&a);
            // 2-d cross product vanishes for points on the segment.
            let cross = rel.data()[0] * dir.data()[1] - rel.data()[1] * dir.data()[0];
            assert!(cross.abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn densify_is_ordered_and_counts_match(n in 1_usize..8, m in 1_usize..6) {
            let path = straight_line_path(
                &Tensor::vector(vec![0.0, 1.0]),
                &Tensor::vector(vec![1.0, -1.0]),
                n,
            ).unwrap();
            let samples = densify(&path, m).unwrap();
            prop_assert_eq!(samples.len(), (n + 2) + (n + 1) * m);
            for pair in samples.windows(2) {
                prop_assert!(pair[0].0 < pair[1].0);
            }
            prop_assert_eq!(samples[0].0, 0.0);
            prop_assert_eq!(samples.last().unwrap().0, 1.0);
        }
    }
}

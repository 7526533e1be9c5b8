//! Approximate Caratheodory: replace a convex combination by a sparse uniform
//! average over at most `k` of its atoms while staying close to the original
//! point in Euclidean norm.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{norm2, sub};

const RESTARTS: u64 = 64;

#[derive(Debug, Clone)]
pub struct SparseCombination {
    /// Indices into the input point list, one per slot (repeats allowed).
    pub chosen: Vec<usize>,
    /// The uniform average of the chosen points.
    pub point: Vec<f64>,
    /// `||point - target||_2` where `target` is the exact combination.
    pub error: f64,
    /// `2 max_t ||z_t|| / sqrt(k)`, the guarantee the sampler is held to.
    pub bound: f64,
}

/// Sparsifies `sum_t weights[t] * points[t]` into a uniform average of `k`
/// atoms with error at most `2 max||z_t|| / sqrt(k)`.
///
/// Strategy: seeded i.i.d. sampling from the weights with a few dozen
/// restarts, falling back to a deterministic greedy partial-sum construction.
pub fn approx_caratheodory(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    seed: u64,
) -> Result<SparseCombination> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(Error::invalid(
            "approx_caratheodory needs matching nonempty points and weights",
        ));
    }
    if k == 0 {
        return Err(Error::invalid("approx_caratheodory requires k >= 1"));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::invalid(
            "approx_caratheodory points have mixed dimensions",
        ));
    }
    if weights.iter().any(|&w| w < -1e-12) {
        return Err(Error::invalid(
            "approx_caratheodory weights must be nonnegative",
        ));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || (total - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(
            "approx_caratheodory weights must sum to one",
        ));
    }

    let mut target = vec![0.0; dim];
    for (p, &w) in points.iter().zip(weights) {
        for (a, &v) in target.iter_mut().zip(p) {
            *a += w * v;
        }
    }
    let max_norm = points.iter().map(|p| norm2(p)).fold(0.0f64, f64::max);
    let bound = 2.0 * max_norm / (k as f64).sqrt();

    // a point mass needs no sparsification
    if let Some(heavy) = weights.iter().position(|&w| w > 1.0 - 1e-12) {
        return Ok(SparseCombination {
            chosen: vec![heavy; k],
            point: points[heavy].clone(),
            error: norm2(&sub(&points[heavy], &target)),
            bound,
        });
    }

    let clamped: Vec<f64> = weights.iter().map(|&w| w.max(0.0)).collect();
    let dist = WeightedIndex::new(&clamped)
        .map_err(|e| Error::invalid(format!("bad sampling weights: {e}")))?;

    let mut best: Option<SparseCombination> = None;
    for restart in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart));
        let chosen: Vec<usize> = (0..k).map(|_| dist.sample(&mut rng)).collect();
        let cand = evaluate(points, &chosen, &target, bound);
        if best.as_ref().is_none_or(|b| cand.error < b.error) {
            best = Some(cand);
        }
        if best.as_ref().unwrap().error <= 1e-14 * (1.0 + max_norm) {
            break;
        }
    }

    // greedy: fill slot j so the running sum tracks j * target
    let mut chosen = Vec::with_capacity(k);
    let mut running = vec![0.0; dim];
    for j in 1..=k {
        let mut pick = 0;
        let mut pick_err = f64::INFINITY;
        for (t, p) in points.iter().enumerate() {
            let mut err = 0.0;
            for ((&r, &v), &g) in running.iter().zip(p).zip(&target) {
                let d = r + v - j as f64 * g;
                err += d * d;
            }
            if err < pick_err {
                pick_err = err;
                pick = t;
            }
        }
        for (r, &v) in running.iter_mut().zip(&points[pick]) {
            *r += v;
        }
        chosen.push(pick);
    }
    let greedy = evaluate(points, &chosen, &target, bound);
    let winner = match best {
        Some(b) if b.error < greedy.error => b,
        _ => greedy,
    };
    if winner.error <= bound {
        return Ok(winner);
    }
    Err(Error::NumericalFailure {
        what: format!("approx_caratheodory: no k={k} combination within bound {bound:.6e}"),
        best: Some(winner.error),
    })
}

fn evaluate(
    points: &[Vec<f64>],
    chosen: &[usize],
    target: &[f64],
    bound: f64,
) -> SparseCombination {
    let k = chosen.len() as f64;
    let mut avg = vec![0.0; target.len()];
    for &t in chosen {
        for (a, &v) in avg.iter_mut().zip(&points[t]) {
            *a += v / k;
        }
    }
    let error = norm2(&sub(&avg, target));
    SparseCombination {
        chosen: chosen.to_vec(),
        point: avg,
        error,
        bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_passthrough() {
        let pts = vec![vec![1.0, 2.0]];
        let out = approx_caratheodory(&pts, &[1.0], 3, 7).unwrap();
        assert_eq!(out.chosen, vec![0, 0, 0]);
        assert!(out.error < 1e-12);
    }

    #[test]
    fn symmetric_pair_needs_both() {
        // target 0 from {+1, -1} with equal weight; k=2 must pick one of each
        let pts = vec![vec![1.0], vec![-1.0]];
        let out = approx_caratheodory(&pts, &[0.5, 0.5], 2, 1).unwrap();
        let mut sorted = out.chosen.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1]);
        assert!(out.error < 1e-12);
        assert!((out.bound - 2.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn error_within_bound() {
        let pts = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![-1.0, -1.0, -1.0],
        ];
        let w = [0.3, 0.3, 0.2, 0.2];
        for k in [4, 16, 64] {
            let out = approx_caratheodory(&pts, &w, k, 42).unwrap();
            assert!(
                out.error <= out.bound,
                "k={k}: {} > {}",
                out.error,
                out.bound
            );
            assert_eq!(out.chosen.len(), k);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-0.5, -0.5]];
        let w = [0.4, 0.4, 0.2];
        let a = approx_caratheodory(&pts, &w, 8, 5).unwrap();
        let b = approx_caratheodory(&pts, &w, 8, 5).unwrap();
        assert_eq!(a.chosen, b.chosen);
    }

    #[test]
    fn rejects_bad_weights() {
        let pts = vec![vec![1.0], vec![2.0]];
        assert!(approx_caratheodory(&pts, &[0.9, 0.3], 2, 0).is_err());
        assert!(approx_caratheodory(&pts, &[1.2, -0.2], 2, 0).is_err());
    }
}

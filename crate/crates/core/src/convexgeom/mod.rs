//! Oracle-driven convex geometry: bounded trade sets, separation oracles,
//! ellipsoid linear optimization, hull projection/membership and approximate
//! Caratheodory rounding.

pub mod caratheodory;
pub mod ellipsoid;
pub mod projection;

pub use caratheodory::approx_caratheodory;
pub use ellipsoid::{ellipsoid_max, ellipsoid_max_concave, SeparationOracle};
pub use projection::{project_hull, Atom, Projection};

use serde::{Deserialize, Serialize};

use crate::economy::UtilitySpec;
use crate::error::{Error, Result};
use crate::linalg::{add, norm1, norm2, scale, sub};

/// The bounded better-than set of one consumer, expressed in net trades from
/// the endowment: `{ z : z + w >= 0, u(z + w) >= threshold, ||z||_2 <= radius }`.
#[derive(Debug, Clone)]
pub struct TradeSet {
    pub consumer_index: usize,
    pub utility: UtilitySpec,
    pub endowment: Vec<f64>,
    pub threshold: f64,
    pub radius: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeparationResult {
    Inside,
    /// `pi` with `pi . q < pi . z` for every `z` in the set.
    Hyperplane(Vec<f64>),
}

/// Outcome of the hull-membership test at a query point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HullWitness {
    /// The query is (within tolerance) a convex combination of set points.
    Contained {
        indices: Vec<usize>,
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// A separating direction, clamped to nonnegative and scaled onto the
    /// price simplex.
    Separated { price_direction: Vec<f64> },
}

impl TradeSet {
    pub fn num_goods(&self) -> usize {
        self.endowment.len()
    }

    /// All three membership conditions.
    pub fn contains(&self, q: &[f64]) -> Result<bool> {
        if q.len() != self.endowment.len() {
            return Err(Error::DimensionMismatch {
                expected: self.endowment.len(),
                got: q.len(),
            });
        }
        if q.iter().zip(&self.endowment).any(|(&z, &w)| z + w < 0.0) {
            return Ok(false);
        }
        if norm2(q) > self.radius {
            return Ok(false);
        }
        let bundle = add(q, &self.endowment);
        Ok(self.utility.eval_unchecked(&bundle)? >= self.threshold)
    }

    /// Membership or a separating hyperplane, checking the three conditions in
    /// a fixed order: nonnegativity, utility, norm.
    pub fn separate(&self, q: &[f64]) -> Result<SeparationResult> {
        if q.len() != self.endowment.len() {
            return Err(Error::DimensionMismatch {
                expected: self.endowment.len(),
                got: q.len(),
            });
        }
        // (0) z_a >= -w_a
        for (a, (&z, &w)) in q.iter().zip(&self.endowment).enumerate() {
            if z + w < 0.0 {
                let mut pi = vec![0.0; q.len()];
                pi[a] = 1.0;
                return Ok(SeparationResult::Hyperplane(pi));
            }
        }
        // (1) utility above threshold
        let bundle = add(q, &self.endowment);
        if self.utility.eval_unchecked(&bundle)? < self.threshold {
            let pi = self.utility.supergradient(&bundle)?;
            if pi.iter().all(|&g| g <= 0.0) {
                return Err(Error::DegenerateUtility(self.consumer_index));
            }
            return Ok(SeparationResult::Hyperplane(pi));
        }
        // (2) norm bound
        let n = norm2(q);
        if n > self.radius {
            return Ok(SeparationResult::Hyperplane(scale(
                q,
                -1.0 / (self.radius * n),
            )));
        }
        Ok(SeparationResult::Inside)
    }
}

impl SeparationOracle for TradeSet {
    fn separate_point(&self, q: &[f64]) -> Result<SeparationResult> {
        self.separate(q)
    }
}

/// Runs [`ellipsoid_max`] over every trade set and returns the best
/// `(set index, point, value)`. Empty sets are skipped with a warning; the
/// call fails only when every set turns out empty.
pub fn lmo_hull(trade_sets: &[TradeSet], c: &[f64], tol: f64) -> Result<(usize, Vec<f64>, f64)> {
    if trade_sets.is_empty() {
        return Err(Error::invalid("lmo_hull needs at least one trade set"));
    }
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for (i, set) in trade_sets.iter().enumerate() {
        let center = vec![0.0; c.len()];
        match ellipsoid_max(set, c, &center, set.radius * 1.0001, tol) {
            Ok((z, v)) => {
                if best.as_ref().is_none_or(|b| v > b.2) {
                    best = Some((i, z, v));
                }
            }
            Err(Error::Infeasible(msg)) => {
                log::warn!("trade set {i} appears empty, skipping: {msg}");
            }
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| Error::Infeasible("all trade sets are empty".into()))
}

/// Decides whether `nu` lies in the convex hull of the trade sets.
///
/// Fast path: if `nu` itself belongs to some set, that is a one-atom
/// containment certificate. Otherwise the hull projection is computed and the
/// verdict follows from the distance `||P(nu) - nu||` against `tol`.
pub fn hull_membership(
    trade_sets: &[TradeSet],
    nu: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<HullWitness> {
    for (i, set) in trade_sets.iter().enumerate() {
        if set.contains(nu)? {
            return Ok(HullWitness::Contained {
                indices: vec![i],
                points: vec![nu.to_vec()],
                weights: vec![1.0],
            });
        }
    }
    let proj = project_hull(trade_sets, nu, tol, max_iters)?;
    let dist = norm2(&sub(&proj.point, nu));
    if dist <= tol {
        let (indices, points, weights) = proj
            .atoms
            .into_iter()
            .map(|a| (a.set_index, a.point, a.weight))
            .fold((vec![], vec![], vec![]), |mut acc, (i, p, w)| {
                acc.0.push(i);
                acc.1.push(p);
                acc.2.push(w);
                acc
            });
        Ok(HullWitness::Contained {
            indices,
            points,
            weights,
        })
    } else {
        let mut dir = sub(&proj.point, nu);
        // Upward closedness makes the true direction nonnegative; clamp the
        // numerical residue and renormalize onto the simplex.
        for d in dir.iter_mut() {
            if *d < 0.0 {
                *d = 0.0;
            }
        }
        let l1 = norm1(&dir);
        if l1 <= 0.0 {
            return Err(Error::NumericalFailure {
                what: "hull_membership: separating direction vanished after clamping".into(),
                best: Some(dist),
            });
        }
        Ok(HullWitness::Separated {
            price_direction: scale(&dir, 1.0 / l1),
        })
    }
}

/// Normalizes a `Separated` witness into a price vector on the simplex.
pub fn extract_price(witness: &HullWitness) -> Result<Vec<f64>> {
    match witness {
        HullWitness::Separated { price_direction } => {
            let mut p = price_direction.clone();
            for v in p.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let l1 = norm1(&p);
            if l1 <= 0.0 {
                return Err(Error::NumericalFailure {
                    what: "extract_price: zero direction".into(),
                    best: None,
                });
            }
            Ok(scale(&p, 1.0 / l1))
        }
        HullWitness::Contained { .. } => {
            Err(Error::invalid("extract_price requires a Separated witness"))
        }
    }
}

/// Reconstructs the convex combination of a `Contained` witness.
pub fn witness_combination(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let dim = points.first().map_or(0, |p| p.len());
    let mut acc = vec![0.0; dim];
    for (p, &w) in points.iter().zip(weights) {
        for (a, &v) in acc.iter_mut().zip(p) {
            *a += w * v;
        }
    }
    acc
}

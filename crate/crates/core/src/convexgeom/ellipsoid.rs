//! Sliding-objective ellipsoid method over a convex body given by a
//! separation oracle.

use crate::convexgeom::SeparationResult;
use crate::error::{Error, Result};
use crate::linalg::dot;

pub trait SeparationOracle {
    fn separate_point(&self, q: &[f64]) -> Result<SeparationResult>;
}

impl<F> SeparationOracle for F
where
    F: Fn(&[f64]) -> Result<SeparationResult>,
{
    fn separate_point(&self, q: &[f64]) -> Result<SeparationResult> {
        self(q)
    }
}

struct EllipsoidState {
    dim: usize,
    center: Vec<f64>,
    /// Shape matrix `A` of the ellipsoid `{ z : (z-x)^T A^{-1} (z-x) <= 1 }`.
    shape: Vec<Vec<f64>>,
}

impl EllipsoidState {
    fn new(center: &[f64], radius: f64) -> Self {
        let dim = center.len();
        let mut shape = vec![vec![0.0; dim]; dim];
        for (i, row) in shape.iter_mut().enumerate() {
            row[i] = radius * radius;
        }
        EllipsoidState {
            dim,
            center: center.to_vec(),
            shape,
        }
    }

    /// Support value of the ellipsoid in direction `c`: `max c.z - c.x = sqrt(c^T A c)`.
    fn support(&self, c: &[f64]) -> f64 {
        let ac = self.mat_vec(c);
        dot(c, &ac).max(0.0).sqrt()
    }

    fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        self.shape.iter().map(|row| dot(row, v)).collect()
    }

    /// Central cut keeping the half-space `{ z : g . (z - x) <= 0 }`.
    /// Returns false when the cut direction is degenerate for this ellipsoid.
    fn cut(&mut self, g: &[f64]) -> bool {
        let n = self.dim as f64;
        let ag = self.mat_vec(g);
        let gag = dot(g, &ag);
        if !(gag > 0.0) || !gag.is_finite() {
            return false;
        }
        let inv_sqrt = 1.0 / gag.sqrt();
        let d: Vec<f64> = ag.iter().map(|v| v * inv_sqrt).collect();
        if self.dim == 1 {
            // interval halving
            self.center[0] -= d[0] / 2.0;
            self.shape[0][0] /= 4.0;
            return true;
        }
        for (x, dv) in self.center.iter_mut().zip(&d) {
            *x -= dv / (n + 1.0);
        }
        let f = n * n / (n * n - 1.0);
        let g2 = 2.0 / (n + 1.0);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.shape[i][j] = f * (self.shape[i][j] - g2 * d[i] * d[j]);
            }
        }
        // keep symmetric against drift
        for i in 0..self.dim {
            for j in 0..i {
                let m = 0.5 * (self.shape[i][j] + self.shape[j][i]);
                self.shape[i][j] = m;
                self.shape[j][i] = m;
            }
        }
        true
    }

    fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.shape[i][i]).sum()
    }
}

/// Maximizes `c . z` over the convex body behind `oracle`, assumed to lie in
/// the ball of radius `outer_radius` around `center`.
///
/// Feasibility cuts come from the oracle's hyperplanes; objective cuts keep
/// `{ c . z >= c . x }` once a feasible center is seen. Returns a feasible
/// point whose value is within `tol` of the maximum.
pub fn ellipsoid_max<O: SeparationOracle>(
    oracle: &O,
    c: &[f64],
    center: &[f64],
    outer_radius: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(tol > 0.0) {
        return Err(Error::invalid("ellipsoid_max requires tol > 0"));
    }
    if !(outer_radius > 0.0) {
        return Err(Error::invalid("ellipsoid_max requires outer_radius > 0"));
    }
    let dim = center.len();
    let zero_objective = c.iter().all(|&v| v == 0.0);
    let tol_vol = (tol * 1e-9).max(1e-16);
    let cap = (6.0 * dim as f64 * (dim + 1) as f64 * (outer_radius / tol_vol).ln())
        .ceil()
        .max(400.0) as usize;

    let mut ell = EllipsoidState::new(center, outer_radius);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();

    for _ in 0..cap {
        let q = ell.center.clone();
        match oracle.separate_point(&q)? {
            SeparationResult::Inside => {
                let val = dot(c, &q);
                if best.as_ref().is_none_or(|(_, b)| val > *b) {
                    best = Some((q.clone(), val));
                }
                if zero_objective {
                    return Ok((q, 0.0));
                }
                if !ell.cut(&neg_c) {
                    break;
                }
            }
            SeparationResult::Hyperplane(pi) => {
                if pi.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: pi.len(),
                    });
                }
                // K is in { pi . z > pi . q }; discard the other side.
                let g: Vec<f64> = pi.iter().map(|v| -v).collect();
                if !ell.cut(&g) {
                    break;
                }
            }
        }
        if let Some((_, bv)) = &best {
            let ub = dot(c, &ell.center) + ell.support(c);
            if ub <= *bv + tol {
                break;
            }
        } else if ell.trace().sqrt() < tol_vol {
            return Err(Error::Infeasible(
                "ellipsoid collapsed without finding a feasible point".into(),
            ));
        }
    }

    match best {
        Some((z, v)) => {
            let ub = dot(c, &ell.center) + ell.support(c);
            if ub <= v + tol || zero_objective {
                Ok((z, v))
            } else {
                Err(Error::NumericalFailure {
                    what: format!(
                        "ellipsoid_max: iteration cap {cap} exceeded (upper bound {ub:.6e} vs incumbent {v:.6e})"
                    ),
                    best: Some(v),
                })
            }
        }
        None => Err(Error::Infeasible(
            "ellipsoid_max found no feasible point within the iteration cap".into(),
        )),
    }
}

/// Maximizes a concave objective (given by value + supergradient) over the
/// convex body behind `oracle`. Used for budget-set utility maximization.
///
/// Objective cuts keep `{ g . (z - x) >= 0 }`, valid by concavity. The best
/// feasible center is returned after the volume budget is exhausted.
pub fn ellipsoid_max_concave<O, F>(
    oracle: &O,
    objective: F,
    center: &[f64],
    outer_radius: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)>
where
    O: SeparationOracle,
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(tol > 0.0 && outer_radius > 0.0) {
        return Err(Error::invalid(
            "ellipsoid_max_concave requires positive tol and radius",
        ));
    }
    let dim = center.len();
    let tol_vol = (tol * 1e-9).max(1e-16);
    let cap = (4.0 * dim as f64 * (dim + 1) as f64 * (outer_radius / tol_vol).ln())
        .ceil()
        .max(400.0) as usize;

    let mut ell = EllipsoidState::new(center, outer_radius);
    let mut best: Option<(Vec<f64>, f64)> = None;

    for _ in 0..cap {
        let q = ell.center.clone();
        let g = match oracle.separate_point(&q)? {
            SeparationResult::Inside => {
                let (val, grad) = objective(&q)?;
                if best.as_ref().is_none_or(|(_, b)| val > *b) {
                    best = Some((q.clone(), val));
                }
                if grad.iter().all(|&v| v == 0.0) {
                    break;
                }
                grad.iter().map(|v| -v).collect::<Vec<f64>>()
            }
            SeparationResult::Hyperplane(pi) => pi.iter().map(|v| -v).collect(),
        };
        if !ell.cut(&g) {
            break;
        }
        if best.is_none() && ell.trace().sqrt() < tol_vol {
            return Err(Error::Infeasible(
                "ellipsoid collapsed without finding a feasible point".into(),
            ));
        }
    }

    best.ok_or_else(|| Error::Infeasible("ellipsoid_max_concave found no feasible point".into()))
}

//! Euclidean projection onto the convex hull of a union of trade sets by
//! conditional-gradient iterations with a fully-corrective (min-norm-point)
//! reoptimization over the discovered atoms.

use crate::convexgeom::{lmo_hull, TradeSet};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, sub};

#[derive(Debug, Clone)]
pub struct Atom {
    pub set_index: usize,
    pub point: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub point: Vec<f64>,
    pub atoms: Vec<Atom>,
    /// Last conditional-gradient duality gap estimate.
    pub gap: f64,
    pub converged: bool,
}

/// Minimizes `||z - nu||^2` over `cvh(union of trade sets)`.
///
/// Each outer round calls the hull LMO in the direction `nu - z`, adds the
/// returned vertex as an atom and re-solves the projection exactly over the
/// current atom set (Wolfe's min-norm-point scheme). Stops when the duality
/// gap drops below `tol^2`, when the iterate is within `tol/4` of `nu`, or
/// when no progress is made (the LMO keeps returning known atoms).
pub fn project_hull(
    trade_sets: &[TradeSet],
    nu: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<Projection> {
    if !(tol > 0.0) {
        return Err(Error::invalid("project_hull requires tol > 0"));
    }
    let max_radius = trade_sets.iter().fold(0.0f64, |m, s| m.max(s.radius));
    let lmo_tol = 1e-8 * (1.0 + max_radius);

    // initial atom: extreme point in the direction of nu (arbitrary but cheap)
    let dir: Vec<f64> = if norm2(nu) > 0.0 {
        nu.to_vec()
    } else {
        vec![1.0; nu.len()]
    };
    let (i0, z0, _) = lmo_hull(trade_sets, &dir, lmo_tol)?;
    let mut atoms: Vec<(usize, Vec<f64>)> = vec![(i0, z0)];
    let mut weights = vec![1.0];
    let mut point = atoms[0].1.clone();
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut best_dist = f64::INFINITY;
    let mut stall = 0usize;

    for _ in 0..max_iters {
        let grad = sub(&point, nu);
        let dist = norm2(&grad);
        if dist <= 0.25 * tol {
            converged = true;
            gap = 0.0;
            break;
        }
        let c: Vec<f64> = grad.iter().map(|v| -v).collect();
        let (si, s, _) = lmo_hull(trade_sets, &c, lmo_tol)?;
        gap = dot(&grad, &sub(&point, &s));
        if gap <= tol * tol {
            converged = true;
            break;
        }
        if dist < best_dist - 1e-12 * (1.0 + best_dist) {
            best_dist = dist;
            stall = 0;
        } else {
            stall += 1;
            if stall >= 60 {
                break;
            }
        }
        // skip duplicates of known atoms; the corrective step is exact, so a
        // repeat carries no new information
        let dup = atoms.iter().any(|(_, a)| {
            a.iter()
                .zip(&s)
                .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
        });
        if !dup {
            atoms.push((si, s));
        }
        let pts: Vec<&[f64]> = atoms.iter().map(|(_, p)| p.as_slice()).collect();
        weights = min_norm_weights(&pts, nu)?;
        // prune negligible atoms
        let mut kept_atoms = Vec::with_capacity(atoms.len());
        let mut kept_weights = Vec::with_capacity(atoms.len());
        for (a, &w) in atoms.iter().zip(&weights) {
            if w > 1e-14 {
                kept_atoms.push(a.clone());
                kept_weights.push(w);
            }
        }
        let total: f64 = kept_weights.iter().sum();
        for w in kept_weights.iter_mut() {
            *w /= total;
        }
        atoms = kept_atoms;
        weights = kept_weights;
        point = combine(&atoms, &weights, nu.len());
    }

    let atoms = atoms
        .into_iter()
        .zip(weights)
        .map(|((set_index, point), weight)| Atom {
            set_index,
            point,
            weight,
        })
        .collect();
    Ok(Projection {
        point,
        atoms,
        gap,
        converged,
    })
}

fn combine(atoms: &[(usize, Vec<f64>)], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    for ((_, p), &w) in atoms.iter().zip(weights) {
        for (a, &v) in acc.iter_mut().zip(p) {
            *a += w * v;
        }
    }
    acc
}

/// Wolfe's min-norm-point algorithm over a finite atom set: returns convex
/// weights minimizing `||sum_i w_i p_i - nu||`.
pub fn min_norm_weights(points: &[&[f64]], nu: &[f64]) -> Result<Vec<f64>> {
    let m = points.len();
    if m == 0 {
        return Err(Error::invalid("min_norm_weights needs at least one point"));
    }
    // work with shifted points q_i = p_i - nu, minimize ||Q w||
    let q: Vec<Vec<f64>> = points.iter().map(|p| sub(p, nu)).collect();
    let scale = q.iter().map(|v| norm2(v)).fold(0.0f64, f64::max).max(1.0);

    // start from the single atom of smallest norm
    let start = (0..m)
        .min_by(|&a, &b| norm2(&q[a]).partial_cmp(&norm2(&q[b])).unwrap())
        .unwrap();
    let mut corral: Vec<usize> = vec![start];
    let mut w: Vec<f64> = vec![1.0];
    let mut x = q[start].clone();

    for _ in 0..16 * (m + 4) {
        // most violating atom for the current point
        let (j, xq) = (0..m)
            .map(|i| (i, dot(&x, &q[i])))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        let xx = dot(&x, &x);
        if xx - xq <= 1e-12 * scale * scale {
            break; // optimal over the full atom set
        }
        if !corral.contains(&j) {
            corral.push(j);
            w.push(0.0);
        }
        // minor cycle: affine minimization over the corral, stepping back to
        // the simplex when a weight would go negative
        loop {
            let alpha = affine_min_norm(&q, &corral)?;
            if alpha.iter().all(|&a| a >= -1e-12) {
                w = alpha;
                break;
            }
            // largest feasible step from w toward alpha
            let mut theta: f64 = 1.0;
            for (wi, ai) in w.iter().zip(&alpha) {
                if *ai < *wi {
                    let t = wi / (wi - ai);
                    if t < theta {
                        theta = t;
                    }
                }
            }
            for (wi, ai) in w.iter_mut().zip(&alpha) {
                *wi = (1.0 - theta) * *wi + theta * ai;
            }
            // drop atoms whose weight hit zero
            let mut kept = Vec::new();
            let mut kept_w = Vec::new();
            for (idx, &wi) in corral.iter().zip(&w) {
                if wi > 1e-13 {
                    kept.push(*idx);
                    kept_w.push(wi);
                }
            }
            if kept.is_empty() {
                // numerically wedged; keep the heaviest atom
                let (bi, bw) = corral
                    .iter()
                    .zip(&w)
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, w)| (*i, *w))
                    .unwrap();
                kept.push(bi);
                kept_w.push(bw.max(1e-13));
            }
            let total: f64 = kept_w.iter().sum();
            for v in kept_w.iter_mut() {
                *v /= total;
            }
            corral = kept;
            w = kept_w;
        }
        x = vec![0.0; nu.len()];
        for (&idx, &wi) in corral.iter().zip(&w) {
            for (a, &v) in x.iter_mut().zip(&q[idx]) {
                *a += wi * v;
            }
        }
    }

    let mut out = vec![0.0; m];
    for (&idx, &wi) in corral.iter().zip(&w) {
        out[idx] += wi;
    }
    Ok(out)
}

/// Solves `min ||sum a_i q_i||` over `sum a_i = 1` (signs free) for the atoms
/// listed in `corral`, via the KKT system on the Gram matrix.
fn affine_min_norm(q: &[Vec<f64>], corral: &[usize]) -> Result<Vec<f64>> {
    let m = corral.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let mut sys = vec![vec![0.0; m + 1]; m + 1];
    let mut trace = 0.0;
    for (r, &i) in corral.iter().enumerate() {
        for (c, &j) in corral.iter().enumerate() {
            sys[r][c] = dot(&q[i], &q[j]);
        }
        trace += sys[r][r];
        sys[r][m] = 1.0;
        sys[m][r] = 1.0;
    }
    // tiny ridge keeps near-degenerate corrals solvable
    let ridge = 1e-12 * (trace / m as f64).max(1e-12);
    for (r, row) in sys.iter_mut().enumerate().take(m) {
        row[r] += ridge;
    }
    let mut rhs = vec![0.0; m + 1];
    rhs[m] = 1.0;
    let sol = crate::linalg::solve_dense(sys, rhs).ok_or_else(|| Error::NumericalFailure {
        what: "affine_min_norm: singular KKT system".into(),
        best: None,
    })?;
    Ok(sol[..m].to_vec())
}

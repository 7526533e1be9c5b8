//! Deliberately naive reference implementations, kept free of any code from
//! the solver modules so they can serve as independent evidence in tests:
//! simplex grid search for supporting prices, exhaustive small-coalition
//! search, and finite-difference gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coalitions::{BlockingCoalition, Member};
use crate::economy::{Allocation, Economy, UtilitySpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub step: f64,
    /// Edge of the `[0, radius]^l` box scanned for cheapest bundles.
    pub radius: f64,
}

impl GridSpec {
    pub fn new(step: f64, radius: f64) -> Result<GridSpec> {
        if !(step > 0.0) || !(radius > 0.0) {
            return Err(Error::invalid("grid step and radius must be positive"));
        }
        Ok(GridSpec { step, radius })
    }
}

/// Cheapest bundle reaching `threshold`, by scanning the level curve: grid the
/// first `l - 1` coordinates and bisect the last (utility is monotone in it).
fn scan_expenditure(
    utility: &UtilitySpec,
    p: &[f64],
    threshold: f64,
    radius: f64,
    points_per_axis: usize,
) -> Result<f64> {
    let l = p.len();
    if utility.eval(&vec![0.0; l])? >= threshold {
        return Ok(0.0);
    }
    let axis: Vec<f64> = (0..=points_per_axis)
        .map(|i| radius * i as f64 / points_per_axis as f64)
        .collect();
    let mut best = f64::INFINITY;
    let mut bundle = vec![0.0; l];
    scan_rec(
        utility,
        p,
        threshold,
        radius,
        &axis,
        &mut bundle,
        0,
        &mut best,
    )?;
    if best.is_infinite() {
        return Err(Error::Infeasible(format!(
            "scan found no bundle reaching {threshold} in [0, {radius}]^{l}"
        )));
    }
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn scan_rec(
    utility: &UtilitySpec,
    p: &[f64],
    threshold: f64,
    radius: f64,
    axis: &[f64],
    bundle: &mut Vec<f64>,
    coord: usize,
    best: &mut f64,
) -> Result<()> {
    let l = p.len();
    if coord == l - 1 {
        // bisect the last coordinate to the lowest level reaching threshold
        bundle[coord] = radius;
        if utility.eval(bundle)? < threshold {
            return Ok(());
        }
        bundle[coord] = 0.0;
        let mut lo = 0.0;
        let mut hi = radius;
        if utility.eval(bundle)? < threshold {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                bundle[coord] = mid;
                if utility.eval(bundle)? >= threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        } else {
            hi = 0.0;
        }
        bundle[coord] = hi;
        let cost = p.iter().zip(bundle.iter()).map(|(a, b)| a * b).sum::<f64>();
        if cost < *best {
            *best = cost;
        }
        bundle[coord] = 0.0;
        return Ok(());
    }
    for &v in axis {
        bundle[coord] = v;
        scan_rec(utility, p, threshold, radius, axis, bundle, coord + 1, best)?;
    }
    bundle[coord] = 0.0;
    Ok(())
}

fn definition_holds(
    economy: &Economy,
    allocation: &Allocation,
    p: &[f64],
    epsilon: f64,
    grid: &GridSpec,
    points_per_axis: usize,
) -> Result<bool> {
    let delta = epsilon / economy.num_consumers() as f64;
    for (c, bundle) in economy.consumers.iter().zip(&allocation.bundles) {
        let income: f64 = p.iter().zip(&c.endowment).map(|(a, b)| a * b).sum();
        let spend: f64 = p.iter().zip(bundle).map(|(a, b)| a * b).sum();
        if (spend - income).abs() > epsilon {
            return Ok(false);
        }
        let threshold = c.utility.eval(bundle)?;
        let e = scan_expenditure(&c.utility, p, threshold, grid.radius, points_per_axis)?;
        if e < income - delta - 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exhaustive search over the price simplex (step `grid.step`) for any price
/// satisfying the approximate-equilibrium definition. Only meaningful at
/// `l = 2` or `l = 3`.
pub fn grid_price_search(
    economy: &Economy,
    allocation: &Allocation,
    epsilon: f64,
    grid: &GridSpec,
) -> Result<Option<Vec<f64>>> {
    economy.validate()?;
    allocation.validate(economy)?;
    let l = economy.num_goods;
    let steps = (1.0 / grid.step).round() as usize;
    match l {
        2 => {
            for i in 0..=steps {
                let p1 = i as f64 / steps as f64;
                let p = vec![p1, 1.0 - p1];
                if definition_holds(economy, allocation, &p, epsilon, grid, 2000)? {
                    return Ok(Some(p));
                }
            }
            Ok(None)
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let p1 = i as f64 / steps as f64;
                    let p2 = j as f64 / steps as f64;
                    let p = vec![p1, p2, 1.0 - p1 - p2];
                    if definition_holds(economy, allocation, &p, epsilon, grid, 60)? {
                        return Ok(Some(p));
                    }
                }
            }
            Ok(None)
        }
        other => Err(Error::invalid(format!(
            "grid_price_search supports 2 or 3 goods, got {other}"
        ))),
    }
}

/// Projection of `v` onto `{ y >= 0 : sum_t beta_t y_t = c }` (one good at a
/// time), via bisection on the shift `mu` in `y_t = max(0, v_t - mu)`.
fn project_weighted(v: &mut [f64], beta: &[f64], c: f64) {
    let hi0 = v.iter().fold(0.0f64, |m, &x| m.max(x)) + c + 1.0;
    let mut lo = -hi0;
    let mut hi = hi0;
    for _ in 0..100 {
        let mu = 0.5 * (lo + hi);
        let s: f64 = v
            .iter()
            .zip(beta)
            .map(|(&x, &b)| b * (x - mu).max(0.0))
            .sum();
        if s > c {
            lo = mu;
        } else {
            hi = mu;
        }
    }
    let mu = 0.5 * (lo + hi);
    for x in v.iter_mut() {
        *x = (*x - mu).max(0.0);
    }
}

/// Exhaustive small-coalition search: enumerate all multiplicity vectors with
/// total size up to `max_k` and, for each, maximize the worst member's utility
/// gain by projected subgradient ascent with random restarts. Returns the
/// first coalition achieving a gain above `eta`. A `None` is heuristic
/// evidence only.
pub fn brute_force_block(
    economy: &Economy,
    allocation: &Allocation,
    max_k: usize,
    eta: f64,
    seed: u64,
) -> Result<Option<BlockingCoalition>> {
    if max_k == 0 {
        return Err(Error::invalid("max_k must be at least 1"));
    }
    economy.validate()?;
    allocation.validate(economy)?;
    let h = economy.num_consumers();
    let baselines: Vec<f64> = economy
        .consumers
        .iter()
        .zip(&allocation.bundles)
        .map(|(c, b)| c.utility.eval(b))
        .collect::<Result<_>>()?;

    let mut beta = vec![0usize; h];
    enumerate(economy, &baselines, &mut beta, 0, max_k, eta, seed)
}

fn enumerate(
    economy: &Economy,
    baselines: &[f64],
    beta: &mut Vec<usize>,
    t: usize,
    budget: usize,
    eta: f64,
    seed: u64,
) -> Result<Option<BlockingCoalition>> {
    if t == beta.len() {
        if beta.iter().sum::<usize>() == 0 {
            return Ok(None);
        }
        return try_multiplicities(economy, baselines, beta, eta, seed);
    }
    for b in 0..=budget {
        beta[t] = b;
        if let Some(c) = enumerate(economy, baselines, beta, t + 1, budget - b, eta, seed)? {
            return Ok(Some(c));
        }
    }
    beta[t] = 0;
    Ok(None)
}

fn try_multiplicities(
    economy: &Economy,
    baselines: &[f64],
    beta: &[usize],
    eta: f64,
    seed: u64,
) -> Result<Option<BlockingCoalition>> {
    const RESTARTS: usize = 20;
    const ITERS: usize = 5_000;
    let l = economy.num_goods;
    let included: Vec<usize> = (0..beta.len()).filter(|&t| beta[t] > 0).collect();
    let weights: Vec<f64> = included.iter().map(|&t| beta[t] as f64).collect();
    // coalition resources: sum_t beta_t w_t
    let mut cap = vec![0.0; l];
    for &t in &included {
        for (c, &w) in cap.iter_mut().zip(&economy.consumers[t].endowment) {
            *c += beta[t] as f64 * w;
        }
    }
    let scale = cap.iter().fold(0.0f64, |m, &c| m.max(c)).max(1e-9);

    let mut hash = seed;
    for (i, &b) in beta.iter().enumerate() {
        hash = hash.wrapping_mul(31).wrapping_add((b * (i + 7)) as u64);
    }

    for restart in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(hash.wrapping_add(restart as u64));
        // random feasible start: split each good's capacity by random weights
        let mut y: Vec<Vec<f64>> = included.iter().map(|_| vec![0.0; l]).collect();
        for a in 0..l {
            let raw: Vec<f64> = included.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().zip(&weights).map(|(r, b)| r * b).sum();
            for ((yi, r), _) in y.iter_mut().zip(&raw).zip(&included) {
                yi[a] = r * cap[a] / total;
            }
        }
        for iter in 1..=ITERS {
            // worst member's gain and its gradient drive the subgradient step
            let mut worst = (0usize, f64::INFINITY);
            for (m, &t) in included.iter().enumerate() {
                let gain = economy.consumers[t].utility.eval_unchecked(&y[m])? - baselines[t];
                if gain < worst.1 {
                    worst = (m, gain);
                }
            }
            if worst.1 > eta {
                return build_brute_coalition(economy, baselines, beta, &included, &y, eta);
            }
            let grad = economy.consumers[included[worst.0]]
                .utility
                .supergradient(&y[worst.0])?;
            let step = 0.5 * scale / (iter as f64).sqrt();
            for (v, g) in y[worst.0].iter_mut().zip(&grad) {
                *v += step * g;
            }
            // re-project each good onto the coalition resource constraint
            for a in 0..l {
                let mut col: Vec<f64> = y.iter().map(|yi| yi[a]).collect();
                project_weighted(&mut col, &weights, cap[a]);
                for (yi, &v) in y.iter_mut().zip(&col) {
                    yi[a] = v;
                }
            }
        }
    }
    Ok(None)
}

fn build_brute_coalition(
    economy: &Economy,
    baselines: &[f64],
    beta: &[usize],
    included: &[usize],
    y: &[Vec<f64>],
    eta: f64,
) -> Result<Option<BlockingCoalition>> {
    let l = economy.num_goods;
    let mut surplus = vec![0.0; l];
    let mut members = Vec::new();
    let mut bundles = Vec::new();
    let mut bases = Vec::new();
    for (m, &t) in included.iter().enumerate() {
        members.push(Member {
            type_index: t,
            multiplicity: beta[t],
        });
        bundles.push(y[m].clone());
        bases.push(baselines[t]);
        for ((s, &v), &w) in surplus
            .iter_mut()
            .zip(&y[m])
            .zip(&economy.consumers[t].endowment)
        {
            *s += beta[t] as f64 * (v - w);
        }
    }
    Ok(Some(BlockingCoalition {
        size: beta.iter().sum(),
        members,
        bundles,
        eta,
        baseline_utilities: bases,
        surplus,
    }))
}

/// Central finite differences, one coordinate at a time.
pub fn finite_diff_gradient(utility: &UtilitySpec, x: &[f64], step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for a in 0..x.len() {
        probe[a] = x[a] + step;
        let up = utility.eval(&probe)?;
        probe[a] = x[a] - step;
        let down = utility.eval(&probe)?;
        probe[a] = x[a];
        g[a] = (up - down) / (2.0 * step);
    }
    Ok(g)
}

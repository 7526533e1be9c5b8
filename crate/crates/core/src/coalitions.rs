//! Blocking coalitions: equal-treatment violations on replica economies and
//! the constructive small-coalition certificate obtained by rounding a hull
//! containment witness to a k-uniform combination.

use serde::{Deserialize, Serialize};

use crate::convexgeom::{approx_caratheodory, hull_membership, HullWitness};
use crate::economy::{Allocation, Economy, ReplicaAllocation};
use crate::equilibrium::{build_trade_sets, compute_params, ApproxParams, Mode};
use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Member {
    #[serde(rename = "type")]
    pub type_index: usize,
    pub multiplicity: usize,
}

/// A self-contained blocking certificate: `multiplicity` copies of each listed
/// type abandon the allocation, each taking the matching bundle. The
/// `baseline_utilities` record what each member type had before, so the
/// certificate re-verifies without the original allocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockingCoalition {
    pub size: usize,
    pub members: Vec<Member>,
    pub bundles: Vec<Vec<f64>>,
    pub eta: f64,
    pub baseline_utilities: Vec<f64>,
    /// `sum_t beta_t (y_t - w_t)`; component-wise `< 0` for coalitions from
    /// [`find_blocking_coalition`], `~ 0` for equal-treatment blocks.
    pub surplus: Vec<f64>,
}

/// Independent certificate check: every member strictly improves on its
/// baseline and the multiplicity-weighted totals do not exceed the endowments
/// (strictly, in every coordinate, when `strict_surplus` is set).
pub fn verify_coalition(
    economy: &Economy,
    coalition: &BlockingCoalition,
    strict_surplus: bool,
) -> Result<bool> {
    let l = economy.num_goods;
    if coalition.members.len() != coalition.bundles.len()
        || coalition.members.len() != coalition.baseline_utilities.len()
    {
        return Err(Error::invalid(
            "coalition member/bundle/baseline lengths disagree",
        ));
    }
    if coalition.size
        != coalition
            .members
            .iter()
            .map(|m| m.multiplicity)
            .sum::<usize>()
    {
        return Ok(false);
    }
    let mut total = vec![0.0; l];
    for ((m, y), &base) in coalition
        .members
        .iter()
        .zip(&coalition.bundles)
        .zip(&coalition.baseline_utilities)
    {
        let consumer = economy
            .consumers
            .get(m.type_index)
            .ok_or_else(|| Error::invalid(format!("coalition references type {}", m.type_index)))?;
        if y.len() != l || y.iter().any(|&v| v < 0.0) {
            return Ok(false);
        }
        if consumer.utility.eval(y)? <= base {
            return Ok(false);
        }
        for ((t, &v), &w) in total.iter_mut().zip(y).zip(&consumer.endowment) {
            *t += m.multiplicity as f64 * (v - w);
        }
    }
    let tol = economy.feasibility_tol();
    Ok(total
        .iter()
        .all(|&s| if strict_surplus { s < 0.0 } else { s <= tol }))
}

/// First type whose `n` copies do not all hold the same bundle (within the
/// feasibility tolerance); `None` when equal treatment holds.
pub fn check_equal_treatment(
    economy: &Economy,
    allocation: &ReplicaAllocation,
) -> Result<Option<usize>> {
    allocation.validate(economy)?;
    let h = economy.num_consumers();
    let tol = economy.feasibility_tol();
    for t in 0..h {
        let first = allocation.bundle(0, t, h);
        for copy in 1..allocation.n {
            let other = allocation.bundle(copy, t, h);
            if first.iter().zip(other).any(|(a, b)| (a - b).abs() > tol) {
                return Ok(Some(t));
            }
        }
    }
    Ok(None)
}

/// Size-`h` block of an unequal-treatment replica allocation:
/// take the worst-off copy of every type and hand each the type-average
/// bundle. Averaging strictly improves the worst copy of any violating type
/// (strict concavity); members left at equality are topped up by a small
/// uniform transfer from the best-improved donor.
pub fn equal_treatment_block(
    economy: &Economy,
    allocation: &ReplicaAllocation,
) -> Result<BlockingCoalition> {
    allocation.validate(economy)?;
    if !economy.all_shifted_power() {
        return Err(Error::UnsupportedFamily(
            "equal_treatment_block requires strictly concave (shifted_power) utilities",
        ));
    }
    if check_equal_treatment(economy, allocation)?.is_none() {
        return Err(Error::invalid(
            "allocation already satisfies equal treatment",
        ));
    }
    let h = economy.num_consumers();
    let n = allocation.n;
    let l = economy.num_goods;

    let mut baselines = Vec::with_capacity(h);
    let mut bundles = Vec::with_capacity(h);
    for (t, c) in economy.consumers.iter().enumerate() {
        let mut worst = f64::INFINITY;
        let mut avg = vec![0.0; l];
        for copy in 0..n {
            let b = allocation.bundle(copy, t, h);
            worst = worst.min(c.utility.eval(b)?);
            for (a, &v) in avg.iter_mut().zip(b) {
                *a += v / n as f64;
            }
        }
        baselines.push(worst);
        bundles.push(avg);
    }

    let strict_tol = 1e-10;
    let gains: Vec<f64> = economy
        .consumers
        .iter()
        .zip(&bundles)
        .zip(&baselines)
        .map(|((c, b), &base)| Ok(c.utility.eval(b)? - base))
        .collect::<Result<_>>()?;
    let stuck: Vec<usize> = (0..h).filter(|&t| gains[t] <= strict_tol).collect();
    if !stuck.is_empty() {
        let donor = (0..h)
            .max_by(|&a, &b| gains[a].partial_cmp(&gains[b]).unwrap())
            .unwrap();
        if gains[donor] <= strict_tol {
            return Err(Error::Inconsistent(
                "no strictly improved member after averaging an unequal-treatment allocation"
                    .into(),
            ));
        }
        // uniform transfer tau per stuck member, halved until the donor stays
        // ahead and remains nonnegative
        let mut tau = 1e-4 * (1.0 + norm_inf(&economy.total_endowment()));
        let mut done = false;
        for _ in 0..200 {
            let out = tau * stuck.len() as f64;
            if bundles[donor].iter().all(|&v| v >= out) {
                let trial: Vec<f64> = bundles[donor].iter().map(|&v| v - out).collect();
                if economy.consumers[donor].utility.eval(&trial)? > baselines[donor] + strict_tol {
                    for b in bundles[donor].iter_mut() {
                        *b -= out;
                    }
                    for &t in &stuck {
                        for b in bundles[t].iter_mut() {
                            *b += tau;
                        }
                    }
                    done = true;
                    break;
                }
            }
            tau *= 0.5;
        }
        if !done {
            return Err(Error::NumericalFailure {
                what: "equal_treatment_block: strictness transfer failed to converge".into(),
                best: None,
            });
        }
    }

    let mut surplus = vec![0.0; l];
    for (c, b) in economy.consumers.iter().zip(&bundles) {
        for ((s, &v), &w) in surplus.iter_mut().zip(b).zip(&c.endowment) {
            *s += v - w;
        }
    }
    let coalition = BlockingCoalition {
        size: h,
        members: (0..h)
            .map(|t| Member {
                type_index: t,
                multiplicity: 1,
            })
            .collect(),
        bundles,
        eta: 0.0,
        baseline_utilities: baselines,
        surplus,
    };
    if !verify_coalition(economy, &coalition, false)? {
        return Err(Error::Inconsistent(
            "equal_treatment_block produced a coalition that fails its own certificate".into(),
        ));
    }
    Ok(coalition)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockSearch {
    pub coalition: Option<BlockingCoalition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Searches for a blocking coalition of size at most `k` by testing whether
/// `nu = (-delta) * 1` lies in the hull of the margin-`eta` trade sets and, if
/// so, rounding the containment witness to a `k`-uniform combination.
///
/// A returned coalition is always genuinely blocking (the certificate is
/// re-verified); `None` means this method found nothing, not that no coalition
/// exists.
pub fn find_blocking_coalition(
    economy: &Economy,
    allocation: &Allocation,
    epsilon: f64,
    eta: f64,
    k: usize,
    seed: u64,
) -> Result<BlockSearch> {
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if k == 0 {
        return Err(Error::invalid("coalition size bound k must be at least 1"));
    }
    economy.validate()?;
    allocation.validate(economy)?;
    let params = compute_params(economy, epsilon, Mode::Auto, None)?;
    let sets = build_trade_sets(economy, allocation, params.base_radius(), eta)?;
    let nu = vec![-params.delta; economy.num_goods];
    let tol = 1e-6 * (1.0 + norm2(&nu));

    let (indices, points, weights) = match hull_membership(&sets, &nu, tol, 50_000)? {
        HullWitness::Separated { .. } => {
            return Ok(BlockSearch {
                coalition: None,
                diagnostic: Some("nu separated from the margin-eta hull".into()),
            })
        }
        HullWitness::Contained {
            indices,
            points,
            weights,
        } => (indices, points, weights),
    };

    let rounded = approx_caratheodory(&points, &weights, k, seed)?;
    if rounded.point.iter().any(|&v| v >= 0.0) {
        return Ok(BlockSearch {
            coalition: None,
            diagnostic: Some(format!(
                "k = {k} too small: rounded combination {:?} is not component-wise negative",
                rounded.point
            )),
        });
    }

    // multiplicity per distinct atom, reduced by the common divisor (scaling
    // all multiplicities preserves the averaged trade)
    let mut counts = vec![0usize; points.len()];
    for &t in &rounded.chosen {
        counts[t] += 1;
    }
    let g = counts.iter().copied().filter(|&c| c > 0).fold(0, gcd);
    let mut members = Vec::new();
    let mut bundles = Vec::new();
    let mut baselines = Vec::new();
    for (t, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let type_index = indices[t];
        let c = &economy.consumers[type_index];
        let y: Vec<f64> = points[t]
            .iter()
            .zip(&c.endowment)
            .map(|(&z, &w)| (z + w).max(0.0))
            .collect();
        let baseline = c.utility.eval(&allocation.bundles[type_index])?;
        if c.utility.eval(&y)? < baseline + eta - 1e-9 {
            return Err(Error::Inconsistent(format!(
                "witness atom for type {type_index} misses its utility threshold"
            )));
        }
        members.push(Member {
            type_index,
            multiplicity: count / g,
        });
        bundles.push(y);
        baselines.push(baseline);
    }
    let size: usize = members.iter().map(|m| m.multiplicity).sum();
    let mut surplus = vec![0.0; economy.num_goods];
    for (m, y) in members.iter().zip(&bundles) {
        let w = &economy.consumers[m.type_index].endowment;
        for ((s, &v), &e) in surplus.iter_mut().zip(y).zip(w) {
            *s += m.multiplicity as f64 * (v - e);
        }
    }
    let coalition = BlockingCoalition {
        size,
        members,
        bundles,
        eta,
        baseline_utilities: baselines,
        surplus,
    };
    if !verify_coalition(economy, &coalition, true)? {
        return Err(Error::Inconsistent(
            "rounded coalition fails its own certificate check".into(),
        ));
    }
    Ok(BlockSearch {
        coalition: Some(coalition),
        diagnostic: None,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if a == 0 {
        b
    } else {
        gcd(b % a, a)
    }
}

/// Coalition size for which the rounding error provably stays below `delta`:
/// `ceil(8 gamma^2 / delta^2)`, floored at 1.
pub fn theoretical_k(params: &ApproxParams) -> f64 {
    let gamma = params.base_radius();
    (8.0 * gamma * gamma / (params.delta * params.delta))
        .ceil()
        .max(1.0)
}

/// Default margin for coalition construction: `min(0.01, eta_bar / 2)`.
pub fn default_eta(eta_bar: f64) -> f64 {
    0.01f64.min(eta_bar / 2.0)
}

//! Testing whether an allocation is an approximate Walrasian equilibrium.
//!
//! The decision reduces to one convex question: with each consumer's bounded
//! better-than trade set `Q_i`, the allocation admits supporting prices iff
//! the point `nu = (-delta) * 1` (with `delta = eps / h`) lies outside
//! `cvh(union Q_i)`. A separating direction doubles as the price vector; a
//! containment certificate seeds the blocking-coalition construction.

use serde::{Deserialize, Serialize};

use crate::convexgeom::{
    ellipsoid_max, ellipsoid_max_concave, extract_price, hull_membership, HullWitness,
    SeparationResult, TradeSet,
};
use crate::economy::{
    validate_curvature, Allocation, ConcavityProfile, CurvatureReport, Economy, UtilitySpec,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, norm_inf, sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Infer from the utility families; mixed economies are rejected.
    Auto,
    StronglyConcave,
    Plc,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "auto" => Ok(Mode::Auto),
            "strong" | "strongly_concave" => Ok(Mode::StronglyConcave),
            "plc" => Ok(Mode::Plc),
            other => Err(Error::invalid(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Resolved {
    StronglyConcave,
    Plc,
}

fn resolve_mode(economy: &Economy, mode: Mode) -> Result<Resolved> {
    match mode {
        Mode::StronglyConcave => {
            if !economy.all_shifted_power() {
                return Err(Error::UnsupportedFamily(
                    "strongly-concave mode requires shifted_power utilities throughout",
                ));
            }
            Ok(Resolved::StronglyConcave)
        }
        Mode::Plc => {
            if !economy.all_plc() {
                return Err(Error::UnsupportedFamily(
                    "plc mode requires plc utilities throughout",
                ));
            }
            Ok(Resolved::Plc)
        }
        Mode::Auto => {
            if economy.all_shifted_power() {
                Ok(Resolved::StronglyConcave)
            } else if economy.all_plc() {
                Ok(Resolved::Plc)
            } else {
                Err(Error::MixedFamilies)
            }
        }
    }
}

/// The scalar data driving the test: `eps` itself, the per-consumer
/// margin `delta = eps / h`, worst-case curvature and gradient bounds, and the
/// resulting trade-set radius (`gamma` for strongly concave economies,
/// `lambda_big` for PLC ones).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxParams {
    pub epsilon: f64,
    pub delta: f64,
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Worst-case gradient sup-norm bound across consumers.
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Radius of the ball on which `alpha` was certified.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concavity_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature: Option<CurvatureReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_big: Option<f64>,
    /// Coalition-size bound; `None` for PLC economies (it needs curvature).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

impl ApproxParams {
    /// Base trade-set radius for the active mode.
    pub fn base_radius(&self) -> f64 {
        self.gamma.or(self.lambda_big).unwrap_or(0.0)
    }
}

pub fn gamma_formula(lambda: f64, num_goods: usize, delta: f64, alpha: f64) -> f64 {
    (2.0 * (lambda * num_goods as f64 * delta + 1.0) / alpha).sqrt()
}

pub fn kappa_formula(
    alpha: f64,
    lambda: f64,
    num_goods: usize,
    num_consumers: usize,
    epsilon: f64,
) -> f64 {
    let l = num_goods as f64;
    let h = num_consumers as f64;
    (16.0 / alpha * (lambda * l * h / epsilon + h * h / (epsilon * epsilon))).ceil()
}

/// Worst-case gradient sup-norm bound across all consumers.
pub fn max_gradient_bound(economy: &Economy) -> Result<f64> {
    let mut lambda = 0.0f64;
    for c in &economy.consumers {
        lambda = lambda.max(c.utility.gradient_sup_bound()?);
    }
    Ok(lambda)
}

fn min_alpha_at(economy: &Economy, r: f64) -> Result<f64> {
    let mut alpha = f64::INFINITY;
    for c in &economy.consumers {
        alpha = alpha.min(c.utility.strong_concavity(r)?.alpha);
    }
    Ok(alpha)
}

/// Smallest radius whose worst-case curvature certificate passes, found by
/// bisection on the increasing map `r -> min_i alpha_i(r) * r^2`.
fn auto_concavity_radius(economy: &Economy, target: f64) -> Result<f64> {
    let f = |r: f64| -> Result<f64> { Ok(min_alpha_at(economy, r)? * r * r) };
    let mut hi = 1.0;
    while f(hi)? < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NumericalFailure {
                what: "curvature requirement unattainable at any radius".into(),
                best: None,
            });
        }
    }
    let mut lo = hi / 2.0;
    if hi == 1.0 {
        lo = 1e-9;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Computes the test parameters. For strongly concave economies a concavity
/// radius may be supplied; when omitted, the smallest radius passing the
/// curvature requirement (with 0.1% headroom) is solved for.
pub fn compute_params(
    economy: &Economy,
    epsilon: f64,
    mode: Mode,
    concavity_radius: Option<f64>,
) -> Result<ApproxParams> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    economy.validate()?;
    let h = economy.num_consumers();
    let l = economy.num_goods;
    let delta = epsilon / h as f64;
    let lambda = max_gradient_bound(economy)?;

    match resolve_mode(economy, mode)? {
        Resolved::StronglyConcave => {
            let requirement = 2.0 * epsilon * lambda * l as f64 / h as f64 + 2.0;
            let r = match concavity_radius {
                Some(r) => r,
                None => auto_concavity_radius(economy, requirement * 1.001)?,
            };
            let alpha = min_alpha_at(economy, r)?;
            let profile = ConcavityProfile {
                alpha,
                radius: r,
                lipschitz: lambda,
            };
            let curvature = validate_curvature(&profile, epsilon, l, h);
            Ok(ApproxParams {
                epsilon,
                delta,
                eta: 0.0,
                gamma: Some(gamma_formula(lambda, l, delta, alpha)),
                lambda,
                alpha: Some(alpha),
                concavity_radius: Some(r),
                curvature: Some(curvature),
                lambda_big: None,
                kappa: Some(kappa_formula(alpha, lambda, l, h, epsilon)),
            })
        }
        Resolved::Plc => Ok(ApproxParams {
            epsilon,
            delta,
            eta: 0.0,
            gamma: None,
            lambda,
            alpha: None,
            concavity_radius: None,
            curvature: None,
            lambda_big: Some(lambda_big_bound(economy)?),
            kappa: None,
        }),
    }
}

/// Radius bound for PLC trade sets, from the box corner where each good's
/// quantity is capped by the utility level of the total endowment divided by
/// the smallest nonzero coefficient for that good (goods useless to the
/// consumer are capped at `4 * total_supply`).
pub fn lambda_big_bound(economy: &Economy) -> Result<f64> {
    const CAP_FACTOR: f64 = 4.0;
    if !economy.all_plc() {
        return Err(Error::UnsupportedFamily(
            "lambda_big_bound requires a PLC economy",
        ));
    }
    let total = economy.total_endowment();
    let mut best = 0.0f64;
    for (i, c) in economy.consumers.iter().enumerate() {
        let (coeffs, intercepts) = match &c.utility {
            UtilitySpec::Plc { coeffs, intercepts } => (coeffs, intercepts),
            _ => unreachable!(),
        };
        let degenerate =
            coeffs.iter().flatten().all(|&v| v == 0.0) && intercepts.iter().all(|&v| v == 0.0);
        if degenerate {
            return Err(Error::DegenerateUtility(i));
        }
        let level = c.utility.eval(&total)?;
        let mut corner = vec![0.0; economy.num_goods];
        for (a, b) in corner.iter_mut().enumerate() {
            let min_nonzero = coeffs
                .iter()
                .map(|row| row[a])
                .filter(|&v| v > 0.0)
                .fold(f64::INFINITY, f64::min);
            *b = if min_nonzero.is_finite() {
                level / min_nonzero
            } else {
                CAP_FACTOR * total[a]
            };
        }
        best = best.max(norm2(&sub(&corner, &c.endowment)));
    }
    Ok(best)
}

/// Per-consumer trade sets at threshold `u_i(x_i) + eta`. The radius is the
/// base radius enlarged to `max(base, 2||x_i - w_i||, 2||x_i||)` so that the
/// set keeps a nonempty interior around the known member `x_i - w_i`.
pub fn build_trade_sets(
    economy: &Economy,
    allocation: &Allocation,
    base_radius: f64,
    eta: f64,
) -> Result<Vec<TradeSet>> {
    let mut sets = Vec::with_capacity(economy.num_consumers());
    for (i, (c, bundle)) in economy
        .consumers
        .iter()
        .zip(&allocation.bundles)
        .enumerate()
    {
        let radius = base_radius
            .max(2.0 * norm2(&sub(bundle, &c.endowment)))
            .max(2.0 * norm2(bundle));
        sets.push(TradeSet {
            consumer_index: i,
            utility: c.utility.clone(),
            endowment: c.endowment.clone(),
            threshold: c.utility.eval(bundle)? + eta,
            radius,
            margin: eta,
        });
    }
    Ok(sets)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub epsilon: f64,
    pub tol: f64,
    /// `|p . x_i - p . w_i|` per consumer.
    pub budget_gaps: Vec<f64>,
    /// `e_i(p)`: cheapest bundle at least as good as `x_i`.
    pub min_expenditures: Vec<f64>,
    pub incomes: Vec<f64>,
    pub condition_i: Vec<bool>,
    pub condition_ii: Vec<bool>,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Yes {
        price: Vec<f64>,
        report: VerificationReport,
    },
    No {
        witness: HullWitness,
        #[serde(skip_serializing_if = "Option::is_none")]
        coalition: Option<crate::coalitions::BlockingCoalition>,
    },
}

impl Verdict {
    pub fn is_yes(&self) -> bool {
        matches!(self, Verdict::Yes { .. })
    }
}

#[derive(Debug, Clone)]
pub struct TestOptions {
    /// Hull-membership tolerance; defaults to `1e-6 * (1 + ||nu||)`.
    pub tol: Option<f64>,
    pub max_iters: usize,
    pub concavity_radius: Option<f64>,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            tol: None,
            max_iters: 50_000,
            concavity_radius: None,
        }
    }
}

pub fn test_walrasian(
    economy: &Economy,
    allocation: &Allocation,
    epsilon: f64,
    mode: Mode,
) -> Result<Verdict> {
    test_walrasian_opts(economy, allocation, epsilon, mode, &TestOptions::default())
}

pub fn test_walrasian_opts(
    economy: &Economy,
    allocation: &Allocation,
    epsilon: f64,
    mode: Mode,
    opts: &TestOptions,
) -> Result<Verdict> {
    economy.validate()?;
    allocation.validate(economy)?;
    let params = compute_params(economy, epsilon, mode, opts.concavity_radius)?;
    let sets = build_trade_sets(economy, allocation, params.base_radius(), 0.0)?;
    let nu = vec![-params.delta; economy.num_goods];
    let tol = opts.tol.unwrap_or_else(|| 1e-6 * (1.0 + norm2(&nu)));

    match hull_membership(&sets, &nu, tol, opts.max_iters)? {
        w @ HullWitness::Separated { .. } => {
            let price = extract_price(&w)?;
            let report = verify_eps_walrasian(economy, allocation, &price, epsilon)?;
            if !report.ok {
                return Err(Error::Inconsistent(format!(
                    "separating price {price:?} fails direct verification: {report:?}"
                )));
            }
            Ok(Verdict::Yes { price, report })
        }
        w @ HullWitness::Contained { .. } => Ok(Verdict::No {
            witness: w,
            coalition: None,
        }),
    }
}

/// Cheapest bundle under `p` reaching utility `threshold` inside the box
/// `[0, search_radius]^l`, by the ellipsoid method with the utility
/// supergradient as feasibility cut.
pub fn min_expenditure(
    utility: &UtilitySpec,
    p: &[f64],
    threshold: f64,
    search_radius: f64,
) -> Result<f64> {
    let l = p.len();
    if !(search_radius > 0.0) {
        return Err(Error::invalid(
            "min_expenditure requires a positive search radius",
        ));
    }
    // the zero bundle already qualifies
    if utility.eval(&vec![0.0; l])? >= threshold {
        return Ok(0.0);
    }
    let oracle = |q: &[f64]| -> Result<SeparationResult> {
        for (a, &v) in q.iter().enumerate() {
            if v < 0.0 {
                let mut pi = vec![0.0; l];
                pi[a] = 1.0;
                return Ok(SeparationResult::Hyperplane(pi));
            }
            if v > search_radius {
                let mut pi = vec![0.0; l];
                pi[a] = -1.0;
                return Ok(SeparationResult::Hyperplane(pi));
            }
        }
        if utility.eval_unchecked(q)? < threshold {
            return Ok(SeparationResult::Hyperplane(utility.supergradient(q)?));
        }
        Ok(SeparationResult::Inside)
    };
    let c: Vec<f64> = p.iter().map(|v| -v).collect();
    let center = vec![0.5 * search_radius; l];
    let outer = search_radius * (l as f64).sqrt();
    let tol = 1e-6 * (1.0 + search_radius);
    match ellipsoid_max(&oracle, &c, &center, outer, tol) {
        Ok((_, v)) => Ok((-v).max(0.0)),
        Err(Error::Infeasible(_)) => Err(Error::Infeasible(format!(
            "utility level {threshold} unattainable within the box [0, {search_radius}]^{l}"
        ))),
        Err(e) => Err(e),
    }
}

/// Default search box edge for expenditure / budget problems.
pub fn default_search_radius(economy: &Economy) -> f64 {
    2.0 * norm_inf(&economy.total_endowment())
}

/// Checks the approximate-equilibrium definition directly at a given price:
/// (i) every budget gap is at most `eps`; (ii) no bundle at least as good as
/// the assigned one costs less than income minus `eps / h`.
pub fn verify_eps_walrasian(
    economy: &Economy,
    allocation: &Allocation,
    p: &[f64],
    epsilon: f64,
) -> Result<VerificationReport> {
    if p.len() != economy.num_goods {
        return Err(Error::DimensionMismatch {
            expected: economy.num_goods,
            got: p.len(),
        });
    }
    let h = economy.num_consumers() as f64;
    let delta = epsilon / h;
    let radius = default_search_radius(economy);
    let tol = 1e-6 * (1.0 + norm_inf(&economy.total_endowment()));

    let mut budget_gaps = Vec::new();
    let mut min_expenditures = Vec::new();
    let mut incomes = Vec::new();
    let mut condition_i = Vec::new();
    let mut condition_ii = Vec::new();
    for (c, bundle) in economy.consumers.iter().zip(&allocation.bundles) {
        let income = dot(p, &c.endowment);
        let gap = (dot(p, bundle) - income).abs();
        let e = min_expenditure(&c.utility, p, c.utility.eval(bundle)?, radius)?;
        condition_i.push(gap <= epsilon + tol);
        condition_ii.push(e >= income - delta - tol);
        budget_gaps.push(gap);
        min_expenditures.push(e);
        incomes.push(income);
    }
    let ok = condition_i.iter().all(|&b| b) && condition_ii.iter().all(|&b| b);
    Ok(VerificationReport {
        epsilon,
        tol,
        budget_gaps,
        min_expenditures,
        incomes,
        condition_i,
        condition_ii,
        ok,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConversionReport {
    pub eps_hat: f64,
    pub lambda: f64,
    /// Best attainable utility on each consumer's budget set.
    pub budget_optima: Vec<f64>,
    pub utilities: Vec<f64>,
    pub c1: Vec<bool>,
    pub c2: Vec<bool>,
    pub ok: bool,
}

/// Translates an `eps`-equilibrium certificate into the demand-side notion:
/// at `eps_hat = max(eps * lambda * sqrt(l) / h, eps)`, (C2) bounds the budget
/// gaps and (C1) bounds the loss against the budget-set optimum.
pub fn convert_notion(
    economy: &Economy,
    allocation: &Allocation,
    p: &[f64],
    epsilon: f64,
) -> Result<ConversionReport> {
    let h = economy.num_consumers() as f64;
    let l = economy.num_goods;
    let lambda = max_gradient_bound(economy)?;
    let eps_hat = (epsilon * lambda * (l as f64).sqrt() / h).max(epsilon);
    let radius = default_search_radius(economy);
    let tol = 1e-6 * (1.0 + norm_inf(&economy.total_endowment()));

    let mut budget_optima = Vec::new();
    let mut utilities = Vec::new();
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for (c, bundle) in economy.consumers.iter().zip(&allocation.bundles) {
        let income = dot(p, &c.endowment);
        let oracle = |q: &[f64]| -> Result<SeparationResult> {
            for (a, &v) in q.iter().enumerate() {
                if v < 0.0 {
                    let mut pi = vec![0.0; l];
                    pi[a] = 1.0;
                    return Ok(SeparationResult::Hyperplane(pi));
                }
                if v > radius {
                    let mut pi = vec![0.0; l];
                    pi[a] = -1.0;
                    return Ok(SeparationResult::Hyperplane(pi));
                }
            }
            if dot(p, q) > income {
                return Ok(SeparationResult::Hyperplane(p.iter().map(|v| -v).collect()));
            }
            Ok(SeparationResult::Inside)
        };
        let objective = |q: &[f64]| -> Result<(f64, Vec<f64>)> {
            Ok((c.utility.eval_unchecked(q)?, c.utility.supergradient(q)?))
        };
        let center = vec![0.0; l];
        let (_, best) = ellipsoid_max_concave(
            &oracle,
            objective,
            &center,
            radius * (l as f64).sqrt() + 1.0,
            1e-8,
        )?;
        let u = c.utility.eval(bundle)?;
        c1.push(best <= u + eps_hat + tol);
        c2.push((dot(p, bundle) - income).abs() <= eps_hat + tol);
        budget_optima.push(best);
        utilities.push(u);
    }
    let ok = c1.iter().all(|&b| b) && c2.iter().all(|&b| b);
    Ok(ConversionReport {
        eps_hat,
        lambda,
        budget_optima,
        utilities,
        c1,
        c2,
        ok,
    })
}

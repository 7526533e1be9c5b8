//! Exchange-economy model: consumers, utility families, allocations and the
//! curvature/Lipschitz quantities the solvers consume.
//!
//! Two utility families are supported:
//!
//! * `ShiftedPower`: `u(x) = (1/N) * sum_j (x_j + theta)^rho` with
//!   `rho in (0,1)` and `theta > 0`. Smooth, strictly monotone, strongly
//!   concave on any bounded region.
//! * `Plc`: piecewise-linear concave, `u(x) = min_k { sum_j U[k][j] x_j + T[k] }`
//!   with nonnegative coefficients. Concave and monotone, not strongly concave.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm2, norm_inf};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UtilitySpec {
    ShiftedPower {
        rho: f64,
        theta: f64,
        #[serde(rename = "N")]
        normalizer: f64,
    },
    Plc {
        #[serde(rename = "U")]
        coeffs: Vec<Vec<f64>>,
        #[serde(rename = "T")]
        intercepts: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Consumer {
    pub endowment: Vec<f64>,
    pub utility: UtilitySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Economy {
    #[serde(rename = "goods")]
    pub num_goods: usize,
    pub consumers: Vec<Consumer>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Allocation {
    pub bundles: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReplicaAllocation {
    pub n: usize,
    /// `n * h` bundles, ordered copy-major: (copy 1, type 1), (copy 1, type 2),
    /// ..., (copy 2, type 1), ...
    pub bundles: Vec<Vec<f64>>,
}

/// Strong-concavity data of a `ShiftedPower` utility on the Euclidean ball of
/// radius `radius` around the endowment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConcavityProfile {
    pub alpha: f64,
    pub radius: f64,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurvatureReport {
    /// `alpha * r^2`
    pub lhs: f64,
    /// `2 * eps * lambda * l / h + 2`
    pub rhs: f64,
    pub ok: bool,
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn check_nonneg(x: &[f64]) -> Result<()> {
    for (i, &v) in x.iter().enumerate() {
        if v < 0.0 {
            return Err(Error::NegativeComponent { index: i, value: v });
        }
    }
    Ok(())
}

impl UtilitySpec {
    pub fn num_goods(&self) -> usize {
        match self {
            UtilitySpec::ShiftedPower { .. } => 0, // dimension-free family
            UtilitySpec::Plc { coeffs, .. } => coeffs.first().map_or(0, |r| r.len()),
        }
    }

    pub fn is_plc(&self) -> bool {
        matches!(self, UtilitySpec::Plc { .. })
    }

    /// Utility value at a nonnegative bundle.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_nonneg(x)?;
        self.eval_unchecked(x)
    }

    /// Like [`eval`](Self::eval) but skips the nonnegativity check. Used by the
    /// separation oracles, which enforce `x >= 0` themselves; `ShiftedPower` is
    /// well defined for `x_j > -theta` anyway.
    pub fn eval_unchecked(&self, x: &[f64]) -> Result<f64> {
        match self {
            UtilitySpec::ShiftedPower {
                rho,
                theta,
                normalizer,
            } => Ok(x.iter().map(|&v| (v + theta).powf(*rho)).sum::<f64>() / normalizer),
            UtilitySpec::Plc { coeffs, intercepts } => {
                check_dims(coeffs[0].len(), x.len())?;
                let mut best = f64::INFINITY;
                for (row, t) in coeffs.iter().zip(intercepts) {
                    let v = row.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + t;
                    best = best.min(v);
                }
                Ok(best)
            }
        }
    }

    /// Supergradient at `x`: the exact gradient for `ShiftedPower`, the
    /// coefficient row of the lowest-index minimizing piece for `Plc`.
    pub fn supergradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            UtilitySpec::ShiftedPower {
                rho,
                theta,
                normalizer,
            } => Ok(x
                .iter()
                .map(|&v| rho / normalizer * (v + theta).powf(rho - 1.0))
                .collect()),
            UtilitySpec::Plc { coeffs, .. } => {
                check_dims(coeffs[0].len(), x.len())?;
                let k = self.plc_min_piece(x)?;
                Ok(coeffs[k].clone())
            }
        }
    }

    /// Index of the minimizing piece (ties broken by lowest index).
    pub fn plc_min_piece(&self, x: &[f64]) -> Result<usize> {
        match self {
            UtilitySpec::Plc { coeffs, intercepts } => {
                let mut best = (0usize, f64::INFINITY);
                for (k, (row, t)) in coeffs.iter().zip(intercepts).enumerate() {
                    let v = row.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + t;
                    if v < best.1 {
                        best = (k, v);
                    }
                }
                Ok(best.0)
            }
            _ => Err(Error::UnsupportedFamily("plc_min_piece requires PLC")),
        }
    }

    /// Sup-norm bound on the gradient over the nonnegative orthant:
    /// `rho * theta^(rho-1) / N`. PLC utilities are handled by the
    /// box-corner radius machinery instead.
    pub fn lipschitz_constant(&self) -> Result<f64> {
        match self {
            UtilitySpec::ShiftedPower {
                rho,
                theta,
                normalizer,
            } => Ok(rho * theta.powf(rho - 1.0) / normalizer),
            UtilitySpec::Plc { .. } => Err(Error::UnsupportedFamily(
                "lipschitz_constant requires ShiftedPower",
            )),
        }
    }

    /// Sup-norm gradient bound that works for both families. For PLC this is
    /// the largest coefficient appearing in any piece.
    pub fn gradient_sup_bound(&self) -> Result<f64> {
        match self {
            UtilitySpec::ShiftedPower { .. } => self.lipschitz_constant(),
            UtilitySpec::Plc { coeffs, .. } => Ok(coeffs
                .iter()
                .flat_map(|r| r.iter())
                .fold(0.0f64, |m, &c| m.max(c))),
        }
    }

    /// Strong-concavity modulus on the Euclidean ball of radius `r` around the
    /// endowment: `rho (1-rho) (r + theta)^(rho-2) / N`. At `rho = 1/2` this is
    /// exactly `1 / (4 N (r + theta)^(3/2))`.
    pub fn strong_concavity(&self, r: f64) -> Result<ConcavityProfile> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!(
                "strong-concavity radius must be positive, got {r}"
            )));
        }
        match self {
            UtilitySpec::ShiftedPower {
                rho,
                theta,
                normalizer,
            } => Ok(ConcavityProfile {
                alpha: rho * (1.0 - rho) * (r + theta).powf(rho - 2.0) / normalizer,
                radius: r,
                lipschitz: self.lipschitz_constant()?,
            }),
            UtilitySpec::Plc { .. } => Err(Error::UnsupportedFamily(
                "strong_concavity requires ShiftedPower",
            )),
        }
    }

    fn validate(&self, num_goods: usize, consumer: usize) -> Result<()> {
        match self {
            UtilitySpec::ShiftedPower {
                rho,
                theta,
                normalizer,
            } => {
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(Error::invalid(format!(
                        "consumer {consumer}: rho must lie in (0,1), got {rho}"
                    )));
                }
                if !(*theta > 0.0) {
                    return Err(Error::invalid(format!(
                        "consumer {consumer}: theta must be positive, got {theta}"
                    )));
                }
                if !(*normalizer > 0.0) {
                    return Err(Error::invalid(format!(
                        "consumer {consumer}: N must be positive, got {normalizer}"
                    )));
                }
                Ok(())
            }
            UtilitySpec::Plc { coeffs, intercepts } => {
                if coeffs.is_empty() {
                    return Err(Error::invalid(format!(
                        "consumer {consumer}: PLC utility needs at least one piece"
                    )));
                }
                if coeffs.len() != intercepts.len() {
                    return Err(Error::invalid(format!(
                        "consumer {consumer}: {} coefficient rows vs {} intercepts",
                        coeffs.len(),
                        intercepts.len()
                    )));
                }
                for (k, row) in coeffs.iter().enumerate() {
                    if row.len() != num_goods {
                        return Err(Error::invalid(format!(
                            "consumer {consumer}: piece {k} has {} coefficients, expected {num_goods}",
                            row.len()
                        )));
                    }
                    if row.iter().any(|&c| c < 0.0) {
                        return Err(Error::invalid(format!(
                            "consumer {consumer}: piece {k} has a negative coefficient"
                        )));
                    }
                }
                if intercepts.iter().any(|&t| t < 0.0) {
                    return Err(Error::invalid(format!(
                        "consumer {consumer}: negative intercept"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// `true` iff `alpha * r^2 >= 2 eps lambda l / h + 2`.
pub fn validate_curvature(
    profile: &ConcavityProfile,
    epsilon: f64,
    num_goods: usize,
    num_consumers: usize,
) -> CurvatureReport {
    let lhs = profile.alpha * profile.radius * profile.radius;
    let rhs = 2.0 * epsilon * profile.lipschitz * num_goods as f64 / num_consumers as f64 + 2.0;
    CurvatureReport {
        lhs,
        rhs,
        ok: lhs >= rhs,
    }
}

impl Economy {
    pub fn num_consumers(&self) -> usize {
        self.consumers.len()
    }

    /// Component-wise total endowment.
    pub fn total_endowment(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.num_goods];
        for c in &self.consumers {
            for (t, &e) in total.iter_mut().zip(&c.endowment) {
                *t += e;
            }
        }
        total
    }

    /// Scale-aware feasibility tolerance for supply = demand checks.
    pub fn feasibility_tol(&self) -> f64 {
        1e-9 * (1.0 + norm_inf(&self.total_endowment()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_goods == 0 {
            return Err(Error::invalid("economy must have at least one good"));
        }
        if self.consumers.is_empty() {
            return Err(Error::invalid("economy must have at least one consumer"));
        }
        for (i, c) in self.consumers.iter().enumerate() {
            check_dims(self.num_goods, c.endowment.len())?;
            check_nonneg(&c.endowment)?;
            c.utility.validate(self.num_goods, i)?;
        }
        let total = self.total_endowment();
        if total.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::invalid(
                "total endowment must be strictly positive in every good",
            ));
        }
        Ok(())
    }

    /// True when every consumer uses a PLC utility.
    pub fn all_plc(&self) -> bool {
        self.consumers.iter().all(|c| c.utility.is_plc())
    }

    /// True when every consumer uses a ShiftedPower utility.
    pub fn all_shifted_power(&self) -> bool {
        self.consumers.iter().all(|c| !c.utility.is_plc())
    }

    /// Rescales every `ShiftedPower` normalizer so that the utility of the
    /// total endowment equals `1 - eta_bar`; feasible bundles then stay below
    /// that level by monotonicity. PLC consumers are left untouched.
    pub fn normalize(&self, eta_bar: f64) -> Result<Economy> {
        if !(eta_bar > 0.0 && eta_bar < 1.0) {
            return Err(Error::invalid(format!(
                "eta_bar must lie in (0,1), got {eta_bar}"
            )));
        }
        let total = self.total_endowment();
        let mut out = self.clone();
        for c in &mut out.consumers {
            if let UtilitySpec::ShiftedPower {
                rho,
                theta,
                normalizer,
            } = &mut c.utility
            {
                let raw: f64 = total.iter().map(|&v| (v + *theta).powf(*rho)).sum();
                *normalizer = raw / (1.0 - eta_bar);
            }
        }
        Ok(out)
    }

    /// The `n`-th replica: `n * h` consumers ordered copy-major, so copy `i`
    /// of type `t` sits at index `i * h + t`. Normalizers are left unchanged.
    pub fn replicate(&self, n: usize) -> Result<Economy> {
        if n == 0 {
            return Err(Error::invalid("replication factor must be at least 1"));
        }
        let mut consumers = Vec::with_capacity(n * self.consumers.len());
        for _ in 0..n {
            consumers.extend(self.consumers.iter().cloned());
        }
        Ok(Economy {
            num_goods: self.num_goods,
            consumers,
        })
    }
}

impl Allocation {
    /// Checks bundle shapes, nonnegativity and supply = demand within the
    /// economy's feasibility tolerance.
    pub fn validate(&self, economy: &Economy) -> Result<()> {
        if self.bundles.len() != economy.num_consumers() {
            return Err(Error::invalid(format!(
                "allocation has {} bundles for {} consumers",
                self.bundles.len(),
                economy.num_consumers()
            )));
        }
        let mut total = vec![0.0; economy.num_goods];
        for b in &self.bundles {
            check_dims(economy.num_goods, b.len())?;
            check_nonneg(b)?;
            for (t, &v) in total.iter_mut().zip(b) {
                *t += v;
            }
        }
        let supply = economy.total_endowment();
        let tol = economy.feasibility_tol();
        for (a, (&d, &s)) in total.iter().zip(&supply).enumerate() {
            if (d - s).abs() > tol {
                return Err(Error::invalid(format!(
                    "allocation infeasible in good {a}: demand {d} vs supply {s}"
                )));
            }
        }
        Ok(())
    }
}

impl ReplicaAllocation {
    /// Validates against the underlying (unreplicated) economy.
    pub fn validate(&self, economy: &Economy) -> Result<()> {
        let h = economy.num_consumers();
        if self.n == 0 {
            return Err(Error::invalid("replication factor must be at least 1"));
        }
        if self.bundles.len() != self.n * h {
            return Err(Error::invalid(format!(
                "replica allocation has {} bundles, expected n*h = {}",
                self.bundles.len(),
                self.n * h
            )));
        }
        let mut total = vec![0.0; economy.num_goods];
        for b in &self.bundles {
            check_dims(economy.num_goods, b.len())?;
            check_nonneg(b)?;
            for (t, &v) in total.iter_mut().zip(b) {
                *t += v;
            }
        }
        let supply = economy.total_endowment();
        let tol = economy.feasibility_tol() * self.n as f64;
        for (a, (&d, &s)) in total.iter().zip(&supply).enumerate() {
            if (d - s * self.n as f64).abs() > tol {
                return Err(Error::invalid(format!(
                    "replica allocation infeasible in good {a}: demand {d} vs supply {}",
                    s * self.n as f64
                )));
            }
        }
        Ok(())
    }

    /// Bundle of copy `i`, type `t`.
    pub fn bundle(&self, copy: usize, type_index: usize, h: usize) -> &[f64] {
        &self.bundles[copy * h + type_index]
    }
}

/// Distance helper shared by a few callers: `||a - b||_2`.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    norm2(&crate::linalg::sub(a, b))
}

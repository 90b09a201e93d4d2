//! Campaign cost model and the regret of score-driven targeting decisions.
//!
//! A customer with label `y` (0 = churner, 1 = non-churner) and lifetime value
//! `clv` costs nothing when left alone and `f + y·d + (1−y)·γ·(d − clv)` when
//! targeted. Negative cost is profit. A model score `ŷ` is turned into a
//! targeting decision by comparing it against the customer's midpoint `m`, the
//! score at which the cost of targeting under the relaxed label `ŷ` is zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default steepness of the sigmoid relaxation of the targeting step.
pub const DEFAULT_SLOPE: f64 = 10.0;

/// Binary customer label, with churners encoded as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Churner,
    NonChurner,
}

impl Label {
    pub fn from_value(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Churner),
            1 => Some(Label::NonChurner),
            _ => None,
        }
    }

    pub fn value(self) -> u8 {
        match self {
            Label::Churner => 0,
            Label::NonChurner => 1,
        }
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    pub fn is_churner(self) -> bool {
        self == Label::Churner
    }
}

/// Whether a customer is included in the retention campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Skip,
    Target,
}

impl Decision {
    pub fn from_bool(target: bool) -> Self {
        if target {
            Decision::Target
        } else {
            Decision::Skip
        }
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        match self {
            Decision::Skip => 0.0,
            Decision::Target => 1.0,
        }
    }

    pub fn is_target(self) -> bool {
        self == Decision::Target
    }
}

/// Cost structure of a retention campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignParams {
    /// Cost of contacting one customer (`f`).
    pub contact_cost: f64,
    /// Cost of the incentive, paid only when accepted (`d`).
    pub incentive: f64,
    /// Fraction of contacted would-be churners who accept and stay (`γ`).
    pub acceptance: f64,
    /// Steepness `s` of the sigmoid surrogate.
    pub slope: f64,
}

impl CampaignParams {
    pub fn new(contact_cost: f64, incentive: f64, acceptance: f64, slope: f64) -> Result<Self> {
        let params = CampaignParams {
            contact_cost,
            incentive,
            acceptance,
            slope,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.contact_cost.is_finite() && self.contact_cost >= 0.0) {
            return bad("contact cost f must be finite and >= 0");
        }
        if !(self.incentive.is_finite() && self.incentive > 0.0) {
            return bad("incentive d must be finite and > 0");
        }
        if !(self.acceptance > 0.0 && self.acceptance <= 1.0) {
            return bad("acceptance fraction gamma must lie in (0, 1]");
        }
        if !(self.slope.is_finite() && self.slope > 0.0) {
            return bad("surrogate slope s must be finite and > 0");
        }
        Ok(())
    }

    pub fn with_incentive(self, incentive: f64) -> Result<Self> {
        CampaignParams { incentive, ..self }.validate_into()
    }

    pub fn with_slope(self, slope: f64) -> Result<Self> {
        CampaignParams { slope, ..self }.validate_into()
    }

    fn validate_into(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}

/// Cost of targeting one customer: `f + y·d + (1−y)·γ·(d − clv)`.
#[inline]
pub fn targeting_cost(y: Label, params: &CampaignParams, clv: f64) -> f64 {
    let yv = y.as_f64();
    params.contact_cost
        + yv * params.incentive
        + (1.0 - yv) * params.acceptance * (params.incentive - clv)
}

pub fn campaign_cost(z: Decision, y: Label, params: &CampaignParams, clv: f64) -> f64 {
    match z {
        Decision::Skip => 0.0,
        Decision::Target => targeting_cost(y, params, clv),
    }
}

/// Cost with the decision relaxed to `z ∈ [0, 1]`; linear in `z`.
#[inline]
pub fn relaxed_cost(z: f64, y: Label, params: &CampaignParams, clv: f64) -> f64 {
    z * targeting_cost(y, params, clv)
}

/// CLV at which retaining a churner exactly pays for the campaign, `d + f/γ`.
pub fn break_even_clv(params: &CampaignParams) -> f64 {
    params.incentive + params.contact_cost / params.acceptance
}

#[inline]
fn midpoint_raw(params: &CampaignParams, clv: f64) -> f64 {
    let gain = params.acceptance * (params.incentive - clv);
    (params.contact_cost + gain) / (gain - params.incentive)
}

/// Score threshold below which targeting the customer is prescribed.
///
/// Lies in `(0, 1)` when `clv` exceeds [`break_even_clv`], and is `<= 0`
/// otherwise.
pub fn midpoint(params: &CampaignParams, clv: f64) -> Result<f64> {
    let denom = params.acceptance * (params.incentive - clv) - params.incentive;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::DegenerateMidpoint { clv });
    }
    Ok(midpoint_raw(params, clv))
}

/// Step prescription: target iff `score < m` (ties are not targeted).
#[inline]
pub fn prescribe(score: f64, m: f64) -> Decision {
    Decision::from_bool(score < m)
}

/// Decision that minimizes cost when the true label is known.
pub fn optimal_decision(y: Label, params: &CampaignParams, clv: f64) -> Decision {
    if clv <= break_even_clv(params) {
        Decision::Skip
    } else {
        Decision::from_bool(y.is_churner())
    }
}

/// Prescribed decisions for a batch of scores, one midpoint per customer.
pub fn prescribe_all(scores: &[f64], clvs: &[f64], params: &CampaignParams) -> Result<Vec<Decision>> {
    check_len(scores.len(), clvs.len())?;
    Ok(scores
        .iter()
        .zip(clvs)
        .map(|(&s, &clv)| prescribe(s, midpoint_raw(params, clv)))
        .collect())
}

/// Excess cost of the prescribed decision over the optimal one.
///
/// Requires `clv > 0`.
pub fn regret(y: Label, score: f64, params: &CampaignParams, clv: f64) -> f64 {
    let z = prescribe(score, midpoint_raw(params, clv));
    campaign_cost(z, y, params, clv) - campaign_cost(optimal_decision(y, params, clv), y, params, clv)
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smooth relaxation of the step prescription, `1 − σ(s·(score − m))`.
#[inline]
pub fn surrogate(score: f64, m: f64, slope: f64) -> f64 {
    sigmoid(-slope * (score - m))
}

/// Regret with the step prescription replaced by [`surrogate`].
///
/// Requires `clv > 0`.
pub fn smooth_regret(y: Label, score: f64, params: &CampaignParams, clv: f64) -> f64 {
    let g = surrogate(score, midpoint_raw(params, clv), params.slope);
    let optimal = campaign_cost(optimal_decision(y, params, clv), y, params, clv);
    relaxed_cost(g, y, params, clv) - optimal
}

/// Derivative of [`smooth_regret`] with respect to the score.
pub fn smooth_regret_grad(y: Label, score: f64, params: &CampaignParams, clv: f64) -> f64 {
    let m = midpoint_raw(params, clv);
    let sig = sigmoid(params.slope * (score - m));
    let dg = -params.slope * sig * (1.0 - sig);
    targeting_cost(y, params, clv) * dg
}

fn check_len(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

/// Realized profit of a campaign: the negated sum of per-customer costs.
pub fn total_profit(
    decisions: &[Decision],
    labels: &[Label],
    params: &CampaignParams,
    clvs: &[f64],
) -> Result<f64> {
    check_len(decisions.len(), labels.len())?;
    check_len(decisions.len(), clvs.len())?;
    let cost: f64 = decisions
        .iter()
        .zip(labels)
        .zip(clvs)
        .map(|((&z, &y), &clv)| campaign_cost(z, y, params, clv))
        .sum();
    Ok(-cost)
}

pub fn optimal_decisions(labels: &[Label], params: &CampaignParams, clvs: &[f64]) -> Result<Vec<Decision>> {
    check_len(labels.len(), clvs.len())?;
    Ok(labels
        .iter()
        .zip(clvs)
        .map(|(&y, &clv)| optimal_decision(y, params, clv))
        .collect())
}

/// Profit attainable with full knowledge of the labels.
pub fn optimal_total_profit(labels: &[Label], params: &CampaignParams, clvs: &[f64]) -> Result<f64> {
    let decisions = optimal_decisions(labels, params, clvs)?;
    total_profit(&decisions, labels, params, clvs)
}

/// `(optimal − model) / optimal` on summed costs: 0 when optimal, 1 at zero
/// profit, above 1 when the campaign loses money.
pub fn normalized_gap(optimal_cost_sum: f64, model_cost_sum: f64) -> Result<f64> {
    if optimal_cost_sum == 0.0 {
        return Err(Error::ZeroOptimalCost);
    }
    // Adding zero turns a negative zero into zero.
    Ok((optimal_cost_sum - model_cost_sum) / optimal_cost_sum + 0.0)
}

//! Threshold-based campaign profit metrics evaluated on finite samples.
//!
//! A customer whose score is at or below the threshold is classified as a
//! churner and targeted. Profit is expressed per customer, using a single
//! average CLV for the whole group (MP) or one average per CLV segment (MSP).

use serde::{Deserialize, Serialize};

use crate::decision::{CampaignParams, Decision, Label};
use crate::domain::{segment_by_clv, SegmentAssignment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdedEvaluation {
    pub threshold: f64,
    /// Average campaign profit per customer, in euros.
    pub profit: f64,
    pub targeted_churners: usize,
    pub targeted_non_churners: usize,
    pub churners: usize,
    pub non_churners: usize,
}

impl ThresholdedEvaluation {
    pub fn from_counts(
        threshold: f64,
        targeted_churners: usize,
        targeted_non_churners: usize,
        churners: usize,
        non_churners: usize,
        params: &CampaignParams,
        clv_avg: f64,
    ) -> Self {
        let n = (churners + non_churners) as f64;
        let profit = (retained_value(params, clv_avg) * targeted_churners as f64
            - wasted_cost(params) * targeted_non_churners as f64)
            / n;
        ThresholdedEvaluation {
            threshold,
            profit,
            targeted_churners,
            targeted_non_churners,
            churners,
            non_churners,
        }
    }
}

/// Expected gain of targeting a churner, `CLV·(γ(1−δ) − φ)`.
#[inline]
fn retained_value(params: &CampaignParams, clv: f64) -> f64 {
    params.acceptance * (clv - params.incentive) - params.contact_cost
}

/// Loss of targeting a non-churner, `CLV·(δ + φ)`.
#[inline]
fn wasted_cost(params: &CampaignParams) -> f64 {
    params.incentive + params.contact_cost
}

fn check_len(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

pub fn profit_at_threshold(
    scores: &[f64],
    labels: &[Label],
    t: f64,
    params: &CampaignParams,
    clv_avg: f64,
) -> Result<ThresholdedEvaluation> {
    check_len(scores.len(), labels.len())?;
    if scores.is_empty() {
        return Err(Error::InvalidParameter("no scores to evaluate".into()));
    }
    let (mut tc, mut tn, mut c) = (0, 0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        let targeted = s <= t;
        if y.is_churner() {
            c += 1;
            tc += usize::from(targeted);
        } else {
            tn += usize::from(targeted);
        }
    }
    Ok(ThresholdedEvaluation::from_counts(
        t,
        tc,
        tn,
        c,
        scores.len() - c,
        params,
        clv_avg,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxProfit {
    /// Best average profit per customer.
    pub value: f64,
    /// Threshold attaining it; `-inf` means nobody is targeted.
    pub threshold: f64,
}

/// Maximum profit over all thresholds.
///
/// Candidates are `-inf`, the midpoints between consecutive distinct scores
/// and `+inf`. Among equally profitable thresholds the smallest one wins.
pub fn mp(scores: &[f64], labels: &[Label], params: &CampaignParams, clv_avg: f64) -> Result<MaxProfit> {
    check_len(scores.len(), labels.len())?;
    if scores.is_empty() {
        return Err(Error::InvalidParameter("mp needs at least one score".into()));
    }
    let n = scores.len() as f64;
    let gain = retained_value(params, clv_avg);
    let loss = wasted_cost(params);

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut best = MaxProfit {
        value: 0.0,
        threshold: f64::NEG_INFINITY,
    };
    let (mut tc, mut tn) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]].is_churner() {
                tc += 1;
            } else {
                tn += 1;
            }
            i += 1;
        }
        let t = match order.get(i) {
            Some(&next) => 0.5 * (s + scores[next]),
            None => f64::INFINITY,
        };
        let value = (gain * tc as f64 - loss * tn as f64) / n;
        if value > best.value {
            best = MaxProfit { value, threshold: t };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MspResult {
    pub q: usize,
    /// Per-segment thresholds, ordered by ascending CLV segment.
    pub thresholds: Vec<f64>,
    pub segment_clv: Vec<f64>,
    pub segment_profit: Vec<f64>,
    /// Unweighted mean of the per-segment maxima.
    pub value: f64,
    pub segments: SegmentAssignment,
}

impl MspResult {
    /// Targeting decisions for customers outside the fitted sample, each
    /// judged against the threshold of the segment its CLV falls into.
    pub fn decisions(&self, scores: &[f64], clvs: &[f64]) -> Result<Vec<Decision>> {
        check_len(scores.len(), clvs.len())?;
        Ok(scores
            .iter()
            .zip(clvs)
            .map(|(&s, &clv)| Decision::from_bool(s <= self.thresholds[self.segments.segment_for_clv(clv)]))
            .collect())
    }
}

/// Maximum segment profit with `q` CLV quantile segments.
///
/// Each segment is maximized independently using its own mean CLV. Segment
/// maxima are averaged without weighting by segment size.
pub fn msp(
    scores: &[f64],
    labels: &[Label],
    clvs: &[f64],
    q: usize,
    params: &CampaignParams,
) -> Result<MspResult> {
    check_len(scores.len(), labels.len())?;
    check_len(scores.len(), clvs.len())?;
    let segments = segment_by_clv(clvs, q)?;
    let mut thresholds = Vec::with_capacity(q);
    let mut segment_clv = Vec::with_capacity(q);
    let mut segment_profit = Vec::with_capacity(q);
    for k in 0..q {
        let members = segments.members(k);
        let s: Vec<f64> = members.iter().map(|&i| scores[i]).collect();
        let y: Vec<Label> = members.iter().map(|&i| labels[i]).collect();
        let clv = members.iter().map(|&i| clvs[i]).sum::<f64>() / members.len() as f64;
        let best = mp(&s, &y, params, clv)?;
        thresholds.push(best.threshold);
        segment_clv.push(clv);
        segment_profit.push(best.value);
    }
    let value = segment_profit.iter().sum::<f64>() / q as f64;
    Ok(MspResult {
        q,
        thresholds,
        segment_clv,
        segment_profit,
        value,
        segments,
    })
}

/// MSP maximized over the segment count as well, for `q` in `1..=q_max`.
/// Ties keep the smaller `q`.
pub fn msp_over_q(
    scores: &[f64],
    labels: &[Label],
    clvs: &[f64],
    q_max: usize,
    params: &CampaignParams,
) -> Result<MspResult> {
    let mut best: Option<MspResult> = None;
    for q in 1..=q_max.min(scores.len()) {
        let r = msp(scores, labels, clvs, q, params)?;
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("q_max must be at least 1".into()))
}

/// Share of customers whose thresholded class matches their label.
pub fn accuracy(scores: &[f64], labels: &[Label], class_threshold: f64) -> Result<f64> {
    check_len(scores.len(), labels.len())?;
    if scores.is_empty() {
        return Err(Error::InvalidParameter("accuracy of an empty sample".into()));
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (s <= class_threshold) == y.is_churner())
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

/// Accuracy when the predicted class comes from targeting decisions
/// (targeted = predicted churner).
pub fn decision_accuracy(decisions: &[Decision], labels: &[Label]) -> Result<f64> {
    check_len(decisions.len(), labels.len())?;
    if decisions.is_empty() {
        return Err(Error::InvalidParameter("accuracy of an empty sample".into()));
    }
    let hits = decisions
        .iter()
        .zip(labels)
        .filter(|(z, y)| z.is_target() == y.is_churner())
        .count();
    Ok(hits as f64 / decisions.len() as f64)
}

/// Fraction of customers included in the campaign (η).
pub fn targeted_fraction(decisions: &[Decision]) -> Result<f64> {
    if decisions.is_empty() {
        return Err(Error::InvalidParameter("targeted fraction of an empty campaign".into()));
    }
    Ok(decisions.iter().filter(|z| z.is_target()).count() as f64 / decisions.len() as f64)
}

/// Decisions from a single threshold: target iff `score <= t`.
pub fn threshold_decisions(scores: &[f64], t: f64) -> Vec<Decision> {
    scores.iter().map(|&s| Decision::from_bool(s <= t)).collect()
}

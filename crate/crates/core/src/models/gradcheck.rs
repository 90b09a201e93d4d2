//! Central-difference check of the network's analytic gradients.

use serde::{Deserialize, Serialize};

use crate::decision::CampaignParams;
use crate::domain::CustomerRecord;
use crate::error::{Error, Result};
use crate::models::mlp::{LossKind, Mlp};

/// Gradients smaller than this in magnitude are compared on absolute error
/// only; their relative error is dominated by finite-difference rounding.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|)` over the
    /// parameters whose gradient exceeds [`RELATIVE_FLOOR`].
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index (see [`Mlp::to_flat`]) of the largest relative error.
    pub worst_param: usize,
    pub n_params: usize,
}

pub fn gradient_check(
    model: &Mlp,
    loss: LossKind,
    batch: &[&CustomerRecord],
    params: &CampaignParams,
    h: f64,
) -> Result<GradCheckReport> {
    if !(1e-8..=1e-4).contains(&h) {
        return Err(Error::InvalidParameter(format!("step h = {h} outside [1e-8, 1e-4]")));
    }
    let (_, analytic) = model.loss_and_grad(batch, loss, params)?;
    let base = model.to_flat();
    let mut probe = model.clone();
    let mut flat = base.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_param: 0,
        n_params: base.len(),
    };
    for (i, &a) in analytic.iter().enumerate() {
        flat[i] = base[i] + h;
        probe.set_flat(&flat);
        let up = probe.loss(batch, loss, params)?;
        flat[i] = base[i] - h;
        probe.set_flat(&flat);
        let down = probe.loss(batch, loss, params)?;
        flat[i] = base[i];

        let numeric = (up - down) / (2.0 * h);
        let abs = (a - numeric).abs();
        report.max_abs_error = report.max_abs_error.max(abs);
        let scale = a.abs().max(numeric.abs());
        if scale > RELATIVE_FLOOR {
            let rel = abs / scale;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_param = i;
            }
        }
    }
    Ok(report)
}

//! Finite-difference verification of [`backward`](super::backward).

use rand::seq::SliceRandom;
use serde::Serialize;

use super::backprop::{backward, evaluate_loss, Batch, LossSpec};
use super::NetParams;
use crate::error::{Error, Result};
use crate::seed::{self, tags};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckSettings {
    pub eps: f64,
    /// Coordinates to check, drawn round-robin over the parameter groups.
    /// Coordinates next to a kink are replaced rather than counted.
    pub n_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        GradCheckSettings {
            eps: 1e-5,
            n_coords: 240,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordCheck {
    pub group: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub loss: String,
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates dropped because a ReLU or hinge switched within `±eps`.
    pub skipped_kinks: usize,
    pub worst: Option<CoordCheck>,
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients with central differences on a stratified
/// sample of coordinates.
pub fn grad_check(params: &NetParams, batch: &Batch<'_>, spec: &LossSpec, settings: &GradCheckSettings) -> Result<GradCheckReport> {
    if !(settings.eps > 0.0 && settings.eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {}", settings.eps)));
    }
    if settings.n_coords == 0 {
        return Err(Error::InvalidArgument("n_coords must be > 0".into()));
    }
    let (_, grad) = backward(params, batch, spec)?;
    let mut base_pattern = Vec::new();
    evaluate_loss(params, batch, spec, Some(&mut base_pattern))?;

    let groups = params.groups().to_vec();
    let mut rng = seed::stream(settings.seed, tags::GRAD_CHECK, 0);
    // Round-robin over groups, each walking its own random permutation, so
    // coordinates skipped at a kink are replaced from the same group.
    let mut orders: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            let mut o: Vec<usize> = (0..g.len).collect();
            o.shuffle(&mut rng);
            o
        })
        .collect();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        loss: spec.name().to_string(),
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
        worst: None,
    };
    let mut pattern = Vec::with_capacity(base_pattern.len());
    while report.checked < settings.n_coords && orders.iter().any(|o| !o.is_empty()) {
        for (g, order) in groups.iter().zip(orders.iter_mut()) {
            if report.checked >= settings.n_coords {
                break;
            }
            while let Some(local) = order.pop() {
                let i = g.offset + local;
                let orig = params.values()[i];
                let mut side = |delta: f64| -> Result<(f64, bool)> {
                    probe.values_mut()[i] = orig + delta;
                    pattern.clear();
                    let v = evaluate_loss(&probe, batch, spec, Some(&mut pattern))?;
                    Ok((v.total, pattern == base_pattern))
                };
                let (plus, same_plus) = side(settings.eps)?;
                let (minus, same_minus) = side(-settings.eps)?;
                probe.values_mut()[i] = orig;
                if !(same_plus && same_minus) {
                    report.skipped_kinks += 1;
                    continue;
                }
                let numeric = (plus - minus) / (2.0 * settings.eps);
                let analytic = grad.values()[i];
                let err = rel_error(analytic, numeric);
                report.checked += 1;
                if err > report.max_rel_error || report.worst.is_none() {
                    report.max_rel_error = report.max_rel_error.max(err);
                    report.worst = Some(CoordCheck {
                        group: g.name.clone(),
                        index: local,
                        analytic,
                        numeric,
                        rel_error: err,
                    });
                }
                break;
            }
        }
    }
    Ok(report)
}

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::engine::{self, batch_loss_grads, forward_sample, Weights};
use super::spec::{NetSpec, Plan};
use super::{init_params, NetError};
use crate::rng;

/// Smallest number of coordinates compared (all of them for smaller nets).
pub const MIN_COORDINATES: usize = 200;
const BATCH: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Coordinates whose ±ε perturbation crossed a ReLU or max-pool switch.
    pub skipped_kinks: usize,
}

/// Maximum relative error between analytic and central-difference gradients.
pub fn grad_check(spec: &NetSpec, seed: u64, epsilon: f64) -> Result<f64, NetError> {
    Ok(grad_check_with(spec, seed, epsilon, MIN_COORDINATES)?.max_relative_error)
}

/// Checks `coordinates` seed-chosen parameters on a random batch with random labels.
///
/// Differences are taken on the `f64` working copy of the parameters, so the step is
/// exactly `2ε`. A coordinate is skipped when `θ+ε` and `θ−ε` select different
/// linear pieces of the network, since a one-sided kink makes the central
/// difference meaningless there.
pub fn grad_check_with(spec: &NetSpec, seed: u64, epsilon: f64, coordinates: usize) -> Result<GradCheckReport, NetError> {
    let plan = spec.plan()?;
    let params = init_params(spec, rng::derive_seed(seed, "gradcheck-params", 0))?;
    let mut r = rng::sub_rng(seed, "gradcheck", 0);
    let inputs: Vec<Vec<f32>> = (0..BATCH)
        .map(|_| (0..plan.input_len).map(|_| StandardNormal.sample(&mut r)).map(|v: f64| v as f32).collect())
        .collect();
    let labels: Vec<usize> = (0..BATCH).map(|_| r.random_range(0..spec.classes)).collect();
    let samples: Vec<&[f32]> = inputs.iter().map(Vec::as_slice).collect();

    let mut weights = Weights::from_params(&params);
    let (_, _, grads) = batch_loss_grads(&plan, &weights, &samples, &labels, None);
    let analytic = grads.flat();
    let total = analytic.len();
    let picks: Vec<usize> = if total <= coordinates.max(MIN_COORDINATES) {
        (0..total).collect()
    } else {
        let mut v = index::sample(&mut r, total, coordinates.max(MIN_COORDINATES)).into_vec();
        v.sort_unstable();
        v
    };

    let mut report = GradCheckReport { max_relative_error: 0.0, checked: 0, skipped_kinks: 0 };
    for &flat in &picks {
        let (layer, bias, i) = params.locate(flat);
        let theta = *coord(&mut weights, layer, bias, i);
        *coord(&mut weights, layer, bias, i) = theta + epsilon;
        let (lp, sp) = loss_and_signature(&plan, &weights, &samples, &labels);
        *coord(&mut weights, layer, bias, i) = theta - epsilon;
        let (lm, sm) = loss_and_signature(&plan, &weights, &samples, &labels);
        *coord(&mut weights, layer, bias, i) = theta;
        if sp != sm {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * epsilon);
        let a = analytic[flat];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        report.max_relative_error = report.max_relative_error.max(err);
        report.checked += 1;
    }
    Ok(report)
}

fn coord(w: &mut Weights, layer: usize, bias: bool, i: usize) -> &mut f64 {
    let (wt, b) = &mut w.layers[layer];
    if bias { &mut b[i] } else { &mut wt[i] }
}

fn loss_and_signature(plan: &Plan, w: &Weights, samples: &[&[f32]], labels: &[usize]) -> (f64, Vec<u64>) {
    let mut loss = 0.0;
    let mut sig = Vec::with_capacity(samples.len());
    for (x, &y) in samples.iter().zip(labels) {
        let trace = forward_sample(plan, w, x);
        loss += engine::cross_entropy(trace.logits(), y);
        sig.push(trace.signature(plan));
    }
    (loss / samples.len() as f64, sig)
}

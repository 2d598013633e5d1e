use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::loss::{distance, dual_triplet_terms};
use super::model::{EmbeddingModel, ForwardCache, Gradients};
use crate::error::{Error, Result};
use crate::query::QueryResponse;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            margin: 0.2,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            epochs: 20,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::Config(format!("margin {} must be positive", self.margin)));
        }
        if !(self.learning_rate >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("learning rate must be >= 0 and momentum in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss observed during each epoch.
    pub epoch_losses: Vec<f64>,
}

fn unit_diff(u: &[f64], v: &[f64]) -> Vec<f64> {
    let d = distance(u, v);
    if d < 1e-12 {
        vec![0.0; u.len()]
    } else {
        u.iter().zip(v).map(|(a, b)| (a - b) / d).collect()
    }
}

fn axpy(acc: &mut [f64], k: f64, x: &[f64]) {
    acc.iter_mut().zip(x).for_each(|(a, b)| *a += k * b);
}

/// Mean dual-triplet loss over a batch of answered queries and its analytic
/// gradient with respect to every model parameter.
///
/// The chosen option is the negative; the other two are the positives in
/// query order. Inactive hinges (argument <= 0) contribute nothing.
pub fn loss_gradient(
    model: &EmbeddingModel,
    features: &[FeatureVector],
    batch: &[QueryResponse],
    margin: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::arg("loss_gradient needs a non-empty batch"));
    }
    let mut caches: BTreeMap<usize, (ForwardCache, Vec<f64>)> = BTreeMap::new();
    for r in batch {
        for p in r.query.patches() {
            let f = features
                .get(p)
                .ok_or_else(|| Error::arg(format!("patch {p} has no descriptor")))?;
            if let std::collections::btree_map::Entry::Vacant(e) = caches.entry(p) {
                let cache = model.forward(f)?;
                let zeros = vec![0.0; cache.output.len()];
                e.insert((cache, zeros));
            }
        }
    }

    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for r in batch {
        let (p1, p2, n) = r.training_triple();
        let y1 = caches[&p1].0.output.clone();
        let y2 = caches[&p2].0.output.clone();
        let yn = caches[&n].0.output.clone();
        let terms = dual_triplet_terms(&y1, &y2, &yn, margin);
        total += terms.iter().map(|t| t.max(0.0)).sum::<f64>();
        let u12 = unit_diff(&y1, &y2);
        if terms[0] > 0.0 {
            let u1n = unit_diff(&y1, &yn);
            axpy(&mut caches.get_mut(&p1).unwrap().1, scale, &u12);
            axpy(&mut caches.get_mut(&p1).unwrap().1, -scale, &u1n);
            axpy(&mut caches.get_mut(&p2).unwrap().1, -scale, &u12);
            axpy(&mut caches.get_mut(&n).unwrap().1, scale, &u1n);
        }
        if terms[1] > 0.0 {
            let u2n = unit_diff(&y2, &yn);
            axpy(&mut caches.get_mut(&p1).unwrap().1, scale, &u12);
            axpy(&mut caches.get_mut(&p2).unwrap().1, -scale, &u12);
            axpy(&mut caches.get_mut(&p2).unwrap().1, -scale, &u2n);
            axpy(&mut caches.get_mut(&n).unwrap().1, scale, &u2n);
        }
    }

    let mut grads = Gradients::zeros_like(model);
    for (cache, d_out) in caches.values() {
        if d_out.iter().any(|&v| v != 0.0) {
            model.backward(cache, d_out, &mut grads);
        }
    }
    Ok((total * scale, grads))
}

/// Mean dual-triplet loss of `responses` under `model`.
pub fn mean_loss(model: &EmbeddingModel, features: &[FeatureVector], responses: &[QueryResponse], margin: f64) -> Result<f64> {
    if responses.is_empty() {
        return Ok(0.0);
    }
    let embeddings = model.embed_all(features)?;
    let total: f64 = responses
        .iter()
        .map(|r| {
            let (p1, p2, n) = r.training_triple();
            super::loss::dual_triplet_loss(&embeddings[p1], &embeddings[p2], &embeddings[n], margin)
        })
        .sum();
    Ok(total / responses.len() as f64)
}

/// Seeded, shuffled mini-batch SGD with momentum, run for `config.epochs`
/// passes over `responses`. The model is updated in place.
pub fn train(
    model: &mut EmbeddingModel,
    features: &[FeatureVector],
    responses: &[QueryResponse],
    config: &TrainingConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if responses.is_empty() {
        return Err(Error::arg("training needs at least one response"));
    }
    let mut rng = seed::rng(config.seed);
    let mut order: Vec<usize> = (0..responses.len()).collect();
    let mut velocity = Gradients::zeros_like(model);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| responses[i].clone()));
            let (loss, grads) = loss_gradient(model, features, &batch, config.margin)?;
            if !loss.is_finite() {
                return Err(Error::Training(format!("non-finite loss {loss} in epoch {epoch}")));
            }
            sum += loss;
            batches += 1;
            for ((v, g), p) in velocity
                .layers
                .iter_mut()
                .zip(&grads.layers)
                .zip(model.layers.iter_mut())
            {
                let vs = v.weights.iter_mut().chain(v.biases.iter_mut());
                let gs = g.weights.iter().chain(&g.biases);
                let ps = p.weights.iter_mut().chain(p.biases.iter_mut());
                for ((v, g), p) in vs.zip(gs).zip(ps) {
                    *v = config.momentum * *v - config.learning_rate * g;
                    *p += *v;
                }
            }
        }
        if !model.is_finite() {
            return Err(Error::Training(format!("parameters diverged in epoch {epoch}")));
        }
        epoch_losses.push(sum / batches as f64);
    }
    model.config = Some(config.clone());
    Ok(TrainReport { epoch_losses })
}

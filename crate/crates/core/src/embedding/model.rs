use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::train::TrainingConfig;
use crate::error::{Error, Result};
use crate::seed;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Dense layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer { inputs, outputs, weights: vec![0.0; inputs * outputs], biases: vec![0.0; outputs] }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.biases.iter().enumerate().map(|(o, &b)| {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
}

/// Feedforward embedding network. Hidden layers use tanh, the last layer is
/// linear and its output is projected onto the unit sphere.
///
/// Inputs are standardized with a fixed per-feature shift and scale before the
/// first layer; those are not trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub format_version: u32,
    pub activation: Activation,
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub layers: Vec<Layer>,
    /// Training configuration last used on this model, for the record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<TrainingConfig>,
}

/// Per-layer weight and bias gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(model: &EmbeddingModel) -> Self {
        Gradients {
            layers: model.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|v| *v *= k);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.flatten().iter().all(|&v| v == 0.0)
    }
}

/// Activations recorded during a forward pass, needed for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Standardized input followed by each hidden activation.
    activations: Vec<Vec<f64>>,
    /// Pre-normalization output.
    raw: Vec<f64>,
    raw_norm: f64,
    pub output: Vec<f64>,
}

impl EmbeddingModel {
    /// Xavier-uniform initialization; `dims` lists the input width, the hidden
    /// widths and the output width.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::arg(format!("invalid layer sizes {dims:?}")));
        }
        let mut rng = seed::rng(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = (6.0 / (inputs + outputs) as f64).sqrt();
                let mut layer = Layer::zeros(inputs, outputs);
                layer.weights.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
                layer
            })
            .collect();
        Ok(EmbeddingModel {
            format_version: MODEL_FORMAT_VERSION,
            activation: Activation::Tanh,
            input_shift: vec![0.0; dims[0]],
            input_scale: vec![1.0; dims[0]],
            layers,
            config: None,
        })
    }

    /// Sets input standardization from a sample of descriptors. Constant
    /// features keep unit scale.
    pub fn fit_input_normalization(&mut self, features: &[FeatureVector]) -> Result<()> {
        let dim = self.input_dim();
        if features.is_empty() || features.iter().any(|f| f.len() != dim) {
            return Err(Error::arg("normalization sample is empty or has the wrong dimension"));
        }
        let n = features.len() as f64;
        for j in 0..dim {
            let mean = features.iter().map(|f| f.0[j]).sum::<f64>() / n;
            let var = features.iter().map(|f| (f.0[j] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            self.input_shift[j] = mean;
            self.input_scale[j] = if sd > 1e-9 { 1.0 / sd } else { 1.0 };
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn param_mut(&mut self, index: usize) -> &mut f64 {
        let mut i = index;
        for l in &mut self.layers {
            if i < l.weights.len() {
                return &mut l.weights[i];
            }
            i -= l.weights.len();
            if i < l.biases.len() {
                return &mut l.biases[i];
            }
            i -= l.biases.len();
        }
        panic!("parameter index {index} out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &FeatureVector) -> Result<ForwardCache> {
        if x.len() != self.input_dim() {
            return Err(Error::arg(format!(
                "feature dimension {} does not match model input {}",
                x.len(),
                self.input_dim()
            )));
        }
        let input: Vec<f64> = x
            .0
            .iter()
            .zip(&self.input_shift)
            .zip(&self.input_scale)
            .map(|((v, s), k)| (v - s) * k)
            .collect();
        let mut activations = vec![input];
        let mut buf = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(activations.last().unwrap(), &mut buf);
            if i < last {
                activations.push(buf.iter().map(|z| z.tanh()).collect());
            }
        }
        let raw = buf;
        let raw_norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let output = if raw_norm > 1e-12 {
            raw.iter().map(|v| v / raw_norm).collect()
        } else {
            // degenerate zero output: pin to the first axis
            let mut e = vec![0.0; raw.len()];
            e[0] = 1.0;
            e
        };
        Ok(ForwardCache { activations, raw, raw_norm, output })
    }

    /// Unit-norm embedding of a descriptor.
    pub fn embed(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.output)
    }

    pub fn embed_all(&self, xs: &[FeatureVector]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.embed(x)).collect()
    }

    /// Accumulates into `grads` the parameter gradient of a scalar whose
    /// gradient with respect to the normalized output is `d_output`.
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64], grads: &mut Gradients) {
        if cache.raw_norm <= 1e-12 {
            return;
        }
        let y = &cache.output;
        let dot: f64 = y.iter().zip(d_output).map(|(a, b)| a * b).sum();
        // d(z/|z|)/dz = (I - y y^T) / |z|
        let mut delta: Vec<f64> = d_output
            .iter()
            .zip(y)
            .map(|(g, yi)| (g - yi * dot) / cache.raw_norm)
            .collect();
        debug_assert_eq!(delta.len(), cache.raw.len());
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[li];
            let g = &mut grads.layers[li];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(input).for_each(|(w, a)| *w += d * a);
            }
            if li == 0 {
                break;
            }
            // back through the weights, then through tanh of the previous layer
            let mut prev = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
            }
            prev.iter_mut().zip(input).for_each(|(p, a)| *p *= 1.0 - a * a);
            delta = prev;
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let model: EmbeddingModel = serde_json::from_slice(&fs::read(path)?)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::State(format!("unsupported model format version {}", model.format_version)));
        }
        if model.layers.is_empty()
            || model.input_shift.len() != model.input_dim()
            || model.input_scale.len() != model.input_dim()
            || model.layers.windows(2).any(|w| w[0].outputs != w[1].inputs)
            || model
                .layers
                .iter()
                .any(|l| l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs)
        {
            return Err(Error::State("model.json has inconsistent layer shapes".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(dim: usize, seed: u64) -> FeatureVector {
        let mut rng = seed::rng(seed);
        FeatureVector((0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
    }

    #[test]
    fn output_is_unit_norm() {
        let model = EmbeddingModel::new(&[92, 64, 32, 16], 1).unwrap();
        for s in 0..20 {
            let y = model.embed(&features(92, s)).unwrap();
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn forced_output_direction() {
        let mut model = EmbeddingModel::new(&[5, 4, 3], 2).unwrap();
        let last = model.layers.last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.biases = vec![1.0, 0.0, 0.0];
        assert_eq!(model.embed(&features(5, 0)).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let model = EmbeddingModel::new(&[5, 3], 2).unwrap();
        assert!(model.embed(&features(4, 0)).is_err());
    }

    #[test]
    fn deterministic() {
        let a = EmbeddingModel::new(&[6, 5, 3], 9).unwrap();
        let b = EmbeddingModel::new(&[6, 5, 3], 9).unwrap();
        assert_eq!(a, b);
        let x = features(6, 4);
        assert_eq!(a.embed(&x).unwrap(), a.embed(&x).unwrap());
    }

    #[test]
    fn backward_matches_finite_differences_for_linear_readout() {
        // scalar = c . y, gradient via backward vs central differences
        let mut model = EmbeddingModel::new(&[4, 5, 3], 3).unwrap();
        let x = features(4, 1);
        let c = [0.3, -0.7, 0.5];
        let f = |m: &EmbeddingModel| -> f64 { m.embed(&x).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum() };
        let cache = model.forward(&x).unwrap();
        let mut g = Gradients::zeros_like(&model);
        model.backward(&cache, &c, &mut g);
        let analytic = g.flatten();
        let h = 1e-6;
        for i in 0..model.num_params() {
            let orig = *model.param_mut(i);
            *model.param_mut(i) = orig + h;
            let up = f(&model);
            *model.param_mut(i) = orig - h;
            let down = f(&model);
            *model.param_mut(i) = orig;
            let numeric = (up - down) / (2.0 * h);
            assert!((numeric - analytic[i]).abs() < 1e-7, "param {i}: {numeric} vs {}", analytic[i]);
        }
    }

    #[test]
    fn json_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = EmbeddingModel::new(&[7, 4, 2], 5).unwrap();
        model.save(&path).unwrap();
        assert_eq!(EmbeddingModel::load(&path).unwrap(), model);
    }
}

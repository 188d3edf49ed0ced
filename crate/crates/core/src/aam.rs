//! The attentive aggregation model.
//!
//! Every test result `x_i` is encoded independently by an MLP into `h_i`.
//! A learned query scores the tanh projection of each `h_i`; the softmax of
//! those scores weights the pooled representation `h_all = Σ a_i h_i`. A
//! small head maps `h_all` (optionally concatenated with age and sex) to a
//! sigmoid diagnostic score.
//!
//! The pooled representation is a weighted sum, so the model is invariant to
//! the order of the tests; time enters only through the gap feature.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureSequence, Participant, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::numeric::{
    accumulate_outer_rows, affine_rows, axpy, backprop_rows, dot, glorot_limit, matvec,
    matvec_transposed, sigmoid, softmax, softmax_backward, softplus, Matrix,
};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AamHyperparams {
    pub hidden_units: usize,
    pub layers: usize,
    pub dropout: f64,
    pub l2: f64,
    pub use_demographics: bool,
}

impl AamHyperparams {
    pub const HIDDEN_UNITS: [usize; 4] = [16, 32, 64, 128];
    pub const L2_STRENGTHS: [f64; 3] = [1e-4, 1e-5, 0.0];
    pub const LAYERS: [usize; 3] = [1, 2, 3];
    pub const MAX_DROPOUT: f64 = 0.35;

    pub fn validate(&self) -> Result<()> {
        if !Self::HIDDEN_UNITS.contains(&self.hidden_units) {
            return Err(Error::invalid(format!(
                "hidden units must be one of {:?}, got {}",
                Self::HIDDEN_UNITS,
                self.hidden_units
            )));
        }
        if !Self::LAYERS.contains(&self.layers) {
            return Err(Error::invalid(format!("layers must be 1..=3, got {}", self.layers)));
        }
        if !(0.0..=Self::MAX_DROPOUT).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout must lie in [0, 0.35], got {}",
                self.dropout
            )));
        }
        if !Self::L2_STRENGTHS.contains(&self.l2) {
            return Err(Error::invalid(format!(
                "l2 strength must be one of {:?}, got {}",
                Self::L2_STRENGTHS,
                self.l2
            )));
        }
        Ok(())
    }

    fn head_inputs(&self) -> usize {
        self.hidden_units + if self.use_demographics { 2 } else { 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out × in`.
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    fn glorot(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: Matrix::glorot(outputs, inputs, rng),
            bias: vec![0.0; outputs],
        }
    }

    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    fn zeros_like(&self) -> Self {
        Self::zeros(self.weight.cols(), self.weight.rows())
    }
}

/// All learned parameters. Gradients use the same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct AamParams {
    pub encoder: Vec<Dense>,
    /// Projection into attention space, `N × N`.
    pub attention: Dense,
    /// The learned query scored against every projected test (`u_max`).
    pub query: Vec<f64>,
    pub head_hidden: Dense,
    pub head_output: Dense,
}

impl AamParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            encoder: self.encoder.iter().map(Dense::zeros_like).collect(),
            attention: self.attention.zeros_like(),
            query: vec![0.0; self.query.len()],
            head_hidden: self.head_hidden.zeros_like(),
            head_output: self.head_output.zeros_like(),
        }
    }

    /// Flat views in a fixed order, paired with whether the L2 penalty applies.
    pub fn tensors(&self) -> Vec<(&[f64], bool)> {
        let mut out = Vec::with_capacity(2 * self.encoder.len() + 7);
        for layer in &self.encoder {
            out.push((layer.weight.data(), true));
            out.push((layer.bias.as_slice(), false));
        }
        out.push((self.attention.weight.data(), true));
        out.push((self.attention.bias.as_slice(), false));
        out.push((self.query.as_slice(), true));
        out.push((self.head_hidden.weight.data(), true));
        out.push((self.head_hidden.bias.as_slice(), false));
        out.push((self.head_output.weight.data(), true));
        out.push((self.head_output.bias.as_slice(), false));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.encoder.len() + 7);
        for layer in &mut self.encoder {
            out.push(layer.weight.data_mut());
            out.push(layer.bias.as_mut_slice());
        }
        out.push(self.attention.weight.data_mut());
        out.push(self.attention.bias.as_mut_slice());
        out.push(self.query.as_mut_slice());
        out.push(self.head_hidden.weight.data_mut());
        out.push(self.head_hidden.bias.as_mut_slice());
        out.push(self.head_output.weight.data_mut());
        out.push(self.head_output.bias.as_mut_slice());
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|(t, _)| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(t, _)| t.iter().all(|v| v.is_finite()))
    }

    fn l2_norm_sq(&self) -> f64 {
        self.tensors()
            .iter()
            .filter(|(_, penalized)| *penalized)
            .map(|(t, _)| dot(t, t))
            .sum()
    }

    fn add_assign(&mut self, other: &AamParams) {
        for (dst, (src, _)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(1.0, src, dst);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    /// Age / 100, clipped to [0, 1].
    pub age_norm: f64,
    /// 1 = female.
    pub sex: f64,
}

impl Demographics {
    pub fn new(age: u32, sex: u8) -> Self {
        Self {
            age_norm: (age as f64 / 100.0).clamp(0.0, 1.0),
            sex: sex as f64,
        }
    }

    pub fn of(participant: &Participant) -> Self {
        Self::new(participant.age, participant.sex)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub score: f64,
    /// One weight per test, in input order.
    pub attention: Vec<f64>,
}

/// One training example: a participant's features, demographics and label.
#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub features: &'a FeatureSequence,
    pub demographics: Option<Demographics>,
    pub label: f64,
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct Trace {
    /// Input of every encoder layer; `[0]` is the raw feature matrix.
    layer_inputs: Vec<Vec<f64>>,
    /// Post-relu output of every encoder layer, before dropout.
    activated: Vec<Vec<f64>>,
    /// Inverted-dropout multipliers per encoder layer (training only).
    masks: Vec<Option<Vec<f64>>>,
    hidden: Vec<f64>,
    projected: Vec<f64>,
    attention: Vec<f64>,
    head_input: Vec<f64>,
    head_activated: Vec<f64>,
    logit: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aam {
    pub hyper: AamHyperparams,
    pub params: AamParams,
}

impl Aam {
    /// Glorot-uniform weights, zero biases; the query is drawn like a weight row.
    pub fn init(hyper: AamHyperparams, seed_value: u64) -> Result<Self> {
        hyper.validate()?;
        let n = hyper.hidden_units;
        let mut rng = seed::derived_rng(seed_value, seed::Stream::Init, 0);
        let mut encoder = Vec::with_capacity(hyper.layers);
        for layer in 0..hyper.layers {
            let inputs = if layer == 0 { FEATURE_DIM } else { n };
            encoder.push(Dense::glorot(inputs, n, &mut rng));
        }
        let attention = Dense::glorot(n, n, &mut rng);
        let limit = glorot_limit(n, 1);
        let query = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
        let head_hidden = Dense::glorot(hyper.head_inputs(), n, &mut rng);
        let head_output = Dense::glorot(n, 1, &mut rng);
        Ok(Self {
            hyper,
            params: AamParams {
                encoder,
                attention,
                query,
                head_hidden,
                head_output,
            },
        })
    }

    /// All weights and biases zero.
    pub fn zeroed(hyper: AamHyperparams) -> Result<Self> {
        let mut model = Self::init(hyper, 0)?;
        for t in model.params.tensors_mut() {
            t.fill(0.0);
        }
        Ok(model)
    }

    /// Encoder output for a single feature vector (inference mode).
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != FEATURE_DIM {
            return Err(Error::Shape(format!(
                "feature vector has length {}, expected {FEATURE_DIM}",
                x.len()
            )));
        }
        let mut h = x.to_vec();
        for layer in &self.params.encoder {
            h = matvec(&layer.weight, &h)?;
            for (v, b) in h.iter_mut().zip(&layer.bias) {
                *v = (*v + b).max(0.0);
            }
        }
        Ok(h)
    }

    /// Attention pooling over hidden states: returns `(h_all, a)`.
    pub fn attend(&self, hidden: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        if hidden.is_empty() {
            return Err(Error::Empty("hidden states"));
        }
        let n = self.hyper.hidden_units;
        let mut scores = Vec::with_capacity(hidden.len());
        for h in hidden {
            if h.len() != n {
                return Err(Error::Shape(format!(
                    "hidden state has length {}, expected {n}",
                    h.len()
                )));
            }
            let mut u = matvec(&self.params.attention.weight, h)?;
            for (v, b) in u.iter_mut().zip(&self.params.attention.bias) {
                *v = (*v + b).tanh();
            }
            scores.push(dot(&u, &self.params.query));
        }
        let a = softmax(&scores)?;
        let mut pooled = vec![0.0; n];
        for (h, &w) in hidden.iter().zip(&a) {
            axpy(w, h, &mut pooled);
        }
        Ok((pooled, a))
    }

    fn check_demographics(&self, demo: Option<Demographics>) -> Result<()> {
        match (self.hyper.use_demographics, demo.is_some()) {
            (true, false) => Err(Error::invalid("model requires demographics")),
            (false, true) => Err(Error::invalid("model was built without demographics")),
            _ => Ok(()),
        }
    }

    pub fn predict(&self, features: &FeatureSequence, demo: Option<Demographics>) -> Result<Prediction> {
        let trace = self.forward(features, demo, None)?;
        Ok(Prediction {
            score: sigmoid(trace.logit),
            attention: trace.attention,
        })
    }

    /// Pre-sigmoid output in inference mode.
    pub fn logit(&self, features: &FeatureSequence, demo: Option<Demographics>) -> Result<f64> {
        Ok(self.forward(features, demo, None)?.logit)
    }

    fn forward(
        &self,
        features: &FeatureSequence,
        demo: Option<Demographics>,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Trace> {
        self.check_demographics(demo)?;
        let k = features.len();
        if k == 0 {
            return Err(Error::Empty("feature sequence"));
        }
        let n = self.hyper.hidden_units;
        let p = &self.params;

        let mut layer_inputs = Vec::with_capacity(p.encoder.len());
        let mut activated = Vec::with_capacity(p.encoder.len());
        let mut masks = Vec::with_capacity(p.encoder.len());
        let mut current = features.as_slice().to_vec();
        for layer in &p.encoder {
            let mut out = affine_rows(&current, k, &layer.weight, &layer.bias)?;
            for v in &mut out {
                *v = v.max(0.0);
            }
            layer_inputs.push(current);
            let mask = match dropout.as_deref_mut() {
                Some(rng) if self.hyper.dropout > 0.0 => {
                    let keep = 1.0 - self.hyper.dropout;
                    Some(
                        (0..out.len())
                            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect::<Vec<f64>>(),
                    )
                }
                _ => None,
            };
            current = match &mask {
                Some(m) => out.iter().zip(m).map(|(v, s)| v * s).collect(),
                None => out.clone(),
            };
            activated.push(out);
            masks.push(mask);
        }
        let hidden = current;

        let mut projected = affine_rows(&hidden, k, &p.attention.weight, &p.attention.bias)?;
        for v in &mut projected {
            *v = v.tanh();
        }
        let scores: Vec<f64> = projected.chunks_exact(n).map(|u| dot(u, &p.query)).collect();
        let attention = softmax(&scores)?;
        let mut pooled = vec![0.0; n];
        for (h, &w) in hidden.chunks_exact(n).zip(&attention) {
            axpy(w, h, &mut pooled);
        }

        let mut head_input = pooled;
        if let Some(d) = demo {
            head_input.push(d.age_norm);
            head_input.push(d.sex);
        }
        let mut head_activated = matvec(&p.head_hidden.weight, &head_input)?;
        for (v, b) in head_activated.iter_mut().zip(&p.head_hidden.bias) {
            *v = (*v + b).max(0.0);
        }
        let logit = dot(p.head_output.weight.row(0), &head_activated) + p.head_output.bias[0];

        Ok(Trace {
            layer_inputs,
            activated,
            masks,
            hidden,
            projected,
            attention,
            head_input,
            head_activated,
            logit,
        })
    }

    /// Gradient of `weight · BCE(sigmoid(logit), label)` for one example.
    fn backward(&self, trace: &Trace, label: f64, weight: f64, grads: &mut AamParams) {
        let p = &self.params;
        let n = self.hyper.hidden_units;
        let k = trace.attention.len();

        let g_logit = (sigmoid(trace.logit) - label) * weight;
        grads.head_output.bias[0] += g_logit;
        axpy(g_logit, &trace.head_activated, grads.head_output.weight.data_mut());

        let mut g_head: Vec<f64> = p
            .head_output
            .weight
            .row(0)
            .iter()
            .zip(&trace.head_activated)
            .map(|(w, a)| if *a > 0.0 { g_logit * w } else { 0.0 })
            .collect();
        axpy(1.0, &g_head, &mut grads.head_hidden.bias);
        accumulate_outer_rows(&g_head, &trace.head_input, 1, &mut grads.head_hidden.weight);
        g_head = matvec_transposed(&p.head_hidden.weight, &g_head).expect("head shape");
        let g_pooled = &g_head[..n];

        // h_all = Σ a_i h_i
        let mut g_hidden = vec![0.0; k * n];
        let mut g_attention = Vec::with_capacity(k);
        for (i, h) in trace.hidden.chunks_exact(n).enumerate() {
            axpy(trace.attention[i], g_pooled, &mut g_hidden[i * n..(i + 1) * n]);
            g_attention.push(dot(h, g_pooled));
        }
        let g_scores = softmax_backward(&trace.attention, &g_attention);

        // score_i = u_i · query, u_i = tanh(W h_i + b)
        let mut g_pre = vec![0.0; k * n];
        for (i, u) in trace.projected.chunks_exact(n).enumerate() {
            axpy(g_scores[i], u, &mut grads.query);
            for j in 0..n {
                g_pre[i * n + j] = g_scores[i] * p.query[j] * (1.0 - u[j] * u[j]);
            }
        }
        for row in g_pre.chunks_exact(n) {
            axpy(1.0, row, &mut grads.attention.bias);
        }
        accumulate_outer_rows(&g_pre, &trace.hidden, k, &mut grads.attention.weight);
        axpy(1.0, &backprop_rows(&g_pre, k, &p.attention.weight), &mut g_hidden);

        let mut g_out = g_hidden;
        for l in (0..p.encoder.len()).rev() {
            let layer = &p.encoder[l];
            let act = &trace.activated[l];
            match &trace.masks[l] {
                Some(mask) => {
                    for ((g, a), m) in g_out.iter_mut().zip(act).zip(mask) {
                        *g = if *a > 0.0 { *g * m } else { 0.0 };
                    }
                }
                None => {
                    for (g, a) in g_out.iter_mut().zip(act) {
                        if *a <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
            }
            let rows = layer.weight.rows();
            for row in g_out.chunks_exact(rows) {
                axpy(1.0, row, &mut grads.encoder[l].bias);
            }
            accumulate_outer_rows(&g_out, &trace.layer_inputs[l], k, &mut grads.encoder[l].weight);
            if l > 0 {
                g_out = backprop_rows(&g_out, k, &layer.weight);
            }
        }
    }

    fn example_rng(dropout_seed: Option<u64>, index: usize) -> Option<ChaCha8Rng> {
        dropout_seed.map(|s| seed::derived_rng(s, seed::Stream::Dropout, index as u64))
    }

    pub(crate) fn bce(logit: f64, label: f64) -> f64 {
        softplus(logit) - label * logit
    }

    /// Mean binary cross-entropy over the batch plus the L2 penalty.
    ///
    /// `dropout_seed = None` evaluates in inference mode. With a seed, the
    /// dropout masks of example `i` are a pure function of `(seed, i)`.
    pub fn loss(&self, batch: &[Example<'_>], dropout_seed: Option<u64>) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut total = 0.0;
        for (i, ex) in batch.iter().enumerate() {
            let mut rng = Self::example_rng(dropout_seed, i);
            let trace = self.forward(ex.features, ex.demographics, rng.as_mut())?;
            total += Self::bce(trace.logit, ex.label);
        }
        let loss = total / batch.len() as f64 + self.hyper.l2 * self.params.l2_norm_sq();
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss evaluated to {loss}")));
        }
        Ok(loss)
    }

    /// Loss as in [`Aam::loss`] and its exact gradient for every parameter.
    pub fn loss_and_gradients(
        &self,
        batch: &[Example<'_>],
        dropout_seed: Option<u64>,
    ) -> Result<(f64, AamParams)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let weight = 1.0 / batch.len() as f64;
        let per_example: Vec<Result<(f64, AamParams)>> = batch
            .par_iter()
            .enumerate()
            .map(|(i, ex)| {
                let mut rng = Self::example_rng(dropout_seed, i);
                let trace = self.forward(ex.features, ex.demographics, rng.as_mut())?;
                let mut grads = self.params.zeros_like();
                self.backward(&trace, ex.label, weight, &mut grads);
                Ok((Self::bce(trace.logit, ex.label), grads))
            })
            .collect();

        let mut grads = self.params.zeros_like();
        let mut total = 0.0;
        for item in per_example {
            let (loss, g) = item?;
            total += loss;
            grads.add_assign(&g);
        }
        if self.hyper.l2 > 0.0 {
            let scale = 2.0 * self.hyper.l2;
            for (dst, (src, penalized)) in grads.tensors_mut().into_iter().zip(self.params.tensors()) {
                if penalized {
                    axpy(scale, src, dst);
                }
            }
        }
        let loss = total * weight + self.hyper.l2 * self.params.l2_norm_sq();
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss {loss} over a batch of {} examples",
                batch.len()
            )));
        }
        Ok((loss, grads))
    }

    /// On/off state of every relu unit over the batch. Finite-difference
    /// checks compare patterns to skip perturbations that cross a kink.
    pub fn relu_pattern(&self, batch: &[Example<'_>], dropout_seed: Option<u64>) -> Result<Vec<bool>> {
        let mut pattern = Vec::new();
        for (i, ex) in batch.iter().enumerate() {
            let mut rng = Self::example_rng(dropout_seed, i);
            let trace = self.forward(ex.features, ex.demographics, rng.as_mut())?;
            for layer in &trace.activated {
                pattern.extend(layer.iter().map(|v| *v > 0.0));
            }
            pattern.extend(trace.head_activated.iter().map(|v| *v > 0.0));
        }
        Ok(pattern)
    }
}

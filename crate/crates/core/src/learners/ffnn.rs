use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::WindowModel;
use crate::error::{Error, Result};
use crate::preprocess::{InputLayout, WindowSet};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FfnnParams {
    pub hidden: usize,
    pub decay: f64,
    pub epochs: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for FfnnParams {
    fn default() -> Self {
        Self {
            hidden: 4,
            decay: 0.0,
            epochs: 500,
            step: 0.05,
            seed: 0,
        }
    }
}

/// Single hidden layer, logistic hidden units, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnModel {
    /// `inputs x hidden`, row-major.
    pub weights_in: Vec<f64>,
    pub bias_hidden: Vec<f64>,
    pub weights_out: Vec<f64>,
    pub bias_out: f64,
    pub hidden: usize,
    pub decay: f64,
    pub layout: InputLayout,
    pub initial_loss: f64,
    pub final_loss: f64,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

impl FfnnModel {
    /// All parameters zero; the output is `bias_out` for every input.
    pub fn zeros(layout: InputLayout, hidden: usize) -> Self {
        let n = layout.width();
        Self {
            weights_in: vec![0.0; n * hidden],
            bias_hidden: vec![0.0; hidden],
            weights_out: vec![0.0; hidden],
            bias_out: 0.0,
            hidden,
            decay: 0.0,
            layout,
            initial_loss: f64::NAN,
            final_loss: f64::NAN,
        }
    }

    fn random(layout: InputLayout, hidden: usize, decay: f64, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let mut m = Self::zeros(layout, hidden);
        m.decay = decay;
        for p in m.params_mut() {
            *p = rng.random_range(-0.5..0.5);
        }
        m
    }

    fn inputs(&self) -> usize {
        self.layout.width()
    }

    pub fn param_count(&self) -> usize {
        self.weights_in.len() + 2 * self.hidden + 1
    }

    /// Flattened parameters: input weights, hidden biases, output weights,
    /// output bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = self.weights_in.clone();
        out.extend_from_slice(&self.bias_hidden);
        out.extend_from_slice(&self.weights_out);
        out.push(self.bias_out);
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let (wi, rest) = p.split_at(self.weights_in.len());
        let (bh, rest) = rest.split_at(self.hidden);
        let (wo, bo) = rest.split_at(self.hidden);
        self.weights_in.copy_from_slice(wi);
        self.bias_hidden.copy_from_slice(bh);
        self.weights_out.copy_from_slice(wo);
        self.bias_out = bo[0];
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights_in
            .iter_mut()
            .chain(self.bias_hidden.iter_mut())
            .chain(self.weights_out.iter_mut())
            .chain(core::iter::once(&mut self.bias_out))
    }

    fn hidden_activations(&self, x: &[f64], out: &mut [f64]) {
        let h = self.hidden;
        out.copy_from_slice(&self.bias_hidden);
        for (i, xi) in x.iter().enumerate() {
            let w = &self.weights_in[i * h..(i + 1) * h];
            for (o, wij) in out.iter_mut().zip(w) {
                *o += xi * wij;
            }
        }
        for o in out.iter_mut() {
            *o = sigmoid(*o);
        }
    }

    /// Mean squared error plus `decay` times the squared norm of every
    /// parameter (biases included).
    pub fn loss(&self, ws: &WindowSet) -> f64 {
        self.loss_and_gradient(ws, false).0
    }

    pub fn gradient(&self, ws: &WindowSet) -> Vec<f64> {
        self.loss_and_gradient(ws, true).1
    }

    fn loss_and_gradient(&self, ws: &WindowSet, want_grad: bool) -> (f64, Vec<f64>) {
        let h = self.hidden;
        let n = self.inputs();
        let rows = ws.rows();
        let scale = 1.0 / rows as f64;
        let mut grad = if want_grad {
            vec![0.0; self.param_count()]
        } else {
            Vec::new()
        };
        let mut act = vec![0.0; h];
        let mut sse = 0.0;
        for r in 0..rows {
            let x = ws.row(r);
            self.hidden_activations(x, &mut act);
            let y = self.bias_out + act.iter().zip(&self.weights_out).map(|(a, v)| a * v).sum::<f64>();
            let err = y - ws.targets[r];
            sse += err * err;
            if want_grad {
                let g = 2.0 * err * scale;
                let (gwi, rest) = grad.split_at_mut(n * h);
                let (gbh, rest) = rest.split_at_mut(h);
                let (gwo, gbo) = rest.split_at_mut(h);
                gbo[0] += g;
                for j in 0..h {
                    gwo[j] += g * act[j];
                    let delta = g * self.weights_out[j] * act[j] * (1.0 - act[j]);
                    gbh[j] += delta;
                    for i in 0..n {
                        gwi[i * h + j] += delta * x[i];
                    }
                }
            }
        }
        let params = self.params();
        let penalty: f64 = params.iter().map(|p| p * p).sum();
        if want_grad {
            for (g, p) in grad.iter_mut().zip(&params) {
                *g += 2.0 * self.decay * p;
            }
        }
        (sse * scale + self.decay * penalty, grad)
    }
}

impl WindowModel for FfnnModel {
    fn layout(&self) -> &InputLayout {
        &self.layout
    }

    fn predict(&self, row: &[f64]) -> f64 {
        let mut act = vec![0.0; self.hidden];
        self.hidden_activations(row, &mut act);
        self.bias_out + act.iter().zip(&self.weights_out).map(|(a, v)| a * v).sum::<f64>()
    }
}

/// Full-batch gradient descent with a fixed step from a seeded
/// `uniform(-0.5, 0.5)` initialisation.
pub fn fit_ffnn(ws: &WindowSet, params: &FfnnParams) -> Result<FfnnModel> {
    if ws.rows() == 0 {
        return Err(Error::param("network training needs at least one row"));
    }
    if params.hidden == 0 {
        return Err(Error::param("hidden layer needs at least one node"));
    }
    if !(params.decay >= 0.0) || !(params.step > 0.0) {
        return Err(Error::param("decay must be nonnegative and step positive"));
    }
    let mut model = FfnnModel::random(ws.layout, params.hidden, params.decay, params.seed);
    let mut theta = model.params();
    let mut initial = f64::NAN;
    for epoch in 0..params.epochs {
        let (loss, grad) = model.loss_and_gradient(ws, true);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        if epoch == 0 {
            initial = loss;
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= params.step * g;
        }
        model.set_params(&theta);
    }
    let final_loss = model.loss(ws);
    if !final_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: params.epochs,
        });
    }
    model.initial_loss = if initial.is_nan() { final_loss } else { initial };
    model.final_loss = final_loss;
    Ok(model)
}

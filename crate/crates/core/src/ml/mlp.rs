use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_two_classes, check_xy, Classifier, MlError};
use crate::rng::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Sigmoid output with binary cross-entropy.
    BinaryCrossEntropy,
    /// Linear output with mean squared error.
    MeanSquaredError,
}

/// One hidden ReLU layer and a single output unit. Parameters are stored
/// flattened as `[W1 (hidden x input, row-major), b1, W2, b2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

impl Mlp {
    /// Uniform `+-sqrt(6 / (fan_in + fan_out))` weights and zero biases.
    pub fn new(input: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, 0);
        let mut params = Vec::with_capacity(Self::param_count(input, hidden));
        let a1 = (6.0 / (input + hidden) as f64).sqrt();
        params.extend((0..hidden * input).map(|_| rng.gen_range(-a1..a1)));
        params.extend(std::iter::repeat_n(0.0, hidden));
        let a2 = (6.0 / (hidden + 1) as f64).sqrt();
        params.extend((0..hidden).map(|_| rng.gen_range(-a2..a2)));
        params.push(0.0);
        Self {
            input,
            hidden,
            params,
        }
    }

    pub fn param_count(input: usize, hidden: usize) -> usize {
        hidden * input + hidden + hidden + 1
    }

    /// Raw output: a logit for classification, the prediction for
    /// regression.
    pub fn forward(&self, x: &[f64]) -> f64 {
        let (inp, hid) = (self.input, self.hidden);
        let (w1, rest) = self.params.split_at(hid * inp);
        let (b1, rest) = rest.split_at(hid);
        let (w2, b2) = rest.split_at(hid);
        let mut z = b2[0];
        for j in 0..hid {
            let row = &w1[j * inp..(j + 1) * inp];
            let a = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            if a > 0.0 {
                z += w2[j] * a;
            }
        }
        z
    }

    pub fn loss(&self, x: &[Vec<f64>], y: &[f64], kind: LossKind) -> f64 {
        let n = x.len() as f64;
        x.iter()
            .zip(y)
            .map(|(xi, &yi)| sample_loss(self.forward(xi), yi, kind))
            .sum::<f64>()
            / n
    }

    /// Mean loss over the batch and its gradient in parameter order.
    pub fn loss_and_grad(&self, x: &[Vec<f64>], y: &[f64], kind: LossKind) -> (f64, Vec<f64>) {
        let n = x.len() as f64;
        let (inp, hid) = (self.input, self.hidden);
        let (w1, rest) = self.params.split_at(hid * inp);
        let (b1, rest) = rest.split_at(hid);
        let (w2, b2) = rest.split_at(hid);
        let mut grad = vec![0.0; self.params.len()];
        let (gw1, grest) = grad.split_at_mut(hid * inp);
        let (gb1, grest) = grest.split_at_mut(hid);
        let (gw2, gb2) = grest.split_at_mut(hid);
        let mut pre = vec![0.0; hid];
        let mut loss = 0.0;
        for (xi, &yi) in x.iter().zip(y) {
            let mut z = b2[0];
            for j in 0..hid {
                let row = &w1[j * inp..(j + 1) * inp];
                let a = b1[j] + row.iter().zip(xi).map(|(w, v)| w * v).sum::<f64>();
                pre[j] = a;
                if a > 0.0 {
                    z += w2[j] * a;
                }
            }
            loss += sample_loss(z, yi, kind);
            let dz = match kind {
                LossKind::BinaryCrossEntropy => sigmoid(z) - yi,
                LossKind::MeanSquaredError => 2.0 * (z - yi),
            } / n;
            gb2[0] += dz;
            for j in 0..hid {
                let a = pre[j];
                if a <= 0.0 {
                    continue;
                }
                gw2[j] += dz * a;
                let dh = dz * w2[j];
                gb1[j] += dh;
                for (g, v) in gw1[j * inp..(j + 1) * inp].iter_mut().zip(xi) {
                    *g += dh * v;
                }
            }
        }
        (loss / n, grad)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn sample_loss(z: f64, y: f64, kind: LossKind) -> f64 {
    match kind {
        // log(1 + e^z) - y z, written to avoid overflow
        LossKind::BinaryCrossEntropy => z.max(0.0) - z * y + (-z.abs()).exp().ln_1p(),
        LossKind::MeanSquaredError => (z - y) * (z - y),
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
}

impl MlpParams {
    pub fn classifier() -> Self {
        Self {
            hidden: 16,
            lr: 0.001,
            epochs: 1000,
        }
    }

    pub fn regressor() -> Self {
        Self {
            hidden: 16,
            lr: 0.01,
            epochs: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    pub mlp: Mlp,
}

impl Classifier for MlpClassifier {
    fn predict(&self, x: &[f64]) -> bool {
        self.mlp.forward(x) > 0.0
    }
}

/// Full-batch Adam on binary cross-entropy.
pub fn fit_mlp_classifier(
    x: &[Vec<f64>],
    y: &[bool],
    params: MlpParams,
    seed: u64,
) -> Result<MlpClassifier, MlError> {
    let d = check_xy(x, y)?;
    check_two_classes(y)?;
    let targets: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
    let mut mlp = Mlp::new(d, params.hidden, seed);
    let mut adam = Adam::new(mlp.params.len(), params.lr);
    for _ in 0..params.epochs {
        let (_, grad) = mlp.loss_and_grad(x, &targets, LossKind::BinaryCrossEntropy);
        adam.step(&mut mlp.params, &grad);
    }
    Ok(MlpClassifier { mlp })
}

/// Training loss recorded before the update of `epoch`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub epoch: usize,
    pub loss: f64,
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Epoch {}, Loss: {}", self.epoch, self.loss)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressorFit {
    pub mlp: Mlp,
    /// Losses at epochs 0, 100, 200, ...
    pub trace: Vec<TraceLine>,
}

/// Full-batch Adam on mean squared error, logging every 100th epoch.
pub fn fit_mlp_regressor(
    x: &[Vec<f64>],
    y: &[f64],
    params: MlpParams,
    seed: u64,
) -> Result<RegressorFit, MlError> {
    let d = check_xy(x, y)?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(MlError::NonFiniteTarget(i));
    }
    let mut mlp = Mlp::new(d, params.hidden, seed);
    let mut adam = Adam::new(mlp.params.len(), params.lr);
    let mut trace = Vec::new();
    for epoch in 0..params.epochs {
        let (loss, grad) = mlp.loss_and_grad(x, y, LossKind::MeanSquaredError);
        if epoch % 100 == 0 {
            let line = TraceLine { epoch, loss };
            log::info!("{line}");
            trace.push(line);
        }
        adam.step(&mut mlp.params, &grad);
    }
    Ok(RegressorFit { mlp, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::accuracy;

    #[test]
    fn adam_three_steps_on_square() {
        // f(theta) = theta^2 from theta = 1, lr 0.1; reference values from
        // evaluating the bias-corrected recurrence independently
        let mut theta = [1.0];
        let mut adam = Adam::new(1, 0.1);
        let expected = [0.9000000005, 0.8004122286917928, 0.7015862729460303];
        for want in expected {
            let g = [2.0 * theta[0]];
            adam.step(&mut theta, &g);
            assert!((theta[0] - want).abs() < 1e-12, "{} vs {want}", theta[0]);
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
    }

    fn check_gradients(kind: LossKind, seed: u64) {
        let mut rng = rng_for(seed, 1);
        let x: Vec<Vec<f64>> = (0..12)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let y: Vec<f64> = match kind {
            LossKind::BinaryCrossEntropy => (0..12).map(|i| f64::from(i % 2)).collect(),
            LossKind::MeanSquaredError => (0..12).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        };
        let mut mlp = Mlp::new(3, 16, seed);
        for p in mlp.params.iter_mut() {
            *p += rng.gen_range(-0.5..0.5);
        }
        let (_, grad) = mlp.loss_and_grad(&x, &y, kind);
        let h = 1e-6;
        for _ in 0..10 {
            let i = rng.gen_range(0..mlp.params.len());
            let mut plus = mlp.clone();
            plus.params[i] += h;
            let mut minus = mlp.clone();
            minus.params[i] -= h;
            let numeric = (plus.loss(&x, &y, kind) - minus.loss(&x, &y, kind)) / (2.0 * h);
            let err = rel_err(grad[i], numeric);
            assert!(err < 1e-4, "param {i}: analytic {} numeric {numeric} err {err}", grad[i]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20 {
            check_gradients(LossKind::BinaryCrossEntropy, seed);
            check_gradients(LossKind::MeanSquaredError, seed);
        }
    }

    #[test]
    fn init_bounds_and_zero_biases() {
        let mlp = Mlp::new(2, 16, 3);
        assert_eq!(mlp.params.len(), Mlp::param_count(2, 16));
        let a1 = (6.0f64 / 18.0).sqrt();
        assert!(mlp.params[..32].iter().all(|w| w.abs() <= a1));
        assert!(mlp.params[32..48].iter().all(|&b| b == 0.0));
        assert_eq!(*mlp.params.last().unwrap(), 0.0);
        assert_eq!(mlp, Mlp::new(2, 16, 3));
    }

    #[test]
    fn learns_xor() {
        let mut rng = rng_for(8, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..50 {
            for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                x.push(vec![
                    a * 2.0 - 1.0 + rng.gen_range(-0.05..0.05),
                    b * 2.0 - 1.0 + rng.gen_range(-0.05..0.05),
                ]);
                y.push((a != b) as u8 == 1);
            }
        }
        for seed in 0..5 {
            let clf = fit_mlp_classifier(&x, &y, MlpParams::classifier(), seed).unwrap();
            let acc = accuracy(&clf.predict_all(&x), &y);
            assert!(acc >= 0.99, "seed {seed}: {acc}");
        }
    }

    #[test]
    fn identical_inputs_predict_majority() {
        let x = vec![vec![0.0, 0.0]; 20];
        let y: Vec<bool> = (0..20).map(|i| i < 6).collect();
        let clf = fit_mlp_classifier(&x, &y, MlpParams::classifier(), 1).unwrap();
        assert_eq!(accuracy(&clf.predict_all(&x), &y), 0.7);
    }

    #[test]
    fn regressor_fits_linear_function() {
        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![-1.0 + 2.0 * i as f64 / 99.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0]).collect();
        let fit = fit_mlp_regressor(&x, &y, MlpParams::regressor(), 2).unwrap();
        let mse = fit.mlp.loss(&x, &y, LossKind::MeanSquaredError);
        assert!(mse < 1e-3, "mse {mse}");
        assert_eq!(fit.trace.len(), 10);
        assert_eq!(fit.trace[9].epoch, 900);
        assert!(fit.trace[0].to_string().starts_with("Epoch 0, Loss: "));
    }

    #[test]
    fn regressor_learns_constant() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 30.0, 1.0]).collect();
        let y = vec![3.5; 30];
        let fit = fit_mlp_regressor(&x, &y, MlpParams::regressor(), 4).unwrap();
        assert!(fit.mlp.loss(&x, &y, LossKind::MeanSquaredError) < 1e-4);
        assert!((fit.mlp.forward(&x[7]) - 3.5).abs() < 1e-2);
    }

    #[test]
    fn trace_format() {
        let line = TraceLine { epoch: 900, loss: 0.25 };
        assert_eq!(line.to_string(), "Epoch 900, Loss: 0.25");
    }

    #[test]
    fn non_finite_target_rejected() {
        assert_eq!(
            fit_mlp_regressor(&[vec![1.0], vec![2.0]], &[1.0, f64::NAN], MlpParams::regressor(), 0),
            Err(MlError::NonFiniteTarget(1))
        );
    }
}

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_dim, check_training_data, evaluate, Classifier, ClassifyError, TrainConfig};

/// `p = softmax(W2 · relu(W1 · x + b1) + b2)`.
///
/// Matrices are row-major: `w1` is `hidden × input`, `w2` is `2 × hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub input: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Gradient of the mean cross-entropy, shaped like [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpGrad {
    fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; 2 * hidden],
            b2: vec![0.0; 2],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
}

impl MlpModel {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; 2 * hidden],
            b2: vec![0.0; 2],
        }
    }

    /// Uniform Glorot weights, zero biases.
    pub fn init(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let w1 = glorot(rng, input, hidden, hidden * input);
        let w2 = glorot(rng, hidden, 2, 2 * hidden);
        Self {
            input,
            hidden,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; 2],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn hidden_pre(&self, x: &[f64], out: &mut [f64]) {
        for ((z, row), b) in out.iter_mut().zip(self.w1.chunks_exact(self.input)).zip(&self.b1) {
            *z = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
        }
    }

    fn logits_from_hidden(&self, pre: &[f64]) -> [f64; 2] {
        let (r0, r1) = self.w2.split_at(self.hidden);
        let mut l = [self.b2[0], self.b2[1]];
        for ((&z, a), b) in pre.iter().zip(r0).zip(r1) {
            let h = z.max(0.0);
            l[0] += a * h;
            l[1] += b * h;
        }
        l
    }

    /// Output logits (before softmax).
    pub fn logits(&self, x: &[f64]) -> Result<[f64; 2], ClassifyError> {
        check_dim(self.input, x)?;
        let mut pre = vec![0.0; self.hidden];
        self.hidden_pre(x, &mut pre);
        Ok(self.logits_from_hidden(&pre))
    }

    /// Mean cross-entropy over all examples and its gradient.
    pub fn loss_and_grad<X: AsRef<[f64]>>(&self, xs: &[X], ys: &[u8]) -> (f64, MlpGrad) {
        let idx: Vec<usize> = (0..xs.len()).collect();
        self.batch_loss_and_grad(xs, ys, &idx)
    }

    fn batch_loss_and_grad<X: AsRef<[f64]>>(&self, xs: &[X], ys: &[u8], batch: &[usize]) -> (f64, MlpGrad) {
        let (input, hidden) = (self.input, self.hidden);
        let mut grad = MlpGrad::zeros(input, hidden);
        let mut pre = vec![0.0; hidden];
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        let (r0, r1) = self.w2.split_at(hidden);

        for &i in batch {
            let x = xs[i].as_ref();
            let y = usize::from(ys[i]);
            self.hidden_pre(x, &mut pre);
            let logits = self.logits_from_hidden(&pre);
            let m = logits[0].max(logits[1]);
            let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
            loss += lse - logits[y];

            let p = softmax2(logits);
            let d0 = (p[0] - f64::from(u8::from(y == 0))) * scale;
            let d1 = (p[1] - f64::from(u8::from(y == 1))) * scale;
            grad.b2[0] += d0;
            grad.b2[1] += d1;

            let (g0, g1) = grad.w2.split_at_mut(hidden);
            for j in 0..hidden {
                let z = pre[j];
                if z <= 0.0 {
                    continue;
                }
                g0[j] += d0 * z;
                g1[j] += d1 * z;
                let dz = d0 * r0[j] + d1 * r1[j];
                grad.b1[j] += dz;
                let row = &mut grad.w1[j * input..(j + 1) * input];
                for (g, v) in row.iter_mut().zip(x) {
                    *g += dz * v;
                }
            }
        }
        (loss * scale, grad)
    }
}

impl Classifier for MlpModel {
    fn input_dim(&self) -> usize {
        self.input
    }

    fn prob_positive(&self, x: &[f64]) -> Result<f64, ClassifyError> {
        Ok(mlp_forward(self, x)?[1])
    }

    fn predict(&self, x: &[f64]) -> Result<u8, ClassifyError> {
        let p = mlp_forward(self, x)?;
        Ok(u8::from(p[1] > p[0]))
    }
}

/// Class probabilities `(p0, p1)`.
pub fn mlp_forward(model: &MlpModel, x: &[f64]) -> Result<[f64; 2], ClassifyError> {
    check_dim(model.input, x)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ClassifyError::NonFiniteInput);
    }
    Ok(softmax2(model.logits(x)?))
}

/// Mini-batch gradient descent with momentum.
///
/// One ChaCha8 stream seeded from `cfg.seed` drives, in order, weight
/// initialisation, the hold-out split and per-epoch shuffling. When
/// `validation_fraction` is positive that share of the data is held out, the
/// model with the best hold-out accuracy is kept and training stops after
/// `patience` epochs without improvement.
pub fn mlp_train<X: AsRef<[f64]>>(xs: &[X], ys: &[u8], cfg: &TrainConfig) -> Result<MlpModel, ClassifyError> {
    cfg.validate()?;
    let input = check_training_data(xs, ys)?;
    let hidden = cfg.hidden.unwrap_or(input);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::init(input, hidden, &mut rng);

    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (xs.len() as f64 * cfg.validation_fraction).floor() as usize;
    let (mut train, val) = if n_val > 0 && split_keeps_both_classes(&order[n_val..], ys) {
        (order[n_val..].to_vec(), order[..n_val].to_vec())
    } else {
        (order, Vec::new())
    };
    let val_x: Vec<&[f64]> = val.iter().map(|&i| xs[i].as_ref()).collect();
    let val_y: Vec<u8> = val.iter().map(|&i| ys[i]).collect();

    let mut velocity = MlpGrad::zeros(input, hidden);
    let mut best: Option<(f64, MlpModel)> = None;
    let mut stale = 0;

    for epoch in 0..cfg.max_epochs {
        train.shuffle(&mut rng);
        for batch in train.chunks(cfg.batch_size) {
            let (loss, grad) = model.batch_loss_and_grad(xs, ys, batch);
            if !loss.is_finite() {
                return Err(ClassifyError::NonFiniteLoss { epoch });
            }
            let params = model.tensors_mut();
            let vel = [&mut velocity.w1, &mut velocity.b1, &mut velocity.w2, &mut velocity.b2];
            for ((p, v), g) in params.into_iter().zip(vel).zip(grad.tensors()) {
                for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *v = cfg.momentum * *v - cfg.learning_rate * g;
                    *p += *v;
                }
            }
        }
        if model.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(ClassifyError::NonFiniteLoss { epoch });
        }

        if val.is_empty() {
            continue;
        }
        let acc = evaluate(&model, &val_x, &val_y)?;
        log::debug!("epoch {epoch}: hold-out accuracy {acc:.4}");
        match &best {
            Some((b, _)) if acc <= *b => {
                stale += 1;
                if stale >= cfg.patience.max(1) {
                    break;
                }
            }
            _ => {
                best = Some((acc, model.clone()));
                stale = 0;
            }
        }
    }
    Ok(best.map(|(_, m)| m).unwrap_or(model))
}

fn split_keeps_both_classes(train: &[usize], ys: &[u8]) -> bool {
    let pos = train.iter().filter(|&&i| ys[i] == 1).count();
    pos > 0 && pos < train.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_model(input: usize, hidden: usize, seed: u64) -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = MlpModel::init(input, hidden, &mut rng);
        for b in m.b1.iter_mut().chain(m.b2.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
        m
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = MlpModel::zeros(3, 3);
        assert_eq!(mlp_forward(&m, &[1.0, -7.0, 2.5]).unwrap(), [0.5, 0.5]);
        assert_eq!(m.predict(&[1.0, 2.0, 3.0]).unwrap(), 0);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let m = random_model(5, 7, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-50.0..50.0)).collect();
            let p = mlp_forward(&m, &x).unwrap();
            assert!(p[0] >= 0.0 && p[1] >= 0.0);
            assert!((p[0] + p[1] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn shift_invariance() {
        let m = random_model(4, 4, 3);
        let x = [0.3, -1.0, 2.0, 0.0];
        let p = mlp_forward(&m, &x).unwrap();
        for c in [-1e3, -2.5, 0.75, 40.0] {
            let mut shifted = m.clone();
            shifted.b2[0] += c;
            shifted.b2[1] += c;
            let q = mlp_forward(&shifted, &x).unwrap();
            assert!((p[0] - q[0]).abs() <= 1e-12 && (p[1] - q[1]).abs() <= 1e-12);
            assert_eq!(m.predict(&x).unwrap(), shifted.predict(&x).unwrap());
        }
    }

    #[test]
    fn huge_logits_do_not_overflow() {
        let mut m = MlpModel::zeros(1, 1);
        m.b2 = vec![1000.0, -1000.0];
        let p = mlp_forward(&m, &[0.0]).unwrap();
        assert_eq!(p, [1.0, 0.0]);
    }

    #[test]
    fn input_errors() {
        let m = MlpModel::zeros(2, 2);
        assert!(matches!(
            mlp_forward(&m, &[1.0]),
            Err(ClassifyError::DimensionMismatch { expected: 2, found: 1 })
        ));
        assert!(matches!(
            mlp_forward(&m, &[1.0, f64::INFINITY]),
            Err(ClassifyError::NonFiniteInput)
        ));
    }

    #[test]
    fn init_respects_glorot_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = MlpModel::init(10, 6, &mut rng);
        let l1 = (6.0f64 / 16.0).sqrt();
        let l2 = (6.0f64 / 8.0).sqrt();
        assert!(m.w1.iter().all(|w| w.abs() <= l1));
        assert!(m.w2.iter().all(|w| w.abs() <= l2));
        assert_eq!(m.w1.len(), 60);
        assert_eq!(m.w2.len(), 12);
    }

    #[test]
    fn diverging_learning_rate_is_reported() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64) * 1e150, 1e150]).collect();
        let ys: Vec<u8> = (0..40).map(|i| u8::from(i % 2 == 0)).collect();
        let cfg = TrainConfig {
            learning_rate: 1e10,
            validation_fraction: 0.0,
            max_epochs: 20,
            ..TrainConfig::mlp()
        };
        assert!(matches!(
            mlp_train(&xs, &ys, &cfg),
            Err(ClassifyError::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn hidden_override() {
        let xs = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 2.0]];
        let cfg = TrainConfig {
            hidden: Some(4),
            validation_fraction: 0.0,
            max_epochs: 2,
            ..TrainConfig::mlp()
        };
        let m = mlp_train(&xs, &[0, 1], &cfg).unwrap();
        assert_eq!((m.input, m.hidden, m.w1.len(), m.w2.len()), (3, 4, 12, 8));
    }
}

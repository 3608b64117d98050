use super::{check_dim, check_training_data, Classifier, ClassifyError, TrainConfig};

/// Logistic regression `σ(w·x + b)` trained with penalty `(λ/2)‖w‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
}

impl LogRegModel {
    pub fn zeros(dim: usize, lambda: f64) -> Self {
        Self {
            w: vec![0.0; dim],
            b: 0.0,
            lambda,
        }
    }

    fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }
}

impl Classifier for LogRegModel {
    fn input_dim(&self) -> usize {
        self.w.len()
    }

    fn prob_positive(&self, x: &[f64]) -> Result<f64, ClassifyError> {
        lr_predict(self, x)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn lr_predict(model: &LogRegModel, x: &[f64]) -> Result<f64, ClassifyError> {
    check_dim(model.w.len(), x)?;
    Ok(sigmoid(model.margin(x)))
}

/// Mean binary cross-entropy plus `(λ/2)‖w‖²`.
pub fn lr_loss<X: AsRef<[f64]>>(model: &LogRegModel, xs: &[X], ys: &[u8]) -> f64 {
    let data: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let z = model.margin(x.as_ref());
            softplus(z) - f64::from(y) * z
        })
        .sum::<f64>()
        / xs.len() as f64;
    data + 0.5 * model.lambda * dot(&model.w, &model.w)
}

fn gradient<X: AsRef<[f64]>>(model: &LogRegModel, xs: &[X], ys: &[u8]) -> (Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut gw = vec![0.0; model.w.len()];
    let mut gb = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let x = x.as_ref();
        let r = sigmoid(model.margin(x)) - f64::from(y);
        gb += r;
        for (g, v) in gw.iter_mut().zip(x) {
            *g += r * v;
        }
    }
    for (g, w) in gw.iter_mut().zip(&model.w) {
        *g = *g / n + model.lambda * w;
    }
    (gw, gb / n)
}

/// Trains from the zero model; see [`lr_train_traced`].
pub fn lr_train<X: AsRef<[f64]>>(xs: &[X], ys: &[u8], cfg: &TrainConfig) -> Result<LogRegModel, ClassifyError> {
    lr_train_traced(xs, ys, cfg).map(|(m, _)| m)
}

/// Full-batch gradient descent with Armijo backtracking (step halving),
/// preconditioned by a diagonal bound on the Hessian so that features on very
/// different scales (such as a 9999 marker coordinate) converge together.
/// Also returns the objective after every accepted step, starting with the
/// zero model.
pub fn lr_train_traced<X: AsRef<[f64]>>(
    xs: &[X],
    ys: &[u8],
    cfg: &TrainConfig,
) -> Result<(LogRegModel, Vec<f64>), ClassifyError> {
    cfg.validate()?;
    let dim = check_training_data(xs, ys)?;
    let n = xs.len() as f64;

    // σ' ≤ 1/4, so these bound the Hessian diagonal.
    let mut precond_w = vec![0.0; dim];
    for x in xs {
        for (p, v) in precond_w.iter_mut().zip(x.as_ref()) {
            *p += v * v;
        }
    }
    for p in &mut precond_w {
        *p = *p / (4.0 * n) + cfg.l2;
        if *p == 0.0 {
            *p = 1.0;
        }
    }
    let precond_b = 0.25;

    let mut model = LogRegModel::zeros(dim, cfg.l2);
    let mut loss = lr_loss(&model, xs, ys);
    let mut trace = vec![loss];

    for epoch in 0..cfg.max_epochs {
        let (gw, gb) = gradient(&model, xs, ys);
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax < cfg.tolerance {
            break;
        }
        let dir_w: Vec<f64> = gw.iter().zip(&precond_w).map(|(g, p)| -g / p).collect();
        let dir_b = -gb / precond_b;
        let slope = dot(&gw, &dir_w) + gb * dir_b;

        let mut step = cfg.learning_rate;
        let accepted = loop {
            let trial = LogRegModel {
                w: model.w.iter().zip(&dir_w).map(|(w, d)| w + step * d).collect(),
                b: model.b + step * dir_b,
                lambda: cfg.l2,
            };
            let trial_loss = lr_loss(&trial, xs, ys);
            if !trial_loss.is_finite() {
                return Err(ClassifyError::NonFiniteLoss { epoch });
            }
            if trial_loss <= loss + 1e-4 * step * slope {
                break Some((trial, trial_loss));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        match accepted {
            Some((m, l)) => {
                model = m;
                loss = l;
                trace.push(l);
            }
            // no representable descent step left
            None => break,
        }
    }
    Ok((model, trace))
}

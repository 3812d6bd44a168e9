use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ml::SparseVector;
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    /// L2 penalty on the non-bias weights.
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// `None` picks `1 / L` with `L = max |x|^2 / 4 + l2` (bias included).
    #[serde(default)]
    pub learning_rate: Option<f64>,
    /// Step size at epoch `t` is `lr / (1 + decay * t)`.
    #[serde(default)]
    pub decay: f64,
}

fn default_l2() -> f64 {
    1.0
}

fn default_epochs() -> usize {
    100
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            l2: 1.0,
            epochs: 100,
            learning_rate: None,
            decay: 0.0,
        }
    }
}

impl LinearConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_owned()));
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad("l2 must be a finite non-negative number");
        }
        if let Some(lr) = self.learning_rate {
            if !(lr.is_finite() && lr > 0.0) {
                return bad("learning_rate must be positive");
            }
        }
        if !(self.decay.is_finite() && self.decay >= 0.0) {
            return bad("decay must be a finite non-negative number");
        }
        Ok(())
    }
}

/// Binary logistic regression. `weights` has one entry per feature followed
/// by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<F> {
    pub weights: Vec<F>,
    pub config: LinearConfig,
    /// Training loss after each epoch.
    pub loss_trace: Vec<F>,
}

impl<F: Scalar> LinearModel<F> {
    pub fn dim(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn bias(&self) -> F {
        self.weights[self.dim()]
    }

    pub fn decision(&self, x: &SparseVector<F>) -> Result<F> {
        if x.dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim,
            });
        }
        Ok(margin(&self.weights, x))
    }
}

fn margin<F: Scalar>(w: &[F], x: &SparseVector<F>) -> F {
    x.entries.iter().map(|&(i, v)| w[i] * v).sum::<F>() + w[w.len() - 1]
}

fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus<F: Scalar>(z: F) -> F {
    z.max(F::zero()) + (-z.abs()).exp().ln_1p()
}

/// Regularized mean log-loss and its gradient at `w`.
pub fn loss_and_gradient<F: Scalar>(
    w: &[F],
    xs: &[SparseVector<F>],
    ys: &[bool],
    l2: F,
) -> (F, Vec<F>) {
    let n = F::of_count(xs.len());
    let dim = w.len() - 1;
    let mut grad = vec![F::zero(); w.len()];
    let mut loss = F::zero();
    for (x, &y) in xs.iter().zip(ys) {
        let z = margin(w, x);
        let t = if y { F::one() } else { F::zero() };
        loss = loss + softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for &(i, v) in &x.entries {
            grad[i] = grad[i] + r * v;
        }
        grad[dim] = grad[dim] + r;
    }
    loss = loss / n;
    for g in grad.iter_mut() {
        *g = *g / n;
    }
    let mut penalty = F::zero();
    for i in 0..dim {
        penalty = penalty + w[i] * w[i];
        grad[i] = grad[i] + l2 * w[i];
    }
    (loss + l2 * F::of(0.5) * penalty, grad)
}

/// Full-batch gradient descent from zero weights.
pub fn train_classifier<F: Scalar>(
    xs: &[SparseVector<F>],
    ys: &[bool],
    config: &LinearConfig,
) -> Result<LinearModel<F>> {
    config.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    let Some(first) = xs.first() else {
        return Err(Error::EmptySelection);
    };
    let dim = first.dim;
    if let Some(x) = xs.iter().find(|x| x.dim != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: x.dim,
        });
    }
    if ys.iter().all(|&y| y) || ys.iter().all(|&y| !y) {
        return Err(Error::DegenerateLabels);
    }
    let l2 = F::of(config.l2);
    let lr = match config.learning_rate {
        Some(lr) => F::of(lr),
        None => {
            let max_sq = xs
                .iter()
                .map(|x| x.squared_norm() + F::one())
                .fold(F::zero(), F::max);
            F::one() / (F::of(0.25) * max_sq + l2)
        }
    };
    let mut w = vec![F::zero(); dim + 1];
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (_, grad) = loss_and_gradient(&w, xs, ys, l2);
        let step = lr / (F::one() + F::of(config.decay) * F::of_count(epoch));
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi = *wi - step * *gi;
        }
        trace.push(loss_and_gradient(&w, xs, ys, l2).0);
    }
    Ok(LinearModel {
        weights: w,
        config: config.clone(),
        loss_trace: trace,
    })
}

/// Predicted label (`score >= 0.5`) and positive-class probability.
pub fn predict<F: Scalar>(model: &LinearModel<F>, x: &SparseVector<F>) -> Result<(bool, F)> {
    let p = sigmoid(model.decision(x)?);
    Ok((p >= F::of(0.5), p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(v: &[f64]) -> SparseVector<f64> {
        SparseVector::from_dense(v)
    }

    #[test]
    fn zero_weights_give_ln2() {
        let xs = [sv(&[1.0, 0.0]), sv(&[0.0, 1.0])];
        let (loss, _) = loss_and_gradient(&[0.0; 3], &xs, &[true, false], 1.0);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let xs = [sv(&[1.0, 2.0]), sv(&[0.0, -1.0]), sv(&[3.0, 0.5])];
        let ys = [true, false, true];
        let w = [0.3, -0.2, 0.1];
        let (_, g) = loss_and_gradient(&w, &xs, &ys, 0.5);
        let h = 1e-6;
        for i in 0..3 {
            let mut a = w;
            let mut b = w;
            a[i] += h;
            b[i] -= h;
            let fd = (loss_and_gradient(&a, &xs, &ys, 0.5).0
                - loss_and_gradient(&b, &xs, &ys, 0.5).0)
                / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "coordinate {i}");
        }
    }

    #[test]
    fn separable_data() {
        let xs = [
            sv(&[1.0, 0.0]),
            sv(&[2.0, 0.0]),
            sv(&[0.0, 1.0]),
            sv(&[0.0, 2.0]),
        ];
        let ys = [true, true, false, false];
        let m = train_classifier(&xs, &ys, &LinearConfig::default()).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert_eq!(predict(&m, x).unwrap().0, y);
        }
        assert!(m.loss_trace.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    }

    #[test]
    fn failure_modes() {
        let xs = [sv(&[1.0]), sv(&[2.0])];
        assert!(matches!(
            train_classifier(&xs, &[true, true], &LinearConfig::default()),
            Err(Error::DegenerateLabels)
        ));
        let m = train_classifier(&xs, &[true, false], &LinearConfig::default()).unwrap();
        assert!(matches!(
            predict(&m, &sv(&[1.0, 2.0])),
            Err(Error::DimensionMismatch {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn stable_at_extreme_margins() {
        assert_eq!(softplus(1000.0f64), 1000.0);
        assert!(softplus(-1000.0f64) >= 0.0);
        assert_eq!(sigmoid(-1000.0f64), 0.0);
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{sigmoid, softplus};

pub const MAX_ITERATIONS: usize = 10_000;
const TOLERANCE: f64 = 1e-8;
/// Inputs lie in [0, 1], so the loss curvature is at most 1 and this step is
/// stable.
const STEP: f64 = 1.0;

/// Logistic regression over `(mean score, age / 100, sex)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticHead {
    pub weights: [f64; 3],
    pub intercept: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticFit {
    pub head: LogisticHead,
    pub iterations: usize,
    pub loss: f64,
}

impl LogisticHead {
    pub fn logit(&self, x: [f64; 3]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, x: [f64; 3]) -> f64 {
        sigmoid(self.logit(x))
    }

    pub fn loss(&self, inputs: &[[f64; 3]], labels: &[bool]) -> f64 {
        inputs
            .iter()
            .zip(labels)
            .map(|(x, y)| {
                let z = self.logit(*x);
                softplus(z) - if *y { z } else { 0.0 }
            })
            .sum::<f64>()
            / inputs.len() as f64
    }

    /// Full-batch gradient descent on mean cross-entropy until the loss
    /// changes by less than 1e-8 or [`MAX_ITERATIONS`] steps.
    pub fn fit(inputs: &[[f64; 3]], labels: &[bool]) -> Result<LogisticFit> {
        if inputs.len() != labels.len() {
            return Err(Error::Shape(format!("{} inputs for {} labels", inputs.len(), labels.len())));
        }
        let positives = labels.iter().filter(|l| **l).count();
        if positives == 0 || positives == labels.len() {
            return Err(Error::invalid("logistic head needs both classes in training data"));
        }
        let n = inputs.len() as f64;
        let mut head = LogisticHead {
            weights: [0.0; 3],
            intercept: 0.0,
        };
        let mut loss = head.loss(inputs, labels);
        let mut iterations = 0;
        while iterations < MAX_ITERATIONS {
            let mut g = [0.0; 4];
            for (x, y) in inputs.iter().zip(labels) {
                let r = head.predict(*x) - if *y { 1.0 } else { 0.0 };
                g[0] += r;
                for j in 0..3 {
                    g[j + 1] += r * x[j];
                }
            }
            head.intercept -= STEP * g[0] / n;
            for j in 0..3 {
                head.weights[j] -= STEP * g[j + 1] / n;
            }
            iterations += 1;
            let next = head.loss(inputs, labels);
            let delta = (loss - next).abs();
            loss = next;
            if delta < TOLERANCE {
                break;
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("logistic head loss {loss}")));
        }
        Ok(LogisticFit { head, iterations, loss })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    #[test]
    fn null_signal() {
        let mut rng = seed::rng(8);
        let n = 4000;
        let inputs: Vec<[f64; 3]> = (0..n)
            .map(|_| [rng.random(), rng.random(), if rng.random_bool(0.5) { 1.0 } else { 0.0 }])
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        let fit = LogisticHead::fit(&inputs, &labels).unwrap();
        let prevalence = labels.iter().filter(|l| **l).count() as f64 / n as f64;
        for w in fit.head.weights {
            assert!(w.abs() < 0.35, "{:?}", fit.head);
        }
        // at the mean input the model reproduces the base rate
        let mean_x = [0.5, 0.5, 0.5];
        assert!((fit.head.predict(mean_x) - prevalence).abs() < 0.03);
    }

    #[test]
    fn separable_toy() {
        let inputs: Vec<[f64; 3]> = (0..20)
            .map(|i| [if i < 10 { 0.05 * i as f64 / 10.0 } else { 0.95 + 0.05 * (i - 10) as f64 / 10.0 }, 0.4, 1.0])
            .collect();
        let labels: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let fit = LogisticHead::fit(&inputs, &labels).unwrap();
        assert!(fit.loss < 0.01, "{fit:?}");
    }

    #[test]
    fn single_class_rejected() {
        assert!(LogisticHead::fit(&[[0.0; 3], [1.0; 3]], &[true, true]).is_err());
    }

    #[test]
    fn matches_grid_search() {
        let mut rng = seed::rng(20);
        let inputs: Vec<[f64; 3]> = (0..20)
            .map(|_| [rng.random(), rng.random_range(0.2..0.7), if rng.random_bool(0.6) { 1.0 } else { 0.0 }])
            .collect();
        let labels: Vec<bool> = inputs.iter().map(|x| rng.random_bool(0.2 + 0.6 * x[0])).collect();
        let fit = LogisticHead::fit(&inputs, &labels).unwrap();

        let search = |center: [f64; 4], half: f64, steps: i32| {
            let step = half / steps as f64;
            let mut best = (f64::INFINITY, center);
            for a in -steps..=steps {
                for b in -steps..=steps {
                    for c in -steps..=steps {
                        for d in -steps..=steps {
                            let p = [
                                center[0] + a as f64 * step,
                                center[1] + b as f64 * step,
                                center[2] + c as f64 * step,
                                center[3] + d as f64 * step,
                            ];
                            let h = LogisticHead {
                                intercept: p[0],
                                weights: [p[1], p[2], p[3]],
                            };
                            let l = h.loss(&inputs, &labels);
                            if l < best.0 {
                                best = (l, p);
                            }
                        }
                    }
                }
            }
            best.1
        };
        let coarse = search([0.0; 4], 8.0, 16);
        let fine = search(coarse, 0.5, 12);
        let grid = LogisticHead {
            intercept: fine[0],
            weights: [fine[1], fine[2], fine[3]],
        };
        for x in &inputs {
            assert!((grid.predict(*x) - fit.head.predict(*x)).abs() < 0.02);
        }
    }
}

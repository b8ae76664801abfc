use serde::{Deserialize, Serialize};

use super::{Parameters, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-3,
        }
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Tensor2>,
    v: Vec<Tensor2>,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(config: AdamConfig, params: &P) -> Self {
        let zeros: Vec<Tensor2> = params
            .named()
            .iter()
            .map(|(_, t)| Tensor2::zeros(t.rows(), t.cols()))
            .collect();
        AdamState {
            config,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update. Fails without touching anything if a gradient is
    /// non-finite or mis-shaped.
    pub fn step<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &[Tensor2]) -> Result<()> {
        {
            let named = params.named();
            if named.len() != grads.len() || named.len() != self.m.len() {
                return Err(Error::Invalid(format!(
                    "adam: {} parameters, {} gradients, {} moment slots",
                    named.len(),
                    grads.len(),
                    self.m.len()
                )));
            }
            for ((name, p), g) in named.iter().zip(grads) {
                if p.shape() != g.shape() {
                    return Err(Error::Shape {
                        op: "adam_step",
                        left: p.shape(),
                        right: g.shape(),
                    });
                }
                if !g.is_finite() {
                    return Err(Error::NonFiniteGradient(name.clone()));
                }
            }
        }

        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let decay = 1.0 - c.lr * c.weight_decay;
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let (pd, gd, md, vd) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
            for i in 0..pd.len() {
                md[i] = c.beta1 * md[i] + (1.0 - c.beta1) * gd[i];
                vd[i] = c.beta2 * vd[i] + (1.0 - c.beta2) * gd[i] * gd[i];
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] = pd[i] * decay - c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

use super::{Module, Tensor};
use crate::error::{ensure, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moments for every parameter of a module, in visiting order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new()
    }
}

impl AdamState {
    pub fn new() -> Self {
        AdamState {
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one bias-corrected update to every parameter of `module`
    /// using its accumulated gradients.
    pub fn step(&mut self, module: &mut dyn Module, lr: f64) -> Result<()> {
        let mut lens = Vec::new();
        module.visit(&mut |_, t| lens.push(t.len()));
        self.check_layout(&lens)?;
        self.t += 1;
        let (t, hyper) = (self.t, (self.beta1, self.beta2, self.epsilon));
        let (ms, vs) = (&mut self.m, &mut self.v);
        let mut i = 0;
        module.visit_mut(&mut |_, tensor| {
            let (values, grad) = tensor.split_mut();
            adam_update(values, grad, &mut ms[i], &mut vs[i], t, lr, hyper);
            i += 1;
        });
        Ok(())
    }

    pub fn step_tensors(&mut self, tensors: Vec<&mut Tensor>, lr: f64) -> Result<()> {
        let lens: Vec<usize> = tensors.iter().map(|t| t.len()).collect();
        self.check_layout(&lens)?;
        self.t += 1;
        for (i, t) in tensors.into_iter().enumerate() {
            let (values, grad) = t.split_mut();
            adam_update(
                values,
                grad,
                &mut self.m[i],
                &mut self.v[i],
                self.t,
                lr,
                (self.beta1, self.beta2, self.epsilon),
            );
        }
        Ok(())
    }

    fn check_layout(&mut self, lens: &[usize]) -> Result<()> {
        if self.m.is_empty() {
            self.m = lens.iter().map(|&n| vec![0.0; n]).collect();
            self.v = self.m.clone();
        }
        ensure!(
            lens.len() == self.m.len() && lens.iter().zip(&self.m).all(|(&n, m)| n == m.len()),
            "adam: parameter layout changed between steps"
        );
        Ok(())
    }
}

/// Single Adam update on raw buffers; `t` is the 1-based step after increment.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
) -> Result<()> {
    ensure!(
        params.len() == grads.len() && m.len() == params.len() && v.len() == params.len(),
        "adam: parameter, gradient and moment shapes differ ({}, {}, {}, {})",
        params.len(),
        grads.len(),
        m.len(),
        v.len()
    );
    ensure!(t >= 1, "adam: step counter must be at least 1");
    adam_update(params, grads, m, v, t, lr, (BETA1, BETA2, EPSILON));
    Ok(())
}

fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    (b1, b2, eps): (f64, f64, f64),
) {
    let c1 = 1.0 - b1.powi(t as i32);
    let c2 = 1.0 - b2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

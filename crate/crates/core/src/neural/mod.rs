//! Minimal numeric kernel: tensors, layers with hand-written backward
//! passes, Adam, learning-rate schedules, finite-difference checks and a
//! JSON checkpoint container.

mod adam;
pub mod gradcheck;
pub mod layers;
pub mod linalg;
mod schedule;
mod tensor;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::textdata::io;

pub use adam::{adam_step, AdamState};
pub use gradcheck::grad_check;
pub use schedule::{LrMode, LrSchedule};
pub use tensor::Tensor;

/// A tree of named parameters. Visiting order is fixed and defines the
/// layout of optimizer state.
pub trait Module {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));
}

pub fn visit_child(child: &dyn Module, prefix: &str, f: &mut dyn FnMut(&str, &Tensor)) {
    child.visit(&mut |name, t| f(&format!("{prefix}.{name}"), t));
}

pub fn visit_child_mut(
    child: &mut dyn Module,
    prefix: &str,
    f: &mut dyn FnMut(&str, &mut Tensor),
) {
    child.visit_mut(&mut |name, t| f(&format!("{prefix}.{name}"), t));
}

/// Copy of the parameter with the given dotted name. Panics when absent.
pub fn param(module: &dyn Module, name: &str) -> Tensor {
    let mut found = None;
    module.visit(&mut |n, t| {
        if n == name {
            found = Some(t.clone());
        }
    });
    found.unwrap_or_else(|| panic!("no parameter named {name}"))
}

pub fn param_names(module: &dyn Module) -> Vec<String> {
    let mut names = Vec::new();
    module.visit(&mut |n, _| names.push(n.to_string()));
    names
}

pub fn param_count(module: &dyn Module) -> usize {
    let mut n = 0;
    module.visit(&mut |_, t| n += t.len());
    n
}

pub fn zero_grad(module: &mut dyn Module) {
    module.visit_mut(&mut |_, t| t.zero_grad());
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(module: &mut dyn Module, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    module.visit(&mut |_, t| {
        if let Some(g) = t.grad() {
            sq += g.iter().map(|x| x * x).sum::<f64>();
        }
    });
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        module.visit_mut(&mut |_, t| t.grad_mut().iter_mut().for_each(|g| *g *= scale));
    }
    norm
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

/// Serialized parameters plus free-form configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    version: u32,
    pub kind: String,
    pub config: serde_json::Value,
    params: BTreeMap<String, StoredTensor>,
}

impl Checkpoint {
    pub fn capture(kind: &str, config: serde_json::Value, module: &dyn Module) -> Self {
        let mut params = BTreeMap::new();
        module.visit(&mut |name, t| {
            params.insert(
                name.to_string(),
                StoredTensor {
                    shape: t.shape().to_vec(),
                    values: t.values().to_vec(),
                },
            );
        });
        Checkpoint {
            version: CHECKPOINT_VERSION,
            kind: kind.to_string(),
            config,
            params,
        }
    }

    /// Copies stored values into a module of identical layout.
    pub fn restore(&self, module: &mut dyn Module) -> Result<()> {
        let mut err = None;
        let mut seen = 0;
        module.visit_mut(&mut |name, t| {
            if err.is_some() {
                return;
            }
            match self.params.get(name) {
                Some(s) if s.shape == t.shape() => {
                    t.values_mut().copy_from_slice(&s.values);
                    t.zero_grad();
                    seen += 1;
                }
                Some(s) => {
                    err = Some(Error::Contract(format!(
                        "checkpoint tensor {name} has shape {:?}, model expects {:?}",
                        s.shape,
                        t.shape()
                    )))
                }
                None => err = Some(Error::Contract(format!("checkpoint lacks tensor {name}"))),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        ensure!(
            seen == self.params.len(),
            "checkpoint has {} tensors, model uses {seen}",
            self.params.len()
        );
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path, serde_json::to_string(self)?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(&io::read_text(path)?)?;
        ensure!(
            ckpt.version == CHECKPOINT_VERSION,
            "unsupported checkpoint version {}",
            ckpt.version
        );
        for (name, t) in &ckpt.params {
            ensure!(
                t.shape.iter().product::<usize>() == t.values.len(),
                "checkpoint tensor {name} has inconsistent shape"
            );
        }
        Ok(ckpt)
    }
}

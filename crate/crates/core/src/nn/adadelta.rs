//! Adadelta with running averages of squared gradients and squared updates.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdadeltaConfig {
    pub rho: f64,
    pub eps: f64,
    pub learning_rate: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        Self {
            rho: 0.95,
            eps: 1e-6,
            learning_rate: 1.0,
        }
    }
}

/// A parameter buffer paired with its gradient.
pub struct ParamSlot<'a> {
    pub value: &'a mut [f64],
    pub grad: &'a [f64],
}

/// Per-parameter accumulators `E[g²]` and `E[Δx²]`, both starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState {
    pub config: AdadeltaConfig,
    pub sq_grad: Vec<Vec<f64>>,
    pub sq_update: Vec<Vec<f64>>,
}

impl AdadeltaState {
    pub fn new(config: AdadeltaConfig, sizes: impl IntoIterator<Item = usize>) -> Self {
        let sq_grad: Vec<Vec<f64>> = sizes.into_iter().map(|n| vec![0.0; n]).collect();
        let sq_update = sq_grad.clone();
        Self {
            config,
            sq_grad,
            sq_update,
        }
    }

    /// Applies one update to every slot. Nothing is modified when any
    /// gradient is non-finite.
    pub fn step(&mut self, slots: &mut [ParamSlot<'_>]) -> Result<()> {
        if slots.len() != self.sq_grad.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sq_grad.len(),
                actual: slots.len(),
            });
        }
        for (tensor, (slot, acc)) in slots.iter().zip(&self.sq_grad).enumerate() {
            if slot.value.len() != acc.len() || slot.grad.len() != acc.len() {
                return Err(Error::DimensionMismatch {
                    expected: acc.len(),
                    actual: slot.grad.len(),
                });
            }
            if let Some(index) = slot.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient { tensor, index });
            }
        }
        let AdadeltaConfig {
            rho,
            eps,
            learning_rate,
        } = self.config;
        for ((slot, eg), ex) in slots
            .iter_mut()
            .zip(self.sq_grad.iter_mut())
            .zip(self.sq_update.iter_mut())
        {
            for (((p, &g), eg), ex) in slot
                .value
                .iter_mut()
                .zip(slot.grad)
                .zip(eg.iter_mut())
                .zip(ex.iter_mut())
            {
                *eg = rho * *eg + (1.0 - rho) * g * g;
                let dx = -(libm::sqrt(*ex + eps) / libm::sqrt(*eg + eps)) * g;
                *ex = rho * *ex + (1.0 - rho) * dx * dx;
                *p += learning_rate * dx;
            }
        }
        Ok(())
    }
}

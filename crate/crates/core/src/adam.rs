//! Adam with bias correction. The update is returned as an increment for the
//! caller to add, so ascent versus descent is decided by the gradient's sign.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// One Adam step. Returns `lr · m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, gradient: &[f64]) -> Result<Vec<f64>> {
        if gradient.len() != self.len() {
            return Err(Error::dims(self.len(), gradient.len()));
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let mut inc = Vec::with_capacity(gradient.len());
        for ((m, v), &g) in self
            .first_moment
            .iter_mut()
            .zip(self.second_moment.iter_mut())
            .zip(gradient)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            inc.push(self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon));
        }
        Ok(inc)
    }
}

/// Functional form: returns the updated state and the increment.
pub fn adam_step(state: &AdamState, gradient: &[f64]) -> Result<(AdamState, Vec<f64>)> {
    let mut next = state.clone();
    let inc = next.step(gradient)?;
    Ok((next, inc))
}

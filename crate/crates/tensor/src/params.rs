//! Named parameters, Glorot initialization, and the Adam optimizer.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::TensorError;
use crate::tape::{Tape, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub value: Array2<f64>,
    pub grad: Option<Array2<f64>>,
    pub first_moment: Array2<f64>,
    pub second_moment: Array2<f64>,
    pub step: u64,
}

impl Parameter {
    pub fn new(value: Array2<f64>) -> Self {
        let dim = value.dim();
        Self {
            value,
            grad: None,
            first_moment: Array2::zeros(dim),
            second_moment: Array2::zeros(dim),
            step: 0,
        }
    }
}

/// Parameters keyed by unique name, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    params: BTreeMap<String, Parameter>,
}

/// Glorot-uniform sample in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..=bound))
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) -> Result<(), TensorError> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(TensorError::DuplicateParameter(name));
        }
        self.params.insert(name, Parameter::new(value));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.params.get_mut(name)
    }

    pub fn value(&self, name: &str) -> Result<&Array2<f64>, TensorError> {
        self.params
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| TensorError::UnknownParameter(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn num_scalars(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad = None;
        }
    }

    /// Adds the gradients accumulated on `tape` for every bound parameter.
    pub fn absorb_grads(&mut self, tape: &Tape, binding: &Binding) {
        for (name, var) in &binding.vars {
            let Some(g) = tape.grad(*var) else { continue };
            let p = self.params.get_mut(name).expect("binding built from this store");
            match &mut p.grad {
                Some(acc) => *acc += g,
                None => p.grad = Some(g.clone()),
            }
        }
    }
}

/// Records which tape leaf holds which named parameter.
#[derive(Debug, Default)]
pub struct Binding {
    vars: BTreeMap<String, Var>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the tape variable for `name`, creating the leaf on first use.
    pub fn bind(&mut self, tape: &mut Tape, store: &ParameterStore, name: &str) -> Result<Var, TensorError> {
        if let Some(v) = self.vars.get(name) {
            return Ok(*v);
        }
        let value = store.value(name)?.clone();
        let v = tape.variable(value);
        self.vars.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn get(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }
}

/// Adam hyperparameters. Weight decay is coupled: `λ·w` is added to the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

impl Adam {
    /// Updates every parameter in place. Every parameter must carry a gradient.
    pub fn step(&self, store: &mut ParameterStore) -> Result<(), TensorError> {
        if let Some((name, _)) = store.params.iter().find(|(_, p)| p.grad.is_none()) {
            return Err(TensorError::MissingGradient(name.clone()));
        }
        for p in store.params.values_mut() {
            let mut g = p.grad.clone().expect("checked above");
            if self.weight_decay != 0.0 {
                g.scaled_add(self.weight_decay, &p.value);
            }
            p.step += 1;
            let t = p.step as i32;
            p.first_moment = &p.first_moment * self.beta1 + &g * (1.0 - self.beta1);
            p.second_moment = &p.second_moment * self.beta2 + &g.mapv(|x| x * x) * (1.0 - self.beta2);
            let bc1 = 1.0 - self.beta1.powi(t);
            let bc2 = 1.0 - self.beta2.powi(t);
            ndarray::Zip::from(&mut p.value)
                .and(&p.first_moment)
                .and(&p.second_moment)
                .for_each(|w, &m, &v| {
                    *w -= self.lr * (m / bc1) / ((v / bc2).sqrt() + self.eps);
                });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn scalar_store(w: f64, g: f64) -> ParameterStore {
        let mut s = ParameterStore::new();
        s.insert("w", array![[w]]).unwrap();
        s.get_mut("w").unwrap().grad = Some(array![[g]]);
        s
    }

    #[test]
    fn positive_gradient_decreases_parameter() {
        let mut s = scalar_store(1.0, 0.5);
        Adam::default().step(&mut s).unwrap();
        assert!(s.value("w").unwrap()[[0, 0]] < 1.0);
        assert_eq!(s.get("w").unwrap().step, 1);
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut s = scalar_store(1.25, 0.0);
        let adam = Adam {
            weight_decay: 0.0,
            ..Adam::default()
        };
        adam.step(&mut s).unwrap();
        assert_eq!(s.value("w").unwrap()[[0, 0]], 1.25);
    }

    #[test]
    fn missing_gradient_names_the_parameter() {
        let mut s = ParameterStore::new();
        s.insert("enc.w", array![[1.0]]).unwrap();
        let err = Adam::default().step(&mut s).unwrap_err();
        assert_eq!(err.to_string(), "parameter `enc.w` has no gradient");
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut s = ParameterStore::new();
        s.insert("a", array![[1.0]]).unwrap();
        assert!(s.insert("a", array![[2.0]]).is_err());
    }

    #[test]
    fn glorot_respects_bound() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let w = glorot_uniform(10, 5, &mut rng);
        let bound = (6.0f64 / 15.0).sqrt();
        assert!(w.iter().all(|v| v.abs() <= bound));
    }
}

//! Named, group-tagged parameter tensors and the structures congruent to them.

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::model::LayerGroup;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub group: LayerGroup,
    pub tensor: Tensor,
}

/// Ordered collection of named parameter tensors. Insertion order is the
/// canonical order used for checkpoints and aggregation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    params: IndexMap<String, Param>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, group: LayerGroup, tensor: Tensor) {
        self.params.insert(name.into(), Param { group, tensor });
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.get_mut(name)
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .map(|p| &p.tensor)
            .ok_or_else(|| Error::Shape(format!("missing parameter {name}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    /// Sub-store holding only the tensors whose group satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(LayerGroup) -> bool) -> ParameterStore {
        let params = self
            .params
            .iter()
            .filter(|(_, p)| keep(p.group))
            .map(|(k, p)| (k.clone(), p.clone()))
            .collect();
        ParameterStore { params }
    }

    /// Same names, groups and shapes in the same order.
    pub fn is_congruent(&self, other: &ParameterStore) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|((ka, a), (kb, b))| {
                    ka == kb && a.group == b.group && a.tensor.shape() == b.tensor.shape()
                })
    }

    pub fn expect_congruent(&self, other: &ParameterStore, what: &str) -> Result<()> {
        if self.is_congruent(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!("{what}: parameter stores are not congruent")))
        }
    }

    pub fn bit_eq(&self, other: &ParameterStore) -> bool {
        self.is_congruent(other)
            && self
                .params
                .values()
                .zip(other.params.values())
                .all(|(a, b)| a.tensor.bit_eq(&b.tensor))
    }

    pub fn zeros_like(&self) -> ParameterStore {
        let params = self
            .params
            .iter()
            .map(|(k, p)| {
                (
                    k.clone(),
                    Param {
                        group: p.group,
                        tensor: Tensor::zeros(p.tensor.shape()),
                    },
                )
            })
            .collect();
        ParameterStore { params }
    }

    /// Copy every tensor of `other` into `self`; all names must already exist
    /// with the same shape.
    pub fn overwrite_from(&mut self, other: &ParameterStore) -> Result<()> {
        for (name, p) in other.iter() {
            let slot = self
                .params
                .get_mut(name)
                .ok_or_else(|| Error::Shape(format!("unknown parameter {name}")))?;
            if slot.tensor.shape() != p.tensor.shape() {
                return Err(Error::Shape(format!("shape mismatch for {name}")));
            }
            slot.tensor = p.tensor.clone();
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params.values().all(|p| p.tensor.is_finite())
    }

    pub fn num_values(&self) -> usize {
        self.params.values().map(|p| p.tensor.len()).sum()
    }
}

/// One gradient tensor per parameter tensor, keyed and ordered like the store.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    tensors: IndexMap<String, Tensor>,
}

impl Gradients {
    pub fn zeros_for(store: &ParameterStore) -> Self {
        let tensors = store
            .iter()
            .map(|(k, p)| (k.to_string(), Tensor::zeros(p.tensor.shape())))
            .collect();
        Self { tensors }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::Shape(format!("missing gradient {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn is_congruent(&self, store: &ParameterStore) -> bool {
        self.tensors.len() == store.len()
            && self
                .tensors
                .iter()
                .zip(store.iter())
                .all(|((kg, g), (kp, p))| kg == kp && g.shape() == p.tensor.shape())
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.values_mut().zip(other.tensors.values()) {
            a.add_scaled(1.0, b);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.tensors.values_mut().for_each(|t| t.scale(alpha));
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }
}

/// Per-tensor trainable flag, keyed and ordered like the store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainableMask {
    flags: IndexMap<String, bool>,
}

impl TrainableMask {
    pub fn from_fn(store: &ParameterStore, f: impl Fn(&str, LayerGroup) -> bool) -> Self {
        let flags = store
            .iter()
            .map(|(k, p)| (k.to_string(), f(k, p.group)))
            .collect();
        Self { flags }
    }

    pub fn all(store: &ParameterStore) -> Self {
        Self::from_fn(store, |_, _| true)
    }

    pub fn none(store: &ParameterStore) -> Self {
        Self::from_fn(store, |_, _| false)
    }

    pub fn is_trainable(&self, name: &str) -> bool {
        self.flags.get(name).copied().unwrap_or(false)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> {
        self.flags.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn trainable_names(&self) -> impl Iterator<Item = &str> {
        self.flags.iter().filter(|(_, &v)| v).map(|(k, _)| k.as_str())
    }

    pub fn any(&self) -> bool {
        self.flags.values().any(|&v| v)
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn is_congruent(&self, store: &ParameterStore) -> bool {
        self.flags.len() == store.len() && self.flags.keys().zip(store.names()).all(|(a, b)| a == b)
    }
}

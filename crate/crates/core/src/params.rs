//! Named parameter collections shared by the networks, the optimizer and the
//! checkpoint format.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

static NEXT_TAG: AtomicU64 = AtomicU64::new(1);

/// Index of a tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered, named tensors. Trainable entries have `requires_grad` set;
/// buffers such as batchnorm running statistics do not.
#[derive(Clone, Debug)]
pub struct ParamStore<S: Scalar = f32> {
    tag: u64,
    names: Vec<String>,
    tensors: Vec<Tensor<S>>,
    lookup: HashMap<String, usize>,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            tag: NEXT_TAG.fetch_add(1, Ordering::Relaxed),
            names: Vec::new(),
            tensors: Vec::new(),
            lookup: HashMap::new(),
        }
    }

    /// Identity used by the tape to route gradients back to this store.
    pub fn tag(&self) -> u64 {
        self.tag
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<S>) -> Result<ParamId> {
        let name = name.into();
        if self.lookup.contains_key(&name) {
            return Err(Error::param(format!("duplicate parameter name `{name}`")));
        }
        let id = self.tensors.len();
        self.lookup.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.lookup.get(name).copied().map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<S>)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &str, &mut Tensor<S>)> {
        self.names
            .iter()
            .zip(self.tensors.iter_mut())
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn trainable(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.tensors
            .iter()
            .enumerate()
            .filter(|(_, t)| t.requires_grad())
            .map(|(i, _)| ParamId(i))
    }

    /// Total number of scalars in trainable tensors.
    pub fn trainable_len(&self) -> usize {
        self.tensors
            .iter()
            .filter(|t| t.requires_grad())
            .map(Tensor::numel)
            .sum()
    }

    pub fn zero_grads(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn clear_grads(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::clear_grad);
    }

    /// Same names and values in another precision, under a fresh tag.
    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            tag: NEXT_TAG.fetch_add(1, Ordering::Relaxed),
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            lookup: self.lookup.clone(),
        }
    }

    /// True when names, shapes and values agree bit for bit.
    pub fn same_values(&self, other: &ParamStore<S>) -> bool {
        self.names == other.names
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| {
                    a.shape() == b.shape()
                        && a.data()
                            .iter()
                            .zip(b.data())
                            .all(|(x, y)| x.to_f64c().to_bits() == y.to_f64c().to_bits())
                })
    }
}

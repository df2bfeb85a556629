use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{LayerGroup, Task};
use crate::params::ParameterStore;

/// Server-side parameters split by layer group.
///
/// `shared` holds the pre-trained and common groups, `per_task` the
/// task-specific groups and `personalized` the global copy of the
/// personalized group that federated rounds train. `per_client` holds
/// personalized tensors of clients that went through personalization; a
/// client without an entry uses the global copy.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    pub shared: ParameterStore,
    pub per_task: BTreeMap<Task, ParameterStore>,
    pub personalized: ParameterStore,
    pub per_client: BTreeMap<String, ParameterStore>,
    order: Vec<String>,
}

impl GlobalState {
    pub fn from_store(store: &ParameterStore) -> Self {
        let mut state = GlobalState {
            shared: ParameterStore::new(),
            per_task: BTreeMap::new(),
            personalized: ParameterStore::new(),
            per_client: BTreeMap::new(),
            order: store.names().map(str::to_string).collect(),
        };
        for (name, p) in store.iter() {
            state
                .partition_mut(p.group)
                .insert(name, p.group, p.tensor.clone());
        }
        state
    }

    /// Canonical tensor order of the full model.
    pub fn order(&self) -> &[String] {
        &self.order
    }

    fn partition_mut(&mut self, group: LayerGroup) -> &mut ParameterStore {
        match group {
            LayerGroup::PreTrained | LayerGroup::Common => &mut self.shared,
            LayerGroup::TaskSpecific(t) => self.per_task.entry(t).or_default(),
            LayerGroup::Personalized => &mut self.personalized,
        }
    }

    /// Global (non-client) copy of a tensor.
    pub fn global_param(&self, name: &str) -> Option<&crate::params::Param> {
        self.shared
            .get(name)
            .or_else(|| self.personalized.get(name))
            .or_else(|| self.per_task.values().find_map(|s| s.get(name)))
    }

    /// Full model with the global personalized tensors.
    pub fn global_store(&self) -> ParameterStore {
        self.assemble(None)
    }

    /// Full model as seen by `client`.
    pub fn materialize(&self, client: &str) -> ParameterStore {
        self.assemble(self.per_client.get(client))
    }

    fn assemble(&self, own: Option<&ParameterStore>) -> ParameterStore {
        let mut out = ParameterStore::new();
        for name in &self.order {
            let p = own
                .and_then(|s| s.get(name))
                .or_else(|| self.global_param(name))
                .expect("order lists only stored tensors");
            out.insert(name.clone(), p.group, p.tensor.clone());
        }
        out
    }

    /// Writes the named tensors of `store` into their global partition.
    pub fn write_global<'a>(
        &mut self,
        store: &ParameterStore,
        names: impl IntoIterator<Item = &'a str>,
    ) -> Result<()> {
        for name in names {
            let src = store
                .get(name)
                .ok_or_else(|| Error::Shape(format!("missing parameter {name}")))?;
            let dst = self.global_param_mut(name)?;
            if dst.tensor.shape() != src.tensor.shape() || dst.group != src.group {
                return Err(Error::Shape(format!("incongruent tensor {name}")));
            }
            dst.tensor = src.tensor.clone();
        }
        Ok(())
    }

    fn global_param_mut(&mut self, name: &str) -> Result<&mut crate::params::Param> {
        let group = self
            .global_param(name)
            .map(|p| p.group)
            .ok_or_else(|| Error::Shape(format!("unknown tensor {name}")))?;
        Ok(self
            .partition_mut(group)
            .get_mut(name)
            .expect("partition holds its tensors"))
    }

    /// Stores the personalized tensors of `store` as `client`'s own.
    pub fn set_client(&mut self, client: &str, store: &ParameterStore) {
        self.per_client.insert(
            client.to_string(),
            store.filter(|g| g == LayerGroup::Personalized),
        );
    }

    /// Rebuilds a state from partition contents, checking disjointness.
    pub(crate) fn from_parts(
        order: Vec<String>,
        shared: ParameterStore,
        per_task: BTreeMap<Task, ParameterStore>,
        personalized: ParameterStore,
        per_client: BTreeMap<String, ParameterStore>,
    ) -> Result<Self> {
        let state = GlobalState {
            shared,
            per_task,
            personalized,
            per_client,
            order,
        };
        let stored = state.shared.len()
            + state.personalized.len()
            + state.per_task.values().map(ParameterStore::len).sum::<usize>();
        if stored != state.order.len() || state.order.iter().any(|n| state.global_param(n).is_none()) {
            return Err(Error::Checkpoint("partitions do not cover the model exactly".into()));
        }
        Ok(state)
    }
}

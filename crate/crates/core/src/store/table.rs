use std::collections::{BTreeMap, HashMap};

use parking_lot::RwLock;
use serde_json::Value;

use super::{CollectionSpec, Document, Query, StoreError, StoreResult};

/// In-memory state of one collection.
#[derive(Debug)]
pub(crate) struct Table {
    pub spec: CollectionSpec,
    pub docs: RwLock<BTreeMap<String, Document>>,
}

impl Table {
    pub fn new(spec: CollectionSpec) -> Self {
        Self {
            spec,
            docs: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn check_query(&self, query: &Query) -> StoreResult<()> {
        for field in query.fields() {
            if !self.spec.indexed.iter().any(|f| f == field) {
                return Err(StoreError::NotIndexed {
                    collection: self.spec.name.clone(),
                    field: field.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<Document> {
        self.docs.read().get(key).cloned()
    }

    pub fn query(&self, query: &Query) -> StoreResult<Vec<Document>> {
        self.check_query(query)?;
        let mut out: Vec<Document> = self
            .docs
            .read()
            .values()
            .filter(|d| query.matches(&d.body))
            .cloned()
            .collect();
        query.sort(&mut out);
        Ok(out)
    }

    /// Version the next write to `key` would get, or a conflict when the
    /// caller's expectation is stale.
    pub fn next_version(
        &self,
        docs: &BTreeMap<String, Document>,
        key: &str,
        expected: Option<u64>,
    ) -> StoreResult<u64> {
        let current = docs.get(key).map_or(0, |d| d.version);
        match expected {
            Some(e) if e != current => Err(StoreError::Conflict {
                collection: self.spec.name.clone(),
                key: key.to_string(),
                expected: e,
                actual: current,
            }),
            _ => Ok(current + 1),
        }
    }

    pub fn install(docs: &mut BTreeMap<String, Document>, collection: &str, key: &str, body: Value, version: u64) {
        docs.insert(
            key.to_string(),
            Document {
                collection: collection.to_string(),
                key: key.to_string(),
                body,
                version,
            },
        );
    }
}

pub(crate) fn tables(schema: Vec<CollectionSpec>) -> HashMap<String, Table> {
    schema
        .into_iter()
        .map(|spec| (spec.name.clone(), Table::new(spec)))
        .collect()
}

pub(crate) fn lookup<'a>(tables: &'a HashMap<String, Table>, collection: &str) -> StoreResult<&'a Table> {
    tables
        .get(collection)
        .ok_or_else(|| StoreError::UnknownCollection(collection.to_string()))
}

//! JSON grid envelope: `{meta, cols, rows}`.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Col {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDocument {
    pub meta: Map<String, Value>,
    pub cols: Vec<Col>,
    pub rows: Vec<Map<String, Value>>,
}

impl GridDocument {
    pub fn new(op: &str, cols: &[&str]) -> Self {
        let mut meta = Map::new();
        meta.insert("op".into(), op.into());
        GridDocument {
            meta,
            cols: cols.iter().map(|c| Col { name: c.to_string() }).collect(),
            rows: Vec::new(),
        }
    }

    /// Error grid: `meta.err` carries the kind and `meta.dis` the message.
    pub fn error(op: &str, kind: &str, dis: impl Into<String>) -> Self {
        let mut g = GridDocument::new(op, &[]);
        g.meta.insert("err".into(), kind.into());
        g.meta.insert("dis".into(), dis.into().into());
        g
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    /// Appends a row given in column order.
    pub fn push(&mut self, values: Vec<Value>) {
        debug_assert_eq!(values.len(), self.cols.len());
        let row = self.cols.iter().map(|c| c.name.clone()).zip(values).collect();
        self.rows.push(row);
    }

    pub fn is_error(&self) -> bool {
        self.meta.contains_key("err")
    }

    pub fn dis(&self) -> Option<&str> {
        self.meta.get("dis").and_then(Value::as_str)
    }

    pub fn meta_str(&self, key: &str) -> Option<&str> {
        self.meta.get(key).and_then(Value::as_str)
    }

    /// Every row key names a column.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(k) = row.keys().find(|k| !self.cols.iter().any(|c| &c.name == *k)) {
                return Err(Error::Protocol(format!("row {i} has undeclared column `{k}`")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid serialises")
    }

    /// Parses and validates a grid; failures quote the start of the payload.
    pub fn parse(body: &str) -> Result<Self> {
        let g: GridDocument = serde_json::from_str(body)
            .map_err(|e| Error::Protocol(format!("malformed grid ({e}): {}", excerpt(body))))?;
        g.validate()?;
        Ok(g)
    }
}

pub(crate) fn excerpt(s: &str) -> String {
    const MAX: usize = 160;
    if s.len() <= MAX {
        return s.to_string();
    }
    let mut end = MAX;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &s[..end])
}

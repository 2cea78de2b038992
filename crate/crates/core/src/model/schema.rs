use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKind {
    String,
    Integer,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaKind {
    String,
    Integer,
    Float,
    Tuple,
    Array,
}

/// Shape of the values a sensor emits. Scalars carry no element kinds; a
/// tuple lists one kind per position; an array lists its single element kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PayloadSchema {
    pub kind: SchemaKind,
    #[serde(default)]
    pub element_kinds: Vec<ScalarKind>,
}

impl PayloadSchema {
    pub fn scalar(kind: ScalarKind) -> Self {
        let kind = match kind {
            ScalarKind::String => SchemaKind::String,
            ScalarKind::Integer => SchemaKind::Integer,
            ScalarKind::Float => SchemaKind::Float,
        };
        Self { kind, element_kinds: Vec::new() }
    }

    pub fn float() -> Self {
        Self::scalar(ScalarKind::Float)
    }

    pub fn tuple(kinds: impl Into<Vec<ScalarKind>>) -> Self {
        Self { kind: SchemaKind::Tuple, element_kinds: kinds.into() }
    }

    pub fn array(of: ScalarKind) -> Self {
        Self { kind: SchemaKind::Array, element_kinds: vec![of] }
    }

    pub fn as_scalar(&self) -> Option<ScalarKind> {
        match self.kind {
            SchemaKind::String => Some(ScalarKind::String),
            SchemaKind::Integer => Some(ScalarKind::Integer),
            SchemaKind::Float => Some(ScalarKind::Float),
            SchemaKind::Tuple | SchemaKind::Array => None,
        }
    }

    pub fn check(&self) -> Result<()> {
        let ok = match self.kind {
            SchemaKind::Tuple => !self.element_kinds.is_empty(),
            SchemaKind::Array => self.element_kinds.len() == 1,
            _ => self.element_kinds.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "{:?} schema with {} element kinds",
                self.kind,
                self.element_kinds.len()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_invariants() {
        assert!(PayloadSchema::float().check().is_ok());
        assert!(PayloadSchema::tuple([ScalarKind::Float]).check().is_ok());
        assert!(PayloadSchema::tuple([]).check().is_err());
        assert!(PayloadSchema::array(ScalarKind::Integer).check().is_ok());
        let two = PayloadSchema {
            kind: SchemaKind::Array,
            element_kinds: vec![ScalarKind::Integer, ScalarKind::Float],
        };
        assert!(two.check().is_err());
        let scalar_with_elems =
            PayloadSchema { kind: SchemaKind::String, element_kinds: vec![ScalarKind::String] };
        assert!(scalar_with_elems.check().is_err());
    }

    #[test]
    fn json_shape() {
        let s: PayloadSchema =
            serde_json::from_str(r#"{"kind":"tuple","element_kinds":["float","integer"]}"#).unwrap();
        assert_eq!(s, PayloadSchema::tuple([ScalarKind::Float, ScalarKind::Integer]));
        let f: PayloadSchema = serde_json::from_str(r#"{"kind":"float"}"#).unwrap();
        assert_eq!(f, PayloadSchema::float());
    }
}

use serde_json::Value;

use crate::error::{Expected, FoundKind, SchemaMismatch};
use crate::model::{PayloadSchema, ScalarKind, SchemaKind};

fn scalar_matches(kind: ScalarKind, v: &Value) -> bool {
    match kind {
        ScalarKind::String => v.is_string(),
        ScalarKind::Integer => v.is_i64() || v.is_u64(),
        ScalarKind::Float => v.is_f64(),
    }
}

fn check_scalar(kind: ScalarKind, v: &Value, position: Option<usize>) -> Result<(), SchemaMismatch> {
    if scalar_matches(kind, v) {
        Ok(())
    } else {
        Err(SchemaMismatch { expected: Expected::Scalar(kind), found: FoundKind::of(v), position })
    }
}

/// Checks that `payload` has exactly the shape and scalar kinds of `schema`.
/// Integers are not accepted where floats are expected, nor the reverse.
pub fn validate_payload(schema: &PayloadSchema, payload: &Value) -> Result<(), SchemaMismatch> {
    if let Some(kind) = schema.as_scalar() {
        return check_scalar(kind, payload, None);
    }
    let expected = match schema.kind {
        SchemaKind::Tuple => Expected::Tuple { arity: schema.element_kinds.len() },
        _ => Expected::Array,
    };
    let Value::Array(items) = payload else {
        return Err(SchemaMismatch { expected, found: FoundKind::of(payload), position: None });
    };
    match schema.kind {
        SchemaKind::Tuple => {
            if items.len() != schema.element_kinds.len() {
                return Err(SchemaMismatch {
                    expected,
                    found: FoundKind::Array,
                    position: Some(items.len().min(schema.element_kinds.len())),
                });
            }
            for (i, (kind, v)) in schema.element_kinds.iter().zip(items).enumerate() {
                check_scalar(*kind, v, Some(i))?;
            }
        }
        _ => {
            let kind = schema.element_kinds[0];
            for (i, v) in items.iter().enumerate() {
                check_scalar(kind, v, Some(i))?;
            }
        }
    }
    Ok(())
}

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    String,
    Number,
    Integer,
    Bool,
    Array,
    Object,
    Any,
}

impl FieldKind {
    fn accepts(self, v: &Value) -> bool {
        match self {
            FieldKind::String => v.is_string(),
            FieldKind::Number => v.is_number(),
            FieldKind::Integer => v.is_i64() || v.is_u64(),
            FieldKind::Bool => v.is_boolean(),
            FieldKind::Array => v.is_array(),
            FieldKind::Object => v.is_object(),
            FieldKind::Any => true,
        }
    }
}

/// Minimal structural contract for a JSON object reply: named required fields
/// with coarse types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSchema {
    pub name: String,
    pub required: Vec<(String, FieldKind)>,
}

impl ResponseSchema {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), required: Vec::new() }
    }

    pub fn field(mut self, name: impl Into<String>, kind: FieldKind) -> Self {
        self.required.push((name.into(), kind));
        self
    }

    /// Extracts the JSON object from `text` and checks the required fields.
    pub fn validate(&self, text: &str) -> Result<Value, String> {
        let value = extract_json(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| "reply must be a JSON object".to_string())?;
        for (name, kind) in &self.required {
            match obj.get(name) {
                None | Some(Value::Null) => {
                    return Err(format!("missing required field \"{name}\""));
                }
                Some(v) if !kind.accepts(v) => {
                    return Err(format!("field \"{name}\" must be of type {kind:?}"));
                }
                _ => {}
            }
        }
        Ok(value)
    }

    /// Human-readable description appended to prompts.
    pub fn instructions(&self) -> String {
        let fields: Vec<String> = self
            .required
            .iter()
            .map(|(n, k)| format!("\"{n}\" ({})", format!("{k:?}").to_lowercase()))
            .collect();
        format!(
            "Reply with a single JSON object only, containing the fields: {}.",
            fields.join(", ")
        )
    }
}

/// Pulls the first JSON value out of a model reply, tolerating code fences
/// and surrounding prose.
pub fn extract_json(text: &str) -> Result<Value, String> {
    let trimmed = text.trim();
    if let Ok(v) = serde_json::from_str::<Value>(trimmed) {
        return Ok(v);
    }
    let unfenced = strip_fence(trimmed);
    if let Ok(v) = serde_json::from_str::<Value>(unfenced) {
        return Ok(v);
    }
    let start = unfenced.find(['{', '[']).ok_or("no JSON object found in reply")?;
    let mut stream = serde_json::Deserializer::from_str(&unfenced[start..]).into_iter::<Value>();
    match stream.next() {
        Some(Ok(v)) => Ok(v),
        Some(Err(e)) => Err(format!("reply is not valid JSON: {e}")),
        None => Err("no JSON object found in reply".into()),
    }
}

fn strip_fence(text: &str) -> &str {
    let Some(rest) = text.strip_prefix("```") else {
        return text;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_from_fences_and_prose() {
        let v = extract_json("```json\n{\"a\": 1}\n```").unwrap();
        assert_eq!(v["a"], 1);
        let v = extract_json("Sure! Here it is: {\"a\": [1,2]} hope it helps").unwrap();
        assert_eq!(v["a"][1], 2);
        assert!(extract_json("no json").is_err());
    }

    #[test]
    fn required_fields_checked() {
        let s = ResponseSchema::new("plan")
            .field("rationale", FieldKind::String)
            .field("next_step", FieldKind::Integer);
        assert!(s.validate(r#"{"rationale":"r","next_step":0}"#).is_ok());
        let err = s.validate(r#"{"next_step":0}"#).unwrap_err();
        assert!(err.contains("rationale"));
        assert!(s.validate(r#"{"rationale":"r","next_step":"x"}"#).is_err());
    }
}

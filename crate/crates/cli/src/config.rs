//! Flat `key = value` config files layered over the built-in defaults.

use std::path::Path;

use lowrank_isomap::PipelineConfig;
use serde_json::Value;

use crate::Failure;

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, Failure> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("config line {}: expected key = value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_kv_file(path: &Path) -> Result<Vec<(String, String)>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    parse_kv(&text).map_err(|e| match e {
        Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn canonical_key(key: &str) -> String {
    let key = key.trim().replace('-', "_");
    match key.as_str() {
        "landmarks" => "n_landmarks".into(),
        "dim" => "latent_dim".into(),
        _ => key,
    }
}

fn parse_value(raw: &str) -> Value {
    match raw {
        "none" | "null" => return Value::Null,
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(v) = raw.parse::<u64>() {
        return Value::from(v);
    }
    if let Ok(v) = raw.parse::<f64>() {
        if v.is_finite() {
            return Value::from(v);
        }
    }
    Value::String(raw.trim_matches('"').to_string())
}

/// Applies the layers in order; later layers win. Keys may be dotted (`lrr.beta`).
pub fn resolve(layers: &[&[(String, String)]]) -> Result<PipelineConfig, Failure> {
    let mut root = serde_json::to_value(PipelineConfig::default()).expect("config serializes");
    for (key, raw) in layers.iter().flat_map(|l| l.iter()) {
        let key = canonical_key(key);
        let mut node = &mut root;
        for part in key.split('.') {
            node = node
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| Failure::Usage(format!("unknown config key `{key}`")))?;
        }
        if node.is_object() {
            return Err(Failure::Usage(format!("config key `{key}` names a section")));
        }
        *node = parse_value(raw);
    }
    serde_json::from_value(root).map_err(|e| Failure::Usage(format!("invalid config: {e}")))
}

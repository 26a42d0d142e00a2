//! Schema file format: `{"domains": [...], "slots": {domain: [slot, ...]},
//! "overlap_pairs": [[a, b], ...]}`. The repo ships the five-domain hotel/
//! restaurant/train/taxi/attraction schema and the two-domain toy schema.

use std::fs;
use std::path::Path;

use csfn_core::schema::{build_schema_graph, SchemaDef, SchemaGraph};
use serde::{Deserialize, Serialize};
use serde_json::Map;

use crate::error::{AppError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct SchemaJson {
    domains: Vec<String>,
    /// Keyed by domain name; order of domains comes from `domains`.
    slots: Map<String, serde_json::Value>,
    #[serde(default)]
    overlap_pairs: Vec<(String, String)>,
}

pub fn schema_def_from_str(text: &str, origin: &Path) -> Result<SchemaDef> {
    let parsed: SchemaJson = serde_json::from_str(text).map_err(|e| AppError::json(origin, e))?;
    let mut slots_per_domain = Vec::with_capacity(parsed.domains.len());
    for d in &parsed.domains {
        let slot_list = parsed
            .slots
            .get(d)
            .ok_or_else(|| AppError::data(format!("schema domain `{d}` has no slot list")))?;
        let slots: Vec<String> = serde_json::from_value(slot_list.clone())
            .map_err(|e| AppError::json(origin, e))?;
        slots_per_domain.push(slots);
    }
    SchemaDef::new(parsed.domains, slots_per_domain, parsed.overlap_pairs).map_err(AppError::Core)
}

pub fn load_schema_def(path: &Path) -> Result<SchemaDef> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    schema_def_from_str(&text, path)
}

pub fn load_schema_graph(path: &Path) -> Result<SchemaGraph> {
    let def = load_schema_def(path)?;
    build_schema_graph(&def).map_err(AppError::Core)
}

pub fn save_schema_def(path: &Path, def: &SchemaDef) -> Result<()> {
    let mut slots = Map::new();
    for (i, d) in def.domains().iter().enumerate() {
        slots.insert(d.clone(), serde_json::json!(def.slots_of(i)));
    }
    let json = SchemaJson {
        domains: def.domains().to_vec(),
        slots,
        overlap_pairs: def.overlap_pairs().to_vec(),
    };
    let text = serde_json::to_string_pretty(&json).map_err(|e| AppError::json(path, e))?;
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

//! Checkpoint files: thin filesystem wrapper over the core byte format.

use std::fs;
use std::path::Path;

use csfn_core::checkpoint;
use csfn_core::model::CsfnModel;
use csfn_core::schema::SchemaGraph;
use csfn_core::vocab::Vocabulary;

use crate::error::{AppError, Result};

pub fn save_checkpoint(path: &Path, model: &CsfnModel, vocab: &Vocabulary) -> Result<()> {
    let bytes = checkpoint::encode(model, vocab);
    fs::write(path, bytes).map_err(|e| AppError::io(path, e))
}

pub fn load_checkpoint(path: &Path, schema: &SchemaGraph) -> Result<(CsfnModel, Vocabulary)> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    checkpoint::load_model(&bytes, schema).map_err(AppError::Core)
}

#[cfg(test)]
mod tests {
    use super::*;
    use csfn_core::model::ModelConfig;
    use csfn_core::schema::{build_schema_graph, SchemaDef};

    #[test]
    fn file_round_trip_is_byte_identical() {
        let schema = build_schema_graph(
            &SchemaDef::new(vec!["d".into()], vec![vec!["s".into()]], vec![]).unwrap(),
        )
        .unwrap();
        let vocab = Vocabulary::build(["x"].iter().map(|s| s.to_string()));
        let model = CsfnModel::new(ModelConfig::new(8, 2, 1), &schema, &vocab, 5).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &model, &vocab).unwrap();
        let (loaded, loaded_vocab) = load_checkpoint(&path, &schema).unwrap();
        let path2 = dir.path().join("model2.ckpt");
        save_checkpoint(&path2, &loaded, &loaded_vocab).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }
}

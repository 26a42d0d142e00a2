//! Vocabulary and pretrained-embedding text files.
//!
//! Vocabulary file: one token per line, line number = id, specials first.
//! Embedding file: `token v1 … v_d` per line; tokens absent from the
//! vocabulary are skipped, listed tokens overwrite their random init rows.

use std::fs;
use std::path::Path;

use csfn_core::model::CsfnModel;
use csfn_core::vocab::Vocabulary;

use crate::error::{AppError, Result};

pub fn save_vocab_file(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut out = String::new();
    for token in vocab.tokens() {
        out.push_str(token);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| AppError::io(path, e))
}

pub fn load_vocab_file(path: &Path) -> Result<Vocabulary> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let tokens: Vec<String> = text.lines().map(|l| l.to_string()).collect();
    Vocabulary::from_ordered_tokens(tokens).map_err(AppError::Core)
}

/// Load `token v1 … v_d` lines into the model's token table. Returns the
/// number of rows replaced.
pub fn load_embedding_file(path: &Path, vocab: &Vocabulary, model: &mut CsfnModel) -> Result<usize> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let d = model.cfg.d_model;
    let token_param = model.emb.token;
    let mut loaded = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts
            .next()
            .ok_or_else(|| AppError::data(format!("{}: line {} empty", path.display(), lineno + 1)))?;
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>().map_err(|_| {
                    AppError::data(format!(
                        "{}: line {}: `{p}` is not a number",
                        path.display(),
                        lineno + 1
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != d {
            return Err(AppError::data(format!(
                "{}: line {}: {} values, model dimension is {d}",
                path.display(),
                lineno + 1,
                values.len()
            )));
        }
        let Some(id) = vocab.try_id(token) else { continue };
        let table = &mut model.store.get_mut(token_param).value;
        table.row_mut(id as usize).copy_from_slice(&values);
        loaded += 1;
    }
    Ok(loaded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use csfn_core::model::ModelConfig;
    use csfn_core::schema::{build_schema_graph, SchemaDef};

    fn vocab() -> Vocabulary {
        Vocabulary::build(["alpha", "beta"].iter().map(|s| s.to_string()))
    }

    #[test]
    fn vocab_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = vocab();
        save_vocab_file(&path, &v).unwrap();
        let loaded = load_vocab_file(&path).unwrap();
        assert_eq!(loaded, v);
        // specials occupy the first lines
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("[PAD]\n[UNK]\n[CLS]\n"));
    }

    #[test]
    fn embedding_file_overwrites_known_tokens() {
        let v = vocab();
        let schema = build_schema_graph(
            &SchemaDef::new(vec!["d".into()], vec![vec!["s".into()]], vec![]).unwrap(),
        )
        .unwrap();
        let mut cfg = ModelConfig::new(4, 2, 1);
        cfg.dropout = 0.0;
        let mut model = CsfnModel::new(cfg, &schema, &v, 1).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        fs::write(&path, "alpha 1 2 3 4\nunknown 9 9 9 9\n").unwrap();
        let loaded = load_embedding_file(&path, &v, &mut model).unwrap();
        assert_eq!(loaded, 1);
        let row = model.store.value(model.emb.token).row(v.id("alpha") as usize).to_vec();
        assert_eq!(row, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn embedding_dimension_mismatch_errors() {
        let v = vocab();
        let schema = build_schema_graph(
            &SchemaDef::new(vec!["d".into()], vec![vec!["s".into()]], vec![]).unwrap(),
        )
        .unwrap();
        let mut model = CsfnModel::new(ModelConfig::new(4, 2, 1), &schema, &v, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        fs::write(&path, "alpha 1 2\n").unwrap();
        assert!(load_embedding_file(&path, &v, &mut model).is_err());
    }
}

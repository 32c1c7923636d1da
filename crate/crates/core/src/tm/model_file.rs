//! Versioned JSON model file.
//!
//! The automaton states are stored as base64 of the little-endian `u16`
//! array in `[class][clause][literal]` order; see `docs/formats.md`.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Hyperparams, TaStateMatrix, TmError};

pub const MODEL_FORMAT: &str = "tmforge-model";
pub const MODEL_VERSION: u32 = 1;
const STATE_ENCODING: &str = "u16le-base64";

/// Where an artifact came from; embedded in every file the pipeline writes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
            tool_version: crate::TOOL_VERSION.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub classes: usize,
    pub clauses_per_class: usize,
    pub features: usize,
    pub states_per_action: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperparams: Option<Hyperparams>,
    #[serde(default)]
    pub provenance: Provenance,
    pub state_encoding: String,
    pub states: String,
}

impl ModelFile {
    pub fn from_model(
        model: &TaStateMatrix,
        hyperparams: Option<Hyperparams>,
        provenance: Provenance,
    ) -> Self {
        let bytes: Vec<u8> = model
            .states()
            .iter()
            .flat_map(|s| s.to_le_bytes())
            .collect();
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            classes: model.classes(),
            clauses_per_class: model.clauses_per_class(),
            features: model.features(),
            states_per_action: model.states_per_action(),
            hyperparams,
            provenance,
            state_encoding: STATE_ENCODING.into(),
            states: STANDARD.encode(bytes),
        }
    }

    pub fn to_model(&self) -> Result<TaStateMatrix, TmError> {
        if self.format != MODEL_FORMAT {
            return Err(TmError::Format(format!(
                "unexpected format tag {:?}",
                self.format
            )));
        }
        if self.version != MODEL_VERSION {
            return Err(TmError::Format(format!(
                "unsupported version {}",
                self.version
            )));
        }
        if self.state_encoding != STATE_ENCODING {
            return Err(TmError::Format(format!(
                "unsupported state encoding {:?}",
                self.state_encoding
            )));
        }
        let bytes = STANDARD
            .decode(self.states.as_bytes())
            .map_err(|e| TmError::Format(format!("state payload: {e}")))?;
        if bytes.len() % 2 != 0 {
            return Err(TmError::Format("state payload has odd length".into()));
        }
        let states = bytes
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .collect();
        TaStateMatrix::from_states(
            self.classes,
            self.clauses_per_class,
            self.features,
            self.states_per_action,
            states,
        )
    }
}

pub fn write_model(
    path: &Path,
    model: &TaStateMatrix,
    hyperparams: Option<Hyperparams>,
    provenance: Provenance,
) -> Result<(), TmError> {
    let file = ModelFile::from_model(model, hyperparams, provenance);
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<(TaStateMatrix, ModelFile), TmError> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    let model = file.to_model()?;
    Ok((model, file))
}

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::*;
use crate::tm::{write_model, ModelFile, Provenance, TaStateMatrix, MODEL_FORMAT};

/// A state matrix trained elsewhere. Exactly one of `states` and `actions`
/// is given, indexed `[class][clause][literal]` with literals `x_0..x_{F-1}`
/// followed by their negations. Actions are 1 for include, 0 for exclude and
/// become states `N + 1` and `N`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportFile {
    #[serde(default)]
    pub states_per_action: Option<u32>,
    #[serde(default)]
    pub states: Option<Vec<Vec<Vec<u32>>>>,
    #[serde(default)]
    pub actions: Option<Vec<Vec<Vec<u8>>>>,
}

const DEFAULT_N: u32 = 128;

fn dims<T>(a: &[Vec<Vec<T>>]) -> Result<(usize, usize, usize), PipelineError> {
    let classes = a.len();
    let clauses = a.first().map_or(0, Vec::len);
    let lits = a.first().and_then(|c| c.first()).map_or(0, Vec::len);
    if classes == 0 || clauses == 0 || lits == 0 || !lits.is_multiple_of(2) {
        return Err(PipelineError::Other(format!(
            "import needs a non-empty [class][clause][literal] array with an even literal count, got {classes}x{clauses}x{lits}"
        )));
    }
    for (c, cls) in a.iter().enumerate() {
        if cls.len() != clauses {
            return Err(PipelineError::Other(format!(
                "class {c} has {} clauses, expected {clauses}",
                cls.len()
            )));
        }
        for (j, cl) in cls.iter().enumerate() {
            if cl.len() != lits {
                return Err(PipelineError::Other(format!(
                    "class {c} clause {j} has {} literals, expected {lits}",
                    cl.len()
                )));
            }
        }
    }
    Ok((classes, clauses, lits / 2))
}

/// Builds a state matrix from an import file or from a model file.
pub fn import_states(value: Value) -> Result<TaStateMatrix, PipelineError> {
    if value.get("format").and_then(Value::as_str) == Some(MODEL_FORMAT) {
        let file: ModelFile = serde_json::from_value(value)?;
        return Ok(file.to_model()?);
    }
    let f: ImportFile = serde_json::from_value(value)?;
    let n = f.states_per_action.unwrap_or(DEFAULT_N);
    let (shape, flat): ((usize, usize, usize), Vec<u16>) = match (&f.states, &f.actions) {
        (Some(s), None) => {
            let d = dims(s)?;
            let mut flat = Vec::with_capacity(d.0 * d.1 * 2 * d.2);
            for v in s.iter().flatten().flatten() {
                let st = u16::try_from(*v)
                    .map_err(|_| PipelineError::Other(format!("state {v} out of range")))?;
                flat.push(st);
            }
            (d, flat)
        }
        (None, Some(a)) => {
            let d = dims(a)?;
            let mut flat = Vec::with_capacity(d.0 * d.1 * 2 * d.2);
            for &v in a.iter().flatten().flatten() {
                flat.push(match v {
                    0 => n as u16,
                    1 => n as u16 + 1,
                    other => {
                        return Err(PipelineError::Other(format!(
                            "action {other} is neither 0 nor 1"
                        )))
                    }
                });
            }
            (d, flat)
        }
        _ => {
            return Err(PipelineError::Other(
                "import file needs exactly one of states and actions".into(),
            ))
        }
    };
    Ok(TaStateMatrix::from_states(
        shape.0, shape.1, shape.2, n, flat,
    )?)
}

pub(super) fn run(cfg: &PipelineConfig, path: &Path) -> Result<StageOutcome, PipelineError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Other(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)?;
    let model = import_states(value)?;
    let dest = cfg.output_dir.join(MODEL_FILE);
    write_model(&dest, &model, None, Provenance::new(cfg.hash(), cfg.seed))?;
    Ok(StageOutcome::ok(vec![
        format!(
            "imported {} classes x {} clauses on {} features, {} includes",
            model.classes(),
            model.clauses_per_class(),
            model.features(),
            model.include_count()
        ),
        format!("model written to {}", dest.display()),
    ]))
}

use super::{CorruptionError, CorruptionKind};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

const BUILTIN_224: &str = include_str!("../../data/severity_224.json");

/// Per-kind, per-severity numeric parameters.
///
/// JSON layout: `{"calibration": "...", "params": {"<kind>": [[..], x5]}}`.
/// Every kind in the file must list exactly five parameter rows; kinds
/// absent from an override file fall back to nothing and fail at use.
#[derive(Debug, Clone, Deserialize)]
pub struct SeverityTable {
    pub calibration: String,
    params: BTreeMap<CorruptionKind, Vec<Vec<f64>>>,
}

/// Minimum parameter count per kind.
fn arity(kind: CorruptionKind) -> usize {
    use CorruptionKind::*;
    match kind {
        GaussianNoise | ShotNoise | ImpulseNoise | SpeckleNoise | GaussianBlur | Brightness | Contrast | Pixelate
        | JpegCompression => 1,
        DefocusBlur | MotionBlur | Fog | FrostSubstitute | Saturate => 2,
        GlassBlur | ZoomBlur | ElasticTransform => 3,
        Spatter => 6,
        Snow => 7,
    }
}

impl SeverityTable {
    pub fn builtin() -> &'static SeverityTable {
        static TABLE: OnceLock<SeverityTable> = OnceLock::new();
        TABLE.get_or_init(|| SeverityTable::from_json_str(BUILTIN_224).expect("embedded severity table is valid"))
    }

    pub fn from_json_str(json: &str) -> Result<Self, CorruptionError> {
        let table: SeverityTable = serde_json::from_str(json).map_err(|e| CorruptionError::Table(e.to_string()))?;
        for (kind, rows) in &table.params {
            if rows.len() != 5 {
                return Err(CorruptionError::Table(format!("{kind}: expected 5 severity rows, found {}", rows.len())));
            }
            if let Some(row) = rows.iter().find(|r| r.len() < arity(*kind)) {
                return Err(CorruptionError::Table(format!(
                    "{kind}: expected at least {} parameters per row, found {}",
                    arity(*kind),
                    row.len()
                )));
            }
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorruptionError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| CorruptionError::Table(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json_str(&text)
    }

    pub fn params(&self, kind: CorruptionKind, severity: u8) -> Result<&[f64], CorruptionError> {
        let rows = self
            .params
            .get(&kind)
            .ok_or_else(|| CorruptionError::Table(format!("no parameters for {kind} in `{}`", self.calibration)))?;
        rows.get(severity as usize - 1).map(Vec::as_slice).ok_or(CorruptionError::InvalidSeverity(severity as i64))
    }
}

//! JSON-lines ensemble files: a header line recording how the ensemble was
//! produced, then one scenario per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::random::{PostFilter, SceneConfig};
use crate::error::{Error, Result};
use crate::model::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleHeader {
    pub seed: u64,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SceneConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quotas: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_filter: Option<PostFilter>,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: EnsembleHeader,
}

pub fn write_ensemble<W: Write>(
    mut out: W,
    header: &EnsembleHeader,
    scenarios: &[Scenario<f64>],
) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, &HeaderLine { header: header.clone() })?;
    out.write_all(b"\n")?;
    for s in scenarios {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads an ensemble file. The header line is optional so that hand-written
/// scenario lists load too.
pub fn read_ensemble<R: BufRead>(input: R) -> Result<(Option<EnsembleHeader>, Vec<Scenario<f64>>)> {
    let mut header = None;
    let mut scenarios = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidConfig(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            if let Ok(h) = serde_json::from_str::<HeaderLine>(&line) {
                header = Some(h.header);
                continue;
            }
        }
        let s: Scenario<f64> =
            serde_json::from_str(&line).map_err(|e| Error::InvalidConfig(format!("line {}: {e}", i + 1)))?;
        scenarios.push(s);
    }
    Ok((header, scenarios))
}

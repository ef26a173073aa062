//! Text checkpoint format, version 1.
//!
//! ```text
//! importcast-lstm-checkpoint 1
//! candidate_mode paper-sigmoid
//! hidden_sizes 16 16 16
//! layer0.W_f 16 1 <16 values>
//! ...
//! head.w 1 16 <16 values>
//! head.b 1 1 <1 value>
//! ```
//!
//! One line per array, in canonical block order: name, rows, cols, then the
//! row-major values in shortest round-trip exponent notation. Output is
//! byte-stable for identical parameters.

use std::fmt::Write as _;

use thiserror::Error;

use super::{CandidateMode, LstmParams, TrainedModel};

pub const CHECKPOINT_MAGIC: &str = "importcast-lstm-checkpoint 1";

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("checkpoint line {line}: {message}")]
    Malformed { line: usize, message: String },
}

pub fn write_checkpoint(model: &TrainedModel) -> String {
    let params = &model.params;
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(out, "candidate_mode {}", model.candidate_mode);
    let sizes: Vec<String> = params.hidden_sizes().iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "hidden_sizes {}", sizes.join(" "));
    for block in params.blocks() {
        let _ = write!(out, "{} {} {}", block.name, block.rows, block.cols);
        for v in block.data {
            let _ = write!(out, " {v:e}");
        }
        out.push('\n');
    }
    out
}

pub fn read_checkpoint(text: &str) -> Result<TrainedModel, CheckpointError> {
    let malformed = |line: usize, message: String| CheckpointError::Malformed { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| malformed(0, format!("unexpected end of file, expected {what}")))
    };

    let (n, magic) = next("header")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(malformed(n, format!("unsupported header `{magic}`")));
    }

    let (n, mode_line) = next("candidate_mode")?;
    let candidate_mode: CandidateMode = mode_line
        .strip_prefix("candidate_mode ")
        .ok_or_else(|| malformed(n, "expected candidate_mode".into()))?
        .parse()
        .map_err(|e| malformed(n, e))?;

    let (n, sizes_line) = next("hidden_sizes")?;
    let sizes = sizes_line
        .strip_prefix("hidden_sizes ")
        .ok_or_else(|| malformed(n, "expected hidden_sizes".into()))?
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| malformed(n, e.to_string()))?;
    let mut params = LstmParams::zeros(&sizes).map_err(|e| malformed(n, e.to_string()))?;

    let expected: Vec<(String, usize, usize)> = params
        .blocks()
        .into_iter()
        .map(|b| (b.name, b.rows, b.cols))
        .collect();
    for ((name, rows, cols), target) in expected.into_iter().zip(params.blocks_mut()) {
        let (n, line) = next(&name)?;
        let mut fields = line.split_whitespace();
        let header: Vec<&str> = fields.by_ref().take(3).collect();
        let shape = format!("{rows} {cols}");
        if header.len() != 3 || header[0] != name || format!("{} {}", header[1], header[2]) != shape {
            return Err(malformed(
                n,
                format!("expected `{name} {shape}`, found `{}`", header.join(" ")),
            ));
        }
        let values = fields
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| malformed(n, e.to_string()))?;
        if values.len() != target.len() {
            return Err(malformed(
                n,
                format!("{name}: expected {} values, found {}", target.len(), values.len()),
            ));
        }
        target.copy_from_slice(&values);
    }
    if let Some((n, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(malformed(n, format!("trailing content `{extra}`")));
    }
    Ok(TrainedModel {
        params,
        candidate_mode,
    })
}

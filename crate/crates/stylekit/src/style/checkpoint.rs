//! Bit-exact model persistence.
//!
//! A checkpoint is a plain text file:
//!
//! ```text
//! stylekit-checkpoint v1
//! step 120
//! param conv0.weight 4 2 1 3 3
//! bfa2e8b5c3d10000 3f91a2b3c4d50000 …
//! param conv0.bias 1 2
//! 0000000000000000 0000000000000000
//! end
//! ```
//!
//! Each `param` header gives the name, the rank, and the dimensions; the
//! following lines carry the row-major values as 16-digit hexadecimal
//! `f64` bit patterns, eight per line. Hex bits — not decimal rendering —
//! are what makes the round trip exact: every value, including negative
//! zero and subnormals, reloads to the identical bit pattern. Parameters
//! are written in name order, so saving the same model twice produces
//! byte-identical files.
//!
//! Loading validates the file against the configuration's expected
//! parameter set: unknown names, missing names, and shape disagreements
//! are all distinct errors, so a checkpoint from a differently sized
//! model is rejected rather than silently truncated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::model::{StyleConfig, StyleModel};
use super::tensor::Tensor;
use super::StyleError;

/// First line of every checkpoint this version reads and writes.
pub const CHECKPOINT_HEADER: &str = "stylekit-checkpoint v1";

const VALUES_PER_LINE: usize = 8;

/// Serializes the model and the step counter.
pub fn save_checkpoint(model: &StyleModel, step: u64, path: &Path) -> Result<(), StyleError> {
    let mut out = String::new();
    out.push_str(CHECKPOINT_HEADER);
    out.push('\n');
    let _ = writeln!(out, "step {step}");
    for (name, tensor) in model.params() {
        let dims: Vec<String> = tensor.shape().iter().map(|d| d.to_string()).collect();
        let _ = writeln!(out, "param {name} {} {}", tensor.shape().len(), dims.join(" "));
        for chunk in tensor.data().chunks(VALUES_PER_LINE) {
            let line: Vec<String> =
                chunk.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out.push_str("end\n");
    fs::write(path, out).map_err(|source| StyleError::Io { path: path.to_path_buf(), source })
}

/// Restores a model and its step counter from a checkpoint.
///
/// The configuration determines the expected parameter names and shapes;
/// it must match the one the checkpoint was saved under.
pub fn load_checkpoint(cfg: &StyleConfig, path: &Path) -> Result<(StyleModel, u64), StyleError> {
    cfg.validate()?;
    let content = fs::read_to_string(path)
        .map_err(|source| StyleError::Io { path: path.to_path_buf(), source })?;
    let parse_err = |line: usize, message: String| StyleError::CheckpointParse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let lines: Vec<&str> = content.lines().collect();
    let mut pos = 0usize;
    let mut next = |expectation: &str| -> Result<(usize, &str), StyleError> {
        let line = lines
            .get(pos)
            .ok_or_else(|| parse_err(pos + 1, format!("file ends where {expectation} was expected")))?;
        pos += 1;
        Ok((pos, line))
    };

    let (n, header) = next("the header")?;
    if header != CHECKPOINT_HEADER {
        return Err(parse_err(n, format!("unrecognized header {header:?}")));
    }
    let (n, step_line) = next("the step counter")?;
    let step = match step_line.strip_prefix("step ") {
        Some(rest) => rest
            .trim()
            .parse::<u64>()
            .map_err(|_| parse_err(n, format!("bad step counter {rest:?}")))?,
        None => return Err(parse_err(n, format!("expected `step N`, got {step_line:?}"))),
    };

    let mut params: BTreeMap<String, Tensor> = BTreeMap::new();
    loop {
        let (n, line) = next("`param` or `end`")?;
        if line == "end" {
            break;
        }
        let mut fields = line.split_whitespace();
        if fields.next() != Some("param") {
            return Err(parse_err(n, format!("expected `param` or `end`, got {line:?}")));
        }
        let name = fields
            .next()
            .ok_or_else(|| parse_err(n, "param line is missing a name".into()))?
            .to_string();
        let rank: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| parse_err(n, "param line is missing a rank".into()))?;
        let shape: Vec<usize> = fields
            .map(|f| f.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(n, "param dimensions must be integers".into()))?;
        if shape.len() != rank {
            return Err(parse_err(
                n,
                format!("rank {rank} disagrees with {} listed dimensions", shape.len()),
            ));
        }
        if params.contains_key(&name) {
            return Err(parse_err(n, format!("duplicate parameter {name}")));
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        while data.len() < numel {
            let (vn, value_line) = next("parameter values")?;
            for token in value_line.split_whitespace() {
                if data.len() == numel {
                    return Err(parse_err(vn, format!("too many values for {name}")));
                }
                let bits = u64::from_str_radix(token, 16)
                    .map_err(|_| parse_err(vn, format!("bad value {token:?}")))?;
                data.push(f64::from_bits(bits));
            }
        }
        params.insert(name, Tensor::new(&shape, data));
    }
    if lines[pos..].iter().any(|l| !l.trim().is_empty()) {
        return Err(parse_err(pos + 1, "content after `end`".into()));
    }

    let expected = StyleModel::expected_shapes(cfg);
    for name in params.keys() {
        if !expected.contains_key(name) {
            return Err(StyleError::UnknownParam { name: name.clone() });
        }
    }
    for (name, shape) in &expected {
        match params.get(name) {
            None => return Err(StyleError::MissingParam { name: name.clone() }),
            Some(tensor) if tensor.shape() != shape.as_slice() => {
                return Err(StyleError::ShapeMismatch {
                    name: name.clone(),
                    expected: shape.clone(),
                    got: tensor.shape().to_vec(),
                });
            }
            Some(_) => {}
        }
    }
    Ok((StyleModel::from_parts(cfg.clone(), params), step))
}

//! Plain-text checkpoint format.
//!
//! ```text
//! FDQN 1 <algo> 36,128,64,10
//! <array-name> <length> <v0> <v1> ...
//! ```
//!
//! Values use 17 significant digits, so every `f64` survives a round trip and
//! re-saving a loaded checkpoint reproduces the file byte for byte.

use std::fmt::Write;

use super::{Dense, NetworkParams, Topology, HIDDEN1, HIDDEN2, NUM_ACTIONS, STATE_DIM};
use crate::{Error, Result};

pub const MAGIC: &str = "FDQN";
pub const VERSION: u32 = 1;

fn dims_label() -> String {
    format!("{STATE_DIM},{HIDDEN1},{HIDDEN2},{NUM_ACTIONS}")
}

pub fn write_checkpoint(params: &NetworkParams, algo: &str) -> String {
    let mut out = format!("{MAGIC} {VERSION} {algo} {}\n", dims_label());
    for (name, values) in params.arrays() {
        write!(out, "{name} {}", values.len()).unwrap();
        for v in values {
            write!(out, " {v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses a checkpoint; `topology_of` maps the algorithm label to its topology.
pub fn read_checkpoint<F>(text: &str, topology_of: F) -> Result<(String, NetworkParams)>
where
    F: FnOnce(&str) -> Result<Topology>,
{
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Checkpoint("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    match fields.as_slice() {
        [MAGIC, version, algo, dims] => {
            if *version != VERSION.to_string() {
                return Err(Error::Checkpoint(format!("unsupported version {version}")));
            }
            if *dims != dims_label() {
                return Err(Error::Checkpoint(format!(
                    "topology dims {dims}, expected {}",
                    dims_label()
                )));
            }
            let topology = topology_of(algo)?;
            let mut layers = Vec::new();
            for &(name, inputs, outputs) in topology.layer_shapes() {
                let weights = read_array(&mut lines, &format!("{name}.weight"), inputs * outputs)?;
                let bias = read_array(&mut lines, &format!("{name}.bias"), outputs)?;
                layers.push(Dense {
                    inputs,
                    outputs,
                    weights,
                    bias,
                });
            }
            if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
                let name = extra.split_whitespace().next().unwrap_or("");
                return Err(Error::Checkpoint(format!("unexpected trailing array {name}")));
            }
            let params = NetworkParams::from_layers(topology, layers).map_err(|e| Error::Checkpoint(e.to_string()))?;
            Ok((algo.to_string(), params))
        }
        _ => Err(Error::Checkpoint(format!("bad header {header:?}"))),
    }
}

fn read_array<'a>(lines: &mut impl Iterator<Item = &'a str>, name: &str, len: usize) -> Result<Vec<f64>> {
    let line = lines
        .next()
        .ok_or_else(|| Error::Checkpoint(format!("missing array {name}")))?;
    let mut tokens = line.split_whitespace();
    let found = tokens.next().unwrap_or("");
    if found != name {
        return Err(Error::Checkpoint(format!("expected array {name}, found {found:?}")));
    }
    let declared: usize = tokens
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Checkpoint(format!("array {name}: bad length")))?;
    if declared != len {
        return Err(Error::Checkpoint(format!(
            "array {name}: length {declared}, expected {len}"
        )));
    }
    let values = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Checkpoint(format!("array {name}: bad value {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != len {
        return Err(Error::Checkpoint(format!(
            "array {name}: {} values, expected {len}",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Checkpoint(format!("array {name}: non-finite value {v}")));
    }
    Ok(values)
}

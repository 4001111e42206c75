//! Grid files: `[id]` block headers followed by `key = value` lines.
//! `#` starts a comment.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use super::config::{format_float, DimSpec, SweepConfig};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::nn::ActivationKind;

/// The shipped nine-row grid.
pub const DEFAULT_GRID: &str = include_str!("../../grids/table2.grid");

const REQUIRED: [&str; 7] = [
    "SqLn", "EmSz", "Lyrs", "OutDim", "ActFun", "DropOut", "BchSz",
];
const OPTIONAL: [&str; 4] = ["seed", "min_epochs", "max_epochs", "lr"];

fn field<T: std::str::FromStr>(block: &Block, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match block.values.get(key) {
        None => Ok(None),
        Some((line, v)) => v
            .parse()
            .map(Some)
            .map_err(|e| Error::parse("grid", *line, format!("{key} = {v}: {e}"))),
    }
}

struct Block {
    id: String,
    line: usize,
    values: BTreeMap<String, (usize, String)>,
}

impl Block {
    fn into_config(self) -> Result<SweepConfig> {
        for key in REQUIRED {
            if !self.values.contains_key(key) {
                return Err(Error::parse(
                    "grid",
                    self.line,
                    format!("[{}] is missing {key}", self.id),
                ));
            }
        }
        let dim = |k: &str| -> Result<DimSpec> {
            let (line, v) = &self.values[k];
            v.parse()
                .map_err(|e| Error::parse("grid", *line, format!("{k} = {v}: {e}")))
        };
        let act = {
            let (line, v) = &self.values["ActFun"];
            v.parse::<ActivationKind>()
                .map_err(|e| Error::parse("grid", *line, format!("ActFun = {v}: {e}")))?
        };
        let mut c = SweepConfig::new(
            &self.id,
            dim("SqLn")?,
            field(&self, "EmSz")?.expect("required"),
            field(&self, "Lyrs")?.expect("required"),
            dim("OutDim")?,
            act,
            field(&self, "DropOut")?.expect("required"),
            field(&self, "BchSz")?.expect("required"),
        );
        if let Some(v) = field(&self, "seed")? {
            c.seed = v;
        }
        if let Some(v) = field(&self, "min_epochs")? {
            c.min_epochs = v;
        }
        if let Some(v) = field(&self, "max_epochs")? {
            c.max_epochs = v;
        }
        if let Some(v) = field(&self, "lr")? {
            c.lr = v;
        }
        Ok(c)
    }
}

/// Parses a grid. Only syntax and value types are checked here; semantic
/// validation happens per configuration when it is trained.
pub fn parse_grid(text: &str) -> Result<Vec<SweepConfig>> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let id = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::parse("grid", n, "unterminated block header"))?
                .trim();
            if id.is_empty() {
                return Err(Error::parse("grid", n, "empty block id"));
            }
            if !ids.insert(id.to_string()) {
                return Err(Error::parse("grid", n, format!("duplicate config id {id}")));
            }
            blocks.push(Block {
                id: id.to_string(),
                line: n,
                values: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::parse("grid", n, format!("expected `key = value`, got {line:?}"))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !REQUIRED.contains(&key) && !OPTIONAL.contains(&key) {
            return Err(Error::parse("grid", n, format!("unknown key {key}")));
        }
        let block = blocks
            .last_mut()
            .ok_or_else(|| Error::parse("grid", n, "key outside any [block]"))?;
        if block
            .values
            .insert(key.to_string(), (n, value.to_string()))
            .is_some()
        {
            return Err(Error::parse("grid", n, format!("{key} given twice")));
        }
    }
    blocks.into_iter().map(Block::into_config).collect()
}

/// Writes `configs` in the form [`parse_grid`] reads.
pub fn format_grid(configs: &[SweepConfig]) -> String {
    let mut out = String::new();
    for (i, c) in configs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("[{}]\n", c.id));
        for (k, v) in c.columns() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push_str(&format!("seed = {}\n", c.seed));
        out.push_str(&format!("min_epochs = {}\n", c.min_epochs));
        out.push_str(&format!("max_epochs = {}\n", c.max_epochs));
        out.push_str(&format!("lr = {}\n", format_float(c.lr)));
    }
    out
}

pub fn load_grid(path: &Path) -> Result<Vec<SweepConfig>> {
    parse_grid(&fsutil::read_to_string(path)?)
}

pub fn default_grid() -> Vec<SweepConfig> {
    parse_grid(DEFAULT_GRID).expect("shipped grid parses")
}

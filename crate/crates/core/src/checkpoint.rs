//! Plain-text parameter checkpoints: a header line, a `key value` config
//! block closed by `end`, then named flat arrays written as `name length`
//! followed by the values with 17 significant digits.

use std::fmt::Write as _;

use crate::error::{Error, Result};

const VALUES_PER_LINE: usize = 8;

pub fn write_checkpoint(
    header: &str,
    config: &[(&str, String)],
    tensors: &[(String, &[f64])],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{header}");
    for (k, v) in config {
        let _ = writeln!(out, "{k} {v}");
    }
    out.push_str("end\n");
    for (name, values) in tensors {
        let _ = writeln!(out, "{name} {}", values.len());
        for chunk in values.chunks(VALUES_PER_LINE) {
            let line: Vec<String> = chunk.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCheckpoint {
    pub config: Vec<(String, String)>,
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl RawCheckpoint {
    pub fn config_value(&self, key: &str) -> Result<&str> {
        self.config
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::invalid(format!("checkpoint config lacks `{key}`")))
    }

    pub fn config_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.config_value(key)?;
        v.parse()
            .map_err(|_| Error::invalid(format!("checkpoint config `{key}` has bad value `{v}`")))
    }

    /// Moves arrays into `tensors`, checking names and lengths in order.
    pub fn fill(&self, tensors: Vec<(String, &mut [f64])>) -> Result<()> {
        if tensors.len() != self.arrays.len() {
            return Err(Error::shape(
                "checkpoint arrays",
                tensors.len(),
                self.arrays.len(),
            ));
        }
        for ((name, dst), (src_name, src)) in tensors.into_iter().zip(&self.arrays) {
            if &name != src_name {
                return Err(Error::invalid(format!(
                    "checkpoint array `{src_name}` where `{name}` was expected"
                )));
            }
            if dst.len() != src.len() {
                return Err(Error::shape(name, dst.len(), src.len()));
            }
            dst.copy_from_slice(src);
        }
        Ok(())
    }
}

pub fn read_checkpoint(text: &str, header: &str) -> Result<RawCheckpoint> {
    const WHAT: &str = "checkpoint";
    let mut lines = text.lines().enumerate();
    let found = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    if found != header {
        let same_family = found.split_whitespace().next() == header.split_whitespace().next();
        return if same_family {
            Err(Error::Version {
                expected: header.to_string(),
                found: found.to_string(),
            })
        } else {
            Err(Error::parse(
                WHAT,
                1,
                format!("expected header `{header}`, found `{found}`"),
            ))
        };
    }

    let mut config = Vec::new();
    let mut body_start = None;
    for (i, line) in lines.by_ref() {
        let line = line.trim();
        if line == "end" {
            body_start = Some(i + 1);
            break;
        }
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once(' ')
            .ok_or_else(|| Error::parse(WHAT, i + 1, "expected `key value`"))?;
        config.push((k.to_string(), v.trim().to_string()));
    }
    if body_start.is_none() {
        return Err(Error::parse(
            WHAT,
            text.lines().count(),
            "missing `end` of config block",
        ));
    }

    let mut arrays = Vec::new();
    let mut tokens = lines.flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)));
    while let Some((lineno, name)) = tokens.next() {
        let (_, len) = tokens
            .next()
            .ok_or_else(|| Error::parse(WHAT, lineno, format!("array `{name}` lacks a length")))?;
        let len: usize = len
            .parse()
            .map_err(|_| Error::parse(WHAT, lineno, format!("bad length `{len}` for `{name}`")))?;
        let mut values = Vec::with_capacity(len.min(1 << 20));
        for _ in 0..len {
            let (l, tok) = tokens.next().ok_or_else(|| {
                Error::parse(WHAT, lineno, format!("array `{name}` is truncated"))
            })?;
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(WHAT, l, format!("bad value `{tok}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(
                    WHAT,
                    l,
                    format!("non-finite value in `{name}`"),
                ));
            }
            values.push(v);
        }
        arrays.push((name.to_string(), values));
    }
    Ok(RawCheckpoint { config, arrays })
}

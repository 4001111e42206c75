use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Provenance {
    #[default]
    Parsed,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub file_id: String,
    /// Path of the op-code file, relative to the manifest's directory.
    pub path: PathBuf,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusManifest {
    pub records: Vec<ManifestRecord>,
    pub provenance: Provenance,
}

const WHAT: &str = "manifest";

impl CorpusManifest {
    /// `file_id<TAB>relative_path<TAB>label` per line, preceded by a
    /// `# provenance: ...` comment.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let prov = match self.provenance {
            Provenance::Parsed => "parsed",
            Provenance::Synthetic => "synthetic",
        };
        let _ = writeln!(out, "# provenance: {prov}");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}",
                r.file_id,
                r.path.display(),
                r.label.as_u8()
            );
        }
        out
    }

    /// Parses manifest text. Blank lines and `#` comments are ignored, except
    /// for the provenance comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut manifest = CorpusManifest::default();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(p) = comment.trim().strip_prefix("provenance:") {
                    manifest.provenance = match p.trim() {
                        "parsed" => Provenance::Parsed,
                        "synthetic" => Provenance::Synthetic,
                        other => {
                            return Err(Error::parse(
                                WHAT,
                                lineno,
                                format!("unknown provenance `{other}`"),
                            ))
                        }
                    };
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [file_id, path, label] = fields.as_slice() else {
                return Err(Error::parse(
                    WHAT,
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            };
            if file_id.is_empty() || path.is_empty() {
                return Err(Error::parse(WHAT, lineno, "empty file_id or path"));
            }
            let label = match label.trim() {
                "0" => Label::Benign,
                "1" => Label::Malicious,
                other => {
                    return Err(Error::parse(
                        WHAT,
                        lineno,
                        format!("label must be 0 or 1, got `{other}`"),
                    ))
                }
            };
            if !seen.insert(file_id.to_string()) {
                return Err(Error::parse(
                    WHAT,
                    lineno,
                    format!("duplicate file_id `{file_id}`"),
                ));
            }
            manifest.records.push(ManifestRecord {
                file_id: file_id.to_string(),
                path: PathBuf::from(path),
                label,
            });
        }
        Ok(manifest)
    }
}

/// Loads a manifest and checks that every referenced op-code file exists
/// relative to the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<CorpusManifest> {
    let manifest = CorpusManifest::parse(&fsutil::read_to_string(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for r in &manifest.records {
        let p = base.join(&r.path);
        std::fs::File::open(&p).map_err(|e| Error::io(p, e))?;
    }
    Ok(manifest)
}

pub fn save_manifest(manifest: &CorpusManifest, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, manifest.to_text())
}

/// Op-code files hold one mnemonic per line.
pub fn parse_opcode_text(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

pub fn read_opcode_file(path: &Path) -> Result<Vec<String>> {
    Ok(parse_opcode_text(&fsutil::read_to_string(path)?))
}

pub fn write_opcode_file<S: AsRef<str>>(path: &Path, mnemonics: &[S]) -> Result<()> {
    let mut out = String::with_capacity(mnemonics.len() * 5);
    for m in mnemonics {
        out.push_str(m.as_ref());
        out.push('\n');
    }
    fsutil::write_atomic(path, out)
}

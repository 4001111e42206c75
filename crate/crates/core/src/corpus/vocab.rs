use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::corpus::{Code, PAD};
use crate::error::{Error, Result};

/// Bijection between op-code mnemonics and indices `1..=size`.
///
/// Index 0 is reserved for padding and `size + 1` for mnemonics that were not
/// seen when the vocabulary was built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, Code>,
    // position i holds the mnemonic of index i + 1
    mnemonics: Vec<String>,
}

/// Output of [`Vocabulary::encode`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoded {
    pub codes: Vec<Code>,
    pub unknown: usize,
}

impl Vocabulary {
    /// Builds a vocabulary from parsed mnemonic lists. Distinct mnemonics are
    /// sorted lexicographically and numbered from 1, so input order does not
    /// matter.
    pub fn build<S: AsRef<str>>(sequences: &[Vec<S>]) -> Result<Self> {
        let distinct: BTreeSet<&str> = sequences
            .iter()
            .flat_map(|s| s.iter().map(AsRef::as_ref))
            .collect();
        if distinct.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self::from_sorted(
            distinct.into_iter().map(str::to_owned).collect(),
        ))
    }

    fn from_sorted(mnemonics: Vec<String>) -> Self {
        let index = mnemonics
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i as Code + 1))
            .collect();
        Vocabulary { index, mnemonics }
    }

    pub fn size(&self) -> usize {
        self.mnemonics.len()
    }

    pub fn unk(&self) -> Code {
        self.size() as Code + 1
    }

    pub fn get(&self, mnemonic: &str) -> Option<Code> {
        self.index.get(mnemonic).copied()
    }

    pub fn mnemonic(&self, code: Code) -> Option<&str> {
        if code == PAD {
            return None;
        }
        self.mnemonics.get(code as usize - 1).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Code)> {
        self.mnemonics
            .iter()
            .enumerate()
            .map(|(i, m)| (m.as_str(), i as Code + 1))
    }

    /// Maps mnemonics to indices; anything absent maps to [`Vocabulary::unk`].
    pub fn encode<S: AsRef<str>>(&self, mnemonics: &[S]) -> Encoded {
        let mut unknown = 0;
        let codes = mnemonics
            .iter()
            .map(|m| {
                self.get(m.as_ref()).unwrap_or_else(|| {
                    unknown += 1;
                    self.unk()
                })
            })
            .collect();
        Encoded { codes, unknown }
    }

    /// Inverse of [`Vocabulary::encode`]; PAD and UNK decode to `None`.
    pub fn decode(&self, codes: &[Code]) -> Vec<Option<&str>> {
        codes.iter().map(|&c| self.mnemonic(c)).collect()
    }

    /// Serialized form: a `#pad=0 unk=N` header, then `mnemonic<TAB>index`
    /// lines sorted by index.
    pub fn to_text(&self) -> String {
        let mut out = format!("#pad={PAD} unk={}\n", self.unk());
        for (m, i) in self.iter() {
            let _ = writeln!(out, "{m}\t{i}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        const WHAT: &str = "vocabulary";
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(WHAT, 1, "missing header"))?;
        let unk = parse_header(header).ok_or_else(|| {
            Error::parse(
                WHAT,
                1,
                format!("expected `#pad=0 unk=<n>`, got `{header}`"),
            )
        })?;

        let mut mnemonics = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            if line.is_empty() {
                continue;
            }
            let (m, idx) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(WHAT, lineno, "expected `mnemonic<TAB>index`"))?;
            let idx: Code = idx
                .trim()
                .parse()
                .map_err(|_| Error::parse(WHAT, lineno, format!("bad index `{idx}`")))?;
            if m.is_empty() || m.contains(char::is_whitespace) {
                return Err(Error::parse(WHAT, lineno, format!("bad mnemonic `{m}`")));
            }
            if idx as usize != mnemonics.len() + 1 {
                return Err(Error::parse(
                    WHAT,
                    lineno,
                    format!(
                        "index {idx} breaks contiguity (expected {})",
                        mnemonics.len() + 1
                    ),
                ));
            }
            if mnemonics
                .last()
                .is_some_and(|prev: &String| prev.as_str() >= m)
            {
                return Err(Error::parse(WHAT, lineno, format!("`{m}` is out of order")));
            }
            mnemonics.push(m.to_owned());
        }
        if mnemonics.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if unk as usize != mnemonics.len() + 1 {
            return Err(Error::parse(
                WHAT,
                1,
                format!("header unk={unk} but {} entries", mnemonics.len()),
            ));
        }
        Ok(Self::from_sorted(mnemonics))
    }
}

fn parse_header(line: &str) -> Option<Code> {
    let rest = line.strip_prefix('#')?;
    let mut parts = rest.split_whitespace();
    if parts.next()? != "pad=0" {
        return None;
    }
    let unk = parts.next()?.strip_prefix("unk=")?.parse().ok()?;
    parts.next().is_none().then_some(unk)
}

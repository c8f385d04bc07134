//! Finitely presented groups: words, triangle rotation groups, coset
//! enumeration, and subgroup relator files.
//!
//! Generators are numbered from 1 in the textual form (`1 = α`, `2 = β`,
//! `3 = γ` for triangle rotation groups) with negative integers denoting
//! inverses. Internally a [`Word`] stores exactly that signed form.

mod coset;
mod search;

pub use coset::{todd_coxeter, CosetTable};
pub use search::{low_index_normal_search, NormalSubgroup, SearchConfig};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FpGroupError {
    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),
    #[error("coset limit exceeded: {live} live cosets, limit {limit}")]
    CosetLimitExceeded { live: usize, limit: usize },
    #[error("coset table failed verification: {0}")]
    MalformedTable(String),
    #[error("search budget exceeded: {0}")]
    SearchBudgetExceeded(String),
    #[error("relator file, line {line}: {msg}")]
    RelatorFile { line: usize, msg: String },
    #[error("subgroup {label:?}: enumeration gave index {actual}, expected {expected}")]
    IndexMismatch { label: String, expected: usize, actual: usize },
}

/// A word in the free group: signed 1-based generator letters, e.g.
/// `[3, 3, -1]` for `γγα⁻¹`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<i32>);

impl Word {
    pub fn new(letters: Vec<i32>) -> Self {
        Word(letters)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Cancels adjacent `x · x⁻¹` pairs until none remain.
    pub fn free_reduce(&self) -> Word {
        let mut out: Vec<i32> = Vec::with_capacity(self.0.len());
        for &l in &self.0 {
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    /// Free reduction followed by cancellation across the word's ends, so the
    /// result is a shortest representative of the conjugacy class.
    pub fn cyclic_reduce(&self) -> Word {
        let mut w = self.free_reduce().0;
        while w.len() >= 2 && w[0] == -w[w.len() - 1] {
            w.pop();
            w.remove(0);
        }
        Word(w)
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|&l| -l).collect())
    }

    /// Largest generator index referenced (0 for the empty word).
    pub fn max_gen(&self) -> usize {
        self.0.iter().map(|&l| l.unsigned_abs() as usize).max().unwrap_or(0)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word{:?}", self.0)
    }
}

/// A finite presentation `⟨ g_1 … g_n | r_1 … r_m ⟩`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupPresentation {
    pub n_gens: usize,
    pub relators: Vec<Word>,
}

impl GroupPresentation {
    pub fn new(n_gens: usize, relators: Vec<Word>) -> Result<Self, FpGroupError> {
        if n_gens == 0 {
            return Err(FpGroupError::InvalidPresentation("no generators".into()));
        }
        for r in &relators {
            if r.0.iter().any(|&l| l == 0) || r.max_gen() > n_gens {
                return Err(FpGroupError::InvalidPresentation(format!(
                    "relator {r:?} references generators outside 1..={n_gens}"
                )));
            }
        }
        Ok(GroupPresentation { n_gens, relators })
    }

    /// Rotation subgroup of the `(p, q, 2)` triangle group:
    /// `Δ⁺ = ⟨ α β γ | α² = β^q = γ^p = αβγ = e ⟩` with `1 = α`, `2 = β`,
    /// `3 = γ`.
    pub fn triangle_rotation(p: u32, q: u32) -> Result<Self, FpGroupError> {
        if p < 2 || q < 2 {
            return Err(FpGroupError::InvalidPresentation(format!(
                "triangle group requires p, q >= 2, got ({p}, {q})"
            )));
        }
        let relators = vec![
            Word(vec![1, 1]),
            Word(vec![2; q as usize]),
            Word(vec![3; p as usize]),
            Word(vec![1, 2, 3]),
        ];
        Ok(GroupPresentation { n_gens: 3, relators })
    }

    /// `(p−2)(q−2) > 4`, the condition for the `{p,q}` tessellation to live
    /// on the hyperbolic plane.
    pub fn is_hyperbolic(p: u32, q: u32) -> bool {
        (p.saturating_sub(2)) * (q.saturating_sub(2)) > 4
    }
}

/// One subgroup relator file: a normal subgroup of `Δ⁺(p, 3, 2)` given as the
/// normal closure of `relators`, with the index the file claims it has.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubgroupFile {
    pub p: u32,
    pub q: u32,
    pub label: String,
    pub expected_index: usize,
    pub relators: Vec<Word>,
}

/// Parses the relator file format:
///
/// ```text
/// group 8 3
/// subgroup H16 48
/// 3 3 1 -2 ...        # one relator per line, 1=α 2=β 3=γ, negative = inverse
/// ```
pub fn parse_relator_file(text: &str) -> Result<SubgroupFile, FpGroupError> {
    let mut p = None;
    let mut header: Option<(String, usize)> = None;
    let mut relators = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| FpGroupError::RelatorFile { line: idx + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields[0] {
            "group" => {
                if fields.len() != 3 {
                    return Err(err("expected `group p q`".into()));
                }
                let pv: u32 = fields[1].parse().map_err(|e| err(format!("bad p: {e}")))?;
                let qv: u32 = fields[2].parse().map_err(|e| err(format!("bad q: {e}")))?;
                p = Some((pv, qv));
            }
            "subgroup" => {
                if fields.len() != 3 {
                    return Err(err("expected `subgroup <label> <index>`".into()));
                }
                let n: usize = fields[2].parse().map_err(|e| err(format!("bad index: {e}")))?;
                header = Some((fields[1].to_string(), n));
            }
            _ => {
                let mut letters = Vec::with_capacity(fields.len());
                for f in fields {
                    let l: i32 = f.parse().map_err(|e| err(format!("bad letter {f:?}: {e}")))?;
                    if l == 0 || l.unsigned_abs() > 3 {
                        return Err(err(format!("letter {l} outside ±1..±3")));
                    }
                    letters.push(l);
                }
                relators.push(Word(letters));
            }
        }
    }
    let (p, q) = p.ok_or(FpGroupError::RelatorFile { line: 0, msg: "missing `group` line".into() })?;
    let (label, expected_index) =
        header.ok_or(FpGroupError::RelatorFile { line: 0, msg: "missing `subgroup` line".into() })?;
    if relators.is_empty() {
        return Err(FpGroupError::RelatorFile { line: 0, msg: "no relators".into() });
    }
    Ok(SubgroupFile { p, q, label, expected_index, relators })
}

pub fn write_relator_file(f: &SubgroupFile) -> String {
    let mut out = String::new();
    out.push_str(&format!("group {} {}\n", f.p, f.q));
    out.push_str(&format!("subgroup {} {}\n", f.label, f.expected_index));
    for r in &f.relators {
        let strs: Vec<String> = r.0.iter().map(|l| l.to_string()).collect();
        out.push_str(&strs.join(" "));
        out.push('\n');
    }
    out
}

/// Enumerates the quotient by a subgroup file's normal closure and checks the
/// index against the file's claim (a collapse to fewer cosets than promised —
/// e.g. an inconsistent relator set crushing everything to the trivial
/// group — is reported rather than silently accepted).
pub fn enumerate_subgroup(
    sub: &SubgroupFile,
    max_cosets: usize,
) -> Result<CosetTable, FpGroupError> {
    let pres = GroupPresentation::triangle_rotation(sub.p, sub.q)?;
    let table = todd_coxeter(&pres, &sub.relators, max_cosets)?;
    if table.n_cosets() != sub.expected_index {
        return Err(FpGroupError::IndexMismatch {
            label: sub.label.clone(),
            expected: sub.expected_index,
            actual: table.n_cosets(),
        });
    }
    Ok(table)
}

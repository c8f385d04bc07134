//! HLT-style Todd–Coxeter coset enumeration over normal closures.
//!
//! `todd_coxeter(pres, extra, limit)` enumerates the cosets of the normal
//! closure `⟨⟨extra⟩⟩` in the presented group, by treating the extra words as
//! additional relators and enumerating the cosets of the trivial subgroup of
//! the quotient. The completed table is therefore the regular action of the
//! quotient group on itself; its rows are the quotient's elements.
//!
//! Coincidences are processed eagerly with a union-find over coset ids, and
//! the final table is renumbered by breadth-first search from coset 0
//! scanning columns in a fixed order, so isomorphic tables compare equal.

use super::{FpGroupError, GroupPresentation, Word};
use serde::{Deserialize, Serialize};

const UNDEF: u32 = u32::MAX;

/// Column index for a signed letter: generator `g` acts via column `2(g−1)`,
/// its inverse via column `2(g−1)+1`.
#[inline]
fn col(letter: i32) -> usize {
    debug_assert!(letter != 0);
    let g = (letter.unsigned_abs() as usize) - 1;
    2 * g + usize::from(letter < 0)
}

#[inline]
fn inv_col(c: usize) -> usize {
    c ^ 1
}

/// A complete, verified coset table: one row per coset, `2 · n_gens` columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetTable {
    n_gens: usize,
    n_cosets: usize,
    flat: Vec<u32>,
}

impl CosetTable {
    pub fn n_gens(&self) -> usize {
        self.n_gens
    }

    pub fn n_cosets(&self) -> usize {
        self.n_cosets
    }

    /// Row-major entries (coset-major; column order g₁, g₁⁻¹, g₂, …).
    pub fn row_major(&self) -> &[u32] {
        &self.flat
    }

    /// Image of `coset` under one signed letter.
    #[inline]
    pub fn act(&self, coset: usize, letter: i32) -> usize {
        self.flat[coset * 2 * self.n_gens + col(letter)] as usize
    }

    /// Image of `coset` under a word, applied left to right.
    pub fn act_word(&self, coset: usize, w: &Word) -> usize {
        w.0.iter().fold(coset, |c, &l| self.act(c, l))
    }

    /// The permutation induced by generator `g` (1-based), as an image array.
    pub fn gen_permutation(&self, g: usize) -> Vec<usize> {
        (0..self.n_cosets).map(|i| self.act(i, g as i32)).collect()
    }

    /// Words carrying coset 0 to each coset, from the canonical BFS tree.
    pub fn bfs_words(&self) -> Vec<Word> {
        let mut words: Vec<Option<Word>> = vec![None; self.n_cosets];
        words[0] = Some(Word(vec![]));
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for c in 0..2 * self.n_gens {
                let j = self.flat[i * 2 * self.n_gens + c] as usize;
                if words[j].is_none() {
                    let letter = (c / 2 + 1) as i32 * if c % 2 == 0 { 1 } else { -1 };
                    let mut w = words[i].clone().unwrap();
                    w.0.push(letter);
                    words[j] = Some(w);
                    queue.push_back(j);
                }
            }
        }
        words.into_iter().map(|w| w.expect("table connected")).collect()
    }

    /// Builds a table from raw row-major entries (2·n_gens columns per
    /// coset), checking shape, inverse-column consistency, and
    /// connectivity.  Relator closure is not checked here; pair with
    /// [`CosetTable::verify`] when a presentation is at hand.
    pub fn from_rows(n_gens: usize, flat: Vec<u32>) -> Result<CosetTable, FpGroupError> {
        let width = 2 * n_gens;
        if width == 0 || flat.len() % width != 0 || flat.is_empty() {
            return Err(FpGroupError::MalformedTable("bad shape".into()));
        }
        let n = flat.len() / width;
        for i in 0..n {
            for c in 0..width {
                let j = flat[i * width + c];
                if j as usize >= n {
                    return Err(FpGroupError::MalformedTable(format!(
                        "entry ({i}, {c}) out of range"
                    )));
                }
                if flat[j as usize * width + inv_col(c)] as usize != i {
                    return Err(FpGroupError::MalformedTable(format!(
                        "columns {c}/{} not mutually inverse at coset {i}",
                        inv_col(c)
                    )));
                }
            }
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = vec![0usize];
        while let Some(i) = queue.pop() {
            for c in 0..width {
                let j = flat[i * width + c] as usize;
                if !seen[j] {
                    seen[j] = true;
                    queue.push(j);
                }
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(FpGroupError::MalformedTable("table not connected".into()));
        }
        Ok(CosetTable { n_gens, n_cosets: n, flat })
    }

    /// Checks completeness, inverse-column consistency, connectivity, and
    /// that every relator (plus any extra words) closes at every coset.
    pub fn verify(
        &self,
        pres: &GroupPresentation,
        extra: &[Word],
    ) -> Result<(), FpGroupError> {
        let n = self.n_cosets;
        let w = 2 * self.n_gens;
        if self.flat.len() != n * w {
            return Err(FpGroupError::MalformedTable("size mismatch".into()));
        }
        for i in 0..n {
            for c in 0..w {
                let j = self.flat[i * w + c];
                if j == UNDEF || j as usize >= n {
                    return Err(FpGroupError::MalformedTable(format!(
                        "entry ({i}, {c}) out of range"
                    )));
                }
                if self.flat[j as usize * w + inv_col(c)] as usize != i {
                    return Err(FpGroupError::MalformedTable(format!(
                        "columns {c}/{} not mutually inverse at coset {i}",
                        inv_col(c)
                    )));
                }
            }
        }
        for r in pres.relators.iter().chain(extra.iter()) {
            for i in 0..n {
                if self.act_word(i, r) != i {
                    return Err(FpGroupError::MalformedTable(format!(
                        "relator {r:?} does not close at coset {i}"
                    )));
                }
            }
        }
        // Connectivity is guaranteed by construction; re-check cheaply.
        let reached = self.bfs_words().len();
        if reached != n {
            return Err(FpGroupError::MalformedTable("table not connected".into()));
        }
        Ok(())
    }
}

/// In-progress enumeration state.
struct Enumerator {
    n_gens: usize,
    flat: Vec<u32>,
    parent: Vec<u32>, // union-find; parent[i] == i for live cosets
    live: usize,
    limit: usize,
    alloc_cap: usize,
    queue: Vec<(u32, u32)>, // pending coincidences
}

impl Enumerator {
    fn new(n_gens: usize, limit: usize) -> Self {
        let mut e = Enumerator {
            n_gens,
            flat: Vec::new(),
            parent: Vec::new(),
            live: 0,
            limit,
            alloc_cap: limit.saturating_mul(4).saturating_add(1024),
            queue: Vec::new(),
        };
        e.alloc();
        e
    }

    fn width(&self) -> usize {
        2 * self.n_gens
    }

    fn alloc(&mut self) -> usize {
        let id = self.parent.len();
        self.parent.push(id as u32);
        self.flat.extend(std::iter::repeat(UNDEF).take(self.width()));
        self.live += 1;
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = self.parent[x as usize];
        }
        x
    }

    fn get(&mut self, i: u32, c: usize) -> u32 {
        let raw = self.flat[i as usize * self.width() + c];
        if raw == UNDEF {
            UNDEF
        } else {
            self.find(raw)
        }
    }

    fn set_pair(&mut self, i: u32, c: usize, j: u32) {
        let w = self.width();
        self.flat[i as usize * w + c] = j;
        self.flat[j as usize * w + inv_col(c)] = i;
    }

    /// Records `i·c = j`, merging cosets if either direction is already set.
    fn deduce(&mut self, i: u32, c: usize, j: u32) {
        let (i, j) = (self.find(i), self.find(j));
        let fwd = self.get(i, c);
        if fwd != UNDEF {
            if fwd != j {
                self.queue.push((fwd, j));
                self.drain_coincidences();
            }
            return;
        }
        let bwd = self.get(j, inv_col(c));
        if bwd != UNDEF {
            if bwd != i {
                self.queue.push((bwd, i));
                self.drain_coincidences();
            }
            // The reciprocal entry exists, so `i·c` is now forced; retry.
            let (i2, j2) = (self.find(i), self.find(j));
            if self.get(i2, c) == UNDEF {
                self.set_pair(i2, c, j2);
            }
            return;
        }
        self.set_pair(i, c, j);
    }

    fn drain_coincidences(&mut self) {
        while let Some((a, b)) = self.queue.pop() {
            let (a, b) = (self.find(a), self.find(b));
            if a == b {
                continue;
            }
            let (keep, gone) = if a < b { (a, b) } else { (b, a) };
            self.parent[gone as usize] = keep;
            self.live -= 1;
            let w = self.width();
            for c in 0..w {
                let t = self.flat[gone as usize * w + c];
                if t == UNDEF {
                    continue;
                }
                let t = self.find(t);
                let k = self.find(keep);
                let existing = self.get(k, c);
                if existing == UNDEF {
                    // Move the edge onto the surviving coset.
                    let back = self.get(t, inv_col(c));
                    if back == UNDEF {
                        self.set_pair(k, c, t);
                    } else if back != k {
                        self.queue.push((back, k));
                        self.set_pair(k, c, t);
                    } else {
                        self.set_pair(k, c, t);
                    }
                } else if existing != t {
                    self.queue.push((existing, t));
                }
            }
        }
    }

    /// Scans relator `r` at coset `i`, defining cosets to fill any gap.
    fn scan_and_fill(&mut self, start: u32, r: &[i32]) -> Result<(), FpGroupError> {
        loop {
            let i = self.find(start);
            let mut f = i;
            let mut fi = 0;
            while fi < r.len() {
                let next = self.get(f, col(r[fi]));
                if next == UNDEF {
                    break;
                }
                f = next;
                fi += 1;
            }
            if fi == r.len() {
                if f != i {
                    self.queue.push((f, i));
                    self.drain_coincidences();
                }
                return Ok(());
            }
            let mut b = i;
            let mut bi = r.len();
            while bi > fi {
                let next = self.get(b, col(-r[bi - 1]));
                if next == UNDEF {
                    break;
                }
                b = next;
                bi -= 1;
            }
            if bi == fi {
                // Scans met head-on: the two ends name the same coset.
                if f != b {
                    self.queue.push((f, b));
                    self.drain_coincidences();
                }
                return Ok(());
            }
            if bi == fi + 1 {
                self.deduce(f, col(r[fi]), b);
                return Ok(());
            }
            // Gap of two or more: define one new coset and rescan.
            self.check_budget()?;
            let fresh = self.alloc() as u32;
            self.deduce(f, col(r[fi]), fresh);
        }
    }

    fn check_budget(&self) -> Result<(), FpGroupError> {
        if self.live >= self.limit || self.parent.len() >= self.alloc_cap {
            Err(FpGroupError::CosetLimitExceeded { live: self.live, limit: self.limit })
        } else {
            Ok(())
        }
    }
}

/// Enumerates the cosets of `⟨⟨extra⟩⟩` in the group given by `pres`,
/// i.e. the elements of the quotient `G / ⟨⟨extra⟩⟩`, failing once more than
/// `max_cosets` cosets are simultaneously live.
pub fn todd_coxeter(
    pres: &GroupPresentation,
    extra: &[Word],
    max_cosets: usize,
) -> Result<CosetTable, FpGroupError> {
    for w in extra {
        if w.0.iter().any(|&l| l == 0) || w.max_gen() > pres.n_gens {
            return Err(FpGroupError::InvalidPresentation(format!(
                "extra relator {w:?} references generators outside 1..={}",
                pres.n_gens
            )));
        }
    }
    let relators: Vec<Word> = pres
        .relators
        .iter()
        .chain(extra.iter())
        .map(|w| w.free_reduce())
        .filter(|w| !w.is_empty())
        .collect();

    let mut e = Enumerator::new(pres.n_gens, max_cosets.max(1));
    let mut i = 0usize;
    while i < e.parent.len() {
        if e.parent[i] != i as u32 {
            i += 1;
            continue;
        }
        for r in &relators {
            e.scan_and_fill(i as u32, &r.0)?;
            if e.parent[i] != i as u32 {
                break;
            }
        }
        if e.parent[i] == i as u32 {
            for c in 0..e.width() {
                if e.get(i as u32, c) == UNDEF {
                    e.check_budget()?;
                    let fresh = e.alloc() as u32;
                    e.deduce(i as u32, c, fresh);
                }
            }
        }
        i += 1;
    }

    // Compact live cosets and renumber canonically by BFS from coset 0.
    let width = 2 * pres.n_gens;
    let root = e.find(0);
    let mut order: Vec<u32> = Vec::new();
    let mut index: Vec<u32> = vec![UNDEF; e.parent.len()];
    order.push(root);
    index[root as usize] = 0;
    let mut head = 0usize;
    while head < order.len() {
        let cur = order[head];
        head += 1;
        for c in 0..width {
            let t = e.get(cur, c);
            debug_assert_ne!(t, UNDEF);
            if index[t as usize] == UNDEF {
                index[t as usize] = order.len() as u32;
                order.push(t);
            }
        }
    }
    let n = order.len();
    let mut flat = vec![UNDEF; n * width];
    for (new_i, &old) in order.iter().enumerate() {
        for c in 0..width {
            let t = e.get(old, c);
            flat[new_i * width + c] = index[t as usize];
        }
    }
    let table = CosetTable { n_gens: pres.n_gens, n_cosets: n, flat };
    table.verify(pres, extra)?;
    Ok(table)
}

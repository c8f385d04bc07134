//! Desk-scale normal-subgroup search.
//!
//! Not a general low-index algorithm: when the whole group is small enough to
//! enumerate outright, normal subgroups are found exactly inside its regular
//! representation (normal closures of conjugacy-class representatives, closed
//! under joins). Otherwise candidate subgroups are seeded from the normal
//! closures of short cyclic words and closed under joins, which finds the
//! quotients reachable from a single short relator but carries no completeness
//! guarantee. Production subgroup data ships as relator files instead.

use super::{todd_coxeter, CosetTable, FpGroupError, GroupPresentation, Word};
use std::collections::HashSet;

#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Only subgroups of index at most this are returned.
    pub max_index: usize,
    /// Seed words up to this length (infinite-group path).
    pub max_word_len: usize,
    /// Total enumerations/closures allowed before giving up.
    pub node_budget: usize,
    /// If the bare presentation enumerates within this many cosets, the group
    /// is finite and the search is exact.
    pub finite_order_cap: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_index: 12, max_word_len: 6, node_budget: 50_000, finite_order_cap: 960 }
    }
}

/// A normal subgroup `N ⊴ G`, presented through the quotient it defines.
#[derive(Clone, Debug)]
pub struct NormalSubgroup {
    pub index: usize,
    /// Regular action of `G/N`, i.e. the coset table of `N` in `G`.
    pub table: CosetTable,
    /// Words whose normal closure is `N`.
    pub normal_gens: Vec<Word>,
}

struct Budget {
    left: usize,
    total: usize,
}

impl Budget {
    fn spend(&mut self) -> Result<(), FpGroupError> {
        if self.left == 0 {
            Err(FpGroupError::SearchBudgetExceeded(format!("{} nodes", self.total)))
        } else {
            self.left -= 1;
            Ok(())
        }
    }
}

/// Finds normal subgroups of index at most `cfg.max_index`, deduplicated by
/// the canonical coset-table form (tables are equal iff the subgroups are),
/// sorted by ascending index.
pub fn low_index_normal_search(
    pres: &GroupPresentation,
    cfg: &SearchConfig,
) -> Result<Vec<NormalSubgroup>, FpGroupError> {
    let mut budget = Budget { left: cfg.node_budget, total: cfg.node_budget };
    let finite = match todd_coxeter(pres, &[], cfg.finite_order_cap) {
        Ok(reg) => Some(reg),
        Err(FpGroupError::CosetLimitExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut out = match finite {
        Some(reg) => finite_search(pres, &reg, cfg, &mut budget)?,
        None => seeded_search(pres, cfg, &mut budget)?,
    };
    out.sort_by(|a, b| {
        (a.index, a.table.row_major()).cmp(&(b.index, b.table.row_major()))
    });
    Ok(out)
}

/// Exact path: the group is finite with regular representation `reg`.
fn finite_search(
    pres: &GroupPresentation,
    reg: &CosetTable,
    cfg: &SearchConfig,
    budget: &mut Budget,
) -> Result<Vec<NormalSubgroup>, FpGroupError> {
    let n = reg.n_cosets();
    let words = reg.bfs_words();
    // Element arithmetic in the regular representation: point i stands for
    // the element carrying coset 0 to i, so i·j = act_word(i, words[j]).
    let mul = |i: usize, j: usize| reg.act_word(i, &words[j]);

    // One normal closure per conjugacy class representative.
    let mut class_of = vec![usize::MAX; n];
    let mut reps = Vec::new();
    for x in 0..n {
        if class_of[x] != usize::MAX {
            continue;
        }
        let class_id = reps.len();
        reps.push(x);
        let mut stack = vec![x];
        class_of[x] = class_id;
        while let Some(y) = stack.pop() {
            for g in 1..=pres.n_gens as i32 {
                let conj = reg.act(mul(reg.act(0, -g), y), g);
                if class_of[conj] == usize::MAX {
                    class_of[conj] = class_id;
                    stack.push(conj);
                }
            }
        }
    }

    // Closure of a seed set under conjugation and multiplication.
    let close = |seed: &[usize], budget: &mut Budget| -> Result<Vec<bool>, FpGroupError> {
        budget.spend()?;
        let mut member = vec![false; n];
        member[0] = true;
        let mut elems = vec![0usize];
        let mut stack: Vec<usize> = Vec::new();
        for &s in seed {
            if !member[s] {
                member[s] = true;
                elems.push(s);
                stack.push(s);
            }
        }
        while let Some(y) = stack.pop() {
            let push = |z: usize, member: &mut Vec<bool>, elems: &mut Vec<usize>, stack: &mut Vec<usize>| {
                if !member[z] {
                    member[z] = true;
                    elems.push(z);
                    stack.push(z);
                }
            };
            for g in 1..=pres.n_gens as i32 {
                let conj = reg.act(mul(reg.act(0, -g), y), g);
                push(conj, &mut member, &mut elems, &mut stack);
            }
            // `elems` grows while iterating; index loop keeps it sound.
            let mut i = 0;
            while i < elems.len() {
                let m = elems[i];
                let a = mul(m, y);
                push(a, &mut member, &mut elems, &mut stack);
                let b = mul(y, m);
                push(b, &mut member, &mut elems, &mut stack);
                i += 1;
            }
        }
        Ok(member)
    };

    // Seed lattice: trivial subgroup plus one closure per conjugacy class,
    // then close under joins.
    let mut subgroups: Vec<(Vec<bool>, Vec<usize>)> = Vec::new(); // (members, seed pts)
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let trivial = {
        let mut m = vec![false; n];
        m[0] = true;
        m
    };
    seen.insert(trivial.clone());
    subgroups.push((trivial, vec![]));
    for &r in &reps {
        let m = close(&[r], budget)?;
        if seen.insert(m.clone()) {
            subgroups.push((m, vec![r]));
        }
    }
    loop {
        let mut added = false;
        let snapshot = subgroups.len();
        for a in 0..snapshot {
            for b in (a + 1)..snapshot {
                let mut seed: Vec<usize> = subgroups[a].1.clone();
                seed.extend_from_slice(&subgroups[b].1);
                seed.sort_unstable();
                seed.dedup();
                let joined = close(&seed, budget)?;
                if seen.insert(joined.clone()) {
                    subgroups.push((joined, seed));
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }

    let mut out = Vec::new();
    for (members, seed) in subgroups {
        let size = members.iter().filter(|&&m| m).count();
        let index = n / size;
        if index > cfg.max_index {
            continue;
        }
        let normal_gens: Vec<Word> = seed.iter().map(|&x| words[x].clone()).collect();
        budget.spend()?;
        let table = todd_coxeter(pres, &normal_gens, n + 64)?;
        debug_assert_eq!(table.n_cosets(), index);
        out.push(NormalSubgroup { index, table, normal_gens });
    }
    Ok(out)
}

/// Bounded path for groups too large to enumerate: normal closures of short
/// cyclic words, closed under joins.
fn seeded_search(
    pres: &GroupPresentation,
    cfg: &SearchConfig,
    budget: &mut Budget,
) -> Result<Vec<NormalSubgroup>, FpGroupError> {
    let cap = cfg.max_index * 16 + 512;
    let mut out: Vec<NormalSubgroup> = Vec::new();
    let mut seen: HashSet<Vec<u32>> = HashSet::new();

    let try_gens = |gens: Vec<Word>,
                        out: &mut Vec<NormalSubgroup>,
                        seen: &mut HashSet<Vec<u32>>,
                        budget: &mut Budget|
     -> Result<bool, FpGroupError> {
        budget.spend()?;
        match todd_coxeter(pres, &gens, cap) {
            Ok(t) if t.n_cosets() <= cfg.max_index => {
                if seen.insert(t.row_major().to_vec()) {
                    out.push(NormalSubgroup { index: t.n_cosets(), table: t, normal_gens: gens });
                    Ok(true)
                } else {
                    Ok(false)
                }
            }
            Ok(_) | Err(FpGroupError::CosetLimitExceeded { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };

    // The whole group is always a normal subgroup of index 1.
    let kill_all: Vec<Word> = (1..=pres.n_gens as i32).map(|g| Word(vec![g])).collect();
    try_gens(kill_all, &mut out, &mut seen, budget)?;

    for w in cyclic_words(pres.n_gens, cfg.max_word_len) {
        try_gens(vec![w], &mut out, &mut seen, budget)?;
    }

    // Join closure: the normal closure of a union is the join.
    loop {
        let mut added = false;
        let snapshot = out.len();
        for a in 0..snapshot {
            for b in (a + 1)..snapshot {
                let mut gens = out[a].normal_gens.clone();
                gens.extend(out[b].normal_gens.iter().cloned());
                gens.sort();
                gens.dedup();
                if try_gens(gens, &mut out, &mut seen, budget)? {
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }
    Ok(out)
}

/// All cyclically reduced words up to `max_len`, one representative per
/// orbit under rotation and inversion.
fn cyclic_words(n_gens: usize, max_len: usize) -> Vec<Word> {
    let letters: Vec<i32> = (1..=n_gens as i32).flat_map(|g| [g, -g]).collect();
    let mut out = Vec::new();
    let mut cur: Vec<i32> = Vec::new();
    fn rec(cur: &mut Vec<i32>, letters: &[i32], max_len: usize, out: &mut Vec<Word>) {
        if !cur.is_empty() {
            let closes_reduced = cur.len() == 1 || cur[0] != -cur[cur.len() - 1];
            if closes_reduced && is_canonical_cyclic(cur) {
                out.push(Word(cur.clone()));
            }
        }
        if cur.len() == max_len {
            return;
        }
        for &l in letters {
            if cur.last() == Some(&-l) {
                continue;
            }
            cur.push(l);
            rec(cur, letters, max_len, out);
            cur.pop();
        }
    }
    rec(&mut cur, &letters, max_len, &mut out);
    out
}

/// True when `w` is the lexicographic minimum over all rotations of itself
/// and of its inverse.
fn is_canonical_cyclic(w: &[i32]) -> bool {
    let n = w.len();
    let rotation = |src: &[i32], r: usize| -> Vec<i32> {
        (0..n).map(|i| src[(i + r) % n]).collect()
    };
    let inv: Vec<i32> = w.iter().rev().map(|&l| -l).collect();
    for r in 0..n {
        if rotation(w, r) < w.to_vec() || rotation(&inv, r) < w.to_vec() {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composition-table model of the tetrahedral rotation group, built from
    /// raw permutations with no coset machinery involved.
    struct PermGroup {
        elems: Vec<Vec<usize>>,
    }

    impl PermGroup {
        fn tetrahedral() -> Self {
            let alpha = vec![1usize, 0, 3, 2];
            let beta = vec![1usize, 2, 0, 3];
            let id: Vec<usize> = (0..4).collect();
            let mut elems = vec![id];
            let mut i = 0;
            while i < elems.len() {
                for g in [&alpha, &beta] {
                    let q: Vec<usize> = (0..4).map(|k| g[elems[i][k]]).collect();
                    if !elems.contains(&q) {
                        elems.push(q);
                    }
                }
                i += 1;
            }
            PermGroup { elems }
        }

        fn compose(&self, a: &[usize], b: &[usize]) -> Vec<usize> {
            (0..a.len()).map(|i| b[a[i]]).collect()
        }

        fn invert(&self, a: &[usize]) -> Vec<usize> {
            let mut out = vec![0; a.len()];
            for (i, &ai) in a.iter().enumerate() {
                out[ai] = i;
            }
            out
        }

        /// Every normal subgroup, as a sorted list of subgroup orders, found
        /// by closing all one- and two-element subsets and testing normality.
        fn normal_subgroup_orders(&self) -> Vec<usize> {
            let n = self.elems.len();
            let mut subgroups: Vec<Vec<Vec<usize>>> = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    let mut set = vec![self.elems[0].clone()];
                    let mut stack = vec![self.elems[i].clone(), self.elems[j].clone()];
                    while let Some(x) = stack.pop() {
                        if set.contains(&x) {
                            continue;
                        }
                        set.push(x.clone());
                        for y in set.clone() {
                            stack.push(self.compose(&x, &y));
                            stack.push(self.compose(&y, &x));
                        }
                        stack.push(self.invert(&x));
                    }
                    set.sort();
                    if !subgroups.contains(&set) {
                        subgroups.push(set);
                    }
                }
            }
            let mut orders: Vec<usize> = subgroups
                .iter()
                .filter(|s| {
                    self.elems.iter().all(|g| {
                        let gi = self.invert(g);
                        s.iter().all(|x| {
                            let conj = self.compose(&self.compose(&gi, x), g);
                            s.contains(&conj)
                        })
                    })
                })
                .map(|s| s.len())
                .collect();
            orders.sort_unstable();
            orders
        }
    }

    #[test]
    fn finite_search_matches_permutation_bruteforce() {
        let model = PermGroup::tetrahedral();
        assert_eq!(model.elems.len(), 12);
        let orders = model.normal_subgroup_orders();
        let expected_indices: Vec<usize> = orders.iter().rev().map(|o| 12 / o).collect();

        let pres = GroupPresentation::triangle_rotation(3, 3).unwrap();
        let cfg = SearchConfig { max_index: 12, ..Default::default() };
        let found = low_index_normal_search(&pres, &cfg).unwrap();
        let mut indices: Vec<usize> = found.iter().map(|s| s.index).collect();
        indices.sort_unstable();
        let mut expected = expected_indices;
        expected.sort_unstable();
        assert_eq!(indices, expected);
        for s in &found {
            assert_eq!(s.table.n_cosets(), s.index);
            s.table.verify(&pres, &s.normal_gens).unwrap();
        }
    }

    #[test]
    fn index_one_returns_only_whole_group() {
        let pres = GroupPresentation::triangle_rotation(8, 3).unwrap();
        let cfg = SearchConfig {
            max_index: 1,
            max_word_len: 3,
            node_budget: 10_000,
            finite_order_cap: 512,
        };
        let found = low_index_normal_search(&pres, &cfg).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].index, 1);
        assert_eq!(found[0].table.n_cosets(), 1);
    }

    #[test]
    fn node_budget_is_enforced() {
        let pres = GroupPresentation::triangle_rotation(8, 3).unwrap();
        let cfg = SearchConfig {
            max_index: 48,
            max_word_len: 8,
            node_budget: 5,
            finite_order_cap: 512,
        };
        match low_index_normal_search(&pres, &cfg) {
            Err(FpGroupError::SearchBudgetExceeded(_)) => {}
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn bolza_quotient_appears_at_index_48() {
        let pres = GroupPresentation::triangle_rotation(8, 3).unwrap();
        let cfg = SearchConfig {
            max_index: 48,
            max_word_len: 8,
            node_budget: 2_000_000,
            finite_order_cap: 512,
        };
        let found = low_index_normal_search(&pres, &cfg).unwrap();
        let bolza = found.iter().find(|s| s.index == 48).expect("index-48 subgroup");
        // Orbit counts of β, α, γ on the 48 cosets are the tessellation's
        // V, E, F; the Bolza surface has (16, 24, 6), genus 2.
        let count_orbits = |g: usize| {
            let perm = bolza.table.gen_permutation(g);
            let mut seen = vec![false; perm.len()];
            let mut orbits = 0;
            for start in 0..perm.len() {
                if seen[start] {
                    continue;
                }
                orbits += 1;
                let mut x = start;
                while !seen[x] {
                    seen[x] = true;
                    x = perm[x];
                }
            }
            orbits
        };
        let (v, e, f) = (count_orbits(2), count_orbits(1), count_orbits(3));
        assert_eq!((v, e, f), (16, 24, 6));
        let chi = v as i64 - e as i64 + f as i64;
        assert_eq!(chi, -2);
    }

    #[test]
    fn cyclic_word_enumeration_dedupes_rotations() {
        let words = cyclic_words(1, 3);
        // Over one generator: a, a², a³ (and inverses fold onto them).
        assert_eq!(words.len(), 3);
        for w in cyclic_words(3, 4) {
            assert!(is_canonical_cyclic(&w.0));
            let r = w.cyclic_reduce();
            assert_eq!(r.len(), w.len(), "{w:?} not cyclically reduced");
        }
    }
}

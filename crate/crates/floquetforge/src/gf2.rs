//! Dense GF(2) vectors and incremental echelon solving.
//!
//! `SpanSolver` maintains a row-echelon basis for a growing set of vectors
//! and answers two questions: does a new vector enlarge the span, and how is
//! a target vector expressed as an XOR of previously inserted ones. That is
//! the workhorse for homology bases, observable-repair solves, and any other
//! "which subset sums to this" query.

/// Fixed-width bit vector with trailing bits kept zero.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BitVec {
    n: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(n: usize) -> Self {
        BitVec { n, words: vec![0; n.div_ceil(64)] }
    }

    pub fn from_ones(n: usize, ones: &[usize]) -> Self {
        let mut v = BitVec::zeros(n);
        for &i in ones {
            v.set(i, true);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.n);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, val: bool) {
        debug_assert!(i < self.n);
        let mask = 1u64 << (i % 64);
        if val {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.n);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Index of the lowest set bit.
    pub fn first_one(&self) -> Option<usize> {
        for (wi, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(wi * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    /// Indices of set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rem = w;
            std::iter::from_fn(move || {
                if rem == 0 {
                    None
                } else {
                    let b = rem.trailing_zeros() as usize;
                    rem &= rem - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }

    /// Parity of the overlap `⟨self, other⟩ = |self ∧ other| mod 2`.
    pub fn dot(&self, other: &BitVec) -> bool {
        debug_assert_eq!(self.n, other.n);
        let mut acc = 0u64;
        for (a, b) in self.words.iter().zip(&other.words) {
            acc ^= a & b;
        }
        acc.count_ones() % 2 == 1
    }
}

/// Incremental GF(2) echelon basis with combination tracking.
pub struct SpanSolver {
    n: usize,
    max_inserts: usize,
    n_inserted: usize,
    /// Echelon rows paired with their expression over inserted vectors.
    rows: Vec<(BitVec, BitVec)>,
    /// Pivot bit of each echelon row.
    pivots: Vec<usize>,
}

impl SpanSolver {
    pub fn new(n: usize, max_inserts: usize) -> Self {
        SpanSolver { n, max_inserts, n_inserted: 0, rows: Vec::new(), pivots: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn n_inserted(&self) -> usize {
        self.n_inserted
    }

    fn reduce(&self, v: &mut BitVec, combo: Option<&mut BitVec>) {
        let mut combo = combo;
        for (row, (vec, expr)) in self.rows.iter().enumerate() {
            if v.get(self.pivots[row]) {
                v.xor_assign(vec);
                if let Some(c) = combo.as_deref_mut() {
                    c.xor_assign(expr);
                }
            }
        }
    }

    /// Inserts a vector; returns true when it enlarged the span.
    pub fn insert(&mut self, v: &BitVec) -> bool {
        assert_eq!(v.len(), self.n);
        assert!(self.n_inserted < self.max_inserts, "SpanSolver insert capacity exceeded");
        let id = self.n_inserted;
        self.n_inserted += 1;
        let mut vec = v.clone();
        let mut expr = BitVec::zeros(self.max_inserts);
        expr.set(id, true);
        self.reduce(&mut vec, Some(&mut expr));
        match vec.first_one() {
            Some(p) => {
                self.pivots.push(p);
                self.rows.push((vec, expr));
                true
            }
            None => false,
        }
    }

    /// True when `v` lies in the span of the inserted vectors.
    pub fn contains(&self, v: &BitVec) -> bool {
        let mut vec = v.clone();
        self.reduce(&mut vec, None);
        vec.is_zero()
    }

    /// Expresses `v` as an XOR of inserted vectors; the result holds the
    /// insertion indices of the participating vectors.
    pub fn express(&self, v: &BitVec) -> Option<BitVec> {
        let mut vec = v.clone();
        let mut expr = BitVec::zeros(self.max_inserts);
        self.reduce(&mut vec, Some(&mut expr));
        if vec.is_zero() {
            Some(expr)
        } else {
            None
        }
    }
}

/// Basis of `{x : row · x = 0 for every row}` (the orthogonal complement
/// of the row space), as vectors of length `n_cols`.
pub fn nullspace(rows: &[BitVec], n_cols: usize) -> Vec<BitVec> {
    // Row-reduce a copy, recording pivot columns.
    let mut mat: Vec<BitVec> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    for r in rows {
        assert_eq!(r.len(), n_cols);
        let mut v = r.clone();
        for (row, p) in mat.iter().zip(&pivots) {
            if v.get(*p) {
                v.xor_assign(row);
            }
        }
        if let Some(p) = v.first_one() {
            mat.push(v);
            pivots.push(p);
        }
    }
    // One kernel vector per free column: x_free = 1, pivots back-solved.
    let mut is_pivot = vec![false; n_cols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let mut basis = Vec::new();
    for free in (0..n_cols).filter(|&c| !is_pivot[c]) {
        let mut x = BitVec::zeros(n_cols);
        x.set(free, true);
        // Back-substitute from the last pivot row upward.
        for i in (0..mat.len()).rev() {
            if mat[i].dot(&x) {
                x.flip(pivots[i]);
            }
        }
        basis.push(x);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bit_ops_round_trip() {
        let mut v = BitVec::zeros(130);
        v.set(0, true);
        v.set(64, true);
        v.set(129, true);
        assert_eq!(v.ones().collect::<Vec<_>>(), vec![0, 64, 129]);
        assert_eq!(v.count_ones(), 3);
        assert_eq!(v.first_one(), Some(0));
        v.flip(0);
        assert_eq!(v.first_one(), Some(64));
        let w = BitVec::from_ones(130, &[64, 100]);
        assert!(v.dot(&w));
        let mut x = v.clone();
        x.xor_assign(&w);
        assert_eq!(x.ones().collect::<Vec<_>>(), vec![100, 129]);
    }

    #[test]
    fn express_recovers_known_combination() {
        let rows = [
            BitVec::from_ones(8, &[0, 1]),
            BitVec::from_ones(8, &[1, 2]),
            BitVec::from_ones(8, &[2, 3]),
            BitVec::from_ones(8, &[0, 3]), // dependent: sum of the first three
        ];
        let mut solver = SpanSolver::new(8, 8);
        assert!(solver.insert(&rows[0]));
        assert!(solver.insert(&rows[1]));
        assert!(solver.insert(&rows[2]));
        assert!(!solver.insert(&rows[3]));
        assert_eq!(solver.rank(), 3);

        let target = BitVec::from_ones(8, &[0, 2]); // rows 0 ⊕ 1
        let expr = solver.express(&target).unwrap();
        let mut check = BitVec::zeros(8);
        for i in expr.ones() {
            check.xor_assign(&rows[i]);
        }
        assert_eq!(check, target);
        assert!(solver.express(&BitVec::from_ones(8, &[7])).is_none());
    }

    proptest! {
        #[test]
        fn nullspace_is_exact_orthogonal_complement(
            vecs in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 9), 0..7),
        ) {
            let rows: Vec<BitVec> = vecs
                .iter()
                .map(|bits| {
                    let ones: Vec<usize> =
                        bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
                    BitVec::from_ones(9, &ones)
                })
                .collect();
            let basis = nullspace(&rows, 9);
            // Every basis vector is orthogonal to every row.
            for b in &basis {
                for r in &rows {
                    prop_assert!(!b.dot(r));
                }
            }
            // Basis is independent and has the right dimension: 9 − rank.
            let mut solver = SpanSolver::new(9, 16);
            for b in &basis {
                prop_assert!(solver.insert(b));
            }
            let mut row_rank = SpanSolver::new(9, 16);
            let rank = rows.iter().filter(|r| row_rank.insert(r)).count();
            prop_assert_eq!(basis.len(), 9 - rank);
        }

        #[test]
        fn express_is_sound_and_complete(
            vecs in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 12), 1..10),
            subset_mask in any::<u16>(),
        ) {
            let rows: Vec<BitVec> = vecs
                .iter()
                .map(|bits| {
                    let ones: Vec<usize> =
                        bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
                    BitVec::from_ones(12, &ones)
                })
                .collect();
            let mut solver = SpanSolver::new(12, rows.len());
            for r in &rows {
                solver.insert(r);
            }
            // Any subset XOR must be expressible, and the returned witness
            // must reproduce the target exactly.
            let mut target = BitVec::zeros(12);
            for (i, r) in rows.iter().enumerate() {
                if subset_mask >> (i % 16) & 1 == 1 {
                    target.xor_assign(r);
                }
            }
            let expr = solver.express(&target).expect("subset XOR lies in span");
            let mut rebuilt = BitVec::zeros(12);
            for i in expr.ones() {
                rebuilt.xor_assign(&rows[i]);
            }
            prop_assert_eq!(rebuilt, target);
            prop_assert!(solver.contains(&BitVec::zeros(12)));
        }
    }
}

//! Stabilizer simulation, Pauli-frame sampling, and detector error models.
//!
//! Three engines share the circuit IR:
//!
//! * A symbolic stabilizer tableau tracks every measurement outcome as an
//!   affine GF(2) form over fresh variables, one per non-deterministic
//!   collapse.  It proves detectors deterministic, supplies the reference
//!   parities that turn raw samples into deviations, and lets the circuit
//!   builder repair observables by cancelling residual variables against
//!   the records that introduced them.
//! * A Pauli-frame sampler propagates an X/Z error frame per shot and
//!   reports deviations from the noiseless reference, with the measured
//!   operator gauge-randomized into the frame at each collapse so that
//!   post-measurement correlations are faithful.
//! * A full per-shot tableau simulator serves as a slow oracle for the
//!   frame sampler; it subtracts the symbolic reference parities so both
//!   samplers emit comparable deviation bits.
//!
//! `build_dem` extracts the detector error model in a single reverse walk:
//! for each qubit it maintains the set of detectors and observables that a
//! hypothetical X or Z fault at the current position would flip, updates
//! the sets through gates (reversed conjugation) and measurements (record
//! symptom toggles), clears them at resets, and snapshots them at every
//! noise instruction.  This costs one pass regardless of how many error
//! mechanisms the circuit contains.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read as _, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{CircuitError, CircuitIR, ErrorKind, Gate2Kind, Instruction, Pauli};
use crate::exec;

/// Affine GF(2) form `constant ⊕ Σ vars` over outcome variables.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OutcomeForm {
    pub constant: bool,
    /// Sorted, deduplicated variable ids.
    pub vars: Vec<u32>,
}

impl OutcomeForm {
    fn constant(b: bool) -> OutcomeForm {
        OutcomeForm { constant: b, vars: Vec::new() }
    }
}

/// Result of a symbolic (noiseless) execution: one form per record, plus
/// the record that introduced each variable (`u32::MAX` when the variable
/// came from an unrecorded collapse such as a reset).
#[derive(Debug, Clone)]
pub struct SymbolicRun {
    pub forms: Vec<OutcomeForm>,
    pub introducer: Vec<u32>,
}

impl SymbolicRun {
    pub fn n_vars(&self) -> usize {
        self.introducer.len()
    }
}

/// Sorted-set symmetric difference.
fn symdiff(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Exponent of i in the single-qubit product σ1·σ2 (left factor σ1 given
/// by (x1, z1), right by (x2, z2); (1,0)=X, (1,1)=Y, (0,1)=Z).
fn g1(x1: bool, z1: bool, x2: bool, z2: bool) -> i64 {
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 as i64 - x2 as i64,
        (true, false) => {
            if z2 {
                if x2 {
                    1
                } else {
                    -1
                }
            } else {
                0
            }
        }
        (false, true) => {
            if x2 {
                if z2 {
                    -1
                } else {
                    1
                }
            } else {
                0
            }
        }
    }
}

fn pauli_bits(p: Pauli) -> (bool, bool) {
    match p {
        Pauli::X => (true, false),
        Pauli::Y => (true, true),
        Pauli::Z => (false, true),
    }
}

/// Control/target conjugation Paulis of each two-qubit gate C(P, Q).
fn gate2_paulis(kind: Gate2Kind) -> (Pauli, Pauli) {
    match kind {
        Gate2Kind::Cx => (Pauli::Z, Pauli::X),
        Gate2Kind::Xcx => (Pauli::X, Pauli::X),
        Gate2Kind::Ycx => (Pauli::Y, Pauli::X),
    }
}

/// Pauli applied to undo a −1 reset outcome: anticommutes with the basis.
fn reset_correction(basis: Pauli) -> Pauli {
    match basis {
        Pauli::Z | Pauli::Y => Pauli::X,
        Pauli::X => Pauli::Z,
    }
}

/// Highest qubit index touched by any instruction, plus one.
pub(crate) fn total_qubits(c: &CircuitIR) -> usize {
    let mut m = c.n_qubits;
    for ins in &c.instructions {
        let q = match ins {
            Instruction::SingleInit { qubit, .. } | Instruction::SingleMeasure { qubit, .. } => {
                qubit + 1
            }
            Instruction::PairMeasure { pair, .. } | Instruction::Depolarize2 { pair, .. } => {
                pair[0].max(pair[1]) + 1
            }
            Instruction::Gate2 { control, target, .. } => (*control).max(*target) + 1,
            Instruction::PauliError { targets, .. } => {
                targets.iter().max().map_or(0, |q| q + 1)
            }
            Instruction::CorrelatedError { paulis, .. } => {
                paulis.iter().map(|(q, _)| q + 1).max().unwrap_or(0)
            }
            _ => 0,
        };
        m = m.max(q);
    }
    m
}

/// Aaronson–Gottesman tableau with affine-form signs.  Rows 0..n are
/// destabilizers (bits only; their phases are never read), rows n..2n the
/// stabilizers, row 2n the scratch row for determined measurements.
struct Tableau {
    n: usize,
    /// Words per half-row.
    w: usize,
    /// Row r's X bits at r·2w .. r·2w+w, Z bits at r·2w+w .. (r+1)·2w.
    xz: Vec<u64>,
    sc: Vec<bool>,
    sv: Vec<Vec<u32>>,
}

impl Tableau {
    fn new(n: usize) -> Tableau {
        let w = n.div_ceil(64).max(1);
        let mut t = Tableau {
            n,
            w,
            xz: vec![0; (2 * n + 1) * 2 * w],
            sc: vec![false; 2 * n + 1],
            sv: vec![Vec::new(); 2 * n + 1],
        };
        for i in 0..n {
            t.set(i, 0, i); // destabilizer X_i
            t.set(n + i, 1, i); // stabilizer Z_i
        }
        t
    }

    fn get(&self, row: usize, half: usize, q: usize) -> bool {
        self.xz[row * 2 * self.w + half * self.w + q / 64] >> (q % 64) & 1 == 1
    }

    fn set(&mut self, row: usize, half: usize, q: usize) {
        self.xz[row * 2 * self.w + half * self.w + q / 64] |= 1 << (q % 64);
    }

    fn flip(&mut self, row: usize, half: usize, q: usize) {
        self.xz[row * 2 * self.w + half * self.w + q / 64] ^= 1 << (q % 64);
    }

    fn anticommutes(&self, row: usize, paulis: &[(usize, Pauli)]) -> bool {
        let mut a = false;
        for &(q, p) in paulis {
            let x = self.get(row, 0, q);
            let z = self.get(row, 1, q);
            a ^= match p {
                Pauli::X => z,
                Pauli::Z => x,
                Pauli::Y => x ^ z,
            };
        }
        a
    }

    /// Row h := row i · row h; phases are tracked only when requested
    /// (destabilizer phases are never read and may be garbage).
    fn rowsum(&mut self, h: usize, i: usize, track_phase: bool) {
        let h0 = h * 2 * self.w;
        let i0 = i * 2 * self.w;
        if track_phase {
            let mut total: i64 = 0;
            for j in 0..self.w {
                let x1 = self.xz[i0 + j];
                let z1 = self.xz[i0 + self.w + j];
                let x2 = self.xz[h0 + j];
                let z2 = self.xz[h0 + self.w + j];
                let y1 = x1 & z1;
                let xo1 = x1 & !z1;
                let zo1 = !x1 & z1;
                let pos = (y1 & z2 & !x2) | (xo1 & x2 & z2) | (zo1 & x2 & !z2);
                let neg = (y1 & x2 & !z2) | (xo1 & !x2 & z2) | (zo1 & x2 & z2);
                total += pos.count_ones() as i64 - neg.count_ones() as i64;
            }
            let m = total.rem_euclid(4);
            debug_assert_eq!(m % 2, 0, "rowsum of anticommuting rows");
            self.sc[h] ^= self.sc[i] ^ (m == 2);
            self.sv[h] = symdiff(&self.sv[h], &self.sv[i]);
        }
        for j in 0..2 * self.w {
            let v = self.xz[i0 + j];
            self.xz[h0 + j] ^= v;
        }
    }

    fn clear_row(&mut self, r: usize) {
        let r0 = r * 2 * self.w;
        self.xz[r0..r0 + 2 * self.w].fill(0);
        self.sc[r] = false;
        self.sv[r].clear();
    }

    fn copy_row_bits(&mut self, dst: usize, src: usize) {
        let (d0, s0) = (dst * 2 * self.w, src * 2 * self.w);
        for j in 0..2 * self.w {
            let v = self.xz[s0 + j];
            self.xz[d0 + j] = v;
        }
    }

    /// Measures a sparse Pauli product; `fresh` supplies the outcome form
    /// when the result is random (fresh variable or RNG bit).
    fn measure<F: FnMut() -> OutcomeForm>(
        &mut self,
        paulis: &[(usize, Pauli)],
        mut fresh: F,
    ) -> OutcomeForm {
        let n = self.n;
        match (n..2 * n).find(|&r| self.anticommutes(r, paulis)) {
            Some(p) => {
                for r in 0..2 * n {
                    if r != p && self.anticommutes(r, paulis) {
                        self.rowsum(r, p, r >= n);
                    }
                }
                self.copy_row_bits(p - n, p);
                self.sv[p - n].clear();
                self.clear_row(p);
                for &(q, pl) in paulis {
                    let (x, z) = pauli_bits(pl);
                    if x {
                        self.set(p, 0, q);
                    }
                    if z {
                        self.set(p, 1, q);
                    }
                }
                let form = fresh();
                self.sc[p] = form.constant;
                self.sv[p] = form.vars.clone();
                form
            }
            None => {
                let s = 2 * n;
                self.clear_row(s);
                for i in 0..n {
                    if self.anticommutes(i, paulis) {
                        self.rowsum(s, n + i, true);
                    }
                }
                #[cfg(debug_assertions)]
                {
                    let mut expect = vec![0u64; 2 * self.w];
                    for &(q, pl) in paulis {
                        let (x, z) = pauli_bits(pl);
                        if x {
                            expect[q / 64] ^= 1 << (q % 64);
                        }
                        if z {
                            expect[self.w + q / 64] ^= 1 << (q % 64);
                        }
                    }
                    let s0 = s * 2 * self.w;
                    debug_assert_eq!(
                        &self.xz[s0..s0 + 2 * self.w],
                        &expect[..],
                        "determined measurement does not match the stabilizer product"
                    );
                }
                OutcomeForm { constant: self.sc[s], vars: self.sv[s].clone() }
            }
        }
    }

    /// Applies ∏ P_q conditioned on the affine form (sign-only update).
    fn cond_pauli(&mut self, paulis: &[(usize, Pauli)], form: &OutcomeForm) {
        if !form.constant && form.vars.is_empty() {
            return;
        }
        for r in self.n..2 * self.n {
            if self.anticommutes(r, paulis) {
                self.sc[r] ^= form.constant;
                if !form.vars.is_empty() {
                    self.sv[r] = symdiff(&self.sv[r], &form.vars);
                }
            }
        }
    }

    /// Conjugates every row by C(P, Q): row R picks up the right factor
    /// P_c^b ⊗ Q_t^a and the sign (−1)^{ab}, where a (b) flags
    /// anticommutation of R with P at the control (Q at the target).
    fn apply_gate2(&mut self, kind: Gate2Kind, c: usize, t: usize) {
        let (pc, qt) = gate2_paulis(kind);
        let (xp, zp) = pauli_bits(pc);
        let (xq, zq) = pauli_bits(qt);
        for r in 0..2 * self.n {
            let xc = self.get(r, 0, c);
            let zc = self.get(r, 1, c);
            let xt = self.get(r, 0, t);
            let zt = self.get(r, 1, t);
            let a = (xc & zp) ^ (zc & xp);
            let b = (xt & zq) ^ (zt & xq);
            if !a && !b {
                continue;
            }
            if r >= self.n {
                let mut total: i64 = 0;
                if b {
                    total += g1(xc, zc, xp, zp);
                }
                if a {
                    total += g1(xt, zt, xq, zq);
                }
                if a && b {
                    total += 2;
                }
                let m = total.rem_euclid(4);
                debug_assert_eq!(m % 2, 0, "gate multiplier anticommutes with row");
                if m == 2 {
                    self.sc[r] = !self.sc[r];
                }
            }
            if b {
                if xp {
                    self.flip(r, 0, c);
                }
                if zp {
                    self.flip(r, 1, c);
                }
            }
            if a {
                if xq {
                    self.flip(r, 0, t);
                }
                if zq {
                    self.flip(r, 1, t);
                }
            }
        }
    }
}

/// Runs the noiseless circuit symbolically, producing the affine outcome
/// form of every record.  Noise instructions are skipped.
pub fn symbolic_forms(c: &CircuitIR) -> SymbolicRun {
    let n = total_qubits(c);
    let mut t = Tableau::new(n);
    let mut forms: Vec<OutcomeForm> = Vec::with_capacity(c.n_records);
    let mut introducer: Vec<u32> = Vec::new();
    for ins in &c.instructions {
        match ins {
            Instruction::SingleInit { qubit, basis } => {
                let form = t.measure(&[(*qubit, *basis)], || {
                    let v = introducer.len() as u32;
                    introducer.push(u32::MAX);
                    OutcomeForm { constant: false, vars: vec![v] }
                });
                t.cond_pauli(&[(*qubit, reset_correction(*basis))], &form);
            }
            Instruction::PairMeasure { basis, pair, .. } => {
                let rec = forms.len() as u32;
                let form = t.measure(&[(pair[0], *basis), (pair[1], *basis)], || {
                    let v = introducer.len() as u32;
                    introducer.push(rec);
                    OutcomeForm { constant: false, vars: vec![v] }
                });
                forms.push(form);
            }
            Instruction::SingleMeasure { qubit, basis } => {
                let rec = forms.len() as u32;
                let form = t.measure(&[(*qubit, *basis)], || {
                    let v = introducer.len() as u32;
                    introducer.push(rec);
                    OutcomeForm { constant: false, vars: vec![v] }
                });
                forms.push(form);
            }
            Instruction::Gate2 { kind, control, target } => {
                t.apply_gate2(*kind, *control, *target);
            }
            _ => {}
        }
    }
    SymbolicRun { forms, introducer }
}

/// Noiseless reference parities of every detector and observable.
#[derive(Debug, Clone, Default)]
pub struct Baselines {
    pub det: Vec<bool>,
    pub obs: Vec<bool>,
}

/// Computes reference parities, failing if any annotation is not constant.
pub fn reference_parities(c: &CircuitIR) -> Result<Baselines, CircuitError> {
    let sym = symbolic_forms(c);
    let mut out = Baselines { det: Vec::with_capacity(c.n_detectors), obs: vec![false; c.n_observables] };
    for ins in &c.instructions {
        match ins {
            Instruction::Detector { records } => {
                let mut constant = false;
                let mut vars: Vec<u32> = Vec::new();
                for &r in records {
                    constant ^= sym.forms[r].constant;
                    vars = symdiff(&vars, &sym.forms[r].vars);
                }
                if !vars.is_empty() {
                    return Err(CircuitError::NonDeterministicDetector(out.det.len()));
                }
                out.det.push(constant);
            }
            Instruction::Observable { index, records } => {
                let mut constant = false;
                let mut vars: Vec<u32> = Vec::new();
                for &r in records {
                    constant ^= sym.forms[r].constant;
                    vars = symdiff(&vars, &sym.forms[r].vars);
                }
                if !vars.is_empty() {
                    return Err(CircuitError::NonDeterministicObservable(*index));
                }
                out.obs[*index] ^= constant;
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Dense bit matrix with row-major 64-bit packing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn new(rows: usize, cols: usize) -> BitMatrix {
        let stride = cols.div_ceil(64).max(1);
        BitMatrix { rows, cols, stride, words: vec![0; rows * stride] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        self.words[r * self.stride + c / 64] >> (c % 64) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.words[r * self.stride + c / 64];
        if value {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    pub fn flip(&mut self, r: usize, c: usize) {
        debug_assert!(r < self.rows && c < self.cols);
        self.words[r * self.stride + c / 64] ^= 1 << (c % 64);
    }

    pub fn ones_in_row(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.words[r * self.stride..(r + 1) * self.stride];
        let cols = self.cols;
        row.iter().enumerate().flat_map(move |(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(w * 64 + b)
            })
        })
        .take_while(move |&c| c < cols)
    }

    pub fn count_row_ones(&self, r: usize) -> usize {
        self.ones_in_row(r).count()
    }

    pub fn count_ones(&self) -> usize {
        (0..self.rows).map(|r| self.count_row_ones(r)).sum()
    }

    pub fn copy_row_from(&mut self, dst_row: usize, src: &BitMatrix, src_row: usize) {
        debug_assert_eq!(self.cols, src.cols);
        let d0 = dst_row * self.stride;
        let s0 = src_row * src.stride;
        self.words[d0..d0 + self.stride].copy_from_slice(&src.words[s0..s0 + src.stride]);
    }

    /// Element-wise XOR with an equally-shaped matrix.
    pub fn xor(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (w, &o) in out.words.iter_mut().zip(&other.words) {
            *w ^= o;
        }
        out
    }

    /// Serializes as `FFBM` + version + rows + cols + seed header followed
    /// by row-major bytes (LSB-first within each byte).
    pub fn to_bytes(&self, seed: u64) -> Vec<u8> {
        let rb = self.cols.div_ceil(8);
        let mut out = Vec::with_capacity(24 + 4 + 4 + self.rows * rb);
        out.extend_from_slice(b"FFBM");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        out.extend_from_slice(&seed.to_le_bytes());
        for r in 0..self.rows {
            for byte in 0..rb {
                let mut b = 0u8;
                for bit in 0..8 {
                    let c = byte * 8 + bit;
                    if c < self.cols && self.get(r, c) {
                        b |= 1 << bit;
                    }
                }
                out.push(b);
            }
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> io::Result<(BitMatrix, u64)> {
        let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
        if data.len() < 32 || &data[..4] != b"FFBM" {
            return Err(bad("missing FFBM header"));
        }
        let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
        if version != 1 {
            return Err(bad("unsupported FFBM version"));
        }
        let rows = u64::from_le_bytes(data[8..16].try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(data[16..24].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(data[24..32].try_into().unwrap());
        let rb = cols.div_ceil(8);
        if data.len() != 32 + rows * rb {
            return Err(bad("FFBM payload size mismatch"));
        }
        let mut m = BitMatrix::new(rows, cols);
        for r in 0..rows {
            for byte in 0..rb {
                let b = data[32 + r * rb + byte];
                for bit in 0..8 {
                    let c = byte * 8 + bit;
                    if c < cols && b >> bit & 1 == 1 {
                        m.set(r, c, true);
                    }
                }
            }
        }
        Ok((m, seed))
    }

    pub fn write_file(&self, path: impl AsRef<Path>, seed: u64) -> io::Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes(seed))
    }

    pub fn read_file(path: impl AsRef<Path>) -> io::Result<(BitMatrix, u64)> {
        let mut data = Vec::new();
        fs::File::open(path)?.read_to_end(&mut data)?;
        BitMatrix::from_bytes(&data)
    }
}

/// Detector/observable record lists in emission order, with u32 indices.
struct Annotations {
    det: Vec<Vec<u32>>,
    obs: Vec<(u32, Vec<u32>)>,
}

fn collect_annotations(c: &CircuitIR) -> Annotations {
    let mut det = Vec::with_capacity(c.n_detectors);
    let mut obs = Vec::new();
    for ins in &c.instructions {
        match ins {
            Instruction::Detector { records } => {
                det.push(records.iter().map(|&r| r as u32).collect());
            }
            Instruction::Observable { index, records } => {
                obs.push((*index as u32, records.iter().map(|&r| r as u32).collect()));
            }
            _ => {}
        }
    }
    Annotations { det, obs }
}

fn parity(records: &[bool], idxs: &[u32]) -> bool {
    idxs.iter().fold(false, |acc, &r| acc ^ records[r as usize])
}

fn pauli_of_code(code: usize) -> Option<Pauli> {
    match code {
        0 => None,
        1 => Some(Pauli::X),
        2 => Some(Pauli::Y),
        3 => Some(Pauli::Z),
        _ => unreachable!(),
    }
}

/// Per-shot Pauli frame state.
struct Frame {
    x: Vec<bool>,
    z: Vec<bool>,
}

impl Frame {
    fn new(n: usize) -> Frame {
        Frame { x: vec![false; n], z: vec![false; n] }
    }

    fn clear(&mut self) {
        self.x.fill(false);
        self.z.fill(false);
    }

    fn anti(&self, q: usize, p: Pauli) -> bool {
        match p {
            Pauli::X => self.z[q],
            Pauli::Z => self.x[q],
            Pauli::Y => self.x[q] ^ self.z[q],
        }
    }

    fn toggle(&mut self, q: usize, p: Pauli) {
        match p {
            Pauli::X => self.x[q] ^= true,
            Pauli::Z => self.z[q] ^= true,
            Pauli::Y => {
                self.x[q] ^= true;
                self.z[q] ^= true;
            }
        }
    }
}

fn run_one_frame(c: &CircuitIR, frame: &mut Frame, records: &mut Vec<bool>, rng: &mut ChaCha8Rng) {
    frame.clear();
    records.clear();
    for ins in &c.instructions {
        match ins {
            Instruction::RoundMarker => {}
            Instruction::SingleInit { qubit, basis } => {
                let (q, gauge) = (*qubit, rng.gen::<bool>());
                frame.x[q] = false;
                frame.z[q] = false;
                if gauge {
                    frame.toggle(q, *basis);
                }
            }
            Instruction::PairMeasure { basis, pair, .. } => {
                let dev = frame.anti(pair[0], *basis) ^ frame.anti(pair[1], *basis);
                records.push(dev);
                if rng.gen::<bool>() {
                    frame.toggle(pair[0], *basis);
                    frame.toggle(pair[1], *basis);
                }
            }
            Instruction::SingleMeasure { qubit, basis } => {
                records.push(frame.anti(*qubit, *basis));
                if rng.gen::<bool>() {
                    frame.toggle(*qubit, *basis);
                }
            }
            Instruction::Gate2 { kind, control, target } => {
                let (c0, t0) = (*control, *target);
                let (oxc, ozc, ozt) = (frame.x[c0], frame.z[c0], frame.z[t0]);
                match kind {
                    Gate2Kind::Cx => {
                        frame.x[t0] ^= oxc;
                        frame.z[c0] ^= ozt;
                    }
                    Gate2Kind::Xcx => {
                        frame.x[c0] ^= ozt;
                        frame.x[t0] ^= ozc;
                    }
                    Gate2Kind::Ycx => {
                        frame.x[t0] ^= oxc ^ ozc;
                        frame.x[c0] ^= ozt;
                        frame.z[c0] ^= ozt;
                    }
                }
            }
            Instruction::PauliError { targets, p, kind } => {
                for &q in targets {
                    if rng.gen::<f64>() < *p {
                        let pl = match kind {
                            ErrorKind::X => Pauli::X,
                            ErrorKind::Y => Pauli::Y,
                            ErrorKind::Z => Pauli::Z,
                            ErrorKind::Depolarize => {
                                [Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..3)]
                            }
                        };
                        frame.toggle(q, pl);
                    }
                }
            }
            Instruction::Depolarize2 { pair, p } => {
                if rng.gen::<f64>() < *p {
                    let idx = rng.gen_range(1..16);
                    if let Some(pa) = pauli_of_code(idx / 4) {
                        frame.toggle(pair[0], pa);
                    }
                    if let Some(pb) = pauli_of_code(idx % 4) {
                        frame.toggle(pair[1], pb);
                    }
                }
            }
            Instruction::CorrelatedError { p, paulis, flips } => {
                if rng.gen::<f64>() < *p {
                    for &(q, pl) in paulis {
                        frame.toggle(q, pl);
                    }
                    for &r in flips {
                        records[r] ^= true;
                    }
                }
            }
            Instruction::FlipRecord { record, p } => {
                if rng.gen::<f64>() < *p {
                    records[*record] ^= true;
                }
            }
            Instruction::Detector { .. } | Instruction::Observable { .. } => {}
        }
    }
}

const FRAME_BLOCK: usize = 1024;
const TABLEAU_BLOCK: usize = 128;

/// Samples detector and observable deviation bits with the Pauli-frame
/// simulator.  Shot blocks use independent RNG streams, so results are
/// identical whether the blocks run in parallel or sequentially.
pub fn frame_sample(c: &CircuitIR, shots: usize, seed: u64) -> (BitMatrix, BitMatrix) {
    let n = total_qubits(c);
    let ann = collect_annotations(c);
    let n_blocks = shots.div_ceil(FRAME_BLOCK);
    let blocks = exec::map_blocks(n_blocks, |b| {
        let start = b * FRAME_BLOCK;
        let len = FRAME_BLOCK.min(shots - start);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + b as u64);
        let mut dets = BitMatrix::new(len, c.n_detectors);
        let mut obs = BitMatrix::new(len, c.n_observables);
        let mut frame = Frame::new(n);
        let mut records = Vec::with_capacity(c.n_records);
        for s in 0..len {
            run_one_frame(c, &mut frame, &mut records, &mut rng);
            for (d, idxs) in ann.det.iter().enumerate() {
                if parity(&records, idxs) {
                    dets.set(s, d, true);
                }
            }
            for (index, idxs) in &ann.obs {
                if parity(&records, idxs) {
                    obs.flip(s, *index as usize);
                }
            }
        }
        (dets, obs)
    });
    let mut dets = BitMatrix::new(shots, c.n_detectors);
    let mut obs = BitMatrix::new(shots, c.n_observables);
    for (b, (bd, bo)) in blocks.iter().enumerate() {
        for s in 0..bd.rows() {
            dets.copy_row_from(b * FRAME_BLOCK + s, bd, s);
            obs.copy_row_from(b * FRAME_BLOCK + s, bo, s);
        }
    }
    (dets, obs)
}

/// Samples deviations with a full stabilizer tableau per shot (the slow
/// oracle for `frame_sample`).  Reference parities from the symbolic run
/// are subtracted so the outputs are deviation bits.
pub fn tableau_sample(
    c: &CircuitIR,
    shots: usize,
    seed: u64,
) -> Result<(BitMatrix, BitMatrix), CircuitError> {
    let n = total_qubits(c);
    let ann = collect_annotations(c);
    let base = reference_parities(c)?;
    let n_blocks = shots.div_ceil(TABLEAU_BLOCK);
    let blocks = exec::map_blocks(n_blocks, |b| {
        let start = b * TABLEAU_BLOCK;
        let len = TABLEAU_BLOCK.min(shots - start);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + b as u64);
        let mut dets = BitMatrix::new(len, c.n_detectors);
        let mut obs = BitMatrix::new(len, c.n_observables);
        let mut records: Vec<bool> = Vec::with_capacity(c.n_records);
        for s in 0..len {
            records.clear();
            let mut t = Tableau::new(n);
            for ins in &c.instructions {
                match ins {
                    Instruction::RoundMarker
                    | Instruction::Detector { .. }
                    | Instruction::Observable { .. } => {}
                    Instruction::SingleInit { qubit, basis } => {
                        let form = t.measure(&[(*qubit, *basis)], || {
                            OutcomeForm::constant(rng.gen::<bool>())
                        });
                        t.cond_pauli(&[(*qubit, reset_correction(*basis))], &form);
                    }
                    Instruction::PairMeasure { basis, pair, .. } => {
                        let form = t.measure(&[(pair[0], *basis), (pair[1], *basis)], || {
                            OutcomeForm::constant(rng.gen::<bool>())
                        });
                        records.push(form.constant);
                    }
                    Instruction::SingleMeasure { qubit, basis } => {
                        let form = t.measure(&[(*qubit, *basis)], || {
                            OutcomeForm::constant(rng.gen::<bool>())
                        });
                        records.push(form.constant);
                    }
                    Instruction::Gate2 { kind, control, target } => {
                        t.apply_gate2(*kind, *control, *target);
                    }
                    Instruction::PauliError { targets, p, kind } => {
                        for &q in targets {
                            if rng.gen::<f64>() < *p {
                                let pl = match kind {
                                    ErrorKind::X => Pauli::X,
                                    ErrorKind::Y => Pauli::Y,
                                    ErrorKind::Z => Pauli::Z,
                                    ErrorKind::Depolarize => {
                                        [Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..3)]
                                    }
                                };
                                t.cond_pauli(&[(q, pl)], &OutcomeForm::constant(true));
                            }
                        }
                    }
                    Instruction::Depolarize2 { pair, p } => {
                        if rng.gen::<f64>() < *p {
                            let idx = rng.gen_range(1..16);
                            if let Some(pa) = pauli_of_code(idx / 4) {
                                t.cond_pauli(&[(pair[0], pa)], &OutcomeForm::constant(true));
                            }
                            if let Some(pb) = pauli_of_code(idx % 4) {
                                t.cond_pauli(&[(pair[1], pb)], &OutcomeForm::constant(true));
                            }
                        }
                    }
                    Instruction::CorrelatedError { p, paulis, flips } => {
                        if rng.gen::<f64>() < *p {
                            for &(q, pl) in paulis {
                                t.cond_pauli(&[(q, pl)], &OutcomeForm::constant(true));
                            }
                            for &r in flips {
                                records[r] ^= true;
                            }
                        }
                    }
                    Instruction::FlipRecord { record, p } => {
                        if rng.gen::<f64>() < *p {
                            records[*record] ^= true;
                        }
                    }
                }
            }
            for (d, idxs) in ann.det.iter().enumerate() {
                if parity(&records, idxs) != base.det[d] {
                    dets.set(s, d, true);
                }
            }
            let mut obs_val = base.obs.clone();
            for (index, idxs) in &ann.obs {
                obs_val[*index as usize] ^= parity(&records, idxs);
            }
            for (j, &v) in obs_val.iter().enumerate() {
                if v {
                    obs.set(s, j, true);
                }
            }
        }
        (dets, obs)
    });
    let mut dets = BitMatrix::new(shots, c.n_detectors);
    let mut obs = BitMatrix::new(shots, c.n_observables);
    for (b, (bd, bo)) in blocks.iter().enumerate() {
        for s in 0..bd.rows() {
            dets.copy_row_from(b * TABLEAU_BLOCK + s, bd, s);
            obs.copy_row_from(b * TABLEAU_BLOCK + s, bo, s);
        }
    }
    Ok((dets, obs))
}

/// One independent error mechanism: with probability `p`, flip the listed
/// detectors and observables.
#[derive(Debug, Clone, PartialEq)]
pub struct DemMechanism {
    pub p: f64,
    pub dets: Vec<u32>,
    pub obs: Vec<u32>,
}

/// Detector error model: independent mechanisms over detector/observable
/// flip sets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dem {
    pub n_dets: usize,
    pub n_obs: usize,
    pub mechanisms: Vec<DemMechanism>,
}

/// Detector/observable flip sets of a single fault, as sorted id vectors.
#[derive(Debug, Clone, Default, PartialEq)]
struct Sym {
    dets: Vec<u32>,
    obs: Vec<u32>,
}

impl Sym {
    fn xor(&mut self, other: &Sym) {
        self.dets = symdiff(&self.dets, &other.dets);
        self.obs = symdiff(&self.obs, &other.obs);
    }

    fn toggle_det(&mut self, d: u32) {
        self.dets = symdiff(&self.dets, &[d]);
    }

    fn toggle_obs(&mut self, o: u32) {
        self.obs = symdiff(&self.obs, &[o]);
    }

    fn is_empty(&self) -> bool {
        self.dets.is_empty() && self.obs.is_empty()
    }

    fn clear(&mut self) {
        self.dets.clear();
        self.obs.clear();
    }
}

/// Symptom of a Pauli fault on qubit q given the X- and Z-fault symptoms.
fn pauli_sym(sx: &Sym, sz: &Sym, p: Pauli) -> Sym {
    match p {
        Pauli::X => sx.clone(),
        Pauli::Z => sz.clone(),
        Pauli::Y => {
            let mut s = sx.clone();
            s.xor(sz);
            s
        }
    }
}

/// Extracts the detector error model by a reverse sensitivity walk.
pub fn build_dem(c: &CircuitIR) -> Dem {
    let nq = total_qubits(c);
    let mut rec_sym: Vec<Sym> = vec![Sym::default(); c.n_records];
    let mut det_idx = 0u32;
    for ins in &c.instructions {
        match ins {
            Instruction::Detector { records } => {
                for &r in records {
                    rec_sym[r].toggle_det(det_idx);
                }
                det_idx += 1;
            }
            Instruction::Observable { index, records } => {
                for &r in records {
                    rec_sym[r].toggle_obs(*index as u32);
                }
            }
            _ => {}
        }
    }

    let mut sx: Vec<Sym> = vec![Sym::default(); nq];
    let mut sz: Vec<Sym> = vec![Sym::default(); nq];
    let mut acc: BTreeMap<(Vec<u32>, Vec<u32>), f64> = BTreeMap::new();
    let mut add = |sym: Sym, p: f64| {
        if p <= 0.0 || sym.is_empty() {
            return;
        }
        let entry = acc.entry((sym.dets, sym.obs)).or_insert(0.0);
        *entry = *entry + p - 2.0 * *entry * p;
    };

    let mut next_rec = c.n_records;
    for ins in c.instructions.iter().rev() {
        match ins {
            Instruction::RoundMarker
            | Instruction::Detector { .. }
            | Instruction::Observable { .. } => {}
            Instruction::SingleMeasure { qubit, basis } => {
                next_rec -= 1;
                let s = rec_sym[next_rec].clone();
                match basis {
                    Pauli::X => sz[*qubit].xor(&s),
                    Pauli::Z => sx[*qubit].xor(&s),
                    Pauli::Y => {
                        sx[*qubit].xor(&s);
                        sz[*qubit].xor(&s);
                    }
                }
            }
            Instruction::PairMeasure { basis, pair, .. } => {
                next_rec -= 1;
                let s = rec_sym[next_rec].clone();
                for &q in pair {
                    match basis {
                        Pauli::X => sz[q].xor(&s),
                        Pauli::Z => sx[q].xor(&s),
                        Pauli::Y => {
                            sx[q].xor(&s);
                            sz[q].xor(&s);
                        }
                    }
                }
            }
            Instruction::SingleInit { qubit, .. } => {
                sx[*qubit].clear();
                sz[*qubit].clear();
            }
            Instruction::Gate2 { kind, control, target } => {
                let (c0, t0) = (*control, *target);
                match kind {
                    Gate2Kind::Cx => {
                        let a = sx[t0].clone();
                        sx[c0].xor(&a);
                        let b = sz[c0].clone();
                        sz[t0].xor(&b);
                    }
                    Gate2Kind::Xcx => {
                        let a = sx[t0].clone();
                        sz[c0].xor(&a);
                        let b = sx[c0].clone();
                        sz[t0].xor(&b);
                    }
                    Gate2Kind::Ycx => {
                        let mut old_c = sx[c0].clone();
                        old_c.xor(&sz[c0]);
                        let a = sx[t0].clone();
                        sx[c0].xor(&a);
                        sz[c0].xor(&a);
                        sz[t0].xor(&old_c);
                    }
                }
            }
            Instruction::PauliError { targets, p, kind } => {
                for &q in targets {
                    match kind {
                        ErrorKind::X => add(sx[q].clone(), *p),
                        ErrorKind::Z => add(sz[q].clone(), *p),
                        ErrorKind::Y => add(pauli_sym(&sx[q], &sz[q], Pauli::Y), *p),
                        ErrorKind::Depolarize => {
                            for pl in [Pauli::X, Pauli::Y, Pauli::Z] {
                                add(pauli_sym(&sx[q], &sz[q], pl), p / 3.0);
                            }
                        }
                    }
                }
            }
            Instruction::Depolarize2 { pair, p } => {
                for idx in 1..16usize {
                    let mut s = Sym::default();
                    if let Some(pa) = pauli_of_code(idx / 4) {
                        s.xor(&pauli_sym(&sx[pair[0]], &sz[pair[0]], pa));
                    }
                    if let Some(pb) = pauli_of_code(idx % 4) {
                        s.xor(&pauli_sym(&sx[pair[1]], &sz[pair[1]], pb));
                    }
                    add(s, p / 15.0);
                }
            }
            Instruction::CorrelatedError { p, paulis, flips } => {
                let mut s = Sym::default();
                for &(q, pl) in paulis {
                    s.xor(&pauli_sym(&sx[q], &sz[q], pl));
                }
                for &r in flips {
                    s.xor(&rec_sym[r]);
                }
                add(s, *p);
            }
            Instruction::FlipRecord { record, p } => {
                add(rec_sym[*record].clone(), *p);
            }
        }
    }
    debug_assert_eq!(next_rec, 0);

    let mechanisms = acc
        .into_iter()
        .map(|((dets, obs), p)| DemMechanism { p, dets, obs })
        .collect();
    Dem { n_dets: c.n_detectors, n_obs: c.n_observables, mechanisms }
}

/// Serializes a DEM as one `error(p) D... L...` line per mechanism.
pub fn export_dem_text(dem: &Dem) -> String {
    let mut out = String::new();
    for m in &dem.mechanisms {
        out.push_str(&format!("error({})", m.p));
        for d in &m.dets {
            out.push_str(&format!(" D{d}"));
        }
        for l in &m.obs {
            out.push_str(&format!(" L{l}"));
        }
        out.push('\n');
    }
    out
}

/// Parses the `error(p) D... L...` format.  Detector and observable counts
/// are inferred from the largest ids present.
pub fn import_dem_text(s: &str) -> Result<Dem, CircuitError> {
    let mut dem = Dem::default();
    for (idx, raw) in s.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| CircuitError::Parse { line: ln, msg };
        let rest = line
            .strip_prefix("error(")
            .ok_or_else(|| err(format!("expected error(p) line, got {line:?}")))?;
        let close = rest.find(')').ok_or_else(|| err("unclosed probability".into()))?;
        let p: f64 = rest[..close]
            .parse()
            .map_err(|_| err(format!("bad probability {:?}", &rest[..close])))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(err(format!("probability {p} outside [0, 1]")));
        }
        let mut mech = DemMechanism { p, dets: Vec::new(), obs: Vec::new() };
        for tok in rest[close + 1..].split_whitespace() {
            if let Some(d) = tok.strip_prefix('D') {
                let d: u32 = d.parse().map_err(|_| err(format!("bad detector id {tok:?}")))?;
                mech.dets.push(d);
                dem.n_dets = dem.n_dets.max(d as usize + 1);
            } else if let Some(l) = tok.strip_prefix('L') {
                let l: u32 = l.parse().map_err(|_| err(format!("bad observable id {tok:?}")))?;
                mech.obs.push(l);
                dem.n_obs = dem.n_obs.max(l as usize + 1);
            } else {
                return Err(err(format!("bad DEM target {tok:?}")));
            }
        }
        mech.dets.sort_unstable();
        mech.obs.sort_unstable();
        dem.mechanisms.push(mech);
    }
    Ok(dem)
}

/// Samples deviation bits directly from a DEM (each mechanism fires
/// independently with its probability).
pub fn dem_sample(dem: &Dem, shots: usize, seed: u64) -> (BitMatrix, BitMatrix) {
    let n_blocks = shots.div_ceil(FRAME_BLOCK);
    let blocks = exec::map_blocks(n_blocks, |b| {
        let start = b * FRAME_BLOCK;
        let len = FRAME_BLOCK.min(shots - start);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + b as u64);
        let mut dets = BitMatrix::new(len, dem.n_dets);
        let mut obs = BitMatrix::new(len, dem.n_obs);
        for s in 0..len {
            for m in &dem.mechanisms {
                if rng.gen::<f64>() < m.p {
                    for &d in &m.dets {
                        dets.flip(s, d as usize);
                    }
                    for &o in &m.obs {
                        obs.flip(s, o as usize);
                    }
                }
            }
        }
        (dets, obs)
    });
    let mut dets = BitMatrix::new(shots, dem.n_dets);
    let mut obs = BitMatrix::new(shots, dem.n_obs);
    for (b, (bd, bo)) in blocks.iter().enumerate() {
        for s in 0..bd.rows() {
            dets.copy_row_from(b * FRAME_BLOCK + s, bd, s);
            obs.copy_row_from(b * FRAME_BLOCK + s, bo, s);
        }
    }
    (dets, obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{
        build_floquet_circuit, import_circuit_text, validate_determinism, ScheduleConfig,
    };
    use crate::fpgroup::{low_index_normal_search, GroupPresentation, SearchConfig};
    use crate::noise::apply_em3_ancilla;
    use crate::tess::{color_tessellation, extract_tessellation, Tessellation};

    fn hex_torus() -> Tessellation {
        let pres = GroupPresentation::triangle_rotation(6, 3).unwrap();
        let cfg = SearchConfig { max_index: 18, ..SearchConfig::default() };
        let found = low_index_normal_search(&pres, &cfg).unwrap();
        let sub = found.iter().find(|s| s.index == 18).unwrap();
        let mut t = extract_tessellation(&sub.table, 6, 3).unwrap();
        color_tessellation(&mut t).unwrap();
        t
    }

    #[test]
    fn single_qubit_forms_track_collapse() {
        let mut c = CircuitIR::new(1);
        c.push(Instruction::SingleInit { qubit: 0, basis: Pauli::Z });
        c.push(Instruction::SingleMeasure { qubit: 0, basis: Pauli::Z });
        c.push(Instruction::SingleMeasure { qubit: 0, basis: Pauli::X });
        c.push(Instruction::SingleMeasure { qubit: 0, basis: Pauli::X });
        c.push(Instruction::SingleMeasure { qubit: 0, basis: Pauli::Z });
        let sym = symbolic_forms(&c);
        // Z on |0⟩ is deterministic 0.
        assert_eq!(sym.forms[0], OutcomeForm::constant(false));
        // X collapse introduces a variable; repeating it yields the same form.
        assert_eq!(sym.forms[1].vars.len(), 1);
        assert_eq!(sym.forms[1], sym.forms[2]);
        // Z afterwards is a fresh collapse.
        assert_eq!(sym.forms[3].vars.len(), 1);
        assert_ne!(sym.forms[3].vars, sym.forms[1].vars);
        assert_eq!(sym.introducer[sym.forms[1].vars[0] as usize], 1);
        assert_eq!(sym.introducer[sym.forms[3].vars[0] as usize], 3);
    }

    #[test]
    fn bell_pair_outcomes_cancel() {
        let c = import_circuit_text("R 0 1\nMPP X0*X1\nMPP Z0*Z1\nMPP X0*X1\n").unwrap();
        let sym = symbolic_forms(&c);
        // ZZ on |00⟩ is deterministic and stays +1 after the XX collapse.
        assert_eq!(sym.forms[1], OutcomeForm::constant(false));
        // Remeasuring XX reproduces the first outcome exactly.
        assert_eq!(sym.forms[2], sym.forms[0]);
        assert_eq!(sym.forms[0].vars.len(), 1);
    }

    #[test]
    fn measurement_gadgets_match_direct_pair_measurements() {
        // An ancilla parity gadget must produce a record with the same
        // symbolic form as a direct two-body measurement after it.
        for basis in [Pauli::X, Pauli::Y, Pauli::Z] {
            let kind = match basis {
                Pauli::X => Gate2Kind::Xcx,
                Pauli::Y => Gate2Kind::Ycx,
                Pauli::Z => Gate2Kind::Cx,
            };
            let mut c = CircuitIR::new(3);
            for q in 0..2 {
                c.push(Instruction::SingleInit { qubit: q, basis: Pauli::Z });
            }
            c.push(Instruction::SingleInit { qubit: 2, basis: Pauli::Z });
            c.push(Instruction::Gate2 { kind, control: 0, target: 2 });
            c.push(Instruction::Gate2 { kind, control: 1, target: 2 });
            c.push(Instruction::SingleMeasure { qubit: 2, basis: Pauli::Z });
            c.push(Instruction::PairMeasure { edge: 0, basis, pair: [0, 1] });
            let sym = symbolic_forms(&c);
            assert_eq!(sym.forms[0], sym.forms[1], "gadget mismatch for {basis}");
        }
    }

    #[test]
    fn deterministic_error_flips_agree_across_engines() {
        let text = "R 0 1\nMPP Z0*Z1\nX_ERROR(1) 0\nMPP Z0*Z1\nDETECTOR rec[-1] rec[-2]\n";
        let c = import_circuit_text(text).unwrap();
        let (fd, _) = frame_sample(&c, 16, 7);
        let (td, _) = tableau_sample(&c, 16, 7).unwrap();
        for s in 0..16 {
            assert!(fd.get(s, 0));
            assert!(td.get(s, 0));
        }
        let dem = build_dem(&c);
        assert_eq!(
            dem.mechanisms,
            vec![DemMechanism { p: 1.0, dets: vec![0], obs: vec![] }]
        );
    }

    #[test]
    fn noiseless_floquet_samples_are_all_zero() {
        let t = hex_torus();
        let c = build_floquet_circuit(&t, &ScheduleConfig::new(2)).unwrap();
        let (dets, obs) = frame_sample(&c, 64, 11);
        assert_eq!(dets.count_ones(), 0);
        assert_eq!(obs.count_ones(), 0);
        let (dets, obs) = tableau_sample(&c, 16, 11).unwrap();
        assert_eq!(dets.count_ones(), 0);
        assert_eq!(obs.count_ones(), 0);
    }

    #[test]
    fn em3_transform_stays_deterministic_and_engines_agree_statistically() {
        let t = hex_torus();
        let c = build_floquet_circuit(&t, &ScheduleConfig::new(2)).unwrap();
        let noisy = apply_em3_ancilla(&c, 0.04);
        validate_determinism(&noisy).unwrap();
        let shots = 2000;
        let (fd, _) = frame_sample(&noisy, shots, 3);
        let (td, _) = tableau_sample(&noisy, shots, 4).unwrap();
        let total = (shots * noisy.n_detectors) as f64;
        let fr = fd.count_ones() as f64 / total;
        let tr = td.count_ones() as f64 / total;
        // 5σ agreement of mean detector rates between the two engines.
        let sigma = (2.0 * fr.max(tr) * (1.0 - fr.min(tr)) / total).sqrt();
        assert!(
            (fr - tr).abs() < 5.0 * sigma.max(1e-4),
            "frame rate {fr} vs tableau rate {tr}"
        );
        // The DEM's expected detector-flip density must also line up.
        let dem = build_dem(&noisy);
        let (dd, _) = dem_sample(&dem, shots, 5);
        let dr = dd.count_ones() as f64 / total;
        assert!((fr - dr).abs() < 5.0 * sigma.max(1e-4), "frame {fr} vs dem {dr}");
    }

    #[test]
    fn bit_matrix_file_round_trip() {
        let mut m = BitMatrix::new(5, 131);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for r in 0..5 {
            for c in 0..131 {
                if rng.gen::<f64>() < 0.3 {
                    m.set(r, c, true);
                }
            }
        }
        let path = std::env::temp_dir().join("floquetforge_bitmatrix_test.ffbm");
        m.write_file(&path, 42).unwrap();
        let (back, seed) = BitMatrix::read_file(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(back, m);
        assert_eq!(seed, 42);
        assert_eq!(
            m.ones_in_row(2).collect::<Vec<_>>(),
            (0..131).filter(|&c| m.get(2, c)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn dem_merges_parallel_mechanisms() {
        let text = "R 0 1\nMPP Z0*Z1\nE(0.1) rec[-1]\nE(0.2) rec[-1]\nMPP Z0*Z1\nDETECTOR rec[-1] rec[-2]\n";
        let c = import_circuit_text(text).unwrap();
        let dem = build_dem(&c);
        assert_eq!(dem.mechanisms.len(), 1);
        let p = dem.mechanisms[0].p;
        assert!((p - (0.1 + 0.2 - 2.0 * 0.1 * 0.2)).abs() < 1e-12);
    }

    #[test]
    fn dem_text_round_trip() {
        let t = hex_torus();
        let c = build_floquet_circuit(&t, &ScheduleConfig::new(3)).unwrap();
        let noisy = crate::noise::apply_phenomenological(&c, 0.01);
        let dem = build_dem(&noisy);
        assert!(!dem.mechanisms.is_empty());
        let text = export_dem_text(&dem);
        let back = import_dem_text(&text).unwrap();
        assert_eq!(back.mechanisms.len(), dem.mechanisms.len());
        for (a, b) in dem.mechanisms.iter().zip(&back.mechanisms) {
            assert_eq!(a.dets, b.dets);
            assert_eq!(a.obs, b.obs);
            assert!((a.p - b.p).abs() < 1e-15);
        }
        assert_eq!(back.n_dets, dem.n_dets);
    }

    #[test]
    fn dem_import_rejects_malformed_lines() {
        assert!(import_dem_text("error(0.1) D0 L0\n# ok\n").is_ok());
        assert!(import_dem_text("error(1.5) D0\n").is_err());
        assert!(import_dem_text("oops(0.1) D0\n").is_err());
        assert!(import_dem_text("error(0.1) Q3\n").is_err());
    }

    #[test]
    fn phenomenological_dem_symptoms_are_local() {
        let t = hex_torus();
        let c = build_floquet_circuit(&t, &ScheduleConfig::new(3)).unwrap();
        let noisy = crate::noise::apply_phenomenological(&c, 0.001);
        let dem = build_dem(&noisy);
        for m in &dem.mechanisms {
            assert!(m.p > 0.0 && m.p < 1.0);
            assert!(!m.dets.is_empty() || !m.obs.is_empty());
            assert!(m.dets.len() <= 4, "symptom too wide: {:?}", m.dets);
        }
    }
}

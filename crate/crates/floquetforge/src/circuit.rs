//! Floquet measurement circuits on 3-colored tessellations.
//!
//! Round t of the schedule measures every edge of color t mod 3 in the
//! matching Pauli basis (0 ↦ XX, 1 ↦ YY, 2 ↦ ZZ).  A face of color c has
//! boundary edges of the other two colors only, so its stabilizer — the
//! c-type Pauli on its vertices — is reconstructed as the product of the
//! boundary checks from any two consecutive rounds t−1, t with
//! t ≡ c+2 (mod 3).  Detectors compare consecutive reconstructions of the
//! same face; the first reconstruction of a face whose color matches the
//! initialization basis is itself deterministic and becomes an init-layer
//! detector.  A detector's parity is constant in every noiseless run but
//! not necessarily zero: a single reconstruction carries the algebraic
//! sign of ∏_v(P_v Q_v) = i^p W_f, i.e. (−1)^{p/2}, so init and readout
//! detectors on {p,3} tilings with p ≡ 2 (mod 4) sit at constant parity 1.
//! Samplers therefore report deviations from the noiseless reference.  The run ends with a destructive single-qubit readout in the
//! basis of the last round's color, closed out by one detector per
//! readout-color face (last reconstruction vs. readout parity) and one per
//! readout-color edge (last check vs. its two readouts) so that every
//! final-layer fault still triggers a pair of detectors.
//!
//! Logical observables are supports W ⊆ vertices whose parity of readouts
//! is a logical of the final stabilizer group: W must overlap every
//! non-readout-color face evenly, modulo the span of readout-color edges
//! and faces; there are exactly 2·genus independent classes.  The raw
//! readout parity of W generally depends on earlier random check outcomes,
//! so the builder runs the symbolic tableau, expresses the parity as an
//! affine form over free outcome variables, and XORs in the record that
//! introduced each residual variable, leaving a constant.
//!
//! Record indices inside `Instruction` are absolute (counted from the
//! start of the circuit).  The text format uses the offset notation
//! `rec[-k]` and a grammar compatible with stim circuit files, extended in
//! exactly one way: `E(p)` accepts `rec[-k]` targets so a correlated error
//! can jointly apply a Pauli and flip an already-written record.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::gf2::{nullspace, BitVec, SpanSolver};
use crate::tess::{EdgeId, Tessellation, VertexId};

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("tessellation must be face- and edge-colored before circuit construction")]
    Uncolored,
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error("detector {0} is not deterministic in the noiseless circuit")]
    NonDeterministicDetector(usize),
    #[error("observable {0} cannot be made deterministic from measurement records")]
    NonDeterministicObservable(usize),
    #[error("logical readout is rank deficient: expected {expected} supports, found {found}")]
    RankDeficient { expected: usize, found: usize },
    #[error("instruction has no text representation: {0}")]
    UnsupportedInstruction(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Single-qubit Pauli axis; doubles as a measurement or preparation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// Color index of the axis: X ↦ 0, Y ↦ 1, Z ↦ 2.
    pub fn index(self) -> usize {
        match self {
            Pauli::X => 0,
            Pauli::Y => 1,
            Pauli::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Pauli {
        match i {
            0 => Pauli::X,
            1 => Pauli::Y,
            2 => Pauli::Z,
            _ => panic!("Pauli index {i} out of range"),
        }
    }

    pub fn anticommutes(self, other: Pauli) -> bool {
        self != other
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        })
    }
}

/// Error channel applied independently to each target qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    X,
    Y,
    Z,
    Depolarize,
}

/// Two-qubit Clifford gates used by ancilla measurement gadgets: CP,X with
/// control Pauli P ∈ {X, Y, Z} (CX is the usual CNOT).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate2Kind {
    Xcx,
    Ycx,
    Cx,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    /// Start of a measurement round (exported as TICK).
    RoundMarker,
    /// Reset `qubit` to the +1 eigenstate of `basis`.
    SingleInit { qubit: usize, basis: Pauli },
    /// Measure basis ⊗ basis on the edge's endpoints; appends one record.
    PairMeasure { edge: EdgeId, basis: Pauli, pair: [usize; 2] },
    /// Measure `basis` on one qubit; appends one record.
    SingleMeasure { qubit: usize, basis: Pauli },
    Gate2 { kind: Gate2Kind, control: usize, target: usize },
    /// Independent single-qubit error on each target.
    PauliError { targets: Vec<usize>, p: f64, kind: ErrorKind },
    /// Uniform two-qubit depolarizing channel.
    Depolarize2 { pair: [usize; 2], p: f64 },
    /// With probability p, apply every listed Pauli and flip every listed
    /// record jointly.
    CorrelatedError { p: f64, paulis: Vec<(usize, Pauli)>, flips: Vec<usize> },
    /// Flip one existing record with probability p.
    FlipRecord { record: usize, p: f64 },
    /// Parity of the listed records; constant in every noiseless run.
    /// Samplers report the deviation from that reference value.
    Detector { records: Vec<usize> },
    /// Logical readout: the parity of the listed records is noiselessly
    /// constant, and flipping it signals a logical error.
    Observable { index: usize, records: Vec<usize> },
}

/// A measurement circuit with detector and observable annotations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitIR {
    pub n_qubits: usize,
    pub instructions: Vec<Instruction>,
    pub n_records: usize,
    pub n_detectors: usize,
    pub n_observables: usize,
}

impl CircuitIR {
    pub fn new(n_qubits: usize) -> CircuitIR {
        CircuitIR { n_qubits, ..CircuitIR::default() }
    }

    /// Appends an instruction, maintaining the record/detector/observable
    /// counters.  Record references must point at already-written records.
    pub fn push(&mut self, ins: Instruction) {
        match &ins {
            Instruction::PairMeasure { .. } | Instruction::SingleMeasure { .. } => {
                self.n_records += 1;
            }
            Instruction::Detector { records } => {
                debug_assert!(records.iter().all(|&r| r < self.n_records));
                self.n_detectors += 1;
            }
            Instruction::Observable { index, records } => {
                debug_assert!(records.iter().all(|&r| r < self.n_records));
                self.n_observables = self.n_observables.max(index + 1);
            }
            Instruction::FlipRecord { record, .. } => {
                debug_assert!(*record < self.n_records);
            }
            Instruction::CorrelatedError { flips, .. } => {
                debug_assert!(flips.iter().all(|&r| r < self.n_records));
            }
            _ => {}
        }
        self.instructions.push(ins);
    }
}

/// Measurement schedule parameters for `build_floquet_circuit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleConfig {
    /// Number of full XX → YY → ZZ periods; at least 2 so every face gets a
    /// comparison detector.
    pub periods: usize,
    /// Product-state preparation basis for all data qubits.
    pub init_basis: Pauli,
    /// Comparison detectors to drop per face at the start (and, when
    /// nonzero, the init-layer detectors too).
    pub warmup_periods: usize,
}

impl ScheduleConfig {
    pub fn new(periods: usize) -> ScheduleConfig {
        ScheduleConfig { periods, init_basis: Pauli::Z, warmup_periods: 0 }
    }
}

/// Independent logical readout supports of the final stabilizer group: the
/// 2·genus classes of vertex sets overlapping each non-readout-color face
/// evenly, modulo readout-color edges and faces.
pub fn logical_readout_supports(
    t: &Tessellation,
    readout_color: u8,
) -> Result<Vec<Vec<VertexId>>, CircuitError> {
    let edge_color = t.edge_color.as_ref().ok_or(CircuitError::Uncolored)?;
    let face_color = t.face_color.as_ref().ok_or(CircuitError::Uncolored)?;
    let n = t.n_vertices;

    let rows: Vec<BitVec> = (0..t.faces.len())
        .filter(|&f| face_color[f] != readout_color)
        .map(|f| BitVec::from_ones(n, &t.face_vertices[f]))
        .collect();
    let kernel = nullspace(&rows, n);

    let ro_edges: Vec<EdgeId> =
        (0..t.edges.len()).filter(|&e| edge_color[e] == readout_color).collect();
    let ro_faces: Vec<usize> =
        (0..t.faces.len()).filter(|&f| face_color[f] == readout_color).collect();
    let mut trivial = SpanSolver::new(n, ro_edges.len() + ro_faces.len() + kernel.len());
    for &e in &ro_edges {
        trivial.insert(&BitVec::from_ones(n, &[t.edges[e][0], t.edges[e][1]]));
    }
    for &f in &ro_faces {
        trivial.insert(&BitVec::from_ones(n, &t.face_vertices[f]));
    }

    let mut reps = Vec::new();
    for k in &kernel {
        if trivial.insert(k) {
            reps.push(k.ones().collect::<Vec<_>>());
        }
    }
    let expected = 2 * t.genus;
    if reps.len() != expected {
        return Err(CircuitError::RankDeficient { expected, found: reps.len() });
    }
    Ok(reps)
}

/// Builds the noiseless Floquet circuit for a colored tessellation: init,
/// 3·periods measurement rounds with inline detectors, destructive readout
/// with closure detectors, and 2·genus deterministic observables.
pub fn build_floquet_circuit(
    t: &Tessellation,
    cfg: &ScheduleConfig,
) -> Result<CircuitIR, CircuitError> {
    let edge_color = t.edge_color.as_ref().ok_or(CircuitError::Uncolored)?;
    let face_color = t.face_color.as_ref().ok_or(CircuitError::Uncolored)?;
    if cfg.periods < 2 {
        return Err(CircuitError::BadSchedule(format!(
            "need at least 2 periods for comparison detectors, got {}",
            cfg.periods
        )));
    }
    let n = t.n_vertices;
    let n_faces = t.faces.len();
    let rounds = 3 * cfg.periods;

    let mut by_color: [Vec<EdgeId>; 3] = Default::default();
    for (e, &color) in edge_color.iter().enumerate() {
        by_color[color as usize].push(e);
    }

    let mut c = CircuitIR::new(n);
    for q in 0..n {
        c.push(Instruction::SingleInit { qubit: q, basis: cfg.init_basis });
    }

    let mut last_rec = vec![usize::MAX; t.edges.len()];
    let mut last_round = vec![usize::MAX; t.edges.len()];
    let mut prev_recon: Vec<Option<Vec<usize>>> = vec![None; n_faces];
    let mut skipped = vec![0usize; n_faces];

    for round in 0..rounds {
        let color = round % 3;
        c.push(Instruction::RoundMarker);
        for &e in &by_color[color] {
            last_rec[e] = c.n_records;
            last_round[e] = round;
            c.push(Instruction::PairMeasure {
                edge: e,
                basis: Pauli::from_index(color),
                pair: [t.edges[e][0], t.edges[e][1]],
            });
        }
        // Faces of color round+1 have boundary colors round−1 and round, so
        // their reconstruction refreshes now (complete once round ≥ 1).
        let fc = ((round + 1) % 3) as u8;
        for f in 0..n_faces {
            if face_color[f] != fc {
                continue;
            }
            let fresh = t.faces[f]
                .iter()
                .all(|&e| last_round[e] == round || (round >= 1 && last_round[e] == round - 1));
            if !fresh {
                continue;
            }
            let mut recon: Vec<usize> = t.faces[f].iter().map(|&e| last_rec[e]).collect();
            recon.sort_unstable();
            match prev_recon[f].take() {
                None => {
                    // The init-basis face stabilizers are conserved from the
                    // product state, so their first reconstruction is itself
                    // deterministic.
                    if fc as usize == cfg.init_basis.index() && cfg.warmup_periods == 0 {
                        c.push(Instruction::Detector { records: recon.clone() });
                    }
                }
                Some(prev) => {
                    if skipped[f] < cfg.warmup_periods {
                        skipped[f] += 1;
                    } else {
                        let mut records = prev;
                        records.extend_from_slice(&recon);
                        records.sort_unstable();
                        c.push(Instruction::Detector { records });
                    }
                }
            }
            prev_recon[f] = Some(recon);
        }
    }

    // Destructive readout in the last round's basis.
    c.push(Instruction::RoundMarker);
    let readout = Pauli::from_index((rounds - 1) % 3);
    let rc = readout.index() as u8;
    let mut readout_rec = vec![0usize; n];
    for (q, rec) in readout_rec.iter_mut().enumerate() {
        *rec = c.n_records;
        c.push(Instruction::SingleMeasure { qubit: q, basis: readout });
    }
    for f in 0..n_faces {
        if face_color[f] != rc {
            continue;
        }
        let prev = prev_recon[f].as_ref().expect("readout-color faces refresh every period");
        let mut records = prev.clone();
        records.extend(t.face_vertices[f].iter().map(|&v| readout_rec[v]));
        records.sort_unstable();
        c.push(Instruction::Detector { records });
    }
    for &e in &by_color[rc as usize] {
        let mut records = vec![last_rec[e], readout_rec[t.edges[e][0]], readout_rec[t.edges[e][1]]];
        records.sort_unstable();
        c.push(Instruction::Detector { records });
    }

    // Observables: repair each support's readout parity to a constant by
    // XORing in the record that introduced each residual outcome variable.
    let supports = logical_readout_supports(t, rc)?;
    let sym = crate::sim::symbolic_forms(&c);
    let nv = sym.n_vars().max(1);

    let mut det_idx = 0usize;
    for ins in &c.instructions {
        if let Instruction::Detector { records } = ins {
            let mut acc = BitVec::zeros(nv);
            for &r in records {
                for &v in &sym.forms[r].vars {
                    acc.flip(v as usize);
                }
            }
            if !acc.is_zero() {
                return Err(CircuitError::NonDeterministicDetector(det_idx));
            }
            det_idx += 1;
        }
    }

    for (j, w) in supports.iter().enumerate() {
        let mut records: BTreeSet<usize> = w.iter().map(|&v| readout_rec[v]).collect();
        let mut acc = BitVec::zeros(nv);
        for &r in &records {
            for &v in &sym.forms[r].vars {
                acc.flip(v as usize);
            }
        }
        for v in acc.ones() {
            let intro = sym.introducer[v];
            if intro == u32::MAX {
                return Err(CircuitError::NonDeterministicObservable(j));
            }
            // The introducing record's form is the bare variable, so toggling
            // it in or out of the set cancels the variable exactly.
            let intro = intro as usize;
            if !records.insert(intro) {
                records.remove(&intro);
            }
        }
        let mut check = BitVec::zeros(nv);
        for &r in &records {
            for &v in &sym.forms[r].vars {
                check.flip(v as usize);
            }
        }
        if !check.is_zero() {
            return Err(CircuitError::NonDeterministicObservable(j));
        }
        c.push(Instruction::Observable { index: j, records: records.into_iter().collect() });
    }
    Ok(c)
}

/// Checks that every detector and observable has a constant parity in the
/// noiseless circuit.
pub fn validate_determinism(c: &CircuitIR) -> Result<(), CircuitError> {
    let sym = crate::sim::symbolic_forms(c);
    let nv = sym.n_vars().max(1);
    let mut det_idx = 0usize;
    for ins in &c.instructions {
        match ins {
            Instruction::Detector { records } => {
                let mut acc = BitVec::zeros(nv);
                for &r in records {
                    for &v in &sym.forms[r].vars {
                        acc.flip(v as usize);
                    }
                }
                if !acc.is_zero() {
                    return Err(CircuitError::NonDeterministicDetector(det_idx));
                }
                det_idx += 1;
            }
            Instruction::Observable { index, records } => {
                let mut acc = BitVec::zeros(nv);
                for &r in records {
                    for &v in &sym.forms[r].vars {
                        acc.flip(v as usize);
                    }
                }
                if !acc.is_zero() {
                    return Err(CircuitError::NonDeterministicObservable(*index));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn check_prob(p: f64) -> Result<(), CircuitError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CircuitError::UnsupportedInstruction(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

fn push_targets(out: &mut String, targets: &[usize]) {
    for t in targets {
        out.push(' ');
        out.push_str(&t.to_string());
    }
}

fn push_rec_offsets(out: &mut String, records: &[usize], recs_now: usize) -> Result<(), CircuitError> {
    for &r in records {
        if r >= recs_now {
            return Err(CircuitError::UnsupportedInstruction(format!(
                "record {r} referenced before it is written"
            )));
        }
        out.push_str(&format!(" rec[-{}]", recs_now - r));
    }
    Ok(())
}

/// Serializes a circuit in a stim-compatible grammar (`E(p)` additionally
/// accepts `rec[-k]` targets).  Consecutive same-basis resets, measurements
/// and same-kind gates are folded into one line; a `FlipRecord` immediately
/// following its measurement folds into the `(p)` argument.
pub fn export_circuit_text(c: &CircuitIR) -> Result<String, CircuitError> {
    let mut out = String::new();
    let ins = &c.instructions;
    let mut recs = 0usize;
    let mut i = 0usize;
    while i < ins.len() {
        match &ins[i] {
            Instruction::RoundMarker => {
                out.push_str("TICK\n");
                i += 1;
            }
            Instruction::SingleInit { basis, .. } => {
                let b = *basis;
                let mut qs = Vec::new();
                while let Some(Instruction::SingleInit { qubit, basis }) = ins.get(i) {
                    if *basis != b {
                        break;
                    }
                    qs.push(*qubit);
                    i += 1;
                }
                out.push_str(match b {
                    Pauli::X => "RX",
                    Pauli::Y => "RY",
                    Pauli::Z => "R",
                });
                push_targets(&mut out, &qs);
                out.push('\n');
            }
            Instruction::SingleMeasure { basis, .. } => {
                // Group a run of single measurements with a uniform optional
                // trailing flip on each one's own record.
                let b = *basis;
                let mut qs = Vec::new();
                let mut flip: Option<f64> = None;
                let mut first = true;
                while let Some(Instruction::SingleMeasure { qubit, basis }) = ins.get(i) {
                    if *basis != b {
                        break;
                    }
                    let this_flip = match ins.get(i + 1) {
                        Some(Instruction::FlipRecord { record, p }) if *record == recs => Some(*p),
                        _ => None,
                    };
                    if first {
                        flip = this_flip;
                        first = false;
                    } else if this_flip != flip {
                        break;
                    }
                    qs.push(*qubit);
                    recs += 1;
                    i += 1 + usize::from(this_flip.is_some());
                }
                out.push_str(match b {
                    Pauli::X => "MX",
                    Pauli::Y => "MY",
                    Pauli::Z => "M",
                });
                if let Some(p) = flip {
                    check_prob(p)?;
                    out.push_str(&format!("({p})"));
                }
                push_targets(&mut out, &qs);
                out.push('\n');
            }
            Instruction::PairMeasure { basis, pair, .. } => {
                let flip = match ins.get(i + 1) {
                    Some(Instruction::FlipRecord { record, p }) if *record == recs => Some(*p),
                    _ => None,
                };
                out.push_str("MPP");
                if let Some(p) = flip {
                    check_prob(p)?;
                    out.push_str(&format!("({p})"));
                }
                out.push_str(&format!(" {basis}{}*{basis}{}\n", pair[0], pair[1]));
                recs += 1;
                i += 1 + usize::from(flip.is_some());
            }
            Instruction::Gate2 { kind, .. } => {
                let k = *kind;
                let mut qs = Vec::new();
                while let Some(Instruction::Gate2 { kind, control, target }) = ins.get(i) {
                    if *kind != k {
                        break;
                    }
                    qs.push(*control);
                    qs.push(*target);
                    i += 1;
                }
                out.push_str(match k {
                    Gate2Kind::Xcx => "XCX",
                    Gate2Kind::Ycx => "YCX",
                    Gate2Kind::Cx => "CX",
                });
                push_targets(&mut out, &qs);
                out.push('\n');
            }
            Instruction::PauliError { targets, p, kind } => {
                check_prob(*p)?;
                out.push_str(match kind {
                    ErrorKind::X => "X_ERROR",
                    ErrorKind::Y => "Y_ERROR",
                    ErrorKind::Z => "Z_ERROR",
                    ErrorKind::Depolarize => "DEPOLARIZE1",
                });
                out.push_str(&format!("({p})"));
                push_targets(&mut out, targets);
                out.push('\n');
                i += 1;
            }
            Instruction::Depolarize2 { pair, p } => {
                check_prob(*p)?;
                out.push_str(&format!("DEPOLARIZE2({p}) {} {}\n", pair[0], pair[1]));
                i += 1;
            }
            Instruction::CorrelatedError { p, paulis, flips } => {
                check_prob(*p)?;
                out.push_str(&format!("E({p})"));
                for (q, pl) in paulis {
                    out.push_str(&format!(" {pl}{q}"));
                }
                push_rec_offsets(&mut out, flips, recs)?;
                out.push('\n');
                i += 1;
            }
            Instruction::FlipRecord { record, p } => {
                check_prob(*p)?;
                out.push_str(&format!("E({p})"));
                push_rec_offsets(&mut out, &[*record], recs)?;
                out.push('\n');
                i += 1;
            }
            Instruction::Detector { records } => {
                out.push_str("DETECTOR");
                push_rec_offsets(&mut out, records, recs)?;
                out.push('\n');
                i += 1;
            }
            Instruction::Observable { index, records } => {
                out.push_str(&format!("OBSERVABLE_INCLUDE({index})"));
                push_rec_offsets(&mut out, records, recs)?;
                out.push('\n');
                i += 1;
            }
        }
    }
    Ok(out)
}

fn parse_err(line: usize, msg: impl Into<String>) -> CircuitError {
    CircuitError::Parse { line, msg: msg.into() }
}

/// Parses the text format produced by `export_circuit_text`.  Edge ids for
/// pair measurements are assigned in first-appearance order of the qubit
/// pair, so re-exporting yields byte-identical text even though ids may
/// differ from the builder's tessellation ids.
pub fn import_circuit_text(s: &str) -> Result<CircuitIR, CircuitError> {
    let mut c = CircuitIR::new(0);
    let mut max_q: Option<usize> = None;
    let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();

    for (idx, raw) in s.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (head, rest) = match line.find(char::is_whitespace) {
            Some(pos) => (&line[..pos], line[pos..].trim_start()),
            None => (line, ""),
        };
        let (name, arg) = match head.find('(') {
            Some(pos) => {
                let close = head
                    .rfind(')')
                    .ok_or_else(|| parse_err(ln, format!("unclosed argument in {head}")))?;
                (&head[..pos], Some(&head[pos + 1..close]))
            }
            None => (head, None),
        };
        let prob = |line: usize| -> Result<f64, CircuitError> {
            let a = arg.ok_or_else(|| parse_err(line, format!("{name} needs an argument")))?;
            let p: f64 =
                a.parse().map_err(|_| parse_err(line, format!("bad probability {a:?}")))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(parse_err(line, format!("probability {p} outside [0, 1]")));
            }
            Ok(p)
        };
        let targets: Vec<&str> = rest.split_whitespace().collect();
        let qubit = |tok: &str| -> Result<usize, CircuitError> {
            tok.parse().map_err(|_| parse_err(ln, format!("bad qubit target {tok:?}")))
        };
        let mut note_q = |q: usize| max_q = Some(max_q.map_or(q, |m| m.max(q)));

        match name {
            "TICK" => c.push(Instruction::RoundMarker),
            "R" | "RX" | "RY" => {
                if arg.is_some() {
                    return Err(parse_err(ln, format!("{name} takes no argument")));
                }
                let basis = match name {
                    "R" => Pauli::Z,
                    "RX" => Pauli::X,
                    _ => Pauli::Y,
                };
                for t in &targets {
                    let q = qubit(t)?;
                    note_q(q);
                    c.push(Instruction::SingleInit { qubit: q, basis });
                }
            }
            "M" | "MX" | "MY" => {
                let basis = match name {
                    "M" => Pauli::Z,
                    "MX" => Pauli::X,
                    _ => Pauli::Y,
                };
                let p = if arg.is_some() { Some(prob(ln)?) } else { None };
                for t in &targets {
                    let q = qubit(t)?;
                    note_q(q);
                    let rec = c.n_records;
                    c.push(Instruction::SingleMeasure { qubit: q, basis });
                    if let Some(p) = p {
                        c.push(Instruction::FlipRecord { record: rec, p });
                    }
                }
            }
            "MPP" => {
                let p = if arg.is_some() { Some(prob(ln)?) } else { None };
                if targets.len() != 1 {
                    return Err(parse_err(ln, "MPP expects one product target per line"));
                }
                let factors: Vec<&str> = targets[0].split('*').collect();
                if factors.len() != 2 {
                    return Err(parse_err(ln, "MPP supports two-body products only"));
                }
                let mut basis = None;
                let mut pair = [0usize; 2];
                for (slot, f) in factors.iter().enumerate() {
                    let (b, q) = parse_pauli_target(f).ok_or_else(|| {
                        parse_err(ln, format!("bad Pauli target {f:?}"))
                    })?;
                    if *basis.get_or_insert(b) != b {
                        return Err(parse_err(ln, "MPP factors must share a basis"));
                    }
                    pair[slot] = q;
                    note_q(q);
                }
                let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                let next = edge_ids.len();
                let edge = *edge_ids.entry(key).or_insert(next);
                let rec = c.n_records;
                c.push(Instruction::PairMeasure { edge, basis: basis.unwrap(), pair });
                if let Some(p) = p {
                    c.push(Instruction::FlipRecord { record: rec, p });
                }
            }
            "CX" | "XCX" | "YCX" => {
                let kind = match name {
                    "CX" => Gate2Kind::Cx,
                    "XCX" => Gate2Kind::Xcx,
                    _ => Gate2Kind::Ycx,
                };
                if !targets.len().is_multiple_of(2) {
                    return Err(parse_err(ln, format!("{name} needs an even target count")));
                }
                for pair in targets.chunks(2) {
                    let a = qubit(pair[0])?;
                    let b = qubit(pair[1])?;
                    note_q(a);
                    note_q(b);
                    c.push(Instruction::Gate2 { kind, control: a, target: b });
                }
            }
            "X_ERROR" | "Y_ERROR" | "Z_ERROR" | "DEPOLARIZE1" => {
                let kind = match name {
                    "X_ERROR" => ErrorKind::X,
                    "Y_ERROR" => ErrorKind::Y,
                    "Z_ERROR" => ErrorKind::Z,
                    _ => ErrorKind::Depolarize,
                };
                let p = prob(ln)?;
                let mut qs = Vec::with_capacity(targets.len());
                for t in &targets {
                    let q = qubit(t)?;
                    note_q(q);
                    qs.push(q);
                }
                c.push(Instruction::PauliError { targets: qs, p, kind });
            }
            "DEPOLARIZE2" => {
                let p = prob(ln)?;
                if !targets.len().is_multiple_of(2) {
                    return Err(parse_err(ln, "DEPOLARIZE2 needs an even target count"));
                }
                for pair in targets.chunks(2) {
                    let a = qubit(pair[0])?;
                    let b = qubit(pair[1])?;
                    note_q(a);
                    note_q(b);
                    c.push(Instruction::Depolarize2 { pair: [a, b], p });
                }
            }
            "E" | "CORRELATED_ERROR" => {
                let p = prob(ln)?;
                let mut paulis = Vec::new();
                let mut flips = Vec::new();
                for t in &targets {
                    if let Some(k) = parse_rec_target(t) {
                        let k = k.map_err(|msg| parse_err(ln, msg))?;
                        if k == 0 || k > c.n_records {
                            return Err(parse_err(ln, format!("rec[-{k}] out of range")));
                        }
                        flips.push(c.n_records - k);
                    } else if let Some((b, q)) = parse_pauli_target(t) {
                        note_q(q);
                        paulis.push((q, b));
                    } else {
                        return Err(parse_err(ln, format!("bad E target {t:?}")));
                    }
                }
                if paulis.is_empty() && flips.len() == 1 {
                    c.push(Instruction::FlipRecord { record: flips[0], p });
                } else {
                    c.push(Instruction::CorrelatedError { p, paulis, flips });
                }
            }
            "DETECTOR" | "OBSERVABLE_INCLUDE" => {
                let mut records = Vec::with_capacity(targets.len());
                for t in &targets {
                    let k = parse_rec_target(t)
                        .ok_or_else(|| parse_err(ln, format!("bad record target {t:?}")))?
                        .map_err(|msg| parse_err(ln, msg))?;
                    if k == 0 || k > c.n_records {
                        return Err(parse_err(ln, format!("rec[-{k}] out of range")));
                    }
                    records.push(c.n_records - k);
                }
                records.sort_unstable();
                if name == "DETECTOR" {
                    if arg.is_some() {
                        return Err(parse_err(ln, "DETECTOR takes no argument"));
                    }
                    c.push(Instruction::Detector { records });
                } else {
                    let a = arg.ok_or_else(|| parse_err(ln, "OBSERVABLE_INCLUDE needs an index"))?;
                    let index: usize =
                        a.parse().map_err(|_| parse_err(ln, format!("bad index {a:?}")))?;
                    c.push(Instruction::Observable { index, records });
                }
            }
            other => return Err(parse_err(ln, format!("unknown instruction {other:?}"))),
        }
    }
    c.n_qubits = max_q.map_or(0, |m| m + 1);
    Ok(c)
}

fn parse_pauli_target(tok: &str) -> Option<(Pauli, usize)> {
    let (head, tail) = tok.split_at(1);
    let basis = match head {
        "X" => Pauli::X,
        "Y" => Pauli::Y,
        "Z" => Pauli::Z,
        _ => return None,
    };
    tail.parse().ok().map(|q| (basis, q))
}

/// Parses `rec[-k]`, returning k.
#[allow(clippy::type_complexity)]
fn parse_rec_target(tok: &str) -> Option<Result<usize, String>> {
    let inner = tok.strip_prefix("rec[")?.strip_suffix(']')?;
    let val: i64 = match inner.parse() {
        Ok(v) => v,
        Err(_) => return Some(Err(format!("bad record offset {inner:?}"))),
    };
    if val >= 0 {
        return Some(Err("record offsets must be negative".into()));
    }
    Some(Ok(-val as usize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpgroup::{low_index_normal_search, todd_coxeter, GroupPresentation, SearchConfig};
    use crate::tess::{color_tessellation, extract_tessellation};

    fn cube() -> Tessellation {
        let pres = GroupPresentation::triangle_rotation(4, 3).unwrap();
        let table = todd_coxeter(&pres, &[], 100_000).unwrap();
        let mut t = extract_tessellation(&table, 4, 3).unwrap();
        color_tessellation(&mut t).unwrap();
        t
    }

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
    fn torus_circuit_has_expected_shape() {
        let t = hex_torus();
        let c = build_floquet_circuit(&t, &ScheduleConfig::new(2)).unwrap();
        assert_eq!(c.n_qubits, 6);
        // 3 checks per round × 6 rounds + 6 readouts.
        assert_eq!(c.n_records, 24);
        // Init (1 blue face) + comparisons at rounds 4 and 5 (one blue, one
        // red face) + final closures: 1 blue face + 3 blue edges.
        assert_eq!(c.n_detectors, 7);
        assert_eq!(c.n_observables, 2 * t.genus);
        validate_determinism(&c).unwrap();
    }

    #[test]
    fn longer_schedules_gain_one_comparison_per_face_per_period() {
        let t = hex_torus();
        let short = build_floquet_circuit(&t, &ScheduleConfig::new(2)).unwrap();
        let long = build_floquet_circuit(&t, &ScheduleConfig::new(5)).unwrap();
        // Each extra period refreshes every face once more.
        assert_eq!(long.n_detectors - short.n_detectors, 3 * t.faces.len());
        validate_determinism(&long).unwrap();
    }

    #[test]
    fn sphere_code_has_no_observables() {
        let t = cube();
        let c = build_floquet_circuit(&t, &ScheduleConfig::new(2)).unwrap();
        assert_eq!(c.n_observables, 0);
        assert!(c.n_detectors > 0);
        validate_determinism(&c).unwrap();
    }

    #[test]
    fn all_init_bases_yield_deterministic_circuits() {
        let t = hex_torus();
        for basis in [Pauli::X, Pauli::Y, Pauli::Z] {
            let cfg = ScheduleConfig { init_basis: basis, ..ScheduleConfig::new(3) };
            let c = build_floquet_circuit(&t, &cfg).unwrap();
            validate_determinism(&c).unwrap();
        }
    }

    #[test]
    fn warmup_drops_early_detectors() {
        let t = hex_torus();
        let plain = build_floquet_circuit(&t, &ScheduleConfig::new(4)).unwrap();
        let cfg = ScheduleConfig { warmup_periods: 1, ..ScheduleConfig::new(4) };
        let warm = build_floquet_circuit(&t, &cfg).unwrap();
        // One init detector per init-color face and one comparison per face.
        assert!(warm.n_detectors < plain.n_detectors);
        validate_determinism(&warm).unwrap();
    }

    #[test]
    fn schedule_and_coloring_preconditions_are_checked() {
        let t = hex_torus();
        assert!(matches!(
            build_floquet_circuit(&t, &ScheduleConfig::new(1)),
            Err(CircuitError::BadSchedule(_))
        ));
        let mut bare = t.clone();
        bare.edge_color = None;
        assert!(matches!(
            build_floquet_circuit(&bare, &ScheduleConfig::new(2)),
            Err(CircuitError::Uncolored)
        ));
    }

    #[test]
    fn torus_supports_are_nontrivial_logicals() {
        let t = hex_torus();
        let supports = logical_readout_supports(&t, 2).unwrap();
        assert_eq!(supports.len(), 2);
        let face_color = t.face_color.as_ref().unwrap();
        for w in &supports {
            let wv = BitVec::from_ones(t.n_vertices, w);
            for f in 0..t.faces.len() {
                if face_color[f] != 2 {
                    let fv = BitVec::from_ones(t.n_vertices, &t.face_vertices[f]);
                    assert!(!wv.dot(&fv), "support anticommutes with a face stabilizer");
                }
            }
        }
        // The two classes are independent: their sum is not trivial either.
        let mut sum = BitVec::from_ones(t.n_vertices, &supports[0]);
        sum.xor_assign(&BitVec::from_ones(t.n_vertices, &supports[1]));
        assert!(!sum.is_zero());
    }

    #[test]
    fn text_round_trip_is_stable() {
        let t = hex_torus();
        let c = build_floquet_circuit(&t, &ScheduleConfig::new(2)).unwrap();
        let text = export_circuit_text(&c).unwrap();
        let back = import_circuit_text(&text).unwrap();
        assert_eq!(back.n_qubits, c.n_qubits);
        assert_eq!(back.n_records, c.n_records);
        assert_eq!(back.n_detectors, c.n_detectors);
        assert_eq!(back.n_observables, c.n_observables);
        assert_eq!(export_circuit_text(&back).unwrap(), text);
        validate_determinism(&back).unwrap();
    }

    #[test]
    fn import_rejects_malformed_lines() {
        assert!(matches!(
            import_circuit_text("FROB 1 2"),
            Err(CircuitError::Parse { line: 1, .. })
        ));
        assert!(import_circuit_text("MPP X0*Z1").is_err());
        assert!(import_circuit_text("DETECTOR rec[-1]").is_err());
        assert!(import_circuit_text("M(1.5) 0").is_err());
        assert!(import_circuit_text("MPP X0*X1\nDETECTOR rec[-1]").is_ok());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let c = import_circuit_text("# header\n\nR 0 1\nMPP X0*X1  # check\n").unwrap();
        assert_eq!(c.n_records, 1);
        assert_eq!(c.n_qubits, 2);
    }
}

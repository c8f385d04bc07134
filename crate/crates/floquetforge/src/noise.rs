//! Noise model transforms over noiseless Floquet circuits.
//!
//! Each transform rewrites a noiseless circuit into a noisy one without
//! renumbering measurement records, so detectors and observables survive
//! unchanged:
//!
//! * **Phenomenological** — single-qubit depolarizing noise on every data
//!   qubit after each measurement round except the readout layer, plus an
//!   independent flip on every measurement record.
//! * **EM3 ancilla** — each two-body check is compiled to an explicit
//!   ancilla parity gadget (reset, two controlled gates, ancilla readout),
//!   followed by one correlated error channel applying each of the 31
//!   non-trivial combinations of data Paulis and record flip with
//!   probability p/32.  The final data readout is noiseless.
//! * **SDEM3** — two-qubit depolarizing noise of strength 15p/16 before
//!   each check, a p/2 flip on each check record, and p/2 single-qubit
//!   errors anticommuting with the preparation (after initialization) and
//!   readout (before the final layer) bases.  No idle noise.
//! * **Erasure** — each check is independently erased with the
//!   repeat-until-success failure probability p_RUS(ε); an erased check
//!   reports a uniformly random outcome and dephases the measured
//!   operator, modeled as a 50% record flip plus a 50% anticommuting
//!   Pauli on the lower endpoint.  Erasure locations are heralded, so
//!   decoding builds a per-instance error model with `sim::build_dem`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{CircuitIR, ErrorKind, Gate2Kind, Instruction, Pauli};

fn data_qubits(c: &CircuitIR) -> Vec<usize> {
    (0..c.n_qubits).collect()
}

/// Pauli error kind anticommuting with the given basis.
fn anticommuting_kind(basis: Pauli) -> ErrorKind {
    match basis {
        Pauli::Z | Pauli::Y => ErrorKind::X,
        Pauli::X => ErrorKind::Z,
    }
}

/// Cyclic successor of the basis: the dephasing Pauli for erased checks.
fn erasure_kind(basis: Pauli) -> ErrorKind {
    match basis {
        Pauli::X => ErrorKind::Y,
        Pauli::Y => ErrorKind::Z,
        Pauli::Z => ErrorKind::X,
    }
}

/// Phenomenological noise: depolarizing channel of strength p on all data
/// qubits after every round but the readout layer, and a p flip on every
/// measurement record.
#[must_use]
pub fn apply_phenomenological(c: &CircuitIR, p: f64) -> CircuitIR {
    let data = data_qubits(c);
    let n_markers = c
        .instructions
        .iter()
        .filter(|i| matches!(i, Instruction::RoundMarker))
        .count();
    let mut out = CircuitIR::new(c.n_qubits);
    let mut seen_markers = 0;
    for ins in &c.instructions {
        match ins {
            Instruction::RoundMarker => {
                out.push(ins.clone());
                seen_markers += 1;
                if seen_markers < n_markers {
                    out.push(Instruction::PauliError {
                        targets: data.clone(),
                        p,
                        kind: ErrorKind::Depolarize,
                    });
                }
            }
            Instruction::PairMeasure { .. } | Instruction::SingleMeasure { .. } => {
                out.push(ins.clone());
                out.push(Instruction::FlipRecord { record: out.n_records - 1, p });
            }
            _ => out.push(ins.clone()),
        }
    }
    out
}

/// Gate kind realizing a two-body measurement of `basis ⊗ basis` through a
/// Z-ancilla: the controlled-X with the matching control basis.
fn gadget_kind(basis: Pauli) -> Gate2Kind {
    match basis {
        Pauli::X => Gate2Kind::Xcx,
        Pauli::Y => Gate2Kind::Ycx,
        Pauli::Z => Gate2Kind::Cx,
    }
}

/// EM3 ancilla model: compiles every check into a reset–entangle–measure
/// gadget on a per-edge ancilla and follows it with the 31 correlated
/// Pauli ⊗ record-flip errors, each of probability p/32.
#[must_use]
pub fn apply_em3_ancilla(c: &CircuitIR, p: f64) -> CircuitIR {
    let n_base = c.n_qubits;
    let n_edges = c
        .instructions
        .iter()
        .filter_map(|i| match i {
            Instruction::PairMeasure { edge, .. } => Some(edge + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let mut out = CircuitIR::new(n_base + n_edges);
    for ins in &c.instructions {
        match ins {
            Instruction::PairMeasure { edge, basis, pair } => {
                let anc = n_base + edge;
                let kind = gadget_kind(*basis);
                out.push(Instruction::SingleInit { qubit: anc, basis: Pauli::Z });
                out.push(Instruction::Gate2 { kind, control: pair[0], target: anc });
                out.push(Instruction::Gate2 { kind, control: pair[1], target: anc });
                let rec = out.n_records;
                out.push(Instruction::SingleMeasure { qubit: anc, basis: Pauli::Z });
                for pa in 0..4usize {
                    for pb in 0..4usize {
                        for f in 0..2usize {
                            if pa == 0 && pb == 0 && f == 0 {
                                continue;
                            }
                            let mut paulis = Vec::new();
                            if let Some(pl) = code_pauli(pa) {
                                paulis.push((pair[0], pl));
                            }
                            if let Some(pl) = code_pauli(pb) {
                                paulis.push((pair[1], pl));
                            }
                            let flips = if f == 1 { vec![rec] } else { Vec::new() };
                            out.push(Instruction::CorrelatedError {
                                p: p / 32.0,
                                paulis,
                                flips,
                            });
                        }
                    }
                }
            }
            _ => out.push(ins.clone()),
        }
    }
    out
}

fn code_pauli(code: usize) -> Option<Pauli> {
    match code {
        0 => None,
        1 => Some(Pauli::X),
        2 => Some(Pauli::Y),
        3 => Some(Pauli::Z),
        _ => unreachable!(),
    }
}

/// SDEM3: 15p/16 two-qubit depolarizing before each check, p/2 record
/// flips on checks, and p/2 anticommuting single-qubit errors after state
/// preparation and before the final readout.
#[must_use]
pub fn apply_sdem3(c: &CircuitIR, p: f64) -> CircuitIR {
    let data = data_qubits(c);
    // The preparation layer is the leading run of resets; the readout layer
    // starts at the first single-qubit measurement.
    let init_basis = c.instructions.iter().find_map(|i| match i {
        Instruction::SingleInit { basis, .. } => Some(*basis),
        _ => None,
    });
    let last_init = c
        .instructions
        .iter()
        .take_while(|i| matches!(i, Instruction::SingleInit { .. }))
        .count();
    let readout_basis = c.instructions.iter().find_map(|i| match i {
        Instruction::SingleMeasure { basis, .. } => Some(*basis),
        _ => None,
    });

    let mut out = CircuitIR::new(c.n_qubits);
    let mut readout_started = false;
    for (idx, ins) in c.instructions.iter().enumerate() {
        if let (Instruction::SingleMeasure { .. }, false) = (ins, readout_started) {
            readout_started = true;
            if let Some(b) = readout_basis {
                out.push(Instruction::PauliError {
                    targets: data.clone(),
                    p: p / 2.0,
                    kind: anticommuting_kind(b),
                });
            }
        }
        match ins {
            Instruction::PairMeasure { pair, .. } => {
                out.push(Instruction::Depolarize2 { pair: *pair, p: 15.0 * p / 16.0 });
                out.push(ins.clone());
                out.push(Instruction::FlipRecord { record: out.n_records - 1, p: p / 2.0 });
            }
            _ => out.push(ins.clone()),
        }
        if idx + 1 == last_init {
            if let Some(b) = init_basis {
                out.push(Instruction::PauliError {
                    targets: data.clone(),
                    p: p / 2.0,
                    kind: anticommuting_kind(b),
                });
            }
        }
    }
    out
}

/// Failure probability of a repeat-until-success two-body measurement when
/// each participating qubit is erased with probability ε per attempt:
/// p_RUS = (2 − 2(1−ε)²) / (2 − (1−ε)²).
pub fn p_rus(eps: f64) -> f64 {
    let s = (1.0 - eps) * (1.0 - eps);
    (2.0 - 2.0 * s) / (2.0 - s)
}

/// Samples which checks are erased: one flag per `PairMeasure`, in
/// instruction order, each set with probability `p_rus(eps)`.
pub fn erasure_pattern(c: &CircuitIR, eps: f64, seed: u64) -> Vec<bool> {
    let p = p_rus(eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    c.instructions
        .iter()
        .filter(|i| matches!(i, Instruction::PairMeasure { .. }))
        .map(|_| rng.gen::<f64>() < p)
        .collect()
}

/// Applies an erasure pattern: each flagged check reports a uniformly
/// random outcome (50% record flip) and dephases the measured operator
/// (50% anticommuting Pauli on the lower endpoint).  The result is decoded
/// against its own per-instance `sim::build_dem`.
#[must_use]
pub fn erase_instance(c: &CircuitIR, pattern: &[bool]) -> CircuitIR {
    let mut out = CircuitIR::new(c.n_qubits);
    let mut k = 0usize;
    for ins in &c.instructions {
        match ins {
            Instruction::PairMeasure { basis, pair, .. } => {
                out.push(ins.clone());
                if pattern.get(k).copied().unwrap_or(false) {
                    out.push(Instruction::FlipRecord { record: out.n_records - 1, p: 0.5 });
                    out.push(Instruction::PauliError {
                        targets: vec![pair[0].min(pair[1])],
                        p: 0.5,
                        kind: erasure_kind(*basis),
                    });
                }
                k += 1;
            }
            _ => out.push(ins.clone()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_floquet_circuit, validate_determinism, ScheduleConfig};
    use crate::fpgroup::{low_index_normal_search, GroupPresentation, SearchConfig};
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

    fn count<F: Fn(&Instruction) -> bool>(c: &CircuitIR, f: F) -> usize {
        c.instructions.iter().filter(|i| f(i)).count()
    }

    #[test]
    fn phenomenological_structure() {
        let c = build_floquet_circuit(&hex_torus(), &ScheduleConfig::new(2)).unwrap();
        let noisy = apply_phenomenological(&c, 0.01);
        // 7 markers (6 rounds + readout), idle noise after all but the last.
        assert_eq!(count(&noisy, |i| matches!(i, Instruction::RoundMarker)), 7);
        assert_eq!(
            count(&noisy, |i| matches!(
                i,
                Instruction::PauliError { kind: ErrorKind::Depolarize, .. }
            )),
            6
        );
        assert_eq!(count(&noisy, |i| matches!(i, Instruction::FlipRecord { .. })), 24);
        assert_eq!(noisy.n_records, c.n_records);
        assert_eq!(noisy.n_detectors, c.n_detectors);
        validate_determinism(&noisy).unwrap();
    }

    #[test]
    fn em3_structure_and_determinism() {
        let c = build_floquet_circuit(&hex_torus(), &ScheduleConfig::new(2)).unwrap();
        let noisy = apply_em3_ancilla(&c, 0.02);
        assert_eq!(noisy.n_qubits, 6 + 9);
        assert_eq!(noisy.n_records, c.n_records);
        assert_eq!(count(&noisy, |i| matches!(i, Instruction::PairMeasure { .. })), 0);
        // 18 checks × (1 gadget readout) + 6 data readouts.
        assert_eq!(count(&noisy, |i| matches!(i, Instruction::SingleMeasure { .. })), 18 + 6);
        assert_eq!(count(&noisy, |i| matches!(i, Instruction::Gate2 { .. })), 36);
        assert_eq!(
            count(&noisy, |i| matches!(i, Instruction::CorrelatedError { .. })),
            31 * 18
        );
        // The gadget compilation must preserve every detector's determinism.
        validate_determinism(&noisy).unwrap();
    }

    #[test]
    fn em3_correlated_channel_is_uniform() {
        let c = build_floquet_circuit(&hex_torus(), &ScheduleConfig::new(2)).unwrap();
        let p = 0.02;
        let noisy = apply_em3_ancilla(&c, p);
        let mut with_flip = 0;
        for ins in &noisy.instructions {
            if let Instruction::CorrelatedError { p: q, paulis, flips } = ins {
                assert!((q - p / 32.0).abs() < 1e-15);
                assert!(paulis.len() <= 2);
                assert!(!paulis.is_empty() || !flips.is_empty());
                if !flips.is_empty() {
                    with_flip += 1;
                }
            }
        }
        // Half of the 32 combinations carry a record flip: 16 per check.
        assert_eq!(with_flip, 16 * 18);
    }

    #[test]
    fn sdem3_structure() {
        let c = build_floquet_circuit(&hex_torus(), &ScheduleConfig::new(2)).unwrap();
        let p = 0.008;
        let noisy = apply_sdem3(&c, p);
        assert_eq!(count(&noisy, |i| matches!(i, Instruction::Depolarize2 { .. })), 18);
        assert_eq!(count(&noisy, |i| matches!(i, Instruction::FlipRecord { .. })), 18);
        let layers: Vec<_> = noisy
            .instructions
            .iter()
            .filter_map(|i| match i {
                Instruction::PauliError { targets, p: q, kind } => Some((targets.len(), *q, *kind)),
                _ => None,
            })
            .collect();
        // One preparation layer and one readout layer over all data qubits.
        assert_eq!(layers, vec![(6, p / 2.0, ErrorKind::X), (6, p / 2.0, ErrorKind::X)]);
        for ins in &noisy.instructions {
            if let Instruction::Depolarize2 { p: q, .. } = ins {
                assert!((q - 15.0 * p / 16.0).abs() < 1e-15);
            }
        }
        // Preparation noise comes after the last reset, readout noise
        // before the first single-qubit measurement.
        let first_err = noisy
            .instructions
            .iter()
            .position(|i| matches!(i, Instruction::PauliError { .. }))
            .unwrap();
        assert!(matches!(noisy.instructions[first_err - 1], Instruction::SingleInit { .. }));
        let second_err = noisy
            .instructions
            .iter()
            .rposition(|i| matches!(i, Instruction::PauliError { .. }))
            .unwrap();
        assert!(matches!(
            noisy.instructions[second_err + 1],
            Instruction::SingleMeasure { .. }
        ));
        validate_determinism(&noisy).unwrap();
    }

    #[test]
    fn p_rus_closed_forms() {
        assert_eq!(p_rus(0.0), 0.0);
        assert_eq!(p_rus(1.0), 1.0);
        assert!((p_rus(0.5) - 6.0 / 7.0).abs() < 1e-15);
        // Leading order 4ε for small ε.
        assert!((p_rus(1e-6) - 4e-6).abs() < 1e-10);
    }

    #[test]
    fn erasure_instances_keep_record_indices() {
        let c = build_floquet_circuit(&hex_torus(), &ScheduleConfig::new(2)).unwrap();
        let pattern = erasure_pattern(&c, 0.3, 17);
        assert_eq!(pattern.len(), 18);
        assert!(pattern.iter().any(|&b| b));
        assert!(!pattern.iter().all(|&b| b));
        let inst = erase_instance(&c, &pattern);
        assert_eq!(inst.n_records, c.n_records);
        assert_eq!(inst.n_detectors, c.n_detectors);
        let n_erased = pattern.iter().filter(|&&b| b).count();
        assert_eq!(count(&inst, |i| matches!(i, Instruction::FlipRecord { p, .. } if *p == 0.5)), n_erased);
        assert_eq!(
            count(&inst, |i| matches!(i, Instruction::PauliError { p, .. } if *p == 0.5)),
            n_erased
        );
        validate_determinism(&inst).unwrap();
        // Identical seeds reproduce the pattern.
        assert_eq!(pattern, erasure_pattern(&c, 0.3, 17));
        assert_ne!(pattern, erasure_pattern(&c, 0.3, 18));
    }

    #[test]
    fn erased_checks_have_zero_weight_symptoms() {
        let c = build_floquet_circuit(&hex_torus(), &ScheduleConfig::new(2)).unwrap();
        let mut pattern = vec![false; 18];
        pattern[7] = true;
        let inst = erase_instance(&c, &pattern);
        let dem = crate::sim::build_dem(&inst);
        let half: Vec<_> = dem.mechanisms.iter().filter(|m| m.p == 0.5).collect();
        // The record flip and the dephasing Pauli each contribute one
        // mechanism at exactly p = 1/2.
        assert!(!half.is_empty() && half.len() <= 2);
    }
}

//! Construction, simulation, and decoding of hyperbolic and semi-hyperbolic
//! Floquet codes.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`fpgroup`] — finitely presented triangle rotation groups, Todd–Coxeter
//!    coset enumeration, and a desk-scale normal subgroup search.
//! 2. [`tess`] — extraction of `{p,3}` tessellations of closed surfaces from
//!    coset tables, face/edge three-coloring, and parameter validation.
//! 3. [`finegrain`] — lattice subdivision producing semi-hyperbolic codes.
//! 4. [`geometry`] — Poincaré disk embeddings and SVG rendering (advisory).
//! 5. [`homology`] — GF(2) homology of restricted duals: embedded distance
//!    and logical operator bases.
//! 6. [`circuit`] — Floquet measurement circuits with detectors/observables.
//! 7. [`noise`] — phenomenological, EM3-ancilla, SDEM3, and erasure models.
//! 8. [`sim`] — tableau reference simulator, Pauli-frame sampler, and
//!    detector error model extraction.
//! 9. [`decoder`] — minimum-weight perfect matching over DEM graphs.
//! 10. [`harness`] — experiment orchestration, metrics, and reports.

pub mod circuit;
pub mod decoder;
pub mod exec;
pub mod finegrain;
pub mod fpgroup;
pub mod geometry;
pub mod gf2;
pub mod harness;
pub mod homology;
pub mod noise;
pub mod sim;
pub mod tess;

//! Latent Space Algebra (LSA) toolkit.
//!
//! A library for probing how well learned embeddings track compositions of
//! geometric transformations, organized around the solvability hierarchy of
//! the underlying transformation groups:
//!
//! - [`groups`] — permutation and matrix group algebra: composition,
//!   commutators, derived series, solvability classification, word
//!   evaluation, and the icosahedral subgroup of SO(3).
//! - [`barrington`] — a constructive compiler from Boolean formulas to
//!   width-5 permutation branching programs over A₅.
//! - [`scene`] — the three-level LSA benchmark generator: latent pose
//!   states, generator sets, procedural meshes, a deterministic software
//!   rasterizer, and random-walk trajectory sampling.
//! - [`embed`] — frame encoders, the linear transition probe, and its
//!   training loop.
//! - [`evalrec`] — recursive rollout evaluation, identity-baseline
//!   normalization, collapse detection, and the error-compounding
//!   simulator.
//! - [`experiment`] — experiment configs and the generate/train/eval
//!   pipeline used by the CLI.
//!
//! Composition convention used throughout: `(a · b)(x) = a(b(x))`, i.e.
//! the right factor acts first, matching matrix action on column vectors.

pub mod barrington;
pub mod embed;
pub mod evalrec;
pub mod experiment;
pub mod groups;
pub mod linalg;
pub mod scene;

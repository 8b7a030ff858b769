//! Positive bistochastic maps on 3x3 complex matrices, represented as 8x8
//! real matrices acting on Gell-Mann coherence vectors.
//!
//! A self-adjoint `A = a0 λ0 + Σ a_k λ_k` is mapped by `S_x` to
//! `a0 λ0 + Σ (x a)_k λ_k`; `x` is in Λ when `S_x` is positive. The modules
//! decide positivity, extract the idempotent of the semigroup generated by
//! `x`, reduce `x` to canonical form under `Ad SU(3)` and test whether `x`
//! is an extreme point of Λ.

pub mod catalog;
pub mod cli;
pub mod coherence;
pub mod extremality;
pub mod linalg;
pub mod positivity;
pub mod semigroup;

pub use catalog::{choi_map, choi_matrix, s0_matrix, transpose_matrix, ChoiParams, Generator};
pub use coherence::{
    apply_map, from_coherence, gellmann_basis, map_to_matrix, to_coherence, CoherenceVector, Hermitian3, MapMatrix,
};
pub use extremality::{active_pairs, classify_candidate, extreme_in_lambda, CandidateTag, ExtremalityVerdict};
pub use positivity::{is_positive, min_expectation, PureState, Verdict};
pub use semigroup::{
    adjoint_rep, conjugate_to_canonical, decompose, idempotent_of, q_index, rank_class, reduce_canonical,
    CanonicalClass,
};

//! Ideal, corrupted and mapped representations for probing what the
//! metrics reward.

pub mod construct;
pub mod corrupt;
pub mod table2;

pub use construct::{ideal_scalar, ideal_vector, learned_representation, map_embed, map_repeat, unit_embeddings};
pub use corrupt::{corrupt, mix_matrix, CorruptionKind, CorruptionSpec, MAX_MIX_ATTEMPTS};
pub use table2::{run_table2, LearnedSource, Section, Table2, Table2Config, Table2Row, TABLE2_COLUMNS};

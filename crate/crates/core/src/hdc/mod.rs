//! Binary hypervectors, class codebooks and the random-hypervector capacity model.

mod capacity;
mod codebook;
mod vector;

pub use capacity::{
    band_z_score, capacity, crossover_dimension, ln_non_orthogonal_probability, ln_two_sided_tail,
    log10_capacity, orthogonality_probability, ORTHOGONALITY_TOLERANCE,
};
pub use codebook::ClassCodebook;
pub use vector::{BinaryHypervector, CosineMode};

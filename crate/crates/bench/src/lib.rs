//! Shared inputs for the benchmarks.

use pencilph_core::pencil::MatrixPencil;
use pencilph_core::recipes::{pencil_corpus, random_stabilizable, rng, StabilityClass};
use pencilph_core::DescriptorSystem;

/// First corpus pencil of size `n` with the requested class.
pub fn pencil_of_size(n: usize, class: StabilityClass) -> MatrixPencil {
    (0u64..)
        .flat_map(|seed| pencil_corpus(seed, 8, n))
        .find(|p| p.pencil.n() == n && p.class == class)
        .expect("corpus eventually hits every size")
        .pencil
}

pub fn stabilizable_system(seed: u64) -> DescriptorSystem {
    random_stabilizable(&mut rng(seed), 8, false).system
}

//! Retina-inspired binary descriptor with cascaded matching.

mod bits;
mod describe;
mod matching;
mod pattern;
mod sampling;

pub use bits::{FreakDescriptor, CASCADE_BITS, CASCADE_COUNT, DESCRIPTOR_BITS};
pub use describe::{describe, describe_all, describe_with, estimate_orientation};
pub use matching::{
    cascade_match, hamming_distance, hamming_distance_bits, match_descriptors, CascadeOutcome, Match, MatchPolicy,
};
pub use pattern::{
    build_pattern, ReceptiveField, SamplingPattern, FIELDS_PER_RING, FIELD_COUNT, ORIENTATION_PAIR_COUNT,
    PATTERN_VERSION, RING_COUNT,
};
pub use sampling::{sample_field, IntegralImage, SIGMA_REF};

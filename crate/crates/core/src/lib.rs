//! Relative positional masks for low-rank attention over arbitrary point geometry.
//!
//! A mask `M_ij = f(r_i - r_j)` is written through its Fourier transform and discretized
//! by a quadrature over frequencies. Applying `M` to a vector then costs two nonuniform
//! Fourier transforms instead of an `L x L` product ([`fastmult`]), which is what lets
//! masked attention stay linear in `L` when combined with low-rank feature maps
//! ([`attention::masked_lowrank_attention`]).
//!
//! Every fast path has a dense counterpart (`dense_*`, `*_direct`) that materializes the
//! quantity it computes, so results can be checked to roundoff.

pub mod attention;
pub mod batch;
pub mod cloud;
pub mod encodings;
pub mod error;
pub mod fastmult;
pub mod feature_map;
pub mod nudft;
pub mod quadrature;
pub mod rng;

pub use attention::{
    dense_masked_attention, dense_softmax_attention, masked_lowrank_attention, performer_attention,
    AttentionKernel, AttentionOutput, MaskBackend, DENOMINATOR_FLOOR,
};
pub use batch::{validate_batch, AttentionBatch};
pub use cloud::{normalize_coords, parse_point_cloud, PointCloud};
pub use error::{Error, Result};
pub use fastmult::{
    blended_fastmult, dense_ideal_mask, dense_quadrature_mask, fastmult, ideal_mask_value, Backend,
    BlendSchedule, FastMultPlan, MaskSpec,
};
pub use feature_map::{apply_feature_map, FeatureKind, FeatureMap};
pub use nudft::{ComplexVector, NufftAccuracy};
pub use quadrature::{ModulationFunction, ModulationKind, QuadratureSet};
pub use rng::RngSeed;

//! Model core: point descriptors, backbone, prototype attention, semantic
//! kernels and the visual-semantic similarity matrix.

mod backbone;
mod descriptor;
mod kernels;
mod model;
mod prototypes;
mod similarity;

pub use backbone::{extract_features, Backbone, BackboneCache};
pub use descriptor::{normalized_eigenvalues, point_descriptor, point_descriptor_at, DENSITY_CAP, DESCRIPTOR_DIM};
pub use kernels::{semantic_kernels, GeneratorCache, SemanticGenerator, SemanticKernelBank};
pub use model::{ModelCache, ModelConfig, SegmentationModel};
pub use prototypes::{visual_representation, AttentionCache, PrototypeBank, VisualRepresentation};
pub use similarity::{similarity, similarity_backward, similarity_per_kernel};

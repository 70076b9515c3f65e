//! Synthetic scenes whose object categories are built from shared geometric
//! primitives, plus masking, augmentation and scene file I/O.

mod augment;
mod generate;
mod io;
mod primitive;
mod scene;
mod taxonomy;

pub use augment::{augment_scene, rotate_scene, scale_scene, AugmentStrength};
pub use generate::{generate_scene, generate_scenes, SceneConfig};
pub use io::{parse_scene, read_scene, scene_to_string, write_scene, SCENE_FORMAT_VERSION};
pub use primitive::{pose_point, sample_primitive, PrimitiveKind, PrimitiveSpec, Shape};
pub use scene::{mask_unseen_labels, HiddenTruth, MaskedScene, Scene, SplitSpec, UNLABELED};
pub use taxonomy::{
    default_taxonomy, mixture_overlap, CategoryTemplate, DefaultTaxonomy, PartTemplate, Taxonomy,
};

//! Parallel batch-dynamic k-d trees.
//!
//! [`BdlTree`] keeps a small heap-layout buffer tree plus a logarithmic
//! sequence of static van Emde Boas layout trees, the i-th of which holds
//! `2^i * X` points when occupied. Batches of insertions merge levels like a
//! binary counter, deletions tombstone points in place, and k-NN queries scan
//! every level with one shared candidate buffer per query.

pub mod baselines;
pub mod bdl_tree;
pub mod bloom;
pub mod datagen;
pub mod error;
pub mod geometry;
pub mod index;
pub mod knnbuf;
pub mod parprim;
pub mod pointio;
pub mod pointset;
pub mod static_tree;

pub use baselines::{B1Tree, B2Tree};
pub use bdl_tree::{BdlConfig, BdlStats, BdlTree, DEFAULT_BUFFER_SIZE};
pub use datagen::{gen_uniform, gen_visualvar, DatasetKind, DatasetSpec, VisualVarParams};
pub use error::{KdError, Result};
pub use geometry::{squared_distance, BoundingBox, BoxRelation, Point};
pub use index::{DynamicIndex, KnnResult};
pub use knnbuf::{KnnBuffer, Neighbor};
pub use pointio::{read_points, write_points, Format};
pub use pointset::PointSet;
pub use static_tree::{Layout, Node, SplitHeuristic, StaticTree, TreeParams, LEAF_CAP};

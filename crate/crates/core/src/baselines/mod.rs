//! Comparison strategies behind the same [`DynamicIndex`](crate::DynamicIndex)
//! interface: [`B1Tree`] rebuilds after every batch, [`B2Tree`] never does.

mod b1;
mod b2;

pub use b1::B1Tree;
pub use b2::B2Tree;

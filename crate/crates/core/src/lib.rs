mod error;
mod linalg;
mod par;

pub mod dependence;
pub mod io;
pub mod kernels;
pub mod lap;
pub mod layout;
pub mod matcher;
pub mod model;
pub mod permutation;
pub mod regression;
pub mod sample;

pub use error::{Error, Result};
pub use model::{DependenceModel, LambdaPlacement};
pub use par::is_parallel;
pub use permutation::{matched_accuracy, Permutation};
pub use sample::SampleSet;

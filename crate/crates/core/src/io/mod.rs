//! File formats, synthetic data generators and result serialization.
//!
//! Byte-level descriptions of every format live in `docs/FORMATS.md`.

mod csv;
mod gen;
mod pnm;
mod result;

pub use self::csv::{
    format_f64, load_matrix, load_permutation, load_samples, read_matrix, save_matrix, save_permutation,
    save_samples, write_matrix,
};
pub use self::gen::{gen_color_clusters, gen_cubic, gen_split_halves, ColorClusters, GeneratedPair, SplitMode};
pub use self::pnm::{load_pnm, read_pnm, rgb_to_lab, save_pnm, write_pnm, Image};
pub use self::result::{
    load_match_document, load_regressor, save_match_document, save_regressor, write_atomic, ArmSummary,
    MatchDocument, RegressorDocument, MATCH_SCHEMA, MATCH_SCHEMA_VERSION, REGRESSOR_SCHEMA, TOOL_VERSION,
};

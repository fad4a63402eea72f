//! Semi-automatic document layout annotation.
//!
//! The crate turns born-digital PDF catalogs into labeled layout datasets:
//!
//! * [`ingest`] rasterizes PDF pages and extracts positioned text runs, and
//!   provides the resize / Otsu / binarize preprocessing chain.
//! * [`formats`] imports and exports PICK, DocBank, XFUND and FUNSD datasets.
//! * [`boxops`] is the manual cleaning algebra: merge, group, delete, relabel.
//! * [`autolabel`] proposes labels, either with a built-in heuristic or by
//!   asking a remote model server.
//! * [`ops`] wraps those edits as serializable page operations.
//! * [`metrics`] computes entity-level precision, recall, F1 and accuracy
//!   (mEP / mER / mEF / mEA) and splits datasets into train/val pages.
//!
//! Numeric routines are generic over [`Scalar`]; the aliases below fix the
//! scalar to `f64` for everyday use.

pub mod autolabel;
pub mod boxops;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod ops;
pub mod scalar;
pub mod store;
pub mod testkit;

pub use error::{Error, Result};
pub use model::{
    validate_project, LabelDef, LabelSchema, Page, Project, ProjectStats, Provenance, Rgb, Rule, Segment, Split,
    Violation,
};
pub use scalar::Scalar;
pub use store::{load_project, save_project};

/// Page-pixel quadrilateral.
pub type Quad = geometry::Quad<f64>;
/// Page-pixel axis-aligned rectangle.
pub type Rect = geometry::Rect<f64>;
pub type Point = geometry::Point<f64>;
/// Entity scores in floating point.
pub type Scores = metrics::EntityScores<f64>;
/// Entity scores as exact fractions.
pub type ExactScores = metrics::EntityScores<num_rational::BigRational>;
pub type EvalReport = metrics::EvalReport<f64>;

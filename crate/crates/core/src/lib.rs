//! Rasch rating-scale calibration of agile-transformation success-factor
//! assessments.
//!
//! The pipeline reads a factor catalog, team-member current-state responses
//! and an organization target profile, codes the target/current gaps into
//! ordinal categories, calibrates a joint maximum likelihood rating-scale
//! model, computes infit/outfit mean squares, and ranks the factors from
//! hardest to easiest to implement.
//!
//! ```no_run
//! use rasch_assess::{catalog, ingest, pipeline};
//!
//! let factors = catalog::default_catalog();
//! let responses = std::fs::read_to_string("responses.csv").unwrap();
//! let targets = std::fs::read_to_string("targets.csv").unwrap();
//! let records = ingest::parse_responses(&responses, &factors).unwrap();
//! let profile = ingest::parse_targets(&targets, &factors).unwrap();
//! let report = pipeline::run(&factors, &records, &profile, &pipeline::PipelineConfig::default())
//!     .unwrap();
//! println!("{}", rasch_assess::report::render(&report, rasch_assess::report::Format::Markdown));
//! ```

pub mod catalog;
pub mod cli;
pub mod engine;
pub mod findings;
pub mod fit;
pub mod ingest;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod wright;

pub use catalog::{FactorCatalog, FactorGroup, SuccessFactor};
pub use engine::{
    calibrate, initialize, standard_errors, CalibrationConfig, CalibrationError, CalibrationResult,
    CategoryCollapse, ItemParameters, PersonParameters,
};
pub use findings::{Finding, ValidationError};
pub use fit::{FitBand, FitClass, FitFlag, FitStatistic, FitStatistics};
pub use ingest::{IngestError, LikertScore, RespondentRecord, TargetProfile};
pub use matrix::CodedMatrix;
pub use model::ThresholdVector;
pub use report::RankingReport;

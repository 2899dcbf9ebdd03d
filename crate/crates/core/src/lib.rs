//! Grammatical evolution of personalized blood-glucose models.
//!
//! The pipeline is: parse a BNF grammar, map integer chromosomes to
//! expressions through it, simulate each expression as a one-step-ahead
//! glucose model over a patient's records, score the estimate, and evolve the
//! chromosomes with a generational GA.

pub mod dataset;
pub mod evolver;
pub mod expression;
pub mod fitness;
pub mod grammar;
pub mod grammars;
pub mod mapper;
pub mod simulate;

pub use dataset::{load_patient, read_report, write_report, DatasetError, RunReport};
pub use evolver::{run, GaConfig, MutationMode, Problem, RunResult};
pub use expression::{parse_expr, Expr};
pub use fitness::{Fitness, ObjectiveId};
pub use grammar::Grammar;
pub use grammars::GrammarId;
pub use mapper::{map_genotype, Chromosome};
pub use simulate::{simulate, PatientSeries};

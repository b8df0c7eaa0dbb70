//! Conformance relations, the repair loop and test alignment.

pub mod assurance;
pub mod conformance;
pub mod evolve;
pub mod results;

pub use assurance::{automated_assurance, Aligned, Triple};
pub use conformance::{
    assurance_program, conforms_prog_spec, conforms_prog_test, conforms_spec_test, spec_to_program, test_to_spec,
    ConformanceVerdict, Relation, TestSpec,
};
pub use evolve::{co_evolve, Admission, Budget, Candidate, CampaignLog, Evolved, Mode, Outcome, PatchRecord, Session};

use crate::intent::IntentError;
use crate::lang::LangError;
use crate::solver::SolverError;
use crate::vcgen::VcError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoevolveError {
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Vc(#[from] VcError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("no method named '{0}'")]
    UnknownMethod(String),
    #[error("test shape: {0}")]
    TestShape(String),
    #[error("internal: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<IntentError> for CoevolveError {
    fn from(e: IntentError) -> Self {
        match e {
            IntentError::Vc(v) => CoevolveError::Vc(v),
            IntentError::Solver(s) => CoevolveError::Solver(s),
        }
    }
}

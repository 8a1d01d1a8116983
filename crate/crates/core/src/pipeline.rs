//! Validate, search, round and certify in one call.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::instance::Instance;
use crate::rounding::{round, round_trivial, Division, DivisionError};
use crate::simplex::{GeometryError, HalfGrid, KnifeVector};
use crate::solver::{grid_for, search, SearchOptions, SolveError, Witness};
use crate::verify::{certify, check_witness, Assignment, Mode, VerifyError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid instance:\n{0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Division(#[from] DivisionError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("self-verification failed for division {division:?}: {detail}")]
    NotCertified { division: Division, detail: String },
}

impl PipelineError {
    /// 1 for a division that failed its own check, 3 for a contradicted
    /// existence theorem or internal inconsistency, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::NotCertified { .. } => 1,
            PipelineError::Solve(SolveError::TheoremViolation { .. } | SolveError::Internal(_)) => 3,
            PipelineError::Verify(VerifyError::NoFeasibleDivision { .. }) => 3,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Stats {
    pub simplices_scanned: u64,
    /// Wall time; the only field that differs between identical runs.
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secretive_agent: Option<usize>,
    pub division: Division,
    pub witness: Witness,
    /// Doubled knife positions of the rounded simplex, absent when no search ran.
    pub simplex: Option<Vec<KnifeVector>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepted_index: Option<u64>,
    pub stats: Stats,
}

pub fn validate(inst: &Instance) -> Result<(), PipelineError> {
    let report = inst.validate();
    if report.is_valid() {
        Ok(())
    } else {
        Err(PipelineError::InvalidInstance(report.to_string()))
    }
}

/// Runs the full pipeline. With `forced`, the given simplex is rounded
/// instead of searched for, and witnesses come from matching.
pub fn solve(
    inst: &Instance,
    mode: Mode,
    opts: &SearchOptions,
    forced: Option<Vec<KnifeVector>>,
) -> Result<SolveReport, PipelineError> {
    let started = Instant::now();
    validate(inst)?;
    let parts = match grid_for(inst, mode) {
        Err(SolveError::TooFewItems { parts, .. }) => parts,
        Err(e) => return Err(e.into()),
        Ok(grid) => grid.parts(),
    };
    let (division, witness, simplex, scanned, index) = if let Some(vertices) = forced {
        let grid = HalfGrid::new(inst.items(), parts)?;
        let simplex = grid.simplex_from_vertices(vertices)?;
        let division = round(&grid, &simplex)?;
        let witness = matched_witness(inst, &division, mode)?;
        (division, witness, Some(simplex.vertices().to_vec()), 0, None)
    } else if inst.items() < parts {
        let division = round_trivial(parts, inst.items())?;
        let witness = matched_witness(inst, &division, mode)?;
        (division, witness, None, 0, None)
    } else {
        let outcome = search(inst, mode, opts)?;
        let grid = grid_for(inst, mode)?;
        let division = round(&grid, &outcome.simplex)?;
        if !check_witness(inst, &division, mode, outcome.witness.assignments())? {
            let detail = match certify(inst, &division, mode)? {
                Some(_) => "the search witness does not certify it, although another assignment would",
                None => "no assignment certifies it",
            };
            return Err(PipelineError::NotCertified { division, detail: detail.into() });
        }
        (division, outcome.witness, Some(outcome.simplex.vertices().to_vec()), outcome.scanned, outcome.index)
    };
    Ok(SolveReport {
        mode: mode.name(),
        secretive_agent: match mode {
            Mode::Secretive(a) => Some(a + 1),
            _ => None,
        },
        division,
        witness,
        simplex,
        accepted_index: index,
        stats: Stats { simplices_scanned: scanned, elapsed_ms: started.elapsed().as_millis() as u64 },
    })
}

fn matched_witness(inst: &Instance, division: &Division, mode: Mode) -> Result<Witness, PipelineError> {
    let Some(mut family) = certify(inst, division, mode)? else {
        return Err(PipelineError::NotCertified {
            division: division.clone(),
            detail: "no assignment certifies it".into(),
        });
    };
    Ok(match mode {
        Mode::Plain => Witness::Plain(family.pop().unwrap_or_else(|| Assignment::identity(inst.agents()))),
        Mode::Secretive(_) => Witness::Secretive(family),
        Mode::Extra => Witness::Extra(family),
    })
}

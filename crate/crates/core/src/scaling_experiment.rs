//! Sweep orchestration: common-noise ensembles across a covariance-shrinking
//! noise family against the independent-noise limit solver.

use crate::Result;

pub struct Placeholder;

pub fn placeholder() -> Result<()> {
    Ok(())
}

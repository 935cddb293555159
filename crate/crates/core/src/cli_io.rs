//! Configuration, execution entry points and persistence.

use crate::Result;

pub fn placeholder() -> Result<()> {
    Ok(())
}

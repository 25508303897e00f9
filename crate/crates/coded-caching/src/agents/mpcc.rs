//! Most-popular coded caching: cache the currently most popular contents
//! at the highest levels, no learning and no fine-tune.

use crate::agents::vfa::coarse_assign;
use crate::error::{Error, Result};
use crate::model::{CachingAction, PopularityProfile, SystemParams};

/// Greedy allocation by instantaneous popularity: block assignment of
/// levels `l_max..1` to contents sorted by `theta` descending.
pub fn mpcc_select(theta: &PopularityProfile, sys: &SystemParams) -> Result<CachingAction> {
    sys.validate()?;
    if theta.len() != sys.c {
        return Err(Error::DimensionMismatch {
            expected: sys.c,
            got: theta.len(),
        });
    }
    Ok(coarse_assign(theta.theta(), sys))
}

//! Deciding approximate Walrasian equilibria in exchange economies.
//!
//! Given an economy and an allocation, the library either certifies the
//! allocation as an epsilon-equilibrium (producing supporting prices) or
//! exhibits a small blocking coalition. The decision reduces to a convex hull
//! membership query over bounded "better-than" trade sets, answered by
//! oracle-driven convex optimization.

// `!(x > 0.0)` validation guards are deliberate: unlike `x <= 0.0` they also
// reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coalitions;
pub mod convexgeom;
pub mod economy;
pub mod equilibrium;
pub mod error;
pub mod linalg;
pub mod oracle;

pub use economy::{Allocation, Consumer, Economy, ReplicaAllocation, UtilitySpec};
pub use equilibrium::{test_walrasian, ApproxParams, Mode, Verdict};
pub use error::{Error, Result};

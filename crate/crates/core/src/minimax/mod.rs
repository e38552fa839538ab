//! Lower-bound machinery: packings, hypothesis classes, KL divergence and
//! the Fano bound.

mod fano;
mod hypothesis;
mod packing;

pub use fano::{fano_bound, fano_bound_count, kl_gaussian, lower_rate, minimax_report, LowerRate, MinimaxReport};
pub use hypothesis::{
    build_hypothesis_col, build_hypothesis_row, col_member, row_member, HypothesisKind, HypothesisSet,
};
pub use packing::{build_sign_packing, build_support_packing, greedy_packing, log_binomial, BitString, PackingSet};

/// Minimum fraction of differing signs in the sign packings.
pub const SIGN_MIN_FRACTION: f64 = 1.0 / 8.0;
/// Log-count per sign in the sign packings.
pub const SIGN_TARGET_RATE: f64 = 3.0 / 25.0;

//! The nested construction of a Lipschitz streamfunction whose flow map has unbounded
//! variation: parameters, geometry, the fields `f_n` and `f̃`, crossing times and the
//! measured quantities.

mod field;
mod ladder;
mod mollify;
mod params;
mod refine;
mod tree;

pub use field::{CounterexampleField, FIRST_SIDE, JumpSegment, Layout, LevelPath, Piece, SLOW_BANDS, THETA};
pub use ladder::*;
pub use mollify::*;
pub use params::{
    formula_params, level_params, q, side, sigma, sigma_limit, sigma_limit_with, sigma_log_factor, to_f64,
    to_string, LevelParams, Scalars, Q,
};
pub use refine::{strip_tv, tv_refinement, StripGrid, StripTv, TvRefinement};
pub use tree::{CantorTree, Component, ComponentParts, RectQ};

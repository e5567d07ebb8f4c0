//! Discrete total variation of `X(t)·e₁` on a fixed strip left of the construction,
//! under matched refinement of the construction depth and the grid.

use std::sync::Arc;

use serde::Serialize;

use super::field::CounterexampleField;
use super::params::to_f64;
use super::tree::CantorTree;
use crate::error::{Error, Result};
use crate::field::{Analytic, PlanarField};
use crate::flow::{flow_map, FlowMethod};
use crate::geometry::AxisRect;
use crate::hamiltonian::NodeGrid;
use crate::regularity::discrete_tv;

/// The strip `(−width, 0) × (0, 1/2)` sampled at cell centres of a 2-column grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StripGrid {
    pub width: f64,
    pub rows: usize,
}

impl StripGrid {
    pub fn strip(&self) -> AxisRect {
        AxisRect { x_lo: -self.width, x_hi: 0.0, y_lo: 0.0, y_hi: 0.5 }
    }

    /// Nodes at the centres of a `2 × rows` partition of the strip.
    pub fn nodes(&self) -> Result<NodeGrid> {
        if self.rows < 2 || !(self.width > 0.0) {
            return Err(Error::InvalidParameter("strip needs a positive width and at least 2 rows".into()));
        }
        let h = 0.5 / self.rows as f64;
        let w = self.width;
        NodeGrid::new(AxisRect::new(-0.75 * w, -0.25 * w, 0.5 * h, 0.5 - 0.5 * h)?, 2, self.rows)
    }

    /// Rows matched to the oscillation scale `s_n` of depth `n`.
    pub fn matched(tree: &CantorTree, depth: u32, width: f64, rows_per_s: f64) -> Self {
        let s = to_f64(tree.scalars().s(depth));
        Self { width, rows: (0.5 * rows_per_s / s).ceil() as usize }
    }
}

/// Discrete TV of `X(t)·e₁` over the strip nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StripTv {
    pub depth: u32,
    pub rows: usize,
    pub tv: f64,
    /// Cells dropped because a node flow was flagged.
    pub excluded: usize,
}

pub fn strip_tv(b: &PlanarField, grid: &StripGrid, t: f64, method: FlowMethod) -> Result<(f64, usize)> {
    let fm = flow_map(b, t, &grid.nodes()?, method)?;
    let n = discrete_tv(&fm, 0, None)?;
    Ok((n.value, n.excluded))
}

/// `(depth, TV)` for each counterexample depth at matched resolution (exact cell walk),
/// followed by the shear field `b = (1 + y², 0)` on the same grids (Runge–Kutta, which
/// is exact up to rounding on its straight trajectories).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TvRefinement {
    pub t: f64,
    pub width: f64,
    pub rows_per_s: f64,
    pub counterexample: Vec<StripTv>,
    pub shear: Vec<StripTv>,
}

impl TvRefinement {
    /// `TVₖ / TVₖ₋₁ − 1` along the counterexample sequence.
    pub fn growth(&self) -> Vec<f64> {
        self.counterexample.windows(2).map(|w| w[1].tv / w[0].tv - 1.0).collect()
    }

    /// Largest relative change of the shear TV from the coarsest grid.
    pub fn shear_change(&self) -> f64 {
        let base = self.shear[0].tv;
        self.shear.iter().map(|s| (s.tv / base - 1.0).abs()).fold(0.0, f64::max)
    }

    /// CSV `field,depth,rows,tv,growth`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("field,depth,rows,tv,growth\n");
        for (name, rows) in [("counterexample", &self.counterexample), ("shear", &self.shear)] {
            for (i, r) in rows.iter().enumerate() {
                let g = if i == 0 { String::new() } else { format!("{:.9e}", r.tv / rows[i - 1].tv - 1.0) };
                out.push_str(&format!("{name},{},{},{:.15e},{g}\n", r.depth, r.rows, r.tv));
            }
        }
        out
    }
}

const SHEAR_METHOD: FlowMethod = FlowMethod::Rk { tol: 1e-12, max_step: None };

pub fn tv_refinement(depths: &[u32], t: f64, width: f64, rows_per_s: f64) -> Result<TvRefinement> {
    if depths.is_empty() {
        return Err(Error::InvalidParameter("no depths given".into()));
    }
    let deepest = *depths.iter().max().unwrap();
    let tree = Arc::new(CantorTree::build(deepest)?);
    let shear = PlanarField::from_hamiltonian(Arc::new(Analytic::shear(AxisRect::new(-4.0, 8.0, -2.0, 2.0)?)));
    let mut out = TvRefinement { t, width, rows_per_s, counterexample: vec![], shear: vec![] };
    for &depth in depths {
        let grid = StripGrid::matched(&tree, depth, width, rows_per_s);
        let b = PlanarField::from_streamfunction(Arc::new(CounterexampleField::new(tree.clone(), depth)));
        let (tv, excluded) = strip_tv(&b, &grid, t, FlowMethod::Levelset)?;
        out.counterexample.push(StripTv { depth, rows: grid.rows, tv, excluded });
        let (tv, excluded) = strip_tv(&shear, &grid, t, SHEAR_METHOD)?;
        out.shear.push(StripTv { depth, rows: grid.rows, tv, excluded });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shear_strip_tv_is_exact() {
        // X·e₁ = x + t(1 + y²): TV over the node hull is (w/2)·(height) + (w/2)·t·(y₁² − y₀²)
        let shear = PlanarField::from_hamiltonian(Arc::new(Analytic::shear(AxisRect::new(-4.0, 8.0, -2.0, 2.0).unwrap())));
        let grid = StripGrid { width: 0.125, rows: 40 };
        let (tv, excluded) = strip_tv(&shear, &grid, 2.0, SHEAR_METHOD).unwrap();
        let h = 0.5 / 40.0;
        let (y0, y1) = (0.5 * h, 0.5 - 0.5 * h);
        let exact = 0.0625 * (y1 - y0) + 0.0625 * 2.0 * (y1 * y1 - y0 * y0);
        assert_eq!(excluded, 0);
        assert!((tv - exact).abs() < 1e-12, "{tv} vs {exact}");
    }

    #[test]
    fn counterexample_strip_follows_crossing_times() {
        let tree = Arc::new(CantorTree::build(3).unwrap());
        let field = CounterexampleField::new(tree.clone(), 3);
        let b = PlanarField::from_streamfunction(Arc::new(field.clone()));
        let grid = StripGrid { width: 0.125, rows: 64 };
        let fm = flow_map(&b, 2.0, &grid.nodes().unwrap(), FlowMethod::Levelset).unwrap();
        for iy in [0, 17, 40, 63] {
            for ix in 0..2 {
                let z = fm.grid.node(ix, iy);
                let x1 = z.x + 1.0 + 2.0 - super::super::crossing_time_analytic(&field, z.y);
                assert!((fm.image(ix, iy).x - x1).abs() < 1e-12);
            }
        }
    }
}

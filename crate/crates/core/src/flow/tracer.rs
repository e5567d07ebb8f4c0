//! Exact trajectories of `b = ∇⊥H` for piecewise-affine `H`: `b` is constant on each
//! cell, so motion is straight until the cell boundary.

use crate::error::{Error, Result};
use crate::field::PiecewiseAffine;
use crate::geometry::{Point, Vec2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    /// Run for this duration.
    Time(f64),
    /// Run until the first component reaches this value (motion must be rightward).
    X(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Traced {
    pub point: Point,
    pub time: f64,
    /// Cells visited.
    pub cells: usize,
}

/// Follows the cell walk from `start` until `stop`. Cells are entered under the
/// right/upper tie rule, which matches forward motion since `b₁ > 0` on the
/// construction.
pub fn trace(h: &dyn PiecewiseAffine, start: Point, stop: Stop, max_cells: usize) -> Result<Traced> {
    let mut p = start;
    let mut t = 0.0;
    if let Stop::Time(d) = stop {
        if d <= 0.0 {
            return Ok(Traced { point: p, time: 0.0, cells: 0 });
        }
    }
    for cells in 0..max_cells {
        if let Stop::X(xt) = stop {
            if p.x >= xt {
                return Ok(Traced { point: p, time: t, cells });
            }
        }
        let cell = h.cell(p);
        let g = cell.gradient;
        let v = Vec2::new(-g.y, g.x);
        let speed = v.norm();
        if speed == 0.0 {
            return Err(Error::Trapped(p));
        }
        let mut tau = cell.exit_time(p, v);
        match stop {
            Stop::Time(d) => {
                if t + tau >= d {
                    return Ok(Traced { point: p + v * (d - t), time: d, cells: cells + 1 });
                }
            }
            Stop::X(xt) => {
                if v.x > 0.0 && p.x + tau * v.x >= xt {
                    let dt = (xt - p.x) / v.x;
                    let mut q = p + v * dt;
                    q.x = xt;
                    return Ok(Traced { point: q, time: t + dt, cells: cells + 1 });
                }
            }
        }
        if !tau.is_finite() {
            return Err(Error::Trapped(p));
        }
        // a point left on the boundary of the previous cell by rounding
        let min_step = 1e-15 * (1.0 + p.norm()) / speed;
        if tau < min_step {
            tau = min_step;
        }
        p = p + v * tau;
        t += tau;
    }
    Err(Error::Numerical(format!("cell walk exceeded {max_cells} cells")))
}

//! Flows of planar fields: the level-set representative, the Runge–Kutta oracle,
//! flow maps on node grids, the compressibility check and crossing times.

mod levelset;
mod rk;
mod tracer;

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use levelset::{levelset_flow, time_along_level, FlowOutcome, NodeFlag, TIME_TOL};
pub use rk::{rk_flow, rk_trajectory, RkOptions, RkOutcome, Trajectory};
pub use tracer::{trace, Stop, Traced};

use crate::error::{Error, Result};
use crate::field::{PlanarField, ScalarField};
use crate::geometry::{signed_area, AxisRect, Point};
use crate::hamiltonian::NodeGrid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum FlowMethod {
    Levelset,
    Rk { tol: f64, max_step: Option<f64> },
}

impl FlowMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FlowMethod::Levelset => "levelset",
            FlowMethod::Rk { .. } => "rk",
        }
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            FlowMethod::Levelset => TIME_TOL,
            FlowMethod::Rk { tol, .. } => *tol,
        }
    }
}

/// `X(t, ·)` on the nodes of a grid, row-major with x fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowMap {
    pub grid: NodeGrid,
    pub t: f64,
    pub method: FlowMethod,
    pub images: Vec<Point>,
    pub flags: Vec<NodeFlag>,
}

impl FlowMap {
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.grid.nx + ix
    }

    pub fn image(&self, ix: usize, iy: usize) -> Point {
        self.images[self.index(ix, iy)]
    }

    pub fn flag(&self, ix: usize, iy: usize) -> NodeFlag {
        self.flags[self.index(ix, iy)]
    }

    /// Component `k` (0 or 1) of every image, row-major.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.images.iter().map(|p| if k == 0 { p.x } else { p.y }).collect()
    }

    pub fn flagged(&self) -> usize {
        self.flags.iter().filter(|f| **f != NodeFlag::Ok).count()
    }

    /// Largest distance between the images of two maps on the same grid, over nodes
    /// unflagged in both.
    pub fn max_discrepancy(&self, other: &FlowMap) -> f64 {
        self.images
            .iter()
            .zip(&other.images)
            .zip(self.flags.iter().zip(&other.flags))
            .filter(|(_, (a, b))| **a == NodeFlag::Ok && **b == NodeFlag::Ok)
            .map(|((p, q), _)| p.dist(*q))
            .fold(0.0, f64::max)
    }

    /// CSV `ix,iy,x0,y0,x1,y1,flag`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("ix,iy,x0,y0,x1,y1,flag\n");
        for iy in 0..self.grid.ny {
            for ix in 0..self.grid.nx {
                let z = self.grid.node(ix, iy);
                let p = self.image(ix, iy);
                let _ = writeln!(s, "{ix},{iy},{},{},{},{},{}", z.x, z.y, p.x, p.y, self.flag(ix, iy).as_str());
            }
        }
        s
    }
}

/// One node of a flow map; errors become flags.
pub fn flow_point(b: &PlanarField, h: Option<&Arc<dyn ScalarField>>, z: Point, t: f64, method: &FlowMethod) -> (Point, NodeFlag) {
    match method {
        FlowMethod::Levelset => match h {
            Some(h) => match levelset_flow(h, b, z, t) {
                Ok(o) => (o.point, o.flag),
                Err(_) => (z, NodeFlag::Failed),
            },
            None => (z, NodeFlag::Failed),
        },
        FlowMethod::Rk { tol, max_step } => {
            let mut opts = RkOptions::new(*tol);
            opts.max_step = *max_step;
            match rk_flow(b, z, t, &opts) {
                Ok(o) if o.flagged => (o.point, NodeFlag::StepUnderflow),
                Ok(o) => (o.point, NodeFlag::Ok),
                Err(_) => (z, NodeFlag::Failed),
            }
        }
    }
}

/// Applies the flow to every node in parallel; the output order is row-major
/// regardless of scheduling.
pub fn flow_map(b: &PlanarField, t: f64, grid: &NodeGrid, method: FlowMethod) -> Result<FlowMap> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter("flow time must be non-negative".into()));
    }
    let h = b.hamiltonian();
    if method == FlowMethod::Levelset && h.is_none() {
        return Err(Error::InvalidParameter("level-set flow needs a Hamiltonian backend".into()));
    }
    let n = grid.nx * grid.ny;
    let results: Vec<(Point, NodeFlag)> = (0..n)
        .into_par_iter()
        .map(|k| flow_point(b, h, grid.node(k % grid.nx, k / grid.nx), t, &method))
        .collect();
    let (images, flags) = results.into_iter().unzip();
    Ok(FlowMap { grid: *grid, t, method, images, flags })
}

/// Pushforward density per grid cell: cell area over the area of the image
/// quadrilateral. The maximum is the empirical compressibility constant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityReport {
    pub cells: usize,
    /// Cells skipped because a corner carries a flow flag.
    pub skipped: usize,
    /// Cells whose image is degenerate or reversed.
    pub degenerate: Vec<(usize, usize)>,
    pub max_ratio: f64,
    pub min_ratio: f64,
}

pub fn compressibility_check(fm: &FlowMap, region: Option<&AxisRect>) -> DensityReport {
    let g = &fm.grid;
    let area = g.dx() * g.dy();
    let mut rep = DensityReport { cells: 0, skipped: 0, degenerate: vec![], max_ratio: 0.0, min_ratio: f64::INFINITY };
    for iy in 0..g.ny - 1 {
        for ix in 0..g.nx - 1 {
            let corners = [(ix, iy), (ix + 1, iy), (ix + 1, iy + 1), (ix, iy + 1)];
            if let Some(r) = region {
                if !corners.iter().all(|&(i, j)| r.contains(g.node(i, j))) {
                    continue;
                }
            }
            if corners.iter().any(|&(i, j)| fm.flag(i, j) != NodeFlag::Ok) {
                rep.skipped += 1;
                continue;
            }
            rep.cells += 1;
            let quad: Vec<Point> = corners.iter().map(|&(i, j)| fm.image(i, j)).collect();
            let img = signed_area(&quad);
            if !(img > 1e-14 * area) {
                rep.degenerate.push((ix, iy));
                continue;
            }
            let ratio = area / img;
            rep.max_ratio = rep.max_ratio.max(ratio);
            rep.min_ratio = rep.min_ratio.min(ratio);
        }
    }
    if rep.cells == rep.degenerate.len() {
        rep.min_ratio = f64::NAN;
        rep.max_ratio = f64::NAN;
    }
    rep
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingTimes {
    pub y: f64,
    /// First time `X·e₁ = 0`.
    pub t1: f64,
    /// First time `X·e₁ = 1`.
    pub t2: f64,
    #[serde(rename = "T")]
    pub duration: f64,
}

impl CrossingTimes {
    pub fn to_csv(rows: &[CrossingTimes]) -> String {
        let mut s = String::from("y,t1,t2,T\n");
        for r in rows {
            let _ = writeln!(s, "{},{},{},{}", r.y, r.t1, r.t2, r.duration);
        }
        s
    }
}

/// First time the level-set flow from `z` reaches `X·e₁ = xt`, with the point there.
///
/// Exact for piecewise-affine `H`; otherwise the time is bracketed by doubling and
/// refined by bisection on `levelset_flow`.
pub fn time_to_x(h: &Arc<dyn ScalarField>, b: &PlanarField, z: Point, xt: f64) -> Result<(f64, Point)> {
    if let Some(pw) = h.as_piecewise() {
        let r = trace(pw, z, Stop::X(xt), 50_000_000)?;
        return Ok((r.time, r.point));
    }
    if z.x >= xt {
        return Ok((0.0, z));
    }
    let reach = |t: f64| -> Result<Point> {
        let o = levelset_flow(h, b, z, t)?;
        if o.flag != NodeFlag::Ok {
            return Err(Error::Trapped(o.point));
        }
        Ok(o.point)
    };
    let (mut lo, mut hi) = (0.0, (xt - z.x) / b.sup_norm.max(1e-300));
    let mut doublings = 0;
    while reach(hi)?.x < xt {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Trapped(z));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if reach(mid)?.x < xt {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((hi, reach(hi)?))
}

/// `T(y) = t₂ − t₁` for trajectories from `(x_start, y)` across the strip `0 ≤ x ≤ 1`.
pub fn crossing_times(b: &PlanarField, ys: &[f64], x_start: f64) -> Result<Vec<CrossingTimes>> {
    let h = b
        .hamiltonian()
        .ok_or_else(|| Error::InvalidParameter("crossing times need a Hamiltonian backend".into()))?;
    if x_start >= 0.0 {
        return Err(Error::InvalidParameter("start must lie left of the strip".into()));
    }
    ys.par_iter()
        .map(|&y| {
            let (t1, p) = time_to_x(h, b, Point::new(x_start, y), 0.0)?;
            let (dt, _) = time_to_x(h, b, p, 1.0)?;
            if !(dt > 0.0) {
                return Err(Error::Trapped(p));
            }
            Ok(CrossingTimes { y, t1, t2: t1 + dt, duration: dt })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Analytic;
    use std::f64::consts::FRAC_PI_2;

    fn dom() -> AxisRect {
        AxisRect::new(-4.0, 4.0, -4.0, 4.0).unwrap()
    }

    fn grid(n: usize) -> NodeGrid {
        NodeGrid::new(AxisRect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), n, n).unwrap()
    }

    #[test]
    fn identity_at_time_zero() {
        let b = PlanarField::from_hamiltonian(Arc::new(Analytic::rotation(1.0, dom())));
        let fm = flow_map(&b, 0.0, &grid(9), FlowMethod::Levelset).unwrap();
        for iy in 0..9 {
            for ix in 0..9 {
                assert_eq!(fm.image(ix, iy), fm.grid.node(ix, iy));
            }
        }
        assert!(fm.to_csv().starts_with("ix,iy,x0,y0,x1,y1,flag\n0,0,-1,-1,-1,-1,ok\n"));
    }

    #[test]
    fn rotation_map_turns_grid() {
        let b = PlanarField::from_hamiltonian(Arc::new(Analytic::rotation(1.0, dom())));
        let g = grid(8);
        let rk = flow_map(&b, FRAC_PI_2, &g, FlowMethod::Rk { tol: 1e-11, max_step: None }).unwrap();
        let ls = flow_map(&b, FRAC_PI_2, &g, FlowMethod::Levelset).unwrap();
        for iy in 0..8 {
            for ix in 0..8 {
                let z = g.node(ix, iy);
                let want = Point::new(-z.y, z.x);
                assert!(rk.image(ix, iy).dist(want) < 1e-8);
                assert!(ls.image(ix, iy).dist(want) < 1e-8);
            }
        }
        assert!(rk.max_discrepancy(&ls) < 1e-8);
        let rep = compressibility_check(&ls, None);
        assert_eq!(rep.cells, 49);
        assert!((rep.max_ratio - 1.0).abs() < 1e-8 && (rep.min_ratio - 1.0).abs() < 1e-8);
    }

    #[test]
    fn translation_density_exact() {
        let b = PlanarField::from_hamiltonian(Arc::new(Analytic::linear(0.0, -1.0, 0.0, dom())));
        let fm = flow_map(&b, 0.5, &grid(5), FlowMethod::Levelset).unwrap();
        let rep = compressibility_check(&fm, None);
        assert!((rep.max_ratio - 1.0).abs() < 1e-14 && (rep.min_ratio - 1.0).abs() < 1e-14);
    }

    #[test]
    fn crossing_of_uniform_flow() {
        let b = PlanarField::from_hamiltonian(Arc::new(Analytic::linear(0.0, -1.0, 0.0, dom())));
        let ct = crossing_times(&b, &[0.1, 0.7], -1.0).unwrap();
        for c in ct {
            assert!((c.t1 - 1.0).abs() < 1e-12 && (c.duration - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn crossing_of_shear() {
        let b = PlanarField::from_hamiltonian(Arc::new(Analytic::shear(dom())));
        let ct = crossing_times(&b, &[0.5], -1.0).unwrap();
        assert!((ct[0].duration - 1.0 / 1.25).abs() < 1e-10);
        assert_eq!(CrossingTimes::to_csv(&ct).lines().next(), Some("y,t1,t2,T"));
    }
}

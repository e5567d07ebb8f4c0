//! The level-set representative `X(t, z) = (X₁, f_{H(z)}(X₁))`, with `X₁` solved from
//! `∫_{z₁}^{X₁} ds / b·e = t` in a sequence of transversal charts.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::tracer::{trace, Stop};
use crate::error::{Error, Result};
use crate::field::{PlanarField, ScalarField};
use crate::geometry::{Point, Vec2};
use crate::hamiltonian::{bisect_decreasing, Chart, LevelCurve};
use crate::quadrature;

/// Relative tolerance of the time quadrature.
pub const TIME_TOL: f64 = 1e-12;
const MAX_CELLS: usize = 50_000_000;
const MAX_CHARTS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeFlag {
    Ok,
    /// Left every chart (or the field domain) before time t; the position is partial.
    Exited,
    /// Start on a critical level where `b = 0`.
    Critical,
    /// The Runge–Kutta controller had to force steps.
    StepUnderflow,
    Failed,
}

impl NodeFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeFlag::Ok => "ok",
            NodeFlag::Exited => "exited",
            NodeFlag::Critical => "critical",
            NodeFlag::StepUnderflow => "step-underflow",
            NodeFlag::Failed => "failed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowOutcome {
    pub point: Point,
    pub flag: NodeFlag,
    /// Time actually covered; below the request only for partial results.
    pub time: f64,
}

/// `τ = ∫_{x0}^{x1} ds / b·e(f̃_h(s))`, negative when `x1 < x0`.
///
/// Piecewise-affine Hamiltonians with a horizontal chart are integrated exactly cell by
/// cell; otherwise adaptive Gauss–Legendre runs between consecutive curve breakpoints.
pub fn time_along_level(curve: &LevelCurve, b: &PlanarField, x0: f64, x1: f64) -> Result<f64> {
    if x1 < x0 {
        return time_along_level(curve, b, x1, x0).map(|t| -t);
    }
    if x0 == x1 {
        return Ok(0.0);
    }
    let (lo, hi) = curve.interval;
    let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    if x0 < lo - slack || x1 > hi + slack {
        return Err(Error::InvalidParameter(format!("[{x0}, {x1}] not inside O_h = [{lo}, {hi}]")));
    }
    let e = curve.chart.e;
    if let Some(pw) = curve.hamiltonian().as_piecewise() {
        if e == Vec2::new(1.0, 0.0) {
            let start = curve.point(x0).ok_or(Error::LevelNotAttained(curve.level))?;
            check_speed(b, start, e, curve.delta)?;
            return Ok(trace(pw, start, Stop::X(x1), MAX_CELLS)?.time);
        }
    }
    let mut cuts = vec![x0];
    cuts.extend(curve.breakpoints.iter().map(|&(u, _)| u).filter(|&u| u > x0 && u < x1));
    cuts.push(x1);
    let mut f = |u: f64| -> Result<f64> {
        let p = curve.point(u).ok_or(Error::LevelNotAttained(curve.level))?;
        Ok(1.0 / check_speed(b, p, e, curve.delta)?)
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += quadrature::adaptive(w[0], w[1], TIME_TOL, &mut f)?;
    }
    Ok(total)
}

fn check_speed(b: &PlanarField, p: Point, e: Vec2, delta: f64) -> Result<f64> {
    let s = b.eval(p).dot(e);
    if s < 0.5 * delta {
        return Err(Error::Transversality { at: p, detail: format!("b·e = {s} below delta/2 = {}", 0.5 * delta) });
    }
    Ok(s)
}

/// `X(t, z)` along `{H = H(z)}`.
///
/// Piecewise-affine `H` is followed exactly by the cell walk. Smooth `H` is followed
/// through charts `e = b(p)/|b(p)|` anchored at the current point; a chart of length
/// `ℓ` is accepted when `b·e ≥ |b(p)|/2` on a 9×9 sample of `[0, ℓ] × [−1.8ℓ, 1.8ℓ]`,
/// so the level curve is a graph of slope below √3 there. Time accumulates as the
/// exact sum over charts.
pub fn levelset_flow(h: &Arc<dyn ScalarField>, b: &PlanarField, z: Point, t: f64) -> Result<FlowOutcome> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter("flow time must be non-negative".into()));
    }
    let dom = h.domain();
    if !dom.contains(z) {
        return Err(Error::OutOfDomain(z));
    }
    if t == 0.0 {
        return Ok(FlowOutcome { point: z, flag: NodeFlag::Ok, time: 0.0 });
    }
    if let Some(pw) = h.as_piecewise() {
        let g = pw.cell(z).gradient;
        if g.norm() == 0.0 {
            return Ok(FlowOutcome { point: z, flag: NodeFlag::Critical, time: 0.0 });
        }
        let r = trace(pw, z, Stop::Time(t), MAX_CELLS)?;
        let flag = if dom.contains(r.point) { NodeFlag::Ok } else { NodeFlag::Exited };
        return Ok(FlowOutcome { point: r.point, flag, time: r.time });
    }

    let level = h.value(z);
    let critical = 1e-12 * (1.0 + b.sup_norm);
    let mut p = z;
    let mut done = 0.0;
    let mut prev_len: Option<f64> = None;
    for _ in 0..MAX_CHARTS {
        let remaining = t - done;
        let bp = b.eval(p);
        let speed = bp.norm();
        if speed <= critical {
            let flag = if done == 0.0 { NodeFlag::Critical } else { NodeFlag::Exited };
            return Ok(FlowOutcome { point: p, flag, time: done });
        }
        let chart = Chart::new(bp)?;
        let e = chart.e;
        let (u0, w0) = chart.local(p);
        let mut ell = 1.05 * remaining * speed;
        if let Some(l) = prev_len {
            ell = ell.min(4.0 * l);
        }
        ell = ell.min(0.25 * dom.width().min(dom.height()));
        let floor = 1e-13 * (1.0 + p.norm());
        let section = |u: f64, w: f64| h.value(chart.world(u, w));
        let accepted = loop {
            if ell < floor {
                break None;
            }
            if chart_ok(b, &dom, &chart, u0, w0, ell, 0.5 * speed)
                && section(u0 + ell, w0 - 1.8 * ell) >= level
                && section(u0 + ell, w0 + 1.8 * ell) <= level
            {
                break Some(ell);
            }
            ell *= 0.5;
        };
        let Some(ell) = accepted else {
            return Ok(FlowOutcome { point: p, flag: NodeFlag::Exited, time: done });
        };
        let (wl, wh) = (w0 - 1.8 * ell, w0 + 1.8 * ell);
        let graph = |u: f64| bisect_decreasing(|w| section(u, w), level, wl, wh);
        let mut rate = |u: f64| -> Result<f64> {
            let q = chart.world(u, graph(u));
            let s = b.eval(q).dot(e);
            if !(s > 0.0) {
                return Err(Error::Transversality { at: q, detail: format!("b·e = {s} inside an accepted chart") });
            }
            Ok(1.0 / s)
        };
        let tau = quadrature::adaptive(u0, u0 + ell, TIME_TOL, &mut rate)?;
        if done + tau >= t {
            let (mut lo, mut hi, mut t_lo) = (u0, u0 + ell, 0.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let tm = t_lo + quadrature::adaptive(lo, mid, TIME_TOL, &mut rate)?;
                if done + tm < t {
                    lo = mid;
                    t_lo = tm;
                } else {
                    hi = mid;
                }
            }
            let u1 = 0.5 * (lo + hi);
            return Ok(FlowOutcome { point: chart.world(u1, graph(u1)), flag: NodeFlag::Ok, time: t });
        }
        p = chart.world(u0 + ell, graph(u0 + ell));
        done += tau;
        prev_len = Some(ell);
    }
    Err(Error::Numerical(format!("more than {MAX_CHARTS} charts")))
}

fn chart_ok(b: &PlanarField, dom: &crate::geometry::AxisRect, chart: &Chart, u0: f64, w0: f64, ell: f64, min: f64) -> bool {
    const N: usize = 9;
    for i in 0..N {
        for j in 0..N {
            let u = u0 + ell * i as f64 / (N - 1) as f64;
            let w = w0 + 1.8 * ell * (2.0 * j as f64 / (N - 1) as f64 - 1.0);
            let q = chart.world(u, w);
            if !dom.contains(q) || b.eval(q).dot(chart.e) < min {
                return false;
            }
        }
    }
    true
}

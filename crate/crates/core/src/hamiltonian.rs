//! Streamfunction recovery, level curves as graphs over transversal charts, and the
//! decomposition of levels by the minimal speed on the level set.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{GridField, PlanarField, ScalarField};
use crate::geometry::{AxisRect, Point, Vec2};
use crate::quadrature;

/// Uniform node grid spanning a rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct NodeGrid {
    pub rect: AxisRect,
    pub nx: usize,
    pub ny: usize,
}

impl NodeGrid {
    pub fn new(rect: AxisRect, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 nodes per axis".into()));
        }
        Ok(Self { rect, nx, ny })
    }
    pub fn dx(&self) -> f64 {
        self.rect.width() / (self.nx - 1) as f64
    }
    pub fn dy(&self) -> f64 {
        self.rect.height() / (self.ny - 1) as f64
    }
    pub fn x(&self, ix: usize) -> f64 {
        self.rect.x_lo + ix as f64 * self.dx()
    }
    pub fn y(&self, iy: usize) -> f64 {
        self.rect.y_lo + iy as f64 * self.dy()
    }
    pub fn node(&self, ix: usize, iy: usize) -> Point {
        Point::new(self.x(ix), self.y(iy))
    }
}

#[derive(Clone, Debug)]
pub struct Streamfunction {
    pub field: GridField,
    /// Largest difference between x-then-y and y-then-x path integrals at a node.
    pub path_residual: f64,
    /// Largest cell-averaged divergence `|∮ b·n| / area`.
    pub max_divergence: f64,
}

fn line_integral<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    quadrature::fixed(10, a, b, f)
}

/// Cumulative `∫_{from}^{x_i} g` at every coordinate `x_i` of `coords`.
fn cumulative<F: Fn(f64) -> f64>(coords: &[f64], from: f64, g: F) -> Vec<f64> {
    let mut acc = vec![0.0; coords.len()];
    for i in 1..coords.len() {
        acc[i] = acc[i - 1] + line_integral(coords[i - 1], coords[i], &g);
    }
    // shift so that the value at `from` is zero
    let k = coords.iter().rposition(|&c| c <= from).unwrap_or(0);
    let at_from = acc[k] + line_integral(coords[k], from, &g);
    acc.iter().map(|v| v - at_from).collect()
}

/// Recovers `H` with `H(base) = 0`, `∂₁H = b₂`, `∂₂H = −b₁` on the nodes of `grid`
/// by integrating along the segment through `base` in x, then in y.
///
/// `div_tol` bounds the cell-averaged divergence relative to `1 + ‖b‖∞/min(dx, dy)`.
pub fn streamfunction(b: &PlanarField, grid: &NodeGrid, base: Point, div_tol: f64) -> Result<Streamfunction> {
    if !grid.rect.contains(base) {
        return Err(Error::OutOfDomain(base));
    }
    let (dx, dy) = (grid.dx(), grid.dy());
    let threshold = div_tol * (1.0 + b.sup_norm / dx.min(dy));
    let mut max_div: f64 = 0.0;
    for iy in 0..grid.ny - 1 {
        for ix in 0..grid.nx - 1 {
            let (x0, x1, y0, y1) = (grid.x(ix), grid.x(ix + 1), grid.y(iy), grid.y(iy + 1));
            let flux = line_integral(y0, y1, |s| b.eval(Point::new(x1, s)).x)
                - line_integral(y0, y1, |s| b.eval(Point::new(x0, s)).x)
                + line_integral(x0, x1, |s| b.eval(Point::new(s, y1)).y)
                - line_integral(x0, x1, |s| b.eval(Point::new(s, y0)).y);
            let div = (flux / ((x1 - x0) * (y1 - y0))).abs();
            if div > threshold {
                return Err(Error::DivergenceResidual { ix, iy, residual: div, threshold });
            }
            max_div = max_div.max(div);
        }
    }
    let xs: Vec<f64> = (0..grid.nx).map(|i| grid.x(i)).collect();
    let ys: Vec<f64> = (0..grid.ny).map(|j| grid.y(j)).collect();
    let along_x = cumulative(&xs, base.x, |s| b.eval(Point::new(s, base.y)).y);
    let along_y = cumulative(&ys, base.y, |s| -b.eval(Point::new(base.x, s)).x);
    let cols: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| cumulative(&ys, base.y, |s| -b.eval(Point::new(x, s)).x))
        .collect();
    let rows: Vec<Vec<f64>> = ys
        .par_iter()
        .map(|&y| cumulative(&xs, base.x, |s| b.eval(Point::new(s, y)).y))
        .collect();
    let mut values = vec![0.0; grid.nx * grid.ny];
    let mut residual: f64 = 0.0;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let h1 = along_x[ix] + cols[ix][iy];
            let h2 = along_y[iy] + rows[iy][ix];
            residual = residual.max((h1 - h2).abs());
            values[iy * grid.nx + ix] = h1;
        }
    }
    let field = GridField::new(Point::new(grid.rect.x_lo, grid.rect.y_lo), dx, dy, grid.nx, grid.ny, values)?;
    Ok(Streamfunction { field, path_residual: residual, max_divergence: max_div })
}

/// Orthonormal frame `(e, e⊥)` with coordinates `u = z·e`, `w = z·e⊥`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Chart {
    pub e: Vec2,
}

impl Chart {
    pub fn new(e: Vec2) -> Result<Self> {
        let n = e.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("chart direction must be nonzero".into()));
        }
        Ok(Self { e: e * (1.0 / n) })
    }

    pub fn world(&self, u: f64, w: f64) -> Point {
        self.e * u + self.e.perp() * w
    }

    pub fn local(&self, p: Point) -> (f64, f64) {
        (p.dot(self.e), p.dot(self.e.perp()))
    }
}

/// A level set `{H = h}` as a graph `w = f_h(u)` over `u ∈ O_h` in a chart where
/// `H` decreases along `e⊥`.
#[derive(Clone, Debug)]
pub struct LevelCurve {
    pub level: f64,
    /// `O_h = (u_lo, u_hi)`.
    pub interval: (f64, f64),
    /// `(u, f_h(u))` in chart coordinates, increasing in u.
    pub breakpoints: Vec<(f64, f64)>,
    pub graph_lipschitz_l: f64,
    pub chart: Chart,
    pub w_range: (f64, f64),
    /// Lower bound for `−∂_w H` used for the extraction.
    pub delta: f64,
    h: Arc<dyn ScalarField>,
}

/// Solves `g(w) = level` for `g` decreasing on `[lo, hi]`, down to a bracket of a few
/// ulps. Illinois steps, with a bisection whenever two steps fail to halve the bracket.
/// If the level lies outside `[g(hi), g(lo)]` the nearer end is returned.
pub fn bisect_decreasing<G: Fn(f64) -> f64>(g: G, level: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = g(lo) - level;
    if !(flo > 0.0) {
        return lo;
    }
    let mut fhi = g(hi) - level;
    if fhi > 0.0 {
        return hi;
    }
    if fhi == 0.0 {
        return hi;
    }
    let mut side = 0i8;
    let mut width = hi - lo;
    for i in 0..200 {
        let tol = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) + f64::MIN_POSITIVE;
        if hi - lo <= tol {
            break;
        }
        let mut x = if i % 3 == 2 && hi - lo > 0.5 * width {
            0.5 * (lo + hi)
        } else {
            (lo * fhi - hi * flo) / (fhi - flo)
        };
        if i % 3 == 2 {
            width = hi - lo;
        }
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
            if !(x > lo && x < hi) {
                break;
            }
        }
        let fx = g(x) - level;
        if fx > 0.0 {
            lo = x;
            flo = fx;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        } else if fx < 0.0 {
            hi = x;
            fhi = fx;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        } else {
            return x;
        }
    }
    0.5 * (lo + hi)
}

impl LevelCurve {
    fn section(&self, u: f64) -> impl Fn(f64) -> f64 + '_ {
        move |w| self.h.value(self.chart.world(u, w))
    }

    /// `f_h(u)` by bisection; `None` if the level is not attained on the column.
    pub fn eval(&self, u: f64) -> Option<f64> {
        let g = self.section(u);
        let (lo, hi) = self.w_range;
        if g(lo) < self.level || g(hi) > self.level {
            return None;
        }
        Some(bisect_decreasing(g, self.level, lo, hi))
    }

    /// World point `f̃_h(u)`.
    pub fn point(&self, u: f64) -> Option<Point> {
        self.eval(u).map(|w| self.chart.world(u, w))
    }

    pub fn hamiltonian(&self) -> &Arc<dyn ScalarField> {
        &self.h
    }

    pub fn world_points(&self) -> Vec<Point> {
        self.breakpoints.iter().map(|&(u, w)| self.chart.world(u, w)).collect()
    }

    /// CSV with columns `x,y,h`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,h\n");
        for p in self.world_points() {
            s.push_str(&format!("{},{},{}\n", p.x, p.y, self.level));
        }
        s
    }
}

/// Extracts `{H = level}` over the chart window `window` (given in `(u, w)`
/// coordinates of the chart with direction `e`). Each column is checked for the
/// transversality bound `−∂_w H ≥ δ` on 17 sample points.
pub fn level_curve(
    h: &Arc<dyn ScalarField>,
    level: f64,
    window: &AxisRect,
    e: Vec2,
    delta: f64,
    x_resolution: f64,
) -> Result<LevelCurve> {
    if !(delta > 0.0) || !(x_resolution > 0.0) {
        return Err(Error::InvalidParameter("delta and x_resolution must be positive".into()));
    }
    let chart = Chart::new(e)?;
    let cols = ((window.width() / x_resolution).ceil() as usize).max(1);
    let us: Vec<f64> = (0..=cols).map(|i| window.x_lo + window.width() * i as f64 / cols as f64).collect();
    let mut curve = LevelCurve {
        level,
        interval: (window.x_lo, window.x_hi),
        breakpoints: vec![],
        graph_lipschitz_l: 0.0,
        chart,
        w_range: (window.y_lo, window.y_hi),
        delta,
        h: h.clone(),
    };
    let samples = 16;
    let dw = window.height() / samples as f64;
    let columns: Vec<Result<Option<(f64, f64)>>> = us
        .par_iter()
        .map(|&u| {
            let g = curve.section(u);
            let mut prev = g(window.y_lo);
            for k in 1..=samples {
                let w = window.y_lo + k as f64 * dw;
                let cur = g(w);
                if prev - cur < delta * dw * (1.0 - 1e-9) {
                    return Err(Error::Transversality {
                        at: chart.world(u, w),
                        detail: format!("section slope {} below delta {}", (prev - cur) / dw, delta),
                    });
                }
                prev = cur;
            }
            Ok(curve.eval(u).map(|w| (u, w)))
        })
        .collect();
    // longest run of consecutive columns where the level is attained
    let mut best: (usize, usize) = (0, 0);
    let mut start = None;
    for (i, c) in columns.iter().enumerate() {
        match c {
            Err(e) => return Err(clone_err(e)),
            Ok(Some(_)) => {
                let s = *start.get_or_insert(i);
                if i + 1 - s > best.1 - best.0 {
                    best = (s, i + 1);
                }
            }
            Ok(None) => start = None,
        }
    }
    if best.1 == best.0 {
        return Err(Error::LevelNotAttained(level));
    }
    curve.breakpoints = columns[best.0..best.1].iter().map(|c| c.as_ref().unwrap().unwrap()).collect();
    curve.interval = (curve.breakpoints[0].0, curve.breakpoints.last().unwrap().0);
    curve.graph_lipschitz_l = curve
        .breakpoints
        .windows(2)
        .map(|p| ((p[1].1 - p[0].1) / (p[1].0 - p[0].0)).abs())
        .fold(0.0, f64::max);
    Ok(curve)
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::Transversality { at, detail } => Error::Transversality { at: *at, detail: detail.clone() },
        other => Error::Numerical(other.to_string()),
    }
}

/// Points of `{H = level}` found as roots along the horizontal and vertical lines of
/// a `lines × lines` grid over `window`, each line sampled at `samples` points.
pub fn level_set_points(h: &dyn ScalarField, level: f64, window: &AxisRect, lines: usize, samples: usize) -> Vec<Point> {
    let mut pts = vec![];
    let mut scan = |a: Point, b: Point| {
        let at = |t: f64| a + (b - a) * t;
        let mut t0 = 0.0;
        let mut g0 = h.value(at(0.0)) - level;
        for k in 1..=samples {
            let t1 = k as f64 / samples as f64;
            let g1 = h.value(at(t1)) - level;
            if g0 == 0.0 {
                pts.push(at(t0));
            } else if g0 * g1 < 0.0 {
                let s = if g0 > 0.0 { 1.0 } else { -1.0 };
                let t = bisect_decreasing(|t| s * (h.value(at(t)) - level), 0.0, t0, t1);
                pts.push(at(t));
            }
            t0 = t1;
            g0 = g1;
        }
    };
    for i in 0..lines {
        let f = (i as f64 + 0.5) / lines as f64;
        let y = window.y_lo + f * window.height();
        scan(Point::new(window.x_lo, y), Point::new(window.x_hi, y));
        let x = window.x_lo + f * window.width();
        scan(Point::new(x, window.y_lo), Point::new(x, window.y_hi));
    }
    pts
}

/// Smallest `|b|` over sampled points of `{H = level}` in `window`.
pub fn min_speed_on_level(b: &PlanarField, h: &dyn ScalarField, level: f64, window: &AxisRect, lines: usize) -> Option<f64> {
    let pts = level_set_points(h, level, window, lines, 4 * lines);
    pts.iter().map(|&p| b.eval(p).norm()).reduce(f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelRecord {
    pub h: f64,
    pub min_b: f64,
    /// Smallest `k ≤ k_max` with `min_b > 1/k`.
    pub k: Option<u32>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularDecomposition {
    pub records: Vec<LevelRecord>,
    /// Sampled levels where the speed vanishes to resolution.
    pub critical_values: Vec<f64>,
    pub k_max: u32,
}

impl RegularDecomposition {
    /// Sampled levels belonging to `Ω_k`.
    pub fn levels_in(&self, k: u32) -> Vec<f64> {
        self.records.iter().filter(|r| r.k.is_some_and(|kk| kk <= k)).map(|r| r.h).collect()
    }

    /// Maximal runs of consecutive sampled levels in `Ω_k`, as `(h_first, h_last)`.
    pub fn omega_k_bands(&self, k: u32) -> Vec<(f64, f64)> {
        let mut bands = vec![];
        let mut cur: Option<(f64, f64)> = None;
        for r in &self.records {
            if r.k.is_some_and(|kk| kk <= k) {
                cur = Some(match cur {
                    Some((lo, _)) => (lo, r.h),
                    None => (r.h, r.h),
                });
            } else if let Some(b) = cur.take() {
                bands.push(b);
            }
        }
        bands.extend(cur);
        bands
    }

    /// Whether level `h` lies in `Ω_k`, by the nearest sampled level.
    pub fn contains(&self, k: u32, h: f64) -> bool {
        let i = self.records.partition_point(|r| r.h < h);
        let cand = [i.checked_sub(1), Some(i)];
        let nearest = cand
            .iter()
            .flatten()
            .filter_map(|&j| self.records.get(j))
            .min_by(|a, b| (a.h - h).abs().total_cmp(&(b.h - h).abs()));
        nearest.is_some_and(|r| r.k.is_some_and(|kk| kk <= k))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.records).expect("records serialize")
    }
}

/// Assigns sampled levels to `Ω_k = {h : min_{H=h} |b| > 1/k}`. Levels are a uniform
/// grid of step `h_resolution` over the range of `H` on `window` plus `extra_levels`.
pub fn regular_decomposition(
    h: &Arc<dyn ScalarField>,
    b: &PlanarField,
    window: &AxisRect,
    k_max: u32,
    h_resolution: f64,
    extra_levels: &[f64],
) -> Result<RegularDecomposition> {
    if !(h_resolution > 0.0) || k_max == 0 {
        return Err(Error::InvalidParameter("h_resolution and k_max must be positive".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let n = 257;
    for j in 0..n {
        for i in 0..n {
            let v = h.value(window.lerp(i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64));
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let steps = ((hi - lo) / h_resolution).floor() as usize;
    let mut levels: Vec<f64> = (0..=steps).map(|i| lo + i as f64 * h_resolution).collect();
    levels.extend(extra_levels.iter().copied().filter(|v| *v >= lo && *v <= hi));
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let tol = 1e-9 * (1.0 + b.sup_norm);
    let records: Vec<Option<LevelRecord>> = levels
        .par_iter()
        .map(|&lv| {
            min_speed_on_level(b, h.as_ref(), lv, window, 96).map(|m| {
                let k = if m > 0.0 { (1.0 / m).floor() as u64 + 1 } else { u64::MAX };
                LevelRecord { h: lv, min_b: m, k: (k <= k_max as u64).then_some(k as u32) }
            })
        })
        .collect();
    let records: Vec<LevelRecord> = records.into_iter().flatten().collect();
    let critical_values = records.iter().filter(|r| r.min_b <= tol).map(|r| r.h).collect();
    Ok(RegularDecomposition { records, critical_values, k_max })
}

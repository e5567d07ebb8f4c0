//! Quantities entering the BV/Sobolev regularity estimates of level-set flows:
//! the cumulative variation `g(h) = |Db|({H ≤ h})`, coarea densities, the local and
//! global estimate verifiers, and discrete TV/Sobolev norms of flow maps.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::counterexample::JumpSegment;
use crate::error::{Error, Result};
use crate::field::{PlanarField, ScalarField};
use crate::flow::{levelset_flow, rk_flow, FlowMap, NodeFlag, RkOptions};
use crate::geometry::{clip_segment, AxisRect, Point, Vec2};
use crate::hamiltonian::{level_curve, regular_decomposition, Chart, RegularDecomposition};
use crate::quadrature;

/// Relative slack used when counting violations: `lhs > rhs + SLACK·(rhs + 1)`.
pub const SLACK: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Variant {
    Bv,
    Sobolev { p: f64 },
}

/// `g(h)` on a grid of levels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariationProfile {
    pub variant: Variant,
    pub levels: Vec<f64>,
    pub g: Vec<f64>,
    /// `|Db|` mass of the whole window.
    pub total_mass: f64,
    /// `(∫|g′|ᵖ dh)^{1/p}` from the differences of `g` (Sobolev variant only).
    pub g_prime_lp: Option<f64>,
}

impl VariationProfile {
    /// Linear interpolation, constant beyond the end levels.
    pub fn eval(&self, h: f64) -> f64 {
        let n = self.levels.len();
        if n == 0 {
            return 0.0;
        }
        if h <= self.levels[0] {
            return self.g[0];
        }
        if h >= self.levels[n - 1] {
            return self.g[n - 1];
        }
        let i = self.levels.partition_point(|&l| l <= h) - 1;
        let (l0, l1) = (self.levels[i], self.levels[i + 1]);
        if l1 == l0 {
            return self.g[i + 1];
        }
        self.g[i] + (self.g[i + 1] - self.g[i]) * (h - l0) / (l1 - l0)
    }

    pub fn is_monotone(&self) -> bool {
        self.g.windows(2).all(|w| w[0] <= w[1])
    }

    /// CSV `h,g`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,g\n");
        for (h, g) in self.levels.iter().zip(&self.g) {
            s.push_str(&format!("{h:e},{g:e}\n"));
        }
        s
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() || levels.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidParameter("levels must be non-empty and sorted".into()));
    }
    Ok(())
}

/// Frobenius norm of a 2×2 matrix.
fn frobenius(m: [[f64; 2]; 2]) -> f64 {
    (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]).sqrt()
}

/// A cell's `|Db|` mass with the range of `H` over its corners.
struct CellMass {
    mass: f64,
    h_lo: f64,
    h_hi: f64,
}

impl CellMass {
    /// Share of the cell below level `h`, linear in `h` between the corner extremes.
    fn fraction(&self, h: f64) -> f64 {
        if self.h_hi > self.h_lo {
            ((h - self.h_lo) / (self.h_hi - self.h_lo)).clamp(0.0, 1.0)
        } else if h >= self.h_lo {
            1.0
        } else {
            0.0
        }
    }
}

fn cell_masses(
    b: &PlanarField,
    h: &dyn ScalarField,
    window: &AxisRect,
    n: usize,
    keep: &(dyn Fn(Point) -> bool + Sync),
) -> Vec<CellMass> {
    let (dx, dy) = (window.width() / n as f64, window.height() / n as f64);
    let eps = 1e-4 * dx.min(dy);
    let g = 0.5 / 3f64.sqrt();
    (0..n * n)
        .into_par_iter()
        .filter_map(|c| {
            let (ix, iy) = (c % n, c / n);
            let x0 = window.x_lo + ix as f64 * dx;
            let y0 = window.y_lo + iy as f64 * dy;
            let centre = Point::new(x0 + 0.5 * dx, y0 + 0.5 * dy);
            if !keep(centre) {
                return None;
            }
            let mut mass = 0.0;
            for sx in [-g, g] {
                for sy in [-g, g] {
                    let p = centre + Vec2::new(sx * dx, sy * dy);
                    mass += frobenius(b.jacobian_fd(p, eps));
                }
            }
            mass *= 0.25 * dx * dy;
            let hs = [
                h.value(Point::new(x0, y0)),
                h.value(Point::new(x0 + dx, y0)),
                h.value(Point::new(x0, y0 + dy)),
                h.value(Point::new(x0 + dx, y0 + dy)),
            ];
            let h_lo = hs.iter().copied().fold(f64::INFINITY, f64::min);
            let h_hi = hs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some(CellMass { mass, h_lo, h_hi })
        })
        .collect()
}

fn profile_from_cells(cells: &[CellMass], levels: &[f64], variant: Variant) -> VariationProfile {
    let g: Vec<f64> = levels.iter().map(|&l| cells.iter().map(|c| c.mass * c.fraction(l)).sum()).collect();
    let total_mass = cells.iter().map(|c| c.mass).sum();
    let g_prime_lp = match variant {
        Variant::Bv => None,
        Variant::Sobolev { p } => Some(derivative_lp(levels, &g, p)),
    };
    VariationProfile { variant, levels: levels.to_vec(), g, total_mass, g_prime_lp }
}

fn derivative_lp(levels: &[f64], g: &[f64], p: f64) -> f64 {
    let mut s = 0.0;
    for i in 1..levels.len() {
        let dh = levels[i] - levels[i - 1];
        if dh > 0.0 {
            s += ((g[i] - g[i - 1]) / dh).abs().powf(p) * dh;
        }
    }
    s.powf(1.0 / p)
}

/// `g(h)` from finite differences of `b` on an `n × n` cell grid over `window`, two
/// Gauss points per axis and cell. A cell straddling `{H = h}` contributes the share of
/// its mass given by the position of `h` between its lowest and highest corner values.
pub fn variation_profile(
    b: &PlanarField,
    h: &dyn ScalarField,
    window: &AxisRect,
    levels: &[f64],
    variant: Variant,
    n: usize,
) -> Result<VariationProfile> {
    check_levels(levels)?;
    if n == 0 {
        return Err(Error::InvalidParameter("cell count must be positive".into()));
    }
    let cells = cell_masses(b, h, window, n, &|_| true);
    Ok(profile_from_cells(&cells, levels, variant))
}

/// `g(h)` for a field whose derivative is concentrated on jump segments; `H` is affine
/// along every segment, so the part below a level is exact.
pub fn variation_profile_piecewise(
    segments: &[JumpSegment],
    h: &dyn ScalarField,
    window: &AxisRect,
    levels: &[f64],
) -> Result<VariationProfile> {
    check_levels(levels)?;
    let clipped: Vec<(f64, f64, f64)> = segments
        .iter()
        .filter_map(|s| {
            let (t0, t1) = clip_segment(s.a, s.b, window)?;
            let d = s.b - s.a;
            let (p, q) = (s.a + d * t0, s.a + d * t1);
            let mass = s.jump * p.dist(q);
            let (ha, hb) = (h.value(p), h.value(q));
            Some((mass, ha.min(hb), ha.max(hb)))
        })
        .collect();
    let cells: Vec<CellMass> = clipped.into_iter().map(|(mass, h_lo, h_hi)| CellMass { mass, h_lo, h_hi }).collect();
    Ok(profile_from_cells(&cells, levels, Variant::Bv))
}

/// `ρ(h) = ∫_{H=h} dH¹/|∇H|` for each level. In the chart `(u, w)` of direction `e` the
/// level set is the graph `w = f_h(u)` and `dH¹/|∇H| = du/|∂_w H|`. `window` is given in
/// chart coordinates; levels not attained on it have density 0.
pub fn coarea_density(
    h: &Arc<dyn ScalarField>,
    window: &AxisRect,
    levels: &[f64],
    e: Vec2,
    delta: f64,
    resolution: f64,
) -> Result<Vec<f64>> {
    let chart = Chart::new(e)?;
    levels
        .par_iter()
        .map(|&level| {
            let curve = match level_curve(h, level, window, e, delta, resolution) {
                Ok(c) => c,
                Err(Error::LevelNotAttained(_)) => return Ok(0.0),
                Err(err) => return Err(err),
            };
            let (mut lo, mut hi) = curve.interval;
            // the columns bracket the ends of O_h to one resolution step
            let attained = |u: f64| curve.eval(u).is_some();
            if lo > window.x_lo {
                lo = bisect_bool(attained, (lo - resolution).max(window.x_lo), lo);
            }
            if hi < window.x_hi {
                hi = bisect_bool(attained, (hi + resolution).min(window.x_hi), hi);
            }
            let en = chart.e.perp();
            let mut integrand = |u: f64| -> Result<f64> {
                let Some(w) = curve.eval(u) else { return Ok(0.0) };
                let dw = -h.gradient(chart.world(u, w)).dot(en);
                if !(dw > 0.0) {
                    return Err(Error::Transversality {
                        at: chart.world(u, w),
                        detail: format!("∂_w H = {} on level {level}", -dw),
                    });
                }
                Ok(1.0 / dw)
            };
            let mut s = 0.0;
            let m = (((hi - lo) / resolution).ceil() as usize).max(1);
            for i in 0..m {
                let a = lo + (hi - lo) * i as f64 / m as f64;
                let b = lo + (hi - lo) * (i + 1) as f64 / m as f64;
                s += quadrature::adaptive(a, b, 1e-10, &mut integrand)?;
            }
            Ok(s)
        })
        .collect()
}

/// Point where `attained` switches, starting from `outside` (false) and `inside` (true).
fn bisect_bool(attained: impl Fn(f64) -> bool, mut outside: f64, mut inside: f64) -> f64 {
    if attained(outside) {
        return outside;
    }
    for _ in 0..60 {
        let mid = 0.5 * (outside + inside);
        if attained(mid) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// `∫ρ(h) dh` over a uniform level grid spanning the range of `H` on the chart window,
/// against the window area.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoareaCheck {
    pub integral: f64,
    pub area: f64,
    pub relative_error: f64,
}

pub fn coarea_area_check(
    h: &Arc<dyn ScalarField>,
    window: &AxisRect,
    e: Vec2,
    delta: f64,
    resolution: f64,
    levels: usize,
) -> Result<CoareaCheck> {
    let chart = Chart::new(e)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let n = 65;
    for j in 0..n {
        for i in 0..n {
            let (u, w) = (
                window.x_lo + window.width() * i as f64 / (n - 1) as f64,
                window.y_lo + window.height() * j as f64 / (n - 1) as f64,
            );
            let v = h.value(chart.world(u, w));
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    // midpoint rule over the level range
    let dh = (hi - lo) / levels as f64;
    let hs: Vec<f64> = (0..levels).map(|i| lo + (i as f64 + 0.5) * dh).collect();
    let rho = coarea_density(h, window, &hs, e, delta, resolution)?;
    let integral = rho.iter().sum::<f64>() * dh;
    let area = window.area();
    Ok(CoareaCheck { integral, area, relative_error: (integral - area).abs() / area })
}

/// `C′ = C²‖b‖/δ² · (1 + 2‖b‖/δ + ‖b‖/δ²)`.
pub fn lipschitz_constant_cprime(c: f64, sup_norm: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    if !(c >= 1.0) {
        return Err(Error::InvalidParameter(format!("compressibility constant must be at least 1, got {c}")));
    }
    let b = sup_norm;
    Ok(c * c * b / (delta * delta) * (1.0 + 2.0 * b / delta + b / (delta * delta)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "estimate", rename_all = "kebab-case")]
pub enum Constants {
    Local { c_prime: f64 },
    Global { c1: f64, c2: f64, r: f64, r_bar: f64, n_tilde: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub pairs: usize,
    pub tested: usize,
    /// Pairs violating the preconditions or whose flow was flagged.
    pub skipped: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` over tested pairs.
    pub worst_ratio: f64,
    pub worst_pair: Option<(Point, Point)>,
    pub constants: Constants,
}

struct PairOutcome {
    z: Point,
    zp: Point,
    lhs: f64,
    rhs: f64,
    violated: bool,
}

fn exceeds(lhs: f64, rhs: f64) -> bool {
    lhs > rhs + SLACK * (rhs + 1.0)
}

fn tally(pairs: usize, outcomes: Vec<Option<PairOutcome>>, constants: Constants) -> EstimateReport {
    let mut rep = EstimateReport {
        pairs,
        tested: 0,
        skipped: 0,
        violations: 0,
        worst_ratio: 0.0,
        worst_pair: None,
        constants,
    };
    for o in outcomes {
        let Some(o) = o else {
            rep.skipped += 1;
            continue;
        };
        rep.tested += 1;
        if o.violated {
            rep.violations += 1;
        }
        let ratio = if o.rhs > 0.0 {
            o.lhs / o.rhs
        } else if o.lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > rep.worst_ratio || rep.worst_pair.is_none() {
            rep.worst_ratio = ratio.max(rep.worst_ratio);
            rep.worst_pair = Some((o.z, o.zp));
        }
    }
    rep
}

/// Checks `|X(t̄,z) − X(t̄,z′)| ≤ C′(|z − z′| + |g(H(z)) − g(H(z′))|)` on random pairs of
/// `window` farther than `‖b‖t̄` from its boundary. `b` must carry its transversality
/// bound; flows are level-set flows.
pub fn verify_local_estimate(
    b: &PlanarField,
    h: &Arc<dyn ScalarField>,
    window: &AxisRect,
    t_bar: f64,
    pairs: usize,
    seed: u64,
    g: &VariationProfile,
) -> Result<EstimateReport> {
    let tr = b
        .transversality
        .ok_or_else(|| Error::InvalidParameter("the local estimate needs a transversality bound".into()))?;
    let c_prime = lipschitz_constant_cprime(b.compressibility, b.sup_norm, tr.delta)?;
    let margin = b.sup_norm * t_bar * (1.0 + 1e-9);
    let inner = AxisRect {
        x_lo: window.x_lo + margin,
        x_hi: window.x_hi - margin,
        y_lo: window.y_lo + margin,
        y_hi: window.y_hi - margin,
    };
    if !(inner.x_lo < inner.x_hi && inner.y_lo < inner.y_hi) {
        return Err(Error::InvalidParameter(format!("no point of the window is farther than ‖b‖t̄ = {margin} from its boundary")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample: Vec<(Point, Point)> = (0..pairs)
        .map(|_| {
            let z = inner.lerp(rng.gen(), rng.gen());
            let zp = inner.lerp(rng.gen(), rng.gen());
            (z, zp)
        })
        .collect();
    let outcomes: Vec<Option<PairOutcome>> = sample
        .par_iter()
        .map(|&(z, zp)| {
            if window.inner_distance(z) <= b.sup_norm * t_bar || window.inner_distance(zp) <= b.sup_norm * t_bar {
                return None;
            }
            let x = levelset_flow(h, b, z, t_bar).ok()?;
            let xp = levelset_flow(h, b, zp, t_bar).ok()?;
            if x.flag != NodeFlag::Ok || xp.flag != NodeFlag::Ok {
                return None;
            }
            let lhs = x.point.dist(xp.point);
            let rhs = c_prime * (z.dist(zp) + (g.eval(h.value(z)) - g.eval(h.value(zp))).abs());
            Some(PairOutcome { z, zp, lhs, rhs, violated: exceeds(lhs, rhs) })
        })
        .collect();
    Ok(tally(pairs, outcomes, Constants::Local { c_prime }))
}

/// Knobs of the global verifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GlobalOptions {
    /// Level spacing of the `Ω_k` decomposition.
    pub h_resolution: f64,
    /// First covering radius tried; halved until the covering conditions hold.
    pub r_bar_start: f64,
    pub max_halvings: u32,
    /// Slope `L` of the flatness condition; `cos(atan L)` must exceed 1/2.
    pub slope: f64,
    /// Cells per axis for `g`.
    pub cells: usize,
    pub rk_tol: f64,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        Self { h_resolution: 2e-4, r_bar_start: 0.125, max_halvings: 10, slope: 1.0, cells: 256, rk_tol: 1e-11 }
    }
}

/// Outcome of the global check, with each inequality counted separately.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GlobalReport {
    pub report: EstimateReport,
    pub item1_violations: usize,
    pub item2_violations: usize,
    pub chain_violations: usize,
    /// Worst ratio of the chain `|X(t,z̄) − X(t,z)|` against its bound.
    pub chain_worst_ratio: f64,
    pub centres: usize,
    pub k: u32,
    pub t: f64,
}

/// Balls `B_r̄(zᵢ)` covering the sampled part of `Ω_k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Covering {
    pub r_bar: f64,
    pub centres: Vec<Point>,
    pub directions: Vec<Vec2>,
}

/// Centres on a grid of spacing `r̄` whose cell meets `Ω_k`. Every ball `B_{4r̄}(zᵢ)` must
/// lie in `Ω_{k+1}` and satisfy `b·eᵢ ≥ |b| cos(atan L)` with `eᵢ = b(zᵢ)/|b(zᵢ)|`, both
/// checked on rings of sample points.
pub fn covering(
    b: &PlanarField,
    h: &dyn ScalarField,
    dec: &RegularDecomposition,
    k: u32,
    window: &AxisRect,
    r_bar: f64,
    slope: f64,
) -> Result<Covering> {
    let cos = (1.0 + slope * slope).sqrt().recip();
    let nx = (window.width() / r_bar).ceil() as usize;
    let ny = (window.height() / r_bar).ceil() as usize;
    let rings: Vec<Vec2> = std::iter::once(Vec2::default())
        .chain((1..=4).flat_map(|i| {
            let rad = r_bar * i as f64;
            let m = 8 * i;
            (0..m).map(move |j| {
                let a = std::f64::consts::TAU * j as f64 / m as f64;
                Vec2::new(rad * a.cos(), rad * a.sin())
            })
        }))
        .collect();
    let found: Vec<Result<Option<(Point, Vec2)>>> = (0..nx * ny)
        .into_par_iter()
        .map(|c| {
            let (ix, iy) = (c % nx, c / nx);
            let z = Point::new(window.x_lo + (ix as f64 + 0.5) * r_bar, window.y_lo + (iy as f64 + 0.5) * r_bar);
            let meets = (0..3).any(|i| {
                (0..3).any(|j| {
                    let p = z + Vec2::new((i as f64 - 1.0) * 0.5 * r_bar, (j as f64 - 1.0) * 0.5 * r_bar);
                    dec.contains(k, h.value(p))
                })
            });
            if !meets {
                return Ok(None);
            }
            let bz = b.eval(z);
            if !(bz.norm() > 0.0) {
                return Err(Error::Covering { center: z, radius: r_bar });
            }
            let e = bz * (1.0 / bz.norm());
            for &d in &rings {
                let p = z + d;
                let v = b.eval(p);
                if !dec.contains(k + 1, h.value(p)) || v.dot(e) < v.norm() * cos {
                    return Err(Error::Covering { center: z, radius: r_bar });
                }
            }
            Ok(Some((z, e)))
        })
        .collect();
    let mut cov = Covering { r_bar, centres: vec![], directions: vec![] };
    for f in found {
        if let Some((z, e)) = f? {
            cov.centres.push(z);
            cov.directions.push(e);
        }
    }
    Ok(cov)
}

/// Checks the two items of the global estimate and their combination on random pairs
/// `z̄ ∈ Ω_k`, `z ∈ B_r(z̄)` for the divergence-free field `b = ∇⊥H`, with `H` supported
/// in its domain. `g(h) = |Db|({H ≤ h} ∩ Ω_{k+1})`; `s` minimizes `|X(t,z̄) − X(s,z)|`
/// over `|t − s| ≤ c₂(|g(H(z̄)) − g(H(z))| + |z̄ − z|)` (scan, then golden section).
pub fn verify_global_estimate(
    b: &PlanarField,
    h: &Arc<dyn ScalarField>,
    k: u32,
    t: f64,
    pairs: usize,
    seed: u64,
    opts: &GlobalOptions,
) -> Result<GlobalReport> {
    if k == 0 || !(t > 0.0) {
        return Err(Error::InvalidParameter("k and t must be positive".into()));
    }
    if !(opts.slope > 0.0) || (1.0 + opts.slope * opts.slope).sqrt().recip() <= 0.5 {
        return Err(Error::InvalidParameter("the flatness slope must satisfy cos(atan L) > 1/2".into()));
    }
    let window = h.domain();
    let dec = regular_decomposition(h, b, &window, k + 1, opts.h_resolution, &[])?;
    let mut r_bar = opts.r_bar_start;
    let mut halvings = 0;
    let cov = loop {
        match covering(b, h.as_ref(), &dec, k, &window, r_bar, opts.slope) {
            Ok(c) => break c,
            Err(e) if halvings >= opts.max_halvings => return Err(e),
            Err(_) => {
                r_bar *= 0.5;
                halvings += 1;
            }
        }
    };
    let sup = b.sup_norm;
    let kk = (k + 1) as f64;
    let n_tilde = (t * sup / r_bar).ceil().max(1.0) as u64;
    let r = r_bar.min(r_bar / (2.0 * kk * sup)).min(t / (2.0 * n_tilde as f64 * kk));
    let c1 = 2.0 * kk;
    let c2 = n_tilde as f64 * kk * kk * (1.0 + 2.0 * sup) + 2.0 * kk;

    let keep = |p: Point| dec.contains(k + 1, h.value(p));
    let cells = cell_masses(b, h.as_ref(), &window, opts.cells, &keep);
    let levels: Vec<f64> = dec.records.iter().map(|r| r.h).collect();
    let g = profile_from_cells(&cells, &levels, Variant::Bv);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = Vec::with_capacity(pairs);
    let mut draws = 0usize;
    while sample.len() < pairs {
        draws += 1;
        if draws > 1000 * (pairs + 1) {
            return Err(Error::Numerical("could not sample points of Ω_k".into()));
        }
        let zb = window.lerp(rng.gen(), rng.gen());
        if !dec.contains(k, h.value(zb)) {
            continue;
        }
        let rad = r * rng.gen::<f64>().sqrt();
        let ang = std::f64::consts::TAU * rng.gen::<f64>();
        sample.push((zb, zb + Vec2::new(rad * ang.cos(), rad * ang.sin())));
    }
    let rk = RkOptions::new(opts.rk_tol);
    let outcomes: Vec<Option<[f64; 6]>> = sample
        .par_iter()
        .map(|&(zb, z)| {
            let target = rk_flow(b, zb, t, &rk).ok()?.point;
            let xt = rk_flow(b, z, t, &rk).ok()?.point;
            let (hb, hz) = (h.value(zb), h.value(z));
            let dg = (g.eval(hb) - g.eval(hz)).abs();
            let bound = dg + zb.dist(z);
            let (s, d) = match_time(b, z, target, t, c2 * bound, &rk)?;
            Some([
                d,
                c1 * (hb - hz).abs(),
                (t - s).abs(),
                c2 * bound,
                target.dist(xt),
                sup * (c1 + c2) * zb.dist(z) + c2 * sup * dg,
            ])
        })
        .collect();
    let (mut item1, mut item2, mut chain) = (0, 0, 0);
    let mut chain_worst: f64 = 0.0;
    let per_pair: Vec<Option<PairOutcome>> = outcomes
        .iter()
        .zip(&sample)
        .map(|(o, &(zb, z))| {
            let [d, rhs1, dt, rhs2, dx, rhs3] = (*o)?;
            let (v1, v2, v3) = (exceeds(d, rhs1), exceeds(dt, rhs2), exceeds(dx, rhs3));
            item1 += v1 as usize;
            item2 += v2 as usize;
            chain += v3 as usize;
            if rhs3 > 0.0 {
                chain_worst = chain_worst.max(dx / rhs3);
            }
            // the ratio reported is that of item 1; item 2 holds by the choice of the bracket
            Some(PairOutcome { z: zb, zp: z, lhs: d, rhs: rhs1, violated: v1 || v2 || v3 })
        })
        .collect();
    let report = tally(pairs, per_pair, Constants::Global { c1, c2, r, r_bar, n_tilde });
    Ok(GlobalReport {
        report,
        item1_violations: item1,
        item2_violations: item2,
        chain_violations: chain,
        chain_worst_ratio: chain_worst,
        centres: cov.centres.len(),
        k,
        t,
    })
}

/// `s ≥ 0` within `|s − t| ≤ half` minimizing `|X(s,z) − target|`, with the distance.
fn match_time(b: &PlanarField, z: Point, target: Point, t: f64, half: f64, rk: &RkOptions) -> Option<(f64, f64)> {
    let lo = (t - half).max(0.0);
    let hi = t + half;
    if hi - lo <= 0.0 {
        let p = rk_flow(b, z, t, rk).ok()?.point;
        return Some((t, p.dist(target)));
    }
    let m = 64;
    let ds = (hi - lo) / m as f64;
    let mut pts = Vec::with_capacity(m + 1);
    let mut p = rk_flow(b, z, lo, rk).ok()?.point;
    pts.push(p);
    for _ in 0..m {
        p = rk_flow(b, p, ds, rk).ok()?.point;
        pts.push(p);
    }
    let d: Vec<f64> = pts.iter().map(|q| q.dist(target)).collect();
    // every local minimum of the scan, and the sample nearest to t, seeds a golden section
    let mut seeds: Vec<usize> = (0..=m)
        .filter(|&i| (i == 0 || d[i] <= d[i - 1]) && (i == m || d[i] <= d[i + 1]))
        .collect();
    seeds.push((((t - lo) / ds).round() as usize).min(m));
    seeds.sort_unstable();
    seeds.dedup();
    let mut best = (lo, f64::INFINITY);
    for i in seeds {
        if d[i] < best.1 {
            best = (lo + i as f64 * ds, d[i]);
        }
        let i0 = i.saturating_sub(1);
        let i1 = (i + 1).min(m);
        let (base, s0) = (pts[i0], lo + i0 as f64 * ds);
        let dist = |s: f64| rk_flow(b, base, s - s0, rk).map(|o| o.point.dist(target)).unwrap_or(f64::INFINITY);
        let (s, dm) = golden_section(dist, s0, lo + i1 as f64 * ds, 1e-10);
        if dm < best.1 {
            best = (s, dm);
        }
    }
    Some(best)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let s = 0.5 * (a + b);
    (s, f(s))
}

/// A discrete norm of one flow-map component over the cells inside a region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiscreteNorm {
    pub value: f64,
    pub cells: usize,
    /// Cells in the region left out because a corner node is flagged.
    pub excluded: usize,
}

fn cell_differences(
    fm: &FlowMap,
    component: usize,
    region: Option<&AxisRect>,
    mut visit: impl FnMut(f64, f64),
) -> Result<DiscreteNorm> {
    if component > 1 {
        return Err(Error::InvalidParameter(format!("component {component} of a planar map")));
    }
    let g = &fm.grid;
    let u = |ix: usize, iy: usize| {
        let p = fm.image(ix, iy);
        if component == 0 {
            p.x
        } else {
            p.y
        }
    };
    let mut out = DiscreteNorm { value: 0.0, cells: 0, excluded: 0 };
    for iy in 0..g.ny - 1 {
        for ix in 0..g.nx - 1 {
            let corners = [(ix, iy), (ix + 1, iy), (ix, iy + 1), (ix + 1, iy + 1)];
            if let Some(r) = region {
                if !corners.iter().all(|&(i, j)| r.contains(g.node(i, j))) {
                    continue;
                }
            }
            if corners.iter().any(|&(i, j)| fm.flag(i, j) != NodeFlag::Ok) {
                out.excluded += 1;
                continue;
            }
            out.cells += 1;
            let dux = 0.5 * ((u(ix + 1, iy) - u(ix, iy)) + (u(ix + 1, iy + 1) - u(ix, iy + 1)));
            let duy = 0.5 * ((u(ix, iy + 1) - u(ix, iy)) + (u(ix + 1, iy + 1) - u(ix + 1, iy)));
            visit(dux, duy);
        }
    }
    Ok(out)
}

/// Anisotropic discrete TV `Σ (|Δₓu|·dy + |Δ_yu|·dx)` with the differences averaged over
/// each cell's two edges. For `u = x` this is the region's area; for the identity map the
/// TV of each component is the region's area.
pub fn discrete_tv(fm: &FlowMap, component: usize, region: Option<&AxisRect>) -> Result<DiscreteNorm> {
    let (dx, dy) = (fm.grid.dx(), fm.grid.dy());
    let mut s = 0.0;
    let mut n = cell_differences(fm, component, region, |a, b| s += a.abs() * dy + b.abs() * dx)?;
    n.value = s;
    Ok(n)
}

/// `(Σ |∇u|ᵖ·cell area)^{1/p}` with the cell-averaged difference gradient.
pub fn discrete_sobolev(fm: &FlowMap, component: usize, p: f64, region: Option<&AxisRect>) -> Result<DiscreteNorm> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("Sobolev exponent must be at least 1, got {p}")));
    }
    let (dx, dy) = (fm.grid.dx(), fm.grid.dy());
    let mut s = 0.0;
    let mut n = cell_differences(fm, component, region, |a, b| s += (a / dx).hypot(b / dy).powf(p) * dx * dy)?;
    n.value = s.powf(1.0 / p);
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Analytic, Transversality};
    use crate::flow::FlowMethod;
    use crate::hamiltonian::NodeGrid;

    fn arc(h: Analytic) -> Arc<dyn ScalarField> {
        Arc::new(h)
    }

    fn shear_levels(n: usize) -> Vec<f64> {
        // H = −(y + y³/3) ranges over [−4/3, 0] on the unit square
        (0..=n).map(|i| -4.0 / 3.0 + 4.0 / 3.0 * i as f64 / n as f64).collect()
    }

    #[test]
    fn shear_profile_total_is_one() {
        let h = arc(Analytic::shear(AxisRect::unit()));
        let b = PlanarField::from_hamiltonian(h.clone());
        let p = variation_profile(&b, h.as_ref(), &AxisRect::unit(), &shear_levels(64), Variant::Bv, 64).unwrap();
        assert!(p.is_monotone());
        assert_eq!(*p.g.last().unwrap(), p.total_mass);
        assert!((p.total_mass - 1.0).abs() < 1e-6, "{}", p.total_mass);
        assert_eq!(p.g[0], 0.0);
        // g at the level of y = 1/2 is |Db|({y ≥ 1/2}) = 3/4
        let mid = -(0.5 + 0.125 / 3.0);
        assert!((p.eval(mid) - 0.75).abs() < 0.02, "{}", p.eval(mid));
    }

    #[test]
    fn constant_field_has_zero_profile() {
        let h = arc(Analytic::linear(0.0, -1.0, 0.0, AxisRect::unit()));
        let b = PlanarField::from_hamiltonian(h.clone());
        let p = variation_profile(&b, h.as_ref(), &AxisRect::unit(), &[-1.0, -0.5, 0.0], Variant::Sobolev { p: 2.0 }, 8)
            .unwrap();
        assert!(p.g.iter().all(|&g| g == 0.0));
        assert_eq!(p.g_prime_lp, Some(0.0));
    }

    #[test]
    fn piecewise_profile_is_exact() {
        // one vertical jump segment of size 2 on x = 0.5, with H = −y
        let seg = JumpSegment { a: Point::new(0.5, 0.0), b: Point::new(0.5, 1.0), jump: 2.0 };
        let h = Analytic::linear(0.0, -1.0, 0.0, AxisRect::unit());
        let p = variation_profile_piecewise(&[seg], &h, &AxisRect::unit(), &[-1.0, -0.75, -0.25, 0.0]).unwrap();
        assert_eq!(p.g, vec![0.0, 0.5, 1.5, 2.0]);
        let clipped = AxisRect::new(0.0, 1.0, 0.0, 0.5).unwrap();
        let p = variation_profile_piecewise(&[seg], &h, &clipped, &[0.0]).unwrap();
        assert_eq!(p.total_mass, 1.0);
    }

    #[test]
    fn coarea_of_linear_hamiltonians() {
        let e = Vec2::new(1.0, 0.0);
        let h = arc(Analytic::linear(0.0, -1.0, 0.0, AxisRect::new(-1.0, 2.0, -1.0, 2.0).unwrap()));
        let rho = coarea_density(&h, &AxisRect::unit(), &[-0.9, -0.5, -0.1], e, 0.5, 0.1).unwrap();
        assert!(rho.iter().all(|r| (r - 1.0).abs() < 1e-12), "{rho:?}");
        let h = arc(Analytic::linear(0.0, -2.0, 0.0, AxisRect::new(-1.0, 2.0, -1.0, 2.0).unwrap()));
        let rho = coarea_density(&h, &AxisRect::unit(), &[-1.9, -1.0, -0.1, 0.5], e, 0.5, 0.1).unwrap();
        assert!(rho[..3].iter().all(|r| (r - 0.5).abs() < 1e-12), "{rho:?}");
        assert_eq!(rho[3], 0.0);
    }

    #[test]
    fn coarea_integral_is_area() {
        // a slanted, curved Hamiltonian whose levels leave through the side edges
        let h = arc(Analytic::quadratic(0.4, 0.3, -2.0, AxisRect::new(-2.0, 2.0, 0.0, 3.0).unwrap()));
        let w = AxisRect::new(-0.5, 0.5, 0.5, 1.5).unwrap();
        let c = coarea_area_check(&h, &w, Vec2::new(1.0, 0.0), 0.1, 0.05, 400).unwrap();
        assert!(c.relative_error < 1e-3, "{c:?}");
    }

    #[test]
    fn cprime_values() {
        assert_eq!(lipschitz_constant_cprime(1.0, 1.0, 1.0).unwrap(), 4.0);
        assert_eq!(lipschitz_constant_cprime(1.0, 1.0, 0.5).unwrap(), 36.0);
        assert!(lipschitz_constant_cprime(1.0, 1.0, 2.0).unwrap() < 4.0);
        assert!(lipschitz_constant_cprime(1.0, 1.0, 0.0).is_err());
    }

    fn shear_setup() -> (PlanarField, Arc<dyn ScalarField>, VariationProfile) {
        let h = arc(Analytic::shear(AxisRect::new(-0.5, 1.5, -0.5, 1.5).unwrap()));
        let b = PlanarField::from_hamiltonian(h.clone())
            .with_sup_norm(2.0)
            .with_transversality(Transversality { e: Vec2::new(1.0, 0.0), delta: 1.0, window: AxisRect::unit() });
        let g = variation_profile(&b, h.as_ref(), &AxisRect::unit(), &shear_levels(256), Variant::Bv, 64).unwrap();
        (b, h, g)
    }

    #[test]
    fn local_estimate_on_shear() {
        let (b, h, g) = shear_setup();
        let rep = verify_local_estimate(&b, &h, &AxisRect::unit(), 0.1, 200, 7, &g).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.tested + rep.skipped, 200);
        assert!(rep.tested >= 190, "{rep:?}");
        assert!(rep.worst_ratio < 1.0);
        assert_eq!(rep.constants, Constants::Local { c_prime: 2.0 * (1.0 + 4.0 + 2.0) });
    }

    #[test]
    fn discrete_norms_of_linear_maps() {
        let grid = NodeGrid::new(AxisRect::unit(), 11, 6).unwrap();
        let b = PlanarField::direct(|_| Vec2::default(), 0.0, 1.0);
        let fm = crate::flow::flow_map(&b, 0.0, &grid, FlowMethod::Rk { tol: 1e-9, max_step: None }).unwrap();
        let tv = discrete_tv(&fm, 0, None).unwrap();
        assert!((tv.value - 1.0).abs() < 1e-12);
        assert_eq!(tv.cells, 50);
        let half = AxisRect::new(0.0, 0.5, 0.0, 1.0).unwrap();
        assert!((discrete_tv(&fm, 1, Some(&half)).unwrap().value - 0.5).abs() < 1e-12);
        let s = discrete_sobolev(&fm, 0, 2.0, None).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(discrete_sobolev(&fm, 0, 0.5, None).is_err());
    }

    #[test]
    fn degenerate_pair_matches_at_t() {
        let b = PlanarField::direct(|p| Vec2::new(-p.y, p.x), 2.0, 1.0);
        let z = Point::new(0.5, 0.0);
        let rk = RkOptions::new(1e-12);
        let target = rk_flow(&b, z, 1.0, &rk).unwrap().point;
        assert_eq!(match_time(&b, z, target, 1.0, 0.0, &rk), Some((1.0, 0.0)));
        // a start a quarter turn behind needs s = t + π/2
        let (s, d) = match_time(&b, Point::new(0.0, -0.5), target, 1.0, 3.0, &rk).unwrap();
        assert!((s - 1.0 - std::f64::consts::FRAC_PI_2).abs() < 1e-8 && d < 1e-9, "{s} {d}");
    }
}

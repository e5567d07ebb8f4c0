//! The smoothed construction `f̃ = f₀ + Σ_l h_l ∗ ρ_l` with `h_l = f_l − f_{l−1}` and
//! `ρ_l = r_l⁻² ρ(·/r_l)`.
//!
//! `ρ(u) = φ(u₁)φ(u₂)` is a tensor product of a one-dimensional bump supported on
//! `[−κ, κ]`, `κ = 1/(2√2)`, so `supp ρ` is a square inscribed in `B_{1/2}`. Against an
//! affine piece the inner integral in `y` is closed form in the tabulated primitives
//! `Φ(s) = ∫φ` and `M(s) = ∫tφ`; the outer integral in `x` is composite
//! Gauss–Legendre between the piece's vertex abscissae.

use std::fmt::Write as _;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use super::field::CounterexampleField;
use super::tree::CantorTree;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{AxisRect, Point, Vec2};
use crate::quadrature;

const TABLE_NODES: usize = 4097;

/// One-dimensional bump `φ(s) = K exp(−1/(1 − (s/κ)²))` with tabulated primitives.
#[derive(Debug)]
pub struct Kernel {
    kappa: f64,
    norm: f64,
    step: f64,
    cdf: Vec<f64>,
    mom: Vec<f64>,
}

fn raw_bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

impl Kernel {
    fn build() -> Result<Self> {
        let kappa = 0.5 * std::f64::consts::FRAC_1_SQRT_2;
        let step = 2.0 * kappa / (TABLE_NODES - 1) as f64;
        let node = |i: usize| -kappa + step * i as f64;
        let f = |s: f64| raw_bump(s / kappa);
        let mut cdf = vec![0.0; TABLE_NODES];
        let mut mom = vec![0.0; TABLE_NODES];
        for i in 1..TABLE_NODES {
            let (a, b) = (node(i - 1), node(i));
            cdf[i] = cdf[i - 1] + quadrature::fixed(20, a, b, f);
            mom[i] = mom[i - 1] + quadrature::fixed(20, a, b, |s| s * f(s));
        }
        let total = cdf[TABLE_NODES - 1];
        // independent check of the normalisation
        let check: f64 = quadrature::adaptive::<_, Error>(-kappa, kappa, 1e-14, &mut |s| Ok(f(s)))?;
        let norm = 1.0 / total;
        cdf.iter_mut().for_each(|v| *v *= norm);
        mom.iter_mut().for_each(|v| *v *= norm);
        let k = Self { kappa, norm, step, cdf, mom };
        let mass = (check * norm).powi(2);
        let moment = k.moment(kappa);
        if (mass - 1.0).abs() > 1e-12 || moment.abs() > 1e-12 {
            return Err(Error::KernelMoment { mass, moment });
        }
        Ok(k)
    }

    /// The shared bump kernel.
    pub fn bump() -> Result<Arc<Kernel>> {
        static K: OnceLock<std::result::Result<Arc<Kernel>, String>> = OnceLock::new();
        K.get_or_init(|| Kernel::build().map(Arc::new).map_err(|e| e.to_string()))
            .clone()
            .map_err(Error::Numerical)
    }

    /// Half-width of the square support of `ρ`.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn phi(&self, s: f64) -> f64 {
        self.norm * raw_bump(s / self.kappa)
    }

    pub fn dphi(&self, s: f64) -> f64 {
        let u = s / self.kappa;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - u * u;
        self.phi(s) * (-2.0 * u / (d * d)) / self.kappa
    }

    /// `ρ(u) = φ(u₁)φ(u₂)`.
    pub fn density(&self, u: Point) -> f64 {
        self.phi(u.x) * self.phi(u.y)
    }

    fn interp(&self, table: &[f64], s: f64, deriv: impl Fn(f64) -> f64) -> f64 {
        if s <= -self.kappa {
            return table[0];
        }
        if s >= self.kappa {
            return table[TABLE_NODES - 1];
        }
        let x = (s + self.kappa) / self.step;
        let i = (x.floor() as usize).min(TABLE_NODES - 2);
        let t = x - i as f64;
        let (s0, s1) = (-self.kappa + self.step * i as f64, -self.kappa + self.step * (i + 1) as f64);
        let (p0, p1) = (table[i], table[i + 1]);
        let (m0, m1) = (deriv(s0) * self.step, deriv(s1) * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
    }

    /// `Φ(s) = ∫_{−∞}^s φ`.
    pub fn cdf(&self, s: f64) -> f64 {
        self.interp(&self.cdf, s, |v| self.phi(v))
    }

    /// `M(s) = ∫_{−∞}^s tφ(t) dt`.
    pub fn moment(&self, s: f64) -> f64 {
        self.interp(&self.mom, s, |v| v * self.phi(v))
    }
}

#[derive(Clone, Debug)]
struct IncPiece {
    verts: Vec<Point>,
    grad: Vec2,
    value0: f64,
    bbox: AxisRect,
}

impl IncPiece {
    /// `(min y, max y)` of the convex polygon on the vertical line through `x`.
    fn extent(&self, origin: Point, x: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let n = self.verts.len();
        for i in 0..n {
            let a = origin + self.verts[i];
            let b = origin + self.verts[(i + 1) % n];
            let (xa, xb) = if a.x <= b.x { (a, b) } else { (b, a) };
            if xa.x == xb.x || x < xa.x || x > xb.x {
                continue;
            }
            let y = xa.y + (xb.y - xa.y) * ((x - xa.x) / (xb.x - xa.x));
            lo = lo.min(y);
            hi = hi.max(y);
        }
        (lo, hi)
    }
}

/// `∫_P h ρ_r(z − ·)`, `∫_P ρ_r(z − ·)` and the gradient of the latter in `z`.
#[derive(Clone, Copy, Debug, Default)]
struct PieceIntegrals {
    value: f64,
    mass: f64,
    dmass: Vec2,
}

fn integrate_piece(k: &Kernel, piece: &IncPiece, origin: Point, z: Point, r: f64) -> PieceIntegrals {
    let mut out = PieceIntegrals::default();
    let half = r * k.kappa;
    let bb = &piece.bbox;
    let (xa, xb) = ((origin.x + bb.x_lo).max(z.x - half), (origin.x + bb.x_hi).min(z.x + half));
    if xa >= xb || origin.y + bb.y_lo >= z.y + half || origin.y + bb.y_hi <= z.y - half {
        return out;
    }
    let mut cuts: Vec<f64> = piece.verts.iter().map(|v| origin.x + v.x).filter(|&x| x > xa && x < xb).collect();
    cuts.push(xa);
    cuts.push(xb);
    cuts.sort_by(f64::total_cmp);
    let v0 = origin + piece.verts[0];
    let g = piece.grad;
    let panel = 0.25 * half;
    let (nodes, weights) = quadrature::rule(20);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = ((b - a) / panel).ceil().max(1.0) as usize;
        let dh = (b - a) / m as f64;
        for p in 0..m {
            let (pa, pb) = (a + p as f64 * dh, a + (p + 1) as f64 * dh);
            let (mid, rad) = (0.5 * (pa + pb), 0.5 * (pb - pa));
            for (xi, wi) in nodes.iter().zip(weights) {
                let x = mid + rad * xi;
                let wq = wi * rad;
                let (lo, hi) = piece.extent(origin, x);
                if !(hi > lo) {
                    continue;
                }
                let (sa, sb) = ((z.y - hi) / r, (z.y - lo) / r);
                let i0 = k.cdf(sb) - k.cdf(sa);
                let i1 = z.y * i0 - r * (k.moment(sb) - k.moment(sa));
                let u = (z.x - x) / r;
                let wx = k.phi(u) / r;
                let a0 = piece.value0 + g.x * (x - v0.x) - g.y * v0.y;
                out.value += wq * wx * (a0 * i0 + g.y * i1);
                out.mass += wq * wx * i0;
                out.dmass.x += wq * k.dphi(u) / (r * r) * i0;
                out.dmass.y += wq * wx * (k.phi(sb) - k.phi(sa)) / r;
            }
        }
    }
    out
}

/// `f̃_n` for a build depth `n`.
#[derive(Clone, Debug)]
pub struct MollifiedField {
    base: CounterexampleField,
    kernel: Arc<Kernel>,
    pieces: Vec<Vec<IncPiece>>,
    lipschitz: f64,
}

impl MollifiedField {
    pub fn new(tree: Arc<CantorTree>, depth: u32) -> Result<Self> {
        Ok(Self::with_kernel(tree, depth, Kernel::bump()?))
    }

    pub fn with_kernel(tree: Arc<CantorTree>, depth: u32, kernel: Arc<Kernel>) -> Self {
        let base = CounterexampleField::new(tree, depth);
        let pieces: Vec<Vec<IncPiece>> = (1..=depth)
            .map(|l| {
                base.layout(l)
                    .increment_pieces()
                    .into_iter()
                    .map(|(verts, grad, value0)| {
                        let xs = verts.iter().map(|v| v.x);
                        let ys = verts.iter().map(|v| v.y);
                        let bbox = AxisRect {
                            x_lo: xs.clone().fold(f64::INFINITY, f64::min),
                            x_hi: xs.fold(f64::NEG_INFINITY, f64::max),
                            y_lo: ys.clone().fold(f64::INFINITY, f64::min),
                            y_hi: ys.fold(f64::NEG_INFINITY, f64::max),
                        };
                        IncPiece { verts, grad, value0, bbox }
                    })
                    .collect()
            })
            .collect();
        let lipschitz =
            1.0 + pieces.iter().map(|ps| ps.iter().map(|p| p.grad.norm()).fold(0.0, f64::max)).sum::<f64>();
        Self { base, kernel, pieces, lipschitz }
    }

    pub fn depth(&self) -> u32 {
        self.base.depth()
    }

    /// The unmollified `f_n` of the same depth.
    pub fn base(&self) -> &CounterexampleField {
        &self.base
    }

    pub fn kernel(&self) -> &Arc<Kernel> {
        &self.kernel
    }

    /// Origins of the components of `C_l` whose mollification support reaches `z`;
    /// at most one per level.
    fn components_near(&self, z: Point) -> Vec<(u32, Point)> {
        let mut out = vec![];
        let mut origin = Point::new(0.0, 0.0);
        for l in 1..=self.depth() {
            let lay = self.base.layout(l);
            let m = lay.r * self.kernel.kappa;
            let inside = |o: Point| z.x >= o.x - m && z.x <= o.x + lay.c + m && z.y >= o.y - m && z.y <= o.y + lay.c + m;
            if l > 1 {
                let prev = self.base.layout(l - 1);
                match prev.child.iter().map(|&c| origin + c).find(|&o| inside(o)) {
                    Some(o) => origin = o,
                    None => break,
                }
            } else if !inside(origin) {
                break;
            }
            out.push((l, origin));
        }
        out
    }

    fn level_sum(&self, l: u32, origin: Point, z: Point) -> (f64, Vec2, [[f64; 2]; 2]) {
        let r = self.base.layout(l).r;
        let (mut v, mut g, mut h) = (0.0, Vec2::default(), [[0.0; 2]; 2]);
        for p in &self.pieces[l as usize - 1] {
            let it = integrate_piece(&self.kernel, p, origin, z, r);
            v += it.value;
            g += p.grad * it.mass;
            h[0][0] += p.grad.x * it.dmass.x;
            h[0][1] += p.grad.x * it.dmass.y;
            h[1][0] += p.grad.y * it.dmass.x;
            h[1][1] += p.grad.y * it.dmass.y;
        }
        (v, g, h)
    }

    /// `(h_l ∗ ρ_l)(z)`.
    pub fn increment(&self, l: u32, z: Point) -> f64 {
        self.components_near(z).into_iter().filter(|(k, _)| *k == l).map(|(k, o)| self.level_sum(k, o, z).0).sum()
    }

    /// `∇²f̃(z)`.
    pub fn hessian(&self, z: Point) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for (l, o) in self.components_near(z) {
            let hl = self.level_sum(l, o, z).2;
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += hl[i][j];
                }
            }
        }
        h
    }

    /// `∇²(h_l ∗ ρ_l)` for the component of `C_l` with corner at the origin, at the
    /// local point `z`.
    pub fn increment_hessian_local(&self, l: u32, z: Point) -> [[f64; 2]; 2] {
        self.level_sum(l, Point::new(0.0, 0.0), z).2
    }

    fn level_edges(&self, l: u32) -> Vec<(Point, Point)> {
        let mut e = vec![];
        for p in &self.pieces[l as usize - 1] {
            let n = p.verts.len();
            for i in 0..n {
                e.push((p.verts[i], p.verts[(i + 1) % n]));
            }
        }
        e
    }
}

impl ScalarField for MollifiedField {
    fn value(&self, p: Point) -> f64 {
        let mut v = p.y;
        for (l, o) in self.components_near(p) {
            v += self.level_sum(l, o, p).0;
        }
        v
    }

    fn gradient(&self, p: Point) -> Vec2 {
        let mut g = Vec2::new(0.0, 1.0);
        for (l, o) in self.components_near(p) {
            g += self.level_sum(l, o, p).1;
        }
        g
    }

    fn domain(&self) -> AxisRect {
        self.base.domain()
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// `f̃_n` on the shared kernel.
pub fn build_f_smooth(tree: Arc<CantorTree>, depth: u32) -> Result<MollifiedField> {
    MollifiedField::new(tree, depth)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SobolevLevel {
    pub l: u32,
    /// `‖∇²(h_l ∗ ρ_l)‖_{Lᵖ(ℝ²)}` (Frobenius norm pointwise).
    pub norm: f64,
    pub partial_sum: f64,
    pub cells: usize,
    pub cell_size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SobolevSchedule {
    pub p: f64,
    pub levels: Vec<SobolevLevel>,
    /// Levels skipped because the grid would exceed the resolution cap.
    pub infeasible: Vec<u32>,
}

impl SobolevSchedule {
    /// `|S_l − S_{l−1}| / S_l` for the last two computed levels.
    pub fn last_increment(&self) -> Option<f64> {
        let n = self.levels.len();
        (n >= 2).then(|| {
            let (a, b) = (self.levels[n - 2].partial_sum, self.levels[n - 1].partial_sum);
            (b - a).abs() / b
        })
    }

    /// CSV `l,norm,partial_sum,cells,cell_size`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("l,norm,partial_sum,cells,cell_size\n");
        for v in &self.levels {
            let _ = writeln!(s, "{},{:.12e},{:.12e},{},{:e}", v.l, v.norm, v.partial_sum, v.cells, v.cell_size);
        }
        s
    }
}

/// Largest number of cells per side before a level is declared infeasible.
pub const MAX_CELLS_PER_SIDE: usize = 8192;

/// Discrete `Lᵖ` norms of `∇²(h_l ∗ ρ_l)` for `l = 1..=l_max`.
///
/// All `2^{l−1}` components of `C_l` carry congruent increments, so one component is
/// integrated and scaled. The grid has cells of side `r_lκ/2` over the component
/// expanded by `r_lκ`, with 2×2 Gauss points; cells farther than the kernel reach from
/// every breakpoint edge contribute zero and are skipped.
pub fn sobolev_schedule(tree: Arc<CantorTree>, l_max: u32, p: f64) -> Result<SobolevSchedule> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in [1, ∞)")));
    }
    let field = MollifiedField::new(tree, l_max)?;
    let kappa = field.kernel.kappa;
    let (gx, _) = quadrature::rule(2);
    let mut out = SobolevSchedule { p, levels: vec![], infeasible: vec![] };
    let mut sum = 0.0;
    for l in 1..=l_max {
        let lay = field.base.layout(l);
        let reach = lay.r * kappa;
        let target = 0.5 * reach;
        let lo = -reach;
        let width = lay.c + 2.0 * reach;
        let m = (width / target).ceil() as usize;
        if m > MAX_CELLS_PER_SIDE {
            out.infeasible.push(l);
            continue;
        }
        let hcell = width / m as f64;
        let edges = field.level_edges(l);
        let near = reach * std::f64::consts::SQRT_2 + hcell;
        let rows: Vec<(f64, usize)> = (0..m)
            .into_par_iter()
            .map(|iy| {
                let mut acc = 0.0;
                let mut cells = 0;
                for ix in 0..m {
                    let c = Point::new(lo + (ix as f64 + 0.5) * hcell, lo + (iy as f64 + 0.5) * hcell);
                    if !edges.iter().any(|&(a, b)| segment_distance(c, a, b) <= near) {
                        continue;
                    }
                    cells += 1;
                    for &u in gx.iter() {
                        for &v in gx.iter() {
                            let q = c + Point::new(u, v) * (0.5 * hcell);
                            let h = field.increment_hessian_local(l, q);
                            let fro = (h[0][0].powi(2) + h[0][1].powi(2) + h[1][0].powi(2) + h[1][1].powi(2)).sqrt();
                            acc += 0.25 * fro.powf(p);
                        }
                    }
                }
                (acc * hcell * hcell, cells)
            })
            .collect();
        let integral: f64 = rows.iter().map(|r| r.0).sum();
        let cells = rows.iter().map(|r| r.1).sum();
        let norm = (2f64.powi(l as i32 - 1) * integral).powf(1.0 / p);
        sum += norm;
        out.levels.push(SobolevLevel { l, norm, partial_sum: sum, cells, cell_size: hcell });
    }
    Ok(out)
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(n: u32) -> Arc<CantorTree> {
        Arc::new(CantorTree::build(n).unwrap())
    }

    #[test]
    fn kernel_moments() {
        let k = Kernel::bump().unwrap();
        assert!((k.cdf(1.0) - 1.0).abs() < 1e-14);
        assert!(k.moment(1.0).abs() < 1e-15);
        assert_eq!(k.cdf(-1.0), 0.0);
        assert!((k.cdf(0.0) - 0.5).abs() < 1e-13);
        // interpolated primitive against direct quadrature
        let s = 0.123;
        let direct = quadrature::adaptive::<_, ()>(-k.kappa(), s, 1e-15, &mut |t| Ok(k.phi(t))).unwrap();
        assert!((k.cdf(s) - direct).abs() < 1e-13, "{}", k.cdf(s) - direct);
    }

    #[test]
    fn equals_base_on_next_squares() {
        let t = tree(3);
        let f = MollifiedField::new(t.clone(), 2).unwrap();
        let base = f.base().clone();
        let mut worst: f64 = 0.0;
        for comp in t.components(3) {
            let o = Point::new(crate::counterexample::to_f64(&comp.x0), crate::counterexample::to_f64(&comp.y0));
            let c = crate::counterexample::to_f64(t.scalars().c(3));
            for i in 0..5 {
                for j in 0..5 {
                    let p = o + Point::new(c * i as f64 / 4.0, c * j as f64 / 4.0);
                    worst = worst.max((f.value(p) - base.value(p)).abs());
                }
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn outside_is_f0() {
        let f = MollifiedField::new(tree(2), 2).unwrap();
        for p in [Point::new(-0.1, 0.3), Point::new(0.7, 0.2), Point::new(0.2, 0.55)] {
            assert_eq!(f.value(p), p.y);
            assert_eq!(f.gradient(p), Vec2::new(0.0, 1.0));
            assert_eq!(f.hessian(p), [[0.0; 2]; 2]);
        }
    }

    #[test]
    fn smooth_across_breakpoints() {
        // ∂_y f̃ stays positive and continuous across a fan edge of level 1
        let f = MollifiedField::new(tree(1), 1).unwrap();
        let x = f.base().layout(1).xs[0];
        let a = f.gradient(Point::new(x - 1e-7, 0.2));
        let b = f.gradient(Point::new(x + 1e-7, 0.2));
        assert!(a.dist(b) < 1e-4);
        assert!(a.y > 0.0);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let f = MollifiedField::new(tree(1), 1).unwrap();
        let x = f.base().layout(1).xs[1];
        let z = Point::new(x + 0.003, 0.05);
        let h = f.hessian(z);
        let e = 1e-6;
        let gx = (f.gradient(z + Point::new(e, 0.0)) - f.gradient(z - Point::new(e, 0.0))) * (0.5 / e);
        let gy = (f.gradient(z + Point::new(0.0, e)) - f.gradient(z - Point::new(0.0, e))) * (0.5 / e);
        let scale = 1.0 + h.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((h[0][0] - gx.x).abs() < 1e-4 * scale);
        assert!((h[1][0] - gx.y).abs() < 1e-4 * scale);
        assert!((h[0][1] - gy.x).abs() < 1e-4 * scale);
        assert!((h[1][1] - gy.y).abs() < 1e-4 * scale);
    }

    #[test]
    fn schedule_runs() {
        let s = sobolev_schedule(tree(2), 2, 2.0).unwrap();
        assert_eq!(s.levels.len(), 2);
        assert!(s.levels.iter().all(|l| l.norm.is_finite() && l.norm > 0.0));
        assert!(s.to_csv().starts_with("l,norm"));
    }
}

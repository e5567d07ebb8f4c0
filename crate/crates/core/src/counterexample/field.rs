//! The piecewise-affine streamfunction `f_n` of the nested construction.

use std::sync::Arc;

use super::params::{q, to_f64};
use super::tree::CantorTree;
use crate::field::{AffineCell, PiecewiseAffine, ScalarField};
use crate::geometry::{AxisRect, Point, Vec2};

/// Core band breakpoints in units of the oscillation `s_n`.
pub const THETA: [f64; 7] = [0.0, 0.125, 0.375, 0.5, 0.625, 0.875, 1.0];
/// Core bands that are slow blocks; the others are fast channels.
pub const SLOW_BANDS: [usize; 2] = [1, 4];

const OUTER: f64 = 1.0e3;
/// Side of the first square, `c₁`.
pub const FIRST_SIDE: f64 = 0.5;

/// Piece of `f₀(x, y) = y` outside the first square.
fn outer(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Piece {
    let mut p = Piece::rect(x_lo, x_hi, y_lo, y_hi, Vec2::new(0.0, 1.0), 0.0, 0);
    p.anchor = Point::new(0.0, 0.0);
    p
}

#[derive(Clone, Copy, Debug)]
struct Tri {
    v: [Point; 3],
    grad: Vec2,
    value0: f64,
}

/// Floating-point layout of a level in coordinates relative to a component's corner,
/// values relative to the component's `alpha`.
#[derive(Clone, Debug)]
pub struct Layout {
    pub c: f64,
    pub a: f64,
    pub r: f64,
    pub block: f64,
    pub c_next: f64,
    pub s: f64,
    pub v_prev: f64,
    pub v: f64,
    pub vp: f64,
    /// Heights of the core band edges.
    pub phi: [f64; 7],
    /// Values of `f_n − alpha` on the band edges.
    pub val: [f64; 7],
    /// Heights on the unchanged bands where `f_{n−1}` takes the values `val`.
    pub fh: [f64; 7],
    /// `[c/4, c/4 + a, 3c/4 − a, 3c/4]`
    pub xs: [f64; 4],
    pub child: [Point; 2],
    pub child_alpha: [f64; 2],
    left: [[Tri; 2]; 6],
    right: [[Tri; 2]; 6],
}

impl Layout {
    fn new(tree: &CantorTree, n: u32) -> Self {
        let sc = tree.scalars();
        let p = sc.params(n);
        let hd = sc.block(n);
        let sn = sc.s(n);
        let phi_q = [
            q(0, 1),
            p.a.clone(),
            &p.a + &hd,
            &p.a * q(2, 1) + &hd,
            &p.a * q(3, 1) + &hd,
            &p.a * q(3, 1) + &hd * q(2, 1),
            p.c.clone(),
        ];
        let phi = phi_q.clone().map(|v| to_f64(&v));
        let val = THETA.map(|t| t * to_f64(sn));
        let fh = THETA.map(|t| t * to_f64(&p.c));
        let xs = [
            to_f64(&(&p.c * q(1, 4))),
            to_f64(&(&p.c * q(1, 4) + &p.a)),
            to_f64(&(&p.c * q(3, 4) - &p.a)),
            to_f64(&(&p.c * q(3, 4))),
        ];
        let cx = to_f64(&(&p.c * q(1, 4) + &p.a + &p.r));
        let child = [
            Point::new(cx, to_f64(&(&p.a + &p.r))),
            Point::new(cx, to_f64(&(&p.a * q(3, 1) + &hd + &p.r))),
        ];
        let vr = sc.v(n) * &p.r;
        let child_alpha = [to_f64(&(sn * q(1, 8) + &vr)), to_f64(&(sn * q(5, 8) + &vr))];
        let fan = |xl: f64, xr: f64, yl: &[f64; 7], yr: &[f64; 7]| {
            let mut out = [[Tri { v: [Point::default(); 3], grad: Vec2::default(), value0: 0.0 }; 2]; 6];
            for i in 0..6 {
                let lb = Point::new(xl, yl[i]);
                let lt = Point::new(xl, yl[i + 1]);
                let rb = Point::new(xr, yr[i]);
                let rt = Point::new(xr, yr[i + 1]);
                let (f0, f1) = (val[i], val[i + 1]);
                out[i][0] = Tri { v: [lb, rt, lt], grad: affine_gradient([lb, rt, lt], [f0, f1, f1]), value0: f0 };
                out[i][1] = Tri { v: [lb, rb, rt], grad: affine_gradient([lb, rb, rt], [f0, f0, f1]), value0: f0 };
            }
            out
        };
        let left = fan(xs[0], xs[1], &fh, &phi);
        let right = fan(xs[2], xs[3], &phi, &fh);
        Self {
            c: to_f64(&p.c),
            a: to_f64(&p.a),
            r: to_f64(&p.r),
            block: to_f64(&hd),
            c_next: to_f64(sc.c(n + 1)),
            s: to_f64(sn),
            v_prev: to_f64(sc.v(n - 1)),
            v: to_f64(sc.v(n)),
            vp: to_f64(sc.vp(n)),
            phi,
            val,
            fh,
            xs,
            child,
            child_alpha,
            left,
            right,
        }
    }

    /// Horizontal speed `∂₂f_n` in core band `j`.
    pub fn band_speed(&self, j: usize) -> f64 {
        if SLOW_BANDS.contains(&j) {
            self.v
        } else {
            self.vp
        }
    }

    /// Pieces of the increment `f_n − f_{n−1}` on one component in local coordinates,
    /// as `(vertices, gradient, value at the first vertex)`. The increment vanishes on
    /// the unchanged bands and outside the component.
    pub fn increment_pieces(&self) -> Vec<(Vec<Point>, Vec2, f64)> {
        let base = |p: Point| self.v_prev * p.y;
        let dgrad = Vec2::new(0.0, self.v_prev);
        let mut out = vec![];
        for fan in [&self.left, &self.right] {
            for band in fan.iter() {
                for t in band {
                    out.push((t.v.to_vec(), t.grad - dgrad, t.value0 - base(t.v[0])));
                }
            }
        }
        for j in 0..6 {
            let r = AxisRect { x_lo: self.xs[1], x_hi: self.xs[2], y_lo: self.phi[j], y_hi: self.phi[j + 1] };
            let corners = r.corners().to_vec();
            let v0 = corners[0];
            out.push((corners, Vec2::new(0.0, self.band_speed(j)) - dgrad, self.val[j] - base(v0)));
        }
        out
    }

    /// Largest `|∇f_n|` over the fans and core of a component.
    fn max_gradient(&self) -> f64 {
        let mut m = self.v_prev.max(self.v).max(self.vp);
        for fan in [&self.left, &self.right] {
            for band in fan.iter() {
                for t in band {
                    m = m.max(t.grad.norm());
                }
            }
        }
        m
    }
}

fn affine_gradient(p: [Point; 3], f: [f64; 3]) -> Vec2 {
    let (e1, e2) = (p[1] - p[0], p[2] - p[0]);
    let (d1, d2) = (f[1] - f[0], f[2] - f[0]);
    let det = e1.cross(e2);
    Vec2::new((d1 * e2.y - d2 * e1.y) / det, (e1.x * d2 - e2.x * d1) / det)
}

fn band_index(y: f64, edges: impl Fn(usize) -> f64) -> usize {
    (1..6).filter(|&k| y >= edges(k)).count()
}

/// An affine piece with its value at an anchor point.
#[derive(Clone, Copy, Debug)]
pub struct Piece {
    pub cell: AffineCell,
    pub anchor: Point,
    pub anchor_value: f64,
    /// Level whose layout produced the piece; 0 outside the first square.
    pub level: u32,
}

impl Piece {
    fn rect(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64, grad: Vec2, value: f64, level: u32) -> Self {
        let r = AxisRect { x_lo, x_hi, y_lo, y_hi };
        Self { cell: AffineCell::rect(&r, grad), anchor: Point::new(x_lo, y_lo), anchor_value: value, level }
    }

    pub fn value(&self, p: Point) -> f64 {
        self.anchor_value + self.cell.gradient.dot(p - self.anchor)
    }
}

/// Path of a level `h` through the construction: for each visited level, the core
/// band it crosses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelPath {
    /// Core band index per level, starting at level 1.
    pub bands: Vec<usize>,
    /// True when the last slow band is crossed through its child square's value range
    /// (only possible at the deepest level).
    pub ends_in_child_range: bool,
}

/// `f_n` for a given build depth; `f₀(x, y) = y` outside the first square.
#[derive(Clone, Debug)]
pub struct CounterexampleField {
    tree: Arc<CantorTree>,
    depth: u32,
    layouts: Vec<Layout>,
    lipschitz: f64,
}

impl CounterexampleField {
    /// `depth = 0` gives `f₀`.
    pub fn new(tree: Arc<CantorTree>, depth: u32) -> Self {
        assert!(depth <= tree.n_max(), "depth exceeds the built tree");
        let layouts: Vec<_> = (1..=depth).map(|n| Layout::new(&tree, n)).collect();
        let lipschitz = layouts.iter().map(Layout::max_gradient).fold(1.0, f64::max);
        Self { tree, depth, layouts, lipschitz }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn tree(&self) -> &Arc<CantorTree> {
        &self.tree
    }

    pub fn layout(&self, n: u32) -> &Layout {
        &self.layouts[n as usize - 1]
    }

    /// Affine piece containing `p`; boundaries belong to the piece on the right, ties
    /// toward larger y.
    pub fn piece(&self, p: Point) -> Piece {
        let (x, y) = (p.x, p.y);
        let c1 = FIRST_SIDE;
        if self.depth == 0 {
            return outer(-OUTER, OUTER, -OUTER, OUTER);
        }
        if x < 0.0 {
            return outer(-OUTER, 0.0, -OUTER, OUTER);
        }
        if x >= c1 {
            return outer(c1, OUTER, -OUTER, OUTER);
        }
        if y < 0.0 {
            return outer(0.0, c1, -OUTER, 0.0);
        }
        if y >= c1 {
            return outer(0.0, c1, c1, OUTER);
        }
        let mut origin = Point::new(0.0, 0.0);
        let mut alpha = 0.0;
        let mut level = 1u32;
        loop {
            let l = &self.layouts[level as usize - 1];
            let (lx, ly) = (x - origin.x, y - origin.y);
            let gx = |v: f64| origin.x + v;
            let gy = |v: f64| origin.y + v;
            if lx < l.xs[0] {
                return Piece::rect(origin.x, gx(l.xs[0]), origin.y, gy(l.c), Vec2::new(0.0, l.v_prev), alpha, level);
            }
            if lx >= l.xs[3] {
                return Piece::rect(gx(l.xs[3]), gx(l.c), origin.y, gy(l.c), Vec2::new(0.0, l.v_prev), alpha, level);
            }
            if lx < l.xs[1] || lx >= l.xs[2] {
                let (fan, yl, yr, xl) = if lx < l.xs[1] {
                    (&l.left, &l.fh, &l.phi, l.xs[0])
                } else {
                    (&l.right, &l.phi, &l.fh, l.xs[2])
                };
                let t = (lx - xl) / l.a;
                let i = band_index(ly, |k| yl[k] + (yr[k] - yl[k]) * t);
                let [a, b] = &fan[i];
                let lb = a.v[0];
                let rt = a.v[1];
                let tri = if (rt - lb).cross(Point::new(lx, ly) - lb) > 0.0 { a } else { b };
                let verts = tri.v.map(|v| origin + v);
                return Piece {
                    cell: AffineCell::new(&verts, tri.grad),
                    anchor: verts[0],
                    anchor_value: alpha + tri.value0,
                    level,
                };
            }
            let j = band_index(ly, |k| l.phi[k]);
            let speed = l.band_speed(j);
            let grad = Vec2::new(0.0, speed);
            let (x0, x1) = (gx(l.xs[1]), gx(l.xs[2]));
            let (y0, y1) = (gy(l.phi[j]), gy(l.phi[j + 1]));
            let base = alpha + l.val[j];
            if let Some(k) = SLOW_BANDS.iter().position(|&b| b == j) {
                if level < self.depth {
                    let co = origin + l.child[k];
                    let (cx1, cy1) = (co.x + l.c_next, co.y + l.c_next);
                    let anchor = Point::new(x0, y0);
                    let frame = |xa, xb, ya, yb| {
                        let mut pc = Piece::rect(xa, xb, ya, yb, grad, 0.0, level);
                        pc.anchor = anchor;
                        pc.anchor_value = base;
                        pc
                    };
                    if x < co.x {
                        return frame(x0, co.x, y0, y1);
                    }
                    if x >= cx1 {
                        return frame(cx1, x1, y0, y1);
                    }
                    if y < co.y {
                        return frame(co.x, cx1, y0, co.y);
                    }
                    if y >= cy1 {
                        return frame(co.x, cx1, cy1, y1);
                    }
                    origin = co;
                    alpha += l.child_alpha[k];
                    level += 1;
                    continue;
                }
            }
            return Piece::rect(x0, x1, y0, y1, grad, base, level);
        }
    }

    /// Core bands crossed by the level `h` of `f_depth` in `(0, c₁)`; `None` outside.
    pub fn level_path(&self, h: f64) -> Option<LevelPath> {
        if self.depth == 0 || !(0.0..FIRST_SIDE).contains(&h) {
            return None;
        }
        let mut alpha = 0.0;
        let mut bands = vec![];
        for level in 1..=self.depth {
            let l = &self.layouts[level as usize - 1];
            let rel = h - alpha;
            let j = band_index(rel, |k| l.val[k]);
            bands.push(j);
            match SLOW_BANDS.iter().position(|&b| b == j) {
                Some(k) => {
                    let lo = l.child_alpha[k];
                    let inside = rel >= lo && rel < lo + l.v * l.c_next;
                    if !inside {
                        return Some(LevelPath { bands, ends_in_child_range: false });
                    }
                    if level == self.depth {
                        return Some(LevelPath { bands, ends_in_child_range: true });
                    }
                    alpha += lo;
                }
                None => return Some(LevelPath { bands, ends_in_child_range: false }),
            }
        }
        unreachable!("loop returns at the deepest level")
    }

    /// All affine pieces inside the first square.
    pub fn inner_pieces(&self) -> Vec<Piece> {
        let mut out = vec![];
        if self.depth == 0 {
            return out;
        }
        self.collect(1, Point::new(0.0, 0.0), 0.0, &mut out);
        out
    }

    fn collect(&self, level: u32, origin: Point, alpha: f64, out: &mut Vec<Piece>) {
        let l = &self.layouts[level as usize - 1];
        let fgrad = Vec2::new(0.0, l.v_prev);
        out.push(Piece::rect(origin.x, origin.x + l.xs[0], origin.y, origin.y + l.c, fgrad, alpha, level));
        let mut right = Piece::rect(origin.x + l.xs[3], origin.x + l.c, origin.y, origin.y + l.c, fgrad, 0.0, level);
        right.anchor = origin;
        right.anchor_value = alpha;
        out.push(right);
        for fan in [&l.left, &l.right] {
            for band in fan.iter() {
                for tri in band {
                    let verts = tri.v.map(|v| origin + v);
                    out.push(Piece {
                        cell: AffineCell::new(&verts, tri.grad),
                        anchor: verts[0],
                        anchor_value: alpha + tri.value0,
                        level,
                    });
                }
            }
        }
        let (x0, x1) = (origin.x + l.xs[1], origin.x + l.xs[2]);
        for j in 0..6 {
            let grad = Vec2::new(0.0, l.band_speed(j));
            let (y0, y1) = (origin.y + l.phi[j], origin.y + l.phi[j + 1]);
            let base = alpha + l.val[j];
            match SLOW_BANDS.iter().position(|&b| b == j) {
                Some(k) if level < self.depth => {
                    let co = origin + l.child[k];
                    let (cx1, cy1) = (co.x + l.c_next, co.y + l.c_next);
                    for (xa, xb, ya, yb) in
                        [(x0, co.x, y0, y1), (cx1, x1, y0, y1), (co.x, cx1, y0, co.y), (co.x, cx1, cy1, y1)]
                    {
                        let mut pc = Piece::rect(xa, xb, ya, yb, grad, 0.0, level);
                        pc.anchor = Point::new(x0, y0);
                        pc.anchor_value = base;
                        out.push(pc);
                    }
                    self.collect(level + 1, co, alpha + l.child_alpha[k], out);
                }
                _ => out.push(Piece::rect(x0, x1, y0, y1, grad, base, level)),
            }
        }
    }

    /// Segments where `∇f` jumps, with the jump size `|[∇f]|`.
    pub fn jump_segments(&self) -> Vec<JumpSegment> {
        let mut out = vec![];
        for piece in self.inner_pieces() {
            let vs = piece.cell.vertices();
            for i in 0..vs.len() {
                let (a, b) = (vs[i], vs[(i + 1) % vs.len()]);
                self.walk_edge(&piece, a, b, &mut out);
            }
        }
        out
    }

    fn walk_edge(&self, piece: &Piece, a: Point, b: Point, out: &mut Vec<JumpSegment>) {
        let d = b - a;
        let len = d.norm();
        let n = Vec2::new(d.y, -d.x) * (1.0 / len);
        let eps = 1e-12 * (1.0 + a.norm());
        let mut t = 0.0;
        while t < 1.0 - 1e-14 {
            let q = a + d * t;
            let probe = q + n * eps + d * (eps / len);
            let nb = self.piece(probe);
            let jump = (nb.cell.gradient - piece.cell.gradient).norm();
            let tau = nb.cell.exit_time(probe, d).max(1e-13 / len);
            let t1 = (t + tau).min(1.0);
            // interior edges are visited from both sides
            let weight = if nb.level == 0 { 1.0 } else { 0.5 };
            if jump > 1e-12 {
                out.push(JumpSegment { a: q, b: a + d * t1, jump: jump * weight });
            }
            t = t1;
        }
    }
}

/// A straight segment carrying the jump of the gradient across it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpSegment {
    pub a: Point,
    pub b: Point,
    pub jump: f64,
}

impl JumpSegment {
    pub fn mass(&self) -> f64 {
        self.jump * self.a.dist(self.b)
    }
}

impl ScalarField for CounterexampleField {
    fn value(&self, p: Point) -> f64 {
        self.piece(p).value(p)
    }

    fn gradient(&self, p: Point) -> Vec2 {
        self.piece(p).cell.gradient
    }

    fn domain(&self) -> AxisRect {
        AxisRect { x_lo: -4.0, x_hi: 4.0, y_lo: -4.0, y_hi: 4.0 }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn on_breakpoint(&self, p: Point) -> bool {
        let pc = self.piece(p);
        let eps = 1e-11 * (1.0 + p.norm());
        if pc.cell.boundary_distance(p) > 2.0 * eps {
            return false;
        }
        [Vec2::new(eps, 0.0), Vec2::new(0.0, eps)].iter().any(|&d| {
            self.gradient(p - d) != pc.cell.gradient || self.gradient(p + d) != pc.cell.gradient
        })
    }

    fn as_piecewise(&self) -> Option<&dyn PiecewiseAffine> {
        Some(self)
    }
}

impl PiecewiseAffine for CounterexampleField {
    fn cell(&self, p: Point) -> AffineCell {
        self.piece(p).cell
    }
}

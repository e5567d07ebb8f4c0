//! Scalar fields (Hamiltonians, streamfunctions) and planar vector fields.

mod analytic;
mod grid;
mod spec;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use analytic::{Analytic, Form};
pub use grid::GridField;
pub use spec::{AnalyticSpec, FieldSpec, GridSpec, PiecewiseSpec, Role};

use crate::error::{Error, Result};
use crate::geometry::{halton, AxisRect, Point, Vec2};

/// A planar scalar function with a gradient wherever it is defined.
///
/// On the boundary between two pieces of a non-smooth backend the gradient is taken
/// from the piece to the right (larger x), ties toward larger y.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn value(&self, p: Point) -> f64;
    fn gradient(&self, p: Point) -> Vec2;
    fn domain(&self) -> AxisRect;
    /// Upper bound for `|∇H|` over the domain.
    fn lipschitz(&self) -> f64;
    /// True when `p` lies where the gradient is discontinuous.
    fn on_breakpoint(&self, _p: Point) -> bool {
        false
    }
    fn as_piecewise(&self) -> Option<&dyn PiecewiseAffine> {
        None
    }
}

/// Convex cell of a piecewise-affine function together with its constant gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineCell {
    vertices: [Point; 4],
    len: usize,
    pub gradient: Vec2,
}

impl AffineCell {
    /// `vertices` must be convex and counter-clockwise.
    pub fn new(vertices: &[Point], gradient: Vec2) -> Self {
        assert!(vertices.len() == 3 || vertices.len() == 4);
        let mut v = [Point::default(); 4];
        v[..vertices.len()].copy_from_slice(vertices);
        Self { vertices: v, len: vertices.len(), gradient }
    }

    pub fn rect(r: &AxisRect, gradient: Vec2) -> Self {
        Self::new(&r.corners(), gradient)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices[..self.len]
    }

    /// Largest `τ ≥ 0` with `p + τ v` still in the cell (`p` assumed inside).
    pub fn exit_time(&self, p: Point, v: Vec2) -> f64 {
        let vs = self.vertices();
        let mut best = f64::INFINITY;
        for i in 0..vs.len() {
            let a = vs[i];
            let edge = vs[(i + 1) % vs.len()] - a;
            // outward normal of a CCW polygon
            let n = Vec2::new(edge.y, -edge.x);
            let vn = v.dot(n);
            // edges parallel to the motion (level lines) are never exit edges
            if vn > 1e-12 * v.norm() * n.norm() {
                best = best.min(((a - p).dot(n) / vn).max(0.0));
            }
        }
        best
    }

    /// Distance from `p` to the nearest edge.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        let vs = self.vertices();
        let mut best = f64::INFINITY;
        for i in 0..vs.len() {
            let a = vs[i];
            let b = vs[(i + 1) % vs.len()];
            let d = b - a;
            let t = ((p - a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
            best = best.min(p.dist(a + d * t));
        }
        best
    }
}

/// Backends that are affine on convex cells and can report the cell of a point.
pub trait PiecewiseAffine: Send + Sync {
    /// Cell containing `p` under the right/upper tie rule.
    fn cell(&self, p: Point) -> AffineCell;
}

/// How to evaluate gradients on breakpoint lines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SideRule {
    /// Take the piece to the right, ties toward larger y.
    RightUpper,
    /// Refuse to evaluate on a breakpoint line.
    Strict,
}

/// `∇⊥H(z) = (−∂₂H, ∂₁H)`.
pub fn perp_gradient(h: &dyn ScalarField, z: Point, rule: SideRule) -> Result<Vec2> {
    if !z.is_finite() || !h.domain().contains(z) {
        return Err(Error::OutOfDomain(z));
    }
    if rule == SideRule::Strict && h.on_breakpoint(z) {
        return Err(Error::OnBreakpoint(z));
    }
    let g = h.gradient(z);
    Ok(Vec2::new(-g.y, g.x))
}

/// `s · H`, used to pass from a streamfunction `f` with `b = −∇⊥f` to `H = −f`.
#[derive(Clone, Debug)]
pub struct ScaledField {
    inner: Arc<dyn ScalarField>,
    scale: f64,
}

impl ScaledField {
    pub fn new(inner: Arc<dyn ScalarField>, scale: f64) -> Self {
        Self { inner, scale }
    }

    pub fn inner(&self) -> &Arc<dyn ScalarField> {
        &self.inner
    }
}

impl ScalarField for ScaledField {
    fn value(&self, p: Point) -> f64 {
        self.scale * self.inner.value(p)
    }
    fn gradient(&self, p: Point) -> Vec2 {
        self.inner.gradient(p) * self.scale
    }
    fn domain(&self) -> AxisRect {
        self.inner.domain()
    }
    fn lipschitz(&self) -> f64 {
        self.scale.abs() * self.inner.lipschitz()
    }
    fn on_breakpoint(&self, p: Point) -> bool {
        self.inner.on_breakpoint(p)
    }
    fn as_piecewise(&self) -> Option<&dyn PiecewiseAffine> {
        self.inner.as_piecewise().map(|_| self as &dyn PiecewiseAffine)
    }
}

impl PiecewiseAffine for ScaledField {
    fn cell(&self, p: Point) -> AffineCell {
        let mut c = self.inner.as_piecewise().expect("piecewise inner field").cell(p);
        c.gradient = c.gradient * self.scale;
        c
    }
}

/// Declared lower bound `b·e ≥ δ` on a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transversality {
    pub e: Vec2,
    pub delta: f64,
    pub window: AxisRect,
}

/// Regularity class of a vector field, used to pick `|Db|` evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularity {
    Smooth,
    Lipschitz,
    PiecewiseConstant,
}

type DirectFn = dyn Fn(Point) -> Vec2 + Send + Sync;

#[derive(Clone)]
enum Backend {
    PerpGradient(Arc<dyn ScalarField>),
    Direct(Arc<DirectFn>),
}

/// Planar vector field `b` with the metadata entering the regularity estimates.
#[derive(Clone)]
pub struct PlanarField {
    backend: Backend,
    pub sup_norm: f64,
    pub transversality: Option<Transversality>,
    pub compressibility: f64,
    pub regularity: Regularity,
}

impl fmt::Debug for PlanarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.backend {
            Backend::PerpGradient(h) => format!("perp-gradient of {h:?}"),
            Backend::Direct(_) => "direct".to_string(),
        };
        f.debug_struct("PlanarField")
            .field("backend", &kind)
            .field("sup_norm", &self.sup_norm)
            .field("transversality", &self.transversality)
            .field("compressibility", &self.compressibility)
            .finish()
    }
}

impl PlanarField {
    /// `b = ∇⊥H`, divergence free.
    pub fn from_hamiltonian(h: Arc<dyn ScalarField>) -> Self {
        let regularity = if h.as_piecewise().is_some() {
            Regularity::PiecewiseConstant
        } else {
            Regularity::Smooth
        };
        Self {
            sup_norm: h.lipschitz(),
            backend: Backend::PerpGradient(h),
            transversality: None,
            compressibility: 1.0,
            regularity,
        }
    }

    /// `b = −∇⊥f`, the orientation used by the nested construction.
    pub fn from_streamfunction(f: Arc<dyn ScalarField>) -> Self {
        Self::from_hamiltonian(Arc::new(ScaledField::new(f, -1.0)))
    }

    pub fn direct<F>(f: F, sup_norm: f64, compressibility: f64) -> Self
    where
        F: Fn(Point) -> Vec2 + Send + Sync + 'static,
    {
        Self {
            backend: Backend::Direct(Arc::new(f)),
            sup_norm,
            transversality: None,
            compressibility,
            regularity: Regularity::Smooth,
        }
    }

    pub fn with_transversality(mut self, t: Transversality) -> Self {
        self.transversality = Some(t);
        self
    }

    pub fn with_sup_norm(mut self, s: f64) -> Self {
        self.sup_norm = s;
        self
    }

    pub fn eval(&self, p: Point) -> Vec2 {
        match &self.backend {
            Backend::PerpGradient(h) => {
                let g = h.gradient(p);
                Vec2::new(-g.y, g.x)
            }
            Backend::Direct(f) => f(p),
        }
    }

    pub fn hamiltonian(&self) -> Option<&Arc<dyn ScalarField>> {
        match &self.backend {
            Backend::PerpGradient(h) => Some(h),
            Backend::Direct(_) => None,
        }
    }

    /// Jacobian of `b` by central differences with step `eps`.
    pub fn jacobian_fd(&self, p: Point, eps: f64) -> [[f64; 2]; 2] {
        let dx = Vec2::new(eps, 0.0);
        let dy = Vec2::new(0.0, eps);
        let bx = (self.eval(p + dx) - self.eval(p - dx)) * (0.5 / eps);
        let by = (self.eval(p + dy) - self.eval(p - dy)) * (0.5 / eps);
        [[bx.x, by.x], [bx.y, by.y]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub sup_norm: f64,
    pub min_transversal: Option<f64>,
    pub max_transversal: Option<f64>,
}

/// Sampled `‖b‖∞` and, with a direction, the range of `b·e` on `window`.
///
/// Samples are the window corners followed by the Halton sequence.
pub fn field_stats(b: &PlanarField, window: &AxisRect, e: Option<Vec2>, samples: usize) -> Result<FieldStats> {
    if !(window.area() > 0.0) {
        return Err(Error::EmptyWindow);
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let e = e.or(b.transversality.map(|t| t.e));
    let mut sup: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let corners = window.corners();
    for i in 0..samples + 4 {
        let p = if i < 4 {
            corners[i]
        } else {
            let (s, t) = halton(i as u64 - 3);
            window.lerp(s, t)
        };
        let v = b.eval(p);
        sup = sup.max(v.norm());
        if let Some(e) = e {
            let d = v.dot(e);
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    Ok(FieldStats {
        sup_norm: sup,
        min_transversal: e.map(|_| lo),
        max_transversal: e.map(|_| hi),
    })
}

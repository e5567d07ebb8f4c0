//! Exact nested geometry: components of `C_n` with their slow blocks, fast channels
//! and unchanged bands.

use serde::Serialize;

use super::params::{q, ser_q, to_f64, LevelParams, Scalars, Q};
use crate::error::{Error, Result};
use crate::geometry::AxisRect;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RectQ {
    #[serde(serialize_with = "ser_q")]
    pub x_lo: Q,
    #[serde(serialize_with = "ser_q")]
    pub x_hi: Q,
    #[serde(serialize_with = "ser_q")]
    pub y_lo: Q,
    #[serde(serialize_with = "ser_q")]
    pub y_hi: Q,
}

impl RectQ {
    fn new(x_lo: Q, x_hi: Q, y_lo: Q, y_hi: Q) -> Self {
        Self { x_lo, x_hi, y_lo, y_hi }
    }

    /// Points at distance `≥ m` from the boundary.
    pub fn shrink(&self, m: &Q) -> Self {
        Self::new(&self.x_lo + m, &self.x_hi - m, &self.y_lo + m, &self.y_hi - m)
    }

    pub fn to_f64(&self) -> AxisRect {
        AxisRect {
            x_lo: to_f64(&self.x_lo),
            x_hi: to_f64(&self.x_hi),
            y_lo: to_f64(&self.y_lo),
            y_hi: to_f64(&self.y_hi),
        }
    }
}

/// A square component of `C_n`: lower-left corner and the value of `f_{n−1}` there.
/// On the component `f_{n−1}(x, y) = alpha + v_{n−1}(y − y0)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Component {
    #[serde(serialize_with = "ser_q")]
    pub x0: Q,
    #[serde(serialize_with = "ser_q")]
    pub y0: Q,
    #[serde(serialize_with = "ser_q")]
    pub alpha: Q,
}

/// Rectangles of one component, bottom to top where it applies.
#[derive(Clone, Debug, Serialize)]
pub struct ComponentParts {
    pub square: RectQ,
    pub slow_blocks: [RectQ; 2],
    pub fast_channels: [RectQ; 4],
    pub unchanged_bands: [RectQ; 2],
    pub children: [RectQ; 2],
}

#[derive(Clone, Debug)]
pub struct CantorTree {
    scalars: Scalars,
    levels: Vec<Vec<Component>>,
}

impl CantorTree {
    /// Levels with materialized components are limited to keep `2^{n−1}` manageable.
    pub const MAX_GEOMETRY_DEPTH: u32 = 16;

    pub fn build(n_max: u32) -> Result<Self> {
        if n_max == 0 || n_max > Self::MAX_GEOMETRY_DEPTH {
            return Err(Error::InvalidParameter(format!(
                "tree depth must be in 1..={}",
                Self::MAX_GEOMETRY_DEPTH
            )));
        }
        let scalars = Scalars::new(n_max);
        let mut levels = vec![vec![Component { x0: q(0, 1), y0: q(0, 1), alpha: q(0, 1) }]];
        for n in 1..n_max {
            let mut next = Vec::with_capacity(2 * levels[n as usize - 1].len());
            for comp in &levels[n as usize - 1] {
                next.extend(children(&scalars, n, comp));
            }
            levels.push(next);
        }
        let tree = Self { scalars, levels };
        tree.check_budget()?;
        Ok(tree)
    }

    pub fn n_max(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn scalars(&self) -> &Scalars {
        &self.scalars
    }

    pub fn params(&self, n: u32) -> &LevelParams {
        self.scalars.params(n)
    }

    pub fn components(&self, n: u32) -> &[Component] {
        &self.levels[n as usize - 1]
    }

    pub fn parts(&self, n: u32, comp: &Component) -> ComponentParts {
        let p = self.params(n);
        let (c, a, r) = (&p.c, &p.a, &p.r);
        let hd = self.scalars.block(n);
        let (x0, y0) = (&comp.x0, &comp.y0);
        let core_lo = x0 + c * q(1, 4) + a;
        let core_hi = x0 + c * q(3, 4) - a;
        let ys = [
            y0.clone(),
            y0 + a,
            y0 + a + &hd,
            y0 + a * q(2, 1) + &hd,
            y0 + a * q(3, 1) + &hd,
            y0 + a * q(3, 1) + &hd * q(2, 1),
            y0 + c,
        ];
        let band = |i: usize| RectQ::new(core_lo.clone(), core_hi.clone(), ys[i].clone(), ys[i + 1].clone());
        let slow_blocks = [band(1), band(4)];
        let children = [slow_blocks[0].shrink(r), slow_blocks[1].shrink(r)];
        ComponentParts {
            square: RectQ::new(x0.clone(), x0 + c, y0.clone(), y0 + c),
            fast_channels: [band(0), band(2), band(3), band(5)],
            unchanged_bands: [
                RectQ::new(x0.clone(), x0 + c * q(1, 4), y0.clone(), y0 + c),
                RectQ::new(x0 + c * q(3, 4), x0 + c, y0.clone(), y0 + c),
            ],
            slow_blocks,
            children,
        }
    }

    /// Oscillation of `f_n` over one component equals `s_n`, and over each child
    /// equals `s_{n+1}`.
    fn check_budget(&self) -> Result<()> {
        let s = &self.scalars;
        for n in 1..=self.n_max() {
            let sn = s.s(n);
            let total = sn * q(2, 4) + sn * q(4, 8);
            let f_edge = s.v(n - 1) * s.c(n);
            let child = s.v(n) * s.c(n + 1);
            let block = s.v(n) * s.block(n);
            if total != *sn || f_edge != *sn || child != *s.s(n + 1) || block != sn * q(1, 4) {
                return Err(Error::Numerical(format!("oscillation budget inconsistent at level {n}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let s = &self.scalars;
        let levels: Vec<_> = (1..=self.n_max())
            .map(|n| {
                let comps: Vec<_> = self
                    .components(n)
                    .iter()
                    .map(|c| serde_json::json!({"component": c, "parts": self.parts(n, c)}))
                    .collect();
                serde_json::json!({
                    "n": n,
                    "params": self.params(n),
                    "s": super::params::to_string(s.s(n)),
                    "v": super::params::to_string(s.v(n)),
                    "v_prime": super::params::to_string(s.vp(n)),
                    "components": comps,
                })
            })
            .collect();
        serde_json::json!({ "n_max": self.n_max(), "levels": levels })
    }
}

fn children(s: &Scalars, n: u32, comp: &Component) -> [Component; 2] {
    let p = s.params(n);
    let hd = s.block(n);
    let sn = s.s(n);
    let vr = s.v(n) * &p.r;
    let x = &comp.x0 + &p.c * q(1, 4) + &p.a + &p.r;
    [
        Component {
            x0: x.clone(),
            y0: &comp.y0 + &p.a + &p.r,
            alpha: &comp.alpha + sn * q(1, 8) + &vr,
        },
        Component {
            x0: x,
            y0: &comp.y0 + &p.a * q(3, 1) + &hd + &p.r,
            alpha: &comp.alpha + sn * q(5, 8) + &vr,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_children_are_shrunk_blocks() {
        let t = CantorTree::build(6).unwrap();
        for n in 1..=6 {
            assert_eq!(t.components(n).len(), 1 << (n - 1));
        }
        for n in 1..6 {
            let kids = t.components(n + 1);
            for (i, comp) in t.components(n).iter().enumerate() {
                let parts = t.parts(n, comp);
                for k in 0..2 {
                    let child = &kids[2 * i + k];
                    let sq = t.parts(n + 1, child).square;
                    assert_eq!(sq, parts.children[k]);
                    assert_eq!(&sq.x_hi - &sq.x_lo, t.scalars().c(n + 1).clone());
                }
            }
        }
    }

    #[test]
    fn layout_tiles_the_square() {
        let t = CantorTree::build(3).unwrap();
        for n in 1..=3 {
            for comp in t.components(n) {
                let p = t.parts(n, comp);
                let c = t.scalars().c(n);
                let core_w = &p.slow_blocks[0].x_hi - &p.slow_blocks[0].x_lo;
                assert_eq!(core_w, t.scalars().block(n));
                let mut h = q(0, 1);
                for r in p.fast_channels.iter().chain(p.slow_blocks.iter()) {
                    h += &r.y_hi - &r.y_lo;
                }
                assert_eq!(&h, c);
                assert_eq!(p.fast_channels[3].y_hi, p.square.y_hi);
            }
        }
    }

    #[test]
    fn children_values_continue_the_parent() {
        // On a child, f_n = alpha_child + v_n (y − y0_child); at the child's lower edge
        // this must equal the slow-block profile of the parent.
        let t = CantorTree::build(4).unwrap();
        let s = t.scalars();
        for n in 1..4 {
            for (i, comp) in t.components(n).iter().enumerate() {
                let parts = t.parts(n, comp);
                for k in 0..2 {
                    let child = &t.components(n + 1)[2 * i + k];
                    let block = &parts.slow_blocks[k];
                    let base = if k == 0 { q(1, 8) } else { q(5, 8) };
                    let expect = &comp.alpha + s.s(n) * base + s.v(n) * (&child.y0 - &block.y_lo);
                    assert_eq!(child.alpha, expect);
                }
            }
        }
    }

    #[test]
    fn depth_limits() {
        assert!(CantorTree::build(0).is_err());
        assert!(CantorTree::build(CantorTree::MAX_GEOMETRY_DEPTH + 1).is_err());
    }
}

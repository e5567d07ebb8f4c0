//! Crossing times of the strip `0 ≤ x ≤ 1`: the per-level ladder `T¹ₙ, Tˢₙ, Tᶠₙ, Tₙ`,
//! the crossing-time function `T(y)` and its total variation.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::field::{CounterexampleField, SLOW_BANDS};
use super::params::{q, sigma, to_f64, Scalars, Q};
use super::tree::CantorTree;
use crate::error::{Error, Result};
use crate::field::PlanarField;
use crate::flow::{crossing_times, trace, Stop};
use crate::geometry::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LadderMethod {
    Analytic,
    Trajectory,
}

/// Index `n − 1` holds level `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossingLadder {
    pub method: LadderMethod,
    pub n: Vec<u32>,
    pub t1: Vec<f64>,
    pub ts: Vec<f64>,
    pub tf: Vec<f64>,
    pub t: Vec<f64>,
    pub sigma_partial: Vec<f64>,
    /// Levels where the trajectory method failed; their entries are NaN.
    pub flags: Vec<u32>,
}

impl CrossingLadder {
    pub fn levels(&self) -> usize {
        self.n.len()
    }

    /// CSV `n,T1,Ts,Tf,T,sigma_partial`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,T1,Ts,Tf,T,sigma_partial\n");
        for i in 0..self.n.len() {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:.17e},{:.17e}",
                self.n[i], self.t1[i], self.ts[i], self.tf[i], self.t[i], self.sigma_partial[i]
            );
        }
        s
    }

    /// `Bₙ = 2ⁿ⁻¹(Tₙ − Tₙ₋₁)` for `n ≥ 2`, as `(n, Bₙ)`.
    pub fn tv_bounds(&self) -> Vec<(u32, f64)> {
        (1..self.n.len())
            .map(|i| {
                let n = self.n[i];
                let b = 2f64.powi(n as i32 - 1) * (self.tf[i] - self.t1[i] + self.ts[i - 1] - self.tf[i - 1]);
                (n, b)
            })
            .collect()
    }
}

/// Exact per-level transit times, `(T¹ₙ, Tˢₙ, Tᶠₙ)`.
pub fn level_times_exact(sc: &Scalars, n: u32) -> (Q, Q, Q) {
    let p = sc.params(n);
    let vprev = sc.v(n - 1);
    let hd = sc.block(n);
    let outer = (&p.c * q(1, 2) + &p.a) / vprev;
    let core = &p.a + &hd;
    let t1 = &p.c / vprev;
    let ts = &outer + &core / sc.v(n);
    let tf = &outer + &core / sc.vp(n);
    (t1, ts, tf)
}

fn sigma_partial(n: u32) -> f64 {
    if n < 2 {
        1.0
    } else {
        sigma(n)
    }
}

/// The ladder from the level geometry in exact arithmetic.
///
/// `T₁` is the time to cross `[0, 1]` along the slow path of `C₁`; for `n ≥ 2`,
/// `Tₙ = T₁ + Σ_{l=2}^{n−1}(Tˢₗ − T¹ₗ) + Tᶠₙ − T¹ₙ`.
pub fn crossing_ladder_analytic(n_max: u32) -> CrossingLadder {
    let sc = Scalars::new(n_max);
    let mut lad = empty(LadderMethod::Analytic);
    let mut prefix = q(0, 1);
    let mut first = q(0, 1);
    for n in 1..=n_max {
        let (t1, ts, tf) = level_times_exact(&sc, n);
        let t = if n == 1 {
            first = q(1, 1) - &t1 + &ts;
            first.clone()
        } else {
            &first + &prefix + &tf - &t1
        };
        if n >= 2 {
            prefix += &ts - &t1;
        }
        push(&mut lad, n, to_f64(&t1), to_f64(&ts), to_f64(&tf), to_f64(&t));
    }
    lad
}

fn empty(method: LadderMethod) -> CrossingLadder {
    CrossingLadder { method, n: vec![], t1: vec![], ts: vec![], tf: vec![], t: vec![], sigma_partial: vec![], flags: vec![] }
}

fn push(l: &mut CrossingLadder, n: u32, t1: f64, ts: f64, tf: f64, t: f64) {
    l.n.push(n);
    l.t1.push(t1);
    l.ts.push(ts);
    l.tf.push(tf);
    l.t.push(t);
    l.sigma_partial.push(sigma_partial(n));
}

/// Level `h` of the fast path through the first component of `Cₙ`.
pub fn fast_level(tree: &CantorTree, n: u32) -> f64 {
    let k = &tree.components(n)[0];
    to_f64(&k.alpha) + to_f64(tree.scalars().s(n)) / 16.0
}

/// The ladder measured on trajectories of the built fields.
///
/// `Tˢₙ, Tᶠₙ` are cell-walk transit times through the first component of `Cₙ` of
/// `f_n`, entered at heights `c/4` and `c/16` above its corner; `T¹ₙ` is the transit
/// through the same square under `f_{n−1}`; `Tₙ` is `T(y)` on the fast level of
/// that component.
pub fn crossing_ladder_trajectory(tree: &Arc<CantorTree>, n_max: u32) -> Result<CrossingLadder> {
    if n_max > tree.n_max() {
        return Err(Error::InvalidParameter(format!("ladder depth {n_max} exceeds the built tree")));
    }
    let fields: Vec<CounterexampleField> = (0..=n_max).map(|d| CounterexampleField::new(tree.clone(), d)).collect();
    let rows: Vec<Option<[f64; 4]>> = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            let comp = &tree.components(n)[0];
            let o = Point::new(to_f64(&comp.x0), to_f64(&comp.y0));
            let c = to_f64(tree.scalars().c(n));
            let transit = |f: &CounterexampleField, theta: f64| -> Result<f64> {
                let h = crate::field::ScaledField::new(Arc::new(f.clone()), -1.0);
                Ok(trace(&h, Point::new(o.x, o.y + c * theta), Stop::X(o.x + c), 1_000_000)?.time)
            };
            let depth_n = &fields[n as usize];
            let run = || -> Result<[f64; 4]> {
                let ts = transit(depth_n, 0.25)?;
                let tf = transit(depth_n, 1.0 / 16.0)?;
                let t1 = transit(&fields[n as usize - 1], 0.25)?;
                let b = PlanarField::from_streamfunction(Arc::new(depth_n.clone()));
                let t = crossing_times(&b, &[fast_level(tree, n)], -1.0)?[0].duration;
                Ok([t1, ts, tf, t])
            };
            run().ok()
        })
        .collect();
    let mut lad = empty(LadderMethod::Trajectory);
    for (i, row) in rows.into_iter().enumerate() {
        let n = i as u32 + 1;
        match row {
            Some([t1, ts, tf, t]) => push(&mut lad, n, t1, ts, tf, t),
            None => {
                lad.flags.push(n);
                push(&mut lad, n, f64::NAN, f64::NAN, f64::NAN, f64::NAN);
            }
        }
    }
    Ok(lad)
}

/// `T(y)` from the level path of `y` through the construction at the field's depth.
pub fn crossing_time_analytic(field: &CounterexampleField, y: f64) -> f64 {
    let Some(path) = field.level_path(y) else {
        return 1.0;
    };
    let sc = field.tree().scalars();
    let mut total = 0.5;
    let last = path.bands.len() - 1;
    for (i, &j) in path.bands.iter().enumerate() {
        let l = field.layout(i as u32 + 1);
        let outer = (0.5 * l.c + l.a) / l.v_prev;
        let core = l.a + l.block;
        if !SLOW_BANDS.contains(&j) {
            return total + outer + core / l.vp;
        }
        let ts = outer + core / l.v;
        if i == last {
            // in the child's value range at the deepest level the child square is
            // still part of the slow block
            return total + ts;
        }
        total += ts - to_f64(&(sc.c(i as u32 + 2) / sc.v(i as u32 + 1)));
    }
    total
}

/// Measured total variation of `T` on a sorted sample of heights, against the
/// per-level lower bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TvProfile {
    pub depth: u32,
    pub samples: usize,
    pub measured_tv: f64,
    /// `(n, Bₙ)` for `2 ≤ n ≤ depth`.
    pub bounds: Vec<(u32, f64)>,
    /// `Bₙ / Bₙ₋₁`.
    pub growth: Vec<(u32, f64)>,
    /// Levels whose alternation the sample cannot resolve, with the required count `2ⁿ⁺²`.
    pub insufficient: Vec<(u32, usize)>,
    /// Largest `|T_trajectory − T_analytic|` over the sample.
    pub max_analytic_gap: f64,
}

/// Heights of the fast and slow paths through every component up to `depth`. The slow
/// height through the child is `9/32` rather than the centre `1/4`, whose level would sit
/// on the band edge `θ = 1/2` of the child, where the crossing time depends on the side.
pub fn alternating_heights(tree: &CantorTree, depth: u32) -> Vec<f64> {
    let mut ys = vec![];
    for n in 1..=depth {
        let s = to_f64(tree.scalars().s(n));
        for k in tree.components(n) {
            let a = to_f64(&k.alpha);
            for th in [1.0 / 16.0, 0.28125, 0.5625, 0.8125, 0.9375] {
                ys.push(a + s * th);
            }
        }
    }
    ys
}

/// TV of `T(y)` over `uniform` equispaced heights in `(0, 1/2)` together with the
/// alternating heights of the construction.
pub fn tv_profile(tree: &Arc<CantorTree>, depth: u32, uniform: usize) -> Result<TvProfile> {
    let field = CounterexampleField::new(tree.clone(), depth);
    let mut ys = alternating_heights(tree, depth);
    ys.extend((1..=uniform).map(|i| 0.5 * i as f64 / (uniform + 1) as f64));
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let b = PlanarField::from_streamfunction(Arc::new(field.clone()));
    let ct = crossing_times(&b, &ys, -1.0)?;
    let measured_tv = ct.windows(2).map(|w| (w[1].duration - w[0].duration).abs()).sum();
    let max_analytic_gap = ct
        .iter()
        .map(|c| (c.duration - crossing_time_analytic(&field, c.y)).abs())
        .fold(0.0, f64::max);
    let lad = crossing_ladder_analytic(depth.max(2));
    let bounds: Vec<(u32, f64)> = lad.tv_bounds().into_iter().filter(|(n, _)| *n <= depth).collect();
    let growth = bounds.windows(2).map(|w| (w[1].0, w[1].1 / w[0].1)).collect();
    let insufficient = (1..=depth)
        .filter_map(|n| {
            let need = 1usize << (n + 2);
            (ys.len() < need).then_some((n, need))
        })
        .collect();
    Ok(TvProfile { depth, samples: ys.len(), measured_tv, bounds, growth, insufficient, max_analytic_gap })
}

/// Sampled `T(y)` as `(y, T)`; used for plots.
pub fn crossing_profile(field: &CounterexampleField, ys: &[f64]) -> Result<Vec<(f64, f64)>> {
    let b = PlanarField::from_streamfunction(Arc::new(field.clone()));
    Ok(crossing_times(&b, ys, -1.0)?.into_iter().map(|c| (c.y, c.duration)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(n: u32) -> Arc<CantorTree> {
        Arc::new(CantorTree::build(n).unwrap())
    }

    #[test]
    fn first_rungs() {
        let lad = crossing_ladder_analytic(3);
        assert_eq!(lad.t1[0], 0.5);
        assert_eq!(lad.t1[1], 5.0 / 64.0);
        assert!(lad.tf[1] < lad.ts[1]);
        assert_eq!(lad.sigma_partial[0], 1.0);
        assert!((lad.sigma_partial[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn t1_times_speed_is_side() {
        let sc = Scalars::new(30);
        for n in 1..=30 {
            let (t1, _, _) = level_times_exact(&sc, n);
            assert_eq!(t1 * sc.v(n - 1), sc.c(n).clone());
        }
    }

    #[test]
    fn analytic_time_matches_ladder_on_fast_levels() {
        let t = tree(6);
        let lad = crossing_ladder_analytic(6);
        for n in 1..=6 {
            let f = CounterexampleField::new(t.clone(), n);
            let got = crossing_time_analytic(&f, fast_level(&t, n));
            let want = if n == 1 { 1.0 + lad.tf[0] - lad.t1[0] } else { lad.t[n as usize - 1] };
            assert!((got - want).abs() < 1e-13 * want, "n={n}: {got} vs {want}");
        }
        let f = CounterexampleField::new(t, 3);
        assert_eq!(crossing_time_analytic(&f, 0.75), 1.0);
        assert_eq!(crossing_time_analytic(&f, -0.1), 1.0);
    }

    #[test]
    fn trajectory_agrees_with_analytic() {
        let t = tree(5);
        let a = crossing_ladder_analytic(5);
        let tr = crossing_ladder_trajectory(&t, 5).unwrap();
        assert!(tr.flags.is_empty());
        for i in 0..5 {
            for (x, y) in [(a.t1[i], tr.t1[i]), (a.ts[i], tr.ts[i]), (a.tf[i], tr.tf[i])] {
                assert!((x - y).abs() < 1e-10 * x, "level {}: {x} vs {y}", i + 1);
            }
            if i > 0 {
                assert!((a.t[i] - tr.t[i]).abs() < 1e-10 * a.t[i]);
            }
        }
    }

    #[test]
    fn tv_exceeds_bounds() {
        let t = tree(5);
        let p = tv_profile(&t, 5, 256).unwrap();
        assert!(p.insufficient.is_empty());
        assert!(p.max_analytic_gap < 1e-11, "{}", p.max_analytic_gap);
        for (_, b) in &p.bounds {
            assert!(p.measured_tv >= *b);
        }
    }

    #[test]
    fn csv_header() {
        assert!(crossing_ladder_analytic(2).to_csv().starts_with("n,T1,Ts,Tf,T,sigma_partial\n1,"));
    }
}

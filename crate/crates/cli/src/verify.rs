use clap::Subcommand;
use hamflow::counterexample::{crossing_ladder_analytic, to_f64, tv_refinement, CantorTree};
use hamflow::field::{field_stats, FieldSpec, ScalarField, Transversality};
use hamflow::regularity::{
    variation_profile, variation_profile_piecewise, verify_global_estimate, verify_local_estimate, GlobalOptions, Variant,
};
use hamflow::{AxisRect, Vec2};
use serde_json::json;

use crate::config::RunConfig;
use crate::fail::Failure;
use crate::output::Output;
use crate::source::{self, Source};
use crate::svg::{line_plot, Series};
use crate::window_of;

#[derive(Subcommand, Clone, Debug)]
pub enum VerifyCmd {
    /// Local estimate |X(t,z) − X(t,z′)| ≤ C′(|z − z′| + |g(H(z)) − g(H(z′))|) on a transversal window.
    Lipschitz(RunConfig),
    /// Global estimate on Ω_k for a compactly supported field.
    Global(RunConfig),
    /// Discrete TV of X(t)·e₁ on a fixed strip under matched refinement.
    TvRefinement(RunConfig),
}

impl VerifyCmd {
    pub fn parts(&self) -> (&'static str, &RunConfig) {
        match self {
            VerifyCmd::Lipschitz(c) => ("verify lipschitz", c),
            VerifyCmd::Global(c) => ("verify global", c),
            VerifyCmd::TvRefinement(c) => ("verify tv-refinement", c),
        }
    }
}

pub fn run(cmd: &VerifyCmd, cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    match cmd {
        VerifyCmd::Lipschitz(_) => lipschitz(cfg, out),
        VerifyCmd::Global(_) => global(cfg, out),
        VerifyCmd::TvRefinement(_) => refinement(cfg, out),
    }
}

/// Levels spanning the range of `H` sampled on a 129² grid of the window.
fn levels_over(h: &dyn ScalarField, w: &AxisRect, count: usize) -> Vec<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=128 {
        for j in 0..=128 {
            let v = h.value(w.lerp(i as f64 / 128.0, j as f64 / 128.0));
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let pad = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
    let (lo, hi) = (lo - pad, hi + pad);
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

/// The first level-2 component of the construction; elsewhere the field's default window.
fn local_window(src: &Source) -> AxisRect {
    match &src.counterexample {
        Some(f) if f.depth() >= 2 => {
            let tree = f.tree();
            let k = &tree.components(2)[0];
            let c = to_f64(tree.scalars().c(2));
            let (x0, y0) = (to_f64(&k.x0), to_f64(&k.y0));
            AxisRect { x_lo: x0, x_hi: x0 + c, y_lo: y0, y_hi: y0 + c }
        }
        _ => match &src.spec {
            FieldSpec::Analytic(_) => AxisRect { x_lo: -0.5, x_hi: 0.5, y_lo: -0.5, y_hi: 0.5 },
            _ => src.default_window(),
        },
    }
}

fn lipschitz(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let src = source::resolve(cfg.field.as_deref())?;
    let window = window_of(cfg, local_window(&src))?;
    let e = match &cfg.direction {
        Some(d) => Vec2::new(d[0], d[1]),
        None => Vec2::new(1.0, 0.0),
    };
    if !(e.norm() > 0.0) {
        return Err(Failure::config("--direction must be non-zero"));
    }
    let e = e.normalized();
    let t_bar = cfg.t.unwrap_or(0.1);
    let pairs = cfg.pairs.unwrap_or(1000);
    let seed = cfg.seed.unwrap_or(0);
    let samples = cfg.samples.unwrap_or(16384);
    let stats = field_stats(&src.b, &window, Some(e), samples)?;
    let delta = stats.min_transversal.unwrap_or(f64::NAN);
    if !(delta > 0.0) {
        return Err(Failure::config(format!("b·e reaches {delta} on the window; no transversality bound")));
    }
    let b = src.b.clone().with_transversality(Transversality { e, delta, window }).with_sup_norm(stats.sup_norm);
    let levels = levels_over(src.h.as_ref(), &window, 513);
    let g = match &src.counterexample {
        Some(f) => variation_profile_piecewise(&f.jump_segments(), src.h.as_ref(), &window, &levels)?,
        None => variation_profile(&b, src.h.as_ref(), &window, &levels, Variant::Bv, 256)?,
    };
    out.csv("variation_profile.csv", &g.to_csv())?;
    let rep = verify_local_estimate(&b, &src.h, &window, t_bar, pairs, seed, &g)?;
    out.json(
        "lipschitz.json",
        &json!({
            "window": [window.x_lo, window.x_hi, window.y_lo, window.y_hi],
            "direction": e,
            "delta": delta,
            "sup_norm": stats.sup_norm,
            "t": t_bar,
            "total_variation": g.total_mass,
            "report": rep,
        }),
    )?;
    if rep.violations > 0 {
        return Err(Failure::check(format!("{} of {} pairs violate the local estimate", rep.violations, rep.tested)));
    }
    Ok(())
}

fn global(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let src = source::resolve(Some(cfg.field.as_deref().unwrap_or("vortex")))?;
    let k = cfg.k.unwrap_or(4);
    let t = cfg.t.unwrap_or(1.0);
    let pairs = cfg.pairs.unwrap_or(500);
    let mut opts = GlobalOptions::default();
    if let Some(tol) = cfg.tol {
        opts.rk_tol = tol;
    }
    let rep = verify_global_estimate(&src.b, &src.h, k, t, pairs, cfg.seed.unwrap_or(0), &opts)?;
    out.json("global.json", &json!({ "options": opts, "report": rep }))?;
    if rep.report.violations > 0 {
        return Err(Failure::check(format!(
            "{} of {} pairs violate the global estimate",
            rep.report.violations, rep.report.tested
        )));
    }
    Ok(())
}

/// Width of the strip left of the construction.
const STRIP_WIDTH: f64 = 0.125;

fn refinement(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let depths = match (&cfg.depths, cfg.field.as_deref()) {
        (Some(d), _) => d.clone(),
        (None, Some(name)) => {
            let d = match source::builtin(name).map(Ok).unwrap_or_else(|| FieldSpec::load(name.as_ref()))? {
                FieldSpec::Piecewise(p) => p.depth,
                _ => return Err(Failure::config("tv-refinement needs the construction as its field")),
            };
            [d.saturating_sub(4), d.saturating_sub(2), d].into_iter().filter(|&n| n >= 1).collect()
        }
        (None, None) => vec![4, 6, 8],
    };
    if depths.iter().any(|&d| d == 0 || d > CantorTree::MAX_GEOMETRY_DEPTH) {
        return Err(Failure::config(format!("depths must lie in 1..={}", CantorTree::MAX_GEOMETRY_DEPTH)));
    }
    let t = cfg.t.unwrap_or(2.0);
    let sup_t = crossing_ladder_analytic(30).t.last().copied().unwrap_or(f64::NAN);
    if !(t > sup_t + STRIP_WIDTH) {
        return Err(Failure::config(format!("t must exceed sup T + strip width = {}", sup_t + STRIP_WIDTH)));
    }
    let rows_per_s = cfg.rows_per_s.unwrap_or(8.0);
    let r = tv_refinement(&depths, t, STRIP_WIDTH, rows_per_s)?;
    out.csv("tv_refinement.csv", &r.to_csv())?;
    let growth = r.growth();
    let monotone = growth.iter().all(|g| *g > 0.0);
    let shear_change = r.shear_change();
    out.json(
        "tv_refinement.json",
        &json!({ "refinement": r, "growth": growth, "monotone": monotone, "shear_change": shear_change }),
    )?;
    let series = |rows: &[hamflow::counterexample::StripTv]| rows.iter().map(|s| (s.depth as f64, s.tv)).collect();
    let plot = line_plot(
        "Strip TV of X(t)·e₁ under matched refinement",
        "construction depth n",
        "TV",
        &[
            Series { name: "construction", points: series(&r.counterexample) },
            Series { name: "shear (1+y², 0)", points: series(&r.shear) },
        ],
        false,
    );
    out.svg("tv_refinement.svg", &plot)?;
    if !monotone || !(shear_change < 0.01) {
        return Err(Failure::check(format!(
            "TV not increasing ({growth:?}) or shear TV changed by {shear_change:e}"
        )));
    }
    Ok(())
}

use std::sync::Arc;

use clap::Subcommand;
use hamflow::counterexample::{
    alternating_heights, crossing_ladder_analytic, crossing_ladder_trajectory, crossing_profile, sobolev_schedule,
    tv_profile, CantorTree, CounterexampleField, CrossingLadder, MollifiedField,
};
use hamflow::field::{field_stats, FieldSpec, GridField, GridSpec, PiecewiseSpec, PlanarField, Role};
use hamflow::{AxisRect, Vec2};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::fail::Failure;
use crate::output::Output;
use crate::svg::{line_plot, Series};
use crate::window_of;

#[derive(Subcommand, Clone, Debug)]
pub enum ExampleCmd {
    /// Build the construction to depth n; write its tree and a sampled grid field.
    Build(RunConfig),
    /// Crossing-time ladder T1, Ts, Tf, T per level.
    Ladder(RunConfig),
    /// Total variation of the crossing time T(y) against the per-level bounds.
    Tv(RunConfig),
    /// Sample the mollified field and its transversality b·e₁.
    Mollify(RunConfig),
    /// Second-derivative norms of the mollified increments.
    SobolevSchedule(RunConfig),
}

impl ExampleCmd {
    pub fn parts(&self) -> (&'static str, &RunConfig) {
        match self {
            ExampleCmd::Build(c) => ("example build", c),
            ExampleCmd::Ladder(c) => ("example ladder", c),
            ExampleCmd::Tv(c) => ("example tv", c),
            ExampleCmd::Mollify(c) => ("example mollify", c),
            ExampleCmd::SobolevSchedule(c) => ("example sobolev-schedule", c),
        }
    }
}

pub fn run(cmd: &ExampleCmd, cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    match cmd {
        ExampleCmd::Build(_) => build(cfg, out),
        ExampleCmd::Ladder(_) => ladder(cfg, out),
        ExampleCmd::Tv(_) => tv(cfg, out),
        ExampleCmd::Mollify(_) => mollify(cfg, out),
        ExampleCmd::SobolevSchedule(_) => schedule(cfg, out),
    }
}

fn tree(n: u32) -> Result<Arc<CantorTree>, Failure> {
    Ok(Arc::new(CantorTree::build(n)?))
}

const SQUARE: AxisRect = AxisRect { x_lo: -0.25, x_hi: 0.75, y_lo: -0.25, y_hi: 0.75 };

fn build(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let n = cfg.n.unwrap_or(3);
    let m = cfg.grid.unwrap_or(256);
    let window = window_of(cfg, SQUARE)?;
    let tree = tree(n)?;
    out.json("tree.json", &tree.to_json())?;
    let piecewise = FieldSpec::Piecewise(PiecewiseSpec { construction: "counterexample".into(), depth: n, mollified: false });
    out.json(&format!("cex_n{n}.json"), &piecewise)?;

    let f = CounterexampleField::new(tree.clone(), n);
    let g = GridField::sample(&f, &window, m, m)?;
    let spec = FieldSpec::Grid(GridSpec::from_field(&g, Role::Streamfunction));
    let path = out.json(&format!("cex_n{n}_grid.json"), &spec)?;
    // the written file must load back to the same values; node evaluation goes through
    // bilinear interpolation and may differ by rounding
    let back = FieldSpec::load(&path)?;
    let (h, role) = back.scalar()?;
    let round_trip = g
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| (h.value(g.node(k % m, k / m)) - v).abs())
        .fold(0.0, f64::max);
    let components: Vec<usize> = (1..=n).map(|l| tree.components(l).len()).collect();
    out.json(
        "build.json",
        &json!({
            "depth": n,
            "grid": m,
            "window": [window.x_lo, window.x_hi, window.y_lo, window.y_hi],
            "components": components,
            "round_trip_max_error": round_trip,
            "round_trip_role": role,
        }),
    )?;
    if back != spec || !(round_trip <= 1e-12) {
        return Err(Failure::check(format!("grid field does not round-trip (max node error {round_trip:e})")));
    }
    Ok(())
}

fn ladder(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let n = cfg.n.unwrap_or(20);
    if n < 2 {
        return Err(Failure::config("--n must be at least 2"));
    }
    let analytic = crossing_ladder_analytic(n);
    out.csv("ladder_analytic.csv", &analytic.to_csv())?;
    let method = cfg.method.as_deref().unwrap_or("analytic");
    let trajectory = match method {
        "analytic" => None,
        "trajectory" | "both" => {
            let lad = crossing_ladder_trajectory(&tree(n)?, n)?;
            out.csv("ladder_trajectory.csv", &lad.to_csv())?;
            Some(lad)
        }
        m => return Err(Failure::config(format!("unknown ladder method {m:?}; expected analytic, trajectory or both"))),
    };
    let gap = trajectory.as_ref().map(|t| max_relative_gap(&analytic, t));
    out.json(
        "ladder.json",
        &json!({
            "n": n,
            "T": analytic.t.last(),
            "sigma_partial": analytic.sigma_partial.last(),
            "tv_bounds": analytic.tv_bounds(),
            "trajectory_flags": trajectory.as_ref().map(|t| t.flags.clone()),
            "max_relative_gap": gap,
        }),
    )?;
    match gap {
        Some(g) if !(g <= LADDER_TOL) => Err(Failure::check(format!("analytic and trajectory ladders differ by {g:e}"))),
        _ => Ok(()),
    }
}

/// Relative agreement required between the two ladders.
pub const LADDER_TOL: f64 = 1e-6;

/// Largest relative difference of T1, Ts, Tf over all levels; NaN entries count as
/// infinite.
pub fn max_relative_gap(a: &CrossingLadder, b: &CrossingLadder) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, y) in [(&a.t1, &b.t1), (&a.ts, &b.ts), (&a.tf, &b.tf)] {
        for (u, v) in x.iter().zip(y.iter()) {
            let r = (u - v).abs() / u.abs().max(v.abs());
            worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
        }
    }
    worst
}

fn tv(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let n = cfg.n.unwrap_or(8).min(CantorTree::MAX_GEOMETRY_DEPTH);
    let samples = cfg.samples.unwrap_or(4096);
    let tree = tree(n)?;
    let prof = tv_profile(&tree, n, samples)?;
    let mut ys = alternating_heights(&tree, n);
    ys.extend((1..=samples).map(|i| 0.5 * i as f64 / (samples + 1) as f64));
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let field = CounterexampleField::new(tree.clone(), n);
    let curve = crossing_profile(&field, &ys)?;
    let mut csv = String::from("y,T\n");
    for (y, t) in &curve {
        csv.push_str(&format!("{y:.17e},{t:.17e}\n"));
    }
    out.csv("crossing_time.csv", &csv)?;
    let plot = line_plot(
        &format!("Crossing time T(y), depth {n}"),
        "y",
        "T(y)",
        &[Series { name: "T", points: curve }],
        false,
    );
    out.svg("crossing_time.svg", &plot)?;
    let below: Vec<u32> = prof.bounds.iter().filter(|(_, b)| prof.measured_tv < *b).map(|(l, _)| *l).collect();
    out.json("tv.json", &json!({ "profile": prof, "bounds_exceeding_measured": below }))?;
    if below.is_empty() {
        Ok(())
    } else {
        Err(Failure::check(format!("measured TV {} is below the bounds of levels {below:?}", prof.measured_tv)))
    }
}

#[derive(Serialize)]
struct MollifyReport {
    depth: u32,
    grid: usize,
    window: [f64; 4],
    /// Smallest `b·e₁` over the grid nodes.
    min_transversal_grid: f64,
    /// Smallest `b·e₁` over the window corners and Halton points.
    min_transversal_halton: f64,
    halton_samples: usize,
    sup_norm: f64,
}

fn mollify(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let n = cfg.n.unwrap_or(3);
    let m = cfg.grid.unwrap_or(64);
    let samples = cfg.samples.unwrap_or(4096);
    let window = window_of(cfg, SQUARE)?;
    let f = Arc::new(MollifiedField::new(tree(n)?, n)?);
    let g = GridField::sample(f.as_ref(), &window, m, m)?;
    out.json(&format!("mollified_n{n}_grid.json"), &FieldSpec::Grid(GridSpec::from_field(&g, Role::Streamfunction)))?;
    let b = PlanarField::from_streamfunction(f);
    let min_grid = (0..m * m)
        .into_par_iter()
        .map(|k| b.eval(g.node(k % m, k / m)).x)
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let stats = field_stats(&b, &window, Some(Vec2::new(1.0, 0.0)), samples)?;
    let rep = MollifyReport {
        depth: n,
        grid: m,
        window: [window.x_lo, window.x_hi, window.y_lo, window.y_hi],
        min_transversal_grid: min_grid,
        min_transversal_halton: stats.min_transversal.unwrap_or(f64::NAN),
        halton_samples: samples,
        sup_norm: stats.sup_norm,
    };
    out.json("mollify.json", &rep)?;
    let lo = rep.min_transversal_grid.min(rep.min_transversal_halton);
    if lo > 0.0 {
        Ok(())
    } else {
        Err(Failure::check(format!("b·e₁ = {lo} is not positive at some sample")))
    }
}

fn schedule(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let l_max = cfg.l_max.unwrap_or(6);
    let p = cfg.p.unwrap_or(2.0);
    let tree = tree(l_max.max(1))?;
    let s = sobolev_schedule(tree, l_max, p)?;
    out.csv("sobolev_schedule.csv", &s.to_csv())?;
    out.json("sobolev_schedule.json", &json!({ "schedule": s, "last_increment": s.last_increment() }))?;
    Ok(())
}

use hamflow::counterexample::crossing_time_analytic;
use hamflow::flow::{compressibility_check, flow_map, DensityReport, FlowMap, FlowMethod, NodeFlag};
use hamflow::hamiltonian::NodeGrid;
use serde::Serialize;

use crate::config::RunConfig;
use crate::fail::Failure;
use crate::output::Output;
use crate::{source, window_of};

#[derive(Serialize)]
struct Compressibility {
    cells: usize,
    skipped: usize,
    degenerate: usize,
    max_ratio: f64,
    min_ratio: f64,
}

impl From<DensityReport> for Compressibility {
    fn from(r: DensityReport) -> Self {
        Self { cells: r.cells, skipped: r.skipped, degenerate: r.degenerate.len(), max_ratio: r.max_ratio, min_ratio: r.min_ratio }
    }
}

#[derive(Serialize)]
struct MethodSummary {
    method: FlowMethod,
    flagged: usize,
    compressibility: Compressibility,
    /// `max |H(X(t,z)) − H(z)|` over unflagged nodes.
    conservation: f64,
    /// For the construction: `max |X·e₁ − (x + 1 + t − T(y))|` over nodes left of the
    /// strip whose trajectory has crossed it by time `t`.
    strip_formula: Option<StripFormula>,
}

#[derive(Serialize)]
struct StripFormula {
    nodes: usize,
    max_error: f64,
}

#[derive(Serialize)]
struct Summary {
    field: String,
    t: f64,
    grid: usize,
    window: [f64; 4],
    methods: Vec<MethodSummary>,
    /// Largest distance between the two methods' images, when both ran.
    discrepancy: Option<f64>,
}

pub fn run(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let src = source::resolve(cfg.field.as_deref())?;
    let t = cfg.t.unwrap_or(1.0);
    let n = cfg.grid.unwrap_or(64);
    let window = window_of(cfg, src.default_window())?;
    let grid = NodeGrid::new(window, n, n)?;
    let rk = FlowMethod::Rk { tol: cfg.tol.unwrap_or(1e-12), max_step: None };
    let default = if src.is_piecewise() { "levelset" } else { "both" };
    let methods = match cfg.method.as_deref().unwrap_or(default) {
        "levelset" => vec![FlowMethod::Levelset],
        "rk" => vec![rk],
        "both" => vec![FlowMethod::Levelset, rk],
        m => return Err(Failure::config(format!("unknown method {m:?}; expected levelset, rk or both"))),
    };
    let mut maps: Vec<FlowMap> = vec![];
    let mut summaries = vec![];
    for m in methods {
        let fm = flow_map(&src.b, t, &grid, m)?;
        out.csv(&format!("flow_{}.csv", m.name()), &fm.to_csv())?;
        let conservation = fm
            .images
            .iter()
            .zip(&fm.flags)
            .enumerate()
            .filter(|(_, (_, f))| **f == NodeFlag::Ok)
            .map(|(k, (p, _))| (src.h.value(*p) - src.h.value(grid.node(k % n, k / n))).abs())
            .fold(0.0, f64::max);
        let strip_formula = src.counterexample.as_ref().map(|field| {
            let mut s = StripFormula { nodes: 0, max_error: 0.0 };
            for (k, (p, f)) in fm.images.iter().zip(&fm.flags).enumerate() {
                let z = grid.node(k % n, k / n);
                if *f != NodeFlag::Ok || !(z.x < 0.0 && z.y > 0.0 && z.y < 0.5) {
                    continue;
                }
                let tt = crossing_time_analytic(field, z.y);
                if t <= -z.x + tt {
                    continue;
                }
                s.nodes += 1;
                s.max_error = s.max_error.max((p.x - (z.x + 1.0 + t - tt)).abs());
            }
            s
        });
        summaries.push(MethodSummary {
            method: m,
            flagged: fm.flagged(),
            compressibility: compressibility_check(&fm, None).into(),
            conservation,
            strip_formula,
        });
        maps.push(fm);
    }
    let discrepancy = (maps.len() == 2).then(|| maps[0].max_discrepancy(&maps[1]));
    let summary = Summary {
        field: cfg.field.clone().unwrap_or_default(),
        t,
        grid: n,
        window: [window.x_lo, window.x_hi, window.y_lo, window.y_hi],
        methods: summaries,
        discrepancy,
    };
    out.json("summary.json", &summary)?;
    Ok(())
}

use clap::Subcommand;
use hamflow::field::{field_stats, FieldSpec, GridField, GridSpec, Role};
use hamflow::Vec2;
use serde_json::json;

use crate::config::RunConfig;
use crate::fail::Failure;
use crate::output::Output;
use crate::{source, window_of};

#[derive(Subcommand, Clone, Debug)]
pub enum FieldCmd {
    /// Sample the scalar field on a grid and write it as a grid field file.
    Sample(RunConfig),
    /// Sampled sup norm and range of b·e on a window.
    Stats(RunConfig),
}

impl FieldCmd {
    pub fn parts(&self) -> (&'static str, &RunConfig) {
        match self {
            FieldCmd::Sample(c) => ("field sample", c),
            FieldCmd::Stats(c) => ("field stats", c),
        }
    }
}

pub fn run(cmd: &FieldCmd, cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let src = source::resolve(cfg.field.as_deref())?;
    let window = window_of(cfg, src.default_window())?;
    match cmd {
        FieldCmd::Sample(_) => {
            let m = cfg.grid.unwrap_or(128);
            let role = match &src.spec {
                FieldSpec::Analytic(a) => a.role,
                FieldSpec::Grid(g) => g.role,
                FieldSpec::Piecewise(_) => Role::Streamfunction,
            };
            // the stored function is H, or f = −H for a streamfunction
            let (f, _) = src.spec.scalar()?;
            let g = GridField::sample(f.as_ref(), &window, m, m)?;
            out.json("field_grid.json", &FieldSpec::Grid(GridSpec::from_field(&g, role)))?;
        }
        FieldCmd::Stats(_) => {
            let e = cfg.direction.as_ref().map(|d| Vec2::new(d[0], d[1]));
            let stats = field_stats(&src.b, &window, e, cfg.samples.unwrap_or(4096))?;
            out.json(
                "field_stats.json",
                &json!({ "window": [window.x_lo, window.x_hi, window.y_lo, window.y_hi], "direction": e, "stats": stats }),
            )?;
        }
    }
    Ok(())
}

//! Field sources: definition files or built-in names.

use std::path::Path;
use std::sync::Arc;

use hamflow::counterexample::{CantorTree, CounterexampleField};
use hamflow::field::{AnalyticSpec, FieldSpec, Form, PiecewiseSpec, PlanarField, Role, ScalarField};
use hamflow::{AxisRect, Point};

use crate::fail::Failure;

/// A resolved field with the handles the commands need.
pub struct Source {
    pub spec: FieldSpec,
    pub b: PlanarField,
    pub h: Arc<dyn ScalarField>,
    /// The unmollified construction, when the field is one.
    pub counterexample: Option<CounterexampleField>,
}

impl Source {
    pub fn is_piecewise(&self) -> bool {
        self.h.as_piecewise().is_some()
    }

    /// A window inside the field's domain for commands that need one.
    pub fn default_window(&self) -> AxisRect {
        match &self.spec {
            FieldSpec::Piecewise(_) => AxisRect { x_lo: -0.25, x_hi: 0.75, y_lo: -0.25, y_hi: 0.75 },
            _ => {
                let d = self.h.domain();
                let unit = AxisRect { x_lo: -1.0, x_hi: 1.0, y_lo: -1.0, y_hi: 1.0 };
                if d.contains(Point::new(unit.x_lo, unit.y_lo)) && d.contains(Point::new(unit.x_hi, unit.y_hi)) {
                    unit
                } else {
                    d
                }
            }
        }
    }
}

fn analytic(form: Form, domain: [f64; 4]) -> FieldSpec {
    FieldSpec::Analytic(AnalyticSpec { form, domain: Some(domain), role: Role::Hamiltonian })
}

/// `translation`, `rotation`, `shear`, `vortex`, `cex:N` and `cex-mollified:N`.
pub fn builtin(name: &str) -> Option<FieldSpec> {
    let depth = |prefix: &str| name.strip_prefix(prefix).and_then(|d| d.parse::<u32>().ok());
    Some(match name {
        // H = x/2 − y, so b = (1, 1/2)
        "translation" => analytic(Form::Linear { gx: 0.5, gy: -1.0, c: 0.0 }, [-4.0, 4.0, -4.0, 4.0]),
        "rotation" => analytic(Form::Quadratic { a: 1.0, b: 0.0, c: 1.0 }, [-4.0, 4.0, -4.0, 4.0]),
        "shear" => analytic(Form::Shear, [-4.0, 8.0, -2.0, 2.0]),
        "vortex" => FieldSpec::Analytic(AnalyticSpec {
            form: Form::CompactVortex { amp: 0.5, radius: 1.0 },
            domain: None,
            role: Role::Hamiltonian,
        }),
        _ => {
            if let Some(d) = depth("cex-mollified:") {
                FieldSpec::Piecewise(PiecewiseSpec { construction: "counterexample".into(), depth: d, mollified: true })
            } else if let Some(d) = depth("cex:") {
                FieldSpec::Piecewise(PiecewiseSpec { construction: "counterexample".into(), depth: d, mollified: false })
            } else {
                return None;
            }
        }
    })
}

pub fn resolve(field: Option<&str>) -> Result<Source, Failure> {
    let name = field.ok_or_else(|| Failure::config("--field is required"))?;
    let spec = match builtin(name) {
        Some(s) => s,
        None => {
            let path = Path::new(name);
            if !path.exists() {
                return Err(Failure::config(format!("{name} is neither a field file nor a built-in field")));
            }
            FieldSpec::load(path)?
        }
    };
    from_spec(spec)
}

pub fn from_spec(spec: FieldSpec) -> Result<Source, Failure> {
    let b = spec.planar()?;
    let h = b.hamiltonian().expect("field specs yield Hamiltonian backends").clone();
    let counterexample = match &spec {
        FieldSpec::Piecewise(p) if !p.mollified => {
            Some(CounterexampleField::new(Arc::new(CantorTree::build(p.depth)?), p.depth))
        }
        _ => None,
    };
    Ok(Source { spec, b, h, counterexample })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve() {
        for name in ["translation", "rotation", "shear", "vortex", "cex:3", "cex-mollified:2"] {
            let s = resolve(Some(name)).unwrap();
            assert!(s.b.sup_norm > 0.0, "{name}");
        }
        let s = resolve(Some("translation")).unwrap();
        let v = s.b.eval(Point::new(0.3, 0.2));
        assert_eq!((v.x, v.y), (1.0, 0.5));
        assert!(resolve(Some("cex:x")).is_err());
        assert_eq!(resolve(Some("cex:40")).err().unwrap().code, Failure::CONFIG);
    }
}

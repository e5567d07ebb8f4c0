use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::analytic::Form;
use super::{Analytic, GridField, PlanarField, ScalarField};
use crate::counterexample::{CantorTree, CounterexampleField, MollifiedField};
use crate::error::{Error, Result};
use crate::geometry::{AxisRect, Point};

/// Whether stored values are a Hamiltonian (`b = ∇⊥H`) or a streamfunction
/// (`b = −∇⊥f`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Hamiltonian,
    Streamfunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSpec {
    #[serde(flatten)]
    pub form: Form,
    /// `[x_lo, x_hi, y_lo, y_hi]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 4]>,
    #[serde(default)]
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `values[iy * nx + ix]`.
    pub values: Vec<f64>,
    #[serde(default)]
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSpec {
    /// Only `"counterexample"` is known.
    pub construction: String,
    pub depth: u32,
    #[serde(default)]
    pub mollified: bool,
}

/// Field definition file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldSpec {
    Analytic(AnalyticSpec),
    Grid(GridSpec),
    Piecewise(PiecewiseSpec),
}

impl GridSpec {
    pub fn from_field(g: &GridField, role: Role) -> Self {
        let o = g.origin();
        let (dx, dy) = g.spacing();
        let (nx, ny) = g.shape();
        Self { origin: [o.x, o.y], spacing: [dx, dy], nx, ny, values: g.values().to_vec(), role }
    }
}

impl FieldSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// The stored scalar function and its role.
    pub fn scalar(&self) -> Result<(Arc<dyn ScalarField>, Role)> {
        Ok(match self {
            FieldSpec::Analytic(a) => {
                let domain = match a.domain {
                    Some([x0, x1, y0, y1]) => AxisRect::new(x0, x1, y0, y1)?,
                    None => match a.form {
                        Form::CompactVortex { amp, radius } => Analytic::compact_vortex(amp, radius).domain,
                        _ => AxisRect::new(-10.0, 10.0, -10.0, 10.0)?,
                    },
                };
                (Arc::new(Analytic::new(a.form, domain)), a.role)
            }
            FieldSpec::Grid(g) => {
                let f = GridField::new(
                    Point::new(g.origin[0], g.origin[1]),
                    g.spacing[0],
                    g.spacing[1],
                    g.nx,
                    g.ny,
                    g.values.clone(),
                )?;
                (Arc::new(f), g.role)
            }
            FieldSpec::Piecewise(p) => {
                if p.construction != "counterexample" {
                    return Err(Error::InvalidParameter(format!("unknown construction {:?}", p.construction)));
                }
                if p.depth == 0 || p.depth > CantorTree::MAX_GEOMETRY_DEPTH {
                    return Err(Error::InvalidParameter(format!(
                        "depth must be in 1..={}",
                        CantorTree::MAX_GEOMETRY_DEPTH
                    )));
                }
                let tree = Arc::new(CantorTree::build(p.depth)?);
                let f: Arc<dyn ScalarField> = if p.mollified {
                    Arc::new(MollifiedField::new(tree, p.depth)?)
                } else {
                    Arc::new(CounterexampleField::new(tree, p.depth))
                };
                (f, Role::Streamfunction)
            }
        })
    }

    /// The vector field described by the file.
    pub fn planar(&self) -> Result<PlanarField> {
        let (f, role) = self.scalar()?;
        Ok(match role {
            Role::Hamiltonian => PlanarField::from_hamiltonian(f),
            Role::Streamfunction => PlanarField::from_streamfunction(f),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let text = r#"{"kind":"analytic","name":"quadratic","a":1.0,"b":0.0,"c":1.0,"domain":[-2,2,-2,2]}"#;
        let spec: FieldSpec = serde_json::from_str(text).unwrap();
        let back: FieldSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
        let b = spec.planar().unwrap();
        let v = b.eval(Point::new(1.0, 0.0));
        assert_eq!((v.x, v.y), (0.0, 1.0));

        let shear: FieldSpec = serde_json::from_str(r#"{"kind":"analytic","name":"shear","domain":[0,1,0,1]}"#).unwrap();
        assert_eq!(shear.planar().unwrap().eval(Point::new(0.2, 0.5)).x, 1.25);

        let grid = FieldSpec::Grid(GridSpec {
            origin: [0.0, 0.0],
            spacing: [1.0, 1.0],
            nx: 2,
            ny: 2,
            values: vec![0.0, 0.0, 1.0, 1.0],
            role: Role::Streamfunction,
        });
        let s = serde_json::to_string(&grid).unwrap();
        assert!(s.contains(r#""kind":"grid""#));
        let back: FieldSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(grid, back);
        let v = back.planar().unwrap().eval(Point::new(0.5, 0.5));
        assert_eq!((v.x, v.y), (1.0, 0.0));
    }

    #[test]
    fn rejects_unknown_construction() {
        let s: FieldSpec =
            serde_json::from_str(r#"{"kind":"piecewise","construction":"spiral","depth":2}"#).unwrap();
        assert!(s.scalar().is_err());
    }
}

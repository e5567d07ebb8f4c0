use serde::{Deserialize, Serialize};

use super::ScalarField;
use crate::geometry::{AxisRect, Point, Vec2};

/// Closed-form Hamiltonians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Form {
    /// `c + gx·x + gy·y`
    Linear { gx: f64, gy: f64, c: f64 },
    /// `(a x² + 2 b x y + c y²) / 2`
    Quadratic { a: f64, b: f64, c: f64 },
    /// `−(y + y³/3)`, giving the shear `b = (1 + y², 0)`
    Shear,
    /// `amp · (1 − |z|²/R²)³` inside the disc of radius `R`, zero outside
    CompactVortex { amp: f64, radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analytic {
    pub form: Form,
    pub domain: AxisRect,
}

impl Analytic {
    pub fn new(form: Form, domain: AxisRect) -> Self {
        Self { form, domain }
    }

    pub fn linear(gx: f64, gy: f64, c: f64, domain: AxisRect) -> Self {
        Self::new(Form::Linear { gx, gy, c }, domain)
    }

    pub fn quadratic(a: f64, b: f64, c: f64, domain: AxisRect) -> Self {
        Self::new(Form::Quadratic { a, b, c }, domain)
    }

    /// `ω(x² + y²)/2`, so that `∇⊥H = ω(−y, x)`.
    pub fn rotation(omega: f64, domain: AxisRect) -> Self {
        Self::quadratic(omega, 0.0, omega, domain)
    }

    pub fn shear(domain: AxisRect) -> Self {
        Self::new(Form::Shear, domain)
    }

    pub fn compact_vortex(amp: f64, radius: f64) -> Self {
        let d = 2.0 * radius;
        Self::new(
            Form::CompactVortex { amp, radius },
            AxisRect { x_lo: -d, x_hi: d, y_lo: -d, y_hi: d },
        )
    }
}

impl ScalarField for Analytic {
    fn value(&self, p: Point) -> f64 {
        let (x, y) = (p.x, p.y);
        match self.form {
            Form::Linear { gx, gy, c } => c + gx * x + gy * y,
            Form::Quadratic { a, b, c } => 0.5 * (a * x * x + 2.0 * b * x * y + c * y * y),
            Form::Shear => -(y + y * y * y / 3.0),
            Form::CompactVortex { amp, radius } => {
                let s = 1.0 - (x * x + y * y) / (radius * radius);
                if s > 0.0 {
                    amp * s * s * s
                } else {
                    0.0
                }
            }
        }
    }

    fn gradient(&self, p: Point) -> Vec2 {
        let (x, y) = (p.x, p.y);
        match self.form {
            Form::Linear { gx, gy, .. } => Vec2::new(gx, gy),
            Form::Quadratic { a, b, c } => Vec2::new(a * x + b * y, b * x + c * y),
            Form::Shear => Vec2::new(0.0, -(1.0 + y * y)),
            Form::CompactVortex { amp, radius } => {
                let r2 = radius * radius;
                let s = 1.0 - (x * x + y * y) / r2;
                if s > 0.0 {
                    let k = -6.0 * amp * s * s / r2;
                    Vec2::new(k * x, k * y)
                } else {
                    Vec2::default()
                }
            }
        }
    }

    fn domain(&self) -> AxisRect {
        self.domain
    }

    fn lipschitz(&self) -> f64 {
        let d = &self.domain;
        match self.form {
            Form::Linear { gx, gy, .. } => gx.hypot(gy),
            Form::Quadratic { a, b, c } => {
                // operator norm of the symmetric matrix times the farthest corner
                let tr = 0.5 * (a + c);
                let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                let op = (tr + disc).abs().max((tr - disc).abs());
                let far = d.corners().iter().map(|q| q.norm()).fold(0.0, f64::max);
                op * far
            }
            Form::Shear => 1.0 + d.y_lo.abs().max(d.y_hi.abs()).powi(2),
            Form::CompactVortex { amp, radius } => {
                // max of 6 amp s (1 − s²)² / R at s = 1/√5
                let s = 1.0 / 5f64.sqrt();
                6.0 * amp.abs() * s * (1.0 - s * s).powi(2) / radius
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_gradient(h: &Analytic) {
        let eps = 1e-6;
        for &(x, y) in &[(0.1, 0.2), (-0.3, 0.45), (0.6, -0.1)] {
            let p = Point::new(x, y);
            let g = h.gradient(p);
            let gx = (h.value(Point::new(x + eps, y)) - h.value(Point::new(x - eps, y))) / (2.0 * eps);
            let gy = (h.value(Point::new(x, y + eps)) - h.value(Point::new(x, y - eps))) / (2.0 * eps);
            assert!((g.x - gx).abs() < 1e-8 && (g.y - gy).abs() < 1e-8, "{h:?} at {p:?}");
            assert!(g.norm() <= h.lipschitz() + 1e-12);
        }
    }

    #[test]
    fn gradients_match_values() {
        let dom = AxisRect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        check_gradient(&Analytic::linear(0.5, -2.0, 1.0, dom));
        check_gradient(&Analytic::quadratic(1.0, 0.3, -2.0, dom));
        check_gradient(&Analytic::shear(dom));
        check_gradient(&Analytic::compact_vortex(1.0, 1.0));
    }

    #[test]
    fn vortex_lipschitz_is_attained() {
        let h = Analytic::compact_vortex(1.0, 1.0);
        let r = 1.0 / 5f64.sqrt();
        assert!((h.gradient(Point::new(r, 0.0)).norm() - h.lipschitz()).abs() < 1e-14);
    }
}

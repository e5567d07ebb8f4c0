//! Dormand–Prince 5(4) embedded pair with a deterministic step-size controller.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::PlanarField;
use crate::geometry::{Point, Vec2};

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RkOptions {
    /// Bound on the local error per accepted step (max norm).
    pub tol: f64,
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl RkOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_step: None, max_steps: 10_000_000 }
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = Some(h);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RkOutcome {
    pub point: Point,
    pub steps: usize,
    pub rejected: usize,
    /// Set when steps had to be forced below the minimal step size.
    pub flagged: bool,
    /// Sum of local error estimates of forced steps.
    pub uncertainty: f64,
}

/// Time samples of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<(f64, Point)>,
    pub method: String,
    pub tolerance: f64,
}

impl Trajectory {
    /// Checks increasing times and `|ΔX| ≤ ‖b‖∞ Δt + tolerance`.
    pub fn is_consistent(&self, sup_norm: f64) -> bool {
        self.samples.windows(2).all(|w| {
            let (t0, p0) = w[0];
            let (t1, p1) = w[1];
            t1 > t0 && p0.dist(p1) <= sup_norm * (t1 - t0) + self.tolerance
        })
    }
}

/// `X(t, z)` for `ẋ = b(x)`.
pub fn rk_flow(b: &PlanarField, z: Point, t: f64, opts: &RkOptions) -> Result<RkOutcome> {
    integrate(b, z, t, opts, |_, _| {})
}

pub fn rk_trajectory(b: &PlanarField, z: Point, t: f64, opts: &RkOptions) -> Result<(RkOutcome, Trajectory)> {
    let mut samples = vec![(0.0, z)];
    let out = integrate(b, z, t, opts, |s, p| samples.push((s, p)))?;
    Ok((out, Trajectory { samples, method: "dopri5".into(), tolerance: opts.tol }))
}

fn integrate<F: FnMut(f64, Point)>(b: &PlanarField, z: Point, t: f64, opts: &RkOptions, mut record: F) -> Result<RkOutcome> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter("time must be non-negative".into()));
    }
    let mut out = RkOutcome { point: z, steps: 0, rejected: 0, flagged: false, uncertainty: 0.0 };
    if t == 0.0 {
        return Ok(out);
    }
    let cap = opts.max_step.unwrap_or(f64::INFINITY).min(t);
    let h_min = 1e-14 * t.max(1.0);
    let mut y = z;
    let mut k1 = b.eval(y);
    let mut h = initial_step(b, y, k1, t, opts.tol).min(cap);
    let mut s = 0.0;
    let mut k = [Vec2::default(); 7];
    while s < t {
        if out.steps + out.rejected >= opts.max_steps {
            return Err(Error::Numerical(format!("step limit {} reached", opts.max_steps)));
        }
        let last = s + h >= t;
        if last {
            h = t - s;
        }
        k[0] = k1;
        for i in 0..6 {
            let mut inc = Vec2::default();
            for j in 0..=i {
                if A[i][j] != 0.0 {
                    inc += (k[j] - k[0]) * A[i][j];
                }
            }
            let ci: f64 = A[i].iter().sum();
            k[i + 1] = b.eval(y + (k[0] * ci + inc) * h);
        }
        // k[6] is the field at the fifth-order solution (first same as last)
        let mut inc = Vec2::default();
        for j in 1..6 {
            if A[5][j] != 0.0 {
                inc += (k[j] - k[0]) * A[5][j];
            }
        }
        let y_new = y + (k[0] + inc) * h;
        let mut err = Vec2::default();
        for j in 0..7 {
            err += k[j] * E[j];
        }
        let err = (err.x.abs().max(err.y.abs())) * h;
        let forced = h <= h_min;
        if err <= opts.tol || forced {
            if forced && err > opts.tol {
                out.flagged = true;
                out.uncertainty += err;
            }
            s = if last { t } else { s + h };
            y = y_new;
            k1 = k[6];
            out.steps += 1;
            record(s, y);
        } else {
            out.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * (opts.tol / err).powf(0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(cap).max(h_min);
    }
    out.point = y;
    Ok(out)
}

fn initial_step(b: &PlanarField, y: Point, f0: Vec2, t: f64, tol: f64) -> f64 {
    let d0 = y.norm().max(1.0);
    let d1 = f0.norm();
    let h0 = if d1 < 1e-12 { 1e-3 * t } else { (0.01 * d0 / d1).min(t) };
    let f1 = b.eval(y + f0 * h0);
    let d2 = (f1 - f0).norm() / h0;
    if d2.max(d1) <= 1e-15 || d2 <= 1e-15 {
        return t;
    }
    (tol / d2).powf(0.2).min(100.0 * h0).min(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn translation_is_exact() {
        let b = PlanarField::direct(|_| Vec2::new(1.0, 0.0), 1.0, 1.0);
        let r = rk_flow(&b, Point::new(0.0, 0.0), 1.0, &RkOptions::new(1e-10)).unwrap();
        assert_eq!(r.point, Point::new(1.0, 0.0));
        assert_eq!(r.steps, 1);
    }

    #[test]
    fn rotation_quarter_turn() {
        let b = PlanarField::direct(|p| Vec2::new(-p.y, p.x), 1.0, 1.0);
        for tol in [1e-6, 1e-10, 1e-12] {
            let r = rk_flow(&b, Point::new(1.0, 0.0), FRAC_PI_2, &RkOptions::new(tol)).unwrap();
            assert!(r.point.dist(Point::new(0.0, 1.0)) < 20.0 * tol, "tol {tol}: {:?}", r.point);
            assert!(!r.flagged);
        }
    }

    #[test]
    fn shear_closed_form() {
        let b = PlanarField::direct(|p| Vec2::new(1.0 + p.y * p.y, 0.0), 2.0, 1.0);
        let z = Point::new(0.2, 0.7);
        let r = rk_flow(&b, z, 0.9, &RkOptions::new(1e-12)).unwrap();
        assert!((r.point.x - (0.2 + 1.49 * 0.9)).abs() < 1e-12);
        assert_eq!(r.point.y, 0.7);
    }

    #[test]
    fn max_step_and_trajectory() {
        let b = PlanarField::direct(|p| Vec2::new(-p.y, p.x), 1.0, 1.0);
        let opts = RkOptions::new(1e-9).with_max_step(0.01);
        let (r, traj) = rk_trajectory(&b, Point::new(1.0, 0.0), 1.0, &opts).unwrap();
        assert!(r.steps >= 100);
        assert_eq!(traj.samples.len(), r.steps + 1);
        assert!(traj.is_consistent(1.0));
        assert_eq!(traj.samples.last().unwrap().0, 1.0);
    }

    #[test]
    fn discontinuous_field_is_flagged_or_accurate() {
        // b jumps from 1 to 2 at x = 0.5; the exact arrival at t = 1 is x = 1.5.
        let b = PlanarField::direct(|p| Vec2::new(if p.x < 0.5 { 1.0 } else { 2.0 }, 0.0), 2.0, 1.0);
        let r = rk_flow(&b, Point::new(0.0, 0.0), 1.0, &RkOptions::new(1e-10)).unwrap();
        assert!((r.point.x - 1.5).abs() < 1e-6 + r.uncertainty);
    }
}

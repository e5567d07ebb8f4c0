use super::ScalarField;
use crate::error::{Error, Result};
use crate::geometry::{AxisRect, Point, Vec2};

/// Node values on a uniform grid, bilinearly interpolated. Values are row-major:
/// `values[iy * nx + ix]` sits at `origin + (ix·dx, iy·dy)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    origin: Point,
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
    lipschitz: f64,
}

impl GridField {
    pub fn new(origin: Point, dx: f64, dy: f64, nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 || values.len() != nx * ny {
            return Err(Error::InvalidParameter(format!(
                "grid needs nx, ny >= 2 and nx*ny values (nx={nx}, ny={ny}, len={})",
                values.len()
            )));
        }
        if !(dx > 0.0 && dy > 0.0) || !origin.is_finite() {
            return Err(Error::InvalidParameter("grid spacing must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("grid values must be finite".into()));
        }
        let mut g = Self { origin, dx, dy, nx, ny, values, lipschitz: 0.0 };
        let mut lip: f64 = 0.0;
        for iy in 0..ny - 1 {
            for ix in 0..nx - 1 {
                let (v00, v10, v01, v11) = g.corners(ix, iy);
                for (gx, gy) in [
                    ((v10 - v00) / dx, (v01 - v00) / dy),
                    ((v10 - v00) / dx, (v11 - v10) / dy),
                    ((v11 - v01) / dx, (v01 - v00) / dy),
                    ((v11 - v01) / dx, (v11 - v10) / dy),
                ] {
                    lip = lip.max(gx.hypot(gy));
                }
            }
        }
        g.lipschitz = lip;
        Ok(g)
    }

    /// Samples `h` at the nodes of an `nx × ny` grid spanning `rect`.
    pub fn sample(h: &dyn ScalarField, rect: &AxisRect, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2x2 nodes".into()));
        }
        let dx = rect.width() / (nx - 1) as f64;
        let dy = rect.height() / (ny - 1) as f64;
        let origin = Point::new(rect.x_lo, rect.y_lo);
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                values.push(h.value(Point::new(origin.x + ix as f64 * dx, origin.y + iy as f64 * dy)));
            }
        }
        Self::new(origin, dx, dy, nx, ny, values)
    }

    pub fn origin(&self) -> Point {
        self.origin
    }
    pub fn spacing(&self) -> (f64, f64) {
        (self.dx, self.dy)
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn node(&self, ix: usize, iy: usize) -> Point {
        Point::new(self.origin.x + ix as f64 * self.dx, self.origin.y + iy as f64 * self.dy)
    }
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    fn corners(&self, ix: usize, iy: usize) -> (f64, f64, f64, f64) {
        (self.at(ix, iy), self.at(ix + 1, iy), self.at(ix, iy + 1), self.at(ix + 1, iy + 1))
    }

    fn locate(&self, p: Point) -> (usize, usize, f64, f64) {
        let fx = (p.x - self.origin.x) / self.dx;
        let fy = (p.y - self.origin.y) / self.dy;
        let ix = (fx.floor().max(0.0) as usize).min(self.nx - 2);
        let iy = (fy.floor().max(0.0) as usize).min(self.ny - 2);
        (ix, iy, fx - ix as f64, fy - iy as f64)
    }
}

impl ScalarField for GridField {
    fn value(&self, p: Point) -> f64 {
        let (ix, iy, s, t) = self.locate(p);
        let (v00, v10, v01, v11) = self.corners(ix, iy);
        (1.0 - t) * ((1.0 - s) * v00 + s * v10) + t * ((1.0 - s) * v01 + s * v11)
    }

    fn gradient(&self, p: Point) -> Vec2 {
        let (ix, iy, s, t) = self.locate(p);
        let (v00, v10, v01, v11) = self.corners(ix, iy);
        Vec2::new(
            ((1.0 - t) * (v10 - v00) + t * (v11 - v01)) / self.dx,
            ((1.0 - s) * (v01 - v00) + s * (v11 - v10)) / self.dy,
        )
    }

    fn domain(&self) -> AxisRect {
        AxisRect {
            x_lo: self.origin.x,
            x_hi: self.origin.x + (self.nx - 1) as f64 * self.dx,
            y_lo: self.origin.y,
            y_hi: self.origin.y + (self.ny - 1) as f64 * self.dy,
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn on_breakpoint(&self, p: Point) -> bool {
        let fx = (p.x - self.origin.x) / self.dx;
        let fy = (p.y - self.origin.y) / self.dy;
        (fx - fx.round()).abs() < 1e-12 || (fy - fy.round()).abs() < 1e-12
    }
}

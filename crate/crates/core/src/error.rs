use crate::geometry::Point;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point ({}, {}) outside the evaluation domain", .0.x, .0.y)]
    OutOfDomain(Point),
    #[error("point ({}, {}) lies on a breakpoint line and no side rule was given", .0.x, .0.y)]
    OnBreakpoint(Point),
    #[error("invalid rectangle [{x_lo}, {x_hi}] x [{y_lo}, {y_hi}]")]
    InvalidRect { x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64 },
    #[error("empty window")]
    EmptyWindow,
    #[error("divergence residual {residual:e} in cell ({ix}, {iy}) exceeds {threshold:e}")]
    DivergenceResidual { ix: usize, iy: usize, residual: f64, threshold: f64 },
    #[error("transversality violated at ({}, {}): {detail}", .at.x, .at.y)]
    Transversality { at: Point, detail: String },
    #[error("level {0} is not attained in the window")]
    LevelNotAttained(f64),
    #[error("kernel moment check failed: mass {mass}, first moment {moment}")]
    KernelMoment { mass: f64, moment: f64 },
    #[error("trajectory trapped at ({}, {})", .0.x, .0.y)]
    Trapped(Point),
    #[error("covering failed at ball centred ({}, {}) radius {radius}", .center.x, .center.y)]
    Covering { center: Point, radius: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar coordinate on the robot's motion plane, in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Position) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Position) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, rhs: Position) -> Position {
        Position::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Position {
    type Output = Position;
    fn mul(self, rhs: f64) -> Position {
        Position::new(self.x * rhs, self.y * rhs)
    }
}

impl From<[f64; 2]> for Position {
    fn from(v: [f64; 2]) -> Self {
        Position::new(v[0], v[1])
    }
}

/// Closed axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Workspace {
    pub fn contains(&self, q: Position) -> bool {
        q.x >= self.x_min && q.x <= self.x_max && q.y >= self.y_min && q.y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

pub type Mat2 = [[f64; 2]; 2];

fn mat_vec(m: &Mat2, v: Position) -> Position {
    Position::new(m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y)
}

/// Elliptic-cylinder obstacle. The footprint is the unit level set of the
/// quadratic form `(q - c)^T P^{-1} (q - c)`; the cylinder spans `[0, height]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Obstacle {
    center: Position,
    shape: Mat2,
    height: f64,
    #[serde(skip)]
    inverse: Mat2,
}

impl Obstacle {
    pub fn new(center: Position, shape: Mat2, height: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidObstacle("non-finite center".into()));
        }
        if shape.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidObstacle("non-finite shape matrix".into()));
        }
        let off = shape[0][1] - shape[1][0];
        if off.abs() > 1e-12 {
            return Err(Error::InvalidObstacle(format!(
                "shape matrix not symmetric (asymmetry {off:e})"
            )));
        }
        let det = shape[0][0] * shape[1][1] - shape[0][1] * shape[1][0];
        // Sylvester: both eigenvalues positive iff P11 > 0 and det > 0.
        if shape[0][0] <= 0.0 || det <= 0.0 {
            return Err(Error::InvalidObstacle("shape matrix is not positive definite".into()));
        }
        if !(height > 0.0) {
            return Err(Error::InvalidObstacle(format!("height must be positive, got {height}")));
        }
        let inverse = [
            [shape[1][1] / det, -shape[0][1] / det],
            [-shape[1][0] / det, shape[0][0] / det],
        ];
        Ok(Self {
            center,
            shape,
            height,
            inverse,
        })
    }

    /// Ellipse with the given full axis lengths, rotated counter-clockwise by
    /// `rotation` radians (the `length` axis starts along +x).
    pub fn ellipse(center: Position, length: f64, width: f64, rotation: f64, height: f64) -> Result<Self> {
        if !(length > 0.0 && width > 0.0) {
            return Err(Error::InvalidObstacle(format!(
                "axis lengths must be positive, got {length} x {width}"
            )));
        }
        let a2 = (0.5 * length).powi(2);
        let b2 = (0.5 * width).powi(2);
        let (s, c) = rotation.sin_cos();
        let p11 = c * c * a2 + s * s * b2;
        let p22 = s * s * a2 + c * c * b2;
        let p12 = c * s * (a2 - b2);
        Self::new(center, [[p11, p12], [p12, p22]], height)
    }

    pub fn center(&self) -> Position {
        self.center
    }

    pub fn shape(&self) -> &Mat2 {
        &self.shape
    }

    pub fn inverse(&self) -> &Mat2 {
        &self.inverse
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// `(q - c)^T P^{-1} (q - c)`.
    pub fn margin(&self, q: Position) -> f64 {
        let e = q - self.center;
        e.dot(mat_vec(&self.inverse, e))
    }

    /// Gradient of [`Obstacle::margin`] with respect to `q`.
    pub fn margin_gradient(&self, q: Position) -> Position {
        mat_vec(&self.inverse, q - self.center) * 2.0
    }

    /// Whether the footprint-and-height cylinder contains the 3D point.
    pub fn contains(&self, q: Position, z: f64) -> bool {
        z >= 0.0 && z <= self.height && self.margin(q) <= 1.0
    }

    /// Exact test of the 3D segment `(p0, z0) -> (p1, z1)` against the cylinder.
    ///
    /// The planar projection enters the unit level set on an interval of the
    /// segment parameter; the segment is blocked iff its height at the lower
    /// end of that interval is within the cylinder.
    pub fn blocks_segment(&self, p0: Position, z0: f64, p1: Position, z1: f64) -> bool {
        let d = p1 - p0;
        let e = p0 - self.center;
        let pd = mat_vec(&self.inverse, d);
        let a = d.dot(pd);
        let b = e.dot(pd);
        let c = self.margin(p0) - 1.0;
        let (lo, hi) = if a <= f64::EPSILON * (1.0 + c.abs()) {
            if c > 0.0 {
                return false;
            }
            (0.0, 1.0)
        } else {
            let disc = b * b - a * c;
            if disc < 0.0 {
                return false;
            }
            let root = disc.sqrt();
            ((-b - root) / a, (-b + root) / a)
        };
        let lo = lo.max(0.0);
        let hi = hi.min(1.0);
        if lo > hi {
            return false;
        }
        let z_at = |t: f64| z0 + t * (z1 - z0);
        let z_min = z_at(lo).min(z_at(hi));
        let z_max = z_at(lo).max(z_at(hi));
        z_min <= self.height && z_max >= 0.0
    }
}

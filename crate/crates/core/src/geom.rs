//! Basic geometric primitives: points, balls, axis-aligned boxes and the
//! convex regions that norm estimation operates over.
//!
//! Dimension is a runtime quantity (experiments run in n = 2, 3, ...), so
//! points are plain `Vec<f64>` / `&[f64]` rather than fixed-size vectors.

use serde::{Deserialize, Serialize};

/// Euclidean norm of a vector.
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Squared Euclidean norm.
pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>()
}

/// Euclidean distance between two points.
pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// A closed Euclidean ball B(center, radius).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        assert!(radius > 0.0, "ball radius must be positive");
        Ball { center, radius }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist(&self.center, x) <= self.radius
    }

    /// Same center, radius scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Ball {
        Ball::new(self.center.clone(), self.radius * factor)
    }

    /// Projection of `x` onto the closed ball.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let d = dist(&self.center, x);
        if d <= self.radius {
            return x.to_vec();
        }
        let t = self.radius / d;
        self.center
            .iter()
            .zip(x)
            .map(|(c, v)| c + t * (v - c))
            .collect()
    }

    /// Smallest axis-aligned box containing the ball.
    pub fn bounding_box(&self) -> BoxRegion {
        BoxRegion {
            lo: self.center.iter().map(|c| c - self.radius).collect(),
            hi: self.center.iter().map(|c| c + self.radius).collect(),
        }
    }
}

/// A closed axis-aligned box given by per-axis bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(
            lo.iter().zip(&hi).all(|(a, b)| a <= b),
            "box bounds out of order"
        );
        BoxRegion { lo, hi }
    }

    /// Cube of side `side` centered at `center`.
    pub fn cube(center: &[f64], side: f64) -> Self {
        let h = side / 2.0;
        BoxRegion {
            lo: center.iter().map(|c| c - h).collect(),
            hi: center.iter().map(|c| c + h).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    pub fn diameter(&self) -> f64 {
        norm(&self.widths())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    /// Per-axis clamp of `x` into the box (the Euclidean projection).
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| v.clamp(*a, *b))
            .collect()
    }

    /// Largest coordinate magnitude reached on the box, per axis.
    pub fn abs_axis_max(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a.abs().max(b.abs()))
            .collect()
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(1 << n);
        for mask in 0..(1u32 << n) {
            let c: Vec<f64> = (0..n)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        self.hi[i]
                    } else {
                        self.lo[i]
                    }
                })
                .collect();
            out.push(c);
        }
        out
    }

    pub fn intersects_ball(&self, ball: &Ball) -> bool {
        let nearest = self.project(&ball.center);
        dist(&nearest, &ball.center) <= ball.radius
    }

    /// Distance from the box to a point (0 if inside).
    pub fn dist_to_point(&self, x: &[f64]) -> f64 {
        dist(&self.project(x), x)
    }
}

/// A convex query region for norm estimation: a ball, a box, or their
/// intersection (used when a lattice set is cut down to a half-ball domain).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Ball(Ball),
    Box(BoxRegion),
    /// Intersection of a box with a ball; assumed nonempty.
    BoxCapBall(BoxRegion, Ball),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Ball(b) => b.dim(),
            Region::Box(b) => b.dim(),
            Region::BoxCapBall(b, _) => b.dim(),
        }
    }

    pub fn bounding_box(&self) -> BoxRegion {
        match self {
            Region::Ball(b) => b.bounding_box(),
            Region::Box(b) => b.clone(),
            Region::BoxCapBall(bx, ball) => {
                let bb = ball.bounding_box();
                let lo: Vec<f64> = bx.lo.iter().zip(&bb.lo).map(|(a, b)| a.max(*b)).collect();
                let hi: Vec<f64> = bx.hi.iter().zip(&bb.hi).map(|(a, b)| a.min(*b)).collect();
                // Intersection assumed nonempty; collapse any inverted axis.
                let hi = lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| if b < *a { *a } else { b })
                    .collect();
                BoxRegion { lo, hi }
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball(b) => b.contains(x),
            Region::Box(b) => b.contains(x),
            Region::BoxCapBall(bx, ball) => bx.contains(x) && ball.contains(x),
        }
    }

    /// Euclidean projection of `x` onto the region.
    ///
    /// Balls and boxes project in closed form; the intersection uses
    /// Dykstra's alternating projections, which converge for convex sets.
    /// The result is guaranteed to lie in the region (final safeguard step).
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Region::Ball(b) => b.project(x),
            Region::Box(b) => b.project(x),
            Region::BoxCapBall(bx, ball) => {
                let mut y = x.to_vec();
                let n = y.len();
                let mut p = vec![0.0; n];
                let mut q = vec![0.0; n];
                for _ in 0..64 {
                    let yp: Vec<f64> = (0..n).map(|i| y[i] + p[i]).collect();
                    let ybox = bx.project(&yp);
                    for i in 0..n {
                        p[i] = yp[i] - ybox[i];
                    }
                    let yq: Vec<f64> = (0..n).map(|i| ybox[i] + q[i]).collect();
                    let ynew = ball.project(&yq);
                    for i in 0..n {
                        q[i] = yq[i] - ynew[i];
                    }
                    let moved = dist(&y, &ynew);
                    y = ynew;
                    if moved < 1e-15 * (1.0 + norm(&y)) {
                        break;
                    }
                }
                // Dykstra's limit lies in the intersection; after finitely
                // many steps y is in the ball but may sit a hair outside the
                // box. Clamp and rescale once so membership is exact.
                let y = bx.project(&y);
                ball.project(&y)
            }
        }
    }
}

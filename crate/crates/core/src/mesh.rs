use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_HALF_WIDTH: f64 = 1.0;
pub const DEFAULT_SPACING: f64 = 0.125;

/// Open square (-a, a)^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub half_width: f64,
}

impl Domain {
    pub fn new(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Config(format!(
                "domain half width must be positive and finite, got {half_width}"
            )));
        }
        Ok(Self { half_width })
    }

    pub fn side_length(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn area(&self) -> f64 {
        self.side_length() * self.side_length()
    }

    pub fn contains_interior(&self, p: [f64; 2]) -> bool {
        p[0].abs() < self.half_width && p[1].abs() < self.half_width
    }

    /// Distance from an interior point to the nearest boundary edge.
    pub fn boundary_clearance(&self, p: [f64; 2]) -> f64 {
        self.half_width - p[0].abs().max(p[1].abs())
    }
}

impl Default for Domain {
    fn default() -> Self {
        Self {
            half_width: DEFAULT_HALF_WIDTH,
        }
    }
}

/// Which edge of the square a boundary point sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    East,
    West,
    North,
    South,
}

const EDGE_TOL: f64 = 1e-9;

/// Classifies a boundary point; corners and off-boundary points are errors
/// (the outward normal is undefined at corners).
pub fn edge_of(domain: &Domain, p: [f64; 2]) -> Result<Edge> {
    let a = domain.half_width;
    let on_x = (p[0].abs() - a).abs() < EDGE_TOL;
    let on_y = (p[1].abs() - a).abs() < EDGE_TOL;
    if on_x && on_y {
        return Err(Error::Config(format!(
            "({}, {}) is a corner of the domain",
            p[0], p[1]
        )));
    }
    if on_x && p[1].abs() < a {
        return Ok(if p[0] > 0.0 { Edge::East } else { Edge::West });
    }
    if on_y && p[0].abs() < a {
        return Ok(if p[1] > 0.0 { Edge::North } else { Edge::South });
    }
    Err(Error::Config(format!(
        "({}, {}) is not on the domain boundary",
        p[0], p[1]
    )))
}

/// Regular interior grid of candidate source locations, row-major:
/// index k = iy * per_side + ix, coordinate -a + (i+1)*h.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub domain: Domain,
    pub spacing: f64,
    per_side: usize,
    nodes: Vec<[f64; 2]>,
}

impl Mesh {
    pub fn build(domain: Domain, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::Config(format!(
                "mesh spacing must be positive, got {spacing}"
            )));
        }
        let ratio = domain.side_length() / spacing;
        let cells = ratio.round();
        if (ratio - cells).abs() > 1e-9 || cells < 1.0 {
            return Err(Error::Config(format!(
                "mesh spacing {spacing} does not evenly divide the domain side {}",
                domain.side_length()
            )));
        }
        let per_side = cells as usize - 1;
        if per_side == 0 {
            return Err(Error::Config(format!(
                "mesh spacing {spacing} leaves no interior nodes"
            )));
        }
        let a = domain.half_width;
        let mut nodes = Vec::with_capacity(per_side * per_side);
        for iy in 0..per_side {
            for ix in 0..per_side {
                nodes.push([
                    -a + (ix as f64 + 1.0) * spacing,
                    -a + (iy as f64 + 1.0) * spacing,
                ]);
            }
        }
        Ok(Self {
            domain,
            spacing,
            per_side,
            nodes,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn per_side(&self) -> usize {
        self.per_side
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> [f64; 2] {
        self.nodes[k]
    }

    /// Exact lattice lookup; `None` when (x, y) is not a mesh node.
    pub fn index_of(&self, x: f64, y: f64) -> Option<usize> {
        let a = self.domain.half_width;
        let h = self.spacing;
        let fx = (x + a) / h - 1.0;
        let fy = (y + a) / h - 1.0;
        let ix = fx.round();
        let iy = fy.round();
        if (fx - ix).abs() > 1e-9 || (fy - iy).abs() > 1e-9 {
            return None;
        }
        if ix < 0.0 || iy < 0.0 {
            return None;
        }
        let (ix, iy) = (ix as usize, iy as usize);
        if ix >= self.per_side || iy >= self.per_side {
            return None;
        }
        Some(iy * self.per_side + ix)
    }

    /// Nearest mesh node to an arbitrary interior point.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let a = self.domain.half_width;
        let h = self.spacing;
        let clamp = |f: f64| (f.round().max(0.0) as usize).min(self.per_side - 1);
        let ix = clamp((x + a) / h - 1.0);
        let iy = clamp((y + a) / h - 1.0);
        iy * self.per_side + ix
    }
}

/// Boundary sensors plus observation instants; data vectors are ordered
/// sensor-major, then time.
#[derive(Debug, Clone)]
pub struct ObservationPlan {
    pub sensors: Vec<[f64; 2]>,
    pub times: Vec<f64>,
}

impl ObservationPlan {
    pub fn new(domain: &Domain, sensors: Vec<[f64; 2]>, times: Vec<f64>) -> Result<Self> {
        if sensors.is_empty() {
            return Err(Error::Config("at least one sensor is required".into()));
        }
        if times.is_empty() {
            return Err(Error::Config(
                "at least one observation time is required".into(),
            ));
        }
        for s in &sensors {
            edge_of(domain, *s)?;
        }
        for pair in times.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Config(
                    "observation times must be strictly increasing".into(),
                ));
            }
        }
        if times[0] <= 0.0 {
            return Err(Error::Config("observation times must be positive".into()));
        }
        Ok(Self { sensors, times })
    }

    /// `n` sensors equally spaced along the perimeter, starting at the
    /// midpoint of the east edge, counterclockwise.
    pub fn ring(domain: &Domain, n: usize, times: Vec<f64>) -> Result<Self> {
        Self::new(domain, sensor_ring(domain, n)?, times)
    }

    pub fn obs_count(&self) -> usize {
        self.sensors.len() * self.times.len()
    }
}

pub fn sensor_ring(domain: &Domain, n: usize) -> Result<Vec<[f64; 2]>> {
    if n == 0 {
        return Err(Error::Config("sensor count must be at least 1".into()));
    }
    let a = domain.half_width;
    let perimeter = 8.0 * a;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let s = perimeter * k as f64 / n as f64 / a; // arc length in units of a
        let p = if s < 1.0 {
            [a, s * a]
        } else if s < 3.0 {
            [a - (s - 1.0) * a, a]
        } else if s < 5.0 {
            [-a, a - (s - 3.0) * a]
        } else if s < 7.0 {
            [-a + (s - 5.0) * a, -a]
        } else {
            [a, -(8.0 - s) * a]
        };
        edge_of(domain, p).map_err(|_| {
            Error::Config(format!(
                "{n} equally spaced sensors would place one at a corner; choose a count that avoids corners"
            ))
        })?;
        out.push(p);
    }
    Ok(out)
}

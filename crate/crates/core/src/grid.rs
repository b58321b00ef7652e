//! Midpoint velocity grids.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Speeds on `[0, U]` sampled at cell midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedGrid {
    pub u_max: f64,
    pub dv: f64,
    pub nodes: Vec<f64>,
}

impl SpeedGrid {
    pub fn new(n: usize, u_max: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("speed grid needs n_s >= 2, got {n}")));
        }
        if !(u_max > 0.0) || !u_max.is_finite() {
            return Err(invalid(format!("maximal speed must be positive, got {u_max}")));
        }
        let dv = u_max / n as f64;
        let nodes = (0..n).map(|i| (i as f64 + 0.5) * dv).collect();
        Ok(Self { u_max, dv, nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Directions on the unit circle, angle nodes at `(j + 1/2) * 2pi / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    pub dtheta: f64,
    pub nodes: Vec<f64>,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl AngleGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(invalid(format!("angle grid needs n_theta >= 4, got {n}")));
        }
        let dtheta = 2.0 * PI / n as f64;
        let nodes: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * dtheta).collect();
        let cos = nodes.iter().map(|t| t.cos()).collect();
        let sin = nodes.iter().map(|t| t.sin()).collect();
        Ok(Self {
            dtheta,
            nodes,
            cos,
            sin,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Unit vector of node `j`.
    pub fn dir(&self, j: usize) -> [f64; 2] {
        [self.cos[j], self.sin[j]]
    }
}

/// Tensor product of a speed and an angle grid. Velocity arrays are stored
/// speed-major: entry `(i, j)` lives at `i * n_theta + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    pub speed: SpeedGrid,
    pub angle: AngleGrid,
}

impl VelocityGrid {
    pub fn new(n_s: usize, n_theta: usize, u_max: f64) -> Result<Self> {
        Ok(Self {
            speed: SpeedGrid::new(n_s, u_max)?,
            angle: AngleGrid::new(n_theta)?,
        })
    }

    pub fn n_s(&self) -> usize {
        self.speed.len()
    }

    pub fn n_theta(&self) -> usize {
        self.angle.len()
    }

    /// Total number of velocity nodes.
    pub fn len(&self) -> usize {
        self.n_s() * self.n_theta()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_theta() + j
    }

    /// Quadrature weight of one velocity node.
    pub fn cell(&self) -> f64 {
        self.speed.dv * self.angle.dtheta
    }

    /// Cartesian velocity of node `(i, j)`.
    pub fn velocity(&self, i: usize, j: usize) -> [f64; 2] {
        let v = self.speed.nodes[i];
        [v * self.angle.cos[j], v * self.angle.sin[j]]
    }

    /// Total mass of a velocity array.
    pub fn mass(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.cell()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_nodes() {
        let g = VelocityGrid::new(4, 8, 4.0).unwrap();
        assert_eq!(g.speed.nodes, vec![0.5, 1.5, 2.5, 3.5]);
        assert!((g.angle.nodes[0] - PI / 8.0).abs() < 1e-15);
        assert!((g.angle.nodes[7] - 15.0 * PI / 8.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(SpeedGrid::new(1, 1.0).is_err());
        assert!(AngleGrid::new(3).is_err());
        assert!(SpeedGrid::new(4, 0.0).is_err());
        assert!(SpeedGrid::new(4, f64::NAN).is_err());
    }
}

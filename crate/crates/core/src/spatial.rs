//! Uniform 2D cell grid and moments of cell fields.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tensor::{Mat2, Vec2};

/// Cell-centred grid on `[x0, x1] x [y0, y1]`. Fields are row-major `[ny][nx]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl SpatialGrid {
    pub fn new(nx: usize, ny: usize, x: [f64; 2], y: [f64; 2]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("spatial grid needs at least one cell per direction"));
        }
        if !(x[1] > x[0]) || !(y[1] > y[0]) {
            return Err(invalid("spatial extent must be a nonempty rectangle"));
        }
        Ok(Self {
            nx,
            ny,
            x0: x[0],
            x1: x[1],
            y0: y[0],
            y1: y[1],
        })
    }

    /// Window grid enlarged about its centre by `padding`, keeping the cell size.
    pub fn padded(nx: usize, ny: usize, x: [f64; 2], y: [f64; 2], padding: f64) -> Result<Self> {
        if !(padding >= 1.0) {
            return Err(invalid(format!("padding must be >= 1, got {padding}")));
        }
        let base = Self::new(nx, ny, x, y)?;
        if padding == 1.0 {
            return Ok(base);
        }
        let grow = |n: usize| {
            let m = (n as f64 * padding).round() as usize;
            // keep the parity so the window centre stays a cell face or centre as before
            if (m - n) % 2 == 1 { m + 1 } else { m }
        };
        let (mx, my) = (grow(nx), grow(ny));
        let (dx, dy) = (base.dx(), base.dy());
        let hx = 0.5 * (mx - nx) as f64 * dx;
        let hy = 0.5 * (my - ny) as f64 * dy;
        Self::new(mx, my, [x[0] - hx, x[1] + hx], [y[0] - hy, y[1] + hy])
    }

    pub fn dx(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y1 - self.y0) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self, ix: usize, iy: usize) -> Vec2 {
        [
            self.x0 + (ix as f64 + 0.5) * self.dx(),
            self.y0 + (iy as f64 + 0.5) * self.dy(),
        ]
    }

    /// Cell index containing `p`, if inside.
    pub fn locate(&self, p: Vec2) -> Option<usize> {
        let fx = (p[0] - self.x0) / self.dx();
        let fy = (p[1] - self.y0) / self.dy();
        if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.nx && iy < self.ny).then_some(iy * self.nx + ix)
    }

    /// Point values of `g` at the cell centres.
    pub fn sample<F: Fn(Vec2) -> f64>(&self, g: F) -> Vec<f64> {
        (0..self.ny)
            .flat_map(|iy| (0..self.nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| g(self.center(ix, iy)))
            .collect()
    }
}

/// Mass, centre of mass and covariance of a cell density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldMoments {
    pub mass: f64,
    pub center: Vec2,
    pub cov: Mat2,
}

impl FieldMoments {
    pub fn of(grid: &SpatialGrid, rho: &[f64]) -> Self {
        let a = grid.cell_area();
        let mut m = 0.0;
        let mut c = [0.0; 2];
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let r = rho[iy * grid.nx + ix];
                let p = grid.center(ix, iy);
                m += r;
                c[0] += r * p[0];
                c[1] += r * p[1];
            }
        }
        let c = [c[0] / m, c[1] / m];
        let mut cov = [[0.0; 2]; 2];
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let r = rho[iy * grid.nx + ix];
                let p = grid.center(ix, iy);
                let d = [p[0] - c[0], p[1] - c[1]];
                for u in 0..2 {
                    for v in 0..2 {
                        cov[u][v] += r * d[u] * d[v];
                    }
                }
            }
        }
        for row in cov.iter_mut() {
            for x in row.iter_mut() {
                *x /= m;
            }
        }
        Self {
            mass: m * a,
            center: c,
            cov,
        }
    }

    /// Principal variances, ascending, with the unit direction of the larger one.
    pub fn principal(&self) -> ([f64; 2], Vec2) {
        let e = crate::tensor::eig_sym(self.cov);
        let (a, b, c) = (self.cov[0][0], self.cov[0][1], self.cov[1][1]);
        let phi = 0.5 * (2.0 * b).atan2(a - c);
        (e, [phi.cos(), phi.sin()])
    }
}

/// Gaussian bump `r0 / (2 pi sigma2) exp(-|x - x0|^2 / (2 sigma2))`.
pub fn gaussian(r0: f64, sigma2: f64, x0: Vec2) -> impl Fn(Vec2) -> f64 {
    move |p| {
        let d2 = (p[0] - x0[0]).powi(2) + (p[1] - x0[1]).powi(2);
        r0 / (2.0 * std::f64::consts::PI * sigma2) * (-d2 / (2.0 * sigma2)).exp()
    }
}

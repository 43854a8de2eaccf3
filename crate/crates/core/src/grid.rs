//! Uniform rectangular mesh, Gauss-Legendre quadrature tables and double
//! cell averages. Everything downstream (reconstruction, fluxes, the model)
//! operates on these types.

use thiserror::Error;

/// Ghost layer depth on each side of the domain.
pub const GHOST: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("cell counts must be at least 5 to fit the reconstruction stencil, got {nx}x{ny}")]
    TooFewCells { nx: usize, ny: usize },
    #[error("domain extents must be positive (x length {x_len}, y range [{y0}, {y1}])")]
    BadExtent { x_len: f64, y0: f64, y1: f64 },
    #[error("non-finite value encountered at quadrature node ({x}, {y})")]
    NonFiniteSample { x: f64, y: f64 },
}

/// Uniform rectangular mesh over `[0, X] x [Y0, Y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_len: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

/// Build the mesh, rejecting extents or cell counts the stencil cannot handle.
pub fn build_grid(x_len: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<GridSpec, GridError> {
    if !(x_len > 0.0) || !(y1 > y0) {
        return Err(GridError::BadExtent { x_len, y0, y1 });
    }
    if nx < 5 || ny < 5 {
        return Err(GridError::TooFewCells { nx, ny });
    }
    Ok(GridSpec {
        x_len,
        y0,
        y1,
        nx,
        ny,
        dx: x_len / nx as f64,
        dy: (y1 - y0) / ny as f64,
    })
}

impl GridSpec {
    /// Center of cell `i` (ghost indices allowed).
    pub fn x_center(&self, i: isize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn y_center(&self, j: isize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.dy
    }

    /// Interface `x_{i-1/2}`; `i` runs from 0 (left boundary) to `nx` (right boundary).
    pub fn x_interface(&self, i: isize) -> f64 {
        i as f64 * self.dx
    }

    pub fn y_interface(&self, j: isize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }
}

/// Three-point Gauss-Legendre nodes/weights on `[-1/2, 1/2]` and the derived
/// five-point tensor rule for double averages. Node offsets are stored in
/// units of the cell width; physical coordinates are formed by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureTables {
    pub gl3_nodes: [f64; 3],
    pub gl3_weights: [f64; 3],
    pub t5_nodes: [f64; 5],
    pub t5_weights: [f64; 5],
}

pub fn make_quadrature() -> QuadratureTables {
    let s15 = 15.0_f64.sqrt();
    let w = [5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0];
    QuadratureTables {
        gl3_nodes: [-s15 / 10.0, 0.0, s15 / 10.0],
        gl3_weights: w,
        t5_nodes: [-s15 / 5.0, -s15 / 10.0, 0.0, s15 / 10.0, s15 / 5.0],
        t5_weights: [
            w[0] * w[0],
            2.0 * w[0] * w[1],
            2.0 * w[0] * w[2] + w[1] * w[1],
            2.0 * w[2] * w[1],
            w[2] * w[2],
        ],
    }
}

/// Double cell average of `f` over cell `(i, j)`: the 5x5 tensor quadrature
/// collapse of the nested average, exact for polynomials of degree <= 5 per
/// direction.
pub fn double_average<F>(
    f: F,
    i: isize,
    j: isize,
    grid: &GridSpec,
    q: &QuadratureTables,
) -> Result<f64, GridError>
where
    F: Fn(f64, f64) -> f64,
{
    let xc = grid.x_center(i);
    let yc = grid.y_center(j);
    let mut acc = 0.0;
    for (a, &ta) in q.t5_nodes.iter().enumerate() {
        let x = xc + ta * grid.dx;
        let mut row = 0.0;
        for (b, &tb) in q.t5_nodes.iter().enumerate() {
            let y = yc + tb * grid.dy;
            let v = f(x, y);
            if !v.is_finite() {
                return Err(GridError::NonFiniteSample { x, y });
            }
            row += q.t5_weights[b] * v;
        }
        acc += q.t5_weights[a] * row;
    }
    Ok(acc)
}

/// Per-cell double averages of one scalar unknown, padded with a two-deep
/// ghost frame (corners included).
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedField {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl AveragedField {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            data: vec![0.0; (nx + 2 * GHOST) * (ny + 2 * GHOST)],
        }
    }

    /// Interior and ghost cells filled with double averages of `f`.
    pub fn from_fn(
        grid: &GridSpec,
        q: &QuadratureTables,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, GridError> {
        let mut field = Self::zeros(grid.nx, grid.ny);
        let g = GHOST as isize;
        for i in -g..grid.nx as isize + g {
            for j in -g..grid.ny as isize + g {
                let v = double_average(&f, i, j, grid, q)?;
                field.set(i, j, v);
            }
        }
        Ok(field)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    fn idx(&self, i: isize, j: isize) -> usize {
        let g = GHOST as isize;
        debug_assert!(i >= -g && i < self.nx as isize + g);
        debug_assert!(j >= -g && j < self.ny as isize + g);
        ((i + g) as usize) * (self.ny + 2 * GHOST) + (j + g) as usize
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Raw padded storage, row-major with x as the slow index.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Wrap the ghost frame periodically in both directions, corners included.
    pub fn fill_ghosts_periodic(&mut self) {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let g = GHOST as isize;
        for i in -g..nx + g {
            for j in -g..ny + g {
                if i >= 0 && i < nx && j >= 0 && j < ny {
                    continue;
                }
                let v = self.get(i.rem_euclid(nx), j.rem_euclid(ny));
                self.set(i, j, v);
            }
        }
    }

    pub fn min_interior(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.nx as isize {
            for j in 0..self.ny as isize {
                m = m.min(self.get(i, j));
            }
        }
        m
    }

    pub fn max_interior(&self) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for i in 0..self.nx as isize {
            for j in 0..self.ny as isize {
                m = m.max(self.get(i, j));
            }
        }
        m
    }

    pub fn sum_interior(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.nx as isize {
            for j in 0..self.ny as isize {
                s += self.get(i, j);
            }
        }
        s
    }

    /// First non-finite interior cell, if any.
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        for i in 0..self.nx {
            for j in 0..self.ny {
                if !self.get(i as isize, j as isize).is_finite() {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

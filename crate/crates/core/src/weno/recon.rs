//! Dimension-by-dimension reconstruction of point values from double cell
//! averages: tangential de-averaging at the interior tensor nodes first, then
//! 1D evaluation along the remaining direction at face nodes, cell centers or
//! tensor nodes. Boundary-adjacent exterior states come straight from the
//! tangentially de-averaged ghost data (the ghost frame carries boundary
//! traces that are constant in the normal direction).

use super::{
    central_eval_with_deriv, substencil_coeffs, smoothness, CanonicalPoint, LinearWeightTable,
    Stencil5, WenoMode,
};
use crate::grid::{AveragedField, GridSpec};
use rayon::prelude::*;
use std::sync::LazyLock;

/// Which reconstructed value sets to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconTargets {
    /// Plus/minus states at the face quadrature nodes.
    pub fluxes: bool,
    /// Cell-center values at tangential tensor nodes (diffusion stencils).
    pub centers: bool,
    /// Values at the 5x5 interior tensor nodes (source terms).
    pub tensor: bool,
}

impl ReconTargets {
    pub const ALL: ReconTargets = ReconTargets { fluxes: true, centers: true, tensor: true };
    pub const DIFFUSION_AND_SOURCE: ReconTargets =
        ReconTargets { fluxes: false, centers: true, tensor: true };
    pub const SOURCE_ONLY: ReconTargets =
        ReconTargets { fluxes: false, centers: false, tensor: true };
}

/// How exterior-side states at the boundary interfaces (and diffusion values
/// at ghost-cell centers) are produced. Reconstruction stencils cannot be
/// centered on a ghost cell with a two-deep frame, so these values never come
/// from a stencil of their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExteriorRule {
    /// Tangentially de-averaged ghost data: the ghost frame carries boundary
    /// traces, constant in the normal direction.
    GhostTrace,
    /// Identify the two boundary interfaces: exterior states are copied from
    /// the interior-side reconstruction of the periodic partner, making the
    /// boundary fluxes telescope exactly.
    PeriodicWrap,
}

/// One evaluation point with everything the weighting needs precomputed.
#[derive(Debug, Clone, Copy)]
struct PointEval {
    t: f64,
    d: [f64; 3],
    negative: bool,
    /// split-construction quantities, valid when `negative`
    gp: [f64; 3],
    gm: [f64; 3],
    sp: f64,
    sm: f64,
}

impl PointEval {
    fn new(p: CanonicalPoint) -> Self {
        let e = LinearWeightTable::get().entry(p);
        let mut gp = [0.0; 3];
        let mut gm = [0.0; 3];
        for m in 0..3 {
            gp[m] = 0.5 * (e.d[m] + 3.0 * e.d[m].abs());
            gm[m] = gp[m] - e.d[m];
        }
        let sp: f64 = gp.iter().sum();
        let sm: f64 = gm.iter().sum();
        if e.any_negative {
            for m in 0..3 {
                gp[m] /= sp;
                gm[m] /= sm;
            }
        }
        PointEval { t: e.offset, d: e.d, negative: e.any_negative, gp, gm, sp, sm }
    }
}

struct PointSets {
    /// face nodes seen from the left cell: t = 1/2 + gl3 node
    right: [PointEval; 3],
    /// face nodes seen from the right cell: t = -1/2 + gl3 node
    left: [PointEval; 3],
    /// interior tensor nodes
    tensor: [PointEval; 5],
    center: PointEval,
}

static POINTS: LazyLock<PointSets> = LazyLock::new(|| PointSets {
    right: [
        PointEval::new(CanonicalPoint::RightInner),
        PointEval::new(CanonicalPoint::RightFace),
        PointEval::new(CanonicalPoint::RightOuter),
    ],
    left: [
        PointEval::new(CanonicalPoint::LeftOuter),
        PointEval::new(CanonicalPoint::LeftFace),
        PointEval::new(CanonicalPoint::LeftInner),
    ],
    tensor: [
        PointEval::new(CanonicalPoint::Interior(0)),
        PointEval::new(CanonicalPoint::Interior(1)),
        PointEval::new(CanonicalPoint::Interior(2)),
        PointEval::new(CanonicalPoint::Interior(3)),
        PointEval::new(CanonicalPoint::Interior(4)),
    ],
    center: PointEval::new(CanonicalPoint::Interior(2)),
});

/// Per-stencil state shared by all point evaluations on that stencil.
struct Prepared {
    c: [[f64; 3]; 3],
    inv: [f64; 3],
    linear: bool,
}

impl Prepared {
    #[inline]
    fn new(s: &[f64; 5], eps: f64, linear: bool) -> Self {
        let st = Stencil5(*s);
        let c = substencil_coeffs(&st);
        let inv = if linear {
            [0.0; 3]
        } else {
            let b = smoothness(&st).0;
            [
                1.0 / ((b[0] + eps) * (b[0] + eps)),
                1.0 / ((b[1] + eps) * (b[1] + eps)),
                1.0 / ((b[2] + eps) * (b[2] + eps)),
            ]
        };
        Prepared { c, inv, linear }
    }

    #[inline]
    fn eval(&self, p: &PointEval) -> f64 {
        let t = p.t;
        let v = [
            self.c[0][0] + t * (self.c[0][1] + t * self.c[0][2]),
            self.c[1][0] + t * (self.c[1][1] + t * self.c[1][2]),
            self.c[2][0] + t * (self.c[2][1] + t * self.c[2][2]),
        ];
        if self.linear {
            return p.d[0] * v[0] + p.d[1] * v[1] + p.d[2] * v[2];
        }
        if !p.negative {
            let w = [p.d[0] * self.inv[0], p.d[1] * self.inv[1], p.d[2] * self.inv[2]];
            let s = w[0] + w[1] + w[2];
            (w[0] * v[0] + w[1] * v[1] + w[2] * v[2]) / s
        } else {
            let wp = [p.gp[0] * self.inv[0], p.gp[1] * self.inv[1], p.gp[2] * self.inv[2]];
            let wm = [p.gm[0] * self.inv[0], p.gm[1] * self.inv[1], p.gm[2] * self.inv[2]];
            let tp = wp[0] + wp[1] + wp[2];
            let tm = wm[0] + wm[1] + wm[2];
            let cp = p.sp / tp;
            let cm = p.sm / tm;
            (cp * wp[0] - cm * wm[0]) * v[0]
                + (cp * wp[1] - cm * wm[1]) * v[1]
                + (cp * wp[2] - cm * wm[2]) * v[2]
        }
    }
}

/// Reconstructed point values of one field. Layouts are chosen so each
/// parallel work item owns a contiguous chunk:
/// - face states `x_minus`/`x_plus`: `((j*(nx+1) + k)*3 + beta)*5 + alpha`,
///   interface `k` at `x_{k-1/2}`, `beta` the face Gauss node, `alpha` the
///   tangential tensor node;
/// - face states `y_minus`/`y_plus`: `((i*(ny+1) + k)*3 + beta)*5 + alpha`;
/// - `center_x`: `((i+1)*ny + j)*5 + alpha` for column `i` in `-1..=nx`;
/// - `center_y`: `((j+1)*nx + i)*5 + alpha` for row `j` in `-1..=ny`;
/// - `tensor`: `((i*ny + j)*5 + alpha)*5 + beta`.
#[derive(Debug, Default, Clone)]
pub struct ReconBundle {
    nx: usize,
    ny: usize,
    py: Vec<f64>,
    px: Vec<f64>,
    pub x_minus: Vec<f64>,
    pub x_plus: Vec<f64>,
    pub y_minus: Vec<f64>,
    pub y_plus: Vec<f64>,
    pub center_x: Vec<f64>,
    pub center_y: Vec<f64>,
    pub tensor: Vec<f64>,
    theta: Vec<f64>,
}

impl ReconBundle {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn xm(&self, j: usize, k: usize, beta: usize, alpha: usize) -> f64 {
        self.x_minus[((j * (self.nx + 1) + k) * 3 + beta) * 5 + alpha]
    }

    #[inline]
    pub fn xp(&self, j: usize, k: usize, beta: usize, alpha: usize) -> f64 {
        self.x_plus[((j * (self.nx + 1) + k) * 3 + beta) * 5 + alpha]
    }

    #[inline]
    pub fn ym(&self, i: usize, k: usize, beta: usize, alpha: usize) -> f64 {
        self.y_minus[((i * (self.ny + 1) + k) * 3 + beta) * 5 + alpha]
    }

    #[inline]
    pub fn yp(&self, i: usize, k: usize, beta: usize, alpha: usize) -> f64 {
        self.y_plus[((i * (self.ny + 1) + k) * 3 + beta) * 5 + alpha]
    }

    /// `u(x_i, y~_j^alpha)`, `i` in `-1..=nx`.
    #[inline]
    pub fn cx(&self, i: isize, j: usize, alpha: usize) -> f64 {
        self.center_x[(((i + 1) as usize) * self.ny + j) * 5 + alpha]
    }

    /// `u(x~_i^alpha, y_j)`, `j` in `-1..=ny`.
    #[inline]
    pub fn cy(&self, j: isize, i: usize, alpha: usize) -> f64 {
        self.center_y[(((j + 1) as usize) * self.nx + i) * 5 + alpha]
    }

    /// `u(x~_i^alpha, y~_j^beta)`.
    #[inline]
    pub fn tn(&self, i: usize, j: usize, alpha: usize, beta: usize) -> f64 {
        self.tensor[((i * self.ny + j) * 5 + alpha) * 5 + beta]
    }
}

fn resize(buf: &mut Vec<f64>, n: usize) {
    buf.clear();
    buf.resize(n, 0.0);
}

/// Run the reconstruction passes for `field` into `bundle` (buffers are
/// reused across calls). Ghost layers must be populated.
pub fn reconstruct_into(
    bundle: &mut ReconBundle,
    field: &AveragedField,
    eps: f64,
    mode: WenoMode,
    limiter: bool,
    targets: ReconTargets,
    exterior: ExteriorRule,
) {
    let nx = field.nx();
    let ny = field.ny();
    bundle.nx = nx;
    bundle.ny = ny;
    let linear = mode == WenoMode::Linear;
    let pts = &*POINTS;

    let need_py = targets.fluxes || targets.centers;
    let need_px = targets.fluxes || targets.centers || targets.tensor;

    // -- tangential pass in y: slots 0..4 tensor nodes, slot 5 center
    if need_py {
        resize(&mut bundle.py, (nx + 4) * ny * 6);
        bundle.py.par_chunks_mut(ny * 6).enumerate().for_each(|(col, out)| {
            let i = col as isize - 2;
            for j in 0..ny {
                let jj = j as isize;
                let s = [
                    field.get(i, jj - 2),
                    field.get(i, jj - 1),
                    field.get(i, jj),
                    field.get(i, jj + 1),
                    field.get(i, jj + 2),
                ];
                let prep = Prepared::new(&s, eps, linear);
                for (slot, p) in pts.tensor.iter().enumerate() {
                    out[j * 6 + slot] = prep.eval(p);
                }
                out[j * 6 + 5] = prep.eval(&pts.center);
            }
        });
    }

    // -- tangential pass in x
    if need_px {
        resize(&mut bundle.px, nx * (ny + 4) * 6);
        bundle.px.par_chunks_mut((ny + 4) * 6).enumerate().for_each(|(col, out)| {
            let i = col as isize;
            for row in 0..ny + 4 {
                let j = row as isize - 2;
                let s = [
                    field.get(i - 2, j),
                    field.get(i - 1, j),
                    field.get(i, j),
                    field.get(i + 1, j),
                    field.get(i + 2, j),
                ];
                let prep = Prepared::new(&s, eps, linear);
                for (slot, p) in pts.tensor.iter().enumerate() {
                    out[row * 6 + slot] = prep.eval(p);
                }
                out[row * 6 + 5] = prep.eval(&pts.center);
            }
        });
    }

    let py_at = |i: isize, j: usize, slot: usize| -> f64 {
        bundle.py[(((i + 2) as usize) * ny + j) * 6 + slot]
    };
    let px_at = |i: usize, j: isize, slot: usize| -> f64 {
        bundle.px[(i * (ny + 4) + (j + 2) as usize) * 6 + slot]
    };

    // -- face states at x-interfaces, from the y de-averages
    if targets.fluxes {
        resize(&mut bundle.x_minus, ny * (nx + 1) * 15);
        resize(&mut bundle.x_plus, ny * (nx + 1) * 15);
        let py = &bundle.py;
        bundle
            .x_minus
            .par_chunks_mut((nx + 1) * 15)
            .zip(bundle.x_plus.par_chunks_mut((nx + 1) * 15))
            .enumerate()
            .for_each(|(j, (xm, xp))| {
                let pyv = |i: isize, slot: usize| py[(((i + 2) as usize) * ny + j) * 6 + slot];
                for alpha in 0..5 {
                    for i in 0..nx {
                        let ii = i as isize;
                        let s = [
                            pyv(ii - 2, alpha),
                            pyv(ii - 1, alpha),
                            pyv(ii, alpha),
                            pyv(ii + 1, alpha),
                            pyv(ii + 2, alpha),
                        ];
                        let prep = Prepared::new(&s, eps, linear);
                        for beta in 0..3 {
                            // minus state of the interface on this cell's right
                            xm[((i + 1) * 3 + beta) * 5 + alpha] = prep.eval(&pts.right[beta]);
                            // plus state of the interface on this cell's left
                            xp[(i * 3 + beta) * 5 + alpha] = prep.eval(&pts.left[beta]);
                        }
                    }
                    if exterior == ExteriorRule::GhostTrace {
                        for beta in 0..3 {
                            xm[(beta) * 5 + alpha] = pyv(-1, alpha);
                            xp[(nx * 3 + beta) * 5 + alpha] = pyv(nx as isize, alpha);
                        }
                    }
                }
            });
    }

    // -- face states at y-interfaces
    if targets.fluxes {
        resize(&mut bundle.y_minus, nx * (ny + 1) * 15);
        resize(&mut bundle.y_plus, nx * (ny + 1) * 15);
        let px = &bundle.px;
        bundle
            .y_minus
            .par_chunks_mut((ny + 1) * 15)
            .zip(bundle.y_plus.par_chunks_mut((ny + 1) * 15))
            .enumerate()
            .for_each(|(i, (ym, yp))| {
                let pxv = |j: isize, slot: usize| px[(i * (ny + 4) + (j + 2) as usize) * 6 + slot];
                for alpha in 0..5 {
                    for j in 0..ny {
                        let jj = j as isize;
                        let s = [
                            pxv(jj - 2, alpha),
                            pxv(jj - 1, alpha),
                            pxv(jj, alpha),
                            pxv(jj + 1, alpha),
                            pxv(jj + 2, alpha),
                        ];
                        let prep = Prepared::new(&s, eps, linear);
                        for beta in 0..3 {
                            ym[((j + 1) * 3 + beta) * 5 + alpha] = prep.eval(&pts.right[beta]);
                            yp[(j * 3 + beta) * 5 + alpha] = prep.eval(&pts.left[beta]);
                        }
                    }
                    if exterior == ExteriorRule::GhostTrace {
                        for beta in 0..3 {
                            ym[(beta) * 5 + alpha] = pxv(-1, alpha);
                            yp[(ny * 3 + beta) * 5 + alpha] = pxv(ny as isize, alpha);
                        }
                    }
                }
            });
    }

    // -- interior tensor nodes
    if targets.tensor {
        resize(&mut bundle.tensor, nx * ny * 25);
        let px = &bundle.px;
        bundle.tensor.par_chunks_mut(ny * 25).enumerate().for_each(|(i, tn)| {
            let pxv = |j: isize, slot: usize| px[(i * (ny + 4) + (j + 2) as usize) * 6 + slot];
            for alpha in 0..5 {
                for j in 0..ny {
                    let jj = j as isize;
                    let s = [
                        pxv(jj - 2, alpha),
                        pxv(jj - 1, alpha),
                        pxv(jj, alpha),
                        pxv(jj + 1, alpha),
                        pxv(jj + 2, alpha),
                    ];
                    let prep = Prepared::new(&s, eps, linear);
                    for (beta, p) in pts.tensor.iter().enumerate() {
                        tn[(j * 5 + alpha) * 5 + beta] = prep.eval(p);
                    }
                }
            }
        });
    }

    // -- cell-center lines for the diffusion stencils
    if targets.centers {
        resize(&mut bundle.center_x, (nx + 2) * ny * 5);
        resize(&mut bundle.center_y, (ny + 2) * nx * 5);

        // interior columns from the x-center slot of px, de-averaged in y
        {
            let px = &bundle.px;
            bundle.center_x[ny * 5..(nx + 1) * ny * 5]
                .par_chunks_mut(ny * 5)
                .enumerate()
                .for_each(|(i, cx)| {
                    let pxv = |j: isize| px[(i * (ny + 4) + (j + 2) as usize) * 6 + 5];
                    for j in 0..ny {
                        let jj = j as isize;
                        let s = [pxv(jj - 2), pxv(jj - 1), pxv(jj), pxv(jj + 1), pxv(jj + 2)];
                        let prep = Prepared::new(&s, eps, linear);
                        for (alpha, p) in pts.tensor.iter().enumerate() {
                            cx[j * 5 + alpha] = prep.eval(p);
                        }
                    }
                });
        }
        // interior rows from the y-center slot of py, de-averaged in x
        {
            let py = &bundle.py;
            bundle.center_y[nx * 5..(ny + 1) * nx * 5]
                .par_chunks_mut(nx * 5)
                .enumerate()
                .for_each(|(j, cy)| {
                    let pyv = |i: isize| py[(((i + 2) as usize) * ny + j) * 6 + 5];
                    for i in 0..nx {
                        let ii = i as isize;
                        let s = [pyv(ii - 2), pyv(ii - 1), pyv(ii), pyv(ii + 1), pyv(ii + 2)];
                        let prep = Prepared::new(&s, eps, linear);
                        for (alpha, p) in pts.tensor.iter().enumerate() {
                            cy[i * 5 + alpha] = prep.eval(p);
                        }
                    }
                });
        }
        // ghost column/row values
        if exterior == ExteriorRule::GhostTrace {
            for j in 0..ny {
                for alpha in 0..5 {
                    bundle.center_x[(0 * ny + j) * 5 + alpha] = py_at(-1, j, alpha);
                    bundle.center_x[((nx + 1) * ny + j) * 5 + alpha] = py_at(nx as isize, j, alpha);
                }
            }
            for i in 0..nx {
                for alpha in 0..5 {
                    bundle.center_y[(0 * nx + i) * 5 + alpha] = px_at(i, -1, alpha);
                    bundle.center_y[((ny + 1) * nx + i) * 5 + alpha] = px_at(i, ny as isize, alpha);
                }
            }
        }
    }

    if limiter {
        apply_limiter(bundle, field, targets);
    }

    // identify the boundary interfaces after limiting, so both copies carry
    // the owner's scaling
    if exterior == ExteriorRule::PeriodicWrap {
        if targets.fluxes {
            for j in 0..ny {
                for w in 0..15 {
                    bundle.x_minus[(j * (nx + 1)) * 15 + w] =
                        bundle.x_minus[(j * (nx + 1) + nx) * 15 + w];
                    bundle.x_plus[(j * (nx + 1) + nx) * 15 + w] =
                        bundle.x_plus[(j * (nx + 1)) * 15 + w];
                }
            }
            for i in 0..nx {
                for w in 0..15 {
                    bundle.y_minus[(i * (ny + 1)) * 15 + w] =
                        bundle.y_minus[(i * (ny + 1) + ny) * 15 + w];
                    bundle.y_plus[(i * (ny + 1) + ny) * 15 + w] =
                        bundle.y_plus[(i * (ny + 1)) * 15 + w];
                }
            }
        }
        if targets.centers {
            for j in 0..ny {
                for alpha in 0..5 {
                    bundle.center_x[(0 * ny + j) * 5 + alpha] =
                        bundle.center_x[(nx * ny + j) * 5 + alpha];
                    bundle.center_x[((nx + 1) * ny + j) * 5 + alpha] =
                        bundle.center_x[(ny + j) * 5 + alpha];
                }
            }
            for i in 0..nx {
                for alpha in 0..5 {
                    bundle.center_y[(0 * nx + i) * 5 + alpha] =
                        bundle.center_y[((ny - 1 + 1) * nx + i) * 5 + alpha];
                    bundle.center_y[((ny + 1) * nx + i) * 5 + alpha] =
                        bundle.center_y[(nx + i) * 5 + alpha];
                }
            }
        }
    }
}

/// Per-cell scaling limiter over every point value the cell owns.
fn apply_limiter(bundle: &mut ReconBundle, field: &AveragedField, targets: ReconTargets) {
    let nx = bundle.nx;
    let ny = bundle.ny;
    resize(&mut bundle.theta, nx * ny);
    let b = &*bundle;
    let theta: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|cell| {
            let i = cell / ny;
            let j = cell % ny;
            let avg = field.get(i as isize, j as isize);
            let mut min = f64::INFINITY;
            if targets.fluxes {
                for beta in 0..3 {
                    for alpha in 0..5 {
                        min = min.min(b.xm(j, i + 1, beta, alpha));
                        min = min.min(b.xp(j, i, beta, alpha));
                        min = min.min(b.ym(i, j + 1, beta, alpha));
                        min = min.min(b.yp(i, j, beta, alpha));
                    }
                }
            }
            if targets.tensor {
                for alpha in 0..5 {
                    for beta in 0..5 {
                        min = min.min(b.tn(i, j, alpha, beta));
                    }
                }
            }
            if targets.centers {
                for alpha in 0..5 {
                    min = min.min(b.cx(i as isize, j, alpha));
                    min = min.min(b.cy(j as isize, i, alpha));
                }
            }
            if min >= 0.0 || avg < 0.0 {
                1.0
            } else {
                (avg / (avg - min)).min(1.0)
            }
        })
        .collect();
    bundle.theta = theta;

    let scale = |v: &mut f64, avg: f64, t: f64| *v = avg + t * (*v - avg);

    if targets.fluxes {
        let theta = &bundle.theta;
        bundle
            .x_minus
            .par_chunks_mut((nx + 1) * 15)
            .zip(bundle.x_plus.par_chunks_mut((nx + 1) * 15))
            .enumerate()
            .for_each(|(j, (xm, xp))| {
                for i in 0..nx {
                    let t = theta[i * ny + j];
                    if t == 1.0 {
                        continue;
                    }
                    let avg = field.get(i as isize, j as isize);
                    for w in &mut xm[(i + 1) * 15..(i + 2) * 15] {
                        scale(w, avg, t);
                    }
                    for w in &mut xp[i * 15..(i + 1) * 15] {
                        scale(w, avg, t);
                    }
                }
            });
        let theta = &bundle.theta;
        bundle
            .y_minus
            .par_chunks_mut((ny + 1) * 15)
            .zip(bundle.y_plus.par_chunks_mut((ny + 1) * 15))
            .enumerate()
            .for_each(|(i, (ym, yp))| {
                for j in 0..ny {
                    let t = theta[i * ny + j];
                    if t == 1.0 {
                        continue;
                    }
                    let avg = field.get(i as isize, j as isize);
                    for w in &mut ym[(j + 1) * 15..(j + 2) * 15] {
                        scale(w, avg, t);
                    }
                    for w in &mut yp[j * 15..(j + 1) * 15] {
                        scale(w, avg, t);
                    }
                }
            });
    }
    if targets.tensor {
        let theta = &bundle.theta;
        bundle.tensor.par_chunks_mut(ny * 25).enumerate().for_each(|(i, tn)| {
            for j in 0..ny {
                let t = theta[i * ny + j];
                if t == 1.0 {
                    continue;
                }
                let avg = field.get(i as isize, j as isize);
                for w in &mut tn[j * 25..(j + 1) * 25] {
                    scale(w, avg, t);
                }
            }
        });
    }
    if targets.centers {
        let theta = &bundle.theta;
        bundle.center_x[ny * 5..(nx + 1) * ny * 5]
            .par_chunks_mut(ny * 5)
            .enumerate()
            .for_each(|(i, cx)| {
                for j in 0..ny {
                    let t = theta[i * ny + j];
                    if t == 1.0 {
                        continue;
                    }
                    let avg = field.get(i as isize, j as isize);
                    for w in &mut cx[j * 5..(j + 1) * 5] {
                        scale(w, avg, t);
                    }
                }
            });
        let theta = &bundle.theta;
        bundle.center_y[nx * 5..(ny + 1) * nx * 5]
            .par_chunks_mut(nx * 5)
            .enumerate()
            .for_each(|(j, cy)| {
                for i in 0..nx {
                    let t = theta[i * ny + j];
                    if t == 1.0 {
                        continue;
                    }
                    let avg = field.get(i as isize, j as isize);
                    for w in &mut cy[i * 5..(i + 1) * 5] {
                        scale(w, avg, t);
                    }
                }
            });
    }
}

/// Point values and one-sided-free gradients of a smooth coefficient field at
/// the face quadrature nodes, from the linear (central degree-4) polynomial.
/// Layouts match the face-state arrays of [`ReconBundle`]. Each interface is
/// evaluated from its adjacent interior cell on the left (the right cell at
/// the left boundary).
#[derive(Debug, Default, Clone)]
pub struct FaceCoefficientSamples {
    nx: usize,
    ny: usize,
    pub x_val: Vec<f64>,
    pub x_grad: Vec<f64>,
    pub y_val: Vec<f64>,
    pub y_grad: Vec<f64>,
    py_lin: Vec<f64>,
    px_lin: Vec<f64>,
}

impl FaceCoefficientSamples {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn xv(&self, j: usize, k: usize, beta: usize, alpha: usize) -> f64 {
        self.x_val[((j * (self.nx + 1) + k) * 3 + beta) * 5 + alpha]
    }

    #[inline]
    pub fn xg(&self, j: usize, k: usize, beta: usize, alpha: usize) -> f64 {
        self.x_grad[((j * (self.nx + 1) + k) * 3 + beta) * 5 + alpha]
    }

    #[inline]
    pub fn yv(&self, i: usize, k: usize, beta: usize, alpha: usize) -> f64 {
        self.y_val[((i * (self.ny + 1) + k) * 3 + beta) * 5 + alpha]
    }

    #[inline]
    pub fn yg(&self, i: usize, k: usize, beta: usize, alpha: usize) -> f64 {
        self.y_grad[((i * (self.ny + 1) + k) * 3 + beta) * 5 + alpha]
    }
}

pub fn face_values_and_gradients(
    out: &mut FaceCoefficientSamples,
    field: &AveragedField,
    grid: &GridSpec,
) {
    let nx = field.nx();
    let ny = field.ny();
    out.nx = nx;
    out.ny = ny;
    let pts = &*POINTS;
    let gl3: [f64; 3] = [pts.right[0].t - 0.5, 0.0, pts.right[2].t - 0.5];

    // linear tangential de-averages at the tensor nodes
    resize(&mut out.py_lin, (nx + 4) * ny * 5);
    out.py_lin.par_chunks_mut(ny * 5).enumerate().for_each(|(col, o)| {
        let i = col as isize - 2;
        for j in 0..ny {
            let jj = j as isize;
            let s = Stencil5([
                field.get(i, jj - 2),
                field.get(i, jj - 1),
                field.get(i, jj),
                field.get(i, jj + 1),
                field.get(i, jj + 2),
            ]);
            for (slot, p) in pts.tensor.iter().enumerate() {
                o[j * 5 + slot] = central_eval_with_deriv(&s, p.t).0;
            }
        }
    });
    resize(&mut out.px_lin, nx * (ny + 4) * 5);
    out.px_lin.par_chunks_mut((ny + 4) * 5).enumerate().for_each(|(col, o)| {
        let i = col as isize;
        for row in 0..ny + 4 {
            let j = row as isize - 2;
            let s = Stencil5([
                field.get(i - 2, j),
                field.get(i - 1, j),
                field.get(i, j),
                field.get(i + 1, j),
                field.get(i + 2, j),
            ]);
            for (slot, p) in pts.tensor.iter().enumerate() {
                o[row * 5 + slot] = central_eval_with_deriv(&s, p.t).0;
            }
        }
    });

    resize(&mut out.x_val, ny * (nx + 1) * 15);
    resize(&mut out.x_grad, ny * (nx + 1) * 15);
    {
        let py = &out.py_lin;
        let inv_dx = 1.0 / grid.dx;
        out.x_val
            .par_chunks_mut((nx + 1) * 15)
            .zip(out.x_grad.par_chunks_mut((nx + 1) * 15))
            .enumerate()
            .for_each(|(j, (xv, xg))| {
                let pyv = |i: isize, slot: usize| py[(((i + 2) as usize) * ny + j) * 5 + slot];
                for alpha in 0..5 {
                    for k in 0..=nx {
                        // evaluate from the adjacent interior cell
                        let c = (k as isize - 1).clamp(0, nx as isize - 1);
                        let s = Stencil5([
                            pyv(c - 2, alpha),
                            pyv(c - 1, alpha),
                            pyv(c, alpha),
                            pyv(c + 1, alpha),
                            pyv(c + 2, alpha),
                        ]);
                        let t0 = (k as isize - c) as f64 - 0.5;
                        for beta in 0..3 {
                            let (v, dv) = central_eval_with_deriv(&s, t0 + gl3[beta]);
                            xv[(k * 3 + beta) * 5 + alpha] = v;
                            xg[(k * 3 + beta) * 5 + alpha] = dv * inv_dx;
                        }
                    }
                }
            });
    }

    resize(&mut out.y_val, nx * (ny + 1) * 15);
    resize(&mut out.y_grad, nx * (ny + 1) * 15);
    {
        let px = &out.px_lin;
        let inv_dy = 1.0 / grid.dy;
        out.y_val
            .par_chunks_mut((ny + 1) * 15)
            .zip(out.y_grad.par_chunks_mut((ny + 1) * 15))
            .enumerate()
            .for_each(|(i, (yv, yg))| {
                let pxv = |j: isize, slot: usize| px[(i * (ny + 4) + (j + 2) as usize) * 5 + slot];
                for alpha in 0..5 {
                    for k in 0..=ny {
                        let c = (k as isize - 1).clamp(0, ny as isize - 1);
                        let s = Stencil5([
                            pxv(c - 2, alpha),
                            pxv(c - 1, alpha),
                            pxv(c, alpha),
                            pxv(c + 1, alpha),
                            pxv(c + 2, alpha),
                        ]);
                        let t0 = (k as isize - c) as f64 - 0.5;
                        for beta in 0..3 {
                            let (v, dv) = central_eval_with_deriv(&s, t0 + gl3[beta]);
                            yv[(k * 3 + beta) * 5 + alpha] = v;
                            yg[(k * 3 + beta) * 5 + alpha] = dv * inv_dy;
                        }
                    }
                }
            });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, make_quadrature};
    use crate::weno::WENO_EPS_DEFAULT;

    fn max_err_interior(
        b: &ReconBundle,
        g: &crate::grid::GridSpec,
        f: impl Fn(f64, f64) -> f64,
    ) -> f64 {
        let q = make_quadrature();
        let s15 = 15.0_f64.sqrt();
        let gl3 = [-s15 / 10.0, 0.0, s15 / 10.0];
        let mut e = 0.0_f64;
        let (nx, ny) = (g.nx, g.ny);
        for j in 0..ny {
            for alpha in 0..5 {
                let ya = g.y_center(j as isize) + q.t5_nodes[alpha] * g.dy;
                for k in 0..=nx {
                    let xk = g.x_interface(k as isize);
                    for beta in 0..3 {
                        let x = xk + gl3[beta] * g.dx;
                        if k >= 1 {
                            e = e.max((b.xm(j, k, beta, alpha) - f(x, ya)).abs());
                        }
                        if k < nx {
                            e = e.max((b.xp(j, k, beta, alpha) - f(x, ya)).abs());
                        }
                    }
                }
            }
        }
        for i in 0..nx {
            for alpha in 0..5 {
                let xa = g.x_center(i as isize) + q.t5_nodes[alpha] * g.dx;
                for k in 0..=ny {
                    let yk = g.y_interface(k as isize);
                    for beta in 0..3 {
                        let y = yk + gl3[beta] * g.dy;
                        if k >= 1 {
                            e = e.max((b.ym(i, k, beta, alpha) - f(xa, y)).abs());
                        }
                        if k < ny {
                            e = e.max((b.yp(i, k, beta, alpha) - f(xa, y)).abs());
                        }
                    }
                }
            }
        }
        for i in 0..nx {
            for j in 0..ny {
                let xc = g.x_center(i as isize);
                let yc = g.y_center(j as isize);
                for alpha in 0..5 {
                    e = e.max(
                        (b.cx(i as isize, j, alpha)
                            - f(xc, yc + q.t5_nodes[alpha] * g.dy))
                        .abs(),
                    );
                    e = e.max(
                        (b.cy(j as isize, i, alpha)
                            - f(xc + q.t5_nodes[alpha] * g.dx, yc))
                        .abs(),
                    );
                    for beta in 0..5 {
                        e = e.max(
                            (b.tn(i, j, alpha, beta)
                                - f(xc + q.t5_nodes[alpha] * g.dx, yc + q.t5_nodes[beta] * g.dy))
                            .abs(),
                        );
                    }
                }
            }
        }
        e
    }

    #[test]
    fn constant_field_reconstructs_to_constant() {
        let g = build_grid(1.0, 0.0, 1.0, 8, 6).unwrap();
        let q = make_quadrature();
        let f = crate::grid::AveragedField::from_fn(&g, &q, |_, _| 4.25).unwrap();
        let mut b = ReconBundle::new();
        reconstruct_into(&mut b, &f, WENO_EPS_DEFAULT, WenoMode::Nonlinear, false, ReconTargets::ALL, ExteriorRule::GhostTrace);
        // include the boundary traces here: constants survive them too
        let e = max_err_interior(&b, &g, |_, _| 4.25);
        assert!(e < 1e-13, "max error {e}");
        for k in 0..=g.nx {
            assert!((b.xm(0, k, 1, 2) - 4.25).abs() < 1e-13);
            assert!((b.xp(0, k, 1, 2) - 4.25).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_field_exact_at_interfaces() {
        let g = build_grid(2.0, -1.0, 1.0, 9, 7).unwrap();
        let q = make_quadrature();
        let f = crate::grid::AveragedField::from_fn(&g, &q, |x, _| 3.0 * x - 1.0).unwrap();
        let mut b = ReconBundle::new();
        reconstruct_into(&mut b, &f, WENO_EPS_DEFAULT, WenoMode::Nonlinear, false, ReconTargets::ALL, ExteriorRule::GhostTrace);
        let e = max_err_interior(&b, &g, |x, _| 3.0 * x - 1.0);
        assert!(e < 1e-12, "max error {e}");
    }

    #[test]
    fn smooth_field_converges_at_high_order() {
        let tau = std::f64::consts::TAU;
        let f = |x: f64, y: f64| (tau * x).sin() * (tau * y).cos();
        let err = |n: usize| -> f64 {
            let g = build_grid(1.0, 0.0, 1.0, n, n).unwrap();
            let q = make_quadrature();
            let fld = crate::grid::AveragedField::from_fn(&g, &q, f).unwrap();
            let mut b = ReconBundle::new();
            reconstruct_into(&mut b, &fld, WENO_EPS_DEFAULT, WenoMode::Nonlinear, false, ReconTargets::ALL, ExteriorRule::GhostTrace);
            max_err_interior(&b, &g, f)
        };
        let e1 = err(16);
        let e2 = err(32);
        let order = (e1 / e2).log2();
        assert!(order >= 4.5, "observed order {order} ({e1} -> {e2})");
    }

    #[test]
    fn limiter_zeroes_undershoots_and_keeps_averages() {
        let g = build_grid(1.0, 0.0, 1.0, 12, 6).unwrap();
        let q = make_quadrature();
        // narrow nonnegative spike: reconstruction undershoots beside it
        let mut f = crate::grid::AveragedField::from_fn(&g, &q, |_, _| 0.0).unwrap();
        f.set(6, 3, 1.0);
        let mut b = ReconBundle::new();
        reconstruct_into(&mut b, &f, WENO_EPS_DEFAULT, WenoMode::Linear, false, ReconTargets::ALL, ExteriorRule::GhostTrace);
        let mut raw_min = f64::INFINITY;
        for i in 0..12 {
            for j in 0..6 {
                for a in 0..5 {
                    for bb in 0..5 {
                        raw_min = raw_min.min(b.tn(i, j, a, bb));
                    }
                }
            }
        }
        assert!(raw_min < 0.0, "expected an undershoot, min {raw_min}");
        reconstruct_into(&mut b, &f, WENO_EPS_DEFAULT, WenoMode::Linear, true, ReconTargets::ALL, ExteriorRule::GhostTrace);
        let mut lim_min = f64::INFINITY;
        for i in 0..12 {
            for j in 0..6 {
                for a in 0..5 {
                    for bb in 0..5 {
                        lim_min = lim_min.min(b.tn(i, j, a, bb));
                    }
                }
                for a in 0..5 {
                    lim_min = lim_min.min(b.cx(i as isize, j, a)).min(b.cy(j as isize, i, a));
                }
            }
        }
        assert!(lim_min >= -1e-14, "limited min {lim_min}");
    }

    #[test]
    fn face_gradients_exact_on_linear_ramp() {
        let g = build_grid(1.0, -1.5, 1.5, 10, 9).unwrap();
        let q = make_quadrature();
        let fld = crate::grid::AveragedField::from_fn(&g, &q, |x, y| 0.5 + 2.0 * x - 0.75 * y).unwrap();
        let mut s = FaceCoefficientSamples::new();
        face_values_and_gradients(&mut s, &fld, &g);
        for j in 0..g.ny {
            for k in 0..=g.nx {
                for beta in 0..3 {
                    for alpha in 0..5 {
                        assert!((s.xg(j, k, beta, alpha) - 2.0).abs() < 1e-11);
                    }
                }
            }
        }
        for i in 0..g.nx {
            for k in 0..=g.ny {
                for beta in 0..3 {
                    for alpha in 0..5 {
                        assert!((s.yg(i, k, beta, alpha) + 0.75).abs() < 1e-11);
                    }
                }
            }
        }
        // values exact too
        let s15 = 15.0_f64.sqrt();
        let x = g.x_interface(4) + (s15 / 10.0) * g.dx;
        let ya = g.y_center(2) + q.t5_nodes[1] * g.dy;
        let want = 0.5 + 2.0 * x - 0.75 * ya;
        assert!((s.xv(2, 4, 2, 1) - want).abs() < 1e-11);
    }
}

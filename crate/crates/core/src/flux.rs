//! Semi-discrete right-hand side assembly: quadrature-summed interface
//! fluxes with upwind or Lax-Friedrichs splitting, line-quadrature diffusion
//! stencils and tensor-quadrature source terms.

use crate::grid::{AveragedField, GridSpec, QuadratureTables};
use crate::weno::recon::{
    face_values_and_gradients, reconstruct_into, ExteriorRule, FaceCoefficientSamples,
    ReconBundle, ReconTargets,
};
use crate::weno::WenoMode;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FluxError {
    #[error("non-finite right-hand side at cell ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("time step unbounded: advection and diffusion coefficients are both zero")]
    UnboundedDt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxKind {
    Upwind,
    LaxFriedrichs,
}

/// Generalized upwind flux for `f(u) = a u`.
#[inline]
pub fn upwind_flux(a: f64, u_minus: f64, u_plus: f64) -> f64 {
    if a >= 0.0 {
        a * u_minus
    } else {
        a * u_plus
    }
}

/// Lax-Friedrichs flux with the mesh ratio of the current step.
#[inline]
pub fn lax_friedrichs_flux(a: f64, u_minus: f64, u_plus: f64, dx_over_dt: f64) -> f64 {
    0.5 * a * (u_minus + u_plus) + 0.5 * dx_over_dt * (u_minus - u_plus)
}

/// Advection coefficients sampled at the face quadrature nodes. Layouts match
/// the face-state arrays of [`ReconBundle`]: `a` at x-interfaces as
/// `((j*(nx+1)+k)*3+beta)*5+alpha`, `b` at y-interfaces transposed.
#[derive(Debug, Default, Clone)]
pub struct AdvectionSamples {
    nx: usize,
    ny: usize,
    pub ax: Vec<f64>,
    pub by: Vec<f64>,
}

impl AdvectionSamples {
    pub fn new() -> Self {
        Self::default()
    }

    /// Size the sample arrays for an `nx` by `ny` mesh (contents overwritten
    /// by the caller).
    pub fn resize(&mut self, nx: usize, ny: usize) {
        self.nx = nx;
        self.ny = ny;
        self.ax.clear();
        self.ax.resize(ny * (nx + 1) * 15, 0.0);
        self.by.clear();
        self.by.resize(nx * (ny + 1) * 15, 0.0);
    }

    /// Sample closed-form coefficient functions at every face node.
    pub fn from_fn(
        grid: &GridSpec,
        q: &QuadratureTables,
        coeff: impl Fn(f64, f64) -> (f64, f64),
    ) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let mut s = AdvectionSamples {
            nx,
            ny,
            ax: vec![0.0; ny * (nx + 1) * 15],
            by: vec![0.0; nx * (ny + 1) * 15],
        };
        for j in 0..ny {
            for k in 0..=nx {
                for beta in 0..3 {
                    let x = grid.x_interface(k as isize) + q.gl3_nodes[beta] * grid.dx;
                    for alpha in 0..5 {
                        let y = grid.y_center(j as isize) + q.t5_nodes[alpha] * grid.dy;
                        s.ax[((j * (nx + 1) + k) * 3 + beta) * 5 + alpha] = coeff(x, y).0;
                    }
                }
            }
        }
        for i in 0..nx {
            for k in 0..=ny {
                for beta in 0..3 {
                    let y = grid.y_interface(k as isize) + q.gl3_nodes[beta] * grid.dy;
                    for alpha in 0..5 {
                        let x = grid.x_center(i as isize) + q.t5_nodes[alpha] * grid.dx;
                        s.by[((i * (ny + 1) + k) * 3 + beta) * 5 + alpha] = coeff(x, y).1;
                    }
                }
            }
        }
        s
    }

    /// Largest sampled |a| and |b|.
    pub fn max_abs(&self) -> (f64, f64) {
        let ma = self.ax.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mb = self.by.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (ma, mb)
    }
}

/// Quadrature-summed numerical flux through one interface patch: 15 nodes,
/// tensor weight in the tangential direction, Gauss weight across.
pub fn interface_flux_sum(
    u_minus: &[f64],
    u_plus: &[f64],
    a: &[f64],
    q: &QuadratureTables,
    kind: FluxKind,
    dx_over_dt: f64,
) -> f64 {
    debug_assert!(u_minus.len() == 15 && u_plus.len() == 15 && a.len() == 15);
    let mut acc = 0.0;
    for beta in 0..3 {
        let wb = q.gl3_weights[beta];
        for alpha in 0..5 {
            let idx = beta * 5 + alpha;
            let f = match kind {
                FluxKind::Upwind => upwind_flux(a[idx], u_minus[idx], u_plus[idx]),
                FluxKind::LaxFriedrichs => {
                    lax_friedrichs_flux(a[idx], u_minus[idx], u_plus[idx], dx_over_dt)
                }
            };
            acc += q.t5_weights[alpha] * wb * f;
        }
    }
    acc
}

/// Centered second-difference diffusion term of one cell from line values at
/// the neighbor centers: `d/dx^2 sum_a w~_a [u(x_{i+1}) - 2u(x_i) + u(x_{i-1})]`
/// plus the symmetric y part.
pub fn diffusion_term(
    x_left: &[f64],
    x_center: &[f64],
    x_right: &[f64],
    y_down: &[f64],
    y_center: &[f64],
    y_up: &[f64],
    d: f64,
    grid: &GridSpec,
    q: &QuadratureTables,
) -> f64 {
    let mut sx = 0.0;
    let mut sy = 0.0;
    for alpha in 0..5 {
        sx += q.t5_weights[alpha] * (x_right[alpha] - 2.0 * x_center[alpha] + x_left[alpha]);
        sy += q.t5_weights[alpha] * (y_up[alpha] - 2.0 * y_center[alpha] + y_down[alpha]);
    }
    d * (sx / (grid.dx * grid.dx) + sy / (grid.dy * grid.dy))
}

/// Tensor-quadrature sum of source values at the 5x5 interior nodes; equals
/// the double average of the source to 5th order.
pub fn source_term(h_at_nodes: &[f64], q: &QuadratureTables) -> f64 {
    debug_assert_eq!(h_at_nodes.len(), 25);
    let mut acc = 0.0;
    for alpha in 0..5 {
        let mut row = 0.0;
        for beta in 0..5 {
            row += q.t5_weights[beta] * h_at_nodes[alpha * 5 + beta];
        }
        acc += q.t5_weights[alpha] * row;
    }
    acc
}

/// Source specification for the scalar assembly.
pub enum SourceSpec<'a> {
    None,
    /// Closed-form `h(x, y)` evaluated at the tensor nodes.
    Analytic(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
    /// Precomputed per-cell node values, layout `(i*ny + j)*25 + alpha*5 + beta`.
    Nodes(&'a [f64]),
    /// One source value per cell (the cheap cell-average mode), layout `i*ny + j`.
    PerCell(&'a [f64]),
}

#[derive(Debug, Clone, Copy)]
pub struct RhsOptions {
    pub flux: FluxKind,
    /// mesh ratios `dx/dt`, `dy/dt` for the Lax-Friedrichs flux, recomputed
    /// with the current step size
    pub dx_over_dt: f64,
    pub dy_over_dt: f64,
    pub limiter: bool,
    pub mode: WenoMode,
    pub eps: f64,
    pub exterior: ExteriorRule,
}

impl Default for RhsOptions {
    fn default() -> Self {
        RhsOptions {
            flux: FluxKind::Upwind,
            dx_over_dt: 0.0,
            dy_over_dt: 0.0,
            limiter: false,
            mode: WenoMode::Nonlinear,
            eps: crate::weno::WENO_EPS_DEFAULT,
            exterior: ExteriorRule::GhostTrace,
        }
    }
}

/// Reusable buffers for one scalar right-hand side.
#[derive(Debug, Default)]
pub struct RhsWorkspace {
    pub bundle: ReconBundle,
    fhat: Vec<f64>,
    ghat: Vec<f64>,
}

impl RhsWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Assemble the semi-discrete right-hand side of one convection-diffusion-
/// reaction equation from an already reconstructed bundle.
pub fn assemble_rhs(
    bundle: &ReconBundle,
    adv: Option<&AdvectionSamples>,
    d: f64,
    source: SourceSpec,
    grid: &GridSpec,
    q: &QuadratureTables,
    opts: &RhsOptions,
    fhat: &mut Vec<f64>,
    ghat: &mut Vec<f64>,
) -> Result<AveragedField, FluxError> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut rhs = AveragedField::zeros(nx, ny);

    if let Some(adv) = adv {
        fhat.clear();
        fhat.resize(ny * (nx + 1), 0.0);
        ghat.clear();
        ghat.resize(nx * (ny + 1), 0.0);
        fhat.par_chunks_mut(nx + 1).enumerate().for_each(|(j, row)| {
            for (k, out) in row.iter_mut().enumerate() {
                let base = ((j * (nx + 1) + k) * 3) * 5;
                *out = interface_flux_sum(
                    &bundle.x_minus[base..base + 15],
                    &bundle.x_plus[base..base + 15],
                    &adv.ax[base..base + 15],
                    q,
                    opts.flux,
                    opts.dx_over_dt,
                );
            }
        });
        ghat.par_chunks_mut(ny + 1).enumerate().for_each(|(i, row)| {
            for (k, out) in row.iter_mut().enumerate() {
                let base = ((i * (ny + 1) + k) * 3) * 5;
                *out = interface_flux_sum(
                    &bundle.y_minus[base..base + 15],
                    &bundle.y_plus[base..base + 15],
                    &adv.by[base..base + 15],
                    q,
                    opts.flux,
                    opts.dy_over_dt,
                );
            }
        });
    }

    let inv_dx = 1.0 / grid.dx;
    let inv_dy = 1.0 / grid.dy;
    let inv_dx2 = inv_dx * inv_dx;
    let inv_dy2 = inv_dy * inv_dy;
    let has_adv = adv.is_some();

    let pad = crate::grid::GHOST;
    let row_len = ny + 2 * pad;
    rhs.data_mut()
        .par_chunks_mut(row_len)
        .skip(pad)
        .take(nx)
        .enumerate()
        .for_each(|(i, out)| {
            for j in 0..ny {
                let mut v = 0.0;
                if has_adv {
                    let fr = fhat[j * (nx + 1) + i + 1];
                    let fl = fhat[j * (nx + 1) + i];
                    let gt = ghat[i * (ny + 1) + j + 1];
                    let gb = ghat[i * (ny + 1) + j];
                    v -= (fr - fl) * inv_dx + (gt - gb) * inv_dy;
                }
                if d != 0.0 {
                    let mut sx = 0.0;
                    let mut sy = 0.0;
                    for alpha in 0..5 {
                        let ii = i as isize;
                        let jj = j as isize;
                        sx += q.t5_weights[alpha]
                            * (bundle.cx(ii + 1, j, alpha) - 2.0 * bundle.cx(ii, j, alpha)
                                + bundle.cx(ii - 1, j, alpha));
                        sy += q.t5_weights[alpha]
                            * (bundle.cy(jj + 1, i, alpha) - 2.0 * bundle.cy(jj, i, alpha)
                                + bundle.cy(jj - 1, i, alpha));
                    }
                    v += d * (sx * inv_dx2 + sy * inv_dy2);
                }
                match &source {
                    SourceSpec::None => {}
                    SourceSpec::Analytic(h) => {
                        let xc = grid.x_center(i as isize);
                        let yc = grid.y_center(j as isize);
                        let mut acc = 0.0;
                        for alpha in 0..5 {
                            let x = xc + q.t5_nodes[alpha] * grid.dx;
                            let mut rowacc = 0.0;
                            for beta in 0..5 {
                                let y = yc + q.t5_nodes[beta] * grid.dy;
                                rowacc += q.t5_weights[beta] * h(x, y);
                            }
                            acc += q.t5_weights[alpha] * rowacc;
                        }
                        v += acc;
                    }
                    SourceSpec::Nodes(nodes) => {
                        let base = (i * ny + j) * 25;
                        v += source_term(&nodes[base..base + 25], q);
                    }
                    SourceSpec::PerCell(values) => {
                        v += values[i * ny + j];
                    }
                }
                out[pad + j] = v;
            }
        });

    if let Some((i, j)) = rhs.find_non_finite() {
        return Err(FluxError::NonFinite { i, j });
    }
    Ok(rhs)
}

/// Reconstruct `field` and assemble its right-hand side in one call.
pub fn spatial_rhs(
    field: &AveragedField,
    adv: Option<&AdvectionSamples>,
    d: f64,
    source: SourceSpec,
    grid: &GridSpec,
    q: &QuadratureTables,
    opts: &RhsOptions,
    ws: &mut RhsWorkspace,
) -> Result<AveragedField, FluxError> {
    let targets = ReconTargets {
        fluxes: adv.is_some(),
        centers: d != 0.0,
        tensor: false,
    };
    reconstruct_into(
        &mut ws.bundle,
        field,
        opts.eps,
        opts.mode,
        opts.limiter,
        targets,
        opts.exterior,
    );
    assemble_rhs(&ws.bundle, adv, d, source, grid, q, opts, &mut ws.fhat, &mut ws.ghat)
}

/// Largest stable time step from the scheme's stability bounds, scaled by the
/// integrator's SSP factor. A zero coefficient drops its constraint; both
/// zero is reported so the caller can supply a step explicitly.
pub fn cfl_max_dt(
    max_a: f64,
    max_b: f64,
    d: f64,
    grid: &GridSpec,
    ssp_factor: f64,
) -> Result<f64, FluxError> {
    assert!(ssp_factor > 0.0 && ssp_factor <= 1.0);
    let speed = max_a.abs().max(max_b.abs());
    let mut dt = f64::INFINITY;
    if speed > 0.0 {
        dt = dt.min(1e-2 / (speed * (1.0 / grid.dx + 1.0 / grid.dy)));
    }
    if d > 0.0 {
        dt = dt.min(8e-2 / (d * (1.0 / (grid.dx * grid.dx) + 1.0 / (grid.dy * grid.dy))));
    }
    if dt.is_finite() {
        Ok(ssp_factor * dt)
    } else {
        Err(FluxError::UnboundedDt)
    }
}

/// Face values and gradients of a smooth coefficient field (used to build
/// advection samples from a concentration field).
pub fn coefficient_face_samples(
    out: &mut FaceCoefficientSamples,
    field: &AveragedField,
    grid: &GridSpec,
) {
    face_values_and_gradients(out, field, grid);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, double_average, make_quadrature};

    #[test]
    fn upwind_branches() {
        assert_eq!(upwind_flux(1.0, 2.0, 5.0), 2.0);
        assert_eq!(upwind_flux(-1.0, 2.0, 5.0), -5.0);
        assert_eq!(upwind_flux(0.0, 2.0, 5.0), 0.0);
    }

    #[test]
    fn lax_friedrichs_reference_values() {
        assert!((lax_friedrichs_flux(1.0, 1.0, 3.0, 2.0) - 0.0).abs() < 1e-15);
        assert!((lax_friedrichs_flux(0.0, 1.0, 3.0, 2.0) + 2.0).abs() < 1e-15);
        // consistency with the physical flux
        for a in [-2.0, 0.0, 1.5] {
            let u = 0.7;
            assert!((lax_friedrichs_flux(a, u, u, 3.0) - a * u).abs() < 1e-15);
        }
    }

    #[test]
    fn interface_flux_sum_weight_normalization() {
        let q = make_quadrature();
        let um = [2.0; 15];
        let up = [2.0; 15];
        let a = [0.5; 15];
        let f = interface_flux_sum(&um, &up, &a, &q, FluxKind::Upwind, 0.0);
        assert!((f - 1.0).abs() < 1e-14, "constant data: a0*c, got {f}");
    }

    #[test]
    fn interface_flux_sum_upwind_selects_by_sign() {
        let q = make_quadrature();
        let um = [1.0; 15];
        let up = [0.0; 15];
        let mut a = [0.0; 15];
        // alternate signs across the nodes
        let mut expect = 0.0;
        for beta in 0..3 {
            for alpha in 0..5 {
                let idx = beta * 5 + alpha;
                a[idx] = if (alpha + beta) % 2 == 0 { 1.0 } else { -1.0 };
                if a[idx] > 0.0 {
                    expect += q.t5_weights[alpha] * q.gl3_weights[beta] * a[idx] * 1.0;
                }
                // negative speeds pick u_plus = 0, contributing nothing
            }
        }
        let f = interface_flux_sum(&um, &up, &a, &q, FluxKind::Upwind, 0.0);
        assert!((f - expect).abs() < 1e-14);
    }

    #[test]
    fn upwind_vs_lf_differ_by_jump_dissipation() {
        let q = make_quadrature();
        let um = [1.2; 15];
        let up = [1.0; 15];
        let a = [1.0; 15];
        let fu = interface_flux_sum(&um, &up, &a, &q, FluxKind::Upwind, 0.0);
        let fl = interface_flux_sum(&um, &up, &a, &q, FluxKind::LaxFriedrichs, 4.0);
        // LF = (a/2)(um+up) + (r/2)(um-up); upwind = a*um for a>0
        // difference = ((r-a)/2)(um-up)
        assert!((fl - fu - 0.5 * (4.0 - 1.0) * 0.2).abs() < 1e-14);
    }

    #[test]
    fn diffusion_term_reference_values() {
        let g = build_grid(1.0, 0.0, 1.0, 10, 10).unwrap();
        let q = make_quadrature();
        let c = [3.0; 5];
        assert!(diffusion_term(&c, &c, &c, &c, &c, &c, 0.9, &g, &q).abs() < 1e-13);
        // u = x^2 point values: second difference is exactly 2 d (x part only)
        let xl: Vec<f64> = (0..5).map(|_| 0.0_f64).collect();
        let xc: Vec<f64> = (0..5).map(|_| g.dx * g.dx).collect();
        let xr: Vec<f64> = (0..5).map(|_| 4.0 * g.dx * g.dx).collect();
        // values of x^2 at x = 0, dx, 2dx; y lines constant zero
        let z = [0.0; 5];
        let v = diffusion_term(&xl, &xc, &xr, &z, &z, &z, 0.37, &g, &q);
        assert!((v - 2.0 * 0.37).abs() < 1e-12, "got {v}");
        assert!(diffusion_term(&xl, &xc, &xr, &z, &z, &z, 0.0, &g, &q).abs() < 1e-15);
    }

    #[test]
    fn source_term_reference_values() {
        let g = build_grid(1.0, -0.5, 0.5, 5, 5).unwrap();
        let q = make_quadrature();
        assert_eq!(source_term(&[0.0; 25], &q), 0.0);
        let k = [4.2; 25];
        assert!((source_term(&k, &q) - 4.2).abs() < 1e-14);
        // h = x^2 on the unit cell at the origin -> 1/6
        let gq = make_quadrature();
        let mut h = [0.0; 25];
        for alpha in 0..5 {
            let x = gq.t5_nodes[alpha]; // unit cell centered at 0
            for beta in 0..5 {
                h[alpha * 5 + beta] = x * x;
            }
        }
        assert!((source_term(&h, &gq) - 1.0 / 6.0).abs() < 1e-14);
        // cross-check against double_average on the matching grid
        let da = double_average(|x, _| x * x, 2, 2, &g, &q).unwrap();
        let mut h2 = [0.0; 25];
        for alpha in 0..5 {
            let x = g.x_center(2) + gq.t5_nodes[alpha] * g.dx;
            for beta in 0..5 {
                h2[alpha * 5 + beta] = x * x;
            }
        }
        assert!((source_term(&h2, &q) - da).abs() < 1e-14);
    }

    #[test]
    fn cfl_reference_values() {
        let g = build_grid(1.0, -1.5, 1.5, 50, 150).unwrap();
        let dt = cfl_max_dt(1.0, 1.0, 0.0, &g, 1.0).unwrap();
        assert!((dt - 1e-4).abs() < 1e-18, "advective bound, got {dt}");
        let d = 1.0 / (2.0 * 5.88);
        let dt = cfl_max_dt(0.0, 0.0, d, &g, 1.0).unwrap();
        assert!((dt - 8e-2 / (d * 5000.0)).abs() < 1e-12, "diffusive bound, got {dt}");
        let dt3 = cfl_max_dt(0.0, 0.0, d, &g, 1.0 / 3.0).unwrap();
        assert!((dt3 - dt / 3.0).abs() < 1e-18);
        assert_eq!(cfl_max_dt(0.0, 0.0, 0.0, &g, 1.0), Err(FluxError::UnboundedDt));
    }

    fn workspace() -> RhsWorkspace {
        RhsWorkspace::new()
    }

    #[test]
    fn rhs_vanishes_on_constant_state() {
        let g = build_grid(1.0, 0.0, 1.0, 8, 8).unwrap();
        let q = make_quadrature();
        let mut f = crate::grid::AveragedField::from_fn(&g, &q, |_, _| 2.0).unwrap();
        f.fill_ghosts_periodic();
        let adv = AdvectionSamples::from_fn(&g, &q, |_, _| (0.7, -0.4));
        let mut ws = workspace();
        let opts = RhsOptions { exterior: ExteriorRule::PeriodicWrap, ..Default::default() };
        let rhs = spatial_rhs(&f, Some(&adv), 0.3, SourceSpec::None, &g, &q, &opts, &mut ws).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!(rhs.get(i, j).abs() < 1e-12, "rhs({i},{j}) = {}", rhs.get(i, j));
            }
        }
    }

    #[test]
    fn rhs_conserves_mass_with_periodic_ghosts() {
        let g = build_grid(1.0, 0.0, 1.0, 12, 10).unwrap();
        let q = make_quadrature();
        let tau = std::f64::consts::TAU;
        let mut f =
            crate::grid::AveragedField::from_fn(&g, &q, |x, y| 1.5 + (tau * x).sin() * (tau * y).cos())
                .unwrap();
        f.fill_ghosts_periodic();
        let adv = AdvectionSamples::from_fn(&g, &q, |x, y| ((tau * y).cos(), 0.5 + (tau * x).sin()));
        let mut ws = workspace();
        let opts = RhsOptions { exterior: ExteriorRule::PeriodicWrap, ..Default::default() };
        let rhs =
            spatial_rhs(&f, Some(&adv), 0.0, SourceSpec::None, &g, &q, &opts, &mut ws).unwrap();
        let total = rhs.sum_interior() * g.cell_area();
        assert!(total.abs() < 1e-12, "mass production {total}");
    }

    #[test]
    fn rhs_is_linear_in_the_field_in_linear_mode() {
        let g = build_grid(1.0, 0.0, 1.0, 8, 6).unwrap();
        let q = make_quadrature();
        let tau = std::f64::consts::TAU;
        let mk = |f: &dyn Fn(f64, f64) -> f64| {
            let mut a = crate::grid::AveragedField::from_fn(&g, &q, f).unwrap();
            a.fill_ghosts_periodic();
            a
        };
        let u = mk(&|x, y| (tau * x).sin() + y);
        let v = mk(&|x, y| (tau * y).cos() * x);
        let w = mk(&|x, y| 2.0 * ((tau * x).sin() + y) - 3.0 * ((tau * y).cos() * x));
        let adv = AdvectionSamples::from_fn(&g, &q, |_, _| (0.8, -0.3));
        let opts = RhsOptions {
            mode: WenoMode::Linear,
            exterior: ExteriorRule::PeriodicWrap,
            ..Default::default()
        };
        let mut ws = workspace();
        let ru = spatial_rhs(&u, Some(&adv), 0.05, SourceSpec::None, &g, &q, &opts, &mut ws).unwrap();
        let rv = spatial_rhs(&v, Some(&adv), 0.05, SourceSpec::None, &g, &q, &opts, &mut ws).unwrap();
        let rw = spatial_rhs(&w, Some(&adv), 0.05, SourceSpec::None, &g, &q, &opts, &mut ws).unwrap();
        for i in 0..8 {
            for j in 0..6 {
                let want = 2.0 * ru.get(i, j) - 3.0 * rv.get(i, j);
                assert!((rw.get(i, j) - want).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn rhs_matches_analytic_operator_at_high_order() {
        // manufactured solution: u = sin(2 pi x) sin(2 pi y), a = b = 1,
        // d = 0.01, h = 0. RHS must converge to the double average of
        // -(u_x + u_y) + d (u_xx + u_yy) at order >= 4.
        let tau = std::f64::consts::TAU;
        let u = |x: f64, y: f64| (tau * x).sin() * (tau * y).sin();
        let d = 0.01;
        let exact = move |x: f64, y: f64| {
            let ux = tau * (tau * x).cos() * (tau * y).sin();
            let uy = tau * (tau * x).sin() * (tau * y).cos();
            let lap = -2.0 * tau * tau * (tau * x).sin() * (tau * y).sin();
            -(ux + uy) + d * lap
        };
        let err = |n: usize| -> f64 {
            let g = build_grid(1.0, 0.0, 1.0, n, n).unwrap();
            let q = make_quadrature();
            let mut f = crate::grid::AveragedField::from_fn(&g, &q, u).unwrap();
            f.fill_ghosts_periodic();
            let adv = AdvectionSamples::from_fn(&g, &q, |_, _| (1.0, 1.0));
            let opts = RhsOptions { exterior: ExteriorRule::PeriodicWrap, ..Default::default() };
            let mut ws = workspace();
            let rhs =
                spatial_rhs(&f, Some(&adv), d, SourceSpec::None, &g, &q, &opts, &mut ws).unwrap();
            let mut e = 0.0_f64;
            for i in 0..n {
                for j in 0..n {
                    let want = double_average(exact, i as isize, j as isize, &g, &q).unwrap();
                    e = e.max((rhs.get(i as isize, j as isize) - want).abs());
                }
            }
            e
        };
        let e1 = err(16);
        let e2 = err(32);
        let order = (e1 / e2).log2();
        assert!(order >= 4.0, "observed order {order} ({e1} -> {e2})");
    }

    #[test]
    fn forward_euler_step_keeps_positive_bump_nonnegative() {
        let g = build_grid(1.0, 0.0, 1.0, 20, 20).unwrap();
        let q = make_quadrature();
        let bump = |x: f64, y: f64| {
            let r2 = (x - 0.5).powi(2) + (y - 0.5).powi(2);
            (-(r2 / 0.01)).exp()
        };
        let mut f = crate::grid::AveragedField::from_fn(&g, &q, bump).unwrap();
        f.fill_ghosts_periodic();
        let adv = AdvectionSamples::from_fn(&g, &q, |_, _| (1.0, 0.5));
        let dt = cfl_max_dt(1.0, 0.5, 0.0, &g, 1.0).unwrap();
        let opts = RhsOptions {
            limiter: true,
            exterior: ExteriorRule::PeriodicWrap,
            ..Default::default()
        };
        let mut ws = workspace();
        let rhs = spatial_rhs(&f, Some(&adv), 0.0, SourceSpec::None, &g, &q, &opts, &mut ws).unwrap();
        let mut min = f64::INFINITY;
        for i in 0..20 {
            for j in 0..20 {
                min = min.min(f.get(i, j) + dt * rhs.get(i, j));
            }
        }
        assert!(min >= 0.0, "euler probe min {min}");
    }

    #[test]
    fn rhs_flags_non_finite_cells() {
        let g = build_grid(1.0, 0.0, 1.0, 6, 6).unwrap();
        let q = make_quadrature();
        let mut f = crate::grid::AveragedField::from_fn(&g, &q, |_, _| 1.0).unwrap();
        f.set(3, 2, f64::NAN);
        f.fill_ghosts_periodic();
        let adv = AdvectionSamples::from_fn(&g, &q, |_, _| (1.0, 0.0));
        let opts = RhsOptions { exterior: ExteriorRule::PeriodicWrap, ..Default::default() };
        let mut ws = workspace();
        let r = spatial_rhs(&f, Some(&adv), 0.0, SourceSpec::None, &g, &q, &opts, &mut ws);
        assert!(matches!(r, Err(FluxError::NonFinite { .. })));
    }
}

//! The reduced angiogenesis system: marginal tip density `rho`, angiogenic
//! factor concentration `C`, and the accumulated density `I(x,t)` that turns
//! the nonlocal-in-time sink into an extra ordinary differential equation.
//! This module owns the dimensionless parameters, the coefficient functions,
//! initial and boundary data, ghost filling, and the coupled right-hand side.

use crate::flux::{
    assemble_rhs, cfl_max_dt, AdvectionSamples, FluxError, FluxKind, RhsOptions, SourceSpec,
};
use crate::grid::{AveragedField, GridError, GridSpec, QuadratureTables, GHOST};
use crate::quadrature::{adaptive_simpson, composite_simpson};
use crate::ssp::StateVector;
use crate::weno::recon::{
    reconstruct_into, ExteriorRule, FaceCoefficientSamples, ReconBundle, ReconTargets,
};
use crate::weno::WenoMode;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{LazyLock, Mutex};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("negative concentration {c} reached a rate coefficient")]
    NegativeConcentration { c: f64 },
    #[error("force prefactor pole: 1 + Gamma1 C = {denom} at a quadrature node")]
    ForcePole { denom: f64 },
    #[error("chi1 quadrature did not converge: achieved {achieved:e}, requested {requested:e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },
    #[error("{equation} equation: {source}")]
    Equation {
        equation: &'static str,
        #[source]
        source: FluxError,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Dimensionless model constants plus the scenario constants of the
/// reference simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub delta1: f64,
    pub beta: f64,
    /// saturation level of the tip-creation rate `alpha(C) = A C/(1+C)`
    pub alpha_max: f64,
    /// tip destruction coefficient of the nonlocal sink
    pub gamma: f64,
    pub gamma1: f64,
    pub q1: f64,
    pub kappa: f64,
    pub chi: f64,
    pub eta: f64,
    /// sharpness of the velocity cutoff in the consumption integral
    pub epsilon_v: f64,
    pub sigma_v: f64,
    /// inverse characteristic length of the hypoxic region (boundary data)
    pub a_hypoxic: f64,
    /// boundary inflow amplitude `c_L`
    pub c_l: f64,
    /// optional exponential decay rate of `c_L(t)`; 0 keeps it constant
    pub c_l_decay: f64,
    /// reference velocity of newly created tips
    pub v0: (f64, f64),
    /// half-width of the truncated velocity box for the initial marginal
    pub v_box: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            delta1: 0.255,
            beta: 5.88,
            alpha_max: 22.42,
            gamma: 0.135,
            gamma1: 1.0,
            q1: 1.0,
            kappa: 0.0045,
            chi: 0.002,
            eta: 15.0,
            epsilon_v: 0.001,
            sigma_v: 0.08,
            a_hypoxic: 1.0 / 0.3,
            c_l: 1.1,
            c_l_decay: 0.0,
            v0: ((PI / 10.0).cos(), (PI / 10.0).sin()),
            v_box: 4.0,
        }
    }
}

impl ModelParams {
    /// All model constants must be positive (the decay hook may be zero).
    pub fn validate(&self) -> Result<(), String> {
        let named = [
            ("delta1", self.delta1),
            ("beta", self.beta),
            ("A", self.alpha_max),
            ("Gamma", self.gamma),
            ("Gamma1", self.gamma1),
            ("q1", self.q1),
            ("kappa", self.kappa),
            ("chi", self.chi),
            ("eta", self.eta),
            ("epsilon_v", self.epsilon_v),
            ("sigma_v", self.sigma_v),
            ("a", self.a_hypoxic),
            ("c_l", self.c_l),
            ("v_box", self.v_box),
        ];
        for (name, v) in named {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("parameter {name} must be positive, got {v}"));
            }
        }
        if self.c_l_decay < 0.0 || !self.c_l_decay.is_finite() {
            return Err(format!("c_l_decay must be nonnegative, got {}", self.c_l_decay));
        }
        if !self.v0.0.is_finite() || !self.v0.1.is_finite() {
            return Err("v0 components must be finite".into());
        }
        Ok(())
    }

    /// Tip creation rate `alpha(C) = A C / (1 + C)`.
    pub fn alpha_of(&self, c: f64) -> Result<f64, ModelError> {
        if c < 0.0 {
            return Err(ModelError::NegativeConcentration { c });
        }
        Ok(self.alpha_max * c / (1.0 + c))
    }

    /// Constant `k` in `mu = (alpha/pi)(1 + alpha k)`.
    pub fn mu_bracket_coefficient(&self) -> f64 {
        let s2 = self.sigma_v * self.sigma_v;
        (1.0 + 1.0 / s2).ln() / (2.0 * PI * self.beta * (1.0 + s2))
    }

    /// Birth coefficient of the reduced density equation.
    pub fn mu_of(&self, c: f64) -> Result<f64, ModelError> {
        let alpha = self.alpha_of(c)?;
        Ok(alpha / PI * (1.0 + alpha * self.mu_bracket_coefficient()))
    }

    /// Diffusivity of the reduced density equation.
    pub fn rho_diffusivity(&self) -> f64 {
        1.0 / (2.0 * self.beta)
    }

    /// Boundary inflow profile `g(t, y) = c_L(t) exp(-(a y)^2)`.
    pub fn boundary_inflow(&self, t: f64, y: f64) -> f64 {
        let cl = self.c_l * (-self.c_l_decay * t).exp();
        cl * (-(self.a_hypoxic * y).powi(2)).exp()
    }

    /// Effective consumption rate `chi1`: the velocity integral of the
    /// cut-off speed against the leading-order Gaussian, cached per
    /// `(eta, epsilon_v)`. Adaptive nested quadrature.
    pub fn chi1(&self) -> Result<f64, ModelError> {
        Ok(self.chi / PI * reduced_consumption_integral(self.eta, self.epsilon_v, true)?)
    }

    /// Independent evaluation of the same integral on fixed piecewise
    /// Simpson grids; used to cross-validate [`Self::chi1`].
    pub fn chi1_simpson(&self) -> f64 {
        self.chi / PI * simpson_consumption_integral(Some((self.eta, self.epsilon_v)))
    }

    /// The cutoff-free limit (the Fermi factor replaced by 1).
    pub fn chi1_unlimited(&self) -> Result<f64, ModelError> {
        Ok(self.chi / PI * reduced_consumption_integral(self.eta, self.epsilon_v, false)?)
    }
}

/// Leading-order phase-space lift `p(x,v,t) ~ (1/pi) e^{-|v-v0|^2} rho(x,t)`.
pub fn lift_to_phase_space(rho_value: f64, v: (f64, f64), params: &ModelParams) -> f64 {
    let dv2 = (v.0 - params.v0.0).powi(2) + (v.1 - params.v0.1).powi(2);
    (1.0 / PI) * (-dv2).exp() * rho_value
}

fn fermi_factor(v2: f64, eta: f64, eps: f64) -> f64 {
    let z = (v2 - eta) / eps;
    if z > 700.0 {
        0.0
    } else if z < -700.0 {
        1.0
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `int_{-pi}^{pi} sqrt(1 + V^2 + 2 V cos phi) dphi` by symmetry over half
/// the range.
fn speed_angle_integral_adaptive(v: f64) -> f64 {
    let f = move |phi: f64| (1.0 + v * v + 2.0 * v * phi.cos()).max(0.0).sqrt();
    2.0 * adaptive_simpson(&f, 0.0, PI, 1e-13, 30).value
}

fn speed_angle_integral_simpson(v: f64, panels: usize) -> f64 {
    let f = move |phi: f64| (1.0 + v * v + 2.0 * v * phi.cos()).max(0.0).sqrt();
    2.0 * composite_simpson(&f, 0.0, PI, panels)
}

/// Upper truncation of the velocity magnitude: beyond this the Gaussian
/// weight is below 1e-16.
fn v_max() -> f64 {
    (16.0 * 10.0_f64.ln()).sqrt()
}

fn consumption_segments(eta: f64, eps: f64, with_cutoff: bool) -> Vec<f64> {
    let vmax = v_max();
    let mut cuts = vec![0.0, 1.0];
    if with_cutoff {
        let lo = eta - 40.0 * eps;
        let hi = eta + 40.0 * eps;
        if lo > 0.0 {
            cuts.push(lo.sqrt());
        }
        if hi > 0.0 {
            cuts.push(hi.sqrt());
        }
    }
    cuts.push(vmax);
    cuts.retain(|&c| c <= vmax);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    cuts
}

static CONSUMPTION_CACHE: LazyLock<Mutex<HashMap<(u64, u64, bool), f64>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// `int_0^inf int_{-pi}^{pi} sqrt(1+V^2+2V cos phi) F(V) e^{-V^2} V dV dphi`
/// with `F` the Fermi cutoff (or 1 in the unlimited variant). The angular
/// kink at V = 1 and the cutoff wall near `V = sqrt(eta)` get their own
/// panels.
fn reduced_consumption_integral(eta: f64, eps: f64, with_cutoff: bool) -> Result<f64, ModelError> {
    let key = (eta.to_bits(), eps.to_bits(), with_cutoff);
    if let Some(v) = CONSUMPTION_CACHE.lock().unwrap().get(&key) {
        return Ok(*v);
    }
    let integrand = move |v: f64| -> f64 {
        let cutoff = if with_cutoff { fermi_factor(v * v, eta, eps) } else { 1.0 };
        if cutoff == 0.0 {
            return 0.0;
        }
        speed_angle_integral_adaptive(v) * cutoff * (-v * v).exp() * v
    };
    let requested = 1e-10;
    let mut total = 0.0;
    let mut achieved = 0.0;
    let cuts = consumption_segments(eta, eps, with_cutoff);
    for w in cuts.windows(2) {
        let r = adaptive_simpson(&integrand, w[0], w[1], 1e-11, 40);
        total += r.value;
        achieved += r.error_bound;
    }
    if achieved > requested {
        return Err(ModelError::QuadratureNonConvergence { achieved, requested });
    }
    CONSUMPTION_CACHE.lock().unwrap().insert(key, total);
    Ok(total)
}

/// Fixed-grid variant: piecewise composite Simpson aligned to the same
/// segment boundaries. `cutoff` carries `(eta, epsilon_v)` or `None` for the
/// unlimited integral.
fn simpson_consumption_integral(cutoff: Option<(f64, f64)>) -> f64 {
    let with_cutoff = cutoff.is_some();
    let (eta, eps) = cutoff.unwrap_or((1.0, 1.0));
    let integrand = move |v: f64| -> f64 {
        let c = if with_cutoff { fermi_factor(v * v, eta, eps) } else { 1.0 };
        if c == 0.0 {
            return 0.0;
        }
        speed_angle_integral_simpson(v, 1024) * c * (-v * v).exp() * v
    };
    let cuts = consumption_segments(eta, eps, with_cutoff);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += composite_simpson(&integrand, w[0], w[1], 2048);
    }
    total
}

/// Mass of the truncated tip-velocity Gaussian over `[-v_box, v_box]^2`,
/// in closed form through error functions.
pub fn velocity_box_mass(v0: (f64, f64), v_box: f64) -> f64 {
    let one_dim = |c: f64| 0.5 * PI.sqrt() * (libm::erf(v_box - c) + libm::erf(v_box + c));
    one_dim(v0.0) * one_dim(v0.1)
}

/// Initial angiogenic-factor profile, peaking at the hypoxic wall.
pub fn initial_c_profile(params: &ModelParams, grid: &GridSpec, x: f64, y: f64) -> f64 {
    let cl = params.c_l;
    cl * (-(((x - grid.x_len) / 1.5).powi(2) + (params.a_hypoxic * y).powi(2))).exp()
}

/// Initial marginal tip density: twenty equispaced seeds along the
/// pre-existing vessel at the left wall, times the truncated velocity mass.
pub fn initial_rho_profile(params: &ModelParams, x: f64, y: f64) -> f64 {
    let amp = 2.0 / (PI * PI) / 0.0048 * velocity_box_mass(params.v0, params.v_box);
    let mut comb = 0.0;
    for j in 0..20 {
        let yj = -0.3 + j as f64 * (0.6 / 19.0);
        comb += (-((y - yj) / 0.08).powi(2)).exp();
    }
    amp * (-(x / 0.06).powi(2)).exp() * comb
}

/// The evolved triple of double-averaged fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub rho: AveragedField,
    pub c: AveragedField,
    pub i_int: AveragedField,
    pub t: f64,
}

impl StateVector for SystemState {
    fn scale(&mut self, k: f64) {
        for v in self.rho.data_mut() {
            *v *= k;
        }
        for v in self.c.data_mut() {
            *v *= k;
        }
        for v in self.i_int.data_mut() {
            *v *= k;
        }
    }

    fn axpy(&mut self, k: f64, other: &Self) {
        for (v, o) in self.rho.data_mut().iter_mut().zip(other.rho.data()) {
            *v += k * o;
        }
        for (v, o) in self.c.data_mut().iter_mut().zip(other.c.data()) {
            *v += k * o;
        }
        for (v, o) in self.i_int.data_mut().iter_mut().zip(other.i_int.data()) {
            *v += k * o;
        }
    }
}

/// Double averages of the initial data; `I` starts at zero.
pub fn initial_state(
    grid: &GridSpec,
    params: &ModelParams,
    q: &QuadratureTables,
) -> Result<SystemState, ModelError> {
    let c = AveragedField::from_fn(grid, q, |x, y| initial_c_profile(params, grid, x, y))?;
    let rho = AveragedField::from_fn(grid, q, |x, y| initial_rho_profile(params, x, y))?;
    let i_int = AveragedField::zeros(grid.nx, grid.ny);
    Ok(SystemState { rho, c, i_int, t: 0.0 })
}

/// Fill ghost frames with boundary data: zero Dirichlet everywhere except
/// the concentration inflow at the right wall, which is averaged over the
/// ghost cell tangentially and held constant in x. `I` mirrors the interior
/// (it is never differentiated; its ghosts only feed source reconstruction).
pub fn fill_ghosts(
    state: &mut SystemState,
    grid: &GridSpec,
    params: &ModelParams,
    q: &QuadratureTables,
    t: f64,
) {
    let g = GHOST as isize;
    let nx = grid.nx as isize;
    let ny = grid.ny as isize;

    for i in -g..nx + g {
        for j in -g..ny + g {
            let interior = i >= 0 && i < nx && j >= 0 && j < ny;
            if interior {
                continue;
            }
            state.rho.set(i, j, 0.0);
            state.c.set(i, j, 0.0);
        }
    }
    // concentration inflow along x = X, tangentially averaged per ghost cell
    for i in nx..nx + g {
        for j in -g..ny + g {
            let yc = grid.y_center(j);
            let mut avg = 0.0;
            for (b, &tb) in q.t5_nodes.iter().enumerate() {
                avg += q.t5_weights[b] * params.boundary_inflow(t, yc + tb * grid.dy);
            }
            state.c.set(i, j, avg);
        }
    }
    // mirror I across each boundary, then the corners pick up both reflections
    for k in 0..g {
        for j in 0..ny {
            let v = state.i_int.get(k, j);
            state.i_int.set(-1 - k, j, v);
            let v = state.i_int.get(nx - 1 - k, j);
            state.i_int.set(nx + k, j, v);
        }
    }
    for k in 0..g {
        for i in -g..nx + g {
            let v = state.i_int.get(i, k);
            state.i_int.set(i, -1 - k, v);
            let v = state.i_int.get(i, ny - 1 - k);
            state.i_int.set(i, ny + k, v);
        }
    }
}

/// Advection samples for the density equation: `F(C) = delta1/(1+Gamma1 C)^q1
/// grad C`, with both the point value and the gradient taken from the central
/// degree-4 reconstruction of `C` (linear mode; the concentration is smooth).
pub fn force_field(
    out: &mut AdvectionSamples,
    scratch: &mut FaceCoefficientSamples,
    c: &AveragedField,
    grid: &GridSpec,
    params: &ModelParams,
) -> Result<(), ModelError> {
    crate::flux::coefficient_face_samples(scratch, c, grid);
    let (nx, ny) = (grid.nx, grid.ny);
    out.resize(nx, ny);
    let d1 = params.delta1;
    let g1 = params.gamma1;
    let q1 = params.q1;
    let pref = |cval: f64| -> Result<f64, ModelError> {
        let denom = 1.0 + g1 * cval;
        if denom <= 0.0 {
            return Err(ModelError::ForcePole { denom });
        }
        Ok(if q1 == 1.0 { d1 / denom } else { d1 / denom.powf(q1) })
    };
    for (k, out_a) in out.ax.iter_mut().enumerate() {
        *out_a = pref(scratch.x_val[k])? * scratch.x_grad[k];
    }
    for (k, out_b) in out.by.iter_mut().enumerate() {
        *out_b = pref(scratch.y_val[k])? * scratch.y_grad[k];
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceMode {
    /// reconstruct the unknowns at the tensor nodes (design order)
    Tensor,
    /// evaluate sources on the cell averages (cheap fallback)
    CellAverage,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelRhsOptions {
    pub flux: FluxKind,
    pub limiter: bool,
    pub mode: WenoMode,
    pub eps: f64,
    /// mesh ratios dx/dt, dy/dt for the Lax-Friedrichs flux
    pub dx_over_dt: f64,
    pub dy_over_dt: f64,
    pub source_mode: SourceMode,
}

impl Default for ModelRhsOptions {
    fn default() -> Self {
        ModelRhsOptions {
            flux: FluxKind::Upwind,
            limiter: true,
            mode: WenoMode::Nonlinear,
            eps: crate::weno::WENO_EPS_DEFAULT,
            dx_over_dt: 0.0,
            dy_over_dt: 0.0,
            source_mode: SourceMode::Tensor,
        }
    }
}

/// Reusable buffers for the coupled right-hand side.
#[derive(Debug, Default)]
pub struct ModelWorkspace {
    b_rho: ReconBundle,
    b_c: ReconBundle,
    b_i: ReconBundle,
    pub force: AdvectionSamples,
    face: FaceCoefficientSamples,
    h_rho: Vec<f64>,
    h_c: Vec<f64>,
    fhat: Vec<f64>,
    ghat: Vec<f64>,
}

impl ModelWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Coupled semi-discrete right-hand side for `(rho, C, I)`. Ghost layers must
/// be filled. The density advects with `F(C)` and diffuses with `1/(2 beta)`;
/// its source is `mu(C) rho - Gamma rho I`. The concentration diffuses with
/// `kappa` and decays with `-chi1 C rho`. `I` integrates the cell averages of
/// `rho` directly.
pub fn coupled_rhs(
    state: &SystemState,
    grid: &GridSpec,
    q: &QuadratureTables,
    params: &ModelParams,
    chi1: f64,
    opts: &ModelRhsOptions,
    ws: &mut ModelWorkspace,
) -> Result<SystemState, ModelError> {
    let (nx, ny) = (grid.nx, grid.ny);
    force_field(&mut ws.force, &mut ws.face, &state.c, grid, params)?;

    let tensor_sources = opts.source_mode == SourceMode::Tensor;
    reconstruct_into(
        &mut ws.b_rho,
        &state.rho,
        opts.eps,
        opts.mode,
        opts.limiter,
        ReconTargets { fluxes: true, centers: true, tensor: tensor_sources },
        ExteriorRule::GhostTrace,
    );
    reconstruct_into(
        &mut ws.b_c,
        &state.c,
        opts.eps,
        opts.mode,
        opts.limiter,
        ReconTargets { fluxes: false, centers: true, tensor: tensor_sources },
        ExteriorRule::GhostTrace,
    );
    if tensor_sources {
        reconstruct_into(
            &mut ws.b_i,
            &state.i_int,
            opts.eps,
            opts.mode,
            opts.limiter,
            ReconTargets::SOURCE_ONLY,
            ExteriorRule::GhostTrace,
        );
    }

    // source values
    let a_max = params.alpha_max;
    let k_mu = params.mu_bracket_coefficient();
    let gamma = params.gamma;
    let n_values = if tensor_sources { nx * ny * 25 } else { nx * ny };
    ws.h_rho.clear();
    ws.h_rho.resize(n_values, 0.0);
    ws.h_c.clear();
    ws.h_c.resize(n_values, 0.0);
    // rate coefficients see reconstruction undershoots as vacuum; the
    // bilinear products keep the raw node values
    let mu_at = |c: f64| -> f64 {
        let c = c.max(0.0);
        let alpha = a_max * c / (1.0 + c);
        alpha / PI * (1.0 + alpha * k_mu)
    };
    if tensor_sources {
        for i in 0..nx {
            for j in 0..ny {
                let base = (i * ny + j) * 25;
                for a in 0..5 {
                    for b in 0..5 {
                        let rho_n = ws.b_rho.tn(i, j, a, b);
                        let c_n = ws.b_c.tn(i, j, a, b);
                        let i_n = ws.b_i.tn(i, j, a, b);
                        let mu = mu_at(c_n);
                        ws.h_rho[base + a * 5 + b] = mu * rho_n - gamma * rho_n * i_n;
                        ws.h_c[base + a * 5 + b] = -chi1 * c_n * rho_n;
                    }
                }
            }
        }
    } else {
        for i in 0..nx {
            for j in 0..ny {
                let rho_n = state.rho.get(i as isize, j as isize);
                let c_n = state.c.get(i as isize, j as isize);
                let i_n = state.i_int.get(i as isize, j as isize);
                let mu = mu_at(c_n);
                ws.h_rho[i * ny + j] = mu * rho_n - gamma * rho_n * i_n;
                ws.h_c[i * ny + j] = -chi1 * c_n * rho_n;
            }
        }
    }

    let rhs_opts = RhsOptions {
        flux: opts.flux,
        dx_over_dt: opts.dx_over_dt,
        dy_over_dt: opts.dy_over_dt,
        limiter: opts.limiter,
        mode: opts.mode,
        eps: opts.eps,
        exterior: ExteriorRule::GhostTrace,
    };
    let rho_source = if tensor_sources {
        SourceSpec::Nodes(&ws.h_rho)
    } else {
        SourceSpec::PerCell(&ws.h_rho)
    };
    let rhs_rho = assemble_rhs(
        &ws.b_rho,
        Some(&ws.force),
        params.rho_diffusivity(),
        rho_source,
        grid,
        q,
        &rhs_opts,
        &mut ws.fhat,
        &mut ws.ghat,
    )
    .map_err(|source| ModelError::Equation { equation: "density", source })?;

    let c_source = if tensor_sources {
        SourceSpec::Nodes(&ws.h_c)
    } else {
        SourceSpec::PerCell(&ws.h_c)
    };
    let rhs_c = assemble_rhs(
        &ws.b_c,
        None,
        params.kappa,
        c_source,
        grid,
        q,
        &rhs_opts,
        &mut ws.fhat,
        &mut ws.ghat,
    )
    .map_err(|source| ModelError::Equation { equation: "concentration", source })?;

    let mut rhs_i = AveragedField::zeros(nx, ny);
    for i in 0..nx as isize {
        for j in 0..ny as isize {
            rhs_i.set(i, j, state.rho.get(i, j));
        }
    }

    Ok(SystemState { rho: rhs_rho, c: rhs_c, i_int: rhs_i, t: state.t })
}

/// Owns everything one simulation needs to evaluate its right-hand side.
pub struct ModelRhs {
    pub grid: GridSpec,
    pub q: QuadratureTables,
    pub params: ModelParams,
    pub chi1: f64,
    pub opts: ModelRhsOptions,
    ws: ModelWorkspace,
}

impl ModelRhs {
    pub fn new(
        grid: GridSpec,
        q: QuadratureTables,
        params: ModelParams,
        opts: ModelRhsOptions,
    ) -> Result<Self, ModelError> {
        let chi1 = params.chi1()?;
        Ok(ModelRhs { grid, q, params, chi1, opts, ws: ModelWorkspace::new() })
    }

    /// Refresh ghosts for stage time `t`, then evaluate the coupled RHS.
    pub fn eval(&mut self, state: &mut SystemState, t: f64) -> Result<SystemState, ModelError> {
        fill_ghosts(state, &self.grid, &self.params, &self.q, t);
        coupled_rhs(state, &self.grid, &self.q, &self.params, self.chi1, &self.opts, &mut self.ws)
    }

    /// Largest advection speeds of the current state (ghosts refreshed),
    /// used for the automatic step-size bound.
    pub fn max_speeds(&mut self, state: &mut SystemState, t: f64) -> Result<(f64, f64), ModelError> {
        fill_ghosts(state, &self.grid, &self.params, &self.q, t);
        force_field(&mut self.ws.force, &mut self.ws.face, &state.c, &self.grid, &self.params)?;
        Ok(self.ws.force.max_abs())
    }

    /// Automatic step size for the configured integrator.
    pub fn auto_dt(
        &mut self,
        state: &mut SystemState,
        ssp_factor: f64,
    ) -> Result<f64, ModelError> {
        let (ma, mb) = self.max_speeds(state, 0.0)?;
        cfl_max_dt(ma, mb, self.params.rho_diffusivity().max(self.params.kappa), &self.grid, ssp_factor)
            .map_err(|source| ModelError::Equation { equation: "step bound", source })
    }
}

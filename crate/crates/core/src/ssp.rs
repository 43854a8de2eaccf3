//! Strong-stability-preserving time integration: forward Euler, SSP-RK2,
//! SSP-RK3 in Shu-Osher form, and the third-order SSP multistep scheme with
//! its RK3 startup. All schemes are convex combinations of forward-Euler
//! substeps, so they inherit Euler's positivity under the scaled step bound.

use std::collections::VecDeque;

/// Minimal vector interface the integrators need. The right-hand-side
/// callback receives `&mut V` so it may refresh ghost data in place, and the
/// stage time for time-dependent boundary values.
pub trait StateVector: Clone {
    fn scale(&mut self, c: f64);
    fn axpy(&mut self, c: f64, other: &Self);
}

impl StateVector for f64 {
    fn scale(&mut self, c: f64) {
        *self *= c;
    }
    fn axpy(&mut self, c: f64, other: &Self) {
        *self += c * other;
    }
}

impl StateVector for Vec<f64> {
    fn scale(&mut self, c: f64) {
        for v in self.iter_mut() {
            *v *= c;
        }
    }
    fn axpy(&mut self, c: f64, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (v, o) in self.iter_mut().zip(other.iter()) {
            *v += c * o;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegratorKind {
    Euler,
    Rk2,
    Rk3,
    MsStep3,
}

impl IntegratorKind {
    /// CFL multiplier relative to the forward-Euler bound.
    pub fn ssp_factor(self) -> f64 {
        match self {
            IntegratorKind::MsStep3 => 1.0 / 3.0,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IntegratorKind::Euler => "euler",
            IntegratorKind::Rk2 => "rk2",
            IntegratorKind::Rk3 => "rk3",
            IntegratorKind::MsStep3 => "msstep3",
        }
    }
}

pub fn euler_step<V: StateVector, E>(
    u: &mut V,
    rhs: &mut dyn FnMut(&mut V, f64) -> Result<V, E>,
    t: f64,
    dt: f64,
) -> Result<(), E> {
    let r = rhs(u, t)?;
    u.axpy(dt, &r);
    Ok(())
}

pub fn rk2_step<V: StateVector, E>(
    u: &mut V,
    rhs: &mut dyn FnMut(&mut V, f64) -> Result<V, E>,
    t: f64,
    dt: f64,
) -> Result<(), E> {
    let r0 = rhs(u, t)?;
    let mut u1 = u.clone();
    u1.axpy(dt, &r0);
    let r1 = rhs(&mut u1, t + dt)?;
    u.scale(0.5);
    u.axpy(0.5, &u1);
    u.axpy(0.5 * dt, &r1);
    Ok(())
}

pub fn rk3_step<V: StateVector, E>(
    u: &mut V,
    rhs: &mut dyn FnMut(&mut V, f64) -> Result<V, E>,
    t: f64,
    dt: f64,
) -> Result<(), E> {
    let r0 = rhs(u, t)?;
    rk3_step_from(u, &r0, rhs, t, dt)
}

/// RK3 step reusing an already evaluated `r(u)` (the multistep startup stores
/// that evaluation anyway).
pub fn rk3_step_from<V: StateVector, E>(
    u: &mut V,
    r0: &V,
    rhs: &mut dyn FnMut(&mut V, f64) -> Result<V, E>,
    t: f64,
    dt: f64,
) -> Result<(), E> {
    let mut u1 = u.clone();
    u1.axpy(dt, r0);
    let r1 = rhs(&mut u1, t + dt)?;
    let mut u2 = u.clone();
    u2.scale(0.75);
    u2.axpy(0.25, &u1);
    u2.axpy(0.25 * dt, &r1);
    let r2 = rhs(&mut u2, t + 0.5 * dt)?;
    u.scale(1.0 / 3.0);
    u.axpy(2.0 / 3.0, &u2);
    u.axpy(2.0 / 3.0 * dt, &r2);
    Ok(())
}

/// The third-order SSP multistep combination
/// `u_{n+1} = 16/27 (u_n + 3 dt r_n) + 11/27 (u_{n-3} + 12/11 dt r_{n-3})`.
pub fn msstep3_combine<V: StateVector>(u_n: &V, r_n: &V, u_nm3: &V, r_nm3: &V, dt: f64) -> V {
    let mut out = u_n.clone();
    out.scale(16.0 / 27.0);
    out.axpy(16.0 / 9.0 * dt, r_n);
    out.axpy(11.0 / 27.0, u_nm3);
    out.axpy(4.0 / 9.0 * dt, r_nm3);
    out
}

#[derive(Debug, Clone)]
pub struct AdvanceConfig {
    pub kind: IntegratorKind,
    pub dt: f64,
    pub n_steps: usize,
    /// sorted step indices at which `on_snapshot` fires (0 = initial state)
    pub snapshot_steps: Vec<usize>,
}

/// Abort raised by the right-hand side or the observer, tagged with the step
/// that produced it.
#[derive(Debug)]
pub struct AdvanceAbort<E> {
    pub step: usize,
    pub error: E,
}

/// March `n_steps` of size `dt` from `u0`. The multistep scheme is started
/// with three RK3 steps whose initial right-hand-side evaluations seed the
/// history ring; every later step reuses the stored `r(u_{n-3})`. `observe`
/// runs after every step (and once on the initial state) and may abort the
/// run; `on_snapshot` fires at the requested step indices.
pub fn advance<V: StateVector, E>(
    mut u: V,
    rhs: &mut dyn FnMut(&mut V, f64) -> Result<V, E>,
    cfg: &AdvanceConfig,
    on_snapshot: &mut dyn FnMut(usize, f64, &V),
    observe: &mut dyn FnMut(usize, f64, &V) -> Result<(), E>,
) -> Result<V, AdvanceAbort<E>> {
    assert!(cfg.dt > 0.0 || cfg.n_steps == 0, "positive step size required");
    let wrap = |step: usize| move |error: E| AdvanceAbort { step, error };

    observe(0, 0.0, &u).map_err(wrap(0))?;
    if cfg.snapshot_steps.binary_search(&0).is_ok() {
        on_snapshot(0, 0.0, &u);
    }

    // (state, rhs) pairs for the three levels behind the current one
    let mut history: VecDeque<(V, V)> = VecDeque::with_capacity(3);

    for n in 0..cfg.n_steps {
        let t = n as f64 * cfg.dt;
        match cfg.kind {
            IntegratorKind::Euler => euler_step(&mut u, rhs, t, cfg.dt).map_err(wrap(n))?,
            IntegratorKind::Rk2 => rk2_step(&mut u, rhs, t, cfg.dt).map_err(wrap(n))?,
            IntegratorKind::Rk3 => rk3_step(&mut u, rhs, t, cfg.dt).map_err(wrap(n))?,
            IntegratorKind::MsStep3 => {
                let r = rhs(&mut u, t).map_err(wrap(n))?;
                if n < 3 {
                    history.push_back((u.clone(), r.clone()));
                    rk3_step_from(&mut u, &r, rhs, t, cfg.dt).map_err(wrap(n))?;
                } else {
                    let (u_old, r_old) = history.pop_front().expect("warmup filled the history");
                    let next = msstep3_combine(&u, &r, &u_old, &r_old, cfg.dt);
                    history.push_back((std::mem::replace(&mut u, next), r));
                }
            }
        }
        let step = n + 1;
        let t1 = step as f64 * cfg.dt;
        observe(step, t1, &u).map_err(wrap(step))?;
        if cfg.snapshot_steps.binary_search(&step).is_ok() {
            on_snapshot(step, t1, &u);
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    type NoErr = std::convert::Infallible;

    fn decay(u: &mut f64, _t: f64) -> Result<f64, NoErr> {
        Ok(-*u)
    }

    #[test]
    fn euler_reference_values() {
        let mut u = 1.0;
        euler_step(&mut u, &mut decay, 0.0, 0.1).unwrap();
        assert!((u - 0.9).abs() < 1e-15);
        let mut u = 3.3;
        euler_step(&mut u, &mut |_, _| Ok::<f64, NoErr>(0.0), 0.0, 0.1).unwrap();
        assert_eq!(u, 3.3);
    }

    #[test]
    fn rk2_reference_values() {
        let mut u = 1.0;
        rk2_step(&mut u, &mut decay, 0.0, 0.1).unwrap();
        assert!((u - 0.905).abs() < 1e-15, "{u}");
        let mut u = 2.0;
        rk2_step(&mut u, &mut |_, _| Ok::<f64, NoErr>(0.0), 0.0, 0.5).unwrap();
        assert_eq!(u, 2.0);
    }

    #[test]
    fn rk3_reference_values() {
        let mut u = 1.0;
        rk3_step(&mut u, &mut decay, 0.0, 0.1).unwrap();
        assert!((u - 0.9048333333333333).abs() < 1e-14, "{u}");
        assert!((u - (-0.1_f64).exp()).abs() < 5e-6);
        let mut u = -0.7;
        rk3_step(&mut u, &mut |_, _| Ok::<f64, NoErr>(0.0), 0.0, 0.2).unwrap();
        assert_eq!(u, -0.7);
    }

    #[test]
    fn rk3_is_cubic_taylor_on_linear_problems() {
        for lam in [-1.0, 0.5, 2.0] {
            for dt in [0.05, 0.1] {
                let mut u = 1.0;
                rk3_step(&mut u, &mut |v: &mut f64, _| Ok::<f64, NoErr>(lam * *v), 0.0, dt)
                    .unwrap();
                let z = lam * dt;
                let taylor = 1.0 + z + z * z / 2.0 + z * z * z / 6.0;
                assert!((u - taylor).abs() < 1e-14, "lambda {lam} dt {dt}: {u} vs {taylor}");
            }
        }
    }

    #[test]
    fn msstep3_combination_reference_values() {
        // r = 0, all history equal: the combination is a convex average
        let out = msstep3_combine(&2.5, &0.0, &2.5, &0.0, 0.1);
        assert!((out - 2.5).abs() < 1e-15);
        // u' = 1 with exact history reproduces linear growth exactly
        let dt = 0.05;
        let t_n = 1.0;
        let out = msstep3_combine(&t_n, &1.0, &(t_n - 3.0 * dt), &1.0, dt);
        assert!((out - (t_n + dt)).abs() < 1e-14, "{out}");
    }

    fn advance_decay(kind: IntegratorKind, n: usize) -> f64 {
        let cfg = AdvanceConfig { kind, dt: 1.0 / n as f64, n_steps: n, snapshot_steps: vec![] };
        advance(1.0_f64, &mut decay, &cfg, &mut |_, _, _| {}, &mut |_, _, _| Ok(()))
            .unwrap_or_else(|_| unreachable!())
    }

    fn observed_order(kind: IntegratorKind) -> f64 {
        let exact = (-1.0_f64).exp();
        let e1 = (advance_decay(kind, 20) - exact).abs();
        let e2 = (advance_decay(kind, 40) - exact).abs();
        (e1 / e2).log2()
    }

    #[test]
    fn integrator_orders_on_linear_decay() {
        assert!(observed_order(IntegratorKind::Euler) >= 0.95);
        assert!(observed_order(IntegratorKind::Rk2) >= 1.95);
        assert!(observed_order(IntegratorKind::Rk3) >= 2.95);
        assert!(observed_order(IntegratorKind::MsStep3) >= 2.95);
    }

    #[test]
    fn dense_rk3_integration_hits_exp() {
        let u = advance_decay(IntegratorKind::Rk3, 1000);
        assert!((u - (-1.0_f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn msstep3_tracks_rk3_trajectory() {
        let a = advance_decay(IntegratorKind::MsStep3, 1000);
        let b = advance_decay(IntegratorKind::Rk3, 1000);
        assert!((a - b).abs() < 1e-7, "gap {}", (a - b).abs());
    }

    #[test]
    fn all_integrators_exact_for_constant_rhs() {
        for kind in [
            IntegratorKind::Euler,
            IntegratorKind::Rk2,
            IntegratorKind::Rk3,
            IntegratorKind::MsStep3,
        ] {
            let cfg = AdvanceConfig { kind, dt: 0.05, n_steps: 20, snapshot_steps: vec![] };
            let u = advance(
                2.0_f64,
                &mut |_, _| Ok::<f64, NoErr>(3.0),
                &cfg,
                &mut |_, _, _| {},
                &mut |_, _, _| Ok(()),
            )
            .unwrap_or_else(|_| unreachable!());
            assert!((u - (2.0 + 3.0)).abs() < 1e-12, "{:?}: {u}", kind);
        }
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let cfg = AdvanceConfig {
            kind: IntegratorKind::Rk3,
            dt: 0.0,
            n_steps: 0,
            snapshot_steps: vec![0],
        };
        let mut snaps = Vec::new();
        let u = advance(
            7.5_f64,
            &mut decay,
            &cfg,
            &mut |s, t, v| snaps.push((s, t, *v)),
            &mut |_, _, _| Ok(()),
        )
        .unwrap_or_else(|_| unreachable!());
        assert_eq!(u, 7.5);
        assert_eq!(snaps, vec![(0, 0.0, 7.5)]);
    }

    #[test]
    fn observer_abort_carries_step_index() {
        let cfg = AdvanceConfig {
            kind: IntegratorKind::Euler,
            dt: 0.1,
            n_steps: 10,
            snapshot_steps: vec![],
        };
        let r = advance(
            1.0_f64,
            &mut |u: &mut f64, _| Ok::<f64, &'static str>(-*u),
            &cfg,
            &mut |_, _, _| {},
            &mut |step, _, _| if step >= 4 { Err("too far") } else { Ok(()) },
        );
        match r {
            Err(abort) => {
                assert_eq!(abort.step, 4);
                assert_eq!(abort.error, "too far");
            }
            Ok(_) => panic!("expected abort"),
        }
    }

    /// 1D periodic upwind advection used as the SSP positivity probe.
    fn upwind_1d(u: &[f64], a: f64, dx: f64) -> Vec<f64> {
        let n = u.len();
        (0..n)
            .map(|i| {
                let um = u[(i + n - 1) % n];
                -a * (u[i] - um) / dx
            })
            .collect()
    }

    #[test]
    fn ssp_schemes_inherit_euler_positivity() {
        let n = 40;
        let dx = 1.0 / n as f64;
        let a = 1.0;
        let dt0 = dx / a; // forward Euler positivity limit for this operator
        let bump: Vec<f64> = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * dx;
                (-(x - 0.5).powi(2) / 0.01).exp()
            })
            .collect();
        let run = |kind: IntegratorKind, dt: f64, steps: usize| -> f64 {
            let cfg = AdvanceConfig { kind, dt, n_steps: steps, snapshot_steps: vec![] };
            let out = advance(
                bump.clone(),
                &mut |u: &mut Vec<f64>, _| Ok::<Vec<f64>, NoErr>(upwind_1d(u, a, dx)),
                &cfg,
                &mut |_, _, _| {},
                &mut |_, _, _| Ok(()),
            )
            .unwrap_or_else(|_| unreachable!());
            out.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        assert!(run(IntegratorKind::Euler, dt0, 30) >= -1e-14);
        assert!(run(IntegratorKind::Rk2, dt0, 30) >= -1e-14);
        assert!(run(IntegratorKind::Rk3, dt0, 30) >= -1e-14);
        assert!(run(IntegratorKind::MsStep3, dt0 / 3.0, 90) >= -1e-14);
    }
}

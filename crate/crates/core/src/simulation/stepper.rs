//! One split time step in TT format.

use super::config::{SimulationConfig, StepOrder};
use crate::advection::{advect_multivariate, advect_univariate, AdvectionMode, AdvectionPlan};
use crate::error::Result;
use crate::field::{density, field_to_tt, poisson_solve, SpatialField};
use crate::grid::{Axis, PhaseSpaceGrid};
use crate::interpolation::Scheme;
use crate::tt::{TTTensor, TruncationControl};

/// `ε_step = (j / N_t) ε_final` for `1 ≤ j ≤ N_t`.
pub fn tolerance_schedule(j: usize, steps: usize, epsilon: f64) -> f64 {
    debug_assert!(j >= 1 && j <= steps.max(1));
    j as f64 / steps.max(1) as f64 * epsilon
}

/// Everything a time step needs besides the state.
#[derive(Clone, Debug)]
pub struct Stepper {
    pub grid: PhaseSpaceGrid,
    pub dt: f64,
    pub x_scheme: Scheme,
    pub v_scheme: Scheme,
    /// Relaxed CFL factor for spatial advection.
    pub m: usize,
    pub mode: AdvectionMode,
    pub matrix_tol_factor: f64,
    pub order: StepOrder,
}

impl Stepper {
    pub fn from_config(cfg: &SimulationConfig) -> Result<Self> {
        Ok(Self {
            grid: cfg.grid()?,
            dt: cfg.time.dt,
            x_scheme: cfg.x_scheme(),
            v_scheme: cfg.v_scheme(),
            m: cfg.tt.m,
            mode: cfg.tt.mode.into(),
            matrix_tol_factor: cfg.tt.matrix_tol_factor,
            order: cfg.time.step_order,
        })
    }

    fn plan(&self, target: usize, coeff: Vec<usize>, dt: f64, h: f64, scheme: Scheme, m: usize, ctrl: &TruncationControl) -> AdvectionPlan {
        AdvectionPlan {
            target,
            coefficient_axes: coeff,
            dt,
            spacing: h,
            scheme,
            m,
            ctrl: *ctrl,
            mode: self.mode,
            matrix_tol_factor: self.matrix_tol_factor,
        }
    }

    /// `f_t + v·∇_x f = 0` over `dt`, one spatial axis after the other.
    pub fn advect_x(&self, f: &TTTensor, dt: f64, ctrl: &TruncationControl) -> Result<TTTensor> {
        let g = &self.grid;
        let mut f = f.clone();
        for i in 0..g.spatial_dims() {
            let plan = self.plan(
                g.position(Axis::X(i)),
                vec![g.position(Axis::V(i))],
                dt,
                g.dx(i),
                self.x_scheme,
                self.m,
                ctrl,
            );
            f = advect_univariate(&f, &plan, &g.v_nodes(i))?;
        }
        Ok(f)
    }

    /// `f_t − E·∇_v f = 0` over `dt`: the foot of the characteristic is `v + dt E`.
    pub fn advect_v(&self, f: &TTTensor, e: &[SpatialField], dt: f64, ctrl: &TruncationControl) -> Result<TTTensor> {
        let g = &self.grid;
        let d = g.spatial_dims();
        let x_axes: Vec<usize> = (0..d).map(|i| g.position(Axis::X(i))).collect();
        let mut f = f.clone();
        for (i, ei) in e.iter().enumerate() {
            let target = g.position(Axis::V(i));
            let minus_e: Vec<f64> = ei.values.data().iter().map(|x| -x).collect();
            if d == 1 {
                let plan = self.plan(target, x_axes.clone(), dt, g.dv(i), self.v_scheme, 1, ctrl);
                f = advect_univariate(&f, &plan, &minus_e)?;
            } else {
                let field = SpatialField::new(crate::tt::DenseTensor::new(ei.shape().to_vec(), minus_e)?, ei.spacing.clone())?;
                let e_tt = field_to_tt(&field, ctrl)?;
                let plan = self.plan(target, x_axes.clone(), dt, g.dv(i), self.v_scheme, 1, ctrl);
                f = advect_multivariate(&f, &plan, &e_tt)?;
            }
        }
        Ok(f)
    }

    pub fn field(&self, f: &TTTensor) -> Result<Vec<SpatialField>> {
        Ok(poisson_solve(&density(f, &self.grid)?)?.e)
    }

    /// Advances `f` by one `dt`. `e` is the field at the start of the step
    /// (used by the printed order); the returned field belongs to the
    /// mid-step density.
    pub fn step(&self, f: &TTTensor, e: &[SpatialField], ctrl: &TruncationControl) -> Result<(TTTensor, Vec<SpatialField>)> {
        let dt = self.dt;
        match self.order {
            StepOrder::Standard => {
                let f = self.advect_x(f, 0.5 * dt, ctrl)?;
                let e_new = self.field(&f)?;
                let f = self.advect_v(&f, &e_new, dt, ctrl)?;
                let f = self.advect_x(&f, 0.5 * dt, ctrl)?;
                Ok((f, e_new))
            }
            StepOrder::Printed => {
                let f = self.advect_v(f, e, 0.5 * dt, ctrl)?;
                let f = self.advect_x(&f, 0.5 * dt, ctrl)?;
                let e_new = self.field(&f)?;
                let f = self.advect_v(&f, &e_new, 0.5 * dt, ctrl)?;
                Ok((f, e_new))
            }
        }
    }
}

/// One split step; see [`Stepper::step`].
pub fn strang_step(
    f: &TTTensor,
    e: &[SpatialField],
    stepper: &Stepper,
    ctrl: &TruncationControl,
) -> Result<(TTTensor, Vec<SpatialField>)> {
    stepper.step(f, e, ctrl)
}

//! Dense full-grid split-step solver, used as the correctness oracle and the
//! performance baseline for the tensor-train path.

use crate::error::{Error, Result};
use crate::field::{poisson_solve, SpatialField};
use crate::grid::{Axis, PhaseSpaceGrid};
use crate::interpolation::{interpolate_line, Scheme};
use crate::simulation::cases::case_value;
use crate::simulation::diagnostics::dense_diagnostics;
use crate::simulation::run::{FinalState, Recorder, RunOutput};
use crate::simulation::{SimulationConfig, StepOrder};
use crate::tt::{DenseTensor, DENSE_LIMIT};

/// Interpolates every line along `target` with a constant displacement (in
/// cells) that depends on the indices of `coeff_axes`.
///
/// `displacement` is indexed column-major over `coeff_axes` in the listed order.
pub fn dense_advect(
    f: &DenseTensor,
    target: usize,
    coeff_axes: &[usize],
    displacement: &[f64],
    scheme: Scheme,
    m: usize,
) -> Result<DenseTensor> {
    let shape = f.shape().to_vec();
    if target >= shape.len() || coeff_axes.iter().any(|&c| c >= shape.len() || c == target) {
        return Err(Error::Structure("advection axes out of range".into()));
    }
    let expected: usize = coeff_axes.iter().map(|&c| shape[c]).product();
    if displacement.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "{} displacements for {expected} coefficient lines",
            displacement.len()
        )));
    }
    let n = shape[target];
    let stride = f.stride(target);
    let mut out = f.clone();
    let mut line = vec![0.0; n];
    // Iterate over all indices with the target index pinned to 0.
    let mut outer = shape.clone();
    outer[target] = 1;
    let mut idx = vec![0; shape.len()];
    let count: usize = outer.iter().product();
    for _ in 0..count {
        let mut di = 0;
        let mut step = 1;
        for &c in coeff_axes {
            di += idx[c] * step;
            step *= shape[c];
        }
        let start = f.linear_index(&idx);
        for (j, l) in line.iter_mut().enumerate() {
            *l = f.data()[start + j * stride];
        }
        let new = interpolate_line(&line, displacement[di], scheme, m)?;
        let data = out.data_mut();
        for (j, v) in new.into_iter().enumerate() {
            data[start + j * stride] = v;
        }
        crate::tt::dense_increment(&mut idx, &outer);
    }
    Ok(out)
}

/// `Σ_v f Π Δv` on the full grid.
pub fn dense_density(f: &DenseTensor, grid: &PhaseSpaceGrid) -> Result<SpatialField> {
    let d = grid.spatial_dims();
    let ordering = grid.ordering();
    let mut rho = DenseTensor::zeros(grid.nx().to_vec());
    let dv: f64 = (0..d).map(|i| grid.dv(i)).product();
    let mut idx = vec![0; ordering.len()];
    let mut xi = vec![0; d];
    let shape = f.shape().to_vec();
    for &value in f.data() {
        for (k, a) in ordering.iter().enumerate() {
            if let Axis::X(i) = *a {
                xi[i] = idx[k];
            }
        }
        let li = rho.linear_index(&xi);
        rho.data_mut()[li] += value * dv;
        crate::tt::dense_increment(&mut idx, &shape);
    }
    SpatialField::new(rho, (0..d).map(|i| grid.dx(i)).collect())
}

/// Rejects full grids above [`DENSE_LIMIT`] points.
pub fn check_dense_size(grid: &PhaseSpaceGrid) -> Result<()> {
    let entries = grid.mode_sizes().iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
    match entries {
        Some(e) if e <= DENSE_LIMIT => Ok(()),
        _ => Err(Error::SizeGuard {
            entries: entries.unwrap_or(usize::MAX),
            limit: DENSE_LIMIT,
        }),
    }
}

/// Electric field on the full grid from a dense distribution.
pub fn dense_field(f: &DenseTensor, grid: &PhaseSpaceGrid) -> Result<Vec<SpatialField>> {
    Ok(poisson_solve(&dense_density(f, grid)?)?.e)
}

/// Full-grid counterpart of [`crate::simulation::Stepper`]: same schemes,
/// sub-step order and field solve.
#[derive(Clone, Debug)]
pub struct DenseStepper {
    pub grid: PhaseSpaceGrid,
    pub dt: f64,
    pub x_scheme: Scheme,
    pub v_scheme: Scheme,
    pub m: usize,
    pub order: StepOrder,
}

impl DenseStepper {
    pub fn from_config(cfg: &SimulationConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        check_dense_size(&grid)?;
        Ok(Self {
            grid,
            dt: cfg.time.dt,
            x_scheme: cfg.x_scheme(),
            v_scheme: cfg.v_scheme(),
            m: cfg.tt.m,
            order: cfg.time.step_order,
        })
    }

    pub fn advect_x(&self, f: &DenseTensor, dt: f64) -> Result<DenseTensor> {
        let g = &self.grid;
        let mut f = f.clone();
        for i in 0..g.spatial_dims() {
            let disp: Vec<f64> = g.v_nodes(i).iter().map(|v| dt * v / g.dx(i)).collect();
            check_cfl(g.position(Axis::X(i)), &disp, self.m)?;
            f = dense_advect(&f, g.position(Axis::X(i)), &[g.position(Axis::V(i))], &disp, self.x_scheme, self.m)?;
        }
        Ok(f)
    }

    pub fn advect_v(&self, f: &DenseTensor, e: &[SpatialField], dt: f64) -> Result<DenseTensor> {
        let g = &self.grid;
        let x_axes: Vec<usize> = (0..g.spatial_dims()).map(|i| g.position(Axis::X(i))).collect();
        let mut f = f.clone();
        for (i, ei) in e.iter().enumerate() {
            let disp: Vec<f64> = ei.values.data().iter().map(|x| -dt * x / g.dv(i)).collect();
            check_cfl(g.position(Axis::V(i)), &disp, 1)?;
            f = dense_advect(&f, g.position(Axis::V(i)), &x_axes, &disp, self.v_scheme, 1)?;
        }
        Ok(f)
    }

    pub fn field(&self, f: &DenseTensor) -> Result<Vec<SpatialField>> {
        dense_field(f, &self.grid)
    }

    pub fn step(&self, f: &DenseTensor, e: &[SpatialField]) -> Result<(DenseTensor, Vec<SpatialField>)> {
        let dt = self.dt;
        match self.order {
            StepOrder::Standard => {
                let f = self.advect_x(f, 0.5 * dt)?;
                let e_new = self.field(&f)?;
                let f = self.advect_v(&f, &e_new, dt)?;
                Ok((self.advect_x(&f, 0.5 * dt)?, e_new))
            }
            StepOrder::Printed => {
                let f = self.advect_v(f, e, 0.5 * dt)?;
                let f = self.advect_x(&f, 0.5 * dt)?;
                let e_new = self.field(&f)?;
                Ok((self.advect_v(&f, &e_new, 0.5 * dt)?, e_new))
            }
        }
    }
}

fn check_cfl(axis: usize, disp: &[f64], m: usize) -> Result<()> {
    let worst = disp.iter().fold(0.0f64, |w, a| w.max(a.abs()));
    if worst > m as f64 + 1e-12 {
        return Err(Error::Cfl {
            axis,
            displacement: worst,
            bound: m as f64,
        });
    }
    Ok(())
}

/// Initial condition sampled on the full grid.
pub fn dense_initial(cfg: &SimulationConfig, grid: &PhaseSpaceGrid) -> Result<DenseTensor> {
    check_dense_size(grid)?;
    let d = grid.spatial_dims();
    let nodes = grid.nodes();
    let ordering = grid.ordering().to_vec();
    let (mut x, mut v) = (vec![0.0; d], vec![0.0; d]);
    Ok(DenseTensor::from_fn(grid.mode_sizes(), |idx| {
        for (k, a) in ordering.iter().enumerate() {
            match *a {
                Axis::X(i) => x[i] = nodes[k][idx[k]],
                Axis::V(i) => v[i] = nodes[k][idx[k]],
            }
        }
        case_value(&cfg.case, &x, &v)
    }))
}

/// Full-grid run with the same step order, schemes and field solver as the
/// tensor-train run.
pub fn dense_run(cfg: &SimulationConfig) -> Result<RunOutput> {
    let stepper = DenseStepper::from_config(cfg)?;
    let grid = &stepper.grid;
    let mut f = dense_initial(cfg, grid)?;
    let mut e = stepper.field(&f)?;
    cfg.check_field_bound(e.iter().map(SpatialField::max_abs).fold(0.0, f64::max))?;
    let mut rec = Recorder::new(cfg);
    let full_ranks = vec![0; grid.dims() + 1];
    rec.push(dense_diagnostics(0.0, &f, &e, grid)?, full_ranks.clone(), &e);
    for j in 1..=cfg.steps() {
        f = stepper.step(&f, &e)?.0;
        e = stepper.field(&f)?;
        if rec.wants(j) {
            rec.push(dense_diagnostics(j as f64 * cfg.time.dt, &f, &e, grid)?, full_ranks.clone(), &e);
        }
    }
    Ok(rec.finish(FinalState::Dense(f)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_displacement_is_identity() {
        let f = DenseTensor::from_fn(vec![6, 5], |i| (i[0] * 3 + i[1]) as f64);
        for scheme in [Scheme::Linear, Scheme::Lagrange(5), Scheme::CubicSpline] {
            let g = dense_advect(&f, 0, &[1], &[0.0; 5], scheme, 1).unwrap();
            assert!(g.max_abs_diff(&f) < 1e-12);
        }
    }

    #[test]
    fn integer_displacement_is_circular_shift() {
        let f = DenseTensor::from_fn(vec![3, 8], |i| ((i[1] * 5 + i[0]) % 7) as f64);
        let g = dense_advect(&f, 1, &[0], &[1.0, 2.0, -1.0], Scheme::CubicSpline, 2).unwrap();
        for a in 0..3 {
            let s = [1isize, 2, -1][a];
            for i in 0..8 {
                let src = (i as isize - s).rem_euclid(8) as usize;
                assert!((g.get(&[a, i]) - f.get(&[a, src])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn displacement_indexing_over_two_axes() {
        let f = DenseTensor::from_fn(vec![4, 2, 3], |i| (i[0] + 4 * i[1] + 8 * i[2]) as f64);
        // line (j, k) moves by j + 2k cells modulo 4
        let disp: Vec<f64> = (0..6).map(|l| ((l % 2) + (l / 2)) as f64 % 2.0).collect();
        let g = dense_advect(&f, 0, &[1, 2], &disp, Scheme::Linear, 2).unwrap();
        for j in 0..2 {
            for k in 0..3 {
                let s = disp[j + 2 * k] as usize;
                for i in 0..4 {
                    assert_eq!(g.get(&[i, j, k]), f.get(&[(i + 4 - s) % 4, j, k]));
                }
            }
        }
    }

    #[test]
    fn density_of_separable_function() {
        let grid = PhaseSpaceGrid::uniform(2, 4, 8, 1.0, 2.0).unwrap();
        let sizes = grid.mode_sizes();
        let f = DenseTensor::from_fn(sizes, |i| 1.0 + i[1] as f64 + 10.0 * i[2] as f64);
        let rho = dense_density(&f, &grid).unwrap();
        let dv = grid.dv(0) * grid.dv(1);
        for a in 0..4 {
            for b in 0..4 {
                let expect = 64.0 * dv * (1.0 + a as f64 + 10.0 * b as f64);
                assert!((rho.values.get(&[a, b]) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn size_guard() {
        let big = PhaseSpaceGrid::uniform(3, 32, 128, 1.0, 6.0).unwrap();
        assert!(matches!(check_dense_size(&big), Err(Error::SizeGuard { .. })));
        let small = PhaseSpaceGrid::uniform(1, 32, 128, 1.0, 6.0).unwrap();
        assert!(check_dense_size(&small).is_ok());
    }

    fn config(text_extra: &str, solver: &str) -> SimulationConfig {
        let text = format!(
            r#"
[run]
solver = "{solver}"
[grid]
spatial_dims = 1
nx = 16
nv = 32
[case]
id = "landau_aligned"
alpha = 0.1
[time]
dt = 0.125
t_final = 1.0
[tt]
epsilon = 0.0
{text_extra}
"#
        );
        SimulationConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn equilibrium_has_no_field() {
        let mut cfg = config("", "dense");
        cfg.case.alpha = 0.0;
        let out = dense_run(&cfg).unwrap();
        assert!(out.records.iter().all(|r| r.electric_energy_total() <= 1e-20));
    }

    #[test]
    fn dense_mass_drift_per_step() {
        let cfg = config("", "dense");
        let out = dense_run(&cfg).unwrap();
        for w in out.records.windows(2) {
            assert!((w[1].mass - w[0].mass).abs() <= 1e-12 * w[0].mass);
        }
    }

    #[test]
    fn unrounded_tt_run_matches_dense_run() {
        for order in ["standard", "printed"] {
            let extra = format!("[output]\nefield = true");
            let mut tt = config(&extra, "tt");
            tt.time.step_order = if order == "standard" { StepOrder::Standard } else { StepOrder::Printed };
            tt.tt.schedule = false;
            let mut dense = tt.clone();
            dense.run.solver = crate::simulation::SolverKind::Dense;
            let a = crate::simulation::run(&tt).unwrap();
            let b = crate::simulation::run(&dense).unwrap();
            let diff = a.final_state.to_dense().unwrap().max_abs_diff(&b.final_state.to_dense().unwrap());
            assert!(diff <= 1e-10, "{order}: {diff}");
        }
    }
}

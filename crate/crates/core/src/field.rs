//! Charge density, periodic spectral Poisson solve and the electric field.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseSpaceGrid};
use crate::tt::{DenseTensor, TTTensor, TruncationControl};

/// A dense array over the spatial axes (first axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialField {
    pub values: DenseTensor,
    pub spacing: Vec<f64>,
}

impl SpatialField {
    pub fn new(values: DenseTensor, spacing: Vec<f64>) -> Result<Self> {
        if values.shape().len() != spacing.len() {
            return Err(Error::ShapeMismatch("one spacing per spatial axis required".into()));
        }
        Ok(Self { values, spacing })
    }

    pub fn from_fn(grid: &PhaseSpaceGrid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let d = grid.spatial_dims();
        let nodes: Vec<Vec<f64>> = (0..d).map(|i| grid.x_nodes(i)).collect();
        let mut x = vec![0.0; d];
        let values = DenseTensor::from_fn(grid.nx().to_vec(), |idx| {
            for k in 0..d {
                x[k] = nodes[k][idx[k]];
            }
            f(&x)
        });
        Self {
            values,
            spacing: (0..d).map(|i| grid.dx(i)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        self.values.shape()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.shape().iter().zip(&self.spacing).map(|(&n, h)| n as f64 * h).collect()
    }

    pub fn cell(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn mean(&self) -> f64 {
        self.values.sum() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.data().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `Π Δx Σ u²`.
    pub fn l2_sq(&self) -> f64 {
        self.cell() * self.values.data().iter().map(|x| x * x).sum::<f64>()
    }
}

/// `ρ(x) = Σ_v f(x, v) Π Δv`: velocity kernels are contracted with the
/// rectangle-rule weight vector.
pub fn density(f: &TTTensor, grid: &PhaseSpaceGrid) -> Result<SpatialField> {
    if f.mode_sizes() != grid.mode_sizes() {
        return Err(Error::ShapeMismatch(format!(
            "tensor sizes {:?} vs grid sizes {:?}",
            f.mode_sizes(),
            grid.mode_sizes()
        )));
    }
    let weights: Vec<Option<Vec<f64>>> = grid
        .ordering()
        .iter()
        .map(|a| match *a {
            Axis::V(i) => Some(vec![grid.dv(i); grid.nv()[i]]),
            Axis::X(_) => None,
        })
        .collect();
    let refs: Vec<Option<&[f64]>> = weights.iter().map(|w| w.as_deref()).collect();
    let spatial = f.partial_contract(&refs)?;
    let d = grid.spatial_dims();
    SpatialField::new(spatial.to_dense()?, (0..d).map(|i| grid.dx(i)).collect())
}

/// Electrostatic potential and field components.
#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub phi: SpatialField,
    pub e: Vec<SpatialField>,
}

/// Solves `−Δφ = 1 − ρ`, `E = −∇φ` on the periodic box by FFT; the zero
/// mode of the source is discarded.
pub fn poisson_solve(rho: &SpatialField) -> Result<PoissonSolution> {
    let shape = rho.shape().to_vec();
    if shape.iter().any(|n| !n.is_power_of_two()) {
        return Err(Error::ShapeMismatch(format!(
            "spectral Poisson solve needs power-of-two sizes, got {shape:?}"
        )));
    }
    let lengths = rho.lengths();
    let source: Vec<Complex<f64>> = rho.values.data().iter().map(|r| Complex::new(1.0 - r, 0.0)).collect();
    let mean = source.iter().map(|c| c.re).sum::<f64>() / source.len() as f64;
    if mean.abs() > 1e-8 {
        log::debug!("discarding mean {mean:.3e} of the Poisson source");
    }
    let mut planner = FftPlanner::new();
    let mut hat = source;
    fft_all_axes(&mut planner, &mut hat, &shape, false);

    let wave: Vec<Vec<f64>> = shape
        .iter()
        .zip(&lengths)
        .map(|(&n, &l)| (0..n).map(|j| 2.0 * PI / l * signed_frequency(j, n) as f64).collect())
        .collect();
    let total = hat.len();
    let d = shape.len();
    let mut idx = vec![0usize; d];
    let mut phi_hat = vec![Complex::new(0.0, 0.0); total];
    for p in phi_hat.iter_mut().zip(&hat) {
        let k2: f64 = idx.iter().enumerate().map(|(a, &j)| wave[a][j] * wave[a][j]).sum();
        *p.0 = if k2 == 0.0 { Complex::new(0.0, 0.0) } else { *p.1 / k2 };
        crate::tt::dense_increment(&mut idx, &shape);
    }
    let scale = 1.0 / total as f64;
    let mut e = Vec::with_capacity(d);
    for axis in 0..d {
        let n = shape[axis];
        let mut eh = phi_hat.clone();
        let mut idx = vec![0usize; d];
        for v in eh.iter_mut() {
            let j = idx[axis];
            // The Nyquist mode of an odd derivative has no real counterpart.
            let kappa = if 2 * j == n { 0.0 } else { wave[axis][j] };
            *v *= Complex::new(0.0, -kappa);
            crate::tt::dense_increment(&mut idx, &shape);
        }
        fft_all_axes(&mut planner, &mut eh, &shape, true);
        let values = DenseTensor::new(shape.clone(), eh.iter().map(|c| c.re * scale).collect())?;
        e.push(SpatialField::new(values, rho.spacing.clone())?);
    }
    let mut phi = phi_hat;
    fft_all_axes(&mut planner, &mut phi, &shape, true);
    let phi = SpatialField::new(
        DenseTensor::new(shape.clone(), phi.iter().map(|c| c.re * scale).collect())?,
        rho.spacing.clone(),
    )?;
    Ok(PoissonSolution { phi, e })
}

fn signed_frequency(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// In-place unnormalized FFT along every axis of a column-major array.
fn fft_all_axes(planner: &mut FftPlanner<f64>, data: &mut [Complex<f64>], shape: &[usize], inverse: bool) {
    let mut stride = 1;
    let total = data.len();
    for &n in shape {
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let mut line = vec![Complex::new(0.0, 0.0); n];
        let block = stride * n;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[start + offset + j * stride];
                }
                fft.process(&mut line);
                for (j, l) in line.iter().enumerate() {
                    data[start + offset + j * stride] = *l;
                }
            }
        }
        stride = block;
    }
}

/// TT-SVD of a field component at a quarter of the given budget.
pub fn field_to_tt(e: &SpatialField, ctrl: &TruncationControl) -> Result<TTTensor> {
    TTTensor::from_dense(&e.values, &ctrl.scaled(0.25))
}

/// `½ Π Δx Σ E_j²` for each component.
pub fn electric_energy(e: &[SpatialField]) -> Vec<f64> {
    e.iter().map(|c| 0.5 * c.l2_sq()).collect()
}

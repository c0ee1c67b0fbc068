//! Semi-Lagrangian advection of a tensor-train distribution along one axis.

use crate::error::{Error, Result};
use crate::interpolation::{build_univariate_operator, build_weight_tensors, Scheme};
use crate::tt::{
    round_window, shifted_weighted_sum, structured_product, Kernel, MatrixKernel, ShiftTerm, TTMatrix, TTTensor, TruncationControl,
};

/// How the univariate propagation operator is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdvectionMode {
    /// One rounded structured product with the full stencil operator.
    Kernelwise,
    /// One shifted, fiber-scaled copy per stencil offset, summed with rounding.
    MatrixSplit,
}

/// Parameters of one advection sub-step.
///
/// `target` and `coefficient_axes` are tensor positions. The displacement on
/// the target axis is `dt · c` where `c` lives on the coefficient axes.
#[derive(Clone, Debug)]
pub struct AdvectionPlan {
    pub target: usize,
    pub coefficient_axes: Vec<usize>,
    pub dt: f64,
    /// Grid spacing of the target axis.
    pub spacing: f64,
    pub scheme: Scheme,
    /// Relaxed CFL factor: displacements up to `m` cells.
    pub m: usize,
    pub ctrl: TruncationControl,
    pub mode: AdvectionMode,
    /// Operator rounding threshold relative to `ctrl.epsilon`.
    pub matrix_tol_factor: f64,
}

impl AdvectionPlan {
    fn validate(&self, dims: usize) -> Result<()> {
        if self.target >= dims || self.coefficient_axes.iter().any(|&c| c >= dims) {
            return Err(Error::Structure("advection axis out of range".into()));
        }
        if self.coefficient_axes.contains(&self.target) {
            return Err(Error::Structure("target axis cannot be a coefficient axis".into()));
        }
        if self.coefficient_axes.is_empty() {
            return Err(Error::Structure("at least one coefficient axis is required".into()));
        }
        self.scheme.validate()
    }
}

/// Advects along `plan.target` with a displacement `dt · coeff[k]` depending on
/// one coefficient axis.
///
/// Both advection paths spend half of `plan.ctrl` on the truncations inside the
/// product and half on a closing sweep over the bonds the product touched. The
/// blockwise truncations use thresholds well below `ε`; without the closing
/// sweep their excess rank accumulates from step to step.
pub fn advect_univariate(f: &TTTensor, plan: &AdvectionPlan, coeff: &[f64]) -> Result<TTTensor> {
    Ok(advect_univariate_report(f, plan, coeff)?.0)
}

/// [`advect_univariate`] together with the bond ranks of the unrounded product
/// (kernel-wise mode) or of the input (split mode).
pub fn advect_univariate_report(f: &TTTensor, plan: &AdvectionPlan, coeff: &[f64]) -> Result<(TTTensor, Vec<usize>)> {
    let d = f.dims();
    plan.validate(d)?;
    if plan.coefficient_axes.len() != 1 {
        return Err(Error::Structure("univariate advection takes exactly one coefficient axis".into()));
    }
    let c_axis = plan.coefficient_axes[0];
    let sizes = f.mode_sizes();
    if coeff.len() != sizes[c_axis] {
        return Err(Error::ShapeMismatch(format!(
            "{} coefficient values for an axis of size {}",
            coeff.len(),
            sizes[c_axis]
        )));
    }
    let amax = coeff.iter().fold(0.0f64, |m, c| m.max((plan.dt * c / plan.spacing).abs()));
    if amax > plan.m.max(1) as f64 + 1e-12 {
        return Err(Error::Cfl {
            axis: plan.target,
            displacement: amax,
            bound: plan.m.max(1) as f64,
        });
    }
    if amax == 0.0 {
        return Ok((f.clone(), f.ranks()));
    }
    let pair = build_univariate_operator(plan.scheme, sizes[plan.target], coeff, plan.dt, plan.spacing, plan.m)?;
    let op = embed_pair(&pair, &sizes, plan.target, c_axis)?;
    let half = plan.ctrl.scaled(0.5);
    match plan.mode {
        AdvectionMode::Kernelwise => {
            let mut out = structured_product(f, &op, &half)?;
            if let Some((lo, hi)) = out.window {
                round_window(&mut out.tensor, lo, hi, &half, false);
            }
            Ok((out.tensor, out.pre_round_ranks))
        }
        AdvectionMode::MatrixSplit => {
            let up = f.orthogonalized(plan.target);
            let up = match plan.scheme.prefilter() {
                Some(p) => crate::tt::map_fibers(&up, plan.target, |x| p.apply(x)),
                None => up,
            };
            let offsets = plan.scheme.offsets(plan.m);
            let weights = pair.kernel(1).payload();
            let mut terms = Vec::with_capacity(offsets.len());
            for (j, &o) in offsets.iter().enumerate() {
                let w = weights.fiber(j, 0);
                if w.iter().all(|&x| x == 0.0) {
                    continue;
                }
                let mut kernels: Vec<MatrixKernel> = sizes.iter().map(|&n| MatrixKernel::identity(n)).collect();
                kernels[c_axis] = MatrixKernel::diagonal(Kernel::from_vector(w.to_vec()));
                terms.push(ShiftTerm {
                    shifts: vec![(plan.target, o)],
                    weights: TTMatrix::new(kernels)?,
                });
            }
            let out = shifted_weighted_sum(&up, &terms, &plan.ctrl)?;
            Ok((out, f.ranks()))
        }
    }
}

/// Places a two-kernel (target, coefficient) operator into `sizes.len()`
/// dimensions; axes strictly between the two carry the operator rank through
/// identity kernels.
pub fn embed_pair(pair: &TTMatrix, sizes: &[usize], target: usize, coeff_axis: usize) -> Result<TTMatrix> {
    let rank = pair.ranks()[1];
    let (lo, hi) = (target.min(coeff_axis), target.max(coeff_axis));
    let (first, second) = if target < coeff_axis {
        (pair.kernel(0).clone(), pair.kernel(1).clone())
    } else {
        (pair.kernel(1).transposed_ranks(), pair.kernel(0).transposed_ranks())
    };
    let kernels = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            if k == lo {
                first.clone()
            } else if k == hi {
                second.clone()
            } else if k > lo && k < hi {
                pass_through(n, rank)
            } else {
                MatrixKernel::identity(n)
            }
        })
        .collect();
    TTMatrix::new(kernels)
}

fn pass_through(n: usize, rank: usize) -> MatrixKernel {
    MatrixKernel::diagonal(Kernel::from_fn(rank, n, rank, |a, _, b| if a == b { 1.0 } else { 0.0 }))
}

/// Diagonal operator over all axes whose diagonal is `w` on `positions`
/// (increasing) and constant elsewhere.
pub fn extend_diagonal(w: &TTTensor, positions: &[usize], sizes: &[usize]) -> Result<TTMatrix> {
    if w.dims() != positions.len() || positions.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::Structure("weight axes must be increasing positions, one per kernel".into()));
    }
    let mut kernels = Vec::with_capacity(sizes.len());
    let mut next = 0;
    for (k, &n) in sizes.iter().enumerate() {
        if next < positions.len() && positions[next] == k {
            if w.kernel(next).size() != n {
                return Err(Error::ShapeMismatch("weight mode size differs from tensor".into()));
            }
            kernels.push(MatrixKernel::diagonal(w.kernel(next).clone()));
            next += 1;
        } else {
            // rank carried across: right rank of the previous weight kernel
            let rank = if next == 0 || next == positions.len() { 1 } else { w.kernel(next - 1).right() };
            kernels.push(pass_through(n, rank));
        }
    }
    TTMatrix::new(kernels)
}

/// Advects along `plan.target` with the displacement `dt · e(x)` where `e` is a
/// tensor over `plan.coefficient_axes` (increasing positions).
///
/// Velocity advection passes `e = −E_k`, so that the foot point is `v + Δt E_k`.
pub fn advect_multivariate(f: &TTTensor, plan: &AdvectionPlan, e: &TTTensor) -> Result<TTTensor> {
    let d = f.dims();
    plan.validate(d)?;
    let p = match plan.scheme {
        Scheme::Lagrange(p) => p,
        other => {
            return Err(Error::Scheme(format!(
                "multivariate advection needs centered Lagrange interpolation, got {other:?}"
            )))
        }
    };
    if plan.m > 1 {
        return Err(Error::Scheme("relaxed CFL is not available for multivariate advection".into()));
    }
    let sizes = f.mode_sizes();
    let mut axes = plan.coefficient_axes.clone();
    axes.sort_unstable();
    if axes != plan.coefficient_axes {
        return Err(Error::Structure("coefficient axes must be listed in increasing order".into()));
    }
    if e.dims() != axes.len() || axes.iter().zip(e.mode_sizes()).any(|(&k, n)| sizes[k] != n) {
        return Err(Error::ShapeMismatch("coefficient tensor does not match its axes".into()));
    }
    let displacement = e.scaled(plan.dt / plan.spacing);
    let amax = crate::interpolation::max_abs(&displacement)?;
    if amax > 1.0 + 1e-12 {
        return Err(Error::Cfl {
            axis: plan.target,
            displacement: amax,
            bound: 1.0,
        });
    }
    if amax == 0.0 {
        return Ok(f.clone());
    }
    let weight_ctrl = plan.ctrl.scaled(plan.matrix_tol_factor);
    let weights = build_weight_tensors(&displacement, plan.scheme, &plan.ctrl)?;
    let h = (p as isize - 1) / 2;
    let mut terms = Vec::with_capacity(p);
    for (w, o) in weights.iter().zip(-h..=h) {
        let w = w.round(&weight_ctrl);
        if w.norm() == 0.0 {
            continue;
        }
        terms.push(ShiftTerm {
            shifts: vec![(plan.target, o)],
            weights: extend_diagonal(&w, &axes, &sizes)?,
        });
    }
    let up = f.orthogonalized(plan.target);
    shifted_weighted_sum(&up, &terms, &plan.ctrl)
}

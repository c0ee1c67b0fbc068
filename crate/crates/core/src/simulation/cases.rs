//! Analytic initial distributions, assembled directly in TT form.
//!
//! Every case has the form `f₀ = S(x) · Π_i g_i(v_i)` with a low-rank spatial
//! factor `S`, so no full-grid array is ever formed.

use std::f64::consts::PI;

use super::config::{CaseId, CaseSection};
use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseSpaceGrid};
use crate::tt::{Kernel, TTTensor, TruncationControl};

pub fn maxwellian(v: f64) -> f64 {
    (-0.5 * v * v).exp() / (2.0 * PI).sqrt()
}

/// Two counter-streaming Maxwellians centered at `±v0`, unit mass.
pub fn two_stream(v: f64, v0: f64) -> f64 {
    0.5 * ((-0.5 * (v - v0).powi(2)).exp() + (-0.5 * (v + v0).powi(2)).exp()) / (2.0 * PI).sqrt()
}

/// Pointwise value of the initial condition.
pub fn case_value(case: &CaseSection, x: &[f64], v: &[f64]) -> f64 {
    let (a, k) = (case.alpha, case.k);
    match case.id {
        CaseId::LandauAligned => {
            (1.0 + a * x.iter().map(|xi| (k * xi).cos()).sum::<f64>()) * v.iter().map(|&vi| maxwellian(vi)).product::<f64>()
        }
        CaseId::LandauDiag => (1.0 + a * (k * x.iter().sum::<f64>()).cos()) * v.iter().map(|&vi| maxwellian(vi)).product::<f64>(),
        CaseId::TwoStream1d => (1.0 + a * (k * x[0]).cos()) * two_stream(v[0], case.v0),
        CaseId::TwoStream4dEquilibrium => (1.0 + a * (k * x[0]).cos()) * two_stream(v[0], case.v0) * maxwellian(v[1]),
        CaseId::TwoStream4dProduct => {
            (1.0 + a * ((k * x[0]).cos() + (k * x[1]).cos())) * two_stream(v[0], case.v0) * two_stream(v[1], case.v0)
        }
    }
}

fn check_case(case: &CaseSection, d: usize) -> Result<()> {
    if !(case.alpha.is_finite() && case.k.is_finite() && case.v0.is_finite()) {
        return Err(Error::Config("case parameters must be finite".into()));
    }
    match case.id {
        CaseId::TwoStream1d if d != 1 => Err(Error::Config("two_stream_1d needs one spatial dimension".into())),
        CaseId::TwoStream4dEquilibrium | CaseId::TwoStream4dProduct if d != 2 => {
            Err(Error::Config(format!("{:?} needs two spatial dimensions", case.id)))
        }
        _ => Ok(()),
    }
}

/// `1 + α cos(k Σ x_l)` as a rank-3 TT over the spatial axes.
///
/// The cosine of a sum carries `(cos, sin)` of the partial sum through rank-2
/// rotation kernels.
fn diagonal_cosine(nodes: &[Vec<f64>], alpha: f64, k: f64) -> Result<TTTensor> {
    let d = nodes.len();
    let ones = TTTensor::ones(&nodes.iter().map(Vec::len).collect::<Vec<_>>());
    if d == 1 {
        let c: Vec<f64> = nodes[0].iter().map(|x| alpha * (k * x).cos()).collect();
        return ones.add(&TTTensor::rank_one(vec![c]));
    }
    let kernels = nodes
        .iter()
        .enumerate()
        .map(|(l, xs)| {
            let n = xs.len();
            let (cs, sn): (Vec<f64>, Vec<f64>) = xs.iter().map(|x| ((k * x).cos(), (k * x).sin())).unzip();
            if l == 0 {
                Kernel::from_fn(1, n, 2, |_, i, b| if b == 0 { alpha * cs[i] } else { alpha * sn[i] })
            } else if l == d - 1 {
                Kernel::from_fn(2, n, 1, |a, i, _| if a == 0 { cs[i] } else { -sn[i] })
            } else {
                // (C, S) ← (C cos θ − S sin θ, S cos θ + C sin θ)
                Kernel::from_fn(2, n, 2, |a, i, b| match (a, b) {
                    (0, 0) | (1, 1) => cs[i],
                    (0, 1) => sn[i],
                    _ => -sn[i],
                })
            }
        })
        .collect();
    ones.add(&TTTensor::new(kernels)?)
}

/// Spatial factor `S` over the spatial axes (x₁, …, x_d).
fn spatial_factor(case: &CaseSection, grid: &PhaseSpaceGrid) -> Result<TTTensor> {
    let d = grid.spatial_dims();
    let nodes: Vec<Vec<f64>> = (0..d).map(|i| grid.x_nodes(i)).collect();
    let sizes: Vec<usize> = grid.nx().to_vec();
    let (a, k) = (case.alpha, case.k);
    let cosine_on = |l: usize| -> TTTensor {
        let vecs = (0..d)
            .map(|i| {
                if i == l {
                    nodes[i].iter().map(|x| a * (k * x).cos()).collect()
                } else {
                    vec![1.0; sizes[i]]
                }
            })
            .collect();
        TTTensor::rank_one(vecs)
    };
    let s = match case.id {
        CaseId::LandauDiag => diagonal_cosine(&nodes, a, k)?,
        CaseId::LandauAligned | CaseId::TwoStream4dProduct => {
            let mut s = TTTensor::ones(&sizes);
            for l in 0..d {
                s = s.add(&cosine_on(l))?;
            }
            s
        }
        CaseId::TwoStream1d | CaseId::TwoStream4dEquilibrium => TTTensor::ones(&sizes).add(&cosine_on(0))?,
    };
    // drops only round-off ranks
    Ok(s.round(&TruncationControl::new(1e-14 * s.norm())))
}

fn velocity_profile(case: &CaseSection, i: usize, v: &[f64]) -> Vec<f64> {
    let g: fn(f64, f64) -> f64 = match (case.id, i) {
        (CaseId::LandauAligned | CaseId::LandauDiag, _) | (CaseId::TwoStream4dEquilibrium, 1) => |v, _| maxwellian(v),
        _ => two_stream,
    };
    v.iter().map(|&vj| g(vj, case.v0)).collect()
}

/// Places the spatial factor on the x positions of the ordering and a diagonal
/// velocity profile on each v position.
fn assemble(s: &TTTensor, profiles: &[Vec<f64>], grid: &PhaseSpaceGrid) -> Result<TTTensor> {
    let mut kernels = Vec::with_capacity(grid.dims());
    let mut rank = 1;
    for axis in grid.ordering() {
        match *axis {
            Axis::X(i) => {
                let k = s.kernel(i).clone();
                rank = k.right();
                kernels.push(k);
            }
            Axis::V(i) => {
                let g = &profiles[i];
                kernels.push(Kernel::from_fn(rank, g.len(), rank, |a, j, b| if a == b { g[j] } else { 0.0 }));
            }
        }
    }
    TTTensor::new(kernels)
}

/// Initial distribution in TT form, rounded at `ctrl`.
pub fn init_case(case: &CaseSection, grid: &PhaseSpaceGrid, ctrl: &TruncationControl) -> Result<TTTensor> {
    let d = grid.spatial_dims();
    check_case(case, d)?;
    let s = spatial_factor(case, grid)?;
    let profiles: Vec<Vec<f64>> = (0..d).map(|i| velocity_profile(case, i, &grid.v_nodes(i))).collect();
    Ok(assemble(&s, &profiles, grid)?.round(ctrl))
}

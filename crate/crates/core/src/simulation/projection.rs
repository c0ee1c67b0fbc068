//! Projection onto the set of distributions with prescribed mass and momentum.

use faer::linalg::solvers::Solve;
use faer::Mat;

use super::diagnostics::{mass, momentum};
use crate::error::Result;
use crate::grid::{Axis, PhaseSpaceGrid};
use crate::tt::{TTTensor, TruncationControl};

/// Mass and momentum of a reference state.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservationTargets {
    pub mass: f64,
    pub momentum: Vec<f64>,
}

impl ConservationTargets {
    pub fn of(f: &TTTensor, grid: &PhaseSpaceGrid) -> Result<Self> {
        Ok(Self {
            mass: mass(f, grid)?,
            momentum: momentum(f, grid)?,
        })
    }
}

/// Rank-one tensor equal to `v_k` (`k < d`) or to 1 (`k = d`).
fn basis(grid: &PhaseSpaceGrid, k: usize) -> TTTensor {
    TTTensor::rank_one(
        grid.ordering()
            .iter()
            .map(|a| match *a {
                Axis::V(i) if i == k => grid.v_nodes(i),
                Axis::V(i) => vec![1.0; grid.nv()[i]],
                Axis::X(i) => vec![1.0; grid.nx()[i]],
            })
            .collect(),
    )
}

/// Correction `μ₀ + Σ_k μ_k v_k` (a sum of `d + 1` rank-one terms) that moves
/// `f` onto the targets.
///
/// The multipliers solve the Gram system of `{1, v_1, …, v_d}` over the grid,
/// which is exact even when `Σ_j v_j ≠ 0` on the node set.
pub fn projection_correction(f: &TTTensor, targets: &ConservationTargets, grid: &PhaseSpaceGrid) -> Result<TTTensor> {
    let d = grid.spatial_dims();
    let current = ConservationTargets::of(f, grid)?;
    let cell = grid.cell_volume();
    let total = grid.total_points() as f64;
    let vsum: Vec<f64> = (0..d).map(|i| grid.v_nodes(i).iter().sum()).collect();
    let vsq: Vec<f64> = (0..d).map(|i| grid.v_nodes(i).iter().map(|v| v * v).sum()).collect();
    let nv: Vec<f64> = grid.nv().iter().map(|&n| n as f64).collect();
    // Index 0 is the constant direction, 1..=d the velocities.
    let gram = Mat::<f64>::from_fn(d + 1, d + 1, |a, b| match (a, b) {
        (0, 0) => total,
        (0, k) | (k, 0) => total / nv[k - 1] * vsum[k - 1],
        (k, l) if k == l => total / nv[k - 1] * vsq[k - 1],
        (k, l) => total / (nv[k - 1] * nv[l - 1]) * vsum[k - 1] * vsum[l - 1],
    });
    let rhs = Mat::<f64>::from_fn(d + 1, 1, |a, _| {
        if a == 0 {
            (targets.mass - current.mass) / cell
        } else {
            (targets.momentum[a - 1] - current.momentum[a - 1]) / cell
        }
    });
    let mu = gram.partial_piv_lu().solve(&rhs);
    let mut corr = TTTensor::ones(&grid.mode_sizes()).scaled(mu[(0, 0)]);
    for k in 0..d {
        corr = corr.add(&basis(grid, k).scaled(mu[(k + 1, 0)]))?;
    }
    Ok(corr)
}

/// `f + correction`, rounded only at round-off level relative to `‖f‖` so that
/// the targets stay matched.
pub fn project_conserve(f: &TTTensor, targets: &ConservationTargets, grid: &PhaseSpaceGrid) -> Result<TTTensor> {
    let corr = projection_correction(f, targets, grid)?;
    let sum = f.add(&corr)?;
    Ok(sum.round(&TruncationControl::new(1e-13 * f.norm())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tt::Kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(grid: &PhaseSpaceGrid, rank: usize, seed: u64) -> TTTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = grid.mode_sizes();
        let d = sizes.len();
        let kernels = sizes
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let l = if k == 0 { 1 } else { rank };
                let r = if k == d - 1 { 1 } else { rank };
                Kernel::from_fn(l, n, r, |_, _, _| rng.gen_range(0.0..1.0))
            })
            .collect();
        TTTensor::new(kernels).unwrap()
    }

    fn rel(a: f64, b: f64, scale: f64) -> f64 {
        (a - b).abs() / scale
    }

    #[test]
    fn hits_targets_exactly() {
        for d in [1, 2] {
            let grid = PhaseSpaceGrid::landau(d, 8, 8, 0.5).unwrap();
            let f0 = random(&grid, 2, 1);
            let targets = ConservationTargets::of(&f0, &grid).unwrap();
            let perturbed = f0.add(&random(&grid, 2, 2).scaled(0.05)).unwrap();
            let p = project_conserve(&perturbed, &targets, &grid).unwrap();
            let got = ConservationTargets::of(&p, &grid).unwrap();
            assert!(rel(got.mass, targets.mass, targets.mass) <= 1e-10);
            for (a, b) in got.momentum.iter().zip(&targets.momentum) {
                assert!(rel(*a, *b, targets.mass) <= 1e-10);
            }
        }
    }

    #[test]
    fn already_conserving_is_unchanged() {
        let grid = PhaseSpaceGrid::landau(2, 8, 8, 0.5).unwrap();
        let f = random(&grid, 3, 5);
        let targets = ConservationTargets::of(&f, &grid).unwrap();
        let p = project_conserve(&f, &targets, &grid).unwrap();
        let diff = p.sub(&f).unwrap().to_dense().unwrap();
        assert!(diff.data().iter().all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn correction_adds_d_plus_one_ranks() {
        for d in [1, 2, 3] {
            let grid = PhaseSpaceGrid::landau(d, 4, 4, 0.5).unwrap();
            let f = random(&grid, 2, 7);
            let targets = ConservationTargets { mass: 1.0, momentum: vec![0.1; d] };
            let corr = projection_correction(&f, &targets, &grid).unwrap();
            let sum = f.add(&corr).unwrap();
            let expect: Vec<usize> = f.ranks().iter().enumerate().map(|(k, r)| if k == 0 || k == 2 * d { 1 } else { r + d + 1 }).collect();
            assert_eq!(sum.ranks(), expect);
        }
    }

    #[test]
    fn correction_is_orthogonal_to_conserved_directions_when_on_target() {
        // the correction of an on-target tensor vanishes
        let grid = PhaseSpaceGrid::landau(1, 8, 16, 0.5).unwrap();
        let f = random(&grid, 2, 11);
        let targets = ConservationTargets::of(&f, &grid).unwrap();
        let corr = projection_correction(&f, &targets, &grid).unwrap();
        assert!(corr.norm() <= 1e-12 * f.norm());
    }
}

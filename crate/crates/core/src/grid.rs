//! Phase-space grid and the map from physical axes to tensor positions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical meaning of one tensor axis; the index counts from 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X(usize),
    V(usize),
}

impl Axis {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, idx) = s.split_at(1.min(s.len()));
        let i: usize = idx
            .parse()
            .map_err(|_| Error::Config(format!("bad axis name {s:?}; expected x1, v2, ...")))?;
        if i == 0 {
            return Err(Error::Config(format!("axis numbers start at 1: {s:?}")));
        }
        match kind {
            "x" | "X" => Ok(Axis::X(i - 1)),
            "v" | "V" => Ok(Axis::V(i - 1)),
            _ => Err(Error::Config(format!("bad axis name {s:?}; expected x1, v2, ..."))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Axis::X(i) => format!("x{}", i + 1),
            Axis::V(i) => format!("v{}", i + 1),
        }
    }
}

/// Interleaved ordering `v1, x1, x2, v2, x3, v3` truncated to `2 d_x` axes.
pub fn default_ordering(spatial_dims: usize) -> Vec<Axis> {
    let full = [Axis::V(0), Axis::X(0), Axis::X(1), Axis::V(1), Axis::X(2), Axis::V(2)];
    full[..2 * spatial_dims].to_vec()
}

/// Uniform periodic grid on `Π [x_min, x_max) × Π [v_min, v_max)`.
///
/// Node `j` of an axis sits at `min + j·h` with `h = (max − min)/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceGrid {
    nx: Vec<usize>,
    nv: Vec<usize>,
    x_range: Vec<(f64, f64)>,
    v_range: Vec<(f64, f64)>,
    ordering: Vec<Axis>,
}

impl PhaseSpaceGrid {
    pub fn new(
        nx: Vec<usize>,
        nv: Vec<usize>,
        x_range: Vec<(f64, f64)>,
        v_range: Vec<(f64, f64)>,
        ordering: Option<Vec<Axis>>,
    ) -> Result<Self> {
        let d = nx.len();
        if !(1..=3).contains(&d) {
            return Err(Error::Config(format!("spatial dimension must be 1, 2 or 3, got {d}")));
        }
        if nv.len() != d || x_range.len() != d || v_range.len() != d {
            return Err(Error::Config("per-axis lists must all have spatial_dims entries".into()));
        }
        for &n in nx.iter().chain(&nv) {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::Config(format!("grid sizes must be powers of two ≥ 2, got {n}")));
            }
        }
        for &(lo, hi) in x_range.iter().chain(&v_range) {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::Config(format!("invalid interval [{lo}, {hi}]")));
            }
        }
        let ordering = ordering.unwrap_or_else(|| default_ordering(d));
        let mut seen_x = Vec::new();
        let mut seen_v = Vec::new();
        for ax in &ordering {
            match *ax {
                Axis::X(i) if i < d => seen_x.push(i),
                Axis::V(i) if i < d => seen_v.push(i),
                other => return Err(Error::Config(format!("axis {} out of range", other.name()))),
            }
        }
        let increasing = |v: &[usize]| v.len() == d && v.iter().enumerate().all(|(k, &i)| k == i);
        if !increasing(&seen_x) || !increasing(&seen_v) {
            return Err(Error::Config(
                "ordering must list every axis once, with x axes and v axes each in increasing order".into(),
            ));
        }
        Ok(Self {
            nx,
            nv,
            x_range,
            v_range,
            ordering,
        })
    }

    /// Cube grid with the same counts and intervals on every axis.
    pub fn uniform(spatial_dims: usize, nx: usize, nv: usize, x_max: f64, v_max: f64) -> Result<Self> {
        Self::new(
            vec![nx; spatial_dims],
            vec![nv; spatial_dims],
            vec![(0.0, x_max); spatial_dims],
            vec![(-v_max, v_max); spatial_dims],
            None,
        )
    }

    /// Landau domain `[0, 2π/k)` per spatial axis, `[-6, 6)` in velocity.
    pub fn landau(spatial_dims: usize, nx: usize, nv: usize, k: f64) -> Result<Self> {
        Self::uniform(spatial_dims, nx, nv, 2.0 * PI / k, 6.0)
    }

    pub fn spatial_dims(&self) -> usize {
        self.nx.len()
    }

    pub fn dims(&self) -> usize {
        self.ordering.len()
    }

    pub fn ordering(&self) -> &[Axis] {
        &self.ordering
    }

    pub fn nx(&self) -> &[usize] {
        &self.nx
    }

    pub fn nv(&self) -> &[usize] {
        &self.nv
    }

    pub fn x_range(&self, i: usize) -> (f64, f64) {
        self.x_range[i]
    }

    pub fn v_range(&self, i: usize) -> (f64, f64) {
        self.v_range[i]
    }

    pub fn dx(&self, i: usize) -> f64 {
        let (lo, hi) = self.x_range[i];
        (hi - lo) / self.nx[i] as f64
    }

    pub fn dv(&self, i: usize) -> f64 {
        let (lo, hi) = self.v_range[i];
        (hi - lo) / self.nv[i] as f64
    }

    pub fn x_length(&self, i: usize) -> f64 {
        let (lo, hi) = self.x_range[i];
        hi - lo
    }

    pub fn x_nodes(&self, i: usize) -> Vec<f64> {
        let (lo, _) = self.x_range[i];
        (0..self.nx[i]).map(|j| lo + j as f64 * self.dx(i)).collect()
    }

    pub fn v_nodes(&self, i: usize) -> Vec<f64> {
        let (lo, _) = self.v_range[i];
        (0..self.nv[i]).map(|j| lo + j as f64 * self.dv(i)).collect()
    }

    pub fn position(&self, axis: Axis) -> usize {
        self.ordering
            .iter()
            .position(|&a| a == axis)
            .expect("validated ordering contains every axis")
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.ordering
            .iter()
            .map(|a| match *a {
                Axis::X(i) => self.nx[i],
                Axis::V(i) => self.nv[i],
            })
            .collect()
    }

    pub fn total_points(&self) -> usize {
        self.mode_sizes().iter().product()
    }

    /// `Π Δx_i`.
    pub fn spatial_cell(&self) -> f64 {
        (0..self.spatial_dims()).map(|i| self.dx(i)).product()
    }

    /// `Π Δx_i · Π Δv_i`.
    pub fn cell_volume(&self) -> f64 {
        self.spatial_cell() * (0..self.spatial_dims()).map(|i| self.dv(i)).product::<f64>()
    }

    pub fn spatial_volume(&self) -> f64 {
        (0..self.spatial_dims()).map(|i| self.x_length(i)).product()
    }

    /// Per-axis node vectors in tensor order.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        self.ordering
            .iter()
            .map(|a| match *a {
                Axis::X(i) => self.x_nodes(i),
                Axis::V(i) => self.v_nodes(i),
            })
            .collect()
    }
}

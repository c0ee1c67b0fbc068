//! Semi-Lagrangian interpolation weights and the propagation operators built
//! from them.
//!
//! Convention: a normalized displacement `a` (in cells) means the new value at
//! node `i` is the old profile evaluated at `i - a`. A weight at offset `j`
//! multiplies the old value at node `i + j`.

use crate::error::{Error, Result};
use crate::tt::{
    hadamard_rounded, Kernel, MatrixKernel, Prefilter, TTMatrix, TTTensor, TruncationControl,
};

/// Slack allowed on CFL-type bounds before rejecting a displacement.
const CFL_SLACK: f64 = 1e-12;

/// Interpolation family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Two-point linear interpolation.
    Linear,
    /// Centered Lagrange interpolation on an odd number of nodes.
    Lagrange(usize),
    /// Periodic cubic spline.
    CubicSpline,
}

impl Scheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Scheme::Lagrange(p) if p % 2 == 0 || p == 0 => {
                Err(Error::Scheme(format!("Lagrange interpolation needs an odd point count, got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// Stencil offsets for displacements with `|a| ≤ m`.
    pub fn offsets(&self, m: usize) -> Vec<isize> {
        let m = m.max(1) as isize;
        match *self {
            Scheme::Linear => (-m..=m).collect(),
            Scheme::Lagrange(p) => {
                let h = (p as isize - 1) / 2;
                (-(m - 1) - h..=(m - 1) + h).collect()
            }
            Scheme::CubicSpline => (-m - 1..=m + 1).collect(),
        }
    }

    pub fn prefilter(&self) -> Option<Prefilter> {
        match self {
            Scheme::CubicSpline => Some(Prefilter::CubicSpline),
            _ => None,
        }
    }

    /// Weights aligned with [`Scheme::offsets`]; for the spline they act on
    /// prefiltered coefficients.
    pub fn weights(&self, a: f64, m: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let mi = m.max(1);
        let bound = mi as f64;
        if !a.is_finite() || a.abs() > bound + CFL_SLACK {
            return Err(Error::Cfl {
                axis: 0,
                displacement: a.abs(),
                bound,
            });
        }
        let a = a.clamp(-bound, bound);
        let offsets = self.offsets(mi);
        let first = offsets[0];
        let mut w = vec![0.0; offsets.len()];
        let m = mi as isize;
        match *self {
            Scheme::Linear => {
                let (l, theta) = split_position(-a, m);
                w[(l - first) as usize] += 1.0 - theta;
                w[(l + 1 - first) as usize] += theta;
            }
            Scheme::Lagrange(p) => {
                // Center node moves by whole cells so the remainder stays in (-1, 1).
                let s = ((-a).trunc() as isize).clamp(-(m - 1), m - 1);
                let local = lagrange_weights(a + s as f64, p)?;
                let h = (p as isize - 1) / 2;
                for (q, lw) in local.iter().enumerate() {
                    w[(s - h + q as isize - first) as usize] += lw;
                }
            }
            Scheme::CubicSpline => {
                let (l, theta) = split_position(-a, m);
                for (q, bw) in bspline_weights(theta).iter().enumerate() {
                    w[(l - 1 + q as isize - first) as usize] += bw;
                }
            }
        }
        Ok(w)
    }
}

/// `t = l + θ` with `l ∈ [-m, m-1]` and `θ ∈ [0, 1]`.
fn split_position(t: f64, m: isize) -> (isize, f64) {
    let mut l = t.floor() as isize;
    let mut theta = t - l as f64;
    if l >= m {
        l = m - 1;
        theta = t - l as f64;
    }
    if l < -m {
        l = -m;
        theta = t - l as f64;
    }
    (l, theta)
}

/// `(w_{-1}, w_0, w_{+1})` for `|a| ≤ 1`.
pub fn linear_weights(a: f64) -> Result<[f64; 3]> {
    if !a.is_finite() || a.abs() > 1.0 + CFL_SLACK {
        return Err(Error::Cfl {
            axis: 0,
            displacement: a.abs(),
            bound: 1.0,
        });
    }
    Ok([a.max(0.0), 1.0 - a.abs(), (-a).max(0.0)])
}

/// Lagrange cardinal weights on nodes `-(p-1)/2 ..= (p-1)/2`, evaluated at `-a`.
pub fn lagrange_weights(a: f64, p: usize) -> Result<Vec<f64>> {
    Scheme::Lagrange(p).validate()?;
    if !a.is_finite() || a.abs() > 1.0 + CFL_SLACK {
        return Err(Error::Cfl {
            axis: 0,
            displacement: a.abs(),
            bound: 1.0,
        });
    }
    let h = (p as isize - 1) / 2;
    let t = -a;
    Ok((-h..=h)
        .map(|o| {
            (-h..=h)
                .filter(|&q| q != o)
                .map(|q| (t - q as f64) / (o - q) as f64)
                .product()
        })
        .collect())
}

/// Coefficients in `a` (ascending powers) of every Lagrange cardinal weight.
pub fn lagrange_polynomials(p: usize) -> Result<Vec<Vec<f64>>> {
    Scheme::Lagrange(p).validate()?;
    let h = (p as isize - 1) / 2;
    Ok((-h..=h)
        .map(|o| {
            // Π_{q≠o} (t - q)/(o - q) expanded in t, then t = -a.
            let mut poly = vec![1.0];
            for q in (-h..=h).filter(|&q| q != o) {
                let denom = (o - q) as f64;
                let mut next = vec![0.0; poly.len() + 1];
                for (k, c) in poly.iter().enumerate() {
                    next[k + 1] += c / denom;
                    next[k] -= c * q as f64 / denom;
                }
                poly = next;
            }
            poly.iter()
                .enumerate()
                .map(|(k, c)| if k % 2 == 1 { -c } else { *c })
                .collect()
        })
        .collect())
}

/// Uniform cubic B-spline weights at offsets `l-1 ..= l+2` for fraction `θ`.
pub fn bspline_weights(theta: f64) -> [f64; 4] {
    let t = theta;
    let u = 1.0 - t;
    [
        u * u * u / 6.0,
        (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
        (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
        t * t * t / 6.0,
    ]
}

/// Replaces periodic samples by their cubic B-spline coefficients, i.e. solves
/// the circulant system `(c_{i-1} + 4 c_i + c_{i+1}) / 6 = f_i`.
pub fn spline_coefficients_in_place(f: &mut [f64]) {
    let n = f.len();
    match n {
        0 | 1 => {}
        2 => {
            // [[4, 2], [2, 4]] / 6
            let (a, b) = (f[0], f[1]);
            f[0] = (4.0 * a - 2.0 * b) / 2.0;
            f[1] = (4.0 * b - 2.0 * a) / 2.0;
        }
        _ => cyclic_tridiagonal_solve(f, 1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0),
    }
}

/// Sherman–Morrison solve of a constant-coefficient cyclic tridiagonal system.
fn cyclic_tridiagonal_solve(r: &mut [f64], sub: f64, diag: f64, sup: f64) {
    let n = r.len();
    let gamma = -diag;
    // Corner entries: A[0][n-1] = sub, A[n-1][0] = sup.
    let (alpha, beta) = (sup, sub);
    let mut bb = vec![diag; n];
    bb[0] = diag - gamma;
    bb[n - 1] = diag - alpha * beta / gamma;
    let mut x = r.to_vec();
    thomas(&bb, sub, sup, &mut x);
    let mut z = vec![0.0; n];
    z[0] = gamma;
    z[n - 1] = alpha;
    thomas(&bb, sub, sup, &mut z);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    for ((ri, xi), zi) in r.iter_mut().zip(&x).zip(&z) {
        *ri = xi - fact * zi;
    }
}

fn thomas(diag: &[f64], sub: f64, sup: f64, x: &mut [f64]) {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    x[0] /= beta;
    for i in 1..n {
        c[i] = sup / beta;
        beta = diag[i] - sub * c[i];
        x[i] = (x[i] - sub * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i + 1] * x[i + 1];
    }
}

/// Periodic cubic-spline interpolant of `values` evaluated at nodes shifted by `-a` cells.
pub fn spline_shift_1d(values: &[f64], a: f64) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut c = values.to_vec();
    spline_coefficients_in_place(&mut c);
    let t = -a;
    let l = t.floor();
    let w = bspline_weights(t - l);
    let l = l as i64;
    let nn = n as i64;
    (0..nn)
        .map(|i| {
            w.iter()
                .enumerate()
                .map(|(q, wq)| wq * c[(i + l - 1 + q as i64).rem_euclid(nn) as usize])
                .sum()
        })
        .collect()
}

/// Applies `scheme` along one periodic line with normalized displacement `a`.
pub fn interpolate_line(values: &[f64], a: f64, scheme: Scheme, m: usize) -> Result<Vec<f64>> {
    let offsets = scheme.offsets(m);
    let w = scheme.weights(a, m)?;
    let mut src = values.to_vec();
    if let Some(p) = scheme.prefilter() {
        p.apply(&mut src);
    }
    let n = values.len() as isize;
    Ok((0..n)
        .map(|i| {
            offsets
                .iter()
                .zip(&w)
                .map(|(&o, wo)| wo * src[(i + o).rem_euclid(n) as usize])
                .sum()
        })
        .collect())
}

/// Propagation operator `Σ_j S_j ⊗ diag(w_j(a_k))` on the pair (target axis,
/// coefficient axis), with `a_k = Δt·coeff_k/Δx`.
///
/// Kernel 0 is the stencil over the target axis (size `n_target`), kernel 1 the
/// diagonal weights over the coefficient axis.
pub fn build_univariate_operator(
    scheme: Scheme,
    n_target: usize,
    coeff: &[f64],
    dt: f64,
    dx: f64,
    m: usize,
) -> Result<TTMatrix> {
    scheme.validate()?;
    let offsets = scheme.offsets(m);
    let rank = offsets.len();
    let mut diag = Kernel::zeros(rank, coeff.len(), 1);
    for (k, &c) in coeff.iter().enumerate() {
        let a = dt * c / dx;
        let w = scheme.weights(a, m).map_err(|e| match e {
            Error::Cfl { bound, .. } => Error::Cfl {
                axis: 0,
                displacement: a.abs(),
                bound,
            },
            other => other,
        })?;
        for (j, wj) in w.iter().enumerate() {
            diag.fiber_mut(j, 0)[k] = *wj;
        }
    }
    // Row β of the stencil kernel selects offset β.
    let band = Kernel::from_fn(1, rank, rank, |_, o, b| if o == b { 1.0 } else { 0.0 });
    let stencil = MatrixKernel::stencil(n_target, offsets, scheme.prefilter(), band)?;
    TTMatrix::new(vec![stencil, MatrixKernel::diagonal(diag)])
}

/// Largest absolute entry of a tensor, evaluated on the full grid.
pub(crate) fn max_abs(t: &TTTensor) -> Result<f64> {
    Ok(t.to_dense()?.data().iter().fold(0.0, |m, x| m.max(x.abs())))
}

/// Diagonal weight operators `W_o = L_o(a)` for a normalized displacement
/// tensor `a`, one per Lagrange node, computed from rounded Hadamard powers.
pub fn build_weight_tt(displacement: &TTTensor, scheme: Scheme, ctrl: &TruncationControl) -> Result<Vec<TTMatrix>> {
    Ok(build_weight_tensors(displacement, scheme, ctrl)?
        .iter()
        .map(TTMatrix::diagonal)
        .collect())
}

/// Tensor form of [`build_weight_tt`].
pub fn build_weight_tensors(displacement: &TTTensor, scheme: Scheme, ctrl: &TruncationControl) -> Result<Vec<TTTensor>> {
    let p = match scheme {
        Scheme::Lagrange(p) => p,
        other => {
            return Err(Error::Scheme(format!(
                "multivariate weights need centered Lagrange interpolation, got {other:?}"
            )))
        }
    };
    scheme.validate()?;
    let amax = max_abs(displacement)?;
    if amax > 1.0 + CFL_SLACK {
        return Err(Error::Cfl {
            axis: 0,
            displacement: amax,
            bound: 1.0,
        });
    }
    let quarter = ctrl.scaled(0.25);
    let sizes = displacement.mode_sizes();
    let mut powers = vec![TTTensor::ones(&sizes), displacement.round(&quarter)];
    for _ in 2..p {
        let next = hadamard_rounded(powers.last().expect("non-empty"), &powers[1], &quarter)?;
        powers.push(next);
    }
    let polys = lagrange_polynomials(p)?;
    polys
        .iter()
        .map(|coef| {
            let mut acc: Option<TTTensor> = None;
            for (c, pw) in coef.iter().zip(&powers) {
                if *c == 0.0 {
                    continue;
                }
                let term = pw.scaled(*c);
                acc = Some(match acc {
                    Some(a) => a.add(&term)?.round(&quarter),
                    None => term,
                });
            }
            Ok(acc.unwrap_or_else(|| TTTensor::zeros(&sizes)))
        })
        .collect()
}

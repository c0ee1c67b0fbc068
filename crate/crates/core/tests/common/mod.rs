//! Randomized small-grid cases shared by the property tests and the
//! acceptance suite. Every case compares a tensor-train operation with the
//! same operation carried out on the full grid.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttsl_core::advection::{advect_multivariate, advect_univariate, AdvectionMode, AdvectionPlan};
use ttsl_core::interpolation::Scheme;
use ttsl_core::reference::dense_advect;
use ttsl_core::tt::{hadamard_rounded, DenseTensor, Kernel, TTTensor, TruncationControl};

/// Outcome of one oracle comparison: passes when `error ≤ bound`.
#[derive(Clone, Debug)]
pub struct CaseResult {
    pub name: &'static str,
    pub error: f64,
    pub bound: f64,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.error <= self.bound
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sizes(rng: &mut ChaCha8Rng, min_dims: usize, min_size: usize) -> Vec<usize> {
    let d = rng.gen_range(min_dims..=4);
    (0..d).map(|_| rng.gen_range(min_size..=8)).collect()
}

/// Tensor train with uniform entries in `[-1, 1)` and random interior ranks.
pub fn random_tt(rng: &mut ChaCha8Rng, sizes: &[usize], max_rank: usize) -> TTTensor {
    let d = sizes.len();
    let ranks: Vec<usize> = (0..=d)
        .map(|k| if k == 0 || k == d { 1 } else { rng.gen_range(1..=max_rank) })
        .collect();
    let kernels = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| Kernel::from_fn(ranks[k], n, ranks[k + 1], |_, _, _| rng.gen_range(-1.0..1.0)))
        .collect();
    TTTensor::new(kernels).expect("consistent ranks")
}

/// A train whose ranks overstate its content: a dominant part plus a small
/// perturbation, so rounding has something to remove.
pub fn redundant_tt(rng: &mut ChaCha8Rng, sizes: &[usize]) -> TTTensor {
    let a = random_tt(rng, sizes, 3);
    let b = random_tt(rng, sizes, 3);
    let noise = 10f64.powf(rng.gen_range(-6.0..-1.0));
    a.add(&a.scaled(0.5)).unwrap().add(&b.scaled(noise)).unwrap()
}

/// Threshold between `1e-6` and `0.3` of the norm of `t`.
fn random_epsilon(rng: &mut ChaCha8Rng, t: &TTTensor) -> f64 {
    10f64.powf(rng.gen_range(-6.0..-0.5)) * t.norm()
}

fn dense(t: &TTTensor) -> DenseTensor {
    t.to_dense().expect("small grid")
}

fn frob(a: &DenseTensor, b: &DenseTensor) -> f64 {
    a.frobenius_diff(b)
}

/// Round-off allowance for exact identities, relative to a scale.
fn roundoff(scale: f64) -> f64 {
    1e-12 * scale.max(1.0)
}

/// `‖round(a, ε) − a‖_F` and `ε` for a random redundant train.
pub fn rounding_error(seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let sizes = random_sizes(&mut r, 2, 2);
    let a = redundant_tt(&mut r, &sizes);
    let eps = random_epsilon(&mut r, &a);
    let b = a.round(&TruncationControl::new(eps));
    (frob(&dense(&b), &dense(&a)), eps)
}

/// `‖hadamard_rounded(a, b, ε) − a∘b‖_F` and `ε` for random trains.
pub fn hadamard_error(seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let sizes = random_sizes(&mut r, 2, 2);
    let a = random_tt(&mut r, &sizes, 3);
    let b = random_tt(&mut r, &sizes, 3);
    let exact = a.hadamard_exact(&b).unwrap();
    let eps = random_epsilon(&mut r, &exact);
    let h = hadamard_rounded(&a, &b, &TruncationControl::new(eps)).unwrap();
    (frob(&dense(&h), &dense(&exact)), eps)
}

/// Number of distinct case kinds drawn by [`oracle_case`].
pub const CASE_KINDS: u64 = 9;

/// One randomized oracle comparison; the kind is `seed % CASE_KINDS`.
pub fn oracle_case(seed: u64) -> CaseResult {
    let mut r = rng(seed);
    match seed % CASE_KINDS {
        0 => {
            let (error, eps) = rounding_error(seed);
            CaseResult { name: "round", error, bound: eps * (1.0 + 1e-10) }
        }
        1 => {
            let sizes = random_sizes(&mut r, 2, 2);
            let a = dense(&redundant_tt(&mut r, &sizes));
            let eps = 10f64.powf(r.gen_range(-6.0..-0.5)) * a.norm();
            let t = TTTensor::from_dense(&a, &TruncationControl::new(eps)).unwrap();
            CaseResult { name: "from_dense", error: frob(&dense(&t), &a), bound: eps * (1.0 + 1e-10) }
        }
        2 => {
            let sizes = random_sizes(&mut r, 2, 2);
            let a = random_tt(&mut r, &sizes, 4);
            let b = random_tt(&mut r, &sizes, 4);
            let c = r.gen_range(-3.0..3.0);
            let (da, db) = (dense(&a), dense(&b));
            let lin = |f: &dyn Fn(f64, f64) -> f64| {
                DenseTensor::new(sizes.clone(), da.data().iter().zip(db.data()).map(|(x, y)| f(*x, *y)).collect()).unwrap()
            };
            let error = frob(&dense(&a.add(&b).unwrap()), &lin(&|x, y| x + y))
                .max(frob(&dense(&a.sub(&b).unwrap()), &lin(&|x, y| x - y)))
                .max(frob(&dense(&a.scaled(c)), &lin(&|x, _| c * x)));
            CaseResult { name: "add/sub/scale", error, bound: roundoff(da.norm() + db.norm()) * 3.0 }
        }
        3 => {
            let sizes = random_sizes(&mut r, 2, 2);
            let a = random_tt(&mut r, &sizes, 4);
            let b = random_tt(&mut r, &sizes, 4);
            let (da, db) = (dense(&a), dense(&b));
            let dot: f64 = da.data().iter().zip(db.data()).map(|(x, y)| x * y).sum();
            let scale = da.norm() * db.norm();
            let error = ((a.dot(&b).unwrap() - dot) / scale).abs().max(((a.norm() - da.norm()) / da.norm()).abs());
            CaseResult { name: "dot/norm (relative)", error, bound: 1e-12 }
        }
        4 => {
            let (error, eps) = hadamard_error(seed);
            CaseResult { name: "hadamard_rounded", error, bound: 2.0 * eps }
        }
        5 => {
            let sizes = random_sizes(&mut r, 2, 2);
            let a = random_tt(&mut r, &sizes, 3);
            let k = r.gen_range(0..sizes.len());
            let j = r.gen_range(-(sizes[k] as isize)..=sizes[k] as isize);
            let w: Vec<f64> = (0..sizes[k]).map(|_| r.gen_range(-2.0..2.0)).collect();
            let da = dense(&a);
            let n = sizes[k] as isize;
            let shifted = DenseTensor::from_fn(sizes.clone(), |idx| {
                let mut src = idx.to_vec();
                src[k] = (idx[k] as isize + j).rem_euclid(n) as usize;
                da.get(&src)
            });
            let scaled = DenseTensor::from_fn(sizes.clone(), |idx| w[idx[k]] * da.get(idx));
            let error = frob(&dense(&a.shift_fiber(k, j)), &shifted).max(frob(&dense(&a.scale_fiber(k, &w).unwrap()), &scaled));
            CaseResult { name: "shift_fiber/scale_fiber", error, bound: roundoff(2.0 * da.norm()) }
        }
        6 => {
            let sizes = random_sizes(&mut r, 2, 2);
            let a = random_tt(&mut r, &sizes, 4);
            let k = r.gen_range(0..sizes.len());
            let o = a.orthogonalized(k);
            let da = dense(&a);
            let pivot = o.kernel(k).norm_sq().sqrt();
            let error = frob(&dense(&o), &da).max((pivot - da.norm()).abs());
            CaseResult { name: "orthogonalize", error, bound: roundoff(da.norm()) }
        }
        7 => univariate_case(&mut r),
        _ => multivariate_case(&mut r),
    }
}

fn random_scheme(r: &mut ChaCha8Rng) -> Scheme {
    match r.gen_range(0..3) {
        0 => Scheme::Linear,
        1 => Scheme::Lagrange([3, 5][r.gen_range(0..2)]),
        _ => Scheme::CubicSpline,
    }
}

fn two_distinct(r: &mut ChaCha8Rng, d: usize) -> (usize, usize) {
    let a = r.gen_range(0..d);
    let mut b = r.gen_range(0..d - 1);
    if b >= a {
        b += 1;
    }
    (a, b)
}

fn univariate_case(r: &mut ChaCha8Rng) -> CaseResult {
    let sizes = random_sizes(r, 2, 4);
    let f = random_tt(r, &sizes, 3);
    let (target, coeff_axis) = two_distinct(r, sizes.len());
    let scheme = random_scheme(r);
    let mode = if r.gen_bool(0.5) { AdvectionMode::Kernelwise } else { AdvectionMode::MatrixSplit };
    let m = r.gen_range(1..=2);
    let (dt, h) = (r.gen_range(0.05..1.0), r.gen_range(0.1..1.0));
    // |dt·c/h| ≤ m
    let coeff: Vec<f64> = (0..sizes[coeff_axis]).map(|_| r.gen_range(-1.0..1.0) * m as f64 * h / dt).collect();
    let eps = 10f64.powf(r.gen_range(-8.0..-2.0)) * f.norm();
    let plan = AdvectionPlan {
        target,
        coefficient_axes: vec![coeff_axis],
        dt,
        spacing: h,
        scheme,
        m,
        ctrl: TruncationControl::new(eps),
        mode,
        matrix_tol_factor: 0.25,
    };
    let out = advect_univariate(&f, &plan, &coeff).unwrap();
    let disp: Vec<f64> = coeff.iter().map(|c| dt * c / h).collect();
    let expect = dense_advect(&dense(&f), target, &[coeff_axis], &disp, scheme, m).unwrap();
    CaseResult {
        name: "advect_univariate",
        error: frob(&dense(&out), &expect),
        bound: eps + roundoff(expect.norm()),
    }
}

fn multivariate_case(r: &mut ChaCha8Rng) -> CaseResult {
    let d = r.gen_range(3..=4);
    let sizes: Vec<usize> = (0..d).map(|_| r.gen_range(4..=8)).collect();
    let f = random_tt(r, &sizes, 3);
    let target = r.gen_range(0..d);
    let others: Vec<usize> = (0..d).filter(|&k| k != target).collect();
    let mut axes: Vec<usize> = others.iter().copied().filter(|_| r.gen_bool(0.6)).collect();
    if axes.is_empty() {
        axes.push(others[r.gen_range(0..others.len())]);
    }
    let e_sizes: Vec<usize> = axes.iter().map(|&k| sizes[k]).collect();
    let e = random_tt(r, &e_sizes, 2);
    let emax = dense(&e).data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (dt, h) = (r.gen_range(0.05..1.0), r.gen_range(0.1..1.0));
    // scale so that the largest displacement is below one cell
    let e = e.scaled(r.gen_range(0.1..1.0) * h / (dt * emax));
    let scheme = Scheme::Lagrange([3, 5][r.gen_range(0..2)]);
    let eps = 10f64.powf(r.gen_range(-8.0..-3.0)) * f.norm();
    let plan = AdvectionPlan {
        target,
        coefficient_axes: axes.clone(),
        dt,
        spacing: h,
        scheme,
        m: 1,
        ctrl: TruncationControl::new(eps),
        mode: AdvectionMode::MatrixSplit,
        matrix_tol_factor: 0.25,
    };
    let out = advect_multivariate(&f, &plan, &e).unwrap();
    let disp: Vec<f64> = dense(&e).data().iter().map(|c| dt * c / h).collect();
    let expect = dense_advect(&dense(&f), target, &axes, &disp, scheme, 1).unwrap();
    CaseResult {
        name: "advect_multivariate",
        error: frob(&dense(&out), &expect),
        bound: 3.0 * eps + roundoff(expect.norm()),
    }
}

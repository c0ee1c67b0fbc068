//! Rounded products of a tensor train with a structured operator.
//!
//! The engine never forms the full product kernels on truncated bonds. Each
//! product bond `(a, β)` is split into `σ = min(r, s)` blocks of
//! `τ = max(r, s)` consecutive indices and truncated incrementally, two blocks
//! first and then one more block per step.

use faer::{Mat, MatRef};

use super::kernel::Kernel;
use super::matrix::{MatrixKernel, Structure, TTMatrix};
use super::tensor::{add_window, lq_step, round_window, TTTensor, TruncationControl};
use crate::error::{Error, Result};
use crate::linalg;

/// Number of τ-blocks in the first sub-SVD of the incremental truncation.
pub(crate) const FIRST_GROUP: usize = 2;

/// How [`matvec`] applies the operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatvecMode {
    /// Kernel-wise product, then a full rounding.
    Direct,
    /// Incremental truncation around the single non-diagonal kernel.
    DiagWithOneNondiag,
    /// Index shifts first, then diagonal weights, accumulated with rounding.
    Split,
}

/// Index map of a product bond: the factor with the larger rank runs fastest.
#[derive(Clone, Copy, Debug)]
pub(crate) struct BondLayout {
    u: usize,
    m: usize,
}

impl BondLayout {
    pub(crate) fn new(u: usize, m: usize) -> Self {
        Self { u, m }
    }

    pub(crate) fn size(&self) -> usize {
        self.u * self.m
    }

    fn u_fast(&self) -> bool {
        self.u >= self.m
    }

    #[inline]
    pub(crate) fn index(&self, a: usize, b: usize) -> usize {
        if self.u_fast() {
            a + self.u * b
        } else {
            b + self.m * a
        }
    }

    pub(crate) fn block(&self) -> usize {
        self.u.max(self.m)
    }
}

/// Product kernel with its right bond contracted against `x`.
///
/// Returns `Z(L(a, β), i, γ) = Σ_{a', β'} [M(β, β') u(a, ·, a')]_i x[R(a', β'), γ]`;
/// `x = None` keeps the full right bond.
pub(crate) fn contract_right(
    u: &Kernel,
    m: &MatrixKernel,
    ll: BondLayout,
    lr: BondLayout,
    x: Option<MatRef<'_, f64>>,
) -> Kernel {
    let n = u.size();
    let (rl, rr, sl, sr) = (u.left(), u.right(), m.left(), m.right());
    debug_assert_eq!((ll.u, ll.m, lr.u, lr.m), (rl, sl, rr, sr));
    let gamma = x.map_or(lr.size(), |x| x.ncols());
    let mut out = Kernel::zeros(ll.size(), n, gamma);
    let prefilter = m.prefilter();
    for bp in 0..sr {
        if (0..sl).all(|b| m.slot_is_zero(b, bp)) {
            continue;
        }
        let (mut y, active): (Kernel, Vec<usize>) = match x {
            Some(x) => {
                let xb = Mat::from_fn(rr, gamma, |a, g| x[(lr.index(a, bp), g)]);
                (u.apply_right(xb.as_ref()), (0..gamma).collect())
            }
            None => {
                let mut y = Kernel::zeros(rl, n, gamma);
                let mut active = Vec::with_capacity(rr);
                for ap in 0..rr {
                    let g = lr.index(ap, bp);
                    active.push(g);
                    for a in 0..rl {
                        y.fiber_mut(a, g).copy_from_slice(u.fiber(a, ap));
                    }
                }
                (y, active)
            }
        };
        if let Some(p) = prefilter {
            for &g in &active {
                for a in 0..rl {
                    p.apply(y.fiber_mut(a, g));
                }
            }
        }
        for b in 0..sl {
            if m.slot_is_zero(b, bp) {
                continue;
            }
            for &g in &active {
                for a in 0..rl {
                    let (src, dst) = (y.fiber(a, g), ll.index(a, b));
                    m.apply_slot_raw(b, bp, src, out.fiber_mut(dst, g));
                }
            }
        }
    }
    out
}

/// Product kernel with its left bond contracted against `y`:
/// `Z(ρ, i, R(a', β')) = Σ y[ρ, L(a, β)] [M(β, β') u(a, ·, a')]_i`.
pub(crate) fn contract_left(
    u: &Kernel,
    m: &MatrixKernel,
    ll: BondLayout,
    lr: BondLayout,
    y: Option<MatRef<'_, f64>>,
) -> Kernel {
    let ut = u.transposed();
    let mt = m.transposed_ranks();
    let lls = BondLayout::new(lr.u, lr.m);
    let lrs = BondLayout::new(ll.u, ll.m);
    contract_right(&ut, &mt, lls, lrs, y.map(|y| y.transpose())).transposed()
}

/// Incremental truncation of `core` (rows = product bond in τ-blocks).
///
/// Returns `(V, T)` with `core ≈ T Vᵀ` and orthonormal columns in `V`. Sub-SVDs
/// after the first carry `S Vᵀ` forward so the singular values keep weighting
/// the retained directions; only the last one folds `S` into `T`.
pub(crate) fn truncate_blocks(
    core: MatRef<'_, f64>,
    layout: BondLayout,
    delta: f64,
    max_rank: Option<usize>,
) -> (Mat<f64>, Mat<f64>) {
    let rows = core.nrows();
    let tau = layout.block();
    let sigma = rows / tau;
    debug_assert_eq!(sigma * tau, rows);
    let finish = |svd: linalg::TruncatedSvd, t_acc: Option<Mat<f64>>| {
        let us = Mat::from_fn(svd.u.nrows(), svd.s.len(), |i, j| svd.u[(i, j)] * svd.s[j]);
        let t = match t_acc {
            Some(t) => linalg::mul(t.as_ref(), us.as_ref()),
            None => us,
        };
        (svd.v, t)
    };
    if sigma <= FIRST_GROUP {
        return finish(linalg::svd_truncated(core, delta, max_rank), None);
    }
    let iter = sigma - FIRST_GROUP + 1;
    let sub_delta = delta / iter as f64;
    let mut cur = core.subrows(0, FIRST_GROUP * tau).to_owned();
    let mut t_acc = Mat::<f64>::identity(FIRST_GROUP * tau, FIRST_GROUP * tau);
    let mut consumed = FIRST_GROUP * tau;
    loop {
        let svd = linalg::svd_truncated(cur.as_ref(), sub_delta, max_rank);
        if consumed == rows {
            return finish(svd, Some(t_acc));
        }
        let rho = svd.s.len();
        let tu = linalg::mul(t_acc.as_ref(), svd.u.as_ref());
        // T ← blockdiag(T U, I_τ), carrying S Vᵀ on top of the next block.
        let mut t_next = Mat::<f64>::zeros(consumed + tau, rho + tau);
        t_next.as_mut().submatrix_mut(0, 0, consumed, rho).copy_from(tu.as_ref());
        for i in 0..tau {
            t_next[(consumed + i, rho + i)] = 1.0;
        }
        let cols = core.ncols();
        let mut next = Mat::<f64>::zeros(rho + tau, cols);
        for j in 0..cols {
            for r in 0..rho {
                next[(r, j)] = svd.s[r] * svd.v[(j, r)];
            }
            for i in 0..tau {
                next[(rho + i, j)] = core[(consumed + i, j)];
            }
        }
        cur = next;
        t_acc = t_next;
        consumed += tau;
    }
}

/// Result of a rounded structured product.
pub(crate) struct ProductOutcome {
    pub tensor: TTTensor,
    /// Bond ranks of the exact product before any truncation.
    pub pre_round_ranks: Vec<usize>,
    /// Kernels `[lo, hi]` that differ from the (re-orthogonalized) input.
    pub window: Option<(usize, usize)>,
}

/// `M u` rounded to `ctrl`, for operators with at most one non-diagonal kernel.
pub(crate) fn structured_product(u: &TTTensor, m: &TTMatrix, ctrl: &TruncationControl) -> Result<ProductOutcome> {
    if m.mode_sizes() != u.mode_sizes() {
        return Err(Error::ShapeMismatch(format!(
            "operator sizes {:?} vs tensor sizes {:?}",
            m.mode_sizes(),
            u.mode_sizes()
        )));
    }
    let d = u.dims();
    let active: Vec<usize> = (0..d).filter(|&k| !m.kernel(k).is_identity()).collect();
    let (lo, hi) = match (active.first(), active.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => {
            return Ok(ProductOutcome {
                tensor: u.clone(),
                pre_round_ranks: u.ranks(),
                window: None,
            })
        }
    };
    let nondiag: Vec<usize> = (lo..=hi).filter(|&k| !m.kernel(k).is_diagonal()).collect();
    if nondiag.len() > 1 {
        return Err(Error::Structure(format!(
            "expected at most one non-diagonal kernel, found {} (axes {nondiag:?})",
            nondiag.len()
        )));
    }
    let c = nondiag.first().copied().unwrap_or(hi);
    let uo = u.orthogonalized(c);

    // Orthogonalize the diagonal operator kernels towards c as plain tensor kernels.
    let mut mk: Vec<MatrixKernel> = m.kernels()[lo..=hi].to_vec();
    for k in lo..c {
        let j = k - lo;
        let (q, r) = linalg::qr_thin(mk[j].payload().left_unfolding());
        let p = mk[j].payload();
        let q = Kernel::from_left_unfolding(p.left(), p.size(), q.as_ref());
        mk[j] = mk[j].with_payload(q);
        mk[j + 1] = mk[j + 1].with_payload(mk[j + 1].payload().apply_left(r.as_ref()));
    }
    for k in (c + 1..=hi).rev() {
        let j = k - lo;
        let t = mk[j].payload().transposed();
        let (q, r) = linalg::qr_thin(t.left_unfolding());
        let q = Kernel::from_left_unfolding(t.left(), t.size(), q.as_ref()).transposed();
        mk[j] = mk[j].with_payload(q);
        mk[j - 1] = mk[j - 1].with_payload(mk[j - 1].payload().apply_right(r.transpose()));
    }

    let op = |k: usize| &mk[k - lo];
    let lay_left = |k: usize| BondLayout::new(uo.kernel(k).left(), op(k).left());
    let lay_right = |k: usize| BondLayout::new(uo.kernel(k).right(), op(k).right());
    let mut pre_round_ranks = uo.ranks();
    for k in lo..hi {
        pre_round_ranks[k + 1] = lay_right(k).size();
    }
    let delta = ctrl.delta(hi - lo);
    let mut out: Vec<Option<Kernel>> = vec![None; hi - lo + 1];

    // Phase 1: bonds c..hi, left to right, then an exact LQ sweep back to c.
    let mut pivot_kernel = if c < hi {
        let mut y: Option<Mat<f64>> = None;
        for k in c..hi {
            let z = if k == c {
                contract_right(uo.kernel(k), op(k), lay_left(k), lay_right(k), None)
            } else {
                contract_left(uo.kernel(k), op(k), lay_left(k), lay_right(k), y.as_ref().map(Mat::as_ref))
            };
            let (v, t) = truncate_blocks(z.left_unfolding().transpose(), lay_right(k), delta, ctrl.max_rank);
            out[k - lo] = Some(Kernel::from_left_unfolding(z.left(), z.size(), v.as_ref()));
            y = Some(t.transpose().to_owned());
        }
        out[hi - lo] = Some(contract_left(
            uo.kernel(hi),
            op(hi),
            lay_left(hi),
            lay_right(hi),
            y.as_ref().map(Mat::as_ref),
        ));
        let mut chain: Vec<Kernel> = (c..=hi).map(|k| out[k - lo].take().expect("filled")).collect();
        for j in (1..chain.len()).rev() {
            lq_step(&mut chain, j);
        }
        for (j, kern) in chain.into_iter().enumerate() {
            out[c - lo + j] = Some(kern);
        }
        out[c - lo].take()
    } else {
        Some(contract_right(uo.kernel(c), op(c), lay_left(c), lay_right(c), None))
    };

    // Phase 2: bonds c-1 down to lo, right to left.
    let mut x: Option<Mat<f64>> = None;
    for k in (lo + 1..=c).rev() {
        let z = match pivot_kernel.take() {
            Some(z) => z,
            None => contract_right(uo.kernel(k), op(k), lay_left(k), lay_right(k), x.as_ref().map(Mat::as_ref)),
        };
        let zt = z.transposed();
        let (v, t) = truncate_blocks(zt.left_unfolding().transpose(), lay_left(k), delta, ctrl.max_rank);
        out[k - lo] = Some(Kernel::from_left_unfolding(zt.left(), zt.size(), v.as_ref()).transposed());
        x = Some(t);
    }
    out[0] = Some(match pivot_kernel.take() {
        Some(z) => z,
        None => contract_right(uo.kernel(lo), op(lo), lay_left(lo), lay_right(lo), x.as_ref().map(Mat::as_ref)),
    });

    let mut kernels = uo.into_kernels();
    for (j, kern) in out.into_iter().enumerate() {
        kernels[lo + j] = kern.expect("every window kernel produced");
    }
    let window = match u.pivot() {
        Some(p) => (lo.min(p), hi.max(p)),
        None => (0, d - 1),
    };
    Ok(ProductOutcome {
        tensor: TTTensor::from_parts(kernels, Some(lo)),
        pre_round_ranks,
        window: Some(window),
    })
}

/// Entry-wise product of two tensor trains, rounded to `ctrl`.
pub fn hadamard_rounded(a: &TTTensor, b: &TTTensor, ctrl: &TruncationControl) -> Result<TTTensor> {
    Ok(structured_product(a, &TTMatrix::diagonal(b), ctrl)?.tensor)
}

/// `M u` rounded to `ctrl`.
pub fn matvec(m: &TTMatrix, u: &TTTensor, ctrl: &TruncationControl, mode: MatvecMode) -> Result<TTTensor> {
    match mode {
        MatvecMode::Direct => Ok(m.apply_exact(u)?.round(ctrl)),
        MatvecMode::DiagWithOneNondiag => Ok(structured_product(u, m, ctrl)?.tensor),
        MatvecMode::Split => matvec_split(m, u, ctrl),
    }
}

/// One term of a shifted-and-weighted sum: index shifts `(axis, offset)` applied
/// to the input, followed by a diagonal operator.
pub(crate) struct ShiftTerm {
    pub shifts: Vec<(usize, isize)>,
    pub weights: TTMatrix,
}

/// `Σ_j W_j · shift_j(u)` within `ctrl`.
///
/// Half of the budget is split uniformly over the q products and q−1 rounded
/// additions; the other half goes to a closing sweep over the touched window,
/// which removes the excess rank left by the much tighter per-step thresholds.
/// `u` must carry a cached pivot so that all shifted copies share their outer
/// orthogonal kernels.
pub(crate) fn shifted_weighted_sum(u: &TTTensor, terms: &[ShiftTerm], ctrl: &TruncationControl) -> Result<TTTensor> {
    let q = terms.len();
    if q == 0 {
        return Err(Error::Structure("empty term list".into()));
    }
    let pivot = u.pivot().ok_or_else(|| Error::Structure("input must be orthogonalized".into()))?;
    let half = ctrl.scaled(0.5);
    let per_op = half.scaled(1.0 / (2 * q - 1) as f64);
    let mut window = (pivot, pivot);
    let mut results = Vec::with_capacity(q);
    for term in terms {
        let mut shifted = u.clone();
        for &(axis, offset) in &term.shifts {
            shifted = shifted.shift_fiber(axis, offset);
            window = (window.0.min(axis), window.1.max(axis));
        }
        let outcome = structured_product(&shifted, &term.weights, &per_op)?;
        if let Some((lo, hi)) = outcome.window {
            window = (window.0.min(lo), window.1.max(hi));
        }
        results.push(outcome.tensor);
    }
    let (lo, hi) = window;
    let mut iter = results.into_iter();
    let mut acc = iter.next().expect("at least one term");
    for t in iter {
        acc = add_window(&acc, &t, lo, hi);
        round_window(&mut acc, lo, hi, &per_op, true);
    }
    round_window(&mut acc, lo, hi, &half, false);
    Ok(acc)
}

fn matvec_split(m: &TTMatrix, u: &TTTensor, ctrl: &TruncationControl) -> Result<TTTensor> {
    if m.mode_sizes() != u.mode_sizes() {
        return Err(Error::ShapeMismatch("operator and tensor sizes differ".into()));
    }
    let mut stencil_axes = Vec::new();
    for (k, kern) in m.kernels().iter().enumerate() {
        match kern.structure() {
            Structure::Diagonal => {}
            Structure::Stencil { .. } => stencil_axes.push(k),
            Structure::Dense => {
                return Err(Error::Structure(format!(
                    "split mode needs stencil or diagonal kernels; axis {k} is dense"
                )))
            }
        }
    }
    // Prefilters are applied once; the pivot sits on the first stencil axis.
    let first = stencil_axes.first().copied().unwrap_or(0);
    let mut up = u.orthogonalized(first);
    let mut filtered = 0;
    for &k in &stencil_axes {
        if let Some(p) = m.kernel(k).prefilter() {
            up = map_fibers(&up, k, |f| p.apply(f));
            filtered += 1;
        }
    }
    if up.pivot().is_none() || filtered > 1 {
        up = TTTensor::new(up.into_kernels())?;
        up.orthogonalize(first);
    }
    // Every combination of stencil offsets gives one term.
    let offsets: Vec<&Vec<isize>> = stencil_axes
        .iter()
        .map(|&k| match m.kernel(k).structure() {
            Structure::Stencil { offsets, .. } => offsets,
            _ => unreachable!(),
        })
        .collect();
    let count: usize = offsets.iter().map(|o| o.len()).product();
    let mut terms = Vec::with_capacity(count);
    for combo in 0..count {
        let mut rem = combo;
        let mut picks = Vec::with_capacity(stencil_axes.len());
        for o in &offsets {
            picks.push(rem % o.len());
            rem /= o.len();
        }
        let mut kernels = m.kernels().to_vec();
        let mut shifts = Vec::new();
        let mut zero = false;
        for (&k, &pick) in stencil_axes.iter().zip(&picks) {
            let kern = m.kernel(k);
            let n = kern.n();
            let p = kern.payload();
            let diag = Kernel::from_fn(p.left(), n, p.right(), |b, _, bp| p.get(b, pick, bp));
            zero |= diag.data().iter().all(|&x| x == 0.0);
            kernels[k] = MatrixKernel::diagonal(diag);
            shifts.push((k, offsets[stencil_axes.iter().position(|&a| a == k).unwrap()][pick]));
        }
        if zero {
            continue;
        }
        terms.push(ShiftTerm {
            shifts,
            weights: TTMatrix::new(kernels)?.prune_zero_ranks(),
        });
    }
    if terms.is_empty() {
        return Ok(TTTensor::zeros(&u.mode_sizes()));
    }
    shifted_weighted_sum(&up, &terms, ctrl)
}

/// Applies a linear map to every fiber of kernel `k`.
pub(crate) fn map_fibers(t: &TTTensor, k: usize, mut f: impl FnMut(&mut [f64])) -> TTTensor {
    let mut kernels = t.kernels().to_vec();
    let kern = &mut kernels[k];
    for b in 0..kern.right() {
        for a in 0..kern.left() {
            f(kern.fiber_mut(a, b));
        }
    }
    let pivot = if t.pivot() == Some(k) { Some(k) } else { None };
    TTTensor::from_parts(kernels, pivot)
}

//! Thin wrappers around faer's economy-size QR and SVD.
//!
//! Every routine here works on column-major slices so that tensor-train
//! kernels can be handed over without copies.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par};

pub(crate) fn view(data: &[f64], nrows: usize, ncols: usize) -> MatRef<'_, f64> {
    MatRef::from_column_major_slice(data, nrows, ncols)
}

pub(crate) fn view_mut(data: &mut [f64], nrows: usize, ncols: usize) -> MatMut<'_, f64> {
    MatMut::from_column_major_slice_mut(data, nrows, ncols)
}

/// Copies a faer matrix into a contiguous column-major vector.
pub(crate) fn to_vec(m: MatRef<'_, f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        out.extend(m.col(j).iter().copied());
    }
    out
}

pub(crate) fn mul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

pub(crate) fn mul_into(dst: MatMut<'_, f64>, a: MatRef<'_, f64>, b: MatRef<'_, f64>, accum: bool) {
    let beta = if accum { Accum::Add } else { Accum::Replace };
    matmul(dst, beta, a, b, 1.0, Par::Seq);
}

/// Economy QR: returns `(Q, R)` with `Q` of size `m × min(m, n)`.
pub(crate) fn qr_thin(a: MatRef<'_, f64>) -> (Mat<f64>, Mat<f64>) {
    if a.nrows() == 0 || a.ncols() == 0 {
        let k = a.nrows().min(a.ncols());
        return (Mat::zeros(a.nrows(), k), Mat::zeros(k, a.ncols()));
    }
    let qr = a.qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R().to_owned();
    (q, r)
}

/// Number of leading singular values kept so that the discarded tail has
/// ℓ₂ norm at most `delta`, capped by `max_rank`. Never returns zero.
pub fn truncation_rank(singular_values: &[f64], delta: f64, max_rank: Option<usize>) -> usize {
    let n = singular_values.len();
    if n == 0 {
        return 1;
    }
    let budget = delta * delta;
    let mut tail = 0.0;
    let mut keep = n;
    while keep > 1 {
        let s = singular_values[keep - 1];
        if tail + s * s <= budget {
            tail += s * s;
            keep -= 1;
        } else {
            break;
        }
    }
    match max_rank {
        Some(r) => keep.min(r.max(1)),
        None => keep,
    }
}

pub(crate) struct TruncatedSvd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

/// Economy SVD truncated by the tail-norm rule of [`truncation_rank`].
///
/// Panics if the input contains non-finite values.
pub(crate) fn svd_truncated(a: MatRef<'_, f64>, delta: f64, max_rank: Option<usize>) -> TruncatedSvd {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return TruncatedSvd {
            u: Mat::zeros(m, 1),
            s: vec![0.0],
            v: Mat::zeros(n, 1),
        };
    }
    // Strongly rectangular inputs go through a QR first; the small square
    // SVD is then cheap.
    if m > 2 * n {
        let (q, r) = qr_thin(a);
        let inner = svd_truncated(r.as_ref(), delta, max_rank);
        return TruncatedSvd {
            u: mul(q.as_ref(), inner.u.as_ref()),
            s: inner.s,
            v: inner.v,
        };
    }
    if n > 2 * m {
        let t = svd_truncated(a.transpose(), delta, max_rank);
        return TruncatedSvd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let svd = a
        .thin_svd()
        .expect("SVD did not converge; input contains non-finite values");
    let s_all: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let r = truncation_rank(&s_all, delta, max_rank).min(s_all.len());
    TruncatedSvd {
        u: svd.U().subcols(0, r).to_owned(),
        s: s_all[..r].to_vec(),
        v: svd.V().subcols(0, r).to_owned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_rule_keeps_at_least_one() {
        assert_eq!(truncation_rank(&[1e-20, 1e-21], 1.0, None), 1);
        assert_eq!(truncation_rank(&[], 1.0, None), 1);
    }

    #[test]
    fn tail_rule_drops_by_norm() {
        let s = [3.0, 2.0, 0.3, 0.4];
        // tail {0.4} = 0.4, tail {0.3,0.4} = 0.5
        assert_eq!(truncation_rank(&s, 0.45, None), 3);
        assert_eq!(truncation_rank(&s, 0.5, None), 2);
        assert_eq!(truncation_rank(&s, 0.0, None), 4);
        assert_eq!(truncation_rank(&s, 0.0, Some(2)), 2);
    }

    #[test]
    fn equal_values_at_cut_keep_earlier() {
        let s = [1.0, 1.0, 1.0];
        assert_eq!(truncation_rank(&s, 1.0, None), 2);
    }

    #[test]
    fn truncated_svd_reconstructs_rectangular_inputs() {
        for &(m, n) in &[(3usize, 17usize), (17, 3), (6, 7)] {
            let a = Mat::from_fn(m, n, |i, j| ((i * 3 + j * 5) % 7) as f64 - 2.5 + (i as f64).cos());
            let svd = svd_truncated(a.as_ref(), 0.0, None);
            let mut us = svd.u.clone();
            for (j, s) in svd.s.iter().enumerate() {
                for i in 0..us.nrows() {
                    us[(i, j)] *= s;
                }
            }
            let back = mul(us.as_ref(), svd.v.transpose());
            let err = (&back - &a).norm_l2();
            assert!(err < 1e-12 * a.norm_l2(), "{m}x{n}: {err}");
            for w in svd.s.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }
}

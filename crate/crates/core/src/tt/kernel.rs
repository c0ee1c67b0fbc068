use faer::{Mat, MatRef};

use crate::linalg;

/// A single tensor-train kernel of shape `left × size × right`.
///
/// The mode index runs fastest: entry `(a, i, b)` is stored at
/// `i + size * (a + left * b)`, so the left unfolding (rows `(i, a)`,
/// columns `b`) is the raw buffer read column-major, and every fiber
/// `(a, :, b)` is a contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    left: usize,
    size: usize,
    right: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn new(left: usize, size: usize, right: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), left * size * right, "kernel buffer length");
        Self {
            left,
            size,
            right,
            data,
        }
    }

    pub fn zeros(left: usize, size: usize, right: usize) -> Self {
        Self::new(left, size, right, vec![0.0; left * size * right])
    }

    pub fn from_fn(left: usize, size: usize, right: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(left * size * right);
        for b in 0..right {
            for a in 0..left {
                for i in 0..size {
                    data.push(f(a, i, b));
                }
            }
        }
        Self::new(left, size, right, data)
    }

    /// Rank-one kernel holding a single vector.
    pub fn from_vector(values: Vec<f64>) -> Self {
        let n = values.len();
        Self::new(1, n, 1, values)
    }

    #[inline]
    pub fn left(&self) -> usize {
        self.left
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn right(&self) -> usize {
        self.right
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[i + self.size * (a + self.left * b)]
    }

    #[inline]
    pub fn fiber(&self, a: usize, b: usize) -> &[f64] {
        let start = self.size * (a + self.left * b);
        &self.data[start..start + self.size]
    }

    #[inline]
    pub fn fiber_mut(&mut self, a: usize, b: usize) -> &mut [f64] {
        let start = self.size * (a + self.left * b);
        &mut self.data[start..start + self.size]
    }

    /// The `(size·left) × right` left unfolding as a zero-copy view.
    pub fn left_unfolding(&self) -> MatRef<'_, f64> {
        linalg::view(&self.data, self.size * self.left, self.right)
    }

    pub(crate) fn from_left_unfolding(left: usize, size: usize, m: MatRef<'_, f64>) -> Self {
        debug_assert_eq!(m.nrows(), left * size);
        Self::new(left, size, m.ncols(), linalg::to_vec(m))
    }

    /// Swaps the two rank indices: `(a, i, b) -> (b, i, a)`.
    pub fn transposed(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for a in 0..self.left {
            for b in 0..self.right {
                data.extend_from_slice(self.fiber(a, b));
            }
        }
        Self::new(self.right, self.size, self.left, data)
    }

    /// Contracts the left rank index with `m`: result `(p, i, b) = Σ_a m[p, a] K(a, i, b)`.
    pub fn apply_left(&self, m: MatRef<'_, f64>) -> Self {
        assert_eq!(m.ncols(), self.left);
        let p = m.nrows();
        let mut out = Kernel::zeros(p, self.size, self.right);
        if p == 0 || self.size == 0 {
            return out;
        }
        let n = self.size;
        for b in 0..self.right {
            let src = linalg::view(&self.data[n * self.left * b..n * self.left * (b + 1)], n, self.left);
            let dst = linalg::view_mut(&mut out.data[n * p * b..n * p * (b + 1)], n, p);
            linalg::mul_into(dst, src, m.transpose(), false);
        }
        out
    }

    /// Contracts the right rank index with `m`: result `(a, i, q) = Σ_b K(a, i, b) m[b, q]`.
    pub fn apply_right(&self, m: MatRef<'_, f64>) -> Self {
        assert_eq!(m.nrows(), self.right);
        let prod: Mat<f64> = linalg::mul(self.left_unfolding(), m);
        Self::new(self.left, self.size, m.ncols(), linalg::to_vec(prod.as_ref()))
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|x| *x *= c);
    }

    /// Squared Frobenius norm of the buffer.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Whether the left unfolding has orthonormal columns, measured by the
    /// Frobenius distance of its Gram matrix to the identity.
    pub fn is_left_orthogonal(&self, tol: f64) -> bool {
        gram_defect(self.left_unfolding()) <= tol
    }

    /// Whether the right unfolding has orthonormal rows.
    pub fn is_right_orthogonal(&self, tol: f64) -> bool {
        self.transposed().is_left_orthogonal(tol)
    }
}

fn gram_defect(m: MatRef<'_, f64>) -> f64 {
    let g = linalg::mul(m.transpose(), m);
    let mut acc = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let d = g[(i, j)] - if i == j { 1.0 } else { 0.0 };
            acc += d * d;
        }
    }
    acc.sqrt()
}

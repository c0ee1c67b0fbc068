use super::dense::DENSE_LIMIT;
use super::kernel::Kernel;
use super::tensor::{TTTensor, TruncationControl};
use crate::error::{Error, Result};
use crate::interpolation::spline_coefficients_in_place;

/// Linear map applied to every input fiber before a stencil band.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prefilter {
    /// Periodic cubic B-spline coefficient solve.
    CubicSpline,
}

impl Prefilter {
    pub fn apply(&self, values: &mut [f64]) {
        match self {
            Prefilter::CubicSpline => spline_coefficients_in_place(values),
        }
    }
}

/// Sparsity structure shared by all slots of one operator kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum Structure {
    /// Full `n × n` slot matrices.
    Dense,
    /// Slot matrices are diagonal.
    Diagonal,
    /// `(S x)_i = Σ_o band_o · y_{(i + offset_o) mod n}` with `y = prefilter(x)`.
    Stencil {
        offsets: Vec<isize>,
        prefilter: Option<Prefilter>,
    },
}

/// One kernel of a [`TTMatrix`].
///
/// The payload is a tensor kernel `s_{k-1} × q × s_k` whose fiber `(β, :, β')`
/// stores slot `(β, β')`: `n²` column-major entries for dense kernels, the
/// `n` diagonal entries, or the `p` band weights of a stencil.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixKernel {
    n: usize,
    structure: Structure,
    payload: Kernel,
}

impl MatrixKernel {
    pub fn new(n: usize, structure: Structure, payload: Kernel) -> Result<Self> {
        let q = match &structure {
            Structure::Dense => n * n,
            Structure::Diagonal => n,
            Structure::Stencil { offsets, .. } => offsets.len(),
        };
        if payload.size() != q {
            return Err(Error::Structure(format!(
                "payload mode size {} does not match structure (expected {q})",
                payload.size()
            )));
        }
        Ok(Self { n, structure, payload })
    }

    pub fn diagonal(payload: Kernel) -> Self {
        let n = payload.size();
        Self {
            n,
            structure: Structure::Diagonal,
            payload,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(Kernel::from_vector(vec![1.0; n]))
    }

    pub fn stencil(n: usize, offsets: Vec<isize>, prefilter: Option<Prefilter>, payload: Kernel) -> Result<Self> {
        Self::new(n, Structure::Stencil { offsets, prefilter }, payload)
    }

    pub fn dense(n: usize, payload: Kernel) -> Result<Self> {
        Self::new(n, Structure::Dense, payload)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn left(&self) -> usize {
        self.payload.left()
    }

    pub fn right(&self) -> usize {
        self.payload.right()
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn payload(&self) -> &Kernel {
        &self.payload
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.structure, Structure::Diagonal)
    }

    pub(crate) fn prefilter(&self) -> Option<Prefilter> {
        match &self.structure {
            Structure::Stencil { prefilter, .. } => *prefilter,
            _ => None,
        }
    }

    /// Rank-one identity operator.
    pub fn is_identity(&self) -> bool {
        if self.left() != 1 || self.right() != 1 {
            return false;
        }
        let p = self.payload.data();
        match &self.structure {
            Structure::Diagonal => p.iter().all(|&x| x == 1.0),
            Structure::Stencil { offsets, prefilter } => {
                prefilter.is_none()
                    && offsets
                        .iter()
                        .zip(p)
                        .all(|(&o, &w)| if o.rem_euclid(self.n as isize) == 0 { w == 1.0 } else { w == 0.0 })
                    && offsets.iter().filter(|&&o| o.rem_euclid(self.n as isize) == 0).count() == 1
            }
            Structure::Dense => {
                (0..self.n).all(|j| (0..self.n).all(|i| p[i + self.n * j] == if i == j { 1.0 } else { 0.0 }))
            }
        }
    }

    pub(crate) fn with_payload(&self, payload: Kernel) -> Self {
        debug_assert_eq!(payload.size(), self.payload.size());
        Self {
            n: self.n,
            structure: self.structure.clone(),
            payload,
        }
    }

    /// Slot `(β, β')` with its rank indices swapped.
    pub fn transposed_ranks(&self) -> Self {
        self.with_payload(self.payload.transposed())
    }

    pub(crate) fn slot_is_zero(&self, b: usize, bp: usize) -> bool {
        self.payload.fiber(b, bp).iter().all(|&x| x == 0.0)
    }

    /// `out += slot(β, β') · x`, with `x` already prefiltered.
    pub(crate) fn apply_slot_raw(&self, b: usize, bp: usize, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        let w = self.payload.fiber(b, bp);
        match &self.structure {
            Structure::Diagonal => {
                for ((o, wi), xi) in out.iter_mut().zip(w).zip(x) {
                    *o += wi * xi;
                }
            }
            Structure::Stencil { offsets, .. } => {
                for (&off, &c) in offsets.iter().zip(w) {
                    if c == 0.0 {
                        continue;
                    }
                    let s = off.rem_euclid(n as isize) as usize;
                    // out[i] += c x[i + s] for i < n - s, wrapping after.
                    for (o, xi) in out[..n - s].iter_mut().zip(&x[s..]) {
                        *o += c * xi;
                    }
                    for (o, xi) in out[n - s..].iter_mut().zip(&x[..s]) {
                        *o += c * xi;
                    }
                }
            }
            Structure::Dense => {
                for (j, &xj) in x.iter().enumerate() {
                    if xj == 0.0 {
                        continue;
                    }
                    for (o, mij) in out.iter_mut().zip(&w[n * j..n * (j + 1)]) {
                        *o += mij * xj;
                    }
                }
            }
        }
    }

    /// `out += slot(β, β') · x` including the prefilter.
    pub fn apply_slot(&self, b: usize, bp: usize, x: &[f64], out: &mut [f64]) {
        match self.prefilter() {
            Some(p) => {
                let mut y = x.to_vec();
                p.apply(&mut y);
                self.apply_slot_raw(b, bp, &y, out);
            }
            None => self.apply_slot_raw(b, bp, x, out),
        }
    }

    /// Column-major `n × n` realization of slot `(β, β')`.
    pub fn dense_slot(&self, b: usize, bp: usize) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            self.apply_slot(b, bp, &e, &mut out[n * j..n * (j + 1)]);
        }
        out
    }

    /// Same operator with every slot stored densely.
    pub fn to_dense_kernel(&self) -> Self {
        let payload = Kernel::from_fn(self.left(), self.n * self.n, self.right(), |_, _, _| 0.0);
        let mut payload = payload;
        for bp in 0..self.right() {
            for b in 0..self.left() {
                payload.fiber_mut(b, bp).copy_from_slice(&self.dense_slot(b, bp));
            }
        }
        Self {
            n: self.n,
            structure: Structure::Dense,
            payload,
        }
    }

    /// Payload scaled so its Frobenius norm equals the operator's slot norms.
    /// A stencil band of `p` distinct offsets touches `n` entries per weight.
    fn rounding_scale(&self) -> f64 {
        match &self.structure {
            Structure::Stencil { .. } => (self.n as f64).sqrt(),
            _ => 1.0,
        }
    }
}

/// A linear operator in tensor-train format.
#[derive(Clone, Debug)]
pub struct TTMatrix {
    kernels: Vec<MatrixKernel>,
}

impl TTMatrix {
    pub fn new(kernels: Vec<MatrixKernel>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::Structure("operator needs at least one kernel".into()));
        }
        if kernels[0].left() != 1 || kernels[kernels.len() - 1].right() != 1 {
            return Err(Error::Structure("boundary operator ranks must be 1".into()));
        }
        for w in kernels.windows(2) {
            if w[0].right() != w[1].left() {
                return Err(Error::Structure("operator rank chain broken".into()));
            }
        }
        Ok(Self { kernels })
    }

    pub fn identity(sizes: &[usize]) -> Self {
        Self {
            kernels: sizes.iter().map(|&n| MatrixKernel::identity(n)).collect(),
        }
    }

    /// Diagonal operator whose diagonal is the tensor `t`.
    pub fn diagonal(t: &TTTensor) -> Self {
        Self {
            kernels: t.kernels().iter().cloned().map(MatrixKernel::diagonal).collect(),
        }
    }

    pub fn dims(&self) -> usize {
        self.kernels.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.kernels.iter().map(MatrixKernel::n).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.kernels.iter().map(MatrixKernel::right));
        r
    }

    pub fn kernels(&self) -> &[MatrixKernel] {
        &self.kernels
    }

    pub fn kernel(&self, k: usize) -> &MatrixKernel {
        &self.kernels[k]
    }

    /// Entry-wise diagonal as a tensor train; only defined for all-diagonal operators.
    pub fn diagonal_tensor(&self) -> Result<TTTensor> {
        if !self.kernels.iter().all(MatrixKernel::is_diagonal) {
            return Err(Error::Structure("operator is not diagonal".into()));
        }
        TTTensor::new(self.kernels.iter().map(|k| k.payload.clone()).collect())
    }

    /// Dense `N × N` column-major realization, rows and columns ordered with
    /// the first axis fastest.
    pub fn to_dense_operator(&self) -> Result<Vec<f64>> {
        let sizes = self.mode_sizes();
        let total: usize = sizes.iter().product();
        if total.saturating_mul(total) > DENSE_LIMIT {
            return Err(Error::SizeGuard {
                entries: total.saturating_mul(total),
                limit: DENSE_LIMIT,
            });
        }
        let tt = TTTensor::new(self.kernels.iter().map(|k| k.to_dense_kernel().payload).collect())?;
        let flat = tt.to_dense()?;
        let squared: Vec<usize> = sizes.iter().map(|n| n * n).collect();
        let mut out = vec![0.0; total * total];
        let d = sizes.len();
        let mut row = vec![0usize; d];
        let mut col = vec![0usize; d];
        let mut m = vec![0usize; d];
        for (j, _) in (0..total).enumerate() {
            for i in 0..total {
                for k in 0..d {
                    m[k] = row[k] + sizes[k] * col[k];
                }
                let mut lin = 0;
                for k in (0..d).rev() {
                    lin = lin * squared[k] + m[k];
                }
                out[i + total * j] = flat.data()[lin];
                super::dense::increment(&mut row, &sizes);
            }
            super::dense::increment(&mut col, &sizes);
        }
        Ok(out)
    }

    /// Exact kernel-wise product `M u` without rounding; ranks multiply.
    pub fn apply_exact(&self, u: &TTTensor) -> Result<TTTensor> {
        if self.mode_sizes() != u.mode_sizes() {
            return Err(Error::ShapeMismatch(format!(
                "operator sizes {:?} vs tensor sizes {:?}",
                self.mode_sizes(),
                u.mode_sizes()
            )));
        }
        let kernels = self
            .kernels
            .iter()
            .zip(u.kernels())
            .map(|(m, x)| {
                let (rl, rr, sl, sr) = (x.left(), x.right(), m.left(), m.right());
                let mut out = Kernel::zeros(rl * sl, m.n, rr * sr);
                let mut y = vec![0.0; m.n];
                for bp in 0..sr {
                    for b in 0..sl {
                        if m.slot_is_zero(b, bp) {
                            continue;
                        }
                        for ap in 0..rr {
                            for a in 0..rl {
                                y.iter_mut().for_each(|v| *v = 0.0);
                                m.apply_slot(b, bp, x.fiber(a, ap), &mut y);
                                out.fiber_mut(a + rl * b, ap + rr * bp).copy_from_slice(&y);
                            }
                        }
                    }
                }
                out
            })
            .collect();
        TTTensor::new(kernels)
    }

    /// Removes rank indices whose slots vanish on either side of their bond.
    /// Exact; a bond that is zero everywhere keeps one index.
    pub fn prune_zero_ranks(&self) -> Self {
        let mut kernels = self.kernels.clone();
        let d = kernels.len();
        let mut changed = true;
        while changed {
            changed = false;
            for k in 0..d.saturating_sub(1) {
                let (lk, rk) = (&kernels[k], &kernels[k + 1]);
                let r = lk.right();
                let mut keep: Vec<usize> = (0..r)
                    .filter(|&b| {
                        (0..lk.left()).any(|a| !lk.slot_is_zero(a, b)) && (0..rk.right()).any(|c| !rk.slot_is_zero(b, c))
                    })
                    .collect();
                if keep.len() == r {
                    continue;
                }
                if keep.is_empty() {
                    if r == 1 {
                        continue;
                    }
                    keep.push(0);
                }
                let p = lk.payload();
                let left = Kernel::from_fn(p.left(), p.size(), keep.len(), |a, i, b| p.get(a, i, keep[b]));
                let p = rk.payload();
                let right = Kernel::from_fn(keep.len(), p.size(), p.right(), |a, i, b| p.get(keep[a], i, b));
                kernels[k] = kernels[k].with_payload(left);
                kernels[k + 1] = kernels[k + 1].with_payload(right);
                changed = true;
            }
        }
        Self { kernels }
    }

    /// Rounds the operator as a tensor train over each kernel's sparsity pattern.
    pub fn round(&self, ctrl: &TruncationControl) -> Self {
        let scales: Vec<f64> = self.kernels.iter().map(MatrixKernel::rounding_scale).collect();
        let payloads = self
            .kernels
            .iter()
            .zip(&scales)
            .map(|(k, &s)| {
                let mut p = k.payload.clone();
                if s != 1.0 {
                    p.scale(s);
                }
                p
            })
            .collect();
        let tt = TTTensor::new(payloads).expect("operator ranks chain").round(ctrl);
        let kernels = tt
            .into_kernels()
            .into_iter()
            .zip(&self.kernels)
            .zip(&scales)
            .map(|((mut p, k), &s)| {
                if s != 1.0 {
                    p.scale(1.0 / s);
                }
                k.with_payload(p)
            })
            .collect();
        Self { kernels }
    }

    /// Frobenius norm of the operator.
    pub fn frobenius_norm(&self) -> f64 {
        let payloads: Vec<Kernel> = self
            .kernels
            .iter()
            .map(|k| {
                let mut p = k.payload.clone();
                let s = k.rounding_scale();
                if s != 1.0 {
                    p.scale(s);
                }
                p
            })
            .collect();
        TTTensor::new(payloads).expect("operator ranks chain").norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shift_kernel(n: usize) -> MatrixKernel {
        MatrixKernel::stencil(n, vec![-1, 0, 1], None, Kernel::from_vector(vec![0.25, 0.5, 0.25])).unwrap()
    }

    #[test]
    fn stencil_realization_is_circulant() {
        let k = shift_kernel(5);
        let m = k.dense_slot(0, 0);
        for i in 0..5 {
            // every row holds the same band
            assert_eq!(m[i + 5 * ((i + 4) % 5)], 0.25);
            assert_eq!(m[i + 5 * i], 0.5);
            assert_eq!(m[i + 5 * ((i + 1) % 5)], 0.25);
        }
    }

    #[test]
    fn diagonal_kernel_maps_unit_vectors_to_multiples() {
        let k = MatrixKernel::diagonal(Kernel::from_vector(vec![2.0, 3.0, 4.0]));
        let mut e = vec![0.0; 3];
        e[1] = 1.0;
        let mut out = vec![0.0; 3];
        k.apply_slot(0, 0, &e, &mut out);
        assert_eq!(out, vec![0.0, 3.0, 0.0]);
    }

    #[test]
    fn identity_detection() {
        assert!(MatrixKernel::identity(4).is_identity());
        assert!(!shift_kernel(4).is_identity());
        let s = MatrixKernel::stencil(4, vec![-1, 0, 1], None, Kernel::from_vector(vec![0.0, 1.0, 0.0])).unwrap();
        assert!(s.is_identity());
        assert!(MatrixKernel::identity(3).to_dense_kernel().is_identity());
    }

    #[test]
    fn dense_operator_is_kronecker_product() {
        let a = shift_kernel(3);
        let b = MatrixKernel::diagonal(Kernel::from_vector(vec![1.0, 2.0]));
        let m = TTMatrix::new(vec![a.clone(), b.clone()]).unwrap();
        let dense = m.to_dense_operator().unwrap();
        let (da, db) = (a.dense_slot(0, 0), b.dense_slot(0, 0));
        // row (i0, i1) -> i0 + 3 i1
        for i0 in 0..3 {
            for i1 in 0..2 {
                for j0 in 0..3 {
                    for j1 in 0..2 {
                        let expect = da[i0 + 3 * j0] * db[i1 + 2 * j1];
                        let got = dense[(i0 + 3 * i1) + 6 * (j0 + 3 * j1)];
                        assert_eq!(got, expect);
                    }
                }
            }
        }
    }

    #[test]
    fn duplicated_term_rounds_to_half_rank() {
        // [A  A] ⊗ [B; B] = 2 A ⊗ B
        let a = Kernel::new(1, 3, 2, vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let b = Kernel::new(2, 3, 1, vec![0.5, 0.1, 0.2, 0.5, 0.1, 0.2]);
        let m = TTMatrix::new(vec![MatrixKernel::diagonal(a), MatrixKernel::diagonal(b)]).unwrap();
        let r = m.round(&TruncationControl::new(1e-12));
        assert_eq!(r.ranks(), vec![1, 1, 1]);
        let (d0, d1) = (m.to_dense_operator().unwrap(), r.to_dense_operator().unwrap());
        for (x, y) in d0.iter().zip(&d1) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn stencil_rounding_uses_operator_norm() {
        let m = TTMatrix::new(vec![shift_kernel(8), MatrixKernel::identity(4)]).unwrap();
        let dense = m.to_dense_operator().unwrap();
        let fro: f64 = dense.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((m.frobenius_norm() - fro).abs() < 1e-12);
    }
}

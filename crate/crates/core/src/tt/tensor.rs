use faer::Mat;

use super::dense::{increment, DenseTensor, DENSE_LIMIT};
use super::kernel::Kernel;
use crate::error::{Error, Result};
use crate::linalg;

/// Absolute ℓ₂ truncation budget with an optional rank cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationControl {
    pub epsilon: f64,
    pub max_rank: Option<usize>,
}

impl TruncationControl {
    pub fn new(epsilon: f64) -> Self {
        assert!(epsilon >= 0.0 && epsilon.is_finite(), "epsilon must be finite and non-negative");
        Self {
            epsilon,
            max_rank: None,
        }
    }

    pub fn exact() -> Self {
        Self::new(0.0)
    }

    pub fn with_max_rank(mut self, max_rank: Option<usize>) -> Self {
        self.max_rank = max_rank;
        self
    }

    /// Same rank cap with the budget multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            epsilon: self.epsilon * factor,
            max_rank: self.max_rank,
        }
    }

    /// Per-SVD threshold for a sweep over `bonds` truncated bonds.
    pub fn delta(&self, bonds: usize) -> f64 {
        if bonds == 0 {
            self.epsilon
        } else {
            self.epsilon / (bonds as f64).sqrt()
        }
    }
}

/// A tensor in tensor-train format.
///
/// `pivot` caches the orthogonality state: when `Some(k)`, kernels left of
/// `k` are left-orthogonal and kernels right of `k` are right-orthogonal.
/// Operations that break this must clear it.
#[derive(Clone, Debug)]
pub struct TTTensor {
    kernels: Vec<Kernel>,
    pivot: Option<usize>,
}

impl TTTensor {
    pub fn new(kernels: Vec<Kernel>) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::ShapeMismatch("a tensor train needs at least one kernel".into()));
        }
        if kernels[0].left() != 1 || kernels[kernels.len() - 1].right() != 1 {
            return Err(Error::ShapeMismatch("boundary ranks must be 1".into()));
        }
        for (k, w) in kernels.windows(2).enumerate() {
            if w[0].right() != w[1].left() {
                return Err(Error::ShapeMismatch(format!(
                    "rank chain broken between kernels {k} and {}: {} vs {}",
                    k + 1,
                    w[0].right(),
                    w[1].left()
                )));
            }
        }
        Ok(Self { kernels, pivot: None })
    }

    pub(crate) fn from_parts(kernels: Vec<Kernel>, pivot: Option<usize>) -> Self {
        debug_assert!(Self::new(kernels.clone()).is_ok());
        Self { kernels, pivot }
    }

    /// Rank-one tensor from one vector per axis.
    pub fn rank_one(vectors: Vec<Vec<f64>>) -> Self {
        Self::new(vectors.into_iter().map(Kernel::from_vector).collect()).expect("rank-one chain")
    }

    pub fn ones(sizes: &[usize]) -> Self {
        Self::rank_one(sizes.iter().map(|&n| vec![1.0; n]).collect())
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Self::rank_one(sizes.iter().map(|&n| vec![0.0; n]).collect())
    }

    pub fn dims(&self) -> usize {
        self.kernels.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.kernels.iter().map(Kernel::size).collect()
    }

    /// `r_0, …, r_d` including the unit boundary ranks.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = Vec::with_capacity(self.dims() + 1);
        r.push(1);
        r.extend(self.kernels.iter().map(Kernel::right));
        r
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn kernel(&self, k: usize) -> &Kernel {
        &self.kernels[k]
    }

    pub fn pivot(&self) -> Option<usize> {
        self.pivot
    }

    pub fn into_kernels(self) -> Vec<Kernel> {
        self.kernels
    }

    /// Number of stored doubles.
    pub fn storage(&self) -> usize {
        self.kernels.iter().map(Kernel::len).sum()
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        let sizes = self.mode_sizes();
        if idx.len() != sizes.len() || idx.iter().zip(&sizes).any(|(i, n)| i >= n) {
            return Err(Error::IndexOutOfRange {
                index: idx.to_vec(),
                sizes,
            });
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(Error::ShapeMismatch(format!(
                "mode sizes {:?} vs {:?}",
                self.mode_sizes(),
                other.mode_sizes()
            )));
        }
        Ok(())
    }

    /// Single entry via a left-to-right row-vector chain.
    pub fn entry(&self, idx: &[usize]) -> Result<f64> {
        self.check_index(idx)?;
        let mut row = vec![1.0];
        for (kernel, &i) in self.kernels.iter().zip(idx) {
            let mut next = vec![0.0; kernel.right()];
            for (b, nb) in next.iter_mut().enumerate() {
                *nb = row.iter().enumerate().map(|(a, ra)| ra * kernel.get(a, i, b)).sum();
            }
            row = next;
        }
        Ok(row[0])
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        let sizes = self.mode_sizes();
        let entries = sizes.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).unwrap_or(usize::MAX);
        if entries > DENSE_LIMIT {
            return Err(Error::SizeGuard {
                entries,
                limit: DENSE_LIMIT,
            });
        }
        // acc is (n_0 … n_{k-1}) × r_k, column-major with the first index fastest.
        let mut acc = vec![1.0];
        let mut rows = 1usize;
        for kernel in &self.kernels {
            let (l, n, r) = (kernel.left(), kernel.size(), kernel.right());
            let mut next = vec![0.0; rows * n * r];
            let prev = linalg::view(&acc, rows, l);
            for i in 0..n {
                // slice i of the kernel as an l × r matrix
                let slice = Mat::from_fn(l, r, |a, b| kernel.get(a, i, b));
                let prod = linalg::mul(prev, slice.as_ref());
                for b in 0..r {
                    for row in 0..rows {
                        next[row + rows * (i + n * b)] = prod[(row, b)];
                    }
                }
            }
            acc = next;
            rows *= n;
        }
        DenseTensor::new(sizes, acc)
    }

    /// TT-SVD of a dense array with total error at most `ctrl.epsilon`.
    pub fn from_dense(a: &DenseTensor, ctrl: &TruncationControl) -> Result<Self> {
        let sizes = a.shape().to_vec();
        let d = sizes.len();
        if d == 0 {
            return Err(Error::ShapeMismatch("need at least one axis".into()));
        }
        let delta = ctrl.delta(d - 1);
        let mut kernels = Vec::with_capacity(d);
        let mut rank = 1usize;
        // cur: rows (i_k, α) with i_k fastest, columns the remaining axes.
        let mut cur: Vec<f64> = a.data().to_vec();
        for (k, &n) in sizes.iter().enumerate().take(d - 1) {
            let rows = n * rank;
            let cols = cur.len() / rows;
            let svd = linalg::svd_truncated(linalg::view(&cur, rows, cols), delta, ctrl.max_rank);
            let new_rank = svd.s.len();
            kernels.push(Kernel::from_left_unfolding(rank, n, svd.u.as_ref()));
            // S Vᵀ is new_rank × (n_{k+1} · rest), reordered to rows (i_{k+1}, β).
            let next_n = sizes[k + 1];
            let rest = cols / next_n;
            let mut next = vec![0.0; new_rank * cols];
            for t in 0..rest {
                for i in 0..next_n {
                    let col = i + next_n * t;
                    for b in 0..new_rank {
                        next[i + next_n * b + next_n * new_rank * t] = svd.s[b] * svd.v[(col, b)];
                    }
                }
            }
            cur = next;
            rank = new_rank;
        }
        kernels.push(Kernel::new(rank, sizes[d - 1], 1, cur));
        let pivot = Some(d - 1);
        Ok(Self { kernels, pivot })
    }

    /// Entry-wise sum; ranks add on interior bonds, no rounding.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let d = self.dims();
        Ok(add_window(self, other, 0, d - 1))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    /// Multiplies one kernel by `c`; the pivot kernel when one is cached.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        let k = out.pivot.unwrap_or(0);
        out.kernels[k].scale(c);
        out
    }

    /// `Q_k(:, i, :) ← w_i · Q_k(:, i, :)`.
    pub fn scale_fiber(&self, k: usize, w: &[f64]) -> Result<Self> {
        let kernel = &self.kernels[k];
        if w.len() != kernel.size() {
            return Err(Error::ShapeMismatch(format!(
                "fiber weights of length {} for mode size {}",
                w.len(),
                kernel.size()
            )));
        }
        let mut out = self.clone();
        let kernel = &mut out.kernels[k];
        for b in 0..kernel.right() {
            for a in 0..kernel.left() {
                for (x, wi) in kernel.fiber_mut(a, b).iter_mut().zip(w) {
                    *x *= wi;
                }
            }
        }
        if out.pivot != Some(k) {
            out.pivot = None;
        }
        Ok(out)
    }

    /// Periodic index shift: `Q_k(:, i, :) ← Q_k(:, (i + j) mod n_k, :)`.
    ///
    /// A row permutation of an unfolding keeps orthogonality, so the cached
    /// pivot survives.
    pub fn shift_fiber(&self, k: usize, j: isize) -> Self {
        let mut out = self.clone();
        let n = out.kernels[k].size();
        let s = j.rem_euclid(n as isize) as usize;
        if s == 0 {
            return out;
        }
        let kernel = &mut out.kernels[k];
        for b in 0..kernel.right() {
            for a in 0..kernel.left() {
                kernel.fiber_mut(a, b).rotate_left(s);
            }
        }
        out
    }

    /// Moves all non-orthogonality into kernel `k`.
    pub fn orthogonalize(&mut self, k: usize) {
        assert!(k < self.dims(), "pivot {k} out of range");
        let (start_left, start_right) = match self.pivot {
            Some(p) => (p, p),
            None => (0, self.dims() - 1),
        };
        for j in start_left..k {
            qr_step(&mut self.kernels, j);
        }
        for j in (k + 1..=start_right).rev() {
            lq_step(&mut self.kernels, j);
        }
        self.pivot = Some(k);
    }

    pub fn orthogonalized(&self, k: usize) -> Self {
        let mut out = self.clone();
        out.orthogonalize(k);
        out
    }

    /// Truncated-SVD recompression with absolute error at most `ctrl.epsilon`.
    /// The result has pivot 0.
    pub fn round(&self, ctrl: &TruncationControl) -> Self {
        let d = self.dims();
        let mut out = self.clone();
        round_window(&mut out, 0, d - 1, ctrl, false);
        out
    }

    /// Σ over all entries of the entry-wise product.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        let mut g = Mat::<f64>::identity(1, 1);
        for (ka, kb) in self.kernels.iter().zip(&other.kernels) {
            let x = kb.apply_left(g.as_ref());
            g = linalg::mul(ka.left_unfolding().transpose(), x.left_unfolding());
        }
        Ok(g[(0, 0)])
    }

    /// Frobenius norm via orthogonalization.
    pub fn norm(&self) -> f64 {
        match self.pivot {
            Some(p) => self.kernels[p].norm_sq().sqrt(),
            None => {
                let k = self.dims() - 1;
                self.orthogonalized(k).kernels[k].norm_sq().sqrt()
            }
        }
    }

    /// Σ_i Π_k w_k(i_k): contraction with one weight vector per axis.
    pub fn contract(&self, weights: &[&[f64]]) -> Result<f64> {
        if weights.len() != self.dims() {
            return Err(Error::ShapeMismatch("one weight vector per axis required".into()));
        }
        let mut row = vec![1.0];
        for (kernel, w) in self.kernels.iter().zip(weights) {
            if w.len() != kernel.size() {
                return Err(Error::ShapeMismatch("weight length differs from mode size".into()));
            }
            row = contract_kernel_left(&row, kernel, w);
        }
        Ok(row[0])
    }

    pub fn sum(&self) -> f64 {
        let ones: Vec<Vec<f64>> = self.mode_sizes().iter().map(|&n| vec![1.0; n]).collect();
        let refs: Vec<&[f64]> = ones.iter().map(Vec::as_slice).collect();
        self.contract(&refs).expect("matching shapes")
    }

    /// Contracts the listed axes with weight vectors, leaving a tensor over the
    /// remaining axes in their original order.
    pub fn partial_contract(&self, weights: &[Option<&[f64]>]) -> Result<Self> {
        if weights.len() != self.dims() {
            return Err(Error::ShapeMismatch("one weight slot per axis required".into()));
        }
        if weights.iter().all(Option::is_some) {
            return Err(Error::ShapeMismatch("at least one axis must remain".into()));
        }
        // Each contracted kernel becomes an r_{k-1} × r_k matrix absorbed into a neighbour.
        let mut kept: Vec<Kernel> = Vec::new();
        let mut pending: Option<Mat<f64>> = None;
        for (kernel, w) in self.kernels.iter().zip(weights) {
            match w {
                Some(w) => {
                    if w.len() != kernel.size() {
                        return Err(Error::ShapeMismatch("weight length differs from mode size".into()));
                    }
                    let m = kernel_matrix(kernel, w);
                    pending = Some(match pending {
                        Some(p) => linalg::mul(p.as_ref(), m.as_ref()),
                        None => m,
                    });
                }
                None => {
                    let k = match pending.take() {
                        Some(p) => kernel.apply_left(p.as_ref()),
                        None => kernel.clone(),
                    };
                    kept.push(k);
                }
            }
        }
        if let Some(p) = pending {
            let last = kept.pop().expect("at least one kept axis");
            kept.push(last.apply_right(p.as_ref()));
        }
        Self::new(kept)
    }

    /// Kernel-wise product with rank `r_k · s_k`; no rounding.
    pub fn hadamard_exact(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let kernels = self
            .kernels
            .iter()
            .zip(&other.kernels)
            .map(|(a, b)| {
                let (la, ra, lb, rb) = (a.left(), a.right(), b.left(), b.right());
                Kernel::from_fn(la * lb, a.size(), ra * rb, |p, i, q| {
                    a.get(p % la, i, q % ra) * b.get(p / la, i, q / ra)
                })
            })
            .collect();
        Self::new(kernels)
    }

    /// Evaluates every entry by iterating multi-indices; test helper for tiny grids.
    pub fn entries_by_index(&self) -> Result<Vec<f64>> {
        let sizes = self.mode_sizes();
        let total: usize = sizes.iter().product();
        let mut idx = vec![0; sizes.len()];
        let mut out = Vec::with_capacity(total);
        for _ in 0..total {
            out.push(self.entry(&idx)?);
            increment(&mut idx, &sizes);
        }
        Ok(out)
    }
}

/// `Σ_i w_i K(:, i, :)` as an `r_{k-1} × r_k` matrix.
pub(crate) fn kernel_matrix(kernel: &Kernel, w: &[f64]) -> Mat<f64> {
    Mat::from_fn(kernel.left(), kernel.right(), |a, b| {
        kernel.fiber(a, b).iter().zip(w).map(|(x, y)| x * y).sum()
    })
}

fn contract_kernel_left(row: &[f64], kernel: &Kernel, w: &[f64]) -> Vec<f64> {
    (0..kernel.right())
        .map(|b| {
            (0..kernel.left())
                .map(|a| row[a] * kernel.fiber(a, b).iter().zip(w).map(|(x, y)| x * y).sum::<f64>())
                .sum()
        })
        .collect()
}

/// Makes kernel `k` left-orthogonal and pushes the triangular factor into `k + 1`.
pub(crate) fn qr_step(kernels: &mut [Kernel], k: usize) {
    let (q, r) = linalg::qr_thin(kernels[k].left_unfolding());
    let (left, size) = (kernels[k].left(), kernels[k].size());
    kernels[k] = Kernel::from_left_unfolding(left, size, q.as_ref());
    kernels[k + 1] = kernels[k + 1].apply_left(r.as_ref());
}

/// Makes kernel `k` right-orthogonal and pushes the triangular factor into `k - 1`.
pub(crate) fn lq_step(kernels: &mut [Kernel], k: usize) {
    let t = kernels[k].transposed();
    let (q, r) = linalg::qr_thin(t.left_unfolding());
    kernels[k] = Kernel::from_left_unfolding(t.left(), t.size(), q.as_ref()).transposed();
    kernels[k - 1] = kernels[k - 1].apply_right(r.transpose());
}

/// Truncates bond `k - 1` through the right unfolding of kernel `k`, leaving
/// kernel `k` right-orthogonal.
pub(crate) fn svd_step(kernels: &mut [Kernel], k: usize, delta: f64, max_rank: Option<usize>) {
    let t = kernels[k].transposed();
    let svd = linalg::svd_truncated(t.left_unfolding(), delta, max_rank);
    kernels[k] = Kernel::from_left_unfolding(t.left(), t.size(), svd.u.as_ref()).transposed();
    let vs = Mat::from_fn(svd.v.nrows(), svd.s.len(), |i, j| svd.v[(i, j)] * svd.s[j]);
    kernels[k - 1] = kernels[k - 1].apply_right(vs.as_ref());
}

/// Recompresses bonds `lo..hi` of `t` and leaves pivot `lo`.
///
/// With `outer_orthogonal` the caller guarantees kernels below `lo` are
/// left-orthogonal and kernels above `hi` right-orthogonal, so only the window
/// is swept; otherwise the whole chain is orthogonalized first.
pub(crate) fn round_window(t: &mut TTTensor, lo: usize, hi: usize, ctrl: &TruncationControl, outer_orthogonal: bool) {
    if outer_orthogonal {
        for j in lo..hi {
            qr_step(&mut t.kernels, j);
        }
    } else {
        t.orthogonalize(hi);
    }
    let delta = ctrl.delta(hi - lo);
    for k in (lo + 1..=hi).rev() {
        svd_step(&mut t.kernels, k, delta, ctrl.max_rank);
    }
    t.pivot = Some(lo);
}

/// Block sum of two tensors that share every kernel outside `[lo, hi]`.
///
/// The shared outer kernels are taken from `a`; bond `lo - 1` and bond `hi`
/// keep their rank.
pub(crate) fn add_window(a: &TTTensor, b: &TTTensor, lo: usize, hi: usize) -> TTTensor {
    let mut kernels = Vec::with_capacity(a.dims());
    for k in 0..a.dims() {
        if k < lo || k > hi {
            kernels.push(a.kernels[k].clone());
            continue;
        }
        kernels.push(block_combine(&a.kernels[k], &b.kernels[k], k == lo, k == hi));
    }
    TTTensor { kernels, pivot: None }
}

fn block_combine(a: &Kernel, b: &Kernel, share_left: bool, share_right: bool) -> Kernel {
    let n = a.size();
    let (la, ra, lb, rb) = (a.left(), a.right(), b.left(), b.right());
    match (share_left, share_right) {
        (true, true) => {
            debug_assert_eq!((la, ra), (lb, rb));
            let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
            Kernel::new(la, n, ra, data)
        }
        (true, false) => {
            debug_assert_eq!(la, lb);
            let mut data = Vec::with_capacity(la * n * (ra + rb));
            data.extend_from_slice(a.data());
            data.extend_from_slice(b.data());
            Kernel::new(la, n, ra + rb, data)
        }
        (false, true) => {
            debug_assert_eq!(ra, rb);
            let mut out = Kernel::zeros(la + lb, n, ra);
            for q in 0..ra {
                for p in 0..la {
                    out.fiber_mut(p, q).copy_from_slice(a.fiber(p, q));
                }
                for p in 0..lb {
                    out.fiber_mut(la + p, q).copy_from_slice(b.fiber(p, q));
                }
            }
            out
        }
        (false, false) => {
            let mut out = Kernel::zeros(la + lb, n, ra + rb);
            for q in 0..ra {
                for p in 0..la {
                    out.fiber_mut(p, q).copy_from_slice(a.fiber(p, q));
                }
            }
            for q in 0..rb {
                for p in 0..lb {
                    out.fiber_mut(la + p, ra + q).copy_from_slice(b.fiber(p, q));
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_tt(rng: &mut ChaCha8Rng, sizes: &[usize], ranks: &[usize]) -> TTTensor {
        let d = sizes.len();
        let kernels = (0..d)
            .map(|k| {
                let l = if k == 0 { 1 } else { ranks[k - 1] };
                let r = if k == d - 1 { 1 } else { ranks[k] };
                Kernel::from_fn(l, sizes[k], r, |_, _, _| rng.gen_range(-1.0..1.0))
            })
            .collect();
        TTTensor::new(kernels).unwrap()
    }

    // Dense contraction written independently of `to_dense`: loop over all
    // multi-indices and all rank paths.
    fn brute_force(t: &TTTensor, idx: &[usize]) -> f64 {
        fn rec(t: &TTTensor, idx: &[usize], k: usize, a: usize) -> f64 {
            if k == t.dims() {
                return 1.0;
            }
            let kern = t.kernel(k);
            (0..kern.right()).map(|b| kern.get(a, idx[k], b) * rec(t, idx, k + 1, b)).sum()
        }
        rec(t, idx, 0, 0)
    }

    #[test]
    fn entry_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tt(&mut rng, &[4, 4, 4], &[3, 2]);
        let dense = t.to_dense().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    let idx = [i, j, k];
                    let expect = brute_force(&t, &idx);
                    assert!((t.entry(&idx).unwrap() - expect).abs() < 1e-13);
                    assert!((dense.get(&idx) - expect).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn entry_rejects_bad_index() {
        let t = TTTensor::ones(&[2, 3]);
        assert!(matches!(t.entry(&[0, 3]), Err(Error::IndexOutOfRange { .. })));
        assert!(t.entry(&[0]).is_err());
    }

    #[test]
    fn zero_kernels_give_zero() {
        let t = TTTensor::zeros(&[3, 3, 3]);
        assert!(t.to_dense().unwrap().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rank_one_entry_is_product() {
        let t = TTTensor::rank_one(vec![vec![1.0, 2.0], vec![3.0, 5.0]]);
        assert_eq!(t.to_dense().unwrap().data(), &[3.0, 6.0, 5.0, 10.0]);
    }

    #[test]
    fn round_trip_dense_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_tt(&mut rng, &[3, 4, 5, 2], &[2, 3, 2]);
        let dense = t.to_dense().unwrap();
        let back = TTTensor::from_dense(&dense, &TruncationControl::exact()).unwrap();
        let rel = back.to_dense().unwrap().frobenius_diff(&dense) / dense.norm();
        assert!(rel < 1e-12, "{rel}");
    }

    #[test]
    fn from_dense_finds_rank_two() {
        let n = 16;
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let a = DenseTensor::from_fn(vec![n, n], |i| {
            let (x, y) = (i[0] as f64 * h, i[1] as f64 * h);
            x.sin() * y.cos() + x.cos() * y.sin()
        });
        let t = TTTensor::from_dense(&a, &TruncationControl::new(1e-12)).unwrap();
        assert_eq!(t.ranks(), vec![1, 2, 1]);
    }

    #[test]
    fn add_adds_ranks_and_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_tt(&mut rng, &[3, 3, 3], &[2, 3]);
        let b = random_tt(&mut rng, &[3, 3, 3], &[1, 4]);
        let s = a.add(&b).unwrap();
        assert_eq!(s.ranks(), vec![1, 3, 7, 1]);
        let expect: Vec<f64> = a
            .to_dense()
            .unwrap()
            .data()
            .iter()
            .zip(b.to_dense().unwrap().data())
            .map(|(x, y)| x + y)
            .collect();
        for (x, y) in s.to_dense().unwrap().data().iter().zip(&expect) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn add_rejects_shape_mismatch() {
        let a = TTTensor::ones(&[2, 3]);
        let b = TTTensor::ones(&[3, 2]);
        assert!(a.add(&b).is_err());
    }

    #[test]
    fn cancellation_rounds_to_rank_one_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_tt(&mut rng, &[4, 4, 4], &[3, 3]);
        let z = a.sub(&a).unwrap().round(&TruncationControl::new(1e-12));
        assert_eq!(z.ranks(), vec![1, 1, 1, 1]);
        assert!(z.norm() < 1e-12);
    }

    #[test]
    fn doubled_tensor_rounds_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_tt(&mut rng, &[4, 5, 4], &[3, 3]);
        let r = a.add(&a).unwrap().round(&TruncationControl::new(1e-12));
        assert_eq!(r.ranks(), a.ranks());
        let da = a.to_dense().unwrap();
        for (x, y) in r.to_dense().unwrap().data().iter().zip(da.data()) {
            assert!((x - 2.0 * y).abs() < 1e-12);
        }
    }

    #[test]
    fn round_leaves_right_orthogonal_kernels() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_tt(&mut rng, &[5, 5, 5, 5], &[4, 5, 4]);
        let r = a.round(&TruncationControl::new(0.3));
        assert_eq!(r.pivot(), Some(0));
        for k in 1..4 {
            assert!(r.kernel(k).is_right_orthogonal(1e-12));
        }
    }

    #[test]
    fn orthogonalize_any_pivot_keeps_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_tt(&mut rng, &[4, 4, 4], &[3, 2]);
        let dense = a.to_dense().unwrap();
        for k in 0..3 {
            let o = a.orthogonalized(k);
            assert!(o.to_dense().unwrap().frobenius_diff(&dense) < 1e-12 * dense.norm());
            for j in 0..k {
                assert!(o.kernel(j).is_left_orthogonal(1e-12));
            }
            for j in k + 1..3 {
                assert!(o.kernel(j).is_right_orthogonal(1e-12));
            }
            assert!((o.kernel(k).norm_sq().sqrt() - dense.norm()).abs() < 1e-12 * dense.norm());
            // moving an existing pivot uses the cache
            for k2 in 0..3 {
                let o2 = o.orthogonalized(k2);
                assert!(o2.to_dense().unwrap().frobenius_diff(&dense) < 1e-12 * dense.norm());
                assert!((o2.kernel(k2).norm_sq().sqrt() - dense.norm()).abs() < 1e-12 * dense.norm());
            }
        }
    }

    #[test]
    fn shift_fiber_is_circular() {
        let mut spike = vec![0.0; 6];
        spike[2] = 1.0;
        let t = TTTensor::rank_one(vec![vec![1.0, 2.0], spike]);
        let s = t.shift_fiber(1, 1);
        // new(i) = old(i + 1): spike moves from 2 to 1
        assert_eq!(s.entry(&[1, 1]).unwrap(), 2.0);
        assert_eq!(s.entry(&[1, 2]).unwrap(), 0.0);
        let w = t.shift_fiber(1, 6);
        assert_eq!(w.to_dense().unwrap(), t.to_dense().unwrap());
        let neg = t.shift_fiber(1, -1);
        assert_eq!(neg.entry(&[0, 3]).unwrap(), 1.0);
    }

    #[test]
    fn scale_fiber_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_tt(&mut rng, &[4, 4], &[3]);
        let w = [1.0, -2.0, 0.5, 3.0];
        let s = a.scale_fiber(1, &w).unwrap();
        let da = a.to_dense().unwrap();
        let ds = s.to_dense().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((ds.get(&[i, j]) - w[j] * da.get(&[i, j])).abs() < 1e-14);
            }
        }
        assert!(a.scale_fiber(1, &[1.0]).is_err());
    }

    #[test]
    fn dot_and_norm_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_tt(&mut rng, &[4, 4, 4], &[2, 3]);
        let b = random_tt(&mut rng, &[4, 4, 4], &[3, 2]);
        let (da, db) = (a.to_dense().unwrap(), b.to_dense().unwrap());
        let expect: f64 = da.data().iter().zip(db.data()).map(|(x, y)| x * y).sum();
        assert!((a.dot(&b).unwrap() - expect).abs() < 1e-12 * expect.abs().max(1.0));
        assert!((a.norm() - da.norm()).abs() < 1e-12 * da.norm());
        assert!((a.dot(&a).unwrap() - a.norm().powi(2)).abs() < 1e-12 * da.norm().powi(2));
        let ones = TTTensor::ones(&[4, 4, 4]);
        assert!((a.dot(&ones).unwrap() - da.sum()).abs() < 1e-12);
        assert!((a.sum() - da.sum()).abs() < 1e-12);
    }

    #[test]
    fn partial_contract_sums_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_tt(&mut rng, &[3, 4, 2, 5], &[2, 3, 2]);
        let w0 = [0.5, 1.0, 2.0];
        let w2 = [1.0, -1.0];
        let p = a.partial_contract(&[Some(&w0), None, Some(&w2), None]).unwrap();
        assert_eq!(p.mode_sizes(), vec![4, 5]);
        let da = a.to_dense().unwrap();
        for i1 in 0..4 {
            for i3 in 0..5 {
                let mut s = 0.0;
                for i0 in 0..3 {
                    for i2 in 0..2 {
                        s += w0[i0] * w2[i2] * da.get(&[i0, i1, i2, i3]);
                    }
                }
                assert!((p.entry(&[i1, i3]).unwrap() - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hadamard_exact_multiplies_ranks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_tt(&mut rng, &[3, 3, 3], &[2, 3]);
        let b = random_tt(&mut rng, &[3, 3, 3], &[3, 2]);
        let h = a.hadamard_exact(&b).unwrap();
        assert_eq!(h.ranks(), vec![1, 6, 6, 1]);
        let (da, db, dh) = (a.to_dense().unwrap(), b.to_dense().unwrap(), h.to_dense().unwrap());
        for ((x, y), z) in da.data().iter().zip(db.data()).zip(dh.data()) {
            assert!((x * y - z).abs() < 1e-13);
        }
    }

    #[test]
    fn one_dimensional_tensors_work() {
        let t = TTTensor::rank_one(vec![vec![3.0, 4.0]]);
        assert!((t.norm() - 5.0).abs() < 1e-15);
        let r = t.round(&TruncationControl::new(1.0));
        assert_eq!(r.to_dense().unwrap().data(), &[3.0, 4.0]);
        let s = t.add(&t).unwrap();
        assert_eq!(s.ranks(), vec![1, 1]);
        assert_eq!(s.to_dense().unwrap().data(), &[6.0, 8.0]);
    }
}

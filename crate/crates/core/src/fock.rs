//! Truncated three-mode Fock space and the operator algebra on it.
//!
//! Modes are stored in the fixed order (cavity 1, mechanics, cavity 2), the
//! same order as the Heisenberg mode vector `[a1, b, a2]`. Basis states are
//! indexed lexicographically over the occupations `(n1, nm, n2)`, so the flat
//! index of `|n1, nm, n2>` is `(n1 * dm + nm) * d2 + n2`.

use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2, Axis};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub const CAVITY1: usize = 0;
pub const MECHANICS: usize = 1;
pub const CAVITY2: usize = 2;
pub const NUM_MODES: usize = 3;

/// Pure state on a [`FockSpace`].
pub type StateVector = Array1<C64>;

/// Density matrix on a [`FockSpace`] (or on a reduced space after a partial
/// trace).
pub type DensityMatrix = Array2<C64>;

/// A truncated Hilbert space for the three bosonic modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FockSpace {
    dims: [usize; NUM_MODES],
}

impl FockSpace {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.len() != NUM_MODES {
            return Err(Error::ModeCount(dims.len()));
        }
        for (mode, &dim) in dims.iter().enumerate() {
            if dim < 2 {
                return Err(Error::ModeTooSmall { mode, dim });
            }
        }
        Ok(Self { dims: [dims[0], dims[1], dims[2]] })
    }

    pub fn dims(&self) -> [usize; NUM_MODES] {
        self.dims
    }

    pub fn mode_dim(&self, mode: usize) -> Result<usize> {
        self.dims.get(mode).copied().ok_or(Error::ModeOutOfRange(mode))
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Same space with a different mechanical cutoff.
    pub fn with_mechanics_dim(&self, dim: usize) -> Result<Self> {
        Self::new(&[self.dims[0], dim, self.dims[2]])
    }

    pub fn index(&self, occupations: [usize; NUM_MODES]) -> Result<usize> {
        let mut idx = 0;
        for (mode, (&n, &d)) in occupations.iter().zip(&self.dims).enumerate() {
            if n >= d {
                return Err(Error::OccupationOutOfRange { mode, occupation: n, dim: d });
            }
            idx = idx * d + n;
        }
        Ok(idx)
    }

    /// Inverse of [`FockSpace::index`]; `index` must be below `total_dim`.
    pub fn occupations(&self, mut index: usize) -> [usize; NUM_MODES] {
        let mut occ = [0; NUM_MODES];
        for mode in (0..NUM_MODES).rev() {
            occ[mode] = index % self.dims[mode];
            index /= self.dims[mode];
        }
        occ
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < NUM_MODES {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange(mode))
        }
    }
}

/// Sparse complex operator in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl Operator {
    /// Builds from `(row, col, value)` entries; duplicates are summed and exact
    /// zeros dropped.
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, C64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; dim + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside {dim}x{dim}");
            if rows.last() == Some(&r) && indices.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                indices.push(c);
                values.push(v);
            }
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_idx = Vec::with_capacity(rows.len());
        let mut keep_val = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(values) {
            if v != C64::new(0.0, 0.0) {
                keep_rows.push(r);
                keep_idx.push(c);
                keep_val.push(v);
            }
        }
        for &r in &keep_rows {
            indptr[r + 1] += 1;
        }
        for i in 0..dim {
            indptr[i + 1] += indptr[i];
        }
        Self { dim, indptr, indices: keep_idx, values: keep_val }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_triplets(dim, Vec::new())
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let entries = diag.iter().enumerate().map(|(i, &d)| (i, i, C64::new(d, 0.0))).collect();
        Self::from_triplets(diag.len(), entries)
    }

    pub fn from_dense(m: &Array2<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        let entries = m.indexed_iter().map(|((r, c), &v)| (r, c, v)).collect();
        Self::from_triplets(m.nrows(), entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over stored `(row, col, value)` entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim)
            .flat_map(move |r| (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k])))
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let span = self.indptr[row]..self.indptr[row + 1];
        match self.indices[span.clone()].binary_search(&col) {
            Ok(k) => self.values[span.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for (r, c, v) in self.iter() {
            m[[r, c]] = v;
        }
        m
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (r, c, v * factor)).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.iter().chain(other.iter()).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut entries = Vec::new();
        for (r, k, a) in self.iter() {
            for j in other.indptr[k]..other.indptr[k + 1] {
                entries.push((r, other.indices[j], a * other.values[j]));
            }
        }
        Self::from_triplets(self.dim, entries)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A^dag|` over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn apply(&self, x: &StateVector) -> StateVector {
        let mut out = Array1::zeros(self.dim);
        self.add_mul_vec(C64::new(1.0, 0.0), x.as_slice().unwrap(), out.as_slice_mut().unwrap());
        out
    }

    /// `out += coef * A x`.
    pub fn add_mul_vec(&self, coef: C64, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *o += coef * acc;
        }
    }

    /// `out += coef * A m` for a dense square `m`.
    pub fn add_left_mul(&self, coef: C64, m: ArrayView2<C64>, mut out: ArrayViewMut2<C64>) {
        for r in 0..self.dim {
            let mut row = out.index_axis_mut(Axis(0), r);
            for k in self.indptr[r]..self.indptr[r + 1] {
                let a = coef * self.values[k];
                row.scaled_add(a, &m.index_axis(Axis(0), self.indices[k]));
            }
        }
    }

    /// `out += coef * m A^dag` for a dense square `m`.
    pub fn add_right_mul_adjoint(&self, coef: C64, m: ArrayView2<C64>, mut out: ArrayViewMut2<C64>) {
        // (m A^dag)[i, j] = sum_k m[i, k] conj(A[j, k])
        for (j, k, v) in self.iter() {
            let a = coef * v.conj();
            out.column_mut(j).scaled_add(a, &m.column(k));
        }
    }

    /// `A m A^dag`.
    pub fn sandwich(&self, m: ArrayView2<C64>) -> Array2<C64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        self.add_sandwich(m, out.view_mut());
        out
    }

    /// `out += A m A^dag`. Operators with at most one entry per row (ladder
    /// operators and their powers) take a single gather pass over `m`.
    pub fn add_sandwich(&self, m: ArrayView2<C64>, mut out: ArrayViewMut2<C64>) {
        let n = self.dim;
        let single = (0..n).all(|r| self.indptr[r + 1] - self.indptr[r] <= 1);
        if let (true, Some(src), Some(dst)) = (single, m.as_slice(), out.as_slice_mut()) {
            let rows: Vec<(usize, usize, C64)> = (0..n)
                .filter(|&r| self.indptr[r + 1] > self.indptr[r])
                .map(|r| (r, self.indices[self.indptr[r]], self.values[self.indptr[r]]))
                .collect();
            if rows.iter().all(|r| r.2.im == 0.0) {
                // real weights (ladder operators): scalar instead of complex products
                let real: Vec<(usize, usize, f64)> = rows.iter().map(|&(r, s, c)| (r, s, c.re)).collect();
                for &(i, si, ci) in &real {
                    let src_row = &src[si * n..(si + 1) * n];
                    let dst_row = &mut dst[i * n..(i + 1) * n];
                    for &(j, sj, cj) in &real {
                        dst_row[j] += src_row[sj] * (ci * cj);
                    }
                }
            } else {
                for &(i, si, ci) in &rows {
                    let src_row = &src[si * n..(si + 1) * n];
                    let dst_row = &mut dst[i * n..(i + 1) * n];
                    for &(j, sj, cj) in &rows {
                        dst_row[j] += ci * cj.conj() * src_row[sj];
                    }
                }
            }
            return;
        }
        let one = C64::new(1.0, 0.0);
        let mut left = Array2::zeros((n, n));
        self.add_left_mul(one, m, left.view_mut());
        self.add_right_mul_adjoint(one, left.view(), out);
    }

    /// `<psi| A |psi>`.
    pub fn expectation(&self, psi: &StateVector) -> C64 {
        psi.iter().zip(self.apply(psi).iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `tr(A rho)`.
    pub fn expectation_density(&self, rho: &DensityMatrix) -> C64 {
        self.iter().map(|(r, c, v)| v * rho[[c, r]]).sum()
    }
}

/// Annihilation operator of `mode`, embedded with identities on the other
/// modes. Acts as `a|n> = sqrt(n)|n-1>` inside the truncation.
pub fn ladder(space: &FockSpace, mode: usize) -> Result<Operator> {
    space.check_mode(mode)?;
    let dims = space.dims();
    let entries = (0..space.total_dim())
        .filter_map(|col| {
            let mut occ = space.occupations(col);
            let n = occ[mode];
            if n == 0 {
                return None;
            }
            occ[mode] = n - 1;
            let row = flat_index(&dims, &occ);
            Some((row, col, C64::new((n as f64).sqrt(), 0.0)))
        })
        .collect();
    Ok(Operator::from_triplets(space.total_dim(), entries))
}

/// Number operator of `mode`: diagonal with entries `0..dim-1` for that mode.
pub fn number_op(space: &FockSpace, mode: usize) -> Result<Operator> {
    space.check_mode(mode)?;
    let diag: Vec<f64> = (0..space.total_dim()).map(|i| space.occupations(i)[mode] as f64).collect();
    Ok(Operator::from_diagonal(&diag))
}

/// Total excitation number `n1 + nm + n2`.
pub fn excitation_number(space: &FockSpace) -> Operator {
    let diag: Vec<f64> = (0..space.total_dim()).map(|i| space.occupations(i).iter().sum::<usize>() as f64).collect();
    Operator::from_diagonal(&diag)
}

/// Fock basis state `|n1, nm, n2>` in storage order.
pub fn basis_state(space: &FockSpace, occupations: [usize; NUM_MODES]) -> Result<StateVector> {
    let idx = space.index(occupations)?;
    let mut psi = Array1::zeros(space.total_dim());
    psi[idx] = C64::new(1.0, 0.0);
    Ok(psi)
}

/// `|psi><psi|`.
pub fn pure_density(psi: &StateVector) -> DensityMatrix {
    let n = psi.len();
    Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj())
}

/// Reduced density matrix on the modes in `keep`.
///
/// Kept modes are ordered by ascending mode index regardless of the order in
/// `keep`, and the reduced basis is again lexicographic.
pub fn partial_trace(rho: &DensityMatrix, space: &FockSpace, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    for &m in keep {
        space.check_mode(m)?;
    }
    let n = space.total_dim();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho.nrows() });
    }
    let dims = space.dims();
    let kept: Vec<usize> = (0..NUM_MODES).filter(|m| keep.contains(m)).collect();
    if kept.len() == NUM_MODES {
        return Ok(rho.clone());
    }
    let traced: Vec<usize> = (0..NUM_MODES).filter(|m| !keep.contains(m)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&m| dims[m]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&m| dims[m]).collect();
    let reduced_dim: usize = kept_dims.iter().product();

    let split: Vec<(usize, usize)> = (0..n)
        .map(|i| {
            let occ = space.occupations(i);
            let k = flat_index(&kept_dims, &kept.iter().map(|&m| occ[m]).collect::<Vec<_>>());
            let t = flat_index(&traced_dims, &traced.iter().map(|&m| occ[m]).collect::<Vec<_>>());
            (k, t)
        })
        .collect();

    let mut out = Array2::zeros((reduced_dim, reduced_dim));
    for i in 0..n {
        let (ki, ti) = split[i];
        for j in 0..n {
            let (kj, tj) = split[j];
            if ti == tj {
                out[[ki, kj]] += rho[[i, j]];
            }
        }
    }
    Ok(out)
}

/// `max |M - M^dag|` for a dense matrix.
pub fn hermiticity_defect(m: &Array2<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for ((i, j), v) in m.indexed_iter() {
        worst = worst.max((v - m[[j, i]].conj()).norm());
    }
    worst
}

pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().iter().sum()
}

fn flat_index(dims: &[usize], occ: &[usize]) -> usize {
    dims.iter().zip(occ).fold(0, |acc, (&d, &n)| acc * d + n)
}

//! Truncated three-mode Fock space, sparse operators and states.
//!
//! Basis index of `|n_a, n_m, n_b>` is `(n_a * N_m + n_m) * N_b + n_b`, where
//! `N_x` is the number of levels kept for mode `x` (levels `0..N_x`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cavity,
    Magnon,
    Phonon,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Cavity, Mode::Magnon, Mode::Phonon];

    pub fn index(self) -> usize {
        match self {
            Mode::Cavity => 0,
            Mode::Magnon => 1,
            Mode::Phonon => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Cavity => "a",
            Mode::Magnon => "m",
            Mode::Phonon => "b",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Lower,
    Raise,
    Number,
}

/// Levels kept per mode, ordered (cavity, magnon, phonon).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockSpace {
    pub cutoffs: [usize; 3],
}

impl FockSpace {
    pub fn new(n_a: usize, n_m: usize, n_b: usize) -> Result<Self> {
        for (mode, n) in Mode::ALL.iter().zip([n_a, n_m, n_b]) {
            if n < 1 {
                return Err(Error::invalid(
                    &format!("cutoff_{}", mode.label()),
                    "must keep at least one level",
                ));
            }
        }
        Ok(FockSpace { cutoffs: [n_a, n_m, n_b] })
    }

    pub fn dim(&self) -> usize {
        self.cutoffs.iter().product()
    }

    pub fn cutoff(&self, mode: Mode) -> usize {
        self.cutoffs[mode.index()]
    }

    /// Distance between basis indices that differ by one quantum in `mode`.
    pub fn stride(&self, mode: Mode) -> usize {
        match mode {
            Mode::Cavity => self.cutoffs[1] * self.cutoffs[2],
            Mode::Magnon => self.cutoffs[2],
            Mode::Phonon => 1,
        }
    }

    pub fn index(&self, n: [usize; 3]) -> usize {
        debug_assert!(n.iter().zip(self.cutoffs).all(|(&k, c)| k < c));
        (n[0] * self.cutoffs[1] + n[1]) * self.cutoffs[2] + n[2]
    }

    pub fn levels(&self, index: usize) -> [usize; 3] {
        let nb = index % self.cutoffs[2];
        let rest = index / self.cutoffs[2];
        [rest / self.cutoffs[1], rest % self.cutoffs[1], nb]
    }

    /// Basis vector `|n_a, n_m, n_b>`.
    pub fn basis_state(&self, n: [usize; 3]) -> Result<Vec<C64>> {
        for (k, mode) in Mode::ALL.iter().enumerate() {
            if n[k] >= self.cutoffs[k] {
                return Err(Error::invalid(
                    &format!("n_{}", mode.label()),
                    format!("{} exceeds the truncation ({} levels)", n[k], self.cutoffs[k]),
                ));
            }
        }
        let mut psi = vec![C64::new(0.0, 0.0); self.dim()];
        psi[self.index(n)] = C64::new(1.0, 0.0);
        Ok(psi)
    }

    /// Product state `|cavity> (x) |magnon> (x) |phonon>` from single-mode amplitudes.
    pub fn product_state(&self, a: &[C64], m: &[C64], b: &[C64]) -> Result<Vec<C64>> {
        for (k, v) in [a, m, b].iter().enumerate() {
            if v.len() != self.cutoffs[k] {
                return Err(Error::invalid(
                    &format!("cutoff_{}", Mode::ALL[k].label()),
                    format!("factor has {} levels, space keeps {}", v.len(), self.cutoffs[k]),
                ));
            }
        }
        let mut psi = Vec::with_capacity(self.dim());
        for x in a {
            for y in m {
                for z in b {
                    psi.push(x * y * z);
                }
            }
        }
        Ok(psi)
    }
}

/// Sparse complex matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
    pub hermitian: bool,
}

impl Operator {
    /// Build from `(row, col, value)` triplets; duplicates are summed, zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>, hermitian: bool) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; dim + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            indptr[r + 1] += indptr[r];
        }
        let mut op = Operator { dim, indptr, indices, values, hermitian };
        op.prune();
        op
    }

    fn prune(&mut self) {
        if self.values.iter().all(|v| *v != C64::new(0.0, 0.0)) {
            return;
        }
        let mut triplets = Vec::with_capacity(self.values.len());
        for (r, c, v) in self.iter() {
            if v != C64::new(0.0, 0.0) {
                triplets.push((r, c, v));
            }
        }
        let h = self.hermitian;
        *self = Operator::from_triplets(self.dim, triplets, h);
    }

    pub fn identity(dim: usize) -> Self {
        let triplets = (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
        Operator::from_triplets(dim, triplets, true)
    }

    pub fn zeros(dim: usize) -> Self {
        Operator::from_triplets(dim, Vec::new(), true)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let range = self.indptr[row]..self.indptr[row + 1];
        match self.indices[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// `out = self * x`.
    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *o = acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut out);
        out
    }

    /// `<x| self |x>`.
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let y = self.apply(x);
        x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum()
    }

    /// `Tr(self * rho)` for a dense density matrix.
    pub fn expectation_density(&self, rho: &DensityMatrix) -> C64 {
        assert_eq!(rho.dim(), self.dim);
        let mut acc = C64::new(0.0, 0.0);
        for (r, c, v) in self.iter() {
            acc += v * rho.get(c, r);
        }
        acc
    }

    pub fn adjoint(&self) -> Self {
        let triplets = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Operator::from_triplets(self.dim, triplets, self.hermitian)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out.hermitian = self.hermitian && s.im == 0.0;
        out.prune();
        out
    }

    pub fn add(&self, other: &Operator) -> Self {
        assert_eq!(self.dim, other.dim);
        let triplets = self.iter().chain(other.iter()).collect();
        Operator::from_triplets(self.dim, triplets, self.hermitian && other.hermitian)
    }

    pub fn sub(&self, other: &Operator) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Operator) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut triplets = Vec::new();
        for (r, k, v) in self.iter() {
            for j in other.indptr[k]..other.indptr[k + 1] {
                triplets.push((r, other.indices[j], v * other.values[j]));
            }
        }
        Operator::from_triplets(self.dim, triplets, false)
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `self - self^dagger`.
    pub fn hermiticity_error(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }
}

/// Embedded single-mode operator on the full space.
pub fn mode_operator(space: &FockSpace, mode: Mode, kind: OpKind) -> Operator {
    let dim = space.dim();
    let stride = space.stride(mode);
    let mut triplets = Vec::new();
    for i in 0..dim {
        let n = space.levels(i)[mode.index()];
        match kind {
            OpKind::Number => {
                if n > 0 {
                    triplets.push((i, i, C64::new(n as f64, 0.0)));
                }
            }
            OpKind::Lower => {
                if n > 0 {
                    triplets.push((i - stride, i, C64::new((n as f64).sqrt(), 0.0)));
                }
            }
            OpKind::Raise => {
                if n + 1 < space.cutoff(mode) {
                    triplets.push((i + stride, i, C64::new(((n + 1) as f64).sqrt(), 0.0)));
                }
            }
        }
    }
    Operator::from_triplets(dim, triplets, kind == OpKind::Number)
}

/// Dense Hermitian density matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::invalid("rho", format!("expected {} entries, got {}", dim * dim, data.len())));
        }
        Ok(DensityMatrix { dim, data })
    }

    pub fn from_pure(psi: &[C64]) -> Self {
        let dim = psi.len();
        let mut data = Vec::with_capacity(dim * dim);
        for x in psi {
            for y in psi {
                data.push(x * y.conj());
            }
        }
        DensityMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim + c]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// Replace with `(rho + rho^dagger) / 2`.
    pub fn symmetrize(&mut self) {
        symmetrize_in_place(&mut self.data, self.dim);
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        min_hermitian_eigenvalue(&self.to_dense())
    }
}

/// Smallest eigenvalue of the Hermitian part of `m`.
///
/// Subnormal entries are flushed to zero and zero rows are split off as exact
/// zero eigenvalues before diagonalizing; the dense solver returns NaN on
/// large, highly degenerate projectors otherwise.
pub fn min_hermitian_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let flush = |c: C64| C64::new(if c.re.abs() < f64::MIN_POSITIVE { 0.0 } else { c.re }, if c.im.abs() < f64::MIN_POSITIVE { 0.0 } else { c.im });
    let h = DMatrix::from_fn(n, n, |i, j| flush((m[(i, j)] + m[(j, i)].conj()) * 0.5));
    let keep: Vec<usize> = (0..n).filter(|&i| h.row(i).iter().any(|c| *c != C64::new(0.0, 0.0))).collect();
    let floor = if keep.len() < n { 0.0 } else { f64::INFINITY };
    if keep.is_empty() {
        return floor;
    }
    let sub = DMatrix::from_fn(keep.len(), keep.len(), |i, j| h[(keep[i], keep[j])]);
    sub.symmetric_eigenvalues().iter().cloned().fold(floor, |a, b| if b.is_nan() { f64::NAN } else { a.min(b) })
}

pub(crate) fn symmetrize_in_place(data: &mut [C64], dim: usize) {
    for i in 0..dim {
        let d = data[i * dim + i];
        data[i * dim + i] = C64::new(d.re, 0.0);
        for j in (i + 1)..dim {
            let avg = 0.5 * (data[i * dim + j] + data[j * dim + i].conj());
            data[i * dim + j] = avg;
            data[j * dim + i] = avg.conj();
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(Vec<C64>),
    Density(DensityMatrix),
}

impl QuantumState {
    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Density(r) => r.dim(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            QuantumState::Pure(v) => DensityMatrix::from_pure(v),
            QuantumState::Density(r) => r.clone(),
        }
    }

    /// Check the normalization/Hermiticity/positivity invariants.
    pub fn validate(&self, tol: f64) -> Result<()> {
        match self {
            QuantumState::Pure(v) => {
                let n: f64 = v.iter().map(|c| c.norm_sqr()).sum();
                if (n - 1.0).abs() > tol {
                    return Err(Error::invalid("state", format!("norm {n} is not 1")));
                }
            }
            QuantumState::Density(r) => {
                let tr = r.trace();
                if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
                    return Err(Error::invalid("state", format!("trace {tr} is not 1")));
                }
                let d = r.dim();
                for i in 0..d {
                    for j in 0..d {
                        if (r.get(i, j) - r.get(j, i).conj()).norm() > tol {
                            return Err(Error::invalid("state", "density matrix is not Hermitian"));
                        }
                    }
                }
                let lam = r.min_eigenvalue();
                if lam < -tol {
                    return Err(Error::invalid("state", format!("negative eigenvalue {lam:e}")));
                }
            }
        }
        Ok(())
    }
}

/// Reduced density matrix of one mode from a full state vector.
pub fn partial_trace_pure(psi: &[C64], space: &FockSpace, keep: Mode) -> DMatrix<C64> {
    assert_eq!(psi.len(), space.dim());
    let n = space.cutoff(keep);
    let mut out = DMatrix::zeros(n, n);
    let k = keep.index();
    let others: Vec<usize> = (0..3).filter(|&j| j != k).collect();
    let (n1, n2) = (space.cutoffs[others[0]], space.cutoffs[others[1]]);
    for u in 0..n1 {
        for v in 0..n2 {
            let idx = |level: usize| {
                let mut l = [0usize; 3];
                l[k] = level;
                l[others[0]] = u;
                l[others[1]] = v;
                space.index(l)
            };
            for i in 0..n {
                let x = psi[idx(i)];
                if x == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += x * psi[idx(j)].conj();
                }
            }
        }
    }
    out
}

/// Reduced density matrix of one mode from a full density matrix.
pub fn partial_trace_density(rho: &DensityMatrix, space: &FockSpace, keep: Mode) -> DMatrix<C64> {
    assert_eq!(rho.dim(), space.dim());
    let n = space.cutoff(keep);
    let mut out = DMatrix::zeros(n, n);
    let k = keep.index();
    let others: Vec<usize> = (0..3).filter(|&j| j != k).collect();
    let (n1, n2) = (space.cutoffs[others[0]], space.cutoffs[others[1]]);
    for u in 0..n1 {
        for v in 0..n2 {
            let idx = |level: usize| {
                let mut l = [0usize; 3];
                l[k] = level;
                l[others[0]] = u;
                l[others[1]] = v;
                space.index(l)
            };
            for i in 0..n {
                let ii = idx(i);
                for j in 0..n {
                    out[(i, j)] += rho.get(ii, idx(j));
                }
            }
        }
    }
    out
}

pub fn partial_trace(state: &QuantumState, space: &FockSpace, keep: Mode) -> DMatrix<C64> {
    match state {
        QuantumState::Pure(psi) => partial_trace_pure(psi, space, keep),
        QuantumState::Density(rho) => partial_trace_density(rho, space, keep),
    }
}

/// `(N_a, N_m, N_b)` expectations.
pub fn occupations(state: &QuantumState, space: &FockSpace) -> [f64; 3] {
    let mut n = [0.0; 3];
    match state {
        QuantumState::Pure(psi) => {
            for (i, c) in psi.iter().enumerate() {
                let p = c.norm_sqr();
                for (k, l) in space.levels(i).iter().enumerate() {
                    n[k] += p * *l as f64;
                }
            }
        }
        QuantumState::Density(rho) => {
            for i in 0..space.dim() {
                let p = rho.get(i, i).re;
                for (k, l) in space.levels(i).iter().enumerate() {
                    n[k] += p * *l as f64;
                }
            }
        }
    }
    n
}

/// Population of the highest kept level of each mode.
pub fn top_level_populations(state: &QuantumState, space: &FockSpace) -> [f64; 3] {
    let mut top = [0.0; 3];
    for i in 0..space.dim() {
        let p = match state {
            QuantumState::Pure(psi) => psi[i].norm_sqr(),
            QuantumState::Density(rho) => rho.get(i, i).re,
        };
        for (k, l) in space.levels(i).iter().enumerate() {
            if *l + 1 == space.cutoffs[k] {
                top[k] += p;
            }
        }
    }
    top
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn index_round_trips() {
        let s = FockSpace::new(3, 4, 5).unwrap();
        assert_eq!(s.dim(), 60);
        for i in 0..s.dim() {
            assert_eq!(s.index(s.levels(i)), i);
        }
        assert_eq!(s.index([1, 0, 0]), 20);
        assert_eq!(s.index([0, 1, 0]), 5);
    }

    #[test]
    fn min_eigenvalue_of_degenerate_projectors_is_finite() {
        for n in [6usize, 40, 144] {
            let psi = crate::states::coherent_state(C64::new(0.5, 0.0), n).unwrap();
            let ev = min_hermitian_eigenvalue(&crate::states::projector(&psi));
            assert!(ev.is_finite() && ev.abs() < 1e-12, "n = {n}: {ev}");
        }
        let mut v = vec![c(0.0); 144];
        v[0] = c(0.6);
        v[143] = c(0.8);
        let m = crate::states::projector(&v);
        assert!(min_hermitian_eigenvalue(&m).abs() < 1e-12);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.5), c(-0.25), c(0.75)]));
        assert!((min_hermitian_eigenvalue(&d) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_cutoff_is_rejected() {
        assert!(FockSpace::new(2, 0, 2).is_err());
    }

    #[test]
    fn lowering_one_photon_gives_vacuum() {
        let s = FockSpace::new(3, 2, 2).unwrap();
        let a = mode_operator(&s, Mode::Cavity, OpKind::Lower);
        let out = a.apply(&s.basis_state([1, 0, 0]).unwrap());
        let vac = s.basis_state([0, 0, 0]).unwrap();
        for (x, y) in out.iter().zip(&vac) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn number_operator_on_fock_state() {
        let s = FockSpace::new(4, 2, 3).unwrap();
        let n = mode_operator(&s, Mode::Cavity, OpKind::Number);
        assert_eq!(n.expectation(&s.basis_state([2, 0, 0]).unwrap()), c(2.0));
        let nb = mode_operator(&s, Mode::Phonon, OpKind::Number);
        assert_eq!(nb.expectation(&s.basis_state([2, 1, 2]).unwrap()), c(2.0));
    }

    #[test]
    fn single_mode_matrix_elements() {
        let s = FockSpace::new(6, 1, 1).unwrap();
        let a = mode_operator(&s, Mode::Cavity, OpKind::Lower);
        for r in 0..6 {
            for col in 0..6 {
                let expected = if col == r + 1 { (col as f64).sqrt() } else { 0.0 };
                assert_eq!(a.get(r, col), c(expected));
            }
        }
    }

    #[test]
    fn canonical_commutator_below_truncation() {
        let s = FockSpace::new(6, 1, 1).unwrap();
        let a = mode_operator(&s, Mode::Cavity, OpKind::Lower);
        let ad = mode_operator(&s, Mode::Cavity, OpKind::Raise);
        let comm = a.commutator(&ad).to_dense();
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i == j && i < 5 { 1.0 } else if i == j { -5.0 } else { 0.0 };
                assert!((comm[(i, j)] - c(expected)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn distinct_modes_commute_exactly() {
        let s = FockSpace::new(3, 3, 4).unwrap();
        let kinds = [OpKind::Lower, OpKind::Raise, OpKind::Number];
        for (i, &m1) in Mode::ALL.iter().enumerate() {
            for &m2 in &Mode::ALL[i + 1..] {
                for &k1 in &kinds {
                    for &k2 in &kinds {
                        let x = mode_operator(&s, m1, k1);
                        let y = mode_operator(&s, m2, k2);
                        assert_eq!(x.matmul(&y), y.matmul(&x));
                    }
                }
            }
        }
    }

    #[test]
    fn raise_is_adjoint_of_lower() {
        let s = FockSpace::new(3, 4, 2).unwrap();
        for m in Mode::ALL {
            let a = mode_operator(&s, m, OpKind::Lower);
            let ad = mode_operator(&s, m, OpKind::Raise);
            assert_eq!(a.adjoint(), ad);
            let n = mode_operator(&s, m, OpKind::Number);
            assert!(ad.matmul(&a).sub(&n).max_abs() < 1e-14);
        }
    }

    #[test]
    fn product_state_reduces_to_factor() {
        let s = FockSpace::new(4, 2, 3).unwrap();
        let a = [c(0.6), C64::new(0.0, 0.48), c(0.64), c(0.0)];
        let psi = s.product_state(&a, &[c(1.0), c(0.0)], &[c(1.0), c(0.0), c(0.0)]).unwrap();
        let rho = partial_trace_pure(&psi, &s, Mode::Cavity);
        for i in 0..4 {
            for j in 0..4 {
                assert!((rho[(i, j)] - a[i] * a[j].conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn bell_state_reduces_to_mixture() {
        let s = FockSpace::new(2, 2, 1).unwrap();
        let mut psi = vec![c(0.0); 4];
        psi[s.index([0, 0, 0])] = c(std::f64::consts::FRAC_1_SQRT_2);
        psi[s.index([1, 1, 0])] = c(std::f64::consts::FRAC_1_SQRT_2);
        let rho = partial_trace(&QuantumState::Pure(psi.clone()), &s, Mode::Cavity);
        assert!((rho[(0, 0)] - c(0.5)).norm() < 1e-15);
        assert!((rho[(1, 1)] - c(0.5)).norm() < 1e-15);
        assert!(rho[(0, 1)].norm() < 1e-15);
        let from_density = partial_trace(&QuantumState::Density(DensityMatrix::from_pure(&psi)), &s, Mode::Cavity);
        assert!((rho - from_density).norm() < 1e-15);
    }

    fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
        let g = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let rho = &g * g.adjoint();
        let tr = rho.trace();
        let rho = rho / tr;
        let data: Vec<C64> = (0..dim * dim).map(|k| rho[(k / dim, k % dim)]).collect();
        DensityMatrix::from_row_major(dim, data).unwrap()
    }

    #[test]
    fn random_partial_traces_have_unit_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = FockSpace::new(3, 2, 4).unwrap();
        for _ in 0..50 {
            let rho = random_density(&mut rng, s.dim());
            QuantumState::Density(rho.clone()).validate(1e-9).unwrap();
            for m in Mode::ALL {
                let r = partial_trace_density(&rho, &s, m);
                assert!((r.trace() - c(1.0)).norm() < 1e-9);
                assert!((&r - r.adjoint()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn occupations_of_fock_state() {
        let s = FockSpace::new(2, 2, 2).unwrap();
        let st = QuantumState::Pure(s.basis_state([1, 0, 0]).unwrap());
        assert_eq!(occupations(&st, &s), [1.0, 0.0, 0.0]);
        let d = QuantumState::Density(st.to_density());
        assert_eq!(occupations(&d, &s), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn thermal_phonon_occupation_at_cutoff_thirty() {
        let s = FockSpace::new(1, 1, 30).unwrap();
        let nbar: f64 = 1.62;
        let q = nbar / (1.0 + nbar);
        let mut data = vec![c(0.0); 900];
        for n in 0..30 {
            data[n * 30 + n] = c((1.0 - q) * q.powi(n as i32));
        }
        let rho = DensityMatrix::from_row_major(30, data).unwrap();
        let n = occupations(&QuantumState::Density(rho), &s);
        assert_eq!(n[0], 0.0);
        assert_eq!(n[1], 0.0);
        assert!((n[2] - nbar).abs() < 1e-3, "{}", n[2]);
    }

    #[test]
    fn symmetrize_makes_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dim = 5;
        let data: Vec<C64> = (0..25).map(|_| C64::new(rng.random(), rng.random())).collect();
        let mut r = DensityMatrix::from_row_major(dim, data).unwrap();
        r.symmetrize();
        for i in 0..dim {
            for j in 0..dim {
                assert_eq!(r.get(i, j), r.get(j, i).conj());
            }
        }
    }

    #[test]
    fn invalid_states_are_reported() {
        let bad = QuantumState::Pure(vec![c(1.0), c(1.0)]);
        assert!(bad.validate(1e-9).is_err());
        let neg = DensityMatrix::from_row_major(2, vec![c(1.5), c(0.0), c(0.0), c(-0.5)]).unwrap();
        assert!(QuantumState::Density(neg).validate(1e-9).is_err());
    }

    #[test]
    fn top_level_population_tracks_truncation() {
        let s = FockSpace::new(3, 2, 2).unwrap();
        let st = QuantumState::Pure(s.basis_state([2, 0, 1]).unwrap());
        assert_eq!(top_level_populations(&st, &s), [1.0, 0.0, 1.0]);
    }
}

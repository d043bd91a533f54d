//! Dense density matrices and local observables.
//!
//! Basis states are labelled by bit strings with qubit 0 as the most significant bit,
//! so `|b_0 b_1 ... b_{n-1}>` has index `sum_i b_i 2^(n-1-i)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Largest register held densely.
pub const MAX_QUBITS: usize = 12;

const TERM_HERMITIAN_TOL: f64 = 1e-12;
const IMAG_ERROR: f64 = 1e-8;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn sigma_y() -> CMatrix {
    let i = Complex64::i();
    CMatrix::from_row_slice(2, 2, &[c(0.0), -i, i, c(0.0)])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(invalid(format!(
            "matrix dimension {dim} is not a power of two"
        )));
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(invalid(format!(
            "{n} qubits exceed the dense limit of {MAX_QUBITS}"
        )));
    }
    Ok(n)
}

/// Eigenvalues of the Hermitian part of `a`, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let h = (a + a.adjoint()) * c(0.5);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// `max_ij |a_ij - conj(a_ji)|`.
pub fn hermiticity_residual(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationTolerance {
    pub hermitian: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl Default for ValidationTolerance {
    fn default() -> Self {
        ValidationTolerance {
            hermitian: 1e-12,
            trace: 1e-10,
            min_eigenvalue: 1e-10,
        }
    }
}

impl ValidationTolerance {
    /// The same tolerance for all three checks.
    pub fn uniform(tol: f64) -> Self {
        ValidationTolerance {
            hermitian: tol,
            trace: tol,
            min_eigenvalue: tol,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ValidationReport {
    pub hermitian_residual: f64,
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
    pub hermitian_ok: bool,
    pub trace_ok: bool,
    pub psd_ok: bool,
    pub passed: bool,
}

/// Checks Hermiticity, unit trace and positivity of any square matrix.
pub fn validate(rho: &CMatrix, tol: &ValidationTolerance) -> ValidationReport {
    let hermitian_residual = hermiticity_residual(rho);
    let trace_deviation = (rho.trace() - c(1.0)).norm();
    let min_eigenvalue = if rho.nrows() == 0 {
        f64::NAN
    } else {
        hermitian_eigenvalues(rho)[0]
    };
    let hermitian_ok = hermitian_residual <= tol.hermitian;
    let trace_ok = trace_deviation <= tol.trace;
    let psd_ok = min_eigenvalue >= -tol.min_eigenvalue;
    ValidationReport {
        hermitian_residual,
        trace_deviation,
        min_eigenvalue,
        hermitian_ok,
        trace_ok,
        psd_ok,
        passed: hermitian_ok && trace_ok && psd_ok,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: CMatrix,
}

impl DensityMatrix {
    /// Wraps `data` after checking it against the default tolerances.
    pub fn new(data: CMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(data)?;
        let report = validate(&rho.data, &ValidationTolerance::default());
        if !report.passed {
            return Err(invalid(format!(
                "not a density matrix: hermitian residual {:e}, trace deviation {:e}, min eigenvalue {:e}",
                report.hermitian_residual, report.trace_deviation, report.min_eigenvalue
            )));
        }
        Ok(rho)
    }

    /// Only the shape is checked.
    pub fn from_matrix_unchecked(data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(invalid(format!(
                "matrix is {}x{}, not square",
                data.nrows(),
                data.ncols()
            )));
        }
        let n_qubits = qubits_for_dim(data.nrows())?;
        Ok(DensityMatrix { n_qubits, data })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(invalid(format!(
                "{n_qubits} qubits exceed the dense limit of {MAX_QUBITS}"
            )));
        }
        let dim = 1usize << n_qubits;
        Ok(DensityMatrix {
            n_qubits,
            data: CMatrix::identity(dim, dim) * c(1.0 / dim as f64),
        })
    }

    /// Projector onto `psi / |psi|`.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(invalid("state vector has zero or non-finite norm"));
        }
        let v = psi / c(norm);
        Self::from_matrix_unchecked(&v * v.adjoint())
    }

    /// Computational basis state `|index>`.
    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(invalid(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut data = CMatrix::zeros(dim, dim);
        data[(index, index)] = c(1.0);
        Self::from_matrix_unchecked(data)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn validate(&self, tol: &ValidationTolerance) -> ValidationReport {
        validate(&self.data, tol)
    }

    /// `self ⊗ other`, with `self` on the leading qubits.
    pub fn kron(&self, other: &DensityMatrix) -> Result<Self> {
        Self::from_matrix_unchecked(self.data.kronecker(&other.data))
    }
}

impl AsRef<CMatrix> for DensityMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.data
    }
}

/// A Hermitian operator acting on a few qubits.
#[derive(Clone, Debug)]
pub struct LocalTerm {
    support: Vec<usize>,
    matrix: CMatrix,
    bound: f64,
}

impl LocalTerm {
    pub fn new(support: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        let k = support.len();
        if k == 0 || k > MAX_QUBITS {
            return Err(invalid(format!("support size {k} out of range")));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != k {
            return Err(invalid("support has repeated qubits"));
        }
        let dim = 1usize << k;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: matrix.nrows(),
            });
        }
        let residual = hermiticity_residual(&matrix);
        if residual > TERM_HERMITIAN_TOL {
            return Err(invalid(format!(
                "local term is not Hermitian (residual {residual:e})"
            )));
        }
        let ev = hermitian_eigenvalues(&matrix);
        let bound = ev[0].abs().max(ev[ev.len() - 1].abs());
        Ok(LocalTerm {
            support,
            matrix,
            bound,
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Operator norm of the local matrix.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Full `2^n` matrix with identities on the remaining qubits.
    pub fn embed(&self, n_qubits: usize) -> Result<CMatrix> {
        self.check_fits(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut full = CMatrix::zeros(dim, dim);
        self.for_each_entry(n_qubits, |i, j, v| full[(i, j)] += v);
        Ok(full)
    }

    fn check_fits(&self, n_qubits: usize) -> Result<()> {
        if n_qubits > MAX_QUBITS {
            return Err(invalid(format!(
                "{n_qubits} qubits exceed the dense limit of {MAX_QUBITS}"
            )));
        }
        match self.support.iter().find(|&&q| q >= n_qubits) {
            Some(q) => Err(invalid(format!(
                "qubit {q} outside a {n_qubits}-qubit register"
            ))),
            None => Ok(()),
        }
    }

    /// Visits the nonzero pattern `(row, col, value)` of the embedded operator.
    fn for_each_entry<F: FnMut(usize, usize, Complex64)>(&self, n_qubits: usize, mut f: F) {
        let k = self.support.len();
        let masks: Vec<usize> = self
            .support
            .iter()
            .map(|&q| 1usize << (n_qubits - 1 - q))
            .collect();
        let support_mask: usize = masks.iter().sum();
        let local_index = |i: usize| {
            masks
                .iter()
                .fold(0usize, |acc, &m| (acc << 1) | usize::from(i & m != 0))
        };
        let spread = |l: usize| {
            masks.iter().enumerate().fold(0usize, |acc, (t, &m)| {
                if l >> (k - 1 - t) & 1 == 1 {
                    acc | m
                } else {
                    acc
                }
            })
        };
        let spread_cols: Vec<usize> = (0..1usize << k).map(spread).collect();
        for i in 0..1usize << n_qubits {
            let li = local_index(i);
            let rest = i & !support_mask;
            for (lc, &bits) in spread_cols.iter().enumerate() {
                let v = self.matrix[(li, lc)];
                if v != Complex64::new(0.0, 0.0) {
                    f(i, rest | bits, v);
                }
            }
        }
    }

    /// `Tr(O a)` for any `2^n` matrix `a`.
    pub fn trace_product(&self, a: &CMatrix) -> Result<Complex64> {
        let n = qubits_for_dim(a.nrows())?;
        self.check_fits(n)?;
        let mut acc = Complex64::new(0.0, 0.0);
        self.for_each_entry(n, |i, j, v| acc += v * a[(j, i)]);
        Ok(acc)
    }
}

/// A sum of local terms on an `n`-qubit register.
#[derive(Clone, Debug)]
pub struct Observable {
    n_qubits: usize,
    terms: Vec<LocalTerm>,
}

impl Observable {
    pub fn new(n_qubits: usize, terms: Vec<LocalTerm>) -> Result<Self> {
        for t in &terms {
            t.check_fits(n_qubits)?;
        }
        Ok(Observable { n_qubits, terms })
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        let term = LocalTerm::new(vec![0], CMatrix::identity(2, 2))?;
        Self::new(n_qubits, vec![term])
    }

    /// A single-qubit operator on qubit `q`.
    pub fn single(n_qubits: usize, q: usize, matrix: CMatrix) -> Result<Self> {
        Self::new(n_qubits, vec![LocalTerm::new(vec![q], matrix)?])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    /// Number of local terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest operator norm among the terms.
    pub fn max_bound(&self) -> f64 {
        self.terms.iter().map(LocalTerm::bound).fold(0.0, f64::max)
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let dim = 1usize << self.n_qubits;
        let mut full = CMatrix::zeros(dim, dim);
        for t in &self.terms {
            t.check_fits(self.n_qubits)?;
            t.for_each_entry(self.n_qubits, |i, j, v| full[(i, j)] += v);
        }
        Ok(full)
    }

    /// `Tr(O a)` for any square matrix of matching size.
    pub fn trace_product(&self, a: &CMatrix) -> Result<Complex64> {
        let dim = 1usize << self.n_qubits;
        if a.nrows() != dim || a.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: a.nrows(),
            });
        }
        self.terms
            .iter()
            .try_fold(Complex64::new(0.0, 0.0), |acc, t| {
                Ok(acc + t.trace_product(a)?)
            })
    }
}

/// `sum_i Tr(O_i rho)`; the imaginary part must be negligible.
pub fn expectation(obs: &Observable, rho: &DensityMatrix) -> Result<f64> {
    expectation_of(obs, rho.matrix())
}

/// [`expectation`] for a matrix that need not have unit trace, such as an unnormalized
/// kernel prediction.
pub fn expectation_of(obs: &Observable, a: &CMatrix) -> Result<f64> {
    let v = obs.trace_product(a)?;
    if v.im.abs() > IMAG_ERROR {
        return Err(Error::NonHermitian(v.im));
    }
    Ok(v.re)
}

/// `max_ij |a_ij - b_ij|`.
pub fn linf_entry_norm(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: b.nrows(),
        });
    }
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

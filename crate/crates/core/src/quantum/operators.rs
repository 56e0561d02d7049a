use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub(crate) const HERMITIAN_TOL: f64 = 1e-12;
pub(crate) const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue below which a state counts as singular for `log`.
pub const RANK_THRESHOLD: f64 = 1e-12;

pub(crate) fn c(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

pub(crate) fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut s = c(0.0);
    for i in 0..n {
        for k in 0..n {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

fn hermitian_deviation(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!("operator must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidArgument("operator has non-finite entries".into()));
    }
    Ok(())
}

/// Real spectrum and eigenvectors of a Hermitian matrix.
#[derive(Debug, Clone)]
pub(crate) struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn of(m: &CMatrix) -> Self {
        let h = (m + m.adjoint()) * c(0.5);
        let e = h.symmetric_eigen();
        Self { values: e.eigenvalues, vectors: e.eigenvectors }
    }

    /// `V f(Λ) V†`.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= fj);
        }
        scaled * self.vectors.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }
}

/// Hermitian energy operator together with the action unit ħ.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianOperator {
    matrix: CMatrix,
    hbar: f64,
}

impl HamiltonianOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL * matrix.iter().map(|z| z.norm()).fold(1.0, f64::max) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { matrix, hbar: 1.0 })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(&DVector::from_iterator(diag.len(), diag.iter().map(|&d| c(d)))))
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::new(CMatrix::zeros(n, n))
    }

    pub fn with_hbar(mut self, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        self.hbar = hbar;
        Ok(self)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `H + ΔH`, keeping the ħ of `self`.
    pub fn plus(&self, other: &HamiltonianOperator) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::InvalidArgument("hamiltonian dimensions differ".into()));
        }
        Ok(Self { matrix: &self.matrix + &other.matrix, hbar: self.hbar })
    }

    pub(crate) fn spectrum(&self) -> Spectrum {
        Spectrum::of(&self.matrix)
    }
}

/// Positive semidefinite unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates the matrix; eigenvalues in `[−1e-12, 0)` are clamped to zero.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        check_square(&matrix)?;
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let spec = Spectrum::of(&matrix);
        let min = spec.min();
        if min < -HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        let matrix = if min < 0.0 { spec.apply(|l| c(l.max(0.0))) } else { (&matrix + matrix.adjoint()) * c(0.5) };
        Ok(Self { matrix })
    }

    /// `diag(p)` for a probability vector.
    pub fn diagonal(p: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_diagonal(&DVector::from_iterator(p.len(), p.iter().map(|&v| c(v)))))
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0 / n as f64; n])
    }

    /// `|ψ⟩⟨ψ|` of a normalized copy of `psi`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = v / c(norm);
        Self::new(&v * v.adjoint())
    }

    /// Qubit state `(I + r·σ)/2`.
    pub fn bloch(r: [f64; 3]) -> Result<Self> {
        let [x, y, z] = r;
        Self::new(CMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.5 * (1.0 + z)),
                Complex::new(0.5 * x, -0.5 * y),
                Complex::new(0.5 * x, 0.5 * y),
                c(0.5 * (1.0 - z)),
            ],
        ))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Spectrum::of(&self.matrix).values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.matrix, &self.matrix).re
    }

    /// `−tr ρ log ρ` with `0 log 0 = 0`.
    pub fn von_neumann_entropy(&self) -> f64 {
        -Spectrum::of(&self.matrix).values.iter().map(|&p| if p > 0.0 { p * p.ln() } else { 0.0 }).sum::<f64>()
    }

    /// Bloch vector `tr(ρσ_k)` of a qubit state.
    pub fn bloch_vector(&self) -> Option<[f64; 3]> {
        (self.dim() == 2).then(|| {
            let m = &self.matrix;
            [2.0 * m[(1, 0)].re, 2.0 * m[(1, 0)].im, (m[(0, 0)] - m[(1, 1)]).re]
        })
    }

    /// `log ρ`, requiring every eigenvalue above [`RANK_THRESHOLD`].
    pub fn log(&self) -> Result<CMatrix> {
        let spec = Spectrum::of(&self.matrix);
        let min = spec.min();
        if min <= RANK_THRESHOLD {
            return Err(Error::SingularState(min));
        }
        Ok(spec.apply(|l| c(l.ln())))
    }

    pub fn distance(&self, other: &DensityOperator) -> f64 {
        (&self.matrix - &other.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        Self { matrix }
    }
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), Complex::new(0.0, -1.0), Complex::new(0.0, 1.0), c(0.0)])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

//! Dense complex Hermitian matrix substrate: eigendecompositions, spectral
//! functions, operator norms and projector algebra. Everything downstream
//! (blocks, snapshots, resolvents, propagators) is built on these primitives.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Tolerances used throughout the crate. All defaults follow the
/// absolute-relative hybrid convention: thresholds scale with the operator
/// norm of the matrix at hand where that makes sense.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Tolerances {
    /// Hermiticity check, relative to the largest entry magnitude.
    pub herm_rel: f64,
    /// Eigen-residual checks.
    pub eig: f64,
    /// Eigenvalue clustering, relative to (norm + 1).
    pub cluster_rel: f64,
    /// Unitarity drift before re-unitarization.
    pub unit: f64,
    /// Operator-identity residuals, relative to scale.
    pub id_rel: f64,
    /// Inequality margins, relative to (norm + 1).
    pub ineq_rel: f64,
    /// Block-structure violations, relative to norm.
    pub block_rel: f64,
    /// Ground-state support cutoff in the Cheeger ratio.
    pub supp: f64,
    /// Allowed imaginary part of the Cheeger numerator.
    pub h_imag: f64,
    /// Target local error per integrator step.
    pub step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm_rel: 1e-12,
            eig: 1e-9,
            cluster_rel: 1e-9,
            unit: 1e-10,
            id_rel: 1e-9,
            ineq_rel: 1e-9,
            block_rel: 1e-12,
            supp: 1e-12,
            h_imag: 1e-10,
            step: 1e-8,
        }
    }
}

impl Tolerances {
    /// Cluster width for a matrix of the given norm.
    pub fn cluster(&self, norm: f64) -> f64 {
        self.cluster_rel * (norm + 1.0)
    }

    /// Inequality-margin tolerance for a matrix of the given norm.
    pub fn ineq(&self, norm: f64) -> f64 {
        self.ineq_rel * (norm + 1.0)
    }
}

/// A validated Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: CMatrix,
}

impl HermitianMatrix {
    /// Validate and wrap. Rejects inputs whose asymmetry exceeds
    /// `herm_rel * max|entry|`; accepted inputs are symmetrized exactly so
    /// later algebra sees `A = A†` to machine precision.
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::with_tol(mat, Tolerances::default().herm_rel)
    }

    pub fn with_tol(mat: CMatrix, herm_rel: f64) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimMismatch(format!(
                "{}x{} matrix is not square",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let max_entry = mat.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        let tol = herm_rel * max_entry.max(1.0);
        let mut max_asym = 0.0_f64;
        for i in 0..mat.nrows() {
            for j in i..mat.ncols() {
                let asym = (mat[(i, j)] - mat[(j, i)].conj()).norm();
                max_asym = max_asym.max(asym);
            }
        }
        if max_asym > tol {
            return Err(Error::NotHermitian {
                max_asymmetry: max_asym,
                tol,
            });
        }
        let herm = (&mat + mat.adjoint()).scale(0.5);
        Ok(HermitianMatrix { mat: herm })
    }

    /// Symmetrize without a tolerance check, for matrices that are Hermitian
    /// by construction (sums/sandwiches of validated inputs).
    pub fn from_hermitian_parts(mat: CMatrix) -> Self {
        let herm = (&mat + mat.adjoint()).scale(0.5);
        HermitianMatrix { mat: herm }
    }

    pub fn from_real(entries: &[&[f64]]) -> Result<Self> {
        let n = entries.len();
        let mat = CMatrix::from_fn(n, n, |i, j| C64::new(entries[i][j], 0.0));
        Self::new(mat)
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix {
            mat: CMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix {
            mat: CMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Spectral norm (largest |eigenvalue|).
    pub fn norm(&self) -> f64 {
        self.eigh()
            .values
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    /// Full ascending eigendecomposition.
    pub fn eigh(&self) -> EigenSystem {
        eigh_unchecked(&self.mat)
    }
}

impl std::ops::Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl std::ops::Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix {
            mat: &self.mat - &rhs.mat,
        }
    }
}

/// Ascending eigensystem of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// Eigenvalues, sorted ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl EigenSystem {
    /// Orthogonal projector onto the span of eigenvectors `indices`.
    pub fn projector(&self, indices: &[usize]) -> Projector {
        let n = self.vectors.nrows();
        let mut mat = CMatrix::zeros(n, n);
        for &j in indices {
            let v = self.vectors.column(j);
            mat += v * v.adjoint();
        }
        Projector {
            matrix: HermitianMatrix::from_hermitian_parts(mat),
            rank: indices.len(),
        }
    }

    /// Indices of the lowest eigenvalue cluster: all `j` with
    /// `values[j] - values[0] <= width`.
    pub fn ground_cluster(&self, width: f64) -> Vec<usize> {
        let lo = self.values[0];
        (0..self.values.len())
            .filter(|&j| self.values[j] - lo <= width)
            .collect()
    }
}

/// Orthogonal projector with tracked rank.
#[derive(Debug, Clone)]
pub struct Projector {
    pub matrix: HermitianMatrix,
    pub rank: usize,
}

impl Projector {
    pub fn zero(dim: usize) -> Self {
        Projector {
            matrix: HermitianMatrix::zeros(dim),
            rank: 0,
        }
    }

    /// Diagonal 0/1 projector onto a coordinate index set.
    pub fn coordinate(dim: usize, indices: &[usize]) -> Self {
        let mut mat = CMatrix::zeros(dim, dim);
        for &i in indices {
            mat[(i, i)] = C64::new(1.0, 0.0);
        }
        Projector {
            matrix: HermitianMatrix { mat },
            rank: indices.len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        self.matrix.matrix()
    }

    /// `I - P`.
    pub fn complement(&self) -> Projector {
        let n = self.dim();
        Projector {
            matrix: HermitianMatrix {
                mat: CMatrix::identity(n, n) - self.as_matrix(),
            },
            rank: n - self.rank,
        }
    }

    /// Max of `|P^2 - P|` and `|tr P - rank|` residuals.
    pub fn idempotency_residual(&self) -> f64 {
        let p = self.as_matrix();
        let res = p * p - p;
        let alg = op_norm(&res);
        let tr = (p.trace().re - self.rank as f64).abs();
        alg.max(tr)
    }
}

/// Eigendecomposition without a hermiticity gate, for internal use on
/// matrices that are Hermitian by construction.
pub fn eigh_unchecked(mat: &CMatrix) -> EigenSystem {
    let herm = (mat + mat.adjoint()).scale(0.5);
    let se = herm.symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&j| se.eigenvalues[j]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &j) in order.iter().enumerate() {
        vectors.set_column(k, &se.eigenvectors.column(j));
    }
    EigenSystem { values, vectors }
}

/// Full ascending eigendecomposition of a Hermitian matrix, with the
/// hermiticity precondition checked.
pub fn eigh(mat: &CMatrix) -> Result<EigenSystem> {
    let h = HermitianMatrix::new(mat.clone())?;
    Ok(h.eigh())
}

/// Spectral norm (largest singular value) of an arbitrary matrix, computed as
/// the square root of the top eigenvalue of `A† A`.
pub fn op_norm(mat: &CMatrix) -> f64 {
    if mat.iter().all(|z| z.norm() == 0.0) {
        return 0.0;
    }
    let gram = mat.adjoint() * mat;
    let es = eigh_unchecked(&gram);
    es.values.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Positive-semidefinite square root. Eigenvalues in `[-tol, 0)` are clipped
/// to zero; anything lower is rejected.
pub fn psd_sqrt(a: &HermitianMatrix, tol: f64) -> Result<HermitianMatrix> {
    let es = a.eigh();
    let min = es.values.first().copied().unwrap_or(0.0);
    if min < -tol {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let n = a.dim();
    let mut mat = CMatrix::zeros(n, n);
    for (j, &v) in es.values.iter().enumerate() {
        let root = v.max(0.0).sqrt();
        let col = es.vectors.column(j);
        mat += (col * col.adjoint()).scale(root);
    }
    Ok(HermitianMatrix::from_hermitian_parts(mat))
}

/// `exp(-i tau G)` for Hermitian `G`, via eigendecomposition. Exact up to
/// the eigensolver, hence unitary to the same precision.
pub fn unitary_exp(g: &HermitianMatrix, tau: f64) -> CMatrix {
    let es = g.eigh();
    let n = g.dim();
    let mut mat = CMatrix::zeros(n, n);
    for (j, &v) in es.values.iter().enumerate() {
        let phase = C64::from_polar(1.0, -tau * v);
        let col = es.vectors.column(j);
        mat += (col * col.adjoint()).scale_complex(phase);
    }
    mat
}

/// `|U† U - I|`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    op_norm(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

/// Project a drifting near-unitary back onto the unitary group (polar
/// factor via the Hermitian inverse square root of `U† U`).
pub fn reunitarize(u: &CMatrix) -> CMatrix {
    let gram = HermitianMatrix::from_hermitian_parts(u.adjoint() * u);
    let es = gram.eigh();
    let n = u.nrows();
    let mut inv_sqrt = CMatrix::zeros(n, n);
    for (j, &v) in es.values.iter().enumerate() {
        let w = 1.0 / v.max(f64::MIN_POSITIVE).sqrt();
        let col = es.vectors.column(j);
        inv_sqrt += (col * col.adjoint()).scale(w);
    }
    u * inv_sqrt
}

/// `[A, B]`.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

trait ScaleComplex {
    fn scale_complex(self, z: C64) -> Self;
}

impl ScaleComplex for CMatrix {
    fn scale_complex(mut self, z: C64) -> Self {
        for e in self.iter_mut() {
            *e *= z;
        }
        self
    }
}

// --- JSON wire format -------------------------------------------------------
//
// {"dim": N, "entries": [[[re, im], ...], ...]} row-major. Readers reject
// non-Hermitian input.

#[derive(Serialize, Deserialize)]
struct MatrixWire {
    dim: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

impl Serialize for HermitianMatrix {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let entries = (0..n)
            .map(|i| (0..n).map(|j| [self.mat[(i, j)].re, self.mat[(i, j)].im]).collect())
            .collect();
        MatrixWire { dim: n, entries }.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let wire = MatrixWire::deserialize(de)?;
        if wire.entries.len() != wire.dim || wire.entries.iter().any(|r| r.len() != wire.dim) {
            return Err(D::Error::custom(format!(
                "matrix entries do not form a {0}x{0} grid",
                wire.dim
            )));
        }
        let mat = CMatrix::from_fn(wire.dim, wire.dim, |i, j| {
            C64::new(wire.entries[i][j][0], wire.entries[i][j][1])
        });
        HermitianMatrix::new(mat).map_err(|e| D::Error::custom(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn herm(entries: &[&[f64]]) -> HermitianMatrix {
        HermitianMatrix::from_real(entries).unwrap()
    }

    #[test]
    fn eigh_diagonal() {
        let a = herm(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let es = a.eigh();
        assert!((es.values[0] - 0.0).abs() < 1e-14);
        assert!((es.values[1] - 1.0).abs() < 1e-14);
        // lowest eigenvector is e1
        assert!((es.vectors[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_2x2_closed_form() {
        // [[0,-0.1],[-0.1,1]] -> (1 -/+ sqrt(1.04))/2
        let a = herm(&[&[0.0, -0.1], &[-0.1, 1.0]]);
        let es = a.eigh();
        let lo = (1.0 - 1.04_f64.sqrt()) / 2.0;
        let hi = (1.0 + 1.04_f64.sqrt()) / 2.0;
        assert!((es.values[0] - lo).abs() < 1e-12);
        assert!((es.values[1] - hi).abs() < 1e-12);
    }

    #[test]
    fn eigh_identity_degenerate() {
        let a = HermitianMatrix::identity(4);
        let es = a.eigh();
        for v in &es.values {
            assert!((v - 1.0).abs() < 1e-13);
        }
        let gram = es.vectors.adjoint() * &es.vectors;
        assert!(op_norm(&(gram - CMatrix::identity(4, 4))) < 1e-12);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let mat = CMatrix::from_fn(2, 2, |i, j| C64::new((i + 2 * j) as f64, 0.0));
        match eigh(&mat) {
            Err(Error::NotHermitian { max_asymmetry, .. }) => {
                assert!((max_asymmetry - 1.0).abs() < 1e-14)
            }
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn op_norm_examples() {
        let a = herm(&[&[3.0, 0.0], &[0.0, -5.0]]);
        assert!((op_norm(a.matrix()) - 5.0).abs() < 1e-12);
        let b = herm(&[&[0.0, -0.1], &[-0.1, 1.0]]);
        let hi = (1.0 + 1.04_f64.sqrt()) / 2.0;
        assert!((op_norm(b.matrix()) - hi).abs() < 1e-10);
    }

    #[test]
    fn projector_norm_is_one() {
        let p = Projector::coordinate(3, &[1]);
        assert!((op_norm(p.as_matrix()) - 1.0).abs() < 1e-12);
        assert!(p.idempotency_residual() < 1e-13);
    }

    #[test]
    fn psd_sqrt_examples() {
        let a = herm(&[&[4.0, 0.0], &[0.0, 9.0]]);
        let r = psd_sqrt(&a, 1e-9).unwrap();
        assert!((r.matrix()[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((r.matrix()[(1, 1)].re - 3.0).abs() < 1e-12);

        let z = HermitianMatrix::zeros(3);
        let rz = psd_sqrt(&z, 1e-9).unwrap();
        assert!(op_norm(rz.matrix()) < 1e-14);

        // scaled rank-1 projector: sqrt(2 P) = sqrt(2) P
        let v = CMatrix::from_fn(2, 2, |_, _| C64::new(0.5, 0.0));
        let p2 = HermitianMatrix::new(v.scale(2.0)).unwrap();
        let rp = psd_sqrt(&p2, 1e-9).unwrap();
        let expect = v.scale(2.0_f64.sqrt());
        assert!(op_norm(&(rp.matrix() - expect)) < 1e-12);

        let neg = herm(&[&[-1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(psd_sqrt(&neg, 1e-9), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn unitary_exp_diagonal_phase() {
        let g = herm(&[&[0.0, 0.0], &[0.0, 1.0]]);
        let u = unitary_exp(&g, std::f64::consts::PI);
        assert!((u[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((u[(1, 1)] - C64::new(-1.0, 0.0)).norm() < 1e-12);

        let z = HermitianMatrix::zeros(3);
        let uz = unitary_exp(&z, 7.3);
        assert!(op_norm(&(uz - CMatrix::identity(3, 3))) < 1e-13);
    }

    #[test]
    fn unitary_exp_matches_series_oracle() {
        // Pauli-X at tau = pi/2 against direct Taylor summation.
        let g = herm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let tau = std::f64::consts::FRAC_PI_2;
        let u = unitary_exp(&g, tau);

        let mut series = CMatrix::identity(2, 2);
        let mut term = CMatrix::identity(2, 2);
        for k in 1..60 {
            term = (&term * g.matrix()).scale(tau / k as f64);
            for e in term.iter_mut() {
                *e *= C64::new(0.0, -1.0);
            }
            series += &term;
        }
        assert!(op_norm(&(u - series)) < 1e-12);
        // cos/sin closed form: exp(-i tau X) = cos(tau) I - i sin(tau) X
        let es = herm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let u2 = unitary_exp(&es, tau);
        assert!((u2[(0, 1)] - C64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn json_round_trip_and_rejection() {
        let a = HermitianMatrix::new(CMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                C64::new(i as f64, 0.0)
            } else if i < j {
                C64::new(0.25, -0.5)
            } else {
                C64::new(0.25, 0.5)
            }
        }))
        .unwrap();
        let s = serde_json::to_string(&a).unwrap();
        let back: HermitianMatrix = serde_json::from_str(&s).unwrap();
        assert!(op_norm(&(a.matrix() - back.matrix())) < 1e-15);

        let bad = r#"{"dim":2,"entries":[[[0,0],[1,0]],[[2,0],[0,0]]]}"#;
        assert!(serde_json::from_str::<HermitianMatrix>(bad).is_err());
    }

    #[test]
    fn reunitarize_restores_unitarity() {
        let g = herm(&[&[0.3, 0.1], &[0.1, -0.2]]);
        let mut u = unitary_exp(&g, 1.7);
        u.scale_mut(1.0 + 1e-6);
        assert!(unitarity_defect(&u) > 1e-7);
        let fixed = reunitarize(&u);
        assert!(unitarity_defect(&fixed) < 1e-12);
    }
}

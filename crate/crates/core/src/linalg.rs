//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Composite systems are always ordered clock first, kinematic second.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::constants::HBAR;
use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

const HERMITIAN_RTOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-10;

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// `|0><1| + |1><0|`
pub fn pauli_x() -> ComplexMatrix {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    ComplexMatrix::from_row_slice(2, 2, &[o, l, l, o])
}

/// `-i|0><1| + i|1><0|`
pub fn pauli_y() -> ComplexMatrix {
    let o = C64::new(0.0, 0.0);
    let i = C64::new(0.0, 1.0);
    ComplexMatrix::from_row_slice(2, 2, &[o, -i, i, o])
}

/// `|1><1| - |0><0|`, so that the ground state |0> has eigenvalue -1.
pub fn pauli_z() -> ComplexMatrix {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    ComplexMatrix::from_row_slice(2, 2, &[-l, o, o, l])
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn ket_bra(ket: &ComplexVector, bra: &ComplexVector) -> ComplexMatrix {
    ket * bra.adjoint()
}

pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry of `A - A^dagger`.
pub fn hermiticity_defect(a: &ComplexMatrix) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(a: &ComplexMatrix) -> bool {
    a.is_square() && hermiticity_defect(a) <= HERMITIAN_RTOL * max_abs(a)
}

fn check_hermitian(a: &ComplexMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if !is_hermitian(a) {
        return Err(Error::NotHermitian {
            deviation: hermiticity_defect(a),
        });
    }
    Ok(())
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        check_hermitian(&matrix)?;
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace {tr} differs from 1"
            )));
        }
        let rho = DensityMatrix(matrix);
        let lowest = rho.min_eigenvalue();
        if lowest < -POSITIVITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {lowest:e}"
            )));
        }
        Ok(rho)
    }

    /// `|psi><psi|` for a normalised ket.
    pub fn pure(psi: &ComplexVector) -> Result<Self> {
        let norm2 = psi.norm_squared();
        if (norm2 - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "ket has squared norm {norm2}"
            )));
        }
        Ok(DensityMatrix(ket_bra(psi, psi)))
    }

    /// Maximally mixed state on `n` levels.
    pub fn maximally_mixed(n: usize) -> Self {
        DensityMatrix(identity(n) / C64::new(n as f64, 0.0))
    }

    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        DensityMatrix(matrix)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

/// Eigendecomposition of a Hermitian generator, eigenvalues ascending.
///
/// Holds `G = V diag(values) V^dagger` and produces `exp(-i G t)`; `G` is in
/// whatever frequency units the caller chose (rad/s for `H/hbar`).
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    values: Vec<f64>,
    vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn new(generator: &ComplexMatrix) -> Result<Self> {
        check_hermitian(generator)?;
        let eig = generator.clone().symmetric_eigen();
        let n = generator.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Columns are eigenvectors, in the order of [`Self::values`].
    pub fn vectors(&self) -> &ComplexMatrix {
        &self.vectors
    }

    /// `exp(-i G t)`
    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        let phases = ComplexVector::from_iterator(
            self.dim(),
            self.values.iter().map(|&e| C64::from_polar(1.0, -e * t)),
        );
        let mut scaled = self.vectors.clone();
        for (mut col, ph) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *ph;
        }
        scaled * self.vectors.adjoint()
    }

    pub fn evolve(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        check_dim(self.dim(), rho.dim())?;
        let u = self.propagator(t);
        Ok(DensityMatrix(&u * rho.matrix() * u.adjoint()))
    }

    pub fn evolve_ket(&self, psi: &ComplexVector, t: f64) -> Result<ComplexVector> {
        check_dim(self.dim(), psi.len())?;
        Ok(self.propagator(t) * psi)
    }

    /// Express `a` in the eigenbasis: `V^dagger a V`.
    pub fn to_eigenbasis(&self, a: &ComplexMatrix) -> ComplexMatrix {
        self.vectors.adjoint() * a * &self.vectors
    }
}

/// `exp(-iHt/hbar) rho exp(iHt/hbar)` for a Hamiltonian in joules.
pub fn evolve_hermitian(h: &ComplexMatrix, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    check_hermitian(h)?;
    check_dim(h.nrows(), rho.dim())?;
    let generator = h.map(|z| z / HBAR);
    HermitianEigen::new(&generator)?.evolve(rho, t)
}

/// Kronecker product, `a` as the outer (clock) factor.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    Clock,
    Kinematic,
}

/// Reduced state of a bipartite `(d_clock, d_kin)` density matrix.
pub fn partial_trace(
    rho: &DensityMatrix,
    dims: (usize, usize),
    keep: Subsystem,
) -> Result<DensityMatrix> {
    let (dc, dk) = dims;
    check_dim(dc * dk, rho.dim())?;
    let m = rho.matrix();
    let reduced = match keep {
        Subsystem::Clock => ComplexMatrix::from_fn(dc, dc, |i, j| {
            (0..dk).map(|k| m[(i * dk + k, j * dk + k)]).sum()
        }),
        Subsystem::Kinematic => ComplexMatrix::from_fn(dk, dk, |a, b| {
            (0..dc).map(|i| m[(i * dk + a, i * dk + b)]).sum()
        }),
    };
    Ok(DensityMatrix(reduced))
}

/// Value of `tr(A rho)`, split so callers can police the imaginary part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectation {
    pub re: f64,
    pub im: f64,
}

impl Expectation {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// `tr(a b)` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn expectation(a: &ComplexMatrix, rho: &DensityMatrix) -> Result<Expectation> {
    check_dim(rho.dim(), a.nrows())?;
    check_dim(rho.dim(), a.ncols())?;
    let z = trace_of_product(a, rho.matrix());
    Ok(Expectation { re: z.re, im: z.im })
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        max_abs(&(a - b))
    }

    fn plus() -> ComplexVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexVector::from_vec(vec![c(s), c(s)])
    }

    fn minus() -> ComplexVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexVector::from_vec(vec![c(s), c(-s)])
    }

    #[test]
    fn zero_generator_is_identity_map() {
        let mut r = rng(1);
        let rho = random_density(&mut r, 4);
        let out = evolve_hermitian(&ComplexMatrix::zeros(4, 4), &rho, 123.0).unwrap();
        assert!(max_diff(out.matrix(), rho.matrix()) < 1e-14);
    }

    #[test]
    fn half_period_qubit_rotation() {
        let omega = 2.0e3;
        let h = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![c(0.0), c(HBAR * omega)]));
        let rho = DensityMatrix::pure(&plus()).unwrap();
        let out = evolve_hermitian(&h, &rho, std::f64::consts::PI / omega).unwrap();
        let target = ket_bra(&minus(), &minus());
        assert!(max_diff(out.matrix(), &target) < 1e-12);
    }

    #[test]
    fn group_law_for_random_generator() {
        let mut r = rng(7);
        let g = random_hermitian(&mut r, 5);
        let eig = HermitianEigen::new(&g).unwrap();
        let rho = random_density(&mut r, 5);
        let (t1, t2) = (0.37, 1.91);
        let stepwise = eig.evolve(&eig.evolve(&rho, t1).unwrap(), t2).unwrap();
        let direct = eig.evolve(&rho, t1 + t2).unwrap();
        assert!(max_diff(stepwise.matrix(), direct.matrix()) < 1e-10);
    }

    #[test]
    fn rejects_non_hermitian_and_mismatched_inputs() {
        let mut r = rng(3);
        let a = random_matrix(&mut r, 3, 3);
        let rho = random_density(&mut r, 3);
        assert!(matches!(
            evolve_hermitian(&a, &rho, 1.0),
            Err(Error::NotHermitian { .. })
        ));
        let h = random_hermitian(&mut r, 4);
        assert!(matches!(
            evolve_hermitian(&h, &rho, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn eigenvalues_come_out_ascending() {
        let mut r = rng(11);
        let eig = HermitianEigen::new(&random_hermitian(&mut r, 6)).unwrap();
        assert!(eig.values().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn kronecker_of_identities() {
        let out = tensor_product(&identity(2), &identity(3));
        assert!(max_diff(&out, &identity(6)) < 1e-15);
    }

    #[test]
    fn kronecker_block_structure() {
        let mut r = rng(5);
        let a = random_matrix(&mut r, 2, 2);
        let b = random_matrix(&mut r, 3, 3);
        let k = tensor_product(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                let block = k.view((3 * i, 3 * j), (3, 3)).into_owned();
                assert!(max_diff(&block, &(&b * a[(i, j)])) < 1e-15);
            }
        }
    }

    #[test]
    fn trace_factorises_over_kronecker() {
        let mut r = rng(9);
        for _ in 0..10 {
            let a = random_matrix(&mut r, 3, 3);
            let b = random_matrix(&mut r, 3, 3);
            let lhs = tensor_product(&a, &b).trace();
            let rhs = a.trace() * b.trace();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut r = rng(13);
        let rc = random_density(&mut r, 2);
        let rk = random_density(&mut r, 3);
        let joint = DensityMatrix::new(tensor_product(rc.matrix(), rk.matrix())).unwrap();
        let kept = partial_trace(&joint, (2, 3), Subsystem::Clock).unwrap();
        assert!(max_diff(kept.matrix(), rc.matrix()) < 1e-12);
        let kept = partial_trace(&joint, (2, 3), Subsystem::Kinematic).unwrap();
        assert!(max_diff(kept.matrix(), rk.matrix()) < 1e-12);
    }

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = ComplexVector::from_vec(vec![c(s), c(0.0), c(0.0), c(s)]);
        let joint = DensityMatrix::pure(&psi).unwrap();
        let kept = partial_trace(&joint, (2, 2), Subsystem::Clock).unwrap();
        assert!(max_diff(kept.matrix(), DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
    }

    #[test]
    fn schmidt_spectra_agree() {
        let mut r = rng(17);
        let psi = random_ket(&mut r, 12);
        let joint = DensityMatrix::pure(&psi).unwrap();
        let a = partial_trace(&joint, (3, 4), Subsystem::Clock).unwrap().eigenvalues();
        let b = partial_trace(&joint, (3, 4), Subsystem::Kinematic).unwrap().eigenvalues();
        // the larger factor carries one extra zero
        assert!(b[0].abs() < 1e-10);
        for (x, y) in a.iter().zip(&b[1..]) {
            assert!((x - y).abs() < 1e-10, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn partial_trace_rejects_wrong_dims() {
        let rho = DensityMatrix::maximally_mixed(6);
        assert!(partial_trace(&rho, (2, 4), Subsystem::Clock).is_err());
    }

    #[test]
    fn simple_expectations() {
        let mut r = rng(19);
        let rho = random_density(&mut r, 4);
        let e = expectation(&identity(4), &rho).unwrap();
        assert!((e.re - 1.0).abs() < 1e-14 && e.im.abs() < 1e-14);
        let ground = DensityMatrix::pure(&ComplexVector::from_vec(vec![c(1.0), c(0.0)])).unwrap();
        assert_eq!(expectation(&pauli_z(), &ground).unwrap().re, -1.0);
    }

    #[test]
    fn hermitian_expectations_are_real() {
        let mut r = rng(23);
        for n in 2..8 {
            let a = random_hermitian(&mut r, n);
            let rho = random_density(&mut r, n);
            assert!(expectation(&a, &rho).unwrap().im.abs() < 1e-12);
        }
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(identity(2)).is_err());
        let bad = ComplexMatrix::from_diagonal(&ComplexVector::from_vec(vec![c(1.5), c(-0.5)]));
        assert!(DensityMatrix::new(bad).is_err());
    }

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
        // with |0> as ground state, [sigma_y, sigma_z] = -2i sigma_x
        let lhs = commutator(&y, &z);
        assert!(max_diff(&lhs, &(&x * C64::new(0.0, -2.0))) < 1e-15);
        assert!(max_diff(&(&x * &x), &identity(2)) < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn evolution_preserves_trace_and_positivity(seed in any::<u64>(), n in 2usize..7, t in -50.0f64..50.0) {
            let mut r = rng(seed);
            let eig = HermitianEigen::new(&random_hermitian(&mut r, n)).unwrap();
            let rho = random_density(&mut r, n);
            let out = eig.evolve(&rho, t).unwrap();
            prop_assert!((out.trace() - c(1.0)).norm() < 1e-10);
            prop_assert!(out.min_eigenvalue() > -1e-10);
        }

        #[test]
        fn local_evolution_commutes_with_partial_trace(seed in any::<u64>(), t in 0.0f64..5.0) {
            let mut r = rng(seed);
            let ha = random_hermitian(&mut r, 2);
            let hb = random_hermitian(&mut r, 3);
            let total = tensor_product(&ha, &identity(3)) + tensor_product(&identity(2), &hb);
            let joint = DensityMatrix::pure(&random_ket(&mut r, 6)).unwrap();
            let evolved = HermitianEigen::new(&total).unwrap().evolve(&joint, t).unwrap();
            let lhs = partial_trace(&evolved, (2, 3), Subsystem::Clock).unwrap();
            let reduced = partial_trace(&joint, (2, 3), Subsystem::Clock).unwrap();
            let rhs = HermitianEigen::new(&ha).unwrap().evolve(&reduced, t).unwrap();
            prop_assert!(max_diff(lhs.matrix(), rhs.matrix()) < 1e-10);
        }
    }
}

//! Finite-dimensional clock models.
//!
//! Every model stores its Hamiltonian in joules and its time operator in
//! seconds. The time operator is calibrated at construction so that the mean
//! reading of the initial state is zero; the subtracted offset is kept so raw
//! POVM moments can still be formed.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::constants::HBAR;
use crate::error::{out_of_range, Error, Result};
use crate::linalg::{
    commutator, expectation, identity, ket_bra, max_abs, pauli_y, pauli_z, trace_of_product,
    ComplexMatrix, ComplexVector, DensityMatrix, HermitianEigen,
};
use crate::quadrature::{gauss_legendre_on, simpson_refined};

const MAX_DIM: usize = 4096;
const IMAG_TOL: f64 = 1e-10;
/// Gauss-Legendre nodes for the qubit POVM moments; the integrands are
/// polynomial times trigonometric, so this is exact to rounding.
const POVM_NODES: usize = 96;

#[derive(Clone, Debug, PartialEq)]
pub enum ClockKind {
    Swp,
    QuasiIdeal { sigma_bar: f64, m0: f64, n0: f64 },
    QubitPhase,
}

impl ClockKind {
    pub fn name(&self) -> &'static str {
        match self {
            ClockKind::Swp => "swp",
            ClockKind::QuasiIdeal { .. } => "quasi_ideal",
            ClockKind::QubitPhase => "qubit_phase",
        }
    }

    /// Models whose readout is a projection-valued measure on a discrete
    /// time basis.
    pub fn is_discrete_pvm(&self) -> bool {
        !matches!(self, ClockKind::QubitPhase)
    }
}

#[derive(Clone, Debug)]
pub struct ClockModel {
    kind: ClockKind,
    omega: f64,
    hamiltonian: ComplexMatrix,
    time_operator: ComplexMatrix,
    offset: f64,
    rho0: DensityMatrix,
    period: f64,
    povm_at_zero: Option<ComplexMatrix>,
    eigen: HermitianEigen,
    error_generator: ComplexMatrix,
    second_moment: ComplexMatrix,
}

impl ClockModel {
    fn assemble(
        kind: ClockKind,
        omega: f64,
        hamiltonian: ComplexMatrix,
        raw_time: ComplexMatrix,
        rho0: DensityMatrix,
        povm_at_zero: Option<ComplexMatrix>,
    ) -> Result<Self> {
        let generator = hamiltonian.map(|z| z / HBAR);
        let eigen = HermitianEigen::new(&generator)?;
        let offset = expectation(&raw_time, &rho0)?.re;
        let d = hamiltonian.nrows();
        let time_operator = &raw_time - identity(d) * C64::new(offset, 0.0);
        // e = i[G, T] - 1, built from the calibrated T (the shift drops out)
        let error_generator =
            commutator(&generator, &time_operator) * C64::new(0.0, 1.0) - identity(d);
        let mut model = ClockModel {
            kind,
            omega,
            hamiltonian,
            time_operator,
            offset,
            rho0,
            period: 2.0 * PI / omega,
            povm_at_zero,
            eigen,
            error_generator,
            second_moment: ComplexMatrix::zeros(d, d),
        };
        model.second_moment = model.central_moment_operator(2);
        Ok(model)
    }

    pub fn kind(&self) -> &ClockKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    /// Calibrated first-moment operator: `tr[T rho0] = 0`.
    pub fn time_operator(&self) -> &ComplexMatrix {
        &self.time_operator
    }

    /// Mean raw reading of the initial state, subtracted from the time
    /// operator at construction.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn raw_time_operator(&self) -> ComplexMatrix {
        &self.time_operator + identity(self.dim()) * C64::new(self.offset, 0.0)
    }

    pub fn rho0(&self) -> &DensityMatrix {
        &self.rho0
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn povm_at_zero(&self) -> Option<&ComplexMatrix> {
        self.povm_at_zero.as_ref()
    }

    /// Eigendecomposition of `H/hbar` (rad/s).
    pub fn eigen(&self) -> &HermitianEigen {
        &self.eigen
    }

    /// `i[H, T]/hbar - 1`; zero for a clock obeying the canonical commutator.
    pub fn error_generator(&self) -> &ComplexMatrix {
        &self.error_generator
    }

    /// Second moment of the readout about the calibration offset.
    pub fn second_moment_operator(&self) -> &ComplexMatrix {
        &self.second_moment
    }

    /// Raw POVM moment `T^(n) = int s^n F(s) ds` with `s` in `[0, T0)`.
    pub fn moment_operator(&self, n: u32) -> ComplexMatrix {
        match self.kind {
            ClockKind::QubitPhase => qubit_moment(self.omega, |s| s.powi(n as i32)),
            _ => {
                let raw = self.raw_time_operator();
                let mut acc = identity(self.dim());
                for _ in 0..n {
                    acc = &acc * &raw;
                }
                acc
            }
        }
    }

    /// `int (s - offset)^n F(s) ds`.
    pub fn central_moment_operator(&self, n: u32) -> ComplexMatrix {
        match self.kind {
            ClockKind::QubitPhase => {
                let o = self.offset;
                qubit_moment(self.omega, |s| (s - o).powi(n as i32))
            }
            _ => {
                let mut acc = identity(self.dim());
                for _ in 0..n {
                    acc = &acc * &self.time_operator;
                }
                acc
            }
        }
    }

    /// Same clock prepared in `rho0`; the calibration offset is recomputed.
    pub fn with_initial_state(&self, rho0: DensityMatrix) -> Result<Self> {
        if rho0.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: rho0.dim(),
            });
        }
        ClockModel::assemble(
            self.kind.clone(),
            self.omega,
            self.hamiltonian.clone(),
            self.raw_time_operator(),
            rho0,
            self.povm_at_zero.clone(),
        )
    }

    /// Non-relativistic clock state at laboratory time `t`.
    pub fn rho_nr(&self, t: f64) -> DensityMatrix {
        self.evolve(&self.rho0, t)
    }

    pub(crate) fn evolve(&self, rho: &DensityMatrix, t: f64) -> DensityMatrix {
        let u = self.eigen.propagator(t);
        DensityMatrix::from_matrix_unchecked(&u * rho.matrix() * u.adjoint())
    }

    /// Mean calibrated reading of an arbitrary clock state.
    pub fn mean_reading(&self, rho: &DensityMatrix) -> f64 {
        trace_of_product(&self.time_operator, rho.matrix()).re
    }

    /// Readout standard deviation of an arbitrary clock state.
    pub fn reading_sigma(&self, rho: &DensityMatrix) -> f64 {
        let m1 = self.mean_reading(rho);
        let m2 = trace_of_product(&self.second_moment, rho.matrix()).re;
        (m2 - m1 * m1).max(0.0).sqrt()
    }

    /// Readout standard deviation of the uncoupled clock at time `t`.
    pub fn sigma_nr(&self, t: f64) -> f64 {
        self.reading_sigma(&self.rho_nr(t))
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if omega.is_finite() && omega > 0.0 {
        Ok(())
    } else {
        Err(out_of_range("omega", format!("must be positive and finite, got {omega}")))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if (2..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(out_of_range("d", format!("must lie in [2, {MAX_DIM}], got {d}")))
    }
}

/// Time-basis ket `|theta_m> = d^{-1/2} sum_j exp(-2 pi i j m / d) |e_j>`.
pub fn time_basis_state(d: usize, m: usize) -> ComplexVector {
    let norm = 1.0 / (d as f64).sqrt();
    ComplexVector::from_fn(d, |j, _| {
        C64::from_polar(norm, -2.0 * PI * (j * m % d) as f64 / d as f64)
    })
}

fn ladder_hamiltonian(d: usize, omega: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::new(HBAR * omega * i as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `sum_m m (T0/d) |theta_m><theta_m|` in the energy basis.
fn sawtooth_time_operator(d: usize, omega: f64) -> ComplexMatrix {
    let tau = 2.0 * PI / omega / d as f64;
    let mut t = ComplexMatrix::zeros(d, d);
    for m in 1..d {
        let v = time_basis_state(d, m);
        t += ket_bra(&v, &v) * C64::new(m as f64 * tau, 0.0);
    }
    t
}

/// Salecker-Wigner-Peres clock on `d` levels with level spacing `hbar omega`.
pub fn build_swp(d: usize, omega: f64) -> Result<ClockModel> {
    check_dim(d)?;
    check_omega(omega)?;
    let rho0 = DensityMatrix::pure(&time_basis_state(d, 0))?;
    ClockModel::assemble(
        ClockKind::Swp,
        omega,
        ladder_hamiltonian(d, omega),
        sawtooth_time_operator(d, omega),
        rho0,
        None,
    )
}

/// Energy centre used when none is given: the middle of the ladder.
pub fn default_n0(d: usize) -> f64 {
    (d as f64 - 1.0) / 2.0
}

/// Wrap `x` into `(-d/2, d/2]`.
fn wrap_half(x: f64, d: f64) -> f64 {
    let mut y = x - d * (x / d).round();
    if y <= -d / 2.0 {
        y += d;
    }
    if y > d / 2.0 {
        y -= d;
    }
    y
}

/// Time-basis amplitudes of the Quasi-Ideal initial state.
pub fn quasi_ideal_amplitudes(d: usize, sigma_bar: f64, m0: f64, n0: f64) -> Vec<C64> {
    let df = d as f64;
    let raw: Vec<C64> = (0..d)
        .map(|m| {
            let x = wrap_half(m as f64 - m0, df);
            let envelope = (-PI * x * x / (sigma_bar * sigma_bar)).exp();
            C64::from_polar(envelope, 2.0 * PI * n0 * x / df)
        })
        .collect();
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|z| z / norm).collect()
}

/// Quasi-Ideal clock: SWP Hamiltonian and time operator, initial state a
/// Gaussian packet of width `sigma_bar` over the time basis centred on `m0`
/// with energy centre `n0`.
pub fn build_quasi_ideal(
    d: usize,
    omega: f64,
    sigma_bar: f64,
    m0: f64,
    n0: f64,
) -> Result<ClockModel> {
    check_dim(d)?;
    check_omega(omega)?;
    if !(sigma_bar > 0.0 && sigma_bar < d as f64) {
        return Err(out_of_range(
            "sigma_bar",
            format!("must lie in (0, {d}), got {sigma_bar}"),
        ));
    }
    if !m0.is_finite() || !n0.is_finite() {
        return Err(out_of_range("m0/n0", "must be finite"));
    }
    let amps = quasi_ideal_amplitudes(d, sigma_bar, m0, n0);
    let mut psi = ComplexVector::zeros(d);
    for (m, a) in amps.iter().enumerate() {
        psi += time_basis_state(d, m) * *a;
    }
    let rho0 = DensityMatrix::pure(&psi)?;
    ClockModel::assemble(
        ClockKind::QuasiIdeal { sigma_bar, m0, n0 },
        omega,
        ladder_hamiltonian(d, omega),
        sawtooth_time_operator(d, omega),
        rho0,
        None,
    )
}

/// Phase ket `(|0> + exp(-i theta)|1>)/sqrt 2`.
pub fn phase_state(theta: f64) -> ComplexVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexVector::from_vec(vec![C64::new(s, 0.0), C64::from_polar(s, -theta)])
}

/// `int_0^{T0} f(s) F(s) ds` for the qubit phase POVM,
/// `F(s) = (omega/pi) |omega s><omega s|`.
fn qubit_moment(omega: f64, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let period = 2.0 * PI / omega;
    let mut acc = ComplexMatrix::zeros(2, 2);
    for (s, w) in gauss_legendre_on(POVM_NODES, 0.0, period) {
        let v = phase_state(omega * s);
        acc += ket_bra(&v, &v) * C64::new(w * f(s) * omega / PI, 0.0);
    }
    acc
}

/// Two-level clock read out by the covariant phase POVM.
pub fn build_qubit_phase(omega: f64) -> Result<ClockModel> {
    check_omega(omega)?;
    let hamiltonian = pauli_z() * C64::new(0.5 * HBAR * omega, 0.0);
    let raw_time = qubit_moment(omega, |s| s);
    let f0 = phase_state(0.0);
    let povm0 = ket_bra(&f0, &f0) * C64::new(omega / PI, 0.0);
    let rho0 = DensityMatrix::pure(&phase_state(0.0))?;
    ClockModel::assemble(
        ClockKind::QubitPhase,
        omega,
        hamiltonian,
        raw_time,
        rho0,
        Some(povm0),
    )
}

/// Closed form of the qubit time operator, `(pi/omega) 1 + sigma_y / omega`.
pub fn qubit_time_operator_closed_form(omega: f64) -> ComplexMatrix {
    identity(2) * C64::new(PI / omega, 0.0) + pauli_y() * C64::new(1.0 / omega, 0.0)
}

/// A clock as used by the dilation and precision formulas: either a matrix
/// model or the analytic idealised clock, which obeys `[T, H] = i hbar`
/// exactly and has a time-independent readout spread.
#[derive(Clone, Debug)]
pub enum Clock {
    Idealised { sigma_nr: f64 },
    Model(ClockModel),
}

impl Clock {
    pub fn name(&self) -> &'static str {
        match self {
            Clock::Idealised { .. } => "idealised",
            Clock::Model(m) => m.kind().name(),
        }
    }

    pub fn error_trace(&self, t: f64) -> Result<f64> {
        match self {
            Clock::Idealised { .. } => Ok(0.0),
            Clock::Model(m) => error_trace(m, t),
        }
    }

    pub fn mean_time_nr(&self, t: f64) -> f64 {
        match self {
            Clock::Idealised { .. } => t,
            Clock::Model(m) => mean_clock_time_nr(m, t),
        }
    }

    pub fn sigma_nr(&self, t: f64) -> f64 {
        match self {
            Clock::Idealised { sigma_nr } => *sigma_nr,
            Clock::Model(m) => m.sigma_nr(t),
        }
    }

    pub fn as_model(&self) -> Option<&ClockModel> {
        match self {
            Clock::Model(m) => Some(m),
            Clock::Idealised { .. } => None,
        }
    }
}

impl From<ClockModel> for Clock {
    fn from(m: ClockModel) -> Self {
        Clock::Model(m)
    }
}

/// `tr E(t) = -(i/hbar) tr([T, H] rho_NR(t)) - 1`.
pub fn error_trace(clock: &ClockModel, t: f64) -> Result<f64> {
    error_trace_of(clock, &clock.rho_nr(t))
}

/// `tr[e rho]` for an arbitrary clock state.
pub fn error_trace_of(clock: &ClockModel, rho: &DensityMatrix) -> Result<f64> {
    let z = trace_of_product(&clock.error_generator, rho.matrix());
    if z.im.abs() > IMAG_TOL * z.re.abs().max(1.0) {
        return Err(Error::NotReal {
            quantity: "tr E",
            imag: z.im,
        });
    }
    Ok(z.re)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTraceSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ErrorTraceSeries {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

pub fn error_trace_series(clock: &ClockModel, times: &[f64]) -> Result<ErrorTraceSeries> {
    let values = times
        .iter()
        .map(|&t| error_trace(clock, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorTraceSeries {
        times: times.to_vec(),
        values,
    })
}

/// Largest `|tr E|` over `n` evenly spaced samples of `[t0, t1]`.
pub fn max_abs_error_trace(clock: &ClockModel, t0: f64, t1: f64, n: usize) -> Result<f64> {
    let n = n.max(2);
    let times: Vec<f64> = (0..n)
        .map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64)
        .collect();
    Ok(error_trace_series(clock, &times)?.max_abs())
}

/// Calibrated mean reading of the uncoupled clock.
pub fn mean_clock_time_nr(clock: &ClockModel, t: f64) -> f64 {
    clock.mean_reading(&clock.rho_nr(t))
}

/// Both sides of `<T>_NR(t) = t + int_0^t tr E`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanTimeCheck {
    pub mean: f64,
    pub integrated: f64,
    pub residual: f64,
}

/// Integrates `tr E` with refined Simpson (at least 200 points per period)
/// and compares with the direct mean.
pub fn mean_time_identity(clock: &ClockModel, t: f64) -> Result<MeanTimeCheck> {
    let mean = mean_clock_time_nr(clock, t);
    // surface any non-real sample before integrating
    error_trace(clock, t)?;
    let periods = (t.abs() / clock.period()).ceil().max(1.0);
    let n = (200.0 * periods) as usize;
    let tol = 1e-9 * clock.period();
    let integral = simpson_refined(
        |s| error_trace(clock, s).unwrap_or(f64::NAN),
        0.0,
        t,
        n,
        tol,
    );
    let integrated = t + integral;
    Ok(MeanTimeCheck {
        mean,
        integrated,
        residual: mean - integrated,
    })
}

/// Both sides of the moment polynomial
/// `<T^(n)>(t) = sum_k C(n,k) t^(n-k) <T^(k)>(0)` and the part of the
/// difference carried by probability that crossed the end of the time range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentReport {
    pub n: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Initial readout probability that passes the range end during `t`.
    pub leaked_mass: f64,
    /// Independent evaluation of the residual from the leaked probability.
    pub wrap_contribution: f64,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Moment-polynomial check on a covariant readout.
///
/// The qubit clock is checked at any `t`. The discrete-basis clocks are
/// covariant only under whole shifts of the time basis, so `t` must be a
/// multiple of `T0/d`.
pub fn covariant_moment_check(clock: &ClockModel, n: u32, t: f64) -> Result<MomentReport> {
    let rho_t = clock.rho_nr(t);
    let lhs = expectation(&clock.moment_operator(n), &rho_t)?.re;
    let rhs: f64 = (0..=n)
        .map(|k| {
            let mk = expectation(&clock.moment_operator(k), clock.rho0()).unwrap().re;
            binomial(n, k) * t.powi((n - k) as i32) * mk
        })
        .sum();
    let period = clock.period();
    let (leaked_mass, wrap_contribution) = match clock.kind() {
        ClockKind::QubitPhase => {
            let omega = clock.omega();
            let shift = t.rem_euclid(period);
            let rho0 = clock.rho0().matrix().clone();
            let p0 = move |s: f64| {
                let v = phase_state(omega * s);
                (v.adjoint() * &rho0 * &v)[(0, 0)].re * omega / PI
            };
            let a = period - shift;
            let mass = simpson_refined(&p0, a, period, 64, 1e-14);
            let nn = n as i32;
            let wrap = simpson_refined(
                |u| ((u - period + t).powi(nn) - (u + t).powi(nn)) * p0(u),
                a,
                period,
                64,
                1e-14 * period.powi(nn).max(1.0),
            );
            (mass, wrap)
        }
        _ => {
            let d = clock.dim();
            let tau = period / d as f64;
            let k = (t / tau).round();
            if (t / tau - k).abs() > 1e-9 || k < 0.0 {
                return Err(out_of_range(
                    "t",
                    "discrete clocks are covariant only at multiples of T0/d",
                ));
            }
            let k = k as usize;
            let probs: Vec<f64> = (0..d)
                .map(|m| {
                    let v = time_basis_state(d, m);
                    (v.adjoint() * clock.rho0().matrix() * &v)[(0, 0)].re
                })
                .collect();
            let mut mass = 0.0;
            let mut wrap = 0.0;
            for (m, p) in probs.iter().enumerate() {
                let shifted = m + k;
                if shifted >= d {
                    mass += p;
                    let wrapped = (shifted % d) as f64 * tau;
                    wrap += p * (wrapped.powi(n as i32) - (shifted as f64 * tau).powi(n as i32));
                }
            }
            (mass, wrap)
        }
    };
    Ok(MomentReport {
        n,
        lhs,
        rhs,
        residual: lhs - rhs,
        leaked_mass,
        wrap_contribution,
    })
}

/// Outcome of testing `[T, H] = i hbar 1 + i hbar (s0 - s1) F(0)`.
#[derive(Clone, Debug, PartialEq)]
pub enum CommutatorReport {
    /// Continuous covariant POVM on `[s0, s1)`; largest entry of the
    /// difference between the two sides, in J s.
    Residual { max_abs: f64, s0: f64, s1: f64 },
    /// Projection-valued readout on a discrete basis; the continuous identity
    /// does not apply.
    DiscretePvm,
    /// Canonical pair on an unbounded range: the boundary term is absent.
    Heisenberg,
}

pub fn commutator_form_check(clock: &Clock) -> CommutatorReport {
    let model = match clock {
        Clock::Idealised { .. } => return CommutatorReport::Heisenberg,
        Clock::Model(m) => m,
    };
    let Some(f0) = model.povm_at_zero() else {
        return CommutatorReport::DiscretePvm;
    };
    let (s0, s1) = (0.0, model.period());
    let lhs = commutator(model.time_operator(), model.hamiltonian());
    let i_hbar = C64::new(0.0, HBAR);
    let rhs = identity(model.dim()) * i_hbar + f0 * (i_hbar * (s0 - s1));
    CommutatorReport::Residual {
        max_abs: max_abs(&(lhs - rhs)),
        s0,
        s1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        max_abs(&(a - b))
    }

    #[test]
    fn swp_qubit_period_and_spectrum() {
        let c = build_swp(2, 1.0).unwrap();
        assert!((c.period() - 2.0 * PI).abs() < 1e-15);
        let eig = HermitianEigen::new(&c.raw_time_operator()).unwrap();
        assert!(eig.values()[0].abs() < 1e-14);
        assert!((eig.values()[1] - PI).abs() < 1e-14);
    }

    #[test]
    fn fourier_basis_is_unbiased() {
        for d in [2, 3, 7, 12] {
            for m in 0..d {
                let v = time_basis_state(d, m);
                for j in 0..d {
                    assert!((v[j].norm_sqr() - 1.0 / d as f64).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn swp_focusing_times_give_minus_one() {
        let c = build_swp(3, 1.0).unwrap();
        for m in 0..3 {
            let t = m as f64 * c.period() / 3.0;
            assert!((error_trace(&c, t).unwrap() + 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn swp_between_focusing_times() {
        // slope of the mean reading, by central differences, minus one
        let c = build_swp(5, 1.0).unwrap();
        let t = c.period() / 10.0;
        let h = 1e-5;
        let slope = (mean_clock_time_nr(&c, t + h) - mean_clock_time_nr(&c, t - h)) / (2.0 * h);
        let v = error_trace(&c, t).unwrap();
        assert!((v - (slope - 1.0)).abs() < 1e-8, "{v} vs {}", slope - 1.0);
        assert!((v - 0.508_457_277_335_308).abs() < 1e-12, "{v}");
        // tr E integrates to zero between focusing times, so it cannot stay negative
        let tau = c.period() / 5.0;
        let r = mean_time_identity(&c, tau).unwrap();
        assert!((r.integrated - tau).abs() < 1e-9);
    }

    #[test]
    fn swp_mean_reading_at_focusing_time() {
        let c = build_swp(4, 1.0).unwrap();
        assert!(c.offset().abs() < 1e-15);
        let t = c.period() / 4.0;
        assert!((mean_clock_time_nr(&c, t) - t).abs() < 1e-10);
        assert!(mean_clock_time_nr(&c, 0.0).abs() < 1e-15);
    }

    #[test]
    fn builders_reject_bad_parameters() {
        assert!(build_swp(1, 1.0).is_err());
        assert!(build_swp(4, 0.0).is_err());
        assert!(build_swp(4, -1.0).is_err());
        assert!(build_quasi_ideal(8, 1.0, 8.0, 0.0, 3.5).is_err());
        assert!(build_quasi_ideal(8, 1.0, 0.0, 0.0, 3.5).is_err());
        assert!(build_qubit_phase(0.0).is_err());
    }

    #[test]
    fn quasi_ideal_state_is_normalised() {
        for (d, sb, m0) in [(8, 2.0, 0.0), (16, 4.0, 3.3), (33, 5.0, 20.0)] {
            let c = build_quasi_ideal(d, 2.0, sb, m0, default_n0(d)).unwrap();
            assert!((c.rho0().trace().re - 1.0).abs() < 1e-12);
            let amps = quasi_ideal_amplitudes(d, sb, m0, default_n0(d));
            let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quasi_ideal_circular_mean_sits_on_m0() {
        let d = 16;
        let c = build_quasi_ideal(d, 1.0, 4.0, 0.0, 7.5).unwrap();
        let tau = c.period() / d as f64;
        let mut z = C64::new(0.0, 0.0);
        for m in 0..d {
            let v = time_basis_state(d, m);
            let p = (v.adjoint() * c.rho0().matrix() * &v)[(0, 0)].re;
            z += C64::from_polar(p, 2.0 * PI * m as f64 / d as f64);
        }
        let mean = (z.arg() / (2.0 * PI)).rem_euclid(1.0) * c.period();
        let dist = mean.min(c.period() - mean);
        assert!(dist < 0.05 * c.period(), "{mean} vs 0 with tau {tau}");
    }

    #[test]
    fn quasi_ideal_tracks_laboratory_time() {
        let d = 32;
        let c = build_quasi_ideal(d, 1.0, (d as f64).sqrt(), d as f64 / 4.0, default_n0(d)).unwrap();
        let t0 = c.period();
        let worst = (0..=200)
            .map(|k| {
                let t = 0.5 * t0 * k as f64 / 200.0;
                (mean_clock_time_nr(&c, t) - t).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 0.02 * t0, "{}", worst / t0);
    }

    #[test]
    fn qubit_time_operator_matches_closed_form() {
        let omega = 3.7;
        let c = build_qubit_phase(omega).unwrap();
        let closed = qubit_time_operator_closed_form(omega);
        assert!(max_diff(&c.raw_time_operator(), &closed) < 1e-13);
        assert!((c.raw_time_operator().trace().re - 2.0 * PI / omega).abs() < 1e-13);
        assert!((c.offset() - PI / omega).abs() < 1e-13);
    }

    #[test]
    fn qubit_error_trace_is_minus_one_minus_cos() {
        let omega = 2.0;
        let c = build_qubit_phase(omega).unwrap();
        for wt in [0.0, PI / 2.0, PI, 1.234] {
            let v = error_trace(&c, wt / omega).unwrap();
            assert!((v + 1.0 + wt.cos()).abs() < 1e-12, "wt = {wt}: {v}");
        }
        let at_pi = error_trace(&c, PI / omega).unwrap();
        assert!(((1.0 + at_pi).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qubit_mean_reading_is_sine() {
        let omega = 5.0;
        let c = build_qubit_phase(omega).unwrap();
        for t in [0.0, 0.1, 0.7, 1.3] {
            let want = -(omega * t).sin() / omega;
            assert!((mean_clock_time_nr(&c, t) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn qubit_commutator_identity() {
        let omega = 1.7;
        let c = Clock::from(build_qubit_phase(omega).unwrap());
        match commutator_form_check(&c) {
            CommutatorReport::Residual { max_abs, s0, s1 } => {
                assert!(max_abs < 1e-10 * HBAR);
                assert!((s1 - s0 - 2.0 * PI / omega).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            commutator_form_check(&Clock::from(build_swp(4, 1.0).unwrap())),
            CommutatorReport::DiscretePvm
        );
        assert_eq!(
            commutator_form_check(&Clock::Idealised { sigma_nr: 1.0 }),
            CommutatorReport::Heisenberg
        );
    }

    #[test]
    fn qubit_commutator_without_factor_i_fails() {
        // the boundary term written without its factor i is not anti-Hermitian
        let omega = 1.0;
        let c = build_qubit_phase(omega).unwrap();
        let lhs = commutator(c.time_operator(), c.hamiltonian());
        let rhs = identity(2) * C64::new(0.0, HBAR)
            + c.povm_at_zero().unwrap() * C64::new(-2.0 * PI / omega * HBAR, 0.0);
        assert!(max_diff(&lhs, &rhs) > 0.1 * HBAR);
    }

    #[test]
    fn zeroth_moment_is_unity() {
        for c in [build_qubit_phase(1.0).unwrap(), build_swp(4, 1.0).unwrap()] {
            let t = c.period() / 4.0;
            let r = covariant_moment_check(&c, 0, t).unwrap();
            assert!((r.lhs - 1.0).abs() < 1e-13 && (r.rhs - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn swp_moment_polynomial_at_focusing_times() {
        for d in [2, 4, 7] {
            let c = build_swp(d, 1.0).unwrap();
            let tau = c.period() / d as f64;
            for k in 0..d {
                for n in 0..=3 {
                    let r = covariant_moment_check(&c, n, k as f64 * tau).unwrap();
                    assert!(r.residual.abs() < 1e-8, "d {d} k {k} n {n}: {r:?}");
                    assert!(r.leaked_mass < 1e-14);
                }
            }
            let r = covariant_moment_check(&c, 1, d as f64 * tau).unwrap();
            assert!((r.leaked_mass - 1.0).abs() < 1e-12);
            assert!((r.residual - r.wrap_contribution).abs() < 1e-10);
        }
    }

    #[test]
    fn discrete_moment_check_rejects_off_lattice_times() {
        let c = build_swp(4, 1.0).unwrap();
        assert!(covariant_moment_check(&c, 2, 0.1).is_err());
    }

    #[test]
    fn qubit_moment_residual_is_the_wrapped_probability() {
        let omega = 1.0;
        let c = build_qubit_phase(omega).unwrap();
        for n in 1..=3 {
            let r = covariant_moment_check(&c, n, 0.3).unwrap();
            assert!(r.leaked_mass > 0.0);
            assert!(
                (r.residual - r.wrap_contribution).abs() < 1e-10 * r.residual.abs().max(1.0),
                "{r:?}"
            );
        }
    }

    #[test]
    fn qubit_moment_polynomial_cannot_close() {
        // the best qubit state puts the readout zero on the wrap point, yet the
        // density 1 - cos vanishes only there, so some probability always wraps
        let omega = 1.0;
        let c = build_qubit_phase(omega).unwrap();
        let c = c
            .with_initial_state(DensityMatrix::pure(&phase_state(PI)).unwrap())
            .unwrap();
        let r = covariant_moment_check(&c, 2, 0.3).unwrap();
        let leak = (0.3 - 0.3f64.sin()) / (2.0 * PI);
        assert!((r.leaked_mass - leak).abs() < 1e-12, "{r:?}");
        assert!(r.residual.abs() > 1e-4);
        assert!((r.residual - r.wrap_contribution).abs() < 1e-10);
    }

    #[test]
    fn mean_time_identity_holds_without_wrap_restriction() {
        let swp = build_swp(5, 2.0).unwrap();
        let qi = build_quasi_ideal(16, 2.0, 4.0, 0.0, default_n0(16)).unwrap();
        let qb = build_qubit_phase(2.0).unwrap();
        for c in [swp, qi, qb] {
            for frac in [0.13, 0.5, 1.0, 1.7] {
                let r = mean_time_identity(&c, frac * c.period()).unwrap();
                assert!(r.residual.abs() < 1e-8 * c.period(), "{:?} {frac}: {r:?}", c.kind());
            }
        }
    }

    #[test]
    fn error_trace_is_real_for_all_models() {
        let models = [
            build_swp(6, 1.0).unwrap(),
            build_quasi_ideal(12, 1.0, 3.0, 2.5, 4.0).unwrap(),
            build_qubit_phase(1.0).unwrap(),
        ];
        for c in &models {
            for k in 0..50 {
                let rho = c.rho_nr(k as f64 * 0.173);
                let z = trace_of_product(c.error_generator(), rho.matrix());
                assert!(z.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn idealised_clock_is_exact() {
        let c = Clock::Idealised { sigma_nr: 1e-9 };
        assert_eq!(c.error_trace(3.0).unwrap(), 0.0);
        assert_eq!(c.mean_time_nr(3.0), 3.0);
        assert_eq!(c.sigma_nr(3.0), 1e-9);
    }

    #[test]
    fn swp_readout_spread_vanishes_at_focusing_times() {
        let c = build_swp(6, 1.0).unwrap();
        let tau = c.period() / 6.0;
        assert!(c.sigma_nr(2.0 * tau) < 1e-7 * tau);
        assert!(c.sigma_nr(2.5 * tau) > 0.1 * tau);
    }
}

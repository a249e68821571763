//! Brute-force joint evolution of clock and centre of mass, used to check
//! the perturbative formulas.
//!
//! The total Hamiltonian is
//! `H_cl + H_k + H_cl (g x / c^2 - p^2 / 2 m^2 c^2)`, with `H_k = p^2/2m + m g x`.
//! At `g = 0` it is block diagonal in momentum and each block is solved
//! exactly. For `g != 0` each clock energy level `E_a` sees its own
//! kinematic Hamiltonian `p^2 (1 - E_a/mc^2) / 2m + m g (1 + E_a/mc^2) x`,
//! integrated by symmetric split-step on a position grid.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::clocks::{Clock, ClockModel};
use crate::constants::HBAR;
use crate::dilation::{mean_clock_time, t_coh_closed_form};
use crate::error::{out_of_range, Error, Result};
use crate::kinematics::{to_grid, CatState, KinematicState, MomentumGrid, Physics, PureState};
use crate::linalg::{trace_of_product, ComplexMatrix, ComplexVector, DensityMatrix, HermitianEigen};
use crate::measurement::{bin_probability, MomentumBinning, WINDOW};
use crate::precision::sigma_breakdown;
use crate::quadrature::gauss_legendre_on;

/// Perturbative order kept in the coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    /// `w = -p^2/2m^2c^2`
    C2,
    /// adds `3p^4/8m^4c^4` to `w` and `-p^4/8m^3c^2` to `H_k`
    C4,
}

impl Order {
    pub fn w(self, p: f64, m: f64, c: f64) -> f64 {
        let u = (p / (m * c)).powi(2);
        match self {
            Order::C2 => -0.5 * u,
            Order::C4 => -0.5 * u + 0.375 * u * u,
        }
    }

    fn kinetic(self, p: f64, m: f64, c: f64) -> f64 {
        let e = p * p / (2.0 * m);
        match self {
            Order::C2 => e,
            Order::C4 => e - p.powi(4) / (8.0 * m.powi(3) * c * c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Momentum,
    Position,
}

/// One pure joint state: column `k` holds the clock amplitudes at grid
/// point `k`, in the clock's computational basis.
#[derive(Clone, Debug)]
pub struct JointComponent {
    pub weight: f64,
    pub amplitudes: ComplexMatrix,
}

/// Clock and motional state on a uniform grid, as a statistical mixture of
/// pure joint states. Each component is normalised on the grid.
#[derive(Clone, Debug)]
pub struct JointState {
    pub clock_dim: usize,
    pub representation: Representation,
    pub origin: f64,
    pub step: f64,
    pub n: usize,
    pub components: Vec<JointComponent>,
}

impl JointState {
    pub fn point(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.step
    }

    /// Largest `|1 - ||psi||^2|` over the components.
    pub fn norm_defect(&self) -> f64 {
        self.components
            .iter()
            .map(|c| (1.0 - c.amplitudes.norm_squared() * self.step).abs())
            .fold(0.0, f64::max)
    }

    pub fn reduced_clock(&self) -> DensityMatrix {
        let d = self.clock_dim;
        let mut rho = ComplexMatrix::zeros(d, d);
        for c in &self.components {
            rho += (&c.amplitudes * c.amplitudes.adjoint()) * C64::from(c.weight * self.step);
        }
        DensityMatrix::from_matrix_unchecked(rho)
    }

    /// Probability density over the grid variable, traced over the clock.
    pub fn kinematic_density(&self) -> Vec<f64> {
        (0..self.n)
            .map(|k| {
                self.components
                    .iter()
                    .map(|c| c.weight * c.amplitudes.column(k).norm_squared())
                    .sum()
            })
            .collect()
    }

    /// Mean of the grid variable.
    pub fn mean_coordinate(&self) -> f64 {
        self.kinematic_density()
            .iter()
            .enumerate()
            .map(|(k, rho)| self.point(k) * rho * self.step)
            .sum()
    }
}

/// Mean and spread of the clock reading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Readout {
    pub mean: f64,
    pub sigma: f64,
}

pub fn readout(clock: &ClockModel, joint: &JointState) -> Result<Readout> {
    if joint.clock_dim != clock.dim() {
        return Err(Error::DimensionMismatch {
            expected: clock.dim(),
            got: joint.clock_dim,
        });
    }
    let rho = joint.reduced_clock();
    let mean = trace_of_product(clock.time_operator(), rho.matrix()).re;
    let second = trace_of_product(clock.second_moment_operator(), rho.matrix()).re;
    Ok(Readout {
        mean,
        sigma: (second - mean * mean).max(0.0).sqrt(),
    })
}

/// Pure pieces of the clock's initial state.
fn clock_components(clock: &ClockModel) -> Result<Vec<(f64, ComplexVector)>> {
    let eig = HermitianEigen::new(clock.rho0().matrix())?;
    Ok(eig
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 1e-14)
        .map(|(k, &w)| (w, eig.vectors().column(k).into_owned()))
        .collect())
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(out_of_range("t", format!("must be non-negative, got {t}")))
    }
}

/// Exact evolution at `g = 0` on the default momentum grid.
pub fn exact_evolve_g0(
    clock: &ClockModel,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
    order: Order,
) -> Result<JointState> {
    exact_evolve_g0_on(clock, kstate, t, physics, order, &MomentumGrid::for_state(kstate))
}

/// Exact evolution at `g = 0`: in block `p` the clock runs for
/// `t (1 + w(p))` and the motional amplitude picks up `exp(-i H_k(p) t/hbar)`.
pub fn exact_evolve_g0_on(
    clock: &ClockModel,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
    order: Order,
    grid: &MomentumGrid,
) -> Result<JointState> {
    if physics.g != 0.0 {
        return Err(out_of_range("g", "the block oracle needs g = 0"));
    }
    check_time(t)?;
    let m = kstate.mass();
    let c = physics.c;
    let sampled = to_grid(kstate, grid)?;
    let eig = clock.eigen();
    let v = eig.vectors();
    let d = clock.dim();
    let mut components = Vec::new();
    for (wc, ket) in clock_components(clock)? {
        let k0 = v.adjoint() * ket;
        for comp in &sampled.components {
            let scale = 1.0 / comp.captured.sqrt();
            let mut amps = ComplexMatrix::zeros(d, grid.n);
            for j in 0..grid.n {
                let p = grid.point(j);
                let s = t * (1.0 + order.w(p, m, c));
                let kin = C64::from_polar(scale, -order.kinetic(p, m, c) * t / HBAR) * comp.amplitudes[j];
                let col = ComplexVector::from_iterator(
                    d,
                    k0.iter()
                        .zip(eig.values())
                        .map(|(a, &lam)| a * C64::from_polar(1.0, -lam * s)),
                );
                amps.set_column(j, &((v * col) * kin));
            }
            components.push(JointComponent {
                weight: wc * comp.weight,
                amplitudes: amps,
            });
        }
    }
    Ok(JointState {
        clock_dim: d,
        representation: Representation::Momentum,
        origin: grid.p_min,
        step: grid.dp,
        n: grid.n,
        components,
    })
}

/// Uniform position grid `x_k = x_min + k dx`, `n` a power of two.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositionGrid {
    pub x_min: f64,
    pub dx: f64,
    pub n: usize,
}

pub const DEFAULT_POSITION_POINTS: usize = 2048;
pub const MAX_STEPS: u64 = 100_000;
const MAX_POSITION_POINTS: usize = 1 << 16;
const PHASE_PER_STEP: f64 = 0.1;
const LEAK_TOL: f64 = 1e-6;
const EDGE_FRACTION: f64 = 1.0 / 32.0;

impl PositionGrid {
    pub fn point(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx
    }

    pub fn centre(&self) -> f64 {
        self.x_min + 0.5 * (self.n - 1) as f64 * self.dx
    }

    /// FFT-ordered momentum of bin `k`.
    pub fn momentum(&self, k: usize) -> f64 {
        let kk = if k < self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
        2.0 * PI * HBAR * kk / (self.n as f64 * self.dx)
    }

    pub fn p_max(&self) -> f64 {
        PI * HBAR / self.dx
    }

    /// `±10 sigma_x(t)` around every packet's start and end point, with at
    /// least `points` samples and enough resolution for the momenta reached.
    pub fn for_state(kstate: &KinematicState, t: f64, physics: &Physics, points: usize) -> Result<Self> {
        let m = kstate.mass();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut p_need: f64 = 0.0;
        for (_, pure) in kstate.pure_components() {
            let b = pure.base();
            let spread = (b.sigma_x.powi(2) + (b.sigma_p() * t / m).powi(2)).sqrt();
            let drift = b.p_bar0 * t / m - 0.5 * physics.g * t * t;
            let mut starts = vec![b.x_bar0];
            if let PureState::Cat(c) = pure {
                starts.push(b.x_bar0 + c.delta_x0);
            }
            for x in starts {
                lo = lo.min(x.min(x + drift) - 10.0 * spread);
                hi = hi.max(x.max(x + drift) + 10.0 * spread);
            }
            let p_end = b.p_bar0 - m * physics.g * t;
            p_need = p_need.max(b.p_bar0.abs().max(p_end.abs()) + 10.0 * b.sigma_p());
        }
        let span = hi - lo;
        let mut n = points.next_power_of_two();
        while PI * HBAR * n as f64 / span < p_need {
            n *= 2;
            if n > MAX_POSITION_POINTS {
                return Err(out_of_range(
                    "grid",
                    format!("more than {MAX_POSITION_POINTS} points needed to resolve the momenta"),
                ));
            }
        }
        Ok(PositionGrid {
            x_min: lo,
            dx: span / n as f64,
            n,
        })
    }
}

/// Parameters of one level's kinematic Hamiltonian
/// `p^2 (1 - kappa) / 2m + m g (1 + kappa) (x - x_c)`.
#[derive(Clone, Copy, Debug)]
struct Level {
    kappa: f64,
}

struct SplitStep<'a> {
    grid: PositionGrid,
    m: f64,
    g: f64,
    dt: f64,
    steps: u64,
    fwd: &'a Arc<dyn Fft<f64>>,
    inv: &'a Arc<dyn Fft<f64>>,
}

impl SplitStep<'_> {
    fn run(&self, psi0: &[C64], level: Level) -> Vec<C64> {
        let n = self.grid.n;
        let xc = self.grid.centre();
        let kin = |frac: f64| -> Vec<C64> {
            (0..n)
                .map(|k| {
                    let p = self.grid.momentum(k);
                    let e = p * p * (1.0 - level.kappa) / (2.0 * self.m);
                    // the inverse transform is unnormalised
                    C64::from_polar(1.0 / n as f64, -e * frac * self.dt / HBAR)
                })
                .collect()
        };
        let half = kin(0.5);
        let full = kin(1.0);
        let force = self.m * self.g * (1.0 + level.kappa);
        let pot: Vec<C64> = (0..n)
            .map(|k| C64::from_polar(1.0, -force * (self.grid.point(k) - xc) * self.dt / HBAR))
            .collect();
        let mut psi = psi0.to_vec();
        let mut scratch = vec![C64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len()];
        let apply = |psi: &mut [C64], phase: &[C64], scratch: &mut [C64]| {
            self.fwd.process_with_scratch(psi, scratch);
            for (a, f) in psi.iter_mut().zip(phase) {
                *a *= f;
            }
            self.inv.process_with_scratch(psi, scratch);
        };
        if self.steps == 0 {
            return psi;
        }
        apply(&mut psi, &half, &mut scratch);
        for s in 0..self.steps {
            for (a, f) in psi.iter_mut().zip(&pot) {
                *a *= f;
            }
            let last = s + 1 == self.steps;
            apply(&mut psi, if last { &half } else { &full }, &mut scratch);
        }
        psi
    }
}

/// Probability in the outer `EDGE_FRACTION` of the grid, in position and in
/// momentum.
fn edge_leak(psi: &[C64], fwd: &Arc<dyn Fft<f64>>) -> f64 {
    let n = psi.len();
    let edge = ((n as f64 * EDGE_FRACTION) as usize).max(1);
    let total: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    let x_edge: f64 = psi[..edge].iter().chain(&psi[n - edge..]).map(|a| a.norm_sqr()).sum();
    let mut spec = psi.to_vec();
    fwd.process(&mut spec);
    let p_total: f64 = spec.iter().map(|a| a.norm_sqr()).sum();
    let p_edge: f64 = spec[n / 2 - edge..n / 2 + edge].iter().map(|a| a.norm_sqr()).sum();
    (x_edge / total).max(p_edge / p_total)
}

/// Steps needed so no grid point gains more than 0.1 rad per step.
pub fn required_steps(grid: &PositionGrid, m: f64, g: f64, kappa_max: f64, t: f64) -> u64 {
    let kin = grid.p_max().powi(2) * (1.0 + kappa_max) / (2.0 * m);
    let pot = m * g.abs() * (1.0 + kappa_max) * 0.5 * grid.n as f64 * grid.dx;
    let dt = PHASE_PER_STEP * HBAR / kin.max(pot);
    (t / dt).ceil().max(1.0) as u64
}

/// Split-step evolution with the default grid and step rule.
pub fn exact_evolve_g(
    clock: &ClockModel,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
    steps: Option<u64>,
) -> Result<JointState> {
    let grid = PositionGrid::for_state(kstate, t, physics, DEFAULT_POSITION_POINTS)?;
    exact_evolve_g_on(clock, kstate, t, physics, steps, &grid)
}

/// Split-step evolution in the position representation. Each clock energy
/// level is propagated separately; the level-dependent constant
/// `E_a (1 + g x_c / c^2)` is applied as an exact phase and the common
/// `m g x_c` is dropped.
pub fn exact_evolve_g_on(
    clock: &ClockModel,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
    steps: Option<u64>,
    grid: &PositionGrid,
) -> Result<JointState> {
    check_time(t)?;
    let m = kstate.mass();
    let c = physics.c;
    let eig = clock.eigen();
    let d = clock.dim();
    let kappas: Vec<f64> = eig.values().iter().map(|&lam| HBAR * lam / (m * c * c)).collect();
    let kappa_max = kappas.iter().fold(0.0f64, |a, k| a.max(k.abs()));
    if kappa_max >= 0.5 {
        return Err(out_of_range(
            "c",
            format!("clock energy reaches {kappa_max} of m c^2; the coupling is not perturbative"),
        ));
    }
    let steps = match steps {
        Some(s) => s,
        None => {
            let s = required_steps(grid, m, physics.g, kappa_max, t);
            if s > MAX_STEPS {
                return Err(Error::StepBudgetExceeded {
                    required: s,
                    cap: MAX_STEPS,
                });
            }
            s
        }
    };
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(grid.n);
    let inv = planner.plan_fft_inverse(grid.n);
    let stepper = SplitStep {
        grid: *grid,
        m,
        g: physics.g,
        dt: if steps == 0 { 0.0 } else { t / steps as f64 },
        steps,
        fwd: &fwd,
        inv: &inv,
    };
    let xc = grid.centre();
    let v = eig.vectors();
    let clocks = clock_components(clock)?;
    let mut components = Vec::new();
    for (wk, pure) in kstate.pure_components() {
        let psi0: Vec<C64> = (0..grid.n).map(|k| pure.position_amplitude(grid.point(k))).collect();
        let norm0 = psi0.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dx;
        if norm0 < 1.0 - 1e-6 {
            return Err(Error::GridTooNarrow { captured: norm0 });
        }
        let scale = 1.0 / norm0.sqrt();
        let levels: Vec<Vec<C64>> = kappas
            .par_iter()
            .zip(eig.values().par_iter())
            .map(|(&kappa, &lam)| {
                let mut psi = stepper.run(&psi0, Level { kappa });
                let constant = lam * t * (1.0 + physics.g * xc / (c * c));
                let ph = C64::from_polar(scale, -constant);
                for a in psi.iter_mut() {
                    *a *= ph;
                }
                psi
            })
            .collect();
        let leak = levels.iter().map(|psi| edge_leak(psi, &fwd)).fold(0.0, f64::max);
        if leak > LEAK_TOL {
            return Err(Error::GridAliasing { leak });
        }
        for (wc, ket) in &clocks {
            let k0 = v.adjoint() * ket;
            let eig_amps = ComplexMatrix::from_fn(d, grid.n, |a, k| k0[a] * levels[a][k]);
            components.push(JointComponent {
                weight: wc * wk,
                amplitudes: v * eig_amps,
            });
        }
    }
    Ok(JointState {
        clock_dim: d,
        representation: Representation::Position,
        origin: grid.x_min,
        step: grid.dx,
        n: grid.n,
        components,
    })
}

/// Oracle mean reading: exact blocks at `g = 0`, split-step otherwise.
pub fn oracle_mean_time(clock: &ClockModel, kstate: &KinematicState, t: f64, physics: &Physics) -> Result<f64> {
    let joint = if physics.g == 0.0 {
        exact_evolve_g0(clock, kstate, t, physics, Order::C2)?
    } else {
        exact_evolve_g(clock, kstate, t, physics, None)?
    };
    Ok(readout(clock, &joint)?.mean)
}

/// One point of a `c` scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingPoint {
    pub lambda: f64,
    pub c_eff: f64,
    pub perturbative: f64,
    pub exact: f64,
    pub residual: f64,
    /// Residual over the size of the correction being tested.
    pub relative_residual: f64,
    /// The residual is within numerical noise.
    pub at_floor: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub quantity: &'static str,
    pub points: Vec<ScalingPoint>,
    /// Slope of `ln |relative residual|` against `ln c_eff`.
    pub relative_exponent: Option<f64>,
    /// Slope of `ln |residual|` against `ln c_eff`.
    pub absolute_exponent: Option<f64>,
    /// Every residual sits at the noise floor, so no slope can be fitted.
    pub at_floor: bool,
    pub threshold: f64,
    pub passed: bool,
}

/// Least-squares slope of `ln y` against `ln x`; `None` for fewer than three
/// usable points.
pub fn fit_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && y.abs() > 0.0)
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    if logs.len() < 3 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

fn check_scalings(c_scalings: &[f64]) -> Result<()> {
    if c_scalings.len() < 3 || c_scalings.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        return Err(out_of_range("c_scalings", "need at least three positive values"));
    }
    Ok(())
}

fn finish(
    quantity: &'static str,
    points: Vec<ScalingPoint>,
    threshold: f64,
    use_absolute: bool,
) -> VerificationReport {
    let live: Vec<&ScalingPoint> = points.iter().filter(|p| !p.at_floor).collect();
    let rel: Vec<(f64, f64)> = live.iter().map(|p| (p.c_eff, p.relative_residual)).collect();
    let abs: Vec<(f64, f64)> = live.iter().map(|p| (p.c_eff, p.residual)).collect();
    let relative_exponent = fit_exponent(&rel);
    let absolute_exponent = fit_exponent(&abs);
    let at_floor = live.len() < 3 && points.iter().all(|p| p.at_floor || p.relative_residual.abs() < 1e-6);
    let slope = if use_absolute { absolute_exponent } else { relative_exponent };
    let passed = at_floor || slope.is_some_and(|s| s <= threshold);
    VerificationReport {
        quantity,
        points,
        relative_exponent,
        absolute_exponent,
        at_floor,
        threshold,
        passed,
    }
}

/// Relative roundoff of a reading computed from a reduced density matrix.
const READOUT_NOISE: f64 = 1e-13;
/// The same after a split-step run.
const SPLIT_STEP_NOISE: f64 = 1e-12;

/// Oracle `<T>` against `<T>_NR + t R (1 + tr E)` as `c` is scaled.
pub fn verify_mean_time(
    clock: &ClockModel,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
    c_scalings: &[f64],
) -> Result<VerificationReport> {
    check_scalings(c_scalings)?;
    let wrapped = Clock::Model(clock.clone());
    let scale = crate::linalg::max_abs(clock.time_operator()) + t.abs();
    let points = c_scalings
        .iter()
        .map(|&lambda| {
            let phys = physics.scaled(lambda);
            let pert = mean_clock_time(&wrapped, kstate, t, &phys)?;
            let exact = oracle_mean_time(clock, kstate, t, &phys)?;
            let residual = exact - pert.mean_t;
            let noise = if phys.g == 0.0 { READOUT_NOISE } else { SPLIT_STEP_NOISE } * scale;
            Ok(ScalingPoint {
                lambda,
                c_eff: phys.c,
                perturbative: pert.mean_t,
                exact,
                residual,
                relative_residual: residual / pert.relativistic_shift,
                at_floor: residual.abs() < noise,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish("mean_time", points, -1.8, false))
}

/// Oracle reading spread against `sigma_NR + sigma_I + sigma_NI` at `g = 0`.
/// The pass test uses the absolute residual, expected to fall as `c^-6`.
pub fn verify_sigma(
    clock: &ClockModel,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
    c_scalings: &[f64],
) -> Result<VerificationReport> {
    check_scalings(c_scalings)?;
    let wrapped = Clock::Model(clock.clone());
    let points = c_scalings
        .iter()
        .map(|&lambda| {
            let phys = physics.scaled(lambda);
            let b = sigma_breakdown(&wrapped, kstate, t, &phys)?;
            let joint = exact_evolve_g0(clock, kstate, t, &phys, Order::C4)?;
            let exact = readout(clock, &joint)?.sigma;
            let residual = exact - b.total;
            // sigma comes from <T^2> - <T>^2
            let mean = b.sigma_nr.max(t.abs());
            let noise = READOUT_NOISE * (mean * mean + exact * exact) / exact;
            Ok(ScalingPoint {
                lambda,
                c_eff: phys.c,
                perturbative: b.total,
                exact,
                residual,
                relative_residual: residual / (b.total - b.sigma_nr),
                at_floor: residual.abs() < noise,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish("sigma", points, -5.0, true))
}

/// Quasi-Ideal clock with `d = 64`, `sigma_bar = 8`, started at `m0 = d/4`,
/// standing in for an idealised clock over `[0, T0/2]`.
pub fn idealised_surrogate(omega: f64) -> Result<ClockModel> {
    let d = 64;
    crate::clocks::build_quasi_ideal(d, omega, 8.0, d as f64 / 4.0, crate::clocks::default_n0(d))
}

/// Electron with `sigma_x = 1 nm` at rest, read by the surrogate tuned to
/// `sigma_NR = 1 ns`, at `t = T0/4`, with `c` lowered until
/// `sigma_I = 1e-4 sigma_NR`.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub clock: ClockModel,
    pub state: crate::kinematics::GaussianState,
    pub t: f64,
    pub physics: Physics,
}

pub const BENCHMARK_SIGMA_NR: f64 = 1e-9;
pub const BENCHMARK_COUPLING: f64 = 1e-4;

pub fn precision_benchmark() -> Result<Benchmark> {
    let unit = idealised_surrogate(1.0)?;
    let clock = idealised_surrogate(unit.sigma_nr(0.0) / BENCHMARK_SIGMA_NR)?;
    let t = 0.25 * clock.period();
    let state = crate::kinematics::GaussianState::new(0.0, 0.0, 1e-9, crate::constants::ELECTRON_MASS)?;
    let sigma = clock.sigma_nr(t);
    // sigma_I = t^2 2 sigma_p^4 / (8 sigma m^4 c^4) for a packet at rest
    let m = state.mass;
    let c4 = t * t * 2.0 * state.sigma_p().powi(4) / (8.0 * sigma * m.powi(4) * BENCHMARK_COUPLING * sigma);
    Ok(Benchmark {
        clock,
        state,
        t,
        physics: Physics::new(0.0, c4.powf(0.25))?,
    })
}

/// `T_sup - T_mix` from three oracle runs against the closed form scaled by
/// `1 + tr E(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherenceCheck {
    pub t_sup: f64,
    pub t_mix: f64,
    pub oracle_t_coh: f64,
    pub closed_form: f64,
    pub relative_deviation: f64,
}

pub fn verify_coherence(clock: &ClockModel, cat: &CatState, t: f64, physics: &Physics) -> Result<CoherenceCheck> {
    let t_sup = oracle_mean_time(clock, &KinematicState::Cat(*cat), t, physics)?;
    let t1 = oracle_mean_time(clock, &cat.first().into(), t, physics)?;
    let t2 = oracle_mean_time(clock, &cat.second().into(), t, physics)?;
    let t_mix = cat.alpha * t1 + (1.0 - cat.alpha) * t2;
    let oracle_t_coh = t_sup - t_mix;
    let closed_form = t_coh_closed_form(cat, t, physics) * (1.0 + crate::clocks::error_trace(clock, t)?);
    Ok(CoherenceCheck {
        t_sup,
        t_mix,
        oracle_t_coh,
        closed_form,
        relative_deviation: (oracle_t_coh - closed_form).abs() / closed_form.abs(),
    })
}

/// Conditioned reading statistics from an explicit joint density
/// `|psi(p)|^2 |phi(s - t (1 + w(p)))|^2` with a Gaussian reading profile
/// `phi` of width `sigma_nr`: Gauss-Legendre in `p` over the bin, trapezoid
/// in `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointConditioned {
    pub probability: f64,
    pub mean_t: f64,
    pub sigma_t: f64,
}

pub fn joint_conditioned_sigma(
    sigma_nr: f64,
    state: &crate::kinematics::GaussianState,
    t: f64,
    physics: &Physics,
    binning: &MomentumBinning,
    n: i64,
    points: usize,
) -> Result<JointConditioned> {
    if physics.g != 0.0 {
        return Err(out_of_range("g", "momentum conditioning is defined for g = 0"));
    }
    let sp = state.sigma_p();
    let (a, b) = binning.edges(n);
    let lo = a.max(state.p_bar0 - WINDOW * sp);
    let hi = b.min(state.p_bar0 + WINDOW * sp);
    if lo >= hi {
        return Err(Error::EmptyBin {
            bin: n,
            probability: bin_probability(state, binning, n),
        });
    }
    let m = state.mass;
    let c = physics.c;
    let nodes = gauss_legendre_on(points, lo, hi);
    let shifts: Vec<(f64, f64)> = nodes
        .iter()
        .map(|&(p, wq)| {
            let dens = (-(p - state.p_bar0).powi(2) / (2.0 * sp * sp)).exp() / (2.0 * PI * sp * sp).sqrt();
            (t * Order::C4.w(p, m, c), wq * dens)
        })
        .collect();
    let probability: f64 = shifts.iter().map(|s| s.1).sum();
    // reading axis relative to t, covering every shifted profile
    let (smin, smax) = shifts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), s| (l.min(s.0), h.max(s.0)));
    let s_lo = smin - 12.0 * sigma_nr;
    let s_hi = smax + 12.0 * sigma_nr;
    let ns = (((s_hi - s_lo) / (sigma_nr / 4.0)).ceil() as usize).max(2048);
    let ds = (s_hi - s_lo) / ns as f64;
    let norm = 1.0 / (2.0 * PI * sigma_nr * sigma_nr).sqrt();
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    // two passes: the mean first, then the spread about it
    for pass in 0..2 {
        let centre = if pass == 0 { 0.0 } else { m1 / m0 };
        let mut acc = 0.0;
        for k in 0..=ns {
            let s = s_lo + k as f64 * ds;
            let mut rho = 0.0;
            for &(shift, weight) in &shifts {
                rho += weight * norm * (-(s - shift).powi(2) / (2.0 * sigma_nr * sigma_nr)).exp();
            }
            let tw = if k == 0 || k == ns { 0.5 } else { 1.0 };
            rho *= tw * ds;
            if pass == 0 {
                m0 += rho;
                m1 += rho * s;
            } else {
                acc += rho * (s - centre).powi(2);
            }
        }
        if pass == 1 {
            m2 = acc;
        }
    }
    Ok(JointConditioned {
        probability,
        mean_t: t + m1 / m0,
        sigma_t: (m2 / m0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clocks::{build_quasi_ideal, build_qubit_phase, build_swp, default_n0};
    use crate::constants::{ATOMIC_MASS_UNIT, ELECTRON_MASS};
    use crate::kinematics::GaussianState;
    use crate::linalg::DensityMatrix;
    use crate::measurement::conditioned_sigma;

    fn electron(p0: f64) -> GaussianState {
        GaussianState::new(0.0, p0, 1e-9, ELECTRON_MASS).unwrap()
    }

    #[test]
    fn block_oracle_preserves_norm_and_momentum_density() {
        let clock = build_swp(4, 1e3).unwrap();
        let k: KinematicState = electron(2e-26).into();
        let phys = Physics::free().scaled(1e-3);
        let j0 = exact_evolve_g0(&clock, &k, 0.0, &phys, Order::C4).unwrap();
        let j1 = exact_evolve_g0(&clock, &k, 1.7e-3, &phys, Order::C4).unwrap();
        assert!(j1.norm_defect() < 1e-8);
        for (a, b) in j0.kinematic_density().iter().zip(j1.kinematic_density()) {
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn stationary_clock_is_unchanged() {
        let clock = build_swp(5, 1e3).unwrap();
        let mixed = clock.with_initial_state(DensityMatrix::maximally_mixed(5)).unwrap();
        let k: KinematicState = electron(0.0).into();
        let j = exact_evolve_g0(&mixed, &k, 2e-3, &Physics::free().scaled(1e-3), Order::C2).unwrap();
        let diff = j.reduced_clock().matrix() - mixed.rho0().matrix();
        assert!(crate::linalg::max_abs(&diff) < 1e-12);
    }

    #[test]
    fn sharp_momentum_runs_clock_for_rescaled_time() {
        let clock = build_swp(6, 1e3).unwrap();
        let p0 = 3e-23;
        let g = GaussianState::with_sigma_p(0.0, p0, 1e-34, ELECTRON_MASS).unwrap();
        let phys = Physics::free().scaled(1e-2);
        let t = 2.1e-3;
        let j = exact_evolve_g0(&clock, &g.into(), t, &phys, Order::C4).unwrap();
        let w = Order::C4.w(p0, ELECTRON_MASS, phys.c);
        let want = clock.rho_nr(t * (1.0 + w));
        let diff = j.reduced_clock().matrix() - want.matrix();
        assert!(crate::linalg::max_abs(&diff) < 1e-10, "{w}");
    }

    #[test]
    fn block_oracle_is_grid_independent() {
        let clock = build_quasi_ideal(16, 1e3, 4.0, 4.0, default_n0(16)).unwrap();
        let k: KinematicState = electron(1e-26).into();
        let phys = Physics::free().scaled(1e-3);
        let t = 0.3 * clock.period();
        let coarse = MomentumGrid::for_state(&k);
        let fine = MomentumGrid::new(coarse.p_min, coarse.p_max(), 2 * coarse.n).unwrap();
        let a = readout(&clock, &exact_evolve_g0_on(&clock, &k, t, &phys, Order::C2, &coarse).unwrap()).unwrap();
        let b = readout(&clock, &exact_evolve_g0_on(&clock, &k, t, &phys, Order::C2, &fine).unwrap()).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-12 * t);
        assert!((a.sigma - b.sigma).abs() < 1e-12 * a.sigma);
    }

    #[test]
    fn swp_mean_time_residual_scales() {
        let clock = build_swp(4, 1e3).unwrap();
        let k: KinematicState = electron(0.0).into();
        let t = 0.37 * clock.period();
        let r = verify_mean_time(&clock, &k, t, &Physics::free(), &[1.0, 2.0, 4.0]).unwrap();
        assert!(r.points[0].relative_residual.abs() < 1e-3, "{r:?}");
        assert!(r.passed, "{r:?}");
        let slow = verify_mean_time(&clock, &k, t, &Physics::free().scaled(1e-2), &[1.0, 2.0, 4.0]).unwrap();
        assert!(!slow.at_floor);
        let e = slow.relative_exponent.unwrap();
        assert!((e + 2.0).abs() < 0.1, "{slow:?}");
    }

    #[test]
    fn oracle_confirms_coherence_term() {
        let clock = build_swp(4, 1e3).unwrap();
        let base = electron(0.0);
        let cat = CatState::new(base, 2.0 * base.sigma_x, 0.5, 0.0).unwrap();
        let t = 0.37 * clock.period();
        let r = verify_coherence(&clock, &cat, t, &Physics::free().scaled(1e-2)).unwrap();
        assert!(r.relative_deviation < 1e-2, "{r:?}");
    }

    #[test]
    fn oracle_fit() {
        let pts: Vec<(f64, f64)> = [1.0f64, 2.0, 4.0].iter().map(|&c| (c, 3.0 * c.powf(-2.0))).collect();
        assert!((fit_exponent(&pts).unwrap() + 2.0).abs() < 1e-12);
        assert!(fit_exponent(&pts[..2]).is_none());
    }

    fn heavy(x0: f64) -> GaussianState {
        GaussianState::new(x0, 0.0, 1e-5, 27.0 * ATOMIC_MASS_UNIT).unwrap()
    }

    #[test]
    fn split_step_matches_blocks_at_zero_gravity() {
        let clock = build_swp(4, 2e4).unwrap();
        let k: KinematicState = heavy(0.0).into();
        let phys = Physics::new(0.0, 0.1).unwrap();
        let t = 0.37 * clock.period();
        let a = readout(&clock, &exact_evolve_g0(&clock, &k, t, &phys, Order::C2).unwrap()).unwrap();
        let j = exact_evolve_g(&clock, &k, t, &phys, None).unwrap();
        assert!(j.norm_defect() < 1e-8);
        let b = readout(&clock, &j).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-8 * t, "{a:?} {b:?}");
    }

    #[test]
    fn free_fall_follows_classical_trajectory() {
        let clock = build_qubit_phase(1.0).unwrap();
        let mixed = clock.with_initial_state(DensityMatrix::maximally_mixed(2)).unwrap();
        let g = GaussianState::new(0.0, 0.0, 1e-6, 1e4 * ATOMIC_MASS_UNIT).unwrap();
        let phys = Physics::default();
        let t = 1e-4;
        let j = exact_evolve_g(&mixed, &g.into(), t, &phys, None).unwrap();
        let want = -0.5 * 9.81 * t * t;
        assert!((j.mean_coordinate() - want).abs() < 1e-3 * want.abs(), "{} {want}", j.mean_coordinate());
    }

    #[test]
    fn split_step_converges_at_second_order() {
        // for a linear potential the splitting error is a phase growing as S^-2
        let k: KinematicState = heavy(1e-3).into();
        let phys = Physics::new(1e3, 0.1).unwrap();
        let t = 1e-4;
        let grid = PositionGrid::for_state(&k, t, &phys, 512).unwrap();
        let m = k.mass();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        let psi0: Vec<C64> = (0..grid.n).map(|j| heavy(1e-3).position_amplitude(grid.point(j))).collect();
        let base = 200;
        let run = |steps: u64| {
            let s = SplitStep { grid, m, g: phys.g, dt: t / steps as f64, steps, fwd: &fwd, inv: &inv };
            s.run(&psi0, Level { kappa: 0.0 })
        };
        let phase = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().arg();
        let (a, b, c) = (run(base), run(2 * base), run(4 * base));
        let ratio = phase(&a, &b) / phase(&b, &c);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn analytic_conditioning_matches_joint_density() {
        let g = electron(0.0);
        let phys = Physics::free();
        for (q, n, t) in [(1.0, 0, 1.0), (0.3, 2, 0.5), (5.0, 1, 2.0), (1e3, 0, 1.0)] {
            let sp = g.sigma_p();
            let b = MomentumBinning::new(q * sp, -10, 10, sp).unwrap();
            let analytic = conditioned_sigma(1e-9, &g, t, &phys, &b, n).unwrap();
            let joint = joint_conditioned_sigma(1e-9, &g, t, &phys, &b, n, 256).unwrap();
            assert!((analytic.sigma_t - joint.sigma_t).abs() < 1e-6 * analytic.sigma_t, "{analytic:?} {joint:?}");
            assert!((analytic.probability - joint.probability).abs() < 1e-6 * analytic.probability);
            assert!((analytic.mean_t - joint.mean_t).abs() < 1e-6 * analytic.sigma_t);
        }
    }

    #[test]
    fn surrogate_sigma_matches_ideal_term() {
        let b = precision_benchmark().unwrap();
        let clock = Clock::Model(b.clock.clone());
        let k: KinematicState = b.state.into();
        let pert = sigma_breakdown(&clock, &k, b.t, &b.physics).unwrap();
        assert!((pert.sigma_nr - 1e-9).abs() < 1e-9 * 1e-9);
        assert!((pert.sigma_i - 1e-4 * pert.sigma_nr).abs() < 1e-10 * pert.sigma_i);
        assert!(pert.sigma_ni.abs() < 1e-6 * pert.sigma_i);
        let exact = readout(&b.clock, &exact_evolve_g0(&b.clock, &k, b.t, &b.physics, Order::C4).unwrap()).unwrap();
        let ratio = (exact.sigma - pert.sigma_nr) / pert.sigma_i;
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
        let r = verify_sigma(&b.clock, &k, b.t, &b.physics, &[1.0, 2.0, 4.0]).unwrap();
        assert!(r.passed && !r.at_floor, "{r:?}");
        assert!((r.absolute_exponent.unwrap() + 6.0).abs() < 0.1);
        assert!((r.relative_exponent.unwrap() + 2.0).abs() < 0.1);
        // doubling c: the residual drops by about 2^6
        let shrink = r.points[0].residual / r.points[1].residual;
        assert!(shrink > 50.0, "{shrink}");
    }

    #[test]
    fn sigma_at_zero_time_is_uncoupled() {
        let b = precision_benchmark().unwrap();
        let k: KinematicState = b.state.into();
        let exact = readout(&b.clock, &exact_evolve_g0(&b.clock, &k, 0.0, &b.physics, Order::C4).unwrap()).unwrap();
        assert!((exact.sigma - b.clock.sigma_nr(0.0)).abs() < 1e-12 * exact.sigma);
    }
}

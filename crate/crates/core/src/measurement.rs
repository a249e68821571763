//! Coarse-grained momentum measurement and the clock-time spread conditioned
//! on its outcome, for an idealised clock with a Gaussian reading profile at
//! `g = 0`.
//!
//! Each momentum component shifts the reading by `t w(p)` with
//! `w(p) = -p^2/2m^2c^2 + 3p^4/8m^4c^4`, so conditioned on bin `n`
//!
//! `mu_{T|n} = t (1 + E[w | n])`, `sigma_{T|n}^2 = sigma_NR^2 + t^2 Var[w | n]`.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use libm::erfc;

use crate::error::{out_of_range, Error, Result};
use crate::kinematics::{GaussianState, Physics};
use crate::quadrature::adaptive;

/// Half-width of the momentum window, in `sigma_p`, outside which the
/// density is treated as zero.
pub const WINDOW: f64 = 40.0;
const PROB_TOL: f64 = 1e-12;
const EMPTY_BIN: f64 = 1e-15;

/// Bins `[(n - 1/2) dp, (n + 1/2) dp)` for `n` in `n_min..=n_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumBinning {
    pub delta_p: f64,
    pub n_min: i64,
    pub n_max: i64,
    /// `dp / sigma_p` of the state the binning was made for.
    pub q: f64,
}

impl MomentumBinning {
    pub fn new(delta_p: f64, n_min: i64, n_max: i64, sigma_p: f64) -> Result<Self> {
        if !(delta_p.is_finite() && delta_p > 0.0) {
            return Err(out_of_range("delta_p", format!("must be positive, got {delta_p}")));
        }
        if n_min > n_max {
            return Err(out_of_range("n_range", format!("{n_min} > {n_max}")));
        }
        if !(sigma_p > 0.0) {
            return Err(out_of_range("sigma_p", format!("must be positive, got {sigma_p}")));
        }
        Ok(MomentumBinning {
            delta_p,
            n_min,
            n_max,
            q: delta_p / sigma_p,
        })
    }

    /// Bins of width `q sigma_p` covering `p_bar +- 40 sigma_p`.
    pub fn covering(q: f64, state: &GaussianState) -> Result<Self> {
        let sp = state.sigma_p();
        let dp = q * sp;
        if !(dp.is_finite() && dp > 0.0) {
            return Err(out_of_range("q", format!("must be positive, got {q}")));
        }
        let lo = ((state.p_bar0 - WINDOW * sp) / dp + 0.5).floor() as i64;
        let hi = ((state.p_bar0 + WINDOW * sp) / dp + 0.5).floor() as i64;
        MomentumBinning::new(dp, lo, hi, sp)
    }

    pub fn bins(&self) -> impl Iterator<Item = i64> {
        self.n_min..=self.n_max
    }

    pub fn len(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edges(&self, n: i64) -> (f64, f64) {
        ((n as f64 - 0.5) * self.delta_p, (n as f64 + 0.5) * self.delta_p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionedResult {
    pub bin: i64,
    pub probability: f64,
    pub mean_t: f64,
    pub sigma_t: f64,
}

/// `Phi(b) - Phi(a)` for a standard normal, using whichever tail keeps
/// the difference accurate.
fn normal_mass(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        0.5 * (erfc(a / SQRT_2) - erfc(b / SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / SQRT_2) - erfc(-a / SQRT_2))
    } else {
        1.0 - 0.5 * erfc(-a / SQRT_2) - 0.5 * erfc(b / SQRT_2)
    }
}

/// Momentum probability of bin `n`; time independent at `g = 0`.
pub fn bin_probability(state: &GaussianState, binning: &MomentumBinning, n: i64) -> f64 {
    let (a, b) = binning.edges(n);
    let sp = state.sigma_p();
    normal_mass((a - state.p_bar0) / sp, (b - state.p_bar0) / sp)
}

/// `w` as a function of the standardised momentum `z`, divided by `scale`.
struct Coupling {
    p_bar: f64,
    sigma_p: f64,
    mc: f64,
    scale: f64,
}

impl Coupling {
    fn new(state: &GaussianState, physics: &Physics) -> Result<Self> {
        if physics.g != 0.0 {
            return Err(out_of_range("g", "momentum conditioning is defined for g = 0"));
        }
        if !(state.mass > 0.0) {
            return Err(out_of_range("mass", format!("must be positive, got {}", state.mass)));
        }
        let mc = state.mass * physics.c;
        let sp = state.sigma_p();
        Ok(Coupling {
            p_bar: state.p_bar0,
            sigma_p: sp,
            mc,
            scale: (state.p_bar0 * state.p_bar0 + sp * sp) / (mc * mc),
        })
    }

    fn w_scaled(&self, z: f64) -> f64 {
        let u = ((self.p_bar + self.sigma_p * z) / self.mc).powi(2);
        (-0.5 * u + 0.375 * u * u) / self.scale
    }

    fn z_of(&self, p: f64) -> f64 {
        (p - self.p_bar) / self.sigma_p
    }
}

fn density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Adaptive quadrature over unit-width pieces so the first Kronrod pass
/// cannot step over the peak of the density.
fn integrate(f: impl Fn(f64) -> f64, za: f64, zb: f64, tol: f64) -> f64 {
    let pieces = (zb - za).ceil().max(1.0) as usize;
    let h = (zb - za) / pieces as f64;
    let piece_tol = tol / pieces as f64;
    (0..pieces)
        .map(|k| {
            let a = za + k as f64 * h;
            let b = if k + 1 == pieces { zb } else { a + h };
            adaptive(&f, a, b, piece_tol)
        })
        .sum()
}

/// Probability, conditional mean and conditional variance of the scaled
/// coupling on `[za, zb]` (already clipped to the window).
fn w_stats(cpl: &Coupling, za: f64, zb: f64) -> (f64, f64, f64) {
    let p = normal_mass(za, zb);
    if p < EMPTY_BIN {
        return (p, 0.0, 0.0);
    }
    let m1 = integrate(|z| cpl.w_scaled(z) * density(z), za, zb, PROB_TOL * p) / p;
    let dev = |z: f64| (cpl.w_scaled(z) - m1).powi(2) * density(z);
    let rough = integrate(dev, za, zb, PROB_TOL * p);
    let var = if rough > 0.0 {
        integrate(dev, za, zb, (1e-10 * rough).min(PROB_TOL * p))
    } else {
        0.0
    } / p;
    (p, m1, var)
}

fn clip(za: f64, zb: f64) -> (f64, f64) {
    (za.max(-WINDOW), zb.min(WINDOW))
}

fn check_inputs(sigma_nr: f64, t: f64) -> Result<()> {
    if !(sigma_nr.is_finite() && sigma_nr > 0.0) {
        return Err(out_of_range("sigma_nr", format!("must be positive, got {sigma_nr}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(out_of_range("t", format!("must be non-negative, got {t}")));
    }
    Ok(())
}

fn assemble(bin: i64, sigma_nr: f64, t: f64, cpl: &Coupling, stats: (f64, f64, f64)) -> ConditionedResult {
    let (p, m1, var) = stats;
    let ts = t * cpl.scale;
    ConditionedResult {
        bin,
        probability: p,
        mean_t: t + ts * m1,
        sigma_t: (sigma_nr * sigma_nr + ts * ts * var).sqrt(),
    }
}

/// Clock-time mean and spread conditioned on finding the momentum in bin `n`.
pub fn conditioned_sigma(
    sigma_nr: f64,
    state: &GaussianState,
    t: f64,
    physics: &Physics,
    binning: &MomentumBinning,
    n: i64,
) -> Result<ConditionedResult> {
    check_inputs(sigma_nr, t)?;
    let cpl = Coupling::new(state, physics)?;
    let (a, b) = binning.edges(n);
    let (za, zb) = clip(cpl.z_of(a), cpl.z_of(b));
    let probability = bin_probability(state, binning, n);
    if probability < EMPTY_BIN || za >= zb {
        return Err(Error::EmptyBin {
            bin: n,
            probability,
        });
    }
    Ok(assemble(n, sigma_nr, t, &cpl, w_stats(&cpl, za, zb)))
}

/// Mean and spread with no momentum information: the full mixture of
/// shifted readings.
pub fn unconditioned_sigma(
    sigma_nr: f64,
    state: &GaussianState,
    t: f64,
    physics: &Physics,
) -> Result<ConditionedResult> {
    check_inputs(sigma_nr, t)?;
    let cpl = Coupling::new(state, physics)?;
    Ok(assemble(0, sigma_nr, t, &cpl, w_stats(&cpl, -WINDOW, WINDOW)))
}

/// Both sides of `sum_n P(n) [sigma_{T|n}^2 + (mu_{T|n} - mu_T)^2] = sigma_T^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TotalVariance {
    pub conditioned: f64,
    pub unconditioned: f64,
    pub relative_residual: f64,
    pub probability_sum: f64,
}

pub fn total_variance_check(
    sigma_nr: f64,
    state: &GaussianState,
    t: f64,
    physics: &Physics,
    binning: &MomentumBinning,
) -> Result<TotalVariance> {
    check_inputs(sigma_nr, t)?;
    let cpl = Coupling::new(state, physics)?;
    let whole = w_stats(&cpl, -WINDOW, WINDOW);
    let ts = t * cpl.scale;
    let mut within = 0.0;
    let mut between = 0.0;
    let mut probability_sum = 0.0;
    for n in binning.bins() {
        let (a, b) = binning.edges(n);
        let (za, zb) = clip(cpl.z_of(a), cpl.z_of(b));
        if za >= zb {
            continue;
        }
        let (p, m1, var) = w_stats(&cpl, za, zb);
        if p < EMPTY_BIN {
            continue;
        }
        probability_sum += p;
        within += p * var;
        between += p * (m1 - whole.1).powi(2);
    }
    let s2 = sigma_nr * sigma_nr;
    let conditioned = probability_sum * s2 + ts * ts * (within + between);
    let unconditioned = whole.0 * s2 + ts * ts * whole.0 * whole.2;
    Ok(TotalVariance {
        conditioned,
        unconditioned,
        relative_residual: (conditioned - unconditioned).abs() / unconditioned,
        probability_sum,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepParams {
    pub sigma_nr: f64,
    pub state: GaussianState,
    pub physics: Physics,
    pub qs: Vec<f64>,
    pub times: Vec<f64>,
    pub bin: i64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub q: f64,
    pub t: f64,
    pub result: ConditionedResult,
    pub sigma_nr: f64,
    pub sigma_unconditioned: f64,
}

/// Conditioned spread over the `(q, t)` grid, `q` major. Points run on the
/// current rayon pool; the output order does not depend on it.
pub fn sweep_conditioned(params: &SweepParams) -> Result<Vec<SweepRow>> {
    let points: Vec<(f64, f64)> = params
        .qs
        .iter()
        .flat_map(|&q| params.times.iter().map(move |&t| (q, t)))
        .collect();
    points
        .par_iter()
        .map(|&(q, t)| {
            let sp = params.state.sigma_p();
            let binning = MomentumBinning::new(q * sp, params.bin, params.bin, sp)?;
            let result =
                conditioned_sigma(params.sigma_nr, &params.state, t, &params.physics, &binning, params.bin)?;
            let all = unconditioned_sigma(params.sigma_nr, &params.state, t, &params.physics)?;
            Ok(SweepRow {
                q,
                t,
                result,
                sigma_nr: params.sigma_nr,
                sigma_unconditioned: all.sigma_t,
            })
        })
        .collect()
}

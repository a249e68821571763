//! Motional states of the clock's centre of mass.
//!
//! Constituent packets are minimum-uncertainty Gaussians. In momentum space a
//! packet centred at `x_j` with mean momentum `p_bar` reads
//! `psi_j(p) = (2 pi sigma_p^2)^{-1/4} exp(-(p - p_bar)^2 / 4 sigma_p^2) exp(-i x_j (p - p_bar) / hbar)`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::constants::{G_EARTH, HBAR, SPEED_OF_LIGHT};
use crate::error::{out_of_range, Error, Result};

/// External parameters shared by every formula: gravitational acceleration
/// and the speed of light entering the couplings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Physics {
    pub g: f64,
    pub c: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            g: G_EARTH,
            c: SPEED_OF_LIGHT,
        }
    }
}

impl Physics {
    pub fn new(g: f64, c: f64) -> Result<Self> {
        if !g.is_finite() {
            return Err(out_of_range("g", "must be finite"));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(out_of_range("c", format!("must be positive, got {c}")));
        }
        Ok(Physics { g, c })
    }

    pub fn free() -> Self {
        Physics {
            g: 0.0,
            c: SPEED_OF_LIGHT,
        }
    }

    /// Same physics with `c` multiplied by `lambda`.
    pub fn scaled(self, lambda: f64) -> Self {
        Physics {
            c: self.c * lambda,
            ..self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianState {
    pub x_bar0: f64,
    pub p_bar0: f64,
    pub sigma_x: f64,
    pub mass: f64,
}

impl GaussianState {
    pub fn new(x_bar0: f64, p_bar0: f64, sigma_x: f64, mass: f64) -> Result<Self> {
        if !(sigma_x.is_finite() && sigma_x > 0.0) {
            return Err(out_of_range("sigma_x", format!("must be positive, got {sigma_x}")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(out_of_range("mass", format!("must be positive, got {mass}")));
        }
        if !x_bar0.is_finite() || !p_bar0.is_finite() {
            return Err(out_of_range("x_bar0/p_bar0", "must be finite"));
        }
        Ok(GaussianState {
            x_bar0,
            p_bar0,
            sigma_x,
            mass,
        })
    }

    /// Gaussian with momentum spread `sigma_p` instead of position spread.
    pub fn with_sigma_p(x_bar0: f64, p_bar0: f64, sigma_p: f64, mass: f64) -> Result<Self> {
        if !(sigma_p.is_finite() && sigma_p > 0.0) {
            return Err(out_of_range("sigma_p", format!("must be positive, got {sigma_p}")));
        }
        Self::new(x_bar0, p_bar0, HBAR / (2.0 * sigma_p), mass)
    }

    pub fn sigma_p(&self) -> f64 {
        HBAR / (2.0 * self.sigma_x)
    }

    /// Momentum-space amplitude.
    pub fn amplitude(&self, p: f64) -> C64 {
        let sp = self.sigma_p();
        let u = p - self.p_bar0;
        let a = (2.0 * PI * sp * sp).powf(-0.25) * (-u * u / (4.0 * sp * sp)).exp();
        C64::from_polar(a, -self.x_bar0 * u / HBAR)
    }

    /// Position-space amplitude, consistent with [`Self::amplitude`].
    pub fn position_amplitude(&self, x: f64) -> C64 {
        let s = self.sigma_x;
        let y = x - self.x_bar0;
        let a = (2.0 * PI * s * s).powf(-0.25) * (-y * y / (4.0 * s * s)).exp();
        C64::from_polar(a, self.p_bar0 * x / HBAR)
    }
}

/// `(sqrt(alpha) psi_1 + exp(i theta) sqrt(1 - alpha) psi_2) / sqrt(N)`, with
/// `psi_1` centred on `base.x_bar0` and `psi_2` on `base.x_bar0 + delta_x0`.
/// A positive `delta_x0` therefore puts `psi_2` higher in the field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CatState {
    pub base: GaussianState,
    pub delta_x0: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl CatState {
    pub fn new(base: GaussianState, delta_x0: f64, alpha: f64, theta: f64) -> Result<Self> {
        if !(delta_x0.is_finite() && delta_x0 >= 0.0) {
            return Err(out_of_range("delta_x0", format!("must be non-negative, got {delta_x0}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(out_of_range("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        if !theta.is_finite() {
            return Err(out_of_range("theta", "must be finite"));
        }
        let cat = CatState {
            base,
            delta_x0,
            alpha,
            theta,
        };
        if cat.norm_factor() <= 1e-12 {
            return Err(out_of_range(
                "theta",
                "the two packets cancel (normalisation factor vanishes)",
            ));
        }
        Ok(cat)
    }

    pub fn first(&self) -> GaussianState {
        self.base
    }

    pub fn second(&self) -> GaussianState {
        GaussianState {
            x_bar0: self.base.x_bar0 + self.delta_x0,
            ..self.base
        }
    }

    /// `2 sqrt(alpha (1 - alpha))`
    fn beta(&self) -> f64 {
        2.0 * (self.alpha * (1.0 - self.alpha)).sqrt()
    }

    /// Overlap `<psi_1|psi_2> = exp(-(delta_x0 / 2 sigma_x)^2 / 2)`.
    pub fn overlap(&self) -> f64 {
        let r = self.delta_x0 / (2.0 * self.base.sigma_x);
        (-0.5 * r * r).exp()
    }

    pub fn norm_factor(&self) -> f64 {
        norm_factor(self)
    }

    /// `(N - 1) tan(theta) = beta * overlap * sin(theta)`, finite everywhere.
    pub fn interference_sine(&self) -> f64 {
        self.beta() * self.overlap() * self.theta.sin()
    }

    pub fn amplitude(&self, p: f64) -> C64 {
        let a = self.first().amplitude(p) * self.alpha.sqrt();
        let b = self.second().amplitude(p)
            * C64::from_polar((1.0 - self.alpha).sqrt(), self.theta);
        (a + b) / self.norm_factor().sqrt()
    }

    pub fn position_amplitude(&self, x: f64) -> C64 {
        let a = self.first().position_amplitude(x) * self.alpha.sqrt();
        let b = self.second().position_amplitude(x)
            * C64::from_polar((1.0 - self.alpha).sqrt(), self.theta);
        (a + b) / self.norm_factor().sqrt()
    }
}

/// `N = 1 + 2 sqrt(alpha (1 - alpha)) exp(-(delta_x0 / 2 sigma_x)^2 / 2) cos(theta)`
pub fn norm_factor(cat: &CatState) -> f64 {
    1.0 + cat.beta() * cat.overlap() * cat.theta.cos()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureState {
    components: Vec<(f64, GaussianState)>,
}

impl MixtureState {
    pub fn new(components: Vec<(f64, GaussianState)>) -> Result<Self> {
        if components.is_empty() {
            return Err(out_of_range("components", "mixture needs at least one component"));
        }
        if components.iter().any(|(w, _)| !(w.is_finite() && *w >= 0.0)) {
            return Err(out_of_range("weights", "must be non-negative"));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(out_of_range("weights", format!("must sum to 1, got {total}")));
        }
        let m = components[0].1.mass;
        if components.iter().any(|(_, g)| g.mass != m) {
            return Err(out_of_range("mass", "mixture components must share one mass"));
        }
        Ok(MixtureState { components })
    }

    /// The incoherent counterpart of a cat state.
    pub fn from_cat(cat: &CatState) -> Self {
        MixtureState {
            components: vec![(cat.alpha, cat.first()), (1.0 - cat.alpha, cat.second())],
        }
    }

    pub fn components(&self) -> &[(f64, GaussianState)] {
        &self.components
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KinematicState {
    Gaussian(GaussianState),
    Cat(CatState),
    Mixture(MixtureState),
}

impl From<GaussianState> for KinematicState {
    fn from(g: GaussianState) -> Self {
        KinematicState::Gaussian(g)
    }
}

impl From<CatState> for KinematicState {
    fn from(c: CatState) -> Self {
        KinematicState::Cat(c)
    }
}

impl From<MixtureState> for KinematicState {
    fn from(m: MixtureState) -> Self {
        KinematicState::Mixture(m)
    }
}

impl KinematicState {
    pub fn mass(&self) -> f64 {
        match self {
            KinematicState::Gaussian(g) => g.mass,
            KinematicState::Cat(c) => c.base.mass,
            KinematicState::Mixture(m) => m.components[0].1.mass,
        }
    }

    pub fn sigma_p(&self) -> f64 {
        match self {
            KinematicState::Gaussian(g) => g.sigma_p(),
            KinematicState::Cat(c) => c.base.sigma_p(),
            KinematicState::Mixture(m) => m
                .components
                .iter()
                .map(|(_, g)| g.sigma_p())
                .fold(0.0, f64::max),
        }
    }

    /// Pure states as a single weighted component, mixtures as their parts.
    pub fn pure_components(&self) -> Vec<(f64, PureState)> {
        match self {
            KinematicState::Gaussian(g) => vec![(1.0, PureState::Gaussian(*g))],
            KinematicState::Cat(c) => vec![(1.0, PureState::Cat(*c))],
            KinematicState::Mixture(m) => m
                .components
                .iter()
                .map(|(w, g)| (*w, PureState::Gaussian(*g)))
                .collect(),
        }
    }
}

/// A pure motional state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PureState {
    Gaussian(GaussianState),
    Cat(CatState),
}

impl PureState {
    pub fn amplitude(&self, p: f64) -> C64 {
        match self {
            PureState::Gaussian(g) => g.amplitude(p),
            PureState::Cat(c) => c.amplitude(p),
        }
    }

    pub fn position_amplitude(&self, x: f64) -> C64 {
        match self {
            PureState::Gaussian(g) => g.position_amplitude(x),
            PureState::Cat(c) => c.position_amplitude(x),
        }
    }

    pub fn base(&self) -> GaussianState {
        match self {
            PureState::Gaussian(g) => *g,
            PureState::Cat(c) => c.base,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinematicMoments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub mean_p2: f64,
    pub mean_p4: f64,
    pub var_p2: f64,
}

/// `E[(mu + v)^n]` for `v ~ N(0, var)` and complex `mu`.
fn shifted_gaussian_moment(mu: C64, var: f64, n: u32) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    let mut binom = 1.0;
    for j in 0..=n {
        if j % 2 == 0 {
            // E[v^j] = var^(j/2) (j-1)!!
            let dfact: f64 = (1..j).step_by(2).map(|k| k as f64).product();
            acc += mu.powu(n - j) * (binom * var.powi(j as i32 / 2) * dfact);
        }
        binom = binom * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

fn gaussian_moments(g: &GaussianState) -> KinematicMoments {
    let p = g.p_bar0;
    let s2 = g.sigma_p() * g.sigma_p();
    let mean_p2 = p * p + s2;
    let mean_p4 = p.powi(4) + 6.0 * p * p * s2 + 3.0 * s2 * s2;
    KinematicMoments {
        mean_x: g.x_bar0,
        mean_p: p,
        mean_p2,
        mean_p4,
        // 4 p^2 s2 + 2 s2^2, written to avoid cancellation
        var_p2: 4.0 * p * p * s2 + 2.0 * s2 * s2,
    }
}

fn cat_moments(c: &CatState) -> KinematicMoments {
    let sp = c.base.sigma_p();
    let var = sp * sp;
    let k = c.delta_x0 / HBAR;
    let n = c.norm_factor();
    let bo = c.beta() * c.overlap();
    let phase = C64::from_polar(1.0, c.theta);
    let shifted = C64::new(c.base.p_bar0, -k * var);
    let p = c.base.p_bar0;
    // <p^n> = [E(p^n) + beta Re(e^{i theta} E(p^n e^{-i k u}))] / N, split into
    // the unshifted Gaussian moment plus an interference correction
    let moment = |order: u32| -> f64 {
        let plain = shifted_gaussian_moment(C64::new(p, 0.0), var, order).re;
        let cross = (phase * shifted_gaussian_moment(shifted, var, order)).re;
        let excess = bo * (cross - plain * c.theta.cos());
        plain + excess / n
    };
    let mean_p = moment(1);
    let mean_p2 = moment(2);
    let mean_p4 = moment(4);
    let x1 = c.first().x_bar0;
    let x2 = c.second().x_bar0;
    let mean_x = (c.alpha * x1 + (1.0 - c.alpha) * x2 + bo * c.theta.cos() * 0.5 * (x1 + x2)) / n;
    KinematicMoments {
        mean_x,
        mean_p,
        mean_p2,
        mean_p4,
        var_p2: mean_p4 - mean_p2 * mean_p2,
    }
}

/// Exact first and second-order kinematic moments, including the
/// interference cross terms of a cat state.
pub fn moments(state: &KinematicState) -> KinematicMoments {
    match state {
        KinematicState::Gaussian(g) => gaussian_moments(g),
        KinematicState::Cat(c) => cat_moments(c),
        KinematicState::Mixture(m) => {
            let mut acc = KinematicMoments {
                mean_x: 0.0,
                mean_p: 0.0,
                mean_p2: 0.0,
                mean_p4: 0.0,
                var_p2: 0.0,
            };
            for (w, g) in &m.components {
                let gm = gaussian_moments(g);
                acc.mean_x += w * gm.mean_x;
                acc.mean_p += w * gm.mean_p;
                acc.mean_p2 += w * gm.mean_p2;
                acc.mean_p4 += w * gm.mean_p4;
            }
            acc.var_p2 = acc.mean_p4 - acc.mean_p2 * acc.mean_p2;
            acc
        }
    }
}

/// `R(t) = <-p^2/2m^2c^2 + g x/c^2 + p g t/m c^2> - g^2 t^2 / 3c^2`.
pub fn r_factor(state: &KinematicState, t: f64, physics: &Physics) -> f64 {
    let m = state.mass();
    let mo = moments(state);
    r_from_moments(&mo, m, t, physics)
}

pub(crate) fn r_from_moments(mo: &KinematicMoments, m: f64, t: f64, physics: &Physics) -> f64 {
    let c2 = physics.c * physics.c;
    let g = physics.g;
    -mo.mean_p2 / (2.0 * m * m * c2) + g * mo.mean_x / c2 + mo.mean_p * g * t / (m * c2)
        - g * g * t * t / (3.0 * c2)
}

/// Uniform momentum grid `p_k = p_min + k dp`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumGrid {
    pub p_min: f64,
    pub dp: f64,
    pub n: usize,
}

pub const DEFAULT_GRID_POINTS: usize = 1024;
pub const DEFAULT_GRID_HALF_WIDTH: f64 = 8.0;
const MIN_GRID_POINTS: usize = 512;
const FRINGE_SAMPLES: f64 = 8.0;

impl MomentumGrid {
    pub fn new(p_min: f64, p_max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(p_max > p_min) {
            return Err(out_of_range("grid", "needs p_max > p_min and at least 2 points"));
        }
        Ok(MomentumGrid {
            p_min,
            dp: (p_max - p_min) / (n - 1) as f64,
            n,
        })
    }

    /// `±8 sigma_p` around every component's mean momentum, at least 1024
    /// points, refined so a cat's fringes get 8 samples per period.
    pub fn for_state(state: &KinematicState) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut fringe = f64::INFINITY;
        for (_, pure) in state.pure_components() {
            let b = pure.base();
            let sp = b.sigma_p();
            lo = lo.min(b.p_bar0 - DEFAULT_GRID_HALF_WIDTH * sp);
            hi = hi.max(b.p_bar0 + DEFAULT_GRID_HALF_WIDTH * sp);
            if let PureState::Cat(c) = pure {
                if c.delta_x0 > 0.0 {
                    fringe = fringe.min(2.0 * PI * HBAR / c.delta_x0);
                }
            }
        }
        let mut n = DEFAULT_GRID_POINTS;
        if fringe.is_finite() {
            let needed = ((hi - lo) / (fringe / FRINGE_SAMPLES)).ceil() as usize + 1;
            n = n.max(needed);
        }
        MomentumGrid {
            p_min: lo,
            dp: (hi - lo) / (n - 1) as f64,
            n,
        }
    }

    pub fn point(&self, k: usize) -> f64 {
        self.p_min + k as f64 * self.dp
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.point(k)).collect()
    }

    pub fn p_max(&self) -> f64 {
        self.point(self.n - 1)
    }
}

/// Grid amplitudes of one pure component.
#[derive(Clone, Debug, PartialEq)]
pub struct GridComponent {
    pub weight: f64,
    pub amplitudes: Vec<C64>,
    /// `sum |psi|^2 dp` before any renormalisation.
    pub captured: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledState {
    pub grid: MomentumGrid,
    pub components: Vec<GridComponent>,
}

impl SampledState {
    /// Largest deviation of a component's discrete norm from one.
    pub fn norm_defect(&self) -> f64 {
        self.components
            .iter()
            .map(|c| (c.captured - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Sample the momentum wavefunction(s) on `grid`. Amplitudes are not
/// renormalised; the captured norm is reported per component.
pub fn to_grid(state: &KinematicState, grid: &MomentumGrid) -> Result<SampledState> {
    if grid.n < MIN_GRID_POINTS {
        return Err(out_of_range(
            "grid",
            format!("needs at least {MIN_GRID_POINTS} points, got {}", grid.n),
        ));
    }
    let mut components = Vec::new();
    for (weight, pure) in state.pure_components() {
        let amplitudes: Vec<C64> = (0..grid.n).map(|k| pure.amplitude(grid.point(k))).collect();
        let captured = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dp;
        let b = pure.base();
        let reach = DEFAULT_GRID_HALF_WIDTH * b.sigma_p();
        let too_narrow =
            grid.p_min > b.p_bar0 - reach * 0.999 || grid.p_max() < b.p_bar0 + reach * 0.999;
        if captured < 1.0 - 1e-6 || too_narrow {
            return Err(Error::GridTooNarrow { captured });
        }
        components.push(GridComponent {
            weight,
            amplitudes,
            captured,
        });
    }
    Ok(SampledState {
        grid: *grid,
        components,
    })
}

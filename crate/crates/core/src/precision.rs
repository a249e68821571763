//! Broadening of the clock reading by the relativistic coupling at `g = 0`.
//!
//! In each momentum block the clock runs for `t (1 + w(p))` instead of `t`,
//! with `w(p) = -p^2/2m^2c^2 + 3p^4/8m^4c^4`. Expanding the first two readout
//! moments to second order in `w` gives
//!
//! `sigma^2 = V + t a V' + (t^2 b / 2) V'' + t^2 f'^2 (b - a^2)`,
//!
//! where `f` and `V` are the mean and variance of the uncoupled reading at
//! time `t`, primes are time derivatives, `a = <w>` and `b = <w^2>`. For an
//! idealised clock (`f' = 1`, `V' = V'' = 0`) the broadening is
//! `t^2 (b - a^2) / 2 sigma_NR = t^2 sigma_{p^2}^2 / 8 sigma_NR m^4 c^4`.

use num_complex::Complex64 as C64;

use crate::clocks::{Clock, ClockModel};
use crate::error::{out_of_range, Error, Result};
use crate::kinematics::{moments, KinematicMoments, KinematicState, Physics};
use crate::constants::HBAR;
use crate::linalg::{commutator, max_abs, trace_of_product, ComplexMatrix};

const IMAG_TOL: f64 = 1e-10;

/// Moments of the order-`c^-4` coupling `w(p)` in the initial motional state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WMoments {
    pub mean_w: f64,
    /// `<p^4>/4m^4c^4`; the cross and `p^8` terms are `O((p/mc)^6)` and dropped.
    pub mean_w2: f64,
}

impl WMoments {
    /// `<w^2> - <w>^2` at the retained order, `sigma_{p^2}^2 / 4 m^4 c^4`.
    pub fn variance(&self) -> f64 {
        self.mean_w2 - self.mean_w * self.mean_w
    }
}

pub fn w_moments(kstate: &KinematicState, physics: &Physics) -> Result<WMoments> {
    let m = kstate.mass();
    if !(m > 0.0) {
        return Err(out_of_range("mass", format!("must be positive, got {m}")));
    }
    Ok(w_from_moments(&moments(kstate), m, physics.c))
}

fn w_from_moments(mo: &KinematicMoments, m: f64, c: f64) -> WMoments {
    let mc2 = (m * c).powi(2);
    WMoments {
        mean_w: -mo.mean_p2 / (2.0 * mc2) + 3.0 * mo.mean_p4 / (8.0 * mc2 * mc2),
        mean_w2: mo.mean_p4 / (4.0 * mc2 * mc2),
    }
}

fn check_sigma_nr(sigma_nr: f64) -> Result<()> {
    if sigma_nr.is_finite() && sigma_nr > 0.0 {
        Ok(())
    } else {
        Err(out_of_range(
            "sigma_nr",
            format!("the broadening expansion needs a positive readout spread, got {sigma_nr}"),
        ))
    }
}

/// `t^2 sigma_{p^2}^2 / (8 sigma_NR m^4 c^4)`: the broadening that survives for
/// an idealised clock.
pub fn sigma_ideal_term(
    kstate: &KinematicState,
    t: f64,
    sigma_nr: f64,
    physics: &Physics,
) -> Result<f64> {
    check_sigma_nr(sigma_nr)?;
    let m = kstate.mass();
    let mo = moments(kstate);
    let mc = m * physics.c;
    Ok(t * t * mo.var_p2 / (8.0 * sigma_nr * mc.powi(4)))
}

/// `t^2 (<p^4> + sigma_{p^2}^2) / (8 sigma_NR m^4 c^4)`, the form obtained when
/// the second-order Dyson term is taken without its `1/2!`. It over-predicts
/// the broadening (by 5/2 for a Gaussian at rest) and is kept for comparison.
pub fn sigma_ideal_term_doubled_w2(
    kstate: &KinematicState,
    t: f64,
    sigma_nr: f64,
    physics: &Physics,
) -> Result<f64> {
    check_sigma_nr(sigma_nr)?;
    let m = kstate.mass();
    let mo = moments(kstate);
    let mc = m * physics.c;
    Ok(t * t * (mo.mean_p4 + mo.var_p2) / (8.0 * sigma_nr * mc.powi(4)))
}

/// `tr(A rho)` for Hermitian `A`, refusing an imaginary part above
/// `IMAG_TOL` relative to the largest value `A` can take.
fn herm_trace(a: &ComplexMatrix, rho: &ComplexMatrix, quantity: &'static str) -> Result<f64> {
    let z = trace_of_product(a, rho);
    let scale = max_abs(a) * a.nrows() as f64;
    if z.im.abs() > IMAG_TOL * scale {
        return Err(Error::NotReal {
            quantity,
            imag: z.im,
        });
    }
    Ok(z.re)
}

/// `i[G, X]`, the Heisenberg time derivative of `X`.
fn idc(g: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    commutator(g, x) * C64::new(0.0, 1.0)
}

fn generator(clock: &ClockModel) -> ComplexMatrix {
    clock.hamiltonian().map(|z| z / HBAR)
}

/// The four contributions to the non-idealised broadening.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonIdealTerms {
    /// `a t V' / 2 sigma`
    pub drift: f64,
    /// `-(a t V')^2 / 8 sigma^3`
    pub drift_squared: f64,
    /// `-(a t)^2 (2 eps + eps^2) / 2 sigma`, `eps = tr E`
    pub mean_rate: f64,
    /// `(b t^2 / 4 sigma)(V'' + 4 eps + 2 eps^2)`
    pub curvature: f64,
}

impl NonIdealTerms {
    pub fn total(&self) -> f64 {
        self.drift + self.drift_squared + self.mean_rate + self.curvature
    }
}

/// Readout mean `f`, variance `V`, their time derivatives and `eps = f' - 1`.
struct Jet {
    var: f64,
    v1: f64,
    v2: f64,
    eps: f64,
}

fn terms_from_jet(jet: &Jet, w: &WMoments, t: f64) -> Result<NonIdealTerms> {
    let sigma = jet.var.max(0.0).sqrt();
    check_sigma_nr(sigma)?;
    let (a, b) = (w.mean_w, w.mean_w2);
    let eps = jet.eps;
    Ok(NonIdealTerms {
        drift: a * t * jet.v1 / (2.0 * sigma),
        drift_squared: -(a * t * jet.v1).powi(2) / (8.0 * sigma.powi(3)),
        mean_rate: -(a * t).powi(2) * (2.0 * eps + eps * eps) / (2.0 * sigma),
        curvature: b * t * t * (jet.v2 + 4.0 * eps + 2.0 * eps * eps) / (4.0 * sigma),
    })
}

fn check_free(physics: &Physics) -> Result<()> {
    if physics.g != 0.0 {
        return Err(out_of_range(
            "g",
            "the precision expansion is derived for g = 0",
        ));
    }
    Ok(())
}

/// Non-idealised broadening of a matrix clock, from exact derivatives of the
/// uncoupled readout moments (nested commutators with `H/hbar`). Valid for
/// any readout, including the qubit's continuous POVM.
pub fn sigma_nonideal_terms(
    clock: &ClockModel,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
) -> Result<NonIdealTerms> {
    check_free(physics)?;
    let w = w_moments(kstate, physics)?;
    let rho = clock.rho_nr(t);
    let r = rho.matrix();
    let g = generator(clock);
    let tm = clock.time_operator();
    let f = herm_trace(tm, r, "<T>")?;
    // moments about the current mean, so V and its derivatives carry no
    // cancellation against f^2
    let id = ComplexMatrix::identity(tm.nrows(), tm.ncols());
    let t2 = clock.second_moment_operator() - tm * C64::from(2.0 * f) + &id * C64::from(f * f);
    let dt = idc(&g, tm);
    let dt2 = idc(&g, &t2);
    let f1 = herm_trace(&dt, r, "d<T>/dt")?;
    let var = herm_trace(&t2, r, "<(T - f)^(2)>")?;
    let v1 = herm_trace(&dt2, r, "d<T^(2)>/dt")?;
    let v2 = herm_trace(&idc(&g, &dt2), r, "d2<T^(2)>/dt2")? - 2.0 * f1 * f1;
    let jet = Jet {
        var,
        v1,
        v2,
        eps: f1 - 1.0,
    };
    terms_from_jet(&jet, &w, t)
}

pub fn sigma_nonideal_term(
    clock: &ClockModel,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
) -> Result<f64> {
    Ok(sigma_nonideal_terms(clock, kstate, t, physics)?.total())
}

fn require_pvm(clock: &ClockModel) -> Result<()> {
    if clock.kind().is_discrete_pvm() {
        Ok(())
    } else {
        Err(Error::UnsupportedClock(format!(
            "{} readout is not projection-valued",
            clock.kind().name()
        )))
    }
}

/// The same broadening written with the error operator `e = i[G, T] - 1`
/// and `E = e rho` for a projection-valued readout (second moment `T^2`):
///
/// `V' = tr[(E + E^dag) T] - 2 <T> tr E`,
/// `V'' = 2 f' - 2 f'^2 + tr[i[G, eT + Te] rho] - 2 <T> tr[i[G, e] rho]`.
pub fn sigma_nonideal_brace(
    clock: &ClockModel,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
) -> Result<NonIdealTerms> {
    check_free(physics)?;
    require_pvm(clock)?;
    let w = w_moments(kstate, physics)?;
    let rho = clock.rho_nr(t);
    let r = rho.matrix();
    let g = generator(clock);
    let tm = clock.time_operator();
    let e = clock.error_generator();
    let mean_t = herm_trace(tm, r, "<T>")?;
    let eps = herm_trace(e, r, "tr E")?;
    // T about its current mean; the <T> tr E pieces then vanish
    let id = ComplexMatrix::identity(tm.nrows(), tm.ncols());
    let tc = tm - id * C64::from(mean_t);
    let var = herm_trace(&(&tc * &tc), r, "<(T - <T>)^2>")?;
    // tr[(E + E^dag) T] = tr[(Te + eT) rho]
    let et = e * &tc + &tc * e;
    let v1 = herm_trace(&et, r, "tr[(E + E^dag) T]")?;
    let f1 = 1.0 + eps;
    let v2 = 2.0 * f1 - 2.0 * f1 * f1 + herm_trace(&idc(&g, &et), r, "tr[i[G, eT + Te] rho]")?;
    let jet = Jet { var, v1, v2, eps };
    terms_from_jet(&jet, &w, t)
}

/// The non-idealised broadening with its last brace in the alternative form
/// `-(<W^2> t^2 / 2 sigma){2 tr E + i tr[(GeT - TeG) rho + GTE - E^dag T G] + 2i <T> tr[G(E - E^dag)]}`.
/// It disagrees with the expansion in sign and magnitude and is kept only to
/// document that.
pub fn sigma_nonideal_alt_brace(
    clock: &ClockModel,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
) -> Result<NonIdealTerms> {
    let mut terms = sigma_nonideal_brace(clock, kstate, t, physics)?;
    let w = w_moments(kstate, physics)?;
    let rho = clock.rho_nr(t);
    let r = rho.matrix();
    let g = generator(clock);
    let tm = clock.time_operator();
    let e = clock.error_generator();
    let big_e = e * r;
    let big_e_dag = big_e.adjoint();
    let i = C64::new(0.0, 1.0);
    let mean_t = trace_of_product(tm, r);
    let inner = (&g * e * tm - tm * e * &g) * r + &g * tm * &big_e - &big_e_dag * tm * &g;
    let brace = big_e.trace() * 2.0
        + i * inner.trace()
        + i * mean_t * (&g * (&big_e - &big_e_dag)).trace() * 2.0;
    let sigma = clock.reading_sigma(&rho);
    terms.curvature = -(w.mean_w2 * t * t / (2.0 * sigma)) * brace.re;
    Ok(terms)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecisionBreakdown {
    pub sigma_nr: f64,
    pub sigma_i: f64,
    pub sigma_ni: f64,
    pub total: f64,
    pub moments: KinematicMoments,
    pub w: WMoments,
}

/// `sigma_T = sigma_NR + sigma_I + sigma_NI` at `g = 0`.
pub fn sigma_breakdown(
    clock: &Clock,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
) -> Result<PrecisionBreakdown> {
    check_free(physics)?;
    let w = w_moments(kstate, physics)?;
    let mo = moments(kstate);
    let sigma_nr = clock.sigma_nr(t);
    let sigma_i = if kstate.sigma_p() == 0.0 {
        0.0
    } else {
        sigma_ideal_term(kstate, t, sigma_nr, physics)?
    };
    let sigma_ni = match clock {
        Clock::Idealised { .. } => 0.0,
        Clock::Model(m) => sigma_nonideal_term(m, kstate, t, physics)?,
    };
    Ok(PrecisionBreakdown {
        sigma_nr,
        sigma_i,
        sigma_ni,
        total: sigma_nr + sigma_i + sigma_ni,
        moments: mo,
        w,
    })
}

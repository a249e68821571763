//! Mean clock-time predictions: classical proper time, the first-order
//! quantum formula `<T>(t) = <T>_NR(t) + t R(t) (1 + tr E(t))`, and the
//! coherence contribution of a cat state.

use crate::clocks::Clock;
use crate::error::{out_of_range, Result};
use crate::kinematics::{moments, r_factor, CatState, KinematicState, MixtureState, Physics};

/// `tau - t` for a classical clock launched from height `x0` with velocity
/// `v0`: `[-v0^2/2c^2 + g x0/c^2 + v0 g t/c^2 - (g t/c)^2/3] t`.
///
/// The expansion assumes `|v0| << c`; see [`is_slow`].
pub fn classical_dilation(v0: f64, x0: f64, t: f64, physics: &Physics) -> f64 {
    let c2 = physics.c * physics.c;
    let g = physics.g;
    (-v0 * v0 / (2.0 * c2) + g * x0 / c2 + v0 * g * t / c2 - g * g * t * t / (3.0 * c2)) * t
}

/// Classical proper time elapsed along the trajectory after laboratory time `t`.
pub fn classical_proper_time(v0: f64, x0: f64, t: f64, physics: &Physics) -> f64 {
    t + classical_dilation(v0, x0, t, physics)
}

/// Whether `v0` is inside the low-velocity regime (`|v0| <= 0.01 c`).
pub fn is_slow(v0: f64, physics: &Physics) -> bool {
    v0.abs() <= 0.01 * physics.c
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DilationResult {
    pub t: f64,
    pub mean_t_nr: f64,
    pub r_factor: f64,
    pub error_trace: f64,
    /// `t R (1 + tr E)`, kept separately so differences between states do
    /// not lose precision against `t`.
    pub relativistic_shift: f64,
    pub mean_t: f64,
    /// Classical proper time along the mean trajectory.
    pub classical_tau: f64,
}

pub fn mean_clock_time(
    clock: &Clock,
    kstate: &KinematicState,
    t: f64,
    physics: &Physics,
) -> Result<DilationResult> {
    let m = kstate.mass();
    if !(m > 0.0) {
        return Err(out_of_range("mass", format!("must be positive, got {m}")));
    }
    let mean_t_nr = clock.mean_time_nr(t);
    let error_trace = clock.error_trace(t)?;
    let r = r_factor(kstate, t, physics);
    let relativistic_shift = t * r * (1.0 + error_trace);
    let mo = moments(kstate);
    Ok(DilationResult {
        t,
        mean_t_nr,
        r_factor: r,
        error_trace,
        relativistic_shift,
        mean_t: mean_t_nr + relativistic_shift,
        classical_tau: classical_proper_time(mo.mean_p / m, mo.mean_x, t, physics),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherenceResult {
    pub t_sup: f64,
    pub t_mix: f64,
    pub t_coh: f64,
}

/// Coherence contribution for an idealised (error-free) clock:
///
/// `T_coh = t/(2N) [(N-1)((dx/2 sigma_x)^2 sigma_v^2/c^2 - g dx (1-2 alpha)/c^2)
///          - 2 beta phi sin(theta) (sigma_v^2/c^2)(dx/hbar)(p - m g t)]`
///
/// with `(N-1) tan(theta)` written as `beta phi sin(theta)` so that
/// `cos(theta) = 0` is regular.
pub fn t_coh_closed_form(cat: &CatState, t: f64, physics: &Physics) -> f64 {
    let b = cat.base;
    let c2 = physics.c * physics.c;
    let n = cat.norm_factor();
    let ratio = cat.delta_x0 / (2.0 * b.sigma_x);
    let sv2 = (b.sigma_p() / b.mass).powi(2) / c2;
    let cos_part = (n - 1.0)
        * (ratio * ratio * sv2 - physics.g * cat.delta_x0 * (1.0 - 2.0 * cat.alpha) / c2);
    let k = cat.delta_x0 / crate::constants::HBAR;
    let sin_part =
        2.0 * cat.interference_sine() * sv2 * k * (b.p_bar0 - b.mass * physics.g * t);
    0.5 * t * (cos_part - sin_part) / n
}

/// Superposition, mixture and coherence times from the closed form, assuming
/// a good clock (the error operator is neglected).
pub fn t_coh(cat: &CatState, t: f64, physics: &Physics) -> Result<CoherenceResult> {
    let t_mix = mixture_time(cat, t, physics)?;
    let t_coh = t_coh_closed_form(cat, t, physics);
    Ok(CoherenceResult {
        t_sup: t_mix + t_coh,
        t_mix,
        t_coh,
    })
}

fn shift(kstate: &KinematicState, t: f64, physics: &Physics) -> Result<f64> {
    let clock = Clock::Idealised { sigma_nr: 0.0 };
    Ok(mean_clock_time(&clock, kstate, t, physics)?.relativistic_shift)
}

fn mixture_time(cat: &CatState, t: f64, physics: &Physics) -> Result<f64> {
    let s1 = shift(&cat.first().into(), t, physics)?;
    let s2 = shift(&cat.second().into(), t, physics)?;
    Ok(t + cat.alpha * s1 + (1.0 - cat.alpha) * s2)
}

/// Direct evaluation of the superposition and mixture times alongside the
/// closed-form coherence term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupMixReport {
    pub direct: CoherenceResult,
    pub closed_form_t_coh: f64,
    pub relative_deviation: f64,
}

/// `T_sup` from the mean-time formula with the cat state's own moments,
/// `T_mix` as the weighted sum over its two packets.
pub fn sup_vs_mix(cat: &CatState, t: f64, physics: &Physics) -> Result<SupMixReport> {
    let sup = shift(&KinematicState::Cat(*cat), t, physics)?;
    let mix_state = KinematicState::Mixture(MixtureState::from_cat(cat));
    let mix = shift(&mix_state, t, physics)?;
    let direct_coh = sup - mix;
    let closed = t_coh_closed_form(cat, t, physics);
    let scale = direct_coh.abs().max(closed.abs());
    let relative_deviation = if scale == 0.0 {
        0.0
    } else {
        (direct_coh - closed).abs() / scale
    };
    Ok(SupMixReport {
        direct: CoherenceResult {
            t_sup: t + sup,
            t_mix: t + mix,
            t_coh: direct_coh,
        },
        closed_form_t_coh: closed,
        relative_deviation,
    })
}

/// Separation `dx / sigma_x` in `[lo, hi]` that maximises `T_coh`, by
/// golden-section search.
pub fn max_coherence_separation(
    template: &CatState,
    t: f64,
    physics: &Physics,
    lo: f64,
    hi: f64,
) -> (f64, f64) {
    let sx = template.base.sigma_x;
    let f = |r: f64| {
        let cat = CatState {
            delta_x0: r * sx,
            ..*template
        };
        t_coh_closed_form(&cat, t, physics)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-10 * (1.0 + a.abs() + b.abs()) {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clocks::build_swp;
    use crate::constants::{ATOMIC_MASS_UNIT, HBAR, SPEED_OF_LIGHT};
    use crate::kinematics::GaussianState;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn aluminium_cat(alpha: f64, theta: f64, dx_over_sx: f64) -> CatState {
        let base = GaussianState::new(0.0, 0.0, 368e-12, 27.0 * ATOMIC_MASS_UNIT).unwrap();
        CatState::new(base, dx_over_sx * base.sigma_x, alpha, theta).unwrap()
    }

    #[test]
    fn classical_examples() {
        let phys = Physics::free();
        assert_eq!(classical_proper_time(0.0, 0.0, 2.5, &phys), 2.5);
        let earth = Physics::default();
        let d = classical_dilation(0.0, 0.0, 1.0, &earth);
        assert!((d + (9.81 / SPEED_OF_LIGHT).powi(2) / 3.0).abs() < 1e-30);
        assert!((d + 3.57e-16).abs() < 0.01e-16);
        let d = classical_dilation(1.0, 0.0, 1.0, &phys);
        assert!((d + 5.56e-18).abs() < 0.01e-18);
        assert!(is_slow(1e3, &phys) && !is_slow(1e7, &phys));
    }

    #[test]
    fn idealised_gaussian_reproduces_classical_bracket_plus_spread() {
        let phys = Physics::default();
        let g = GaussianState::new(0.3, 2e-24, 1e-7, 40.0 * ATOMIC_MASS_UNIT).unwrap();
        let t = 1.7;
        let r = mean_clock_time(&Clock::Idealised { sigma_nr: 1e-9 }, &g.into(), t, &phys).unwrap();
        let (m, c) = (g.mass, phys.c);
        let sp = g.sigma_p();
        let bracket_shift = (-(g.p_bar0.powi(2) + sp * sp) / (2.0 * m * m * c * c)
            + phys.g * g.x_bar0 / (c * c)
            + g.p_bar0 * phys.g * t / (m * c * c)
            - (phys.g * t / c).powi(2) / 3.0)
            * t;
        assert!((r.relativistic_shift - bracket_shift).abs() < 1e-13 * bracket_shift.abs());
        assert_eq!(r.mean_t, t + r.relativistic_shift);
    }

    #[test]
    fn sharp_momentum_limit_is_classical() {
        let phys = Physics::default();
        let m = 27.0 * ATOMIC_MASS_UNIT;
        let (v0, x0, t) = (0.8, 0.25, 1.2);
        let classical = classical_dilation(v0, x0, t, &phys);
        // sigma_p -> 0: the quantum correction is -sigma_p^2 t / 2 m^2 c^2
        let mut prev = f64::INFINITY;
        for sx in [1e-6, 1e-5, 1e-4] {
            let g = GaussianState::new(x0, v0 * m, sx, m).unwrap();
            let r = mean_clock_time(&Clock::Idealised { sigma_nr: 0.0 }, &g.into(), t, &phys).unwrap();
            let gap = (r.relativistic_shift - classical).abs();
            let predicted = g.sigma_p().powi(2) * t / (2.0 * m * m * phys.c * phys.c);
            assert!((gap - predicted).abs() < 1e-10 * predicted + 1e-14 * classical.abs());
            assert!(gap < prev);
            prev = gap;
            assert!((r.mean_t - (t + classical)).abs() < 1e-14 * t);
            assert!((r.classical_tau - (t + classical)).abs() < 1e-15 * t);
        }
    }

    #[test]
    fn swp_focusing_time_cancels_relativistic_term() {
        let clock = Clock::from(build_swp(4, 1e3).unwrap());
        let g = GaussianState::new(1.0, 1e-24, 1e-8, ATOMIC_MASS_UNIT).unwrap();
        let tm = 2.0 * PI / 1e3 / 4.0;
        let r = mean_clock_time(&clock, &g.into(), tm, &Physics::default()).unwrap();
        assert!((r.error_trace + 1.0).abs() < 1e-10);
        assert!(r.relativistic_shift.abs() <= 1e-10 * (r.r_factor * tm).abs());
        assert!((r.mean_t - r.mean_t_nr).abs() <= 1e-10 * (r.r_factor * tm).abs());
    }

    #[test]
    fn mean_clock_time_checks_mass() {
        let g = GaussianState {
            x_bar0: 0.0,
            p_bar0: 0.0,
            sigma_x: 1.0,
            mass: 0.0,
        };
        let clock = Clock::Idealised { sigma_nr: 0.0 };
        assert!(mean_clock_time(&clock, &g.into(), 1.0, &Physics::default()).is_err());
    }

    #[test]
    fn coherence_vanishes_without_separation() {
        let cat = aluminium_cat(0.3, 0.4, 0.0);
        let r = t_coh(&cat, 1.0, &Physics::default()).unwrap();
        assert_eq!(r.t_coh, 0.0);
        assert_eq!(r.t_sup, r.t_mix);
    }

    #[test]
    fn balanced_cat_has_no_gravity_term() {
        let cat = aluminium_cat(0.5, 0.0, 4.0);
        let a = t_coh_closed_form(&cat, 1.0, &Physics::default());
        let b = t_coh_closed_form(&cat, 1.0, &Physics::new(0.0, SPEED_OF_LIGHT).unwrap());
        assert!((a - b).abs() < 1e-15 * a.abs());
        // only the sigma_v^2 term remains
        let n = cat.norm_factor();
        let sv = cat.base.sigma_p() / cat.base.mass;
        let want = 0.5 * (n - 1.0) / n * 4.0 * sv * sv / SPEED_OF_LIGHT.powi(2);
        assert!((a - want).abs() < 1e-14 * want);
    }

    #[test]
    fn aluminium_example_value() {
        let cat = aluminium_cat(0.5, 0.0, 2.0);
        let r = t_coh(&cat, 1.0, &Physics::default()).unwrap();
        // frozen from an independent desk evaluation with sigma_p = hbar / 2 sigma_x
        let sp = HBAR / (2.0 * 368e-12);
        let sv2 = (sp / (27.0 * ATOMIC_MASS_UNIT)).powi(2) / SPEED_OF_LIGHT.powi(2);
        let phi = (-0.5f64).exp();
        let want = 0.5 * phi / (1.0 + phi) * sv2;
        assert!((r.t_coh - want).abs() < 1e-14 * want);
        assert!((r.t_coh - 2.146e-17).abs() < 0.005e-17, "{}", r.t_coh);
    }

    #[test]
    fn single_component_cat_has_no_coherence() {
        let cat = aluminium_cat(1.0, 0.3, 3.0);
        let r = sup_vs_mix(&cat, 1.0, &Physics::default()).unwrap();
        assert_eq!(r.direct.t_sup, r.direct.t_mix);
        assert_eq!(r.closed_form_t_coh, 0.0);
        let alone = mean_clock_time(
            &Clock::Idealised { sigma_nr: 0.0 },
            &cat.first().into(),
            1.0,
            &Physics::default(),
        )
        .unwrap();
        assert_eq!(r.direct.t_sup, alone.mean_t);
    }

    #[test]
    fn direct_and_closed_forms_agree() {
        let cat = aluminium_cat(0.5, 0.0, 4.0);
        let r = sup_vs_mix(&cat, 1.0, &Physics::free()).unwrap();
        assert!(r.relative_deviation < 1e-10, "{r:?}");
    }

    #[test]
    fn quarter_phase_is_regular() {
        let base = GaussianState::new(0.0, 2e-25, 368e-12, 27.0 * ATOMIC_MASS_UNIT).unwrap();
        let cat = CatState::new(base, 3.0 * base.sigma_x, 0.35, PI / 2.0).unwrap();
        assert!((cat.norm_factor() - 1.0).abs() < 1e-15);
        let r = sup_vs_mix(&cat, 0.7, &Physics::default()).unwrap();
        assert!(r.closed_form_t_coh.is_finite() && r.closed_form_t_coh != 0.0);
        assert!(r.relative_deviation < 1e-10, "{r:?}");
    }

    #[test]
    fn coherence_peaks_at_intermediate_separation() {
        let template = aluminium_cat(0.5, 0.0, 1.0);
        let phys = Physics::default();
        let (r, best) = max_coherence_separation(&template, 1.0, &phys, 0.1, 8.0);
        assert!(r > 0.2 && r < 7.9, "{r}");
        for probe in [0.1, 0.5, 7.0, 8.0] {
            let cat = CatState {
                delta_x0: probe * template.base.sigma_x,
                ..template
            };
            assert!(t_coh_closed_form(&cat, 1.0, &phys) < best);
        }
        let far = CatState {
            delta_x0: 40.0 * template.base.sigma_x,
            ..template
        };
        assert!(t_coh_closed_form(&far, 1.0, &phys) < 1e-40);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn coherence_identity(alpha in 0.01f64..1.0, theta in -PI..PI, ratio in 0.1f64..8.0,
                              g in -20.0f64..20.0, p in -2.0f64..2.0, t in 0.1f64..2.0) {
            let base = GaussianState::new(0.0, 0.0, 368e-12, 27.0 * ATOMIC_MASS_UNIT).unwrap();
            let base = GaussianState { p_bar0: p * base.sigma_p(), ..base };
            let Ok(cat) = CatState::new(base, ratio * base.sigma_x, alpha, theta) else { return Ok(()); };
            prop_assume!(cat.norm_factor() > 1e-3);
            let phys = Physics::new(g, SPEED_OF_LIGHT).unwrap();
            let r = sup_vs_mix(&cat, t, &phys).unwrap();
            prop_assert!(r.relative_deviation < 1e-10, "{:?}", r);
            let c = t_coh(&cat, t, &phys).unwrap();
            prop_assert!((c.t_sup - (c.t_mix + c.t_coh)).abs() <= 1e-12 * c.t_sup.abs());
        }
    }
}

//! Plane-strain isotropic elasticity and the regularized friction family.
//!
//! # Elasticity
//!
//! Isotropic Hooke law under plane strain,
//!
//! ```text
//! sigma(e) = lambda * tr(e) * I + 2 * mu * e,
//! lambda = E*nu / ((1+nu)*(1-2*nu)),   mu = E / (2*(1+nu)).
//! ```
//!
//! # Friction
//!
//! The tangential traction on the contact boundary is bounded by a
//! slip-weakening friction bound
//!
//! ```text
//! mu_b(t) = (a - b) * exp(-decay * t) + b,      a >= b >= 0,  decay >= 0,
//! ```
//!
//! where `a` is the static bound at zero slip and `b` the kinetic bound
//! reached asymptotically as slip grows.  The (nonsmooth) friction dissipation
//! density is `j(z) = integral_0^{|z|} mu_b(t) dt`; its derivative jumps at
//! zero slip.  To make the state problem Newton-friendly the absolute value is
//! replaced inside a band `|s| <= w` (`w` = `reg_width`) by the quartic
//!
//! ```text
//! smooth_abs(s) = -s^4/(8 w^3) + 3 s^2/(4 w) + 3 w/8,
//! ```
//!
//! which matches `|s|` in value and slope at `|s| = w`.  All of `j`, `dj`,
//! `d2j` below are the closed forms of the regularized density and its first
//! two derivatives; `dj` inherits the Coulomb-consistency bound
//! `|dj(s)| <= a` for every `s`.

use crate::error::Error;
use crate::Result;

/// Symmetric 2x2 tensor (strain or stress) stored by independent components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, yy: 0.0, xy: 0.0 };

    pub fn identity() -> Sym2 {
        Sym2 { xx: 1.0, yy: 1.0, xy: 0.0 }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Full double contraction `self : other` (the xy component counts twice).
    pub fn ddot(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }
}

/// Plane-strain isotropic material with precomputed Lame constants.
#[derive(Debug, Clone, Copy)]
pub struct Elasticity {
    pub youngs: f64,
    pub poisson: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl Elasticity {
    /// Build from Young's modulus and Poisson ratio.
    ///
    /// Requires `E > 0` and `nu` in `(-1, 0.5)` so both Lame constants are
    /// finite and `mu > 0`.
    pub fn new(youngs: f64, poisson: f64) -> Result<Elasticity> {
        if !(youngs > 0.0) {
            return Err(Error::config(format!("youngs modulus must be positive, got {youngs}")));
        }
        if !(poisson > -1.0 && poisson < 0.5) {
            return Err(Error::config(format!(
                "poisson ratio must lie in (-1, 0.5), got {poisson}"
            )));
        }
        let lambda = youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        let mu = youngs / (2.0 * (1.0 + poisson));
        Ok(Elasticity { youngs, poisson, lambda, mu })
    }

    /// Hooke law `sigma = lambda tr(e) I + 2 mu e`.
    pub fn stress(&self, e: &Sym2) -> Sym2 {
        let t = self.lambda * e.trace();
        Sym2 { xx: t + 2.0 * self.mu * e.xx, yy: t + 2.0 * self.mu * e.yy, xy: 2.0 * self.mu * e.xy }
    }

    /// Strain energy density `1/2 sigma(e) : e`.
    pub fn energy_density(&self, e: &Sym2) -> f64 {
        0.5 * self.stress(e).ddot(e)
    }
}

/// Friction bound parameters plus the regularization band width.
#[derive(Debug, Clone, Copy)]
pub struct FrictionParams {
    /// Static friction bound `a = mu_b(0)`.
    pub static_bound: f64,
    /// Kinetic bound `b = lim mu_b(t)` for large slip.
    pub kinetic_bound: f64,
    /// Exponential decay rate from static to kinetic bound.
    pub decay: f64,
    /// Half-width of the smoothing band around zero slip.
    pub reg_width: f64,
}

impl FrictionParams {
    /// Validates `a >= b >= 0`, `decay >= 0`, `reg_width > 0`.
    ///
    /// `a = b` gives a constant bound; `a = b = 0` disables friction
    /// entirely (the state problem becomes linear).
    pub fn new(static_bound: f64, kinetic_bound: f64, decay: f64, reg_width: f64) -> Result<Self> {
        if !(static_bound >= kinetic_bound && kinetic_bound >= 0.0) {
            return Err(Error::config(format!(
                "friction bounds must satisfy a >= b >= 0, got a={static_bound}, b={kinetic_bound}"
            )));
        }
        if !(decay >= 0.0) {
            return Err(Error::config(format!("friction decay must be >= 0, got {decay}")));
        }
        if !(reg_width > 0.0) {
            return Err(Error::config(format!("regularization width must be > 0, got {reg_width}")));
        }
        Ok(FrictionParams { static_bound, kinetic_bound, decay, reg_width })
    }

    /// Whether the bound is identically zero (frictionless contact).
    pub fn is_zero(&self) -> bool {
        self.static_bound == 0.0
    }

    /// Frictionless contact (every friction term vanishes identically).
    pub fn zero() -> Self {
        FrictionParams { static_bound: 0.0, kinetic_bound: 0.0, decay: 0.0, reg_width: 1e-3 }
    }

    /// Friction bound `mu_b(t) = (a-b) e^{-decay t} + b` for slip magnitude `t >= 0`.
    pub fn bound(&self, t: f64) -> f64 {
        (self.static_bound - self.kinetic_bound) * (-self.decay * t).exp() + self.kinetic_bound
    }

    /// Smoothed absolute value: `|s|` outside the band, quartic inside.
    pub fn smooth_abs(&self, s: f64) -> f64 {
        let w = self.reg_width;
        let r = s.abs();
        if r > w {
            r
        } else {
            let s2 = s * s;
            -s2 * s2 / (8.0 * w * w * w) + 3.0 * s2 / (4.0 * w) + 3.0 * w / 8.0
        }
    }

    /// Derivative of [`smooth_abs`](Self::smooth_abs): `sign(s)` outside the
    /// band, the cubic `q(s) = -s^3/(2 w^3) + 3 s/(2 w)` inside.
    fn smooth_abs_prime(&self, s: f64) -> f64 {
        let w = self.reg_width;
        if s.abs() > w {
            s.signum()
        } else {
            -s * s * s / (2.0 * w * w * w) + 3.0 * s / (2.0 * w)
        }
    }

    /// Second derivative of the smoothed absolute value inside the band,
    /// `q'(s) = -3 s^2/(2 w^3) + 3/(2 w)`; zero outside.
    fn smooth_abs_second(&self, s: f64) -> f64 {
        let w = self.reg_width;
        if s.abs() > w {
            0.0
        } else {
            -3.0 * s * s / (2.0 * w * w * w) + 3.0 / (2.0 * w)
        }
    }

    /// Regularized friction dissipation density
    /// `j(s) = integral_0^{smooth_abs(s)} mu_b(t) dt`, in closed form:
    ///
    /// ```text
    /// j(s) = (a-b) * (1 - exp(-decay * theta)) / decay + b * theta   (decay > 0)
    /// j(s) = a * theta                                               (decay = 0)
    /// ```
    ///
    /// with `theta = smooth_abs(s)`.
    pub fn j(&self, s: f64) -> f64 {
        let theta = self.smooth_abs(s);
        let (a, b) = (self.static_bound, self.kinetic_bound);
        if self.decay > 0.0 {
            (a - b) * (-(-self.decay * theta).exp_m1()) / self.decay + b * theta
        } else {
            a * theta
        }
    }

    /// First derivative `dj(s) = mu_b(smooth_abs(s)) * smooth_abs'(s)`.
    ///
    /// Satisfies `|dj(s)| <= a` for all `s` and `dj(0) = 0`.
    pub fn dj(&self, s: f64) -> f64 {
        self.bound(self.smooth_abs(s)) * self.smooth_abs_prime(s)
    }

    /// Second derivative of the regularized density.
    ///
    /// Outside the band: `-decay * (a-b) * exp(-decay |s|)` (slip-weakening
    /// softening, non-positive).  Inside the band the product rule on `dj`
    /// gives
    ///
    /// ```text
    /// (a-b) * (q'(s) - decay * q(s)^2) * exp(-decay * smooth_abs(s)) + b * q'(s).
    /// ```
    ///
    /// The two branches agree at `|s| = reg_width` (the density is C^2).
    pub fn d2j(&self, s: f64) -> f64 {
        let (a, b) = (self.static_bound, self.kinetic_bound);
        let w = self.reg_width;
        if s.abs() > w {
            -self.decay * (a - b) * (-self.decay * s.abs()).exp()
        } else {
            let q = self.smooth_abs_prime(s);
            let qp = self.smooth_abs_second(s);
            (a - b) * (qp - self.decay * q * q) * (-self.decay * self.smooth_abs(s)).exp() + b * qp
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Paper-scale reference parameters used throughout the tests.
    fn reference_friction() -> FrictionParams {
        FrictionParams::new(4e-3, 2e-3, 100.0, 1e-3).unwrap()
    }

    // ---- independent oracles -------------------------------------------------

    /// Adaptive Simpson quadrature, tolerance-controlled, used as the
    /// integral oracle for the closed-form dissipation density.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
        fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
            (b - a) / 6.0 * (fa + 4.0 * fm + fb)
        }
        fn recurse(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = simpson(a, m, fa, flm, fm);
            let right = simpson(m, b, fm, frm, fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let fa = f(lo);
        let fb = f(hi);
        let fm = f(0.5 * (lo + hi));
        let whole = simpson(lo, hi, fa, fm, fb);
        recurse(f, lo, hi, fa, fm, fb, whole, tol, 40)
    }

    fn central_diff(f: &dyn Fn(f64) -> f64, s: f64, h: f64) -> f64 {
        (f(s + h) - f(s - h)) / (2.0 * h)
    }

    // ---- elasticity ----------------------------------------------------------

    #[test]
    fn lame_constants_reference_values() {
        let el = Elasticity::new(1.0, 0.3).unwrap();
        assert!((el.lambda - 0.576923).abs() < 1e-6, "lambda = {}", el.lambda);
        assert!((el.mu - 0.384615).abs() < 1e-6, "mu = {}", el.mu);
    }

    #[test]
    fn stress_of_unit_dilatation() {
        let el = Elasticity::new(1.0, 0.3).unwrap();
        let s = el.stress(&Sym2::identity());
        let expect = 2.0 * el.lambda + 2.0 * el.mu; // lambda*tr(I) + 2*mu on the diagonal
        assert!((s.xx - expect).abs() < 1e-12);
        assert!((s.yy - expect).abs() < 1e-12);
        assert!((expect - 1.9231).abs() < 1e-4);
        assert_eq!(s.xy, 0.0);
    }

    #[test]
    fn stress_of_pure_shear() {
        let el = Elasticity::new(1.0, 0.3).unwrap();
        let s = el.stress(&Sym2 { xx: 0.0, yy: 0.0, xy: 0.5 });
        assert_eq!(s.xx, 0.0);
        assert_eq!(s.yy, 0.0);
        assert!((s.xy - el.mu).abs() < 1e-12);
        assert!((s.xy - 0.384615).abs() < 1e-6);
    }

    #[test]
    fn rejects_illegal_moduli() {
        assert!(Elasticity::new(0.0, 0.3).is_err());
        assert!(Elasticity::new(1.0, 0.5).is_err());
        assert!(Elasticity::new(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn stress_is_linear_in_strain(
            exx in -2.0f64..2.0, eyy in -2.0f64..2.0, exy in -2.0f64..2.0,
            c in -3.0f64..3.0,
        ) {
            let el = Elasticity::new(1.0, 0.3).unwrap();
            let e = Sym2 { xx: exx, yy: eyy, xy: exy };
            let scaled = el.stress(&Sym2 { xx: c * exx, yy: c * eyy, xy: c * exy });
            let direct = el.stress(&e);
            prop_assert!((scaled.xx - c * direct.xx).abs() < 1e-12 * (1.0 + direct.xx.abs()));
            prop_assert!((scaled.yy - c * direct.yy).abs() < 1e-12 * (1.0 + direct.yy.abs()));
            prop_assert!((scaled.xy - c * direct.xy).abs() < 1e-12 * (1.0 + direct.xy.abs()));
        }
    }

    // ---- friction bound and smoothing ---------------------------------------

    #[test]
    fn bound_reference_value() {
        let fp = reference_friction();
        // (a-b) e^{-100*0.01} + b with a=4e-3, b=2e-3
        let expect = 2e-3 * (-1.0f64).exp() + 2e-3;
        assert!((fp.bound(0.01) - expect).abs() < 1e-18);
        assert!((fp.bound(0.01) - 2.7357588823e-3).abs() < 1e-12);
    }

    #[test]
    fn bound_is_monotone_decreasing_to_kinetic() {
        let fp = reference_friction();
        assert_eq!(fp.bound(0.0), fp.static_bound);
        let mut prev = fp.bound(0.0);
        for k in 1..200 {
            let t = k as f64 * 1e-3;
            let v = fp.bound(t);
            assert!(v <= prev);
            assert!(v >= fp.kinetic_bound);
            prev = v;
        }
        assert!((fp.bound(1.0) - fp.kinetic_bound).abs() < 1e-18 + 2e-3 * (-100.0f64).exp());
    }

    #[test]
    fn smooth_abs_anchor_values() {
        let fp = reference_friction();
        let w = fp.reg_width;
        assert!((fp.smooth_abs(0.0) - 3.0 * w / 8.0).abs() < 1e-18);
        // value and slope match |s| at the band edge
        assert!((fp.smooth_abs(w) - w).abs() < 1e-18);
        assert!((fp.smooth_abs(-w) - w).abs() < 1e-18);
        assert_eq!(fp.smooth_abs(2.0 * w), 2.0 * w);
        assert_eq!(fp.smooth_abs(-5.0 * w), 5.0 * w);
    }

    proptest! {
        #[test]
        fn smooth_abs_dominates_and_is_even(s in -5e-3f64..5e-3) {
            let fp = reference_friction();
            prop_assert!(fp.smooth_abs(s) >= s.abs());
            prop_assert!(fp.smooth_abs(s) <= s.abs() + 3.0 * fp.reg_width / 8.0);
            prop_assert_eq!(fp.smooth_abs(s), fp.smooth_abs(-s));
        }
    }

    // ---- dissipation density: closed form vs quadrature oracle ---------------

    #[test]
    fn j_matches_quadrature_oracle() {
        // Oracle: j(s) = integral of the bound from 0 to smooth_abs(s),
        // integrated numerically with adaptive Simpson.  The closed form must
        // agree to 1e-12 on a sweep through and beyond the band, for decaying,
        // constant, and frictionless parameter sets.
        let params = [
            FrictionParams::new(4e-3, 2e-3, 100.0, 1e-3).unwrap(),
            FrictionParams::new(4e-3, 2e-3, 0.0, 1e-3).unwrap(),
            FrictionParams::new(3e-3, 3e-3, 50.0, 2e-3).unwrap(),
            FrictionParams::new(0.0, 0.0, 100.0, 1e-3).unwrap(),
            FrictionParams::new(2.0, 0.5, 3.0, 0.1).unwrap(),
        ];
        for fp in params {
            for k in -40..=40 {
                let s = k as f64 * 0.125 * fp.reg_width;
                let theta = fp.smooth_abs(s);
                let oracle = adaptive_simpson(&|t| fp.bound(t), 0.0, theta, 1e-15);
                assert!(
                    (fp.j(s) - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()),
                    "closed form {} vs quadrature {} at s={s}",
                    fp.j(s),
                    oracle
                );
            }
        }
    }

    #[test]
    fn j_reference_value_at_zero() {
        let fp = reference_friction();
        // theta(0) = 3w/8 = 3.75e-4; j(0) = (a-b)(1-e^{-decay*theta})/decay + b*theta
        let theta: f64 = 3.75e-4;
        let expect = 2e-5 * (1.0 - (-100.0 * theta).exp()) + 2e-3 * theta;
        assert!((fp.j(0.0) - expect).abs() < 1e-15, "j(0) = {}", fp.j(0.0));
        assert!(fp.j(0.0) > 0.0);
    }

    #[test]
    fn dj_matches_central_difference_of_j() {
        let fp = reference_friction();
        let w = fp.reg_width;
        let h = 1e-7 * w;
        for k in 0..10_000 {
            let s = -5.0 * w + (k as f64 + 0.5) * (10.0 * w / 10_000.0);
            if ((s.abs() - w).abs()) < 1e-3 * w {
                continue; // skip the immediate neighborhood of the band edge
            }
            let fd = central_diff(&|x| fp.j(x), s, h);
            let val = fp.dj(s);
            let denom = val.abs().max(1e-12);
            assert!(
                (fd - val).abs() / denom < 1e-5,
                "s={s}: fd={fd}, dj={val}, rel={}",
                (fd - val).abs() / denom
            );
        }
    }

    #[test]
    fn d2j_matches_central_difference_of_dj() {
        let fp = reference_friction();
        let w = fp.reg_width;
        let h = 1e-6 * w;
        for k in 0..10_000 {
            let s = -5.0 * w + (k as f64 + 0.5) * (10.0 * w / 10_000.0);
            if ((s.abs() - w).abs()) < 1e-3 * w {
                continue;
            }
            let fd = central_diff(&|x| fp.dj(x), s, h);
            let val = fp.d2j(s);
            let denom = val.abs().max(1e-9);
            assert!(
                (fd - val).abs() / denom < 1e-4,
                "s={s}: fd={fd}, d2j={val}, rel={}",
                (fd - val).abs() / denom
            );
        }
    }

    #[test]
    fn dj_branches_agree_at_band_edge() {
        let fp = reference_friction();
        let w = fp.reg_width;
        // approach the edge from both sides
        let inner = fp.dj(w * (1.0 - 1e-12));
        let outer = fp.dj(w * (1.0 + 1e-12));
        assert!((inner - outer).abs() < 1e-10 * fp.static_bound);
        // d2j is continuous there too (the smoothing is C^2)
        let d_inner = fp.d2j(w * (1.0 - 1e-12));
        let d_outer = fp.d2j(w * (1.0 + 1e-12));
        assert!((d_inner - d_outer).abs() < 1e-6 * d_outer.abs().max(1e-12));
    }

    #[test]
    fn d2j_reference_value_outside_band() {
        let fp = reference_friction();
        // s = 2e-3 > w: -decay*(a-b)*e^{-decay*s} = -0.2*e^{-0.2}
        let expect = -0.2 * (-0.2f64).exp();
        assert!((fp.d2j(2e-3) - expect).abs() < 1e-12);
        assert!((expect + 0.16375).abs() < 1e-5);
    }

    #[test]
    fn dj_is_odd_and_vanishes_at_zero() {
        let fp = reference_friction();
        assert_eq!(fp.dj(0.0), 0.0);
        for k in 1..50 {
            let s = k as f64 * 2e-4;
            assert!((fp.dj(s) + fp.dj(-s)).abs() < 1e-18);
        }
    }

    proptest! {
        /// Coulomb consistency: the regularized traction never exceeds the
        /// static bound, for any admissible parameter set and any slip.
        #[test]
        fn dj_respects_static_bound(
            a in 1e-6f64..10.0,
            frac in 0.0f64..1.0,
            decay in 0.0f64..500.0,
            w in 1e-5f64..1e-1,
            s in -10.0f64..10.0,
        ) {
            let b = a * frac;
            let fp = FrictionParams::new(a, b, decay, w).unwrap();
            prop_assert!(fp.dj(s).abs() <= a * (1.0 + 1e-12));
        }
    }

    #[test]
    fn frictionless_params_give_zero_family() {
        let fp = FrictionParams::new(0.0, 0.0, 100.0, 1e-3).unwrap();
        assert!(fp.is_zero());
        for k in -10..=10 {
            let s = k as f64 * 1e-3;
            assert_eq!(fp.j(s), 0.0);
            assert_eq!(fp.dj(s), 0.0);
            assert_eq!(fp.d2j(s), 0.0);
        }
    }

    #[test]
    fn rejects_illegal_friction_params() {
        assert!(FrictionParams::new(1e-3, 2e-3, 100.0, 1e-3).is_err()); // a < b
        assert!(FrictionParams::new(4e-3, -1e-3, 100.0, 1e-3).is_err()); // b < 0
        assert!(FrictionParams::new(4e-3, 2e-3, -1.0, 1e-3).is_err()); // decay < 0
        assert!(FrictionParams::new(4e-3, 2e-3, 100.0, 0.0).is_err()); // zero width
    }
}

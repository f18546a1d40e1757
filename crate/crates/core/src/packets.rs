//! Pure and Hermite-extended Gaussian wave-packets and their closed-form
//! kinematics.
//!
//! The level-`k` packet is
//!
//! ```text
//! psi(x) = N e^{i gamma} H_k(z) e^{(i/hbar) p (x-q)} e^{-lambda (x-q)^2},
//! lambda = (2k+1)/(4 alpha^2) - (i/(2 hbar)) beta/alpha,
//! z      = sqrt(2k+1) (x-q) / (alpha sqrt(2)).
//! ```
//!
//! The `sqrt(2k+1)` in the Hermite argument matches the envelope scale set by
//! `Re lambda`, which is what makes the squared norm come out as
//! `N^2 2^k k! alpha sqrt(2 pi / (2k+1))` and the second moments close at
//! `sigma_x = alpha`, `sigma_p^2 = beta^2 + (2k+1)^2 hbar^2 / (4 alpha^2)`.
//! Without it the polynomial would mix oscillator levels for k >= 2 and none
//! of those closed forms would hold.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, DecayDiagnostic, Grid1D, GridND, PhysicalParams, DECAY_TOL};
use crate::moments::MomentSet;
use crate::scalar::{real, Real};
use crate::spectral::quadrature;

/// Largest supported Hermite level; beyond desk scale the recursion values
/// overflow f64 anyway.
pub const MAX_HERMITE_LEVEL: u32 = 20;

/// Reduced phase-space point of an extended Gaussian packet.
///
/// `norm` is the squared norm Q of the state (particle number); the default
/// constructors fix it to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectivePacketState<T> {
    /// Mean position.
    pub q: T,
    /// Mean momentum.
    pub p: T,
    /// Position spread sigma_x (> 0).
    pub alpha: T,
    /// Momentum conjugate to alpha.
    pub beta: T,
    /// Global phase.
    pub gamma: T,
    /// Uncertainty excitation level (Hermite degree).
    pub k: u32,
    /// Squared norm Q (> 0).
    pub norm: T,
}

impl<T: Real> EffectivePacketState<T> {
    pub fn new(q: T, p: T, alpha: T, beta: T, gamma: T, k: u32) -> Result<Self> {
        Self::with_norm(q, p, alpha, beta, gamma, k, T::one())
    }

    pub fn with_norm(q: T, p: T, alpha: T, beta: T, gamma: T, k: u32, norm: T) -> Result<Self> {
        let s = Self { q, p, alpha, beta, gamma, k, norm };
        s.validate()?;
        Ok(s)
    }

    /// Ground-level packet at the origin with unit width.
    pub fn ground() -> Self {
        Self {
            q: T::zero(),
            p: T::zero(),
            alpha: T::one(),
            beta: T::zero(),
            gamma: T::zero(),
            k: 0,
            norm: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("q", self.q),
            ("p", self.p),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("norm", self.norm),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("packet field {name}")));
            }
        }
        if !(self.alpha > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !(self.norm > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "norm must be > 0, got {}",
                self.norm
            )));
        }
        if self.k > MAX_HERMITE_LEVEL {
            return Err(Error::InvalidParameter(format!(
                "k capped at {MAX_HERMITE_LEVEL}, got {}",
                self.k
            )));
        }
        Ok(())
    }

    /// Uncertainty carried by the level: `c = (2k+1)^2 hbar^2 / 4`.
    pub fn uncertainty_coupling(&self, params: &PhysicalParams<T>) -> T {
        let odd = real::<T>(2.0 * self.k as f64 + 1.0);
        odd * odd * params.hbar * params.hbar / real::<T>(4.0)
    }

    /// Heuristic half-width a grid should have to hold this packet: the
    /// envelope turning point sits at `alpha*sqrt(2)` regardless of k, so
    /// `|q| + 8*alpha*sqrt(2k+1)` leaves generous room for the tails.
    pub fn recommended_half_width(&self) -> T {
        self.q.abs() + real::<T>(8.0) * self.alpha * real::<T>((2.0 * self.k as f64 + 1.0).sqrt())
    }
}

/// Complex Gaussian width `lambda = (2k+1)/(4 alpha^2) - (i/(2 hbar)) beta/alpha`.
pub fn complex_width<T: Real>(
    state: &EffectivePacketState<T>,
    params: &PhysicalParams<T>,
) -> Complex<T> {
    let odd = real::<T>(2.0 * state.k as f64 + 1.0);
    let re = odd / (real::<T>(4.0) * state.alpha * state.alpha);
    let im = -state.beta / (real::<T>(2.0) * params.hbar * state.alpha);
    Complex::new(re, im)
}

/// Invert [`complex_width`]: recover `(alpha, beta)` from `lambda` at level k.
pub fn width_to_alpha_beta<T: Real>(
    lambda: Complex<T>,
    k: u32,
    params: &PhysicalParams<T>,
) -> Result<(T, T)> {
    if !(lambda.re > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "Re lambda must be > 0, got {}",
            lambda.re
        )));
    }
    let odd = real::<T>(2.0 * k as f64 + 1.0);
    let alpha = (odd / (real::<T>(4.0) * lambda.re)).sqrt();
    let beta = -real::<T>(2.0) * params.hbar * alpha * lambda.im;
    Ok((alpha, beta))
}

/// Physicists' Hermite polynomial by the upward recursion
/// `H_{k+1} = 2 z H_k - 2 k H_{k-1}`, `H_0 = 1`, `H_1 = 2z`.
pub fn hermite_poly<T: Real>(k: u32, z: T) -> Result<T> {
    if k > MAX_HERMITE_LEVEL {
        return Err(Error::InvalidParameter(format!(
            "Hermite level capped at {MAX_HERMITE_LEVEL}, got {k}"
        )));
    }
    let two = real::<T>(2.0);
    let mut h_prev = T::one();
    let mut h = two * z;
    match k {
        0 => Ok(h_prev),
        1 => Ok(h),
        _ => {
            for j in 1..k {
                let next = two * z * h - two * real::<T>(j as f64) * h_prev;
                h_prev = h;
                h = next;
            }
            Ok(h)
        }
    }
}

/// `|int H_k H_l e^{-z^2} dz - delta_kl sqrt(pi) 2^k k!|` by quadrature on a
/// grid wide enough for the integrand to decay.
pub fn hermite_orthogonality_residual<T: Real>(k: u32, l: u32) -> Result<T> {
    if k > 10 || l > 10 {
        return Err(Error::InvalidParameter(
            "orthogonality check supports levels 0..=10".into(),
        ));
    }
    // z^20 e^{-z^2} is ~1e-24 by |z| = 10; [-12, 12) gives margin.
    let grid = Grid1D::new(real::<T>(-12.0), real::<T>(12.0), 512)?;
    let f = ComplexField::from_fn_1d(&grid, |z| {
        let hk = hermite_poly(k, z).expect("level checked");
        let hl = hermite_poly(l, z).expect("level checked");
        Complex::new(hk * hl * (-z * z).exp(), T::zero())
    });
    let integral = quadrature(&f).re;
    let exact = if k == l {
        real::<T>(std::f64::consts::PI.sqrt() * 2.0f64.powi(k as i32) * factorial(k))
    } else {
        T::zero()
    };
    Ok((integral - exact).abs())
}

fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * j as f64)
}

/// Sample the extended Gaussian on a grid, normalized so that
/// `quadrature(|psi|^2)` equals `state.norm` to machine precision.
///
/// The amplitude starts from the closed-form norm
/// `Q = N^2 2^k k! alpha sqrt(2 pi/(2k+1))` and one numerical
/// renormalization pass removes the residual grid-truncation bias.
/// A grid too narrow for the packet shows up in the returned decay
/// diagnostic, not as an error.
pub fn make_extended_gaussian<T: Real>(
    state: &EffectivePacketState<T>,
    grid: &Grid1D<T>,
    params: &PhysicalParams<T>,
) -> Result<(ComplexField<T>, DecayDiagnostic<T>)> {
    state.validate()?;
    let lambda = complex_width(state, params);
    let odd = 2.0 * state.k as f64 + 1.0;
    let norm_closed = real::<T>(
        (2.0f64.powi(state.k as i32) * factorial(state.k)) * (2.0 * std::f64::consts::PI / odd).sqrt(),
    ) * state.alpha;
    let amp = (state.norm / norm_closed).sqrt();
    let z_scale = real::<T>((odd / 2.0).sqrt()) / state.alpha;
    let phase = Complex::new(T::zero(), state.gamma).exp();
    let k = state.k;
    let (q, p, hbar) = (state.q, state.p, params.hbar);

    let mut psi = ComplexField::from_fn_1d(grid, |x| {
        let u = x - q;
        let h = hermite_poly(k, z_scale * u).expect("level validated");
        let plane = Complex::new(T::zero(), p * u / hbar).exp();
        let envelope = (-lambda * (u * u)).exp();
        phase * plane * envelope * (amp * h)
    });

    // one renormalization pass against the grid-level norm
    let q_grid = quadrature_norm_sqr(&psi);
    if !(q_grid > T::zero()) {
        return Err(Error::ZeroNorm);
    }
    let correction = (state.norm / q_grid).sqrt();
    psi.scale(Complex::new(correction, T::zero()));

    let decay = psi.boundary_decay(real(DECAY_TOL));
    Ok((psi, decay))
}

fn quadrature_norm_sqr<T: Real>(f: &ComplexField<T>) -> T {
    f.values()
        .iter()
        .fold(T::zero(), |acc, z| acc + z.norm_sqr())
        * f.grid().cell_volume()
}

/// Closed-form moments of the extended packet (exact for `norm = 1`; general
/// norms scale every entry linearly).
pub fn packet_kinematics<T: Real>(
    state: &EffectivePacketState<T>,
    params: &PhysicalParams<T>,
) -> MomentSet<T> {
    let q_norm = state.norm;
    let (q, p, a, b) = (state.q, state.p, state.alpha, state.beta);
    let spread_p = state.uncertainty_coupling(params) / (a * a);
    MomentSet {
        norm: q_norm,
        mean_x: q_norm * q,
        mean_p: q_norm * p,
        x2: q_norm * (q * q + a * a),
        p2: q_norm * (p * p + b * b + spread_p),
        d: q_norm * (p * q + a * b),
    }
}

/// Grid for a packet: symmetric interval from [`EffectivePacketState::recommended_half_width`].
pub fn suggested_grid<T: Real>(state: &EffectivePacketState<T>, n: usize) -> Result<Grid1D<T>> {
    let hw = state.recommended_half_width();
    Grid1D::new(-hw, hw, n)
}

/// Convenience: packet sampled as a 1D field wrapped in a 1-axis [`GridND`].
pub fn packet_grid_nd<T: Real>(grid: &Grid1D<T>) -> GridND<T> {
    GridND::from_axis(grid.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::moments::{compute_moment_set, uncertainties};
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_base_cases() {
        for z in [-3.0, 0.0, 0.7, 2.5] {
            assert_eq!(hermite_poly(0, z).unwrap(), 1.0);
        }
        assert_abs_diff_eq!(hermite_poly(1, 0.5).unwrap(), 1.0, epsilon = 0.0);
    }

    #[test]
    fn hermite_h4_at_one() {
        // H4 = 16 z^4 - 48 z^2 + 12 expanded independently
        assert_abs_diff_eq!(hermite_poly(4, 1.0).unwrap(), -20.0, epsilon = 1e-12);
    }

    #[test]
    fn hermite_rejects_large_level() {
        assert!(hermite_poly(21, 0.0f64).is_err());
    }

    #[test]
    fn orthogonality_diagonal_and_off() {
        let r33 = hermite_orthogonality_residual::<f64>(3, 3).unwrap();
        let exact33 = std::f64::consts::PI.sqrt() * 48.0;
        assert!(r33 / exact33 < 1e-9, "relative residual {:e}", r33 / exact33);

        let r25 = hermite_orthogonality_residual::<f64>(2, 5).unwrap();
        assert!(r25 < 1e-10, "off-diagonal residual {r25:e}");

        let r00 = hermite_orthogonality_residual::<f64>(0, 0).unwrap();
        assert!(r00 < 1e-12, "gaussian integral residual {r00:e}");
    }

    #[test]
    fn ground_packet_is_normalized_gaussian() {
        let g = build_grid(-12.0, 12.0, 512).unwrap();
        let state = EffectivePacketState::ground();
        let (psi, decay) = make_extended_gaussian(&state, &g, &PhysicalParams::default()).unwrap();
        assert!(decay.ok);
        let q = quadrature_norm_sqr(&psi);
        assert_abs_diff_eq!(q, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn excited_packet_normalization() {
        let g = build_grid(-20.0, 20.0, 1024).unwrap();
        let state = EffectivePacketState::new(1.0, 0.5, 0.7, 0.2, 0.0, 2).unwrap();
        let (psi, _) = make_extended_gaussian(&state, &g, &PhysicalParams::default()).unwrap();
        let q = quadrature_norm_sqr(&psi);
        assert_abs_diff_eq!(q, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn k1_packet_has_one_interior_zero() {
        let g = build_grid(-12.0, 12.0, 512).unwrap();
        let state = EffectivePacketState::new(0.0, 0.0, 1.0, 0.0, 0.0, 1).unwrap();
        let (psi, _) = make_extended_gaussian(&state, &g, &PhysicalParams::default()).unwrap();
        // psi is real here; count sign changes where the amplitude is non-negligible
        let mut crossings = 0;
        let mut last_sign = 0i32;
        for v in psi.values() {
            if v.norm() < 1e-10 {
                continue;
            }
            let s = if v.re > 0.0 { 1 } else { -1 };
            if last_sign != 0 && s != last_sign {
                crossings += 1;
            }
            last_sign = s;
        }
        assert_eq!(crossings, 1);
    }

    #[test]
    fn kinematics_examples() {
        let params = PhysicalParams::default();
        let m0 = packet_kinematics(&EffectivePacketState::ground(), &params);
        assert_eq!(
            (m0.norm, m0.mean_x, m0.mean_p, m0.x2, m0.p2, m0.d),
            (1.0, 0.0, 0.0, 1.0, 0.25, 0.0)
        );
        let u0 = uncertainties(&m0, &params).unwrap();
        assert_abs_diff_eq!(u0.c, 0.25, epsilon = 1e-15);

        let s1 = EffectivePacketState::new(0.0, 0.0, 1.0, 0.0, 0.0, 1).unwrap();
        let m1 = packet_kinematics(&s1, &params);
        assert_abs_diff_eq!(m1.p2, 2.25, epsilon = 1e-15);
        let u1 = uncertainties(&m1, &params).unwrap();
        assert_abs_diff_eq!(u1.c, 2.25, epsilon = 1e-14);
    }

    #[test]
    fn kinematics_match_quadrature_moments() {
        let params = PhysicalParams::default();
        let g = build_grid::<f64>(-40.0, 40.0, 2048).unwrap();
        for (k, q, p, a, b) in [
            (0u32, 0.0, 0.0, 1.0, 0.0),
            (1, 0.3, -0.7, 1.4, 0.5),
            (3, -1.0, 2.0, 0.6, -1.1),
            (5, 2.0, 1.0, 2.2, 0.8),
        ] {
            let state = EffectivePacketState::new(q, p, a, b, 0.1, k).unwrap();
            let (psi, decay) = make_extended_gaussian(&state, &g, &params).unwrap();
            assert!(decay.ok, "packet k={k} not contained by grid");
            let (m, _) = compute_moment_set(&psi, &params).unwrap();
            let cf = packet_kinematics(&state, &params);
            for (got, want) in [
                (m.norm, cf.norm),
                (m.mean_x, cf.mean_x),
                (m.mean_p, cf.mean_p),
                (m.x2, cf.x2),
                (m.p2, cf.p2),
                (m.d, cf.d),
            ] {
                let scale = want.abs().max(1.0);
                assert!(
                    (got - want).abs() / scale < 1e-8,
                    "k={k}: got {got}, want {want}"
                );
            }
            let u = uncertainties(&m, &params).unwrap();
            let c_exact = state.uncertainty_coupling(&params);
            assert!(
                (u.c - c_exact).abs() / c_exact < 1e-8,
                "k={k}: c={} vs {}",
                u.c,
                c_exact
            );
        }
    }

    #[test]
    fn minimal_uncertainty_only_at_k0() {
        let params = PhysicalParams::<f64>::default();
        for k in 0..=6u32 {
            let s = EffectivePacketState::new(0.0, 0.0, 1.3, -0.4, 0.0, k).unwrap();
            let c = s.uncertainty_coupling(&params);
            assert!(c >= 0.25 - 1e-15);
            if k == 0 {
                assert_abs_diff_eq!(c, 0.25, epsilon = 1e-15);
            } else {
                assert!(c > 0.25 + 1e-6);
            }
        }
    }

    #[test]
    fn hermite_derivative_identity() {
        // H'_k = 2k H_{k-1}, probed through spectral differentiation of
        // H_k e^{-z^2/2} minus the envelope contribution.
        let g = build_grid::<f64>(-16.0, 16.0, 1024).unwrap();
        for k in 1..=6u32 {
            let f = ComplexField::from_fn_1d(&g, |z| {
                Complex::new(hermite_poly(k, z).unwrap() * (-z * z / 2.0).exp(), 0.0)
            });
            let (df, _) = crate::spectral::spectral_derivative(&f, 0, 1).unwrap();
            let mut max_err = 0.0f64;
            for j in 0..g.len() {
                let z = g.point(j);
                if z.abs() > 4.0 {
                    continue; // envelope ~0 there; 1/envelope amplifies noise
                }
                let env = (-z * z / 2.0).exp();
                let hk = hermite_poly(k, z).unwrap();
                let dh = df.values()[j].re / env + z * hk;
                let exact = 2.0 * k as f64 * hermite_poly(k - 1, z).unwrap();
                max_err = max_err.max((dh - exact).abs());
            }
            assert!(max_err < 1e-8, "k={k}: max err {max_err:e}");
        }
    }
}

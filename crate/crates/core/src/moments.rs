//! Field observables of a wave-function: norm, linear and quadratic moments,
//! standard deviations, Casimirs, and the Robertson-Schrödinger uncertainty.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, DecayDiagnostic, PhysicalParams, DECAY_TOL};
use crate::scalar::{diff_of_products, real, Real};
use crate::spectral::derivative_unchecked;

/// The six field observables. For a state of squared norm Q these are the
/// raw integrals `Q = int |psi|^2`, `mean_x = int x |psi|^2`, ... without any
/// 1/Q normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet<T> {
    /// Squared norm / particle number Q.
    pub norm: T,
    pub mean_x: T,
    pub mean_p: T,
    pub x2: T,
    pub p2: T,
    /// Symmetrized dilatation moment `<D> = <(xp + px)/2>`.
    pub d: T,
}

impl<T: Real> MomentSet<T> {
    pub fn zero() -> Self {
        Self {
            norm: T::zero(),
            mean_x: T::zero(),
            mean_p: T::zero(),
            x2: T::zero(),
            p2: T::zero(),
            d: T::zero(),
        }
    }

    /// Cauchy-Schwarz sanity bounds: `Q x2 >= mean_x^2`, `Q p2 >= mean_p^2`.
    pub fn check_invariants(&self, tol: T) -> Result<()> {
        if self.norm < -tol || self.x2 < -tol || self.p2 < -tol {
            return Err(Error::InvalidParameter(
                "norm and quadratic moments must be nonnegative".into(),
            ));
        }
        if self.norm > T::zero() {
            let sx = self.norm * self.x2 - self.mean_x * self.mean_x;
            let sp = self.norm * self.p2 - self.mean_p * self.mean_p;
            let scale = T::one().max(self.x2.abs()).max(self.p2.abs());
            if sx < -tol * scale || sp < -tol * scale {
                return Err(Error::InvalidParameter(format!(
                    "Cauchy-Schwarz violated: Q x2 - <x>^2 = {sx}, Q p2 - <p>^2 = {sp}"
                )));
            }
        }
        Ok(())
    }
}

/// Derived spread quantities. The sigma forms are normalized central moments
/// (only defined for Q > 0, see `sigma_defined`); the varsigma forms are the
/// norm-weighted combinations `Q<x^2> - <x>^2` etc., defined for every state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintySet<T> {
    pub sigma_x2: T,
    pub sigma_p2: T,
    pub sigma_d: T,
    /// Robertson-Schrödinger uncertainty `c = sigma_x2 sigma_p2 - sigma_d^2`.
    pub c: T,
    /// Casimir of the raw moments: `<x^2><p^2> - <D>^2`.
    pub casimir_c: T,
    pub varsigma_x: T,
    pub varsigma_p: T,
    pub varsigma_d: T,
    /// False when Q = 0 made the sigma forms undefined (they are NaN then).
    pub sigma_defined: bool,
}

/// Residual diagnostics from [`compute_moment_set`]: boundary decay of the
/// input and the imaginary parts of the nominally-real integrals, which
/// measure discretization error.
#[derive(Debug, Clone, Copy)]
pub struct MomentDiagnostics<T> {
    pub decay: DecayDiagnostic<T>,
    pub imag_mean_p: T,
    pub imag_p2: T,
    pub imag_d: T,
}

impl<T: Real> MomentDiagnostics<T> {
    /// All imaginary residuals below `1e-9 * max(1, |value|)` scale.
    pub fn imag_ok(&self, scale: T) -> bool {
        let tol = real::<T>(1e-9) * T::one().max(scale);
        self.imag_mean_p.abs() < tol && self.imag_p2.abs() < tol && self.imag_d.abs() < tol
    }
}

/// Extract all six moments of a 1D wave-function by spectral quadrature.
///
/// `<D>` uses the form `-i hbar int conj(psi) (x dpsi + psi/2)`, equivalent
/// to the symmetrized `(x p + p x)/2` after integration by parts on a
/// periodic decaying grid; its imaginary residual is the discretization
/// diagnostic.
pub fn compute_moment_set<T: Real>(
    psi: &ComplexField<T>,
    params: &PhysicalParams<T>,
) -> Result<(MomentSet<T>, MomentDiagnostics<T>)> {
    if psi.grid().dim() != 1 {
        return Err(Error::GridMismatch("moments are defined on 1D fields".into()));
    }
    if !psi.is_finite() {
        return Err(Error::NonFinite("wave-function contains NaN/inf".into()));
    }
    let decay = psi.boundary_decay(real(DECAY_TOL));
    let grid = psi.grid().axis(0).clone();
    let hbar = params.hbar;

    let dpsi = derivative_unchecked(psi, 0, 1)?;
    let d2psi = derivative_unchecked(psi, 0, 2)?;

    let dv = grid.dx();
    let mut q = T::zero();
    let mut mean_x = T::zero();
    let mut x2 = T::zero();
    let mut p_acc = Complex::new(T::zero(), T::zero());
    let mut p2_acc = Complex::new(T::zero(), T::zero());
    let mut d_acc = Complex::new(T::zero(), T::zero());
    let half = real::<T>(0.5);
    for j in 0..grid.len() {
        let x = grid.point(j);
        let v = psi.values()[j];
        let dv1 = dpsi.values()[j];
        let dv2 = d2psi.values()[j];
        let rho = v.norm_sqr();
        q += rho;
        mean_x += x * rho;
        x2 += x * x * rho;
        let cbar = v.conj();
        p_acc += cbar * dv1;
        p2_acc += cbar * dv2;
        d_acc += cbar * (dv1 * x + v * half);
    }
    q *= dv;
    mean_x *= dv;
    x2 *= dv;
    // <p> = -i hbar int conj(psi) dpsi
    let p_full = Complex::new(T::zero(), -hbar) * p_acc * dv;
    // <p^2> = -hbar^2 int conj(psi) d2psi
    let p2_full = p2_acc * dv * (-hbar * hbar);
    // <D> = -i hbar int conj(psi) (x dpsi + psi/2)
    let d_full = Complex::new(T::zero(), -hbar) * d_acc * dv;

    let moments = MomentSet {
        norm: q,
        mean_x,
        mean_p: p_full.re,
        x2,
        p2: p2_full.re,
        d: d_full.re,
    };
    let diag = MomentDiagnostics {
        decay,
        imag_mean_p: p_full.im,
        imag_p2: p2_full.im,
        imag_d: d_full.im,
    };
    Ok((moments, diag))
}

/// Derived spreads, uncertainty and Casimirs from a moment set.
///
/// `c` and `casimir_c` are evaluated with compensated products; near the
/// minimal-uncertainty floor the naive difference loses most of its digits.
pub fn uncertainties<T: Real>(
    m: &MomentSet<T>,
    _params: &PhysicalParams<T>,
) -> Result<UncertaintySet<T>> {
    let q = m.norm;
    let varsigma_x = diff_of_products(q, m.x2, m.mean_x, m.mean_x);
    let varsigma_p = diff_of_products(q, m.p2, m.mean_p, m.mean_p);
    let varsigma_d = diff_of_products(q, m.d, m.mean_x, m.mean_p);
    let casimir_c = diff_of_products(m.x2, m.p2, m.d, m.d);

    let (sigma_x2, sigma_p2, sigma_d, c, sigma_defined) = if q > T::zero() {
        let inv_q = T::one() / q;
        let mx = m.mean_x * inv_q;
        let mp = m.mean_p * inv_q;
        let sx2 = diff_of_products(m.x2 * inv_q, T::one(), mx, mx);
        let sp2 = diff_of_products(m.p2 * inv_q, T::one(), mp, mp);
        let sd = diff_of_products(m.d * inv_q, T::one(), mx, mp);
        let c = diff_of_products(sx2, sp2, sd, sd);
        (sx2, sp2, sd, c, true)
    } else {
        let nan = T::nan();
        (nan, nan, nan, nan, false)
    };

    Ok(UncertaintySet {
        sigma_x2,
        sigma_p2,
        sigma_d,
        c,
        casimir_c,
        varsigma_x,
        varsigma_p,
        varsigma_d,
        sigma_defined,
    })
}

/// `c_varsigma - hbar^2 Q^4 / 4`, the margin above the uncertainty floor in
/// the norm-weighted (varsigma) form; nonnegative up to grid error for
/// physical states, zero exactly on the pure Gaussian.
pub fn robertson_schrodinger_margin<T: Real>(
    u: &UncertaintySet<T>,
    q_norm: T,
    params: &PhysicalParams<T>,
) -> T {
    let c_varsigma = diff_of_products(u.varsigma_x, u.varsigma_p, u.varsigma_d, u.varsigma_d);
    let q2 = q_norm * q_norm;
    c_varsigma - params.hbar * params.hbar * q2 * q2 / real::<T>(4.0)
}

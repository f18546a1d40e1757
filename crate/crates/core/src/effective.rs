//! Effective Hamiltonian dynamics of the packet parameters
//! `(q, p, alpha, beta, gamma)`.
//!
//! The spread pair `(alpha, beta)` moves under
//! `H = p^2/2m + beta^2/2m + c/(2 m alpha^2) + V_eff(q, alpha)`
//! where the conformal coupling is the quantum uncertainty
//! `c = (2k+1)^2 hbar^2 / 4`, and `V_eff` is the Gaussian-smeared external
//! potential. The same trajectory is reachable through the closed-form
//! Riccati solution for the complex width, which is what makes the integrator
//! testable against an exact oracle.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::evolve::{split_step_evolve, NonlinearCoupling, Potential, TrajectoryRecord};
use crate::grid::{Grid1D, PhysicalParams};
use crate::moments::{uncertainties, MomentSet};
use crate::packets::{make_extended_gaussian, EffectivePacketState};
use crate::scalar::{real, Real};

/// Parameters of the effective Hamiltonian.
///
/// `norm` (the particle number Q) renormalizes the kinetic masses in the
/// capital-variable form `P = Q p`, `B = Q beta`; expressed per unit norm the
/// flow is Q-independent, which is the pathway implemented here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveHamiltonianSpec<T> {
    /// Conformal coupling (action^2 units); `>= hbar^2/4` for physical states.
    pub c: T,
    pub mass: T,
    /// Harmonic trap frequency; 0 means free.
    pub omega: T,
    /// Quartic Taylor coefficient of the external potential (`V = v4 x^4/24`).
    pub v4: T,
    /// Particle number Q.
    pub norm: T,
}

impl<T: Real> EffectiveHamiltonianSpec<T> {
    pub fn free(c: T, mass: T) -> Result<Self> {
        Self::new(c, mass, T::zero(), T::zero())
    }

    pub fn harmonic(c: T, mass: T, omega: T) -> Result<Self> {
        Self::new(c, mass, omega, T::zero())
    }

    pub fn new(c: T, mass: T, omega: T, v4: T) -> Result<Self> {
        let s = Self { c, mass, omega, v4, norm: T::one() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > T::zero()) || !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!("coupling c must be > 0, got {}", self.c)));
        }
        if !(self.mass > T::zero()) {
            return Err(Error::InvalidParameter("mass must be > 0".into()));
        }
        if self.omega < T::zero() || !self.omega.is_finite() {
            return Err(Error::InvalidParameter("omega must be >= 0".into()));
        }
        if !self.v4.is_finite() || !self.norm.is_finite() || !(self.norm > T::zero()) {
            return Err(Error::InvalidParameter("v4 finite and norm > 0 required".into()));
        }
        Ok(())
    }

    /// Spec for a packet evolving in `pot`, with the coupling fixed by the
    /// packet's excitation level.
    pub fn for_packet(
        state: &EffectivePacketState<T>,
        pot: &Potential<T>,
        params: &PhysicalParams<T>,
    ) -> Result<Self> {
        let c = state.uncertainty_coupling(params);
        let (omega, v4) = match pot {
            Potential::Zero => (T::zero(), T::zero()),
            Potential::Harmonic { omega } => (*omega, T::zero()),
            Potential::Polynomial { taylor } => {
                if taylor[1] != T::zero() || taylor[3] != T::zero() {
                    return Err(Error::Unsupported(
                        "effective dynamics supports even polynomial potentials".into(),
                    ));
                }
                if taylor[2] < T::zero() {
                    return Err(Error::Unsupported(
                        "negative quadratic coefficient has no harmonic frequency".into(),
                    ));
                }
                ((taylor[2] / params.mass).sqrt(), taylor[4])
            }
            Potential::Sampled { .. } => {
                return Err(Error::Unsupported(
                    "sampled potentials have no effective counterpart".into(),
                ))
            }
        };
        let mut spec = Self::new(c, params.mass, omega, v4)?;
        spec.norm = state.norm;
        Ok(spec)
    }

    /// Smeared external potential `V(q) + V''(q) alpha^2/2 + v4 alpha^4/8`.
    fn external_term(&self, q: T, alpha: T) -> T {
        let half = real::<T>(0.5);
        let mw2 = self.mass * self.omega * self.omega;
        let v_q = half * mw2 * q * q + self.v4 * q * q * q * q / real::<T>(24.0);
        let vpp = mw2 + half * self.v4 * q * q;
        let a2 = alpha * alpha;
        v_q + half * vpp * a2 + self.v4 * a2 * a2 / real::<T>(8.0)
    }

    fn force_q(&self, q: T, alpha: T) -> T {
        // -d/dq of external_term
        let mw2 = self.mass * self.omega * self.omega;
        let vp = mw2 * q + self.v4 * q * q * q / real::<T>(6.0);
        let vppp = self.v4 * q;
        -(vp + real::<T>(0.5) * vppp * alpha * alpha)
    }

    fn force_alpha(&self, q: T, alpha: T) -> T {
        // c/(m alpha^3) - d/dalpha of external_term
        let mw2 = self.mass * self.omega * self.omega;
        let vpp = mw2 + real::<T>(0.5) * self.v4 * q * q;
        self.c / (self.mass * alpha * alpha * alpha)
            - vpp * alpha
            - real::<T>(0.5) * self.v4 * alpha * alpha * alpha
    }
}

/// Total effective energy per unit norm:
/// `p^2/2m + beta^2/2m + c/(2 m alpha^2) + V_smeared(q, alpha)`.
pub fn eff_energy<T: Real>(
    state: &EffectivePacketState<T>,
    spec: &EffectiveHamiltonianSpec<T>,
) -> Result<T> {
    if !(state.alpha > T::zero()) {
        return Err(Error::InvalidParameter("alpha must be > 0".into()));
    }
    let two_m = real::<T>(2.0) * spec.mass;
    Ok(state.p * state.p / two_m
        + state.beta * state.beta / two_m
        + spec.c / (two_m * state.alpha * state.alpha)
        + spec.external_term(state.q, state.alpha))
}

/// Quadratic-sector energy alone: `beta^2/2m + c/(2 m alpha^2)` plus the
/// alpha-dependent part of the smeared potential.
pub fn spread_sector_energy<T: Real>(
    state: &EffectivePacketState<T>,
    spec: &EffectiveHamiltonianSpec<T>,
) -> T {
    let two_m = real::<T>(2.0) * spec.mass;
    state.beta * state.beta / two_m
        + spec.c / (two_m * state.alpha * state.alpha)
        + (spec.external_term(T::zero(), state.alpha) - spec.external_term(T::zero(), T::zero()))
}

#[derive(Clone, Copy)]
struct Phase<T> {
    q: T,
    p: T,
    alpha: T,
    beta: T,
    gamma: T,
}

impl<T: Real> Phase<T> {
    fn axpy(self, h: T, d: Deriv<T>) -> Self {
        Self {
            q: self.q + h * d.dq,
            p: self.p + h * d.dp,
            alpha: self.alpha + h * d.dalpha,
            beta: self.beta + h * d.dbeta,
            gamma: self.gamma + h * d.dgamma,
        }
    }
}

#[derive(Clone, Copy)]
struct Deriv<T> {
    dq: T,
    dp: T,
    dalpha: T,
    dbeta: T,
    dgamma: T,
}

fn rhs<T: Real>(
    s: Phase<T>,
    spec: &EffectiveHamiltonianSpec<T>,
    params: &PhysicalParams<T>,
) -> Result<Deriv<T>> {
    if !(s.alpha > T::zero()) {
        return Err(Error::InvalidParameter("alpha reached zero".into()));
    }
    let m = spec.mass;
    // gamma law: (1/hbar)[p^2/2m - sqrt(c)/(2 alpha^2) * hbar / m] written via
    // sqrt(c) = (2k+1) hbar / 2
    let sqrt_c = spec.c.sqrt();
    let dgamma = s.p * s.p / (real::<T>(2.0) * m * params.hbar)
        - sqrt_c / (real::<T>(2.0) * m * s.alpha * s.alpha);
    Ok(Deriv {
        dq: s.p / m,
        dp: spec.force_q(s.q, s.alpha),
        dalpha: s.beta / m,
        dbeta: spec.force_alpha(s.q, s.alpha),
        dgamma,
    })
}

/// Fixed-step classical RK4 for the packet parameters. Aborts if the
/// integrator overshoots through the conformal barrier (`alpha <= 0`), which
/// only happens when dt is too coarse.
///
/// The returned record carries the packet parameters, the effective energy,
/// and the implied moment sets (`<p^2> = p^2 + beta^2 + c/alpha^2`).
pub fn integrate_effective<T: Real>(
    state0: &EffectivePacketState<T>,
    spec: &EffectiveHamiltonianSpec<T>,
    params: &PhysicalParams<T>,
    dt: T,
    n_steps: usize,
    record_every: usize,
) -> Result<TrajectoryRecord<T>> {
    state0.validate()?;
    spec.validate()?;
    if !(dt > T::zero()) || record_every == 0 {
        return Err(Error::InvalidParameter("dt > 0 and record_every >= 1 required".into()));
    }

    let mut s = Phase {
        q: state0.q,
        p: state0.p,
        alpha: state0.alpha,
        beta: state0.beta,
        gamma: state0.gamma,
    };
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        moments: Vec::new(),
        uncertainties: Vec::new(),
        packet_states: Some(Vec::new()),
        energies: Some(Vec::new()),
        snapshots: Vec::new(),
        warnings: Vec::new(),
    };

    let half = real::<T>(0.5);
    let sixth = T::one() / real::<T>(6.0);
    let record = |rec: &mut TrajectoryRecord<T>, s: &Phase<T>, t: T| -> Result<()> {
        let state = EffectivePacketState {
            q: s.q,
            p: s.p,
            alpha: s.alpha,
            beta: s.beta,
            gamma: s.gamma,
            k: state0.k,
            norm: state0.norm,
        };
        let m = moments_from_phase(&state, spec.c);
        let u = uncertainties(&m, params)?;
        let e = eff_energy(&state, spec)?;
        rec.times.push(t);
        rec.moments.push(m);
        rec.uncertainties.push(u);
        rec.packet_states.as_mut().expect("allocated").push(state);
        rec.energies.as_mut().expect("allocated").push(e);
        Ok(())
    };
    record(&mut rec, &s, T::zero())?;

    let abort = |step: usize| Error::NumericalFailure {
        step,
        detail: "alpha <= 0 during RK4 stage; reduce dt".into(),
    };
    for step in 1..=n_steps {
        let k1 = rhs(s, spec, params).map_err(|_| abort(step - 1))?;
        let k2 = rhs(s.axpy(half * dt, k1), spec, params).map_err(|_| abort(step - 1))?;
        let k3 = rhs(s.axpy(half * dt, k2), spec, params).map_err(|_| abort(step - 1))?;
        let k4 = rhs(s.axpy(dt, k3), spec, params).map_err(|_| abort(step - 1))?;
        s = Phase {
            q: s.q + dt * sixth * (k1.dq + real::<T>(2.0) * (k2.dq + k3.dq) + k4.dq),
            p: s.p + dt * sixth * (k1.dp + real::<T>(2.0) * (k2.dp + k3.dp) + k4.dp),
            alpha: s.alpha
                + dt * sixth * (k1.dalpha + real::<T>(2.0) * (k2.dalpha + k3.dalpha) + k4.dalpha),
            beta: s.beta
                + dt * sixth * (k1.dbeta + real::<T>(2.0) * (k2.dbeta + k3.dbeta) + k4.dbeta),
            gamma: s.gamma
                + dt * sixth * (k1.dgamma + real::<T>(2.0) * (k2.dgamma + k3.dgamma) + k4.dgamma),
        };
        if !(s.alpha > T::zero()) {
            return Err(abort(step - 1));
        }
        if step % record_every == 0 || step == n_steps {
            record(&mut rec, &s, dt * real::<T>(step as f64))?;
        }
    }
    Ok(rec)
}

/// Moments implied by packet parameters at arbitrary coupling c (not tied to
/// an integer level): `<p^2> = p^2 + beta^2 + c/alpha^2` and friends.
pub fn moments_from_phase<T: Real>(state: &EffectivePacketState<T>, c: T) -> MomentSet<T> {
    let q_norm = state.norm;
    let (q, p, a, b) = (state.q, state.p, state.alpha, state.beta);
    MomentSet {
        norm: q_norm,
        mean_x: q_norm * q,
        mean_p: q_norm * p,
        x2: q_norm * (q * q + a * a),
        p2: q_norm * (p * p + b * b + c / (a * a)),
        d: q_norm * (p * q + a * b),
    }
}

/// Closed-form free-evolution trajectory of the complex width:
/// `1/lambda(t) = 1/lambda_0 + (2 i hbar / m) t`, exact for the Riccati
/// equation `dot(lambda) = -(2 i hbar / m) lambda^2`.
pub fn riccati_evolve<T: Real>(
    lambda0: Complex<T>,
    dt: T,
    n_steps: usize,
    params: &PhysicalParams<T>,
) -> Result<Vec<Complex<T>>> {
    if !(lambda0.re > T::zero()) {
        return Err(Error::InvalidParameter("Re lambda0 must be > 0".into()));
    }
    let inv0 = Complex::new(T::one(), T::zero()) / lambda0;
    let slope = Complex::new(T::zero(), real::<T>(2.0) * params.hbar / params.mass);
    Ok((0..=n_steps)
        .map(|s| {
            let t = dt * real::<T>(s as f64);
            Complex::new(T::one(), T::zero()) / (inv0 + slope * t)
        })
        .collect())
}

/// Result of Gaussian-smearing a potential: the quadrature value and, for
/// closed-form potentials, the moment-expansion value
/// `V(q) + V''(q) alpha^2/2 + V''''(q) 3 alpha^4/24`.
#[derive(Debug, Clone, Copy)]
pub struct SmearedPotential<T> {
    pub quadrature: T,
    pub closed_form: Option<T>,
}

/// `(1/(alpha sqrt(2 pi))) int V(x) exp(-(x-q)^2 / (2 alpha^2)) dx`.
pub fn smeared_potential<T: Real>(
    pot: &Potential<T>,
    q: T,
    alpha: T,
    params: &PhysicalParams<T>,
) -> Result<SmearedPotential<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::InvalidParameter("alpha must be > 0".into()));
    }
    pot.validate()?;
    let quad = match pot {
        Potential::Sampled { .. } => {
            return Err(Error::Unsupported(
                "smearing a sampled potential requires its grid; evaluate via evaluate_on and integrate directly".into(),
            ));
        }
        _ => {
            // 10 sigma on both sides captures the kernel to ~1e-23
            let half_width = alpha * real::<T>(10.0);
            let grid = Grid1D::new(q - half_width, q + half_width, 512)?;
            let norm = T::one() / (alpha * (real::<T>(2.0) * T::PI()).sqrt());
            let mut acc = T::zero();
            for j in 0..grid.len() {
                let x = grid.point(j);
                let w = (-((x - q) * (x - q)) / (real::<T>(2.0) * alpha * alpha)).exp();
                acc += pot.value_at(x, params).expect("closed form") * w;
            }
            acc * grid.dx() * norm
        }
    };
    if !quad.is_finite() {
        return Err(Error::NonFinite("smeared potential diverged".into()));
    }
    let closed = closed_form_smear(pot, q, alpha, params);
    Ok(SmearedPotential { quadrature: quad, closed_form: closed })
}

fn closed_form_smear<T: Real>(
    pot: &Potential<T>,
    q: T,
    alpha: T,
    params: &PhysicalParams<T>,
) -> Option<T> {
    let taylor: [T; 5] = match pot {
        Potential::Zero => [T::zero(); 5],
        Potential::Harmonic { omega } => {
            let mut t = [T::zero(); 5];
            t[2] = params.mass * *omega * *omega;
            t
        }
        Potential::Polynomial { taylor } => *taylor,
        Potential::Sampled { .. } => return None,
    };
    // Gaussian central moments: <d^2> = alpha^2, <d^4> = 3 alpha^4
    let v = |x: T| {
        let mut acc = T::zero();
        let mut xn = T::one();
        let mut fact = 1.0f64;
        for (n, c) in taylor.iter().enumerate() {
            if n > 0 {
                fact *= n as f64;
                xn = xn * x;
            }
            acc = acc + *c * xn / real::<T>(fact);
        }
        acc
    };
    let vpp = taylor[2] + taylor[3] * q + taylor[4] * q * q / real::<T>(2.0);
    let vpppp = taylor[4];
    let a2 = alpha * alpha;
    Some(v(q) + real::<T>(0.5) * vpp * a2 + vpppp * real::<T>(3.0) * a2 * a2 / real::<T>(24.0))
}

/// Discrepancy metrics between the effective trajectory and the full PDE
/// evolution started from the same packet.
#[derive(Debug, Clone, Copy)]
pub struct CompareReport<T> {
    pub max_abs_q: T,
    pub max_abs_p: T,
    pub max_abs_alpha2: T,
    pub max_rel_alpha2: T,
    pub max_abs_c: T,
    pub max_rel_c: T,
    pub n_compared: usize,
}

/// Run both layers from the same initial packet on aligned time grids and
/// report the worst-case discrepancies on `q`, `p`, `alpha^2`, and `c`.
#[allow(clippy::too_many_arguments)]
pub fn compare_effective_vs_pde<T: Real>(
    state0: &EffectivePacketState<T>,
    pot: &Potential<T>,
    grid: &Grid1D<T>,
    params: &PhysicalParams<T>,
    t_final: T,
    dt: T,
    record_every: usize,
) -> Result<(CompareReport<T>, TrajectoryRecord<T>, TrajectoryRecord<T>)> {
    let n_steps = (t_final / dt).round().to_usize().ok_or_else(|| {
        Error::InvalidParameter("t_final/dt does not fit in usize".into())
    })?;
    let spec = EffectiveHamiltonianSpec::for_packet(state0, pot, params)?;
    let (psi0, decay) = make_extended_gaussian(state0, grid, params)?;
    let mut pde = split_step_evolve(
        &psi0,
        pot,
        &NonlinearCoupling::linear(),
        params,
        dt,
        n_steps,
        record_every,
        None,
    )?;
    if !decay.ok {
        pde.warnings.push("initial packet failed the boundary-decay check".into());
    }
    let eff = integrate_effective(state0, &spec, params, dt, n_steps, record_every)?;
    if pde.times.len() != eff.times.len() {
        return Err(Error::InvalidParameter("record grids failed to align".into()));
    }

    let mut report = CompareReport {
        max_abs_q: T::zero(),
        max_abs_p: T::zero(),
        max_abs_alpha2: T::zero(),
        max_rel_alpha2: T::zero(),
        max_abs_c: T::zero(),
        max_rel_c: T::zero(),
        n_compared: pde.times.len(),
    };
    let states = eff.packet_states.as_ref().expect("effective run records states");
    for i in 0..pde.times.len() {
        let mp = &pde.moments[i];
        let up = &pde.uncertainties[i];
        let se = &states[i];
        let inv_q = T::one() / mp.norm;
        let q_pde = mp.mean_x * inv_q;
        let p_pde = mp.mean_p * inv_q;
        let alpha2_pde = up.sigma_x2;
        let alpha2_eff = se.alpha * se.alpha;
        let c_eff = spec.c;
        report.max_abs_q = report.max_abs_q.max((q_pde - se.q).abs());
        report.max_abs_p = report.max_abs_p.max((p_pde - se.p).abs());
        let da = (alpha2_pde - alpha2_eff).abs();
        report.max_abs_alpha2 = report.max_abs_alpha2.max(da);
        report.max_rel_alpha2 = report.max_rel_alpha2.max(da / alpha2_eff.abs());
        let dc = (up.c - c_eff).abs();
        report.max_abs_c = report.max_abs_c.max(dc);
        report.max_rel_c = report.max_rel_c.max(dc / c_eff);
    }
    Ok((report, eff, pde))
}

//! Split-step spectral evolution of 1D wave-functions and the closed-form
//! moment solutions that serve as oracles for it.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid1D, PhysicalParams, DECAY_TOL};
use crate::moments::{compute_moment_set, uncertainties, MomentSet, UncertaintySet};
use crate::packets::EffectivePacketState;
use crate::scalar::{real, Real};
use crate::spectral::{fft_axis, FftDirection};

/// External potential V(x).
#[derive(Debug, Clone, PartialEq)]
pub enum Potential<T> {
    Zero,
    /// `V = (1/2) m omega^2 x^2`.
    Harmonic { omega: T },
    /// Taylor coefficients `V_n = V^(n)(0)`: `V(x) = sum_n taylor[n] x^n / n!`.
    /// Note the factorial normalization: `taylor[2] = m omega^2` reproduces
    /// the harmonic case and `taylor[4] = 1` means `x^4/24`.
    Polynomial { taylor: [T; 5] },
    /// Arbitrary samples on the evolution grid.
    Sampled { values: Vec<T> },
}

impl<T: Real> Potential<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            Potential::Zero => Ok(()),
            Potential::Harmonic { omega } => {
                if !omega.is_finite() || *omega < T::zero() {
                    Err(Error::InvalidParameter(format!("omega must be >= 0, got {omega}")))
                } else {
                    Ok(())
                }
            }
            Potential::Polynomial { taylor } => {
                if taylor.iter().any(|v| !v.is_finite()) {
                    Err(Error::NonFinite("polynomial coefficients".into()))
                } else {
                    Ok(())
                }
            }
            Potential::Sampled { values } => {
                if values.iter().any(|v| !v.is_finite()) {
                    Err(Error::NonFinite("sampled potential".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Closed-form value at a point; `None` for sampled potentials.
    pub fn value_at(&self, x: T, params: &PhysicalParams<T>) -> Option<T> {
        match self {
            Potential::Zero => Some(T::zero()),
            Potential::Harmonic { omega } => {
                Some(real::<T>(0.5) * params.mass * *omega * *omega * x * x)
            }
            Potential::Polynomial { taylor } => {
                let mut acc = T::zero();
                let mut xn = T::one();
                let mut fact = 1.0f64;
                for (n, v) in taylor.iter().enumerate() {
                    if n > 0 {
                        fact *= n as f64;
                        xn = xn * x;
                    }
                    acc = acc + *v * xn / real::<T>(fact);
                }
                Some(acc)
            }
            Potential::Sampled { .. } => None,
        }
    }

    /// Sample the potential on a grid.
    pub fn evaluate_on(&self, grid: &Grid1D<T>, params: &PhysicalParams<T>) -> Result<Vec<T>> {
        self.validate()?;
        match self {
            Potential::Sampled { values } => {
                if values.len() != grid.len() {
                    return Err(Error::GridMismatch(format!(
                        "sampled potential has {} values, grid has {}",
                        values.len(),
                        grid.len()
                    )));
                }
                Ok(values.clone())
            }
            _ => Ok((0..grid.len())
                .map(|j| self.value_at(grid.point(j), params).expect("closed form"))
                .collect()),
        }
    }
}

/// Self-interaction couplings: the action term `sum_n (kappa_n / n) |psi|^{2(n+1)}`
/// contributes the density-dependent potential
/// `sum_n kappa_n (n+1)/n |psi|^{2n}` to the equation of motion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NonlinearCoupling<T> {
    terms: Vec<(u32, T)>,
}

impl<T: Real> NonlinearCoupling<T> {
    pub fn linear() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn new(terms: Vec<(u32, T)>) -> Result<Self> {
        for (n, kappa) in &terms {
            if *n < 1 {
                return Err(Error::InvalidParameter("nonlinear power n must be >= 1".into()));
            }
            if !kappa.is_finite() {
                return Err(Error::NonFinite("nonlinear coupling".into()));
            }
        }
        Ok(Self { terms })
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(u32, T)] {
        &self.terms
    }

    /// Effective potential at local density `rho = |psi|^2`.
    #[inline]
    pub fn density_potential(&self, rho: T) -> T {
        let mut acc = T::zero();
        for (n, kappa) in &self.terms {
            let frac = real::<T>((*n as f64 + 1.0) / *n as f64);
            acc = acc + *kappa * frac * rho.powi(*n as i32);
        }
        acc
    }

    /// Energy density of the interaction term, `sum_n (kappa_n/n) rho^{n+1}`.
    #[inline]
    pub fn energy_density(&self, rho: T) -> T {
        let mut acc = T::zero();
        for (n, kappa) in &self.terms {
            acc = acc + *kappa / real::<T>(*n as f64) * rho.powi(*n as i32 + 1);
        }
        acc
    }
}

/// Time series of recorded observables, plus optional state snapshots.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord<T> {
    pub times: Vec<T>,
    pub moments: Vec<MomentSet<T>>,
    pub uncertainties: Vec<UncertaintySet<T>>,
    /// Present for effective-dynamics runs: the packet parameters per record.
    pub packet_states: Option<Vec<EffectivePacketState<T>>>,
    /// Present for effective-dynamics runs: effective energy per record.
    pub energies: Option<Vec<T>>,
    /// Wave-function snapshots `(t, psi)` at the requested cadence.
    pub snapshots: Vec<(T, ComplexField<T>)>,
    /// Human-readable warnings (decay violations, stability heuristic, ...).
    pub warnings: Vec<String>,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Max relative drift of the norm over the run.
    pub fn norm_drift(&self) -> T {
        relative_drift(self.moments.iter().map(|m| m.norm))
    }

    /// Max relative drift of the uncertainty c over the run.
    pub fn uncertainty_drift(&self) -> T {
        relative_drift(self.uncertainties.iter().map(|u| u.c))
    }
}

fn relative_drift<T: Real>(mut series: impl Iterator<Item = T>) -> T {
    let first = match series.next() {
        Some(v) => v,
        None => return T::zero(),
    };
    let scale = first.abs().max(T::min_positive_value());
    series.fold(T::zero(), |m, v| m.max((v - first).abs() / scale))
}

/// Advance `psi0` by `n_steps` Strang-split steps of size `dt`:
/// half potential phase, full kinetic step in wavenumber space, half
/// potential phase. The nonlinear contribution is evaluated from the current
/// density at each half-step (the phase itself leaves the density unchanged).
///
/// Records moments at step 0, every `record_every` steps, and the final step;
/// snapshots follow `snapshot_every` when given. A step size violating the
/// heuristic `dt hbar k_max^2 / 2m <= pi/4` earns a warning, and non-finite
/// amplitudes abort with the last healthy step index.
#[allow(clippy::too_many_arguments)]
pub fn split_step_evolve<T: Real>(
    psi0: &ComplexField<T>,
    pot: &Potential<T>,
    nl: &NonlinearCoupling<T>,
    params: &PhysicalParams<T>,
    dt: T,
    n_steps: usize,
    record_every: usize,
    snapshot_every: Option<usize>,
) -> Result<TrajectoryRecord<T>> {
    if psi0.grid().dim() != 1 {
        return Err(Error::GridMismatch("evolution acts on 1D fields".into()));
    }
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    if record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be >= 1".into()));
    }
    let grid = psi0.grid().axis(0).clone();
    let v_grid = pot.evaluate_on(&grid, params)?;

    let mut warnings = Vec::new();
    let decay = psi0.boundary_decay(real(DECAY_TOL));
    if !decay.ok {
        warnings.push(format!(
            "initial state boundary amplitude {:e} exceeds decay tolerance {:e}",
            decay.max_boundary_abs, decay.threshold
        ));
    }
    let k_max = T::PI() / grid.dx();
    let stability = dt * params.hbar * k_max * k_max / (real::<T>(2.0) * params.mass);
    if stability > T::FRAC_PI_4() {
        warnings.push(format!(
            "dt stability heuristic violated: dt*hbar*k_max^2/2m = {stability} > pi/4"
        ));
    }

    // kinetic phase per step: exp(-i hbar k^2 dt / 2m)
    let kinetic_phase: Vec<Complex<T>> = grid
        .wavenumbers()
        .iter()
        .map(|&k| {
            let theta = -params.hbar * k * k * dt / (real::<T>(2.0) * params.mass);
            Complex::from_polar(T::one(), theta)
        })
        .collect();

    let mut psi = psi0.clone();
    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        moments: Vec::new(),
        uncertainties: Vec::new(),
        packet_states: None,
        energies: None,
        snapshots: Vec::new(),
        warnings,
    };

    let record = |rec: &mut TrajectoryRecord<T>,
                  psi: &ComplexField<T>,
                  t: T|
     -> Result<()> {
        let (m, _) = compute_moment_set(psi, params)?;
        let u = uncertainties(&m, params)?;
        rec.times.push(t);
        rec.moments.push(m);
        rec.uncertainties.push(u);
        Ok(())
    };

    record(&mut rec, &psi, T::zero())?;
    if snapshot_every.is_some() {
        rec.snapshots.push((T::zero(), psi.clone()));
    }

    let half_dt_over_hbar = dt / (real::<T>(2.0) * params.hbar);
    for step in 1..=n_steps {
        apply_potential_half_step(&mut psi, &v_grid, nl, half_dt_over_hbar);
        fft_axis(&mut psi, 0, FftDirection::Forward);
        for (v, ph) in psi.values_mut().iter_mut().zip(&kinetic_phase) {
            *v = *v * *ph;
        }
        fft_axis(&mut psi, 0, FftDirection::Inverse);
        apply_potential_half_step(&mut psi, &v_grid, nl, half_dt_over_hbar);

        if !psi.is_finite() {
            return Err(Error::NumericalFailure {
                step: step - 1,
                detail: "wave-function became non-finite".into(),
            });
        }

        let t = dt * real::<T>(step as f64);
        if step % record_every == 0 || step == n_steps {
            record(&mut rec, &psi, t)?;
        }
        if let Some(every) = snapshot_every {
            if every > 0 && (step % every == 0 || step == n_steps) {
                rec.snapshots.push((t, psi.clone()));
            }
        }
    }
    Ok(rec)
}

fn apply_potential_half_step<T: Real>(
    psi: &mut ComplexField<T>,
    v_grid: &[T],
    nl: &NonlinearCoupling<T>,
    half_dt_over_hbar: T,
) {
    if nl.is_empty() {
        for (v, &pot) in psi.values_mut().iter_mut().zip(v_grid) {
            let phase = Complex::from_polar(T::one(), -pot * half_dt_over_hbar);
            *v = *v * phase;
        }
    } else {
        for (v, &pot) in psi.values_mut().iter_mut().zip(v_grid) {
            let rho = v.norm_sqr();
            let total = pot + nl.density_potential(rho);
            let phase = Complex::from_polar(T::one(), -total * half_dt_over_hbar);
            *v = *v * phase;
        }
    }
}

/// Field Hamiltonian `int [ hbar^2/2m |dpsi|^2 + V |psi|^2 + interaction ]`,
/// conserved by the exact flow; used to validate the nonlinear pathway.
pub fn field_energy<T: Real>(
    psi: &ComplexField<T>,
    pot: &Potential<T>,
    nl: &NonlinearCoupling<T>,
    params: &PhysicalParams<T>,
) -> Result<T> {
    let grid = psi.grid().axis(0).clone();
    let v_grid = pot.evaluate_on(&grid, params)?;
    let dpsi = crate::spectral::derivative_unchecked(psi, 0, 1)?;
    let dv = grid.dx();
    let kin_coeff = params.hbar * params.hbar / (real::<T>(2.0) * params.mass);
    let mut acc = T::zero();
    for j in 0..grid.len() {
        let rho = psi.values()[j].norm_sqr();
        acc += kin_coeff * dpsi.values()[j].norm_sqr() + v_grid[j] * rho + nl.energy_density(rho);
    }
    Ok(acc * dv)
}

/// Exact free-evolution position spread:
/// `<x^2>(t) = <x^2>_0 + (2 <D>_0 / m) t + (<p^2>_0 / m^2) t^2`.
pub fn analytic_free_spread<T: Real>(m0: &MomentSet<T>, t: T, params: &PhysicalParams<T>) -> T {
    let m = params.mass;
    m0.x2 + real::<T>(2.0) * m0.d / m * t + m0.p2 / (m * m) * t * t
}

/// Exact solution of the closed harmonic moment system
/// `d_t<x^2> = 2<D>/m`, `d_t<D> = <p^2>/m - m w^2 <x^2>`,
/// `d_t<p^2> = -2 m w^2 <D>`, together with the classical evolution of the
/// linear moments. The conserved combination `<p^2> + m^2 w^2 <x^2>` supplies
/// the particular mode; the oscillatory part runs at frequency `2w`.
pub fn analytic_harmonic_moments<T: Real>(
    m0: &MomentSet<T>,
    omega: T,
    t: T,
    params: &PhysicalParams<T>,
) -> MomentSet<T> {
    let m = params.mass;
    let two = real::<T>(2.0);
    let mw = m * omega;

    // quadratic sector
    let s = m0.p2 + mw * mw * m0.x2; // constant of motion
    let delta0 = m0.p2 - mw * mw * m0.x2;
    let (sin2, cos2) = (two * omega * t).sin_cos();
    let d = m0.d * cos2 + delta0 / (two * mw) * sin2;
    let delta = delta0 * cos2 - two * mw * m0.d * sin2;
    let x2 = (s - delta) / (two * mw * mw);
    let p2 = (s + delta) / two;

    // linear sector: classical harmonic motion
    let (sin1, cos1) = (omega * t).sin_cos();
    let mean_x = m0.mean_x * cos1 + m0.mean_p / mw * sin1;
    let mean_p = m0.mean_p * cos1 - mw * m0.mean_x * sin1;

    MomentSet { norm: m0.norm, mean_x, mean_p, x2, p2, d }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::packets::{make_extended_gaussian, packet_kinematics, EffectivePacketState};
    use approx::assert_abs_diff_eq;

    fn params() -> PhysicalParams<f64> {
        PhysicalParams::default()
    }

    #[test]
    fn analytic_free_spread_examples() {
        let m0 = MomentSet { norm: 1.0, mean_x: 0.0, mean_p: 0.0, x2: 1.0, p2: 0.25, d: 0.0 };
        assert_abs_diff_eq!(analytic_free_spread(&m0, 2.0, &params()), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(analytic_free_spread(&m0, 0.0, &params()), 1.0, epsilon = 0.0);
        // positive leading coefficient: growth at late times
        assert!(analytic_free_spread(&m0, 1e3, &params()) > 1e4);
    }

    #[test]
    fn harmonic_coherent_state_is_stationary() {
        // alpha^2 = hbar/(2 m omega), beta = 0, k = 0 has constant spreads
        let omega = 1.7;
        let alpha2 = 0.5 / omega;
        let m0 = MomentSet {
            norm: 1.0,
            mean_x: 0.0,
            mean_p: 0.0,
            x2: alpha2,
            p2: 0.25 / alpha2,
            d: 0.0,
        };
        for t in [0.3, 1.1, 4.0] {
            let mt = analytic_harmonic_moments(&m0, omega, t, &params());
            assert_abs_diff_eq!(mt.x2, m0.x2, epsilon = 1e-14);
            assert_abs_diff_eq!(mt.p2, m0.p2, epsilon = 1e-14);
            assert_abs_diff_eq!(mt.d, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn harmonic_quadratic_moments_have_period_pi_over_omega() {
        let omega = 1.3;
        let m0 = MomentSet { norm: 1.0, mean_x: 0.4, mean_p: -0.2, x2: 1.7, p2: 0.9, d: 0.3 };
        let period = std::f64::consts::PI / omega;
        let mt = analytic_harmonic_moments(&m0, omega, period, &params());
        assert_abs_diff_eq!(mt.x2, m0.x2, epsilon = 1e-12);
        assert_abs_diff_eq!(mt.p2, m0.p2, epsilon = 1e-12);
        assert_abs_diff_eq!(mt.d, m0.d, epsilon = 1e-12);
        // linear moments only return after the full 2 pi / omega
        let mt2 = analytic_harmonic_moments(&m0, omega, 2.0 * period, &params());
        assert_abs_diff_eq!(mt2.mean_x, m0.mean_x, epsilon = 1e-12);
        assert_abs_diff_eq!(mt2.mean_p, m0.mean_p, epsilon = 1e-12);
    }

    #[test]
    fn harmonic_c_is_conserved_analytically() {
        let omega = 0.8;
        let m0 = MomentSet { norm: 1.0, mean_x: 0.0, mean_p: 0.0, x2: 1.9, p2: 0.7, d: 0.4 };
        let u0 = uncertainties(&m0, &params()).unwrap();
        for t in [0.1, 0.9, 2.7, 6.0] {
            let ut = uncertainties(&analytic_harmonic_moments(&m0, omega, t, &params()), &params())
                .unwrap();
            assert_abs_diff_eq!(ut.c, u0.c, epsilon = 1e-12);
        }
    }

    #[test]
    fn free_evolution_matches_quadratic_law() {
        let p = params();
        let g = build_grid(-40.0, 40.0, 1024).unwrap();
        let state = EffectivePacketState::ground();
        let (psi, _) = make_extended_gaussian(&state, &g, &p).unwrap();
        let rec = split_step_evolve(
            &psi,
            &Potential::Zero,
            &NonlinearCoupling::linear(),
            &p,
            1e-3,
            2000,
            200,
            None,
        )
        .unwrap();
        let m0 = rec.moments[0];
        for (i, &t) in rec.times.iter().enumerate() {
            let want = analytic_free_spread(&m0, t, &p);
            let got = rec.moments[i].x2;
            assert!(
                (got - want).abs() / want < 1e-6,
                "t={t}: got {got}, want {want}"
            );
        }
        // final value: 1 + 0.25 * 4 = 2
        assert_abs_diff_eq!(rec.moments.last().unwrap().x2, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn free_motion_of_mean_position() {
        let p = params();
        let g = build_grid(-40.0, 40.0, 1024).unwrap();
        let state = EffectivePacketState::new(0.0, 1.0, 1.0, 0.0, 0.0, 0).unwrap();
        let (psi, _) = make_extended_gaussian(&state, &g, &p).unwrap();
        let rec = split_step_evolve(
            &psi,
            &Potential::Zero,
            &NonlinearCoupling::linear(),
            &p,
            1e-3,
            2000,
            500,
            None,
        )
        .unwrap();
        for (i, &t) in rec.times.iter().enumerate() {
            assert!(
                (rec.moments[i].mean_x - t).abs() < 1e-8,
                "t={t}: <x> = {}",
                rec.moments[i].mean_x
            );
        }
    }

    #[test]
    fn harmonic_revival_after_full_period() {
        let p = params();
        let g = build_grid(-16.0, 16.0, 512).unwrap();
        let state = EffectivePacketState::new(0.5, 0.0, 1.3, 0.2, 0.0, 0).unwrap();
        let (psi, _) = make_extended_gaussian(&state, &g, &p).unwrap();
        let dt = 2.0 * std::f64::consts::PI / 16000.0;
        let rec = split_step_evolve(
            &psi,
            &Potential::Harmonic { omega: 1.0 },
            &NonlinearCoupling::linear(),
            &p,
            dt,
            16000,
            16000,
            None,
        )
        .unwrap();
        let m0 = rec.moments[0];
        let mf = rec.moments.last().unwrap();
        for (a, b) in [
            (m0.mean_x, mf.mean_x),
            (m0.mean_p, mf.mean_p),
            (m0.x2, mf.x2),
            (m0.p2, mf.p2),
            (m0.d, mf.d),
        ] {
            assert!((a - b).abs() < 1e-5, "revival mismatch: {a} vs {b}");
        }
    }

    #[test]
    fn moment_odes_hold_along_harmonic_run() {
        // centered finite differences of recorded moments obey the closed system
        let p = params();
        let g = build_grid(-16.0, 16.0, 512).unwrap();
        let state = EffectivePacketState::new(0.0, 0.0, 1.4, -0.3, 0.0, 1).unwrap();
        let (psi, _) = make_extended_gaussian(&state, &g, &p).unwrap();
        let omega = 1.0f64;
        let dt = 1e-3;
        let rec = split_step_evolve(
            &psi,
            &Potential::Harmonic { omega },
            &NonlinearCoupling::linear(),
            &p,
            dt,
            200,
            1,
            None,
        )
        .unwrap();
        let h = dt;
        for i in 1..rec.len() - 1 {
            let dx2 = (rec.moments[i + 1].x2 - rec.moments[i - 1].x2) / (2.0 * h);
            let dd = (rec.moments[i + 1].d - rec.moments[i - 1].d) / (2.0 * h);
            let dp2 = (rec.moments[i + 1].p2 - rec.moments[i - 1].p2) / (2.0 * h);
            let m = &rec.moments[i];
            let scale = m.p2.abs().max(m.x2.abs()).max(1.0);
            assert!((dx2 - 2.0 * m.d).abs() < 1e-5 * scale);
            assert!((dd - (m.p2 - omega * omega * m.x2)).abs() < 1e-5 * scale);
            assert!((dp2 + 2.0 * omega * omega * m.d).abs() < 1e-5 * scale);
        }
    }

    #[test]
    fn strang_convergence_is_second_order() {
        let p = params();
        let g = build_grid(-16.0, 16.0, 512).unwrap();
        let state = EffectivePacketState::new(0.3, 0.0, 1.5, 0.0, 0.0, 0).unwrap();
        let (psi, _) = make_extended_gaussian(&state, &g, &p).unwrap();
        let omega = 1.0;
        let t_final = 1.0;
        let mut errs = Vec::new();
        for steps in [250usize, 500] {
            let dt = t_final / steps as f64;
            let rec = split_step_evolve(
                &psi,
                &Potential::Harmonic { omega },
                &NonlinearCoupling::linear(),
                &p,
                dt,
                steps,
                steps,
                None,
            )
            .unwrap();
            let want = analytic_harmonic_moments(&rec.moments[0], omega, t_final, &p);
            errs.push((rec.moments.last().unwrap().x2 - want.x2).abs());
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (2.5..8.0).contains(&ratio),
            "halving dt gave error ratio {ratio} (errors {errs:?})"
        );
    }

    #[test]
    fn quartic_potential_breaks_c_conservation() {
        let p = params();
        let g = build_grid(-16.0, 16.0, 1024).unwrap();
        let (psi, _) = make_extended_gaussian(&EffectivePacketState::ground(), &g, &p).unwrap();
        let pot = Potential::Polynomial { taylor: [0.0, 0.0, 0.0, 0.0, 1.0] };
        let rec = split_step_evolve(
            &psi,
            &pot,
            &NonlinearCoupling::linear(),
            &p,
            1e-3,
            1000,
            1000,
            None,
        )
        .unwrap();
        let c0 = rec.uncertainties[0].c;
        let cf = rec.uncertainties.last().unwrap().c;
        assert!((cf - c0).abs() > 1e-4, "quartic run kept c: {c0} -> {cf}");
        // while the norm stays pinned
        assert!(rec.norm_drift() < 1e-10);
    }

    #[test]
    fn nonlinear_term_conserves_field_energy_at_second_order() {
        // the density potential kappa (n+1)/n rho^n is exactly the functional
        // gradient of the interaction energy; with any other prefactor the
        // measured field energy would not converge to a constant as dt -> 0
        let p = params();
        let g = build_grid(-16.0, 16.0, 512).unwrap();
        let (psi, _) = make_extended_gaussian(&EffectivePacketState::ground(), &g, &p).unwrap();
        let nl = NonlinearCoupling::new(vec![(1, 0.4), (2, 0.1)]).unwrap();
        let pot = Potential::Zero;
        let e0 = field_energy(&psi, &pot, &nl, &p).unwrap();
        let mut drifts = Vec::new();
        for steps in [200usize, 400] {
            let dt = 0.5 / steps as f64;
            let rec =
                split_step_evolve(&psi, &pot, &nl, &p, dt, steps, steps, Some(steps)).unwrap();
            let psi_f = &rec.snapshots.last().unwrap().1;
            let ef = field_energy(psi_f, &pot, &nl, &p).unwrap();
            drifts.push((ef - e0).abs());
            assert!(rec.norm_drift() < 1e-10);
        }
        let ratio = drifts[0] / drifts[1];
        assert!(
            ratio > 2.5,
            "energy drift did not shrink at second order: {drifts:?}"
        );
    }

    #[test]
    fn blowup_reports_last_good_step() {
        let p = params();
        let g = build_grid(-16.0, 16.0, 64).unwrap();
        let (mut psi, _) =
            make_extended_gaussian(&EffectivePacketState::ground(), &g, &p).unwrap();
        // a huge amplitude overflows rho^4 and poisons the potential phase
        psi.scale(num_complex::Complex::new(1e80, 0.0));
        let nl = NonlinearCoupling::new(vec![(4, 1.0)]).unwrap();
        let err = split_step_evolve(&psi, &Potential::Zero, &nl, &p, 1e-3, 50, 10, None);
        assert!(matches!(err, Err(Error::NumericalFailure { .. })));
    }

    #[test]
    fn stability_heuristic_warns() {
        let p = params();
        let g = build_grid(-10.0, 10.0, 2048).unwrap();
        let (psi, _) = make_extended_gaussian(&EffectivePacketState::ground(), &g, &p).unwrap();
        let rec = split_step_evolve(
            &psi,
            &Potential::Zero,
            &NonlinearCoupling::linear(),
            &p,
            0.5,
            2,
            1,
            None,
        )
        .unwrap();
        assert!(rec.warnings.iter().any(|w| w.contains("heuristic")));
    }

    #[test]
    fn kinematics_and_measured_moments_agree_after_free_flight() {
        // sanity link between the packet layer and the evolution layer
        let p = params();
        let g = build_grid(-40.0, 40.0, 1024).unwrap();
        let state = EffectivePacketState::new(0.0, 0.5, 1.0, 0.0, 0.0, 2).unwrap();
        let (psi, _) = make_extended_gaussian(&state, &g, &p).unwrap();
        let (m, _) = compute_moment_set(&psi, &p).unwrap();
        let kin = packet_kinematics(&state, &p);
        assert_abs_diff_eq!(m.p2, kin.p2, epsilon = 1e-9);
    }
}

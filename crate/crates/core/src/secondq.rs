//! Second-quantized moment operators acting on N-point correlation
//! functionals, represented by their test functions.
//!
//! A functional `Psi[psi] = int phi(x_1..x_N) psi(x_1)..psi(x_N)` is stored
//! through its test function `phi` on an N-axis grid. Each one-body operator
//! `A = int (a psi)(x) d/dpsi(x)` acts on the functional as the transposed
//! kernel on the test function, summed over arguments:
//!
//! ```text
//! Qhat > phi = N phi                  Kx > phi = (sum_i x_i^2) phi
//! Xhat > phi = (sum_i x_i) phi        Kp > phi = -hbar^2 sum_i d_i^2 phi
//! Phat > phi = +i hbar sum_i d_i phi  KD > phi = i hbar (sum_i x_i d_i + N/2) phi
//! ```
//!
//! Note the sign of `Phat`: the defining form `-i hbar int dpsi d/dpsi`
//! picks up a sign under the integration by parts that moves the derivative
//! onto the test function (just as `KD` flips from `-i hbar` to `+i hbar`).
//! The composite operators (varsigma and both Casimirs) are built strictly by
//! composing these primitives, so the closed angular-momentum forms remain
//! genuine cross-checks.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::{decode_coords, ComplexField, GridND, PhysicalParams, DECAY_TOL};
use crate::scalar::{real, Real};
use crate::spectral::{derivative_unchecked, inner, norm};

/// An N-particle correlation functional (N = 1, 2, 3) held as its test
/// function. All axes must be the same 1D grid.
///
/// The public constructor symmetrizes over argument exchange, since the
/// functional only sees the symmetric part of `phi`. [`CorrelationFunction::from_raw`]
/// skips that projection; eigenmode construction needs it because the
/// symmetric projection annihilates some angular sectors (for N = 3, all
/// `n != 0 mod 3`), while the operators themselves commute with
/// symmetrization and act identically either way.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFunction<T> {
    field: ComplexField<T>,
}

impl<T: Real> CorrelationFunction<T> {
    pub fn new(field: ComplexField<T>) -> Result<Self> {
        Self::check_grid(&field)?;
        let field = symmetrize(&field)?;
        Ok(Self { field })
    }

    /// Wrap without symmetrizing (still validates the grid).
    pub fn from_raw(field: ComplexField<T>) -> Result<Self> {
        Self::check_grid(&field)?;
        Ok(Self { field })
    }

    fn check_grid(field: &ComplexField<T>) -> Result<()> {
        let dim = field.grid().dim();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!(
                "correlation functions support N in 1..=3, got {dim}"
            )));
        }
        if !field.grid().axes_equal() {
            return Err(Error::GridMismatch(
                "correlation-function axes must share one 1D grid".into(),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn n_particles(&self) -> usize {
        self.field.grid().dim()
    }

    #[inline]
    pub fn field(&self) -> &ComplexField<T> {
        &self.field
    }

    pub fn into_field(self) -> ComplexField<T> {
        self.field
    }

    pub fn grid(&self) -> &GridND<T> {
        self.field.grid()
    }

    /// Max |phi| over the domain faces, against the decay tolerance.
    pub fn boundary_decay(&self) -> crate::grid::DecayDiagnostic<T> {
        self.field.boundary_decay(real(DECAY_TOL))
    }
}

/// Average of `phi` over all argument permutations.
///
/// Evaluated per index orbit in a canonical order (sorted index tuple,
/// anchored compensated mean), so every orbit member receives the bitwise
/// same value and a second pass reproduces the first bit-for-bit.
pub fn symmetrize<T: Real>(field: &ComplexField<T>) -> Result<ComplexField<T>> {
    let grid = field.grid().clone();
    if !grid.axes_equal() {
        return Err(Error::GridMismatch("symmetrization needs identical axes".into()));
    }
    let dim = grid.dim();
    if dim == 1 {
        return Ok(field.clone());
    }
    let strides = grid.strides();
    let perms: &[&[usize]] = match dim {
        2 => &[&[0, 1], &[1, 0]],
        _ => &[
            &[0, 1, 2],
            &[0, 2, 1],
            &[1, 0, 2],
            &[1, 2, 0],
            &[2, 0, 1],
            &[2, 1, 0],
        ],
    };
    let inv = T::one() / real::<T>(perms.len() as f64);
    let src = field.values();
    let mut out = vec![Complex::new(T::zero(), T::zero()); src.len()];
    let mut idx = [0usize; 3];
    for (flat, slot) in out.iter_mut().enumerate() {
        let mut rem = flat;
        for a in 0..dim {
            idx[a] = rem / strides[a];
            rem %= strides[a];
        }
        idx[..dim].sort_unstable();
        let anchor_flat: usize = (0..dim).map(|a| idx[a] * strides[a]).sum();
        let anchor = src[anchor_flat];
        // sum of exact zero diffs when the orbit is already constant
        let mut acc = Complex::new(T::zero(), T::zero());
        for perm in perms {
            let mut p_flat = 0usize;
            for (a, &pa) in perm.iter().enumerate() {
                p_flat += idx[pa] * strides[a];
            }
            acc += src[p_flat] - anchor;
        }
        *slot = anchor + acc * inv;
    }
    field.with_values(out)
}

/// The second-quantized moment observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SecondQuantizedOp {
    /// Particle number.
    Qhat,
    /// Total position.
    Xhat,
    /// Total momentum.
    Phat,
    /// Position-squared moment.
    Kx,
    /// Momentum-squared moment.
    Kp,
    /// Dilatation moment.
    KD,
    /// `Qhat Kx - Xhat^2`.
    VarsigmaX,
    /// `Qhat Kp - Phat^2`.
    VarsigmaP,
    /// `Qhat KD - (Xhat Phat + Phat Xhat)/2`.
    VarsigmaD,
    /// sl(2) Casimir `(Kp Kx + Kx Kp)/2 - KD^2`.
    CasimirC,
    /// Reduced Casimir `(vsx vsp + vsp vsx)/2 - vsD^2`.
    ReducedC,
}

impl SecondQuantizedOp {
    pub const ALL: [SecondQuantizedOp; 11] = [
        SecondQuantizedOp::Qhat,
        SecondQuantizedOp::Xhat,
        SecondQuantizedOp::Phat,
        SecondQuantizedOp::Kx,
        SecondQuantizedOp::Kp,
        SecondQuantizedOp::KD,
        SecondQuantizedOp::VarsigmaX,
        SecondQuantizedOp::VarsigmaP,
        SecondQuantizedOp::VarsigmaD,
        SecondQuantizedOp::CasimirC,
        SecondQuantizedOp::ReducedC,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SecondQuantizedOp::Qhat => "Qhat",
            SecondQuantizedOp::Xhat => "Xhat",
            SecondQuantizedOp::Phat => "Phat",
            SecondQuantizedOp::Kx => "Kx",
            SecondQuantizedOp::Kp => "Kp",
            SecondQuantizedOp::KD => "KD",
            SecondQuantizedOp::VarsigmaX => "VarsigmaX",
            SecondQuantizedOp::VarsigmaP => "VarsigmaP",
            SecondQuantizedOp::VarsigmaD => "VarsigmaD",
            SecondQuantizedOp::CasimirC => "CasimirC",
            SecondQuantizedOp::ReducedC => "ReducedC",
        }
    }
}

/// Apply an operator to the test function.
pub fn apply_op<T: Real>(
    op: SecondQuantizedOp,
    cf: &CorrelationFunction<T>,
    params: &PhysicalParams<T>,
) -> Result<CorrelationFunction<T>> {
    use SecondQuantizedOp::*;
    let hbar = params.hbar;
    let dim = cf.n_particles();
    let field = match op {
        Qhat => {
            let mut f = cf.field.clone();
            f.scale(Complex::new(real::<T>(dim as f64), T::zero()));
            f
        }
        Xhat => mul_coords(&cf.field, |coords| coords.iter().fold(T::zero(), |a, &x| a + x)),
        Kx => mul_coords(&cf.field, |coords| coords.iter().fold(T::zero(), |a, &x| a + x * x)),
        Phat => {
            // +i hbar sum_i d_i (transposed kernel of -i hbar d)
            let mut acc = sum_axis_derivatives(&cf.field, 1)?;
            rotate_i(&mut acc, hbar);
            acc
        }
        Kp => {
            let mut acc = sum_axis_derivatives(&cf.field, 2)?;
            acc.scale(Complex::new(-hbar * hbar, T::zero()));
            acc
        }
        KD => {
            // i hbar (sum_i x_i d_i + N/2)
            let mut acc = euler_operator(&cf.field)?;
            let half_n = real::<T>(dim as f64 / 2.0);
            for (v, src) in acc.values_mut().iter_mut().zip(cf.field.values()) {
                *v += *src * half_n;
            }
            rotate_i(&mut acc, hbar);
            acc
        }
        VarsigmaX => {
            return compose2(cf, params, (Qhat, Kx), (Xhat, Xhat));
        }
        VarsigmaP => {
            return compose2(cf, params, (Qhat, Kp), (Phat, Phat));
        }
        VarsigmaD => {
            let qkd = apply_op(Qhat, &apply_op(KD, cf, params)?, params)?;
            let xp = apply_op(Xhat, &apply_op(Phat, cf, params)?, params)?;
            let px = apply_op(Phat, &apply_op(Xhat, cf, params)?, params)?;
            let half = real::<T>(0.5);
            let vals = qkd
                .field
                .values()
                .iter()
                .zip(xp.field.values())
                .zip(px.field.values())
                .map(|((a, b), c)| *a - (*b + *c) * half)
                .collect();
            qkd.field.with_values(vals)?
        }
        CasimirC => {
            let kpkx = apply_op(Kp, &apply_op(Kx, cf, params)?, params)?;
            let kxkp = apply_op(Kx, &apply_op(Kp, cf, params)?, params)?;
            let kd2 = apply_op(KD, &apply_op(KD, cf, params)?, params)?;
            let half = real::<T>(0.5);
            let vals = kpkx
                .field
                .values()
                .iter()
                .zip(kxkp.field.values())
                .zip(kd2.field.values())
                .map(|((a, b), c)| (*a + *b) * half - *c)
                .collect();
            kpkx.field.with_values(vals)?
        }
        ReducedC => {
            let sxsp = apply_op(VarsigmaX, &apply_op(VarsigmaP, cf, params)?, params)?;
            let spsx = apply_op(VarsigmaP, &apply_op(VarsigmaX, cf, params)?, params)?;
            let sd2 = apply_op(VarsigmaD, &apply_op(VarsigmaD, cf, params)?, params)?;
            let half = real::<T>(0.5);
            let vals = sxsp
                .field
                .values()
                .iter()
                .zip(spsx.field.values())
                .zip(sd2.field.values())
                .map(|((a, b), c)| (*a + *b) * half - *c)
                .collect();
            sxsp.field.with_values(vals)?
        }
    };
    Ok(CorrelationFunction { field })
}

/// `first.0 first.1 - second.0 second.1` applied as compositions.
fn compose2<T: Real>(
    cf: &CorrelationFunction<T>,
    params: &PhysicalParams<T>,
    first: (SecondQuantizedOp, SecondQuantizedOp),
    second: (SecondQuantizedOp, SecondQuantizedOp),
) -> Result<CorrelationFunction<T>> {
    let a = apply_op(first.0, &apply_op(first.1, cf, params)?, params)?;
    let b = apply_op(second.0, &apply_op(second.1, cf, params)?, params)?;
    let vals = a
        .field
        .values()
        .iter()
        .zip(b.field.values())
        .map(|(x, y)| *x - *y)
        .collect();
    Ok(CorrelationFunction { field: a.field.with_values(vals)? })
}

fn mul_coords<T: Real>(field: &ComplexField<T>, w: impl Fn(&[T]) -> T) -> ComplexField<T> {
    let grid = field.grid().clone();
    let dim = grid.dim();
    let mut coords = [T::zero(); 3];
    let vals = field
        .values()
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            decode_coords(&grid, idx, &mut coords);
            *v * w(&coords[..dim])
        })
        .collect();
    field.with_values(vals).expect("same length")
}

/// Sum of per-axis spectral derivatives of the given order.
fn sum_axis_derivatives<T: Real>(field: &ComplexField<T>, order: u32) -> Result<ComplexField<T>> {
    let dim = field.grid().dim();
    let mut acc = derivative_unchecked(field, 0, order)?;
    for axis in 1..dim {
        let d = derivative_unchecked(field, axis, order)?;
        for (a, b) in acc.values_mut().iter_mut().zip(d.values()) {
            *a += *b;
        }
    }
    Ok(acc)
}

/// `sum_i x_i d_i phi`.
fn euler_operator<T: Real>(field: &ComplexField<T>) -> Result<ComplexField<T>> {
    let grid = field.grid().clone();
    let dim = grid.dim();
    let mut acc = ComplexField::zeros(grid.clone());
    let mut coords = [T::zero(); 3];
    for axis in 0..dim {
        let d = derivative_unchecked(field, axis, 1)?;
        for (idx, (a, b)) in acc.values_mut().iter_mut().zip(d.values()).enumerate() {
            decode_coords(&grid, idx, &mut coords);
            *a += *b * coords[axis];
        }
    }
    Ok(acc)
}

/// Multiply in place by `i * scale`.
fn rotate_i<T: Real>(field: &mut ComplexField<T>, scale: T) {
    for v in field.values_mut() {
        *v = Complex::new(-v.im * scale, v.re * scale);
    }
}

/// `|| (a b - b a - sum coeff op) phi || / ||phi||`.
///
/// `expected` lists the right-hand side as signed multiples of operators;
/// an empty slice means the commutator should vanish.
pub fn commutator_residual<T: Real>(
    a: SecondQuantizedOp,
    b: SecondQuantizedOp,
    expected: &[(Complex<T>, SecondQuantizedOp)],
    cf: &CorrelationFunction<T>,
    params: &PhysicalParams<T>,
) -> Result<T> {
    let ab = apply_op(a, &apply_op(b, cf, params)?, params)?;
    let ba = apply_op(b, &apply_op(a, cf, params)?, params)?;
    let mut vals: Vec<Complex<T>> = ab
        .field
        .values()
        .iter()
        .zip(ba.field.values())
        .map(|(x, y)| *x - *y)
        .collect();
    for (coeff, op) in expected {
        let term = apply_op(*op, cf, params)?;
        for (v, t) in vals.iter_mut().zip(term.field.values()) {
            *v -= *coeff * *t;
        }
    }
    let resid_field = cf.field.with_values(vals)?;
    let base = norm(&cf.field);
    if !(base > T::zero()) {
        return Err(Error::ZeroNorm);
    }
    Ok(norm(&resid_field) / base)
}

/// Which Casimir to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CasimirKind {
    /// `(Kp Kx + Kx Kp)/2 - KD^2`.
    Full,
    /// `(vsx vsp + vsp vsx)/2 - vsD^2`.
    Reduced,
}

/// Casimir action, built strictly from [`apply_op`] compositions so the
/// angular-momentum identities stay independent cross-checks.
pub fn casimir_apply<T: Real>(
    which: CasimirKind,
    cf: &CorrelationFunction<T>,
    params: &PhysicalParams<T>,
) -> Result<CorrelationFunction<T>> {
    match which {
        CasimirKind::Full => apply_op(SecondQuantizedOp::CasimirC, cf, params),
        CasimirKind::Reduced => apply_op(SecondQuantizedOp::ReducedC, cf, params),
    }
}

/// Direct angular-momentum form of the Casimir action.
///
/// * N = 2: the full Casimir, `hbar^2 [ (i(x d_y - y d_x))^2 - 1 ] phi`.
/// * N = 3: the reduced Casimir,
///   `9 hbar^2 [ (1/3)(i(x d_y - y d_x + y d_z - z d_y + z d_x - x d_z))^2 - 1 ] f`.
pub fn angular_form_apply<T: Real>(
    cf: &CorrelationFunction<T>,
    params: &PhysicalParams<T>,
) -> Result<CorrelationFunction<T>> {
    let dim = cf.n_particles();
    if dim == 1 {
        return Err(Error::Unsupported(
            "angular form exists for N = 2 (full Casimir) and N = 3 (reduced)".into(),
        ));
    }
    let h2 = params.hbar * params.hbar;
    let l1 = angular_generator(&cf.field)?;
    let l2 = angular_generator(&l1)?;
    let field = match dim {
        2 => {
            // hbar^2 (L^2 - 1) with L = i(x d_y - y d_x)
            let vals = l2
                .values()
                .iter()
                .zip(cf.field.values())
                .map(|(a, b)| (*a - *b) * h2)
                .collect();
            cf.field.with_values(vals)?
        }
        _ => {
            // 9 hbar^2 ((1/3) L_sum^2 - 1)
            let third = T::one() / real::<T>(3.0);
            let nine = real::<T>(9.0);
            let vals = l2
                .values()
                .iter()
                .zip(cf.field.values())
                .map(|(a, b)| (*a * third - *b) * (nine * h2))
                .collect();
            cf.field.with_values(vals)?
        }
    };
    Ok(CorrelationFunction { field })
}

/// `i sum_{cyclic pairs} (x_a d_b - x_b d_a)` — for N = 2 the plane rotation
/// generator, for N = 3 the sum `J_1 + J_2 + J_3`.
fn angular_generator<T: Real>(field: &ComplexField<T>) -> Result<ComplexField<T>> {
    let grid = field.grid().clone();
    let dim = grid.dim();
    let pairs: &[(usize, usize)] = match dim {
        2 => &[(0, 1)],
        3 => &[(0, 1), (1, 2), (2, 0)],
        _ => return Err(Error::Unsupported("angular generator needs N in {2,3}".into())),
    };
    let mut derivs = Vec::with_capacity(dim);
    for axis in 0..dim {
        derivs.push(derivative_unchecked(field, axis, 1)?);
    }
    let mut coords = [T::zero(); 3];
    let mut vals = vec![Complex::new(T::zero(), T::zero()); field.values().len()];
    for (idx, slot) in vals.iter_mut().enumerate() {
        decode_coords(&grid, idx, &mut coords);
        let mut acc = Complex::new(T::zero(), T::zero());
        for &(a, b) in pairs {
            acc += derivs[b].values()[idx] * coords[a] - derivs[a].values()[idx] * coords[b];
        }
        // multiply by i
        *slot = Complex::new(-acc.im, acc.re);
    }
    field.with_values(vals)
}

/// Angular eigenmodes with a Gaussian radial envelope.
///
/// * N = 2: `(x + i y)^n e^{-(x^2+y^2)/2}` — the bare `e^{i n theta}` is not
///   integrable on the plane, and the envelope commutes with the purely
///   angular Casimir, so the eigenvalue is untouched.
/// * N = 3: the same construction in the plane orthogonal to `(1,1,1)/sqrt(3)`
///   with the pinned frame `e1 = (1,-1,0)/sqrt(2)`, `e2 = e3 x e1`.
///
/// Returned unsymmetrized: for N = 3 the symmetric projection annihilates
/// every sector with `n != 0 mod 3` (cyclic argument permutations are 120
/// degree rotations about the frame axis), while the Casimir acts the same
/// on every isotypic component.
pub fn make_eigenmode<T: Real>(
    n_particles: usize,
    n: u32,
    grid: &GridND<T>,
) -> Result<CorrelationFunction<T>> {
    if grid.dim() != n_particles {
        return Err(Error::GridMismatch(format!(
            "grid has {} axes, requested N = {n_particles}",
            grid.dim()
        )));
    }
    let half = real::<T>(0.5);
    let field = match n_particles {
        2 => ComplexField::from_fn(grid, |c| {
            let (x, y) = (c[0], c[1]);
            let z = Complex::new(x, y).powu(n);
            z * (-(x * x + y * y) * half).exp()
        }),
        3 => {
            let s2 = real::<T>(std::f64::consts::SQRT_2);
            let s6 = real::<T>(6.0f64.sqrt());
            ComplexField::from_fn(grid, |c| {
                let (x, y, z) = (c[0], c[1], c[2]);
                let u = (x - y) / s2;
                let v = (x + y - real::<T>(2.0) * z) / s6;
                let w = Complex::new(u, v).powu(n);
                w * (-(x * x + y * y + z * z) * half).exp()
            })
        }
        _ => {
            return Err(Error::Unsupported(
                "eigenmodes exist for N = 2 and N = 3".into(),
            ))
        }
    };
    CorrelationFunction::from_raw(field)
}

/// Rayleigh-quotient estimate of an operator eigenvalue on `cf`, plus the
/// eigenstate-quality residual `||O phi - lambda phi|| / ||phi||`.
#[derive(Debug, Clone, Copy)]
pub struct RayleighResult<T> {
    pub value: T,
    pub residual: T,
}

pub fn rayleigh_quotient<T: Real>(
    op_action: impl Fn(&CorrelationFunction<T>) -> Result<CorrelationFunction<T>>,
    cf: &CorrelationFunction<T>,
) -> Result<RayleighResult<T>> {
    let applied = op_action(cf)?;
    let nrm2 = inner(&cf.field, &cf.field)?.re;
    if !(nrm2 > T::zero()) {
        return Err(Error::ZeroNorm);
    }
    let value = inner(&cf.field, &applied.field)?.re / nrm2;
    let vals = applied
        .field
        .values()
        .iter()
        .zip(cf.field.values())
        .map(|(a, b)| *a - *b * value)
        .collect();
    let resid_field = cf.field.with_values(vals)?;
    let residual = norm(&resid_field) / nrm2.sqrt();
    Ok(RayleighResult { value, residual })
}

/// Evaluate the functional: `int phi(x_1..x_N) psi(x_1)..psi(x_N) dV`.
pub fn evaluate_functional<T: Real>(
    cf: &CorrelationFunction<T>,
    psi: &ComplexField<T>,
) -> Result<Complex<T>> {
    if psi.grid().dim() != 1 {
        return Err(Error::GridMismatch("psi must be a 1D field".into()));
    }
    let axis = psi.grid().axis(0);
    if axis != cf.grid().axis(0) {
        return Err(Error::GridMismatch(
            "psi grid must match every correlation-function axis".into(),
        ));
    }
    let dim = cf.n_particles();
    let grid = cf.grid();
    let strides = grid.strides();
    let n = axis.len();
    let psi_v = psi.values();
    let mut acc = Complex::new(T::zero(), T::zero());
    for (flat, phi) in cf.field.values().iter().enumerate() {
        let mut w = *phi;
        let mut rem = flat;
        for a in 0..dim {
            let ia = rem / strides[a];
            rem %= strides[a];
            w = w * psi_v[ia];
        }
        debug_assert!(flat / strides[0] < n);
        acc += w;
    }
    Ok(acc * grid.cell_volume())
}

/// Outcome of [`functional_derivative_check`].
#[derive(Debug, Clone, Copy)]
pub struct FdCheck<T> {
    /// Relative discrepancy between the two computation paths.
    pub discrepancy: T,
    /// Finite-difference step actually used on the samples.
    pub step: T,
    /// True when the amplitude-based step underflowed and was clamped.
    pub step_adjusted: bool,
}

/// Independent oracle for the induced test-function actions.
///
/// The operator is applied through its defining field-theoretic form with
/// numerical functional derivatives: first order in `d/dpsi` for the six
/// primitives, second order (with the exact contraction corrections from
/// normal ordering, e.g. `Qhat Kx = :Qhat Kx: + Kx` and
/// `CasimirC = :...: - (3/4) hbar^2 Qhat`) for the varsigma operators and the
/// full Casimir. The result is compared against
/// `evaluate_functional(apply_op(op, cf), psi)`.
///
/// `ReducedC` is rejected: its defining form is fourth order in `d/dpsi`,
/// hopeless for finite differences; in code it is literally a composition of
/// the operators this oracle does validate.
///
/// The discrepancy is normalized by the larger of the two routes and the
/// bare functional value `|Psi[psi]|`, so operators that annihilate a sector
/// (the varsigmas on one-particle functionals) compare two zeros cleanly
/// instead of dividing noise by noise.
pub fn functional_derivative_check<T: Real>(
    op: SecondQuantizedOp,
    cf: &CorrelationFunction<T>,
    psi: &ComplexField<T>,
    params: &PhysicalParams<T>,
) -> Result<FdCheck<T>> {
    use SecondQuantizedOp::*;
    let base = evaluate_functional(cf, psi)?.norm();
    let reference = evaluate_functional(&apply_op(op, cf, params)?, psi)?;

    let axis = psi.grid().axis(0).clone();
    let dx = axis.dx();
    let scale = psi.max_abs();
    let step_adjusted = !(scale > T::zero());
    let base = if step_adjusted { T::one() } else { scale.max(T::one()) };
    let hbar = params.hbar;

    // one-body images (a psi)(x) for each primitive kernel
    let dpsi = derivative_unchecked(psi, 0, 1)?;
    let d2psi = derivative_unchecked(psi, 0, 2)?;
    let n = axis.len();
    let image = |which: SecondQuantizedOp| -> Vec<Complex<T>> {
        (0..n)
            .map(|j| {
                let x = axis.point(j);
                let v = psi.values()[j];
                let dv = dpsi.values()[j];
                let ddv = d2psi.values()[j];
                match which {
                    Qhat => v,
                    Xhat => v * x,
                    Phat => Complex::new(T::zero(), -hbar) * dv,
                    Kx => v * (x * x),
                    Kp => ddv * (-hbar * hbar),
                    KD => Complex::new(T::zero(), -hbar) * (dv * x + v * real::<T>(0.5)),
                    _ => unreachable!("only one-body kernels have images"),
                }
            })
            .collect()
    };

    let fd = match op {
        Qhat | Xhat | Phat | Kx | Kp | KD => {
            let h = real::<T>(1e-6) * base / dx;
            let d1 = first_derivatives(cf, psi, h, dx)?;
            let img = image(op);
            let mut acc = Complex::new(T::zero(), T::zero());
            for j in 0..n {
                acc += img[j] * d1[j];
            }
            FdEval { value: acc * dx, step: h }
        }
        VarsigmaX | VarsigmaP | VarsigmaD | CasimirC => {
            let h = real::<T>(1e-4) * base / dx;
            let d2 = second_derivatives(cf, psi, h, dx)?;
            let pair = |a: &[Complex<T>], b: &[Complex<T>]| -> Complex<T> {
                let mut acc = Complex::new(T::zero(), T::zero());
                for j in 0..n {
                    for l in 0..n {
                        acc += a[j] * b[l] * d2[j * n + l];
                    }
                }
                acc * (dx * dx)
            };
            let value = match op {
                VarsigmaX => pair(&image(Kx), &image(Qhat)) - pair(&image(Xhat), &image(Xhat)),
                VarsigmaP => pair(&image(Kp), &image(Qhat)) - pair(&image(Phat), &image(Phat)),
                VarsigmaD => {
                    let half = real::<T>(0.5);
                    pair(&image(KD), &image(Qhat))
                        - (pair(&image(Xhat), &image(Phat)) + pair(&image(Phat), &image(Xhat)))
                            * half
                }
                CasimirC => {
                    // normal-ordered two-body piece plus the contraction
                    // correction (x^2 p^2 + p^2 x^2)/2 - D^2 = -(3/4) hbar^2
                    let half = real::<T>(0.5);
                    let two_body = (pair(&image(Kp), &image(Kx)) + pair(&image(Kx), &image(Kp)))
                        * half
                        - pair(&image(KD), &image(KD));
                    let h1 = real::<T>(1e-6) * base / dx;
                    let d1 = first_derivatives(cf, psi, h1, dx)?;
                    let img_q = image(Qhat);
                    let mut qhat = Complex::new(T::zero(), T::zero());
                    for j in 0..n {
                        qhat += img_q[j] * d1[j];
                    }
                    qhat = qhat * dx;
                    two_body - qhat * (real::<T>(0.75) * hbar * hbar)
                }
                _ => unreachable!(),
            };
            FdEval { value, step: h }
        }
        ReducedC => {
            return Err(Error::Unsupported(
                "ReducedC needs fourth-order functional derivatives; it is a \
                 composition of FD-validated operators"
                    .into(),
            ))
        }
    };

    let denom = reference
        .norm()
        .max(fd.value.norm())
        .max(base)
        .max(real::<T>(1e-30));
    Ok(FdCheck {
        discrepancy: (reference - fd.value).norm() / denom,
        step: fd.step,
        step_adjusted,
    })
}

struct FdEval<T> {
    value: Complex<T>,
    step: T,
}

/// `dPsi/dpsi(x_j)` for all j by central differences; the 1/dx converts the
/// sample partial into the continuum functional-derivative density.
fn first_derivatives<T: Real>(
    cf: &CorrelationFunction<T>,
    psi: &ComplexField<T>,
    h: T,
    dx: T,
) -> Result<Vec<Complex<T>>> {
    let n = psi.values().len();
    let mut work = psi.clone();
    let mut out = Vec::with_capacity(n);
    let two_h_dx = real::<T>(2.0) * h * dx;
    for j in 0..n {
        let orig = work.values()[j];
        work.values_mut()[j] = orig + Complex::new(h, T::zero());
        let plus = evaluate_functional(cf, &work)?;
        work.values_mut()[j] = orig - Complex::new(h, T::zero());
        let minus = evaluate_functional(cf, &work)?;
        work.values_mut()[j] = orig;
        out.push((plus - minus) / two_h_dx);
    }
    Ok(out)
}

/// Dense symmetric matrix of second functional derivatives
/// `d^2 Psi / dpsi(x_j) dpsi(x_l)`.
fn second_derivatives<T: Real>(
    cf: &CorrelationFunction<T>,
    psi: &ComplexField<T>,
    h: T,
    dx: T,
) -> Result<Vec<Complex<T>>> {
    let n = psi.values().len();
    let mut work = psi.clone();
    let mut out = vec![Complex::new(T::zero(), T::zero()); n * n];
    let center = evaluate_functional(cf, psi)?;
    let hh = Complex::new(h, T::zero());
    let h2dx2 = h * h * dx * dx;
    let four_h2dx2 = real::<T>(4.0) * h2dx2;
    for j in 0..n {
        // diagonal: (f(+h) - 2 f + f(-h)) / (h dx)^2
        let oj = work.values()[j];
        work.values_mut()[j] = oj + hh;
        let plus = evaluate_functional(cf, &work)?;
        work.values_mut()[j] = oj - hh;
        let minus = evaluate_functional(cf, &work)?;
        work.values_mut()[j] = oj;
        out[j * n + j] = (plus - center - center + minus) / h2dx2;
        for l in (j + 1)..n {
            let ol = work.values()[l];
            work.values_mut()[j] = oj + hh;
            work.values_mut()[l] = ol + hh;
            let pp = evaluate_functional(cf, &work)?;
            work.values_mut()[l] = ol - hh;
            let pm = evaluate_functional(cf, &work)?;
            work.values_mut()[j] = oj - hh;
            let mm = evaluate_functional(cf, &work)?;
            work.values_mut()[l] = ol + hh;
            let mp = evaluate_functional(cf, &work)?;
            work.values_mut()[j] = oj;
            work.values_mut()[l] = ol;
            let mixed = (pp - pm - mp + mm) / four_h2dx2;
            out[j * n + l] = mixed;
            out[l * n + j] = mixed;
        }
    }
    Ok(out)
}

/// Quadrature of `sigma(p) psi_{-p} psi_{+p} dp / (2 pi)` over the FFT
/// wavenumber grid, with the continuum transform convention
/// `psi_p = int psi(x) e^{-i p x} dx`. This is the right-hand side of the
/// Gaussian-functional identity; the `1/(2 pi)` belongs to the `dp`
/// integration, matching the `dp/(2 pi)` in the construction of the
/// two-point test function from `sigma`.
pub fn momentum_pair_integral<T: Real>(
    psi: &ComplexField<T>,
    sigma: impl Fn(T) -> T,
) -> Result<Complex<T>> {
    if psi.grid().dim() != 1 {
        return Err(Error::GridMismatch("needs a 1D field".into()));
    }
    let axis = psi.grid().axis(0).clone();
    let n = axis.len();
    let mut hat = psi.clone();
    crate::spectral::fft_axis(&mut hat, 0, crate::spectral::FftDirection::Forward);
    // continuum transform: psi_p = dx e^{-i p x_min} * DFT
    let ks = axis.wavenumbers();
    let dx = axis.dx();
    let x_min = axis.x_min();
    let transform: Vec<Complex<T>> = hat
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| *v * Complex::from_polar(dx, -ks[k] * x_min))
        .collect();
    let dp = T::TAU() / axis.length();
    let mut acc = Complex::new(T::zero(), T::zero());
    for k in 0..n {
        let neg_k = (n - k) % n;
        acc += transform[neg_k] * transform[k] * sigma(ks[k]);
    }
    Ok(acc * Complex::new(dp / T::TAU(), T::zero()))
}

//! Seeded random states for the property and algebra suites: smooth
//! boundary-decaying test functions (polynomial times Gaussian) and finite
//! superpositions of extended packets.

use num_complex::Complex;
use rand::Rng;

use crate::error::Result;
use crate::grid::{ComplexField, Grid1D, GridND, PhysicalParams};
use crate::packets::{make_extended_gaussian, EffectivePacketState};
use crate::scalar::{real, Real};
use crate::secondq::CorrelationFunction;
use crate::spectral::norm;

/// Random polynomial (total degree <= `max_degree`) with complex coefficients
/// times a unit Gaussian envelope, symmetrized and normalized. Smooth,
/// spectrally exact on any reasonable grid, and decaying at the boundary.
pub fn random_correlation_function<T: Real>(
    grid: &GridND<T>,
    max_degree: u32,
    rng: &mut impl Rng,
) -> Result<CorrelationFunction<T>> {
    let dim = grid.dim();
    // dense coefficient tensor over exponents with sum <= max_degree
    let mut terms: Vec<([u32; 3], Complex<T>)> = Vec::new();
    let deg = max_degree;
    for i in 0..=deg {
        for j in 0..=if dim >= 2 { deg } else { 0 } {
            for k in 0..=if dim >= 3 { deg } else { 0 } {
                if i + j + k <= deg {
                    let c = Complex::new(
                        real::<T>(rng.gen_range(-1.0..1.0)),
                        real::<T>(rng.gen_range(-1.0..1.0)),
                    );
                    terms.push(([i, j, k], c));
                }
            }
        }
    }
    let half = real::<T>(0.5);
    let field = ComplexField::from_fn(grid, |coords| {
        let mut poly = Complex::new(T::zero(), T::zero());
        for (exps, c) in &terms {
            let mut mono = T::one();
            for (a, &x) in coords.iter().enumerate() {
                mono = mono * x.powi(exps[a] as i32);
            }
            poly += *c * mono;
        }
        let r2 = coords.iter().fold(T::zero(), |acc, &x| acc + x * x);
        poly * (-r2 * half).exp()
    });
    let cf = CorrelationFunction::new(field)?;
    let n = norm(cf.field());
    let mut f = cf.into_field();
    f.scale(Complex::new(T::one() / n, T::zero()));
    CorrelationFunction::from_raw(f)
}

/// Normalized random superposition of extended packets with levels up to
/// `k_max`, moderate displacements, and random relative phases.
pub fn random_packet_superposition<T: Real>(
    grid: &Grid1D<T>,
    params: &PhysicalParams<T>,
    k_max: u32,
    rng: &mut impl Rng,
) -> Result<ComplexField<T>> {
    let mut acc = ComplexField::zeros(GridND::from_axis(grid.clone()));
    for k in 0..=k_max {
        let state = EffectivePacketState::new(
            real::<T>(rng.gen_range(-1.5..1.5)),
            real::<T>(rng.gen_range(-1.5..1.5)),
            real::<T>(rng.gen_range(0.5..2.0)),
            real::<T>(rng.gen_range(-1.0..1.0)),
            T::zero(),
            k,
        )?;
        let (psi, _) = make_extended_gaussian(&state, grid, params)?;
        let w = Complex::new(
            real::<T>(rng.gen_range(-1.0..1.0)),
            real::<T>(rng.gen_range(-1.0..1.0)),
        );
        for (a, b) in acc.values_mut().iter_mut().zip(psi.values()) {
            *a += w * *b;
        }
    }
    let n = norm(&acc);
    if !(n > T::zero()) {
        return Err(crate::error::Error::ZeroNorm);
    }
    acc.scale(Complex::new(T::one() / n, T::zero()));
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_fields_are_normalized_and_decaying() {
        let g = GridND::cube(build_grid(-10.0, 10.0, 64).unwrap(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cf = random_correlation_function(&g, 3, &mut rng).unwrap();
        let n: f64 = norm(cf.field());
        assert!((n - 1.0).abs() < 1e-12);
        assert!(cf.boundary_decay().ok);
    }

    #[test]
    fn superpositions_are_reproducible() {
        let g = build_grid(-20.0, 20.0, 256).unwrap();
        let params = PhysicalParams::default();
        let a = random_packet_superposition(&g, &params, 3, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let b = random_packet_superposition(&g, &params, 3, &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        assert_eq!(a.values(), b.values());
    }
}

//! Quadrature and FFT-based spectral differentiation on periodic grids.
//!
//! The rectangle rule is exact-in-spirit here: on a periodic grid it
//! coincides with the trapezoid rule and converges spectrally for fields
//! that decay below tolerance at the boundary.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, DecayDiagnostic, DECAY_TOL};
use crate::scalar::{real, Real};

/// `sum_j f(x_j) * dV` over the whole grid.
pub fn quadrature<T: Real>(f: &ComplexField<T>) -> Complex<T> {
    let dv = f.grid().cell_volume();
    let sum = f
        .values()
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z);
    sum * dv
}

/// Grid inner product `<f, g> = sum conj(f) g * dV`.
pub fn inner<T: Real>(f: &ComplexField<T>, g: &ComplexField<T>) -> Result<Complex<T>> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch("inner product needs a shared grid".into()));
    }
    let dv = f.grid().cell_volume();
    let sum = f
        .values()
        .iter()
        .zip(g.values())
        .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b);
    Ok(sum * dv)
}

/// `sqrt(<f, f>)`.
pub fn norm<T: Real>(f: &ComplexField<T>) -> T {
    let dv = f.grid().cell_volume();
    let sum = f
        .values()
        .iter()
        .fold(T::zero(), |acc, z| acc + z.norm_sqr());
    (sum * dv).sqrt()
}

/// Wavenumber-space power sum `sum_k |F_k|^2 * dV / N`; equals
/// `quadrature(|f|^2)` by Parseval's identity.
pub fn spectral_power_sum<T: Real>(f: &ComplexField<T>) -> T {
    let mut hat = f.clone();
    let dim = hat.grid().dim();
    for axis in 0..dim {
        fft_axis(&mut hat, axis, FftDirection::Forward);
    }
    let dv = f.grid().cell_volume();
    let n = real::<T>(f.grid().len() as f64);
    hat.values()
        .iter()
        .fold(T::zero(), |acc, z| acc + z.norm_sqr())
        * dv
        / n
}

pub(crate) enum FftDirection {
    Forward,
    Inverse,
}

/// In-place FFT along one axis of a row-major field. The inverse direction
/// includes the 1/n normalization.
pub(crate) fn fft_axis<T: Real>(f: &mut ComplexField<T>, axis: usize, dir: FftDirection) {
    let grid = f.grid().clone();
    let n_axis = grid.axis(axis).len();
    let strides = grid.strides();
    let stride = strides[axis];
    let total = grid.len();

    let mut planner = FftPlanner::<T>::new();
    let fft = match dir {
        FftDirection::Forward => planner.plan_fft_forward(n_axis),
        FftDirection::Inverse => planner.plan_fft_inverse(n_axis),
    };
    let mut lane = vec![Complex::new(T::zero(), T::zero()); n_axis];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
    let inv_n = T::one() / real::<T>(n_axis as f64);

    let values = f.values_mut();
    let n_lanes = total / n_axis;
    for lane_idx in 0..n_lanes {
        // base offset of this lane: distribute lane_idx over the other axes
        let block = lane_idx / stride; // index over axes slower than `axis`
        let within = lane_idx % stride; // index over axes faster than `axis`
        let base = block * stride * n_axis + within;
        for (i, slot) in lane.iter_mut().enumerate() {
            *slot = values[base + i * stride];
        }
        fft.process_with_scratch(&mut lane, &mut scratch);
        match dir {
            FftDirection::Forward => {
                for (i, slot) in lane.iter().enumerate() {
                    values[base + i * stride] = *slot;
                }
            }
            FftDirection::Inverse => {
                for (i, slot) in lane.iter().enumerate() {
                    values[base + i * stride] = *slot * inv_n;
                }
            }
        }
    }
}

/// Derivative along `axis` of order 1 or 2 by the standard periodic
/// wavenumber multiplication, with the Nyquist mode zeroed for odd order.
///
/// Returns the derivative together with the boundary-decay diagnostic of the
/// input; a failed check is a warning, not an error, because callers may be
/// studying truncation on purpose.
pub fn spectral_derivative<T: Real>(
    f: &ComplexField<T>,
    axis: usize,
    order: u32,
) -> Result<(ComplexField<T>, DecayDiagnostic<T>)> {
    let decay = f.boundary_decay(real(DECAY_TOL));
    let df = derivative_unchecked(f, axis, order)?;
    Ok((df, decay))
}

/// Same as [`spectral_derivative`] but without the decay diagnostic; used in
/// inner loops where the caller has already checked the input once.
pub(crate) fn derivative_unchecked<T: Real>(
    f: &ComplexField<T>,
    axis: usize,
    order: u32,
) -> Result<ComplexField<T>> {
    if axis >= f.grid().dim() {
        return Err(Error::InvalidParameter(format!(
            "axis {axis} out of range for a {}-d field",
            f.grid().dim()
        )));
    }
    if order != 1 && order != 2 {
        return Err(Error::InvalidParameter(format!(
            "derivative order must be 1 or 2, got {order}"
        )));
    }
    let mut hat = f.clone();
    fft_axis(&mut hat, axis, FftDirection::Forward);

    let grid = f.grid().clone();
    let n_axis = grid.axis(axis).len();
    let ks = grid.axis(axis).wavenumbers();
    let stride = grid.strides()[axis];
    let values = hat.values_mut();
    let nyquist = n_axis / 2;
    for (flat, v) in values.iter_mut().enumerate() {
        let j = (flat / stride) % n_axis;
        let k = ks[j];
        *v = match order {
            1 => {
                if j == nyquist {
                    Complex::new(T::zero(), T::zero())
                } else {
                    // multiply by i*k
                    Complex::new(-v.im * k, v.re * k)
                }
            }
            _ => *v * (-k * k),
        };
    }
    fft_axis(&mut hat, axis, FftDirection::Inverse);
    Ok(hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use approx::assert_abs_diff_eq;

    fn gaussian_field(x_min: f64, x_max: f64, n: usize) -> ComplexField<f64> {
        let g = build_grid::<f64>(x_min, x_max, n).unwrap();
        ComplexField::from_fn_1d(&g, |x| Complex::new((-x * x).exp(), 0.0))
    }

    #[test]
    fn quadrature_of_gaussian_is_sqrt_pi() {
        let f = gaussian_field(-10.0, 10.0, 512);
        let q = quadrature(&f);
        assert_abs_diff_eq!(q.re, std::f64::consts::PI.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(q.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quadrature_of_zero_and_constant() {
        let g = build_grid::<f64>(0.0, 1.0, 64).unwrap();
        let zero = ComplexField::zeros(crate::grid::GridND::from_axis(g.clone()));
        assert_eq!(quadrature(&zero).re, 0.0);
        let one = ComplexField::from_fn_1d(&g, |_| Complex::new(1.0, 0.0));
        assert_abs_diff_eq!(quadrature(&one).re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn first_derivative_of_gaussian() {
        let f = gaussian_field(-10.0, 10.0, 512);
        let (df, decay) = spectral_derivative(&f, 0, 1).unwrap();
        assert!(decay.ok);
        let g = f.grid().axis(0);
        let mut max_err = 0.0f64;
        for j in 0..g.len() {
            let x = g.point(j);
            let exact = -2.0 * x * (-x * x).exp();
            max_err = max_err.max((df.values()[j].re - exact).abs());
            max_err = max_err.max(df.values()[j].im.abs());
        }
        assert!(max_err < 1e-10, "max err {max_err:e}");
    }

    #[test]
    fn second_derivative_of_gaussian() {
        let f = gaussian_field(-10.0, 10.0, 512);
        let (d2f, _) = spectral_derivative(&f, 0, 2).unwrap();
        let g = f.grid().axis(0);
        let mut max_err = 0.0f64;
        for j in 0..g.len() {
            let x = g.point(j);
            let exact = (4.0 * x * x - 2.0) * (-x * x).exp();
            max_err = max_err.max((d2f.values()[j].re - exact).abs());
        }
        assert!(max_err < 1e-9, "max err {max_err:e}");
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = build_grid::<f64>(-4.0, 4.0, 64).unwrap();
        let f = ComplexField::from_fn_1d(&g, |_| Complex::new(3.0, -1.0));
        let (df, _) = spectral_derivative(&f, 0, 1).unwrap();
        assert!(df.max_abs() < 1e-13);
    }

    #[test]
    fn twice_first_matches_second_order() {
        let f = gaussian_field(-10.0, 10.0, 512);
        let (df, _) = spectral_derivative(&f, 0, 1).unwrap();
        let (ddf, _) = spectral_derivative(&df, 0, 1).unwrap();
        let (d2f, _) = spectral_derivative(&f, 0, 2).unwrap();
        let max_err = ddf
            .values()
            .iter()
            .zip(d2f.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(max_err < 1e-9, "max err {max_err:e}");
    }

    #[test]
    fn parseval_identity() {
        let f = gaussian_field(-10.0, 10.0, 256);
        let direct = f
            .values()
            .iter()
            .fold(0.0, |acc, z| acc + z.norm_sqr())
            * f.grid().cell_volume();
        let spectral = spectral_power_sum(&f);
        assert_abs_diff_eq!(direct, spectral, epsilon = 1e-12 * direct);
    }

    #[test]
    fn axis_fft_works_in_2d() {
        // d/dy of exp(-x^2-y^2) = -2y exp(-x^2-y^2)
        let g = build_grid::<f64>(-8.0, 8.0, 64).unwrap();
        let gnd = crate::grid::GridND::cube(g, 2).unwrap();
        let f = ComplexField::from_fn(&gnd, |c| {
            Complex::new((-c[0] * c[0] - c[1] * c[1]).exp(), 0.0)
        });
        let (df, _) = spectral_derivative(&f, 1, 1).unwrap();
        let mut max_err = 0.0f64;
        for (idx, v) in df.values().iter().enumerate() {
            let mut coords = [0.0; 3];
            crate::grid::decode_coords(f.grid(), idx, &mut coords);
            let (x, y) = (coords[0], coords[1]);
            let exact = -2.0 * y * (-x * x - y * y).exp();
            max_err = max_err.max((v.re - exact).abs());
        }
        assert!(max_err < 1e-9, "max err {max_err:e}");
    }
}

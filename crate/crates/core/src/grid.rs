//! Uniform periodic grids in one to three dimensions and complex fields
//! sampled on them.
//!
//! The domain is toroidal: sample points are `x_j = x_min + j*dx` for
//! `j = 0..n-1`, with `x_max` itself not a sample (it aliases `x_min`).
//! All spectral operations assume fields decay below [`DECAY_TOL`] at the
//! outermost samples; violations are reported as diagnostics, not errors,
//! so truncation effects can be studied deliberately.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Absolute amplitude below which a field counts as decayed at the boundary.
pub const DECAY_TOL: f64 = 1e-12;

/// Planck constant and particle mass carried through every formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams<T> {
    pub hbar: T,
    pub mass: T,
}

impl<T: Real> PhysicalParams<T> {
    pub fn new(hbar: T, mass: T) -> Result<Self> {
        if !(hbar > T::zero()) || !hbar.is_finite() {
            return Err(Error::InvalidParameter(format!("hbar must be > 0, got {hbar}")));
        }
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(Error::InvalidParameter(format!("mass must be > 0, got {mass}")));
        }
        Ok(Self { hbar, mass })
    }
}

impl<T: Real> Default for PhysicalParams<T> {
    /// Natural units: `hbar = 1`, `mass = 1`.
    fn default() -> Self {
        Self { hbar: T::one(), mass: T::one() }
    }
}

/// Uniform periodic grid on `[x_min, x_max)` with a power-of-two number of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D<T> {
    x_min: T,
    x_max: T,
    n: usize,
    dx: T,
}

/// Construct a [`Grid1D`], rejecting degenerate intervals and sizes that are
/// not powers of two (transform sizes should never be a surprise).
pub fn build_grid<T: Real>(x_min: T, x_max: T, n: usize) -> Result<Grid1D<T>> {
    Grid1D::new(x_min, x_max, n)
}

impl<T: Real> Grid1D<T> {
    pub fn new(x_min: T, x_max: T, n: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() || !(x_max > x_min) {
            return Err(Error::InvalidGrid(format!(
                "degenerate interval [{x_min}, {x_max})"
            )));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n must be a power of two >= 16, got {n}"
            )));
        }
        let dx = (x_max - x_min) / real::<T>(n as f64);
        Ok(Self { x_min, x_max, n, dx })
    }

    #[inline]
    pub fn x_min(&self) -> T {
        self.x_min
    }

    #[inline]
    pub fn x_max(&self) -> T {
        self.x_max
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dx(&self) -> T {
        self.dx
    }

    #[inline]
    pub fn length(&self) -> T {
        self.x_max - self.x_min
    }

    /// `x_j = x_min + j*dx`, reproducible bit-exactly from the stored fields.
    #[inline]
    pub fn point(&self, j: usize) -> T {
        self.x_min + self.dx * real::<T>(j as f64)
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Angular wavenumbers in FFT layout: `2*pi*j/L` for `j <= n/2`,
    /// negative branch above.
    pub fn wavenumbers(&self) -> Vec<T> {
        let two_pi_over_length = T::TAU() / self.length();
        (0..self.n)
            .map(|j| {
                let j_signed = if j <= self.n / 2 {
                    j as f64
                } else {
                    j as f64 - self.n as f64
                };
                two_pi_over_length * real::<T>(j_signed)
            })
            .collect()
    }
}

/// Cartesian product of one to three [`Grid1D`] axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridND<T> {
    axes: Vec<Grid1D<T>>,
}

impl<T: Real> GridND<T> {
    pub fn new(axes: Vec<Grid1D<T>>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::InvalidGrid(format!(
                "GridND supports 1..=3 axes, got {}",
                axes.len()
            )));
        }
        Ok(Self { axes })
    }

    pub fn from_axis(axis: Grid1D<T>) -> Self {
        Self { axes: vec![axis] }
    }

    /// The same 1D grid replicated along `dim` axes.
    pub fn cube(axis: Grid1D<T>, dim: usize) -> Result<Self> {
        Self::new(vec![axis; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn axis(&self, a: usize) -> &Grid1D<T> {
        &self.axes[a]
    }

    pub fn axes(&self) -> &[Grid1D<T>] {
        &self.axes
    }

    /// Total number of sample points.
    pub fn len(&self) -> usize {
        self.axes.iter().map(Grid1D::len).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Product of the per-axis spacings (the quadrature cell volume).
    pub fn cell_volume(&self) -> T {
        self.axes
            .iter()
            .fold(T::one(), |acc, g| acc * g.dx())
    }

    /// Row-major strides: the last axis is contiguous.
    pub fn strides(&self) -> [usize; 3] {
        let mut strides = [0usize; 3];
        let dim = self.dim();
        let mut s = 1usize;
        for a in (0..dim).rev() {
            strides[a] = s;
            s *= self.axes[a].len();
        }
        strides
    }

    /// Whether all axes are the same 1D grid (required for symmetrization).
    pub fn axes_equal(&self) -> bool {
        self.axes.iter().all(|g| g == &self.axes[0])
    }
}

/// Boundary-decay diagnostic attached to spectral operations.
#[derive(Debug, Clone, Copy)]
pub struct DecayDiagnostic<T> {
    /// Largest |f| found on the outermost samples (all faces, every axis).
    pub max_boundary_abs: T,
    /// Threshold the check was run against.
    pub threshold: T,
    /// `max_boundary_abs < threshold`.
    pub ok: bool,
}

/// Complex-valued samples on a [`GridND`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField<T> {
    grid: GridND<T>,
    values: Vec<Complex<T>>,
}

impl<T: Real> ComplexField<T> {
    pub fn new(grid: GridND<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values but grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("field contains NaN/inf samples".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridND<T>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![Complex::new(T::zero(), T::zero()); n] }
    }

    /// Sample a closure of one coordinate on a 1D grid.
    pub fn from_fn_1d(grid: &Grid1D<T>, f: impl Fn(T) -> Complex<T>) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.point(j))).collect();
        Self { grid: GridND::from_axis(grid.clone()), values }
    }

    /// Sample a closure of the point coordinates on any grid.
    /// The slice passed to `f` has one entry per axis.
    pub fn from_fn(grid: &GridND<T>, f: impl Fn(&[T]) -> Complex<T>) -> Self {
        let dim = grid.dim();
        let mut coords = [T::zero(); 3];
        let values = (0..grid.len())
            .map(|idx| {
                decode_coords(grid, idx, &mut coords);
                f(&coords[..dim])
            })
            .collect();
        Self { grid: grid.clone(), values }
    }

    #[inline]
    pub fn grid(&self) -> &GridND<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    /// Rebuild with the same grid but new values (length-checked).
    pub fn with_values(&self, values: Vec<Complex<T>>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, s: Complex<T>) {
        for v in &mut self.values {
            *v = *v * s;
        }
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Check |f| at every face of the domain (indices 0 and n-1 per axis)
    /// against `threshold`; [`DECAY_TOL`] is the conventional choice.
    pub fn boundary_decay(&self, threshold: T) -> DecayDiagnostic<T> {
        let dim = self.grid.dim();
        let strides = self.grid.strides();
        let mut max_abs = T::zero();
        for a in 0..dim {
            let na = self.grid.axis(a).len();
            for face in [0usize, na - 1] {
                // walk every point whose index along axis a equals `face`
                let mut idx_counters = [0usize; 3];
                loop {
                    let mut flat = face * strides[a];
                    for b in 0..dim {
                        if b != a {
                            flat += idx_counters[b] * strides[b];
                        }
                    }
                    max_abs = max_abs.max(self.values[flat].norm());
                    // increment counters over the other axes
                    let mut done = true;
                    for b in (0..dim).rev() {
                        if b == a {
                            continue;
                        }
                        idx_counters[b] += 1;
                        if idx_counters[b] < self.grid.axis(b).len() {
                            done = false;
                            break;
                        }
                        idx_counters[b] = 0;
                    }
                    if done {
                        break;
                    }
                }
            }
        }
        DecayDiagnostic { max_boundary_abs: max_abs, threshold, ok: max_abs < threshold }
    }
}

/// Decode the coordinates of a flat row-major index.
#[inline]
pub fn decode_coords<T: Real>(grid: &GridND<T>, mut idx: usize, out: &mut [T; 3]) {
    let dim = grid.dim();
    for a in (0..dim).rev() {
        let n = grid.axis(a).len();
        out[a] = grid.axis(a).point(idx % n);
        idx /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_dx_matches_definition() {
        let g = build_grid(-10.0, 10.0, 256).unwrap();
        assert_eq!(g.dx(), 0.078125);
    }

    #[test]
    fn grid_endpoint_convention() {
        let g = build_grid(0.0, 1.0, 16).unwrap();
        assert_eq!(g.point(0), 0.0);
        assert_eq!(g.point(15), 0.9375);
    }

    #[test]
    fn grid_rejects_non_power_of_two() {
        assert!(matches!(build_grid(-10.0, 10.0, 100), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_grid(-10.0, 10.0, 8), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_grid(1.0, 1.0, 64), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn field_length_checked() {
        let g = GridND::from_axis(build_grid::<f64>(0.0, 1.0, 16).unwrap());
        assert!(ComplexField::new(g, vec![Complex::new(0.0, 0.0); 15]).is_err());
    }

    #[test]
    fn boundary_decay_flags_wide_field() {
        let g = build_grid::<f64>(-2.0, 2.0, 32).unwrap();
        let f = ComplexField::from_fn_1d(&g, |x| Complex::new((-x * x).exp(), 0.0));
        let diag = f.boundary_decay(DECAY_TOL);
        assert!(!diag.ok); // exp(-4) at the edge is nowhere near 1e-12
        let g_wide = build_grid::<f64>(-12.0, 12.0, 64).unwrap();
        let f = ComplexField::from_fn_1d(&g_wide, |x| Complex::new((-x * x).exp(), 0.0));
        assert!(f.boundary_decay(DECAY_TOL).ok);
    }

    #[test]
    fn strides_are_row_major() {
        let g = build_grid::<f64>(-1.0, 1.0, 16).unwrap();
        let gnd = GridND::cube(g, 3).unwrap();
        assert_eq!(gnd.strides(), [256, 16, 1]);
        assert_eq!(gnd.len(), 4096);
    }
}

//! Cross-module invariants: the properties that tie packets, moments,
//! evolution and the operator layer together.

use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qspread::evolve::{split_step_evolve, NonlinearCoupling, Potential};
use qspread::grid::{build_grid, ComplexField, GridND, PhysicalParams};
use qspread::moments::{compute_moment_set, robertson_schrodinger_margin, uncertainties};
use qspread::packets::{make_extended_gaussian, packet_kinematics, EffectivePacketState};
use qspread::sampling::{random_correlation_function, random_packet_superposition};
use qspread::secondq::{commutator_residual, SecondQuantizedOp};
use qspread::spectral::{quadrature, spectral_power_sum};

fn params() -> PhysicalParams<f64> {
    PhysicalParams::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// quadrature(a f + b g) = a quadrature(f) + b quadrature(g)
    #[test]
    fn quadrature_is_linear(
        a_re in -3.0f64..3.0, a_im in -3.0f64..3.0,
        b_re in -3.0f64..3.0, b_im in -3.0f64..3.0,
        seed in 0u64..1000,
    ) {
        let g = GridND::from_axis(build_grid(-12.0, 12.0, 128).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_correlation_function(&g, 3, &mut rng).unwrap().into_field();
        let h = random_correlation_function(&g, 3, &mut rng).unwrap().into_field();
        let a = Complex::new(a_re, a_im);
        let b = Complex::new(b_re, b_im);
        let combo = f.with_values(
            f.values().iter().zip(h.values()).map(|(x, y)| a * x + b * y).collect(),
        ).unwrap();
        let lhs = quadrature(&combo);
        let rhs = a * quadrature(&f) + b * quadrature(&h);
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
    }

    /// Parseval: quadrature(|f|^2) equals the wavenumber power sum.
    #[test]
    fn parseval_on_random_fields(seed in 0u64..1000) {
        let g = GridND::from_axis(build_grid(-12.0, 12.0, 256).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_correlation_function(&g, 4, &mut rng).unwrap().into_field();
        let direct: f64 = f.values().iter().map(|z| z.norm_sqr()).sum::<f64>()
            * f.grid().cell_volume();
        let spectral = spectral_power_sum(&f);
        prop_assert!((direct - spectral).abs() <= 1e-12 * direct.max(1e-30));
    }

    /// c is exactly (2k+1)^2 hbar^2/4 in the closed-form kinematics,
    /// independent of every other packet parameter.
    #[test]
    fn kinematics_uncertainty_law(
        q in -3.0f64..3.0,
        p in -3.0f64..3.0,
        alpha in 0.3f64..3.0,
        beta in -2.0f64..2.0,
        k in 0u32..8,
        hbar in 0.5f64..2.0,
    ) {
        let pars = PhysicalParams::new(hbar, 1.0).unwrap();
        let state = EffectivePacketState::new(q, p, alpha, beta, 0.0, k).unwrap();
        let m = packet_kinematics(&state, &pars);
        let u = uncertainties(&m, &pars).unwrap();
        let want = (2.0 * k as f64 + 1.0).powi(2) * hbar * hbar / 4.0;
        prop_assert!((u.c - want).abs() < 1e-10 * want.max(1.0));
    }

    /// Translation/boost covariance: multiplying by a plane wave and shifting
    /// moves (<x>, <p>) by (q0, p0) Q and leaves c untouched.
    #[test]
    fn translation_boost_covariance(
        q0 in -2.0f64..2.0,
        p0 in -2.0f64..2.0,
        seed in 0u64..500,
    ) {
        let pars = params();
        let axis = build_grid(-24.0, 24.0, 1024).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = random_packet_superposition(&axis, &pars, 2, &mut rng).unwrap();
        // exact translation on the periodic grid: shift by an integer number
        // of samples
        let dx = axis.dx();
        let shift = (q0 / dx).round() as i64;
        let q0_exact = shift as f64 * dx;
        let n = axis.len() as i64;
        let rolled: Vec<Complex<f64>> = (0..n)
            .map(|j| psi.values()[(((j - shift) % n + n) % n) as usize])
            .collect();
        let boosted = psi.with_values(
            rolled
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let x = axis.point(j);
                    v * Complex::from_polar(1.0, p0 * x / pars.hbar)
                })
                .collect(),
        ).unwrap();
        let (m0, _) = compute_moment_set(&psi, &pars).unwrap();
        let (m1, _) = compute_moment_set(&boosted, &pars).unwrap();
        let u0 = uncertainties(&m0, &pars).unwrap();
        let u1 = uncertainties(&m1, &pars).unwrap();
        prop_assert!((m1.mean_x - m0.mean_x - q0_exact * m0.norm).abs() < 1e-8);
        prop_assert!((m1.mean_p - m0.mean_p - p0 * m0.norm).abs() < 1e-8);
        prop_assert!((u1.c - u0.c).abs() < 1e-9 * u0.c.max(1.0));
    }
}

/// Robertson-Schrödinger floor over randomized superpositions: 1000 states,
/// margin never below -1e-9.
#[test]
fn margin_nonnegative_over_random_superpositions() {
    let pars = params();
    let axis = build_grid(-24.0, 24.0, 512).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let psi = random_packet_superposition(&axis, &pars, 3, &mut rng).unwrap();
        let (m, _) = compute_moment_set(&psi, &pars).unwrap();
        let u = uncertainties(&m, &pars).unwrap();
        let margin = robertson_schrodinger_margin(&u, m.norm, &pars);
        worst = worst.min(margin);
    }
    assert!(worst >= -1e-9, "worst margin {worst:e}");
}

/// Cauchy-Schwarz moment bounds hold along an evolved trajectory.
#[test]
fn moment_invariants_hold_during_evolution() {
    let pars = params();
    let grid = build_grid(-32.0, 32.0, 1024).unwrap();
    let state = EffectivePacketState::new(0.5, 0.4, 1.2, -0.2, 0.0, 2).unwrap();
    let (psi, _) = make_extended_gaussian(&state, &grid, &pars).unwrap();
    let rec = split_step_evolve(
        &psi,
        &Potential::Harmonic { omega: 0.7 },
        &NonlinearCoupling::linear(),
        &pars,
        1e-3,
        3000,
        300,
        None,
    )
    .unwrap();
    for m in &rec.moments {
        m.check_invariants(1e-9).unwrap();
    }
    for u in &rec.uncertainties {
        assert!(u.c >= 0.25 - 1e-9);
    }
}

/// sl(2) commutators close on every sector at the default tolerances.
#[test]
fn algebra_closes_on_random_fields() {
    use SecondQuantizedOp::*;
    let pars = params();
    let i = Complex::new(0.0, 1.0);
    let cases: [(SecondQuantizedOp, SecondQuantizedOp, Vec<(Complex<f64>, SecondQuantizedOp)>);
        6] = [
        (Kx, Kp, vec![(-4.0 * i, KD)]),
        (KD, Kx, vec![(2.0 * i, Kx)]),
        (KD, Kp, vec![(-2.0 * i, Kp)]),
        (Qhat, Kx, vec![]),
        (Qhat, Kp, vec![]),
        (Qhat, KD, vec![]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (dim, n, half) in [(1usize, 256usize, 10.0), (2, 128, 10.0), (3, 64, 10.0)] {
        let g = GridND::cube(build_grid(-half, half, n).unwrap(), dim).unwrap();
        for _ in 0..3 {
            let cf = random_correlation_function(&g, 2, &mut rng).unwrap();
            for (a, b, expected) in &cases {
                let r = commutator_residual(*a, *b, expected, &cf, &pars).unwrap();
                assert!(
                    r < 1e-8,
                    "[{}, {}] residual {r:e} on N={dim}",
                    a.name(),
                    b.name()
                );
            }
        }
    }
}

use approx::assert_relative_eq;
use nilcalc::group::builtin_group;
use nilcalc::kernel::*;
use nilcalc::multiplier::Multiplier;
use nilcalc::plancherel::*;
use nilcalc::spectral::{decompose, CLUSTER_TOL};
use nilcalc::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn mehler(t: f64, eta: f64, xi: &[f64]) -> f64 {
    let tau = t * eta.abs();
    let s = xi.iter().map(|v| v * v).sum::<f64>() / eta.abs();
    (-s * tau.tanh()).exp() / (2.0 * tau.cosh())
}

#[test]
fn reparametrize_h1() {
    let g = builtin_group("H1").unwrap();
    let sd = decompose(&g, &[0.5], CLUSTER_TOL).unwrap();
    let h = Multiplier::linear();
    // (2n+1)|η| + μ
    assert_relative_eq!(reparametrize(&h, &sd, &[0], 0.0, &[0.5]).re, 0.5);
    assert_relative_eq!(reparametrize(&h, &sd, &[3], 0.25, &[0.5]).re, 3.75);
}

#[test]
fn reparametrize_n32_adds_mu() {
    let g = builtin_group("N32").unwrap();
    let eta = [0.3, -0.4, 0.0];
    let sd = decompose(&g, &eta, CLUSTER_TOL).unwrap();
    assert_eq!(sd.r0, 1);
    let h = Multiplier::linear();
    let lvl: f64 = sd.b.iter().zip(&sd.r).map(|(b, r)| (2 + r) as f64 * b).sum();
    assert_relative_eq!(reparametrize(&h, &sd, &[1], 0.7, &eta).re, lvl + 0.7, epsilon = 1e-12);
}

#[test]
fn bump_below_lowest_level_gives_zero() {
    let g = builtin_group("H1").unwrap();
    let h = Multiplier::bump(1.0, 2.0).unwrap();
    let trunc = TruncationSpec::default();
    for xi in [[0.0, 0.0], [1.0, -2.0], [3.0, 0.5]] {
        assert_eq!(eval_v(&h, &g, &[3.0], &xi, &trunc).unwrap(), Complex64::new(0.0, 0.0));
    }
}

#[test]
fn mehler_examples() {
    let g = builtin_group("H1").unwrap();
    let trunc = TruncationSpec::default();
    for (t, eta, xi) in [(1.0, 0.5, [0.6, -0.2]), (0.3, -2.0, [1.0, 1.0]), (2.0, 1.5, [0.0, 0.0])] {
        let got = eval_v(&Multiplier::heat(t).unwrap(), &g, &[eta], &xi, &trunc).unwrap();
        let want = mehler(t, eta, &xi);
        assert_relative_eq!(got.re, want, max_relative = 1e-9);
        assert!(got.im.abs() < 1e-14);
    }
}

#[test]
fn eval_v_rejects_bad_input() {
    let g = builtin_group("H1").unwrap();
    let r = eval_v(&Multiplier::heat(1.0).unwrap(), &g, &[0.0], &[0.0, 0.0], &TruncationSpec::default());
    assert!(matches!(r, Err(Error::SingularEta(_))));
    let r = eval_v(&Multiplier::heat(1.0).unwrap(), &g, &[1.0], &[0.0; 3], &TruncationSpec::default());
    assert!(matches!(r, Err(Error::DimensionMismatch(_))));
}

#[test]
fn enlarging_the_n_box_changes_nothing() {
    let g = builtin_group("G37D").unwrap();
    let h = Multiplier::bump(0.5, 2.5).unwrap();
    let eta = [0.4, -0.2, 0.3];
    let xi = [0.3, -0.7, 0.2, 0.9];
    let a = eval_v(&h, &g, &eta, &xi, &TruncationSpec::default()).unwrap();
    let b = eval_v(&h, &g, &eta, &xi, &TruncationSpec { extra: 5, ..TruncationSpec::default() }).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_linear_in_h(a in 0.0f64..1.5, w in 0.5f64..2.0, c in -2.0f64..2.0,
                        e in prop::array::uniform3(-1.0f64..1.0), x in prop::array::uniform4(-2.0f64..2.0)) {
        prop_assume!(e.iter().map(|v| v * v).sum::<f64>() > 0.01);
        let g = builtin_group("G37D").unwrap();
        let trunc = TruncationSpec { lambda_max: Some(6.0), ..TruncationSpec::default() };
        let h1 = Multiplier::bump(a, a + w).unwrap();
        let h2 = Multiplier::heat(1.0).unwrap();
        let sum = h1.clone().scaled(Complex64::new(c, 0.0)).plus(&h2);
        let v1 = eval_v(&h1, &g, &e, &x, &trunc).unwrap();
        let v2 = eval_v(&h2, &g, &e, &x, &trunc).unwrap();
        let vs = eval_v(&sum, &g, &e, &x, &trunc).unwrap();
        prop_assert!((vs - (v1 * c + v2)).norm() <= 1e-10 * (1.0 + vs.norm()));
    }

    #[test]
    fn prop_real_multiplier_gives_real_v(a in 0.0f64..1.5, e in prop::array::uniform3(-1.0f64..1.0),
                                         x in prop::array::uniform3(-2.0f64..2.0)) {
        prop_assume!(e.iter().map(|v| v * v).sum::<f64>() > 0.01);
        let g = builtin_group("N32").unwrap();
        let h = Multiplier::bump(a, a + 1.5).unwrap();
        let v = eval_v(&h, &g, &e, &x, &TruncationSpec::default());
        if let Ok(v) = v {
            prop_assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn prop_v_depends_on_projection_norms(e in prop::array::uniform3(-1.0f64..1.0),
                                          x in prop::array::uniform4(-2.0f64..2.0), th in 0.0f64..6.3) {
        prop_assume!(e.iter().map(|v| v * v).sum::<f64>() > 0.01);
        let g = builtin_group("G37D").unwrap();
        let sd = decompose(&g, &e, CLUSTER_TOL).unwrap();
        // rotate ξ inside each spectral plane; V must not move
        let mut y = [0.0; 4];
        for basis in &sd.basis {
            prop_assert_eq!(basis.ncols(), 2);
            let c0: f64 = (0..4).map(|i| basis[(i, 0)] * x[i]).sum();
            let c1: f64 = (0..4).map(|i| basis[(i, 1)] * x[i]).sum();
            let (r0, r1) = (c0 * th.cos() - c1 * th.sin(), c0 * th.sin() + c1 * th.cos());
            for i in 0..4 {
                y[i] += basis[(i, 0)] * r0 + basis[(i, 1)] * r1;
            }
        }
        let h = Multiplier::bump(0.5, 3.0).unwrap();
        let trunc = TruncationSpec::default();
        let a = eval_v(&h, &g, &e, &x, &trunc).unwrap();
        let b = eval_v(&h, &g, &e, &y, &trunc).unwrap();
        prop_assert!((a - b).norm() <= 1e-10 * (1.0 + a.norm()));
    }
}

// --- grids ---

fn h1_axes() -> (Vec<Axis>, Vec<Axis>) {
    (vec![Axis::new(16, 0.5); 2], vec![Axis::new(32, 0.5)])
}

#[test]
fn zero_multiplier_gives_zero_grid() {
    let g = builtin_group("H1").unwrap();
    let (x, u) = h1_axes();
    let k = synthesize_kernel(&Multiplier::zero(), &g, &x, &u, &TruncationSpec::default(), &SynthOptions::default()).unwrap();
    assert_eq!(k.len(), 16 * 16 * 32);
    assert!(k.values.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
}

#[test]
fn synthesis_is_additive() {
    let g = builtin_group("H1").unwrap();
    let (x, u) = h1_axes();
    let (t, o) = (TruncationSpec::default(), SynthOptions::default());
    let f1 = Multiplier::bump(0.5, 1.5).unwrap();
    let f2 = Multiplier::bump(1.0, 2.0).unwrap().scaled(Complex64::new(0.0, -0.5));
    let k1 = synthesize_kernel(&f1, &g, &x, &u, &t, &o).unwrap();
    let k2 = synthesize_kernel(&f2, &g, &x, &u, &t, &o).unwrap();
    let k12 = synthesize_kernel(&f1.clone().plus(&f2), &g, &x, &u, &t, &o).unwrap();
    let worst = k12.values.iter().zip(&k1.values).zip(&k2.values).map(|((a, b), c)| (a - b - c).norm()).fold(0.0, f64::max);
    assert!(worst <= 1e-12 * k12.max_abs(), "{worst}");
}

#[test]
fn synthesis_is_deterministic_across_thread_counts() {
    let g = builtin_group("H1").unwrap();
    let (x, u) = h1_axes();
    let f = Multiplier::bump(0.5, 2.0).unwrap();
    let run = |n| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| synthesize_kernel(&f, &g, &x, &u, &TruncationSpec::default(), &SynthOptions::default()).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert!(a.values.iter().zip(&b.values).all(|(p, q)| p.re.to_bits() == q.re.to_bits() && p.im.to_bits() == q.im.to_bits()));
}

#[test]
fn heat_kernel_has_unit_mass() {
    let g = builtin_group("H1").unwrap();
    let opts = SynthOptions { nyquist_safety: 1.5, ..SynthOptions::default() };
    let k = synthesize_kernel(
        &Multiplier::heat(1.0).unwrap(),
        &g,
        &[Axis::new(32, 0.375), Axis::new(32, 0.375)],
        &[Axis::new(256, 0.1)],
        &TruncationSpec::default(),
        &opts,
    )
    .unwrap();
    let mass: Complex64 = k.values.iter().sum::<Complex64>() * k.cell_volume();
    assert!((mass.re - 1.0).abs() < 1e-3 && mass.im.abs() < 1e-3, "{mass}");
    // the heat kernel is positive
    let min = k.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    assert!(min > -1e-6 * k.max_abs(), "{min}");
}

#[test]
fn l2_norm_matches_plancherel_integral() {
    let g = builtin_group("H1").unwrap();
    let f = Multiplier::bump(0.5, 2.0).unwrap();
    let trunc = TruncationSpec::default();
    let k = synthesize_kernel(&f, &g, &[Axis::new(32, 0.5); 2], &[Axis::new(64, 0.5)], &trunc, &SynthOptions::default()).unwrap();
    let lhs: f64 = k.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * k.cell_volume();
    let rhs = plancherel_rhs(&f, &g, &EtaQuadrature::ProductGrid { nodes: 256, half_width: None }, &trunc).unwrap();
    assert!((lhs / rhs - 1.0).abs() < 0.02, "{lhs} vs {rhs}");
}

#[test]
fn nkg1_roundtrip() {
    let g = builtin_group("H1").unwrap();
    let (x, u) = h1_axes();
    let k = synthesize_kernel(&Multiplier::bump(0.5, 2.0).unwrap(), &g, &x, &u, &TruncationSpec::default(), &SynthOptions::default()).unwrap();
    let mut buf = Vec::new();
    k.write_nkg1(&mut buf).unwrap();
    assert_eq!(&buf[..4], b"NKG1");
    assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 16);
    assert_eq!(f64::from_le_bytes(buf[12..20].try_into().unwrap()), 0.5);
    assert_eq!(buf.len(), 8 + 3 * 12 + 16 * k.len());
    let back = KernelGrid::read_nkg1(&buf[..], 2).unwrap();
    assert_eq!(back.values, k.values);
    assert_eq!(back.shape(), k.shape());
    assert!(matches!(KernelGrid::read_nkg1(&b"NKG2\0\0\0\0"[..], 2), Err(Error::Parse(_))));
    assert!(KernelGrid::read_nkg1(&buf[..buf.len() - 1], 2).is_err());
}

#[test]
fn coarse_grid_is_rejected() {
    let g = builtin_group("H1").unwrap();
    let r = synthesize_kernel(
        &Multiplier::bump(0.5, 2.0).unwrap(),
        &g,
        &[Axis::new(16, 2.0); 2],
        &[Axis::new(32, 0.5)],
        &TruncationSpec::default(),
        &SynthOptions::default(),
    );
    assert!(matches!(r, Err(Error::GridTooCoarse(_))));
    let r = synthesize_kernel(&Multiplier::heat(1.0).unwrap(), &g, &[Axis::new(4, 0.5)], &[Axis::new(4, 0.5)], &TruncationSpec::default(), &SynthOptions::default());
    assert!(matches!(r, Err(Error::DimensionMismatch(_))));
}

// --- Plancherel ---

#[test]
fn ratio_constant() {
    assert_eq!(plancherel_ratio_constant(0), 1.0);
    assert_relative_eq!(plancherel_ratio_constant(2), std::f64::consts::PI.powi(2) / 4.0);
    assert_relative_eq!(gamma_half(1), std::f64::consts::PI.sqrt());
    assert_relative_eq!(gamma_half(5), 0.75 * std::f64::consts::PI.sqrt());
    assert_relative_eq!(gamma_half(6), 2.0);
}

#[test]
fn h1_ratio_is_pi_over_two() {
    let g = builtin_group("H1").unwrap();
    let f = Multiplier::bump(0.5, 2.0).unwrap();
    for eta in [0.7, -1.2, 0.4] {
        let c = plancherel_check_at_eta(&f, &g, &[eta], &XiQuadrature::Grid { points_per_axis: 256 }, &TruncationSpec::default()).unwrap();
        assert_eq!(c.status, "ok");
        assert_relative_eq!(c.expected_ratio, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(c.ratio.unwrap(), c.expected_ratio, max_relative = 5e-3);
    }
}

#[test]
fn zero_multiplier_is_both_zero() {
    let g = builtin_group("H1").unwrap();
    let c = plancherel_check_at_eta(&Multiplier::zero(), &g, &[0.5], &XiQuadrature::Grid { points_per_axis: 32 }, &TruncationSpec::default()).unwrap();
    assert_eq!(c.status, "both-zero");
    assert_eq!(c.ratio, None);
    assert_eq!(plancherel_rhs(&Multiplier::zero(), &g, &EtaQuadrature::ProductGrid { nodes: 16, half_width: None }, &TruncationSpec::default()).unwrap(), 0.0);
}

#[test]
fn n32_ratio_with_kernel_directions() {
    let g = builtin_group("N32").unwrap();
    let f = Multiplier::bump(0.5, 1.5).unwrap();
    let c = plancherel_check_at_eta(&f, &g, &[0.3, 0.2, -0.4], &XiQuadrature::MonteCarlo { samples: 1 << 20, seed: 3 }, &TruncationSpec::default()).unwrap();
    assert_relative_eq!(c.ratio.unwrap(), c.expected_ratio, max_relative = 0.05);
}

#[test]
fn unbounded_multiplier_is_rejected() {
    let g = builtin_group("H1").unwrap();
    let r = plancherel_rhs(&Multiplier::linear(), &g, &EtaQuadrature::ProductGrid { nodes: 16, half_width: None }, &TruncationSpec::default());
    assert!(matches!(r, Err(Error::BadParameters(_))));
}

#[test]
fn chunked_mc_is_seeded() {
    use rand::Rng;
    let a = chunked_mc(50_000, 9, |r| r.random::<f64>());
    let b = chunked_mc(50_000, 9, |r| r.random::<f64>());
    let c = chunked_mc(50_000, 10, |r| r.random::<f64>());
    assert_eq!(a.to_bits(), b.to_bits());
    assert_ne!(a, c);
    assert!((a / 50_000.0 - 0.5).abs() < 0.01);
}

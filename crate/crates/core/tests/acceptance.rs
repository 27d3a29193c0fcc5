//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Built with `harness = false` so the lines always reach the terminal. The
//! process exits non-zero iff some criterion's outcome differs from
//! `EXPECTED_FAIL` — i.e. a regression, or a known-unattainable check that
//! starts passing (which would also need a second look).

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use nilcalc::decomposition::*;
use nilcalc::group::{builtin_group, classify_pfaffian_form, isometry_graph_group, pfaffian, StratifiedGroup};
use nilcalc::harness::*;
use nilcalc::kernel::{eval_v, synthesize_kernel, Axis, SynthOptions, TruncationSpec};
use nilcalc::laguerre::{gram_matrix, laguerre_norm_sq};
use nilcalc::multiplier::{EtaCutoff, Multiplier};
use nilcalc::plancherel::{plancherel_check_at_eta, XiQuadrature};
use nilcalc::spectral::{decompose, random_unit, CLUSTER_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// 9: the θ = 1/4 slope cannot meet "measured ≤ predicted + 0.3" (weight
//    saturates as ρ → 0); 12: the s = 0.25 spread cannot exceed the s = 2
//    spread (both are exactly 1 by dilation invariance). See the ledger.
const EXPECTED_FAIL: [usize; 2] = [9, 12];

struct Outcome {
    pass: bool,
    detail: String,
}

fn ok(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn c1_laguerre() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..=2u32 {
        let g = gram_matrix(8, k);
        for n in 0..=8 {
            for m in 0..=8 {
                let want = if n == m { laguerre_norm_sq(n, k) } else { 0.0 };
                worst = worst.max((g[n][m] - want).abs());
            }
        }
    }
    ok(worst <= 1e-8, format!("max |gram − (n+k)!/(2^(k+1) n!)·δ| = {worst:.2e} (tol 1e-8)"))
}

fn c2_spectral() -> Outcome {
    let mut groups: Vec<StratifiedGroup> = ["H1", "H2", "N32", "G37D", "HTYPE3"].iter().map(|n| builtin_group(n).unwrap()).collect();
    groups.push(isometry_graph_group());
    let (mut recon, mut hs, mut closed): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut failures = 0;
    for (gi, g) in groups.iter().enumerate() {
        let mut r = rng(100 + gi as u64);
        for _ in 0..1000 {
            let scale = 10f64.powf(r.random_range(-1.0..1.0));
            let eta: Vec<f64> = random_unit(&mut r, g.d2).iter().map(|v| v * scale).collect();
            let Ok(sd) = decompose(g, &eta, CLUSTER_TOL) else {
                failures += 1;
                continue;
            };
            let j = g.j_matrix(&eta);
            let jsq = -(&j * &j);
            let jnorm2 = sd.b[0] * sd.b[0];
            let dev = (&jsq - sd.reconstruct()).amax();
            recon = recon.max(dev / jnorm2);
            let tr = (j.transpose() * &j).trace();
            let sum: f64 = sd.b.iter().zip(&sd.r).map(|(b, r)| 2.0 * *r as f64 * b * b).sum();
            hs = hs.max((sum - tr).abs() / tr);
            if g.label() == "G37D" {
                let h = eta[0].hypot(eta[1]);
                let want = [h + eta[2].abs(), (h - eta[2].abs()).abs()];
                for (b, w) in sd.b.iter().zip(want) {
                    closed = closed.max((b - w).abs() / w.max(1e-300));
                }
            }
        }
    }
    ok(
        recon <= 1e-10 && hs <= 1e-10 && closed <= 1e-10 && failures == 0,
        format!("recon {recon:.1e}, hs-norm {hs:.1e}, G37D closed form {closed:.1e} (tol 1e-10); decompose failures {failures}"),
    )
}

fn c3_classification() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    let h1 = builtin_group("H1").unwrap();
    let h1_skip = classify_pfaffian_form(&h1).is_err();
    pass &= h1_skip;
    parts.push(format!("H1→{}", if h1_skip { "n/a" } else { "?" }));
    for (g, want) in [
        (builtin_group("G37D").unwrap(), "37D"),
        (builtin_group("HTYPE3").unwrap(), "37D₁"),
        (isometry_graph_group(), "37A"),
    ] {
        let got = classify_pfaffian_form(&g).map(|c| c.as_str().to_string()).unwrap_or_else(|e| e.to_string());
        pass &= got == want;
        parts.push(format!("{}→{got}", g.label()));
    }
    let g = builtin_group("G37D").unwrap();
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let eta: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
        let pf = pfaffian(&g.j_matrix(&eta)).unwrap();
        worst = worst.max((pf - (eta[0] * eta[0] + eta[1] * eta[1] - eta[2] * eta[2])).abs());
    }
    pass &= worst <= 1e-12;
    ok(pass, format!("{}; pf residual {worst:.1e} (tol 1e-12)", parts.join(", ")))
}

fn c4_plancherel() -> Outcome {
    let trunc = TruncationSpec::default();
    let spread = |ratios: &[f64]| {
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        hi / lo - 1.0
    };
    let mut r = rng(4);
    let h1 = builtin_group("H1").unwrap();
    let mut h1_ratios = Vec::new();
    for _ in 0..20 {
        let a = r.random_range(0.5..2.0);
        let b = a + r.random_range(0.5..2.0);
        let f = Multiplier::bump(a, b).unwrap();
        // put a level (2n+1)|η| inside supp F so neither side vanishes
        let level = r.random_range(a + 0.25 * (b - a)..b - 0.25 * (b - a));
        let n = r.random_range(0..4) as f64;
        let eta = [level / (2.0 * n + 1.0) * if r.random::<bool>() { 1.0 } else { -1.0 }];
        let c = plancherel_check_at_eta(&f, &h1, &eta, &XiQuadrature::Grid { points_per_axis: 256 }, &trunc).unwrap();
        h1_ratios.push(c.ratio.unwrap_or(f64::NAN) / c.expected_ratio);
    }
    let g = builtin_group("G37D").unwrap();
    let mut g_ratios = Vec::new();
    for k in 0..3 {
        let a = r.random_range(0.5..1.5);
        let f = Multiplier::bump(a, a + 1.0).unwrap();
        let eta: Vec<f64> = random_unit(&mut r, 3).iter().map(|v| v * r.random_range(0.3..0.8)).collect();
        let c = plancherel_check_at_eta(&f, &g, &eta, &XiQuadrature::MonteCarlo { samples: 10_000_000, seed: 40 + k }, &trunc).unwrap();
        g_ratios.push(c.ratio.unwrap_or(f64::NAN) / c.expected_ratio);
    }
    let n32 = builtin_group("N32").unwrap();
    let mut n_ratios = Vec::new();
    for k in 0..3 {
        let a = r.random_range(0.5..1.5);
        let f = Multiplier::bump(a, a + 1.0).unwrap();
        let eta: Vec<f64> = random_unit(&mut r, 3).iter().map(|v| v * r.random_range(0.3..0.8)).collect();
        let c = plancherel_check_at_eta(&f, &n32, &eta, &XiQuadrature::MonteCarlo { samples: 10_000_000, seed: 50 + k }, &trunc).unwrap();
        n_ratios.push(c.ratio.unwrap_or(f64::NAN) / c.expected_ratio);
    }
    let (s1, s2, s3) = (spread(&h1_ratios), spread(&g_ratios), spread(&n_ratios));
    let pass = s1 <= 0.005 && s2 <= 0.02 && s3 <= 0.02 && [&h1_ratios, &g_ratios, &n_ratios].iter().all(|v| v.iter().all(|x| x.is_finite()));
    ok(
        pass,
        format!(
            "ratio spread H1 {:.2}% (tol 0.5%), G37D {:.2}% (tol 2%), N32 {:.2}% (tol 2%); mean ratio/(π/2)^|r| = {:.4}, {:.4}, {:.4}",
            100.0 * s1,
            100.0 * s2,
            100.0 * s3,
            mean(&h1_ratios),
            mean(&g_ratios),
            mean(&n_ratios)
        ),
    )
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn c5_mehler() -> Outcome {
    let h1 = builtin_group("H1").unwrap();
    let trunc = TruncationSpec::default();
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t: f64 = r.random_range(0.25..2.0);
        let tau: f64 = r.random_range(0.1..3.0);
        let eta = tau / t * if r.random::<bool>() { 1.0 } else { -1.0 };
        let s: f64 = r.random_range(0.0..5.0);
        let th = r.random_range(0.0..2.0 * PI);
        let rad = (s * eta.abs()).sqrt();
        let xi = [rad * th.cos(), rad * th.sin()];
        let got = eval_v(&Multiplier::heat(t).unwrap(), &h1, &[eta], &xi, &trunc).unwrap();
        let want = (-s * tau.tanh()).exp() / (2.0 * tau.cosh());
        worst = worst.max((got.re - want).abs().max(got.im.abs()) / want);
    }
    ok(worst <= 1e-6, format!("max relative error vs exp(−s·tanh τ)/(2cosh τ) = {worst:.1e} over 10³ points (tol 1e-6)"))
}

fn c6_weight() -> Outcome {
    let g = builtin_group("G37D").unwrap();
    let mut r = rng(6);
    let mut worst = f64::INFINITY;
    for _ in 0..100_000 {
        let eta: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..4).map(|_| r.random_range(-2.0..2.0)).collect();
        let jx = g.j_matrix(&eta) * DVector::from_column_slice(&x);
        let n = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.min(jx.norm() - n * weight_w(&x));
    }
    let x = [1.0, 0.0, 0.0, 1.0];
    let jx = g.j_matrix(&[0.0, 0.0, 1.0]) * DVector::from_column_slice(&x);
    let eq = (jx.norm() - weight_w(&x)).abs();
    ok(worst >= -1e-10 && eq <= 1e-12, format!("min |J_η x| − |η|w(x) = {worst:.2e} (tol −1e-10); equality residual {eq:.1e} (tol 1e-12)"))
}

fn c7_partition() -> Outcome {
    let mut r = rng(7);
    let (mut sum_err, mut annulus_bad, mut counts): (f64, usize, Vec<f64>) = (0.0, 0, Vec::new());
    for k in 1..=5 {
        let eps = 2f64.powi(-k);
        let p = spherical_partition(2, eps).unwrap();
        counts.push(p.count_constant);
        for _ in 0..10_000 {
            let th = r.random_range(0.0..2.0 * PI);
            let rad = 10f64.powf(r.random_range(-2.0..2.0));
            let xi = [rad * th.cos(), rad * th.sin()];
            let vals = p.eval_all(&xi);
            sum_err = sum_err.max((vals.iter().sum::<f64>() - 1.0).abs());
            for (v, c) in vals.iter().zip(&p.centers) {
                if *v > 0.0 {
                    let d = (th.cos() - c[0]).hypot(th.sin() - c[1]);
                    if d < eps / 4.0 || d > 4.0 * eps {
                        annulus_bad += 1;
                    }
                }
            }
        }
    }
    let lo = counts.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = counts.iter().cloned().fold(0.0, f64::max);
    ok(
        sum_err <= 1e-12 && annulus_bad == 0 && hi / lo <= 2.0,
        format!("max |Σχ − 1| = {sum_err:.1e} (tol 1e-12); annulus violations {annulus_bad}; |I_ε|·ε ∈ [{lo:.3}, {hi:.3}] (factor ≤ 2)"),
    )
}

fn c8_support_boxes() -> Outcome {
    let g = builtin_group("G37D").unwrap();
    let mut kappa: f64 = 1.0;
    let mut samples = 0;
    let mut per = Vec::new();
    for k in [2, 4, 6] {
        let delta = 2f64.powi(-k);
        let secs = cone_sectors(&g, 1.0, delta).unwrap();
        let mut kd: f64 = 1.0;
        for (i, s) in secs.iter().enumerate() {
            let b = s.support_box(200, 800 + i as u64);
            samples += b.samples;
            kd = kd.max(b.kappa());
        }
        per.push(format!("δ=2^-{k}: {kd:.1}"));
        kappa = kappa.max(kd);
    }
    ok(kappa <= 64.0, format!("κ = {kappa:.1} (tol 64) from {samples} support points; {}", per.join(", ")))
}

fn c9_cone_scaling() -> Outcome {
    let g = builtin_group("G37D").unwrap();
    let f = Multiplier::bump(1.0, 2.0).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for (theta, eta_samples, x_samples) in [(0.0, 4096, 1), (0.25, 2048, 16)] {
        let cfg = ScalingProbeConfig {
            alpha: [0.0; 3],
            theta,
            rhos: dyadic(-5, -1),
            deltas: dyadic(-7, -4),
            sector: SectorChoice::Average { sign: 1 },
            eta_samples,
            x_samples,
            seed: 9,
            grid: None,
        };
        let res = scaling_probe_cone(&g, &f, &cfg).unwrap();
        let fit = &res.fit;
        pass &= fit.pass;
        parts.push(format!(
            "θ={theta}: s_ρ={:.3} (≤ {:.2}), s_δ={:.3} (≤ {:.2}), R²={:.5} (≥ {MIN_R2}) {}",
            fit.slopes[0],
            fit.predicted[0] + FIT_TOL,
            fit.slopes[1],
            fit.predicted[1] + FIT_TOL,
            fit.r2,
            if fit.pass { "ok" } else { "over" }
        ));
    }
    ok(pass, parts.join("; "))
}

fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).rev().map(|k| 2f64.powi(k)).collect()
}

fn c10_additivity() -> Outcome {
    let trunc = TruncationSpec::default();
    let opts = SynthOptions { nyquist_safety: 1.5, ..SynthOptions::default() };
    let f = Multiplier::bump(1.0, 2.0).unwrap();
    let h1 = builtin_group("H1").unwrap();
    let mut pieces: Vec<Arc<dyn EtaCutoff>> = (-3..=2).map(|k| Arc::new(RadialShell { rho: 2f64.powi(k) }) as Arc<dyn EtaCutoff>).collect();
    pieces.push(Arc::new(Complement { pieces: pieces.clone() }));
    let a = decomposition_additivity_check(&f, &pieces, &h1, &[Axis::new(16, 0.5), Axis::new(16, 0.5)], &[Axis::new(32, 0.5)], &trunc, &opts).unwrap();
    let g = builtin_group("G37D").unwrap();
    let (xa, ua) = (vec![Axis::new(4, 0.75); 4], vec![Axis::new(12, 1.0); 3]);
    let mut sectors: Vec<Arc<dyn EtaCutoff>> =
        cone_sectors(&g, 1.0, 1.0 / 16.0).unwrap().into_iter().map(|s| Arc::new(s) as Arc<dyn EtaCutoff>).collect();
    let n_sectors = sectors.len();
    sectors.push(Arc::new(Complement { pieces: sectors.clone() }));
    let b = decomposition_additivity_check(&f, &sectors, &g, &xa, &ua, &trunc, &opts).unwrap();
    let cp: Vec<Arc<dyn EtaCutoff>> =
        vec![Arc::new(RegionCutoff::new(&g, RegionPiece::C).unwrap()), Arc::new(RegionCutoff::new(&g, RegionPiece::P).unwrap())];
    let c = decomposition_additivity_check(&f, &cp, &g, &xa, &ua, &trunc, &opts).unwrap();
    let worst = a.relative.max(b.relative).max(c.relative);
    ok(
        worst <= 1e-10,
        format!(
            "relative deviation: H1 dyadic shells {:.1e}, G37D {n_sectors} cone sectors + complement {:.1e}, G37D ζ_c+ζ_p {:.1e} (tol 1e-10)",
            a.relative, b.relative, c.relative
        ),
    )
}

fn c11_dilation() -> Outcome {
    let h1 = builtin_group("H1").unwrap();
    let trunc = TruncationSpec::default();
    let opts = SynthOptions { nyquist_safety: 1.5, ..SynthOptions::default() };
    let (nx, hx, nu, hu) = (64, 0.375, 512, 0.1);
    // both kernels on one grid; compare where (x/2, u/4) is again a node
    let xa = [Axis::new(nx, hx); 2];
    let ua = [Axis::new(nu, hu)];
    let k4 = synthesize_kernel(&Multiplier::heat(4.0).unwrap(), &h1, &xa, &ua, &trunc, &opts).unwrap();
    let k1 = synthesize_kernel(&Multiplier::heat(1.0).unwrap(), &h1, &xa, &ua, &trunc, &opts).unwrap();
    let scale = 2f64.powi(-(h1.q_dim() as i32));
    let (cx, cu) = ((nx / 2) as i64, (nu / 2) as i64);
    let (mut dev, mut compared): (f64, usize) = (0.0, 0);
    for i in 0..nx as i64 {
        for j in 0..nx as i64 {
            for k in 0..nu as i64 {
                let (di, dj, dk) = (i - cx, j - cx, k - cu);
                if di % 2 != 0 || dj % 2 != 0 || dk % 4 != 0 {
                    continue;
                }
                let a = k4.values[k4.flat(&[i as usize, j as usize, k as usize])];
                let b = k1.values[k1.flat(&[(cx + di / 2) as usize, (cx + dj / 2) as usize, (cu + dk / 4) as usize])];
                dev = dev.max((a - b * scale).norm());
                compared += 1;
            }
        }
    }
    let rel = dev / k4.max_abs();
    ok(rel <= 1e-3, format!("max |𝒦_F(4·) − 2^-Q 𝒦_F(x/2,u/4)| / max|𝒦| = {rel:.1e} over {compared} common nodes (tol 1e-3)"))
}

fn c12_mh() -> Outcome {
    let h1 = builtin_group("H1").unwrap();
    let f = Multiplier::bump(1.0, 2.0).unwrap();
    let grid = GridSpec { x: vec![Axis::new(32, 0.4); 2], u: vec![Axis::new(64, 0.4)] };
    let opts = SynthOptions::default();
    let t_list = mh_default_t_list();
    let hi = mh_ratio_probe(&h1, &f, 2.0, &t_list, &grid, &opts).unwrap();
    let lo = mh_ratio_probe(&h1, &f, 0.25, &t_list, &grid, &opts).unwrap();
    let (sh, sl) = (ratio_spread(&hi), ratio_spread(&lo));
    let a = sh <= 4.0;
    // "strictly exceeds" read beyond rounding noise
    let b = sl > sh * 1.01;
    ok(
        a && b,
        format!(
            "s=2 spread {sh:.6} (≤ 4: {}); s=0.25 spread {sl:.6} vs s=2 spread: direction check {}",
            if a { "ok" } else { "no" },
            if b { "ok" } else { "not exceeded" }
        ),
    )
}

fn main() {
    // honour `cargo test -- <filter>` loosely: any free argument selects criteria by number
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |i: usize| args.is_empty() || args.iter().any(|a| a == &i.to_string());
    let checks: [(&str, u64, fn() -> Outcome); 12] = [
        ("Laguerre orthogonality", 5, c1_laguerre),
        ("spectral reconstruction", 10, c2_spectral),
        ("classification", 1, c3_classification),
        ("per-η Plancherel constancy", 300, c4_plancherel),
        ("Mehler oracle", 10, c5_mehler),
        ("weight inequality", 2, c6_weight),
        ("partition of unity", 30, c7_partition),
        ("cone support boxes", 60, c8_support_boxes),
        ("cone scaling exponents", 900, c9_cone_scaling),
        ("decomposition additivity", 120, c10_additivity),
        ("dilation covariance", 60, c11_dilation),
        ("MH ratio boundedness", 600, c12_mh),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, budget, f)) in checks.iter().enumerate() {
        let id = i + 1;
        if !wanted(id) {
            continue;
        }
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        let in_time = secs < *budget as f64;
        let pass = out.pass && in_time;
        println!(
            "{} criterion {id:>2} {name}: {} [{secs:.1}s / {budget}s{}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            if in_time { "" } else { " OVER BUDGET" }
        );
        if pass == EXPECTED_FAIL.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}

//! Small quadrature and smooth-cutoff helpers shared by several modules.

/// Gauss–Legendre nodes and weights on [-1, 1] (Newton on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre rule on [a, b] with `panels` equal panels of `order` nodes.
pub fn composite_gl(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(lo + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

/// Adaptive Gauss–Kronrod-free integration: composite GL with doubling until
/// two successive estimates agree to `tol` (absolute).
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let eval = |panels: usize| {
        let (x, w) = composite_gl(a, b, panels, 16);
        x.iter().zip(&w).map(|(xi, wi)| wi * f(*xi)).sum::<f64>()
    };
    let mut panels = 8;
    let mut prev = eval(panels);
    loop {
        panels *= 2;
        let next = eval(panels);
        if (next - prev).abs() <= tol || panels >= 1 << 14 {
            return next;
        }
        prev = next;
    }
}

/// e^{-1/t} for t > 0, else 0.
#[inline]
fn psi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1.
#[inline]
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = psi(t);
        a / (a + psi(1.0 - t))
    }
}

/// Radial plateau bump: 1 on [p0, p1], 0 outside (s0, s1), smooth in between.
#[inline]
pub fn plateau(t: f64, s0: f64, p0: f64, p1: f64, s1: f64) -> f64 {
    if t <= s0 || t >= s1 {
        0.0
    } else if t < p0 {
        smooth_step((t - s0) / (p0 - s0))
    } else if t <= p1 {
        1.0
    } else {
        smooth_step((s1 - t) / (s1 - p1))
    }
}

/// Least-squares fit y ≈ a + Σ_k s_k x_k; returns (intercept, slopes, slope std errors, R²).
pub fn linear_fit(xs: &[Vec<f64>], ys: &[f64]) -> Option<(f64, Vec<f64>, Vec<f64>, f64)> {
    use nalgebra::{DMatrix, DVector};
    let n = ys.len();
    let p = xs.first()?.len();
    if n <= p + 1 {
        return None;
    }
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { xs[i][j - 1] });
    let y = DVector::from_column_slice(ys);
    let ata = a.transpose() * &a;
    let inv = ata.try_inverse()?;
    let coef = &inv * a.transpose() * &y;
    let resid = &y - &a * &coef;
    let ss_res = resid.norm_squared();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = ys.iter().map(|v| (v - mean).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return None;
    }
    let sigma2 = ss_res / (n - p - 1) as f64;
    let se = (1..=p).map(|k| (sigma2 * inv[(k, k)]).sqrt()).collect();
    Some((coef[0], coef.iter().skip(1).cloned().collect(), se, 1.0 - ss_res / ss_tot))
}

/// Σ_{i<total} f(i) evaluated in parallel over fixed-size chunks and reduced in
/// index order, so the result does not depend on the thread count.
pub fn fixed_chunk_sum<F>(total: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    use rayon::prelude::*;
    const CHUNK: usize = 4096;
    let partial: Vec<f64> = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(total)).map(&f).sum::<f64>())
        .collect();
    partial.iter().sum()
}

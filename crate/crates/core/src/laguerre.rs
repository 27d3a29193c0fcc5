//! Laguerre functions ℒ_n^{(k)}(t) = (−1)^n e^{−t} L_n^{(k)}(2t).

/// Single value; `n < 0` gives 0 by convention.
pub fn laguerre_ell(n: i64, k: u32, t: f64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    let mut buf = Vec::with_capacity(n as usize + 1);
    laguerre_ell_seq(n as usize, k, t, &mut buf);
    buf[n as usize]
}

/// Fill `out` with ℒ_0^{(k)}(t), …, ℒ_nmax^{(k)}(t).
///
/// The recurrence runs on the damped values directly, so intermediates stay
/// O(1) instead of overflowing like L_n(2t) alone would for large t.
pub fn laguerre_ell_seq(nmax: usize, k: u32, t: f64, out: &mut Vec<f64>) {
    out.clear();
    let x = 2.0 * t;
    let kf = k as f64;
    let e = (-t).exp();
    out.push(e);
    if nmax == 0 {
        return;
    }
    // sign (−1)^n folded into the recurrence
    out.push(-(1.0 + kf - x) * e);
    for n in 1..nmax {
        let nf = n as f64;
        let next = (-(2.0 * nf + 1.0 + kf - x) * out[n] - (nf + kf) * out[n - 1]) / (nf + 1.0);
        out.push(next);
    }
}

/// |centred difference of ℒ_n^{(k)} − (ℒ_{n−1}^{(k+1)} − ℒ_n^{(k+1)})| at t.
pub fn laguerre_derivative_check(n: i64, k: u32, t: f64, h: f64) -> f64 {
    assert!(t > h && h > 0.0, "need t > h > 0");
    let fd = (laguerre_ell(n, k, t + h) - laguerre_ell(n, k, t - h)) / (2.0 * h);
    let exact = laguerre_ell(n - 1, k + 1, t) - laguerre_ell(n, k + 1, t);
    (fd - exact).abs()
}

/// (n+k)! / (2^{k+1} n!), the squared norm of ℒ_n^{(k)} in L²(t^k dt).
pub fn laguerre_norm_sq(n: usize, k: u32) -> f64 {
    let mut ratio = 1.0;
    for m in (n + 1)..=(n + k as usize) {
        ratio *= m as f64;
    }
    ratio / 2f64.powi(k as i32 + 1)
}

/// binom(n + r − 1, n).
pub fn binom_multiset(n: usize, r: usize) -> f64 {
    if r == 0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let mut acc = 1.0;
    for i in 1..r {
        acc *= (n + i) as f64 / i as f64;
    }
    acc
}

/// Gram matrix ∫₀^∞ ℒ_n ℒ_m t^k dt for n, m ≤ nmax by composite Gauss–Legendre on [0, T].
pub fn gram_matrix(nmax: usize, k: u32) -> Vec<Vec<f64>> {
    // e^{-2t} kills everything well before t = 80 for n ≤ a few dozen
    let (nodes, weights) = crate::quad::composite_gl(0.0, 80.0, 160, 20);
    let mut g = vec![vec![0.0; nmax + 1]; nmax + 1];
    let mut seq = Vec::new();
    for (t, w) in nodes.iter().zip(&weights) {
        laguerre_ell_seq(nmax, k, *t, &mut seq);
        let wt = w * t.powi(k as i32);
        for n in 0..=nmax {
            for m in 0..=nmax {
                g[n][m] += wt * seq[n] * seq[m];
            }
        }
    }
    g
}

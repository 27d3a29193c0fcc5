//! Plancherel measure of the joint spectrum and its per-η consistency check.
//!
//! Per η, integrating |V(ξ,η)|² over ξ block by block in polar coordinates
//! and using ∫ℒ_nℒ_{n'} t^{r−1}dt = (n+r−1)!/(2^r n!) δ gives
//!
//!   ∫_{R^{2r}} ℒ_n^{(r−1)}(|ξ|²/b)² dξ = (π/2)^r · b^r · binom(n+r−1, n),
//!
//! while the P₀-block integrates |m_H|² against dσ_{r₀} exactly. Hence
//! lhs/rhs = (π/2)^{|r|}, independent of r₀, b and the multiplier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::group::StratifiedGroup;
use crate::kernel::{lowest_spectral_slope, TruncationSpec, VEval, PROFILE_SEED};
use crate::laguerre::binom_multiset;
use crate::multiplier::Multiplier;
use crate::quad::{composite_gl, fixed_chunk_sum};
use crate::spectral::{decompose, generic_profile, SpectralData, CLUSTER_TOL};

/// The per-η ratio ∫|V|²dξ / Σ_n ∫|m_H|²dσ Π b^r binom.
pub fn plancherel_ratio_constant(r_total: usize) -> f64 {
    (PI / 2.0).powi(r_total as i32)
}

/// Γ(m/2) for integer m ≥ 1.
pub fn gamma_half(m: usize) -> f64 {
    assert!(m >= 1);
    let (mut g, mut x) = if m.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while x + 0.5 < m as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// ∫ |F(λ+μ)|² dσ_{r₀}(μ) for the λ-part F of H; Dirac at 0 when r₀ = 0, otherwise
/// π^{r₀/2}/Γ(r₀/2) μ^{r₀/2−1} dμ integrated after μ = y², which absorbs the weight.
pub fn sigma_integral(h: &Multiplier, lambda_n: f64, r0: usize, lambda_max: f64, nodes: usize) -> f64 {
    if r0 == 0 {
        return h.eval(lambda_n).norm_sqr();
    }
    if lambda_n >= lambda_max {
        return 0.0;
    }
    let ymax = (lambda_max - lambda_n).sqrt();
    let panels = (nodes / 16).max(1);
    let (y, w) = composite_gl(0.0, ymax, panels, nodes / panels);
    let c = PI.powf(r0 as f64 / 2.0) / gamma_half(r0) * 2.0;
    let mut acc = 0.0;
    for (yi, wi) in y.iter().zip(&w) {
        acc += wi * yi.powi(r0 as i32 - 1) * h.eval(lambda_n + yi * yi).norm_sqr();
    }
    c * acc
}

/// Σ_n ∫|m_H(n,μ,η)|² dσ_{r₀}(μ) Π_j b_j^{r_j} binom(n_j+r_j−1, n_j).
pub fn plancherel_density(h: &Multiplier, sd: &SpectralData, eta: &[f64], trunc: &TruncationSpec) -> f64 {
    let lambda = trunc.lambda(h);
    let chi = h.joint_factor(eta);
    if chi == 0.0 {
        return 0.0;
    }
    let nmax = match trunc.n_box(lambda, sd) {
        Some(n) => n,
        None => return 0.0,
    };
    let weight0: f64 = sd.b.iter().zip(&sd.r).map(|(b, r)| b.powi(*r as i32)).product();
    // without a P₀-block the levels below the support of H contribute nothing,
    // which keeps the innermost sum short when its b is small
    let lower = if sd.r0 == 0 { h.support_lower() } else { f64::NEG_INFINITY };
    let d = sd.done;
    if d == 0 {
        return chi * chi * sigma_integral(h, 0.0, sd.r0, lambda, trunc.mu_nodes);
    }
    let (bl, rl) = (sd.b[d - 1], sd.r[d - 1]);
    let mut n = vec![0usize; d];
    let mut acc = 0.0;
    loop {
        let base: f64 = (0..d - 1).map(|j| (2 * n[j] + sd.r[j]) as f64 * sd.b[j]).sum();
        if base + rl as f64 * bl <= lambda {
            let outer: f64 = (0..d - 1).map(|j| binom_multiset(n[j], sd.r[j])).product();
            let lo = if lower.is_finite() { ((lower - base) / (2.0 * bl) - rl as f64 / 2.0).ceil().max(0.0) as usize } else { 0 };
            for k in lo..=nmax[d - 1] {
                let lam = base + (2 * k + rl) as f64 * bl;
                if lam > lambda {
                    break;
                }
                let s = sigma_integral(h, lam, sd.r0, lambda, trunc.mu_nodes);
                if s != 0.0 {
                    acc += s * outer * binom_multiset(k, rl);
                }
            }
        }
        let mut axis = d - 1;
        loop {
            if axis == 0 {
                return acc * weight0 * chi * chi;
            }
            axis -= 1;
            if n[axis] < nmax[axis] {
                n[axis] += 1;
                break;
            }
            n[axis] = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaQuadrature {
    /// Gauss–Legendre product rule on [−w, w]^{d2} (w = Λ/β when None)
    ProductGrid { nodes: usize, half_width: Option<f64> },
    /// uniform samples in the same cube
    MonteCarlo { samples: usize, seed: u64, half_width: Option<f64> },
}

/// (2π)^{|r|−dim G} ∫ plancherel_density dη.
pub fn plancherel_rhs(h: &Multiplier, g: &StratifiedGroup, quad: &EtaQuadrature, trunc: &TruncationSpec) -> Result<f64> {
    if h.is_zero() {
        return Ok(0.0);
    }
    let lambda = trunc.lambda(h);
    if !lambda.is_finite() {
        return Err(Error::BadParameters("Plancherel needs a compactly supported multiplier".into()));
    }
    let profile = generic_profile(g, 64, PROFILE_SEED)?;
    let r_total: usize = profile.r.iter().sum();
    let default_w = lambda / (0.999 * lowest_spectral_slope(g, PROFILE_SEED));
    let density = |eta: &[f64]| -> f64 {
        match decompose(g, eta, CLUSTER_TOL) {
            Ok(sd) if sd.profile() == profile.profile() => plancherel_density(h, &sd, eta, trunc),
            _ => 0.0,
        }
    };
    let integral = match *quad {
        EtaQuadrature::ProductGrid { nodes, half_width } => {
            let w = half_width.unwrap_or(default_w);
            // panels of 16 nodes each; an even panel count keeps η = 0 off the nodes
            let panels = nodes.div_ceil(16).max(2) & !1;
            let (x, wt) = composite_gl(-w, w, panels, 16);
            let m = x.len();
            let total = m.pow(g.d2 as u32);
            fixed_chunk_sum(total, |flat| {
                let mut rem = flat;
                let mut eta = vec![0.0; g.d2];
                let mut weight = 1.0;
                for k in (0..g.d2).rev() {
                    let i = rem % m;
                    rem /= m;
                    eta[k] = x[i];
                    weight *= wt[i];
                }
                weight * density(&eta)
            })
        }
        EtaQuadrature::MonteCarlo { samples, seed, half_width } => {
            let w = half_width.unwrap_or(default_w);
            let vol = (2.0 * w).powi(g.d2 as i32);
            let sum = chunked_mc(samples, seed, |rng| {
                let eta: Vec<f64> = (0..g.d2).map(|_| rng.random_range(-w..w)).collect();
                density(&eta)
            });
            vol * sum / samples as f64
        }
    };
    Ok((2.0 * PI).powi(r_total as i32 - g.dim() as i32) * integral)
}

/// Deterministic parallel Monte Carlo sum: fixed chunks, one ChaCha stream per chunk.
pub fn chunked_mc<F>(samples: usize, seed: u64, f: F) -> f64
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    const CHUNK: usize = 1 << 14;
    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64 + 1);
            let n = CHUNK.min(samples - c * CHUNK);
            (0..n).map(|_| f(&mut rng)).sum::<f64>()
        })
        .collect();
    partial.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiQuadrature {
    /// midpoint rule on the cube [−R, R]^{d1}
    Grid { points_per_axis: usize },
    /// importance samples adapted to the spectral blocks of J_η
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlancherelCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// None when both sides vanish
    pub ratio: Option<f64>,
    pub expected_ratio: f64,
    pub status: String,
}

/// Radius beyond which |V(ξ,η)|² is negligible (every Laguerre factor is past
/// its turning point by a wide margin and μ exceeds Λ).
pub fn xi_radius(sd: &SpectralData, nmax: &[usize], lambda: f64) -> f64 {
    let mut r2 = if sd.r0 > 0 { lambda } else { 0.0 };
    for ((b, r), n) in sd.b.iter().zip(&sd.r).zip(nmax) {
        r2 += b * (2.0 * (*n + *r) as f64 + 30.0);
    }
    r2.sqrt()
}

/// Compare ∫|V(ξ,η)|²dξ (by quadrature) with the Plancherel density at η.
pub fn plancherel_check_at_eta(
    h: &Multiplier,
    g: &StratifiedGroup,
    eta: &[f64],
    quad: &XiQuadrature,
    trunc: &TruncationSpec,
) -> Result<PlancherelCheck> {
    let sd = decompose(g, eta, CLUSTER_TOL).map_err(|e| Error::SingularEta(e.to_string()))?;
    let expected_ratio = plancherel_ratio_constant(sd.r_total());
    let rhs = plancherel_density(h, &sd, eta, trunc);
    let lambda = trunc.lambda(h);
    let ev = VEval::new(h, sd.clone(), eta, trunc);
    let nmax = trunc.n_box(lambda, &sd);
    let lhs = match nmax {
        None => 0.0,
        Some(_) if h.is_zero() => 0.0,
        Some(nmax) => {
            let radius = xi_radius(&sd, &nmax, lambda);
            let d1 = g.d1;
            match *quad {
                XiQuadrature::Grid { points_per_axis: n } => {
                    let step = 2.0 * radius / n as f64;
                    let total = n.pow(d1 as u32);
                    let sum = fixed_chunk_sum(total, |flat| {
                        let mut xi = vec![0.0; d1];
                        let mut rem = flat;
                        for i in (0..d1).rev() {
                            xi[i] = -radius + (rem % n) as f64 * step + 0.5 * step;
                            rem /= n;
                        }
                        ev.eval(&xi, &mut Vec::new()).norm_sqr()
                    });
                    sum * step.powi(d1 as i32)
                }
                XiQuadrature::MonteCarlo { samples, seed } => {
                    // importance sampling block by block: in each P_j-plane a Gaussian with
                    // t = |P_jξ|²/b_j ~ Γ(r_j, n_max+1), whose tail dominates e^{−2t}·poly(t);
                    // on ker J_η uniform in the ball |ξ₀|² ≤ Λ that carries the μ-support
                    let sigma2: Vec<f64> = sd.b.iter().zip(&nmax).map(|(b, n)| b * (*n as f64 + 1.0) / 2.0).collect();
                    let r0 = sd.r0;
                    let rad0 = lambda.sqrt();
                    let log_q_const: f64 = sigma2.iter().zip(&sd.r).map(|(s2, r)| -(*r as f64) * (2.0 * PI * s2).ln()).sum::<f64>()
                        - if r0 > 0 { (PI.powf(r0 as f64 / 2.0) / gamma_half(r0 + 2) * rad0.powi(r0 as i32)).ln() } else { 0.0 };
                    let sum = chunked_mc(samples, seed, |rng| {
                        let mut xi = vec![0.0; d1];
                        let mut log_q = log_q_const;
                        for (j, basis) in sd.basis.iter().enumerate() {
                            let sd_j = sigma2[j].sqrt();
                            for c in 0..basis.ncols() {
                                let z: f64 = StandardNormal.sample(rng);
                                log_q -= z * z / 2.0;
                                for i in 0..d1 {
                                    xi[i] += basis[(i, c)] * z * sd_j;
                                }
                            }
                        }
                        if r0 > 0 {
                            let mut z: Vec<f64> = (0..r0).map(|_| StandardNormal.sample(rng)).collect();
                            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                            let rad = rad0 * rng.random::<f64>().powf(1.0 / r0 as f64);
                            for v in z.iter_mut() {
                                *v *= rad / norm;
                            }
                            for (c, zc) in z.iter().enumerate() {
                                for i in 0..d1 {
                                    xi[i] += sd.basis0[(i, c)] * zc;
                                }
                            }
                        }
                        ev.eval(&xi, &mut Vec::new()).norm_sqr() * (-log_q).exp()
                    });
                    sum / samples as f64
                }
            }
        }
    };
    let (ratio, status) = if lhs == 0.0 && rhs == 0.0 {
        (None, "both-zero".to_string())
    } else if rhs == 0.0 {
        (None, "rhs-zero".to_string())
    } else {
        (Some(lhs / rhs), "ok".to_string())
    };
    Ok(PlancherelCheck { lhs, rhs, ratio, expected_ratio, status })
}

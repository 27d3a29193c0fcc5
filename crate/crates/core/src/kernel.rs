//! The Laguerre series V(ξ, η) and synthesis of convolution kernels on grids.
//!
//! 𝒦(x,u) = 2^{|r|}(2π)^{−dim G} ∫∫ V(ξ,η) e^{i⟨ξ,x⟩} e^{i⟨η,u⟩} dξ dη with
//! V(ξ,η) = Σ_n m_H(n,|P₀ξ|²,η) Π_j ℒ_{n_j}^{(r_j−1)}(|P_jξ|²/b_j).

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::group::StratifiedGroup;
use crate::laguerre::laguerre_ell_seq;
use crate::multiplier::Multiplier;
use crate::spectral::{decompose, generic_profile, random_unit, Profile, SpectralData, CLUSTER_TOL};

/// Default Nyquist safety factor on the ξ-radius sqrt(Λ).
pub const NYQUIST_SAFETY: f64 = 4.0;
/// Seed used to discover the generic profile when a caller does not care.
pub const PROFILE_SEED: u64 = 0x5eed_0001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    /// spectral support bound Λ; `None` takes the multiplier's own
    pub lambda_max: Option<f64>,
    /// extra n per axis beyond floor((Λ/b_j − r_j)/2); changes nothing for compact F
    #[serde(default)]
    pub extra: usize,
    /// μ-quadrature nodes for the r₀ > 0 Plancherel density
    #[serde(default = "default_mu_nodes")]
    pub mu_nodes: usize,
}

fn default_mu_nodes() -> usize {
    64
}

impl Default for TruncationSpec {
    fn default() -> Self {
        TruncationSpec { lambda_max: None, extra: 0, mu_nodes: default_mu_nodes() }
    }
}

impl TruncationSpec {
    pub fn lambda(&self, h: &Multiplier) -> f64 {
        self.lambda_max.unwrap_or_else(|| h.support_bound())
    }

    /// Per-axis upper limits of the n-box (None when the box is empty).
    pub fn n_box(&self, lambda: f64, sd: &SpectralData) -> Option<Vec<usize>> {
        let mut out = Vec::with_capacity(sd.done);
        for (b, r) in sd.b.iter().zip(&sd.r) {
            let top = ((lambda / b - *r as f64) / 2.0).floor();
            if !(top >= 0.0) {
                return None;
            }
            out.push(top as usize + self.extra);
        }
        Some(out)
    }
}

/// m_H(n, μ, η) = H(Σ(2n_j + r_j) b_j + μ, η).
pub fn reparametrize(h: &Multiplier, sd: &SpectralData, n: &[usize], mu: f64, eta: &[f64]) -> Complex64 {
    assert_eq!(n.len(), sd.done);
    h.eval_joint(spectral_point(sd, n) + mu, eta)
}

fn spectral_point(sd: &SpectralData, n: &[usize]) -> f64 {
    n.iter().zip(&sd.b).zip(&sd.r).map(|((n, b), r)| (2 * n + r) as f64 * b).sum()
}

/// V(·, η) for a fixed η, with everything ξ-independent precomputed.
pub struct VEval<'a> {
    h: &'a Multiplier,
    pub sd: SpectralData,
    nmax: Vec<usize>,
    /// (flat n-tuple, base spectral point) in lexicographic order
    terms: Vec<(Vec<usize>, f64)>,
    /// m_H at μ = 0, used when r₀ = 0
    m0: Vec<Complex64>,
    chi: f64,
}

impl<'a> VEval<'a> {
    pub fn new(h: &'a Multiplier, sd: SpectralData, eta: &[f64], trunc: &TruncationSpec) -> Self {
        let lambda = trunc.lambda(h);
        let chi = h.joint_factor(eta);
        let nmax = if chi == 0.0 { None } else { trunc.n_box(lambda, &sd) };
        let mut terms = Vec::new();
        if let Some(nmax) = &nmax {
            let mut n = vec![0usize; sd.done];
            'outer: loop {
                terms.push((n.clone(), spectral_point(&sd, &n)));
                let mut axis = sd.done;
                loop {
                    if axis == 0 {
                        break 'outer;
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
        let m0 = terms.iter().map(|(_, lam)| h.eval(*lam) * chi).collect();
        VEval { h, nmax: nmax.unwrap_or_else(|| vec![0; sd.done]), sd, terms, m0, chi }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() || (self.sd.r0 == 0 && self.m0.iter().all(|m| m.norm_sqr() == 0.0))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// (s_j = |P_jξ|²/b_j, μ = |P₀ξ|²).
    pub fn coordinates(&self, xi: &[f64]) -> (Vec<f64>, f64) {
        let proj = |basis: &nalgebra::DMatrix<f64>| -> f64 {
            let mut acc = 0.0;
            for c in 0..basis.ncols() {
                let mut d = 0.0;
                for (i, x) in xi.iter().enumerate() {
                    d += basis[(i, c)] * x;
                }
                acc += d * d;
            }
            acc
        };
        let s = self.sd.basis.iter().zip(&self.sd.b).map(|(bs, b)| proj(bs) / b).collect();
        (s, proj(&self.sd.basis0))
    }

    pub fn eval(&self, xi: &[f64], scratch: &mut Vec<Vec<f64>>) -> Complex64 {
        if self.terms.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        let (s, mu) = self.coordinates(xi);
        self.eval_at(&s, mu, scratch)
    }

    /// V as a function of the projection coordinates.
    pub fn eval_at(&self, s: &[f64], mu: f64, scratch: &mut Vec<Vec<f64>>) -> Complex64 {
        if self.terms.is_empty() {
            return Complex64::new(0.0, 0.0);
        }
        scratch.resize_with(self.sd.done, Vec::new);
        for j in 0..self.sd.done {
            laguerre_ell_seq(self.nmax[j], self.sd.r[j] as u32 - 1, s[j], &mut scratch[j]);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, (n, lam)) in self.terms.iter().enumerate() {
            let m = if self.sd.r0 == 0 { self.m0[idx] } else { self.h.eval(lam + mu) * self.chi };
            if m.re == 0.0 && m.im == 0.0 {
                continue;
            }
            let mut prod = 1.0;
            for (j, nj) in n.iter().enumerate() {
                prod *= scratch[j][*nj];
            }
            acc += m * prod;
        }
        acc
    }
}

impl VEval<'_> {
    /// 𝒦^η(x), the kernel Fourier-transformed in the central variable only:
    /// 2^{|r|}(2π)^{−d1} Σ_n m_n Π_j (πb_j)^{r_j} L_{n_j}^{(r_j−1)}(b_j|P_jx|²/2) e^{−b_j|P_jx|²/4}.
    /// `None` when r₀ > 0 (the P₀ block would need a Hankel transform).
    pub fn x_slice(&self, x: &[f64], scratch: &mut Vec<Vec<f64>>) -> Option<Complex64> {
        if self.sd.r0 > 0 {
            return None;
        }
        if self.terms.is_empty() {
            return Some(Complex64::new(0.0, 0.0));
        }
        let (s, _) = self.coordinates(x);
        scratch.resize_with(self.sd.done, Vec::new);
        for j in 0..self.sd.done {
            let b = self.sd.b[j];
            laguerre_ell_seq(self.nmax[j], self.sd.r[j] as u32 - 1, s[j] * b * b / 4.0, &mut scratch[j]);
            // L_n(2t)e^{−t} = (−1)^n ℒ_n(t)
            for (n, v) in scratch[j].iter_mut().enumerate() {
                if n % 2 == 1 {
                    *v = -*v;
                }
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, (n, _)) in self.terms.iter().enumerate() {
            let m = self.m0[idx];
            if m.re == 0.0 && m.im == 0.0 {
                continue;
            }
            let mut prod = 1.0;
            for (j, nj) in n.iter().enumerate() {
                prod *= scratch[j][*nj];
            }
            acc += m * prod;
        }
        let mut pref = (2.0 * PI).powi(-(x.len() as i32));
        for (b, r) in self.sd.b.iter().zip(&self.sd.r) {
            pref *= (2.0 * PI * b).powi(*r as i32);
        }
        Some(acc * pref)
    }
}

/// V(ξ, η) at a single point.
pub fn eval_v(h: &Multiplier, g: &StratifiedGroup, eta: &[f64], xi: &[f64], trunc: &TruncationSpec) -> Result<Complex64> {
    if eta.len() != g.d2 || xi.len() != g.d1 {
        return Err(Error::DimensionMismatch(format!("need |η| = {} and |ξ| = {}", g.d2, g.d1)));
    }
    let sd = decompose(g, eta, CLUSTER_TOL).map_err(|e| Error::SingularEta(e.to_string()))?;
    let ev = VEval::new(h, sd, eta, trunc);
    Ok(ev.eval(xi, &mut Vec::new()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub count: usize,
    pub spacing: f64,
}

impl Axis {
    pub fn new(count: usize, spacing: f64) -> Self {
        Axis { count, spacing }
    }

    /// Coordinate of index i; the grid is centred so index count/2 is the origin.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - (self.count / 2) as f64) * self.spacing
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub group: String,
    pub lambda_max: f64,
    pub r_total: usize,
    pub skipped: usize,
    pub total_eta_points: usize,
}

/// Complex samples of a kernel on a centred lattice over 𝔤₁ × 𝔤₂.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub d1: usize,
    pub d2: usize,
    /// x axes first, then u axes
    pub axes: Vec<Axis>,
    /// row-major, last axis fastest
    pub values: Vec<Complex64>,
    pub meta: Option<KernelMeta>,
}

impl KernelGrid {
    pub fn zeros(d1: usize, axes: Vec<Axis>) -> Self {
        let n = axes.iter().map(|a| a.count).product();
        KernelGrid { d1, d2: axes.len() - d1, axes, values: vec![Complex64::new(0.0, 0.0); n], meta: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn unravel(&self, mut flat: usize, idx: &mut [usize]) {
        for (a, axis) in self.axes.iter().enumerate().rev() {
            idx[a] = flat % axis.count;
            flat /= axis.count;
        }
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (a, axis) in self.axes.iter().enumerate() {
            f = f * axis.count + idx[a];
        }
        f
    }

    /// (x, u) coordinates of a flat index.
    pub fn point(&self, flat: usize) -> (Vec<f64>, Vec<f64>) {
        let mut idx = vec![0; self.axes.len()];
        self.unravel(flat, &mut idx);
        let c: Vec<f64> = idx.iter().zip(&self.axes).map(|(i, a)| a.coord(*i)).collect();
        (c[..self.d1].to_vec(), c[self.d1..].to_vec())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Write the NKG1 binary format.
    pub fn write_nkg1<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"NKG1")?;
        w.write_all(&(self.axes.len() as u32).to_le_bytes())?;
        for a in &self.axes {
            w.write_all(&(a.count as u32).to_le_bytes())?;
            w.write_all(&a.spacing.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(16 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Read an NKG1 file; `d1` says how many leading axes are first-layer axes.
    pub fn read_nkg1<R: Read>(mut r: R, d1: usize) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"NKG1" {
            return Err(Error::Parse("bad NKG1 magic".into()));
        }
        let mut u4 = [0u8; 4];
        let mut f8 = [0u8; 8];
        r.read_exact(&mut u4)?;
        let ndims = u32::from_le_bytes(u4) as usize;
        if ndims <= d1 {
            return Err(Error::Parse(format!("NKG1 has {ndims} axes, need more than d1={d1}")));
        }
        let mut axes = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            r.read_exact(&mut u4)?;
            r.read_exact(&mut f8)?;
            axes.push(Axis::new(u32::from_le_bytes(u4) as usize, f64::from_le_bytes(f8)));
        }
        let mut grid = KernelGrid::zeros(d1, axes);
        for v in grid.values.iter_mut() {
            r.read_exact(&mut f8)?;
            let re = f64::from_le_bytes(f8);
            r.read_exact(&mut f8)?;
            *v = Complex64::new(re, f64::from_le_bytes(f8));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    /// ξ-radius safety factor in the Nyquist rule R_ξ = safety·sqrt(Λ)
    pub nyquist_safety: f64,
    /// seed for the generic-profile discovery
    pub profile_seed: u64,
    /// maximum fraction of singular η grid points
    pub max_singular_fraction: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { nyquist_safety: NYQUIST_SAFETY, profile_seed: PROFILE_SEED, max_singular_fraction: 0.01 }
    }
}

/// min over sampled unit η of Σ r_j b_j: the lowest spectral point is ≥ this·|η|.
pub fn lowest_spectral_slope(g: &StratifiedGroup, seed: u64) -> f64 {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..512 {
        let eta = random_unit(&mut rng, g.d2);
        if let Ok(sd) = decompose(g, &eta, CLUSTER_TOL) {
            let v: f64 = sd.b.iter().zip(&sd.r).map(|(b, r)| b * *r as f64).sum();
            best = best.min(v);
        }
    }
    best
}

/// Check the grid against the Nyquist rule for spectral bound Λ.
pub fn check_nyquist(g: &StratifiedGroup, lambda: f64, x_axes: &[Axis], u_axes: &[Axis], opts: &SynthOptions) -> Result<()> {
    if !lambda.is_finite() {
        return Err(Error::GridTooCoarse("multiplier has unbounded spectral support".into()));
    }
    let r_xi = opts.nyquist_safety * lambda.sqrt();
    for (i, a) in x_axes.iter().enumerate() {
        let nyq = PI / a.spacing;
        if r_xi > nyq {
            return Err(Error::GridTooCoarse(format!(
                "x axis {i}: xi radius {r_xi:.4} exceeds Nyquist {nyq:.4} (spacing {})",
                a.spacing
            )));
        }
    }
    let beta = lowest_spectral_slope(g, opts.profile_seed);
    let r_eta = lambda / (0.999 * beta);
    for (k, a) in u_axes.iter().enumerate() {
        let nyq = PI / a.spacing;
        if r_eta > nyq {
            return Err(Error::GridTooCoarse(format!(
                "u axis {k}: eta radius {r_eta:.4} exceeds Nyquist {nyq:.4} (spacing {})",
                a.spacing
            )));
        }
    }
    Ok(())
}

fn fft_freq(i: usize, n: usize) -> f64 {
    if i < n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Inverse DFT (e^{+i…}, unnormalised) along every axis of a row-major array.
fn ifft_nd(data: &mut [Complex64], shape: &[usize]) {
    let mut planner = FftPlanner::new();
    let total: usize = shape.iter().product();
    let mut stride = 1;
    for a in (0..shape.len()).rev() {
        let n = shape[a];
        if n > 1 {
            let plan = planner.plan_fft_inverse(n);
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let block = n * stride;
            for start in (0..total).step_by(block) {
                for off in 0..stride {
                    for (i, l) in line.iter_mut().enumerate() {
                        *l = data[start + off + i * stride];
                    }
                    plan.process(&mut line);
                    for (i, l) in line.iter().enumerate() {
                        data[start + off + i * stride] = *l;
                    }
                }
            }
        }
        stride *= n;
    }
}

/// Synthesize 𝒦_{H(L,U)} on the centred grid given by `x_axes` × `u_axes`.
///
/// The dual η-grid is shifted by half a cell so that η = 0 is never sampled;
/// η points where the spectral profile differs from the generic one are
/// skipped and counted.
pub fn synthesize_kernel(
    h: &Multiplier,
    g: &StratifiedGroup,
    x_axes: &[Axis],
    u_axes: &[Axis],
    trunc: &TruncationSpec,
    opts: &SynthOptions,
) -> Result<KernelGrid> {
    if x_axes.len() != g.d1 || u_axes.len() != g.d2 {
        return Err(Error::DimensionMismatch(format!("grid needs {} x axes and {} u axes", g.d1, g.d2)));
    }
    if x_axes.iter().chain(u_axes).any(|a| a.count == 0 || !(a.spacing > 0.0)) {
        return Err(Error::BadParameters("axes need count ≥ 1 and spacing > 0".into()));
    }
    let lambda = trunc.lambda(h);
    let axes: Vec<Axis> = x_axes.iter().chain(u_axes).cloned().collect();
    let mut out = KernelGrid::zeros(g.d1, axes);
    let n_eta: usize = u_axes.iter().map(|a| a.count).product();
    let n_xi: usize = x_axes.iter().map(|a| a.count).product();
    if h.is_zero() {
        out.meta = Some(KernelMeta {
            group: g.label().to_string(),
            lambda_max: 0.0,
            r_total: 0,
            skipped: 0,
            total_eta_points: n_eta,
        });
        return Ok(out);
    }
    check_nyquist(g, lambda, x_axes, u_axes, opts)?;
    let profile: Profile = generic_profile(g, 64, opts.profile_seed)?.profile();
    let r_total: usize = profile.r.iter().sum();
    let dxi: Vec<f64> = x_axes.iter().map(|a| 2.0 * PI / (a.count as f64 * a.spacing)).collect();
    let deta: Vec<f64> = u_axes.iter().map(|a| 2.0 * PI / (a.count as f64 * a.spacing)).collect();

    // work array in (η, ξ) order so each η owns a contiguous block
    let mut work = vec![Complex64::new(0.0, 0.0); n_eta * n_xi];
    let skipped: usize = work
        .par_chunks_mut(n_xi)
        .enumerate()
        .map(|(ie, block)| {
            let mut idx = vec![0usize; g.d2];
            let mut rem = ie;
            for k in (0..g.d2).rev() {
                idx[k] = rem % u_axes[k].count;
                rem /= u_axes[k].count;
            }
            let eta: Vec<f64> =
                (0..g.d2).map(|k| (fft_freq(idx[k], u_axes[k].count) + 0.5) * deta[k]).collect();
            let sd = match decompose(g, &eta, CLUSTER_TOL) {
                Ok(sd) if sd.profile() == profile => sd,
                _ => return 1usize,
            };
            let ev = VEval::new(h, sd, &eta, trunc);
            if ev.is_zero() {
                return 0;
            }
            let mut scratch = Vec::new();
            let mut xi_idx = vec![0usize; g.d1];
            let mut xi = vec![0.0; g.d1];
            for (ix, slot) in block.iter_mut().enumerate() {
                let mut rem = ix;
                for i in (0..g.d1).rev() {
                    xi_idx[i] = rem % x_axes[i].count;
                    rem /= x_axes[i].count;
                }
                for i in 0..g.d1 {
                    xi[i] = fft_freq(xi_idx[i], x_axes[i].count) * dxi[i];
                }
                *slot = ev.eval(&xi, &mut scratch);
            }
            0
        })
        .sum();
    if skipped as f64 > opts.max_singular_fraction * n_eta as f64 {
        return Err(Error::TooManySingular { skipped, total: n_eta });
    }

    let work_shape: Vec<usize> = u_axes.iter().chain(x_axes).map(|a| a.count).collect();
    ifft_nd(&mut work, &work_shape);

    let pref = 2f64.powi(r_total as i32) * (2.0 * PI).powi(-(g.dim() as i32))
        * dxi.iter().product::<f64>()
        * deta.iter().product::<f64>();
    // scatter back in (x, u) order, undoing the FFT ordering and the half-cell η shift
    let shape = out.shape();
    let d1 = g.d1;
    out.values.par_iter_mut().enumerate().for_each_with(vec![0usize; shape.len()], |idx, (flat, v)| {
        let mut rem = flat;
        for a in (0..shape.len()).rev() {
            idx[a] = rem % shape[a];
            rem /= shape[a];
        }
        let mut w = 0usize;
        let mut phase = 0.0;
        for k in 0..g.d2 {
            let n = u_axes[k].count;
            let src = (idx[d1 + k] + n - n / 2) % n;
            w = w * n + src;
            phase += 0.5 * deta[k] * u_axes[k].coord(idx[d1 + k]);
        }
        for i in 0..d1 {
            let n = x_axes[i].count;
            let src = (idx[i] + n - n / 2) % n;
            w = w * n + src;
        }
        *v = work[w] * Complex64::from_polar(pref, phase);
    });
    out.meta = Some(KernelMeta {
        group: g.label().to_string(),
        lambda_max: lambda,
        r_total,
        skipped,
        total_eta_points: n_eta,
    });
    Ok(out)
}

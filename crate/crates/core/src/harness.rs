//! Weighted norms of kernels and the empirical probes built on them: scaling
//! exponents of cone / Ω_p pieces, decomposition additivity, and the
//! Mihlin–Hörmander L¹ ratio.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use crate::decomposition::{cone_sectors, p_piece, sector_frame, weight_w, ConeSector, PPiece, SectorFrame};
use crate::error::{Error, Result};
use crate::group::{GroupPoint, StratifiedGroup};
use crate::kernel::{synthesize_kernel, Axis, KernelGrid, SynthOptions, TruncationSpec, VEval, PROFILE_SEED};
use crate::multiplier::{dyadic, mh_condition_norm, EtaCutoff, Multiplier, MH_WINDOW};
use crate::plancherel::{chunked_mc, gamma_half, plancherel_density};
use crate::quad::{composite_gl, fixed_chunk_sum, linear_fit};
use crate::spectral::{decompose, generic_profile, Profile, CLUSTER_TOL};

/// Default tolerance on fitted slopes: measured ≤ predicted + FIT_TOL.
pub const FIT_TOL: f64 = 0.3;
/// Minimum R² for a slope fit to count.
pub const MIN_R2: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub v: [f64; 2],
    pub s: i8,
}

impl FrameSpec {
    pub fn frame(&self) -> Result<SectorFrame> {
        sector_frame(self.v, self.s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    One,
    /// Π_ℓ (1+|u_ℓ|)^{α_ℓ}, u in the frame coordinates (standard ones when absent)
    PolyU { frame: Option<FrameSpec>, alpha: Vec<f64> },
    /// (1+|(x,u)|_G)^α
    PolyG { alpha: f64 },
    /// (1+w(x))^θ
    WeightW { theta: f64 },
    Product { factors: Vec<WeightSpec> },
}

/// A `WeightSpec` with frames resolved, ready for pointwise evaluation.
#[derive(Debug, Clone)]
pub enum Weight {
    One,
    PolyU(Option<SectorFrame>, Vec<f64>),
    PolyG(f64),
    WeightW(f64),
    Product(Vec<Weight>),
}

impl WeightSpec {
    pub fn resolve(&self, g: &StratifiedGroup) -> Result<Weight> {
        Ok(match self {
            WeightSpec::One => Weight::One,
            WeightSpec::PolyU { frame, alpha } => {
                if alpha.len() != g.d2 || alpha.iter().any(|a| !a.is_finite()) {
                    return Err(Error::BadParameters(format!("poly_u needs {} finite exponents", g.d2)));
                }
                let f = match frame {
                    Some(fs) if g.d2 == 3 => Some(fs.frame()?),
                    Some(_) => return Err(Error::DimensionMismatch("sector frames need d2 = 3".into())),
                    None => None,
                };
                Weight::PolyU(f, alpha.clone())
            }
            WeightSpec::PolyG { alpha } if alpha.is_finite() => Weight::PolyG(*alpha),
            WeightSpec::WeightW { theta } if theta.is_finite() => {
                if g.d1 != 4 {
                    return Err(Error::DimensionMismatch("w(x) needs d1 = 4".into()));
                }
                Weight::WeightW(*theta)
            }
            WeightSpec::Product { factors } => {
                Weight::Product(factors.iter().map(|f| f.resolve(g)).collect::<Result<_>>()?)
            }
            _ => return Err(Error::BadParameters("weight exponents must be finite".into())),
        })
    }
}

impl Weight {
    pub fn eval(&self, x: &[f64], u: &[f64]) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::PolyU(frame, alpha) => {
                let c: Vec<f64> = match frame {
                    Some(f) => f.u_coords(u).to_vec(),
                    None => u.to_vec(),
                };
                c.iter().zip(alpha).map(|(v, a)| (1.0 + v.abs()).powf(*a)).product()
            }
            Weight::PolyG(a) => {
                let p = GroupPoint::new(x.to_vec(), u.to_vec());
                (1.0 + crate::group::homogeneous_norm(&p)).powf(*a)
            }
            Weight::WeightW(t) => (1.0 + weight_w(x)).powf(*t),
            Weight::Product(fs) => fs.iter().map(|f| f.eval(x, u)).product(),
        }
    }
}

fn weighted_sum(grid: &KernelGrid, weight: &Weight, p: i32) -> f64 {
    let d1 = grid.d1;
    let sum = fixed_chunk_sum(grid.len(), |flat| {
        let v = grid.values[flat];
        if v.re == 0.0 && v.im == 0.0 {
            return 0.0;
        }
        let (x, u) = grid.point(flat);
        debug_assert_eq!(x.len(), d1);
        (weight.eval(&x, &u) * v.norm()).powi(p)
    });
    sum * grid.cell_volume()
}

/// (Σ |weight·𝒦|² cellvol)^{1/2}.
pub fn weighted_l2(grid: &KernelGrid, weight: &Weight) -> f64 {
    weighted_sum(grid, weight, 2).sqrt()
}

/// Σ |weight·𝒦| cellvol.
pub fn weighted_l1(grid: &KernelGrid, weight: &Weight) -> f64 {
    weighted_sum(grid, weight, 1)
}

/// 𝒦(x,u) at a single point: (2π)^{−d2} ∫ 𝒦^η(x) e^{i⟨η,u⟩} dη by a
/// Gauss–Legendre product rule on [−W, W]^{d2} (W = Λ/β); groups with r₀ = 0 only.
pub struct PointKernel<'a> {
    /// (η, quadrature weight, V(·, η)) for every generic node
    nodes: Vec<(Vec<f64>, f64, VEval<'a>)>,
    d2: usize,
    /// |u| up to which the η-rule resolves e^{i⟨η,u⟩} (about π nodes per period);
    /// |x|² has the same limit, since ℒ_n(|P_jx|²|η|/…) oscillates in η at that rate
    pub u_max: f64,
}

impl<'a> PointKernel<'a> {
    pub fn new(h: &'a Multiplier, g: &StratifiedGroup, nodes_per_axis: usize, trunc: &TruncationSpec) -> Result<Self> {
        let lambda = trunc.lambda(h);
        if !lambda.is_finite() {
            return Err(Error::BadParameters("pointwise kernels need a compactly supported multiplier".into()));
        }
        let profile = generic_profile(g, 64, PROFILE_SEED)?;
        if profile.r0 > 0 {
            return Err(Error::BadParameters("pointwise kernels need r0 = 0".into()));
        }
        let w = lambda / (0.999 * crate::kernel::lowest_spectral_slope(g, PROFILE_SEED));
        let panels = nodes_per_axis.div_ceil(16).max(2) & !1;
        let (x, wt) = composite_gl(-w, w, panels, 16);
        let m = x.len();
        let mut nodes = Vec::new();
        for flat in 0..m.pow(g.d2 as u32) {
            let mut rem = flat;
            let mut eta = vec![0.0; g.d2];
            let mut weight = 1.0;
            for k in (0..g.d2).rev() {
                eta[k] = x[rem % m];
                weight *= wt[rem % m];
                rem /= m;
            }
            if let Ok(sd) = decompose(g, &eta, CLUSTER_TOL) {
                if sd.profile() == profile.profile() {
                    let ev = VEval::new(h, sd, &eta, trunc);
                    if !ev.is_zero() {
                        nodes.push((eta, weight, ev));
                    }
                }
            }
        }
        Ok(PointKernel { nodes, d2: g.d2, u_max: m as f64 / w })
    }

    pub fn eval(&self, x: &[f64], u: &[f64]) -> Complex64 {
        let mut scratch = Vec::new();
        let mut acc = Complex64::new(0.0, 0.0);
        for (eta, w, ev) in &self.nodes {
            let k = ev.x_slice(x, &mut scratch).unwrap_or_default();
            let phase: f64 = eta.iter().zip(u).map(|(a, b)| a * b).sum();
            acc += k * Complex64::from_polar(*w, phase);
        }
        acc * (2.0 * PI).powi(-(self.d2 as i32))
    }
}

/// Unit-sphere area σ_{d−1} = 2π^{d/2}/Γ(d/2).
fn sphere_area(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half(d)
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-300 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

/// ∫ weight·|𝒦| by importance sampling from p(x,u) ∝ (1+|x|)^{−d1−1}(1+|u|^{1/2})^{−2d2−1},
/// which has the decay of (1+|·|_G)^{−Q−1}. Used when product grids would be too large.
///
/// Samples are confined to |x|² ≤ `kernel.u_max`, |u| ≤ `kernel.u_max`: beyond
/// that the η-rule aliases, and an error floor integrated over a growing volume
/// would swamp the estimate. The tail is dropped. `cube = Some((X, U))` further
/// restricts to max|x_i| ≤ X, max|u_k| ≤ U, e.g. to match a kernel grid.
pub fn weighted_l1_mc(
    kernel: &PointKernel,
    g: &StratifiedGroup,
    weight: &Weight,
    samples: usize,
    seed: u64,
    cube: Option<(f64, f64)>,
) -> f64 {
    let (d1, d2) = (g.d1, g.d2);
    // r ≤ r_max ⟺ y = r/(1+r) ≤ y_max, same for s = |u|^{1/2}; renormalise the truncated laws
    let r_max = kernel.u_max.sqrt();
    let y_max = r_max / (1.0 + r_max);
    let cx = d1 as f64 / sphere_area(d1) / y_max.powi(d1 as i32);
    let cu = d2 as f64 / sphere_area(d2) / y_max.powi(2 * d2 as i32);
    let z_max = y_max;
    let sum = chunked_mc(samples, seed, |rng| {
        // |x|/(1+|x|) = U^{1/d1} gives the radial law ∝ r^{d1−1}(1+r)^{−d1−1}
        let y: f64 = y_max * rng.random::<f64>().powf(1.0 / d1 as f64);
        let r = y / (1.0 - y);
        let x: Vec<f64> = random_direction(rng, d1).into_iter().map(|a| a * r).collect();
        let z: f64 = z_max * rng.random::<f64>().powf(1.0 / (2 * d2) as f64);
        let s = z / (1.0 - z);
        let u: Vec<f64> = random_direction(rng, d2).into_iter().map(|a| a * s * s).collect();
        let p = cx * (1.0 + r).powi(-(d1 as i32) - 1) * cu * (1.0 + s).powi(-2 * d2 as i32 - 1);
        if !(p > 0.0) || !r.is_finite() || !s.is_finite() {
            return 0.0;
        }
        if let Some((xh, uh)) = cube {
            if x.iter().any(|v| v.abs() > xh) || u.iter().any(|v| v.abs() > uh) {
                return 0.0;
            }
        }
        weight.eval(&x, &u) * kernel.eval(&x, &u).norm() / p
    });
    sum / samples as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditivityReport {
    /// ‖𝒦_H − Σ_ι 𝒦_{Hζ_ι}‖_∞ on the grid
    pub max_deviation: f64,
    pub max_abs: f64,
    pub relative: f64,
    pub pieces: usize,
}

/// Compare 𝒦_{H} with Σ_ι 𝒦_{H ζ_ι(U)} on one grid.
pub fn decomposition_additivity_check(
    h: &Multiplier,
    pieces: &[Arc<dyn EtaCutoff>],
    g: &StratifiedGroup,
    x_axes: &[Axis],
    u_axes: &[Axis],
    trunc: &TruncationSpec,
    opts: &SynthOptions,
) -> Result<AdditivityReport> {
    let full = synthesize_kernel(h, g, x_axes, u_axes, trunc, opts)?;
    let mut sum = vec![Complex64::new(0.0, 0.0); full.len()];
    for p in pieces {
        let hp = h.clone().with_joint(p.clone());
        let k = synthesize_kernel(&hp, g, x_axes, u_axes, trunc, opts)?;
        for (s, v) in sum.iter_mut().zip(&k.values) {
            *s += v;
        }
    }
    let max_deviation = full.values.iter().zip(&sum).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let max_abs = full.max_abs();
    let relative = if max_abs > 0.0 { max_deviation / max_abs } else { max_deviation };
    Ok(AdditivityReport { max_deviation, max_abs, relative, pieces: pieces.len() })
}

/// Fitted exponents of norm² ≈ C·Π scale_k^{slope_k}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slopes: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub r2: f64,
    pub predicted: Vec<f64>,
    pub tolerance: f64,
    /// measured ≤ predicted + tolerance for every slope, and R² ≥ MIN_R2
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub rho: f64,
    pub delta: Vec<f64>,
    pub norm2: f64,
}

fn fit_slopes(rows: &[ScalingRow], axes: &[usize], predicted: Vec<f64>) -> Result<SlopeFit> {
    // axes: which log₂ scales vary (0 = ρ, k ≥ 1 = δ_k)
    if rows.iter().any(|r| !(r.norm2 > 0.0) || !r.norm2.is_finite()) {
        return Err(Error::DegenerateFit("some norms vanish or are not finite".into()));
    }
    let xs: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| axes.iter().map(|&a| if a == 0 { r.rho.log2() } else { r.delta[a - 1].log2() }).collect())
        .collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.norm2.log2()).collect();
    let (_, slopes, std_errors, r2) =
        linear_fit(&xs, &ys).ok_or_else(|| Error::DegenerateFit("design matrix is singular".into()))?;
    let pass = r2 >= MIN_R2 && slopes.iter().zip(&predicted).all(|(m, p)| *m <= p + FIT_TOL);
    Ok(SlopeFit { slopes, std_errors, r2, predicted, tolerance: FIT_TOL, pass })
}

/// Settings shared by the scaling probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbeConfig {
    /// α per central coordinate of the piece's frame
    #[serde(default = "zero3")]
    pub alpha: [f64; 3],
    #[serde(default)]
    pub theta: f64,
    pub rhos: Vec<f64>,
    /// cone probe: one list of δ; Ω_p probe: the δ_ℓ values varied one axis at a time
    pub deltas: Vec<f64>,
    /// cone probe: which sector(s) q to measure
    #[serde(default = "default_sector")]
    pub sector: SectorChoice,
    #[serde(default = "default_eta_samples")]
    pub eta_samples: usize,
    #[serde(default = "default_x_samples")]
    pub x_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// kernel grid for the α ≠ 0 backend
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

fn zero3() -> [f64; 3] {
    [0.0; 3]
}
fn default_sector() -> SectorChoice {
    SectorChoice::Average { sign: 1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectorChoice {
    /// the sector whose centre is closest to `v`, with η₃-sign `s`
    Nearest { v: [f64; 2], s: i8 },
    /// norm² averaged over all sectors of one sign. Greedy centres are not
    /// equally spaced, so a single sector's width wanders with δ; the average does not.
    Average { sign: i8 },
}
fn default_eta_samples() -> usize {
    1 << 14
}
fn default_x_samples() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x: Vec<Axis>,
    pub u: Vec<Axis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbeResult {
    pub rows: Vec<ScalingRow>,
    pub fit: SlopeFit,
    pub backend: String,
}

/// Map from the unit cube to η, returning η and the sampling weight
/// (Jacobian times parameter volume).
type EtaParam<'a> = dyn Fn(&[f64; 3]) -> (Vec<f64>, f64) + Sync + 'a;

/// Unweighted or w-weighted ‖𝒦_{F(L)ζ(U)}‖₂² by Monte Carlo over η (and x when θ > 0),
/// with η drawn through `param` from common uniform numbers.
fn mc_norm2(
    f: &Multiplier,
    g: &StratifiedGroup,
    piece: Arc<dyn EtaCutoff>,
    profile: &Profile,
    param: &EtaParam,
    theta: f64,
    cfg: &ScalingProbeConfig,
) -> Result<f64> {
    let h = f.clone().with_joint(piece.clone());
    let trunc = TruncationSpec::default();
    let r_total: usize = profile.r.iter().sum();
    let xs = cfg.x_samples.max(1);
    let density = |eta: &[f64], rng: &mut ChaCha8Rng| -> f64 {
        if piece.eval(eta) == 0.0 {
            return 0.0;
        }
        let Ok(sd) = decompose(g, eta, CLUSTER_TOL) else { return 0.0 };
        if sd.profile() != *profile {
            return 0.0;
        }
        if theta == 0.0 {
            return (2.0 * PI).powi(r_total as i32 - g.dim() as i32) * plancherel_density(&h, &sd, eta, &trunc);
        }
        let ev = VEval::new(&h, sd, eta, &trunc);
        x_weighted_norm2(&ev, g.d1, g.d2, theta, xs, rng)
    };
    let sum = chunked_mc(cfg.eta_samples, cfg.seed, |rng| {
        let unit: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let (eta, w) = param(&unit);
        if w == 0.0 {
            return 0.0;
        }
        w * density(&eta, rng)
    });
    Ok(sum / cfg.eta_samples as f64)
}

/// (2π)^{−d2}·∫(1+w(x))^{2θ}|𝒦^η(x)|²dx by importance sampling; x is drawn
/// from the radial density d1/σ_{d1−1}·(1+|x|)^{−d1−1}. 𝒦^η is smooth in x at
/// the spectral scale, so this proposal has a heavier tail than the integrand.
pub fn x_weighted_norm2(ev: &VEval<'_>, d1: usize, d2: usize, theta: f64, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let cx = d1 as f64 / sphere_area(d1);
    let mut scratch = Vec::new();
    let mut acc = 0.0;
    for _ in 0..samples {
        let y = rng.random::<f64>().powf(1.0 / d1 as f64);
        let r = y / (1.0 - y);
        if !r.is_finite() {
            continue;
        }
        let dir = random_direction(rng, d1);
        let x: Vec<f64> = dir.iter().map(|c| c * r).collect();
        let Some(k) = ev.x_slice(&x, &mut scratch) else { return f64::NAN };
        let q = cx * (1.0 + r).powi(-(d1 as i32) - 1);
        let wgt = if theta == 0.0 { 1.0 } else { (1.0 + weight_w(&x)).powf(2.0 * theta) };
        acc += wgt * k.norm_sqr() / q;
    }
    (2.0 * PI).powi(-(d2 as i32)) * acc / samples as f64
}

fn pick_sector(sectors: Vec<ConeSector>, v: [f64; 2], sign: i8) -> Result<ConeSector> {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if !(n > 0.0) {
        return Err(Error::NotUnit);
    }
    sectors
        .into_iter()
        .filter(|s| s.q.sign == sign)
        .min_by(|a, b| {
            let da = (a.frame.v[0] - v[0] / n).hypot(a.frame.v[1] - v[1] / n);
            let db = (b.frame.v[0] - v[0] / n).hypot(b.frame.v[1] - v[1] / n);
            da.total_cmp(&db)
        })
        .ok_or_else(|| Error::BadParameters("sector sign must be ±1".into()))
}

/// Cone-piece support in (|η|, p = pf/|η|², angle of (η₁,η₂)) with η₃ of sign `sign`:
/// |η| ∈ (ρ/2, 2ρ), |p| ∈ (δ/2, 2δ) of either sign, angle within `reach` of `phi0`.
/// In these coordinates dη = |η|²/(4((1−p)/2)^{1/2}) d|η| dp dφ.
fn cone_param(rho: f64, delta: f64, sign: i8, phi0: f64, reach: f64) -> impl Fn(&[f64; 3]) -> (Vec<f64>, f64) + Sync {
    move |u: &[f64; 3]| {
        let r = rho * (0.5 + 1.5 * u[0]);
        let (sigma, v) = if u[1] < 0.5 { (1.0, 2.0 * u[1]) } else { (-1.0, 2.0 * u[1] - 1.0) };
        let p = sigma * delta * (0.5 + 1.5 * v);
        let phi = phi0 + reach * (2.0 * u[2] - 1.0);
        let c = ((1.0 + p) / 2.0).sqrt();
        let sn = ((1.0 - p) / 2.0).sqrt();
        let eta = vec![r * c * phi.cos(), r * c * phi.sin(), sign as f64 * r * sn];
        let volume = (1.5 * rho) * (3.0 * delta) * (2.0 * reach);
        (eta, volume * r * r / (4.0 * sn))
    }
}

fn grid_norm2(f: &Multiplier, g: &StratifiedGroup, piece: Arc<dyn EtaCutoff>, weight: &Weight, grid: &GridSpec) -> Result<f64> {
    let h = f.clone().with_joint(piece);
    let k = synthesize_kernel(&h, g, &grid.x, &grid.u, &TruncationSpec::default(), &SynthOptions::default())?;
    Ok(weighted_l2(&k, weight).powi(2))
}

fn check_lists(rhos: &[f64], deltas: &[f64]) -> Result<()> {
    if rhos.len() < 4 || deltas.len() < 4 {
        return Err(Error::BadParameters("scaling probes need at least 4 values of ρ and of δ".into()));
    }
    if rhos.iter().chain(deltas).any(|v| !(*v > 0.0)) || deltas.iter().any(|d| *d > 1.0) {
        return Err(Error::BadParameters("need ρ > 0 and δ ∈ (0,1]".into()));
    }
    Ok(())
}

/// Measure ‖(1+w)^θ Π(1+|u^q_ℓ|)^{α_ℓ} 𝒦_{F(L)ζ_{c,ρ,δ,q}(U)}‖₂² over the (ρ, δ) grid
/// and fit log₂ norm² = a + s_ρ log₂ρ + s_δ log₂δ; the predicted slopes are
/// (3 − 2|α| − 2θ, 3/2 − α₂ − 2α₃).
pub fn scaling_probe_cone(g: &StratifiedGroup, f: &Multiplier, cfg: &ScalingProbeConfig) -> Result<ScalingProbeResult> {
    check_lists(&cfg.rhos, &cfg.deltas)?;
    let profile = generic_profile(g, 64, PROFILE_SEED)?.profile();
    let a = cfg.alpha;
    let predicted = vec![3.0 - 2.0 * (a[0] + a[1] + a[2]) - 2.0 * cfg.theta, 1.5 - a[1] - 2.0 * a[2]];
    let use_grid = a.iter().any(|v| *v != 0.0);
    if use_grid && cfg.grid.is_none() {
        return Err(Error::BadParameters("α ≠ 0 needs a kernel grid".into()));
    }
    if f.is_zero() {
        return Err(Error::DegenerateFit("the multiplier is zero, so every norm vanishes".into()));
    }
    let configs: Vec<(f64, f64)> = cfg.rhos.iter().flat_map(|r| cfg.deltas.iter().map(move |d| (*r, *d))).collect();
    let norms: Vec<Result<f64>> = configs
        .iter()
        .map(|&(rho, delta)| {
            let sectors = cone_sectors(g, rho, delta)?;
            let (v, sign) = match cfg.sector {
                SectorChoice::Nearest { v, s } => (v, s),
                SectorChoice::Average { sign } => ([1.0, 0.0], sign),
            };
            let sector = pick_sector(sectors, v, sign)?;
            if use_grid {
                let weight = WeightSpec::Product {
                    factors: vec![
                        WeightSpec::WeightW { theta: cfg.theta },
                        WeightSpec::PolyU { frame: Some(FrameSpec { v: sector.frame.v, s: sector.frame.s }), alpha: a.to_vec() },
                    ],
                }
                .resolve(g)?;
                let piece: Arc<dyn EtaCutoff> = match cfg.sector {
                    SectorChoice::Nearest { .. } => Arc::new(sector),
                    SectorChoice::Average { .. } => Arc::new(sector.rms_family()),
                };
                return grid_norm2(f, g, piece, &weight, cfg.grid.as_ref().unwrap());
            }
            let (piece, phi0, reach): (Arc<dyn EtaCutoff>, f64, f64) = match cfg.sector {
                SectorChoice::Nearest { .. } => {
                    let reach = 2.0 * (2.0 * sector.partition.eps).min(1.0).asin();
                    let phi0 = sector.frame.v[1].atan2(sector.frame.v[0]);
                    (Arc::new(sector), phi0, reach)
                }
                SectorChoice::Average { .. } => (Arc::new(sector.rms_family()), 0.0, PI),
            };
            let param = cone_param(rho, delta, sign, phi0, reach);
            mc_norm2(f, g, piece, &profile, &param, cfg.theta, cfg)
        })
        .collect();
    let mut rows = Vec::new();
    for ((rho, delta), n) in configs.iter().zip(norms) {
        rows.push(ScalingRow { rho: *rho, delta: vec![*delta], norm2: n? });
    }
    let fit = fit_slopes(&rows, &[0, 1], predicted)?;
    Ok(ScalingProbeResult { rows, fit, backend: if use_grid { "grid" } else { "monte_carlo" }.into() })
}

/// Ω_p analogue: pieces ζ_{p,ρ,δ} with one δ_ℓ varied at a time (the others 1);
/// predicted slopes (3 − 2|α| − 2θ, 1 − 2α₁, 1 − 2α₂, 1 − 2α₃).
pub fn scaling_probe_p(g: &StratifiedGroup, f: &Multiplier, cfg: &ScalingProbeConfig) -> Result<ScalingProbeResult> {
    check_lists(&cfg.rhos, &cfg.deltas)?;
    let profile = generic_profile(g, 64, PROFILE_SEED)?.profile();
    let a = cfg.alpha;
    let predicted = vec![
        3.0 - 2.0 * (a[0] + a[1] + a[2]) - 2.0 * cfg.theta,
        1.0 - 2.0 * a[0],
        1.0 - 2.0 * a[1],
        1.0 - 2.0 * a[2],
    ];
    let use_grid = a.iter().any(|v| *v != 0.0);
    if use_grid && cfg.grid.is_none() {
        return Err(Error::BadParameters("α ≠ 0 needs a kernel grid".into()));
    }
    if f.is_zero() {
        return Err(Error::DegenerateFit("the multiplier is zero, so every norm vanishes".into()));
    }
    let mut configs: Vec<(f64, [f64; 3])> = Vec::new();
    for &rho in &cfg.rhos {
        for l in 0..3 {
            for &d in &cfg.deltas {
                let mut ds = [1.0; 3];
                ds[l] = d;
                if l > 0 && d == 1.0 {
                    continue; // already present from l = 0
                }
                configs.push((rho, ds));
            }
        }
    }
    let mut rows = Vec::new();
    for &(rho, ds) in &configs {
        let piece: PPiece = p_piece(g, rho, ds)?;
        let n = if use_grid {
            let weight = WeightSpec::Product {
                factors: vec![WeightSpec::WeightW { theta: cfg.theta }, WeightSpec::PolyU { frame: None, alpha: a.to_vec() }],
            }
            .resolve(g)?;
            grid_norm2(f, g, Arc::new(piece), &weight, cfg.grid.as_ref().unwrap())?
        } else {
            // |η_ℓ| ∈ (ρδ_ℓ/2, 2ρδ_ℓ) with either sign
            let vol: f64 = ds.iter().map(|d| 4.0 * rho * d).product();
            let param = move |p: &[f64; 3]| -> (Vec<f64>, f64) {
                ((0..3).map(|l| 2.0 * rho * ds[l] * (2.0 * p[l] - 1.0)).collect(), vol)
            };
            mc_norm2(f, g, Arc::new(piece), &profile, &param, cfg.theta, cfg)?
        };
        rows.push(ScalingRow { rho, delta: ds.to_vec(), norm2: n });
    }
    let fit = fit_slopes(&rows, &[0, 1, 2, 3], predicted)?;
    Ok(ScalingProbeResult { rows, fit, backend: if use_grid { "grid" } else { "monte_carlo" }.into() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhRow {
    pub t: f64,
    pub l1: f64,
    pub mh_norm: f64,
    pub ratio: f64,
}

/// Scales at which sup_t ‖F(t·)χ‖_{W₂^s} is sampled: quarter octaves over 2^{±12}.
pub fn mh_sup_set() -> Vec<f64> {
    (-48..=48).map(|k| 2f64.powf(k as f64 / 4.0)).collect()
}

/// For each t: synthesize 𝒦_{F(t·)(L)} on the base grid dilated by (t^{1/2}, t)
/// and report ‖𝒦‖₁ / sup_{t'} ‖F(tt'·)χ‖_{W₂^s}.
pub fn mh_ratio_probe(
    g: &StratifiedGroup,
    f_base: &Multiplier,
    s: f64,
    t_list: &[f64],
    grid: &GridSpec,
    opts: &SynthOptions,
) -> Result<Vec<MhRow>> {
    let sup_set = mh_sup_set();
    let mut rows = Vec::new();
    for &t in t_list {
        if !(t > 0.0) {
            return Err(Error::BadParameters("t must be positive".into()));
        }
        let f = f_base.clone().dilate(t);
        let mh_norm = if f.is_zero() { 0.0 } else { mh_condition_norm(&f, s, MH_WINDOW, &sup_set, 512)? };
        let xa: Vec<Axis> = grid.x.iter().map(|a| Axis::new(a.count, a.spacing * t.sqrt())).collect();
        let ua: Vec<Axis> = grid.u.iter().map(|a| Axis::new(a.count, a.spacing * t)).collect();
        let k = synthesize_kernel(&f, g, &xa, &ua, &TruncationSpec::default(), opts)?;
        let l1 = weighted_l1(&k, &Weight::One);
        let ratio = if mh_norm > 0.0 { l1 / mh_norm } else { 0.0 };
        rows.push(MhRow { t, l1, mh_norm, ratio });
    }
    Ok(rows)
}

/// max over rows of max(ratio/median, median/ratio).
pub fn ratio_spread(rows: &[MhRow]) -> f64 {
    let mut r: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    if r.is_empty() || r.iter().any(|v| !(*v > 0.0)) {
        return f64::INFINITY;
    }
    r.sort_by(f64::total_cmp);
    let n = r.len();
    let median = if n % 2 == 1 { r[n / 2] } else { 0.5 * (r[n / 2 - 1] + r[n / 2]) };
    r.iter().map(|v| (v / median).max(median / v)).fold(1.0, f64::max)
}

/// The default dyadic t list of the MH probe, 2^{−6..6}.
pub fn mh_default_t_list() -> Vec<f64> {
    dyadic(-6, 6)
}

/// SHA-256 of the canonical JSON of a configuration.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let text = serde_json::to_string(cfg).expect("configs serialise");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Everything a probe run produced, keyed by the hash of its inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probe: String,
    pub config_hash: String,
    pub inputs: serde_json::Value,
    pub results: serde_json::Value,
    pub criteria: Vec<CriterionOutcome>,
    /// wall-clock seconds; excluded from determinism comparisons
    pub runtime_s: f64,
}

impl ProbeReport {
    pub fn new<C: Serialize, R: Serialize>(
        probe: &str,
        inputs: &C,
        results: &R,
        criteria: Vec<CriterionOutcome>,
        started: Instant,
    ) -> Result<Self> {
        Ok(ProbeReport {
            probe: probe.to_string(),
            config_hash: config_hash(inputs),
            inputs: serde_json::to_value(inputs)?,
            results: serde_json::to_value(results)?,
            criteria,
            runtime_s: started.elapsed().as_secs_f64(),
        })
    }

    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

/// CSV "rho,delta,norm2" (δ components joined by ';').
pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut out = String::from("rho,delta,norm2\n");
    for r in rows {
        let d: Vec<String> = r.delta.iter().map(|v| format!("{v}")).collect();
        out.push_str(&format!("{},{},{:e}\n", r.rho, d.join(";"), r.norm2));
    }
    out
}

/// CSV "t,l1,mhnorm,ratio".
pub fn mh_csv(rows: &[MhRow]) -> String {
    let mut out = String::from("t,l1,mhnorm,ratio\n");
    for r in rows {
        out.push_str(&format!("{},{:e},{:e},{:e}\n", r.t, r.l1, r.mh_norm, r.ratio));
    }
    out
}

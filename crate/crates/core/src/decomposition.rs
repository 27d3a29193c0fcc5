//! Cutoff systems on the dual of the centre: homogeneous spherical partitions
//! of unity, dyadic cutoffs, the Ω_c / Ω_p split for the (37D) group, the
//! cone-adapted sector frames and pieces, and the weight w.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{pfaffian_form, StratifiedGroup};
use crate::multiplier::EtaCutoff;
use crate::quad::{plateau, smooth_step};
use crate::spectral::{decompose, random_unit, CLUSTER_TOL};

/// Ω_c = {b₁b₂ < ĉ|η|²}; see `compute_chat`.
pub const CHAT: f64 = 0.25;
/// Sector thinness ε = ŝ·δ^{1/2}. The lower bound on |η₂^q| on a sector scales
/// like ŝ while the cancellation in η₃^q needs ŝ < 1/4; 7/32 balances the two.
pub const S_HAT: f64 = 0.21875;
/// Width of the smooth step in η₃/|η| that splits ζ_c into ζ₊ + ζ₋.
/// On Ω_c one has |η₃|/|η| > 0.61, well clear of it.
pub const SIGN_SPLIT_TAU: f64 = 0.3;
/// Mesh points per unit ε used by the greedy separated-set construction.
pub const MESH_DENSITY: f64 = 64.0;

/// Dyadic cutoff χ with supp χ ⊆ [1/2, 2] and Σ_n χ(2ⁿt) = 1 for t > 0.
pub fn dyadic_chi(t: f64) -> f64 {
    if !(t > 0.5 && t < 2.0) {
        return 0.0;
    }
    let l = t.log2();
    smooth_step(l + 1.0) - smooth_step(l)
}

/// φ(y) as a function of |y|: 1 on [1/2, 5/2], supported in (1/4, 4).
pub fn phi_radial(r: f64) -> f64 {
    plateau(r, 0.25, 0.5, 2.5, 4.0)
}

fn golden_angle() -> f64 {
    PI * (3.0 - 5f64.sqrt())
}

/// Deterministic mesh on S^{n−1}. n = 2: uniform grid on the circle in angular
/// order, size rounded up to a multiple of 12 so that the angles π/k (k | 6)
/// are nodes; n = 3: Fibonacci sphere with `m` points.
pub fn sphere_mesh(n: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    let ga = golden_angle();
    match n {
        2 => {
            let m = 12 * m.div_ceil(12).max(1);
            Ok((0..m)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / m as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect())
        }
        3 => Ok((0..m)
            .map(|k| {
                let z = 1.0 - (2 * k + 1) as f64 / m as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let th = k as f64 * ga;
                vec![r * th.cos(), r * th.sin(), z]
            })
            .collect()),
        _ => Err(Error::BadParameters(format!("sphere meshes are implemented for n ∈ {{2,3}}, got {n}"))),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn mesh_size(n: usize, eps: f64, density: f64) -> usize {
    match n {
        2 => (2.0 * PI * density / eps).ceil() as usize,
        // area density: (density/8)² points per ε²
        _ => (4.0 * PI * (density / (8.0 * eps)).powi(2)).ceil() as usize,
    }
}

/// Greedy maximal ε-separated subset of a deterministic mesh on S^{n−1}.
///
/// The covering property "every ξ has a centre v with ε/2 ≤ |v−ξ| < 5ε/2"
/// is checked on an independent test mesh.
pub fn separated_set(n: usize, eps: f64, mesh_density: f64) -> Result<Vec<Vec<f64>>> {
    if !(eps > 0.0 && eps <= 2.0) {
        return Err(Error::BadParameters(format!("eps must lie in (0, 2], got {eps}")));
    }
    if !(mesh_density > 0.0) {
        return Err(Error::BadParameters("mesh density must be positive".into()));
    }
    let mesh = sphere_mesh(n, mesh_size(n, eps, mesh_density))?;
    let mut centers: Vec<Vec<f64>> = Vec::new();
    for p in mesh {
        // relative slack so exact lattice distances (ε = 1 on S¹) count as separated
        if centers.iter().all(|c| dist(c, &p) >= eps * (1.0 - 1e-12)) {
            centers.push(p);
        }
    }
    let test = test_mesh(n, eps)?;
    for p in &test {
        let ok = centers.iter().any(|c| {
            let d = dist(c, p);
            d >= 0.5 * eps && d < 2.5 * eps
        });
        if !ok {
            return Err(Error::MeshTooCoarse(eps));
        }
    }
    Ok(centers)
}

fn test_mesh(n: usize, eps: f64) -> Result<Vec<Vec<f64>>> {
    match n {
        2 => {
            let m = (2.0 * PI * 16.0 / eps).ceil() as usize;
            Ok((0..m)
                .map(|k| {
                    let th = (k as f64 + 0.5) * 2.0 * PI / m as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect())
        }
        _ => {
            // rotated Fibonacci sphere, so test points do not coincide with mesh points
            let pts = sphere_mesh(n, (4.0 * PI * (4.0 / eps).powi(2)).ceil() as usize)?;
            Ok(pts.into_iter().map(|p| vec![p[1], p[2], p[0]]).collect())
        }
    }
}

/// Homogeneous partition of unity Σ_v χ_{ε,v} = 1 on ℝⁿ∖{0}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphericalPartition {
    pub n: usize,
    pub eps: f64,
    pub centers: Vec<Vec<f64>>,
    /// (inner support, inner plateau, outer plateau, outer support) of φ
    pub phi_radii: [f64; 4],
    /// |centers|·ε^{n−1}
    pub count_constant: f64,
    /// centre angles (n = 2 only), sorted, for fast lookup
    #[serde(skip)]
    angles: Vec<(f64, usize)>,
}

pub fn spherical_partition(n: usize, eps: f64) -> Result<SphericalPartition> {
    let centers = separated_set(n, eps, MESH_DENSITY)?;
    let count_constant = centers.len() as f64 * eps.powi(n as i32 - 1);
    let mut angles: Vec<(f64, usize)> = if n == 2 {
        centers.iter().enumerate().map(|(i, c)| (c[1].atan2(c[0]), i)).collect()
    } else {
        Vec::new()
    };
    angles.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(SphericalPartition { n, eps, centers, phi_radii: [0.25, 0.5, 2.5, 4.0], count_constant, angles })
}

impl SphericalPartition {
    /// χ̃_{ε,v}(ξ) = φ(ε⁻¹(ξ/|ξ| − v)).
    pub fn raw(&self, i: usize, unit: &[f64]) -> f64 {
        phi_radial(dist(unit, &self.centers[i]) / self.eps)
    }

    /// Indices of centres whose χ̃ can be non-zero at the unit vector `unit`.
    fn candidates(&self, unit: &[f64], out: &mut Vec<usize>) {
        out.clear();
        // chord 4ε ↔ angle 2·asin(2ε)
        if self.n == 2 && 2.0 * self.eps < 1.0 && !self.angles.is_empty() {
            let reach = 2.0 * (2.0 * self.eps).asin() + 1e-12;
            let th = unit[1].atan2(unit[0]);
            for shift in [-2.0 * PI, 0.0, 2.0 * PI] {
                let lo = th - reach + shift;
                let hi = th + reach + shift;
                let start = self.angles.partition_point(|a| a.0 < lo);
                for a in &self.angles[start..] {
                    if a.0 > hi {
                        break;
                    }
                    out.push(a.1);
                }
            }
            out.sort_unstable();
            out.dedup();
        } else {
            out.extend(0..self.centers.len());
        }
    }

    /// χ_{ε,v_i}(ξ); zero at ξ = 0.
    pub fn eval(&self, i: usize, xi: &[f64]) -> f64 {
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let unit: Vec<f64> = xi.iter().map(|v| v / norm).collect();
        let own = self.raw(i, &unit);
        if own == 0.0 {
            return 0.0;
        }
        let mut cand = Vec::new();
        self.candidates(&unit, &mut cand);
        let total: f64 = cand.iter().map(|&j| self.raw(j, &unit)).sum();
        own / total
    }

    /// Σ_v χ_{ε,v}(ξ)².
    pub fn sum_sq(&self, xi: &[f64]) -> f64 {
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let unit: Vec<f64> = xi.iter().map(|v| v / norm).collect();
        let mut cand = Vec::new();
        self.candidates(&unit, &mut cand);
        let raw: Vec<f64> = cand.iter().map(|&j| self.raw(j, &unit)).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|r| (r / total).powi(2)).sum()
    }

    /// All χ_{ε,v}(ξ) at once.
    pub fn eval_all(&self, xi: &[f64]) -> Vec<f64> {
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut out = vec![0.0; self.centers.len()];
        if norm == 0.0 {
            return out;
        }
        let unit: Vec<f64> = xi.iter().map(|v| v / norm).collect();
        let mut total = 0.0;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.raw(i, &unit);
            total += *o;
        }
        for o in &mut out {
            *o /= total;
        }
        out
    }
}

/// Quadratic form η ↦ pf J_η for a group with d1 = 4.
#[derive(Debug, Clone)]
pub struct PfaffianQuadratic {
    pub form: DMatrix<f64>,
}

impl PfaffianQuadratic {
    pub fn new(g: &StratifiedGroup) -> Result<Self> {
        if g.d1 != 4 || g.d2 != 3 {
            return Err(Error::DimensionMismatch(format!(
                "cone cutoffs need d1 = 4, d2 = 3, got ({}, {})",
                g.d1, g.d2
            )));
        }
        Ok(PfaffianQuadratic { form: pfaffian_form(g)? })
    }

    pub fn pf(&self, eta: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += self.form[(i, j)] * eta[i] * eta[j];
            }
        }
        acc
    }

    /// |pf J_η|/|η|² = b₁b₂/|η|².
    pub fn ratio(&self, eta: &[f64]) -> f64 {
        let n2: f64 = eta.iter().map(|v| v * v).sum();
        if n2 == 0.0 {
            0.0
        } else {
            self.pf(eta).abs() / n2
        }
    }
}

/// Largest dyadic 2^{−m} ≤ 1/4 such that every sampled unit η with
/// b₁b₂ < 2^{−m} has b₂ < b₁/2.
pub fn compute_chat(g: &StratifiedGroup, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let eta = random_unit(&mut rng, g.d2);
        // near-degenerate points carry no information about the inclusion
        let Ok(sd) = decompose(g, &eta, CLUSTER_TOL) else { continue };
        let (b1, b2) = match sd.b.len() {
            2 => (sd.b[0], sd.b[1]),
            // one cluster: either b₂ = 0 (on the cone) or b₁ = b₂
            _ if sd.r0 > 0 => (sd.b[0], 0.0),
            _ => (sd.b[0], sd.b[0]),
        };
        if b2 >= 0.5 * b1 {
            worst = worst.min(b1 * b2);
        }
    }
    let mut c = 0.25;
    while c >= worst {
        c *= 0.5;
        if c < 1e-12 {
            return Err(Error::BadParameters("no admissible constant found".into()));
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    OmegaC,
    OmegaP,
    Both,
    Neither,
}

pub fn region_membership(g: &StratifiedGroup, eta: &[f64]) -> Result<Region> {
    let pq = PfaffianQuadratic::new(g)?;
    region_membership_with(&pq, CHAT, eta)
}

pub fn region_membership_with(pq: &PfaffianQuadratic, chat: f64, eta: &[f64]) -> Result<Region> {
    if eta.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroEta);
    }
    let t = pq.ratio(eta);
    Ok(match (t < chat, t > chat / 2.0) {
        (true, true) => Region::Both,
        (true, false) => Region::OmegaC,
        (false, true) => Region::OmegaP,
        (false, false) => Region::Neither,
    })
}

/// Orthonormal frame (v,s)/√2, (v⊥,0), (v,−s)/√2 adapted to the cone sector q = (v, s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorFrame {
    pub v: [f64; 2],
    pub s: i8,
    pub basis: Matrix3<f64>,
}

pub fn sector_frame(v: [f64; 2], s: i8) -> Result<SectorFrame> {
    if ((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs() > 1e-12 {
        return Err(Error::NotUnit);
    }
    if s != 1 && s != -1 {
        return Err(Error::BadParameters(format!("sector sign must be ±1, got {s}")));
    }
    let sf = s as f64;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    #[rustfmt::skip]
    let basis = Matrix3::new(
        v[0] * r, v[1] * r, sf * r,
        -v[1], v[0], 0.0,
        v[0] * r, v[1] * r, -sf * r,
    );
    Ok(SectorFrame { v, s, basis })
}

impl SectorFrame {
    /// η^q.
    pub fn coords(&self, eta: &[f64]) -> [f64; 3] {
        let e = self.basis * Vector3::new(eta[0], eta[1], eta[2]);
        [e[0], e[1], e[2]]
    }

    /// u^q (the frame is orthogonal, so the same map applies on the centre).
    pub fn u_coords(&self, u: &[f64]) -> [f64; 3] {
        self.coords(u)
    }
}

/// ζ_c: equal to 1 where b₁b₂ ≤ ĉ|η|²/2 and supported in Ω_c.
pub fn zeta_c_value(t: f64, chat: f64) -> f64 {
    1.0 - smooth_step((t - 0.5 * chat) / (0.5 * chat))
}

fn norm3(eta: &[f64]) -> f64 {
    (eta[0] * eta[0] + eta[1] * eta[1] + eta[2] * eta[2]).sqrt()
}

/// The pieces ζ_c, ζ_p = 1 − ζ_c and ζ_± = ζ_c·1_{±η₃>0}(smoothly).
#[derive(Debug, Clone)]
pub struct RegionCutoff {
    pq: Arc<PfaffianQuadratic>,
    pub chat: f64,
    pub which: RegionPiece,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionPiece {
    C,
    P,
    Plus,
    Minus,
}

impl RegionCutoff {
    pub fn new(g: &StratifiedGroup, which: RegionPiece) -> Result<Self> {
        Ok(RegionCutoff { pq: Arc::new(PfaffianQuadratic::new(g)?), chat: CHAT, which })
    }
}

fn sign_factor(eta: &[f64], s: f64) -> f64 {
    let n = norm3(eta);
    if n == 0.0 {
        return 0.0;
    }
    smooth_step(s * eta[2] / n / SIGN_SPLIT_TAU)
}

impl EtaCutoff for RegionCutoff {
    fn eval(&self, eta: &[f64]) -> f64 {
        if eta.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        let zc = zeta_c_value(self.pq.ratio(eta), self.chat);
        match self.which {
            RegionPiece::C => zc,
            RegionPiece::P => 1.0 - zc,
            RegionPiece::Plus => zc * sign_factor(eta, 1.0),
            RegionPiece::Minus => zc * sign_factor(eta, -1.0),
        }
    }
}

/// χ(|η|/ρ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialShell {
    pub rho: f64,
}

impl EtaCutoff for RadialShell {
    fn eval(&self, eta: &[f64]) -> f64 {
        let n = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        dyadic_chi(n / self.rho)
    }
}

/// 1 − Σ pieces.
#[derive(Debug, Clone)]
pub struct Complement {
    pub pieces: Vec<Arc<dyn EtaCutoff>>,
}

impl EtaCutoff for Complement {
    fn eval(&self, eta: &[f64]) -> f64 {
        1.0 - self.pieces.iter().map(|p| p.eval(eta)).sum::<f64>()
    }
}

/// Sector label q = (centre index in the ε-partition of S¹, sign).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorIndex {
    pub center: usize,
    pub sign: i8,
}

/// ζ_{c,ρ,δ,q}(η) = ζ_±(η)·χ(b₁b₂/(|η|²δ))·χ_{ε,v}(η₁,η₂)·χ(|η|/ρ), ε = ŝδ^{1/2}.
#[derive(Debug, Clone)]
pub struct ConeSector {
    pq: Arc<PfaffianQuadratic>,
    pub partition: Arc<SphericalPartition>,
    pub q: SectorIndex,
    pub frame: SectorFrame,
    pub rho: f64,
    pub delta: f64,
    pub chat: f64,
}

/// ζ_±(η)·χ(b₁b₂/(|η|²δ))·χ(|η|/ρ): everything in a cone piece except the angular factor.
fn cone_shell(pq: &PfaffianQuadratic, chat: f64, sign: i8, rho: f64, delta: f64, eta: &[f64]) -> f64 {
    let n = norm3(eta);
    if n == 0.0 {
        return 0.0;
    }
    let radial = dyadic_chi(n / rho);
    if radial == 0.0 {
        return 0.0;
    }
    let t = pq.ratio(eta);
    let pfc = dyadic_chi(t / delta);
    if pfc == 0.0 {
        return 0.0;
    }
    zeta_c_value(t, chat) * sign_factor(eta, sign as f64) * pfc * radial
}

impl EtaCutoff for ConeSector {
    fn eval(&self, eta: &[f64]) -> f64 {
        let c = cone_shell(&self.pq, self.chat, self.q.sign, self.rho, self.delta, eta);
        if c == 0.0 {
            return 0.0;
        }
        c * self.partition.eval(self.q.center, &eta[..2])
    }
}

/// (mean over the sectors q of one sign of ζ_{c,ρ,δ,q}²)^{1/2}. As a joint
/// cutoff it turns any quantity quadratic in ζ into its average over sectors.
#[derive(Debug, Clone)]
pub struct ConeSectorRms {
    pq: Arc<PfaffianQuadratic>,
    pub partition: Arc<SphericalPartition>,
    pub sign: i8,
    pub rho: f64,
    pub delta: f64,
    pub chat: f64,
}

impl EtaCutoff for ConeSectorRms {
    fn eval(&self, eta: &[f64]) -> f64 {
        let c = cone_shell(&self.pq, self.chat, self.sign, self.rho, self.delta, eta);
        if c == 0.0 {
            return 0.0;
        }
        c * (self.partition.sum_sq(&eta[..2]) / self.partition.centers.len() as f64).sqrt()
    }
}

impl ConeSector {
    pub fn rms_family(&self) -> ConeSectorRms {
        ConeSectorRms {
            pq: self.pq.clone(),
            partition: self.partition.clone(),
            sign: self.q.sign,
            rho: self.rho,
            delta: self.delta,
            chat: self.chat,
        }
    }
}

/// Extreme ratios |η₁^q|/ρ, |η₂^q|/(ρδ^{1/2}), |η₃^q|/(ρδ) over a set of support points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub samples: usize,
}

impl SupportBox {
    /// Smallest κ with all ratios in [κ⁻¹, κ].
    pub fn kappa(&self) -> f64 {
        let mut k: f64 = 1.0;
        for i in 0..3 {
            k = k.max(self.max[i]).max(1.0 / self.min[i]);
        }
        k
    }

    pub fn merge(&self, other: &SupportBox) -> SupportBox {
        let mut out = *self;
        for i in 0..3 {
            out.min[i] = out.min[i].min(other.min[i]);
            out.max[i] = out.max[i].max(other.max[i]);
        }
        out.samples += other.samples;
        out
    }
}

impl ConeSector {
    pub fn ratios(&self, eta: &[f64]) -> [f64; 3] {
        let c = self.frame.coords(eta);
        [
            c[0].abs() / self.rho,
            c[1].abs() / (self.rho * self.delta.sqrt()),
            c[2].abs() / (self.rho * self.delta),
        ]
    }

    /// Draw points with ζ > 0 by parametrising the declared support:
    /// |η| ∈ (ρ/2, 2ρ), b₁b₂/|η|² ∈ (δ/2, 2δ) with either sign of pf, the
    /// angle of (η₁,η₂) within chord 4ε of v, and sign η₃ = s.
    pub fn sample_support(&self, count: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = self.partition.eps;
        let reach = 2.0 * (2.0 * eps).min(1.0).asin();
        let v = self.frame.v;
        let th0 = v[1].atan2(v[0]);
        let mut out = Vec::with_capacity(count);
        let mut tries = 0usize;
        while out.len() < count && tries < 10_000 * count.max(1) {
            tries += 1;
            let r = self.rho * rng.random_range(0.5..2.0);
            let t = (self.delta * rng.random_range(0.5..2.0)).min(self.chat);
            let sigma = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let psi = rng.random_range(-reach..reach);
            let horiz2 = r * r * (1.0 + sigma * t) / 2.0;
            let vert2 = r * r * (1.0 - sigma * t) / 2.0;
            if horiz2 < 0.0 || vert2 < 0.0 {
                continue;
            }
            let h = horiz2.sqrt();
            let eta = [h * (th0 + psi).cos(), h * (th0 + psi).sin(), self.q.sign as f64 * vert2.sqrt()];
            if self.eval(&eta) > 0.0 {
                out.push(eta);
            }
        }
        out
    }

    pub fn support_box(&self, count: usize, seed: u64) -> SupportBox {
        let pts = self.sample_support(count, seed);
        let mut b = SupportBox { min: [f64::INFINITY; 3], max: [0.0; 3], samples: pts.len() };
        for p in &pts {
            let r = self.ratios(p);
            for i in 0..3 {
                b.min[i] = b.min[i].min(r[i]);
                b.max[i] = b.max[i].max(r[i]);
            }
        }
        b
    }
}

/// All sectors q ∈ Y_δ at a fixed (ρ, δ), sharing one ε-partition of S¹.
pub fn cone_sectors(g: &StratifiedGroup, rho: f64, delta: f64) -> Result<Vec<ConeSector>> {
    cone_sectors_with(g, rho, delta, S_HAT)
}

pub fn cone_sectors_with(g: &StratifiedGroup, rho: f64, delta: f64, s_hat: f64) -> Result<Vec<ConeSector>> {
    if !(rho > 0.0 && rho.is_finite()) || !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::BadParameters(format!("need ρ > 0 and δ ∈ (0,1], got ({rho}, {delta})")));
    }
    let pq = Arc::new(PfaffianQuadratic::new(g)?);
    let partition = Arc::new(spherical_partition(2, s_hat * delta.sqrt())?);
    let mut out = Vec::new();
    for sign in [1i8, -1] {
        for (center, c) in partition.centers.iter().enumerate() {
            let frame = sector_frame([c[0], c[1]], sign)?;
            out.push(ConeSector {
                pq: pq.clone(),
                partition: partition.clone(),
                q: SectorIndex { center, sign },
                frame,
                rho,
                delta,
                chat: CHAT,
            });
        }
    }
    Ok(out)
}

/// A single ζ_{c,ρ,δ,q}.
pub fn cone_sector_cutoff(g: &StratifiedGroup, rho: f64, delta: f64, q: SectorIndex) -> Result<ConeSector> {
    let all = cone_sectors(g, rho, delta)?;
    all.into_iter()
        .find(|c| c.q == q)
        .ok_or_else(|| Error::BadParameters(format!("no sector {q:?} at δ = {delta}")))
}

/// ζ_{p,ρ,δ}(η) = ζ_p(η)·χ(|η|/ρ)·Π_ℓ χ(|η_ℓ|/(ρδ_ℓ)) in the Ω_p coordinates,
/// which for the built-in (37D) group are the standard ones.
#[derive(Debug, Clone)]
pub struct PPiece {
    pq: Arc<PfaffianQuadratic>,
    pub rho: f64,
    pub deltas: [f64; 3],
    pub chat: f64,
}

pub fn p_piece(g: &StratifiedGroup, rho: f64, deltas: [f64; 3]) -> Result<PPiece> {
    if !(rho > 0.0) || deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
        return Err(Error::BadParameters("need ρ > 0 and every δ_ℓ ∈ (0,1]".into()));
    }
    Ok(PPiece { pq: Arc::new(PfaffianQuadratic::new(g)?), rho, deltas, chat: CHAT })
}

impl EtaCutoff for PPiece {
    fn eval(&self, eta: &[f64]) -> f64 {
        let n = norm3(eta);
        if n == 0.0 {
            return 0.0;
        }
        let mut v = dyadic_chi(n / self.rho);
        for l in 0..3 {
            if v == 0.0 {
                return 0.0;
            }
            v *= dyadic_chi(eta[l].abs() / (self.rho * self.deltas[l]));
        }
        if v == 0.0 {
            return 0.0;
        }
        v * (1.0 - zeta_c_value(self.pq.ratio(eta), self.chat))
    }
}

/// w(x) = (|x|² − ((x₁²−x₂²+x₃²−x₄²)² + (2x₁x₂+2x₃x₄)²)^{1/2})^{1/2}.
pub fn weight_w(x: &[f64]) -> f64 {
    let n2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
    let a = x[0] * x[0] - x[1] * x[1] + x[2] * x[2] - x[3] * x[3];
    let b = 2.0 * x[0] * x[1] + 2.0 * x[2] * x[3];
    (n2 - (a * a + b * b).sqrt()).max(0.0).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionDump {
    pub n: usize,
    pub eps: f64,
    pub centers: Vec<Vec<f64>>,
    pub phi_radii: [f64; 4],
    pub count_constant: f64,
    pub chat: f64,
    pub s_hat: f64,
    pub sign_split_tau: f64,
    pub sectors: Vec<SectorDump>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorDump {
    pub q: SectorIndex,
    pub v: [f64; 2],
    pub frame_rows: [[f64; 3]; 3],
}

impl PartitionDump {
    pub fn new(p: &SphericalPartition) -> Self {
        let mut sectors = Vec::new();
        if p.n == 2 {
            for sign in [1i8, -1] {
                for (center, c) in p.centers.iter().enumerate() {
                    if let Ok(f) = sector_frame([c[0], c[1]], sign) {
                        let row = |i: usize| [f.basis[(i, 0)], f.basis[(i, 1)], f.basis[(i, 2)]];
                        sectors.push(SectorDump { q: SectorIndex { center, sign }, v: f.v, frame_rows: [row(0), row(1), row(2)] });
                    }
                }
            }
        }
        PartitionDump {
            n: p.n,
            eps: p.eps,
            centers: p.centers.clone(),
            phi_radii: p.phi_radii,
            count_constant: p.count_constant,
            chat: CHAT,
            s_hat: S_HAT,
            sign_split_tau: SIGN_SPLIT_TAU,
            sectors,
        }
    }
}

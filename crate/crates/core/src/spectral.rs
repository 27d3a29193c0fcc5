//! Spectral data of −J_η² and the so(4) closed forms.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::group::{StratifiedGroup, SKEW_TOL};

/// Default relative clustering tolerance (times the largest eigenvalue of −J²).
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub done: usize,
    /// distinct positive square roots of the eigenvalues of −J², strictly decreasing
    pub b: Vec<f64>,
    /// half-multiplicities
    pub r: Vec<usize>,
    pub r0: usize,
    pub p: Vec<DMatrix<f64>>,
    pub p0: DMatrix<f64>,
    /// orthonormal columns spanning the range of each `p[j]`
    pub basis: Vec<DMatrix<f64>>,
    pub basis0: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Profile {
    pub done: usize,
    pub r0: usize,
    pub r: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericProfile {
    pub done: usize,
    pub r0: usize,
    pub r: Vec<usize>,
    pub witness: Vec<f64>,
}

impl GenericProfile {
    pub fn profile(&self) -> Profile {
        Profile { done: self.done, r0: self.r0, r: self.r.clone() }
    }
}

/// JSON view used by the `spectrum` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub eta: Vec<f64>,
    pub done: usize,
    pub b: Vec<f64>,
    pub r: Vec<usize>,
    pub r0: usize,
    pub p: Vec<Vec<Vec<f64>>>,
    pub p0: Vec<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

impl SpectralData {
    pub fn profile(&self) -> Profile {
        Profile { done: self.done, r0: self.r0, r: self.r.clone() }
    }

    /// |r| = r_1 + … + r_done.
    pub fn r_total(&self) -> usize {
        self.r.iter().sum()
    }

    pub fn report(&self, eta: &[f64]) -> SpectralReport {
        SpectralReport {
            eta: eta.to_vec(),
            done: self.done,
            b: self.b.clone(),
            r: self.r.clone(),
            r0: self.r0,
            p: self.p.iter().map(rows).collect(),
            p0: rows(&self.p0),
        }
    }

    /// Σ b_j² P_j, which should reproduce −J².
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.p0.nrows();
        let mut m = DMatrix::zeros(n, n);
        for (bj, pj) in self.b.iter().zip(&self.p) {
            m += pj * (bj * bj);
        }
        m
    }
}

fn projector(cols: &DMatrix<f64>) -> DMatrix<f64> {
    let p = cols * cols.transpose();
    (&p + p.transpose()) * 0.5
}

/// Decompose −J² for a skew J. `tol` is relative to the largest eigenvalue.
pub fn decompose_skew(j: &DMatrix<f64>, tol: f64) -> Result<SpectralData> {
    let n = j.nrows();
    let jsq = -(j * j);
    let jsq = (&jsq + jsq.transpose()) * 0.5;
    let eig = SymmetricEigen::new(jsq);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let top = vals[0];
    if !(top > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let abs_tol = tol * top;
    // clusters of consecutive (descending) eigenvalues
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut zero: Vec<usize> = Vec::new();
    for (pos, &v) in vals.iter().enumerate() {
        if v < abs_tol {
            if v >= abs_tol / 10.0 {
                return Err(Error::ClusterAmbiguous { gap: v, tol: abs_tol });
            }
            zero.push(pos);
            continue;
        }
        match clusters.last_mut() {
            Some(last) => {
                let prev = vals[*last.last().unwrap()];
                let gap = prev - v;
                if gap < abs_tol / 10.0 {
                    last.push(pos);
                } else if gap <= abs_tol {
                    return Err(Error::ClusterAmbiguous { gap, tol: abs_tol });
                } else {
                    clusters.push(vec![pos]);
                }
            }
            None => clusters.push(vec![pos]),
        }
    }
    let mut b = Vec::new();
    let mut r = Vec::new();
    let mut p = Vec::new();
    let mut basis = Vec::new();
    for cl in &clusters {
        if cl.len() % 2 == 1 {
            // eigenvalues of −J² come in pairs; an odd cluster means we split a pair
            return Err(Error::ClusterAmbiguous { gap: 0.0, tol: abs_tol });
        }
        let mean = cl.iter().map(|&i| vals[i]).sum::<f64>() / cl.len() as f64;
        let cols = DMatrix::from_fn(n, cl.len(), |row, c| eig.eigenvectors[(row, order[cl[c]])]);
        b.push(mean.sqrt());
        r.push(cl.len() / 2);
        p.push(projector(&cols));
        basis.push(cols);
    }
    let basis0 = DMatrix::from_fn(n, zero.len(), |row, c| eig.eigenvectors[(row, order[zero[c]])]);
    Ok(SpectralData {
        done: b.len(),
        b,
        r,
        r0: zero.len(),
        p,
        p0: projector(&basis0),
        basis,
        basis0,
    })
}

/// −J_η² = Σ_j (b_j)² P_j with b strictly decreasing.
pub fn decompose(g: &StratifiedGroup, eta: &[f64], tol: f64) -> Result<SpectralData> {
    if eta.len() != g.d2 {
        return Err(Error::DimensionMismatch(format!("eta must have {} entries", g.d2)));
    }
    if eta.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroEta);
    }
    decompose_skew(&g.j_matrix(eta), tol)
}

pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// Multiplicity profile attained on a dense open set of η, found by sampling.
pub fn generic_profile(g: &StratifiedGroup, nsamples: usize, seed: u64) -> Result<GenericProfile> {
    if nsamples < 8 {
        return Err(Error::BadParameters("generic_profile needs at least 8 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<Profile, (usize, Vec<f64>)> = BTreeMap::new();
    for _ in 0..nsamples {
        let eta = random_unit(&mut rng, g.d2);
        if let Ok(sd) = decompose(g, &eta, CLUSTER_TOL) {
            counts.entry(sd.profile()).or_insert((0, eta)).0 += 1;
        }
    }
    counts
        .into_iter()
        .filter(|(_, (n, _))| *n >= 2)
        .max_by(|(a, _), (b, _)| a.done.cmp(&b.done).then(b.r0.cmp(&a.r0)))
        .map(|(p, (_, witness))| GenericProfile { done: p.done, r0: p.r0, r: p.r, witness })
        .ok_or(Error::InconsistentProfiles(nsamples))
}

/// P_j = F_j(Jsq) with F_j(λ) = λ Π_{j'≠j}(λ − b_{j'}²) / (b_j² Π_{j'≠j}(b_j² − b_{j'}²)).
pub fn projections_interpolation(b: &[f64], jsq: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    for w in b.windows(2) {
        if !(w[0] - w[1] > 1e-8 * w[0]) {
            return Err(Error::RepeatedEigenvalue);
        }
    }
    if b.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::RepeatedEigenvalue);
    }
    let n = jsq.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut out = Vec::with_capacity(b.len());
    for (j, &bj) in b.iter().enumerate() {
        let mut num = jsq.clone();
        let mut den = bj * bj;
        for (k, &bk) in b.iter().enumerate() {
            if k != j {
                num = num * (jsq - &id * (bk * bk));
                den *= bj * bj - bk * bk;
            }
        }
        let pj = num / den;
        out.push((&pj + pj.transpose()) * 0.5);
    }
    Ok(out)
}

/// Hodge star on 2-forms of R⁴ (ε₁₂₃₄ = +1), acting on skew matrices.
pub fn hodge_star(mu: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(4, 4);
    let mut set = |i: usize, j: usize, v: f64| {
        s[(i, j)] = v;
        s[(j, i)] = -v;
    };
    set(0, 1, mu[(2, 3)]);
    set(2, 3, mu[(0, 1)]);
    set(0, 2, -mu[(1, 3)]);
    set(1, 3, -mu[(0, 2)]);
    set(0, 3, mu[(1, 2)]);
    set(1, 2, mu[(0, 3)]);
    s
}

/// |μ|² = −tr(μμ)/4, so that |I₁ + I₂| = 1.
pub fn so4_norm(mu: &DMatrix<f64>) -> f64 {
    (-(mu * mu).trace() / 4.0).max(0.0).sqrt()
}

/// Split μ ∈ so(4) into anti-self-dual and self-dual parts: returns (μ⁻, μ⁺).
/// Swapping the orientation of R⁴ swaps the two.
pub fn so4_split(mu: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if mu.nrows() != 4 || mu.ncols() != 4 {
        return Err(Error::DimensionMismatch("so4_split needs a 4×4 matrix".into()));
    }
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in i..4 {
            worst = worst.max((mu[(i, j)] + mu[(j, i)]).abs());
        }
    }
    if worst > SKEW_TOL {
        return Err(Error::NotSkew(worst));
    }
    let star = hodge_star(mu);
    Ok(((mu - &star) * 0.5, (mu + &star) * 0.5))
}

/// Closed-form spectral data of a nonzero μ ∈ so(4) via the su₂ ⊕ s̃u₂ split.
pub fn four_dim_closed_form(mu: &DMatrix<f64>) -> Result<SpectralData> {
    let (minus, plus) = so4_split(mu)?;
    let total = so4_norm(mu);
    if total == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let (np, nm) = (so4_norm(&plus), so4_norm(&minus));
    let id = DMatrix::<f64>::identity(4, 4);
    let eps = 1e-12 * total;
    if np <= eps || nm <= eps {
        return Ok(SpectralData {
            done: 1,
            b: vec![total],
            r: vec![2],
            r0: 0,
            p: vec![id.clone()],
            p0: DMatrix::zeros(4, 4),
            basis: vec![id],
            basis0: DMatrix::zeros(4, 0),
        });
    }
    let x = (&plus / np) * (&minus / nm);
    let x = (&x + x.transpose()) * 0.5;
    let p1 = (&id - &x) * 0.5;
    let p2 = (&id + &x) * 0.5;
    let b1 = np + nm;
    let b2 = (np - nm).abs();
    let basis = |p: &DMatrix<f64>| range_basis(p, 2);
    if b2 <= 1e-12 * b1 {
        return Ok(SpectralData {
            done: 1,
            b: vec![b1],
            r: vec![1],
            r0: 2,
            basis: vec![basis(&p1)],
            basis0: basis(&p2),
            p: vec![p1],
            p0: p2,
        });
    }
    Ok(SpectralData {
        done: 2,
        b: vec![b1, b2],
        r: vec![1, 1],
        r0: 0,
        basis: vec![basis(&p1), basis(&p2)],
        basis0: DMatrix::zeros(4, 0),
        p: vec![p1, p2],
        p0: DMatrix::zeros(4, 4),
    })
}

fn range_basis(p: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(p.clone());
    let mut order: Vec<usize> = (0..p.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    DMatrix::from_fn(p.nrows(), rank, |i, c| eig.eigenvectors[(i, order[c])])
}

/// pf μ = |μ⁺|² − |μ⁻|²; exposed for cross-checking.
pub fn pfaffian_via_split(mu: &DMatrix<f64>) -> Result<f64> {
    let (minus, plus) = so4_split(mu)?;
    Ok(so4_norm(&plus).powi(2) - so4_norm(&minus).powi(2))
}

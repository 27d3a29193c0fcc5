//! 2-step stratified groups given by structure constants.
//!
//! Coordinates: `x ∈ R^{d1}` on the first layer in an orthonormal basis
//! `X_1..X_{d1}`, `u ∈ R^{d2}` on the centre in the basis `U_1..U_{d2}`.
//! `c[k][(i, j)]` is the `U_k`-coordinate of `[X_i, X_j]` (0-based here;
//! group files use 1-based indices).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Absolute max-norm tolerance for antisymmetry / skewness of exact input data.
pub const SKEW_TOL: f64 = 1e-12;
/// Relative eigenvalue threshold below which a Pfaffian-form eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-9;
/// Eigenvalues in `[RANK_TOL, RANK_GUARD)·max|eig|` are refused as ambiguous.
pub const RANK_GUARD: f64 = 1e-7;

pub const BUILTIN_NAMES: [&str; 5] = ["H1", "H2", "N32", "G37D", "HTYPE3"];

#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedGroup {
    pub d1: usize,
    pub d2: usize,
    /// `c[k]` is the d1×d1 antisymmetric matrix of `U_k`-coordinates of brackets.
    pub c: Vec<DMatrix<f64>>,
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl GroupPoint {
    pub fn new(x: Vec<f64>, u: Vec<f64>) -> Self {
        GroupPoint { x, u }
    }

    pub fn inverse(&self) -> GroupPoint {
        GroupPoint {
            x: self.x.iter().map(|v| -v).collect(),
            u: self.u.iter().map(|v| -v).collect(),
        }
    }

    /// δ_r(x, u) = (r x, r² u).
    pub fn dilate(&self, r: f64) -> GroupPoint {
        GroupPoint {
            x: self.x.iter().map(|v| r * v).collect(),
            u: self.u.iter().map(|v| r * r * v).collect(),
        }
    }
}

/// On-disk group description; indices are 1-based and only `i < j` is listed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupFile {
    pub d1: usize,
    pub d2: usize,
    pub brackets: Vec<Bracket>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bracket {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub v: f64,
}

/// Check the hypotheses and wrap the tensor. Never repairs input.
pub fn validate_structure(d1: usize, d2: usize, c: Vec<DMatrix<f64>>) -> Result<StratifiedGroup> {
    if d1 < 2 || d2 < 1 {
        return Err(Error::Shape(format!("need d1 >= 2 and d2 >= 1, got d1={d1}, d2={d2}")));
    }
    if c.len() != d2 || c.iter().any(|m| m.nrows() != d1 || m.ncols() != d1) {
        return Err(Error::Shape(format!("structure tensor must be {d2}x{d1}x{d1}")));
    }
    for (k, m) in c.iter().enumerate() {
        for i in 0..d1 {
            for j in i..d1 {
                let residual = (m[(i, j)] + m[(j, i)]).abs();
                if residual > SKEW_TOL || !m[(i, j)].is_finite() {
                    return Err(Error::NotAntisymmetric { k, i, j, residual });
                }
            }
        }
    }
    let pairs: Vec<(usize, usize)> =
        (0..d1).flat_map(|i| ((i + 1)..d1).map(move |j| (i, j))).collect();
    let b = DMatrix::from_fn(d2, pairs.len(), |k, p| c[k][pairs[p]]);
    let rank = numerical_rank(&b);
    if rank < d2 {
        return Err(Error::NotStratified { rank, d2 });
    }
    Ok(StratifiedGroup { d1, d2, c, name: None })
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * smax).count()
}

/// Build a group from the matrices `A_k` with `J_η = Σ η_k A_k`.
fn from_j_coefficients(name: &str, a: &[[[f64; 4]; 4]]) -> StratifiedGroup {
    let c: Vec<DMatrix<f64>> = a
        .iter()
        .map(|ak| DMatrix::from_fn(4, 4, |i, j| ak[j][i]))
        .collect();
    let mut g = validate_structure(4, a.len(), c).expect("builtin is valid");
    g.name = Some(name.to_string());
    g
}

pub fn builtin_group(name: &str) -> Result<StratifiedGroup> {
    let mut g = match name {
        "H1" => {
            let mut c = DMatrix::zeros(2, 2);
            c[(0, 1)] = 1.0;
            c[(1, 0)] = -1.0;
            validate_structure(2, 1, vec![c])?
        }
        "H2" => {
            let mut c = DMatrix::zeros(4, 4);
            c[(0, 1)] = 1.0;
            c[(1, 0)] = -1.0;
            c[(2, 3)] = 1.0;
            c[(3, 2)] = -1.0;
            validate_structure(4, 1, vec![c])?
        }
        "N32" => {
            // free 2-step nilpotent on three generators: [X_i, X_j] = ε_{ijk} U_k
            let c = (0..3)
                .map(|k| DMatrix::from_fn(3, 3, |i, j| levi_civita(i, j, k)))
                .collect();
            validate_structure(3, 3, c)?
        }
        "G37D" => {
            // J_η = [[0,0,-η1-η3,-η2],[0,0,-η2,η1-η3],[η1+η3,η2,0,0],[η2,-η1+η3,0,0]]
            let a1 = [[0., 0., -1., 0.], [0., 0., 0., 1.], [1., 0., 0., 0.], [0., -1., 0., 0.]];
            let a2 = [[0., 0., 0., -1.], [0., 0., -1., 0.], [0., 1., 0., 0.], [1., 0., 0., 0.]];
            let a3 = [[0., 0., -1., 0.], [0., 0., 0., -1.], [1., 0., 0., 0.], [0., 1., 0., 0.]];
            return Ok(from_j_coefficients("G37D", &[a1, a2, a3]));
        }
        "HTYPE3" => return Ok(from_j_coefficients("HTYPE3", &quaternion_units())),
        other => return Err(Error::UnknownName(other.to_string())),
    };
    g.name = Some(name.to_string());
    Ok(g)
}

/// Left multiplication by i, j, k on H = R^4 in the basis (1, i, j, k).
pub(crate) fn quaternion_units() -> [[[f64; 4]; 4]; 3] {
    [
        [[0., -1., 0., 0.], [1., 0., 0., 0.], [0., 0., 0., -1.], [0., 0., 1., 0.]],
        [[0., 0., -1., 0.], [0., 0., 0., 1.], [1., 0., 0., 0.], [0., -1., 0., 0.]],
        [[0., 0., 0., -1.], [0., 0., -1., 0.], [0., 1., 0., 0.], [1., 0., 0., 0.]],
    ]
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

impl StratifiedGroup {
    /// Homogeneous dimension Q = d1 + 2 d2.
    pub fn q_dim(&self) -> usize {
        self.d1 + 2 * self.d2
    }

    /// Topological dimension d = d1 + d2.
    pub fn dim(&self) -> usize {
        self.d1 + self.d2
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("custom")
    }

    /// (J_η)_{ij} = Σ_k η_k c[k][j][i], so that ⟨J_η x, x'⟩ = η([x, x']).
    pub fn j_matrix(&self, eta: &[f64]) -> DMatrix<f64> {
        assert_eq!(eta.len(), self.d2, "eta has wrong dimension");
        let mut j = DMatrix::zeros(self.d1, self.d1);
        for (k, ck) in self.c.iter().enumerate() {
            if eta[k] != 0.0 {
                j += ck.transpose() * eta[k];
            }
        }
        j
    }

    /// [x, x']_k = Σ_{ij} c[k][i][j] x_i x'_j.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        let yv = DVector::from_column_slice(y);
        self.c.iter().map(|ck| xv.dot(&(ck * &yv))).collect()
    }

    pub fn homogeneous_norm(&self, p: &GroupPoint) -> f64 {
        homogeneous_norm(p)
    }

    /// (x,u)·(x',u') = (x+x', u+u'+½[x,x']).
    pub fn product(&self, p: &GroupPoint, q: &GroupPoint) -> GroupPoint {
        let br = self.bracket(&p.x, &q.x);
        GroupPoint {
            x: p.x.iter().zip(&q.x).map(|(a, b)| a + b).collect(),
            u: (0..self.d2).map(|k| p.u[k] + q.u[k] + 0.5 * br[k]).collect(),
        }
    }

    /// The same group written in new central coordinates η = M η'.
    pub fn change_central_basis(&self, m: &DMatrix<f64>) -> Result<StratifiedGroup> {
        if m.nrows() != self.d2 || m.ncols() != self.d2 {
            return Err(Error::DimensionMismatch("basis change must be d2×d2".into()));
        }
        let c = (0..self.d2)
            .map(|l| {
                let mut acc = DMatrix::zeros(self.d1, self.d1);
                for k in 0..self.d2 {
                    acc += &self.c[k] * m[(k, l)];
                }
                acc
            })
            .collect();
        let mut g = validate_structure(self.d1, self.d2, c)?;
        g.name = self.name.clone();
        Ok(g)
    }

    pub fn from_file(file: &GroupFile) -> Result<StratifiedGroup> {
        let (d1, d2) = (file.d1, file.d2);
        let mut c = vec![DMatrix::zeros(d1, d1); d2];
        let mut seen = std::collections::BTreeSet::new();
        for b in &file.brackets {
            if b.i == 0 || b.j == 0 || b.k == 0 || b.i > d1 || b.j > d1 || b.k > d2 {
                return Err(Error::Shape(format!("bracket index out of range: {b:?}")));
            }
            if b.i >= b.j {
                return Err(Error::Shape(format!("brackets must list i < j: {b:?}")));
            }
            if !seen.insert((b.k, b.i, b.j)) {
                return Err(Error::Shape(format!("duplicate bracket entry: {b:?}")));
            }
            c[b.k - 1][(b.i - 1, b.j - 1)] = b.v;
            c[b.k - 1][(b.j - 1, b.i - 1)] = -b.v;
        }
        let mut g = validate_structure(d1, d2, c)?;
        g.name = file.name.clone();
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<StratifiedGroup> {
        let file: GroupFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn to_file(&self) -> GroupFile {
        let mut brackets = Vec::new();
        for k in 0..self.d2 {
            for i in 0..self.d1 {
                for j in (i + 1)..self.d1 {
                    let v = self.c[k][(i, j)];
                    if v != 0.0 {
                        brackets.push(Bracket { i: i + 1, j: j + 1, k: k + 1, v });
                    }
                }
            }
        }
        GroupFile { d1: self.d1, d2: self.d2, brackets, name: self.name.clone() }
    }
}

/// |x| + |u|^{1/2}.
pub fn homogeneous_norm(p: &GroupPoint) -> f64 {
    let nx = p.x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nu = p.u.iter().map(|v| v * v).sum::<f64>().sqrt();
    nx + nu.sqrt()
}

fn check_skew(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch("pfaffian needs a square matrix".into()));
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] + m[(j, i)]).abs());
        }
    }
    if worst > SKEW_TOL {
        return Err(Error::NotSkew(worst));
    }
    Ok(())
}

/// Pfaffian of a skew matrix; sign fixed by pf(I₁+I₂-type normal form) > 0,
/// i.e. the 4×4 value is m₁₂m₃₄ − m₁₃m₂₄ + m₁₄m₂₃.
pub fn pfaffian(m: &DMatrix<f64>) -> Result<f64> {
    check_skew(m)?;
    let n = m.nrows();
    if n % 2 == 1 {
        return Err(Error::OddDimension(n));
    }
    let idx: Vec<usize> = (0..n).collect();
    Ok(pf_rec(m, &idx))
}

fn pf_rec(m: &DMatrix<f64>, idx: &[usize]) -> f64 {
    match idx.len() {
        0 => 1.0,
        2 => m[(idx[0], idx[1])],
        4 => {
            let (a, b, c, d) = (idx[0], idx[1], idx[2], idx[3]);
            m[(a, b)] * m[(c, d)] - m[(a, c)] * m[(b, d)] + m[(a, d)] * m[(b, c)]
        }
        _ => {
            // expansion along the first row
            let first = idx[0];
            let mut acc = 0.0;
            for p in 1..idx.len() {
                let v = m[(first, idx[p])];
                if v == 0.0 {
                    continue;
                }
                let rest: Vec<usize> =
                    idx[1..].iter().enumerate().filter(|&(q, _)| q + 1 != p).map(|(_, &i)| i).collect();
                let sign = if p % 2 == 1 { 1.0 } else { -1.0 };
                acc += sign * v * pf_rec(m, &rest);
            }
            acc
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PfaffianClass {
    #[serde(rename = "37A")]
    A,
    #[serde(rename = "37B")]
    B,
    #[serde(rename = "37B₁")]
    B1,
    #[serde(rename = "37C")]
    C,
    #[serde(rename = "37D")]
    D,
    #[serde(rename = "37D₁")]
    D1,
}

impl PfaffianClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PfaffianClass::A => "37A",
            PfaffianClass::B => "37B",
            PfaffianClass::B1 => "37B₁",
            PfaffianClass::C => "37C",
            PfaffianClass::D => "37D",
            PfaffianClass::D1 => "37D₁",
        }
    }
}

impl fmt::Display for PfaffianClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The symmetric S with pf J_η = ηᵀ S η, by polarisation (3 + 3 evaluations).
pub fn pfaffian_form(g: &StratifiedGroup) -> Result<DMatrix<f64>> {
    if g.d1 != 4 || g.d2 != 3 {
        return Err(Error::DimensionMismatch(format!(
            "pfaffian classification needs d1=4, d2=3, got d1={}, d2={}",
            g.d1, g.d2
        )));
    }
    let pf_at = |eta: [f64; 3]| pfaffian(&g.j_matrix(&eta));
    let e = |k: usize| {
        let mut v = [0.0; 3];
        v[k] = 1.0;
        v
    };
    let mut s = DMatrix::zeros(3, 3);
    let diag: Vec<f64> = (0..3).map(|k| pf_at(e(k))).collect::<Result<_>>()?;
    for k in 0..3 {
        s[(k, k)] = diag[k];
    }
    for k in 0..3 {
        for l in (k + 1)..3 {
            let mut v = e(k);
            v[l] = 1.0;
            let mixed = 0.5 * (pf_at(v)? - diag[k] - diag[l]);
            s[(k, l)] = mixed;
            s[(l, k)] = mixed;
        }
    }
    Ok(s)
}

/// Classify a 7-dimensional group with 3-dimensional centre by the signature of its Pfaffian form.
pub fn classify_pfaffian_form(g: &StratifiedGroup) -> Result<PfaffianClass> {
    let s = pfaffian_form(g)?;
    // scale of pf on the unit sphere if the form were "full size"
    let scale: f64 = g.c.iter().map(|ck| ck.norm_squared()).sum::<f64>() / 4.0;
    let eig = SymmetricEigen::new(s).eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if max <= RANK_TOL * scale {
        return Ok(PfaffianClass::A);
    }
    let mut pos = 0;
    let mut neg = 0;
    for &v in eig.iter() {
        let rel = v.abs() / max;
        if rel >= RANK_GUARD {
            if v > 0.0 {
                pos += 1
            } else {
                neg += 1
            }
        } else if rel >= RANK_TOL {
            return Err(Error::AmbiguousClassification(eig.iter().cloned().collect()));
        }
    }
    Ok(match (pos + neg, pos.min(neg)) {
        (1, _) => PfaffianClass::C,
        (2, 0) => PfaffianClass::B1,
        (2, _) => PfaffianClass::B,
        (3, 0) => PfaffianClass::D1,
        (3, _) => PfaffianClass::D,
        _ => PfaffianClass::A,
    })
}

/// A (37A) example: J_η = Σ η_k (A_k + B_k) where A_k is self-dual, B_k
/// anti-self-dual and k ↦ B_k an isometry, so pf J_η = |Σ η A|² − |Σ η B|² = 0.
pub fn isometry_graph_group() -> StratifiedGroup {
    let q = quaternion_units();
    // conjugating by diag(1,1,1,-1) reverses orientation, hence swaps duality
    let flip = [1.0, 1.0, 1.0, -1.0];
    let a: Vec<[[f64; 4]; 4]> = q
        .iter()
        .map(|ak| {
            let mut m = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] = ak[i][j] + flip[i] * ak[i][j] * flip[j];
                }
            }
            m
        })
        .collect();
    from_j_coefficients("37A-graph", &a)
}

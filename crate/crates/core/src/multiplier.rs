//! Spectral multipliers F(λ), joint multipliers H(λ, η) = F(λ)χ(η), and the
//! Sobolev / Mihlin–Hörmander norms used to compare them.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tail tolerance defining the effective support of heat multipliers.
pub const HEAT_TAIL_TOL: f64 = 1e-12;

/// A cutoff on the dual of the centre, evaluated pointwise.
pub trait EtaCutoff: Send + Sync + fmt::Debug {
    fn eval(&self, eta: &[f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// exp(1 − 1/(1−y²)), y = (2λ−a−b)/(b−a), zero off (a, b)
    Bump { a: f64, b: f64 },
    /// e^{−tλ}
    Heat { t: f64 },
    /// samples on a uniform λ-grid, linearly interpolated, zero outside
    Table { lambda0: f64, dlambda: f64, re: Vec<f64>, im: Vec<f64> },
    Constant { value: f64 },
    /// F(λ) = λ
    Linear,
}

impl Profile {
    fn eval(&self, lambda: f64) -> Complex64 {
        match self {
            Profile::Bump { a, b } => Complex64::new(bump(lambda, *a, *b), 0.0),
            Profile::Heat { t } => Complex64::new((-t * lambda).exp(), 0.0),
            Profile::Table { lambda0, dlambda, re, im } => {
                let pos = (lambda - lambda0) / dlambda;
                let n = re.len();
                if !(pos >= 0.0) || pos > (n - 1) as f64 {
                    return Complex64::new(0.0, 0.0);
                }
                let i = (pos.floor() as usize).min(n.saturating_sub(2));
                let f = pos - i as f64;
                if n == 1 {
                    return Complex64::new(re[0], im[0]);
                }
                Complex64::new(re[i] * (1.0 - f) + re[i + 1] * f, im[i] * (1.0 - f) + im[i + 1] * f)
            }
            Profile::Constant { value } => Complex64::new(*value, 0.0),
            Profile::Linear => Complex64::new(lambda, 0.0),
        }
    }

    /// Λ with F(λ) = 0 (or below the tail tolerance) for λ > Λ.
    fn support_bound(&self) -> f64 {
        match self {
            Profile::Bump { b, .. } => *b,
            Profile::Heat { t } => (1.0 / HEAT_TAIL_TOL).ln() / t,
            Profile::Table { lambda0, dlambda, re, im } => {
                let last = (0..re.len()).rev().find(|&i| re[i] != 0.0 || im[i] != 0.0);
                match last {
                    Some(i) => lambda0 + dlambda * (i + 1).min(re.len() - 1) as f64,
                    None => 0.0,
                }
            }
            Profile::Constant { value } if *value == 0.0 => 0.0,
            Profile::Constant { .. } | Profile::Linear => f64::INFINITY,
        }
    }

    /// λ₀ with F = 0 for λ < λ₀.
    fn support_lower(&self) -> f64 {
        match self {
            Profile::Bump { a, .. } => *a,
            Profile::Table { lambda0, dlambda, re, im } => {
                let first = (0..re.len()).find(|&i| re[i] != 0.0 || im[i] != 0.0);
                match first {
                    Some(i) => lambda0 + dlambda * i.saturating_sub(1) as f64,
                    None => f64::INFINITY,
                }
            }
            _ => f64::NEG_INFINITY,
        }
    }

    fn is_real(&self) -> bool {
        match self {
            Profile::Table { im, .. } => im.iter().all(|&v| v == 0.0),
            _ => true,
        }
    }
}

/// The built-in smooth compactly supported bump.
pub fn bump(lambda: f64, a: f64, b: f64) -> f64 {
    let y = (2.0 * lambda - a - b) / (b - a);
    if y.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - y * y)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub profile: Profile,
    /// the term is coeff · profile(scale · λ)
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "one_c")]
    pub coeff: Complex64,
}

fn one() -> f64 {
    1.0
}
fn one_c() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// H(λ, η) = Σ terms(λ) · χ(η), χ ≡ 1 when no joint factor is attached.
#[derive(Clone, Default)]
pub struct Multiplier {
    pub terms: Vec<Term>,
    pub joint: Option<Arc<dyn EtaCutoff>>,
}

impl fmt::Debug for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Multiplier").field("terms", &self.terms).field("joint", &self.joint).finish()
    }
}

impl Multiplier {
    pub fn from_profile(profile: Profile) -> Self {
        Multiplier { terms: vec![Term { profile, scale: 1.0, coeff: one_c() }], joint: None }
    }

    pub fn zero() -> Self {
        Multiplier::default()
    }

    pub fn bump(a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a < b && b.is_finite()) {
            return Err(Error::BadParameters(format!("bump needs 0 <= a < b, got ({a}, {b})")));
        }
        Ok(Self::from_profile(Profile::Bump { a, b }))
    }

    pub fn heat(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::BadParameters(format!("heat needs t > 0, got {t}")));
        }
        Ok(Self::from_profile(Profile::Heat { t }))
    }

    pub fn constant(value: f64) -> Self {
        Self::from_profile(Profile::Constant { value })
    }

    pub fn linear() -> Self {
        Self::from_profile(Profile::Linear)
    }

    /// λ ↦ F(sλ).
    pub fn dilate(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.scale *= s;
        }
        self
    }

    pub fn scaled(mut self, c: Complex64) -> Self {
        for t in &mut self.terms {
            t.coeff *= c;
        }
        self
    }

    /// Sum of the λ-parts; the joint factor of `self` is kept.
    pub fn plus(mut self, other: &Multiplier) -> Self {
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn with_joint(mut self, chi: Arc<dyn EtaCutoff>) -> Self {
        self.joint = Some(chi);
        self
    }

    pub fn eval(&self, lambda: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let v = t.profile.eval(t.scale * lambda);
            if v.re != 0.0 || v.im != 0.0 {
                acc += t.coeff * v;
            }
        }
        acc
    }

    pub fn joint_factor(&self, eta: &[f64]) -> f64 {
        self.joint.as_ref().map_or(1.0, |c| c.eval(eta))
    }

    /// H(λ, η).
    pub fn eval_joint(&self, lambda: f64, eta: &[f64]) -> Complex64 {
        self.eval(lambda) * self.joint_factor(eta)
    }

    /// Effective spectral support bound Λ.
    pub fn support_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.profile.support_bound() / t.scale).fold(0.0, f64::max)
    }

    /// λ₀ with H(λ, ·) = 0 for λ < λ₀ (−∞ when there is none).
    pub fn support_lower(&self) -> f64 {
        self.terms.iter().map(|t| t.profile.support_lower() / t.scale).fold(f64::INFINITY, f64::min)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coeff == Complex64::new(0.0, 0.0) || t.profile.support_bound() == 0.0)
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.im == 0.0 && t.profile.is_real())
    }

    /// Read a table multiplier from CSV with header `lambda,re,im` and uniform spacing.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let names: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
        if names != ["lambda", "re", "im"] {
            return Err(Error::Parse(format!("expected header lambda,re,im, got {names:?}")));
        }
        let (mut lam, mut re, mut im) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse("short row".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(e.to_string()))
            };
            lam.push(num(0)?);
            re.push(num(1)?);
            im.push(num(2)?);
        }
        if lam.len() < 2 {
            return Err(Error::Parse("table needs at least two rows".into()));
        }
        let d = lam[1] - lam[0];
        if !(d > 0.0) {
            return Err(Error::Parse("lambda must be increasing".into()));
        }
        for w in lam.windows(2) {
            if ((w[1] - w[0]) - d).abs() > 1e-9 * d.max(1.0) {
                return Err(Error::Parse("lambda spacing is not uniform".into()));
            }
        }
        Ok(Self::from_profile(Profile::Table { lambda0: lam[0], dlambda: d, re, im }))
    }
}

/// (∫(1+τ²)^s |F̂(τ)|² dτ)^{1/2} with F̂(τ) = ∫F(λ)e^{−iλτ}dλ/(2π)^{1/2},
/// from uniform samples via a zero-padded DFT.
pub fn sobolev_norm(samples: &[Complex64], dlambda: f64, s: f64) -> Result<f64> {
    let n = samples.len();
    if n < 2 || !(dlambda > 0.0) || !(s >= 0.0) {
        return Err(Error::BadParameters("sobolev_norm needs ≥2 samples, dλ > 0, s ≥ 0".into()));
    }
    let max = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0.0);
    }
    let edge = samples[0].norm().max(samples[n - 1].norm());
    if edge > 1e-8 * max {
        return Err(Error::NonDecayingSamples(edge / max));
    }
    let m = (4 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[..n].copy_from_slice(samples);
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let dtau = 2.0 * std::f64::consts::PI / (m as f64 * dlambda);
    let scale = dlambda * dlambda / (2.0 * std::f64::consts::PI);
    let mut acc = 0.0;
    for (k, v) in buf.iter().enumerate() {
        let kk = if k < m / 2 { k as f64 } else { k as f64 - m as f64 };
        let tau = kk * dtau;
        acc += (1.0 + tau * tau).powf(s) * v.norm_sqr() * scale;
    }
    Ok((acc * dtau).sqrt())
}

/// Default window χ for the Mihlin–Hörmander norm: the bump on (1/2, 2).
pub const MH_WINDOW: (f64, f64) = (0.5, 2.0);

/// max over t ∈ t_set of ‖F(t·) χ‖_{W₂^s}, χ the bump on `window`.
pub fn mh_condition_norm(f: &Multiplier, s: f64, window: (f64, f64), t_set: &[f64], nsamples: usize) -> Result<f64> {
    let (a, b) = window;
    if !(0.0 < a && a < b) || nsamples < 8 {
        return Err(Error::BadParameters("window must satisfy 0 < a < b".into()));
    }
    let d = (b - a) / (nsamples - 1) as f64;
    let mut best: f64 = 0.0;
    for &t in t_set {
        let samples: Vec<Complex64> = (0..nsamples)
            .map(|i| {
                let lam = a + d * i as f64;
                f.eval(t * lam) * bump(lam, a, b)
            })
            .collect();
        best = best.max(sobolev_norm(&samples, d, s)?);
    }
    Ok(best)
}

/// Dyadic list 2^lo, …, 2^hi.
pub fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

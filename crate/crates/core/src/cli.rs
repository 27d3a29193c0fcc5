//! Run configuration and the command bodies behind the `nilcalc` binary.
//!
//! Commands return a [`CmdOutput`] instead of printing, so the binary stays a
//! thin shell and the same code paths are testable in-process.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::{spherical_partition, weight_w, PartitionDump};
use crate::group::{builtin_group, classify_pfaffian_form, StratifiedGroup, BUILTIN_NAMES};
use crate::harness::{
    mh_csv, mh_default_t_list, mh_ratio_probe, ratio_spread, scaling_csv, scaling_probe_cone, scaling_probe_p,
    CriterionOutcome, GridSpec, ProbeReport, ScalingProbeConfig, SectorChoice,
};
use crate::kernel::{synthesize_kernel, Axis, SynthOptions, TruncationSpec};
use crate::laguerre::{gram_matrix, laguerre_norm_sq};
use crate::multiplier::{dyadic, Multiplier, Term};
use crate::plancherel::{plancherel_check_at_eta, XiQuadrature};
use crate::spectral::{decompose, random_unit, CLUSTER_TOL};
use crate::{Error, ErrorClass, Result};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Validation | ErrorClass::Io => EXIT_VALIDATION,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MultiplierSpec {
    Bump { a: f64, b: f64 },
    Heat { t: f64 },
    Zero,
    /// `lambda,re,im` table
    Csv { path: PathBuf },
    Terms { terms: Vec<Term> },
}

impl Default for MultiplierSpec {
    fn default() -> Self {
        MultiplierSpec::Bump { a: 1.0, b: 2.0 }
    }
}

impl MultiplierSpec {
    pub fn build(&self) -> Result<Multiplier> {
        match self {
            MultiplierSpec::Bump { a, b } => Multiplier::bump(*a, *b),
            MultiplierSpec::Heat { t } => Multiplier::heat(*t),
            MultiplierSpec::Zero => Ok(Multiplier::zero()),
            MultiplierSpec::Csv { path } => Multiplier::from_csv(path),
            MultiplierSpec::Terms { terms } => Ok(Multiplier { terms: terms.clone(), joint: None }),
        }
    }

    /// `bump:A,B`, `heat:T`, `zero`, or a path to a CSV table.
    pub fn parse(s: &str) -> Result<Self> {
        let nums = |rest: &str| -> Result<Vec<f64>> { parse_list(rest) };
        if let Some(rest) = s.strip_prefix("bump:") {
            match nums(rest)?[..] {
                [a, b] => Ok(MultiplierSpec::Bump { a, b }),
                _ => Err(Error::Parse("bump needs two numbers, e.g. bump:1,2".into())),
            }
        } else if let Some(rest) = s.strip_prefix("heat:") {
            match nums(rest)?[..] {
                [t] => Ok(MultiplierSpec::Heat { t }),
                _ => Err(Error::Parse("heat needs one number, e.g. heat:1".into())),
            }
        } else if s == "zero" {
            Ok(MultiplierSpec::Zero)
        } else if s.ends_with(".csv") {
            Ok(MultiplierSpec::Csv { path: PathBuf::from(s) })
        } else {
            Err(Error::Parse(format!("unrecognised multiplier {s:?}")))
        }
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{p:?}: {e}"))))
        .collect()
}

/// Grid shorthand `NxH:MxK`: every x axis gets N points at spacing H, every u axis M at K.
pub fn parse_grid(s: &str, g: &StratifiedGroup) -> Result<GridSpec> {
    let axis = |t: &str| -> Result<Axis> {
        let (n, h) = t.split_once('x').ok_or_else(|| Error::Parse(format!("axis {t:?} is not COUNTxSPACING")))?;
        let n = n.trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?;
        let h = h.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Axis::new(n, h))
    };
    let (xs, us) = s.split_once(':').ok_or_else(|| Error::Parse("grid is X_AXIS:U_AXIS".into()))?;
    Ok(GridSpec { x: vec![axis(xs)?; g.d1], u: vec![axis(us)?; g.d2] })
}

fn default_group() -> String {
    "H1".into()
}
fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhSpec {
    pub s: f64,
    pub t_list: Vec<f64>,
}

impl Default for MhSpec {
    fn default() -> Self {
        MhSpec { s: 2.0, t_list: mh_default_t_list() }
    }
}

/// Probe settings; missing fields are filled from the defaults below.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeSpec {
    #[serde(default)]
    pub scaling: Option<ScalingProbeConfig>,
    #[serde(default)]
    pub mh: MhSpec,
}

/// A complete experiment description. Every default is written back into
/// emitted reports, so a report alone reproduces its run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// builtin name or path to a group JSON file
    #[serde(default = "default_group")]
    pub group: String,
    #[serde(default)]
    pub multiplier: MultiplierSpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub truncation: TruncationSpec,
    #[serde(default)]
    pub synth: SynthOptions,
    #[serde(default)]
    pub probe: ProbeSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Cheap validation: everything except the numerics.
    pub fn validate(&self) -> Result<()> {
        let g = load_group(&self.group)?;
        self.multiplier.build()?;
        if let Some(grid) = &self.grid {
            if grid.x.len() != g.d1 || grid.u.len() != g.d2 {
                return Err(Error::DimensionMismatch(format!("grid needs {} x axes and {} u axes", g.d1, g.d2)));
            }
            if grid.x.iter().chain(&grid.u).any(|a| a.count == 0 || !(a.spacing > 0.0)) {
                return Err(Error::BadParameters("axes need count ≥ 1 and spacing > 0".into()));
            }
        }
        if self.probe.mh.t_list.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::BadParameters("mh t_list must be positive".into()));
        }
        Ok(())
    }

    pub fn grid_or_default(&self, g: &StratifiedGroup) -> GridSpec {
        // spacings clear the default Nyquist rule for F supported in [0, 2]
        let (x, u) = if g.d1 <= 2 { (Axis::new(16, 0.5), Axis::new(32, 0.5)) } else { (Axis::new(6, 0.5), Axis::new(8, 1.0)) };
        self.grid.clone().unwrap_or_else(|| GridSpec { x: vec![x; g.d1], u: vec![u; g.d2] })
    }
}

pub fn load_group(spec: &str) -> Result<StratifiedGroup> {
    if BUILTIN_NAMES.contains(&spec) {
        builtin_group(spec)
    } else if spec == "37A-graph" {
        Ok(crate::group::isometry_graph_group())
    } else if !std::path::Path::new(spec).exists() && !spec.ends_with(".json") {
        Err(Error::UnknownName(spec.to_string()))
    } else {
        let text = std::fs::read_to_string(spec).map_err(|e| Error::Io(format!("{spec}: {e}")))?;
        StratifiedGroup::from_json(&text)
    }
}

/// Text for stdout plus files to write into the output directory.
#[derive(Debug, Default)]
pub struct CmdOutput {
    pub stdout: String,
    pub files: Vec<(String, Vec<u8>)>,
    /// false turns into exit code 3
    pub pass: bool,
}

impl CmdOutput {
    fn text(s: String) -> Self {
        CmdOutput { stdout: s, files: Vec::new(), pass: true }
    }

    /// Write the files under `dir` (created if needed).
    pub fn persist(&self, dir: &Path) -> Result<()> {
        if self.files.is_empty() {
            return Ok(());
        }
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

pub fn cmd_groups_list() -> Result<CmdOutput> {
    let mut s = format!("{:<10} {:>3} {:>3} {:>3} {:>3}  class\n", "name", "d1", "d2", "Q", "d");
    let mut groups: Vec<StratifiedGroup> = BUILTIN_NAMES.iter().map(|n| builtin_group(n)).collect::<Result<_>>()?;
    groups.push(crate::group::isometry_graph_group());
    for g in &groups {
        let class = classify_pfaffian_form(g).map(|c| c.as_str().to_string()).unwrap_or_else(|_| "n/a".into());
        s.push_str(&format!("{:<10} {:>3} {:>3} {:>3} {:>3}  {class}\n", g.label(), g.d1, g.d2, g.q_dim(), g.dim()));
    }
    Ok(CmdOutput::text(s))
}

pub fn cmd_classify(group: &str) -> Result<CmdOutput> {
    let g = load_group(group)?;
    Ok(CmdOutput::text(format!("{}\n", classify_pfaffian_form(&g)?)))
}

pub fn cmd_spectrum(group: &str, eta: &[f64]) -> Result<CmdOutput> {
    let g = load_group(group)?;
    let sd = decompose(&g, eta, CLUSTER_TOL)?;
    Ok(CmdOutput::text(serde_json::to_string_pretty(&sd.report(eta))? + "\n"))
}

pub fn cmd_kernel(cfg: &RunConfig) -> Result<CmdOutput> {
    let g = load_group(&cfg.group)?;
    let h = cfg.multiplier.build()?;
    let grid = cfg.grid_or_default(&g);
    let k = synthesize_kernel(&h, &g, &grid.x, &grid.u, &cfg.truncation, &cfg.synth)?;
    let mut bytes = Vec::new();
    k.write_nkg1(&mut bytes)?;
    let meta = serde_json::json!({ "config": cfg, "config_hash": crate::harness::config_hash(cfg), "meta": k.meta, "max_abs": k.max_abs() });
    let stdout = format!(
        "kernel {} on {:?}: max|K| = {:e}, skipped η points {}\n",
        g.label(),
        k.shape(),
        k.max_abs(),
        k.meta.as_ref().map_or(0, |m| m.skipped)
    );
    Ok(CmdOutput {
        stdout,
        files: vec![("kernel.nkg1".into(), bytes), ("kernel.json".into(), serde_json::to_vec_pretty(&meta)?)],
        pass: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Laguerre,
    Plancherel,
    Weight,
    Partition,
}

fn outcome(name: &str, pass: bool, detail: String) -> CriterionOutcome {
    CriterionOutcome { name: name.into(), pass, detail }
}

pub fn cmd_check(which: CheckKind, cfg: &RunConfig) -> Result<CmdOutput> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (name, crit) = match which {
        CheckKind::Laguerre => {
            let mut worst: f64 = 0.0;
            for k in 0..=2u32 {
                let gm = gram_matrix(8, k);
                for n in 0..=8 {
                    for m in 0..=8 {
                        let want = if n == m { laguerre_norm_sq(n, k) } else { 0.0 };
                        worst = worst.max((gm[n][m] - want).abs());
                    }
                }
            }
            ("laguerre", outcome("orthogonality", worst <= 1e-8, format!("max deviation {worst:.2e} (tol 1e-8)")))
        }
        CheckKind::Weight => {
            let g = builtin_group("G37D")?;
            let mut worst = f64::INFINITY;
            for _ in 0..100_000 {
                let eta: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
                let jx = g.j_matrix(&eta) * DVector::from_column_slice(&x);
                let n = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
                worst = worst.min(jx.norm() - n * weight_w(&x));
            }
            ("weight", outcome("|J_η x| ≥ |η| w(x)", worst >= -1e-10, format!("min residual {worst:.2e} (tol −1e-10)")))
        }
        CheckKind::Partition => {
            let mut worst: f64 = 0.0;
            for k in 1..=5 {
                let p = spherical_partition(2, 2f64.powi(-k))?;
                for _ in 0..2_000 {
                    let th = rng.random_range(0.0..2.0 * PI);
                    let r = 10f64.powf(rng.random_range(-2.0..2.0));
                    let s: f64 = p.eval_all(&[r * th.cos(), r * th.sin()]).iter().sum();
                    worst = worst.max((s - 1.0).abs());
                }
            }
            ("partition", outcome("Σχ = 1", worst <= 1e-12, format!("max |Σχ − 1| = {worst:.1e} (tol 1e-12)")))
        }
        CheckKind::Plancherel => {
            let g = load_group(&cfg.group)?;
            let h = cfg.multiplier.build()?;
            let quad = if g.d1 <= 2 {
                XiQuadrature::Grid { points_per_axis: 256 }
            } else {
                XiQuadrature::MonteCarlo { samples: 1 << 20, seed: cfg.seed }
            };
            let mut ratios = Vec::new();
            for _ in 0..5 {
                let eta: Vec<f64> = random_unit(&mut rng, g.d2).iter().map(|v| v * rng.random_range(0.3..0.8)).collect();
                let c = plancherel_check_at_eta(&h, &g, &eta, &quad, &cfg.truncation)?;
                if let Some(r) = c.ratio {
                    ratios.push(r / c.expected_ratio);
                }
            }
            let tol = if matches!(quad, XiQuadrature::Grid { .. }) { 0.005 } else { 0.05 };
            let pass = !ratios.is_empty() && ratios.iter().all(|r| (r - 1.0).abs() <= tol);
            ("plancherel", outcome("lhs/rhs = (π/2)^|r|", pass, format!("normalised ratios {ratios:?} (tol {tol})")))
        }
    };
    let pass = crit.pass;
    let stdout = format!("{} {name}: {}\n", if pass { "PASS" } else { "FAIL" }, crit.detail);
    let report = ProbeReport::new(&format!("check-{name}"), cfg, &serde_json::Value::Null, vec![crit], started)?;
    Ok(CmdOutput { stdout, files: vec![(format!("check-{name}.json"), serde_json::to_vec_pretty(&report)?)], pass })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    ScalingCone,
    ScalingP,
    Mh,
}

/// Defaults for the scaling probes: four ρ octaves and four δ octaves below 1/8.
pub fn default_scaling(seed: u64) -> ScalingProbeConfig {
    ScalingProbeConfig {
        alpha: [0.0; 3],
        theta: 0.0,
        rhos: dyadic(-5, -1),
        deltas: dyadic(-7, -4),
        sector: SectorChoice::Average { sign: 1 },
        eta_samples: 4096,
        x_samples: 1,
        seed,
        grid: None,
    }
}

pub fn cmd_probe(which: ProbeKind, cfg: &RunConfig) -> Result<CmdOutput> {
    let started = Instant::now();
    let g = load_group(&cfg.group)?;
    let f = cfg.multiplier.build()?;
    let mut cfg = cfg.clone();
    match which {
        ProbeKind::ScalingCone | ProbeKind::ScalingP => {
            let sc = cfg.probe.scaling.get_or_insert_with(|| default_scaling(cfg.seed)).clone();
            let (name, res) = match which {
                ProbeKind::ScalingCone => ("scaling-cone", scaling_probe_cone(&g, &f, &sc)?),
                _ => ("scaling-p", scaling_probe_p(&g, &f, &sc)?),
            };
            let fit = &res.fit;
            let crit = outcome(
                "measured ≤ predicted + tol, R² ≥ min",
                fit.pass,
                format!("slopes {:?}, predicted {:?}, R² {:.5}", fit.slopes, fit.predicted, fit.r2),
            );
            let stdout = format!("{} {name}: {}\n", if fit.pass { "PASS" } else { "FAIL" }, crit.detail);
            let csv = scaling_csv(&res.rows);
            let report = ProbeReport::new(name, &cfg, &res, vec![crit], started)?;
            Ok(CmdOutput {
                stdout,
                files: vec![(format!("{name}.json"), serde_json::to_vec_pretty(&report)?), (format!("{name}.csv"), csv.into_bytes())],
                pass: report.all_pass(),
            })
        }
        ProbeKind::Mh => {
            let grid = cfg.grid_or_default(&g);
            cfg.grid = Some(grid.clone());
            let rows = mh_ratio_probe(&g, &f, cfg.probe.mh.s, &cfg.probe.mh.t_list, &grid, &cfg.synth)?;
            let spread = ratio_spread(&rows);
            let crit = outcome("ratios within factor 4 of median", spread <= 4.0, format!("spread {spread:.4}"));
            let stdout = format!("{} mh: {}\n{}", if crit.pass { "PASS" } else { "FAIL" }, crit.detail, mh_csv(&rows));
            let report = ProbeReport::new("mh", &cfg, &rows, vec![crit], started)?;
            Ok(CmdOutput {
                stdout,
                files: vec![("mh.json".into(), serde_json::to_vec_pretty(&report)?), ("mh.csv".into(), mh_csv(&rows).into_bytes())],
                pass: report.all_pass(),
            })
        }
    }
}

/// Centres, constants and (on S¹) sector frames of the ε-partition of S^{n−1}.
pub fn cmd_partition_dump(n: usize, eps: f64) -> Result<CmdOutput> {
    let p = spherical_partition(n, eps)?;
    Ok(CmdOutput::text(serde_json::to_string_pretty(&PartitionDump::new(&p))? + "\n"))
}

//! Scenario files: parsing, execution of the requested checks, and the
//! artifacts written next to the ledger.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cert::{self, Certification, Verdict};
use crate::checks::{self, ProblemKind};
use crate::config::{parse_sections, Section};
use crate::duality::{self, DualityProblem};
use crate::error::{Error, Result};
use crate::field::{c1_norm, lipschitz_norm, mixed_norm, ExponentPair, ScalarField, SpaceTimeField, TimeGrid, DEFAULT_EPSILON};
use crate::grid::{dist, DomainSpec, SpaceGrid};
use crate::heat_kernel::{self, SpectralBasis};
use crate::ledger::{Ledger, LedgerRow};
use crate::plot;
use crate::reactions::{self, ChemistryState, InterpolationKind, SktParams, SktState};
use crate::regularity::{self, HolderEstimate, HolderOptions, ParabolicCylinder};
use crate::rough::{self, CoefficientProfile, RoughCoefficient, RoughProblem};

pub const OUT_ENV: &str = "ROUGHCERT_OUT";
pub const DEFAULT_OUT_ROOT: &str = "roughcert-out";

const COMMON_KEYS: &[&str] = &[
    "kind",
    "checks",
    "plots",
    "seed",
    "domain.shape",
    "domain.extents",
    "grid.h",
    "time.T",
    "time.dt",
    "exps.p",
    "exps.q",
    "exps.epsilon",
];

fn kind_keys(kind: ProblemKind) -> &'static [&'static str] {
    match kind {
        ProblemKind::Rough => &[
            "coef.profile",
            "coef.a0",
            "coef.c0",
            "coef.omega",
            "coef.wavenumber",
            "coef.phase",
            "coef.cells",
            "coef.time_cells",
            "forcing.value",
            "forcing.hole",
            "init.amplitude",
            "sandwich.tol",
            "decay.radius",
            "decay.center",
        ],
        ProblemKind::Chemistry => &["chem.d", "chem.amplitudes", "aux.tol", "energy.p"],
        ProblemKind::Skt => &[
            "skt.d1",
            "skt.d2",
            "skt.sigma",
            "skt.r_u",
            "skt.r_v",
            "skt.d11",
            "skt.d12",
            "skt.d21",
            "skt.d22",
            "skt.u_amp",
            "skt.v_amp",
            "aux.tol",
            "energy.p",
            "duality.delta",
        ],
        ProblemKind::Duality => &["mu.lo", "mu.hi", "duality.draws", "duality.deltas", "forcing.value", "init.amplitude"],
        ProblemKind::Kernel => &["kernel.R", "kernel.a0", "kernel.c0"],
    }
}

fn plots_for(kind: ProblemKind) -> &'static [&'static str] {
    match kind {
        ProblemKind::Rough => &["decay", "boundary", "holder"],
        ProblemKind::Chemistry | ProblemKind::Skt => &["norms"],
        ProblemKind::Duality | ProblemKind::Kernel => &[],
    }
}

/// Domain, spacing and time stepping of a scenario.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub spec: DomainSpec,
    pub h: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl Discretization {
    /// The configured grids, or the refined pair `(h/2, dt/4)`.
    pub fn grids(&self, refined: bool) -> Result<(SpaceGrid, TimeGrid)> {
        let (h, dt) = if refined { (self.h / 2.0, self.dt / 4.0) } else { (self.h, self.dt) };
        Ok((SpaceGrid::new(self.spec.clone(), h)?, TimeGrid::new(self.horizon, dt)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefSpec {
    Constant,
    Oscillating { omega: f64, wavenumber: f64, phase: f64 },
    Checkerboard { space_cells: usize, time_cells: usize },
}

#[derive(Debug, Clone)]
pub struct RoughSetup {
    pub a0: f64,
    pub c0: f64,
    pub coef: CoefSpec,
    pub forcing: f64,
    /// `f` vanishes within this distance of the domain center.
    pub hole: f64,
    pub init_amplitude: f64,
    pub sandwich_tol: Option<f64>,
    pub decay_radius: Option<f64>,
    pub decay_center: Option<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct ChemistrySetup {
    pub d: [f64; 4],
    pub amplitudes: [f64; 4],
    pub aux_tol: f64,
    pub energy_p: f64,
}

#[derive(Debug, Clone)]
pub struct SktSetup {
    pub params: SktParams,
    pub u_amp: f64,
    pub v_amp: f64,
    pub aux_tol: f64,
    pub energy_p: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct DualitySetup {
    pub mu_lo: f64,
    pub mu_hi: f64,
    pub draws: usize,
    pub deltas: Vec<f64>,
    pub forcing: f64,
    pub init_amplitude: f64,
}

#[derive(Debug, Clone)]
pub struct KernelSetup {
    pub radius: f64,
    pub a0: f64,
    pub c0: f64,
}

#[derive(Debug, Clone)]
pub enum Model {
    Rough(RoughSetup),
    Chemistry(ChemistrySetup),
    Skt(SktSetup),
    Duality(DualitySetup),
    Kernel(KernelSetup),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub kind: ProblemKind,
    pub disc: Discretization,
    pub exps: ExponentPair,
    pub model: Model,
    /// Requested checks in catalog order.
    pub checks: Vec<&'static str>,
    pub plots: Vec<String>,
    pub seed: Option<u64>,
}

impl Scenario {
    fn wants(&self, check: &str) -> bool {
        self.checks.contains(&check)
    }

    fn plots(&self, name: &str) -> bool {
        self.plots.iter().any(|p| p == name)
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub seed: u64,
    pub workers: Option<usize>,
    pub scenarios: Vec<Scenario>,
}

fn context(name: &str, e: Error) -> Error {
    match e {
        Error::MissingKey(k) => Error::MissingKey(format!("{k}` in scenario `{name}")),
        Error::Config(m) => Error::Config(format!("scenario `{name}`: {m}")),
        other => other,
    }
}

fn floats<const N: usize>(s: &Section, key: &str, default: [f64; N]) -> Result<[f64; N]> {
    if s.get(key).is_none() {
        return Ok(default);
    }
    let items = s.list(key);
    if items.len() != N {
        return Err(Error::Config(format!("key `{key}` needs {N} values, got {}", items.len())));
    }
    let mut out = [0.0; N];
    for (slot, raw) in out.iter_mut().zip(&items) {
        *slot = raw
            .parse()
            .map_err(|e| Error::Config(format!("key `{key}` value `{raw}`: {e}")))?;
    }
    Ok(out)
}

fn float_list(s: &Section, key: &str, default: &[f64]) -> Result<Vec<f64>> {
    if s.get(key).is_none() {
        return Ok(default.to_vec());
    }
    s.list(key)
        .iter()
        .map(|raw| raw.parse().map_err(|e| Error::Config(format!("key `{key}` value `{raw}`: {e}"))))
        .collect()
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("key `{key}` must be positive, got {v}")))
    }
}

fn parse_scenario(s: &Section) -> Result<Scenario> {
    let name = s
        .name
        .clone()
        .ok_or_else(|| Error::ConfigParse {
            line: s.line,
            message: "scenario section needs a name".into(),
        })?;
    if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        return Err(Error::ConfigParse {
            line: s.line,
            message: format!("scenario name `{name}` may only contain letters, digits, `_` and `-`"),
        });
    }
    parse_scenario_body(&name, s).map_err(|e| context(&name, e))
}

fn parse_scenario_body(name: &str, s: &Section) -> Result<Scenario> {
    let kind: ProblemKind = s.require("kind")?.parse()?;
    let allowed: BTreeSet<&str> = COMMON_KEYS.iter().chain(kind_keys(kind)).copied().collect();
    if let Some(k) = s.values.keys().find(|k| !allowed.contains(k.as_str())) {
        return Err(Error::Config(format!("unknown key `{k}` for kind `{kind}`")));
    }
    let mut domain = s.subsection("domain");
    if domain.is_empty() {
        domain.insert("shape".into(), "interval".into());
        domain.insert("extents".into(), "0,1".into());
    }
    let spec = DomainSpec::from_kv(&domain).map_err(|e| match e {
        Error::MissingKey(k) => Error::MissingKey(format!("domain.{k}")),
        other => other,
    })?;
    let h = positive("grid.h", s.parse_required("grid.h")?)?;
    let horizon = positive("time.T", s.parse_required("time.T")?)?;
    let dt = if kind == ProblemKind::Kernel {
        s.parse_or("time.dt", horizon)?
    } else {
        positive("time.dt", s.parse_required("time.dt")?)?
    };
    let exps = ExponentPair::new(
        s.parse_or("exps.p", f64::INFINITY)?,
        s.parse_or("exps.q", f64::INFINITY)?,
        spec.dim(),
        s.parse_or("exps.epsilon", DEFAULT_EPSILON)?,
    )?;
    let available = checks::checks_for(kind);
    let checks = match s.get("checks") {
        None => available.clone(),
        Some(_) => {
            let requested = s.list("checks");
            if let Some(bad) = requested.iter().find(|c| !available.contains(&c.as_str())) {
                return Err(Error::Config(match checks::find(bad) {
                    Some(_) => format!("check `{bad}` is not available for kind `{kind}`"),
                    None => format!("unknown check `{bad}`"),
                }));
            }
            available.iter().copied().filter(|c| requested.iter().any(|r| r == c)).collect()
        }
    };
    let plots = s.list("plots");
    if let Some(bad) = plots.iter().find(|p| !plots_for(kind).contains(&p.as_str())) {
        return Err(Error::Config(format!("plot `{bad}` is not available for kind `{kind}`")));
    }
    let model = match kind {
        ProblemKind::Rough => {
            let a0 = positive("coef.a0", s.parse_or("coef.a0", 1.0)?)?;
            let c0: f64 = s.parse_or("coef.c0", 1.5)?;
            if !(c0 >= 1.0) {
                return Err(Error::Config(format!("coef.c0 = {c0} must be at least 1")));
            }
            let coef = match s.get("coef.profile").unwrap_or("oscillating") {
                "constant" => CoefSpec::Constant,
                "oscillating" => CoefSpec::Oscillating {
                    omega: s.parse_or("coef.omega", 5.0)?,
                    wavenumber: s.parse_or("coef.wavenumber", 3.0)?,
                    phase: s.parse_or("coef.phase", 0.0)?,
                },
                "checkerboard" => CoefSpec::Checkerboard {
                    space_cells: s.parse_or("coef.cells", 8)?,
                    time_cells: s.parse_or("coef.time_cells", 8)?,
                },
                other => return Err(Error::Config(format!("unknown coef.profile `{other}`"))),
            };
            let decay_center = match s.get("decay.center") {
                None => None,
                Some(_) => {
                    let c = s.list("decay.center");
                    let parse = |i: usize| -> Result<f64> {
                        c.get(i)
                            .map_or(Ok(0.0), |v| v.parse().map_err(|e| Error::Config(format!("decay.center: {e}"))))
                    };
                    Some([parse(0)?, parse(1)?])
                }
            };
            let init_amplitude: f64 = s.parse_or("init.amplitude", 0.0)?;
            if !(init_amplitude >= 0.0) {
                return Err(Error::Config("init.amplitude must be nonnegative".into()));
            }
            Model::Rough(RoughSetup {
                a0,
                c0,
                coef,
                forcing: s.parse_or("forcing.value", 1.0)?,
                hole: s.parse_or("forcing.hole", 0.0)?,
                init_amplitude,
                sandwich_tol: s.parse("sandwich.tol")?,
                decay_radius: s.parse("decay.radius")?,
                decay_center,
            })
        }
        ProblemKind::Chemistry => {
            let d = floats(s, "chem.d", [0.5, 1.0, 1.5, 2.0])?;
            for v in d {
                positive("chem.d", v)?;
            }
            Model::Chemistry(ChemistrySetup {
                d,
                amplitudes: floats(s, "chem.amplitudes", [0.4, 0.2, 0.3, 0.1])?,
                aux_tol: positive("aux.tol", s.parse_or("aux.tol", 5e-3)?)?,
                energy_p: positive("energy.p", s.parse_or("energy.p", 1.0)?)?,
            })
        }
        ProblemKind::Skt => {
            let params = SktParams {
                d1: s.parse_or("skt.d1", 1.0)?,
                d2: s.parse_or("skt.d2", 0.5)?,
                sigma: s.parse_or("skt.sigma", 1.0)?,
                r_u: s.parse_or("skt.r_u", 1.0)?,
                r_v: s.parse_or("skt.r_v", 2.0)?,
                d11: s.parse_or("skt.d11", 1.0)?,
                d12: s.parse_or("skt.d12", 0.5)?,
                d21: s.parse_or("skt.d21", 0.5)?,
                d22: s.parse_or("skt.d22", 1.0)?,
            };
            params.validate()?;
            Model::Skt(SktSetup {
                params,
                u_amp: s.parse_or("skt.u_amp", 1.0)?,
                v_amp: s.parse_or("skt.v_amp", 0.8)?,
                aux_tol: positive("aux.tol", s.parse_or("aux.tol", 5e-3)?)?,
                energy_p: positive("energy.p", s.parse_or("energy.p", 1.0)?)?,
                delta: s.parse_or("duality.delta", duality::DEFAULT_DELTA)?,
            })
        }
        ProblemKind::Duality => {
            let mu_lo = positive("mu.lo", s.parse_or("mu.lo", 1.0)?)?;
            let mu_hi: f64 = s.parse_or("mu.hi", 3.0)?;
            if !(mu_hi >= mu_lo) {
                return Err(Error::Config(format!("mu.hi = {mu_hi} is below mu.lo = {mu_lo}")));
            }
            Model::Duality(DualitySetup {
                mu_lo,
                mu_hi,
                draws: s.parse_or("duality.draws", 20)?,
                deltas: float_list(s, "duality.deltas", &duality::DELTA_SWEEP)?,
                forcing: s.parse_or("forcing.value", 1.0)?,
                init_amplitude: s.parse_or("init.amplitude", 1.0)?,
            })
        }
        ProblemKind::Kernel => Model::Kernel(KernelSetup {
            radius: positive("kernel.R", s.parse_or("kernel.R", 1.0)?)?,
            a0: positive("kernel.a0", s.parse_or("kernel.a0", 1.0)?)?,
            c0: s.parse_or("kernel.c0", 2.0)?,
        }),
    };
    Ok(Scenario {
        name: name.to_string(),
        kind,
        disc: Discretization { spec, h, horizon, dt },
        exps,
        model,
        checks,
        plots,
        seed: s.parse("seed")?,
    })
}

pub fn parse_config(text: &str) -> Result<Config> {
    let sections = parse_sections(text)?;
    let mut seed = 0;
    let mut workers = None;
    let mut scenarios: Vec<Scenario> = Vec::new();
    for s in &sections {
        match s.header.as_str() {
            "run" => {
                if let Some(k) = s.values.keys().find(|k| !matches!(k.as_str(), "seed" | "workers")) {
                    return Err(Error::ConfigParse {
                        line: s.line,
                        message: format!("unknown key `{k}` in [run]"),
                    });
                }
                seed = s.parse_or("seed", 0)?;
                workers = s.parse("workers")?;
            }
            "scenario" => {
                let sc = parse_scenario(s)?;
                if scenarios.iter().any(|o| o.name == sc.name) {
                    return Err(Error::ConfigParse {
                        line: s.line,
                        message: format!("duplicate scenario `{}`", sc.name),
                    });
                }
                scenarios.push(sc);
            }
            other => {
                return Err(Error::ConfigParse {
                    line: s.line,
                    message: format!("unknown section `[{other}]`"),
                })
            }
        }
    }
    if scenarios.is_empty() {
        return Err(Error::Config("no [scenario NAME] sections".into()));
    }
    Ok(Config { seed, workers, scenarios })
}

pub fn load_config(path: &Path) -> Result<Config> {
    parse_config(&fs::read_to_string(path)?)
}

/// Nonnegative profile vanishing on the boundary, with a cosine modulation
/// centered at `shift` along the first axis.
pub fn bump(grid: &SpaceGrid, amplitude: f64, shift: f64) -> ScalarField {
    let pi = std::f64::consts::PI;
    let spec = grid.spec.clone();
    grid.map(|x| {
        let base = match spec {
            DomainSpec::Interval { lo, hi } => (pi * (x[0] - lo) / (hi - lo)).sin(),
            DomainSpec::Rectangle { lo, hi } => {
                (pi * (x[0] - lo[0]) / (hi[0] - lo[0])).sin() * (pi * (x[1] - lo[1]) / (hi[1] - lo[1])).sin()
            }
            DomainSpec::Disk { center, radius } => (1.0 - (dist(x, center) / radius).powi(2)).max(0.0),
        };
        amplitude * base.max(0.0) * (1.0 + 0.3 * (2.0 * pi * (x[0] - shift)).cos())
    })
}

/// Everything one scenario produced.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub name: String,
    pub seed: u64,
    pub rows: Vec<Certification>,
}

struct Artifacts<'a> {
    dir: Option<&'a Path>,
}

impl Artifacts<'_> {
    fn write(&self, file: &str, contents: &str) -> Result<()> {
        if let Some(d) = self.dir {
            fs::create_dir_all(d)?;
            fs::write(d.join(file), contents)?;
        }
        Ok(())
    }

    fn csv(&self, file: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        if let Some(d) = self.dir {
            fs::create_dir_all(d)?;
            let mut wr = csv::Writer::from_path(d.join(file))?;
            wr.write_record(header)?;
            for r in rows {
                wr.write_record(r)?;
            }
            wr.flush()?;
        }
        Ok(())
    }
}

fn rename(mut c: Certification, check: &str) -> Certification {
    c.check = check.to_string();
    c
}

/// Runs the requested checks; a failure to set up or solve becomes a single
/// FAIL row named `scenario`.
pub fn run_scenario(sc: &Scenario, seed: u64, dir: Option<&Path>) -> ScenarioOutcome {
    let art = Artifacts { dir };
    let result = match &sc.model {
        Model::Rough(m) => run_rough(sc, m, seed, &art),
        Model::Chemistry(m) => run_chemistry(sc, m, &art),
        Model::Skt(m) => run_skt(sc, m, &art),
        Model::Duality(m) => run_duality(sc, m, seed),
        Model::Kernel(m) => run_kernel(sc, m),
    };
    let rows = match result {
        Ok(rows) => rows
            .into_iter()
            .filter(|r| sc.wants(&r.check))
            .collect(),
        Err(e) => vec![failed("scenario", e)],
    };
    ScenarioOutcome {
        name: sc.name.clone(),
        seed,
        rows,
    }
}

pub fn rough_problem(sc: &Scenario, m: &RoughSetup, seed: u64, refined: bool) -> Result<RoughProblem> {
    let (grid, tg) = sc.disc.grids(refined)?;
    let profile = match m.coef {
        CoefSpec::Constant => CoefficientProfile::Constant(m.a0),
        CoefSpec::Oscillating { omega, wavenumber, phase } => CoefficientProfile::Oscillating {
            omega_t: omega,
            wavenumber,
            phase,
        },
        CoefSpec::Checkerboard { space_cells, time_cells } => CoefficientProfile::Checkerboard {
            seed,
            space_cells,
            time_cells,
        },
    };
    let coefficient = RoughCoefficient {
        a0: m.a0,
        c0: m.c0,
        profile,
    };
    let center = grid.spec.center();
    let forcing = SpaceTimeField::sample(&grid, &tg, |_, x| if dist(x, center) < m.hole { 0.0 } else { m.forcing });
    let w_init = bump(&grid, m.init_amplitude, center[0]);
    RoughProblem::new(grid, tg, coefficient, forcing, w_init)
}

fn input_norms(p: &RoughProblem, exps: &ExponentPair) -> Result<(f64, f64)> {
    let f = mixed_norm(&p.forcing, exps.p, exps.q, &p.grid, &p.time)?;
    let nonzero = |x: f64| if x > 0.0 { x } else { 1.0 };
    Ok((nonzero(f + c1_norm(&p.grid, &p.w_init)), nonzero(f + lipschitz_norm(&p.grid, &p.w_init))))
}

fn holder_options(a0: f64) -> HolderOptions {
    HolderOptions {
        a0,
        ..HolderOptions::default()
    }
}

fn holder_rows(est: &HolderEstimate, label: &str) -> Vec<Vec<String>> {
    est.scales
        .iter()
        .zip(&est.oscillations)
        .map(|(r, o)| vec![label.to_string(), r.to_string(), o.to_string()])
        .collect()
}

fn failed(check: &str, e: impl std::fmt::Display) -> Certification {
    Certification::new(check, f64::NAN, f64::NAN, Verdict::Fail).param("error", e.to_string())
}

/// Rows of `res`, or one FAIL row per name in `checks` carrying the error.
fn guarded(checks: &[&str], res: Result<Vec<Certification>>) -> Vec<Certification> {
    res.unwrap_or_else(|e| checks.iter().map(|c| failed(c, &e)).collect())
}

fn rough_decay(sc: &Scenario, m: &RoughSetup, problem: &RoughProblem, w: &SpaceTimeField, monotone: bool, art: &Artifacts) -> Result<Vec<Certification>> {
    let (grid, tg) = (&problem.grid, &problem.time);
    let center = grid.nearest_node(m.decay_center.unwrap_or(grid.spec.center()));
    let end = tg.n_levels() - 1;
    let b = regularity::beta(m.a0, grid.dim);
    let radius = m
        .decay_radius
        .unwrap_or_else(|| (0.8 * grid.boundary_distance[center]).min((tg.time(end) / b).sqrt()));
    let base = ParabolicCylinder::new(center, radius, end, b);
    let local = regularity::restrict_to_cylinder(grid, tg, &problem.forcing, &base);
    let f_norm = mixed_norm(&local, sc.exps.p, sc.exps.q, grid, tg)?;
    let out = regularity::dyadic_decay(grid, tg, w, &base, &sc.exps, f_norm, monotone)?;
    let seq = &out.sequence;
    let fit = regularity::loglog_slope(&seq.radii, &seq.o);
    let mut row = out.certification().param("radius", radius);
    if let Some((slope, _, _)) = fit {
        row = row.param("slope", slope);
    }
    art.csv(
        "decay.csv",
        &["k", "radius", "oscillation", "minimum"],
        (0..seq.o.len()).map(|k| vec![k.to_string(), seq.radii[k].to_string(), seq.o[k].to_string(), seq.m[k].to_string()]),
    )?;
    if sc.plots("decay") {
        let pts: Vec<(f64, f64)> = seq.radii.iter().copied().zip(seq.o.iter().copied()).collect();
        let title = match fit {
            Some((slope, _, _)) => format!("oscillation decay, slope = {slope}"),
            None => "oscillation decay, slope = n/a".to_string(),
        };
        art.write(
            "decay.svg",
            &plot::loglog(&title, "log radius", "log oscillation", &pts, fit.map(|(s, c, _)| (s, c))),
        )?;
    }
    Ok(vec![row])
}

fn run_rough(sc: &Scenario, m: &RoughSetup, seed: u64, art: &Artifacts) -> Result<Vec<Certification>> {
    let problem = rough_problem(sc, m, seed, false)?;
    let sol = rough::solve_rough(&problem)?;
    let (grid, tg) = (&problem.grid, &problem.time);
    let mono = rough::monotonicity_check(&sol);
    let mut rows = vec![mono.certification()];
    let mut snap = Vec::new();
    rough::write_snapshot(&mut snap, grid, sol.w.last())?;
    art.write("w_final.txt", &String::from_utf8_lossy(&snap))?;

    if sc.wants("sandwich") {
        rows.extend(guarded(
            &["sandwich"],
            (|| {
                let tol = match m.sandwich_tol {
                    Some(t) => t,
                    None => rough::calibrate_discretization_constant(grid.h, tg.dt, tg.horizon)? * (grid.h * grid.h + tg.dt),
                };
                Ok(vec![rough::sandwich_check(&sol, &problem, tol)?.certification()])
            })(),
        ));
    }
    if sc.wants("decay") || sc.plots("decay") {
        rows.extend(guarded(&["decay"], rough_decay(sc, m, &problem, &sol.w, mono.passed, art)));
    }

    let opts = holder_options(m.a0);
    let coarse_holder = if sc.wants("holder") || sc.plots("holder") {
        Some(regularity::holder_fit(grid, tg, &sol.w, &opts).map_err(|e| e.to_string()))
    } else {
        None
    };
    if let (Some(Ok(est)), true) = (&coarse_holder, sc.plots("holder")) {
        let q = regularity::pair_quotients(grid, tg, &sol.w, est.alpha, &opts);
        let (edges, counts) = plot::bin(&q, 24);
        art.write(
            "holder.svg",
            &plot::histogram(&format!("Hölder quotients, alpha = {:.4}", est.alpha), "quotient", &edges, &counts),
        )?;
    }
    if sc.plots("boundary") {
        let pts: Vec<(f64, f64)> = sol
            .w
            .last()
            .iter()
            .zip(&grid.boundary_distance)
            .map(|(w, d)| (*d, w / d.powf(sc.exps.gamma_tilde)))
            .collect();
        art.write("boundary.svg", &plot::scatter("boundary decay w / d^gamma_tilde", "d_x", "ratio", &pts))?;
    }

    const TWO_GRID: [&str; 3] = ["holder", "boundary_decay", "short_time"];
    if !TWO_GRID.iter().any(|c| sc.wants(c)) {
        return Ok(rows);
    }
    let fine = rough_problem(sc, m, seed, true).and_then(|f| Ok((rough::solve_rough(&f)?, f)));
    let (fsol, fine) = match fine {
        Ok(v) => v,
        Err(e) => {
            rows.extend(TWO_GRID.iter().map(|c| failed(c, &e)));
            return Ok(rows);
        }
    };
    let fmono = rough::monotonicity_check(&fsol);
    let (c_norm, c_lip) = input_norms(&problem, &sc.exps)?;
    let (f_norm, f_lip) = input_norms(&fine, &sc.exps)?;
    match &coarse_holder {
        Some(Ok(est)) => rows.extend(guarded(
            &["holder"],
            (|| {
                let fest = regularity::holder_fit(&fine.grid, &fine.time, &fsol.w, &opts)?;
                let mut table = holder_rows(est, "coarse");
                table.extend(holder_rows(&fest, "fine"));
                art.csv("holder.csv", &["grid", "scale", "oscillation"], table)?;
                Ok(vec![regularity::holder_certification(est, c_norm, &fest, f_norm, mono.passed && fmono.passed)])
            })(),
        )),
        Some(Err(e)) => rows.push(failed("holder", e)),
        None => {}
    }
    if sc.wants("boundary_decay") {
        let qc = regularity::boundary_decay_constant(grid, &sol.w, &sc.exps, c_lip);
        let qf = regularity::boundary_decay_constant(&fine.grid, &fsol.w, &sc.exps, f_lip);
        rows.push(cert::stability("boundary_decay", qc, qf).param("gamma_tilde", sc.exps.gamma_tilde));
    }
    if sc.wants("short_time") {
        let qc = regularity::short_time_constant(tg, &sol.w, &sc.exps, c_norm);
        let qf = regularity::short_time_constant(&fine.time, &fsol.w, &sc.exps, f_norm);
        rows.push(cert::stability("short_time", qc, qf).param("gamma", sc.exps.gamma));
    }
    Ok(rows)
}

fn write_norms(art: &Artifacts, sc: &Scenario, grid: &SpaceGrid, tg: &TimeGrid, species: &[(&str, &SpaceTimeField)]) -> Result<()> {
    let mut table = Vec::new();
    let mut sup_points = Vec::new();
    for (name, u) in species {
        for (n, [l1, l2, linf]) in reactions::norm_series(grid, u).into_iter().enumerate() {
            table.push(vec![
                tg.time(n).to_string(),
                name.to_string(),
                l1.to_string(),
                l2.to_string(),
                linf.to_string(),
            ]);
            sup_points.push((tg.time(n), linf));
        }
    }
    art.csv("norms.csv", &["t", "species", "l1", "l2", "linf"], table)?;
    if sc.plots("norms") {
        art.write("norms.svg", &plot::scatter("sup norms over time", "t", "sup", &sup_points))?;
    }
    Ok(())
}

fn aux_holder(grid: &SpaceGrid, tg: &TimeGrid, w: &SpaceTimeField, a0: f64) -> Result<HolderEstimate> {
    regularity::holder_fit(grid, tg, w, &holder_options(a0))
}

fn interpolation_alpha(est: &HolderEstimate) -> f64 {
    est.alpha.clamp(0.05, 0.95)
}

fn chemistry_state(grid: &SpaceGrid, m: &ChemistrySetup) -> ChemistryState {
    let shifts = [0.3, 0.6, 0.5, 0.8];
    ChemistryState {
        u: std::array::from_fn(|i| bump(grid, m.amplitudes[i], shifts[i])),
        d: m.d,
    }
}

fn run_chemistry(sc: &Scenario, m: &ChemistrySetup, art: &Artifacts) -> Result<Vec<Certification>> {
    let (grid, tg) = sc.disc.grids(false)?;
    let run = reactions::run_chemistry(&grid, &tg, &chemistry_state(&grid, m))?;
    let mut rows = run.structure_certifications();
    let aux = reactions::chemistry_aux_check(&run, m.aux_tol);
    rows.extend(aux.certifications());
    let mono = rough::field_monotonicity(&aux.w);
    rows.push(rename(mono.certification(), "aux_monotonicity"));
    let names = ["u1", "u2", "u3", "u4"];
    let species: Vec<(&str, &SpaceTimeField)> = names.iter().copied().zip(run.u.iter()).collect();
    write_norms(art, sc, &grid, &tg, &species)?;

    const TWO_GRID: [&str; 3] = ["aux_holder", "energy_inequality", "interpolation"];
    if !TWO_GRID.iter().any(|c| sc.wants(c)) {
        return Ok(rows);
    }
    let fine = sc.disc.grids(true).and_then(|(fg, ft)| {
        let frun = reactions::run_chemistry(&fg, &ft, &chemistry_state(&fg, m))?;
        Ok((fg, ft, frun))
    });
    let (fg, ft, frun) = match fine {
        Ok(v) => v,
        Err(e) => {
            rows.extend(TWO_GRID.iter().map(|c| failed(c, &e)));
            return Ok(rows);
        }
    };
    let faux = reactions::chemistry_aux_check(&frun, m.aux_tol);
    let a0 = aux.a_bounds.0;
    if sc.wants("aux_holder") || sc.wants("interpolation") {
        rows.extend(guarded(
            &["aux_holder", "interpolation"],
            (|| {
                let hc = aux_holder(&grid, &tg, &aux.w, a0)?;
                let hf = aux_holder(&fg, &ft, &faux.w, a0)?;
                let fmono = rough::field_monotonicity(&faux.w);
                let mut out = vec![rename(
                    regularity::holder_certification(&hc, 1.0, &hf, 1.0, mono.passed && fmono.passed),
                    "aux_holder",
                )];
                let alpha = interpolation_alpha(&hc);
                let total = |r: &reactions::ChemistryRun| -> Result<SpaceTimeField> {
                    SpaceTimeField::from_levels((0..r.time.n_levels()).map(|n| r.total(n)).collect())
                };
                let ic = reactions::interpolation_check(&grid, &total(&run)?, &aux.w, alpha, InterpolationKind::Chemistry)?;
                let i_f = reactions::interpolation_check(&fg, &total(&frun)?, &faux.w, alpha, InterpolationKind::Chemistry)?;
                out.push(
                    cert::stability("interpolation", ic.constant, i_f.constant)
                        .param("alpha", alpha)
                        .param("exponent", ic.exponent),
                );
                Ok(out)
            })(),
        ));
    }
    if sc.wants("energy_inequality") {
        rows.extend(guarded(
            &["energy_inequality"],
            (|| {
                let ec = reactions::energy_inequality_check(&run, m.energy_p)?;
                let ef = reactions::energy_inequality_check(&frun, m.energy_p)?;
                Ok(vec![cert::stability("energy_inequality", ec.c_p, ef.c_p).param("p", m.energy_p)])
            })(),
        ));
    }
    Ok(rows)
}

fn skt_state(grid: &SpaceGrid, m: &SktSetup) -> SktState {
    SktState {
        u: bump(grid, m.u_amp, 0.4),
        v: bump(grid, m.v_amp, 0.6),
        params: m.params,
    }
}

fn duality_feed(grid: &SpaceGrid, run: &reactions::SktRun, aux: &reactions::SktAux, exps: &ExponentPair, delta: f64) -> Result<duality::DualityReport> {
    let basis = SpectralBasis::compute(grid)?;
    let f = run.u.map(|u| run.params.r_u * u.max(0.0));
    let problem = DualityProblem::new(grid, run.time, aux.nu.clone(), f, run.u.level(0).to_vec())?;
    duality::duality_bound_check(grid, &basis, &problem, &aux.u_plus_m(run), exps, delta)
}

fn run_skt(sc: &Scenario, m: &SktSetup, art: &Artifacts) -> Result<Vec<Certification>> {
    let (grid, tg) = sc.disc.grids(false)?;
    let run = reactions::run_skt(&grid, &tg, &skt_state(&grid, m))?;
    let mut rows = run.structure_certifications();
    let aux = reactions::skt_aux_check(&run, m.aux_tol)?;
    rows.extend(aux.certifications());
    let mono = rough::field_monotonicity(&aux.w);
    rows.push(rename(mono.certification(), "aux_monotonicity"));
    write_norms(art, sc, &grid, &tg, &[("u", &run.u), ("v", &run.v), ("m", &aux.m)])?;

    const TWO_GRID: [&str; 4] = ["aux_holder", "energy_inequality", "interpolation", "duality_feed"];
    if !TWO_GRID.iter().any(|c| sc.wants(c)) {
        return Ok(rows);
    }
    let fine = sc.disc.grids(true).and_then(|(fg, ft)| {
        let frun = reactions::run_skt(&fg, &ft, &skt_state(&fg, m))?;
        let faux = reactions::skt_aux_check(&frun, m.aux_tol)?;
        Ok((fg, ft, frun, faux))
    });
    let (fg, ft, frun, faux) = match fine {
        Ok(v) => v,
        Err(e) => {
            rows.extend(TWO_GRID.iter().map(|c| failed(c, &e)));
            return Ok(rows);
        }
    };
    let a0 = 1.0 / aux.nu_bounds.1;
    if sc.wants("aux_holder") || sc.wants("interpolation") {
        rows.extend(guarded(
            &["aux_holder", "interpolation"],
            (|| {
                let hc = aux_holder(&grid, &tg, &aux.w, a0)?;
                let hf = aux_holder(&fg, &ft, &faux.w, a0)?;
                let fmono = rough::field_monotonicity(&faux.w);
                let mut out = vec![rename(
                    regularity::holder_certification(&hc, 1.0, &hf, 1.0, mono.passed && fmono.passed),
                    "aux_holder",
                )];
                let alpha = interpolation_alpha(&hc);
                let ic = reactions::interpolation_check(&grid, &run.u, &aux.w, alpha, InterpolationKind::Skt)?;
                let i_f = reactions::interpolation_check(&fg, &frun.u, &faux.w, alpha, InterpolationKind::Skt)?;
                out.push(
                    cert::stability("interpolation", ic.constant, i_f.constant)
                        .param("alpha", alpha)
                        .param("exponent", ic.exponent),
                );
                Ok(out)
            })(),
        ));
    }
    if sc.wants("energy_inequality") {
        rows.extend(guarded(
            &["energy_inequality"],
            (|| {
                let ec = run.energy_constant(m.energy_p)?;
                let ef = frun.energy_constant(m.energy_p)?;
                Ok(vec![cert::stability("energy_inequality", ec.c_p, ef.c_p).param("p", m.energy_p)])
            })(),
        ));
    }
    if sc.wants("duality_feed") {
        rows.extend(guarded(
            &["duality_feed"],
            (|| {
                let dc = duality_feed(&grid, &run, &aux, &sc.exps, m.delta)?;
                let df = duality_feed(&fg, &frun, &faux, &sc.exps, m.delta)?;
                Ok(vec![rename(duality::bound_certification(&dc, &df), "duality_feed")])
            })(),
        ));
    }
    Ok(rows)
}

fn duality_problem(grid: &SpaceGrid, tg: TimeGrid, mu: SpaceTimeField, m: &DualitySetup) -> Result<DualityProblem> {
    let f = SpaceTimeField::constant(grid, &tg, m.forcing);
    let u0 = bump(grid, m.init_amplitude, grid.spec.center()[0]);
    DualityProblem::new(grid, tg, mu, f, u0)
}

fn run_duality(sc: &Scenario, m: &DualitySetup, seed: u64) -> Result<Vec<Certification>> {
    let (grid, tg) = sc.disc.grids(false)?;
    let basis = SpectralBasis::compute(&grid)?;
    let mut rows = Vec::new();
    if sc.wants("duality_contraction") {
        let mut worst: Option<(usize, duality::ContractionReport)> = None;
        for draw in 0..m.draws {
            let mu = duality::random_mu(&grid, &tg, m.mu_lo, m.mu_hi, seed.wrapping_add(draw as u64));
            let problem = duality_problem(&grid, tg, mu, m)?;
            let u = duality::solve_skew(&grid, &problem)?;
            let scaled = duality::rescale_time(&problem)?;
            let rep = duality::contraction_check(&grid, &basis, &scaled.time, &scaled.mu, &u);
            let margin = rep.ratio - rep.bound;
            if worst.map_or(true, |(_, w)| margin > w.ratio - w.bound) {
                worst = Some((draw, rep));
            }
        }
        if let Some((draw, rep)) = worst {
            rows.push(
                rep.certification()
                    .param("draws", m.draws)
                    .param("worst_draw", draw)
                    .param("lambda", 1.0 - rep.bound),
            );
        }
    }
    if sc.wants("modewise_contraction") {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = tg.n_levels() - 1;
        let mut worst = 0.0f64;
        for &ev in &basis.eigenvalues {
            let g: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            worst = worst.max(duality::modewise_contraction(ev, tg.dt, &g));
        }
        rows.push(Certification::at_most("modewise_contraction", worst, 1.0 + 1e-10).param("modes", basis.len()));
    }
    if sc.wants("duality_bound") {
        let (fg, ft) = sc.disc.grids(true)?;
        let fbasis = SpectralBasis::compute(&fg)?;
        let c0 = m.mu_hi / m.mu_lo;
        let coef = RoughCoefficient::checkerboard(m.mu_lo, c0, seed, 8, 8);
        let pc = duality_problem(&grid, tg, coef.sample(&grid, &tg)?, m)?;
        let pf = duality_problem(&fg, ft, coef.sample(&fg, &ft)?, m)?;
        let uc = duality::solve_skew(&grid, &pc)?;
        let uf = duality::solve_skew(&fg, &pf)?;
        for &delta in &m.deltas {
            let rc = duality::duality_bound_check(&grid, &basis, &pc, &uc, &sc.exps, delta)?;
            let rf = duality::duality_bound_check(&fg, &fbasis, &pf, &uf, &sc.exps, delta)?;
            rows.push(duality::bound_certification(&rc, &rf));
        }
    }
    Ok(rows)
}

fn run_kernel(sc: &Scenario, m: &KernelSetup) -> Result<Vec<Certification>> {
    let mut rows = Vec::new();
    if sc.wants("kernel_lower_bound") || sc.wants("kernel_comparator") {
        let ball = if sc.disc.spec.dim() == 1 {
            DomainSpec::interval(-m.radius, m.radius)
        } else {
            DomainSpec::disk([0.0, 0.0], m.radius)
        };
        let grid = SpaceGrid::new(ball, sc.disc.h)?;
        let basis = SpectralBasis::compute(&grid)?;
        let rep = heat_kernel::lower_bound_check(&grid, &basis, m.radius, m.a0, m.c0)?;
        rows.extend(rep.certifications(m.radius, m.a0, m.c0));
    }
    if sc.wants("kernel_moment") || sc.wants("kernel_boundary_gaussian") {
        rows.extend(heat_kernel::upper_bound_checks(&sc.disc.spec, sc.disc.h, sc.exps.epsilon, sc.disc.horizon)?);
    }
    Ok(rows)
}

/// Overrides applied on top of a parsed [`Config`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_root: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub ledger: Ledger,
    pub outcomes: Vec<ScenarioOutcome>,
}

/// `--out`, then `$ROUGHCERT_OUT`, then `./roughcert-out`.
pub fn resolve_out_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
}

/// Fresh `run-<unix seconds>[-n]` directory below `root`.
pub fn fresh_run_dir(root: &Path) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    for n in 0.. {
        let name = if n == 0 { format!("run-{secs}") } else { format!("run-{secs}-{n}") };
        let path = root.join(name);
        match fs::create_dir(&path) {
            Ok(()) => return Ok(path),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

pub fn scenario_seed(config: &Config, sc: &Scenario, opts: &RunOptions) -> u64 {
    opts.seed.or(sc.seed).unwrap_or(config.seed)
}

/// Runs every scenario and returns the ledger rows in scenario order.
pub fn execute(config: &Config, opts: &RunOptions, dir: Option<&Path>) -> Result<Vec<ScenarioOutcome>> {
    let workers = opts.workers.or(config.workers).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        config
            .scenarios
            .par_iter()
            .map(|sc| {
                let sub = dir.map(|d| d.join(&sc.name));
                run_scenario(sc, scenario_seed(config, sc, opts), sub.as_deref())
            })
            .collect()
    }))
}

pub fn ledger_of(outcomes: &[ScenarioOutcome]) -> Ledger {
    let mut ledger = Ledger::default();
    for o in outcomes {
        ledger.extend(o.rows.iter().map(|c| LedgerRow::from_cert(&o.name, o.seed, c)));
    }
    ledger
}

/// Creates the run directory, executes, and writes `ledger.csv` and a copy of
/// the resolved settings.
pub fn run_config(config: &Config, opts: &RunOptions) -> Result<RunSummary> {
    let root = resolve_out_root(opts.out_root.clone());
    let dir = fresh_run_dir(&root)?;
    let outcomes = execute(config, opts, Some(&dir))?;
    let ledger = ledger_of(&outcomes);
    ledger.save(&dir.join("ledger.csv"))?;
    let mut summary = String::new();
    for o in &outcomes {
        let _ = writeln!(summary, "{} seed={} rows={}", o.name, o.seed, o.rows.len());
    }
    fs::write(dir.join("scenarios.txt"), summary)?;
    Ok(RunSummary { dir, ledger, outcomes })
}

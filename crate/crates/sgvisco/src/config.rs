//! Run configuration files: flat `[section]` / `key = value` text.
//!
//! Unknown sections or keys are rejected with their line number, as are
//! out-of-range values. Absent keys take the documented defaults (see the
//! README table). `to_config_string` emits the canonical form, which
//! parses back to an identical configuration.

use std::path::{Path, PathBuf};

use crate::energy::{EnergyKind, EnergyModel};
use crate::error::{Error, Result};
use crate::evolution::{GivenAs, InitOutcome, Scheme, SolverConfig};
use crate::experiments::{InitialPreset, LimitStudy, Roughening, SweepParam};
use crate::field::{RealField, Rank, SpectralGrid};
use crate::ops::DealiasRule;
use crate::snapshot;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub d: usize,
    pub n: usize,
    /// Galerkin cutoff; default floor(n/3), matching the two-thirds rule
    pub cutoff: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    pub kind: EnergyKind,
    /// optional override of the semiconvexity shift (negative controls)
    pub k_override: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsSection {
    pub nu: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub dealias: DealiasRule,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialKind {
    Zero,
    TwoMode,
    GaussianBump,
    File,
}

impl InitialKind {
    fn name(&self) -> &'static str {
        match self {
            InitialKind::Zero => "zero",
            InitialKind::TwoMode => "two_mode",
            InitialKind::GaussianBump => "gaussian_bump",
            InitialKind::File => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub u_amplitude: f64,
    pub width: f64,
    pub seed: u64,
    /// motion snapshot (kind = file); exactly one of y_file/f_file
    pub y_file: Option<PathBuf>,
    /// deformation-gradient snapshot (kind = file, curl-free)
    pub f_file: Option<PathBuf>,
    pub u_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub record_every: usize,
    pub snapshot_every: usize,
    pub out_dir: PathBuf,
    pub lr_exponents: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySection {
    pub sweep: SweepParam,
    pub values: Vec<f64>,
    pub r_exponents: Vec<f64>,
    pub sample_times: Vec<f64>,
    /// Galerkin refinement cutoffs (study-galerkin)
    pub cutoffs: Vec<usize>,
    pub roughen: bool,
    pub roughen_epsilon: f64,
    pub roughen_amplitude: f64,
    /// integrate the reference with dt / factor (robustness check)
    pub reference_dt_refine: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSection,
    pub model: ModelSection,
    pub physics: PhysicsSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    pub output: OutputSection,
    pub study: Option<StudySection>,
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Sections {
    entries: Vec<(String, String, Entry)>,
}

impl Sections {
    fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        for (s, k, e) in &mut self.entries {
            if s == section && k == key && !e.used {
                e.used = true;
                return Some((e.line, e.value.clone()));
            }
        }
        None
    }

    fn unused(&self) -> Option<(&str, &str, usize)> {
        self.entries
            .iter()
            .find(|(_, _, e)| !e.used)
            .map(|(s, k, e)| (s.as_str(), k.as_str(), e.line))
    }

    fn has_section(&self, section: &str) -> bool {
        self.entries.iter().any(|(s, _, _)| s == section)
    }
}

const KNOWN_SECTIONS: &[&str] = &["grid", "model", "physics", "time", "initial", "output", "study"];

fn split_sections(text: &str) -> Result<Sections> {
    let mut entries = Vec::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config { line: line_no, message: "unterminated section header".into() })?
                .trim()
                .to_string();
            if !KNOWN_SECTIONS.contains(&name.as_str()) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("unknown section [{name}]"),
                });
            }
            section = name;
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        if section.is_empty() {
            return Err(Error::Config { line: line_no, message: "entry before any [section]".into() });
        }
        entries.push((
            section.clone(),
            key.trim().to_string(),
            Entry { line: line_no, value: value.trim().to_string(), used: false },
        ));
    }
    Ok(Sections { entries })
}

fn parse_f64(section: &str, key: &str, line: usize, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| Error::Config {
        line,
        message: format!("[{section}].{key}: expected a number, got '{value}'"),
    })
}

fn parse_usize(section: &str, key: &str, line: usize, value: &str) -> Result<usize> {
    value.parse::<usize>().map_err(|_| Error::Config {
        line,
        message: format!("[{section}].{key}: expected a nonnegative integer, got '{value}'"),
    })
}

fn parse_bool(section: &str, key: &str, line: usize, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config {
            line,
            message: format!("[{section}].{key}: expected true or false, got '{value}'"),
        }),
    }
}

fn parse_f64_list(section: &str, key: &str, line: usize, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_f64(section, key, line, v.trim()))
        .collect()
}

fn parse_usize_list(section: &str, key: &str, line: usize, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|v| parse_usize(section, key, line, v.trim()))
        .collect()
}

fn range_err(section: &str, key: &str, line: usize, message: &str) -> Error {
    Error::Config { line, message: format!("[{section}].{key}: {message}") }
}

impl RunConfig {
    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut sections = split_sections(text)?;

        // [grid]
        let (dl, d) = sections
            .take("grid", "d")
            .ok_or_else(|| Error::Config { line: 0, message: "[grid].d is required".into() })?;
        let d = parse_usize("grid", "d", dl, &d)?;
        if !(1..=3).contains(&d) {
            return Err(range_err("grid", "d", dl, "must be 1, 2 or 3"));
        }
        let (nl, n) = sections
            .take("grid", "n")
            .ok_or_else(|| Error::Config { line: 0, message: "[grid].n is required".into() })?;
        let n = parse_usize("grid", "n", nl, &n)?;
        if n < 4 || n % 2 != 0 {
            return Err(range_err("grid", "n", nl, "must be even and >= 4"));
        }
        let cutoff = match sections.take("grid", "cutoff") {
            Some((l, v)) => {
                let c = parse_usize("grid", "cutoff", l, &v)?;
                if c == 0 || c > n / 2 - 1 {
                    return Err(range_err("grid", "cutoff", l, "must be in 1..=n/2-1"));
                }
                c
            }
            None => (n / 3).max(1),
        };
        let grid = GridSection { d, n, cutoff };

        // [model]
        let (kl, kind) = sections
            .take("model", "kind")
            .ok_or_else(|| Error::Config { line: 0, message: "[model].kind is required".into() })?;
        let kind = EnergyKind::parse(&kind)
            .map_err(|e| Error::Config { line: kl, message: e.to_string() })?;
        let k_override = match sections.take("model", "K") {
            Some((l, v)) => {
                let k = parse_f64("model", "K", l, &v)?;
                if k < 0.0 {
                    return Err(range_err("model", "K", l, "must be >= 0"));
                }
                Some(k)
            }
            None => None,
        };
        let model = ModelSection { kind, k_override };

        // [physics]
        let nu = match sections.take("physics", "nu") {
            Some((l, v)) => {
                let nu = parse_f64("physics", "nu", l, &v)?;
                if nu < 0.0 || !nu.is_finite() {
                    return Err(range_err("physics", "nu", l, "must be finite and >= 0"));
                }
                nu
            }
            None => 1.0,
        };
        let delta = match sections.take("physics", "delta") {
            Some((l, v)) => {
                let delta = parse_f64("physics", "delta", l, &v)?;
                if delta < 0.0 || !delta.is_finite() {
                    return Err(range_err("physics", "delta", l, "must be finite and >= 0"));
                }
                delta
            }
            None => 0.01,
        };
        let physics = PhysicsSection { nu, delta };

        // [time]
        let dt = match sections.take("time", "dt") {
            Some((l, v)) => {
                let dt = parse_f64("time", "dt", l, &v)?;
                if dt <= 0.0 || !dt.is_finite() {
                    return Err(range_err("time", "dt", l, "must be finite and > 0"));
                }
                dt
            }
            None => 1e-3,
        };
        let t_end = match sections.take("time", "t_end") {
            Some((l, v)) => {
                let t = parse_f64("time", "t_end", l, &v)?;
                if t < 0.0 || !t.is_finite() {
                    return Err(range_err("time", "t_end", l, "must be finite and >= 0"));
                }
                t
            }
            None => 1.0,
        };
        let scheme = match sections.take("time", "scheme") {
            Some((l, v)) => {
                Scheme::parse(&v).map_err(|e| Error::Config { line: l, message: e.to_string() })?
            }
            None => Scheme::ImexCnAb2,
        };
        let dealias = match sections.take("time", "dealias") {
            Some((l, v)) => match v.as_str() {
                "two_thirds" => DealiasRule::TwoThirds,
                "half" => DealiasRule::Half,
                other => {
                    return Err(Error::Config {
                        line: l,
                        message: format!("[time].dealias: unknown rule '{other}'"),
                    })
                }
            },
            None => DealiasRule::TwoThirds,
        };
        let time = TimeSection { dt, t_end, scheme, dealias };

        // [initial]
        let kind = match sections.take("initial", "kind") {
            Some((l, v)) => match v.as_str() {
                "zero" => InitialKind::Zero,
                "two_mode" => InitialKind::TwoMode,
                "gaussian_bump" => InitialKind::GaussianBump,
                "file" => InitialKind::File,
                other => {
                    return Err(Error::Config {
                        line: l,
                        message: format!("[initial].kind: unknown preset '{other}'"),
                    })
                }
            },
            None => InitialKind::TwoMode,
        };
        let amplitude = match sections.take("initial", "amplitude") {
            Some((l, v)) => parse_f64("initial", "amplitude", l, &v)?,
            None => 0.2,
        };
        let u_amplitude = match sections.take("initial", "u_amplitude") {
            Some((l, v)) => parse_f64("initial", "u_amplitude", l, &v)?,
            None => 0.1,
        };
        let width = match sections.take("initial", "width") {
            Some((l, v)) => {
                let w = parse_f64("initial", "width", l, &v)?;
                if w <= 0.0 {
                    return Err(range_err("initial", "width", l, "must be > 0"));
                }
                w
            }
            None => 0.08,
        };
        let seed = match sections.take("initial", "seed") {
            Some((l, v)) => parse_usize("initial", "seed", l, &v)? as u64,
            None => 0,
        };
        let y_file = sections.take("initial", "y_file").map(|(_, v)| PathBuf::from(v));
        let f_file = sections.take("initial", "f_file").map(|(_, v)| PathBuf::from(v));
        let u_file = sections.take("initial", "u_file").map(|(_, v)| PathBuf::from(v));
        if kind == InitialKind::File {
            match (&y_file, &f_file) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config {
                        line: 0,
                        message: "[initial]: give exactly one of y_file or f_file".into(),
                    })
                }
                (None, None) => {
                    return Err(Error::Config {
                        line: 0,
                        message: "[initial].kind = file requires y_file or f_file".into(),
                    })
                }
                _ => {}
            }
        }
        let initial =
            InitialSection { kind, amplitude, u_amplitude, width, seed, y_file, f_file, u_file };

        // [output]
        let record_every = match sections.take("output", "record_every") {
            Some((l, v)) => {
                let r = parse_usize("output", "record_every", l, &v)?;
                if r == 0 {
                    return Err(range_err("output", "record_every", l, "must be >= 1"));
                }
                r
            }
            None => 10,
        };
        let snapshot_every = match sections.take("output", "snapshot_every") {
            Some((l, v)) => parse_usize("output", "snapshot_every", l, &v)?,
            None => 0,
        };
        let out_dir = match sections.take("output", "out_dir") {
            Some((_, v)) => PathBuf::from(v),
            None => PathBuf::from("out"),
        };
        let lr_exponents = match sections.take("output", "lr_exponents") {
            Some((l, v)) => {
                let list = parse_f64_list("output", "lr_exponents", l, &v)?;
                if list.iter().any(|&r| r < 1.0) {
                    return Err(range_err("output", "lr_exponents", l, "exponents must be >= 1"));
                }
                list
            }
            None => Vec::new(),
        };
        let output = OutputSection { record_every, snapshot_every, out_dir, lr_exponents };

        // [study], optional
        let study = if sections.has_section("study") {
            let sweep = match sections.take("study", "sweep") {
                Some((l, v)) => SweepParam::parse(&v)
                    .map_err(|e| Error::Config { line: l, message: e.to_string() })?,
                None => SweepParam::Delta,
            };
            let values = match sections.take("study", "values") {
                Some((l, v)) => {
                    let values = parse_f64_list("study", "values", l, &v)?;
                    if values.iter().any(|&x| x <= 0.0) {
                        return Err(range_err("study", "values", l, "values must be > 0"));
                    }
                    if values.windows(2).any(|w| w[1] >= w[0]) {
                        return Err(range_err(
                            "study",
                            "values",
                            l,
                            "values must be strictly decreasing",
                        ));
                    }
                    values
                }
                None => vec![1e-2, 5e-3, 2.5e-3, 1.25e-3],
            };
            let r_exponents = match sections.take("study", "r_exponents") {
                Some((l, v)) => {
                    let list = parse_f64_list("study", "r_exponents", l, &v)?;
                    if list.iter().any(|&r| r < 1.0) {
                        return Err(range_err("study", "r_exponents", l, "must be >= 1"));
                    }
                    list
                }
                None => vec![1.5],
            };
            let sample_times = match sections.take("study", "sample_times") {
                Some((l, v)) => {
                    let list = parse_f64_list("study", "sample_times", l, &v)?;
                    if list.iter().any(|&t| t <= 0.0) {
                        return Err(range_err("study", "sample_times", l, "must be > 0"));
                    }
                    list
                }
                None => vec![0.25, 0.5, 1.0],
            };
            let cutoffs = match sections.take("study", "cutoffs") {
                Some((l, v)) => parse_usize_list("study", "cutoffs", l, &v)?,
                None => vec![8, 16, 32],
            };
            let roughen = match sections.take("study", "roughen") {
                Some((l, v)) => parse_bool("study", "roughen", l, &v)?,
                None => false,
            };
            let roughen_epsilon = match sections.take("study", "roughen_epsilon") {
                Some((l, v)) => {
                    let e = parse_f64("study", "roughen_epsilon", l, &v)?;
                    if !(0.0..0.5).contains(&e) {
                        return Err(range_err("study", "roughen_epsilon", l, "must be in [0, 0.5)"));
                    }
                    e
                }
                None => 0.1,
            };
            let roughen_amplitude = match sections.take("study", "roughen_amplitude") {
                Some((l, v)) => parse_f64("study", "roughen_amplitude", l, &v)?,
                None => 0.05,
            };
            let reference_dt_refine = match sections.take("study", "reference_dt_refine") {
                Some((l, v)) => {
                    let f = parse_usize("study", "reference_dt_refine", l, &v)?;
                    if f == 0 {
                        return Err(range_err("study", "reference_dt_refine", l, "must be >= 1"));
                    }
                    Some(f as u32)
                }
                None => None,
            };
            Some(StudySection {
                sweep,
                values,
                r_exponents,
                sample_times,
                cutoffs,
                roughen,
                roughen_epsilon,
                roughen_amplitude,
                reference_dt_refine,
            })
        } else {
            None
        };

        if let Some((section, key, line)) = sections.unused() {
            return Err(Error::Config {
                line,
                message: format!("unknown key [{section}].{key}"),
            });
        }

        Ok(RunConfig { grid, model, physics, time, initial, output, study })
    }

    /// Canonical serialization; parsing it back yields an identical config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        s.push_str("[grid]\n");
        s.push_str(&format!("d = {}\n", self.grid.d));
        s.push_str(&format!("n = {}\n", self.grid.n));
        s.push_str(&format!("cutoff = {}\n", self.grid.cutoff));
        s.push_str("\n[model]\n");
        s.push_str(&format!("kind = {}\n", self.model.kind.name()));
        if let Some(k) = self.model.k_override {
            s.push_str(&format!("K = {k}\n"));
        }
        s.push_str("\n[physics]\n");
        s.push_str(&format!("nu = {}\n", self.physics.nu));
        s.push_str(&format!("delta = {}\n", self.physics.delta));
        s.push_str("\n[time]\n");
        s.push_str(&format!("dt = {}\n", self.time.dt));
        s.push_str(&format!("t_end = {}\n", self.time.t_end));
        s.push_str(&format!("scheme = {}\n", self.time.scheme.name()));
        s.push_str(&format!(
            "dealias = {}\n",
            match self.time.dealias {
                DealiasRule::TwoThirds => "two_thirds",
                DealiasRule::Half => "half",
            }
        ));
        s.push_str("\n[initial]\n");
        s.push_str(&format!("kind = {}\n", self.initial.kind.name()));
        s.push_str(&format!("amplitude = {}\n", self.initial.amplitude));
        s.push_str(&format!("u_amplitude = {}\n", self.initial.u_amplitude));
        s.push_str(&format!("width = {}\n", self.initial.width));
        s.push_str(&format!("seed = {}\n", self.initial.seed));
        if let Some(p) = &self.initial.y_file {
            s.push_str(&format!("y_file = {}\n", p.display()));
        }
        if let Some(p) = &self.initial.f_file {
            s.push_str(&format!("f_file = {}\n", p.display()));
        }
        if let Some(p) = &self.initial.u_file {
            s.push_str(&format!("u_file = {}\n", p.display()));
        }
        s.push_str("\n[output]\n");
        s.push_str(&format!("record_every = {}\n", self.output.record_every));
        s.push_str(&format!("snapshot_every = {}\n", self.output.snapshot_every));
        s.push_str(&format!("out_dir = {}\n", self.output.out_dir.display()));
        if !self.output.lr_exponents.is_empty() {
            s.push_str(&format!("lr_exponents = {}\n", join_f64(&self.output.lr_exponents)));
        }
        if let Some(study) = &self.study {
            s.push_str("\n[study]\n");
            s.push_str(&format!("sweep = {}\n", study.sweep.name()));
            s.push_str(&format!("values = {}\n", join_f64(&study.values)));
            s.push_str(&format!("r_exponents = {}\n", join_f64(&study.r_exponents)));
            s.push_str(&format!("sample_times = {}\n", join_f64(&study.sample_times)));
            s.push_str(&format!(
                "cutoffs = {}\n",
                study.cutoffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
            ));
            s.push_str(&format!("roughen = {}\n", study.roughen));
            s.push_str(&format!("roughen_epsilon = {}\n", study.roughen_epsilon));
            s.push_str(&format!("roughen_amplitude = {}\n", study.roughen_amplitude));
            if let Some(f) = study.reference_dt_refine {
                s.push_str(&format!("reference_dt_refine = {f}\n"));
            }
        }
        s
    }

    pub fn spectral_grid(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(self.grid.d, self.grid.n, self.grid.cutoff)
    }

    pub fn energy_model(&self) -> EnergyModel {
        let mut model = EnergyModel::new(self.model.kind, self.grid.d);
        if let Some(k) = self.model.k_override {
            model = model.with_k(k);
        }
        model
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            grid: self.spectral_grid()?,
            model: self.energy_model(),
            nu: self.physics.nu,
            delta: self.physics.delta,
            dt: self.time.dt,
            t_end: self.time.t_end,
            scheme: self.time.scheme,
            dealias: self.time.dealias,
            forcing: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Materialize the initial state (presets or snapshot files).
    pub fn initial_state(&self) -> Result<InitOutcome> {
        let grid = self.spectral_grid()?;
        match self.initial.kind {
            InitialKind::File => {
                let u0 = match &self.initial.u_file {
                    Some(path) => {
                        let (field, _) = snapshot::read_field(path, &grid)?;
                        if field.rank != Rank::Vector {
                            return Err(Error::Format("u_file must hold a vector field".into()));
                        }
                        field
                    }
                    None => RealField::zeros(grid, Rank::Vector),
                };
                if let Some(path) = &self.initial.y_file {
                    let (y0, _) = snapshot::read_field(path, &grid)?;
                    crate::evolution::init_state(&u0, &y0, GivenAs::Motion, 1e-8)
                } else {
                    let path = self.initial.f_file.as_ref().expect("validated");
                    let (f0, _) = snapshot::read_field(path, &grid)?;
                    crate::evolution::init_state(&u0, &f0, GivenAs::Gradient, 1e-8)
                }
            }
            _ => {
                let preset = match self.initial.kind {
                    InitialKind::Zero => InitialPreset::Zero,
                    InitialKind::TwoMode => InitialPreset::TwoMode {
                        amplitude: self.initial.amplitude,
                        u_amplitude: self.initial.u_amplitude,
                    },
                    InitialKind::GaussianBump => InitialPreset::GaussianBump {
                        amplitude: self.initial.amplitude,
                        width: self.initial.width,
                    },
                    InitialKind::File => unreachable!(),
                };
                let (u0, y0) = crate::experiments::build_initial_fields(&preset, grid);
                crate::evolution::init_state(&u0, &y0, GivenAs::Motion, 1e-8)
            }
        }
    }

    /// Assemble the limit study described by the [study] section.
    pub fn limit_study(&self) -> Result<LimitStudy> {
        let section = self
            .study
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("config has no [study] section".into()))?;
        let base = self.solver_config()?;
        Ok(LimitStudy {
            base,
            sweep: section.sweep,
            values: section.values.clone(),
            r_exponents: section.r_exponents.clone(),
            sample_times: section.sample_times.clone(),
            roughen: section.roughen.then_some(Roughening {
                epsilon: section.roughen_epsilon,
                amplitude: section.roughen_amplitude,
                seed: self.initial.seed,
            }),
            reference_dt_refine: section.reference_dt_refine,
        })
    }
}

fn join_f64(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

//! Experiment configuration: a flat set of TOML keys (dotted keys such as
//! `field.sigmas` may also be written as `[field]` tables).

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toml::Value;

use crate::ensemble::ExperimentPlan;
use crate::error::{Error, Result};
use crate::lattice::{build_grid, LatticeGrid, WaveFunction};
use crate::observable::PObservable;
use crate::random_field::{BaseProfile, FieldSpec};

/// Every accepted key, in the order used when echoing a resolved config.
pub const KNOWN_KEYS: &[&str] = &[
    "dimension",
    "sites",
    "box_length",
    "t_final",
    "dt",
    "particle_counts",
    "samples",
    "base_seed",
    "threads",
    "field.base",
    "field.gaussian_mean",
    "field.sigmas",
    "field.enforce_even",
    "observable.kind",
    "observable.p",
    "observable.center",
    "observable.width",
    "init.kind",
    "init.center",
    "init.width",
    "init.wavenumber",
    "init.mode",
    "output_dir",
    "beta",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservableKind {
    /// `|φ^{⊗p}⟩⟨φ^{⊗p}|` for the initial state φ.
    CondensateProjector,
    /// Multiplication by `Π_i f(x_i)`, `f` a unit-height Gaussian profile.
    SiteMultiplier,
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObservableKind::CondensateProjector => "condensate_projector",
            ObservableKind::SiteMultiplier => "site_multiplier",
        })
    }
}

impl FromStr for ObservableKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "condensate_projector" => Ok(ObservableKind::CondensateProjector),
            "site_multiplier" => Ok(ObservableKind::SiteMultiplier),
            _ => Err(Error::Config(format!(
                "observable.kind: unknown kind {s:?} (expected condensate_projector or site_multiplier)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    GaussianPacket,
    Uniform,
    PlaneWave,
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitKind::GaussianPacket => "gaussian_packet",
            InitKind::Uniform => "uniform",
            InitKind::PlaneWave => "plane_wave",
        })
    }
}

impl FromStr for InitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_packet" => Ok(InitKind::GaussianPacket),
            "uniform" => Ok(InitKind::Uniform),
            "plane_wave" => Ok(InitKind::PlaneWave),
            _ => Err(Error::Config(format!(
                "init.kind: unknown kind {s:?} (expected gaussian_packet, uniform or plane_wave)"
            ))),
        }
    }
}

/// Fully resolved configuration; every key has a value.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub dimension: usize,
    pub sites: usize,
    pub box_length: f64,
    pub t_final: f64,
    pub dt: f64,
    pub particle_counts: Vec<usize>,
    pub samples: usize,
    pub base_seed: u64,
    /// Worker count; 0 means all available cores.
    pub threads: usize,
    pub field_base: BaseProfile,
    pub field_gaussian_mean: f64,
    pub field_sigmas: Vec<f64>,
    pub field_enforce_even: bool,
    pub observable_kind: ObservableKind,
    pub observable_p: usize,
    pub observable_center: Vec<f64>,
    pub observable_width: f64,
    pub init_kind: InitKind,
    pub init_center: Vec<f64>,
    pub init_width: f64,
    pub init_wavenumber: f64,
    pub init_mode: i64,
    pub output_dir: PathBuf,
    /// Tail-diagnostic threshold; `None` resolves to `‖a‖ / 2`.
    pub beta: Option<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            dimension: 1,
            sites: 8,
            box_length: 8.0,
            t_final: 0.5,
            dt: 0.5 / 512.0,
            particle_counts: vec![2, 4, 6],
            samples: 64,
            base_seed: 1,
            threads: 0,
            field_base: BaseProfile::GaussianBump {
                amplitude: 1.0,
                width: 1.5,
            },
            field_gaussian_mean: 0.0,
            field_sigmas: vec![0.5, 0.3, 0.1],
            field_enforce_even: true,
            observable_kind: ObservableKind::CondensateProjector,
            observable_p: 1,
            observable_center: vec![4.0],
            observable_width: 1.0,
            init_kind: InitKind::GaussianPacket,
            init_center: vec![4.0],
            init_width: 1.0,
            init_wavenumber: 0.0,
            init_mode: 1,
            output_dir: PathBuf::from("out"),
            beta: None,
        }
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(inner) => flatten(&key, inner, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Keys(BTreeMap<String, Value>);

impl Keys {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.0.remove(key)
    }

    fn type_error(key: &str, expected: &str, got: &Value) -> Error {
        Error::Config(format!("{key}: expected {expected}, got {got}"))
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as usize)),
            Some(other) => Err(Self::type_error(key, "a nonnegative integer", &other)),
        }
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            // seeds above i64::MAX are written as strings
            Some(Value::String(s)) => s
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key}: cannot parse {s:?} as a 64-bit seed"))),
            Some(other) => Err(Self::type_error(key, "a nonnegative integer", &other)),
        }
    }

    fn i64(&mut self, key: &str) -> Result<Option<i64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(i)),
            Some(other) => Err(Self::type_error(key, "an integer", &other)),
        }
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(x)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(other) => Err(Self::type_error(key, "a number", &other)),
        }
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(b)),
            Some(other) => Err(Self::type_error(key, "true or false", &other)),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(Self::type_error(key, "a string", &other)),
        }
    }

    /// Comma-separated string or TOML array.
    fn list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        let bad = |item: &str| Error::Config(format!("{key}: cannot parse list item {item:?}"));
        let items: Vec<String> = match self.take(key) {
            None => return Ok(None),
            Some(Value::String(s)) => {
                if s.trim().is_empty() {
                    Vec::new()
                } else {
                    s.split(',').map(|t| t.trim().to_string()).collect()
                }
            }
            Some(Value::Array(values)) => values
                .iter()
                .map(|v| match v {
                    Value::Integer(i) => Ok(i.to_string()),
                    Value::Float(x) => Ok(format!("{x:?}")),
                    other => Err(Self::type_error(key, "numbers", other)),
                })
                .collect::<Result<_>>()?,
            Some(other) => return Err(Self::type_error(key, "a comma list", &other)),
        };
        items
            .iter()
            .map(|s| s.parse::<T>().map_err(|_| bad(s)))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("malformed config: {}", e.message())))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        if let Some(unknown) = flat.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown key `{unknown}`")));
        }
        let mut keys = Keys(flat);
        let d = Config::default();

        let dimension = keys.usize("dimension")?.unwrap_or(d.dimension);
        let sites = keys.usize("sites")?.unwrap_or(d.sites);
        let box_length = keys.f64("box_length")?.unwrap_or(d.box_length);
        let t_final = keys.f64("t_final")?.unwrap_or(d.t_final);
        let dt = keys.f64("dt")?.unwrap_or(t_final / 512.0);
        let centre = vec![box_length / 2.0; dimension.clamp(1, 3)];
        let init_center = keys.list("init.center")?.unwrap_or_else(|| centre.clone());
        let observable_center = keys
            .list("observable.center")?
            .unwrap_or_else(|| init_center.clone());

        let config = Config {
            dimension,
            sites,
            box_length,
            t_final,
            dt,
            particle_counts: keys.list("particle_counts")?.unwrap_or(d.particle_counts),
            samples: keys.usize("samples")?.unwrap_or(d.samples),
            base_seed: keys.u64("base_seed")?.unwrap_or(d.base_seed),
            threads: keys.usize("threads")?.unwrap_or(d.threads),
            field_base: match keys.string("field.base")? {
                Some(s) => s.parse()?,
                None => d.field_base,
            },
            field_gaussian_mean: keys.f64("field.gaussian_mean")?.unwrap_or(d.field_gaussian_mean),
            field_sigmas: keys.list("field.sigmas")?.unwrap_or(d.field_sigmas),
            field_enforce_even: keys.bool("field.enforce_even")?.unwrap_or(d.field_enforce_even),
            observable_kind: match keys.string("observable.kind")? {
                Some(s) => s.parse()?,
                None => d.observable_kind,
            },
            observable_p: keys.usize("observable.p")?.unwrap_or(d.observable_p),
            observable_center,
            observable_width: keys.f64("observable.width")?.unwrap_or(d.observable_width),
            init_kind: match keys.string("init.kind")? {
                Some(s) => s.parse()?,
                None => d.init_kind,
            },
            init_center,
            init_width: keys.f64("init.width")?.unwrap_or(d.init_width),
            init_wavenumber: keys.f64("init.wavenumber")?.unwrap_or(d.init_wavenumber),
            init_mode: keys.i64("init.mode")?.unwrap_or(d.init_mode),
            output_dir: keys
                .string("output_dir")?
                .map(PathBuf::from)
                .unwrap_or(d.output_dir),
            beta: keys.f64("beta")?,
        };
        debug_assert!(keys.0.is_empty());
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Checks that do not need the assembled plan.
    pub fn validate(&self) -> Result<()> {
        if self.field_sigmas.len() * 2 >= self.sites {
            return Err(Error::Config(format!(
                "field.sigmas: {} modes given but the highest mode K must satisfy K < sites/2 = {}",
                self.field_sigmas.len(),
                self.sites as f64 / 2.0
            )));
        }
        if self.particle_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("particle_counts must be strictly ascending".into()));
        }
        for (key, center) in [("init.center", &self.init_center), ("observable.center", &self.observable_center)] {
            if center.len() != self.dimension {
                return Err(Error::Config(format!(
                    "{key}: expected {} coordinates, got {}",
                    self.dimension,
                    center.len()
                )));
            }
        }
        if let Some(beta) = self.beta {
            if !(beta > 0.0) {
                return Err(Error::Config(format!("beta must be positive (got {beta})")));
            }
        }
        if !(self.observable_width > 0.0) {
            return Err(Error::Config("observable.width must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<LatticeGrid> {
        build_grid(self.dimension, self.sites, self.box_length)
    }

    pub fn field_spec(&self) -> FieldSpec {
        FieldSpec {
            base: self.field_base,
            gaussian_mean: self.field_gaussian_mean,
            mode_stddevs: self.field_sigmas.clone(),
            enforce_even: self.field_enforce_even,
        }
    }

    pub fn initial_state(&self, grid: &LatticeGrid) -> Result<WaveFunction> {
        match self.init_kind {
            InitKind::GaussianPacket => WaveFunction::gaussian_packet(
                *grid,
                &self.init_center,
                self.init_width,
                self.init_wavenumber,
            ),
            InitKind::Uniform => WaveFunction::uniform(*grid),
            InitKind::PlaneWave => WaveFunction::plane_wave(*grid, self.init_mode),
        }
    }

    pub fn observable(&self, grid: &LatticeGrid, initial: &WaveFunction) -> Result<PObservable> {
        match self.observable_kind {
            ObservableKind::CondensateProjector => {
                PObservable::condensate_projector(initial, self.observable_p)
            }
            ObservableKind::SiteMultiplier => {
                let w = self.observable_width;
                let profile: Vec<f64> = (0..grid.num_sites())
                    .map(|s| {
                        let r = grid.periodic_distance(s, &self.observable_center);
                        (-r * r / (2.0 * w * w)).exp()
                    })
                    .collect();
                PObservable::multiplication(*grid, &profile, self.observable_p)
            }
        }
    }

    pub fn to_plan(&self) -> Result<ExperimentPlan> {
        let grid = self.grid()?;
        let initial = self.initial_state(&grid)?;
        let observable = self.observable(&grid, &initial)?;
        ExperimentPlan::new(
            grid,
            self.field_spec(),
            initial,
            observable,
            self.t_final,
            self.dt,
            self.particle_counts.clone(),
            self.samples,
            self.base_seed,
        )
    }

    /// `key = value` lines for every key, in [`KNOWN_KEYS`] order; the
    /// output parses back to the same configuration. `beta_resolved` fills in
    /// the defaulted tail threshold.
    pub fn resolved_text(&self, beta_resolved: f64) -> String {
        fn list<T: fmt::Debug>(items: &[T]) -> String {
            let parts: Vec<String> = items.iter().map(|x| format!("{x:?}")).collect();
            format!("\"{}\"", parts.join(","))
        }
        let mut out = String::new();
        for key in KNOWN_KEYS {
            let value = match *key {
                "dimension" => self.dimension.to_string(),
                "sites" => self.sites.to_string(),
                "box_length" => format!("{:?}", self.box_length),
                "t_final" => format!("{:?}", self.t_final),
                "dt" => format!("{:?}", self.dt),
                "particle_counts" => list(&self.particle_counts),
                "samples" => self.samples.to_string(),
                "base_seed" => format!("\"{}\"", self.base_seed),
                "threads" => self.threads.to_string(),
                "field.base" => format!("\"{}\"", self.field_base),
                "field.gaussian_mean" => format!("{:?}", self.field_gaussian_mean),
                "field.sigmas" => list(&self.field_sigmas),
                "field.enforce_even" => self.field_enforce_even.to_string(),
                "observable.kind" => format!("\"{}\"", self.observable_kind),
                "observable.p" => self.observable_p.to_string(),
                "observable.center" => list(&self.observable_center),
                "observable.width" => format!("{:?}", self.observable_width),
                "init.kind" => format!("\"{}\"", self.init_kind),
                "init.center" => list(&self.init_center),
                "init.width" => format!("{:?}", self.init_width),
                "init.wavenumber" => format!("{:?}", self.init_wavenumber),
                "init.mode" => self.init_mode.to_string(),
                "output_dir" => toml::Value::String(self.output_dir.display().to_string()).to_string(),
                "beta" => format!("{beta_resolved:?}"),
                _ => unreachable!("unhandled config key {key}"),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

/// Read, default and validate a config file into an experiment plan.
pub fn parse_config(path: &Path) -> Result<ExperimentPlan> {
    Config::load(path)?.to_plan()
}

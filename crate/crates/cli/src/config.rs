//! Experiment configuration files.
//!
//! A config names a catalog scenario and overrides any of its fields:
//!
//! ```toml
//! scenario = "cluster4_limited"
//! algorithm = "mappo"
//! seeds = [0, 1, 2]
//!
//! [env]
//! n_targets = 200
//! horizon_orbits = 1.0
//!
//! [satellite_overrides.0]
//! d_max_gb = 5.0
//!
//! [train]
//! total_env_steps = 20000
//! ```
//!
//! Tables are merged key by key over the scenario; arrays and scalars
//! replace. Angles are in degrees.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use satmarl_core::astro::ConstellationKind;
use satmarl_core::env::FixedTarget;
use satmarl_core::marl::{Algorithm, TrainConfig};
use satmarl_core::{ConstellationSpec, EnvConfig, GroundPoint, Randomization, SatelliteParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::scenarios;

pub const OUTPUT_ROOT_ENV: &str = "SATMARL_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationSection {
    pub kind: ConstellationKind,
    pub n_sats: usize,
    pub n_planes: usize,
    pub phasing_f: usize,
    pub inclination_deg: f64,
    pub altitude_km: f64,
    pub cluster_spacing_deg: f64,
}

impl ConstellationSection {
    pub fn from_spec(s: &ConstellationSpec) -> Self {
        Self {
            kind: s.kind,
            n_sats: s.n_sats,
            n_planes: s.n_planes,
            phasing_f: s.phasing_f,
            inclination_deg: s.inclination_rad.to_degrees(),
            altitude_km: s.altitude_km,
            cluster_spacing_deg: s.cluster_spacing_rad.to_degrees(),
        }
    }

    pub fn to_spec(&self) -> ConstellationSpec {
        ConstellationSpec {
            kind: self.kind,
            n_sats: self.n_sats,
            n_planes: self.n_planes,
            phasing_f: self.phasing_f,
            inclination_rad: self.inclination_deg.to_radians(),
            altitude_km: self.altitude_km,
            cluster_spacing_rad: self.cluster_spacing_deg.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub n_targets: usize,
    pub horizon_orbits: f64,
    pub dt_s: f64,
    pub k_slots: usize,
    pub target_elev_min_deg: f64,
    pub gs_elev_min_deg: f64,
    /// `[lat_deg, lon_deg]` pairs.
    pub ground_stations: Vec<[f64; 2]>,
    /// `[lat_deg, lon_deg, priority]`; replaces random targets when nonempty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_targets: Vec<[f64; 3]>,
    pub randomize_rw: bool,
    pub randomize_battery: bool,
    pub randomize_storage: bool,
    pub disturbance: bool,
    pub master_seed: u64,
}

impl EnvSection {
    pub fn from_env(c: &EnvConfig) -> Self {
        Self {
            n_targets: c.n_targets,
            horizon_orbits: c.horizon_orbits,
            dt_s: c.dt_s,
            k_slots: c.k_slots,
            target_elev_min_deg: c.target_elev_min_rad.to_degrees(),
            gs_elev_min_deg: c.gs_elev_min_rad.to_degrees(),
            ground_stations: c
                .ground_stations
                .iter()
                .map(|g| [g.lat_rad.to_degrees(), g.lon_rad.to_degrees()])
                .collect(),
            fixed_targets: c
                .fixed_targets
                .iter()
                .map(|t| [t.point.lat_rad.to_degrees(), t.point.lon_rad.to_degrees(), t.priority])
                .collect(),
            randomize_rw: c.randomization.rw_init,
            randomize_battery: c.randomization.battery_init,
            randomize_storage: c.randomization.storage_init,
            disturbance: c.randomization.disturbance,
            master_seed: c.master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    /// Relative paths resolve against `SATMARL_OUTPUT_ROOT` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub constellation: ConstellationSection,
    pub env: EnvSection,
    pub satellite: SatelliteParams,
    /// Per-satellite field overrides keyed by satellite index.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub satellite_overrides: BTreeMap<String, toml::Table>,
    pub train: TrainConfig,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ExperimentConfig {
    /// Parse config text, filling unspecified fields from the named scenario.
    pub fn parse(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e| CliError::config(format!("{e}")))?;
        let name = match user.get("scenario") {
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(CliError::config("`scenario` must be a string")),
            None => return Err(CliError::config("missing `scenario` (run `satmarl scenarios` for the list)")),
        };
        let base = scenarios::get(&name).ok_or_else(|| CliError::config(format!("unknown scenario `{name}`")))?;
        let mut table = toml::Table::try_from(&base).map_err(|e| CliError::config(e.to_string()))?;
        merge(&mut table, user);
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok((cfg, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn n_sats(&self) -> usize {
        self.constellation.n_sats
    }

    /// Per-satellite parameters with overrides applied.
    pub fn satellite_params(&self) -> Result<Vec<SatelliteParams>> {
        let n = self.n_sats();
        let mut out = vec![self.satellite.clone(); n];
        let base = toml::Table::try_from(&self.satellite).map_err(|e| CliError::config(e.to_string()))?;
        for (key, fields) in &self.satellite_overrides {
            let i: usize = key
                .parse()
                .map_err(|_| CliError::config(format!("satellite_overrides key `{key}` is not an index")))?;
            if i >= n {
                return Err(CliError::config(format!("satellite_overrides.{i} but only {n} satellites")));
            }
            let mut t = base.clone();
            merge(&mut t, fields.clone());
            out[i] = t
                .try_into()
                .map_err(|e: toml::de::Error| CliError::config(format!("satellite_overrides.{i}: {e}")))?;
        }
        Ok(out)
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        let sats = self.satellite_params()?;
        let satellites = if self.satellite_overrides.is_empty() { vec![self.satellite.clone()] } else { sats };
        let point = |lat: f64, lon: f64| {
            GroundPoint::from_degrees(lat, lon).map_err(|e| CliError::config(format!("({lat}, {lon}): {e}")))
        };
        let e = &self.env;
        Ok(EnvConfig {
            constellation: self.constellation.to_spec(),
            n_targets: e.n_targets,
            fixed_targets: e
                .fixed_targets
                .iter()
                .map(|&[lat, lon, priority]| Ok(FixedTarget { point: point(lat, lon)?, priority }))
                .collect::<Result<_>>()?,
            horizon_orbits: e.horizon_orbits,
            dt_s: e.dt_s,
            k_slots: e.k_slots,
            satellites,
            ground_stations: e.ground_stations.iter().map(|&[lat, lon]| point(lat, lon)).collect::<Result<_>>()?,
            target_elev_min_rad: e.target_elev_min_deg.to_radians(),
            gs_elev_min_rad: e.gs_elev_min_deg.to_radians(),
            randomization: Randomization {
                rw_init: e.randomize_rw,
                battery_init: e.randomize_battery,
                storage_init: e.randomize_storage,
                disturbance: e.disturbance,
            },
            master_seed: e.master_seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(CliError::config("`seeds` must not be empty"));
        }
        let unique: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if unique.len() != self.seeds.len() {
            return Err(CliError::config("`seeds` contains duplicates"));
        }
        if self.algorithm == Algorithm::Ppo && self.n_sats() != 1 {
            return Err(CliError::config(format!(
                "algorithm ppo needs exactly one satellite, scenario has {}; use ippo, mappo, happo or central_ppo",
                self.n_sats()
            )));
        }
        self.env_config()?.validate().map_err(|e| CliError::config(e.to_string()))?;
        self.train.validate().map_err(|e| CliError::config(e.to_string()))?;
        Ok(())
    }

    /// Output directory with the output-root override applied.
    pub fn resolved_output_dir(&self) -> PathBuf {
        let dir = self
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}_{}", self.scenario, self.algorithm)));
        resolve_output(&dir)
    }

    /// Shrink the scenario to 200 targets over one orbit.
    pub fn reduced(mut self) -> Self {
        self.env.n_targets = 200;
        self.env.horizon_orbits = 1.0;
        self
    }

    /// The parts that define the environment, for comparing runs.
    pub fn environment_key(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            scenario: &'a str,
            constellation: &'a ConstellationSection,
            env: &'a EnvSection,
            satellite: &'a SatelliteParams,
            satellite_overrides: &'a BTreeMap<String, toml::Table>,
        }
        toml::to_string(&Key {
            scenario: &self.scenario,
            constellation: &self.constellation,
            env: &self.env,
            satellite: &self.satellite,
            satellite_overrides: &self.satellite_overrides,
        })
        .expect("environment serializes to TOML")
    }
}

pub fn resolve_output(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() && !root.is_empty() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

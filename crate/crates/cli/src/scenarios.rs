//! Built-in scenario catalog.

use std::collections::BTreeMap;

use satmarl_core::env::{DEFAULT_GROUND_STATIONS_DEG, DEFAULT_GS_ELEV_MIN_DEG, DEFAULT_TARGET_ELEV_MIN_DEG};
use satmarl_core::marl::{Algorithm, TrainConfig};
use satmarl_core::satmodel::{BAUD_LOW_GB_PER_STEP, IMAGE_LARGE_GB};
use satmarl_core::{ConstellationSpec, EnvConfig, Randomization, SatelliteParams};

use crate::config::{ConstellationSection, EnvSection, ExperimentConfig};

pub const LIMITED_BATTERY_WH: f64 = 50.0;
pub const LIMITED_STORAGE_GB: f64 = 5.0;
pub const HETERO_STORAGE_GB: [f64; 4] = [5.0, 10.0, 250.0, 500.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub description: &'static str,
}

pub const CATALOG: [ScenarioInfo; 9] = [
    ScenarioInfo { name: "single_default", description: "1 satellite, default resources" },
    ScenarioInfo { name: "single_limited_battery", description: "1 satellite, B = 50 Wh" },
    ScenarioInfo { name: "single_limited_storage", description: "1 satellite, D = 5 GB" },
    ScenarioInfo {
        name: "single_random",
        description: "1 satellite, random RW/battery/storage init and attitude disturbance",
    },
    ScenarioInfo { name: "cluster4_default", description: "4-satellite cluster, default resources" },
    ScenarioInfo {
        name: "cluster4_limited",
        description: "4-satellite cluster, B = 50 Wh, D = 5 GB, large images, low baud rate",
    },
    ScenarioInfo {
        name: "cluster4_random",
        description: "4-satellite cluster, random RW/battery/storage init and attitude disturbance",
    },
    ScenarioInfo { name: "walker4_default", description: "Walker-delta 4/4/1, default resources" },
    ScenarioInfo {
        name: "cluster4_hetero_storage",
        description: "4-satellite cluster, D = 5/10/250/500 GB, large images, low baud rate",
    },
];

fn build(name: &str, algorithm: Algorithm, env: EnvConfig, overrides: BTreeMap<String, toml::Table>) -> ExperimentConfig {
    let mut env_section = EnvSection::from_env(&env);
    env_section.target_elev_min_deg = DEFAULT_TARGET_ELEV_MIN_DEG;
    env_section.gs_elev_min_deg = DEFAULT_GS_ELEV_MIN_DEG;
    env_section.ground_stations = DEFAULT_GROUND_STATIONS_DEG.iter().map(|&(lat, lon)| [lat, lon]).collect();
    let mut constellation = ConstellationSection::from_spec(&env.constellation);
    constellation.inclination_deg = constellation.inclination_deg.round();
    constellation.cluster_spacing_deg = (constellation.cluster_spacing_deg * 1e6).round() / 1e6;
    ExperimentConfig {
        scenario: name.to_owned(),
        algorithm,
        seeds: vec![0, 1, 2, 3, 4],
        output_dir: None,
        constellation,
        env: env_section,
        satellite: env.satellites[0].clone(),
        satellite_overrides: overrides,
        train: TrainConfig::default(),
    }
}

fn env_with(constellation: ConstellationSpec, sat: SatelliteParams, randomization: Randomization) -> EnvConfig {
    EnvConfig { constellation, satellites: vec![sat], randomization, ..EnvConfig::default() }
}

pub fn get(name: &str) -> Option<ExperimentConfig> {
    let single = ConstellationSpec::cluster(1);
    let cluster = ConstellationSpec::cluster(4);
    let def = SatelliteParams::default();
    let none = Randomization::NONE;
    let scarce = SatelliteParams {
        b_max_wh: LIMITED_BATTERY_WH,
        d_max_gb: LIMITED_STORAGE_GB,
        image_size_gb: IMAGE_LARGE_GB,
        baud_gb_per_step: BAUD_LOW_GB_PER_STEP,
        ..def.clone()
    };
    let (alg, env, overrides) = match name {
        "single_default" => (Algorithm::Ppo, env_with(single, def, none), BTreeMap::new()),
        "single_limited_battery" => (
            Algorithm::Ppo,
            env_with(single, SatelliteParams { b_max_wh: LIMITED_BATTERY_WH, ..def }, none),
            BTreeMap::new(),
        ),
        "single_limited_storage" => (
            Algorithm::Ppo,
            env_with(single, SatelliteParams { d_max_gb: LIMITED_STORAGE_GB, ..def }, none),
            BTreeMap::new(),
        ),
        "single_random" => (Algorithm::Ppo, env_with(single, def, Randomization::ALL), BTreeMap::new()),
        "cluster4_default" => (Algorithm::Mappo, env_with(cluster, def, none), BTreeMap::new()),
        "cluster4_limited" => (Algorithm::Mappo, env_with(cluster, scarce, none), BTreeMap::new()),
        "cluster4_random" => (Algorithm::Mappo, env_with(cluster, def, Randomization::ALL), BTreeMap::new()),
        "walker4_default" => (
            Algorithm::Mappo,
            env_with(ConstellationSpec::walker_delta(4, 4, 1), def, none),
            BTreeMap::new(),
        ),
        "cluster4_hetero_storage" => {
            let sat = SatelliteParams { image_size_gb: IMAGE_LARGE_GB, baud_gb_per_step: BAUD_LOW_GB_PER_STEP, ..def };
            let overrides = HETERO_STORAGE_GB
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    let mut t = toml::Table::new();
                    t.insert("d_max_gb".into(), toml::Value::Float(d));
                    (i.to_string(), t)
                })
                .collect();
            (Algorithm::Mappo, env_with(cluster, sat, none), overrides)
        }
        _ => return None,
    };
    Some(build(name, alg, env, overrides))
}

pub fn all() -> Vec<ExperimentConfig> {
    CATALOG.iter().map(|s| get(s.name).expect("catalog entry")).collect()
}

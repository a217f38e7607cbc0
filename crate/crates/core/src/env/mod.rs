//! The cooperative multi-satellite observation environment.
//!
//! Each satellite is an agent acting on its own observation. All agents share
//! one team reward: the priority of every constellation-wide first capture,
//! minus 100 for each satellite that fails. A failed satellite is removed from
//! play for the rest of the episode.
//!
//! Capture and downlink opportunities are evaluated over the step interval
//! `(t, t + dt]`: an action succeeds when the relevant access window overlaps
//! it.

pub mod access;

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::astro::{
    self, in_eclipse, make_constellation, propagate_circular, sun_direction, AstroError,
    ConstellationSpec, GroundPoint, OrbitalElements,
};
use crate::rng::{derive_seed, stream_rng, SimRng};
use crate::satmodel::{
    apply_capture, apply_charge, apply_desaturate, apply_downlink, check_failure, ActionKind,
    ResourceState, SatModelError, SatelliteParams,
};

pub use access::Window;

pub const FAILURE_PENALTY: f64 = 100.0;
pub const OBS_BASE_LEN: usize = 9;
pub const OBS_SLOT_LEN: usize = 3;
pub const RW_INIT_RANGE_RPM: f64 = 3000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Astro(#[from] AstroError),
    #[error(transparent)]
    SatModel(#[from] SatModelError),
    #[error("environment has not been reset")]
    NotReset,
    #[error("episode is over; reset before stepping")]
    EpisodeDone,
    #[error("joint action has {got} entries, expected {expected}")]
    JointActionLength { expected: usize, got: usize },
    #[error("agent {0} is inactive and cannot act")]
    InactiveAgentAction(usize),
    #[error("active agent {0} supplied no action")]
    MissingAction(usize),
    #[error("agent {agent} chose capture slot {slot} but only {k_slots} slots exist")]
    InvalidSlot {
        agent: usize,
        slot: usize,
        k_slots: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Randomization {
    pub rw_init: bool,
    pub battery_init: bool,
    pub storage_init: bool,
    pub disturbance: bool,
}

impl Randomization {
    pub const NONE: Self = Self {
        rw_init: false,
        battery_init: false,
        storage_init: false,
        disturbance: false,
    };
    pub const ALL: Self = Self {
        rw_init: true,
        battery_init: true,
        storage_init: true,
        disturbance: true,
    };
}

/// A target placed explicitly instead of drawn at random.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedTarget {
    pub point: GroundPoint,
    pub priority: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub constellation: ConstellationSpec,
    pub n_targets: usize,
    /// When nonempty, used in place of `n_targets` random targets.
    pub fixed_targets: Vec<FixedTarget>,
    pub horizon_orbits: f64,
    pub dt_s: f64,
    pub k_slots: usize,
    /// One entry per satellite, or a single entry shared by all.
    pub satellites: Vec<SatelliteParams>,
    pub ground_stations: Vec<GroundPoint>,
    pub target_elev_min_rad: f64,
    pub gs_elev_min_rad: f64,
    pub randomization: Randomization,
    pub master_seed: u64,
}

/// `(lat_deg, lon_deg)` of the default ground stations.
pub const DEFAULT_GROUND_STATIONS_DEG: [(f64, f64); 3] = [(78.2, 15.4), (-35.3, 149.1), (-33.4, -70.6)];
pub const DEFAULT_TARGET_ELEV_MIN_DEG: f64 = 60.0;
pub const DEFAULT_GS_ELEV_MIN_DEG: f64 = 10.0;

pub fn default_ground_stations() -> Vec<GroundPoint> {
    DEFAULT_GROUND_STATIONS_DEG
        .iter()
        .map(|&(lat, lon)| GroundPoint::from_degrees(lat, lon).expect("static coordinates"))
        .collect()
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            constellation: ConstellationSpec::cluster(1),
            n_targets: 2000,
            fixed_targets: Vec::new(),
            horizon_orbits: 2.0,
            dt_s: 60.0,
            k_slots: 3,
            satellites: vec![SatelliteParams::default()],
            ground_stations: default_ground_stations(),
            target_elev_min_rad: DEFAULT_TARGET_ELEV_MIN_DEG.to_radians(),
            gs_elev_min_rad: DEFAULT_GS_ELEV_MIN_DEG.to_radians(),
            randomization: Randomization::NONE,
            master_seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn n_sats(&self) -> usize {
        self.constellation.n_sats
    }

    pub fn obs_dim(&self) -> usize {
        OBS_BASE_LEN + OBS_SLOT_LEN * self.k_slots
    }

    pub fn state_dim(&self) -> usize {
        self.n_sats() * self.obs_dim() + 1
    }

    pub fn action_space(&self) -> usize {
        3 + self.k_slots
    }

    pub fn sat_params(&self, i: usize) -> &SatelliteParams {
        if self.satellites.len() == 1 {
            &self.satellites[0]
        } else {
            &self.satellites[i]
        }
    }

    pub fn period_s(&self) -> f64 {
        astro::orbital_period(self.constellation.semi_major_axis_km()).unwrap_or(f64::NAN)
    }

    pub fn horizon_s(&self) -> f64 {
        self.horizon_orbits * self.period_s()
    }

    pub fn horizon_steps(&self) -> usize {
        (self.horizon_s() / self.dt_s).ceil() as usize
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        self.constellation.validate()?;
        let bad = |m: String| Err(EnvError::Config(m));
        if self.n_targets == 0 && self.fixed_targets.is_empty() {
            return bad("n_targets must be at least 1".into());
        }
        if self.k_slots == 0 {
            return bad("k_slots must be at least 1".into());
        }
        if !(self.dt_s > 0.0) || !self.dt_s.is_finite() {
            return bad(format!("dt_s must be positive, got {}", self.dt_s));
        }
        if !(self.horizon_orbits > 0.0) || !self.horizon_orbits.is_finite() {
            return bad(format!("horizon_orbits must be positive, got {}", self.horizon_orbits));
        }
        let n = self.n_sats();
        if self.satellites.len() != 1 && self.satellites.len() != n {
            return bad(format!(
                "expected 1 or {n} satellite parameter sets, got {}",
                self.satellites.len()
            ));
        }
        for p in &self.satellites {
            p.validate()?;
        }
        for t in &self.fixed_targets {
            if !(0.0..=1.0).contains(&t.priority) {
                return bad(format!("target priority {} outside [0, 1]", t.priority));
            }
        }
        for e in [self.target_elev_min_rad, self.gs_elev_min_rad] {
            if !(-PI / 2.0..=PI / 2.0).contains(&e) {
                return bad(format!("elevation threshold {e} rad out of range"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub id: usize,
    pub point: GroundPoint,
    pub priority: f64,
    /// `(satellite index, step index)` of the constellation-wide first capture.
    pub captured_by: Option<(usize, usize)>,
}

/// Area-uniform targets with independent uniform priorities.
pub fn generate_targets<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Target> {
    (0..n)
        .map(|id| {
            let lon = -PI + 2.0 * PI * rng.random::<f64>();
            let lat = (2.0 * rng.random::<f64>() - 1.0).asin();
            let priority = rng.random::<f64>();
            Target {
                id,
                point: GroundPoint {
                    lat_rad: lat,
                    lon_rad: lon,
                },
                priority,
                captured_by: None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetWindow {
    pub target: usize,
    pub window: Window,
}

/// One entry of an agent's upcoming-target list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub target: usize,
    pub window_start: f64,
    pub window_end: f64,
}

/// Fixed-length per-agent observation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl std::ops::Deref for Observation {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CaptureOutcome {
    NotAttempted,
    /// No image: empty slot, target out of view, storage full, or disturbance.
    Missed { target: Option<usize> },
    /// First capture of the target anywhere in the constellation.
    Scored { target: usize, reward: f64 },
    /// Imaged in the same step by a lower-indexed satellite.
    Collision { target: usize },
    /// Imaged after an earlier step already scored it.
    Duplicate { target: usize },
}

impl CaptureOutcome {
    pub fn imaged_target(&self) -> Option<usize> {
        match *self {
            CaptureOutcome::Scored { target, .. }
            | CaptureOutcome::Collision { target }
            | CaptureOutcome::Duplicate { target } => Some(target),
            _ => None,
        }
    }

    pub fn is_wasted(&self) -> bool {
        matches!(
            self,
            CaptureOutcome::Missed { .. }
                | CaptureOutcome::Collision { .. }
                | CaptureOutcome::Duplicate { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEvent {
    pub action: Option<ActionKind>,
    pub capture: CaptureOutcome,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Observation>,
    pub team_reward: f64,
    pub events: Vec<AgentEvent>,
    pub done: bool,
    pub active: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCapture {
    pub target: usize,
    pub sat: usize,
    pub step: usize,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct EoEnv {
    cfg: EnvConfig,
    params: Vec<SatelliteParams>,
    orbits: Vec<OrbitalElements>,
    period_s: f64,
    horizon_s: f64,
    horizon_steps: usize,
    targets: Vec<Target>,
    /// Per satellite, sorted by window start.
    target_windows: Vec<Vec<TargetWindow>>,
    max_window_s: Vec<f64>,
    gs_windows: Vec<Vec<Window>>,
    resources: Vec<ResourceState>,
    active: Vec<bool>,
    own_captured: Vec<Vec<bool>>,
    n_captured: usize,
    scored: Vec<ScoredCapture>,
    step_index: usize,
    done: bool,
    is_reset: bool,
    rng: SimRng,
}

const STREAM_TARGETS: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_DYNAMICS: u64 = 3;

impl EoEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let orbits = make_constellation(&cfg.constellation)?;
        let n = orbits.len();
        let params = (0..n).map(|i| cfg.sat_params(i).clone()).collect();
        let period_s = cfg.period_s();
        Ok(Self {
            horizon_s: cfg.horizon_s(),
            horizon_steps: cfg.horizon_steps(),
            period_s,
            params,
            orbits,
            targets: Vec::new(),
            target_windows: vec![Vec::new(); n],
            max_window_s: vec![0.0; n],
            gs_windows: vec![Vec::new(); n],
            resources: Vec::new(),
            active: vec![false; n],
            own_captured: vec![Vec::new(); n],
            n_captured: 0,
            scored: Vec::new(),
            step_index: 0,
            done: false,
            is_reset: false,
            rng: stream_rng(cfg.master_seed, STREAM_DYNAMICS),
            cfg,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn n_agents(&self) -> usize {
        self.orbits.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.cfg.obs_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.cfg.state_dim()
    }

    /// Number of discrete actions: charge, downlink, desaturate, then one
    /// capture per slot.
    pub fn action_space(&self) -> usize {
        self.cfg.action_space()
    }

    pub fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    pub fn horizon_s(&self) -> f64 {
        self.horizon_s
    }

    pub fn period_s(&self) -> f64 {
        self.period_s
    }

    pub fn time_s(&self) -> f64 {
        self.step_index as f64 * self.cfg.dt_s
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn orbits(&self) -> &[OrbitalElements] {
        &self.orbits
    }

    pub fn params(&self, sat: usize) -> &SatelliteParams {
        &self.params[sat]
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn target_windows(&self, sat: usize) -> &[TargetWindow] {
        &self.target_windows[sat]
    }

    pub fn ground_station_windows(&self, sat: usize) -> &[Window] {
        &self.gs_windows[sat]
    }

    pub fn resources(&self) -> &[ResourceState] {
        &self.resources
    }

    /// Overwrite a satellite's resources, for scripted scenarios.
    pub fn set_resources(&mut self, sat: usize, state: ResourceState) {
        self.resources[sat] = state;
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn scored_captures(&self) -> &[ScoredCapture] {
        &self.scored
    }

    pub fn has_captured(&self, sat: usize, target: usize) -> bool {
        self.own_captured[sat][target]
    }

    pub fn total_priority(&self) -> f64 {
        self.targets.iter().map(|t| t.priority).sum()
    }

    fn lookahead_s(&self) -> f64 {
        self.period_s
    }

    pub fn reset(&mut self, episode_seed: u64) -> Vec<Observation> {
        let seed = derive_seed(self.cfg.master_seed, episode_seed);
        let mut target_rng = stream_rng(seed, STREAM_TARGETS);
        let mut init_rng = stream_rng(seed, STREAM_INIT);
        self.rng = stream_rng(seed, STREAM_DYNAMICS);

        self.targets = if self.cfg.fixed_targets.is_empty() {
            generate_targets(self.cfg.n_targets, &mut target_rng)
        } else {
            self.cfg
                .fixed_targets
                .iter()
                .enumerate()
                .map(|(id, t)| Target {
                    id,
                    point: t.point,
                    priority: t.priority,
                    captured_by: None,
                })
                .collect()
        };

        let n = self.n_agents();
        let rand = self.cfg.randomization;
        self.params = (0..n)
            .map(|i| {
                let mut p = self.cfg.sat_params(i).clone();
                if !rand.disturbance {
                    p.disturbance_fail_prob = 0.0;
                }
                p
            })
            .collect();
        self.resources = self
            .params
            .iter()
            .map(|p| {
                let battery_frac = if rand.battery_init {
                    init_rng.random_range(0.4..=0.8)
                } else {
                    0.5
                };
                let storage_frac = if rand.storage_init {
                    init_rng.random_range(0.2..=0.8)
                } else {
                    0.0
                };
                let mut rw = [0.0; 3];
                if rand.rw_init {
                    for w in &mut rw {
                        *w = init_rng.random_range(-RW_INIT_RANGE_RPM..=RW_INIT_RANGE_RPM);
                    }
                }
                ResourceState {
                    battery_wh: battery_frac * p.b_max_wh,
                    storage_gb: storage_frac * p.d_max_gb,
                    rw_rpm: rw,
                }
            })
            .collect();

        let t_end = self.horizon_s + self.lookahead_s();
        let points: Vec<GroundPoint> = self.targets.iter().map(|t| t.point).collect();
        for (sat, el) in self.orbits.iter().enumerate() {
            let per_target =
                access::windows_for_points(el, &points, self.cfg.target_elev_min_rad, t_end);
            let mut ws: Vec<TargetWindow> = per_target
                .into_iter()
                .enumerate()
                .flat_map(|(target, list)| {
                    list.into_iter().map(move |window| TargetWindow { target, window })
                })
                .collect();
            ws.sort_by(|a, b| {
                a.window
                    .start
                    .total_cmp(&b.window.start)
                    .then(a.target.cmp(&b.target))
            });
            self.max_window_s[sat] = ws.iter().map(|w| w.window.duration()).fold(0.0, f64::max);
            self.target_windows[sat] = ws;

            let gs = access::windows_for_points(
                el,
                &self.cfg.ground_stations,
                self.cfg.gs_elev_min_rad,
                t_end,
            );
            self.gs_windows[sat] = access::union(&gs);
        }

        self.active = vec![true; n];
        self.own_captured = vec![vec![false; self.targets.len()]; n];
        self.n_captured = 0;
        self.scored.clear();
        self.step_index = 0;
        self.done = false;
        self.is_reset = true;
        (0..n).map(|i| self.build_observation(i)).collect()
    }

    /// The next `k` targets this satellite could image, ordered by when their
    /// window opens (ongoing windows first). Targets the satellite itself has
    /// already imaged are skipped; captures by other satellites are unknown to
    /// it and do not filter the list.
    pub fn upcoming_targets(&self, sat: usize, t: f64, k: usize) -> Vec<Option<Slot>> {
        let ws = &self.target_windows[sat];
        let from = ws.partition_point(|w| w.window.start < t - self.max_window_s[sat] - 1.0);
        let until = t + self.lookahead_s();
        let mut found: Vec<Slot> = Vec::with_capacity(k);
        for tw in &ws[from..] {
            if tw.window.start >= until {
                break;
            }
            if tw.window.end <= t || self.own_captured[sat][tw.target] {
                continue;
            }
            if found.iter().any(|s| s.target == tw.target) {
                continue;
            }
            found.push(Slot {
                target: tw.target,
                window_start: tw.window.start,
                window_end: tw.window.end,
            });
        }
        found.sort_by(|a, b| {
            a.window_start
                .max(t)
                .total_cmp(&b.window_start.max(t))
                .then(a.target.cmp(&b.target))
        });
        let mut out: Vec<Option<Slot>> = found.into_iter().take(k).map(Some).collect();
        out.resize(k, None);
        out
    }

    fn sunlit(&self, sat: usize, t: f64) -> bool {
        let pos = propagate_circular(&self.orbits[sat], t).position_km;
        !in_eclipse(&pos, &sun_direction(t))
    }

    fn gs_overlaps(&self, sat: usize, t0: f64, t1: f64) -> bool {
        self.gs_windows[sat].iter().any(|w| w.overlaps_step(t0, t1))
    }

    pub fn step(&mut self, joint_action: &[Option<ActionKind>]) -> Result<StepResult, EnvError> {
        if !self.is_reset {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        let n = self.n_agents();
        if joint_action.len() != n {
            return Err(EnvError::JointActionLength {
                expected: n,
                got: joint_action.len(),
            });
        }
        let k = self.cfg.k_slots;
        for (i, a) in joint_action.iter().enumerate() {
            match (self.active[i], a) {
                (false, Some(_)) => return Err(EnvError::InactiveAgentAction(i)),
                (true, None) => return Err(EnvError::MissingAction(i)),
                (_, Some(ActionKind::Capture(slot))) if *slot >= k => {
                    return Err(EnvError::InvalidSlot {
                        agent: i,
                        slot: *slot,
                        k_slots: k,
                    })
                }
                _ => {}
            }
        }

        let t0 = self.time_s();
        // Slots resolve against what the agent observed at t0.
        let chosen: Vec<Option<Slot>> = joint_action
            .iter()
            .enumerate()
            .map(|(i, a)| match a {
                Some(ActionKind::Capture(slot)) => self.upcoming_targets(i, t0, k)[*slot],
                _ => None,
            })
            .collect();

        self.step_index += 1;
        let t1 = self.time_s();

        let mut events: Vec<AgentEvent> = joint_action
            .iter()
            .map(|a| AgentEvent {
                action: *a,
                capture: CaptureOutcome::NotAttempted,
                failed: false,
            })
            .collect();
        let mut imaged: Vec<(usize, usize)> = Vec::new();

        for i in 0..n {
            let Some(action) = joint_action[i] else { continue };
            let s = self.resources[i];
            let p = &self.params[i];
            self.resources[i] = match action {
                ActionKind::Charge => apply_charge(&s, p, self.sunlit(i, t1)),
                ActionKind::Downlink => apply_downlink(&s, p, self.gs_overlaps(i, t0, t1)),
                ActionKind::Desaturate => apply_desaturate(&s, p),
                ActionKind::Capture(_) => {
                    let slot = chosen[i];
                    let visible = slot.is_some_and(|sl| {
                        Window {
                            start: sl.window_start,
                            end: sl.window_end,
                        }
                        .overlaps_step(t0, t1)
                    });
                    let (next, ok) = apply_capture(&s, p, visible, &mut self.rng);
                    if ok {
                        let target = slot.expect("visible implies a slot").target;
                        self.own_captured[i][target] = true;
                        imaged.push((i, target));
                    } else {
                        events[i].capture = CaptureOutcome::Missed {
                            target: slot.map(|sl| sl.target),
                        };
                    }
                    next
                }
            };
        }

        let mut reward = 0.0;
        for (i, target) in imaged {
            let tgt = &mut self.targets[target];
            events[i].capture = match tgt.captured_by {
                None => {
                    tgt.captured_by = Some((i, self.step_index));
                    self.n_captured += 1;
                    reward += tgt.priority;
                    self.scored.push(ScoredCapture {
                        target,
                        sat: i,
                        step: self.step_index,
                        reward: tgt.priority,
                    });
                    CaptureOutcome::Scored {
                        target,
                        reward: tgt.priority,
                    }
                }
                Some((_, step)) if step == self.step_index => CaptureOutcome::Collision { target },
                Some(_) => CaptureOutcome::Duplicate { target },
            };
        }

        for i in 0..n {
            if self.active[i] && check_failure(&self.resources[i], &self.params[i]) {
                self.active[i] = false;
                events[i].failed = true;
                reward -= FAILURE_PENALTY;
            }
        }

        self.done = self.step_index >= self.horizon_steps || self.active.iter().all(|a| !a);
        Ok(StepResult {
            observations: (0..n).map(|i| self.build_observation(i)).collect(),
            team_reward: reward,
            events,
            done: self.done,
            active: self.active.clone(),
        })
    }

    /// Layout: battery, storage, three wheel speeds, eclipse flag, elapsed
    /// time, ground-station flag, time to next ground-station window, then
    /// `(priority, time to window start, window duration)` per slot. Times are
    /// fractions of the horizon; every component is clamped to `[-1, 1]`.
    pub fn build_observation(&self, sat: usize) -> Observation {
        let t = self.time_s();
        let h = self.horizon_s;
        let p = &self.params[sat];
        let s = &self.resources[sat];
        let mut v = Vec::with_capacity(self.obs_dim());
        v.push(s.battery_wh / p.b_max_wh);
        v.push(if p.d_max_gb > 0.0 { s.storage_gb / p.d_max_gb } else { 0.0 });
        for w in s.rw_rpm {
            v.push(w / p.omega_max_rpm);
        }
        v.push(if self.sunlit(sat, t) { 0.0 } else { 1.0 });
        v.push(t / h);
        let gs = &self.gs_windows[sat];
        let in_gs = gs.iter().any(|w| w.contains(t));
        v.push(if in_gs { 1.0 } else { 0.0 });
        let to_gs = if in_gs {
            0.0
        } else {
            gs.iter()
                .find(|w| w.start >= t)
                .map_or(1.0, |w| (w.start - t) / h)
        };
        v.push(to_gs);
        for slot in self.upcoming_targets(sat, t, self.cfg.k_slots) {
            match slot {
                Some(sl) => {
                    v.push(self.targets[sl.target].priority);
                    v.push((sl.window_start - t).max(0.0) / h);
                    v.push((sl.window_end - sl.window_start) / h);
                }
                None => v.extend([0.0, 1.0, 0.0]),
            }
        }
        for x in &mut v {
            *x = x.clamp(-1.0, 1.0);
        }
        Observation(v)
    }

    /// All observations in agent order followed by the captured fraction.
    pub fn global_state(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.state_dim());
        for i in 0..self.n_agents() {
            out.extend_from_slice(&self.build_observation(i));
        }
        out.push(self.n_captured as f64 / self.targets.len().max(1) as f64);
        out
    }
}

//! Per-satellite resource bookkeeping and action semantics.
//!
//! Every action advances one decision step of fixed length. Costs and gains
//! are expressed per step (Wh/step, GB/step, RPM/step).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SatModelError {
    #[error("invalid satellite parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceState {
    pub battery_wh: f64,
    pub storage_gb: f64,
    pub rw_rpm: [f64; 3],
}

impl ResourceState {
    pub fn is_finite(&self) -> bool {
        self.battery_wh.is_finite()
            && self.storage_gb.is_finite()
            && self.rw_rpm.iter().all(|w| w.is_finite())
    }

    pub fn within_bounds(&self, p: &SatelliteParams) -> bool {
        self.is_finite()
            && (0.0..=p.b_max_wh).contains(&self.battery_wh)
            && (0.0..=p.d_max_gb).contains(&self.storage_gb)
    }
}

pub const IMAGE_SMALL_GB: f64 = 0.5;
pub const IMAGE_LARGE_GB: f64 = 2.0;
pub const BAUD_HIGH_GB_PER_STEP: f64 = 0.25;
pub const BAUD_LOW_GB_PER_STEP: f64 = 0.03;
pub const DISTURBANCE_FAIL_PROB: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteParams {
    pub b_min_wh: f64,
    pub b_max_wh: f64,
    pub d_max_gb: f64,
    pub omega_max_rpm: f64,
    pub base_draw_wh: f64,
    pub capture_cost_wh: f64,
    pub downlink_cost_wh: f64,
    pub desat_cost_wh: f64,
    pub charge_gain_wh: f64,
    pub image_size_gb: f64,
    pub baud_gb_per_step: f64,
    pub slew_rpm_min: f64,
    pub slew_rpm_max: f64,
    pub desat_rate_rpm: f64,
    pub disturbance_fail_prob: f64,
}

impl Default for SatelliteParams {
    fn default() -> Self {
        Self {
            b_min_wh: 0.0,
            b_max_wh: 400.0,
            d_max_gb: 500.0,
            omega_max_rpm: 6000.0,
            base_draw_wh: 0.2,
            capture_cost_wh: 1.0,
            downlink_cost_wh: 1.5,
            desat_cost_wh: 0.5,
            charge_gain_wh: 4.0,
            image_size_gb: IMAGE_SMALL_GB,
            baud_gb_per_step: BAUD_HIGH_GB_PER_STEP,
            slew_rpm_min: 200.0,
            slew_rpm_max: 600.0,
            desat_rate_rpm: 1500.0,
            disturbance_fail_prob: DISTURBANCE_FAIL_PROB,
        }
    }
}

impl SatelliteParams {
    pub fn validate(&self) -> Result<(), SatModelError> {
        let fields = [
            ("b_min_wh", self.b_min_wh),
            ("b_max_wh", self.b_max_wh),
            ("d_max_gb", self.d_max_gb),
            ("omega_max_rpm", self.omega_max_rpm),
            ("base_draw_wh", self.base_draw_wh),
            ("capture_cost_wh", self.capture_cost_wh),
            ("downlink_cost_wh", self.downlink_cost_wh),
            ("desat_cost_wh", self.desat_cost_wh),
            ("charge_gain_wh", self.charge_gain_wh),
            ("image_size_gb", self.image_size_gb),
            ("baud_gb_per_step", self.baud_gb_per_step),
            ("slew_rpm_min", self.slew_rpm_min),
            ("slew_rpm_max", self.slew_rpm_max),
            ("desat_rate_rpm", self.desat_rate_rpm),
            ("disturbance_fail_prob", self.disturbance_fail_prob),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(SatModelError::InvalidParams(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.b_min_wh >= self.b_max_wh {
            return Err(SatModelError::InvalidParams("b_min_wh must be below b_max_wh".into()));
        }
        if self.slew_rpm_min > self.slew_rpm_max {
            return Err(SatModelError::InvalidParams(
                "slew_rpm_min must not exceed slew_rpm_max".into(),
            ));
        }
        if self.disturbance_fail_prob > 1.0 {
            return Err(SatModelError::InvalidParams(
                "disturbance_fail_prob must be a probability".into(),
            ));
        }
        Ok(())
    }
}

/// One decision. Capture targets one of the observed upcoming-target slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Charge,
    Downlink,
    Desaturate,
    Capture(usize),
}

impl ActionKind {
    pub fn index(self) -> usize {
        match self {
            ActionKind::Charge => 0,
            ActionKind::Downlink => 1,
            ActionKind::Desaturate => 2,
            ActionKind::Capture(slot) => 3 + slot,
        }
    }

    pub fn from_index(index: usize, k_slots: usize) -> Option<Self> {
        match index {
            0 => Some(ActionKind::Charge),
            1 => Some(ActionKind::Downlink),
            2 => Some(ActionKind::Desaturate),
            i if i < 3 + k_slots => Some(ActionKind::Capture(i - 3)),
            _ => None,
        }
    }

    pub fn label(self) -> String {
        match self {
            ActionKind::Charge => "charge".into(),
            ActionKind::Downlink => "downlink".into(),
            ActionKind::Desaturate => "desaturate".into(),
            ActionKind::Capture(slot) => format!("capture_{slot}"),
        }
    }
}

fn clamp_battery(b: f64, p: &SatelliteParams) -> f64 {
    b.clamp(0.0, p.b_max_wh)
}

pub fn apply_charge(s: &ResourceState, p: &SatelliteParams, sunlit: bool) -> ResourceState {
    let gain = if sunlit { p.charge_gain_wh } else { 0.0 };
    ResourceState {
        battery_wh: clamp_battery(s.battery_wh - p.base_draw_wh + gain, p),
        ..*s
    }
}

/// Uniform magnitude in `[slew_rpm_min, slew_rpm_max]` with a random sign, per axis.
pub fn slew_increment<R: Rng + ?Sized>(rng: &mut R, p: &SatelliteParams) -> [f64; 3] {
    let mut out = [0.0; 3];
    for w in &mut out {
        let u: f64 = rng.random();
        let magnitude = p.slew_rpm_min + u * (p.slew_rpm_max - p.slew_rpm_min);
        *w = if rng.random::<bool>() { magnitude } else { -magnitude };
    }
    out
}

/// Attempt an image capture. The slew and energy are spent whether or not the
/// image is obtained.
pub fn apply_capture<R: Rng + ?Sized>(
    s: &ResourceState,
    p: &SatelliteParams,
    target_visible: bool,
    rng: &mut R,
) -> (ResourceState, bool) {
    let slew = slew_increment(rng, p);
    let draw: f64 = rng.random();
    let fits = s.storage_gb + p.image_size_gb <= p.d_max_gb;
    let captured = target_visible && fits && draw >= p.disturbance_fail_prob;
    let next = ResourceState {
        battery_wh: clamp_battery(s.battery_wh - p.base_draw_wh - p.capture_cost_wh, p),
        storage_gb: if captured {
            s.storage_gb + p.image_size_gb
        } else {
            s.storage_gb
        },
        rw_rpm: [
            s.rw_rpm[0] + slew[0],
            s.rw_rpm[1] + slew[1],
            s.rw_rpm[2] + slew[2],
        ],
    };
    (next, captured)
}

pub fn apply_downlink(s: &ResourceState, p: &SatelliteParams, gs_visible: bool) -> ResourceState {
    ResourceState {
        battery_wh: clamp_battery(s.battery_wh - p.base_draw_wh - p.downlink_cost_wh, p),
        storage_gb: if gs_visible {
            (s.storage_gb - p.baud_gb_per_step).max(0.0)
        } else {
            s.storage_gb
        },
        rw_rpm: s.rw_rpm,
    }
}

pub fn apply_desaturate(s: &ResourceState, p: &SatelliteParams) -> ResourceState {
    let toward_zero = |w: f64| {
        if w > 0.0 {
            (w - p.desat_rate_rpm).max(0.0)
        } else {
            (w + p.desat_rate_rpm).min(0.0)
        }
    };
    ResourceState {
        battery_wh: clamp_battery(s.battery_wh - p.base_draw_wh - p.desat_cost_wh, p),
        storage_gb: s.storage_gb,
        rw_rpm: s.rw_rpm.map(toward_zero),
    }
}

/// Battery depleted or any wheel at or beyond its speed limit.
pub fn check_failure(s: &ResourceState, p: &SatelliteParams) -> bool {
    s.battery_wh <= 0.0 || s.rw_rpm.iter().any(|w| w.abs() >= p.omega_max_rpm)
}

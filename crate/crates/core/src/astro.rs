//! Circular-orbit geometry on a spherical, uniformly rotating Earth.
//!
//! Frames: the inertial frame (ECI) and the Earth-fixed frame (ECEF) share the
//! polar axis and coincide at `t = 0`. All lengths are kilometres, all times
//! seconds since epoch, all angles radians.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EARTH_RADIUS_KM: f64 = 6371.0;
pub const MU_EARTH_KM3_S2: f64 = 398_600.441_8;
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;
pub const YEAR_S: f64 = 365.25 * 86_400.0;
pub const OBLIQUITY_RAD: f64 = 23.44 * PI / 180.0;

pub type Vec3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AstroError {
    #[error("semi-major axis must be positive, got {0} km")]
    NonPositiveAxis(f64),
    #[error("semi-major axis {0} km is inside the Earth")]
    SubsurfaceOrbit(f64),
    #[error("non-finite orbital angle")]
    NonFiniteAngle,
    #[error("ground point out of range: lat {lat} rad, lon {lon} rad")]
    GroundPointRange { lat: f64, lon: f64 },
    #[error("invalid constellation: {0}")]
    Constellation(String),
}

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn scale(a: &Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Circular Keplerian orbit. Eccentricity is always zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub semi_major_axis_km: f64,
    pub inclination_rad: f64,
    pub raan_rad: f64,
    pub anomaly_at_epoch_rad: f64,
}

impl OrbitalElements {
    pub fn new(
        semi_major_axis_km: f64,
        inclination_rad: f64,
        raan_rad: f64,
        anomaly_at_epoch_rad: f64,
    ) -> Result<Self, AstroError> {
        if !(semi_major_axis_km > EARTH_RADIUS_KM) {
            return Err(AstroError::SubsurfaceOrbit(semi_major_axis_km));
        }
        if ![inclination_rad, raan_rad, anomaly_at_epoch_rad]
            .iter()
            .all(|a| a.is_finite())
        {
            return Err(AstroError::NonFiniteAngle);
        }
        Ok(Self {
            semi_major_axis_km,
            inclination_rad,
            raan_rad,
            anomaly_at_epoch_rad,
        })
    }

    pub fn period_s(&self) -> f64 {
        kepler_period(self.semi_major_axis_km)
    }

    pub fn mean_motion_rad_s(&self) -> f64 {
        TAU / self.period_s()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianState {
    pub position_km: Vec3,
    pub velocity_km_s: Vec3,
}

fn kepler_period(a_km: f64) -> f64 {
    TAU * (a_km.powi(3) / MU_EARTH_KM3_S2).sqrt()
}

/// Two-body period of a circular orbit, `2π·sqrt(a³/μ)`.
pub fn orbital_period(a_km: f64) -> Result<f64, AstroError> {
    if !(a_km > 0.0) {
        return Err(AstroError::NonPositiveAxis(a_km));
    }
    Ok(kepler_period(a_km))
}

/// Position and velocity on the circular orbit at time `t`.
pub fn propagate_circular(el: &OrbitalElements, t: f64) -> CartesianState {
    let a = el.semi_major_axis_km;
    let n = el.mean_motion_rad_s();
    let nu = el.anomaly_at_epoch_rad + n * t;
    let (snu, cnu) = nu.sin_cos();
    let (si, ci) = el.inclination_rad.sin_cos();
    let (so, co) = el.raan_rad.sin_cos();

    // R3(Ω)·R1(i) applied to the in-plane unit vectors.
    let p = [co, so, 0.0];
    let q = [-so * ci, co * ci, si];
    let position_km = [
        a * (cnu * p[0] + snu * q[0]),
        a * (cnu * p[1] + snu * q[1]),
        a * (cnu * p[2] + snu * q[2]),
    ];
    let v = a * n;
    let velocity_km_s = [
        v * (-snu * p[0] + cnu * q[0]),
        v * (-snu * p[1] + cnu * q[1]),
        v * (-snu * p[2] + cnu * q[2]),
    ];
    CartesianState {
        position_km,
        velocity_km_s,
    }
}

/// Rotate an inertial vector into the Earth-fixed frame at time `t`.
pub fn eci_to_ecef(pos_eci: &Vec3, t: f64) -> Vec3 {
    let (s, c) = (EARTH_ROTATION_RAD_S * t).sin_cos();
    [
        c * pos_eci[0] + s * pos_eci[1],
        -s * pos_eci[0] + c * pos_eci[1],
        pos_eci[2],
    ]
}

/// Unit vector from Earth to Sun on a circular ecliptic, `(1, 0, 0)` at epoch.
pub fn sun_direction(t: f64) -> Vec3 {
    let (sl, cl) = (TAU * t / YEAR_S).sin_cos();
    let (se, ce) = OBLIQUITY_RAD.sin_cos();
    [cl, sl * ce, sl * se]
}

/// Cylindrical umbra: behind the Earth and within one Earth radius of the
/// Earth–Sun line.
pub fn in_eclipse(sat_pos_eci: &Vec3, sun_dir: &Vec3) -> bool {
    let along = dot(sat_pos_eci, sun_dir);
    if along >= 0.0 {
        return false;
    }
    let perp = sub(sat_pos_eci, &scale(sun_dir, along));
    norm(&perp) < EARTH_RADIUS_KM
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    pub lat_rad: f64,
    pub lon_rad: f64,
}

impl GroundPoint {
    pub fn new(lat_rad: f64, lon_rad: f64) -> Result<Self, AstroError> {
        let ok = lat_rad.is_finite()
            && lon_rad.is_finite()
            && (-PI / 2.0..=PI / 2.0).contains(&lat_rad)
            && (-PI..PI).contains(&lon_rad);
        if !ok {
            return Err(AstroError::GroundPointRange {
                lat: lat_rad,
                lon: lon_rad,
            });
        }
        Ok(Self { lat_rad, lon_rad })
    }

    /// Like [`GroundPoint::new`] but takes degrees and wraps longitude.
    pub fn from_degrees(lat_deg: f64, lon_deg: f64) -> Result<Self, AstroError> {
        let lon = (lon_deg + 180.0).rem_euclid(360.0) - 180.0;
        Self::new(lat_deg.to_radians(), lon.to_radians())
    }

    pub fn up(&self) -> Vec3 {
        let (sl, cl) = self.lat_rad.sin_cos();
        let (so, co) = self.lon_rad.sin_cos();
        [cl * co, cl * so, sl]
    }

    pub fn ecef_km(&self) -> Vec3 {
        scale(&self.up(), EARTH_RADIUS_KM)
    }
}

/// Elevation of the satellite above the local horizon plane at `gp`.
pub fn elevation_angle(gp: &GroundPoint, sat_ecef: &Vec3) -> f64 {
    let up = gp.up();
    let los = sub(sat_ecef, &scale(&up, EARTH_RADIUS_KM));
    let range = norm(&los);
    if range == 0.0 {
        return PI / 2.0;
    }
    (dot(&los, &up) / range).clamp(-1.0, 1.0).asin()
}

/// Largest Earth-central angle between a ground point and the sub-satellite
/// point at which a satellite at `radius_km` is still at or above `min_elev`.
pub fn max_central_angle(radius_km: f64, min_elev_rad: f64) -> f64 {
    let ratio = (EARTH_RADIUS_KM * min_elev_rad.cos() / radius_km).clamp(-1.0, 1.0);
    (ratio.acos() - min_elev_rad).clamp(0.0, PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstellationKind {
    WalkerDelta,
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstellationSpec {
    pub kind: ConstellationKind,
    pub n_sats: usize,
    pub n_planes: usize,
    pub phasing_f: usize,
    pub inclination_rad: f64,
    pub altitude_km: f64,
    pub cluster_spacing_rad: f64,
}

impl ConstellationSpec {
    pub fn cluster(n_sats: usize) -> Self {
        Self {
            kind: ConstellationKind::Cluster,
            n_sats,
            n_planes: 1,
            phasing_f: 0,
            inclination_rad: 45f64.to_radians(),
            altitude_km: 500.0,
            cluster_spacing_rad: 0.5f64.to_radians(),
        }
    }

    pub fn walker_delta(n_sats: usize, n_planes: usize, phasing_f: usize) -> Self {
        Self {
            kind: ConstellationKind::WalkerDelta,
            n_sats,
            n_planes,
            phasing_f,
            ..Self::cluster(n_sats)
        }
    }

    pub fn semi_major_axis_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }

    pub fn validate(&self) -> Result<(), AstroError> {
        let bad = |m: &str| Err(AstroError::Constellation(m.to_owned()));
        if self.n_sats == 0 {
            return bad("n_sats must be at least 1");
        }
        if !(self.altitude_km > 0.0) {
            return bad("altitude must be positive");
        }
        if !self.inclination_rad.is_finite() {
            return bad("inclination must be finite");
        }
        match self.kind {
            ConstellationKind::WalkerDelta => {
                if self.n_planes == 0 || !self.n_sats.is_multiple_of(self.n_planes) {
                    return bad("n_sats must be a positive multiple of n_planes");
                }
            }
            ConstellationKind::Cluster => {
                if !(self.cluster_spacing_rad > 0.0) || !self.cluster_spacing_rad.is_finite() {
                    return bad("cluster spacing must be positive");
                }
            }
        }
        Ok(())
    }
}

pub fn make_walker_delta(spec: &ConstellationSpec) -> Result<Vec<OrbitalElements>, AstroError> {
    spec.validate()?;
    if spec.kind != ConstellationKind::WalkerDelta {
        return Err(AstroError::Constellation("expected a walker_delta spec".into()));
    }
    let per_plane = spec.n_sats / spec.n_planes;
    let n = spec.n_sats as f64;
    let mut out = Vec::with_capacity(spec.n_sats);
    for plane in 0..spec.n_planes {
        let raan = TAU * plane as f64 / spec.n_planes as f64;
        let offset = TAU * (spec.phasing_f * plane) as f64 / n;
        for slot in 0..per_plane {
            let anomaly = (TAU * slot as f64 / per_plane as f64 + offset).rem_euclid(TAU);
            out.push(OrbitalElements::new(
                spec.semi_major_axis_km(),
                spec.inclination_rad,
                raan,
                anomaly,
            )?);
        }
    }
    Ok(out)
}

/// Single-plane cluster; index 0 leads.
pub fn make_cluster(spec: &ConstellationSpec) -> Result<Vec<OrbitalElements>, AstroError> {
    spec.validate()?;
    if spec.kind != ConstellationKind::Cluster {
        return Err(AstroError::Constellation("expected a cluster spec".into()));
    }
    (0..spec.n_sats)
        .map(|i| {
            OrbitalElements::new(
                spec.semi_major_axis_km(),
                spec.inclination_rad,
                0.0,
                (spec.n_sats - 1 - i) as f64 * spec.cluster_spacing_rad,
            )
        })
        .collect()
}

pub fn make_constellation(spec: &ConstellationSpec) -> Result<Vec<OrbitalElements>, AstroError> {
    match spec.kind {
        ConstellationKind::WalkerDelta => make_walker_delta(spec),
        ConstellationKind::Cluster => make_cluster(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn period_examples() {
        // Kepler's third law evaluated independently of the implementation.
        let oracle = |a: f64| 2.0 * PI * (a * a * a / 398_600.441_8f64).sqrt();
        assert!(rel(orbital_period(6871.0).unwrap(), oracle(6871.0)) < 1e-12);
        assert!((orbital_period(6871.0).unwrap() - 5668.14).abs() < 0.01);
        assert!((orbital_period(42164.0).unwrap() - 86164.0).abs() < 1.0);
        let ratio = orbital_period(4.0 * 6871.0).unwrap() / orbital_period(6871.0).unwrap();
        assert!((ratio - 8.0).abs() < 1e-12);
        assert!(orbital_period(0.0).is_err());
        assert!(orbital_period(-5.0).is_err());
    }

    #[test]
    fn propagation_examples() {
        let el = OrbitalElements::new(6871.0, 0.0, 0.0, 0.0).unwrap();
        let t_period = el.period_s();
        let s0 = propagate_circular(&el, 0.0);
        assert!(rel(s0.position_km[0], 6871.0) < 1e-15);
        assert!(s0.position_km[1].abs() < 1e-12 && s0.position_km[2].abs() < 1e-12);
        let s1 = propagate_circular(&el, t_period);
        for k in 0..3 {
            assert!((s1.position_km[k] - s0.position_km[k]).abs() / 6871.0 < 1e-9);
        }
        let half = propagate_circular(&el, t_period / 2.0);
        assert!((half.position_km[0] + 6871.0).abs() / 6871.0 < 1e-12);
        assert!(half.position_km[1].abs() / 6871.0 < 1e-9);
    }

    #[test]
    fn velocity_is_perpendicular_and_circular() {
        let el = OrbitalElements::new(7000.0, 1.1, 0.3, 2.0).unwrap();
        for i in 0..50 {
            let s = propagate_circular(&el, i as f64 * 313.7);
            let r = norm(&s.position_km);
            assert!(rel(r, 7000.0) < 1e-12);
            let v = norm(&s.velocity_km_s);
            assert!(dot(&s.position_km, &s.velocity_km_s).abs() / (r * v) < 1e-12);
            assert!(rel(v, (MU_EARTH_KM3_S2 / 7000.0).sqrt()) < 1e-12);
        }
    }

    #[test]
    fn ecef_rotation_examples() {
        let p = [1234.0, -567.0, 89.0];
        assert_eq!(eci_to_ecef(&p, 0.0), p);
        let polar = [0.0, 0.0, 7000.0];
        assert_eq!(eci_to_ecef(&polar, 12345.6), polar);
        let full = eci_to_ecef(&p, TAU / EARTH_ROTATION_RAD_S);
        for k in 0..3 {
            assert!((full[k] - p[k]).abs() / norm(&p) < 1e-9);
        }
    }

    #[test]
    fn sun_direction_examples() {
        assert_eq!(sun_direction(0.0), [1.0, 0.0, 0.0]);
        let q = sun_direction(YEAR_S / 4.0);
        let e = 23.44f64.to_radians();
        assert!(q[0].abs() < 1e-12);
        assert!((q[1] - e.cos()).abs() < 1e-12 && (q[2] - e.sin()).abs() < 1e-12);
        for i in 0..100 {
            assert!((norm(&sun_direction(i as f64 * 1.0e5)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eclipse_truth_table() {
        let sun = sun_direction(1.0e6);
        let a = 6871.0;
        assert!(!in_eclipse(&scale(&sun, a), &sun));
        assert!(in_eclipse(&scale(&sun, -a), &sun));
        // any vector perpendicular to the sun direction
        let perp = {
            let c = [sun[1], -sun[0], 0.0];
            scale(&c, a / norm(&c))
        };
        assert!(!in_eclipse(&perp, &sun));
    }

    #[test]
    fn elevation_examples() {
        let gp = GroundPoint::from_degrees(30.0, 40.0).unwrap();
        let zenith = scale(&gp.up(), 6871.0);
        assert!((elevation_angle(&gp, &zenith) - PI / 2.0).abs() < 1e-12);
        let antipode = scale(&gp.up(), -6871.0);
        assert!(elevation_angle(&gp, &antipode) < 0.0);
    }

    #[test]
    fn horizon_tangent_arc_gives_zero_elevation() {
        // Independent 2-D oracle: ground point at (0, R), satellite at central
        // angle λ on a circle of radius r. Bisection for the λ where the line of
        // sight is horizontal.
        let r_e = EARTH_RADIUS_KM;
        let r = r_e + 500.0;
        let elev_2d = |lam: f64| {
            let (dx, dy) = (r * lam.sin(), r * lam.cos() - r_e);
            dy.atan2(dx)
        };
        let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if elev_2d(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        let gp = GroundPoint::new(0.0, 0.0).unwrap();
        // satellite along the equator at longitude λ
        let sat = [r * lam.cos(), r * lam.sin(), 0.0];
        assert!(elevation_angle(&gp, &sat).abs() < 1e-6);
        assert!((max_central_angle(r, 0.0) - lam).abs() < 1e-9);
    }

    #[test]
    fn walker_examples() {
        let mut spec = ConstellationSpec::walker_delta(4, 2, 1);
        spec.inclination_rad = 45f64.to_radians();
        let els = make_walker_delta(&spec).unwrap();
        assert_eq!(els.len(), 4);
        let raans: Vec<f64> = els.iter().map(|e| e.raan_rad).collect();
        assert_eq!(raans, vec![0.0, 0.0, PI, PI]);
        let nus: Vec<f64> = els.iter().map(|e| e.anomaly_at_epoch_rad).collect();
        let want = [0.0, PI, PI / 2.0, 3.0 * PI / 2.0];
        for (g, w) in nus.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }

        let single = make_walker_delta(&ConstellationSpec::walker_delta(4, 1, 0)).unwrap();
        let want = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
        for (e, w) in single.iter().zip(want) {
            assert!((e.anomaly_at_epoch_rad - w).abs() < 1e-12);
        }
        assert!(make_walker_delta(&ConstellationSpec::walker_delta(5, 2, 0)).is_err());
        assert!(make_walker_delta(&ConstellationSpec::cluster(4)).is_err());
    }

    #[test]
    fn cluster_examples() {
        let els = make_cluster(&ConstellationSpec::cluster(4)).unwrap();
        let want = [1.5f64, 1.0, 0.5, 0.0];
        for (e, w) in els.iter().zip(want) {
            assert!((e.anomaly_at_epoch_rad - w.to_radians()).abs() < 1e-12);
            assert_eq!(e.raan_rad, 0.0);
        }
        let one = make_cluster(&ConstellationSpec::cluster(1)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].anomaly_at_epoch_rad, 0.0);
        let mut bad = ConstellationSpec::cluster(3);
        bad.cluster_spacing_rad = 0.0;
        assert!(make_cluster(&bad).is_err());
    }

    #[test]
    fn ground_point_bounds() {
        assert!(GroundPoint::new(PI / 2.0, -PI).is_ok());
        assert!(GroundPoint::new(1.6, 0.0).is_err());
        assert!(GroundPoint::new(0.0, PI).is_err());
        let wrapped = GroundPoint::from_degrees(0.0, 190.0).unwrap();
        assert!((wrapped.lon_rad - (-170f64).to_radians()).abs() < 1e-12);
    }
}

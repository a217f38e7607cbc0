//! Visibility windows between one satellite and many ground points.
//!
//! The horizon is cut into coarse segments. A ground point is only examined in
//! a segment when the sub-satellite point at the segment midpoint is within the
//! largest possible visibility cone plus the ground-track travel over half a
//! segment. Candidate segments are then scanned at a fine step and window edges
//! refined by bisection.

use crate::astro::{
    self, eci_to_ecef, elevation_angle, max_central_angle, propagate_circular, GroundPoint,
    OrbitalElements, Vec3, EARTH_ROTATION_RAD_S,
};

const COARSE_DT_S: f64 = 30.0;
const FINE_DT_S: f64 = 1.0;
const BISECTION_ITERS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// True when the window intersects the half-open step `(t0, t1]`.
    pub fn overlaps_step(&self, t0: f64, t1: f64) -> bool {
        self.start <= t1 && self.end > t0
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

fn sat_ecef(el: &OrbitalElements, t: f64) -> Vec3 {
    eci_to_ecef(&propagate_circular(el, t).position_km, t)
}

/// Windows in `[0, t_end]` during which the elevation of the satellite seen
/// from `points[j]` is at least `min_elev_rad`. Returned per point, sorted and
/// merged.
pub fn windows_for_points(
    el: &OrbitalElements,
    points: &[GroundPoint],
    min_elev_rad: f64,
    t_end: f64,
) -> Vec<Vec<Window>> {
    let mut out: Vec<Vec<Window>> = vec![Vec::new(); points.len()];
    if points.is_empty() || t_end <= 0.0 {
        return out;
    }
    let ups: Vec<Vec3> = points.iter().map(|p| p.up()).collect();
    let radius = el.semi_major_axis_km;
    let travel = (el.mean_motion_rad_s() + EARTH_ROTATION_RAD_S) * COARSE_DT_S * 0.5;
    let cone = max_central_angle(radius, min_elev_rad) + travel + 1e-3;
    let cos_cone = if cone >= std::f64::consts::PI { -2.0 } else { cone.cos() };

    let n_seg = (t_end / COARSE_DT_S).ceil() as usize;
    let edge = |k: usize| ((k as f64) * COARSE_DT_S).min(t_end);
    for k in 0..n_seg {
        let (a, b) = (edge(k), edge(k + 1));
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        let sub = sat_ecef(el, mid);
        let r = astro::norm(&sub);
        let dir = [sub[0] / r, sub[1] / r, sub[2] / r];
        for (j, up) in ups.iter().enumerate() {
            if astro::dot(&dir, up) < cos_cone {
                continue;
            }
            scan_segment(el, &points[j], min_elev_rad, a, b, &mut out[j]);
        }
    }
    for w in &mut out {
        merge(w);
    }
    out
}

fn scan_segment(
    el: &OrbitalElements,
    gp: &GroundPoint,
    min_elev: f64,
    a: f64,
    b: f64,
    out: &mut Vec<Window>,
) {
    let visible = |t: f64| elevation_angle(gp, &sat_ecef(el, t)) >= min_elev;
    let n = ((b - a) / FINE_DT_S).ceil().max(1.0) as usize;
    let at = |i: usize| if i == n { b } else { a + (b - a) * i as f64 / n as f64 };

    let mut prev_t = a;
    let mut prev_v = visible(a);
    let mut open = if prev_v { Some(a) } else { None };
    for i in 1..=n {
        let t = at(i);
        let v = visible(t);
        if v != prev_v {
            let edge = bisect(&visible, prev_t, t, prev_v);
            if v {
                open = Some(edge);
            } else if let Some(s) = open.take() {
                out.push(Window { start: s, end: edge });
            }
        }
        prev_t = t;
        prev_v = v;
    }
    if let Some(s) = open {
        out.push(Window { start: s, end: b });
    }
}

/// Locate the visibility change between `lo` (state `lo_state`) and `hi`.
fn bisect(visible: &impl Fn(f64) -> bool, mut lo: f64, mut hi: f64, lo_state: bool) -> f64 {
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if visible(mid) == lo_state {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn merge(ws: &mut Vec<Window>) {
    if ws.len() < 2 {
        return;
    }
    ws.sort_by(|x, y| x.start.total_cmp(&y.start));
    let mut merged: Vec<Window> = Vec::with_capacity(ws.len());
    for w in ws.drain(..) {
        match merged.last_mut() {
            Some(last) if w.start <= last.end + 1e-6 => last.end = last.end.max(w.end),
            _ => merged.push(w),
        }
    }
    *ws = merged;
}

/// Union of several sorted window lists.
pub fn union(lists: &[Vec<Window>]) -> Vec<Window> {
    let mut all: Vec<Window> = lists.iter().flatten().copied().collect();
    merge(&mut all);
    all
}

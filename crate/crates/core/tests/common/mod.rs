//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's decision code.

#![allow(dead_code)]

use ringflight::feasibility::FeasibilityQuery;

pub const BAND: f64 = 1e-9;

/// Outcome of flying the constant-acceleration profile that covers the
/// query distance in exactly `t`, integrated in 1 ms steps.
#[derive(Debug, Clone, Copy)]
pub struct Flown {
    pub accel: f64,
    pub final_speed: f64,
    pub distance: f64,
    /// Distance a vehicle cruising at `v_max` covers in `t`.
    pub cruise_reach: f64,
}

pub fn fly_profile(q: &FeasibilityQuery) -> Flown {
    let d: f64 = (0..3).map(|i| (q.p_dest[i] - q.p_src[i]).powi(2)).sum::<f64>().sqrt();
    // acceleration that lands exactly on d at t: solve s(t) = d
    let accel = (d - q.v0 * q.t) / (0.5 * q.t * q.t);
    let dt: f64 = 1e-3;
    let (mut s, mut v, mut reach, mut clock) = (0.0, q.v0, 0.0, 0.0);
    while clock < q.t {
        let h = dt.min(q.t - clock);
        s += v * h + 0.5 * accel * h * h;
        v += accel * h;
        reach += q.v_max * h;
        clock += h;
    }
    Flown {
        accel,
        final_speed: v,
        distance: s,
        cruise_reach: reach,
    }
}

/// `None` when the query sits within `BAND` of a decision boundary.
pub fn oracle_feasible(q: &FeasibilityQuery) -> Option<bool> {
    let f = fly_profile(q);
    let margins = [f.accel - q.a_max, f.final_speed - q.v_max, f.distance - f.cruise_reach];
    let scale = |x: f64| BAND * (1.0 + x.abs());
    if margins
        .iter()
        .zip([q.a_max, q.v_max, f.cruise_reach])
        .any(|(m, s)| m.abs() <= scale(s))
    {
        return None;
    }
    Some(f.accel <= q.a_max && f.final_speed <= q.v_max && f.distance <= f.cruise_reach)
}

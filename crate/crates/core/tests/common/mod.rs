#![allow(dead_code)]

use emvsim_core::baselines::{MpcParams, MpcState};
use emvsim_core::{Action, PairKinematics, RiskParams};

pub const ORACLE_DT: f64 = 1e-3;

/// One-dimensional body that follows an acceleration for a fixed time and
/// then brakes against its velocity until it stops.
#[derive(Debug, Clone, Copy)]
struct Body {
    x: f64,
    v: f64,
    response_accel: f64,
    brake: f64,
}

impl Body {
    /// Exact constant-acceleration advance over `dt`, stopping at zero speed
    /// once braking has begun.
    fn advance(&mut self, t: f64, dt: f64, response_end: f64) {
        if t + 0.5 * dt < response_end {
            let a = self.response_accel;
            self.x += self.v * dt + 0.5 * a * dt * dt;
            self.v += a * dt;
            return;
        }
        if self.v == 0.0 {
            return;
        }
        let a = -self.brake * self.v.signum();
        let stop = self.v.abs() / self.brake;
        let h = dt.min(stop);
        self.x += self.v * h + 0.5 * a * h * h;
        self.v = if h == stop { 0.0 } else { self.v + a * h };
    }

    fn stopped(&self) -> bool {
        self.v == 0.0
    }
}

/// Gap extremes of one worst-case braking run.
#[derive(Debug, Clone, Copy)]
pub struct BrakingOutcome {
    pub min_lon_gap: f64,
    pub min_lat_gap: f64,
    pub final_lon_gap: f64,
    pub final_lat_gap: f64,
    pub overlap: bool,
}

/// Worst-case braking trajectory of an ordered pair in both directions.
///
/// Longitudinally the rear vehicle accelerates at `a_max` during the response
/// time and then brakes at `rear_brake`, while the front vehicle brakes at
/// `b_max` from the start. Laterally both vehicles accelerate toward each other
/// at `a_lat_max` during the response time and then brake at `lat_brake` until
/// their lateral speed vanishes. Integration is exact per 1 ms step.
pub fn braking_oracle(k: &PairKinematics, p: &RiskParams, rear_brake: f64, lat_brake: f64) -> BrakingOutcome {
    let mut rear = Body { x: 0.0, v: k.v_rear, response_accel: p.a_max, brake: rear_brake };
    // The front vehicle has no response phase; it brakes from the start.
    let mut front = Body { x: 0.0, v: k.v_front, response_accel: 0.0, brake: p.b_max };
    let mut left = Body { x: 0.0, v: k.v_left, response_accel: p.a_lat_max, brake: lat_brake };
    let mut right = Body { x: 0.0, v: k.v_right, response_accel: -p.a_lat_max, brake: lat_brake };
    let lon_gap = |r: &Body, f: &Body| k.d_lon + f.x - r.x;
    let lat_gap = |l: &Body, r: &Body| k.d_lat - l.x + r.x;

    let mut out = BrakingOutcome {
        min_lon_gap: k.d_lon,
        min_lat_gap: k.d_lat,
        final_lon_gap: k.d_lon,
        final_lat_gap: k.d_lat,
        overlap: k.d_lon < 0.0 && k.d_lat < 0.0,
    };
    let mut t = 0.0;
    let mut step = 0u64;
    loop {
        let all_stopped = step as f64 * ORACLE_DT > p.rho
            && rear.stopped()
            && front.stopped()
            && left.stopped()
            && right.stopped();
        if all_stopped {
            break;
        }
        rear.advance(t, ORACLE_DT, p.rho);
        front.advance(t, ORACLE_DT, 0.0);
        left.advance(t, ORACLE_DT, p.rho);
        right.advance(t, ORACLE_DT, p.rho);
        step += 1;
        t = step as f64 * ORACLE_DT;
        let lon = lon_gap(&rear, &front);
        let lat = lat_gap(&left, &right);
        out.min_lon_gap = out.min_lon_gap.min(lon);
        out.min_lat_gap = out.min_lat_gap.min(lat);
        out.final_lon_gap = lon;
        out.final_lat_gap = lat;
        if lon < 0.0 && lat < 0.0 {
            out.overlap = true;
        }
    }
    out
}

/// Smallest initial longitudinal gap, to `tol`, for which the worst-case
/// braking profile keeps the gap non-negative.
pub fn minimal_safe_gap(v_rear: f64, v_front: f64, p: &RiskParams, rear_brake: f64, tol: f64) -> f64 {
    let survives = |d: f64| {
        let k = PairKinematics { v_rear, v_front, v_left: 0.0, v_right: 0.0, d_lon: d, d_lat: 10.0 };
        braking_oracle(&k, p, rear_brake, p.b_lat_min).min_lon_gap >= 0.0
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while !survives(hi) {
        hi *= 2.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if survives(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Brute-force MPC: every action sequence of length `horizon`, simulated
/// through separate ego and leader positions, returning the first action of
/// the cheapest feasible sequence (earliest sequence in index order on ties).
pub fn exhaustive_mpc(x: MpcState, p: &MpcParams, actions: &[Action]) -> Option<Action> {
    let n = actions.len();
    let total = n.pow(p.horizon as u32);
    let leader_v = x.v + x.dv;
    let mut best: Option<(f64, usize)> = None;
    for code in 0..total {
        // Most significant digit first so `code` order is lexicographic.
        let mut digits = vec![0usize; p.horizon];
        let mut c = code;
        for d in digits.iter_mut().rev() {
            *d = c % n;
            c /= n;
        }
        let (mut ego_x, mut ego_v) = (0.0f64, x.v);
        let mut cost = 0.0;
        let mut feasible = true;
        for (step, &d) in digits.iter().enumerate() {
            let u = actions[d].acceleration();
            if u < p.accel_min || u > p.accel_max {
                feasible = false;
                break;
            }
            ego_x += ego_v * p.dt + 0.5 * u * p.dt * p.dt;
            ego_v += u * p.dt;
            let elapsed = (step + 1) as f64 * p.dt;
            let gap = x.gap + leader_v * elapsed - ego_x;
            if gap <= 0.0 || ego_v <= 0.0 {
                feasible = false;
                break;
            }
            let e = (gap - ego_v * p.headway) / p.gap_scale;
            let r = (leader_v - ego_v) / p.dv_scale;
            cost += e * e + r * r;
        }
        if feasible && best.is_none_or(|(b, _)| cost < b) {
            best = Some((cost, digits[0]));
        }
    }
    best.map(|(_, k)| actions[k])
}

/// Largest relative discrepancy between an analytic and a numerical gradient,
/// each component scaled by the larger magnitude of the pair (at least `floor`).
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central finite-difference gradient of `f` at `x`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(x: &[f64], h: f64, mut f: F) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

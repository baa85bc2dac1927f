#![allow(dead_code)]

use modeswitch::driver::{BlinkObservation, DriverProfile, DriverState, PerState};
use modeswitch::environment::{ObstacleKind, PerObstacle};
use rand::Rng;

pub const STATES: [DriverState; 2] = [DriverState::Aware, DriverState::Distracted];

fn row2<R: Rng>(rng: &mut R) -> [f64; 2] {
    let a = rng.random_range(0.02..0.98);
    [a, 1.0 - a]
}

fn row3<R: Rng>(rng: &mut R) -> [f64; 3] {
    let w: [f64; 3] = [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)];
    let s: f64 = w.iter().sum();
    [w[0] / s, w[1] / s, w[2] / s]
}

pub fn random_profile<R: Rng>(rng: &mut R) -> DriverProfile {
    let mut per_obstacle = || PerObstacle { rock: row2(rng), puddle: row2(rng), clean: row2(rng) };
    let awareness = PerState { aware: per_obstacle(), distracted: per_obstacle() };
    DriverProfile { awareness, blinks: PerState { aware: row3(rng), distracted: row3(rng) }, ..DriverProfile::default() }
}

pub fn random_kind<R: Rng>(rng: &mut R) -> ObstacleKind {
    ObstacleKind::ALL[rng.random_range(0..3)]
}

pub fn random_blinks<R: Rng>(rng: &mut R) -> BlinkObservation {
    BlinkObservation::new(rng.random_range(1..=3)).unwrap()
}

fn trans(profile: &DriverProfile, from: DriverState, obstacle: ObstacleKind, to: DriverState) -> f64 {
    let p = profile.p_distracted_next(from, obstacle);
    if to == DriverState::Distracted { p } else { 1.0 - p }
}

fn emit(profile: &DriverProfile, s: DriverState, b: BlinkObservation) -> f64 {
    profile.blink_likelihood(s, b)
}

/// Pr(x_T = Distracted | blinks) by summing the joint over every path
/// x_0..x_T, where x_0 ~ (1 - p0, p0), step t moves under `obstacles[t-1]`
/// and emits `blinks[t-1]`.
pub fn brute_force_filter(p0: f64, obstacles: &[ObstacleKind], blinks: &[BlinkObservation], profile: &DriverProfile) -> f64 {
    let t = obstacles.len();
    let (mut num, mut den) = (0.0, 0.0);
    for bits in 0..(1u32 << (t + 1)) {
        let state = |i: usize| STATES[((bits >> i) & 1) as usize];
        let mut p = if state(0) == DriverState::Distracted { p0 } else { 1.0 - p0 };
        for i in 1..=t {
            p *= trans(profile, state(i - 1), obstacles[i - 1], state(i)) * emit(profile, state(i), blinks[i - 1]);
        }
        den += p;
        if state(t) == DriverState::Distracted {
            num += p;
        }
    }
    num / den
}

/// Log joint of a path; the first state is drawn from `(1 - p0, p0)` and
/// the transition into step `t >= 1` uses `obstacles[t]`.
pub fn path_log_score(
    path: &[DriverState],
    blinks: &[BlinkObservation],
    obstacles: &[ObstacleKind],
    p0: f64,
    profile: &DriverProfile,
) -> f64 {
    let first = if path[0] == DriverState::Distracted { p0 } else { 1.0 - p0 };
    let mut s = first.ln() + emit(profile, path[0], blinks[0]).ln();
    for t in 1..path.len() {
        s += trans(profile, path[t - 1], obstacles[t], path[t]).ln() + emit(profile, path[t], blinks[t]).ln();
    }
    s
}

/// Best and second best log scores over all 2^T paths, with the best path.
pub fn exhaustive_map(
    blinks: &[BlinkObservation],
    obstacles: &[ObstacleKind],
    p0: f64,
    profile: &DriverProfile,
) -> (Vec<DriverState>, f64, f64) {
    let t = blinks.len();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut second = f64::NEG_INFINITY;
    for bits in 0..(1u32 << t) {
        let path: Vec<DriverState> = (0..t).map(|i| STATES[((bits >> i) & 1) as usize]).collect();
        let s = path_log_score(&path, blinks, obstacles, p0, profile);
        if s > best.1 {
            second = best.1;
            best = (path, s);
        } else if s > second {
            second = s;
        }
    }
    (best.0, best.1, second)
}

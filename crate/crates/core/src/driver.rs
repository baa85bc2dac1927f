//! The simulated human: awareness dynamics, blink emission, manual speed
//! choice and command latency.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{check_distribution, ObstacleKind, PerObstacle, PerceptionWindow};
use crate::error::{Error, Result};
use crate::rng::sample_categorical;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverState {
    Aware = 0,
    Distracted = 1,
}

impl DriverState {
    pub const ALL: [DriverState; 2] = [DriverState::Aware, DriverState::Distracted];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for DriverState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriverState::Aware => "aware",
            DriverState::Distracted => "distracted",
        })
    }
}

/// A value per driver state, serialized as `{ aware, distracted }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerState<T> {
    pub aware: T,
    pub distracted: T,
}

impl<T> PerState<T> {
    pub fn get(&self, state: DriverState) -> &T {
        match state {
            DriverState::Aware => &self.aware,
            DriverState::Distracted => &self.distracted,
        }
    }
}

/// Number of blinks in one interval, 1 to 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct BlinkObservation(u8);

impl BlinkObservation {
    pub fn new(value: u8) -> Result<Self> {
        if (1..=3).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::InvalidArgument(format!("blink count {value} outside 1..=3")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Column in the emission table.
    pub fn index(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self(i as u8 + 1)
    }
}

impl TryFrom<u8> for BlinkObservation {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BlinkObservation> for u8 {
    fn from(b: BlinkObservation) -> u8 {
        b.0
    }
}

/// Awareness dynamics, blink likelihoods and response delays of the driver.
///
/// `awareness.<current>.<next obstacle>` is the distribution `[aware,
/// distracted]` of the next state; `blinks.<state>` the distribution over 1,
/// 2 and 3 blinks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverProfile {
    pub awareness: PerState<PerObstacle<[f64; 2]>>,
    pub blinks: PerState<[f64; 3]>,
    /// Intervals between an RtI and the driver actually holding the wheel.
    pub rti_delay: PerState<u32>,
    /// Intervals between a speed choice and its effect on the vehicle.
    pub command_delay: PerState<u32>,
}

impl Default for DriverProfile {
    fn default() -> Self {
        Self {
            awareness: PerState {
                aware: PerObstacle {
                    rock: [1.0, 0.0],
                    puddle: [0.99, 0.01],
                    clean: [0.85, 0.15],
                },
                distracted: PerObstacle {
                    rock: [0.95, 0.05],
                    puddle: [0.75, 0.25],
                    clean: [0.05, 0.95],
                },
            },
            blinks: PerState {
                aware: [0.7, 0.2, 0.1],
                distracted: [0.1, 0.2, 0.7],
            },
            rti_delay: PerState { aware: 1, distracted: 3 },
            command_delay: PerState { aware: 0, distracted: 1 },
        }
    }
}

impl DriverProfile {
    /// p(next = Distracted | current, obstacle in the next cell).
    pub fn p_distracted_next(&self, current: DriverState, obstacle: ObstacleKind) -> f64 {
        self.awareness.get(current).get(obstacle)[DriverState::Distracted.index()]
    }

    pub fn transition_row(&self, current: DriverState, obstacle: ObstacleKind) -> &[f64; 2] {
        self.awareness.get(current).get(obstacle)
    }

    pub fn blink_likelihood(&self, state: DriverState, blinks: BlinkObservation) -> f64 {
        self.blinks.get(state)[blinks.index()]
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        for state in DriverState::ALL {
            for kind in ObstacleKind::ALL {
                check_distribution(
                    self.transition_row(state, kind),
                    &format!("{path}.awareness.{state}.{kind}"),
                )?;
            }
            check_distribution(self.blinks.get(state), &format!("{path}.blinks.{state}"))?;
        }
        Ok(())
    }
}

pub fn step_awareness<R: Rng + ?Sized>(
    current: DriverState,
    next_obstacle: ObstacleKind,
    profile: &DriverProfile,
    rng: &mut R,
) -> DriverState {
    let row = profile.transition_row(current, next_obstacle);
    DriverState::ALL[sample_categorical(row, rng)]
}

pub fn emit_blinks<R: Rng + ?Sized>(
    state: DriverState,
    profile: &DriverProfile,
    rng: &mut R,
) -> BlinkObservation {
    BlinkObservation::from_index(sample_categorical(profile.blinks.get(state), rng))
}

pub fn rti_response_intervals(state: DriverState, profile: &DriverProfile) -> u32 {
    *profile.rti_delay.get(state)
}

/// What the simulated driver believes about speeds and puddles.
#[derive(Clone, Debug, PartialEq)]
pub struct ManualPolicy {
    /// Utility of one crossed cell, per speed.
    pub speed_cell_value: Vec<f64>,
    /// Believed skid probability when crossing a puddle, per speed.
    pub skid_probability: Vec<f64>,
    pub skid_penalty: f64,
}

impl ManualPolicy {
    pub fn max_speed(&self) -> u8 {
        (self.skid_probability.len().min(self.speed_cell_value.len()) - 1) as u8
    }

    /// Expected utility of crossing a single puddle cell at `speed`.
    pub fn puddle_cell_utility(&self, speed: u8) -> f64 {
        if speed == 0 {
            return 0.0;
        }
        let s = speed as usize;
        self.speed_cell_value[s] + self.skid_probability[s] * self.skid_penalty
    }

    /// Speed with the best expected utility over a puddle; ties go to the
    /// slower speed.
    pub fn best_puddle_speed(&self) -> u8 {
        let mut best = 0;
        for s in 1..=self.max_speed() {
            if self.puddle_cell_utility(s) > self.puddle_cell_utility(best) {
                best = s;
            }
        }
        best
    }
}

/// Speed the driver picks from what they can see: stop for any visible rock,
/// slow down for a visible puddle within reach, otherwise drive flat out.
pub fn manual_choose_speed(window: &PerceptionWindow, policy: &ManualPolicy) -> u8 {
    let max = policy.max_speed();
    if window.nearest_known(ObstacleKind::Rock).is_some() {
        return 0;
    }
    match window.nearest_known(ObstacleKind::Puddle) {
        Some(offset) if offset <= max as usize => policy.best_puddle_speed(),
        _ => max,
    }
}

/// Speed commands in flight between the driver and the vehicle.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandQueue {
    pending: VecDeque<(u8, usize)>,
    current: u8,
}

impl CommandQueue {
    /// Queue whose last effective speed is `current`.
    pub fn starting_at(current: u8) -> Self {
        Self {
            pending: VecDeque::new(),
            current,
        }
    }

    pub fn current(&self) -> u8 {
        self.current
    }

    pub fn pending(&self) -> impl Iterator<Item = &(u8, usize)> {
        self.pending.iter()
    }

    /// Submits `chosen` at interval `now` with the given delay and returns
    /// the speed effective during `now`. A newer command supersedes any
    /// older one that would land at the same time or later.
    pub fn submit(&mut self, chosen: u8, now: usize, delay: u32) -> u8 {
        let effective_at = now + delay as usize;
        while self.pending.back().is_some_and(|(_, t)| *t >= effective_at) {
            self.pending.pop_back();
        }
        self.pending.push_back((chosen, effective_at));
        while self.pending.front().is_some_and(|(_, t)| *t <= now) {
            let (speed, _) = self.pending.pop_front().expect("front checked");
            self.current = speed;
        }
        self.current
    }
}

pub fn apply_command_latency(
    queue: &mut CommandQueue,
    state: DriverState,
    chosen: u8,
    now: usize,
    profile: &DriverProfile,
) -> u8 {
    queue.submit(chosen, now, *profile.command_delay.get(state))
}

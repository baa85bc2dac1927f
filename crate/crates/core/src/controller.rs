//! Per-interval orchestration: sensing, learning, forecasting, warnings,
//! mode management and the move itself.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dipa::{dipa_warning, DipaConfig, DipaState, InterventionRecord};
use crate::driver::{
    apply_command_latency, emit_blinks, manual_choose_speed, rti_response_intervals, step_awareness,
    BlinkObservation, CommandQueue, DriverProfile, DriverState,
};
use crate::environment::{
    perceive, traverse, CellCrossing, ObstacleKind, PerceptionProfile, RoadTrace, SkidModel,
};
use crate::error::{Error, Result};
use crate::inference::{
    blink_predictive, discrete_surprise, filter_driver, forecast_driver, predict_driver, DirichletCounts,
    DriverBelief, DriverForecast, LocalLevelFilter, ObstacleChain, ObstacleForecast,
};
use crate::planning::{
    assess_modes, cell_utility, crossing_utility, plan_auton_trajectory, AssessmentSettings, ModeAssessment,
    OddLimits, RolloutModel, SpeedPlan, UtilityModel,
};
use crate::rng::{stream, SimRng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DrivingMode {
    Auton,
    Manual,
    Stopped,
}

impl DrivingMode {
    pub const ALL: [DrivingMode; 3] = [DrivingMode::Auton, DrivingMode::Manual, DrivingMode::Stopped];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            DrivingMode::Auton => 'A',
            DrivingMode::Manual => 'M',
            DrivingMode::Stopped => 'S',
        }
    }
}

impl fmt::Display for DrivingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DrivingMode::Auton => "AUTON",
            DrivingMode::Manual => "MANUAL",
            DrivingMode::Stopped => "STOPPED",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningLevel {
    Standard,
    Critical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    OddLimit,
    VehicleSurprise,
    EnvSurprise,
    BadDriverState,
    DriverSurprise,
    DangerousRoad,
    EmergencyAbort,
    BetterManual,
    DipaPerformance,
}

impl WarningKind {
    pub const ALL: [WarningKind; 9] = [
        WarningKind::OddLimit,
        WarningKind::VehicleSurprise,
        WarningKind::EnvSurprise,
        WarningKind::BadDriverState,
        WarningKind::DriverSurprise,
        WarningKind::DangerousRoad,
        WarningKind::EmergencyAbort,
        WarningKind::BetterManual,
        WarningKind::DipaPerformance,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            WarningKind::OddLimit => "odd_limit",
            WarningKind::VehicleSurprise => "vehicle_surprise",
            WarningKind::EnvSurprise => "env_surprise",
            WarningKind::BadDriverState => "bad_driver_state",
            WarningKind::DriverSurprise => "driver_surprise",
            WarningKind::DangerousRoad => "dangerous_road",
            WarningKind::EmergencyAbort => "emergency_abort",
            WarningKind::BetterManual => "better_manual",
            WarningKind::DipaPerformance => "dipa_performance",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WarningEvent {
    pub kind: WarningKind,
    pub level: WarningLevel,
    pub interval: usize,
}

/// Levels for a quantity where large values are bad.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExceedancePair {
    pub warn: f64,
    pub crit: f64,
}

impl ExceedancePair {
    pub fn level(&self, q: f64) -> Option<WarningLevel> {
        if q > self.crit {
            Some(WarningLevel::Critical)
        } else if q > self.warn {
            Some(WarningLevel::Standard)
        } else {
            None
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        check_prob(&format!("{path}.warn"), self.warn)?;
        check_prob(&format!("{path}.crit"), self.crit)?;
        if self.warn > self.crit {
            return Err(Error::config(format!("{path}.warn"), "must not exceed crit"));
        }
        Ok(())
    }
}

/// Levels for a surprise probability, where small values are bad.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurprisePair {
    pub warn: f64,
    pub crit: f64,
}

impl SurprisePair {
    pub fn level(&self, s: f64) -> Option<WarningLevel> {
        if s < self.crit {
            Some(WarningLevel::Critical)
        } else if s < self.warn {
            Some(WarningLevel::Standard)
        } else {
            None
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        check_prob(&format!("{path}.warn"), self.warn)?;
        check_prob(&format!("{path}.crit"), self.crit)?;
        if self.crit > self.warn {
            return Err(Error::config(format!("{path}.crit"), "must not exceed warn"));
        }
        Ok(())
    }
}

fn check_prob(path: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::config(path, format!("{v} is not a probability")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Puddle alarm probability.
    pub q_p: f64,
    /// Rock alarm probability.
    pub q_r: f64,
    /// Withhold the RtI above this distraction probability.
    pub dist_emerg: f64,
    /// Warn while issuing the RtI above this distraction probability.
    pub dist_warn: f64,
    /// Return to AUTON when the filtered distraction probability exceeds this.
    pub q_d: f64,
    /// Intervals the driver keeps control before AUTON is restored.
    pub manual_hold: u32,
    pub driver_forecast_alarm: f64,
    pub driver_surprise: SurprisePair,
    pub env_surprise: SurprisePair,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            q_p: 0.25,
            q_r: 0.15,
            dist_emerg: 0.9,
            dist_warn: 0.5,
            q_d: 0.75,
            manual_hold: 10,
            driver_forecast_alarm: 0.9,
            driver_surprise: SurprisePair { warn: 0.15, crit: 0.05 },
            env_surprise: SurprisePair { warn: 0.1, crit: 0.05 },
        }
    }
}

impl Thresholds {
    pub fn validate(&self, path: &str) -> Result<()> {
        for (name, v) in [
            ("q_p", self.q_p),
            ("q_r", self.q_r),
            ("dist_emerg", self.dist_emerg),
            ("dist_warn", self.dist_warn),
            ("q_d", self.q_d),
            ("driver_forecast_alarm", self.driver_forecast_alarm),
        ] {
            check_prob(&format!("{path}.{name}"), v)?;
        }
        if self.dist_warn > self.dist_emerg {
            return Err(Error::config(format!("{path}.dist_warn"), "must not exceed dist_emerg"));
        }
        self.driver_surprise.validate(&format!("{path}.driver_surprise"))?;
        self.env_surprise.validate(&format!("{path}.env_surprise"))
    }
}

/// Local-level monitor on the indicator "next cell is not clean".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OddChannel {
    pub enabled: bool,
    pub band_lo: f64,
    pub band_hi: f64,
    pub m0: f64,
    pub c0: f64,
    pub v: f64,
    pub w: f64,
    pub exceedance: ExceedancePair,
    pub surprise: SurprisePair,
}

impl Default for OddChannel {
    fn default() -> Self {
        Self {
            enabled: false,
            band_lo: -1.0,
            band_hi: 0.35,
            m0: 0.0,
            c0: 1.0,
            v: 0.1,
            w: 0.001,
            exceedance: ExceedancePair { warn: 0.3, crit: 0.5 },
            surprise: SurprisePair { warn: 0.1, crit: 0.05 },
        }
    }
}

impl OddChannel {
    fn validate(&self, path: &str) -> Result<()> {
        if !(self.band_lo < self.band_hi) {
            return Err(Error::config(format!("{path}.band_lo"), "must be below band_hi"));
        }
        LocalLevelFilter::new(self.m0, self.c0, self.v, self.w)
            .map_err(|e| Error::config(format!("{path}.c0"), e.to_string()))?;
        self.exceedance.validate(&format!("{path}.exceedance"))?;
        self.surprise.validate(&format!("{path}.surprise"))
    }
}

/// Everything one trip needs besides the road.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TripParams {
    pub horizon: usize,
    pub dirichlet_prior: f64,
    pub thresholds: Thresholds,
    pub driver: DriverProfile,
    pub perception: PerceptionProfile,
    pub skid: SkidModel,
    pub utility: UtilityModel,
    pub odd: OddLimits,
    pub assessment: AssessmentSettings,
    pub dipa: DipaConfig,
    pub odd_channel: OddChannel,
    /// A trip fails once it needs more than this many intervals per cell.
    pub max_intervals_per_cell: usize,
}

impl Default for TripParams {
    fn default() -> Self {
        Self {
            horizon: 5,
            dirichlet_prior: 1.0,
            thresholds: Thresholds::default(),
            driver: DriverProfile::default(),
            perception: PerceptionProfile::default(),
            skid: SkidModel::default(),
            utility: UtilityModel::default(),
            odd: OddLimits::default(),
            assessment: AssessmentSettings::default(),
            dipa: DipaConfig::default(),
            odd_channel: OddChannel::default(),
            max_intervals_per_cell: 20,
        }
    }
}

impl TripParams {
    pub fn validate(&self, path: &str) -> Result<()> {
        let at = |f: &str| format!("{path}{f}");
        if self.horizon == 0 {
            return Err(Error::config(at("horizon"), "must be >= 1"));
        }
        if self.horizon > 16 {
            return Err(Error::config(at("horizon"), "must be <= 16"));
        }
        if !(self.dirichlet_prior > 0.0) {
            return Err(Error::config(at("dirichlet_prior"), "must be > 0"));
        }
        if self.max_intervals_per_cell == 0 {
            return Err(Error::config(at("max_intervals_per_cell"), "must be >= 1"));
        }
        self.thresholds.validate(&at("thresholds"))?;
        self.driver.validate(&at("driver"))?;
        self.skid.validate(&at("skid"))?;
        self.utility.validate(&at("utility"))?;
        let auton = self.perception.auton;
        if auton.rock == 0 || auton.puddle == 0 {
            return Err(Error::config(at("perception.auton"), "the ADS must see the next cell"));
        }
        if auton.rock < self.odd.min_rock_separation {
            return Err(Error::config(
                at("odd.min_rock_separation"),
                "exceeds the ADS rock detection range",
            ));
        }
        let speeds = self.utility.speed_cell_value.len();
        if self.skid.auton.len() > speeds
            || self.skid.manual_aware.len() > speeds
            || self.skid.manual_distracted.len() > speeds
        {
            return Err(Error::config(at("utility.speed_cell_value"), "needs a value for every legal speed"));
        }
        if self.assessment.mc_samples == 0 {
            return Err(Error::config(at("assessment.mc_samples"), "must be >= 1"));
        }
        self.dipa.validate(&at("dipa"))?;
        self.odd_channel.validate(&at("odd_channel"))
    }
}

/// Outcome of evaluating modes while in AUTON.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "decision")]
pub enum AutonDecision {
    /// AUTON assessed at least as good: stop for one interval.
    StopBetterAuton,
    /// Driver too likely distracted: keep driving autonomously.
    AbortDistracted,
    /// Performance record too poor: stop for one interval.
    StopDipa,
    /// Hand over after `delay` intervals.
    RequestIntervention { delay: u32, warn: bool },
}

pub fn manage_from_auton(
    mode: DrivingMode,
    assessment: &ModeAssessment,
    p_distracted: f64,
    response_delay: u32,
    thresholds: &Thresholds,
    dipa_gate: Option<f64>,
) -> Result<AutonDecision> {
    if mode != DrivingMode::Auton {
        return Err(Error::InvalidState(format!("mode assessment requested in {mode}")));
    }
    if assessment.psi_auton >= assessment.psi_manual {
        return Ok(AutonDecision::StopBetterAuton);
    }
    if p_distracted > thresholds.dist_emerg {
        return Ok(AutonDecision::AbortDistracted);
    }
    if dipa_gate.is_some_and(|g| g > 0.0) {
        return Ok(AutonDecision::StopDipa);
    }
    Ok(AutonDecision::RequestIntervention {
        delay: response_delay,
        warn: p_distracted > thresholds.dist_warn,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManualDecision {
    Stay,
    ReturnDistracted,
    ReturnHoldExpired,
}

pub fn manage_from_manual(
    mode: DrivingMode,
    p_distracted: f64,
    intervals_in_manual: u32,
    thresholds: &Thresholds,
) -> Result<ManualDecision> {
    if mode != DrivingMode::Manual {
        return Err(Error::InvalidState(format!("manual management requested in {mode}")));
    }
    Ok(if p_distracted > thresholds.q_d {
        ManualDecision::ReturnDistracted
    } else if intervals_in_manual >= thresholds.manual_hold {
        ManualDecision::ReturnHoldExpired
    } else {
        ManualDecision::Stay
    })
}

/// A driver asking for AUTON is always granted it; a warning is attached
/// when MANUAL looks better.
pub fn driver_requests_auton(
    mode: DrivingMode,
    assessment: &ModeAssessment,
    interval: usize,
) -> Result<(DrivingMode, Option<WarningEvent>)> {
    if mode != DrivingMode::Manual {
        return Err(Error::InvalidState(format!("driver request while in {mode}")));
    }
    let warning = (assessment.psi_manual > assessment.psi_auton).then_some(WarningEvent {
        kind: WarningKind::BetterManual,
        level: WarningLevel::Standard,
        interval,
    });
    Ok((DrivingMode::Auton, warning))
}

/// Road and driver alarms from the current forecasts.
pub fn issue_warnings(
    obstacles: &ObstacleForecast,
    driver: &DriverForecast,
    thresholds: &Thresholds,
    interval: usize,
) -> Vec<WarningEvent> {
    let mut out = Vec::new();
    let k = obstacles.horizon();
    let near = (2..=k.min(3)).any(|o| obstacles.prob(o, ObstacleKind::Puddle) > thresholds.q_p);
    let far = (4..=k).any(|o| {
        obstacles.prob(o, ObstacleKind::Puddle) > thresholds.q_p || obstacles.prob(o, ObstacleKind::Rock) > thresholds.q_r
    });
    if near || far {
        out.push(WarningEvent { kind: WarningKind::DangerousRoad, level: WarningLevel::Critical, interval });
    }
    if driver.p_distracted.iter().any(|p| *p > thresholds.driver_forecast_alarm) {
        out.push(WarningEvent { kind: WarningKind::BadDriverState, level: WarningLevel::Critical, interval });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum RtiEvent {
    Issued { delay: u32 },
    Completed,
    AbortedBetterAuton,
    AbortedDistracted,
    AbortedDipa,
}

impl RtiEvent {
    pub fn is_aborted(self) -> bool {
        matches!(self, RtiEvent::AbortedBetterAuton | RtiEvent::AbortedDistracted | RtiEvent::AbortedDipa)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManualExit {
    Distracted,
    HoldExpired,
}

/// One interval of a trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub interval: usize,
    pub position: usize,
    pub end_position: usize,
    pub mode: DrivingMode,
    pub speed: u8,
    /// Cell kind at offset 1 as the driver faced it (cleared rocks read clean).
    pub obstacle: ObstacleKind,
    pub driver_state: DriverState,
    pub blinks: BlinkObservation,
    pub p_distracted: f64,
    pub obstacle_forecast: Vec<[f64; 3]>,
    pub driver_forecast: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assessment: Option<ModeAssessment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rti: Vec<RtiEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manual_exit: Option<ManualExit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<WarningEvent>,
    pub crossed: Vec<CellCrossing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cleared_rock: Option<usize>,
    pub utility: f64,
}

/// Counters accumulated while the trip runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TripTally {
    pub utility: f64,
    pub intervals: usize,
    pub intervals_by_mode: [usize; 3],
    pub rti_issued: u32,
    pub rti_completed: u32,
    pub rti_aborted: u32,
    pub manual_spells: u32,
    pub skids: u32,
    pub crashes: u32,
    pub crashes_auton: u32,
    pub crashes_manual_aware: u32,
    pub crashes_manual_distracted: u32,
    pub rock_stops: u32,
    pub aborted_stops: u32,
    pub warnings: [u32; 9],
}

#[derive(Clone, Debug)]
struct PendingRti {
    countdown: u32,
    psi_manual: f64,
}

#[derive(Clone, Debug)]
struct OpenIntervention {
    start: usize,
    psi_manual: f64,
    realized: f64,
}

/// Controller memory carried between intervals.
#[derive(Clone, Debug)]
pub struct ControllerState {
    pub mode: DrivingMode,
    pub position: usize,
    pub interval: usize,
    pub counts: DirichletCounts,
    pub belief: DriverBelief,
    pub plan: Option<SpeedPlan>,
    pub intervals_in_manual: u32,
    pub dipa: DipaState,
    pub warnings: Vec<WarningEvent>,
    pub last_speed: u8,
    pending_rti: Option<PendingRti>,
    open_intervention: Option<OpenIntervention>,
    skip_assessment: bool,
    learned_upto: usize,
    queue: CommandQueue,
    odd_filter: LocalLevelFilter,
    previous_forecast: Option<(usize, ObstacleForecast)>,
}

impl ControllerState {
    pub fn new(params: &TripParams) -> Result<Self> {
        let ch = &params.odd_channel;
        Ok(Self {
            mode: DrivingMode::Auton,
            position: 0,
            interval: 0,
            counts: DirichletCounts::uniform(params.dirichlet_prior)?,
            belief: DriverBelief::certain(DriverState::Aware),
            plan: None,
            intervals_in_manual: 0,
            dipa: DipaState::from_config(&params.dipa)?,
            warnings: Vec::new(),
            last_speed: 0,
            pending_rti: None,
            open_intervention: None,
            skip_assessment: false,
            learned_upto: 0,
            queue: CommandQueue::starting_at(0),
            odd_filter: LocalLevelFilter::new(ch.m0, ch.c0, ch.v, ch.w)?,
            previous_forecast: None,
        })
    }

    pub fn rti_pending(&self) -> bool {
        self.pending_rti.is_some()
    }
}

/// A trip in progress over a fixed road.
pub struct Trip {
    params: TripParams,
    road: RoadTrace,
    state: ControllerState,
    driver_state: DriverState,
    driver_rng: SimRng,
    traversal_rng: SimRng,
    assessment_rng: SimRng,
    tally: TripTally,
}

impl Trip {
    pub fn new(params: TripParams, road: RoadTrace, seed: u64) -> Result<Self> {
        params.validate("")?;
        let state = ControllerState::new(&params)?;
        Ok(Self {
            params,
            road,
            state,
            driver_state: DriverState::Aware,
            driver_rng: stream(seed, Stream::Driver),
            traversal_rng: stream(seed, Stream::Traversal),
            assessment_rng: stream(seed, Stream::Assessment),
            tally: TripTally::default(),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.state.position + 1 >= self.road.len()
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn road(&self) -> &RoadTrace {
        &self.road
    }

    pub fn params(&self) -> &TripParams {
        &self.params
    }

    pub fn driver_state(&self) -> DriverState {
        self.driver_state
    }

    pub fn tally(&self) -> &TripTally {
        &self.tally
    }

    fn interval_cap(&self) -> usize {
        self.road.len() * self.params.max_intervals_per_cell + 10
    }

    /// Runs to the end of the road, returning every interval's record.
    pub fn run(&mut self) -> Result<Vec<StepRecord>> {
        let mut trace = Vec::new();
        while let Some(record) = self.step()? {
            trace.push(record);
        }
        Ok(trace)
    }

    fn warn(&mut self, out: &mut Vec<WarningEvent>, kind: WarningKind, level: WarningLevel) {
        let event = WarningEvent { kind, level, interval: self.state.interval };
        self.tally.warnings[kind.index()] += 1;
        self.state.warnings.push(event);
        out.push(event);
    }

    fn transfer_to_manual(&mut self, psi_manual: f64, rti: &mut Vec<RtiEvent>) {
        let st = &mut self.state;
        st.mode = DrivingMode::Manual;
        st.intervals_in_manual = 0;
        st.queue = CommandQueue::starting_at(st.last_speed);
        if self.params.dipa.enabled {
            st.open_intervention = Some(OpenIntervention { start: st.position, psi_manual, realized: 0.0 });
        }
        self.tally.rti_completed += 1;
        self.tally.manual_spells += 1;
        rti.push(RtiEvent::Completed);
    }

    /// Advances one interval. Returns `None` once the road end is reached.
    pub fn step(&mut self) -> Result<Option<StepRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        if self.state.interval >= self.interval_cap() {
            return Err(Error::Stalled { intervals: self.state.interval, position: self.state.position });
        }
        let k = self.params.horizon;
        let t = self.state.interval;
        let pos = self.state.position;
        let mut warnings = Vec::new();
        let mut rti = Vec::new();
        let mut manual_exit = None;
        let mut assessment = None;

        if self.state.mode == DrivingMode::Stopped {
            self.state.mode = DrivingMode::Auton;
        }

        // Sense and learn.
        let target = pos + 1;
        while self.state.learned_upto < target {
            let i = self.state.learned_upto;
            self.state.counts.update(self.road.original_kind(i), self.road.original_kind(i + 1));
            self.state.learned_upto += 1;
        }
        let obstacle = self.road.original_kind(pos + 1);
        if let Some((prev_pos, prev)) = &self.state.previous_forecast {
            let offset = pos + 1 - prev_pos;
            if offset <= prev.horizon() {
                let s = discrete_surprise(&prev.probs[offset - 1], obstacle.index());
                if let Some(level) = self.params.thresholds.env_surprise.level(s) {
                    self.warn(&mut warnings, WarningKind::EnvSurprise, level);
                }
            }
        }
        let facing = self.road.kind_at(pos + 1);
        let driver = &self.params.driver;
        self.driver_state = step_awareness(self.driver_state, facing, driver, &mut self.driver_rng);
        let blinks = emit_blinks(self.driver_state, driver, &mut self.driver_rng);
        let predicted = predict_driver(self.state.belief, facing, driver);
        let blink_surprise = discrete_surprise(&blink_predictive(predicted, driver), blinks.index());
        self.state.belief = filter_driver(self.state.belief, blinks, facing, driver)?;
        if let Some(level) = self.params.thresholds.driver_surprise.level(blink_surprise) {
            self.warn(&mut warnings, WarningKind::DriverSurprise, level);
        }

        // Forecast.
        let ads_window = perceive(&self.road, pos, DrivingMode::Auton, self.driver_state, k, &self.params.perception);
        let table = self.state.counts.point_estimate_table();
        let chain = ObstacleChain::new(&table, &ads_window)?;
        let forecast = chain.forecast();
        let driver_forecast = forecast_driver(self.state.belief, &forecast, &self.params.driver);
        let p_dist = self.state.belief.p_distracted();

        let ch = self.params.odd_channel;
        if ch.enabled {
            let g = if facing == ObstacleKind::Clean { 0.0 } else { 1.0 };
            let one_step = self.state.odd_filter.forecast(1);
            if let Some(level) = ch.surprise.level(one_step.surprise(g)) {
                self.warn(&mut warnings, WarningKind::VehicleSurprise, level);
            }
            self.state.odd_filter = self.state.odd_filter.update(g);
            let q = self.state.odd_filter.forecast(k).exceedance(ch.band_lo, ch.band_hi);
            if let Some(level) = ch.exceedance.level(q) {
                self.warn(&mut warnings, WarningKind::OddLimit, level);
            }
        }

        let alarms = issue_warnings(&forecast, &driver_forecast, &self.params.thresholds, t);
        let dangerous = alarms.iter().any(|w| w.kind == WarningKind::DangerousRoad);
        for w in alarms {
            self.warn(&mut warnings, w.kind, w.level);
        }

        // Pending handover.
        if let Some(mut pending) = self.state.pending_rti.take() {
            pending.countdown = pending.countdown.saturating_sub(1);
            if pending.countdown == 0 {
                self.transfer_to_manual(pending.psi_manual, &mut rti);
            } else {
                self.state.pending_rti = Some(pending);
            }
        } else if self.state.mode == DrivingMode::Manual {
            match manage_from_manual(self.state.mode, p_dist, self.state.intervals_in_manual, &self.params.thresholds)? {
                ManualDecision::Stay => {}
                decision => {
                    self.state.mode = DrivingMode::Auton;
                    manual_exit = Some(if decision == ManualDecision::ReturnDistracted {
                        ManualExit::Distracted
                    } else {
                        ManualExit::HoldExpired
                    });
                }
            }
        }

        let skip = std::mem::take(&mut self.state.skip_assessment);
        if self.state.mode == DrivingMode::Auton && dangerous && !skip && self.state.pending_rti.is_none() {
            let model = RolloutModel {
                table: &table,
                utility: &self.params.utility,
                skid: &self.params.skid,
                perception: &self.params.perception,
                driver: &self.params.driver,
                odd: &self.params.odd,
                horizon: k,
                initial_speed: self.state.last_speed,
            };
            let a = assess_modes(&chain, &driver_forecast, &model, &self.params.assessment, &mut self.assessment_rng)?;
            assessment = Some(a);
            let dipa = &self.params.dipa;
            let gate = (dipa.enabled && dipa.gate)
                .then(|| self.state.dipa.continuous.prob_underperforming() - dipa.gate_cutoff);
            let delay = rti_response_intervals(self.driver_state, &self.params.driver);
            match manage_from_auton(self.state.mode, &a, p_dist, delay, &self.params.thresholds, gate)? {
                AutonDecision::StopBetterAuton => {
                    self.state.mode = DrivingMode::Stopped;
                    self.state.skip_assessment = true;
                    self.tally.rti_aborted += 1;
                    self.tally.aborted_stops += 1;
                    rti.push(RtiEvent::AbortedBetterAuton);
                }
                AutonDecision::AbortDistracted => {
                    self.warn(&mut warnings, WarningKind::EmergencyAbort, WarningLevel::Critical);
                    self.tally.rti_aborted += 1;
                    rti.push(RtiEvent::AbortedDistracted);
                }
                AutonDecision::StopDipa => {
                    self.warn(&mut warnings, WarningKind::DipaPerformance, WarningLevel::Critical);
                    self.state.mode = DrivingMode::Stopped;
                    self.state.skip_assessment = true;
                    self.tally.rti_aborted += 1;
                    self.tally.aborted_stops += 1;
                    rti.push(RtiEvent::AbortedDipa);
                }
                AutonDecision::RequestIntervention { delay, warn } => {
                    if warn {
                        self.warn(&mut warnings, WarningKind::BadDriverState, WarningLevel::Standard);
                    }
                    self.tally.rti_issued += 1;
                    rti.push(RtiEvent::Issued { delay });
                    if delay == 0 {
                        self.transfer_to_manual(a.psi_manual, &mut rti);
                    } else {
                        self.state.pending_rti = Some(PendingRti { countdown: delay, psi_manual: a.psi_manual });
                    }
                }
            }
        }

        // Choose the speed.
        let mode = self.state.mode;
        let (speed, control_window) = match mode {
            DrivingMode::Auton => {
                let plan = plan_auton_trajectory(&forecast.modal, &self.params.utility, &self.params.skid, &self.params.odd, k);
                let s = plan.first();
                self.state.plan = Some(plan);
                if s == 0 {
                    self.state.mode = DrivingMode::Stopped;
                    self.tally.rock_stops += 1;
                }
                self.state.queue = CommandQueue::starting_at(s);
                (s, ads_window)
            }
            DrivingMode::Stopped => {
                self.state.plan = None;
                self.state.queue = CommandQueue::starting_at(0);
                (0, ads_window)
            }
            DrivingMode::Manual => {
                self.state.plan = None;
                let window = perceive(&self.road, pos, mode, self.driver_state, k, &self.params.perception);
                let policy = self.params.utility.manual_policy(&self.params.skid, self.driver_state);
                let chosen = manual_choose_speed(&window, &policy);
                let s = apply_command_latency(&mut self.state.queue, self.driver_state, chosen, t, &self.params.driver);
                (s, window)
            }
        };
        let mode = self.state.mode;

        // Move.
        let outcome = traverse(&self.road, pos, speed, mode, self.driver_state, &self.params.skid, &mut self.traversal_rng)?;
        let utility = cell_utility(mode, speed, &outcome, &self.params.utility);
        let cleared_rock = if speed == 0 {
            self.road.clear_rock_on_stop(pos, &control_window)
        } else {
            None
        };

        // Book-keeping.
        let tally = &mut self.tally;
        tally.utility += utility;
        tally.intervals += 1;
        tally.intervals_by_mode[mode.index()] += 1;
        tally.skids += outcome.skids();
        let crashes = outcome.collisions();
        tally.crashes += crashes;
        match (mode, self.driver_state) {
            (DrivingMode::Manual, DriverState::Aware) => tally.crashes_manual_aware += crashes,
            (DrivingMode::Manual, DriverState::Distracted) => tally.crashes_manual_distracted += crashes,
            _ => tally.crashes_auton += crashes,
        }
        if mode == DrivingMode::Manual {
            self.state.intervals_in_manual += 1;
        }
        self.resolve_intervention(mode, speed, &outcome.crossed, &mut warnings)?;

        self.state.previous_forecast = Some((pos, forecast.clone()));
        self.state.position = outcome.end_position;
        self.state.last_speed = speed;
        self.state.interval += 1;

        Ok(Some(StepRecord {
            interval: t,
            position: pos,
            end_position: outcome.end_position,
            mode,
            speed,
            obstacle: facing,
            driver_state: self.driver_state,
            blinks,
            p_distracted: p_dist,
            obstacle_forecast: forecast.probs,
            driver_forecast: driver_forecast.p_distracted,
            assessment,
            rti,
            manual_exit,
            warnings,
            crossed: outcome.crossed,
            cleared_rock,
            utility,
        }))
    }

    fn resolve_intervention(
        &mut self,
        mode: DrivingMode,
        speed: u8,
        crossed: &[CellCrossing],
        warnings: &mut Vec<WarningEvent>,
    ) -> Result<()> {
        let Some(mut open) = self.state.open_intervention.take() else {
            return Ok(());
        };
        let end = open.start + self.params.horizon;
        for c in crossed.iter().filter(|c| c.index <= end) {
            open.realized += crossing_utility(mode, speed, c, &self.params.utility);
        }
        let reached = crossed.last().is_some_and(|c| c.index >= end);
        if !reached {
            self.state.open_intervention = Some(open);
            return Ok(());
        }
        let record = InterventionRecord::new(open.psi_manual, open.realized)?;
        self.state.dipa.record(&record);
        if let Some(level) = dipa_warning(&self.state.dipa, &self.params.dipa)? {
            self.warn(warnings, WarningKind::DipaPerformance, level);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planning::AssessmentMethod;

    fn assessment(auton: f64, manual: f64) -> ModeAssessment {
        ModeAssessment { psi_auton: auton, psi_manual: manual, se_auton: 0.0, se_manual: 0.0, method: AssessmentMethod::Exact }
    }

    fn road(cells: &str) -> RoadTrace {
        RoadTrace::from_cells(
            cells
                .chars()
                .map(|c| match c {
                    '#' => ObstacleKind::Rock,
                    '~' => ObstacleKind::Puddle,
                    _ => ObstacleKind::Clean,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn auton_management() {
        let th = Thresholds::default();
        let a = assessment(1.0, 2.0);
        assert_eq!(
            manage_from_auton(DrivingMode::Auton, &a, 0.2, 1, &th, None).unwrap(),
            AutonDecision::RequestIntervention { delay: 1, warn: false }
        );
        assert_eq!(
            manage_from_auton(DrivingMode::Auton, &a, 0.7, 3, &th, None).unwrap(),
            AutonDecision::RequestIntervention { delay: 3, warn: true }
        );
        assert_eq!(manage_from_auton(DrivingMode::Auton, &a, 0.95, 1, &th, None).unwrap(), AutonDecision::AbortDistracted);
        assert_eq!(
            manage_from_auton(DrivingMode::Auton, &assessment(2.0, 2.0), 0.0, 1, &th, None).unwrap(),
            AutonDecision::StopBetterAuton
        );
        assert_eq!(manage_from_auton(DrivingMode::Auton, &a, 0.2, 1, &th, Some(0.05)).unwrap(), AutonDecision::StopDipa);
        assert!(manage_from_auton(DrivingMode::Manual, &a, 0.2, 1, &th, None).is_err());
    }

    #[test]
    fn manual_management() {
        let th = Thresholds::default();
        assert_eq!(manage_from_manual(DrivingMode::Manual, 0.8, 2, &th).unwrap(), ManualDecision::ReturnDistracted);
        assert_eq!(manage_from_manual(DrivingMode::Manual, 0.1, 10, &th).unwrap(), ManualDecision::ReturnHoldExpired);
        assert_eq!(manage_from_manual(DrivingMode::Manual, 0.3, 4, &th).unwrap(), ManualDecision::Stay);
        assert!(manage_from_manual(DrivingMode::Auton, 0.3, 4, &th).is_err());
    }

    #[test]
    fn driver_request() {
        let (mode, w) = driver_requests_auton(DrivingMode::Manual, &assessment(1.0, 2.0), 4).unwrap();
        assert_eq!(mode, DrivingMode::Auton);
        assert_eq!(w.unwrap().kind, WarningKind::BetterManual);
        assert!(driver_requests_auton(DrivingMode::Manual, &assessment(3.0, 2.0), 4).unwrap().1.is_none());
    }

    #[test]
    fn warning_rules() {
        let th = Thresholds::default();
        let clean = [0.0, 0.0, 1.0];
        let mut f = ObstacleForecast { probs: vec![clean; 5], modal: vec![ObstacleKind::Clean; 5] };
        let calm = DriverForecast { p_distracted: vec![0.1; 5] };
        assert!(issue_warnings(&f, &calm, &th, 0).is_empty());

        f.probs[1] = [0.0, 0.4, 0.6];
        let w = issue_warnings(&f, &calm, &th, 7);
        assert_eq!(w, vec![WarningEvent { kind: WarningKind::DangerousRoad, level: WarningLevel::Critical, interval: 7 }]);

        f.probs[1] = clean;
        f.probs[4] = [0.2, 0.0, 0.8];
        assert_eq!(issue_warnings(&f, &calm, &th, 0).len(), 1);
        f.probs[4] = clean;
        // Rocks at offsets 2-3 are already known; they do not raise the alarm.
        f.probs[2] = [1.0, 0.0, 0.0];
        assert!(issue_warnings(&f, &calm, &th, 0).is_empty());

        let bad = DriverForecast { p_distracted: vec![0.2, 0.5, 0.95, 0.9, 0.9] };
        let w = issue_warnings(&f, &bad, &th, 0);
        assert_eq!(w[0].kind, WarningKind::BadDriverState);
    }

    #[test]
    fn level_pairs() {
        let s = SurprisePair { warn: 0.15, crit: 0.05 };
        assert_eq!(s.level(0.1), Some(WarningLevel::Standard));
        assert_eq!(s.level(0.01), Some(WarningLevel::Critical));
        assert_eq!(s.level(0.5), None);
        let e = ExceedancePair { warn: 0.3, crit: 0.5 };
        assert_eq!(e.level(0.4), Some(WarningLevel::Standard));
        assert_eq!(e.level(0.6), Some(WarningLevel::Critical));
        assert_eq!(e.level(0.3), None);
    }

    #[test]
    fn clean_road_runs_auton_at_speed_three() {
        let mut trip = Trip::new(TripParams::default(), road(&".".repeat(31)), 5).unwrap();
        let first = trip.step().unwrap().unwrap();
        assert_eq!((first.mode, first.speed), (DrivingMode::Auton, 3));
        assert!((first.utility - 1.2).abs() < 1e-12);
        let rest = trip.run().unwrap();
        let cells: usize = rest.iter().map(|r| r.crossed.len()).sum();
        assert_eq!(cells + 3, 30);
        assert_eq!(trip.tally().crashes + trip.tally().skids, 0);
        assert!(trip.is_finished());
        assert!(trip.step().unwrap().is_none());
    }

    #[test]
    fn auton_stops_for_a_rock_and_clears_it() {
        let mut trip = Trip::new(TripParams::default(), road("..#........"), 1).unwrap();
        let first = trip.step().unwrap().unwrap();
        assert_eq!((first.mode, first.speed), (DrivingMode::Stopped, 0));
        assert_eq!(first.cleared_rock, Some(2));
        let second = trip.step().unwrap().unwrap();
        assert_eq!(second.mode, DrivingMode::Auton);
        assert_eq!(second.speed, 3);
        assert!(second.crossed.iter().all(|c| !c.collided));
    }

    #[test]
    fn single_cell_road_is_already_finished() {
        let mut trip = Trip::new(TripParams::default(), road("."), 1).unwrap();
        assert!(trip.is_finished());
        assert!(trip.run().unwrap().is_empty());
        assert_eq!(trip.tally().utility, 0.0);
    }

    #[test]
    fn controller_starts_in_auton() {
        let s = ControllerState::new(&TripParams::default()).unwrap();
        assert_eq!(s.mode, DrivingMode::Auton);
        assert_eq!(s.belief.p_distracted(), 0.0);
        assert!(!s.rti_pending());
    }

    #[test]
    fn invalid_params_are_rejected_with_a_path() {
        let mut p = TripParams::default();
        p.thresholds.q_p = 1.5;
        match Trip::new(p, road(".."), 0) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "thresholds.q_p"),
            other => panic!("unexpected {:?}", other.err()),
        }
        let p = TripParams { horizon: 0, ..TripParams::default() };
        assert!(p.validate("").is_err());
    }
}

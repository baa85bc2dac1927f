//! Utilities, AUTON speed planning and expected-utility assessment of the
//! two driving modes over the forecast horizon.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::controller::DrivingMode;
use crate::driver::{manual_choose_speed, CommandQueue, DriverProfile, DriverState, ManualPolicy};
use crate::environment::{
    view_of, CellCrossing, CellView, DetectionRanges, ObstacleKind, PerceptionProfile, PerceptionWindow, SkidModel,
    TransitionTable, TraversalOutcome,
};
use crate::error::{Error, Result};
use crate::inference::{DriverForecast, ObstacleChain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilityModel {
    /// Utility of one crossed cell, indexed by speed.
    pub speed_cell_value: Vec<f64>,
    pub crash_penalty: f64,
    pub skid_penalty: f64,
    pub auton_bonus_per_cell: f64,
}

impl Default for UtilityModel {
    fn default() -> Self {
        Self {
            speed_cell_value: vec![0.0, 0.1, 0.2, 0.3, 0.5],
            crash_penalty: -100.0,
            skid_penalty: -10.0,
            auton_bonus_per_cell: 0.1,
        }
    }
}

impl UtilityModel {
    pub fn validate(&self, path: &str) -> Result<()> {
        if self.speed_cell_value.len() < 2 || self.speed_cell_value.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(
                format!("{path}.speed_cell_value"),
                "needs finite values for speed 0 and at least one moving speed",
            ));
        }
        if !(self.crash_penalty <= 0.0) {
            return Err(Error::config(format!("{path}.crash_penalty"), "must be <= 0"));
        }
        if !(self.skid_penalty <= 0.0) {
            return Err(Error::config(format!("{path}.skid_penalty"), "must be <= 0"));
        }
        if !(self.auton_bonus_per_cell >= 0.0 && self.auton_bonus_per_cell.is_finite()) {
            return Err(Error::config(format!("{path}.auton_bonus_per_cell"), "must be >= 0"));
        }
        Ok(())
    }

    pub fn cell_value(&self, speed: u8) -> f64 {
        self.speed_cell_value[speed as usize]
    }

    pub fn best_cell_value(&self) -> f64 {
        self.speed_cell_value.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn bonus(&self, mode: DrivingMode) -> f64 {
        if mode == DrivingMode::Auton {
            self.auton_bonus_per_cell
        } else {
            0.0
        }
    }

    /// What a driver in `state` believes about puddles.
    pub fn manual_policy(&self, skid: &SkidModel, state: DriverState) -> ManualPolicy {
        ManualPolicy {
            speed_cell_value: self.speed_cell_value.clone(),
            skid_probability: skid.table(DrivingMode::Manual, state).to_vec(),
            skid_penalty: self.skid_penalty,
        }
    }
}

/// Realized utility of crossing one cell.
pub fn crossing_utility(mode: DrivingMode, speed: u8, crossing: &CellCrossing, utility: &UtilityModel) -> f64 {
    let mut u = utility.cell_value(speed) + utility.bonus(mode);
    if crossing.collided {
        u += utility.crash_penalty;
    }
    if crossing.skidded {
        u += utility.skid_penalty;
    }
    u
}

/// Realized utility of one interval's move.
pub fn cell_utility(mode: DrivingMode, speed: u8, outcome: &TraversalOutcome, utility: &UtilityModel) -> f64 {
    outcome
        .crossed
        .iter()
        .map(|c| crossing_utility(mode, speed, c, utility))
        .sum()
}

/// Operational limits the ADS respects while driving.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OddLimits {
    /// Stop whenever a rock is this close or closer.
    pub min_rock_separation: usize,
    /// Fastest speed allowed onto a puddle.
    pub max_puddle_speed: u8,
}

impl Default for OddLimits {
    fn default() -> Self {
        Self { min_rock_separation: 3, max_puddle_speed: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedPlan {
    pub mode: DrivingMode,
    /// Current interval first, then one per horizon interval.
    pub speeds: Vec<u8>,
}

impl SpeedPlan {
    pub fn first(&self) -> u8 {
        self.speeds[0]
    }
}

/// Best AUTON speed for one interval given the believed cells ahead
/// (`ahead(o)` is the kind at offset `o`). Ties go to the slower speed.
fn auton_interval_speed(
    ahead: impl Fn(usize) -> ObstacleKind,
    utility: &UtilityModel,
    skid: &SkidModel,
    odd: &OddLimits,
) -> u8 {
    if (1..=odd.min_rock_separation).any(|o| ahead(o) == ObstacleKind::Rock) {
        return 0;
    }
    let max = skid.max_speed(DrivingMode::Auton);
    let mut best = (0u8, 0.0f64);
    for s in 1..=max {
        let cells: Vec<ObstacleKind> = (1..=s as usize).map(&ahead).collect();
        if cells.contains(&ObstacleKind::Rock) {
            break;
        }
        if s > odd.max_puddle_speed && cells.contains(&ObstacleKind::Puddle) {
            continue;
        }
        let p_skid = skid.probability(DrivingMode::Auton, DriverState::Aware, s);
        let value: f64 = cells
            .iter()
            .map(|k| {
                let base = utility.cell_value(s) + utility.auton_bonus_per_cell;
                if *k == ObstacleKind::Puddle {
                    base + p_skid * utility.skid_penalty
                } else {
                    base
                }
            })
            .sum();
        if value > best.1 {
            best = (s, value);
        }
    }
    best.0
}

/// Commits to `modal` (offsets `1..`, clean beyond) and picks the best legal
/// speed interval by interval. Stopping in front of a rock clears it.
pub fn plan_auton_trajectory(
    modal: &[ObstacleKind],
    utility: &UtilityModel,
    skid: &SkidModel,
    odd: &OddLimits,
    horizon: usize,
) -> SpeedPlan {
    let mut cells = modal.to_vec();
    let mut pos = 0usize;
    let mut speeds = Vec::with_capacity(horizon + 1);
    let kind = |cells: &[ObstacleKind], i: usize| cells.get(i - 1).copied().unwrap_or(ObstacleKind::Clean);
    for _ in 0..=horizon {
        let s = auton_interval_speed(|o| kind(&cells, pos + o), utility, skid, odd);
        if s == 0 {
            if let Some(o) = (1..=odd.min_rock_separation).find(|o| kind(&cells, pos + o) == ObstacleKind::Rock) {
                cells[pos + o - 1] = ObstacleKind::Clean;
            }
        }
        speeds.push(s);
        pos += s as usize;
    }
    SpeedPlan { mode: DrivingMode::Auton, speeds }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentMethod {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeAssessment {
    pub psi_auton: f64,
    pub psi_manual: f64,
    /// Standard errors; zero when computed exactly.
    pub se_auton: f64,
    pub se_manual: f64,
    pub method: AssessmentMethod,
}

impl ModeAssessment {
    pub fn psi(&self, mode: DrivingMode) -> f64 {
        match mode {
            DrivingMode::Manual => self.psi_manual,
            _ => self.psi_auton,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssessmentSettings {
    /// Enumerate the configuration lattice up to this size, else sample.
    pub lattice_bound: usize,
    pub mc_samples: usize,
}

impl Default for AssessmentSettings {
    fn default() -> Self {
        Self { lattice_bound: 729, mc_samples: 1000 }
    }
}

/// Everything a hypothetical rollout over the horizon needs.
#[derive(Clone, Copy, Debug)]
pub struct RolloutModel<'a> {
    /// Estimated road dynamics, used by the AUTON planner for unseen cells.
    pub table: &'a TransitionTable,
    pub utility: &'a UtilityModel,
    pub skid: &'a SkidModel,
    pub perception: &'a PerceptionProfile,
    pub driver: &'a DriverProfile,
    pub odd: &'a OddLimits,
    pub horizon: usize,
    /// Vehicle speed in the interval before the rollout.
    pub initial_speed: u8,
}

/// Configuration of offsets `1..=k` with rocks that get cleared by stops.
#[derive(Clone)]
struct Hypothetical<'c> {
    cells: &'c [ObstacleKind],
    cleared: u32,
}

impl Hypothetical<'_> {
    fn kind(&self, offset: usize) -> Option<ObstacleKind> {
        let i = offset.checked_sub(1)?;
        let k = *self.cells.get(i)?;
        Some(if k == ObstacleKind::Rock && self.cleared & (1 << i) != 0 { ObstacleKind::Clean } else { k })
    }

    fn window(&self, pos: usize, ranges: DetectionRanges, horizon: usize) -> PerceptionWindow {
        let views = (1..=horizon)
            .map(|o| match self.kind(pos + o) {
                Some(k) => view_of(k, o, ranges),
                None => CellView::UNKNOWN,
            })
            .collect();
        PerceptionWindow { views }
    }

    fn clear_nearest(&mut self, pos: usize, window: &PerceptionWindow) {
        if let Some(o) = window.nearest_known(ObstacleKind::Rock) {
            self.cleared |= 1 << (pos + o - 1);
        }
    }
}

fn max_rollout_intervals(horizon: usize) -> usize {
    2 * horizon + 2
}

/// Expected utility of crossing one cell, skids taken in expectation.
fn score_crossing(
    mode: DrivingMode,
    state: DriverState,
    speed: u8,
    kind: ObstacleKind,
    model: &RolloutModel,
) -> f64 {
    let u = model.utility;
    let mut value = u.cell_value(speed) + u.bonus(mode);
    match kind {
        ObstacleKind::Rock => value += u.crash_penalty,
        ObstacleKind::Puddle => value += model.skid.probability(mode, state, speed) * u.skid_penalty,
        ObstacleKind::Clean => {}
    }
    value
}

/// AUTON utility along one configuration, replanning every interval from
/// what its sensors would show.
pub fn auton_rollout(config: &[ObstacleKind], model: &RolloutModel) -> Result<f64> {
    let k = config.len();
    let ranges = model.perception.auton;
    let mut hyp = Hypothetical { cells: config, cleared: 0 };
    let mut pos = 0;
    let mut total = 0.0;
    for _ in 0..max_rollout_intervals(k) {
        if pos >= k {
            break;
        }
        let window = hyp.window(pos, ranges, model.horizon);
        let modal = ObstacleChain::new(model.table, &window)?.most_likely();
        let s = plan_auton_trajectory(&modal, model.utility, model.skid, model.odd, 0).first();
        if s == 0 {
            hyp.clear_nearest(pos, &window);
        }
        for o in 1..=s as usize {
            if let Some(kind) = hyp.kind(pos + o) {
                total += score_crossing(DrivingMode::Auton, DriverState::Aware, s, kind, model);
            }
        }
        pos += s as usize;
    }
    Ok(total)
}

/// MANUAL utility along one configuration, averaged exactly over the
/// driver's state in each interval.
pub fn manual_rollout(config: &[ObstacleKind], forecast: &DriverForecast, model: &RolloutModel) -> f64 {
    let policies = DriverState::ALL.map(|s| model.utility.manual_policy(model.skid, s));
    let hyp = Hypothetical { cells: config, cleared: 0 };
    manual_branch(&hyp, 0, 0, CommandQueue::starting_at(model.initial_speed), forecast, model, &policies)
}

fn manual_branch(
    hyp: &Hypothetical,
    pos: usize,
    interval: usize,
    queue: CommandQueue,
    forecast: &DriverForecast,
    model: &RolloutModel,
    policies: &[ManualPolicy; 2],
) -> f64 {
    let k = hyp.cells.len();
    if pos >= k || interval >= max_rollout_intervals(k) {
        return 0.0;
    }
    let p_dist = forecast
        .p_distracted
        .get(interval)
        .or(forecast.p_distracted.last())
        .copied()
        .unwrap_or(0.0);
    let mut total = 0.0;
    for state in DriverState::ALL {
        let w = match state {
            DriverState::Aware => 1.0 - p_dist,
            DriverState::Distracted => p_dist,
        };
        if w == 0.0 {
            continue;
        }
        let ranges = model.perception.ranges(DrivingMode::Manual, state);
        let window = hyp.window(pos, ranges, model.horizon);
        let chosen = manual_choose_speed(&window, &policies[state.index()]);
        let mut queue = queue.clone();
        let speed = queue.submit(chosen, interval, *model.driver.command_delay.get(state));
        let mut next = hyp.clone();
        let mut here = 0.0;
        if speed == 0 {
            next.clear_nearest(pos, &window);
        }
        for o in 1..=speed as usize {
            if let Some(kind) = hyp.kind(pos + o) {
                here += score_crossing(DrivingMode::Manual, state, speed, kind, model);
            }
        }
        let rest = manual_branch(&next, pos + speed as usize, interval + 1, queue, forecast, model, policies);
        total += w * (here + rest);
    }
    total
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// ψ for both modes: exact over the configuration lattice when it is small
/// enough, otherwise a Monte Carlo average over sampled configurations.
pub fn assess_modes<R: Rng + ?Sized>(
    chain: &ObstacleChain,
    driver_forecast: &DriverForecast,
    model: &RolloutModel,
    settings: &AssessmentSettings,
    rng: &mut R,
) -> Result<ModeAssessment> {
    if chain.lattice_size() <= settings.lattice_bound {
        let mut auton = 0.0;
        let mut manual = 0.0;
        for (config, p) in chain.configurations() {
            auton += p * auton_rollout(&config, model)?;
            manual += p * manual_rollout(&config, driver_forecast, model);
        }
        return Ok(ModeAssessment {
            psi_auton: auton,
            psi_manual: manual,
            se_auton: 0.0,
            se_manual: 0.0,
            method: AssessmentMethod::Exact,
        });
    }
    monte_carlo_assessment(chain, driver_forecast, model, settings.mc_samples, rng)
}

pub fn monte_carlo_assessment<R: Rng + ?Sized>(
    chain: &ObstacleChain,
    driver_forecast: &DriverForecast,
    model: &RolloutModel,
    samples: usize,
    rng: &mut R,
) -> Result<ModeAssessment> {
    if samples == 0 {
        return Err(Error::InvalidArgument("Monte Carlo assessment needs samples".into()));
    }
    let mut auton = Vec::with_capacity(samples);
    let mut manual = Vec::with_capacity(samples);
    for _ in 0..samples {
        let config = chain.sample(rng);
        auton.push(auton_rollout(&config, model)?);
        manual.push(manual_rollout(&config, driver_forecast, model));
    }
    let (psi_auton, se_auton) = mean_and_se(&auton);
    let (psi_manual, se_manual) = mean_and_se(&manual);
    Ok(ModeAssessment { psi_auton, psi_manual, se_auton, se_manual, method: AssessmentMethod::MonteCarlo })
}

/// ψ of a single mode; see [`assess_modes`].
pub fn expected_utility_of_mode<R: Rng + ?Sized>(
    mode: DrivingMode,
    chain: &ObstacleChain,
    driver_forecast: &DriverForecast,
    model: &RolloutModel,
    settings: &AssessmentSettings,
    rng: &mut R,
) -> Result<f64> {
    Ok(assess_modes(chain, driver_forecast, model, settings, rng)?.psi(mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::RoadTrace;
    use crate::rng::{stream, Stream};
    use approx::assert_abs_diff_eq;
    use ObstacleKind::{Clean, Puddle, Rock};

    struct Fixture {
        table: TransitionTable,
        utility: UtilityModel,
        skid: SkidModel,
        perception: PerceptionProfile,
        driver: DriverProfile,
        odd: OddLimits,
    }

    impl Fixture {
        fn new() -> Self {
            Self {
                table: TransitionTable::baseline(),
                utility: UtilityModel::default(),
                skid: SkidModel::default(),
                perception: PerceptionProfile::default(),
                driver: DriverProfile::default(),
                odd: OddLimits::default(),
            }
        }

        fn model(&self) -> RolloutModel<'_> {
            RolloutModel {
                table: &self.table,
                utility: &self.utility,
                skid: &self.skid,
                perception: &self.perception,
                driver: &self.driver,
                odd: &self.odd,
                horizon: 5,
                initial_speed: 3,
            }
        }
    }

    fn certain(p: f64) -> DriverForecast {
        DriverForecast { p_distracted: vec![p; 5] }
    }

    /// Brute force over every speed for a single interval.
    fn best_speed_oracle(ahead: &[ObstacleKind]) -> u8 {
        if ahead[..3].contains(&Rock) {
            return 0;
        }
        let values = [0.0, 0.1, 0.2, 0.3];
        let mut best = (0, 0.0);
        for s in 1..=3usize {
            let cells = &ahead[..s];
            if cells.contains(&Rock) || (s == 3 && cells.contains(&Puddle)) {
                continue;
            }
            let v: f64 = cells
                .iter()
                .map(|k| values[s] + 0.1 + if *k == Puddle && s == 3 { -9.5 } else { 0.0 })
                .sum();
            if v > best.1 {
                best = (s as u8, v);
            }
        }
        best.0
    }

    #[test]
    fn auton_plan_examples() {
        let f = Fixture::new();
        let plan = plan_auton_trajectory(&[Clean; 5], &f.utility, &f.skid, &f.odd, 5);
        assert_eq!(plan.speeds, vec![3; 6]);

        let plan = plan_auton_trajectory(&[Puddle, Clean, Clean, Clean, Clean], &f.utility, &f.skid, &f.odd, 5);
        assert_eq!(plan.first(), 2);

        let plan = plan_auton_trajectory(&[Clean, Rock, Clean, Clean, Clean], &f.utility, &f.skid, &f.odd, 5);
        assert_eq!(plan.first(), 0);
        assert_eq!(plan.speeds[1], 3);
    }

    #[test]
    fn auton_plan_matches_enumeration_for_every_short_configuration() {
        let f = Fixture::new();
        for code in 0..3usize.pow(5) {
            let mut c = code;
            let cells: Vec<ObstacleKind> = (0..5)
                .map(|_| {
                    let k = ObstacleKind::ALL[c % 3];
                    c /= 3;
                    k
                })
                .collect();
            let plan = plan_auton_trajectory(&cells, &f.utility, &f.skid, &f.odd, 0);
            assert_eq!(plan.first(), best_speed_oracle(&cells), "{cells:?}");
        }
    }

    #[test]
    fn crossing_utilities() {
        let u = UtilityModel::default();
        let clean = CellCrossing { index: 1, kind: Clean, collided: false, skidded: false };
        let skid = CellCrossing { index: 3, kind: Puddle, collided: false, skidded: true };
        assert_abs_diff_eq!(crossing_utility(DrivingMode::Manual, 1, &clean, &u), 0.1, epsilon = 1e-15);
        let stop = TraversalOutcome { crossed: vec![], end_position: 7 };
        assert_eq!(cell_utility(DrivingMode::Auton, 0, &stop, &u), 0.0);
        let four = TraversalOutcome {
            crossed: vec![clean, CellCrossing { index: 2, ..clean }, skid, CellCrossing { index: 4, ..clean }],
            end_position: 4,
        };
        assert_abs_diff_eq!(cell_utility(DrivingMode::Manual, 4, &four, &u), -8.0, epsilon = 1e-12);
    }

    fn psi(f: &Fixture, first: &[crate::environment::CellView], driver: DriverForecast) -> ModeAssessment {
        let window = PerceptionWindow { views: first.to_vec() };
        let chain = ObstacleChain::new(&f.table, &window).unwrap();
        let mut rng = stream(1, Stream::Assessment);
        assess_modes(&chain, &driver, &f.model(), &AssessmentSettings::default(), &mut rng).unwrap()
    }

    #[test]
    fn psi_on_a_clean_road() {
        let f = Fixture::new();
        let a = psi(&f, &[CellView::known(Clean); 5], certain(0.0));
        assert_abs_diff_eq!(a.psi_auton, 5.0 * 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(a.psi_manual, 5.0 * 0.5, epsilon = 1e-12);
        assert_eq!(a.method, AssessmentMethod::Exact);
    }

    #[test]
    fn psi_with_a_puddle_next() {
        let f = Fixture::new();
        let mut views = vec![CellView::known(Clean); 5];
        views[0] = CellView::known(Puddle);
        let a = psi(&f, &views, certain(0.0));
        // Manual: speed 1 over the puddle, then speed 4. Auton: 2 then 3.
        assert_abs_diff_eq!(a.psi_manual, 0.1 + 4.0 * 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(a.psi_auton, 2.0 * 0.3 + 3.0 * 0.4, epsilon = 1e-12);
    }

    #[test]
    fn distracted_driver_skids_in_expectation() {
        let fx = Fixture::new();
        let mut views = vec![CellView::known(Clean); 5];
        views[1] = CellView::known(Puddle);
        let mut model = fx.model();
        model.initial_speed = 4;
        let window = PerceptionWindow { views };
        let chain = ObstacleChain::new(&fx.table, &window).unwrap();
        let a = assess_modes(&chain, &certain(1.0), &model, &AssessmentSettings::default(), &mut stream(0, Stream::Assessment)).unwrap();
        // Blind to puddles: speed 4 for the first four cells, then one more.
        assert_abs_diff_eq!(a.psi_manual, 5.0 * 0.5 + 0.85 * -10.0, epsilon = 1e-12);
    }

    #[test]
    fn manual_rollout_averages_driver_states() {
        let f = Fixture::new();
        let mut config = vec![Clean; 5];
        config[1] = Puddle;
        let model = f.model();
        for p in [0.0, 0.3, 1.0] {
            let mixed = manual_rollout(&config, &certain(p), &model);
            let single_aware = manual_rollout(&config, &certain(0.0), &model);
            let single_dist = manual_rollout(&config, &certain(1.0), &model);
            if p == 0.0 {
                assert_eq!(mixed, single_aware);
            }
            if p == 1.0 {
                assert_eq!(mixed, single_dist);
            }
            let lo = single_aware.min(single_dist) - 10.0;
            assert!(mixed >= lo && mixed <= single_aware.max(single_dist) + 10.0);
        }
    }

    #[test]
    fn auton_rollout_never_crashes() {
        let f = Fixture::new();
        let model = f.model();
        for config in [[Clean, Clean, Rock, Clean, Clean], [Rock, Clean, Clean, Rock, Clean], [Clean, Clean, Clean, Clean, Rock]] {
            let u = auton_rollout(&config, &model).unwrap();
            assert!(u > 0.0, "{config:?} -> {u}");
        }
    }

    #[test]
    fn monte_carlo_agrees_with_enumeration() {
        let f = Fixture::new();
        let mut views = vec![CellView::UNKNOWN; 5];
        views[0] = CellView::known(Puddle);
        views[1] = CellView::UNKNOWN.exclude(Rock);
        views[2] = CellView::UNKNOWN.exclude(Rock);
        let chain = ObstacleChain::new(&f.table, &PerceptionWindow { views }).unwrap();
        let forecast = DriverForecast { p_distracted: vec![0.2, 0.3, 0.4, 0.45, 0.5] };
        let model = f.model();
        let exact = assess_modes(&chain, &forecast, &model, &AssessmentSettings::default(), &mut stream(3, Stream::Assessment)).unwrap();
        let mc = monte_carlo_assessment(&chain, &forecast, &model, 100_000, &mut stream(3, Stream::Assessment)).unwrap();
        assert_eq!(mc.method, AssessmentMethod::MonteCarlo);
        assert!((mc.psi_auton - exact.psi_auton).abs() <= 3.0 * mc.se_auton.max(1e-12), "{mc:?} vs {exact:?}");
        assert!((mc.psi_manual - exact.psi_manual).abs() <= 3.0 * mc.se_manual, "{mc:?} vs {exact:?}");
    }

    #[test]
    fn hypothetical_window_matches_real_perception() {
        let cells = [Clean, Puddle, Rock, Clean, Puddle];
        let hyp = Hypothetical { cells: &cells, cleared: 0 };
        let mut road_cells = vec![Clean];
        road_cells.extend(cells);
        road_cells.extend([Clean; 6]);
        let road = RoadTrace::from_cells(road_cells).unwrap();
        let perception = PerceptionProfile::default();
        for ranges in [perception.auton, perception.manual_aware, perception.manual_distracted] {
            let real = crate::environment::perceive_with(&road, 0, ranges, 5);
            assert_eq!(hyp.window(0, ranges, 5), real);
        }
    }
}

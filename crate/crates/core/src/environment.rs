//! Ground-truth road, perception and traversal physics.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::controller::DrivingMode;
use crate::driver::DriverState;
use crate::error::{Error, Result};
use crate::rng::{bernoulli, sample_categorical};

/// Content of one road cell. The discriminant is the table index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleKind {
    Rock = 0,
    Puddle = 1,
    Clean = 2,
}

impl ObstacleKind {
    pub const ALL: [ObstacleKind; 3] = [ObstacleKind::Rock, ObstacleKind::Puddle, ObstacleKind::Clean];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            ObstacleKind::Rock => '#',
            ObstacleKind::Puddle => '~',
            ObstacleKind::Clean => '.',
        }
    }
}

impl fmt::Display for ObstacleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ObstacleKind::Rock => "rock",
            ObstacleKind::Puddle => "puddle",
            ObstacleKind::Clean => "clean",
        };
        f.write_str(s)
    }
}

/// A value per obstacle kind, serialized as `{ rock, puddle, clean }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerObstacle<T> {
    pub rock: T,
    pub puddle: T,
    pub clean: T,
}

impl<T> PerObstacle<T> {
    pub fn get(&self, kind: ObstacleKind) -> &T {
        match kind {
            ObstacleKind::Rock => &self.rock,
            ObstacleKind::Puddle => &self.puddle,
            ObstacleKind::Clean => &self.clean,
        }
    }

    pub fn get_mut(&mut self, kind: ObstacleKind) -> &mut T {
        match kind {
            ObstacleKind::Rock => &mut self.rock,
            ObstacleKind::Puddle => &mut self.puddle,
            ObstacleKind::Clean => &mut self.clean,
        }
    }
}

pub(crate) const ROW_TOLERANCE: f64 = 1e-12;

pub(crate) fn check_distribution(row: &[f64], path: &str) -> Result<()> {
    if let Some(i) = row.iter().position(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
        return Err(Error::config(
            format!("{path}[{i}]"),
            format!("probability {} outside [0, 1]", row[i]),
        ));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::config(path, format!("row sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Row-stochastic 3×3 table: row = current cell kind, column = next cell kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PerObstacle<[f64; 3]>", into = "PerObstacle<[f64; 3]>")]
pub struct TransitionTable {
    rows: [[f64; 3]; 3],
}

impl TransitionTable {
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self> {
        for kind in ObstacleKind::ALL {
            check_distribution(&rows[kind.index()], &kind.to_string())?;
        }
        Ok(Self { rows })
    }

    /// Road dynamics used throughout the simulation experiments.
    pub fn baseline() -> Self {
        Self {
            rows: [[0.0, 0.0, 1.0], [0.0, 0.4, 0.6], [0.05, 0.05, 0.90]],
        }
    }

    /// Copy of `self` with p(puddle | clean) set to `puddle` and the
    /// clean→clean entry absorbing the difference. Clean→rock is unchanged.
    pub fn with_clean_to_puddle(&self, puddle: f64) -> Result<Self> {
        let mut rows = self.rows;
        let clean = ObstacleKind::Clean.index();
        rows[clean][ObstacleKind::Puddle.index()] = puddle;
        rows[clean][clean] = 1.0 - rows[clean][ObstacleKind::Rock.index()] - puddle;
        Self::new(rows).map_err(|_| {
            Error::InvalidArgument(format!(
                "p(puddle | clean) = {puddle} leaves the clean row non-stochastic"
            ))
        })
    }

    pub fn row(&self, from: ObstacleKind) -> &[f64; 3] {
        &self.rows[from.index()]
    }

    pub fn prob(&self, from: ObstacleKind, to: ObstacleKind) -> f64 {
        self.rows[from.index()][to.index()]
    }

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.rows
    }
}

impl TryFrom<PerObstacle<[f64; 3]>> for TransitionTable {
    type Error = Error;

    fn try_from(value: PerObstacle<[f64; 3]>) -> Result<Self> {
        Self::new([value.rock, value.puddle, value.clean])
    }
}

impl From<TransitionTable> for PerObstacle<[f64; 3]> {
    fn from(t: TransitionTable) -> Self {
        PerObstacle {
            rock: t.rows[0],
            puddle: t.rows[1],
            clean: t.rows[2],
        }
    }
}

pub fn sample_next_obstacle<R: Rng + ?Sized>(
    current: ObstacleKind,
    table: &TransitionTable,
    rng: &mut R,
) -> ObstacleKind {
    let i = sample_categorical(table.row(current), rng);
    ObstacleKind::ALL[i]
}

/// The generated road plus the rocks cleared during the trip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadTrace {
    cells: Vec<ObstacleKind>,
    removed_rocks: BTreeSet<usize>,
}

impl RoadTrace {
    pub fn from_cells(cells: Vec<ObstacleKind>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidArgument("road must have at least one cell".into()));
        }
        Ok(Self {
            cells,
            removed_rocks: BTreeSet::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Current content of a cell; cleared rocks read as clean. Cells past the
    /// end of the road are the (clean) destination.
    pub fn kind_at(&self, index: usize) -> ObstacleKind {
        match self.cells.get(index) {
            Some(ObstacleKind::Rock) if self.removed_rocks.contains(&index) => ObstacleKind::Clean,
            Some(k) => *k,
            None => ObstacleKind::Clean,
        }
    }

    /// Content as generated, ignoring clearing.
    pub fn original_kind(&self, index: usize) -> ObstacleKind {
        self.cells.get(index).copied().unwrap_or(ObstacleKind::Clean)
    }

    pub fn cells(&self) -> &[ObstacleKind] {
        &self.cells
    }

    pub fn removed_rocks(&self) -> &BTreeSet<usize> {
        &self.removed_rocks
    }

    /// Removes the nearest rock known in `window` (anchored at `position`).
    /// Returns the cleared cell index, if any.
    pub fn clear_rock_on_stop(&mut self, position: usize, window: &PerceptionWindow) -> Option<usize> {
        let offset = window.nearest_known(ObstacleKind::Rock)?;
        let index = position + offset;
        self.removed_rocks.insert(index);
        Some(index)
    }
}

pub fn generate_road<R: Rng + ?Sized>(
    length: usize,
    table: &TransitionTable,
    rng: &mut R,
) -> Result<RoadTrace> {
    if length == 0 {
        return Err(Error::InvalidArgument("road length must be >= 1".into()));
    }
    let mut cells = Vec::with_capacity(length);
    cells.push(ObstacleKind::Clean);
    for i in 1..length {
        let next = sample_next_obstacle(cells[i - 1], table, rng);
        cells.push(next);
    }
    RoadTrace::from_cells(cells)
}

/// How far ahead rocks and puddles are perceived, in cells. Zero means the
/// kind is never perceived.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRanges {
    pub rock: usize,
    pub puddle: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionProfile {
    pub auton: DetectionRanges,
    pub manual_aware: DetectionRanges,
    pub manual_distracted: DetectionRanges,
}

impl Default for PerceptionProfile {
    fn default() -> Self {
        Self {
            auton: DetectionRanges { rock: 3, puddle: 1 },
            manual_aware: DetectionRanges { rock: 5, puddle: 5 },
            manual_distracted: DetectionRanges { rock: 2, puddle: 0 },
        }
    }
}

impl PerceptionProfile {
    /// Ranges of whoever is in control. A stopped vehicle uses its own sensors.
    pub fn ranges(&self, mode: DrivingMode, state: DriverState) -> DetectionRanges {
        match (mode, state) {
            (DrivingMode::Manual, DriverState::Aware) => self.manual_aware,
            (DrivingMode::Manual, DriverState::Distracted) => self.manual_distracted,
            _ => self.auton,
        }
    }
}

/// Set of obstacle kinds still possible for a cell, as a 3-bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellView(u8);

impl CellView {
    pub const UNKNOWN: CellView = CellView(0b111);

    pub fn known(kind: ObstacleKind) -> Self {
        CellView(1 << kind.index())
    }

    pub fn allows(self, kind: ObstacleKind) -> bool {
        self.0 & (1 << kind.index()) != 0
    }

    pub fn exclude(self, kind: ObstacleKind) -> Self {
        CellView(self.0 & !(1 << kind.index()))
    }

    /// The cell content when exactly one kind remains possible.
    pub fn as_known(self) -> Option<ObstacleKind> {
        match self.0 {
            0b001 => Some(ObstacleKind::Rock),
            0b010 => Some(ObstacleKind::Puddle),
            0b100 => Some(ObstacleKind::Clean),
            _ => None,
        }
    }

    pub fn is_unknown(self) -> bool {
        self == Self::UNKNOWN
    }

    pub fn candidates(self) -> impl Iterator<Item = ObstacleKind> {
        ObstacleKind::ALL.into_iter().filter(move |k| self.allows(*k))
    }
}

impl fmt::Debug for CellView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_known() {
            Some(k) => write!(f, "Known({k})"),
            None if self.is_unknown() => f.write_str("Unknown"),
            None => {
                let names: Vec<String> = self.candidates().map(|k| k.to_string()).collect();
                write!(f, "OneOf({})", names.join("|"))
            }
        }
    }
}

/// What is known about offsets `1..=horizon` ahead of the vehicle.
/// `views[0]` is offset 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceptionWindow {
    pub views: Vec<CellView>,
}

impl PerceptionWindow {
    pub fn horizon(&self) -> usize {
        self.views.len()
    }

    /// View at a 1-based offset.
    pub fn at(&self, offset: usize) -> CellView {
        self.views[offset - 1]
    }

    pub fn nearest_known(&self, kind: ObstacleKind) -> Option<usize> {
        self.views
            .iter()
            .position(|v| v.as_known() == Some(kind))
            .map(|i| i + 1)
    }
}

/// Builds the window seen from `position` through the given detection ranges.
/// Within the rock range the observer knows rock-vs-not-rock, within the
/// puddle range puddle-vs-not-puddle; clean is known where both apply.
pub fn perceive_with(
    road: &RoadTrace,
    position: usize,
    ranges: DetectionRanges,
    horizon: usize,
) -> PerceptionWindow {
    let views = (1..=horizon)
        .map(|offset| view_of(road.kind_at(position + offset), offset, ranges))
        .collect();
    PerceptionWindow { views }
}

pub(crate) fn view_of(actual: ObstacleKind, offset: usize, ranges: DetectionRanges) -> CellView {
    let mut view = CellView::UNKNOWN;
    for (kind, range) in [(ObstacleKind::Rock, ranges.rock), (ObstacleKind::Puddle, ranges.puddle)] {
        if offset <= range {
            view = if actual == kind { CellView::known(kind) } else { view.exclude(kind) };
        }
        if view.as_known().is_some() {
            break;
        }
    }
    view
}

pub fn perceive(
    road: &RoadTrace,
    position: usize,
    mode: DrivingMode,
    state: DriverState,
    horizon: usize,
    profile: &PerceptionProfile,
) -> PerceptionWindow {
    perceive_with(road, position, profile.ranges(mode, state), horizon)
}

/// Skid probability per crossed puddle, indexed by speed. The table length
/// fixes the maximum legal speed of each mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkidModel {
    pub auton: Vec<f64>,
    pub manual_aware: Vec<f64>,
    pub manual_distracted: Vec<f64>,
}

impl Default for SkidModel {
    fn default() -> Self {
        let manual = vec![0.0, 0.0, 0.5, 0.8, 0.85];
        Self {
            auton: vec![0.0, 0.0, 0.0, 0.95],
            manual_aware: manual.clone(),
            manual_distracted: manual,
        }
    }
}

impl SkidModel {
    pub fn table(&self, mode: DrivingMode, state: DriverState) -> &[f64] {
        match (mode, state) {
            (DrivingMode::Manual, DriverState::Aware) => &self.manual_aware,
            (DrivingMode::Manual, DriverState::Distracted) => &self.manual_distracted,
            _ => &self.auton,
        }
    }

    pub fn max_speed(&self, mode: DrivingMode) -> u8 {
        match mode {
            DrivingMode::Auton => (self.auton.len() - 1) as u8,
            DrivingMode::Manual => (self.manual_aware.len().min(self.manual_distracted.len()) - 1) as u8,
            DrivingMode::Stopped => 0,
        }
    }

    pub fn probability(&self, mode: DrivingMode, state: DriverState, speed: u8) -> f64 {
        self.table(mode, state).get(speed as usize).copied().unwrap_or(0.0)
    }

    pub(crate) fn validate(&self, path: &str) -> Result<()> {
        for (name, table) in [
            ("auton", &self.auton),
            ("manual_aware", &self.manual_aware),
            ("manual_distracted", &self.manual_distracted),
        ] {
            if table.is_empty() {
                return Err(Error::config(format!("{path}.{name}"), "needs at least speed 0"));
            }
            if let Some(i) = table.iter().position(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::config(
                    format!("{path}.{name}[{i}]"),
                    "probability outside [0, 1]",
                ));
            }
        }
        if self.manual_aware.len() != self.manual_distracted.len() {
            return Err(Error::config(
                format!("{path}.manual_distracted"),
                "must list the same speeds as manual_aware",
            ));
        }
        Ok(())
    }
}

/// One crossed cell and what happened there.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCrossing {
    pub index: usize,
    pub kind: ObstacleKind,
    pub collided: bool,
    pub skidded: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraversalOutcome {
    pub crossed: Vec<CellCrossing>,
    pub end_position: usize,
}

impl TraversalOutcome {
    pub fn cells_crossed(&self) -> impl Iterator<Item = usize> + '_ {
        self.crossed.iter().map(|c| c.index)
    }

    pub fn collisions(&self) -> u32 {
        self.crossed.iter().filter(|c| c.collided).count() as u32
    }

    pub fn skids(&self) -> u32 {
        self.crossed.iter().filter(|c| c.skidded).count() as u32
    }

    pub fn collided(&self) -> bool {
        self.collisions() > 0
    }

    pub fn skidded(&self) -> bool {
        self.skids() > 0
    }
}

/// Moves `speed` cells from `position`, resolving collisions with uncleared
/// rocks and independent skids on every crossed puddle. The move is truncated
/// at the last road cell.
pub fn traverse<R: Rng + ?Sized>(
    road: &RoadTrace,
    position: usize,
    speed: u8,
    mode: DrivingMode,
    state: DriverState,
    skid: &SkidModel,
    rng: &mut R,
) -> Result<TraversalOutcome> {
    let max = skid.max_speed(mode);
    if speed > max {
        return Err(Error::InvalidArgument(format!(
            "speed {speed} exceeds the {mode} maximum of {max}"
        )));
    }
    let last = road.len() - 1;
    let end_position = (position + speed as usize).min(last.max(position));
    let p_skid = skid.probability(mode, state, speed);
    let crossed = (position + 1..=end_position)
        .map(|index| {
            let kind = road.kind_at(index);
            CellCrossing {
                index,
                kind,
                collided: kind == ObstacleKind::Rock,
                skidded: kind == ObstacleKind::Puddle && bernoulli(p_skid, rng),
            }
        })
        .collect();
    Ok(TraversalOutcome { crossed, end_position })
}

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::controller::{DrivingMode, RtiEvent, StepRecord, TripTally, WarningKind};
use crate::driver::DriverState;
use crate::error::Result;
use crate::harness::stats::{mean, quantile, std_dev};
use crate::planning::{cell_utility, UtilityModel};

/// One trip's outcome, flattened into a table row.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TripMetrics {
    pub replication: u64,
    pub seed: u64,
    pub utility: f64,
    pub intervals: u64,
    pub auton_fraction: f64,
    pub manual_fraction: f64,
    pub stopped_fraction: f64,
    pub rti_count: u32,
    pub rti_issued: u32,
    pub rti_completed: u32,
    pub rti_aborted: u32,
    pub aborted_proportion: f64,
    pub mean_manual_spell: f64,
    pub skids: u32,
    pub crashes: u32,
    pub crashes_auton: u32,
    pub crashes_manual_aware: u32,
    pub crashes_manual_distracted: u32,
    pub stops: u32,
    pub rock_stops: u32,
    pub warn_odd_limit: u32,
    pub warn_vehicle_surprise: u32,
    pub warn_env_surprise: u32,
    pub warn_bad_driver_state: u32,
    pub warn_driver_surprise: u32,
    pub warn_dangerous_road: u32,
    pub warn_emergency_abort: u32,
    pub warn_better_manual: u32,
    pub warn_dipa_performance: u32,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

impl TripMetrics {
    /// Metrics from the counters kept while the trip ran.
    pub fn from_tally(replication: u64, seed: u64, t: &TripTally) -> Self {
        let n = t.intervals as f64;
        let manual = t.intervals_by_mode[DrivingMode::Manual.index()] as f64;
        let mut m = Self {
            replication,
            seed,
            utility: t.utility,
            intervals: t.intervals as u64,
            auton_fraction: ratio(t.intervals_by_mode[DrivingMode::Auton.index()] as f64, n),
            manual_fraction: ratio(manual, n),
            stopped_fraction: ratio(t.intervals_by_mode[DrivingMode::Stopped.index()] as f64, n),
            rti_count: t.rti_completed + t.rti_aborted,
            rti_issued: t.rti_issued,
            rti_completed: t.rti_completed,
            rti_aborted: t.rti_aborted,
            aborted_proportion: ratio(t.rti_aborted as f64, (t.rti_aborted + t.rti_completed) as f64),
            mean_manual_spell: ratio(manual, t.manual_spells as f64),
            skids: t.skids,
            crashes: t.crashes,
            crashes_auton: t.crashes_auton,
            crashes_manual_aware: t.crashes_manual_aware,
            crashes_manual_distracted: t.crashes_manual_distracted,
            stops: t.intervals_by_mode[DrivingMode::Stopped.index()] as u32,
            rock_stops: t.rock_stops,
            ..Self::default()
        };
        m.set_warnings(&t.warnings);
        m
    }

    /// Metrics recounted from the per-interval records alone; utilities are
    /// re-derived from the recorded crossings.
    pub fn from_trace(replication: u64, seed: u64, trace: &[StepRecord], utility: &UtilityModel) -> Self {
        let mut t = TripTally::default();
        for r in trace {
            t.utility += recount_utility(r, utility);
            t.intervals += 1;
            t.intervals_by_mode[r.mode.index()] += 1;
            for e in &r.rti {
                match e {
                    RtiEvent::Issued { .. } => t.rti_issued += 1,
                    RtiEvent::Completed => {
                        t.rti_completed += 1;
                        t.manual_spells += 1;
                    }
                    e if e.is_aborted() => t.rti_aborted += 1,
                    _ => {}
                }
            }
            for c in &r.crossed {
                t.skids += c.skidded as u32;
                if c.collided {
                    t.crashes += 1;
                    match (r.mode, r.driver_state) {
                        (DrivingMode::Manual, DriverState::Aware) => t.crashes_manual_aware += 1,
                        (DrivingMode::Manual, DriverState::Distracted) => t.crashes_manual_distracted += 1,
                        _ => t.crashes_auton += 1,
                    }
                }
            }
            let aborted_stop = r.rti.iter().any(|e| matches!(e, RtiEvent::AbortedBetterAuton | RtiEvent::AbortedDipa));
            if r.mode == DrivingMode::Stopped && !aborted_stop {
                t.rock_stops += 1;
            }
            for w in &r.warnings {
                t.warnings[w.kind.index()] += 1;
            }
        }
        Self::from_tally(replication, seed, &t)
    }

    fn set_warnings(&mut self, w: &[u32; 9]) {
        let at = |k: WarningKind| w[k.index()];
        self.warn_odd_limit = at(WarningKind::OddLimit);
        self.warn_vehicle_surprise = at(WarningKind::VehicleSurprise);
        self.warn_env_surprise = at(WarningKind::EnvSurprise);
        self.warn_bad_driver_state = at(WarningKind::BadDriverState);
        self.warn_driver_surprise = at(WarningKind::DriverSurprise);
        self.warn_dangerous_road = at(WarningKind::DangerousRoad);
        self.warn_emergency_abort = at(WarningKind::EmergencyAbort);
        self.warn_better_manual = at(WarningKind::BetterManual);
        self.warn_dipa_performance = at(WarningKind::DipaPerformance);
    }

    pub fn skids_and_crashes(&self) -> u32 {
        self.skids + self.crashes
    }

    /// Numeric columns summarized across replications.
    pub fn numeric_fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("utility", self.utility),
            ("intervals", self.intervals as f64),
            ("auton_fraction", self.auton_fraction),
            ("manual_fraction", self.manual_fraction),
            ("stopped_fraction", self.stopped_fraction),
            ("rti_count", self.rti_count as f64),
            ("rti_issued", self.rti_issued as f64),
            ("rti_completed", self.rti_completed as f64),
            ("rti_aborted", self.rti_aborted as f64),
            ("aborted_proportion", self.aborted_proportion),
            ("mean_manual_spell", self.mean_manual_spell),
            ("skids", self.skids as f64),
            ("crashes", self.crashes as f64),
            ("crashes_auton", self.crashes_auton as f64),
            ("crashes_manual_aware", self.crashes_manual_aware as f64),
            ("crashes_manual_distracted", self.crashes_manual_distracted as f64),
            ("stops", self.stops as f64),
            ("rock_stops", self.rock_stops as f64),
            ("warn_odd_limit", self.warn_odd_limit as f64),
            ("warn_vehicle_surprise", self.warn_vehicle_surprise as f64),
            ("warn_env_surprise", self.warn_env_surprise as f64),
            ("warn_bad_driver_state", self.warn_bad_driver_state as f64),
            ("warn_driver_surprise", self.warn_driver_surprise as f64),
            ("warn_dangerous_road", self.warn_dangerous_road as f64),
            ("warn_emergency_abort", self.warn_emergency_abort as f64),
            ("warn_better_manual", self.warn_better_manual as f64),
            ("warn_dipa_performance", self.warn_dipa_performance as f64),
        ]
    }
}

/// Utility of one interval recomputed from its crossings.
pub fn recount_utility(record: &StepRecord, utility: &UtilityModel) -> f64 {
    let outcome = crate::environment::TraversalOutcome {
        crossed: record.crossed.clone(),
        end_position: record.end_position,
    };
    cell_utility(record.mode, record.speed, &outcome, utility)
}

pub fn write_metrics_csv<W: Write>(rows: &[TripMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<TripMetrics>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Distribution of one metric across replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl FieldSummary {
    pub fn of(metric: &str, xs: &[f64]) -> Self {
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            metric: metric.to_string(),
            n: xs.len(),
            mean: mean(xs),
            sd: std_dev(xs),
            min: sorted.first().copied().unwrap_or(f64::NAN),
            q05: quantile(&sorted, 0.05),
            q25: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q75: quantile(&sorted, 0.75),
            q95: quantile(&sorted, 0.95),
            max: sorted.last().copied().unwrap_or(f64::NAN),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSummary {
    pub replications: Vec<TripMetrics>,
    pub fields: Vec<FieldSummary>,
}

impl ExperimentSummary {
    pub fn from_rows(replications: Vec<TripMetrics>) -> Self {
        let names: Vec<&str> = TripMetrics::default().numeric_fields().iter().map(|(n, _)| *n).collect();
        let columns: Vec<Vec<f64>> = replications.iter().map(|r| r.numeric_fields().into_iter().map(|(_, v)| v).collect()).collect();
        let fields = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let xs: Vec<f64> = columns.iter().map(|row| row[j]).collect();
                FieldSummary::of(name, &xs)
            })
            .collect();
        Self { replications, fields }
    }

    pub fn field(&self, metric: &str) -> Option<&FieldSummary> {
        self.fields.iter().find(|f| f.metric == metric)
    }

    pub fn mean(&self, metric: &str) -> f64 {
        self.field(metric).map_or(f64::NAN, |f| f.mean)
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for f in &self.fields {
            w.serialize(f)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

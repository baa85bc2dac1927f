use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{StepRecord, Trip};
use crate::environment::{generate_road, RoadTrace};
use crate::error::{Error, Result};
use crate::harness::config::SimConfig;
use crate::harness::metrics::{write_metrics_csv, ExperimentSummary, TripMetrics};
use crate::rng::{replication_seed, stream, Stream};

pub struct TripRun {
    pub road: RoadTrace,
    pub metrics: TripMetrics,
    pub trace: Vec<StepRecord>,
}

pub fn generate_trip_road(config: &SimConfig, seed: u64) -> Result<RoadTrace> {
    generate_road(config.road_length, &config.road, &mut stream(seed, Stream::Road))
}

/// One trip with the given seed; `replication` only labels the row.
pub fn run_trip_labelled(config: &SimConfig, seed: u64, replication: u64) -> Result<TripRun> {
    let road = generate_trip_road(config, seed)?;
    let mut trip = Trip::new(config.trip.clone(), road.clone(), seed)?;
    let trace = trip.run()?;
    let metrics = TripMetrics::from_tally(replication, seed, trip.tally());
    Ok(TripRun { road, metrics, trace })
}

pub fn run_trip(config: &SimConfig, seed: u64) -> Result<TripRun> {
    run_trip_labelled(config, seed, 0)
}

fn run_replication(config: &SimConfig, r: u64) -> Result<TripMetrics> {
    let seed = replication_seed(config.seed, r);
    Ok(run_trip_labelled(config, seed, r)?.metrics)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

/// Replication `r` uses seed `config.seed ^ r`; rows come back in
/// replication order whatever the execution strategy.
pub fn run_experiment(config: &SimConfig, reps: usize, execution: Execution) -> Result<ExperimentSummary> {
    if reps == 0 {
        return Err(Error::InvalidArgument("an experiment needs at least one replication".into()));
    }
    config.validate()?;
    let rows: Result<Vec<TripMetrics>> = match execution {
        Execution::Serial => (0..reps as u64).map(|r| run_replication(config, r)).collect(),
        Execution::Parallel => (0..reps as u64).into_par_iter().map(|r| run_replication(config, r)).collect(),
    };
    Ok(ExperimentSummary::from_rows(rows?))
}

/// One sweep grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub puddle_rate: f64,
    pub n: usize,
    pub mean_utility: f64,
    pub sd_utility: f64,
    pub mean_aborted_proportion: f64,
    pub sd_aborted_proportion: f64,
    pub mean_rti_count: f64,
    pub mean_manual_fraction: f64,
    pub mean_skids: f64,
    pub mean_crashes: f64,
}

pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub summaries: Vec<ExperimentSummary>,
}

impl SweepResult {
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("sweep.csv");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join("sweep_replications.csv");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let mut header = vec!["puddle_rate".to_string(), "replication".to_string(), "seed".to_string()];
        header.extend(TripMetrics::default().numeric_fields().into_iter().map(|(n, _)| n.to_string()));
        w.write_record(&header)?;
        for (p, s) in self.points.iter().zip(&self.summaries) {
            for m in &s.replications {
                let mut record = vec![p.puddle_rate.to_string(), m.replication.to_string(), m.seed.to_string()];
                record.extend(m.numeric_fields().into_iter().map(|(_, v)| v.to_string()));
                w.write_record(&record)?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }
}

pub fn run_sweep(config: &SimConfig, grid: &[f64], reps: usize, execution: Execution) -> Result<SweepResult> {
    let mut points = Vec::with_capacity(grid.len());
    let mut summaries = Vec::with_capacity(grid.len());
    for &p in grid {
        let c = config.with_puddle_rate(p)?;
        let s = run_experiment(&c, reps, execution)?;
        let field = |name: &str| s.field(name).expect("known metric");
        points.push(SweepPoint {
            puddle_rate: p,
            n: reps,
            mean_utility: field("utility").mean,
            sd_utility: field("utility").sd,
            mean_aborted_proportion: field("aborted_proportion").mean,
            sd_aborted_proportion: field("aborted_proportion").sd,
            mean_rti_count: field("rti_count").mean,
            mean_manual_fraction: field("manual_fraction").mean,
            mean_skids: field("skids").mean,
            mean_crashes: field("crashes").mean,
        });
        summaries.push(s);
    }
    Ok(SweepResult { points, summaries })
}

/// Writes `replications.csv` and `summary.csv` into `dir`.
pub fn write_experiment(summary: &ExperimentSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("replications.csv");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_metrics_csv(&summary.replications, BufWriter::new(file))?;
    let path = dir.join("summary.csv");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    summary.write_summary_csv(BufWriter::new(file))
}

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::controller::StepRecord;
use crate::driver::{BlinkObservation, DriverProfile, DriverState};
use crate::environment::ObstacleKind;
use crate::error::{Error, Result};
use crate::inference::{predict_driver, viterbi_path, DriverBelief};

/// One JSON object per line.
pub fn write_trace<W: Write>(trace: &[StepRecord], mut out: W) -> Result<()> {
    for r in trace {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
    }
    out.flush().map_err(|e| Error::io("<trace>", e))
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<StepRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<trace>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidArgument(format!("trace line {}: {e}", i + 1)))?;
        out.push(record);
    }
    Ok(out)
}

/// Text picture of the road, `width` cells per row, first cell bottom left.
/// Each cell shows the obstacle, then mode letter and speed of the interval
/// that started there or crossed it, then `a`/`d` for the driver in MANUAL.
pub fn render_trace(trace: &[StepRecord], width: usize) -> String {
    let width = width.max(1);
    let Some(last) = trace.iter().map(|r| r.end_position.max(r.position)).max() else {
        return String::new();
    };
    let mut cells: Vec<Option<String>> = vec![None; last + 1];
    let mut symbol = vec!['.'; last + 1];
    for r in trace {
        let tag = |mode_letter: char| {
            let marker = match (r.mode, r.driver_state) {
                (crate::controller::DrivingMode::Manual, DriverState::Aware) => 'a',
                (crate::controller::DrivingMode::Manual, DriverState::Distracted) => 'd',
                _ => ' ',
            };
            format!("{mode_letter}{}{marker}", r.speed)
        };
        for c in &r.crossed {
            symbol[c.index] = c.kind.symbol();
            cells[c.index].get_or_insert_with(|| tag(r.mode.letter()));
        }
        cells[r.position] = Some(tag(r.mode.letter()));
    }
    let rendered: Vec<String> = (0..=last)
        .map(|i| format!("{}{}", symbol[i], cells[i].as_deref().unwrap_or("   ")))
        .collect();
    let mut rows: Vec<String> = rendered.chunks(width).map(|row| row.join(" ")).collect();
    rows.reverse();
    rows.join("\n") + "\n"
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub decoded: Vec<DriverState>,
    pub truth: Vec<DriverState>,
    pub agreement: f64,
    /// Agreement of always guessing the majority true state.
    pub majority_baseline: f64,
    pub mismatches: Vec<usize>,
}

/// Most likely driver-state path given the recorded blinks and obstacles,
/// compared with the simulated truth.
pub fn decode_trip_states(trace: &[StepRecord], profile: &DriverProfile) -> Result<DecodeReport> {
    let blinks: Vec<BlinkObservation> = trace.iter().map(|r| r.blinks).collect();
    let obstacles: Vec<ObstacleKind> = trace.iter().map(|r| r.obstacle).collect();
    let first = obstacles
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot decode an empty trace".into()))?;
    let initial = predict_driver(DriverBelief::certain(DriverState::Aware), *first, profile);
    let decoded = viterbi_path(&blinks, &obstacles, initial, profile)?;
    let truth: Vec<DriverState> = trace.iter().map(|r| r.driver_state).collect();
    let mismatches: Vec<usize> = (0..truth.len()).filter(|&i| decoded[i] != truth[i]).collect();
    let n = truth.len() as f64;
    let distracted = truth.iter().filter(|s| **s == DriverState::Distracted).count() as f64;
    Ok(DecodeReport {
        agreement: 1.0 - mismatches.len() as f64 / n,
        majority_baseline: distracted.max(n - distracted) / n,
        decoded,
        truth,
        mismatches,
    })
}

use modeswitch::controller::{DrivingMode, RtiEvent, StepRecord, WarningKind};
use modeswitch::driver::DriverState;
use modeswitch::environment::ObstacleKind;
use modeswitch::harness::metrics::TripMetrics;
use modeswitch::harness::{run_trip, SimConfig, TripRun};

fn short(config: SimConfig, len: usize) -> SimConfig {
    SimConfig { road_length: len, ..config }
}

fn trips() -> Vec<(SimConfig, TripRun)> {
    let mut out = Vec::new();
    for base in [SimConfig::paper_baseline(), SimConfig::safer()] {
        for seed in 0..12u64 {
            let c = short(base.clone(), 300);
            let run = run_trip(&c, seed).unwrap();
            out.push((c, run));
        }
    }
    out
}

fn dangerous(r: &StepRecord) -> bool {
    r.warnings.iter().any(|w| w.kind == WarningKind::DangerousRoad)
}

#[test]
fn trip_reaches_the_last_cell_and_moves_by_its_speed() {
    for (c, run) in trips() {
        let last = run.trace.last().unwrap();
        assert_eq!(last.end_position, c.road_length - 1);
        let mut pos = 0;
        for r in &run.trace {
            assert_eq!(r.position, pos);
            assert_eq!(r.crossed.len(), r.end_position - r.position);
            assert!(r.end_position - r.position <= r.speed as usize);
            let max = if r.mode == DrivingMode::Manual { 4 } else { 3 };
            assert!(r.speed <= max, "{:?} at speed {}", r.mode, r.speed);
            if r.mode == DrivingMode::Stopped {
                assert_eq!(r.speed, 0);
            }
            pos = r.end_position;
        }
    }
}

#[test]
fn control_passes_to_the_driver_only_through_a_completed_request() {
    for (_, run) in trips() {
        let mut prev = DrivingMode::Auton;
        for r in &run.trace {
            if r.mode == DrivingMode::Manual && prev != DrivingMode::Manual {
                assert!(r.rti.contains(&RtiEvent::Completed), "interval {}", r.interval);
            }
            if prev == DrivingMode::Manual && r.mode != DrivingMode::Manual {
                assert!(r.manual_exit.is_some(), "interval {}", r.interval);
            }
            prev = r.mode;
        }
    }
}

#[test]
fn requests_follow_a_dangerous_road_alarm() {
    for (_, run) in trips() {
        for r in &run.trace {
            let decided = r.rti.iter().any(|e| matches!(e, RtiEvent::Issued { .. }) || e.is_aborted());
            if decided {
                assert!(dangerous(r), "interval {}", r.interval);
                assert!(r.assessment.is_some() || r.rti.contains(&RtiEvent::AbortedDistracted) || r.rti.iter().any(|e| matches!(e, RtiEvent::Issued { .. })));
            }
        }
    }
}

#[test]
fn only_distracted_manual_driving_crashes() {
    for (_, run) in trips() {
        for r in &run.trace {
            for c in r.crossed.iter().filter(|c| c.collided) {
                assert_eq!(c.kind, ObstacleKind::Rock);
                assert_eq!((r.mode, r.driver_state), (DrivingMode::Manual, DriverState::Distracted));
            }
        }
        assert_eq!(run.metrics.crashes_auton, 0);
    }
}

#[test]
fn auton_never_enters_a_seen_puddle_at_top_speed() {
    for (_, run) in trips() {
        for r in run.trace.iter().filter(|r| r.mode == DrivingMode::Auton && r.speed == 3) {
            assert_ne!(r.obstacle, ObstacleKind::Puddle, "interval {}", r.interval);
        }
    }
}

#[test]
fn beliefs_and_forecasts_are_probabilities() {
    for (c, run) in trips() {
        for r in &run.trace {
            assert!((0.0..=1.0).contains(&r.p_distracted));
            assert_eq!(r.obstacle_forecast.len(), c.trip.horizon);
            for row in &r.obstacle_forecast {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            assert!(r.driver_forecast.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}

#[test]
fn trace_recount_matches_the_running_tally() {
    for (c, run) in trips() {
        let m = &run.metrics;
        let again = TripMetrics::from_trace(m.replication, m.seed, &run.trace, &c.trip.utility);
        assert_eq!(&again, m);
    }
}

#[test]
fn same_seed_same_trip() {
    let c = short(SimConfig::paper_baseline(), 200);
    let a = run_trip(&c, 42).unwrap();
    let b = run_trip(&c, 42).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.metrics, b.metrics);
    let other = run_trip(&c, 43).unwrap();
    assert_ne!(a.road.cells(), other.road.cells());
}

#[test]
fn mode_fractions_partition_the_trip() {
    for (_, run) in trips() {
        let m = &run.metrics;
        assert!((m.auton_fraction + m.manual_fraction + m.stopped_fraction - 1.0).abs() < 1e-12);
        assert_eq!(m.rti_count, m.rti_completed + m.rti_aborted);
        assert!(m.rti_completed <= m.rti_issued);
    }
}

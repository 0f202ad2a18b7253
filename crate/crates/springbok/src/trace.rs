//! Episode traces: one row per control tick, with CSV import/export.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::cpg::{FootTarget, NUM_LEGS};
use crate::sim::{RobotModel, RobotState, NUM_JOINTS};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace CSV failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed trace row {row}: {reason}")]
    Malformed { row: usize, reason: String },
    #[error("trace is empty")]
    Empty,
    #[error("trace time series is not strictly increasing at row {0}")]
    NonMonotonicTime(usize),
}

/// Columnar per-tick recording of one episode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace {
    pub time: Vec<f64>,
    pub trunk_position: Vec<Vector3<f64>>,
    pub trunk_orientation: Vec<UnitQuaternion<f64>>,
    pub trunk_velocity: Vec<Vector3<f64>>,
    pub trunk_angular_velocity: Vec<Vector3<f64>>,
    pub motor_positions: Vec<[f64; NUM_JOINTS]>,
    pub joint_positions: Vec<[f64; NUM_JOINTS]>,
    pub motor_velocities: Vec<[f64; NUM_JOINTS]>,
    pub joint_velocities: Vec<[f64; NUM_JOINTS]>,
    pub spring_torques: Vec<[f64; NUM_JOINTS]>,
    pub contacts: Vec<[bool; NUM_LEGS]>,
    /// Desired foot targets, flattened `[x0, z0, x1, z1, ...]` per row.
    pub foot_targets: Vec<[f64; NUM_JOINTS]>,
}

impl EpisodeTrace {
    pub fn with_capacity(ticks: usize) -> Self {
        EpisodeTrace {
            time: Vec::with_capacity(ticks),
            trunk_position: Vec::with_capacity(ticks),
            trunk_orientation: Vec::with_capacity(ticks),
            trunk_velocity: Vec::with_capacity(ticks),
            trunk_angular_velocity: Vec::with_capacity(ticks),
            motor_positions: Vec::with_capacity(ticks),
            joint_positions: Vec::with_capacity(ticks),
            motor_velocities: Vec::with_capacity(ticks),
            joint_velocities: Vec::with_capacity(ticks),
            spring_torques: Vec::with_capacity(ticks),
            contacts: Vec::with_capacity(ticks),
            foot_targets: Vec::with_capacity(ticks),
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn duration(&self) -> f64 {
        if self.time.len() < 2 {
            0.0
        } else {
            self.time[self.time.len() - 1] - self.time[0]
        }
    }

    /// Appends one tick from a simulation state.
    pub fn push_state(&mut self, state: &RobotState, model: &RobotModel, targets: &[FootTarget; NUM_LEGS]) {
        self.time.push(state.time);
        self.trunk_position.push(state.trunk_position);
        self.trunk_orientation.push(state.trunk_orientation);
        self.trunk_velocity.push(state.trunk_velocity);
        self.trunk_angular_velocity.push(state.trunk_angular_velocity);
        self.motor_positions.push(state.motor_positions);
        self.joint_positions.push(state.joint_positions);
        self.motor_velocities.push(state.motor_velocities);
        self.joint_velocities.push(state.joint_velocities);
        self.spring_torques.push(state.spring_torques(model));
        self.contacts.push(state.contacts);
        let mut flat = [0.0; NUM_JOINTS];
        for (leg, target) in targets.iter().enumerate() {
            flat[2 * leg] = target.x;
            flat[2 * leg + 1] = target.z;
        }
        self.foot_targets.push(flat);
    }

    /// Checks length consistency and strict time monotonicity.
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.is_empty() {
            return Err(TraceError::Empty);
        }
        let n = self.len();
        let lengths = [
            self.trunk_position.len(),
            self.trunk_orientation.len(),
            self.trunk_velocity.len(),
            self.trunk_angular_velocity.len(),
            self.motor_positions.len(),
            self.joint_positions.len(),
            self.motor_velocities.len(),
            self.joint_velocities.len(),
            self.spring_torques.len(),
            self.contacts.len(),
            self.foot_targets.len(),
        ];
        if lengths.iter().any(|&l| l != n) {
            return Err(TraceError::Malformed {
                row: 0,
                reason: "column lengths differ".to_string(),
            });
        }
        for i in 1..n {
            if self.time[i] <= self.time[i - 1] {
                return Err(TraceError::NonMonotonicTime(i));
            }
        }
        Ok(())
    }

    fn header() -> Vec<String> {
        let mut cols = vec![
            "t".to_string(),
            "px".into(),
            "py".into(),
            "pz".into(),
            "qw".into(),
            "qx".into(),
            "qy".into(),
            "qz".into(),
            "vx".into(),
            "vy".into(),
            "vz".into(),
            "wx".into(),
            "wy".into(),
            "wz".into(),
        ];
        for group in ["theta", "jq", "thetad", "jqd", "tau"] {
            for j in 0..NUM_JOINTS {
                cols.push(format!("{group}{j}"));
            }
        }
        for leg in 0..NUM_LEGS {
            cols.push(format!("contact{leg}"));
        }
        for leg in 0..NUM_LEGS {
            cols.push(format!("tgt_x{leg}"));
            cols.push(format!("tgt_z{leg}"));
        }
        cols
    }

    /// Writes the trace as CSV (one row per control tick).
    pub fn write_csv(&self, path: &Path) -> Result<(), TraceError> {
        let file = BufWriter::new(File::create(path)?);
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(Self::header())?;
        for i in 0..self.len() {
            let mut record: Vec<String> = Vec::with_capacity(66);
            record.push(self.time[i].to_string());
            for v in [&self.trunk_position[i]] {
                record.extend([v.x.to_string(), v.y.to_string(), v.z.to_string()]);
            }
            let q = self.trunk_orientation[i].as_ref();
            record.extend([
                q.w.to_string(),
                q.i.to_string(),
                q.j.to_string(),
                q.k.to_string(),
            ]);
            for v in [&self.trunk_velocity[i], &self.trunk_angular_velocity[i]] {
                record.extend([v.x.to_string(), v.y.to_string(), v.z.to_string()]);
            }
            for arr in [
                &self.motor_positions[i],
                &self.joint_positions[i],
                &self.motor_velocities[i],
                &self.joint_velocities[i],
                &self.spring_torques[i],
            ] {
                record.extend(arr.iter().map(|x| x.to_string()));
            }
            record.extend(
                self.contacts[i]
                    .iter()
                    .map(|&c| if c { "1" } else { "0" }.to_string()),
            );
            record.extend(self.foot_targets[i].iter().map(|x| x.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads a trace written by [`EpisodeTrace::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self, TraceError> {
        let file = BufReader::new(File::open(path)?);
        let mut reader = csv::Reader::from_reader(file);
        let mut trace = EpisodeTrace::default();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let expected = Self::header().len();
            if record.len() != expected {
                return Err(TraceError::Malformed {
                    row,
                    reason: format!("expected {} columns, got {}", expected, record.len()),
                });
            }
            let parse = |idx: usize| -> Result<f64, TraceError> {
                record[idx].parse::<f64>().map_err(|e| TraceError::Malformed {
                    row,
                    reason: format!("column {idx}: {e}"),
                })
            };
            trace.time.push(parse(0)?);
            trace
                .trunk_position
                .push(Vector3::new(parse(1)?, parse(2)?, parse(3)?));
            let quat = Quaternion::new(parse(4)?, parse(5)?, parse(6)?, parse(7)?);
            trace
                .trunk_orientation
                .push(UnitQuaternion::from_quaternion(quat));
            trace
                .trunk_velocity
                .push(Vector3::new(parse(8)?, parse(9)?, parse(10)?));
            trace
                .trunk_angular_velocity
                .push(Vector3::new(parse(11)?, parse(12)?, parse(13)?));
            let mut offset = 14;
            let read_joints = |offset: usize| -> Result<[f64; NUM_JOINTS], TraceError> {
                let mut arr = [0.0; NUM_JOINTS];
                for (j, slot) in arr.iter_mut().enumerate() {
                    *slot = parse(offset + j)?;
                }
                Ok(arr)
            };
            trace.motor_positions.push(read_joints(offset)?);
            offset += NUM_JOINTS;
            trace.joint_positions.push(read_joints(offset)?);
            offset += NUM_JOINTS;
            trace.motor_velocities.push(read_joints(offset)?);
            offset += NUM_JOINTS;
            trace.joint_velocities.push(read_joints(offset)?);
            offset += NUM_JOINTS;
            trace.spring_torques.push(read_joints(offset)?);
            offset += NUM_JOINTS;
            let mut contacts = [false; NUM_LEGS];
            for (leg, slot) in contacts.iter_mut().enumerate() {
                *slot = &record[offset + leg] == "1";
            }
            trace.contacts.push(contacts);
            offset += NUM_LEGS;
            let mut targets = [0.0; NUM_JOINTS];
            for (k, slot) in targets.iter_mut().enumerate() {
                *slot = parse(offset + k)?;
            }
            trace.foot_targets.push(targets);
        }
        trace.validate()?;
        Ok(trace)
    }
}

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use nalgebra::{DVector, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::model::{GeneralizedState, RobotModel};
use crate::solver::Actuation;

/// One proprioceptive sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferEntry {
    pub timestamp: f64,
    pub rotation: UnitQuaternion<f64>,
    pub position: Vector3<f64>,
    /// World-frame angular velocity.
    pub omega: Vector3<f64>,
    pub p_dot: Vector3<f64>,
    pub q_jnt: Vec<f64>,
    pub qdot_jnt: Vec<f64>,
    pub tau: Vec<f64>,
    /// Known external force and torque on the base (world frame) applied
    /// over the following interval.
    pub force_ext: Vector3<f64>,
    pub torque_ext: Vector3<f64>,
    pub contact_flags: Vec<bool>,
    /// Estimated foot velocities, world frame.
    pub foot_velocities: Vec<Vector3<f64>>,
    pub rejected: Vec<bool>,
}

impl BufferEntry {
    #[allow(clippy::too_many_arguments)]
    pub fn from_state(
        state: &GeneralizedState,
        tau: &[f64],
        force_ext: Vector3<f64>,
        torque_ext: Vector3<f64>,
        contact_flags: Vec<bool>,
        foot_velocities: Vec<Vector3<f64>>,
    ) -> Self {
        let n = contact_flags.len();
        Self {
            timestamp: state.time,
            rotation: state.orientation(),
            position: state.position(),
            omega: state.angular_velocity(),
            p_dot: state.linear_velocity(),
            q_jnt: state.joint_positions().iter().copied().collect(),
            qdot_jnt: state.joint_velocities().iter().copied().collect(),
            tau: tau.to_vec(),
            force_ext,
            torque_ext,
            contact_flags,
            foot_velocities,
            rejected: vec![false; n],
        }
    }

    pub fn state(&self) -> GeneralizedState {
        GeneralizedState::from_parts(
            self.position,
            self.rotation,
            &self.q_jnt,
            self.p_dot,
            self.omega,
            &self.qdot_jnt,
            self.timestamp,
        )
    }

    pub fn actuation(&self, model: &RobotModel) -> Actuation {
        Actuation::with_base_wrench(
            model,
            DVector::from_column_slice(&self.tau),
            self.force_ext,
            self.torque_ext,
        )
    }

    pub fn n_contacts(&self) -> usize {
        self.contact_flags.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.contact_flags.len();
        if self.foot_velocities.len() != n || self.rejected.len() != n {
            return Err(Error::Buffer(format!(
                "entry at t={} has inconsistent contact arrays",
                self.timestamp
            )));
        }
        if self.q_jnt.len() != self.qdot_jnt.len() {
            return Err(Error::Buffer(format!(
                "entry at t={} has mismatched joint arrays",
                self.timestamp
            )));
        }
        let norm = self.rotation.quaternion().norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Buffer(format!(
                "entry at t={} has non-unit rotation",
                self.timestamp
            )));
        }
        Ok(())
    }
}

/// FIFO ring of the most recent `capacity` entries.
#[derive(Debug, Clone)]
pub struct DataBuffer {
    entries: VecDeque<BufferEntry>,
    capacity: usize,
    dt_buffer: f64,
    /// Allowed deviation of consecutive timestamps from `dt_buffer`.
    jitter: f64,
}

impl DataBuffer {
    pub fn new(capacity: usize, dt_buffer: f64) -> Result<Self> {
        if capacity == 0 || !(dt_buffer > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "buffer needs positive capacity and dt, got {capacity} and {dt_buffer}"
            )));
        }
        Ok(Self {
            entries: VecDeque::with_capacity(capacity),
            capacity,
            dt_buffer,
            jitter: 0.1 * dt_buffer,
        })
    }

    pub fn push(&mut self, entry: BufferEntry) -> Result<()> {
        entry.validate()?;
        if let Some(last) = self.entries.back() {
            let gap = entry.timestamp - last.timestamp;
            if !(gap > 0.0) {
                return Err(Error::Buffer(format!(
                    "timestamp {} does not follow {}",
                    entry.timestamp, last.timestamp
                )));
            }
            if (gap - self.dt_buffer).abs() > self.jitter {
                return Err(Error::Buffer(format!(
                    "timestamp spacing {gap} differs from {}",
                    self.dt_buffer
                )));
            }
            if last.n_contacts() != entry.n_contacts() {
                return Err(Error::Buffer(
                    "contact count changed between entries".into(),
                ));
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dt_buffer(&self) -> f64 {
        self.dt_buffer
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn entries(&self) -> impl Iterator<Item = &BufferEntry> {
        self.entries.iter()
    }

    pub fn to_vec(&self) -> Vec<BufferEntry> {
        self.entries.iter().cloned().collect()
    }
}

/// Buffer shared between one writer and one reader; readers work on a copy.
#[derive(Debug, Clone)]
pub struct SharedBuffer {
    inner: Arc<Mutex<DataBuffer>>,
}

impl SharedBuffer {
    pub fn new(buffer: DataBuffer) -> Self {
        Self {
            inner: Arc::new(Mutex::new(buffer)),
        }
    }

    pub fn push(&self, entry: BufferEntry) -> Result<()> {
        self.inner
            .lock()
            .map_err(|_| Error::Buffer("buffer lock poisoned".into()))?
            .push(entry)
    }

    pub fn snapshot(&self) -> Result<DataBuffer> {
        Ok(self
            .inner
            .lock()
            .map_err(|_| Error::Buffer("buffer lock poisoned".into()))?
            .clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(t: f64) -> BufferEntry {
        BufferEntry {
            timestamp: t,
            rotation: UnitQuaternion::identity(),
            position: Vector3::zeros(),
            omega: Vector3::zeros(),
            p_dot: Vector3::zeros(),
            q_jnt: vec![],
            qdot_jnt: vec![],
            tau: vec![],
            force_ext: Vector3::zeros(),
            torque_ext: Vector3::zeros(),
            contact_flags: vec![true],
            foot_velocities: vec![Vector3::zeros()],
            rejected: vec![false],
        }
    }

    #[test]
    fn fifo_overflow() {
        let mut b = DataBuffer::new(50, 0.01).unwrap();
        for i in 0..51 {
            b.push(entry(i as f64 * 0.01)).unwrap();
        }
        assert_eq!(b.len(), 50);
        assert!(b.entries().all(|e| e.timestamp > 0.0));
    }

    #[test]
    fn empty_push() {
        let mut b = DataBuffer::new(50, 0.01).unwrap();
        b.push(entry(0.0)).unwrap();
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn rejects_out_of_order_and_gaps() {
        let mut b = DataBuffer::new(50, 0.01).unwrap();
        b.push(entry(0.1)).unwrap();
        assert!(b.push(entry(0.1)).is_err());
        assert!(b.push(entry(0.05)).is_err());
        assert!(b.push(entry(0.2)).is_err());
        b.push(entry(0.11)).unwrap();
    }

    #[test]
    fn snapshot_is_isolated() {
        let shared = SharedBuffer::new(DataBuffer::new(5, 0.01).unwrap());
        shared.push(entry(0.0)).unwrap();
        let snap = shared.snapshot().unwrap();
        let writer = shared.clone();
        std::thread::spawn(move || writer.push(entry(0.01)).unwrap())
            .join()
            .unwrap();
        assert_eq!(snap.len(), 1);
        assert_eq!(shared.snapshot().unwrap().len(), 2);
    }
}

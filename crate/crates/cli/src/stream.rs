//! Sample stream CSV: one row per buffer entry, optionally with ground truth.

use std::collections::HashMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use frictid_core::harness::ScenarioRun;
use frictid_core::identifier::BufferEntry;
use frictid_core::solver::ContactLabel;
use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::output::num;

/// Per-sample columns ahead of the joint and contact groups; all but the last
/// are required when reading.
const BASE: [&str; 21] = [
    "t", "px", "py", "pz", "qw", "qx", "qy", "qz", "wx", "wy", "wz", "vx", "vy", "vz", "fx", "fy",
    "fz", "mx", "my", "mz", "mu_true",
];

pub fn header(n_joints: usize, n_contacts: usize) -> Vec<String> {
    let mut h: Vec<String> = BASE.iter().map(|s| s.to_string()).collect();
    for prefix in ["q", "qdot", "tau"] {
        h.extend((0..n_joints).map(|j| format!("{prefix}_{j}")));
    }
    for k in 0..n_contacts {
        h.push(format!("contact_{k}"));
        h.extend(["x", "y", "z"].iter().map(|a| format!("foot_{k}_v{a}")));
        h.push(format!("slip_{k}"));
    }
    h
}

pub fn rows(run: &ScenarioRun) -> impl Iterator<Item = Vec<String>> + '_ {
    run.entries.iter().zip(&run.truth).map(|(e, g)| {
        let q = e.rotation.quaternion();
        let mut r: Vec<String> = [e.timestamp]
            .into_iter()
            .chain(e.position.iter().copied())
            .chain([q.w, q.i, q.j, q.k])
            .chain(e.omega.iter().copied())
            .chain(e.p_dot.iter().copied())
            .chain(e.force_ext.iter().copied())
            .chain(e.torque_ext.iter().copied())
            .chain([g.mu_true])
            .chain(e.q_jnt.iter().copied())
            .chain(e.qdot_jnt.iter().copied())
            .chain(e.tau.iter().copied())
            .map(num)
            .collect();
        for k in 0..e.contact_flags.len() {
            r.push(u8::from(e.contact_flags[k]).to_string());
            r.extend(e.foot_velocities[k].iter().map(|x| num(*x)));
            r.push(u8::from(g.labels.get(k) == Some(&ContactLabel::Sliding)).to_string());
        }
        r
    })
}

/// Reads buffer entries back from a stream file. Ground-truth columns are
/// ignored.
pub fn read(path: &Path, n_joints: usize, n_contacts: usize) -> Result<Vec<BufferEntry>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot read stream {}", path.display()))?;
    let columns: HashMap<String, usize> = reader
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let required = header(n_joints, n_contacts);
    if let Some(missing) = required
        .iter()
        .filter(|h| !h.starts_with("slip_") && *h != "mu_true")
        .find(|h| !columns.contains_key(*h))
    {
        bail!(
            "stream {} has no `{missing}` column; does it match the configured model?",
            path.display()
        );
    }
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |name: &str| -> Result<f64> {
            let text = &record[columns[name]];
            text.parse::<f64>()
                .with_context(|| format!("line {line}: `{name}` is not a number: {text:?}"))
        };
        let vec3 = |a: &str, b: &str, c: &str| -> Result<Vector3<f64>> {
            Ok(Vector3::new(get(a)?, get(b)?, get(c)?))
        };
        let list = |prefix: &str| -> Result<Vec<f64>> {
            (0..n_joints)
                .map(|j| get(&format!("{prefix}_{j}")))
                .collect()
        };
        let q = Quaternion::new(get("qw")?, get("qx")?, get("qy")?, get("qz")?);
        let mut contact_flags = Vec::with_capacity(n_contacts);
        let mut foot_velocities = Vec::with_capacity(n_contacts);
        for k in 0..n_contacts {
            contact_flags.push(get(&format!("contact_{k}"))? != 0.0);
            foot_velocities.push(vec3(
                &format!("foot_{k}_vx"),
                &format!("foot_{k}_vy"),
                &format!("foot_{k}_vz"),
            )?);
        }
        entries.push(BufferEntry {
            timestamp: get("t")?,
            rotation: UnitQuaternion::from_quaternion(q),
            position: vec3("px", "py", "pz")?,
            omega: vec3("wx", "wy", "wz")?,
            p_dot: vec3("vx", "vy", "vz")?,
            q_jnt: list("q")?,
            qdot_jnt: list("qdot")?,
            tau: list("tau")?,
            force_ext: vec3("fx", "fy", "fz")?,
            torque_ext: vec3("mx", "my", "mz")?,
            contact_flags,
            foot_velocities,
            rejected: vec![false; n_contacts],
        });
    }
    if entries.len() < 2 {
        bail!("stream {} has fewer than two samples", path.display());
    }
    Ok(entries)
}

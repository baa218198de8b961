use super::buffer::BufferEntry;

/// Per-entry, per-contact rejection scores.
///
/// `r1 = 1 - c exp(-alpha |v_n|)`, `r2 = |r1 - r1_prev|` (the value before
/// the first entry is 0) and the score is `max(r1, r2)`.
pub fn rejection_scores(entries: &[BufferEntry], alpha_rej: f64) -> Vec<Vec<f64>> {
    let n_c = entries.first().map_or(0, |e| e.n_contacts());
    let mut prev = vec![0.0; n_c];
    entries
        .iter()
        .map(|e| {
            (0..n_c)
                .map(|k| {
                    let c = if e.contact_flags[k] { 1.0 } else { 0.0 };
                    let r1 = 1.0 - c * (-alpha_rej * e.foot_velocities[k].z.abs()).exp();
                    let r2 = (r1 - prev[k]).abs();
                    prev[k] = r1;
                    r1.max(r2)
                })
                .collect()
        })
        .collect()
}

/// Marks contacts whose score exceeds `gamma_rej`; returns the number of
/// rejected (entry, contact) pairs.
pub fn apply_rejection(entries: &mut [BufferEntry], alpha_rej: f64, gamma_rej: f64) -> usize {
    let scores = rejection_scores(entries, alpha_rej);
    let mut count = 0;
    for (e, s) in entries.iter_mut().zip(&scores) {
        for (k, &r) in s.iter().enumerate() {
            e.rejected[k] = r > gamma_rej;
            count += e.rejected[k] as usize;
        }
    }
    count
}

/// Mean tangential foot speed over flagged, non-rejected contacts whose speed
/// exceeds `nonzero_speed`; zero if none survive.
pub fn mean_tangential_speed(entries: &[BufferEntry], nonzero_speed: f64) -> f64 {
    let speeds: Vec<f64> = entries
        .iter()
        .flat_map(|e| {
            (0..e.n_contacts())
                .filter(|&k| e.contact_flags[k] && !e.rejected[k])
                .map(|k| e.foot_velocities[k].xy().norm())
                .filter(|&s| s > nonzero_speed)
                .collect::<Vec<_>>()
        })
        .collect();
    if speeds.is_empty() {
        0.0
    } else {
        speeds.iter().sum::<f64>() / speeds.len() as f64
    }
}

/// `eta = 1 - exp(-alpha v_mean)`.
pub fn confidence_from_speed(mean_speed: f64, alpha_conf: f64) -> f64 {
    1.0 - (-alpha_conf * mean_speed).exp()
}

pub fn confidence_score(entries: &[BufferEntry], alpha_conf: f64, nonzero_speed: f64) -> f64 {
    confidence_from_speed(mean_tangential_speed(entries, nonzero_speed), alpha_conf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{UnitQuaternion, Vector3};
    use proptest::prelude::*;

    fn entry(t: f64, flag: bool, v: Vector3<f64>) -> BufferEntry {
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
            contact_flags: vec![flag],
            foot_velocities: vec![v],
            rejected: vec![false],
        }
    }

    #[test]
    fn resting_contact_scores_zero() {
        let s = rejection_scores(&[entry(0.0, true, Vector3::zeros())], 5.0);
        assert_eq!(s[0][0], 0.0);
    }

    #[test]
    fn no_contact_is_rejected() {
        let mut es = vec![entry(0.0, false, Vector3::zeros())];
        assert_eq!(rejection_scores(&es, 5.0)[0][0], 1.0);
        assert_eq!(apply_rejection(&mut es, 5.0, 0.4), 1);
        assert!(es[0].rejected[0]);
    }

    #[test]
    fn threshold_crossing_velocity() {
        let vn = (1.0f64 / 0.6).ln() / 5.0;
        assert_relative_eq!(vn, 0.1022, epsilon = 1e-4);
        let s = rejection_scores(&[entry(0.0, true, Vector3::new(0.0, 0.0, -vn))], 5.0);
        assert_relative_eq!(s[0][0], 0.4, epsilon = 1e-12);
        let below = rejection_scores(&[entry(0.0, true, Vector3::new(0.0, 0.0, -0.9 * vn))], 5.0);
        assert!(below[0][0] < 0.4);
    }

    #[test]
    fn jump_in_score_is_rejected() {
        // leaving contact: r1 jumps from 0 to 1, then back to 0 on touchdown
        let mut es = vec![
            entry(0.0, true, Vector3::zeros()),
            entry(0.01, false, Vector3::zeros()),
            entry(0.02, true, Vector3::zeros()),
            entry(0.03, true, Vector3::zeros()),
        ];
        let s = rejection_scores(&es, 5.0);
        assert_eq!(s[2][0], 1.0);
        apply_rejection(&mut es, 5.0, 0.4);
        let flags: Vec<bool> = es.iter().map(|e| e.rejected[0]).collect();
        assert_eq!(flags, vec![false, true, true, false]);
    }

    #[test]
    fn confidence_values() {
        assert_eq!(
            confidence_score(&[entry(0.0, true, Vector3::zeros())], 3.0, 0.01),
            0.0
        );
        assert_relative_eq!(
            confidence_from_speed(0.5, 3.0),
            1.0 - (-1.5f64).exp(),
            epsilon = 1e-15
        );
        assert_relative_eq!(confidence_from_speed(0.5, 3.0), 0.7769, epsilon = 1e-4);
        let v = (1.0f64 / 0.42).ln() / 3.0;
        assert_relative_eq!(v, 0.2891, epsilon = 1e-4);
        assert_relative_eq!(confidence_from_speed(v, 3.0), 0.58, epsilon = 1e-12);
    }

    #[test]
    fn rejected_and_unflagged_samples_do_not_count() {
        let mut es = vec![
            entry(0.0, true, Vector3::new(0.5, 0.0, 0.0)),
            entry(0.01, false, Vector3::new(2.0, 0.0, 0.0)),
        ];
        assert_relative_eq!(mean_tangential_speed(&es, 0.01), 0.5);
        es[0].rejected[0] = true;
        assert_eq!(mean_tangential_speed(&es, 0.01), 0.0);
    }

    proptest! {
        #[test]
        fn r1_monotone_in_normal_speed(a in 0.0f64..3.0, b in 0.0f64..3.0, alpha in 0.1f64..10.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let s_lo = rejection_scores(&[entry(0.0, true, Vector3::new(0.0, 0.0, lo))], alpha)[0][0];
            let s_hi = rejection_scores(&[entry(0.0, true, Vector3::new(0.0, 0.0, -hi))], alpha)[0][0];
            prop_assert!(s_lo <= s_hi);
            prop_assert!((0.0..=1.0).contains(&s_hi));
        }

        #[test]
        fn eta_monotone_and_bounded(a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let e_lo = confidence_from_speed(lo, 3.0);
            let e_hi = confidence_from_speed(hi, 3.0);
            prop_assert!(e_lo <= e_hi);
            prop_assert!((0.0..1.0).contains(&e_hi));
        }
    }
}

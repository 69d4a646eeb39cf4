//! Two-body impulse-momentum delta-V for a central (collinear) impact.
//!
//! The impulse acts along the pre-impact relative velocity. With closing speed
//! `|v1 - v2|` and restitution `e`, each body's velocity change is
//! `(1 + e) · m_other / (m1 + m2) · |v1 - v2|`, so `m1·dv1 = m2·dv2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Delta-V below which a crash counts as a minor contact, in mph.
pub const LOW_DELTA_V_THRESHOLD_MPH: f64 = 1.0;

/// Mass in kg and planar velocity in mph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub mass: f64,
    pub velocity: [f64; 2],
}

impl BodyState {
    pub fn new(mass: f64, velocity: [f64; 2]) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::domain(format!("mass {mass} must be positive")));
        }
        if !velocity.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("velocity components must be finite"));
        }
        Ok(Self { mass, velocity })
    }
}

/// Velocity change magnitudes of both bodies, mph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaVPair {
    pub dv1: f64,
    pub dv2: f64,
}

pub fn delta_v_two_body(b1: &BodyState, b2: &BodyState, restitution: f64) -> Result<DeltaVPair> {
    let b1 = BodyState::new(b1.mass, b1.velocity)?;
    let b2 = BodyState::new(b2.mass, b2.velocity)?;
    if !(0.0..=1.0).contains(&restitution) {
        return Err(Error::domain(format!("restitution {restitution} outside [0, 1]")));
    }
    let rel = [b1.velocity[0] - b2.velocity[0], b1.velocity[1] - b2.velocity[1]];
    let closing = rel[0].hypot(rel[1]);
    let total = b1.mass + b2.mass;
    let k = (1.0 + restitution) * closing / total;
    Ok(DeltaVPair {
        dv1: k * b2.mass,
        dv2: k * b1.mass,
    })
}

/// True when both vehicles changed velocity by strictly less than `threshold`.
pub fn classify_low_delta_v(dv: &DeltaVPair, threshold: f64) -> bool {
    dv.dv1 < threshold && dv.dv2 < threshold
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn body(mass: f64, vx: f64, vy: f64) -> BodyState {
        BodyState::new(mass, [vx, vy]).unwrap()
    }

    #[test]
    fn equal_masses_head_on_plastic() {
        let dv = delta_v_two_body(&body(1500.0, 1.0, 0.0), &body(1500.0, -1.0, 0.0), 0.0).unwrap();
        assert_eq!(dv.dv1, 1.0);
        assert_eq!(dv.dv2, 1.0);
    }

    #[test]
    fn heavy_partner_is_a_barrier() {
        let dv = delta_v_two_body(&body(1500.0, 12.0, 0.0), &body(1.5e12, 0.0, 0.0), 0.0).unwrap();
        assert_relative_eq!(dv.dv1, 12.0, max_relative = 1e-8);
        assert!(dv.dv2 < 1e-7);
    }

    #[test]
    fn oblique_velocities_use_relative_magnitude() {
        let dv = delta_v_two_body(&body(1000.0, 3.0, 0.0), &body(1000.0, 0.0, 4.0), 0.0).unwrap();
        assert_relative_eq!(dv.dv1, 2.5, max_relative = 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        let ok = body(1000.0, 1.0, 0.0);
        let bad = BodyState {
            mass: 0.0,
            velocity: [0.0, 0.0],
        };
        assert!(delta_v_two_body(&ok, &bad, 0.0).is_err());
        assert!(delta_v_two_body(&ok, &ok, 1.2).is_err());
        assert!(delta_v_two_body(&ok, &ok, -0.1).is_err());
        assert!(BodyState::new(-1.0, [0.0, 0.0]).is_err());
        assert!(BodyState::new(1.0, [f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn low_delta_v_rule() {
        let t = LOW_DELTA_V_THRESHOLD_MPH;
        assert!(classify_low_delta_v(&DeltaVPair { dv1: 0.5, dv2: 0.5 }, t));
        assert!(!classify_low_delta_v(&DeltaVPair { dv1: 0.5, dv2: 1.2 }, t));
        assert!(!classify_low_delta_v(&DeltaVPair { dv1: 1.0, dv2: 1.0 }, t));
    }
}

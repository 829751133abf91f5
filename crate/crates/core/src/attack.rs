//! Insider adversaries that tamper with a compromised agent's detections
//! before its own tracker sees them.

use std::collections::BTreeSet;

use nalgebra::{Rotation2, Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Box3D, FovFootprint};
use crate::ids::AgentId;
use crate::tracking::{Detection, MeasMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    FalsePositive,
    FalseNegative,
    Translation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub victims: BTreeSet<AgentId>,
    pub start_time: f64,
    /// Expected fake objects per frame.
    pub fp_rate: f64,
    /// Per-object drop probability.
    pub fn_prob: f64,
    pub translation_offset: [f64; 3],
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            kind: AttackKind::FalsePositive,
            victims: BTreeSet::new(),
            start_time: 0.0,
            fp_rate: 3.0,
            fn_prob: 0.5,
            translation_offset: [5.0, 0.0, 0.0],
        }
    }
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fp_rate >= 0.0 && self.fp_rate.is_finite()) {
            return Err(Error::config("attack.fp_rate", "must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.fn_prob) {
            return Err(Error::config("attack.fn_prob", "must lie in [0, 1]"));
        }
        if !self.start_time.is_finite() {
            return Err(Error::config("attack.start_time", "must be finite"));
        }
        if self.translation_offset.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("attack.translation_offset", "must be finite"));
        }
        Ok(())
    }

    pub fn is_active(&self, agent: AgentId, t: f64) -> bool {
        self.victims.contains(&agent) && t >= self.start_time
    }
}

/// A fabricated ground object. It stays where it was placed and is
/// re-reported whenever it falls inside the victim's footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct FakeObject {
    pub id: u64,
    pub bbox: Box3D,
}

/// Attack state for one victim.
#[derive(Debug, Clone, Default)]
pub struct Attacker {
    fakes: Vec<FakeObject>,
    next_id: u64,
}

impl Attacker {
    pub fn fakes(&self) -> &[FakeObject] {
        &self.fakes
    }

    fn spawn(&mut self, footprint: &FovFootprint, nominal_height: f64, rng: &mut impl Rng) -> FakeObject {
        let local = Vector2::new(
            rng.random_range(-1.0..=1.0) * footprint.half_extent_x,
            rng.random_range(-1.0..=1.0) * footprint.half_extent_y,
        );
        let p = footprint.center + Rotation2::new(footprint.yaw) * local;
        let bbox = Box3D {
            center: Vector3::new(p.x, p.y, nominal_height / 2.0),
            h: nominal_height,
            w: rng.random_range(1.8..2.2),
            l: rng.random_range(4.0..5.0),
            yaw: wrap_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)),
        };
        let fake = FakeObject { id: self.next_id, bbox };
        self.next_id += 1;
        self.fakes.push(fake.clone());
        fake
    }
}

/// Per-frame inputs the attack needs besides the detections themselves.
#[derive(Debug, Clone, Copy)]
pub struct AttackContext<'a> {
    pub agent: AgentId,
    pub t: f64,
    pub footprint: &'a FovFootprint,
    /// Covariance the sensor reports for genuine detections; fakes copy it.
    pub measurement_covariance: &'a MeasMatrix,
    pub nominal_height: f64,
}

fn jitter(b: &Box3D, cov: &MeasMatrix, rng: &mut impl Rng) -> Box3D {
    let mut noisy = *b;
    let mut n = |var: f64| -> f64 {
        if var > 0.0 {
            Normal::new(0.0, var.sqrt()).map(|d| d.sample(rng)).unwrap_or(0.0)
        } else {
            0.0
        }
    };
    noisy.center.x += n(cov[(0, 0)]);
    noisy.center.y += n(cov[(1, 1)]);
    noisy.w = (noisy.w + n(cov[(4, 4)])).max(0.1);
    noisy.l = (noisy.l + n(cov[(5, 5)])).max(0.1);
    noisy.yaw = wrap_angle(noisy.yaw + n(cov[(6, 6)]));
    noisy
}

/// Applies `spec` to one victim's detections for one frame. Agents that are
/// not victims, and frames before the start time, pass through untouched and
/// consume no randomness.
pub fn apply_attack(
    mut dets: Vec<Detection>,
    spec: &AttackSpec,
    ctx: &AttackContext<'_>,
    state: &mut Attacker,
    rng: &mut impl Rng,
) -> Vec<Detection> {
    if !spec.is_active(ctx.agent, ctx.t) {
        return dets;
    }
    match spec.kind {
        AttackKind::FalsePositive => {
            let count = if spec.fp_rate > 0.0 {
                Poisson::new(spec.fp_rate).map(|p| p.sample(rng) as usize).unwrap_or(0)
            } else {
                0
            };
            let mut chosen: Vec<FakeObject> = state
                .fakes
                .iter()
                .filter(|f| ctx.footprint.contains(f.bbox.center.xy()))
                .take(count)
                .cloned()
                .collect();
            while chosen.len() < count {
                chosen.push(state.spawn(ctx.footprint, ctx.nominal_height, rng));
            }
            for fake in chosen {
                dets.push(Detection {
                    bbox: jitter(&fake.bbox, ctx.measurement_covariance, rng),
                    measurement_covariance: *ctx.measurement_covariance,
                    timestamp: ctx.t,
                    source_agent: ctx.agent,
                });
            }
            dets
        }
        AttackKind::FalseNegative => dets.into_iter().filter(|_| rng.random::<f64>() >= spec.fn_prob).collect(),
        AttackKind::Translation => {
            let offset = Vector3::from(spec.translation_offset);
            for d in dets.iter_mut() {
                d.bbox.center += offset;
            }
            dets
        }
    }
}

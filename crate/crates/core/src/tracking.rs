//! Ten-state constant-velocity Kalman tracker with IoU association.
//!
//! State layout: `[p_x, p_y, p_z, v_x, v_y, v_z, h, w, l, yaw]`. Detections
//! observe position, size and yaw; velocity is only ever inferred.

use nalgebra::{DMatrix, SMatrix, SVector, Vector3};

use crate::assignment::{iou, solve_assignment};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Box3D};
use crate::ids::{AgentId, TrackId};

pub const STATE_DIM: usize = 10;
pub const MEAS_DIM: usize = 7;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type MeasVector = SVector<f64, MEAS_DIM>;
pub type MeasMatrix = SMatrix<f64, MEAS_DIM, MEAS_DIM>;

/// State indices observed by a detection.
pub const MEASURED: [usize; MEAS_DIM] = [0, 1, 2, 6, 7, 8, 9];
const YAW: usize = 9;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// White-noise acceleration spectral density (m^2/s^3).
    pub q_accel: f64,
    /// Size random-walk density (m^2/s).
    pub q_size: f64,
    /// Yaw random-walk density (rad^2/s).
    pub q_yaw: f64,
    /// Velocity variance assigned at birth (m^2/s^2).
    pub init_velocity_var: f64,
    /// Minimum IoU for a detection to update a track.
    pub min_iou: f64,
    /// Tracks overlapping a more established track at least this much are
    /// dropped, and detections overlapping a track this much spawn nothing.
    pub merge_iou: f64,
    pub confirm_hits: u32,
    pub confirm_window: u32,
    pub max_misses: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            q_accel: 1.0,
            q_size: 0.01,
            q_yaw: 0.01,
            init_velocity_var: 100.0,
            min_iou: 0.1,
            merge_iou: 0.3,
            confirm_hits: 3,
            confirm_window: 5,
            max_misses: 4,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("q_accel", self.q_accel), ("q_size", self.q_size), ("q_yaw", self.q_yaw)] {
            if !(v >= 0.0) {
                return Err(Error::config(format!("tracker.{key}"), "must be non-negative"));
            }
        }
        if !(self.init_velocity_var > 0.0) {
            return Err(Error::config("tracker.init_velocity_var", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.min_iou) {
            return Err(Error::config("tracker.min_iou", "must lie in [0, 1]"));
        }
        if !(self.merge_iou > 0.0 && self.merge_iou <= 1.0) {
            return Err(Error::config("tracker.merge_iou", "must lie in (0, 1]"));
        }
        if self.confirm_hits == 0 || self.confirm_window > 32 || self.confirm_hits > self.confirm_window {
            return Err(Error::config("tracker.confirm_window", "need 1 <= confirm_hits <= confirm_window <= 32"));
        }
        if self.max_misses == 0 {
            return Err(Error::config("tracker.max_misses", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: TrackId,
    pub state: StateVector,
    pub covariance: StateMatrix,
    pub hits: u32,
    pub misses: u32,
    pub status: TrackStatus,
    pub last_update: f64,
    pub source_agent: AgentId,
    /// Frames since birth, including the birth frame.
    pub age: u32,
    /// One bit per frame, newest in the least significant bit.
    hit_history: u32,
}

impl Track {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.state[0], self.state[1], self.state[2])
    }

    pub fn velocity(&self) -> Vector3<f64> {
        Vector3::new(self.state[3], self.state[4], self.state[5])
    }

    pub fn bbox(&self) -> Box3D {
        let s = &self.state;
        Box3D {
            center: self.position(),
            h: s[6].max(1e-3),
            w: s[7].max(1e-3),
            l: s[8].max(1e-3),
            yaw: wrap_angle(s[9]),
        }
    }

    pub fn is_confirmed(&self) -> bool {
        self.status == TrackStatus::Confirmed
    }

    /// Builds a track directly from a state estimate (used for fused and
    /// received tracks, which carry no lifecycle history of their own).
    pub fn from_estimate(id: TrackId, source_agent: AgentId, state: StateVector, covariance: StateMatrix, t: f64) -> Track {
        Track {
            id,
            state,
            covariance,
            hits: 0,
            misses: 0,
            status: TrackStatus::Confirmed,
            last_update: t,
            source_agent,
            age: 0,
            hit_history: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: Box3D,
    /// Covariance of `[p_x, p_y, p_z, h, w, l, yaw]`.
    pub measurement_covariance: MeasMatrix,
    pub timestamp: f64,
    pub source_agent: AgentId,
}

impl Detection {
    pub fn measurement(&self) -> MeasVector {
        let b = &self.bbox;
        MeasVector::from_column_slice(&[b.center.x, b.center.y, b.center.z, b.h, b.w, b.l, b.yaw])
    }
}

fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

pub fn transition(dt: f64) -> StateMatrix {
    let mut f = StateMatrix::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

pub fn process_noise(dt: f64, cfg: &TrackerConfig) -> StateMatrix {
    let mut q = StateMatrix::zeros();
    let (dt2, dt3) = (dt * dt, dt * dt * dt);
    for i in 0..3 {
        q[(i, i)] = cfg.q_accel * dt3 / 3.0;
        q[(i, i + 3)] = cfg.q_accel * dt2 / 2.0;
        q[(i + 3, i)] = cfg.q_accel * dt2 / 2.0;
        q[(i + 3, i + 3)] = cfg.q_accel * dt;
    }
    for i in 6..9 {
        q[(i, i)] = cfg.q_size * dt;
    }
    q[(YAW, YAW)] = cfg.q_yaw * dt;
    q
}

pub fn measurement_matrix() -> SMatrix<f64, MEAS_DIM, STATE_DIM> {
    let mut h = SMatrix::<f64, MEAS_DIM, STATE_DIM>::zeros();
    for (r, &c) in MEASURED.iter().enumerate() {
        h[(r, c)] = 1.0;
    }
    h
}

pub fn predict(track: &Track, dt: f64, cfg: &TrackerConfig) -> Result<Track> {
    if !(dt >= 0.0) {
        return Err(Error::Domain(format!("prediction interval must be non-negative, got {dt}")));
    }
    let f = transition(dt);
    let mut out = track.clone();
    out.state = f * track.state;
    out.state[YAW] = wrap_angle(out.state[YAW]);
    out.covariance = symmetrize(&(f * track.covariance * f.transpose() + process_noise(dt, cfg)));
    Ok(out)
}

/// Linear measurement update in Joseph form. Yaw innovation is wrapped.
pub fn update(track: &Track, det: &Detection) -> Result<Track> {
    let h = measurement_matrix();
    let r = det.measurement_covariance;
    let mut innovation = det.measurement() - h * track.state;
    innovation[6] = wrap_angle(innovation[6]);
    let s = symmetrize(&(h * track.covariance * h.transpose() + r));
    let s_inv = s
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("innovation covariance of track {} not positive definite", track.id)))?
        .inverse();
    let k = track.covariance * h.transpose() * s_inv;
    let ikh = StateMatrix::identity() - k * h;
    let mut out = track.clone();
    out.state = track.state + k * innovation;
    out.state[YAW] = wrap_angle(out.state[YAW]);
    out.covariance = symmetrize(&(ikh * track.covariance * ikh.transpose() + k * r * k.transpose()));
    out.last_update = det.timestamp;
    Ok(out)
}

/// One tracker per agent. Deleted tracks are dropped from the live set.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub agent: AgentId,
    pub config: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(agent: AgentId, config: TrackerConfig) -> Self {
        Tracker {
            agent,
            config,
            tracks: Vec::new(),
            next_id: 0,
        }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.is_confirmed())
    }

    /// Number of track ids handed out so far.
    pub fn tracks_created(&self) -> u64 {
        self.next_id
    }

    fn birth(&mut self, det: &Detection) -> Track {
        let mut state = StateVector::zeros();
        let mut cov = StateMatrix::zeros();
        let z = det.measurement();
        for (r, &c) in MEASURED.iter().enumerate() {
            state[c] = z[r];
            for (r2, &c2) in MEASURED.iter().enumerate() {
                cov[(c, c2)] = det.measurement_covariance[(r, r2)];
            }
        }
        for i in 3..6 {
            cov[(i, i)] = self.config.init_velocity_var;
        }
        let id = TrackId(self.next_id);
        self.next_id += 1;
        let status = if self.config.confirm_hits <= 1 {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
        Track {
            id,
            state,
            covariance: cov,
            hits: 1,
            misses: 0,
            status,
            last_update: det.timestamp,
            source_agent: self.agent,
            age: 1,
            hit_history: 1,
        }
    }

    /// Predict, associate, update, spawn and retire for one frame.
    pub fn step(&mut self, detections: &[Detection], dt: f64) -> Result<&[Track]> {
        let cfg = self.config.clone();
        let mut predicted = Vec::with_capacity(self.tracks.len());
        for t in &self.tracks {
            predicted.push(predict(t, dt, &cfg)?);
        }

        let cost = DMatrix::from_fn(predicted.len(), detections.len(), |i, j| {
            1.0 - iou(&predicted[i].bbox(), &detections[j].bbox)
        });
        let assoc = solve_assignment(&cost, 1.0 - cfg.min_iou);

        let mut hit = vec![false; predicted.len()];
        for &(i, j, _) in &assoc.matches {
            // a singular update counts as a miss for this frame
            if let Ok(updated) = update(&predicted[i], &detections[j]) {
                predicted[i] = updated;
                hit[i] = true;
            }
        }

        let window_mask = if cfg.confirm_window >= 32 { u32::MAX } else { (1u32 << cfg.confirm_window) - 1 };
        for (t, &was_hit) in predicted.iter_mut().zip(&hit) {
            t.age += 1;
            t.hit_history <<= 1;
            if was_hit {
                t.hits += 1;
                t.misses = 0;
                t.hit_history |= 1;
            } else {
                t.misses += 1;
            }
            match t.status {
                TrackStatus::Tentative => {
                    if (t.hit_history & window_mask).count_ones() >= cfg.confirm_hits {
                        t.status = TrackStatus::Confirmed;
                    } else if t.age >= cfg.confirm_window || t.misses >= cfg.max_misses {
                        t.status = TrackStatus::Deleted;
                    }
                }
                TrackStatus::Confirmed => {
                    if t.misses >= cfg.max_misses {
                        t.status = TrackStatus::Deleted;
                    }
                }
                TrackStatus::Deleted => {}
            }
        }
        predicted.retain(|t| t.status != TrackStatus::Deleted);
        let mut tracks = suppress_duplicates(predicted, cfg.merge_iou);
        for &j in &assoc.unmatched_cols {
            let det = &detections[j];
            if tracks.iter().any(|t| iou(&t.bbox(), &det.bbox) >= cfg.merge_iou) {
                continue;
            }
            let born = self.birth(det);
            tracks.push(born);
        }
        self.tracks = tracks;
        Ok(&self.tracks)
    }
}

/// Keeps the most established of any group of overlapping tracks: confirmed
/// before tentative, then more hits, then the older id. Order is preserved.
fn suppress_duplicates(tracks: Vec<Track>, merge_iou: f64) -> Vec<Track> {
    let mut order: Vec<usize> = (0..tracks.len()).collect();
    order.sort_by_key(|&i| (!tracks[i].is_confirmed(), std::cmp::Reverse(tracks[i].hits), tracks[i].id));
    let boxes: Vec<Box3D> = tracks.iter().map(Track::bbox).collect();
    let mut keep = vec![false; tracks.len()];
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| iou(&boxes[k], &boxes[i]) < merge_iou) {
            keep[i] = true;
            kept.push(i);
        }
    }
    tracks.into_iter().zip(keep).filter_map(|(t, k)| k.then_some(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: f64, y: f64, t: f64) -> Detection {
        Detection {
            bbox: Box3D::new(Vector3::new(x, y, 0.9), 1.8, 2.0, 4.5, 0.0).unwrap(),
            measurement_covariance: MeasMatrix::identity() * 0.25,
            timestamp: t,
            source_agent: AgentId(0),
        }
    }

    fn born(x: f64) -> Track {
        let mut tr = Tracker::new(AgentId(0), TrackerConfig::default());
        tr.step(&[det(x, 0.0, 0.0)], 0.0).unwrap();
        tr.tracks()[0].clone()
    }

    #[test]
    fn predict_zero_dt_is_identity() {
        let t = born(1.0);
        let p = predict(&t, 0.0, &TrackerConfig::default()).unwrap();
        assert_eq!(p.state, t.state);
        assert_eq!(p.covariance, t.covariance);
    }

    #[test]
    fn predict_moves_with_velocity() {
        let mut t = born(0.0);
        t.state[3] = 1.0;
        let p = predict(&t, 0.1, &TrackerConfig::default()).unwrap();
        assert!((p.state[0] - 0.1).abs() < 1e-12);
        assert_eq!(p.state[3], 1.0);
        assert!(p.covariance.trace() > t.covariance.trace());
    }

    #[test]
    fn negative_dt_rejected() {
        assert!(matches!(predict(&born(0.0), -0.1, &TrackerConfig::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_innovation_keeps_state_and_shrinks_covariance() {
        let t = born(3.0);
        let u = update(&t, &det(3.0, 0.0, 0.0)).unwrap();
        assert!((u.state - t.state).norm() < 1e-12);
        for &i in &MEASURED {
            assert!(u.covariance[(i, i)] < t.covariance[(i, i)]);
        }
    }

    #[test]
    fn scalar_kalman_closed_form() {
        // prior N(0, 1) on x, measurement z = 1 with r = 1 -> N(0.5, 0.5)
        let mut t = born(0.0);
        t.covariance = StateMatrix::identity();
        let mut d = det(1.0, 0.0, 0.0);
        d.bbox.center.y = t.state[1];
        d.measurement_covariance = MeasMatrix::identity();
        let u = update(&t, &d).unwrap();
        assert!((u.state[0] - 0.5).abs() < 1e-12);
        assert!((u.covariance[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn uninformative_prior_takes_measurement() {
        let mut t = born(0.0);
        t.covariance = StateMatrix::identity() * 1e12;
        let u = update(&t, &det(7.0, -3.0, 0.0)).unwrap();
        assert!((u.state[0] - 7.0).abs() < 1e-6);
        assert!((u.state[1] + 3.0).abs() < 1e-6);
    }

    #[test]
    fn singular_innovation_is_reported() {
        let mut t = born(0.0);
        t.covariance = StateMatrix::zeros();
        let mut d = det(0.0, 0.0, 0.0);
        d.measurement_covariance = MeasMatrix::zeros();
        assert!(matches!(update(&t, &d), Err(Error::Numerical(_))));
    }

    #[test]
    fn empty_in_empty_out() {
        let mut tr = Tracker::new(AgentId(0), TrackerConfig::default());
        assert!(tr.step(&[], 0.1).unwrap().is_empty());
    }

    #[test]
    fn persistent_object_confirms_then_dies() {
        let cfg = TrackerConfig::default();
        let mut tr = Tracker::new(AgentId(0), cfg.clone());
        for k in 0..cfg.confirm_hits {
            tr.step(&[det(10.0, 5.0, k as f64 * 0.1)], 0.1).unwrap();
        }
        assert_eq!(tr.tracks().len(), 1);
        assert!(tr.tracks()[0].is_confirmed());
        for _ in 0..cfg.max_misses - 1 {
            tr.step(&[], 0.1).unwrap();
        }
        assert_eq!(tr.tracks().len(), 1);
        tr.step(&[], 0.1).unwrap();
        assert!(tr.tracks().is_empty());
    }

    #[test]
    fn overlapping_detections_spawn_one_track() {
        let mut tr = Tracker::new(AgentId(0), TrackerConfig::default());
        tr.step(&[det(0.0, 0.0, 0.0), det(0.6, 0.2, 0.0), det(30.0, 0.0, 0.0)], 0.1).unwrap();
        assert_eq!(tr.tracks().len(), 2);
    }

    #[test]
    fn duplicate_keeps_established_track() {
        let mut a = born(0.0);
        a.status = TrackStatus::Confirmed;
        a.hits = 2;
        let mut b = born(0.8);
        b.id = TrackId(9);
        b.hits = 7;
        let far = {
            let mut f = born(20.0);
            f.id = TrackId(4);
            f
        };
        let kept = suppress_duplicates(vec![b, far.clone(), a.clone()], 0.3);
        assert_eq!(kept.iter().map(|t| t.id).collect::<Vec<_>>(), vec![far.id, a.id]);
    }

    #[test]
    fn clutter_never_confirms() {
        let mut tr = Tracker::new(AgentId(0), TrackerConfig::default());
        for k in 0..10 {
            tr.step(&[det(k as f64 * 50.0, 0.0, k as f64 * 0.1)], 0.1).unwrap();
            assert!(tr.confirmed().next().is_none());
        }
        // every one-off detection was retired within the confirmation window
        assert!(tr.tracks().len() <= TrackerConfig::default().confirm_window as usize);
        assert_eq!(tr.tracks_created(), 10);
    }

    #[test]
    fn config_validation() {
        assert!(TrackerConfig::default().validate().is_ok());
        let bad = TrackerConfig { confirm_hits: 6, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}

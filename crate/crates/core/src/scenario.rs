//! Scenario configuration, seeded world generation and the synthetic
//! detector.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{Rotation2, Vector2, Vector3};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::attack::{AttackKind, AttackSpec};
use crate::ddf::FusionConfig;
use crate::error::{Error, Result};
use crate::geometry::{fov_footprint, render_box, upscale_box, wrap_angle, AgentPose, Box3D, CameraIntrinsics, FovFootprint};
use crate::ids::AgentId;
use crate::metrics::MetricsConfig;
use crate::rng::{stream, StreamRng};
use crate::tracking::{Detection, MeasMatrix, TrackerConfig};
use crate::trust::{PriorLabel, TrustConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Side lengths (m) of the square-ish world centred on the origin.
    pub extent: [f64; 2],
    pub objects: usize,
    /// Object ground speed range (m/s).
    pub object_speed: [f64; 2],
    pub object_height: [f64; 2],
    pub object_width: [f64; 2],
    pub object_length: [f64; 2],
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            extent: [400.0, 400.0],
            objects: 20,
            object_speed: [0.0, 5.0],
            object_height: [1.5, 2.0],
            object_width: [1.8, 2.2],
            object_length: [4.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            fx: 960.0,
            fy: 960.0,
            width: 1920,
            height: 1080,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Size of the agent pool before density subsampling.
    pub count: usize,
    pub altitude: [f64; 2],
    /// Cruise speed (m/s).
    pub speed: f64,
    /// Fraction of the world extent that waypoints are drawn from.
    pub region: f64,
    pub camera: CameraConfig,
    /// Prior label for agents not listed below.
    pub prior: PriorLabel,
    pub trusted: Vec<u32>,
    pub distrusted: Vec<u32>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            count: 10,
            altitude: [100.0, 150.0],
            speed: 3.0,
            region: 0.5,
            camera: CameraConfig::default(),
            prior: PriorLabel::Neutral,
            trusted: vec![],
            distrusted: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub pos_sigma: f64,
    pub size_sigma: f64,
    pub yaw_sigma: f64,
    /// Reported uncertainty of the unobserved height and centre altitude.
    pub height_sigma: f64,
    /// Natural clutter detections per frame.
    pub fp_rate: f64,
    /// Natural per-object miss probability.
    pub fn_prob: f64,
    pub nominal_height: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            pos_sigma: 0.5,
            size_sigma: 0.2,
            yaw_sigma: 0.1,
            height_sigma: 0.2,
            fp_rate: 0.2,
            fn_prob: 0.05,
            nominal_height: 1.8,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("sensor.pos_sigma", self.pos_sigma),
            ("sensor.size_sigma", self.size_sigma),
            ("sensor.yaw_sigma", self.yaw_sigma),
            ("sensor.height_sigma", self.height_sigma),
            ("sensor.fp_rate", self.fp_rate),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be finite and non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.fn_prob) {
            return Err(Error::config("sensor.fn_prob", "must lie in [0, 1]"));
        }
        if !(self.nominal_height > 0.0) {
            return Err(Error::config("sensor.nominal_height", "must be positive"));
        }
        Ok(())
    }

    /// Covariance attached to every detection.
    pub fn measurement_covariance(&self) -> MeasMatrix {
        let floor = 1e-6;
        let p = (self.pos_sigma * self.pos_sigma).max(floor);
        let h = (self.height_sigma * self.height_sigma).max(floor);
        let s = (self.size_sigma * self.size_sigma).max(floor);
        let y = (self.yaw_sigma * self.yaw_sigma).max(floor);
        MeasMatrix::from_diagonal(&nalgebra::SVector::<f64, 7>::from_column_slice(&[p, p, h / 4.0, h, s, s, y]))
    }
}

/// Attack section of the config. Victims are either listed explicitly or
/// drawn as a fraction of the selected agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub victims: Vec<u32>,
    pub attacked_fraction: f64,
    pub start_time: f64,
    pub fp_rate: f64,
    pub fn_prob: f64,
    pub translation_offset: [f64; 3],
}

impl Default for AttackConfig {
    fn default() -> Self {
        let spec = AttackSpec::default();
        AttackConfig {
            kind: spec.kind,
            victims: vec![],
            attacked_fraction: 0.3,
            start_time: 5.0,
            fp_rate: spec.fp_rate,
            fn_prob: spec.fn_prob,
            translation_offset: spec.translation_offset,
        }
    }
}

impl AttackConfig {
    fn spec(&self, victims: BTreeSet<AgentId>) -> AttackSpec {
        AttackSpec {
            kind: self.kind,
            victims,
            start_time: self.start_time,
            fp_rate: self.fp_rate,
            fn_prob: self.fn_prob,
            translation_offset: self.translation_offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub dt: f64,
    /// Fraction of the agent pool that takes part.
    pub density: f64,
    pub comm_range: f64,
    pub world: WorldConfig,
    pub agents: AgentConfig,
    pub sensor: SensorConfig,
    pub attack: Option<AttackConfig>,
    pub tracker: TrackerConfig,
    pub fusion: FusionConfig,
    pub trust: TrustConfig,
    pub metrics: MetricsConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            duration: 60.0,
            dt: 0.1,
            density: 1.0,
            comm_range: 300.0,
            world: WorldConfig::default(),
            agents: AgentConfig::default(),
            sensor: SensorConfig::default(),
            attack: None,
            tracker: TrackerConfig::default(),
            fusion: FusionConfig::default(),
            trust: TrustConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

fn check_range(key: &str, r: [f64; 2], min: f64) -> Result<()> {
    if !(r[0] >= min && r[1] >= r[0] && r[1].is_finite()) {
        return Err(Error::config(key, format!("expected {min} <= lo <= hi, got {r:?}")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let key = e.message().split('`').nth(1).unwrap_or("config").to_string();
            Error::config(key, e.to_string().trim_end())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::config("duration", "must be finite and non-negative"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", "must be positive"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::config("density", "must lie in (0, 1]"));
        }
        if !(self.comm_range > 0.0) {
            return Err(Error::config("comm_range", "must be positive"));
        }
        let w = &self.world;
        if !(w.extent[0] > 0.0 && w.extent[1] > 0.0) {
            return Err(Error::config("world.extent", "must be positive"));
        }
        if w.objects == 0 {
            return Err(Error::config("world.objects", "at least one object is required"));
        }
        check_range("world.object_speed", w.object_speed, 0.0)?;
        check_range("world.object_height", w.object_height, 1e-3)?;
        check_range("world.object_width", w.object_width, 1e-3)?;
        check_range("world.object_length", w.object_length, 1e-3)?;
        let a = &self.agents;
        if a.count == 0 {
            return Err(Error::config("agents.count", "at least one agent is required"));
        }
        check_range("agents.altitude", a.altitude, 1e-3)?;
        if !(a.speed >= 0.0 && a.speed.is_finite()) {
            return Err(Error::config("agents.speed", "must be finite and non-negative"));
        }
        if !(a.region > 0.0 && a.region <= 1.0) {
            return Err(Error::config("agents.region", "must lie in (0, 1]"));
        }
        CameraIntrinsics::new(a.camera.fx, a.camera.fy, a.camera.width, a.camera.height)
            .map_err(|e| Error::config("agents.camera", e.to_string()))?;
        if a.camera.width > u16::MAX as u32 || a.camera.height > u16::MAX as u32 {
            return Err(Error::config("agents.camera", "image dimensions must fit in 16 bits"));
        }
        for id in a.trusted.iter().chain(&a.distrusted) {
            if *id as usize >= a.count {
                return Err(Error::config("agents.trusted", format!("agent {id} is not in the pool")));
            }
        }
        self.sensor.validate()?;
        if let Some(att) = &self.attack {
            att.spec(BTreeSet::new()).validate()?;
            if !(0.0..=1.0).contains(&att.attacked_fraction) {
                return Err(Error::config("attack.attacked_fraction", "must lie in [0, 1]"));
            }
            for id in &att.victims {
                if *id as usize >= a.count {
                    return Err(Error::config("attack.victims", format!("agent {id} is not in the pool")));
                }
            }
        }
        self.tracker.validate()?;
        self.fusion.validate()?;
        self.trust.validate()?;
        self.metrics.validate()?;
        Ok(())
    }
}

/// Piecewise-linear path through timed knots; constant outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub knots: Vec<(f64, Vector3<f64>)>,
}

impl Trajectory {
    fn segment(&self, t: f64) -> Option<usize> {
        if self.knots.len() < 2 || t < self.knots[0].0 {
            return None;
        }
        self.knots.windows(2).position(|w| t >= w[0].0 && t < w[1].0)
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        match self.segment(t) {
            Some(i) => {
                let (t0, p0) = self.knots[i];
                let (t1, p1) = self.knots[i + 1];
                p0 + (p1 - p0) * ((t - t0) / (t1 - t0))
            }
            None if t < self.knots[0].0 => self.knots[0].1,
            None => self.knots.last().expect("trajectory has a knot").1,
        }
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        match self.segment(t) {
            Some(i) => {
                let (t0, p0) = self.knots[i];
                let (t1, p1) = self.knots[i + 1];
                (p1 - p0) / (t1 - t0)
            }
            None => Vector3::zeros(),
        }
    }

    /// Waypoints drawn uniformly in `half` around the origin, visited at
    /// `speed` until `duration` is covered.
    fn random(rng: &mut StreamRng, half: [f64; 2], z: f64, speed: f64, duration: f64) -> Trajectory {
        let draw = |rng: &mut StreamRng| Vector3::new(rng.random_range(-half[0]..=half[0]), rng.random_range(-half[1]..=half[1]), z);
        let mut knots = vec![(0.0, draw(rng))];
        if speed > 0.0 {
            let mut t = 0.0;
            while t <= duration {
                let prev = knots.last().expect("non-empty").1;
                let next = draw(rng);
                let d = (next - prev).norm();
                if d < 1e-6 {
                    continue;
                }
                t += d / speed;
                knots.push((t, next));
            }
        }
        Trajectory { knots }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: AgentId,
    pub trajectory: Trajectory,
    pub yaw: f64,
    pub intrinsics: CameraIntrinsicsDef,
    pub prior: PriorLabel,
}

/// Serializable mirror of [`CameraIntrinsics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsicsDef {
    pub fx: f64,
    pub fy: f64,
    pub nx: u32,
    pub ny: u32,
}

impl CameraIntrinsicsDef {
    pub fn get(&self) -> CameraIntrinsics {
        CameraIntrinsics::new(self.fx, self.fy, self.nx, self.ny).expect("validated at generation")
    }
}

impl AgentSpec {
    pub fn pose(&self, t: f64) -> AgentPose {
        AgentPose::new(self.trajectory.position(t), self.yaw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: u64,
    pub trajectory: Trajectory,
    pub h: f64,
    pub w: f64,
    pub l: f64,
    /// Heading while stationary.
    pub rest_yaw: f64,
}

impl ObjectSpec {
    pub fn bbox(&self, t: f64) -> Box3D {
        let v = self.trajectory.velocity(t);
        let yaw = if v.xy().norm() > 1e-9 { v.y.atan2(v.x) } else { self.rest_yaw };
        let p = self.trajectory.position(t);
        Box3D {
            center: Vector3::new(p.x, p.y, self.h / 2.0),
            h: self.h,
            w: self.w,
            l: self.l,
            yaw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub duration: f64,
    pub dt: f64,
    pub comm_range: f64,
    pub agents: Vec<AgentSpec>,
    pub objects: Vec<ObjectSpec>,
    pub attack: Option<AttackSpec>,
    pub sensor: SensorConfig,
    pub tracker: TrackerConfig,
    pub fusion: FusionConfig,
    pub trust: TrustConfig,
    pub metrics: MetricsConfig,
}

impl Scenario {
    pub fn frame_count(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }

    pub fn victims(&self) -> BTreeSet<AgentId> {
        self.attack.as_ref().map(|a| a.victims.clone()).unwrap_or_default()
    }

    pub fn agent_ids(&self) -> Vec<AgentId> {
        self.agents.iter().map(|a| a.id).collect()
    }

    /// The same world with the attack removed.
    pub fn without_attack(&self) -> Scenario {
        Scenario {
            attack: None,
            ..self.clone()
        }
    }
}

/// Deterministic world for `(cfg, seed)`. The agent pool, objects and
/// trajectories do not depend on density or the attack settings.
pub fn generate_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    cfg.validate()?;
    let half = [cfg.world.extent[0] / 2.0, cfg.world.extent[1] / 2.0];
    let a = &cfg.agents;
    let region = [half[0] * a.region, half[1] * a.region];
    let intr = CameraIntrinsicsDef {
        fx: a.camera.fx,
        fy: a.camera.fy,
        nx: a.camera.width,
        ny: a.camera.height,
    };

    let mut rng = stream(seed, "agents", 0);
    let pool: Vec<AgentSpec> = (0..a.count as u32)
        .map(|i| {
            let z = rng.random_range(a.altitude[0]..=a.altitude[1]);
            let yaw = wrap_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
            let trajectory = Trajectory::random(&mut rng, region, z, a.speed, cfg.duration);
            let prior = if a.trusted.contains(&i) {
                PriorLabel::Trusted
            } else if a.distrusted.contains(&i) {
                PriorLabel::Distrusted
            } else {
                a.prior
            };
            AgentSpec {
                id: AgentId(i),
                trajectory,
                yaw,
                intrinsics: intr,
                prior,
            }
        })
        .collect();

    let keep = ((cfg.density * a.count as f64).round() as usize).clamp(1, a.count);
    let agents: Vec<AgentSpec> = if keep == a.count {
        pool
    } else {
        let mut idx = sample(&mut stream(seed, "density", 0), a.count, keep).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i].clone()).collect()
    };

    let w = &cfg.world;
    let mut rng = stream(seed, "objects", 0);
    let objects = (0..w.objects as u64)
        .map(|id| {
            let speed = rng.random_range(w.object_speed[0]..=w.object_speed[1]);
            let h = rng.random_range(w.object_height[0]..=w.object_height[1]);
            let wd = rng.random_range(w.object_width[0]..=w.object_width[1]);
            let l = rng.random_range(w.object_length[0]..=w.object_length[1]);
            let rest_yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            ObjectSpec {
                id,
                trajectory: Trajectory::random(&mut rng, half, 0.0, speed, cfg.duration),
                h,
                w: wd,
                l,
                rest_yaw,
            }
        })
        .collect();

    let attack = match &cfg.attack {
        None => None,
        Some(att) => {
            let selected: Vec<AgentId> = agents.iter().map(|s| s.id).collect();
            let victims: BTreeSet<AgentId> = if !att.victims.is_empty() {
                let v: BTreeSet<AgentId> = att.victims.iter().map(|&i| AgentId(i)).collect();
                if let Some(missing) = v.iter().find(|id| !selected.contains(id)) {
                    return Err(Error::config("attack.victims", format!("{missing} is not among the selected agents")));
                }
                v
            } else {
                let n = (att.attacked_fraction * selected.len() as f64).round() as usize;
                sample(&mut stream(seed, "victims", 0), selected.len(), n.min(selected.len()))
                    .into_iter()
                    .map(|i| selected[i])
                    .collect()
            };
            Some(att.spec(victims))
        }
    };

    Ok(Scenario {
        seed,
        duration: cfg.duration,
        dt: cfg.dt,
        comm_range: cfg.comm_range,
        agents,
        objects,
        attack,
        sensor: cfg.sensor.clone(),
        tracker: cfg.tracker.clone(),
        fusion: cfg.fusion.clone(),
        trust: cfg.trust.clone(),
        metrics: cfg.metrics.clone(),
    })
}

fn gaussian(rng: &mut StreamRng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("sigma is positive").sample(rng)
    } else {
        0.0
    }
}

fn fully_visible(pose: &AgentPose, intr: &CameraIntrinsics, b: &Box3D) -> Result<bool> {
    let px = render_box(pose, intr, b)?;
    Ok(px.corners().iter().all(|c| intr.contains_pixel(c.x, c.y)))
}

/// Synthetic detector for one agent and frame: noisy boxes for objects whose
/// image lies fully inside the frame, natural misses, and uniform clutter.
pub fn simulate_detections(
    agent: AgentId,
    pose: &AgentPose,
    intr: &CameraIntrinsics,
    truths: &[Box3D],
    t: f64,
    sensor: &SensorConfig,
    rng: &mut StreamRng,
) -> Result<Vec<Detection>> {
    let cov = sensor.measurement_covariance();
    let mut out = Vec::new();
    let mut emit = |b: Box3D| -> Result<()> {
        let pixel = render_box(pose, intr, &b)?;
        if !pixel.corners().iter().all(|c| intr.contains_pixel(c.x, c.y)) {
            return Ok(());
        }
        let bbox = upscale_box(pose, intr, &pixel, sensor.nominal_height)?;
        out.push(Detection {
            bbox,
            measurement_covariance: cov,
            timestamp: t,
            source_agent: agent,
        });
        Ok(())
    };
    for truth in truths {
        if !fully_visible(pose, intr, truth)? {
            continue;
        }
        if rng.random::<f64>() < sensor.fn_prob {
            continue;
        }
        let mut b = *truth;
        b.center.x += gaussian(rng, sensor.pos_sigma);
        b.center.y += gaussian(rng, sensor.pos_sigma);
        b.w = (b.w + gaussian(rng, sensor.size_sigma)).max(0.1);
        b.l = (b.l + gaussian(rng, sensor.size_sigma)).max(0.1);
        b.yaw = wrap_angle(b.yaw + gaussian(rng, sensor.yaw_sigma));
        emit(b)?;
    }
    if sensor.fp_rate > 0.0 {
        let fp = fov_footprint(pose, intr)?;
        let n = Poisson::new(sensor.fp_rate).map(|p| p.sample(rng) as usize).unwrap_or(0);
        for _ in 0..n {
            let p = uniform_in(&fp, rng);
            let b = Box3D {
                center: Vector3::new(p.x, p.y, sensor.nominal_height / 2.0),
                h: sensor.nominal_height,
                w: rng.random_range(1.8..2.2),
                l: rng.random_range(4.0..5.0),
                yaw: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            };
            emit(b)?;
        }
    }
    Ok(out)
}

pub(crate) fn uniform_in(fp: &FovFootprint, rng: &mut impl Rng) -> Vector2<f64> {
    let local = Vector2::new(
        rng.random_range(-1.0..=1.0) * fp.half_extent_x,
        rng.random_range(-1.0..=1.0) * fp.half_extent_y,
    );
    fp.center + Rotation2::new(fp.yaw) * local
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig {
            agents: AgentConfig {
                count: 50,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_scenario(&cfg(), 11).unwrap();
        let b = generate_scenario(&cfg(), 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_scenario(&cfg(), 12).unwrap());
    }

    #[test]
    fn density_subsamples_pool() {
        let full = generate_scenario(&cfg(), 3).unwrap();
        assert_eq!(full.agents.len(), 50);
        let half = generate_scenario(&ScenarioConfig { density: 0.5, ..cfg() }, 3).unwrap();
        assert_eq!(half.agents.len(), 25);
        for a in &half.agents {
            assert_eq!(a, &full.agents[a.id.0 as usize]);
        }
        assert_eq!(half.objects, full.objects);
    }

    #[test]
    fn victims_drawn_from_selected() {
        let c = ScenarioConfig {
            density: 0.4,
            attack: Some(AttackConfig::default()),
            ..cfg()
        };
        let s = generate_scenario(&c, 5).unwrap();
        let ids = s.agent_ids();
        assert_eq!(s.victims().len(), 6);
        assert!(s.victims().iter().all(|v| ids.contains(v)));
    }

    #[test]
    fn trajectories_cover_duration() {
        let s = generate_scenario(&cfg(), 1).unwrap();
        for a in &s.agents {
            assert!(a.trajectory.knots.last().unwrap().0 > s.duration);
            let v = a.trajectory.velocity(10.0).norm();
            assert!((v - 3.0).abs() < 1e-9);
        }
        let t = Trajectory {
            knots: vec![(0.0, Vector3::zeros()), (2.0, Vector3::new(4.0, 0.0, 0.0))],
        };
        assert_eq!(t.position(1.0), Vector3::new(2.0, 0.0, 0.0));
        assert_eq!(t.position(-1.0), Vector3::zeros());
        assert_eq!(t.position(5.0), Vector3::new(4.0, 0.0, 0.0));
    }

    #[test]
    fn noiseless_detector_reports_truth_in_view() {
        let sensor = SensorConfig {
            pos_sigma: 0.0,
            size_sigma: 0.0,
            yaw_sigma: 0.0,
            fp_rate: 0.0,
            fn_prob: 0.0,
            ..Default::default()
        };
        let pose = AgentPose::new(Vector3::new(0.0, 0.0, 100.0), 0.3);
        let intr = CameraIntrinsics::new(960.0, 960.0, 1920, 1080).unwrap();
        let inside = Box3D::new(Vector3::new(10.0, 5.0, 0.9), 1.8, 2.0, 4.5, 0.4).unwrap();
        let outside = Box3D::new(Vector3::new(500.0, 5.0, 0.9), 1.8, 2.0, 4.5, 0.4).unwrap();
        let mut rng = stream(0, "t", 0);
        let dets = simulate_detections(AgentId(0), &pose, &intr, &[inside, outside], 0.0, &sensor, &mut rng).unwrap();
        assert_eq!(dets.len(), 1);
        let b = dets[0].bbox;
        assert!((b.center - inside.center).norm() < 1e-9);
        assert!((b.w - 2.0).abs() < 1e-9 && (b.l - 4.5).abs() < 1e-9);
        assert!(wrap_angle(b.yaw - 0.4).abs() < 1e-9);
    }

    #[test]
    fn bad_config_names_key() {
        let err = ScenarioConfig::from_toml_str("dt = -1.0").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "dt"), "{err}");
        let err = ScenarioConfig::from_toml_str("[world]\nbogus = 1").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "bogus"), "{err}");
        let err = ScenarioConfig::from_toml_str("[tracker]\nconfirm_hits = 0").unwrap_err();
        assert!(err.to_string().contains("tracker."), "{err}");
    }
}

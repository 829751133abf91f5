//! The per-frame episode loop: sense, attack, track, exchange, trust, fuse.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::attack::{apply_attack, AttackContext, Attacker};
use crate::ddf::{cascaded_fuse, trust_filter, FusedIdBook, FusedTrack, FusionContext, FusionMode, SourceTrack};
use crate::error::{Error, Result};
use crate::geometry::{fov_footprint, AgentPose, CameraIntrinsics, FovFootprint};
use crate::ids::{AgentId, TrackId};
use crate::network::{connectivity, decode_packet, encode_packet, TrackPacket};
use crate::rng::{stream, StreamRng};
use crate::scenario::{simulate_detections, Scenario};
use crate::tracking::Tracker;
use crate::trust::{agent_psms, associate_in_fov, track_psms, FovAssociation, TrustSnapshot, TrustStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pipeline {
    pub trust_enabled: bool,
    pub fusion_mode: FusionMode,
}

impl Pipeline {
    pub const TRUST: Pipeline = Pipeline {
        trust_enabled: true,
        fusion_mode: FusionMode::TrustWeighted,
    };
    pub const PLAIN: Pipeline = Pipeline {
        trust_enabled: false,
        fusion_mode: FusionMode::Plain,
    };
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline::TRUST
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootprintLog {
    pub center: [f64; 2],
    pub half_extent: [f64; 2],
    pub yaw: f64,
}

impl FootprintLog {
    fn new(f: &FovFootprint) -> Self {
        FootprintLog {
            center: [f.center.x, f.center.y],
            half_extent: [f.half_extent_x, f.half_extent_y],
            yaw: f.yaw,
        }
    }

    pub fn to_footprint(&self) -> FovFootprint {
        FovFootprint {
            center: self.center.into(),
            half_extent_x: self.half_extent[0],
            half_extent_y: self.half_extent[1],
            yaw: self.yaw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthLog {
    pub id: u64,
    pub position: [f64; 3],
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackLog {
    pub id: u64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedLog {
    pub id: u64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub flagged: bool,
    pub zeta: f64,
    pub contributors: Vec<u32>,
    /// `[alpha, beta]` of the track's trust when trust is enabled.
    pub trust: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentFrame {
    pub agent: u32,
    pub attacked: bool,
    pub position: [f64; 3],
    pub footprint: FootprintLog,
    pub detections: usize,
    /// Confirmed local tracks, world frame.
    pub local_tracks: Vec<TrackLog>,
    pub packets_received: usize,
    pub fused: Vec<FusedLog>,
    pub trust: Option<TrustSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    pub frame: usize,
    pub t: f64,
    pub truths: Vec<TruthLog>,
    /// Positions of every injected object created so far.
    pub fakes: Vec<[f64; 3]>,
    pub edges: Vec<(u32, u32)>,
    pub agents: Vec<AgentFrame>,
}

struct AgentRuntime {
    id: AgentId,
    intr: CameraIntrinsics,
    tracker: Tracker,
    store: TrustStore,
    book: FusedIdBook,
    attacker: Attacker,
    sense_rng: StreamRng,
    attack_rng: StreamRng,
}

/// What one agent produced in the sensing half of a frame.
struct Sensed {
    pose: AgentPose,
    footprint: FovFootprint,
    detections: usize,
    confirmed: Vec<SourceTrack>,
    packets: Vec<Vec<u8>>,
}

/// Tracks one neighbour delivered, already registered into the world frame.
struct Received {
    agent: AgentId,
    footprint: Option<FovFootprint>,
    tracks: Vec<SourceTrack>,
}

/// Streaming episode: yields one [`FrameLog`] per frame and stops after the
/// first error.
pub struct Episode<'a> {
    scn: &'a Scenario,
    pipeline: Pipeline,
    frame: usize,
    frames: usize,
    agents: Vec<AgentRuntime>,
    failed: bool,
}

impl<'a> Episode<'a> {
    pub fn new(scn: &'a Scenario, pipeline: Pipeline) -> Self {
        let priors: BTreeMap<AgentId, _> = scn.agents.iter().map(|a| (a.id, scn.trust.prior(a.prior))).collect();
        let agents = scn
            .agents
            .iter()
            .map(|a| AgentRuntime {
                id: a.id,
                intr: a.intrinsics.get(),
                tracker: Tracker::new(a.id, scn.tracker.clone()),
                store: TrustStore::new(priors.clone(), scn.trust.prior_neutral),
                book: FusedIdBook::default(),
                attacker: Attacker::default(),
                sense_rng: stream(scn.seed, "sense", a.id.0 as u64),
                attack_rng: stream(scn.seed, "attack", a.id.0 as u64),
            })
            .collect();
        Episode {
            scn,
            pipeline,
            frame: 0,
            frames: scn.frame_count(),
            agents,
            failed: false,
        }
    }

    fn sense(&mut self, idx: usize, t: f64) -> Result<Sensed> {
        let scn = self.scn;
        let spec = &scn.agents[idx];
        let rt = &mut self.agents[idx];
        let pose = spec.pose(t);
        let footprint = fov_footprint(&pose, &rt.intr)?;
        let truths: Vec<_> = scn.objects.iter().map(|o| o.bbox(t)).collect();
        let mut dets = simulate_detections(rt.id, &pose, &rt.intr, &truths, t, &scn.sensor, &mut rt.sense_rng)?;
        if let Some(attack) = &scn.attack {
            let cov = scn.sensor.measurement_covariance();
            let ctx = AttackContext {
                agent: rt.id,
                t,
                footprint: &footprint,
                measurement_covariance: &cov,
                nominal_height: scn.sensor.nominal_height,
            };
            dets = apply_attack(dets, attack, &ctx, &mut rt.attacker, &mut rt.attack_rng);
        }
        let detections = dets.len();
        rt.tracker.step(&dets, scn.dt)?;
        let confirmed: Vec<SourceTrack> = rt.tracker.confirmed().map(SourceTrack::from_track).collect();
        let packets = confirmed
            .iter()
            .map(|tr| encode_packet(&TrackPacket::from_track(&pose, &rt.intr, tr)))
            .collect();
        Ok(Sensed {
            pose,
            footprint,
            detections,
            confirmed,
            packets,
        })
    }

    fn receive(sender: AgentId, packets: &[Vec<u8>]) -> Result<Received> {
        let mut footprint = None;
        let mut tracks = Vec::with_capacity(packets.len());
        for bytes in packets {
            let p = decode_packet(bytes)?;
            if footprint.is_none() {
                footprint = Some(fov_footprint(&p.sender_pose(), &p.intrinsics()?)?);
            }
            tracks.push(p.to_world_track(sender));
        }
        Ok(Received {
            agent: sender,
            footprint,
            tracks,
        })
    }

    fn fuse(&mut self, idx: usize, own: &Sensed, received: &[Received], t: f64) -> Result<Vec<FusedTrack>> {
        let scn = self.scn;
        let cfg = &scn.trust;
        let pipeline = self.pipeline;
        let rt = &mut self.agents[idx];
        if pipeline.trust_enabled {
            for r in received {
                rt.store.ensure_agent(r.agent);
            }
            rt.store.propagate(cfg);
        }
        let proximal: Vec<(AgentId, Vec<SourceTrack>)> = received.iter().map(|r| (r.agent, r.tracks.clone())).collect();
        let ctx = FusionContext {
            ego: rt.id,
            mode: pipeline.fusion_mode,
            config: &scn.fusion,
            trust: pipeline.trust_enabled.then_some(&rt.store),
            self_trust: cfg.self_trust,
            timestamp: t,
        };
        let mut fused = cascaded_fuse(&ctx, &own.confirmed, &proximal)?;
        rt.book.assign(&mut fused);
        if !pipeline.trust_enabled {
            return Ok(fused);
        }

        let ids: Vec<TrackId> = fused.iter().map(|f| f.id).collect();
        rt.store.sync_tracks(&ids);
        let positions: Vec<(TrackId, Vector3<f64>)> = fused.iter().map(|f| (f.id, f.track.position())).collect();
        let own_positions: Vec<Vector3<f64>> = own.confirmed.iter().map(|s| s.mean.fixed_rows::<3>(0).into_owned()).collect();

        // track trust from every observer, then agent trust given the new track trust
        let own_assoc = associate_in_fov(&positions, &own_positions, &own.footprint, cfg);
        let mut psms = track_psms(&own_assoc, &cfg.self_trust);
        let mut assocs: Vec<(AgentId, FovAssociation)> = Vec::new();
        for r in received {
            let Some(fp) = &r.footprint else { continue };
            let theirs: Vec<Vector3<f64>> = r.tracks.iter().map(|s| s.mean.fixed_rows::<3>(0).into_owned()).collect();
            let mut assoc = associate_in_fov(&positions, &theirs, fp, cfg);
            assoc.agent = Some(r.agent);
            psms.extend(track_psms(&assoc, &rt.store.agent_trust_or_prior(r.agent)));
            assocs.push((r.agent, assoc));
        }
        rt.store.apply(&psms, cfg);
        let mut agent_side = Vec::new();
        for (agent, assoc) in &assocs {
            agent_side.extend(agent_psms(assoc, *agent, &rt.store));
        }
        rt.store.apply(&agent_side, cfg);
        Ok(trust_filter(fused, &rt.store.track_trust, cfg.tau_ignore))
    }

    fn step(&mut self) -> Result<FrameLog> {
        let scn = self.scn;
        let k = self.frame;
        let t = k as f64 * scn.dt;
        let wrap = |idx: usize, e: Error| Error::Frame {
            frame: k,
            time: t,
            agent: scn.agents[idx].id.0,
            source: Box::new(e),
        };

        let mut sensed = Vec::with_capacity(self.agents.len());
        for idx in 0..self.agents.len() {
            sensed.push(self.sense(idx, t).map_err(|e| wrap(idx, e))?);
        }
        let positions: Vec<(AgentId, Vector3<f64>)> = self.agents.iter().zip(&sensed).map(|(a, s)| (a.id, s.pose.position)).collect();
        let adjacency = connectivity(&positions, scn.comm_range)?;

        let victims = scn.victims();
        let mut agent_logs = Vec::with_capacity(self.agents.len());
        for idx in 0..self.agents.len() {
            let id = self.agents[idx].id;
            let received: Vec<Received> = adjacency
                .neighbors(id)
                .into_iter()
                .map(|n| {
                    let j = self.agents.iter().position(|a| a.id == n).expect("adjacency over scenario agents");
                    Self::receive(n, &sensed[j].packets)
                })
                .collect::<Result<_>>()
                .map_err(|e| wrap(idx, e))?;
            let fused = self.fuse(idx, &sensed[idx], &received, t).map_err(|e| wrap(idx, e))?;
            let rt = &self.agents[idx];
            let own = &sensed[idx];
            agent_logs.push(AgentFrame {
                agent: id.0,
                attacked: victims.contains(&id),
                position: own.pose.position.into(),
                footprint: FootprintLog::new(&own.footprint),
                detections: own.detections,
                local_tracks: rt
                    .tracker
                    .confirmed()
                    .map(|tr| TrackLog {
                        id: tr.id.0,
                        position: tr.position().into(),
                        velocity: tr.velocity().into(),
                    })
                    .collect(),
                packets_received: received.iter().map(|r| r.tracks.len()).sum(),
                fused: fused
                    .iter()
                    .map(|f| FusedLog {
                        id: f.id.0,
                        position: f.track.position().into(),
                        velocity: f.track.velocity().into(),
                        flagged: f.is_flagged(),
                        zeta: f.zeta,
                        contributors: f.contributors.iter().map(|c| c.0 .0).collect(),
                        trust: self
                            .pipeline
                            .trust_enabled
                            .then(|| rt.store.track_trust.get(&f.id).map(|b| [b.alpha, b.beta]))
                            .flatten(),
                    })
                    .collect(),
                trust: self.pipeline.trust_enabled.then(|| rt.store.snapshot()),
            });
        }

        Ok(FrameLog {
            frame: k,
            t,
            truths: scn
                .objects
                .iter()
                .map(|o| {
                    let b = o.bbox(t);
                    TruthLog {
                        id: o.id,
                        position: b.center.into(),
                        yaw: b.yaw,
                    }
                })
                .collect(),
            fakes: self
                .agents
                .iter()
                .flat_map(|a| a.attacker.fakes().iter().map(|f| f.bbox.center.into()))
                .collect(),
            edges: adjacency.edges().into_iter().map(|(a, b)| (a.0, b.0)).collect(),
            agents: agent_logs,
        })
    }
}

impl Iterator for Episode<'_> {
    type Item = Result<FrameLog>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.frame >= self.frames {
            return None;
        }
        let out = self.step();
        self.frame += 1;
        self.failed = out.is_err();
        Some(out)
    }
}

pub fn run_episode(scn: &Scenario, pipeline: Pipeline) -> Result<Vec<FrameLog>> {
    Episode::new(scn, pipeline).collect()
}

//! Range-based connectivity and the fixed-layout track packet.
//!
//! Wire layout (little-endian, matrices row-major):
//!
//! | field                  | type      | count |
//! |------------------------|-----------|-------|
//! | ownship state          | f32       | 6     |
//! | ownship covariance     | f32       | 36    |
//! | camera mount pose      | f32       | 6     |
//! | hfov, vfov, focal      | f32       | 3     |
//! | image width, height    | u16       | 2     |
//! | track id               | u16       | 1     |
//! | track state            | f32       | 7     |
//! | track covariance       | f32       | 49    |
//!
//! Poses are `[x, y, z, yaw, pitch, roll]`; the track state is
//! `[p(3), v(3), yaw]` in the sender's body frame.

use nalgebra::{SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::ddf::{FusedMatrix, FusedVector, PlanarTransform, SourceTrack};
use crate::error::{Error, Result};
use crate::geometry::{camera_half_angles, AgentPose, CameraIntrinsics};
use crate::ids::{AgentId, TrackId};

pub const PACKET_FLOATS: usize = 107;
pub const PACKET_INTS: usize = 3;
pub const PACKET_BYTES: usize = PACKET_FLOATS * 4 + PACKET_INTS * 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketAccounting {
    /// Counts the integer fields as eight bits each.
    Paper,
    /// The actual encoded size.
    Wire,
}

pub fn packet_size_bits(accounting: PacketAccounting) -> u32 {
    let int_bits = match accounting {
        PacketAccounting::Paper => 8,
        PacketAccounting::Wire => 16,
    };
    PACKET_FLOATS as u32 * 32 + PACKET_INTS as u32 * int_bits
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackPacket {
    pub ownship_state: SVector<f32, 6>,
    pub ownship_covariance: SMatrix<f32, 6, 6>,
    pub camera_mount: SVector<f32, 6>,
    pub hfov: f32,
    pub vfov: f32,
    pub focal: f32,
    pub image_width: u16,
    pub image_height: u16,
    pub track_id: u16,
    pub track_state: SVector<f32, 7>,
    pub track_covariance: SMatrix<f32, 7, 7>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn f32s<'a>(&mut self, vals: impl IntoIterator<Item = &'a f32>) {
        for v in vals {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn row_major<const R: usize, const C: usize>(&mut self, m: &SMatrix<f32, R, C>) {
        for r in 0..R {
            self.f32s(m.row(r).iter());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self.buf.get(self.pos..end).ok_or_else(|| Error::Decode {
            offset: self.pos,
            reason: format!("truncated: need {N} bytes, {} left", self.buf.len() - self.pos),
        })?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice length checked"))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take::<4>()?))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take::<2>()?))
    }

    fn vector<const N: usize>(&mut self) -> Result<SVector<f32, N>> {
        let mut v = SVector::<f32, N>::zeros();
        for i in 0..N {
            v[i] = self.f32()?;
        }
        Ok(v)
    }

    fn row_major<const R: usize, const C: usize>(&mut self) -> Result<SMatrix<f32, R, C>> {
        let mut m = SMatrix::<f32, R, C>::zeros();
        for r in 0..R {
            for c in 0..C {
                m[(r, c)] = self.f32()?;
            }
        }
        Ok(m)
    }
}

pub fn encode_packet(p: &TrackPacket) -> Vec<u8> {
    let mut w = Writer(Vec::with_capacity(PACKET_BYTES));
    w.f32s(p.ownship_state.iter());
    w.row_major(&p.ownship_covariance);
    w.f32s(p.camera_mount.iter());
    w.f32s([p.hfov, p.vfov, p.focal].iter());
    w.u16(p.image_width);
    w.u16(p.image_height);
    w.u16(p.track_id);
    w.f32s(p.track_state.iter());
    w.row_major(&p.track_covariance);
    debug_assert_eq!(w.0.len(), PACKET_BYTES);
    w.0
}

pub fn decode_packet(bytes: &[u8]) -> Result<TrackPacket> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let p = TrackPacket {
        ownship_state: r.vector()?,
        ownship_covariance: r.row_major()?,
        camera_mount: r.vector()?,
        hfov: r.f32()?,
        vfov: r.f32()?,
        focal: r.f32()?,
        image_width: r.u16()?,
        image_height: r.u16()?,
        track_id: r.u16()?,
        track_state: r.vector()?,
        track_covariance: r.row_major()?,
    };
    if r.pos != bytes.len() {
        return Err(Error::Decode {
            offset: r.pos,
            reason: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    Ok(p)
}

impl TrackPacket {
    /// Packs a world-frame track for transmission in the sender's body frame.
    pub fn from_track(pose: &AgentPose, intr: &CameraIntrinsics, track: &SourceTrack) -> Self {
        let to_body = PlanarTransform::between(&AgentPose::origin(), pose);
        let local = to_body.apply_source(track);
        let (dt, dp) = camera_half_angles(intr);
        TrackPacket {
            ownship_state: SVector::<f64, 6>::new(
                pose.position.x,
                pose.position.y,
                pose.position.z,
                pose.yaw,
                pose.pitch,
                pose.roll,
            )
            .cast(),
            ownship_covariance: pose.covariance.cast(),
            camera_mount: SVector::zeros(),
            hfov: (2.0 * dt) as f32,
            vfov: (2.0 * dp) as f32,
            focal: intr.fx as f32,
            image_width: intr.nx.min(u16::MAX as u32) as u16,
            image_height: intr.ny.min(u16::MAX as u32) as u16,
            track_id: (track.track_id.0 & 0xFFFF) as u16,
            track_state: local.mean.cast(),
            track_covariance: local.covariance.cast(),
        }
    }

    pub fn sender_pose(&self) -> AgentPose {
        let s: SVector<f64, 6> = self.ownship_state.cast();
        let mut pose = AgentPose::new(Vector3::new(s[0], s[1], s[2]), s[3]);
        pose.pitch = s[4];
        pose.roll = s[5];
        pose.covariance = self.ownship_covariance.cast();
        pose
    }

    /// Sender camera model recovered from the transmitted field of view.
    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        let fx = self.focal as f64;
        let fy = (self.image_height as f64 / 2.0) / (self.vfov as f64 / 2.0).tan();
        CameraIntrinsics::new(fx, fy, self.image_width as u32, self.image_height as u32)
    }

    /// Unpacks the track and registers it into the world frame using the
    /// transmitted ownship pose.
    pub fn to_world_track(&self, sender: AgentId) -> SourceTrack {
        let mean: FusedVector = self.track_state.cast();
        let cov: FusedMatrix = self.track_covariance.cast();
        let local = SourceTrack {
            agent: sender,
            track_id: TrackId(self.track_id as u64),
            mean,
            covariance: (cov + cov.transpose()) * 0.5,
            size: None,
        };
        PlanarTransform::between(&self.sender_pose(), &AgentPose::origin()).apply_source(&local)
    }
}

/// Symmetric communication graph over a fixed agent list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    ids: Vec<AgentId>,
    edges: Vec<bool>,
}

impl Adjacency {
    pub fn ids(&self) -> &[AgentId] {
        &self.ids
    }

    fn index(&self, a: AgentId) -> Option<usize> {
        self.ids.iter().position(|&x| x == a)
    }

    pub fn connected(&self, a: AgentId, b: AgentId) -> bool {
        match (self.index(a), self.index(b)) {
            (Some(i), Some(j)) => self.edges[i * self.ids.len() + j],
            _ => false,
        }
    }

    /// Neighbours of `a` in agent-list order.
    pub fn neighbors(&self, a: AgentId) -> Vec<AgentId> {
        let Some(i) = self.index(a) else { return vec![] };
        let n = self.ids.len();
        (0..n).filter(|&j| self.edges[i * n + j]).map(|j| self.ids[j]).collect()
    }

    /// Undirected edges `(a, b)` with `a` before `b` in the agent list.
    pub fn edges(&self) -> Vec<(AgentId, AgentId)> {
        let n = self.ids.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.edges[i * n + j] {
                    out.push((self.ids[i], self.ids[j]));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }
}

/// Agents are linked when their 3-D distance is at most `range`.
pub fn connectivity(positions: &[(AgentId, Vector3<f64>)], range: f64) -> Result<Adjacency> {
    if !(range > 0.0) {
        return Err(Error::Domain(format!("communication range must be positive, got {range}")));
    }
    let n = positions.len();
    let mut edges = vec![false; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let linked = (positions[i].1 - positions[j].1).norm() <= range;
            edges[i * n + j] = linked;
            edges[j * n + i] = linked;
        }
    }
    Ok(Adjacency {
        ids: positions.iter().map(|p| p.0).collect(),
        edges,
    })
}

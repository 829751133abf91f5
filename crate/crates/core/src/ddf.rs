//! Distributed data fusion: frame registration, covariance intersection
//! (optimised pairwise and trust-weighted N-fold), cascaded multi-agent
//! fusion and trust-based track flagging.
//!
//! Fusion runs on the seven transmitted states `[p(3), v(3), yaw]`. Size is
//! never transmitted, so a fused track takes it from the ego's own filter
//! when the ego contributes and from a configured default otherwise.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::allocator::Allocator;
use nalgebra::{DMatrix, DVector, DefaultAllocator, Dim, DimDiff, DimSub, Matrix3, OMatrix, OVector, Rotation3, SMatrix, SVector, Vector3, U1};
use serde::{Deserialize, Serialize};

use crate::assignment::solve_assignment;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, AgentPose};
use crate::ids::{AgentId, TrackId};
use crate::tracking::{StateMatrix, StateVector, Track};
use crate::trust::{BetaTrust, Positioned, TrustStore};

pub const FUSED_DIM: usize = 7;
pub type FusedVector = SVector<f64, FUSED_DIM>;
pub type FusedMatrix = SMatrix<f64, FUSED_DIM, FUSED_DIM>;

/// Where each fused component lives in the ten-state track vector.
pub const FUSED_FROM_STATE: [usize; FUSED_DIM] = [0, 1, 2, 3, 4, 5, 9];
const FUSED_YAW: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    #[default]
    Plain,
    #[serde(alias = "trust")]
    TrustWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Distance gate (m) for clustering tracks across agents.
    pub cluster_gate: f64,
    /// Golden-section tolerance on the CI weight.
    pub ci_tolerance: f64,
    /// `[h, w, l]` for fused tracks with no locally observed size.
    pub default_size: [f64; 3],
    pub default_size_var: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            cluster_gate: 3.0,
            ci_tolerance: 1e-4,
            default_size: [1.8, 2.0, 4.5],
            default_size_var: 4.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cluster_gate > 0.0) {
            return Err(Error::config("fusion.cluster_gate", "must be positive"));
        }
        if !(self.ci_tolerance > 0.0 && self.ci_tolerance < 0.5) {
            return Err(Error::config("fusion.ci_tolerance", "must lie in (0, 0.5)"));
        }
        if self.default_size.iter().any(|&s| !(s > 0.0)) || !(self.default_size_var > 0.0) {
            return Err(Error::config("fusion.default_size", "sizes and variance must be positive"));
        }
        Ok(())
    }
}

/// A track as seen by the fusion stage: seven-state estimate plus optional
/// size block, tagged with its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTrack {
    pub agent: AgentId,
    pub track_id: TrackId,
    pub mean: FusedVector,
    pub covariance: FusedMatrix,
    pub size: Option<(Vector3<f64>, Matrix3<f64>)>,
}

impl SourceTrack {
    pub fn from_track(track: &Track) -> Self {
        let mean = FusedVector::from_fn(|i, _| track.state[FUSED_FROM_STATE[i]]);
        let covariance = FusedMatrix::from_fn(|i, j| track.covariance[(FUSED_FROM_STATE[i], FUSED_FROM_STATE[j])]);
        let size = Vector3::new(track.state[6], track.state[7], track.state[8]);
        let size_cov = track.covariance.fixed_view::<3, 3>(6, 6).into_owned();
        SourceTrack {
            agent: track.source_agent,
            track_id: track.id,
            mean,
            covariance,
            size: Some((size, size_cov)),
        }
    }
}

impl Positioned for SourceTrack {
    fn position(&self) -> Vector3<f64> {
        self.mean.fixed_rows::<3>(0).into_owned()
    }
}

impl Positioned for Track {
    fn position(&self) -> Vector3<f64> {
        Track::position(self)
    }
}

/// Rigid planar transform: rotate about +z by `rotation`, then translate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarTransform {
    pub rotation: f64,
    pub translation: Vector3<f64>,
}

impl PlanarTransform {
    /// Maps coordinates expressed in `source`'s body frame into `ego`'s.
    pub fn between(source: &AgentPose, ego: &AgentPose) -> Self {
        let r_ego_inv = Rotation3::from_axis_angle(&Vector3::z_axis(), -ego.yaw);
        PlanarTransform {
            rotation: source.yaw - ego.yaw,
            translation: r_ego_inv * (source.position - ego.position),
        }
    }

    fn rot(&self) -> Matrix3<f64> {
        *Rotation3::from_axis_angle(&Vector3::z_axis(), self.rotation).matrix()
    }

    pub fn apply_track(&self, track: &Track) -> Track {
        let r = self.rot();
        let mut t = StateMatrix::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        t.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
        let mut out = track.clone();
        let mut state: StateVector = t * track.state;
        let p = state.fixed_rows::<3>(0) + self.translation;
        state.fixed_rows_mut::<3>(0).copy_from(&p);
        state[9] = wrap_angle(state[9] + self.rotation);
        out.state = state;
        out.covariance = t * track.covariance * t.transpose();
        out
    }

    pub fn apply_source(&self, track: &SourceTrack) -> SourceTrack {
        let r = self.rot();
        let mut t = FusedMatrix::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        t.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
        let mut out = track.clone();
        let mut mean: FusedVector = t * track.mean;
        let p = mean.fixed_rows::<3>(0) + self.translation;
        mean.fixed_rows_mut::<3>(0).copy_from(&p);
        mean[FUSED_YAW] = wrap_angle(mean[FUSED_YAW] + self.rotation);
        out.mean = mean;
        out.covariance = t * track.covariance * t.transpose();
        out
    }

    pub fn inverse(&self) -> Self {
        let r_inv = Rotation3::from_axis_angle(&Vector3::z_axis(), -self.rotation);
        PlanarTransform {
            rotation: -self.rotation,
            translation: -(r_inv * self.translation),
        }
    }
}

/// Re-expresses a track given in `source`'s frame in `ego`'s frame.
pub fn register_frame(track: &Track, source: &AgentPose, ego: &AgentPose) -> Track {
    PlanarTransform::between(source, ego).apply_track(track)
}

fn information<D: Dim>(cov: &OMatrix<f64, D, D>) -> Result<OMatrix<f64, D, D>>
where
    DefaultAllocator: Allocator<D, D> + Allocator<D>,
{
    Ok(cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?
        .inverse())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiResult {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub omega: f64,
}

/// Fused estimate for a fixed weight on the first source.
pub fn ci_at_weight<D: Dim>(
    mean1: &OVector<f64, D>,
    info1: &OMatrix<f64, D, D>,
    mean2: &OVector<f64, D>,
    info2: &OMatrix<f64, D, D>,
    omega: f64,
) -> Result<(OVector<f64, D>, OMatrix<f64, D, D>)>
where
    DefaultAllocator: Allocator<D, D> + Allocator<D>,
{
    let info = info1 * omega + info2 * (1.0 - omega);
    let cov = info
        .cholesky()
        .ok_or_else(|| Error::Numerical("fused information matrix is singular".into()))?
        .inverse();
    let mean = &cov * (info1 * mean1 * omega + info2 * mean2 * (1.0 - omega));
    Ok((mean, cov))
}

/// Pairwise covariance intersection with the weight chosen to minimise
/// `det(Sigma_CI)` by golden-section search (endpoints checked explicitly).
pub fn ci_pairwise(
    mean1: &DVector<f64>,
    cov1: &DMatrix<f64>,
    mean2: &DVector<f64>,
    cov2: &DMatrix<f64>,
    tolerance: f64,
) -> Result<CiResult> {
    if cov1.shape() != cov2.shape() || mean1.len() != mean2.len() || mean1.len() != cov1.nrows() {
        return Err(Error::Domain("CI inputs have mismatched dimensions".into()));
    }
    let (mean, covariance, omega) = ci_optimised(mean1, cov1, mean2, cov2, tolerance)?;
    Ok(CiResult { mean, covariance, omega })
}

fn ci_optimised<D>(
    mean1: &OVector<f64, D>,
    cov1: &OMatrix<f64, D, D>,
    mean2: &OVector<f64, D>,
    cov2: &OMatrix<f64, D, D>,
    tolerance: f64,
) -> Result<(OVector<f64, D>, OMatrix<f64, D, D>, f64)>
where
    D: Dim + DimSub<U1>,
    DefaultAllocator: Allocator<D, D> + Allocator<D> + Allocator<DimDiff<D, U1>>,
{
    let info1 = information(cov1)?;
    let info2 = information(cov2)?;
    // det(w I1 + (1-w) I2) = det(I2) * prod(1 + w (lambda - 1)), lambda the
    // eigenvalues of L^-1 I1 L^-T with I2 = L L^T
    let l = info2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?
        .unpack();
    let half = l
        .solve_lower_triangular(&info1)
        .ok_or_else(|| Error::Numerical("singular information factor".into()))?;
    let whitened = l
        .solve_lower_triangular(&half.transpose())
        .ok_or_else(|| Error::Numerical("singular information factor".into()))?;
    let lambda = ((&whitened + whitened.transpose()) * 0.5).symmetric_eigenvalues();
    // minimise log det(Sigma_CI) = -log det(w I1 + (1-w) I2), convex in w
    let objective = |w: f64| -> f64 {
        let prod: f64 = lambda.iter().map(|x| 1.0 + w * (x - 1.0)).product();
        if prod.is_normal() {
            -prod.ln()
        } else {
            -lambda.iter().map(|x| (1.0 + w * (x - 1.0)).ln()).sum::<f64>()
        }
    };
    let omega = golden_section_min(&objective, 0.0, 1.0, tolerance);
    let mut best = (omega, objective(omega));
    for w in [0.0, 1.0] {
        let v = objective(w);
        if v < best.1 {
            best = (w, v);
        }
    }
    let (mean, covariance) = ci_at_weight(mean1, &info1, mean2, &info2, best.0)?;
    Ok((mean, covariance, best.0))
}

fn golden_section_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// N-fold CI with caller-supplied weights, normalised to sum to one.
/// Returns the mean, covariance and normalised weights.
pub fn ci_weighted(inputs: &[(DVector<f64>, DMatrix<f64>)], weights: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>, Vec<f64>)> {
    if inputs.is_empty() || inputs.len() != weights.len() {
        return Err(Error::Domain("need one weight per CI input and at least one input".into()));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::Domain("CI weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NoInformativeSource);
    }
    let n = inputs[0].0.len();
    let mut info = DMatrix::zeros(n, n);
    let mut info_mean = DVector::zeros(n);
    let normalised: Vec<f64> = weights.iter().map(|w| w / total).collect();
    for ((mean, cov), &w) in inputs.iter().zip(&normalised) {
        if mean.len() != n || cov.shape() != (n, n) {
            return Err(Error::Domain("CI inputs have mismatched dimensions".into()));
        }
        if w == 0.0 {
            continue;
        }
        let inf = information(cov)?;
        info_mean += &inf * mean * w;
        info += inf * w;
    }
    let cov = info
        .cholesky()
        .ok_or_else(|| Error::Numerical("fused information matrix is singular".into()))?
        .inverse();
    let mean = &cov * info_mean;
    Ok((mean, cov, normalised))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustWeightedCi {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Fusion confidence: trust-variance aggregated with the fusion weights.
    pub zeta: f64,
    pub weights: Vec<f64>,
}

/// N-fold CI weighted by each source's expected trust.
pub fn ci_trust_weighted(inputs: &[(DVector<f64>, DMatrix<f64>, BetaTrust)]) -> Result<TrustWeightedCi> {
    let estimates: Vec<(DVector<f64>, DMatrix<f64>)> = inputs.iter().map(|(m, c, _)| (m.clone(), c.clone())).collect();
    let expectations: Vec<f64> = inputs.iter().map(|(_, _, t)| t.mean()).collect();
    let (mean, covariance, weights) = ci_weighted(&estimates, &expectations)?;
    let zeta = weights.iter().zip(inputs).map(|(w, (_, _, t))| w * t.variance()).sum();
    Ok(TrustWeightedCi {
        mean,
        covariance,
        zeta,
        weights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustFlag {
    Retained,
    Flagged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedTrack {
    /// Ego-local fused id. Sequential until [`FusedIdBook::assign`] runs.
    pub id: TrackId,
    pub track: Track,
    /// `(agent, weight)`; weights sum to one.
    pub contributors: Vec<(AgentId, f64)>,
    /// Source tracks merged into this one, ego first.
    pub members: Vec<(AgentId, TrackId)>,
    pub zeta: f64,
    pub flag: TrustFlag,
}

impl FusedTrack {
    pub fn is_flagged(&self) -> bool {
        self.flag == TrustFlag::Flagged
    }
}

impl Positioned for FusedTrack {
    fn position(&self) -> Vector3<f64> {
        self.track.position()
    }
}

struct Cluster {
    members: Vec<SourceTrack>,
    mean: FusedVector,
    covariance: FusedMatrix,
    /// Running CI weights per member.
    weights: Vec<f64>,
    /// Trust-weighted mode only: per member `(I, I x)` with yaw aligned to
    /// the first member.
    info: Vec<(FusedMatrix, FusedVector)>,
}

impl Cluster {
    fn new(t: &SourceTrack) -> Self {
        Cluster {
            members: vec![t.clone()],
            mean: t.mean,
            covariance: t.covariance,
            weights: vec![1.0],
            info: Vec::new(),
        }
    }
}

fn static_information(cov: &FusedMatrix) -> Result<FusedMatrix> {
    Ok(cov
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?
        .inverse())
}

/// Shifts `track`'s yaw by a multiple of 2pi so it is within pi of `reference`.
fn align_yaw(reference: f64, mut v: FusedVector) -> FusedVector {
    v[FUSED_YAW] = reference + wrap_angle(v[FUSED_YAW] - reference);
    v
}

/// Read-only inputs to one cascaded fusion pass.
#[derive(Debug, Clone, Copy)]
pub struct FusionContext<'a> {
    pub ego: AgentId,
    pub mode: FusionMode,
    pub config: &'a FusionConfig,
    /// Trust used for weighting and fusion confidence; `None` when trust
    /// estimation is disabled.
    pub trust: Option<&'a TrustStore>,
    /// Trust the ego places in its own data.
    pub self_trust: BetaTrust,
    pub timestamp: f64,
}

impl FusionContext<'_> {
    fn trust_of(&self, agent: AgentId) -> BetaTrust {
        if agent == self.ego {
            return self.self_trust;
        }
        match self.trust {
            Some(store) => store.agent_trust_or_prior(agent),
            None => BetaTrust::uniform(),
        }
    }

    fn refuse_trust_weighted(&self, cluster: &mut Cluster) -> Result<()> {
        let reference = cluster.members[0].mean[FUSED_YAW];
        for m in &cluster.members[cluster.info.len()..] {
            let mut mean = m.mean;
            mean[FUSED_YAW] = reference + wrap_angle(mean[FUSED_YAW] - reference);
            let inf = static_information(&m.covariance)?;
            cluster.info.push((inf, inf * mean));
        }
        let expectations: Vec<f64> = cluster.members.iter().map(|m| self.trust_of(m.agent).mean()).collect();
        let total: f64 = expectations.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NoInformativeSource);
        }
        let mut info = FusedMatrix::zeros();
        let mut info_mean = FusedVector::zeros();
        let weights: Vec<f64> = expectations.iter().map(|e| e / total).collect();
        for ((inf, inf_mean), &w) in cluster.info.iter().zip(&weights) {
            if w > 0.0 {
                info += inf * w;
                info_mean += inf_mean * w;
            }
        }
        let cov = info
            .cholesky()
            .ok_or_else(|| Error::Numerical("fused information matrix is singular".into()))?
            .inverse();
        let mut mean = cov * info_mean;
        mean[FUSED_YAW] = wrap_angle(mean[FUSED_YAW]);
        cluster.mean = mean;
        cluster.covariance = (cov + cov.transpose()) * 0.5;
        cluster.weights = weights;
        Ok(())
    }
}

/// Cascaded fusion: start from the ego's tracks and fold in each proximal
/// agent (in the given order). Matched tracks are fused, unmatched proximal
/// tracks start new fused tracks.
pub fn cascaded_fuse(ctx: &FusionContext<'_>, ego_tracks: &[SourceTrack], proximal: &[(AgentId, Vec<SourceTrack>)]) -> Result<Vec<FusedTrack>> {
    let cfg = ctx.config;
    let mut clusters: Vec<Cluster> = ego_tracks
        .iter()
        .map(Cluster::new)
        .collect();

    for (agent, tracks) in proximal {
        let cost = DMatrix::from_fn(clusters.len(), tracks.len(), |i, j| {
            (clusters[i].mean.fixed_rows::<3>(0) - tracks[j].mean.fixed_rows::<3>(0)).norm()
        });
        let assoc = solve_assignment(&cost, cfg.cluster_gate);
        for &(i, j, _) in &assoc.matches {
            let incoming = tracks[j].clone();
            debug_assert_eq!(incoming.agent, *agent);
            let cluster = &mut clusters[i];
            match ctx.mode {
                FusionMode::Plain => {
                    let m2 = align_yaw(cluster.mean[FUSED_YAW], incoming.mean);
                    let (mut mean, cov, omega) = ci_optimised(&cluster.mean, &cluster.covariance, &m2, &incoming.covariance, cfg.ci_tolerance)?;
                    mean[FUSED_YAW] = wrap_angle(mean[FUSED_YAW]);
                    cluster.mean = mean;
                    cluster.covariance = (cov + cov.transpose()) * 0.5;
                    for w in cluster.weights.iter_mut() {
                        *w *= omega;
                    }
                    cluster.weights.push(1.0 - omega);
                    cluster.members.push(incoming);
                }
                FusionMode::TrustWeighted => {
                    cluster.members.push(incoming);
                    ctx.refuse_trust_weighted(cluster)?;
                }
            }
        }
        for &j in &assoc.unmatched_cols {
            clusters.push(Cluster::new(&tracks[j]));
        }
    }

    let mut out = Vec::with_capacity(clusters.len());
    for (idx, mut cluster) in clusters.into_iter().enumerate() {
        if ctx.mode == FusionMode::TrustWeighted && cluster.members.len() == 1 {
            // a lone member is its own fused estimate; weights are already [1]
            cluster.weights = vec![1.0];
        }
        out.push(build_fused(ctx, idx, cluster));
    }
    Ok(out)
}

fn build_fused(ctx: &FusionContext<'_>, idx: usize, cluster: Cluster) -> FusedTrack {
    let cfg = ctx.config;
    let (size, size_cov) = cluster
        .members
        .iter()
        .find(|m| m.agent == ctx.ego && m.size.is_some())
        .or_else(|| cluster.members.iter().find(|m| m.size.is_some()))
        .and_then(|m| m.size)
        .unwrap_or_else(|| (Vector3::from(cfg.default_size), Matrix3::identity() * cfg.default_size_var));

    let mut state = StateVector::zeros();
    let mut cov = StateMatrix::zeros();
    for (i, &si) in FUSED_FROM_STATE.iter().enumerate() {
        state[si] = cluster.mean[i];
        for (j, &sj) in FUSED_FROM_STATE.iter().enumerate() {
            cov[(si, sj)] = cluster.covariance[(i, j)];
        }
    }
    state.fixed_rows_mut::<3>(6).copy_from(&size);
    cov.fixed_view_mut::<3, 3>(6, 6).copy_from(&size_cov);

    let contributors: Vec<(AgentId, f64)> = cluster.members.iter().map(|m| m.agent).zip(cluster.weights.iter().copied()).collect();
    let zeta = match ctx.trust {
        Some(_) => contributors.iter().map(|(a, w)| w * ctx.trust_of(*a).variance()).sum(),
        None => 0.0,
    };
    let id = TrackId(idx as u64);
    FusedTrack {
        id,
        track: Track::from_estimate(id, ctx.ego, state, cov, ctx.timestamp),
        contributors,
        members: cluster.members.iter().map(|m| (m.agent, m.track_id)).collect(),
        zeta,
        flag: TrustFlag::Retained,
    }
}

/// Keeps fused-track identities stable across frames by following the
/// source tracks that make them up.
#[derive(Debug, Clone, Default)]
pub struct FusedIdBook {
    by_member: BTreeMap<(AgentId, TrackId), TrackId>,
    next: u64,
}

impl FusedIdBook {
    pub fn assign(&mut self, fused: &mut [FusedTrack]) {
        // (votes, fused index, previous id), strongest support claims first
        let mut votes: Vec<(usize, usize, TrackId)> = Vec::new();
        for (i, f) in fused.iter().enumerate() {
            let mut count: BTreeMap<TrackId, usize> = BTreeMap::new();
            for m in &f.members {
                if let Some(id) = self.by_member.get(m) {
                    *count.entry(*id).or_default() += 1;
                }
            }
            votes.extend(count.into_iter().map(|(id, n)| (n, i, id)));
        }
        votes.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut ids: Vec<Option<TrackId>> = vec![None; fused.len()];
        let mut claimed = BTreeSet::new();
        for (_, i, id) in votes {
            if ids[i].is_none() && claimed.insert(id) {
                ids[i] = Some(id);
            }
        }
        let mut next_map = BTreeMap::new();
        for (f, id) in fused.iter_mut().zip(ids) {
            let id = id.unwrap_or_else(|| {
                let id = TrackId(self.next);
                self.next += 1;
                id
            });
            f.id = id;
            f.track.id = id;
            for m in &f.members {
                next_map.insert(*m, id);
            }
        }
        self.by_member = next_map;
    }
}

/// Flags every fused track whose expected trust is strictly below
/// `tau_ignore`. Tracks without a trust entry are retained.
pub fn trust_filter(mut fused: Vec<FusedTrack>, track_trust: &BTreeMap<TrackId, BetaTrust>, tau_ignore: f64) -> Vec<FusedTrack> {
    for f in fused.iter_mut() {
        f.flag = match track_trust.get(&f.id) {
            Some(t) if t.mean() < tau_ignore => TrustFlag::Flagged,
            _ => TrustFlag::Retained,
        };
    }
    fused
}

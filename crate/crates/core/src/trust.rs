//! Beta-distributed agent and track trust, pseudomeasurements and the
//! conjugate update with negativity weighting.
//!
//! Each ego keeps one independent `Beta(alpha, beta)` per connected agent and
//! per live fused track. No cross-covariance between them is represented.
//! A frame runs one alternating sweep:
//!
//! 1. propagate every entry toward its prior (forgetting factor),
//! 2. track PSMs conditioned on the agent trust from the previous frame,
//! 3. agent PSMs conditioned on the freshly updated track trust.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::assignment::solve_assignment;
use crate::error::{Error, Result};
use crate::geometry::FovFootprint;
use crate::ids::{AgentId, TrackId};

/// Variance of `Beta(1, 1)`; used to normalise trust uncertainty to `[0, 1]`.
const UNIFORM_VARIANCE: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaTrust {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for BetaTrust {
    fn default() -> Self {
        BetaTrust::uniform()
    }
}

impl BetaTrust {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Domain(format!("Beta parameters must be positive, got ({alpha}, {beta})")));
        }
        Ok(BetaTrust { alpha, beta })
    }

    pub const fn uniform() -> Self {
        BetaTrust { alpha: 1.0, beta: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    /// `1 - Var / Var[Beta(1,1)]`, clamped to `[0, 1]`. Zero for a uniform
    /// or vaguer belief.
    pub fn certainty(&self) -> f64 {
        (1.0 - self.variance() / UNIFORM_VARIANCE).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsmTarget {
    Agent(AgentId),
    Track(TrackId),
}

/// Pseudomeasurement of trust: a value and a confidence, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Psm {
    pub target: PsmTarget,
    pub value: f64,
    pub confidence: f64,
}

impl Psm {
    pub fn new(target: PsmTarget, value: f64, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) || !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Domain(format!("PSM ({value}, {confidence}) outside [0,1]^2")));
        }
        Ok(Psm { target, value, confidence })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorLabel {
    Trusted,
    #[default]
    Neutral,
    Distrusted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrustConfig {
    /// Weight applied to negative PSMs (`value < negativity_threshold`).
    pub negativity_bias: f64,
    pub negativity_threshold: f64,
    pub prior_trusted: BetaTrust,
    pub prior_neutral: BetaTrust,
    pub prior_distrusted: BetaTrust,
    /// Prior the ego assigns its own contributions.
    pub self_trust: BetaTrust,
    /// Per-frame forgetting factor toward the prior.
    pub forgetting: f64,
    /// Tracks with expected trust strictly below this are flagged.
    pub tau_ignore: f64,
    /// Distance gate (m) for matching fused tracks to an agent's tracks.
    pub psm_gate: f64,
    /// Inset (m) from the footprint edge inside which a missing track counts
    /// against the observing agent.
    pub fov_margin: f64,
}

impl Default for TrustConfig {
    fn default() -> Self {
        TrustConfig {
            negativity_bias: 4.0,
            negativity_threshold: 0.5,
            prior_trusted: BetaTrust { alpha: 10.0, beta: 1.0 },
            prior_neutral: BetaTrust::uniform(),
            prior_distrusted: BetaTrust { alpha: 1.0, beta: 10.0 },
            self_trust: BetaTrust { alpha: 10.0, beta: 1.0 },
            forgetting: 0.98,
            tau_ignore: 0.4,
            psm_gate: 3.0,
            fov_margin: 5.0,
        }
    }
}

impl TrustConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.negativity_bias >= 1.0) {
            return Err(Error::config("trust.negativity_bias", "must be >= 1"));
        }
        for (key, v) in [
            ("trust.negativity_threshold", self.negativity_threshold),
            ("trust.forgetting", self.forgetting),
            ("trust.tau_ignore", self.tau_ignore),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, "must lie in [0, 1]"));
            }
        }
        for (key, b) in [
            ("trust.prior_trusted", self.prior_trusted),
            ("trust.prior_neutral", self.prior_neutral),
            ("trust.prior_distrusted", self.prior_distrusted),
            ("trust.self_trust", self.self_trust),
        ] {
            BetaTrust::new(b.alpha, b.beta).map_err(|e| Error::config(key, e.to_string()))?;
        }
        if !(self.psm_gate > 0.0) {
            return Err(Error::config("trust.psm_gate", "must be positive"));
        }
        if !(self.fov_margin >= 0.0) {
            return Err(Error::config("trust.fov_margin", "must be non-negative"));
        }
        Ok(())
    }

    pub fn prior(&self, label: PriorLabel) -> BetaTrust {
        match label {
            PriorLabel::Trusted => self.prior_trusted,
            PriorLabel::Neutral => self.prior_neutral,
            PriorLabel::Distrusted => self.prior_distrusted,
        }
    }
}

/// Conjugate update with negatively weighted evidence. With a negativity
/// bias of 1 this is the plain Beta-Bernoulli update.
pub fn update_trust(prior: &BetaTrust, psms: &[Psm], cfg: &TrustConfig) -> BetaTrust {
    let mut d_alpha = 0.0;
    let mut d_beta = 0.0;
    for p in psms {
        let weight = if p.value < cfg.negativity_threshold { cfg.negativity_bias } else { 1.0 };
        d_alpha += p.confidence * p.value;
        d_beta += weight * p.confidence * (1.0 - p.value);
    }
    BetaTrust {
        alpha: prior.alpha + d_alpha,
        beta: prior.beta + d_beta,
    }
}

/// Shrinks pseudo-counts toward `baseline` by the forgetting factor.
pub fn propagate_trust(current: &BetaTrust, baseline: &BetaTrust, cfg: &TrustConfig) -> BetaTrust {
    let l = cfg.forgetting;
    BetaTrust {
        alpha: l * current.alpha + (1.0 - l) * baseline.alpha,
        beta: l * current.beta + (1.0 - l) * baseline.beta,
    }
}

pub trait Positioned {
    fn position(&self) -> Vector3<f64>;
}

impl Positioned for Vector3<f64> {
    fn position(&self) -> Vector3<f64> {
        *self
    }
}

/// Entities whose ground position lies inside the footprint.
pub fn fov_filter<'a, T: Positioned>(items: &'a [T], footprint: &FovFootprint) -> Vec<&'a T> {
    items.iter().filter(|t| footprint.contains(t.position().xy())).collect()
}

/// Outcome of comparing the ego's fused tracks with one agent's tracks
/// inside that agent's footprint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FovAssociation {
    pub agent: Option<AgentId>,
    /// Fused tracks the agent also reports.
    pub matched: Vec<TrackId>,
    /// Fused tracks well inside the agent's footprint that it did not report.
    pub missed: Vec<TrackId>,
    /// Indices into the agent's track list with no fused counterpart.
    pub unmatched_agent_tracks: Vec<usize>,
}

/// Gated distance assignment between fused tracks and one agent's tracks,
/// both restricted to that agent's footprint.
pub fn associate_in_fov<F, A>(
    fused: &[(TrackId, F)],
    agent_tracks: &[A],
    footprint: &FovFootprint,
    cfg: &TrustConfig,
) -> FovAssociation
where
    F: Positioned,
    A: Positioned,
{
    let inner = footprint.shrunk(cfg.fov_margin);
    let fused_in: Vec<&(TrackId, F)> = fused.iter().filter(|(_, f)| footprint.contains(f.position().xy())).collect();
    let agent_in: Vec<usize> = (0..agent_tracks.len())
        .filter(|&i| footprint.contains(agent_tracks[i].position().xy()))
        .collect();
    let cost = DMatrix::from_fn(fused_in.len(), agent_in.len(), |i, j| {
        (fused_in[i].1.position() - agent_tracks[agent_in[j]].position()).norm()
    });
    let result = solve_assignment(&cost, cfg.psm_gate);
    let mut out = FovAssociation::default();
    for &(i, _, _) in &result.matches {
        out.matched.push(fused_in[i].0);
    }
    for &i in &result.unmatched_rows {
        if inner.contains(fused_in[i].1.position().xy()) {
            out.missed.push(fused_in[i].0);
        }
    }
    out.unmatched_agent_tracks = result.unmatched_cols.iter().map(|&j| agent_in[j]).collect();
    out
}

/// Track PSMs from one observer: agreement counts for the track, omission
/// counts against it, both with confidence equal to the observer's trust.
pub fn track_psms(assoc: &FovAssociation, observer_trust: &BetaTrust) -> Vec<Psm> {
    let c = observer_trust.mean();
    let pos = assoc.matched.iter().map(|&j| Psm {
        target: PsmTarget::Track(j),
        value: 1.0,
        confidence: c,
    });
    let neg = assoc.missed.iter().map(|&j| Psm {
        target: PsmTarget::Track(j),
        value: 0.0,
        confidence: c,
    });
    pos.chain(neg).collect()
}

/// Agent PSMs for the observed agent, conditioned on current track trust.
/// Tracks without a trust entry produce nothing.
pub fn agent_psms(assoc: &FovAssociation, agent: AgentId, store: &TrustStore) -> Vec<Psm> {
    let mut out = Vec::new();
    for j in &assoc.matched {
        if let Some(t) = store.track_trust.get(j) {
            out.push(Psm {
                target: PsmTarget::Agent(agent),
                value: t.mean(),
                confidence: t.certainty(),
            });
        }
    }
    for j in &assoc.missed {
        if let Some(t) = store.track_trust.get(j) {
            out.push(Psm {
                target: PsmTarget::Agent(agent),
                value: 1.0 - t.mean(),
                confidence: t.mean() * t.certainty(),
            });
        }
    }
    out
}

/// Both PSM lists for agent `agent` against the current store.
pub fn generate_psms<F: Positioned, A: Positioned>(
    fused: &[(TrackId, F)],
    agent: AgentId,
    agent_tracks: &[A],
    footprint: &FovFootprint,
    store: &TrustStore,
    cfg: &TrustConfig,
) -> (Vec<Psm>, Vec<Psm>) {
    let mut assoc = associate_in_fov(fused, agent_tracks, footprint, cfg);
    assoc.agent = Some(agent);
    let observer = store.agent_trust_or_prior(agent);
    (track_psms(&assoc, &observer), agent_psms(&assoc, agent, store))
}

/// Per-ego trust state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrustStore {
    pub agent_trust: BTreeMap<AgentId, BetaTrust>,
    pub track_trust: BTreeMap<TrackId, BetaTrust>,
    pub agent_priors: BTreeMap<AgentId, BetaTrust>,
    pub track_prior: BetaTrust,
}

impl TrustStore {
    pub fn new(agent_priors: BTreeMap<AgentId, BetaTrust>, track_prior: BetaTrust) -> Self {
        TrustStore {
            agent_trust: BTreeMap::new(),
            track_trust: BTreeMap::new(),
            agent_priors,
            track_prior,
        }
    }

    pub fn agent_prior(&self, agent: AgentId) -> BetaTrust {
        self.agent_priors.get(&agent).copied().unwrap_or(BetaTrust::uniform())
    }

    pub fn agent_trust_or_prior(&self, agent: AgentId) -> BetaTrust {
        self.agent_trust.get(&agent).copied().unwrap_or_else(|| self.agent_prior(agent))
    }

    pub fn ensure_agent(&mut self, agent: AgentId) {
        let prior = self.agent_prior(agent);
        self.agent_trust.entry(agent).or_insert(prior);
    }

    /// Creates entries for new tracks and drops entries for tracks that no
    /// longer exist.
    pub fn sync_tracks(&mut self, live: &[TrackId]) {
        let prior = self.track_prior;
        let keep: std::collections::BTreeSet<TrackId> = live.iter().copied().collect();
        self.track_trust.retain(|id, _| keep.contains(id));
        for &id in live {
            self.track_trust.entry(id).or_insert(prior);
        }
    }

    pub fn propagate(&mut self, cfg: &TrustConfig) {
        let priors = &self.agent_priors;
        for (id, t) in self.agent_trust.iter_mut() {
            let base = priors.get(id).copied().unwrap_or(BetaTrust::uniform());
            *t = propagate_trust(t, &base, cfg);
        }
        let base = self.track_prior;
        for t in self.track_trust.values_mut() {
            *t = propagate_trust(t, &base, cfg);
        }
    }

    /// Applies a batch of PSMs, grouped by target. PSMs for unknown targets
    /// are ignored.
    pub fn apply(&mut self, psms: &[Psm], cfg: &TrustConfig) {
        let mut grouped: BTreeMap<PsmTarget, Vec<Psm>> = BTreeMap::new();
        for p in psms {
            grouped.entry(p.target).or_default().push(*p);
        }
        for (target, batch) in grouped {
            let slot = match target {
                PsmTarget::Agent(a) => self.agent_trust.get_mut(&a),
                PsmTarget::Track(t) => self.track_trust.get_mut(&t),
            };
            if let Some(b) = slot {
                *b = update_trust(b, &batch, cfg);
            }
        }
    }

    /// Number of one-dimensional distributions held.
    pub fn len(&self) -> usize {
        self.agent_trust.len() + self.track_trust.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> TrustSnapshot {
        TrustSnapshot {
            agents: self.agent_trust.iter().map(|(k, v)| (k.0, [v.alpha, v.beta])).collect(),
            tracks: self.track_trust.iter().map(|(k, v)| (k.0, [v.alpha, v.beta])).collect(),
        }
    }
}

/// Serializable view of a store: id -> `[alpha, beta]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrustSnapshot {
    pub agents: BTreeMap<u32, [f64; 2]>,
    pub tracks: BTreeMap<u64, [f64; 2]>,
}

//! Assignment metrics, OSPA, trust-estimation accuracy and the per-episode
//! evaluator.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::assignment::{min_cost_assignment, solve_assignment};
use crate::error::{Error, Result};
use crate::geometry::FovFootprint;
use crate::sim::FrameLog;
use crate::trust::BetaTrust;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OspaVariant {
    /// Gated localisation cost raised to `p` and divided by the smaller
    /// cardinality, plus `c^p * (larger - smaller)`. Not a metric.
    Paper,
    /// Schuhmacher et al.
    #[default]
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Track-to-truth distance gate (m).
    pub gate: f64,
    pub ospa_c: f64,
    pub ospa_p: f64,
    pub ospa_variant: OspaVariant,
    /// Length (s) of the closing window that summary statistics average over.
    pub window: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            gate: 2.0,
            ospa_c: 10.0,
            ospa_p: 1.0,
            ospa_variant: OspaVariant::Standard,
            window: 20.0,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gate > 0.0) {
            return Err(Error::config("metrics.gate", "must be positive"));
        }
        if !(self.ospa_c > 0.0) {
            return Err(Error::config("metrics.ospa_c", "must be positive"));
        }
        if !(self.ospa_p >= 1.0) {
            return Err(Error::config("metrics.ospa_p", "must be at least 1"));
        }
        if !(self.window >= 0.0) {
            return Err(Error::config("metrics.window", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AssignmentCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl AssignmentCounts {
    pub fn precision(&self) -> f64 {
        prf(*self).0
    }

    pub fn recall(&self) -> f64 {
        prf(*self).1
    }

    pub fn f1(&self) -> f64 {
        prf(*self).2
    }
}

impl std::ops::AddAssign for AssignmentCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Precision, recall and F1. Empty denominators give P = 1, R = 1 and
/// F1 = 0 when P + R = 0.
pub fn prf(c: AssignmentCounts) -> (f64, f64, f64) {
    let p = if c.tp + c.fp == 0 { 1.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
    let r = if c.tp + c.fn_ == 0 { 1.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

fn distances(tracks: &[Vector3<f64>], truths: &[Vector3<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(tracks.len(), truths.len(), |i, j| (tracks[i] - truths[j]).norm())
}

/// Gated maximum-cardinality matching of tracks to truths.
pub fn assignment_counts(tracks: &[Vector3<f64>], truths: &[Vector3<f64>], gate: f64) -> AssignmentCounts {
    let r = solve_assignment(&distances(tracks, truths), gate);
    AssignmentCounts {
        tp: r.matches.len(),
        fp: r.unmatched_rows.len(),
        fn_: r.unmatched_cols.len(),
    }
}

pub fn assignment_metrics(tracks: &[Vector3<f64>], truths: &[Vector3<f64>], gate: f64) -> (f64, f64, f64) {
    prf(assignment_counts(tracks, truths, gate))
}

/// Which tracks have a gated truth partner.
pub fn positive_assignments(tracks: &[Vector3<f64>], truths: &[Vector3<f64>], gate: f64) -> Vec<bool> {
    let r = solve_assignment(&distances(tracks, truths), gate);
    let mut out = vec![false; tracks.len()];
    for (i, _, _) in r.matches {
        out[i] = true;
    }
    out
}

pub fn ospa(tracks: &[Vector3<f64>], truths: &[Vector3<f64>], c: f64, p: f64, variant: OspaVariant) -> Result<f64> {
    if !(c > 0.0) || !(p >= 1.0) {
        return Err(Error::Domain(format!("ospa needs c > 0 and p >= 1, got c={c}, p={p}")));
    }
    let n = tracks.len().min(truths.len());
    let m = tracks.len().max(truths.len());
    if m == 0 {
        return Ok(0.0);
    }
    let d = distances(tracks, truths);
    match variant {
        OspaVariant::Standard => {
            let cost = d.map(|x| x.min(c).powf(p));
            let r = min_cost_assignment(&cost, f64::INFINITY);
            let sum = r.total_cost() + c.powf(p) * (m - n) as f64;
            Ok((sum / m as f64).powf(1.0 / p))
        }
        OspaVariant::Paper => {
            let card = c.powf(p) * (m - n) as f64;
            if n == 0 {
                return Ok(card);
            }
            let gated = d.map(|x| if x < c { x } else { f64::INFINITY });
            let r = min_cost_assignment(&gated, f64::INFINITY);
            let unassigned = r.unmatched_rows.len().min(r.unmatched_cols.len());
            Ok((r.total_cost() + c * unassigned as f64).powf(p) / n as f64 + card)
        }
    }
}

/// Distance between an estimated trust and a binary target: the expected
/// trust for a false target, one minus it for a true one.
pub fn trust_distance(estimate: &BetaTrust, target_true: bool) -> f64 {
    if target_true {
        1.0 - estimate.mean()
    } else {
        estimate.mean()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrustAccuracy {
    /// `1 - mean distance`; `None` when nothing was labelled.
    pub accuracy: Option<f64>,
    pub evaluated: usize,
    /// Entities without an oracle label.
    pub excluded: usize,
}

pub fn trust_accuracy(entries: &[(BetaTrust, Option<bool>)]) -> TrustAccuracy {
    let mut sum = 0.0;
    let mut evaluated = 0;
    let mut excluded = 0;
    for (b, label) in entries {
        match label {
            Some(l) => {
                sum += trust_distance(b, *l);
                evaluated += 1;
            }
            None => excluded += 1,
        }
    }
    TrustAccuracy {
        accuracy: (evaluated > 0).then(|| 1.0 - sum / evaluated as f64),
        evaluated,
        excluded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub t: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ospa: f64,
    pub track_trust_accuracy: Option<f64>,
    pub agent_trust_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EpisodeSummary {
    pub frames: usize,
    pub window_start: f64,
    /// Means over frames in the closing window.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ospa: f64,
    /// Values at the final frame.
    pub track_trust_accuracy: Option<f64>,
    pub agent_trust_accuracy: Option<f64>,
    /// Mean expected trust benign agents hold in attacked neighbours at the
    /// final frame.
    pub attacked_agent_trust: Option<f64>,
    /// Benign fused tracks at the final frame that sit on an injected object.
    pub fake_tracks: usize,
    pub fake_tracks_flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricReport {
    pub frames: Vec<FrameMetrics>,
    pub summary: EpisodeSummary,
}

impl MetricReport {
    /// One row per frame.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,t,tp,fp,fn,precision,recall,f1,ospa,track_trust_accuracy,agent_trust_accuracy\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for f in &self.frames {
            s.push_str(&format!(
                "{},{:.3},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{}\n",
                f.frame,
                f.t,
                f.tp,
                f.fp,
                f.fn_,
                f.precision,
                f.recall,
                f.f1,
                f.ospa,
                opt(f.track_trust_accuracy),
                opt(f.agent_trust_accuracy)
            ));
        }
        s
    }
}

fn footprint_of(a: &crate::sim::AgentFrame) -> FovFootprint {
    a.footprint.to_footprint()
}

/// Streaming evaluator over the benign agents of one episode.
#[derive(Debug, Clone)]
pub struct Evaluator {
    cfg: MetricsConfig,
    duration: f64,
    frames: Vec<FrameMetrics>,
    last: Option<FrameLog>,
}

impl Evaluator {
    pub fn new(cfg: &MetricsConfig, duration: f64) -> Self {
        Evaluator {
            cfg: cfg.clone(),
            duration,
            frames: Vec::new(),
            last: None,
        }
    }

    pub fn push(&mut self, log: &FrameLog) -> Result<&FrameMetrics> {
        let m = self.evaluate(log)?;
        self.frames.push(m);
        self.last = Some(log.clone());
        Ok(self.frames.last().expect("just pushed"))
    }

    fn neighbours(log: &FrameLog) -> BTreeMap<u32, BTreeSet<u32>> {
        let mut out: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for &(a, b) in &log.edges {
            out.entry(a).or_default().insert(b);
            out.entry(b).or_default().insert(a);
        }
        out
    }

    fn evaluate(&self, log: &FrameLog) -> Result<FrameMetrics> {
        let cfg = &self.cfg;
        let nbrs = Self::neighbours(log);
        let by_id: BTreeMap<u32, &crate::sim::AgentFrame> = log.agents.iter().map(|a| (a.agent, a)).collect();
        let truths: Vec<Vector3<f64>> = log.truths.iter().map(|t| Vector3::from(t.position)).collect();
        let mut counts = AssignmentCounts::default();
        let mut ospa_sum = 0.0;
        let mut egos = 0usize;
        let mut track_entries = Vec::new();
        let mut agent_entries = Vec::new();
        for ego in log.agents.iter().filter(|a| !a.attacked) {
            egos += 1;
            let empty = BTreeSet::new();
            let my_nbrs = nbrs.get(&ego.agent).unwrap_or(&empty);
            let region: Vec<FovFootprint> = std::iter::once(footprint_of(ego))
                .chain(my_nbrs.iter().filter_map(|n| by_id.get(n)).map(|a| footprint_of(a)))
                .collect();
            let visible: Vec<Vector3<f64>> = truths
                .iter()
                .filter(|p| region.iter().any(|f| f.contains(Vector2::new(p.x, p.y))))
                .copied()
                .collect();
            let reported: Vec<Vector3<f64>> = ego.fused.iter().filter(|f| !f.flagged).map(|f| Vector3::from(f.position)).collect();
            counts += assignment_counts(&reported, &visible, cfg.gate);
            ospa_sum += ospa(&reported, &visible, cfg.ospa_c, cfg.ospa_p, cfg.ospa_variant)?;

            let all: Vec<Vector3<f64>> = ego.fused.iter().map(|f| Vector3::from(f.position)).collect();
            let labels = positive_assignments(&all, &truths, cfg.gate);
            for (f, label) in ego.fused.iter().zip(labels) {
                if let Some([a, b]) = f.trust {
                    track_entries.push((BetaTrust { alpha: a, beta: b }, Some(label)));
                }
            }
            if let Some(snap) = &ego.trust {
                for n in my_nbrs {
                    if let (Some([a, b]), Some(other)) = (snap.agents.get(n), by_id.get(n)) {
                        agent_entries.push((BetaTrust { alpha: *a, beta: *b }, Some(!other.attacked)));
                    }
                }
            }
        }
        let (precision, recall, f1) = prf(counts);
        Ok(FrameMetrics {
            frame: log.frame,
            t: log.t,
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            precision,
            recall,
            f1,
            ospa: if egos == 0 { 0.0 } else { ospa_sum / egos as f64 },
            track_trust_accuracy: trust_accuracy(&track_entries).accuracy,
            agent_trust_accuracy: trust_accuracy(&agent_entries).accuracy,
        })
    }

    pub fn finish(self) -> MetricReport {
        let window_start = (self.duration - self.cfg.window).max(0.0);
        let in_window: Vec<&FrameMetrics> = self.frames.iter().filter(|f| f.t >= window_start - 1e-9).collect();
        let mean = |g: &dyn Fn(&FrameMetrics) -> f64| {
            if in_window.is_empty() {
                0.0
            } else {
                in_window.iter().map(|f| g(f)).sum::<f64>() / in_window.len() as f64
            }
        };
        let mut summary = EpisodeSummary {
            frames: self.frames.len(),
            window_start,
            precision: mean(&|f| f.precision),
            recall: mean(&|f| f.recall),
            f1: mean(&|f| f.f1),
            ospa: mean(&|f| f.ospa),
            track_trust_accuracy: self.frames.last().and_then(|f| f.track_trust_accuracy),
            agent_trust_accuracy: self.frames.last().and_then(|f| f.agent_trust_accuracy),
            ..Default::default()
        };
        if let Some(log) = &self.last {
            let nbrs = Self::neighbours(log);
            let attacked: BTreeSet<u32> = log.agents.iter().filter(|a| a.attacked).map(|a| a.agent).collect();
            let fakes: Vec<Vector3<f64>> = log.fakes.iter().map(|p| Vector3::from(*p)).collect();
            let mut trust_sum = 0.0;
            let mut trust_n = 0usize;
            for ego in log.agents.iter().filter(|a| !a.attacked) {
                if let Some(snap) = &ego.trust {
                    for n in nbrs.get(&ego.agent).into_iter().flatten().filter(|n| attacked.contains(n)) {
                        if let Some([a, b]) = snap.agents.get(n) {
                            trust_sum += a / (a + b);
                            trust_n += 1;
                        }
                    }
                }
                if !fakes.is_empty() {
                    let pos: Vec<Vector3<f64>> = ego.fused.iter().map(|f| Vector3::from(f.position)).collect();
                    let on_fake = positive_assignments(&pos, &fakes, self.cfg.gate);
                    for (f, hit) in ego.fused.iter().zip(on_fake) {
                        if hit {
                            summary.fake_tracks += 1;
                            summary.fake_tracks_flagged += f.flagged as usize;
                        }
                    }
                }
            }
            summary.attacked_agent_trust = (trust_n > 0).then(|| trust_sum / trust_n as f64);
        }
        MetricReport {
            frames: self.frames,
            summary,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Vector3<f64>> {
        v.iter().map(|&(x, y)| Vector3::new(x, y, 0.0)).collect()
    }

    #[test]
    fn prf_substitution() {
        let (p, r, f1) = prf(AssignmentCounts { tp: 8, fp: 2, fn_: 0 });
        assert!((p - 0.8).abs() < 1e-15);
        assert_eq!(r, 1.0);
        assert!((f1 - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(prf(AssignmentCounts::default()), (1.0, 1.0, 1.0));
        assert_eq!(prf(AssignmentCounts { tp: 0, fp: 3, fn_: 2 }), (0.0, 0.0, 0.0));
    }

    #[test]
    fn perfect_match() {
        let a = pts(&[(0.0, 0.0), (10.0, 5.0)]);
        assert_eq!(assignment_metrics(&a, &a, 2.0), (1.0, 1.0, 1.0));
        for v in [OspaVariant::Paper, OspaVariant::Standard] {
            assert_eq!(ospa(&a, &a, 10.0, 1.0, v).unwrap(), 0.0);
            assert_eq!(ospa(&[], &[], 10.0, 1.0, v).unwrap(), 0.0);
        }
    }

    #[test]
    fn ospa_cardinality_limits() {
        let truths = pts(&[(0.0, 0.0), (5.0, 5.0), (9.0, 1.0)]);
        assert!((ospa(&[], &truths, 10.0, 2.0, OspaVariant::Standard).unwrap() - 10.0).abs() < 1e-12);
        assert!((ospa(&[], &truths, 10.0, 1.0, OspaVariant::Paper).unwrap() - 30.0).abs() < 1e-12);
        // one track 3 m off, paper variant: (3 + 10*0)/1 + 10*2
        let tracks = pts(&[(3.0, 0.0)]);
        assert!((ospa(&tracks, &truths, 10.0, 1.0, OspaVariant::Paper).unwrap() - 23.0).abs() < 1e-12);
    }

    #[test]
    fn trust_distance_cases() {
        let u = BetaTrust::uniform();
        assert_eq!(trust_distance(&u, false), 0.5);
        let sure = BetaTrust { alpha: 1e6, beta: 1.0 };
        assert!(trust_distance(&sure, true) < 1e-5);
        let acc = trust_accuracy(&[(sure, Some(true)), (u, None)]);
        assert_eq!(acc.evaluated, 1);
        assert_eq!(acc.excluded, 1);
        assert!(acc.accuracy.unwrap() > 0.99999);
        assert_eq!(trust_accuracy(&[]).accuracy, None);
    }
}

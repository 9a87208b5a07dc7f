//! Template behavior-tree emission and plan comparison metrics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::demo::{Demonstration, EntityKind};
use crate::error::{Error, Result};
use crate::interaction::Relation;
use crate::scenegraph::GraphTimeline;
use crate::segmentation::{Primitive, Segment};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanNode {
    pub node: String,
    pub param: String,
    pub reason: String,
    pub verify: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorTree {
    #[serde(rename = "Task Planning")]
    pub task_planning: Vec<PlanNode>,
    #[serde(rename = "Final Analysis")]
    pub final_analysis: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtask {
    pub action: String,
    pub objects: BTreeSet<String>,
    pub hand_roles: BTreeMap<String, String>,
    pub order_index: usize,
}

impl Subtask {
    /// Canonical identity used for matching across plans.
    pub fn identity(&self) -> String {
        let objects: Vec<&str> = self.objects.iter().map(String::as_str).collect();
        let roles: Vec<String> = self.hand_roles.iter().map(|(h, o)| format!("{h}={o}")).collect();
        format!("{}|{}|{}", self.action, objects.join(","), roles.join(","))
    }
}

/// Parses `"left: a, right: b"` or `"left: a"` into hand roles.
pub fn parse_param(param: &str) -> BTreeMap<String, String> {
    param
        .split(',')
        .filter_map(|part| {
            let (hand, id) = part.split_once(':')?;
            Some((hand.trim().to_string(), id.trim().to_string()))
        })
        .filter(|(h, id)| !h.is_empty() && !id.is_empty())
        .collect()
}

impl BehaviorTree {
    pub fn subtasks(&self) -> Vec<Subtask> {
        self.task_planning
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let hand_roles = parse_param(&n.param);
                Subtask {
                    action: n.node.clone(),
                    objects: hand_roles.values().cloned().collect(),
                    hand_roles,
                    order_index: i,
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Checks a JSON value against the plan document layout: exactly the two
/// top-level keys, and nodes carrying exactly four string fields.
pub fn validate_plan_value(v: &serde_json::Value) -> std::result::Result<(), String> {
    let obj = v.as_object().ok_or("plan is not an object")?;
    let keys: BTreeSet<&str> = obj.keys().map(String::as_str).collect();
    if keys != BTreeSet::from(["Task Planning", "Final Analysis"]) {
        return Err(format!("unexpected top-level keys {keys:?}"));
    }
    if !obj["Final Analysis"].is_string() {
        return Err("\"Final Analysis\" is not a string".into());
    }
    let nodes = obj["Task Planning"].as_array().ok_or("\"Task Planning\" is not an array")?;
    for (i, n) in nodes.iter().enumerate() {
        let n = n.as_object().ok_or(format!("node {i} is not an object"))?;
        let keys: BTreeSet<&str> = n.keys().map(String::as_str).collect();
        if keys != BTreeSet::from(["node", "param", "reason", "verify"]) {
            return Err(format!("node {i} has keys {keys:?}"));
        }
        if let Some((k, _)) = n.iter().find(|(_, v)| !v.is_string()) {
            return Err(format!("node {i} field {k} is not a string"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Placement {
    side: &'static str,
    object: String,
    background: Option<String>,
    pick_t: f64,
    release_t: f64,
}

fn hand_side(demo: &Demonstration, hand: &str) -> &'static str {
    match demo.track(hand).map(|t| t.kind) {
        Some(EntityKind::HandRight) => "right",
        _ => "left",
    }
}

fn label_of(demo: &Demonstration, id: &str) -> String {
    demo.track(id).map_or_else(|| id.to_string(), |t| t.label.clone())
}

/// Background the object was EOO-related to during `[start, end)`, the most
/// frequent one if several.
fn eoo_background(timeline: &GraphTimeline, object: &str, start: f64, end: f64) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for g in timeline.graphs.iter().filter(|g| g.t >= start - 1e-9 && g.t < end - 1e-9) {
        for e in g.edges.iter().filter(|e| e.relation == Relation::Eoo && e.from == object) {
            *counts.entry(e.to.as_str()).or_default() += 1;
        }
    }
    let best = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
    Some(best.0.to_string())
}

fn placements(timeline: &GraphTimeline, segments: &[Segment], demo: &Demonstration) -> Vec<Placement> {
    let mut hands: Vec<&str> = segments.iter().map(|s| s.hand_id.as_str()).collect();
    hands.sort_unstable();
    hands.dedup();
    let mut out = Vec::new();
    for hand in hands {
        let segs: Vec<&Segment> = segments.iter().filter(|s| s.hand_id == hand).collect();
        for (i, s) in segs.iter().enumerate() {
            if s.primitive != Primitive::Place || !s.essential {
                continue;
            }
            let Some(object) = s.object_id.clone() else { continue };
            // walk back over the contiguous transport/place chain of the same object
            let mut first = i;
            while first > 0 {
                let p = segs[first - 1];
                if p.object_id.as_ref() == Some(&object) && matches!(p.primitive, Primitive::Transport | Primitive::Place) {
                    first -= 1;
                } else {
                    break;
                }
            }
            out.push(Placement {
                side: hand_side(demo, hand),
                background: eoo_background(timeline, &object, s.start_t, s.end_t),
                object,
                pick_t: segs[first].start_t,
                release_t: s.end_t,
            });
        }
    }
    out.sort_by(|a, b| a.pick_t.total_cmp(&b.pick_t).then(a.side.cmp(b.side)).then(a.object.cmp(&b.object)));
    out
}

/// Pairs left/right placements whose pick-to-release spans overlap.
fn group(placements: Vec<Placement>) -> Vec<Vec<Placement>> {
    let mut used = vec![false; placements.len()];
    let mut groups = Vec::new();
    for i in 0..placements.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let a = &placements[i];
        let partner = (i + 1..placements.len()).find(|&j| {
            let b = &placements[j];
            !used[j] && b.side != a.side && b.pick_t < a.release_t && a.pick_t < b.release_t
        });
        let mut g = vec![a.clone()];
        if let Some(j) = partner {
            used[j] = true;
            g.push(placements[j].clone());
            g.sort_by_key(|p| p.side);
        }
        groups.push(g);
    }
    groups
}

fn place_reason(demo: &Demonstration, p: &Placement) -> String {
    match &p.background {
        Some(b) => format!("{} relative to {}", label_of(demo, &p.object), label_of(demo, b)),
        None => label_of(demo, &p.object),
    }
}

fn near_clause(p: &Placement) -> String {
    match &p.background {
        Some(b) => format!("{} verified near {}", p.object, b),
        None => format!("{} verified at its target", p.object),
    }
}

/// Deterministic plan: one Pick and one Place node per placement group, in
/// order of pick time.
pub fn emit_plan(timeline: &GraphTimeline, segments: &[Segment], demo: &Demonstration, _cfg: &AnalysisConfig) -> BehaviorTree {
    let groups = group(placements(timeline, segments, demo));
    let mut nodes = Vec::new();
    for g in &groups {
        if let [l, r] = g.as_slice() {
            let param = format!("{}: {}, {}: {}", l.side, l.object, r.side, r.object);
            nodes.push(PlanNode {
                node: "PickObjDual".into(),
                param: param.clone(),
                reason: format!("Grasp {} and {} together.", label_of(demo, &l.object), label_of(demo, &r.object)),
                verify: format!("Grippers closed; {} and {} confirmed in hand.", l.object, r.object),
            });
            nodes.push(PlanNode {
                node: "PlaceObjDual".into(),
                param,
                reason: format!("Place {} and {} per demonstrated EOO.", place_reason(demo, l), place_reason(demo, r)),
                verify: format!("Pose of {} and {}; structure stable.", near_clause(l), near_clause(r)),
            });
        } else {
            let p = &g[0];
            let param = format!("{}: {}", p.side, p.object);
            nodes.push(PlanNode {
                node: "PickObj".into(),
                param: param.clone(),
                reason: format!("Grasp {} with the {} hand.", label_of(demo, &p.object), p.side),
                verify: format!("Gripper closed; {} confirmed in hand.", p.object),
            });
            nodes.push(PlanNode {
                node: "PlaceObj".into(),
                param,
                reason: format!("Place {} per demonstrated EOO.", place_reason(demo, p)),
                verify: format!("Pose of {}; structure stable.", near_clause(p)),
            });
        }
    }

    let placed: BTreeSet<&str> = groups.iter().flatten().map(|p| p.object.as_str()).collect();
    let handled: BTreeSet<&str> = segments
        .iter()
        .filter(|s| matches!(s.primitive, Primitive::Transport | Primitive::Place))
        .filter_map(|s| s.object_id.as_deref())
        .collect();
    let unplaced: Vec<&str> = handled.difference(&placed).copied().collect();
    let final_analysis = if nodes.is_empty() {
        "No essential placements detected; plan is empty.".to_string()
    } else if unplaced.is_empty() {
        format!("{} nodes from {} placement groups; all manipulated objects placed.", nodes.len(), groups.len())
    } else {
        format!("{} nodes from {} placement groups; unplaced: {}.", nodes.len(), groups.len(), unplaced.join(", "))
    };
    BehaviorTree { task_planning: nodes, final_analysis }
}

/// Identities with an occurrence suffix, so repeated subtasks match in order.
fn keyed(subtasks: &[Subtask]) -> Vec<(String, usize)> {
    let mut sorted: Vec<&Subtask> = subtasks.iter().collect();
    sorted.sort_by_key(|s| s.order_index);
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    sorted
        .into_iter()
        .map(|s| {
            let id = s.identity();
            let n = seen.entry(id.clone()).or_default();
            *n += 1;
            (format!("{id}#{n}"), s.order_index)
        })
        .collect()
}

pub fn plan_coverage(gt: &[Subtask], pred: &[Subtask]) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pred_keys: BTreeSet<String> = keyed(pred).into_iter().map(|(k, _)| k).collect();
    let hits = keyed(gt).iter().filter(|(k, _)| pred_keys.contains(k)).count();
    Ok(hits as f64 / gt.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub accuracy: f64,
    pub tau: f64,
    pub shared: usize,
}

/// Counts inversions by merge sort.
fn inversions(v: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = inversions(&mut v[..mid]) + inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            merged.push(v[i]);
            i += 1;
        } else {
            merged.push(v[j]);
            count += (mid - i) as u64;
            j += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..]);
    v.copy_from_slice(&merged);
    count
}

/// Normalized Kendall agreement over the subtasks both lists share.
pub fn ordering_report(gt: &[Subtask], pred: &[Subtask]) -> Result<OrderingReport> {
    let pred_rank: BTreeMap<String, usize> = keyed(pred).into_iter().collect();
    let mut gt_keys = keyed(gt);
    gt_keys.sort_by_key(|(_, idx)| *idx);
    let mut ranks: Vec<usize> = gt_keys.iter().filter_map(|(k, _)| pred_rank.get(k).copied()).collect();
    let n = ranks.len();
    if n < 2 {
        return Err(Error::InsufficientOverlap(n));
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let discordant = inversions(&mut ranks) as f64;
    let tau = (pairs - 2.0 * discordant) / pairs;
    Ok(OrderingReport { accuracy: (pairs - discordant) / pairs, tau, shared: n })
}

pub fn ordering_accuracy(gt: &[Subtask], pred: &[Subtask]) -> Result<f64> {
    ordering_report(gt, pred).map(|r| r.accuracy)
}

pub fn verification_correctness(gt_flags: &[bool], pred_flags: &[bool]) -> Result<f64> {
    if gt_flags.len() != pred_flags.len() {
        return Err(Error::LengthMismatch { left: gt_flags.len(), right: pred_flags.len() });
    }
    if gt_flags.is_empty() {
        return Err(Error::EmptyInput);
    }
    let agree = gt_flags.iter().zip(pred_flags).filter(|(a, b)| a == b).count();
    Ok(agree as f64 / gt_flags.len() as f64)
}

/// Grand mean over every rating of every trial.
pub fn likert_mean(ratings: &[Vec<f64>], scale_max: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for &r in ratings.iter().flatten() {
        if !(1.0..=scale_max).contains(&r) {
            return Err(Error::RatingOutOfRange { value: r, max: scale_max });
        }
        sum += r;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(action: &str, obj: &str, idx: usize) -> Subtask {
        Subtask {
            action: action.into(),
            objects: BTreeSet::from([obj.to_string()]),
            hand_roles: BTreeMap::from([("left".to_string(), obj.to_string())]),
            order_index: idx,
        }
    }

    fn seq(objs: &[&str]) -> Vec<Subtask> {
        objs.iter().enumerate().map(|(i, o)| st("PickObj", o, i)).collect()
    }

    #[test]
    fn param_round_trip() {
        let roles = parse_param("left: block_A, right: block_B");
        assert_eq!(roles["left"], "block_A");
        assert_eq!(roles["right"], "block_B");
        assert_eq!(parse_param("right: x").len(), 1);
    }

    #[test]
    fn coverage_cases() {
        let gt = seq(&["a", "b", "c", "d", "e"]);
        assert_eq!(plan_coverage(&gt, &gt).unwrap(), 1.0);
        assert_eq!(plan_coverage(&gt, &seq(&["a", "b", "c", "d"])).unwrap(), 0.8);
        assert_eq!(plan_coverage(&gt, &seq(&["x"])).unwrap(), 0.0);
        assert!(plan_coverage(&[], &gt).is_err());
    }

    #[test]
    fn ordering_cases() {
        let gt = seq(&["a", "b", "c", "d", "e"]);
        assert_eq!(ordering_accuracy(&gt, &gt).unwrap(), 1.0);
        assert_eq!(ordering_accuracy(&gt, &seq(&["e", "d", "c", "b", "a"])).unwrap(), 0.0);
        assert!((ordering_accuracy(&gt, &seq(&["b", "a", "c", "d", "e"])).unwrap() - 0.9).abs() < 1e-12);
        let r = ordering_report(&gt, &seq(&["c", "x", "a"])).unwrap();
        assert_eq!((r.shared, r.accuracy), (2, 0.0));
        assert!(matches!(ordering_accuracy(&gt, &seq(&["a"])), Err(Error::InsufficientOverlap(1))));
    }

    #[test]
    fn verification_and_likert() {
        assert_eq!(verification_correctness(&[true; 10], &[true; 10]).unwrap(), 1.0);
        let mut p = [true; 10];
        p[0] = false;
        p[1] = false;
        assert_eq!(verification_correctness(&[true; 10], &p).unwrap(), 0.8);
        assert_eq!(verification_correctness(&[true, false], &[false, true]).unwrap(), 0.0);
        assert!(verification_correctness(&[true], &[]).is_err());

        assert_eq!(likert_mean(&[vec![5.0, 5.0, 5.0]], 5.0).unwrap(), 5.0);
        assert!((likert_mean(&[vec![4.0, 5.0, 4.0]], 5.0).unwrap() - 13.0 / 3.0).abs() < 1e-12);
        assert!(likert_mean(&[], 5.0).is_err());
        assert!(likert_mean(&[vec![6.0]], 5.0).is_err());
    }

    #[test]
    fn schema_validation() {
        let tree = BehaviorTree {
            task_planning: vec![PlanNode { node: "PickObj".into(), param: "left: a".into(), reason: "r".into(), verify: "v".into() }],
            final_analysis: "ok".into(),
        };
        let v: serde_json::Value = serde_json::from_str(&tree.to_json()).unwrap();
        assert!(validate_plan_value(&v).is_ok());
        assert!(validate_plan_value(&serde_json::json!({"Task Planning": []})).is_err());
        assert!(validate_plan_value(&serde_json::json!({"Task Planning": [{"node": "x"}], "Final Analysis": ""})).is_err());
        assert_eq!(BehaviorTree::from_json(&tree.to_json()).unwrap(), tree);
    }
}

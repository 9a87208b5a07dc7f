//! Subtask segmentation of a graph timeline.
//!
//! Per hand, every frame gets a primitive from its interaction state:
//! coupled motion is `Transport`, coupled motion while an EOO holds and any
//! docked frame are `Place`, frames before a later interaction are `Reach`,
//! frames after the last one are `Retreat`. A hand with no interaction at all
//! is `Idle` throughout. TOO events are ignored entirely.

use serde::{Deserialize, Serialize};

use crate::interaction::{InteractionEvent, Relation};
use crate::scenegraph::GraphTimeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Primitive {
    Reach,
    Transport,
    Place,
    Retreat,
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_t: f64,
    pub end_t: f64,
    pub hand_id: String,
    pub primitive: Primitive,
    #[serde(default)]
    pub object_id: Option<String>,
    /// Part of a placement confirmed by an EOO relation.
    pub essential: bool,
}

#[derive(Clone, PartialEq)]
enum Label {
    Gap,
    Active { primitive: Primitive, object: String, eoo: bool },
}

fn frame_times(timeline: &GraphTimeline) -> (Vec<f64>, f64) {
    let times: Vec<f64> = timeline.graphs.iter().map(|g| g.t).collect();
    let dt = if times.len() >= 2 { times[1] - times[0] } else { 0.0 };
    (times, dt)
}

/// Segments every hand in `hands` over the timeline's frame grid.
pub fn segment(timeline: &GraphTimeline, events: &[InteractionEvent], hands: &[&str]) -> Vec<Segment> {
    let (times, dt) = frame_times(timeline);
    let mut out = Vec::new();
    if times.is_empty() {
        return out;
    }
    for &hand in hands {
        let ho: Vec<&InteractionEvent> =
            events.iter().filter(|e| e.hand == hand && e.kind.is_hand_object() && e.subject == hand).collect();
        let eoo: Vec<&InteractionEvent> =
            events.iter().filter(|e| e.hand == hand && e.kind == Relation::Eoo).collect();

        let labels: Vec<Label> = times
            .iter()
            .map(|&t| match ho.iter().find(|e| e.covers(t)) {
                None => Label::Gap,
                Some(e) => {
                    let eoo = eoo.iter().any(|o| o.subject == e.object && o.covers(t));
                    let primitive = match (e.kind, eoo) {
                        (Relation::CoupledMotion, false) => Primitive::Transport,
                        _ => Primitive::Place,
                    };
                    Label::Active { primitive, object: e.object.clone(), eoo }
                }
            })
            .collect();

        // maximal runs of equal (primitive, object)
        let mut runs: Vec<(usize, usize, Option<(Primitive, String)>, bool)> = Vec::new();
        for (k, label) in labels.iter().enumerate() {
            let key = match label {
                Label::Gap => None,
                Label::Active { primitive, object, .. } => Some((*primitive, object.clone())),
            };
            let eoo = matches!(label, Label::Active { eoo: true, .. });
            match runs.last_mut() {
                Some(run) if run.2 == key => {
                    run.1 = k + 1;
                    run.3 |= eoo;
                }
                _ => runs.push((k, k + 1, key, eoo)),
            }
        }

        if runs.iter().all(|r| r.2.is_none()) {
            out.push(Segment {
                start_t: times[0],
                end_t: times[times.len() - 1] + dt,
                hand_id: hand.to_string(),
                primitive: Primitive::Idle,
                object_id: None,
                essential: false,
            });
            continue;
        }

        // a transport/place chain is essential when any of its place runs saw an EOO
        let mut essential = vec![false; runs.len()];
        let mut i = 0;
        while i < runs.len() {
            let Some((_, obj)) = &runs[i].2 else {
                i += 1;
                continue;
            };
            let mut j = i;
            while j < runs.len() && runs[j].2.as_ref().is_some_and(|(_, o)| o == obj) {
                j += 1;
            }
            let confirmed = runs[i..j].iter().any(|r| r.3);
            essential[i..j].iter_mut().for_each(|e| *e = confirmed);
            i = j;
        }

        for (idx, (s, e, key, _)) in runs.iter().enumerate() {
            let (primitive, object) = match key {
                Some((p, o)) => (*p, Some(o.clone())),
                None => {
                    let next = runs[idx + 1..].iter().find_map(|r| r.2.as_ref());
                    let prev = runs[..idx].iter().rev().find_map(|r| r.2.as_ref());
                    match (next, prev) {
                        (Some((_, o)), _) => (Primitive::Reach, Some(o.clone())),
                        (None, Some((_, o))) => (Primitive::Retreat, Some(o.clone())),
                        (None, None) => (Primitive::Idle, None),
                    }
                }
            };
            let end = if *e < times.len() { times[*e] } else { times[times.len() - 1] + dt };
            out.push(Segment {
                start_t: times[*s],
                end_t: end,
                hand_id: hand.to_string(),
                primitive,
                object_id: object,
                essential: essential[idx] && key.is_some(),
            });
        }
    }
    out
}

/// Sorted, distinct segment boundaries, excluding the overall start and end.
pub fn boundaries(segments: &[Segment]) -> Vec<f64> {
    if segments.is_empty() {
        return Vec::new();
    }
    let first = segments.iter().map(|s| s.start_t).fold(f64::INFINITY, f64::min);
    let last = segments.iter().map(|s| s.end_t).fold(f64::NEG_INFINITY, f64::max);
    let mut all: Vec<f64> = segments.iter().flat_map(|s| [s.start_t, s.end_t]).collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for t in all {
        if (t - first).abs() < 1e-9 || (t - last).abs() < 1e-9 {
            continue;
        }
        if out.last().is_none_or(|&p| t - p > 1e-9) {
            out.push(t);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegraph::SceneGraph;

    fn timeline(frames: usize) -> GraphTimeline {
        GraphTimeline::from_graphs((0..frames).map(|k| SceneGraph::empty(k, k as f64 * 0.5)).collect())
    }

    fn ev(kind: Relation, subject: &str, object: &str, start: f64, end: f64) -> InteractionEvent {
        InteractionEvent { kind, hand: "h".into(), subject: subject.into(), object: object.into(), start, end, mean_mi: None }
    }

    #[test]
    fn idle_hand_is_one_segment() {
        let segs = segment(&timeline(10), &[], &["h", "g"]);
        assert_eq!(segs.len(), 2);
        assert!(segs.iter().all(|s| s.primitive == Primitive::Idle && s.start_t == 0.0 && s.end_t == 5.0));
        assert!(boundaries(&segs).is_empty());
    }

    #[test]
    fn pick_place_phases() {
        let events = vec![
            ev(Relation::CoupledMotion, "h", "a", 1.0, 3.0),
            ev(Relation::Eoo, "a", "b", 2.0, 4.0),
            ev(Relation::Docked, "h", "a", 3.0, 4.0),
        ];
        let segs = segment(&timeline(10), &events, &["h"]);
        let prims: Vec<_> = segs.iter().map(|s| (s.primitive, s.start_t, s.end_t, s.essential)).collect();
        assert_eq!(
            prims,
            [
                (Primitive::Reach, 0.0, 1.0, false),
                (Primitive::Transport, 1.0, 2.0, true),
                (Primitive::Place, 2.0, 4.0, true),
                (Primitive::Retreat, 4.0, 5.0, false),
            ]
        );
        assert_eq!(boundaries(&segs), vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn too_events_are_ignored() {
        let base = vec![ev(Relation::CoupledMotion, "h", "a", 1.0, 3.0), ev(Relation::Docked, "h", "a", 3.0, 4.0)];
        let mut with_too = base.clone();
        with_too.push(ev(Relation::Too, "a", "c", 1.5, 2.5));
        assert_eq!(segment(&timeline(10), &base, &["h"]), segment(&timeline(10), &with_too, &["h"]));
    }

    #[test]
    fn docked_without_eoo_is_not_essential() {
        let events = vec![ev(Relation::CoupledMotion, "h", "a", 1.0, 3.0), ev(Relation::Docked, "h", "a", 3.0, 4.0)];
        let segs = segment(&timeline(10), &events, &["h"]);
        assert!(segs.iter().all(|s| !s.essential));
    }
}

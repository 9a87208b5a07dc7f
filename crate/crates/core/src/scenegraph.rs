//! Per-frame directed scene graphs and the keyframed timeline.
//!
//! A graph only holds entities that take part in an interaction chain: a hand
//! with an active HO relation, its object, and that object's OO partner.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::demo::Demonstration;
use crate::interaction::{HOState, HoKind, InteractionEvent, OOState, OoKind, Relation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneNode {
    pub id: String,
    pub label: String,
    pub p: [f64; 3],
    pub theta: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEdge {
    pub from: String,
    pub to: String,
    pub relation: Relation,
    #[serde(default)]
    pub mi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub frame: usize,
    pub t: f64,
    pub nodes: Vec<SceneNode>,
    pub edges: Vec<SceneEdge>,
}

/// Node set and edge set with poses and annotations stripped.
pub type Topology = (BTreeSet<(String, String)>, BTreeSet<(String, String, Relation)>);

impl SceneGraph {
    pub fn empty(frame: usize, t: f64) -> Self {
        Self { frame, t, nodes: Vec::new(), edges: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    pub fn topology(&self) -> Topology {
        (
            self.nodes.iter().map(|n| (n.id.clone(), n.label.clone())).collect(),
            self.edges.iter().map(|e| (e.from.clone(), e.to.clone(), e.relation)).collect(),
        )
    }

    fn from_edges(frame: usize, demo: &Demonstration, mut edges: Vec<SceneEdge>) -> Self {
        let t = demo.tracks.first().and_then(|tr| tr.samples.get(frame)).map_or(0.0, |s| s.t);
        edges.sort_by(|a, b| (&a.from, &a.to, a.relation).cmp(&(&b.from, &b.to, b.relation)));
        edges.dedup_by(|a, b| a.from == b.from && a.to == b.to && a.relation == b.relation);
        let ids: BTreeSet<&str> = edges.iter().flat_map(|e| [e.from.as_str(), e.to.as_str()]).collect();
        let nodes = ids
            .into_iter()
            .filter_map(|id| {
                let track = demo.track(id)?;
                let s = track.samples.get(frame)?;
                Some(SceneNode { id: id.to_string(), label: track.label.clone(), p: s.p, theta: s.theta })
            })
            .collect();
        Self { frame, t, nodes, edges }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTimeline {
    pub graphs: Vec<SceneGraph>,
    pub keyframes: Vec<usize>,
}

impl GraphTimeline {
    /// Assembles a timeline, marking a keyframe wherever topology changes.
    pub fn from_graphs(graphs: Vec<SceneGraph>) -> Self {
        let mut keyframes = Vec::new();
        let mut prev: Option<Topology> = None;
        for g in &graphs {
            let topo = g.topology();
            let changed = match &prev {
                None => !g.is_empty(),
                Some(p) => *p != topo,
            };
            if changed {
                keyframes.push(g.frame);
            }
            prev = Some(topo);
        }
        Self { graphs, keyframes }
    }

    pub fn keyframe_graphs(&self) -> impl Iterator<Item = &SceneGraph> {
        self.keyframes.iter().filter_map(|&k| self.graphs.iter().find(|g| g.frame == k))
    }
}

fn ho_relation(state: HoKind) -> Option<Relation> {
    match state {
        HoKind::None => None,
        HoKind::CoupledMotion => Some(Relation::CoupledMotion),
        HoKind::Docked => Some(Relation::Docked),
    }
}

/// Graph for frame `k` from each hand's HO/OO state.
pub fn build_graph(k: usize, states: &[(&str, &HOState, &OOState)], demo: &Demonstration) -> SceneGraph {
    let mut edges = Vec::new();
    for &(hand, ho, oo) in states {
        let (Some(rel), Some(obj)) = (ho_relation(ho.state), ho.object_id.as_ref()) else { continue };
        edges.push(SceneEdge { from: hand.to_string(), to: obj.clone(), relation: rel, mi: Some(ho.mi) });
        let oo_rel = match oo.state {
            OoKind::None => None,
            OoKind::Eoo => Some(Relation::Eoo),
            OoKind::Too => Some(Relation::Too),
        };
        if let (Some(rel), Some(m), Some(b)) = (oo_rel, oo.manipulated_id.as_ref(), oo.background_id.as_ref()) {
            edges.push(SceneEdge { from: m.clone(), to: b.clone(), relation: rel, mi: None });
        }
    }
    SceneGraph::from_edges(k, demo, edges)
}

/// One graph per frame from an event list; HO edges carry the event's mean MI.
pub fn build_timeline(demo: &Demonstration, events: &[InteractionEvent]) -> GraphTimeline {
    let frames = demo.frame_count();
    let t0 = demo.start_time();
    let mut per_frame: BTreeMap<usize, Vec<SceneEdge>> = BTreeMap::new();
    for ev in events {
        let first = ((ev.start - t0) * demo.rate).round().max(0.0) as usize;
        let last = (((ev.end - t0) * demo.rate).round().max(0.0) as usize).min(frames);
        for k in first..last {
            per_frame.entry(k).or_default().push(SceneEdge {
                from: ev.subject.clone(),
                to: ev.object.clone(),
                relation: ev.kind,
                mi: ev.mean_mi,
            });
        }
    }
    let times = demo.times();
    let graphs = (0..frames)
        .map(|k| match per_frame.remove(&k) {
            Some(edges) => SceneGraph::from_edges(k, demo, edges),
            None => SceneGraph::empty(k, times[k]),
        })
        .collect();
    GraphTimeline::from_graphs(graphs)
}

/// Equal topology and identities, with every matched node within `pos_tol`.
pub fn graph_equal(g1: &SceneGraph, g2: &SceneGraph, pos_tol: f64) -> bool {
    if g1.topology() != g2.topology() {
        return false;
    }
    let positions: BTreeMap<&str, &[f64; 3]> = g2.nodes.iter().map(|n| (n.id.as_str(), &n.p)).collect();
    g1.nodes.iter().all(|n| {
        positions.get(n.id.as_str()).is_some_and(|p| {
            let d2: f64 = n.p.iter().zip(p.iter()).map(|(a, b)| (a - b).powi(2)).sum();
            d2.sqrt() < pos_tol
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{EntityKind, EntityTrack, PoseSample};

    fn demo() -> Demonstration {
        let mk = |id: &str, kind, x: f64| {
            EntityTrack::new(id, kind, format!("{id}_label"), (0..5).map(|k| PoseSample::new(k as f64, [x, 0.0, 0.0], [0.0; 3])).collect())
        };
        Demonstration::new(
            vec![mk("h_l", EntityKind::HandLeft, 0.0), mk("a", EntityKind::Object, 0.1), mk("b", EntityKind::Object, 0.2)],
            1.0,
            Default::default(),
        )
        .unwrap()
    }

    fn ho(state: HoKind, obj: &str) -> HOState {
        HOState { state, object_id: Some(obj.into()), mi: 0.3 }
    }

    #[test]
    fn idle_graph_is_empty() {
        let d = demo();
        let g = build_graph(0, &[("h_l", &HOState::none(), &OOState::none())], &d);
        assert!(g.is_empty());
    }

    #[test]
    fn reduced_and_full_chains() {
        let d = demo();
        let g = build_graph(1, &[("h_l", &ho(HoKind::CoupledMotion, "a"), &OOState::none())], &d);
        assert_eq!(g.nodes.iter().map(|n| n.id.as_str()).collect::<Vec<_>>(), ["a", "h_l"]);
        assert_eq!(g.edges.len(), 1);
        assert_eq!((g.edges[0].from.as_str(), g.edges[0].to.as_str()), ("h_l", "a"));

        let oo = OOState { state: OoKind::Eoo, manipulated_id: Some("a".into()), background_id: Some("b".into()) };
        let g = build_graph(1, &[("h_l", &ho(HoKind::Docked, "a"), &oo)], &d);
        assert_eq!(g.nodes.len(), 3);
        let rels: Vec<_> = g.edges.iter().map(|e| (e.from.as_str(), e.to.as_str(), e.relation, e.mi)).collect();
        assert_eq!(rels, [("a", "b", Relation::Eoo, None), ("h_l", "a", Relation::Docked, Some(0.3))]);
    }

    #[test]
    fn equality_rules() {
        let d = demo();
        let g = build_graph(1, &[("h_l", &ho(HoKind::CoupledMotion, "a"), &OOState::none())], &d);
        assert!(graph_equal(&g, &g, 0.02));
        let mut moved = g.clone();
        moved.nodes[0].p[0] += 0.03;
        assert!(!graph_equal(&g, &moved, 0.02));
        let mut relabeled = g.clone();
        relabeled.edges[0].relation = Relation::Docked;
        assert!(!graph_equal(&g, &relabeled, 0.02));
        let mut reordered = g.clone();
        reordered.nodes.reverse();
        assert!(graph_equal(&g, &reordered, 0.02));
    }

    #[test]
    fn timeline_keyframes() {
        let d = demo();
        let idle = build_timeline(&d, &[]);
        assert_eq!(idle.graphs.len(), 5);
        assert!(idle.keyframes.is_empty());

        let ev = |kind, s: &str, o: &str, start: f64, end: f64| InteractionEvent {
            kind,
            hand: "h_l".into(),
            subject: s.into(),
            object: o.into(),
            start,
            end,
            mean_mi: None,
        };
        let events = vec![
            ev(Relation::CoupledMotion, "h_l", "a", 1.0, 3.0),
            ev(Relation::Eoo, "a", "b", 2.0, 4.0),
            ev(Relation::Docked, "h_l", "a", 3.0, 4.0),
        ];
        let tl = build_timeline(&d, &events);
        assert_eq!(tl.keyframes, vec![1, 2, 3, 4]);
        assert!(tl.graphs[0].is_empty() && tl.graphs[4].is_empty());
        assert_eq!(tl.graphs[2].edges.len(), 2);
    }
}

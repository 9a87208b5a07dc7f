//! Seeded synthetic demonstrations with ground truth by construction.
//!
//! Every entity follows piecewise minimum-jerk segments between scripted
//! waypoints. A hand reaches its object, settles, carries it along a lifted
//! path to the place pose, dwells, then returns home. Noise is added to
//! positions only, from a per-entity stream keyed on `(seed, id)`, so adding
//! an entity never perturbs the others.
//!
//! The reference timeline is labeled from the noise-free trajectories with
//! window-aware kinematic predicates: coupled motion while the held object's
//! quantized position changes inside the window, docked while the hand stays
//! within reach afterwards, and EOO once the carried object is decelerating
//! toward its neighbors.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::AnalysisConfig;
use crate::demo::{distance_series, Demonstration, EntityKind, EntityTrack, PoseSample};
use crate::error::{Error, Result};
use crate::handselect::{Action, HandSelectState};
use crate::infotheory::{bin_index, covered_frames, window_means};
use crate::interaction::{HOState, HoKind, InteractionEvent, OOState, OoKind, Relation};
use crate::planner::Subtask;
use crate::scenegraph::{build_graph, GraphTimeline};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub id: String,
    pub kind: EntityKind,
    pub label: String,
    pub p: [f64; 3],
    #[serde(default)]
    pub theta: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptAction {
    pub hand_id: String,
    pub object_id: String,
    /// Lift-off time; the hand arrives `timing.settle` earlier.
    pub grasp_t: f64,
    /// Set-down time.
    pub place_t: f64,
    pub place_pose: [f64; 3],
    #[serde(default)]
    pub background_near: Option<String>,
    /// Circular motion superimposed on the transport, as in stirring.
    #[serde(default)]
    pub periodic: Option<Periodic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Periodic {
    pub period: f64,
    pub radius: f64,
}

/// Ramp length at both ends of a periodic phase (s).
const PERIODIC_RAMP: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timing {
    pub reach: f64,
    pub settle: f64,
    pub dwell: f64,
    pub retreat: f64,
    /// Peak height of the transport arc (m).
    pub lift: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Self { reach: 1.0, settle: 0.3, dwell: 0.6, retreat: 0.8, lift: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoScript {
    pub entities: Vec<EntitySpec>,
    pub actions: Vec<ScriptAction>,
    pub noise_sigma: f64,
    pub rate: f64,
    pub seed: u64,
    pub duration: f64,
    #[serde(default)]
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub events: Vec<InteractionEvent>,
    pub boundaries: Vec<f64>,
    pub timeline: GraphTimeline,
    pub subtasks: Vec<Subtask>,
    pub hand_choices: Vec<Action>,
    pub hand_states: Vec<HandSelectState>,
}

pub fn min_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

#[derive(Debug, Clone, Copy)]
struct Waypoint {
    t: f64,
    p: [f64; 3],
    /// The segment ending at this waypoint follows the transport arc.
    arc: bool,
    periodic: Option<Periodic>,
}

fn position_at(wps: &[Waypoint], t: f64, lift: f64) -> [f64; 3] {
    let first = wps[0];
    if t <= first.t {
        return first.p;
    }
    for w in wps.windows(2) {
        let (a, b) = (w[0], w[1]);
        if t <= b.t {
            let span = b.t - a.t;
            let tau = if span > 0.0 { (t - a.t) / span } else { 1.0 };
            let s = min_jerk(tau);
            let mut p = [0.0; 3];
            for i in 0..3 {
                p[i] = a.p[i] + s * (b.p[i] - a.p[i]);
            }
            if b.arc {
                p[2] += lift * 16.0 * s * s * (1.0 - s) * (1.0 - s);
            }
            if let Some(c) = b.periodic {
                let ramp = PERIODIC_RAMP.min(span / 2.0);
                let env = min_jerk((t - a.t) / ramp).min(min_jerk((b.t - t) / ramp));
                let phase = std::f64::consts::TAU * (t - a.t) / c.period;
                p[0] += env * c.radius * phase.sin();
                p[1] += env * c.radius * (1.0 - phase.cos());
            }
            return p;
        }
    }
    wps[wps.len() - 1].p
}

fn push(wps: &mut Vec<Waypoint>, t: f64, p: [f64; 3], arc: bool) {
    wps.push(Waypoint { t, p, arc, periodic: None });
}

/// Time span during which `action` occupies its hand.
fn hand_span(a: &ScriptAction, timing: &Timing) -> (f64, f64) {
    (a.grasp_t - timing.settle - timing.reach, a.place_t + timing.dwell + timing.retreat)
}

impl DemoScript {
    pub fn entity(&self, id: &str) -> Option<&EntitySpec> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidScript(m));
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return invalid(format!("rate must be positive, got {}", self.rate));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return invalid(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return invalid(format!("duration must be positive, got {}", self.duration));
        }
        let t = &self.timing;
        if [t.reach, t.settle, t.dwell, t.retreat].iter().any(|v| !(*v >= 0.0)) || t.reach <= 0.0 || t.retreat <= 0.0 {
            return invalid("timing phases must be non-negative, reach and retreat positive".into());
        }
        let mut ids = BTreeSet::new();
        for e in &self.entities {
            if !ids.insert(e.id.as_str()) {
                return invalid(format!("duplicate entity '{}'", e.id));
            }
        }
        for kind in [EntityKind::HandLeft, EntityKind::HandRight] {
            if self.entities.iter().filter(|e| e.kind == kind).count() > 1 {
                return Err(Error::DuplicateHand(kind.as_str().to_string()));
            }
        }
        for a in &self.actions {
            match self.entity(&a.hand_id) {
                Some(e) if e.kind.is_hand() => {}
                Some(_) => return invalid(format!("'{}' is not a hand", a.hand_id)),
                None => return Err(Error::UnknownEntity(a.hand_id.clone())),
            }
            match self.entity(&a.object_id) {
                Some(e) if !e.kind.is_hand() => {}
                Some(_) => return invalid(format!("'{}' is not an object", a.object_id)),
                None => return Err(Error::UnknownEntity(a.object_id.clone())),
            }
            if a.periodic.is_some_and(|c| !(c.period > 0.0 && c.radius >= 0.0)) {
                return invalid(format!("periodic motion on '{}' needs a positive period", a.object_id));
            }
            if let Some(bg) = &a.background_near {
                if self.entity(bg).is_none_or(|e| e.kind.is_hand()) {
                    return Err(Error::UnknownEntity(bg.clone()));
                }
            }
            if !(a.grasp_t < a.place_t) {
                return invalid(format!("grasp_t {} is not before place_t {}", a.grasp_t, a.place_t));
            }
            let (s, e) = hand_span(a, &self.timing);
            if s < 0.0 || e > self.duration {
                return invalid(format!("action on '{}' spans [{s}, {e}] outside [0, {}]", a.object_id, self.duration));
            }
        }
        let mut by_hand: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        let mut by_object: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for a in &self.actions {
            by_hand.entry(&a.hand_id).or_default().push(hand_span(a, &self.timing));
            by_object.entry(&a.object_id).or_default().push((a.grasp_t, a.place_t + self.timing.dwell));
        }
        for (id, spans) in by_hand.iter_mut().chain(by_object.iter_mut()) {
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            if spans.windows(2).any(|w| w[1].0 < w[0].1) {
                return Err(Error::OverlappingActions(id.to_string()));
            }
        }
        Ok(())
    }

    fn frames(&self) -> usize {
        (self.duration * self.rate).round() as usize + 1
    }

    fn sorted_actions(&self) -> Vec<&ScriptAction> {
        let mut acts: Vec<&ScriptAction> = self.actions.iter().collect();
        acts.sort_by(|a, b| a.grasp_t.total_cmp(&b.grasp_t).then(a.hand_id.cmp(&b.hand_id)));
        acts
    }

    /// Noise-free waypoint lists per entity.
    fn waypoints(&self) -> BTreeMap<String, Vec<Waypoint>> {
        let timing = &self.timing;
        let mut object_pos: BTreeMap<&str, [f64; 3]> =
            self.entities.iter().filter(|e| !e.kind.is_hand()).map(|e| (e.id.as_str(), e.p)).collect();
        let mut out: BTreeMap<String, Vec<Waypoint>> = BTreeMap::new();
        for e in &self.entities {
            out.insert(e.id.clone(), vec![Waypoint { t: 0.0, p: e.p, arc: false, periodic: None }]);
        }
        for a in self.sorted_actions() {
            let home = self.entity(&a.hand_id).expect("validated").p;
            let from = object_pos[a.object_id.as_str()];
            let hand = out.get_mut(&a.hand_id).expect("validated");
            let (start, _) = hand_span(a, timing);
            push(hand, start, home, false);
            push(hand, a.grasp_t - timing.settle, from, false);
            push(hand, a.grasp_t, from, false);
            push(hand, a.place_t, a.place_pose, a.periodic.is_none());
            hand.last_mut().expect("pushed").periodic = a.periodic;
            push(hand, a.place_t + timing.dwell, a.place_pose, false);
            push(hand, a.place_t + timing.dwell + timing.retreat, home, false);

            let obj = out.get_mut(&a.object_id).expect("validated");
            push(obj, a.grasp_t, from, false);
            push(obj, a.place_t, a.place_pose, a.periodic.is_none());
            obj.last_mut().expect("pushed").periodic = a.periodic;
            object_pos.insert(&a.object_id, a.place_pose);
        }
        out
    }
}

/// 32-byte stream seed derived from the run seed and a tag.
pub fn derive_seed(seed: u64, tag: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.finalize().into()
}

fn build_tracks(script: &DemoScript, noisy: bool) -> Vec<EntityTrack> {
    let wps = script.waypoints();
    let n = script.frames();
    let lift = script.timing.lift;
    script
        .entities
        .iter()
        .map(|e| {
            let path = &wps[&e.id];
            let mut rng = ChaCha8Rng::from_seed(derive_seed(script.seed, &e.id));
            let noise = (noisy && script.noise_sigma > 0.0)
                .then(|| Normal::new(0.0, script.noise_sigma).expect("sigma validated"));
            let samples = (0..n)
                .map(|k| {
                    let t = k as f64 / script.rate;
                    let mut p = position_at(path, t, lift);
                    if let Some(dist) = &noise {
                        for v in &mut p {
                            *v += dist.sample(&mut rng);
                        }
                    }
                    PoseSample::new(t, p, e.theta)
                })
                .collect();
            EntityTrack::new(e.id.clone(), e.kind, e.label.clone(), samples)
        })
        .collect()
}

fn script_meta(script: &DemoScript) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("generator".to_string(), "synthgen".to_string()),
        ("profile".to_string(), "minimum-jerk".to_string()),
        ("seed".to_string(), script.seed.to_string()),
        ("noise_sigma".to_string(), script.noise_sigma.to_string()),
    ])
}

/// Generates with the default analysis thresholds.
pub fn generate(script: &DemoScript) -> Result<(Demonstration, GroundTruth)> {
    generate_with(script, &AnalysisConfig::default())
}

/// Generates a demonstration and ground truth labeled for `cfg`'s window and
/// distance thresholds.
pub fn generate_with(script: &DemoScript, cfg: &AnalysisConfig) -> Result<(Demonstration, GroundTruth)> {
    script.validate()?;
    cfg.validate()?;
    let meta = script_meta(script);
    let clean = Demonstration::new(build_tracks(script, false), script.rate, meta.clone())?;
    let noisy = if script.noise_sigma > 0.0 {
        Demonstration::new(build_tracks(script, true), script.rate, meta)?
    } else {
        clean.clone()
    };
    let truth = ground_truth(script, &clean, cfg);
    Ok((noisy, truth))
}

fn bins_vary(track: &EntityTrack, w: std::ops::RangeInclusive<usize>, cfg: &AnalysisConfig) -> bool {
    cfg.axes().iter().any(|&axis| {
        let mut it = track.samples[w.clone()].iter().map(|s| bin_index(s.p[axis.index()], cfg.bin_width));
        let first = it.next();
        it.any(|b| Some(b) != first)
    })
}

fn nearest_in_range(
    candidates: impl Iterator<Item = (f64, String)>,
    limit: f64,
) -> Vec<(f64, String)> {
    let mut v: Vec<(f64, String)> = candidates.filter(|(r, _)| *r < limit).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    v
}

fn ground_truth(script: &DemoScript, clean: &Demonstration, cfg: &AnalysisConfig) -> GroundTruth {
    let n = clean.frame_count();
    let times = clean.times();
    let dt = 1.0 / script.rate;
    let half = cfg.half_window(script.rate);
    let covered = covered_frames(n, half);
    let objects: Vec<&EntityTrack> = clean.objects().collect();
    let hands: Vec<&EntityTrack> = clean.hands().collect();

    let mut pair_means: BTreeMap<(String, String), Vec<Option<f64>>> = BTreeMap::new();
    for a in hands.iter().chain(&objects) {
        for b in &objects {
            if a.id != b.id {
                pair_means.insert((a.id.clone(), b.id.clone()), window_means(&distance_series(a, b, cfg), half));
            }
        }
    }
    let rbar = |a: &str, b: &str, k: usize| pair_means[&(a.to_string(), b.to_string())][k].unwrap_or(f64::INFINITY);
    let decel_lag = cfg.trend_n as f64 / (2.0 * script.rate);
    // a transport turns essential once it starts slowing down; a stir in
    // place is essential from the grasp on
    let eoo_onset = |a: &ScriptAction| {
        let base = if a.periodic.is_some() { a.grasp_t } else { 0.5 * (a.grasp_t + a.place_t) };
        base + decel_lag
    };

    // per-hand reference states
    let mut states: Vec<(String, Vec<HOState>, Vec<OOState>)> = Vec::new();
    for hand in &hands {
        let actions: Vec<&ScriptAction> = script.actions.iter().filter(|a| a.hand_id == hand.id).collect();
        let mut ho_states = vec![HOState::none(); n];
        let mut oo_states = vec![OOState::none(); n];
        let mut prev_ho = HOState::none();
        let mut prev_oo = OOState::none();
        for k in covered.clone() {
            let w = k - half..=k + half;
            let (w_start, w_end) = (times[k - half], times[k + half]);
            let holding = |obj: &str| {
                actions
                    .iter()
                    .find(|a| a.object_id == obj && a.grasp_t <= w_end + 1e-9 && a.place_t >= w_start - 1e-9)
                    .copied()
            };
            let candidates = nearest_in_range(objects.iter().map(|o| (rbar(&hand.id, &o.id, k), o.id.clone())), cfg.ho_dist);
            let mut ho = HOState::none();
            let mut current: Option<&ScriptAction> = None;
            for (_, obj) in &candidates {
                let track = clean.track(obj).expect("object track");
                if let Some(a) = holding(obj).filter(|_| bins_vary(track, w.clone(), cfg)) {
                    ho = HOState { state: HoKind::CoupledMotion, object_id: Some(obj.clone()), mi: 0.0 };
                    current = Some(a);
                    break;
                }
                if prev_ho.is_active() && prev_ho.object_id.as_deref() == Some(obj) {
                    ho = HOState { state: HoKind::Docked, object_id: Some(obj.clone()), mi: 0.0 };
                    break;
                }
            }

            let mut oo = OOState::none();
            if let Some(m) = ho.object_id.clone().filter(|_| ho.is_active()) {
                let bgs = nearest_in_range(
                    objects.iter().filter(|o| o.id != m).map(|o| (rbar(&m, &o.id, k), o.id.clone())),
                    cfg.oo_dist,
                );
                let sticky = (prev_oo.state == OoKind::Eoo && prev_oo.manipulated_id.as_deref() == Some(m.as_str()))
                    .then(|| bgs.iter().find(|(_, b)| prev_oo.background_id.as_deref() == Some(b.as_str())))
                    .flatten();
                if let Some((_, b)) = sticky {
                    oo = OOState { state: OoKind::Eoo, manipulated_id: Some(m.clone()), background_id: Some(b.clone()) };
                } else if let Some((_, b)) = bgs.first() {
                    let eoo = match (ho.state, current) {
                        (HoKind::Docked, _) => true,
                        (_, Some(a)) => times[k] >= eoo_onset(a),
                        _ => false,
                    };
                    let state = if eoo { OoKind::Eoo } else { OoKind::Too };
                    oo = OOState { state, manipulated_id: Some(m.clone()), background_id: Some(b.clone()) };
                }
            }
            ho_states[k] = ho.clone();
            oo_states[k] = oo.clone();
            prev_ho = ho;
            prev_oo = oo;
        }
        states.push((hand.id.clone(), ho_states, oo_states));
    }
    let graphs = (0..n)
        .map(|k| {
            let frame: Vec<(&str, &HOState, &OOState)> =
                states.iter().map(|(h, ho, oo)| (h.as_str(), &ho[k], &oo[k])).collect();
            let mut g = build_graph(k, &frame, clean);
            g.t = times[k];
            g
        })
        .collect();
    let timeline = GraphTimeline::from_graphs(graphs);

    // schedule-derived events and boundaries
    let wps = script.waypoints();
    let lift = script.timing.lift;
    let planar = |p: [f64; 3], q: [f64; 3]| crate::demo::planar_distance(&p, &q, cfg);
    let mut events = Vec::new();
    let mut boundaries = Vec::new();
    let mut placements = Vec::new();
    for a in script.sorted_actions() {
        let hand_path = &wps[&a.hand_id];
        let obj_path = &wps[&a.object_id];
        let t_release = a.place_t + script.timing.dwell;
        let mut exit_t = t_release + script.timing.retreat;
        let mut t = t_release;
        while t <= t_release + script.timing.retreat {
            if planar(position_at(hand_path, t, lift), a.place_pose) >= cfg.ho_dist {
                exit_t = t;
                break;
            }
            t += dt;
        }
        let near_at = |t: f64| {
            let p = position_at(obj_path, t, lift);
            let mut best: Option<(f64, &str)> = None;
            for o in &objects {
                if o.id == a.object_id {
                    continue;
                }
                let d = planar(p, position_at(&wps[&o.id], t, lift));
                if d < cfg.oo_dist && best.is_none_or(|(bd, bid)| (d, o.id.as_str()) < (bd, bid)) {
                    best = Some((d, o.id.as_str()));
                }
            }
            best.map(|(_, id)| id.to_string())
        };
        // whatever the reference timeline settled on at set-down wins over the
        // scripted hint, since the approach can pass closer to something else
        let settled = states.iter().find(|(h, _, _)| *h == a.hand_id).and_then(|(_, _, oo)| {
            let k = times.partition_point(|&x| x < a.place_t).min(n - 1);
            let s = &oo[k];
            (s.state == OoKind::Eoo && s.manipulated_id.as_deref() == Some(a.object_id.as_str()))
                .then(|| s.background_id.clone())
                .flatten()
        });
        let background = settled.or_else(|| a.background_near.clone()).or_else(|| near_at(a.place_t));
        let mut entry_t = a.place_t;
        let mut t = eoo_onset(a);
        while t < a.place_t {
            if near_at(t).is_some() {
                entry_t = t;
                break;
            }
            t += dt;
        }
        let ev = |kind, subject: &str, object: &str, start: f64, end: f64| InteractionEvent {
            kind,
            hand: a.hand_id.clone(),
            subject: subject.to_string(),
            object: object.to_string(),
            start,
            end,
            mean_mi: None,
        };
        events.push(ev(Relation::CoupledMotion, &a.hand_id, &a.object_id, a.grasp_t, a.place_t));
        events.push(ev(Relation::Docked, &a.hand_id, &a.object_id, a.place_t, exit_t));
        if let Some(bg) = &background {
            events.push(ev(Relation::Eoo, &a.object_id, bg, entry_t, exit_t));
        }
        boundaries.extend([a.grasp_t, entry_t, exit_t]);
        if background.is_some() {
            placements.push((a, exit_t));
        }
    }
    crate::interaction::sort_events(&mut events);
    boundaries.sort_by(f64::total_cmp);
    boundaries.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let side = |hand: &str| match script.entity(hand).map(|e| e.kind) {
        Some(EntityKind::HandRight) => "right",
        _ => "left",
    };
    // left/right placements overlapping in time form one dual group
    let mut used = vec![false; placements.len()];
    let mut subtasks = Vec::new();
    for i in 0..placements.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let (a, a_end) = placements[i];
        let mut group = vec![a];
        if let Some(j) = (i + 1..placements.len()).find(|&j| {
            let (b, b_end) = placements[j];
            !used[j] && side(&b.hand_id) != side(&a.hand_id) && b.grasp_t < a_end && a.grasp_t < b_end
        }) {
            used[j] = true;
            group.push(placements[j].0);
        }
        let roles: BTreeMap<String, String> =
            group.iter().map(|g| (side(&g.hand_id).to_string(), g.object_id.clone())).collect();
        let suffix = if group.len() == 2 { "Dual" } else { "" };
        for verb in ["Pick", "Place"] {
            subtasks.push(Subtask {
                action: format!("{verb}Obj{suffix}"),
                objects: roles.values().cloned().collect(),
                hand_roles: roles.clone(),
                order_index: subtasks.len(),
            });
        }
    }

    let home = |kind| script.entities.iter().find(|e| e.kind == kind).map(|e| e.p);
    let (left_home, right_home) = (home(EntityKind::HandLeft), home(EntityKind::HandRight));
    let mut hand_choices = Vec::new();
    let mut hand_states = Vec::new();
    for a in script.sorted_actions() {
        hand_choices.push(if side(&a.hand_id) == "right" { Action::UseRightHand } else { Action::UseLeftHand });
        if let (Some(l), Some(r)) = (left_home, right_home) {
            let src = position_at(&wps[&a.object_id], a.grasp_t, lift);
            hand_states.push(HandSelectState {
                d_left_source: planar(l, src),
                d_left_target: planar(l, a.place_pose),
                d_right_source: planar(r, src),
                d_right_target: planar(r, a.place_pose),
            });
        }
    }

    GroundTruth { events, boundaries, timeline, subtasks, hand_choices, hand_states }
}

/// Seeded variant of `template`: start poses, place poses and action times
/// jittered, with a fresh noise seed.
pub fn jitter(template: &DemoScript, seed: u64, index: usize) -> DemoScript {
    let mut rng = ChaCha8Rng::from_seed(derive_seed(seed, &format!("corpus/{index}")));
    let mut s = template.clone();
    s.seed = rng.random();
    for e in &mut s.entities {
        let amp = if e.kind.is_hand() { 0.01 } else { 0.02 };
        e.p[0] += rng.random_range(-amp..=amp);
        e.p[1] += rng.random_range(-amp..=amp);
    }
    for a in &mut s.actions {
        let shift = rng.random_range(-0.15..=0.15);
        a.grasp_t += shift;
        a.place_t += shift + rng.random_range(-0.1..=0.1);
        a.place_pose[0] += rng.random_range(-0.015..=0.015);
        a.place_pose[1] += rng.random_range(-0.015..=0.015);
    }
    s
}

/// `n` jittered variants of `template`, generated in parallel.
pub fn corpus(n: usize, template: &DemoScript, seed: u64) -> Result<Vec<(Demonstration, GroundTruth)>> {
    corpus_with(n, template, seed, &AnalysisConfig::default())
}

pub fn corpus_with(
    n: usize,
    template: &DemoScript,
    seed: u64,
    cfg: &AnalysisConfig,
) -> Result<Vec<(Demonstration, GroundTruth)>> {
    if n == 0 {
        return Err(Error::InvalidScript("corpus size must be at least 1".into()));
    }
    if n == 1 {
        return Ok(vec![generate_with(template, cfg)?]);
    }
    (0..n).into_par_iter().map(|i| generate_with(&jitter(template, seed, i), cfg)).collect()
}

/// Stock scripts.
pub mod templates {
    use super::*;

    fn entity(id: &str, kind: EntityKind, label: &str, x: f64, y: f64, z: f64) -> EntitySpec {
        EntitySpec { id: id.into(), kind, label: label.into(), p: [x, y, z], theta: [0.0; 3] }
    }

    fn hands() -> Vec<EntitySpec> {
        vec![
            entity("hand_left", EntityKind::HandLeft, "left hand", -0.35, -0.10, 0.10),
            entity("hand_right", EntityKind::HandRight, "right hand", 0.35, -0.10, 0.10),
        ]
    }

    fn action(hand: &str, object: &str, grasp_t: f64, place_t: f64, x: f64, y: f64, bg: Option<&str>) -> ScriptAction {
        ScriptAction {
            hand_id: hand.into(),
            object_id: object.into(),
            grasp_t,
            place_t,
            place_pose: [x, y, 0.02],
            background_near: bg.map(String::from),
            periodic: None,
        }
    }

    /// One block carried by the right hand onto a tray; the left hand rests.
    pub fn single_pick_place() -> DemoScript {
        let mut entities = hands();
        entities.push(entity("block_a", EntityKind::Object, "red block", 0.35, 0.35, 0.02));
        entities.push(entity("tray", EntityKind::Object, "tray", -0.17, 0.35, 0.01));
        DemoScript {
            entities,
            actions: vec![action("hand_right", "block_a", 2.0, 4.0, -0.05, 0.35, Some("tray"))],
            noise_sigma: 0.002,
            rate: 30.0,
            seed: 0,
            duration: 7.0,
            timing: Timing::default(),
        }
    }

    /// Adds a stationary distractor beside the early part of the first
    /// transport path, on the side away from the hands. It is just out of
    /// proximity range at the pick, and the carried object sweeps past it
    /// while still speeding up.
    pub fn with_flyby(script: &DemoScript) -> DemoScript {
        let mut s = script.clone();
        if let Some(a) = s.actions.first() {
            let from = s.entity(&a.object_id).map_or([0.0; 3], |e| e.p);
            let to = a.place_pose;
            let (dx, dy) = (to[0] - from[0], to[1] - from[1]);
            let len = dx.hypot(dy).max(1e-9);
            let (ux, uy) = (dx / len, dy / len);
            let (nx, ny) = if ux >= 0.0 { (-uy, ux) } else { (uy, -ux) };
            let along = 0.12;
            let side = 0.17;
            s.entities.push(entity(
                "distractor",
                EntityKind::Object,
                "mug",
                from[0] + along * ux + side * nx,
                from[1] + along * uy + side * ny,
                0.04,
            ));
        }
        s
    }

    /// A single block moved between two free spots with nothing nearby.
    pub fn relocation() -> DemoScript {
        let mut entities = hands();
        entities.push(entity("block_a", EntityKind::Object, "red block", 0.30, 0.35, 0.02));
        DemoScript {
            entities,
            actions: vec![action("hand_right", "block_a", 2.0, 4.0, -0.10, 0.35, None)],
            noise_sigma: 0.002,
            rate: 30.0,
            seed: 0,
            duration: 7.0,
            timing: Timing::default(),
        }
    }

    /// A spoon stirred in place inside a pot for four seconds.
    pub fn stirring() -> DemoScript {
        let mut entities = hands();
        entities.push(entity("spoon", EntityKind::Object, "spoon", 0.20, 0.35, 0.05));
        entities.push(entity("pot", EntityKind::Object, "pot", 0.20, 0.40, 0.0));
        let mut stir = action("hand_right", "spoon", 2.0, 6.0, 0.20, 0.35, Some("pot"));
        stir.place_pose[2] = 0.05;
        stir.periodic = Some(Periodic { period: 0.4, radius: 0.04 });
        DemoScript {
            entities,
            actions: vec![stir],
            noise_sigma: 0.002,
            rate: 30.0,
            seed: 0,
            duration: 9.0,
            timing: Timing::default(),
        }
    }

    /// Five blocks assembled into an R on a board. Hands are chosen
    /// contralateral to each target; the first two blocks go down together.
    pub fn letter_r() -> DemoScript {
        let mut entities = hands();
        entities.push(entity("board", EntityKind::Object, "board", 0.0, 0.35, 0.0));
        let sources = [
            ("block_1", "stem-bottom block", -0.22),
            ("block_2", "leg block", 0.22),
            ("block_3", "stem-top block", -0.44),
            ("block_4", "bowl block", 0.44),
            ("block_5", "waist block", 0.0),
        ];
        for (id, label, x) in sources {
            entities.push(entity(id, EntityKind::Object, label, x, 0.65, 0.02));
        }
        DemoScript {
            entities,
            actions: vec![
                action("hand_right", "block_1", 2.0, 4.0, -0.06, 0.28, Some("board")),
                action("hand_left", "block_2", 2.0, 4.0, 0.06, 0.28, Some("board")),
                action("hand_right", "block_3", 7.5, 9.5, -0.06, 0.42, Some("board")),
                action("hand_left", "block_4", 12.0, 14.0, 0.05, 0.43, Some("board")),
                action("hand_left", "block_5", 18.0, 20.0, 0.03, 0.35, Some("board")),
            ],
            noise_sigma: 0.002,
            rate: 30.0,
            seed: 0,
            duration: 23.0,
            timing: Timing::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_jerk_endpoints() {
        assert_eq!(min_jerk(0.0), 0.0);
        assert_eq!(min_jerk(1.0), 1.0);
        assert!((min_jerk(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_script_is_stationary() {
        let mut s = templates::single_pick_place();
        s.actions.clear();
        s.noise_sigma = 0.0;
        let (demo, gt) = generate(&s).unwrap();
        assert!(gt.events.is_empty() && gt.boundaries.is_empty() && gt.subtasks.is_empty());
        for tr in &demo.tracks {
            assert!(tr.samples.iter().all(|p| p.p == tr.samples[0].p));
        }
    }

    #[test]
    fn coincident_transport_without_noise() {
        let mut s = templates::single_pick_place();
        s.noise_sigma = 0.0;
        let (demo, gt) = generate(&s).unwrap();
        let hand = demo.track("hand_right").unwrap();
        let obj = demo.track("block_a").unwrap();
        for (h, o) in hand.samples.iter().zip(&obj.samples) {
            if (2.0..=4.0).contains(&h.t) {
                assert_eq!(h.p, o.p);
            }
        }
        let cm = gt.events.iter().find(|e| e.kind == Relation::CoupledMotion).unwrap();
        assert_eq!((cm.start, cm.end), (2.0, 4.0));
        assert_eq!(gt.events.len(), 3);
        assert_eq!(gt.subtasks.len(), 2);
    }

    #[test]
    fn seeds_and_determinism() {
        let mut s = templates::single_pick_place();
        s.seed = 7;
        let a = generate(&s).unwrap().0.to_jsonl_string();
        let b = generate(&s).unwrap().0.to_jsonl_string();
        s.seed = 8;
        let c = generate(&s).unwrap().0.to_jsonl_string();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn flyby_leaves_other_noise_untouched() {
        let s = templates::single_pick_place();
        let (clean, _) = generate(&s).unwrap();
        let (fly, _) = generate(&templates::with_flyby(&s)).unwrap();
        for tr in &clean.tracks {
            assert_eq!(Some(tr), fly.track(&tr.id));
        }
    }

    #[test]
    fn script_errors() {
        let mut s = templates::letter_r();
        s.actions[2].grasp_t = 3.0;
        s.actions[2].place_t = 5.0;
        assert!(matches!(s.validate(), Err(Error::OverlappingActions(_))));
        let mut s = templates::single_pick_place();
        s.actions[0].object_id = "ghost".into();
        assert!(matches!(s.validate(), Err(Error::UnknownEntity(_))));
        let mut s = templates::single_pick_place();
        s.actions[0].place_t = 1.0;
        assert!(matches!(s.validate(), Err(Error::InvalidScript(_))));
    }

    #[test]
    fn letter_r_plan_shape() {
        let (_, gt) = generate(&templates::letter_r()).unwrap();
        assert_eq!(gt.subtasks.len(), 8);
        assert_eq!(gt.subtasks[0].action, "PickObjDual");
        assert_eq!(gt.hand_choices.len(), 5);
        assert_eq!(gt.hand_states.len(), 5);
    }
}

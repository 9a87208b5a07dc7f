//! Frame-by-frame hand–object (HO) and object–object (OO) classification.
//!
//! For each hand the sweep runs HO detection first and evaluates OO only for
//! the object that hand is manipulating. Contiguous equal states merge into
//! [`InteractionEvent`]s.
//!
//! HO rules, for the nearest object within `ho_dist` that yields a detection:
//! - `CoupledMotion` when the windowed MI exceeds `mi_on`;
//! - `Docked` when the previous frame held `CoupledMotion` or `Docked` on the
//!   same object, so `Docked` is only ever reached through coupled motion;
//! - otherwise no interaction with that object and the search continues.
//!
//! OO rules, for the nearest background object within `oo_dist`:
//! - `EOO` when the hand is docked or the same pair was `EOO` on the previous
//!   frame (the label is sticky until the objects separate);
//! - under coupled motion, `EOO` when the distance entropy trends down,
//!   otherwise `TOO`.

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::demo::Demonstration;
use crate::error::{Error, Result};
use crate::infotheory::Trend;
use crate::signals::SignalBank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HoKind {
    None,
    CoupledMotion,
    Docked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HOState {
    pub state: HoKind,
    pub object_id: Option<String>,
    pub mi: f64,
}

impl HOState {
    pub fn none() -> Self {
        Self { state: HoKind::None, object_id: None, mi: 0.0 }
    }

    pub fn is_active(&self) -> bool {
        self.state != HoKind::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OoKind {
    None,
    #[serde(rename = "EOO")]
    Eoo,
    #[serde(rename = "TOO")]
    Too,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OOState {
    pub state: OoKind,
    pub manipulated_id: Option<String>,
    pub background_id: Option<String>,
}

impl OOState {
    pub fn none() -> Self {
        Self { state: OoKind::None, manipulated_id: None, background_id: None }
    }

    pub fn is_active(&self) -> bool {
        self.state != OoKind::None
    }
}

/// Edge relation shared by events, scene graphs and segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    CoupledMotion,
    Docked,
    #[serde(rename = "EOO")]
    Eoo,
    #[serde(rename = "TOO")]
    Too,
}

impl Relation {
    pub fn is_hand_object(self) -> bool {
        matches!(self, Relation::CoupledMotion | Relation::Docked)
    }

    /// Transitory contacts are kept in graphs but never planned or segmented.
    pub fn is_essential(self) -> bool {
        self != Relation::Too
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub kind: Relation,
    /// Hand whose interaction chain produced the event.
    pub hand: String,
    /// Hand for HO events, manipulated object for OO events.
    pub subject: String,
    pub object: String,
    pub start: f64,
    /// Exclusive end: one frame past the last covered frame.
    pub end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_mi: Option<f64>,
}

impl InteractionEvent {
    pub fn covers(&self, t: f64) -> bool {
        t >= self.start - 1e-9 && t < self.end - 1e-9
    }
}

fn coverage_err(a: &str, b: &str, frame: usize) -> Error {
    Error::MissingCoverage { a: a.to_string(), b: b.to_string(), frame }
}

/// Classifies the HO interaction of `hand` at frame `k`.
pub fn classify_ho(
    k: usize,
    hand: &str,
    objects: &[&str],
    prev: &HOState,
    bank: &SignalBank,
    cfg: &AnalysisConfig,
) -> Result<HOState> {
    let mut candidates = Vec::with_capacity(objects.len());
    for &obj in objects {
        let sig = bank.hand_object(hand, obj).ok_or_else(|| Error::UnknownEntity(format!("{hand}/{obj}")))?;
        let r = sig.mean_distance.get(k).copied().flatten().ok_or_else(|| coverage_err(hand, obj, k))?;
        let mi = sig.mi.get(k).copied().flatten().ok_or_else(|| coverage_err(hand, obj, k))?;
        candidates.push((r, obj, mi));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    for (r, obj, mi) in candidates {
        if r >= cfg.ho_dist {
            break;
        }
        if mi > cfg.mi_on {
            return Ok(HOState { state: HoKind::CoupledMotion, object_id: Some(obj.to_string()), mi });
        }
        let continuing = prev.object_id.as_deref() == Some(obj) && prev.is_active();
        if continuing {
            return Ok(HOState { state: HoKind::Docked, object_id: Some(obj.to_string()), mi });
        }
    }
    Ok(HOState::none())
}

/// Classifies the OO interaction of the object held in `ho` at frame `k`.
pub fn classify_oo(
    k: usize,
    ho: &HOState,
    background: &[&str],
    prev: &OOState,
    bank: &SignalBank,
    cfg: &AnalysisConfig,
) -> Result<OOState> {
    let Some(manipulated) = ho.object_id.as_deref().filter(|_| ho.is_active()) else {
        return Ok(OOState::none());
    };
    let mut candidates = Vec::with_capacity(background.len());
    for &bg in background.iter().filter(|&&b| b != manipulated) {
        let sig = bank
            .object_pair(manipulated, bg)
            .ok_or_else(|| Error::UnknownEntity(format!("{manipulated}/{bg}")))?;
        let r = sig.mean_distance.get(k).copied().flatten().ok_or_else(|| coverage_err(manipulated, bg, k))?;
        candidates.push((r, bg));
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    // an established EOO pair keeps its label while the pair stays in range
    if prev.state == OoKind::Eoo && prev.manipulated_id.as_deref() == Some(manipulated) {
        if let Some(&(_, bg)) = candidates
            .iter()
            .find(|(r, bg)| *r < cfg.oo_dist && prev.background_id.as_deref() == Some(*bg))
        {
            return Ok(OOState {
                state: OoKind::Eoo,
                manipulated_id: Some(manipulated.to_string()),
                background_id: Some(bg.to_string()),
            });
        }
    }

    let Some(&(r, bg)) = candidates.first() else { return Ok(OOState::none()) };
    if r >= cfg.oo_dist {
        return Ok(OOState::none());
    }
    let state = if ho.state == HoKind::Docked {
        OoKind::Eoo
    } else {
        let sig = bank.object_pair(manipulated, bg).expect("checked above");
        match SignalBank::trend_at(&sig.distance_entropy, k, cfg.trend_n) {
            Trend::Decreasing => OoKind::Eoo,
            Trend::NotDecreasing => OoKind::Too,
        }
    };
    Ok(OOState { state, manipulated_id: Some(manipulated.to_string()), background_id: Some(bg.to_string()) })
}

/// Per-frame states of one hand's sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct HandSweep {
    pub hand_id: String,
    pub ho: Vec<HOState>,
    pub oo: Vec<OOState>,
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub times: Vec<f64>,
    pub rate: f64,
    pub sweeps: Vec<HandSweep>,
    pub events: Vec<InteractionEvent>,
}

/// Runs the per-hand state machines over a uniform demonstration.
pub fn detect(demo: &Demonstration, cfg: &AnalysisConfig) -> Result<Detection> {
    cfg.validate()?;
    if demo.hands().next().is_none() {
        return Err(Error::NoHands);
    }
    let bank = SignalBank::compute(demo, cfg)?;
    detect_with(demo, &bank, cfg)
}

pub fn detect_with(demo: &Demonstration, bank: &SignalBank, cfg: &AnalysisConfig) -> Result<Detection> {
    let objects: Vec<&str> = demo.objects().map(|o| o.id.as_str()).collect();
    let frames = bank.frame_count();
    let mut sweeps = Vec::new();
    for hand in demo.hands() {
        let mut ho_states = Vec::with_capacity(frames);
        let mut oo_states = Vec::with_capacity(frames);
        let mut prev_ho = HOState::none();
        let mut prev_oo = OOState::none();
        for k in 0..frames {
            let (ho, oo) = if bank.is_covered(k) {
                let ho = classify_ho(k, &hand.id, &objects, &prev_ho, bank, cfg)?;
                let oo = classify_oo(k, &ho, &objects, &prev_oo, bank, cfg)?;
                (ho, oo)
            } else {
                (HOState::none(), OOState::none())
            };
            ho_states.push(ho.clone());
            oo_states.push(oo.clone());
            prev_ho = ho;
            prev_oo = oo;
        }
        sweeps.push(HandSweep { hand_id: hand.id.clone(), ho: ho_states, oo: oo_states });
    }
    let events = events_from_sweeps(&sweeps, &bank.times, bank.rate);
    Ok(Detection { times: bank.times.clone(), rate: bank.rate, sweeps, events })
}

pub fn detect_events(demo: &Demonstration, cfg: &AnalysisConfig) -> Result<Vec<InteractionEvent>> {
    Ok(detect(demo, cfg)?.events)
}

fn ho_relation(kind: HoKind) -> Option<Relation> {
    match kind {
        HoKind::None => None,
        HoKind::CoupledMotion => Some(Relation::CoupledMotion),
        HoKind::Docked => Some(Relation::Docked),
    }
}

fn oo_relation(kind: OoKind) -> Option<Relation> {
    match kind {
        OoKind::None => None,
        OoKind::Eoo => Some(Relation::Eoo),
        OoKind::Too => Some(Relation::Too),
    }
}

/// Per-frame relation label: (relation, subject, object, mi).
type FrameLabel = Option<(Relation, String, String, f64)>;

fn runs_to_events(hand: &str, labels: &[FrameLabel], times: &[f64], dt: f64, with_mi: bool) -> Vec<InteractionEvent> {
    let mut events = Vec::new();
    let mut k = 0;
    while k < labels.len() {
        let Some((rel, subject, object, _)) = &labels[k] else {
            k += 1;
            continue;
        };
        let start = k;
        let mut mi_sum = 0.0;
        while k < labels.len() {
            match &labels[k] {
                Some((r, s, o, mi)) if r == rel && s == subject && o == object => {
                    mi_sum += mi;
                    k += 1;
                }
                _ => break,
            }
        }
        events.push(InteractionEvent {
            kind: *rel,
            hand: hand.to_string(),
            subject: subject.clone(),
            object: object.clone(),
            start: times[start],
            end: times[k - 1] + dt,
            mean_mi: with_mi.then(|| mi_sum / (k - start) as f64),
        });
    }
    events
}

/// Merges contiguous equal states into events, sorted by start time.
pub fn events_from_sweeps(sweeps: &[HandSweep], times: &[f64], rate: f64) -> Vec<InteractionEvent> {
    let dt = 1.0 / rate;
    let mut events = Vec::new();
    for sweep in sweeps {
        let ho_labels: Vec<FrameLabel> = sweep
            .ho
            .iter()
            .map(|s| {
                ho_relation(s.state).map(|r| (r, sweep.hand_id.clone(), s.object_id.clone().unwrap_or_default(), s.mi))
            })
            .collect();
        let oo_labels: Vec<FrameLabel> = sweep
            .oo
            .iter()
            .map(|s| {
                oo_relation(s.state).map(|r| {
                    (
                        r,
                        s.manipulated_id.clone().unwrap_or_default(),
                        s.background_id.clone().unwrap_or_default(),
                        0.0,
                    )
                })
            })
            .collect();
        events.extend(runs_to_events(&sweep.hand_id, &ho_labels, times, dt, true));
        events.extend(runs_to_events(&sweep.hand_id, &oo_labels, times, dt, false));
    }
    sort_events(&mut events);
    events
}

pub fn sort_events(events: &mut [InteractionEvent]) {
    events.sort_by(|a, b| {
        a.start
            .total_cmp(&b.start)
            .then_with(|| a.hand.cmp(&b.hand))
            .then_with(|| a.kind.cmp(&b.kind))
            .then_with(|| a.subject.cmp(&b.subject))
            .then_with(|| a.object.cmp(&b.object))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{EntityKind, EntityTrack, PoseSample};
    use std::collections::BTreeMap;

    /// Hand and two objects on a 30 Hz grid, positions given per frame.
    fn scene(frames: usize, hand: impl Fn(usize) -> [f64; 3], objs: &[(&str, &dyn Fn(usize) -> [f64; 3])]) -> Demonstration {
        let mk = |id: &str, kind, f: &dyn Fn(usize) -> [f64; 3]| {
            EntityTrack::new(
                id,
                kind,
                id,
                (0..frames).map(|k| PoseSample::new(k as f64 / 30.0, f(k), [0.0; 3])).collect(),
            )
        };
        let mut tracks = vec![mk("hand_l", EntityKind::HandLeft, &hand)];
        for (id, f) in objs {
            tracks.push(mk(id, EntityKind::Object, *f));
        }
        Demonstration::new(tracks, 30.0, BTreeMap::new()).unwrap()
    }

    #[test]
    fn proximity_and_coupling_give_coupled_motion() {
        let cfg = AnalysisConfig::default();
        // hand rides 0.10 m beside a moving object
        let obj = |k: usize| [0.005 * k as f64, 0.0, 0.0];
        let demo = scene(60, |k| [0.005 * k as f64, 0.10, 0.0], &[("a", &obj)]);
        let bank = SignalBank::compute(&demo, &cfg).unwrap();
        let ho = classify_ho(30, "hand_l", &["a"], &HOState::none(), &bank, &cfg).unwrap();
        assert_eq!(ho.state, HoKind::CoupledMotion);
        assert!(ho.mi > 0.05);
        let sig = bank.hand_object("hand_l", "a").unwrap();
        assert!((sig.mean_distance[30].unwrap() - 0.10).abs() < 1e-12);
    }

    #[test]
    fn distant_hand_gives_none() {
        let cfg = AnalysisConfig::default();
        let obj = |k: usize| [0.005 * k as f64, 0.0, 0.0];
        let demo = scene(60, |k| [0.005 * k as f64, 0.25, 0.0], &[("a", &obj)]);
        let bank = SignalBank::compute(&demo, &cfg).unwrap();
        let ho = classify_ho(30, "hand_l", &["a"], &HOState::none(), &bank, &cfg).unwrap();
        assert_eq!(ho, HOState::none());
    }

    #[test]
    fn resting_hand_never_docks_without_coupling() {
        let cfg = AnalysisConfig::default();
        let obj = |_k: usize| [0.305, 0.205, 0.0];
        let demo = scene(60, |_k| [0.305, 0.255, 0.0], &[("a", &obj)]);
        let bank = SignalBank::compute(&demo, &cfg).unwrap();
        let mut prev = HOState::none();
        for k in 15..45 {
            prev = classify_ho(k, "hand_l", &["a"], &prev, &bank, &cfg).unwrap();
            assert_eq!(prev.state, HoKind::None);
        }
    }

    #[test]
    fn coverage_gap_is_an_error() {
        let cfg = AnalysisConfig::default();
        let obj = |_k: usize| [0.0; 3];
        let demo = scene(60, |_k| [0.0; 3], &[("a", &obj)]);
        let bank = SignalBank::compute(&demo, &cfg).unwrap();
        assert!(matches!(
            classify_ho(3, "hand_l", &["a"], &HOState::none(), &bank, &cfg),
            Err(Error::MissingCoverage { .. })
        ));
    }

    #[test]
    fn oo_far_background_is_none() {
        let cfg = AnalysisConfig::default();
        let obj = |k: usize| [0.005 * k as f64, 0.0, 0.0];
        let bg = |k: usize| [0.005 * k as f64, 0.25, 0.0];
        let demo = scene(60, |k| [0.005 * k as f64, 0.0, 0.0], &[("a", &obj), ("b", &bg)]);
        let bank = SignalBank::compute(&demo, &cfg).unwrap();
        let ho = classify_ho(30, "hand_l", &["a", "b"], &HOState::none(), &bank, &cfg).unwrap();
        assert_eq!(ho.object_id.as_deref(), Some("a"));
        let oo = classify_oo(30, &ho, &["a", "b"], &OOState::none(), &bank, &cfg).unwrap();
        assert_eq!(oo, OOState::none());
    }

    #[test]
    fn docked_hand_confirms_eoo_and_sticks() {
        let cfg = AnalysisConfig::default();
        let obj = |_k: usize| [0.305, 0.205, 0.0];
        let bg = |_k: usize| [0.405, 0.205, 0.0];
        let demo = scene(60, |_k| [0.305, 0.205, 0.0], &[("a", &obj), ("b", &bg)]);
        let bank = SignalBank::compute(&demo, &cfg).unwrap();
        let docked = HOState { state: HoKind::Docked, object_id: Some("a".into()), mi: 0.0 };
        let oo = classify_oo(30, &docked, &["a", "b"], &OOState::none(), &bank, &cfg).unwrap();
        assert_eq!(oo.state, OoKind::Eoo);
        let coupled = HOState { state: HoKind::CoupledMotion, ..docked };
        let again = classify_oo(31, &coupled, &["a", "b"], &oo, &bank, &cfg).unwrap();
        assert_eq!(again.state, OoKind::Eoo);
        // without the sticky predecessor, a flat distance entropy is not decreasing
        let fresh = classify_oo(31, &coupled, &["a", "b"], &OOState::none(), &bank, &cfg).unwrap();
        assert_eq!(fresh.state, OoKind::Too);
    }

    #[test]
    fn stationary_scene_has_no_events() {
        let cfg = AnalysisConfig::default();
        let obj = |_k: usize| [0.3, 0.3, 0.0];
        let demo = scene(90, |_k| [0.0, 0.0, 0.0], &[("a", &obj)]);
        assert!(detect_events(&demo, &cfg).unwrap().is_empty());
    }
}

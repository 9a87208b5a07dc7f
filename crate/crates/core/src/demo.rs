//! Demonstration data: timestamped 6D pose streams for hands and objects.
//!
//! The on-disk format is line-delimited JSON, one record per entity per frame,
//! with an optional leading header carrying the sample rate and metadata:
//!
//! ```text
//! {"rate": 30.0, "meta": {"task": "pick_place"}}
//! {"t": 0.0, "id": "hand_l", "kind": "hand_left", "label": "hand", "p": [0.1, 0.2, 0.0], "theta": [0.0, 0.0, 0.0]}
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};

/// Timestamps closer than this are treated as the same instant when aligning grids.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSample {
    pub t: f64,
    pub p: [f64; 3],
    /// Euler angles in radians.
    pub theta: [f64; 3],
}

impl PoseSample {
    pub fn new(t: f64, p: [f64; 3], theta: [f64; 3]) -> Self {
        Self { t, p, theta }
    }

    fn validate(&self, id: &str) -> Result<()> {
        if !self.t.is_finite() || self.t < 0.0 {
            return Err(Error::InvalidSample { id: id.to_string(), message: format!("bad timestamp {}", self.t) });
        }
        if self.p.iter().chain(self.theta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSample { id: id.to_string(), message: format!("non-finite pose at t={}", self.t) });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    HandLeft,
    HandRight,
    Object,
}

impl EntityKind {
    pub fn is_hand(self) -> bool {
        matches!(self, EntityKind::HandLeft | EntityKind::HandRight)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::HandLeft => "hand_left",
            EntityKind::HandRight => "hand_right",
            EntityKind::Object => "object",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityTrack {
    pub id: String,
    pub kind: EntityKind,
    pub label: String,
    pub samples: Vec<PoseSample>,
}

impl EntityTrack {
    pub fn new(id: impl Into<String>, kind: EntityKind, label: impl Into<String>, samples: Vec<PoseSample>) -> Self {
        Self { id: id.into(), kind, label: label.into(), samples }
    }

    pub fn start(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.t)
    }

    pub fn end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn axis_values(&self, axis: Axis) -> Vec<f64> {
        self.samples.iter().map(|s| s.p[axis.index()]).collect()
    }

    /// Linear interpolation of position and orientation at `t`, which must lie in range.
    fn interpolate(&self, t: f64) -> PoseSample {
        let s = &self.samples;
        let j = s.partition_point(|x| x.t <= t);
        if j == 0 {
            return PoseSample { t, ..s[0] };
        }
        let lo = &s[j - 1];
        if (t - lo.t).abs() < TIME_EPS || j == s.len() {
            return PoseSample { t, ..*lo };
        }
        let hi = &s[j];
        if (hi.t - t).abs() < TIME_EPS {
            return PoseSample { t, ..*hi };
        }
        let w = (t - lo.t) / (hi.t - lo.t);
        let lerp = |a: f64, b: f64| a + (b - a) * w;
        PoseSample {
            t,
            p: std::array::from_fn(|i| lerp(lo.p[i], hi.p[i])),
            theta: std::array::from_fn(|i| lerp(lo.theta[i], hi.theta[i])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub tracks: Vec<EntityTrack>,
    /// Sample frequency in Hz.
    pub rate: f64,
    pub meta: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    t: f64,
    id: String,
    kind: EntityKind,
    label: String,
    p: [f64; 3],
    theta: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct Header {
    rate: Option<f64>,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

impl Demonstration {
    /// Builds a demonstration, sorting samples and checking every invariant.
    pub fn new(mut tracks: Vec<EntityTrack>, rate: f64, meta: BTreeMap<String, String>) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidConfig(format!("rate must be positive, got {rate}")));
        }
        if tracks.iter().all(|t| t.samples.is_empty()) {
            return Err(Error::NoSamples);
        }
        let mut seen_hands = Vec::new();
        for track in &mut tracks {
            if track.kind.is_hand() {
                if seen_hands.contains(&track.kind) {
                    return Err(Error::DuplicateHand(track.kind.as_str().to_string()));
                }
                seen_hands.push(track.kind);
            }
            for s in &track.samples {
                s.validate(&track.id)?;
            }
            track.samples.sort_by(|a, b| a.t.total_cmp(&b.t));
            if let Some(w) = track.samples.windows(2).find(|w| w[0].t == w[1].t) {
                return Err(Error::DuplicateTimestamp { id: track.id.clone(), t: w[0].t });
            }
            if track.samples.is_empty() {
                return Err(Error::TooFewSamples { id: track.id.clone(), needed: 1, got: 0 });
            }
        }
        Ok(Self { tracks, rate, meta })
    }

    /// Parses the line-delimited format. When the header carries no rate, the
    /// rate is inferred from the median inter-sample interval.
    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut header: Option<Header> = None;
        let mut order: Vec<String> = Vec::new();
        let mut tracks: BTreeMap<String, EntityTrack> = BTreeMap::new();
        let mut seen_record = false;

        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(trimmed)
                .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
            let is_header = value.get("id").is_none() && value.get("rate").is_some();
            if is_header {
                if seen_record || header.is_some() {
                    return Err(Error::Parse { line: line_no, message: "header must be the first line".into() });
                }
                let h: Header = serde_json::from_value(value)
                    .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
                header = Some(h);
                continue;
            }
            let rec: Record =
                serde_json::from_value(value).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
            seen_record = true;
            let sample = PoseSample::new(rec.t, rec.p, rec.theta);
            sample.validate(&rec.id).map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
            match tracks.get_mut(&rec.id) {
                Some(track) => {
                    if track.kind != rec.kind || track.label != rec.label {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("entity `{}` changes kind or label", rec.id),
                        });
                    }
                    track.samples.push(sample);
                }
                None => {
                    order.push(rec.id.clone());
                    tracks.insert(rec.id.clone(), EntityTrack::new(rec.id, rec.kind, rec.label, vec![sample]));
                }
            }
        }

        if tracks.is_empty() {
            return Err(Error::NoSamples);
        }
        let tracks: Vec<EntityTrack> = order.iter().map(|id| tracks.remove(id).expect("tracked id")).collect();
        let (rate, meta) = match header {
            Some(Header { rate: Some(r), meta }) => (r, meta),
            Some(Header { rate: None, meta }) => (0.0, meta),
            None => (0.0, BTreeMap::new()),
        };
        let mut demo = Self::new(tracks, if rate > 0.0 { rate } else { 1.0 }, meta)?;
        if rate <= 0.0 {
            demo.rate = infer_rate(&demo.tracks)?;
        }
        Ok(demo)
    }

    pub fn from_jsonl_str(text: &str) -> Result<Self> {
        Self::load(text.as_bytes())
    }

    /// Writes the header followed by every sample, track by track.
    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header { rate: Some(self.rate), meta: self.meta.clone() };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for track in &self.tracks {
            for s in &track.samples {
                let rec = Record {
                    t: s.t,
                    id: track.id.clone(),
                    kind: track.kind,
                    label: track.label.clone(),
                    p: s.p,
                    theta: s.theta,
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.save(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn track(&self, id: &str) -> Option<&EntityTrack> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn hands(&self) -> impl Iterator<Item = &EntityTrack> {
        self.tracks.iter().filter(|t| t.kind.is_hand())
    }

    pub fn objects(&self) -> impl Iterator<Item = &EntityTrack> {
        self.tracks.iter().filter(|t| t.kind == EntityKind::Object)
    }

    pub fn hand(&self, kind: EntityKind) -> Option<&EntityTrack> {
        self.tracks.iter().find(|t| t.kind == kind)
    }

    /// Frame count of a uniform demonstration (the shortest track otherwise).
    pub fn frame_count(&self) -> usize {
        self.tracks.iter().map(|t| t.samples.len()).min().unwrap_or(0)
    }

    pub fn start_time(&self) -> f64 {
        self.tracks.first().map_or(0.0, EntityTrack::start)
    }

    pub fn times(&self) -> Vec<f64> {
        self.tracks.first().map(|t| t.samples.iter().map(|s| s.t).collect()).unwrap_or_default()
    }

    /// Frame index nearest to `t` on the shared grid.
    pub fn frame_at(&self, t: f64) -> Option<usize> {
        let k = ((t - self.start_time()) * self.rate).round();
        if k < 0.0 || k as usize >= self.frame_count() {
            None
        } else {
            Some(k as usize)
        }
    }

    /// True when every track shares one grid with spacing `1 / rate`.
    pub fn is_uniform(&self) -> bool {
        let Some(first) = self.tracks.first() else { return false };
        let n = first.samples.len();
        let dt = 1.0 / self.rate;
        let t0 = first.start();
        self.tracks.iter().all(|track| {
            track.samples.len() == n
                && track.samples.iter().zip(&first.samples).all(|(a, b)| (a.t - b.t).abs() < 1e-6)
                && track.samples.iter().enumerate().all(|(i, s)| (s.t - (t0 + i as f64 * dt)).abs() < 1e-6)
        })
    }

    /// Resamples every track onto one uniform grid spanning the intersection of
    /// the track time ranges, interpolating position and orientation linearly.
    pub fn resample_uniform(&self, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidConfig(format!("rate must be positive, got {rate}")));
        }
        for track in &self.tracks {
            if track.samples.len() < 2 {
                return Err(Error::TooFewSamples { id: track.id.clone(), needed: 2, got: track.samples.len() });
            }
        }
        let start = self.tracks.iter().map(EntityTrack::start).fold(f64::NEG_INFINITY, f64::max);
        let end = self.tracks.iter().map(EntityTrack::end).fold(f64::INFINITY, f64::min);
        if end < start {
            return Err(Error::EmptyIntersection);
        }
        let count = ((end - start) * rate + TIME_EPS).floor() as usize + 1;
        let grid: Vec<f64> = (0..count).map(|i| start + i as f64 / rate).collect();

        let tracks = self
            .tracks
            .iter()
            .map(|track| {
                let samples = grid
                    .iter()
                    .map(|&t| {
                        // keep original timestamps when the grid lands on them
                        let j = track.samples.partition_point(|s| s.t < t - TIME_EPS);
                        match track.samples.get(j) {
                            Some(s) if (s.t - t).abs() < TIME_EPS => *s,
                            _ => track.interpolate(t),
                        }
                    })
                    .collect();
                EntityTrack { samples, ..track.clone() }
            })
            .collect();
        Ok(Self { tracks, rate, meta: self.meta.clone() })
    }

    /// Returns this demonstration on a uniform grid at its own rate.
    pub fn ensure_uniform(&self) -> Result<std::borrow::Cow<'_, Self>> {
        if self.is_uniform() {
            Ok(std::borrow::Cow::Borrowed(self))
        } else {
            Ok(std::borrow::Cow::Owned(self.resample_uniform(self.rate)?))
        }
    }
}

fn infer_rate(tracks: &[EntityTrack]) -> Result<f64> {
    let mut gaps: Vec<f64> =
        tracks.iter().flat_map(|t| t.samples.windows(2).map(|w| w[1].t - w[0].t)).collect();
    if gaps.is_empty() {
        return Err(Error::TooFewSamples { id: tracks[0].id.clone(), needed: 2, got: tracks[0].samples.len() });
    }
    gaps.sort_by(f64::total_cmp);
    let mid = gaps.len() / 2;
    let median = if gaps.len() % 2 == 0 { 0.5 * (gaps[mid - 1] + gaps[mid]) } else { gaps[mid] };
    Ok(((1.0 / median) * 1e6).round() / 1e6)
}

/// Distance between two positions over the analysis axes.
pub fn planar_distance(a: &[f64; 3], b: &[f64; 3], cfg: &AnalysisConfig) -> f64 {
    cfg.axes().iter().map(|ax| (a[ax.index()] - b[ax.index()]).powi(2)).sum::<f64>().sqrt()
}

/// Per-frame distance series between two tracks on a shared grid.
pub fn distance_series(a: &EntityTrack, b: &EntityTrack, cfg: &AnalysisConfig) -> Vec<f64> {
    a.samples.iter().zip(&b.samples).map(|(x, y)| planar_distance(&x.p, &y.p, cfg)).collect()
}

/// Mean distance between two tracks over the window centred at `t`.
pub fn mean_distance(a: &EntityTrack, b: &EntityTrack, t: f64, rate: f64, cfg: &AnalysisConfig) -> Result<f64> {
    let half = cfg.half_window(rate);
    let start = a.start().max(b.start());
    let k = ((t - start) * rate).round();
    let len = a.samples.len().min(b.samples.len());
    if k < half as f64 || k as usize + half >= len {
        return Err(Error::WindowOutOfRange { t });
    }
    let k = k as usize;
    let sum: f64 =
        (k - half..=k + half).map(|i| planar_distance(&a.samples[i].p, &b.samples[i].p, cfg)).sum();
    Ok(sum / (2 * half + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(id: &str, kind: EntityKind, pts: &[(f64, [f64; 3])]) -> EntityTrack {
        EntityTrack::new(id, kind, id, pts.iter().map(|&(t, p)| PoseSample::new(t, p, [0.0; 3])).collect())
    }

    #[test]
    fn loads_three_records_at_thirty_hz() {
        let text = (0..3)
            .map(|i| {
                format!(
                    r#"{{"t": {}, "id": "cube", "kind": "object", "label": "block", "p": [0.1, 0.2, 0.0], "theta": [0, 0, 0]}}"#,
                    i as f64 / 30.0
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        let demo = Demonstration::from_jsonl_str(&text).unwrap();
        assert_eq!(demo.tracks.len(), 1);
        assert_eq!(demo.tracks[0].samples.len(), 3);
        assert_eq!(demo.rate, 30.0);
    }

    #[test]
    fn shuffled_records_sort() {
        let rec = |t: f64| {
            format!(r#"{{"t": {t}, "id": "a", "kind": "object", "label": "x", "p": [{t}, 0, 0], "theta": [0, 0, 0]}}"#)
        };
        let sorted = Demonstration::from_jsonl_str(&[rec(0.0), rec(0.5), rec(1.0)].join("\n")).unwrap();
        let shuffled = Demonstration::from_jsonl_str(&[rec(1.0), rec(0.0), rec(0.5)].join("\n")).unwrap();
        assert_eq!(sorted, shuffled);
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = "{\"rate\": 30}\n{\"t\": 0, \"id\": \"a\"}\n";
        match Demonstration::from_jsonl_str(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let rec = r#"{"t": 0.5, "id": "a", "kind": "object", "label": "x", "p": [0, 0, 0], "theta": [0, 0, 0]}"#;
        assert!(matches!(
            Demonstration::from_jsonl_str(&format!("{rec}\n{rec}")),
            Err(Error::DuplicateTimestamp { .. })
        ));
    }

    #[test]
    fn empty_stream_rejected() {
        assert!(matches!(Demonstration::from_jsonl_str("{\"rate\": 30}\n"), Err(Error::NoSamples)));
        assert!(matches!(Demonstration::from_jsonl_str(""), Err(Error::NoSamples)));
    }

    #[test]
    fn duplicate_hand_rejected() {
        let a = track("l1", EntityKind::HandLeft, &[(0.0, [0.0; 3])]);
        let b = track("l2", EntityKind::HandLeft, &[(0.0, [0.0; 3])]);
        assert!(matches!(Demonstration::new(vec![a, b], 30.0, BTreeMap::new()), Err(Error::DuplicateHand(_))));
    }

    #[test]
    fn resample_midpoint() {
        let a = track("a", EntityKind::Object, &[(0.0, [0.0; 3]), (1.0, [0.3, 0.0, 0.0])]);
        let demo = Demonstration::new(vec![a], 1.0, BTreeMap::new()).unwrap();
        let r = demo.resample_uniform(2.0).unwrap();
        let s = &r.tracks[0].samples;
        assert_eq!(s.len(), 3);
        assert_eq!(s[1].t, 0.5);
        assert!((s[1].p[0] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn resample_is_identity_on_uniform() {
        let pts: Vec<(f64, [f64; 3])> = (0..40).map(|i| (i as f64 / 30.0, [(i as f64).sin(), 0.1, 0.2])).collect();
        let demo = Demonstration::new(vec![track("a", EntityKind::Object, &pts)], 30.0, BTreeMap::new()).unwrap();
        assert!(demo.is_uniform());
        assert_eq!(demo.resample_uniform(30.0).unwrap(), demo);
    }

    #[test]
    fn resample_uses_intersection() {
        let a = track("a", EntityKind::Object, &[(0.0, [0.0; 3]), (2.0, [2.0, 0.0, 0.0])]);
        let b = track("b", EntityKind::Object, &[(1.0, [0.0; 3]), (3.0, [0.0; 3])]);
        let demo = Demonstration::new(vec![a, b], 1.0, BTreeMap::new()).unwrap();
        let r = demo.resample_uniform(1.0).unwrap();
        assert_eq!(r.times(), vec![1.0, 2.0]);
        assert_eq!(r.tracks[0].samples[0].p[0], 1.0);

        let c = track("c", EntityKind::Object, &[(5.0, [0.0; 3]), (6.0, [0.0; 3])]);
        let demo = Demonstration::new(vec![r.tracks[0].clone(), c], 1.0, BTreeMap::new()).unwrap();
        assert!(matches!(demo.resample_uniform(1.0), Err(Error::EmptyIntersection)));
    }

    #[test]
    fn mean_distance_cases() {
        let cfg = AnalysisConfig::default();
        let pts: Vec<(f64, [f64; 3])> = (0..61).map(|i| (i as f64 / 30.0, [i as f64 * 0.01, 0.0, 0.3])).collect();
        let a = track("a", EntityKind::Object, &pts);
        let shifted: Vec<(f64, [f64; 3])> = pts.iter().map(|&(t, p)| (t, [p[0] + 0.1, p[1], 0.0])).collect();
        let b = track("b", EntityKind::Object, &shifted);
        assert_eq!(mean_distance(&a, &a, 1.0, 30.0, &cfg).unwrap(), 0.0);
        assert!((mean_distance(&a, &b, 1.0, 30.0, &cfg).unwrap() - 0.1).abs() < 1e-12);
        assert!(matches!(mean_distance(&a, &b, 0.2, 30.0, &cfg), Err(Error::WindowOutOfRange { .. })));
        assert!(matches!(mean_distance(&a, &b, 1.9, 30.0, &cfg), Err(Error::WindowOutOfRange { .. })));
    }
}

//! Histogram quantization, windowed Shannon entropy, joint entropy, mutual
//! information and the majority-vote trend test.
//!
//! All entropies are plug-in estimates over fixed-width bins anchored at zero
//! (`floor(v / bin_width)`), in nats, multiplied by `entropy_scale`. The scale
//! is applied to marginal and joint entropies alike so that
//! `I(X; X) = H(X)` holds for any scale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::demo::{distance_series, Axis, EntityTrack};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: BTreeMap<i64, usize>,
    pub total: usize,
}

impl Histogram {
    /// Entropy of the normalised histogram, scaled by `scale`.
    pub fn entropy(&self, scale: f64) -> f64 {
        let mut counts: Vec<usize> = self.counts.values().copied().collect();
        entropy_from_counts(&mut counts, self.total, scale)
    }
}

#[inline]
pub fn bin_index(value: f64, bin_width: f64) -> i64 {
    (value / bin_width).floor() as i64
}

pub fn quantize(values: &[f64], bin_width: f64) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::InvalidConfig(format!("bin_width must be positive, got {bin_width}")));
    }
    let mut counts = BTreeMap::new();
    for &v in values {
        if !v.is_finite() {
            return Err(Error::InvalidConfig(format!("non-finite value {v}")));
        }
        *counts.entry(bin_index(v, bin_width)).or_insert(0) += 1;
    }
    Ok(Histogram { bin_width, counts, total: values.len() })
}

/// Sums `-p ln p` over counts sorted ascending, so the result depends only on
/// the multiset of counts. That makes `H(X,Y)` and `H(Y,X)` bit-identical.
fn entropy_from_counts(counts: &mut [usize], total: usize, scale: f64) -> f64 {
    counts.sort_unstable();
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    // a single bin yields -1 * ln 1 = -0.0
    scale * h.max(0.0)
}

fn counts_of_sorted<T: PartialEq + Copy>(sorted: &[T]) -> Vec<usize> {
    let mut counts = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        counts.push(j - i);
        i = j;
    }
    counts
}

/// Entropy of already-quantized bin indices.
pub fn entropy_of_bins(bins: &[i64], scale: f64) -> f64 {
    let mut sorted = bins.to_vec();
    sorted.sort_unstable();
    let mut counts = counts_of_sorted(&sorted);
    entropy_from_counts(&mut counts, bins.len(), scale)
}

/// Joint entropy of paired bin indices.
pub fn joint_entropy_of_bins(xs: &[i64], ys: &[i64], scale: f64) -> f64 {
    let mut pairs: Vec<(i64, i64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_unstable();
    let mut counts = counts_of_sorted(&pairs);
    entropy_from_counts(&mut counts, xs.len(), scale)
}

pub fn mutual_information_of_bins(xs: &[i64], ys: &[i64], scale: f64) -> f64 {
    entropy_of_bins(xs, scale) + entropy_of_bins(ys, scale) - joint_entropy_of_bins(xs, ys, scale)
}

fn bins_of(values: &[f64], bin_width: f64) -> Result<Vec<i64>> {
    Ok(values
        .iter()
        .map(|&v| {
            if v.is_finite() {
                Ok(bin_index(v, bin_width))
            } else {
                Err(Error::InvalidConfig(format!("non-finite value {v}")))
            }
        })
        .collect::<Result<_>>()?)
}

/// Shannon entropy of a window of scalar values.
pub fn entropy(window: &[f64], cfg: &AnalysisConfig) -> Result<f64> {
    Ok(quantize(window, cfg.bin_width)?.entropy(cfg.entropy_scale))
}

fn check_pair(xw: &[f64], yw: &[f64]) -> Result<()> {
    if xw.len() != yw.len() {
        return Err(Error::LengthMismatch { left: xw.len(), right: yw.len() });
    }
    if xw.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Entropy of the 2D histogram of paired bin indices.
pub fn joint_entropy(xw: &[f64], yw: &[f64], cfg: &AnalysisConfig) -> Result<f64> {
    check_pair(xw, yw)?;
    let xs = bins_of(xw, cfg.bin_width)?;
    let ys = bins_of(yw, cfg.bin_width)?;
    Ok(joint_entropy_of_bins(&xs, &ys, cfg.entropy_scale))
}

/// `H(X) + H(Y) - H(X,Y)`.
pub fn mutual_information(xw: &[f64], yw: &[f64], cfg: &AnalysisConfig) -> Result<f64> {
    check_pair(xw, yw)?;
    let xs = bins_of(xw, cfg.bin_width)?;
    let ys = bins_of(yw, cfg.bin_width)?;
    Ok(mutual_information_of_bins(&xs, &ys, cfg.entropy_scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Decreasing,
    NotDecreasing,
}

/// Majority vote over the consecutive differences of the last `n` samples:
/// decreasing iff strictly negative differences outnumber the rest.
pub fn trend(series: &[f64], n: usize) -> Result<Trend> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("trend needs n >= 2, got {n}")));
    }
    if series.len() < n {
        return Err(Error::InsufficientSamples { needed: n, got: series.len() });
    }
    let tail = &series[series.len() - n..];
    let negative = tail.windows(2).filter(|w| w[1] - w[0] < 0.0).count();
    let rest = n - 1 - negative;
    Ok(if negative > rest { Trend::Decreasing } else { Trend::NotDecreasing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrace {
    pub entity_id: String,
    pub axis: Axis,
    pub values: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MITrace {
    pub pair: (String, String),
    pub values: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTrace {
    pub pair: (String, String),
    pub values: Vec<(f64, f64)>,
}

fn csv_of(values: &[(f64, f64)]) -> String {
    let mut out = String::from("t,value\n");
    for (t, v) in values {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

impl EntropyTrace {
    pub fn to_csv(&self) -> String {
        csv_of(&self.values)
    }
}

impl MITrace {
    pub fn to_csv(&self) -> String {
        csv_of(&self.values)
    }
}

impl DistanceTrace {
    pub fn to_csv(&self) -> String {
        csv_of(&self.values)
    }
}

/// Frames whose centred window of `2 * half + 1` samples fits in `len` samples.
pub fn covered_frames(len: usize, half: usize) -> std::ops::Range<usize> {
    if len < 2 * half + 1 {
        0..0
    } else {
        half..len - half
    }
}

/// Sliding-window entropy of one position axis.
pub fn entropy_trace(track: &EntityTrack, axis: Axis, rate: f64, cfg: &AnalysisConfig) -> Result<EntropyTrace> {
    let n = cfg.window_len(rate);
    let half = n / 2;
    if track.samples.len() < n {
        return Err(Error::InsufficientSamples { needed: n, got: track.samples.len() });
    }
    let bins = bins_of(&track.axis_values(axis), cfg.bin_width)?;
    let values = covered_frames(bins.len(), half)
        .map(|k| (track.samples[k].t, entropy_of_bins(&bins[k - half..=k + half], cfg.entropy_scale)))
        .collect();
    Ok(EntropyTrace { entity_id: track.id.clone(), axis, values })
}

fn pair_window(a: &EntityTrack, b: &EntityTrack, t: f64, rate: f64, cfg: &AnalysisConfig) -> Result<usize> {
    let half = cfg.half_window(rate);
    let len = a.samples.len().min(b.samples.len());
    let k = ((t - a.start().max(b.start())) * rate).round();
    if k < half as f64 || k as usize + half >= len {
        return Err(Error::WindowOutOfRange { t });
    }
    Ok(k as usize)
}

/// Mutual information summed over the analysis axes for the window centred at `t`.
pub fn mi_3d(a: &EntityTrack, b: &EntityTrack, t: f64, rate: f64, cfg: &AnalysisConfig) -> Result<f64> {
    let k = pair_window(a, b, t, rate, cfg)?;
    let half = cfg.half_window(rate);
    let mut total = 0.0;
    for &axis in cfg.axes() {
        let xa: Vec<f64> = a.samples[k - half..=k + half].iter().map(|s| s.p[axis.index()]).collect();
        let xb: Vec<f64> = b.samples[k - half..=k + half].iter().map(|s| s.p[axis.index()]).collect();
        total += mutual_information(&xa, &xb, cfg)?;
    }
    Ok(total)
}

/// Per-axis bin indices of a track, cached for sliding-window evaluation.
pub(crate) fn track_bins(track: &EntityTrack, cfg: &AnalysisConfig) -> Vec<Vec<i64>> {
    cfg.axes()
        .iter()
        .map(|&axis| track.samples.iter().map(|s| bin_index(s.p[axis.index()], cfg.bin_width)).collect())
        .collect()
}

/// Windowed MI series between two tracks on a shared grid.
pub fn mi_trace(a: &EntityTrack, b: &EntityTrack, rate: f64, cfg: &AnalysisConfig) -> MITrace {
    let half = cfg.half_window(rate);
    let (ba, bb) = (track_bins(a, cfg), track_bins(b, cfg));
    let len = a.samples.len().min(b.samples.len());
    let values = covered_frames(len, half)
        .map(|k| {
            let w = k - half..k + half + 1;
            let mi = ba
                .iter()
                .zip(&bb)
                .map(|(x, y)| mutual_information_of_bins(&x[w.clone()], &y[w.clone()], cfg.entropy_scale))
                .sum();
            (a.samples[k].t, mi)
        })
        .collect();
    MITrace { pair: (a.id.clone(), b.id.clone()), values }
}

/// Windowed mean-distance series between two tracks on a shared grid.
pub fn distance_trace(a: &EntityTrack, b: &EntityTrack, rate: f64, cfg: &AnalysisConfig) -> DistanceTrace {
    let half = cfg.half_window(rate);
    let d = distance_series(a, b, cfg);
    let values = window_means(&d, half)
        .into_iter()
        .enumerate()
        .filter_map(|(k, m)| m.map(|m| (a.samples[k].t, m)))
        .collect();
    DistanceTrace { pair: (a.id.clone(), b.id.clone()), values }
}

/// Centred window means; `None` where the window does not fit.
pub fn window_means(series: &[f64], half: usize) -> Vec<Option<f64>> {
    let n = (2 * half + 1) as f64;
    let mut out = vec![None; series.len()];
    for k in covered_frames(series.len(), half) {
        out[k] = Some(series[k - half..=k + half].iter().sum::<f64>() / n);
    }
    out
}

/// Centred window entropies of a scalar signal; `None` where the window does not fit.
pub fn window_entropies(series: &[f64], half: usize, cfg: &AnalysisConfig) -> Vec<Option<f64>> {
    let bins: Vec<i64> = series.iter().map(|&v| bin_index(v, cfg.bin_width)).collect();
    let mut out = vec![None; series.len()];
    for k in covered_frames(series.len(), half) {
        out[k] = Some(entropy_of_bins(&bins[k - half..=k + half], cfg.entropy_scale));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> AnalysisConfig {
        AnalysisConfig::default()
    }

    #[test]
    fn quantize_floor_rule() {
        let h = quantize(&[0.004, 0.006, 0.014], 0.01).unwrap();
        assert_eq!(h.counts, BTreeMap::from([(0, 2), (1, 1)]));
        assert_eq!(h.total, 3);
        let neg = quantize(&[-0.001], 0.01).unwrap();
        assert_eq!(neg.counts, BTreeMap::from([(-1, 1)]));
    }

    #[test]
    fn quantize_degenerate_and_empty() {
        let h = quantize(&[0.123; 7], 0.01).unwrap();
        assert_eq!(h.counts.len(), 1);
        assert_eq!(h.total, 7);
        assert!(matches!(quantize(&[], 0.01), Err(Error::EmptyInput)));
        assert!(quantize(&[1.0], 0.0).is_err());
    }

    #[test]
    fn entropy_known_values() {
        assert_eq!(entropy(&[0.5; 10], &cfg()).unwrap(), 0.0);
        let uniform = [0.005, 0.015, 0.025, 0.035, 0.005, 0.015, 0.025, 0.035];
        assert!((entropy(&uniform, &cfg()).unwrap() - 4f64.ln()).abs() < 1e-12);
        let scaled = AnalysisConfig { entropy_scale: 0.5, ..cfg() };
        assert!((entropy(&uniform, &scaled).unwrap() - 0.5 * 4f64.ln()).abs() < 1e-12);
        assert!(matches!(entropy(&[], &cfg()), Err(Error::EmptyInput)));
    }

    #[test]
    fn joint_entropy_degenerate_cases() {
        let x = [0.001, 0.012, 0.023, 0.034, 0.041, 0.001];
        let hx = entropy(&x, &cfg()).unwrap();
        assert!((joint_entropy(&x, &x, &cfg()).unwrap() - hx).abs() < 1e-12);
        let c = [0.3; 6];
        assert!((joint_entropy(&c, &x, &cfg()).unwrap() - hx).abs() < 1e-12);
        assert!(matches!(joint_entropy(&x, &c[..3], &cfg()), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn mutual_information_cases() {
        let x = [0.001, 0.012, 0.023, 0.034, 0.041, 0.001];
        let hx = entropy(&x, &cfg()).unwrap();
        assert!((mutual_information(&x, &x, &cfg()).unwrap() - hx).abs() < 1e-12);
        assert_eq!(mutual_information(&[0.3; 6], &x, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn trend_majority_rule() {
        let dec: Vec<f64> = (0..20).map(|i| -(i as f64)).collect();
        assert_eq!(trend(&dec, 20).unwrap(), Trend::Decreasing);
        let inc: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert_eq!(trend(&inc, 20).unwrap(), Trend::NotDecreasing);
        let mut mixed = vec![0.0];
        for i in 0..19 {
            let step = if i < 12 { -1.0 } else { 1.0 };
            mixed.push(mixed.last().unwrap() + step);
        }
        assert_eq!(trend(&mixed, 20).unwrap(), Trend::Decreasing);
        // 9 negative vs 10 non-negative (including a flat step)
        let mut close = vec![0.0];
        for i in 0..19 {
            let step = if i < 9 { -1.0 } else if i == 9 { 0.0 } else { 1.0 };
            close.push(close.last().unwrap() + step);
        }
        assert_eq!(trend(&close, 20).unwrap(), Trend::NotDecreasing);
        assert!(matches!(trend(&dec[..5], 20), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn trend_uses_most_recent_samples() {
        let mut s: Vec<f64> = (0..30).map(|i| i as f64).collect();
        s.extend((0..20).map(|i| 100.0 - i as f64));
        assert_eq!(trend(&s, 20).unwrap(), Trend::Decreasing);
    }

    #[test]
    fn window_helpers() {
        assert_eq!(covered_frames(10, 2), 2..8);
        assert_eq!(covered_frames(4, 2), 0..0);
        let m = window_means(&[0.0, 1.0, 2.0, 3.0], 1);
        assert_eq!(m, vec![None, Some(1.0), Some(2.0), None]);
    }
}

//! Per-pair windowed signals precomputed over a uniform demonstration.

use std::collections::BTreeMap;

use crate::config::AnalysisConfig;
use crate::demo::{distance_series, Demonstration};
use crate::error::{Error, Result};
use crate::infotheory::{
    covered_frames, mutual_information_of_bins, track_bins, trend, window_entropies, window_means, Trend,
};

/// Hand–object signals: windowed mean distance and summed per-axis MI.
#[derive(Debug, Clone)]
pub struct HandObjectSignals {
    pub mean_distance: Vec<Option<f64>>,
    pub mi: Vec<Option<f64>>,
}

/// Object–object signals: windowed mean distance and the entropy of the
/// per-frame distance inside the same window.
#[derive(Debug, Clone)]
pub struct ObjectPairSignals {
    pub mean_distance: Vec<Option<f64>>,
    pub distance_entropy: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct SignalBank {
    pub times: Vec<f64>,
    pub rate: f64,
    pub half: usize,
    ho: BTreeMap<(String, String), HandObjectSignals>,
    oo: BTreeMap<(String, String), ObjectPairSignals>,
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl SignalBank {
    /// Computes every hand–object and object–object signal. The demonstration
    /// must already be on a shared uniform grid.
    pub fn compute(demo: &Demonstration, cfg: &AnalysisConfig) -> Result<Self> {
        if !demo.is_uniform() {
            return Err(Error::NotUniform);
        }
        let half = cfg.half_window(demo.rate);
        let times = demo.times();
        let len = times.len();
        let objects: Vec<_> = demo.objects().collect();

        let object_bins: BTreeMap<&str, Vec<Vec<i64>>> =
            objects.iter().map(|o| (o.id.as_str(), track_bins(o, cfg))).collect();

        let mut ho = BTreeMap::new();
        for hand in demo.hands() {
            let hand_bins = track_bins(hand, cfg);
            for obj in &objects {
                let ob = &object_bins[obj.id.as_str()];
                let mut mi = vec![None; len];
                for k in covered_frames(len, half) {
                    let w = k - half..k + half + 1;
                    let total: f64 = hand_bins
                        .iter()
                        .zip(ob)
                        .map(|(x, y)| mutual_information_of_bins(&x[w.clone()], &y[w.clone()], cfg.entropy_scale))
                        .sum();
                    mi[k] = Some(total);
                }
                let mean_distance = window_means(&distance_series(hand, obj, cfg), half);
                ho.insert((hand.id.clone(), obj.id.clone()), HandObjectSignals { mean_distance, mi });
            }
        }

        let mut oo = BTreeMap::new();
        for (i, a) in objects.iter().enumerate() {
            for b in &objects[i + 1..] {
                let d = distance_series(a, b, cfg);
                oo.insert(
                    pair_key(&a.id, &b.id),
                    ObjectPairSignals {
                        mean_distance: window_means(&d, half),
                        distance_entropy: window_entropies(&d, half, cfg),
                    },
                );
            }
        }

        Ok(Self { times, rate: demo.rate, half, ho, oo })
    }

    pub fn frame_count(&self) -> usize {
        self.times.len()
    }

    pub fn is_covered(&self, k: usize) -> bool {
        covered_frames(self.times.len(), self.half).contains(&k)
    }

    pub fn hand_object(&self, hand: &str, object: &str) -> Option<&HandObjectSignals> {
        self.ho.get(&(hand.to_string(), object.to_string()))
    }

    pub fn object_pair(&self, a: &str, b: &str) -> Option<&ObjectPairSignals> {
        self.oo.get(&pair_key(a, b))
    }

    /// Trend of the last `n` values of `series` ending at frame `k`. Fewer
    /// than `n` covered values evaluate as not decreasing.
    pub fn trend_at(series: &[Option<f64>], k: usize, n: usize) -> Trend {
        if k + 1 < n {
            return Trend::NotDecreasing;
        }
        let tail: Option<Vec<f64>> = series[k + 1 - n..=k].iter().copied().collect();
        match tail {
            Some(values) => trend(&values, n).unwrap_or(Trend::NotDecreasing),
            None => Trend::NotDecreasing,
        }
    }
}

//! Stage 2 alignment metrics: TWED, LCSS, EDR, ERP, DTW and an n-gram
//! local-context similarity, each as a raw distance plus a normalised
//! similarity in [0, 1].
//!
//! All metrics run on motion-word sequences with implicit timestamps
//! `t_i = i` (1-based patch index). The mismatch cost is the indicator
//! `d(a, b) = 1[a != b]` except for ERP, which uses `|a - b|` on the raw
//! word values. Two caveats worth knowing:
//!
//! - The TWED recursion used here charges the cross-sequence mismatch cost
//!   `d(q_i, s_j)` in its deletion branches, not the within-sequence cost of
//!   Marteau's original formulation. Both sequences are padded with a
//!   sentinel value 0 at timestamp 0, and `D(i,0) = D(0,j) = +inf`.
//! - ERP arithmetic (`|a - b|`, gap reference `g`) treats nominal token ids
//!   as magnitudes. It is the only scoring metric where id values, not just
//!   equality, matter.
//!
//! Every DP uses two-row rolling storage, so memory is O(min(|q|, |s|)).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters for the alignment metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignParams {
    /// TWED temporal stiffness (penalty per unit timestamp displacement).
    pub twed_nu: f64,
    /// TWED insertion/deletion penalty.
    pub twed_lambda: f64,
    /// LCSS match tolerance; 0 means exact symbol match.
    pub lcss_epsilon: f64,
    /// LCSS lag bound `|i - j| <= delta`; `None` means unbounded.
    pub lcss_delta: Option<usize>,
    /// EDR match tolerance; 0 means exact symbol match.
    pub edr_epsilon: f64,
    /// ERP gap reference value `g`.
    pub erp_gap: f64,
    /// ERP gap penalty strength `beta`.
    pub erp_beta: f64,
    /// n-gram order for the local-context similarity.
    pub ngram_n: usize,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            twed_nu: 0.1,
            twed_lambda: 1.0,
            lcss_epsilon: 0.0,
            lcss_delta: None,
            edr_epsilon: 0.0,
            erp_gap: 0.0,
            erp_beta: 0.5,
            ngram_n: 2,
        }
    }
}

impl AlignParams {
    pub fn validate(&self) -> Result<()> {
        let non_negative = |x: f64| !x.is_nan() && x >= 0.0;
        if !non_negative(self.twed_nu) || !non_negative(self.twed_lambda) {
            return Err(Error::InvalidInput(
                "twed_nu and twed_lambda must be non-negative".into(),
            ));
        }
        if !non_negative(self.lcss_epsilon) || !non_negative(self.edr_epsilon) {
            return Err(Error::InvalidInput(
                "lcss_epsilon and edr_epsilon must be non-negative".into(),
            ));
        }
        if self.erp_beta.is_nan() || self.erp_beta <= 0.0 {
            return Err(Error::InvalidInput("erp_beta must be positive".into()));
        }
        if !self.erp_gap.is_finite() {
            return Err(Error::InvalidInput("erp_gap must be finite".into()));
        }
        if self.ngram_n < 2 {
            return Err(Error::InvalidInput("ngram_n must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Hist,
    Twed,
    Lcss,
    Edr,
    Erp,
    Ngram,
    Dtw,
}

/// A raw metric value with its normalised similarity.
///
/// `raw_distance` is the metric's own DP statistic: the accumulated cost for
/// TWED/EDR/ERP, the match count for LCSS, and `1 - similarity` for the
/// similarity-native n-gram metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricScore {
    pub metric: MetricKind,
    pub raw_distance: f64,
    pub similarity: f64,
}

fn check_non_empty(q: &[u32], s: &[u32]) -> Result<()> {
    if q.is_empty() {
        return Err(Error::EmptySequence { id: "q".into() });
    }
    if s.is_empty() {
        return Err(Error::EmptySequence { id: "s".into() });
    }
    Ok(())
}

/// Average sequence length, the normaliser shared by TWED, LCSS and ERP.
fn mean_len(q: &[u32], s: &[u32]) -> f64 {
    (q.len() + s.len()) as f64 / 2.0
}

#[inline]
fn mismatch(a: u32, b: u32) -> f64 {
    if a == b {
        0.0
    } else {
        1.0
    }
}

/// Time Warp Edit Distance with the exponential similarity transform
/// `exp(-TWED / (2 * mean_len))`.
pub fn twed(q: &[u32], s: &[u32], params: &AlignParams) -> Result<MetricScore> {
    check_non_empty(q, s)?;
    let nu = params.twed_nu;
    let lambda = params.twed_lambda;

    // Roll over the shorter sequence; the recursion is symmetric.
    let (a, b) = if q.len() >= s.len() { (q, s) } else { (s, q) };
    let m = a.len();
    let n = b.len();
    // padded[i] = sentinel 0 at i == 0, else sequence value; timestamp = i.
    let pad = |seq: &[u32], i: usize| -> u32 {
        if i == 0 {
            0
        } else {
            seq[i - 1]
        }
    };

    let mut prev = vec![f64::INFINITY; n + 1];
    let mut cur = vec![f64::INFINITY; n + 1];
    prev[0] = 0.0;
    for i in 1..=m {
        cur[0] = f64::INFINITY;
        for j in 1..=n {
            let cost = mismatch(pad(a, i), pad(b, j));
            let time_pen = nu * (i as f64 - j as f64).abs();
            let matched =
                prev[j - 1] + cost + mismatch(pad(a, i - 1), pad(b, j - 1)) + time_pen;
            let delete_a = prev[j] + cost + time_pen + lambda;
            let delete_b = cur[j - 1] + cost + time_pen + lambda;
            cur[j] = matched.min(delete_a).min(delete_b);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let dist = prev[n];
    Ok(MetricScore {
        metric: MetricKind::Twed,
        raw_distance: dist,
        similarity: (-dist / (2.0 * mean_len(q, s))).exp(),
    })
}

/// Longest Common Subsequence length with similarity `LCSS / mean_len`.
pub fn lcss(q: &[u32], s: &[u32], params: &AlignParams) -> Result<MetricScore> {
    check_non_empty(q, s)?;
    let eps = params.lcss_epsilon;
    let delta = params.lcss_delta;
    let (a, b) = if q.len() >= s.len() { (q, s) } else { (s, q) };
    let m = a.len();
    let n = b.len();

    let mut prev = vec![0usize; n + 1];
    let mut cur = vec![0usize; n + 1];
    for i in 1..=m {
        cur[0] = 0;
        for j in 1..=n {
            let within_lag = delta.is_none_or(|d| i.abs_diff(j) <= d);
            let matches =
                (f64::from(a[i - 1]) - f64::from(b[j - 1])).abs() <= eps && within_lag;
            cur[j] = if matches {
                prev[j - 1] + 1
            } else {
                prev[j].max(cur[j - 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let length = prev[n];
    Ok(MetricScore {
        metric: MetricKind::Lcss,
        raw_distance: length as f64,
        similarity: (length as f64 / mean_len(q, s)).clamp(0.0, 1.0),
    })
}

/// Edit Distance on Real sequences with similarity `1 - EDR / max(|q|, |s|)`.
pub fn edr(q: &[u32], s: &[u32], params: &AlignParams) -> Result<MetricScore> {
    check_non_empty(q, s)?;
    let eps = params.edr_epsilon;
    let (a, b) = if q.len() >= s.len() { (q, s) } else { (s, q) };
    let m = a.len();
    let n = b.len();

    let mut prev: Vec<usize> = (0..=n).collect();
    let mut cur = vec![0usize; n + 1];
    for i in 1..=m {
        cur[0] = i;
        for j in 1..=n {
            let cost = if (f64::from(a[i - 1]) - f64::from(b[j - 1])).abs() <= eps {
                0
            } else {
                1
            };
            cur[j] = (prev[j - 1] + cost).min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let edits = prev[n];
    Ok(MetricScore {
        metric: MetricKind::Edr,
        raw_distance: edits as f64,
        similarity: 1.0 - edits as f64 / q.len().max(s.len()) as f64,
    })
}

/// Edit distance with Real Penalty: element cost `|a - b|`, gap cost
/// `beta * |x - g|`, similarity `exp(-ERP / mean_len)`.
pub fn erp(q: &[u32], s: &[u32], params: &AlignParams) -> Result<MetricScore> {
    check_non_empty(q, s)?;
    let g = params.erp_gap;
    let beta = params.erp_beta;
    let gap = |x: u32| beta * (f64::from(x) - g).abs();
    let (a, b) = if q.len() >= s.len() { (q, s) } else { (s, q) };
    let m = a.len();
    let n = b.len();

    let mut prev = vec![0.0f64; n + 1];
    for j in 1..=n {
        prev[j] = prev[j - 1] + gap(b[j - 1]);
    }
    let mut cur = vec![0.0f64; n + 1];
    let mut row_start = 0.0;
    for i in 1..=m {
        row_start += gap(a[i - 1]);
        cur[0] = row_start;
        for j in 1..=n {
            let sub = prev[j - 1] + (f64::from(a[i - 1]) - f64::from(b[j - 1])).abs();
            let del_a = prev[j] + gap(a[i - 1]);
            let del_b = cur[j - 1] + gap(b[j - 1]);
            cur[j] = sub.min(del_a).min(del_b);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let dist = prev[n];
    Ok(MetricScore {
        metric: MetricKind::Erp,
        raw_distance: dist,
        similarity: (-dist / mean_len(q, s)).exp(),
    })
}

/// Dynamic Time Warping raw distance under the indicator cost. Diagnostic
/// only: it is length-sensitive and never enters the combined score.
pub fn dtw(q: &[u32], s: &[u32]) -> Result<f64> {
    check_non_empty(q, s)?;
    let (a, b) = if q.len() >= s.len() { (q, s) } else { (s, q) };
    let m = a.len();
    let n = b.len();

    let mut prev = vec![f64::INFINITY; n + 1];
    let mut cur = vec![f64::INFINITY; n + 1];
    prev[0] = 0.0;
    for i in 1..=m {
        cur[0] = f64::INFINITY;
        for j in 1..=n {
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = mismatch(a[i - 1], b[j - 1]) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[n])
}

/// Cosine similarity between l2-normalised n-gram count vectors over the
/// sliding windows of each sequence. A sequence shorter than `n` yields
/// similarity 0 (with a diagnostic warning), never an error.
pub fn ngram_sim(q: &[u32], s: &[u32], n: usize) -> MetricScore {
    let sim = if q.len() < n || s.len() < n {
        log::warn!(
            "n-gram similarity degenerate: sequence shorter than n={n} ({} vs {})",
            q.len(),
            s.len()
        );
        0.0
    } else {
        let qc = ngram_counts(q, n);
        let sc = ngram_counts(s, n);
        let dot: f64 = qc
            .iter()
            .filter_map(|(gram, &c)| sc.get(gram).map(|&d| c * d))
            .sum();
        let nq: f64 = qc.values().map(|c| c * c).sum::<f64>().sqrt();
        let ns: f64 = sc.values().map(|c| c * c).sum::<f64>().sqrt();
        (dot / (nq * ns)).clamp(0.0, 1.0)
    };
    MetricScore {
        metric: MetricKind::Ngram,
        raw_distance: 1.0 - sim,
        similarity: sim,
    }
}

fn ngram_counts(seq: &[u32], n: usize) -> HashMap<&[u32], f64> {
    let mut counts: HashMap<&[u32], f64> = HashMap::new();
    for window in seq.windows(n) {
        *counts.entry(window).or_insert(0.0) += 1.0;
    }
    counts
}

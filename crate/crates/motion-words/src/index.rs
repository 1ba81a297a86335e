//! Stage 1: the histogram index.
//!
//! Every token sequence is summarised as an l2-normalised K-bin bag-of-words
//! histogram, compared by cosine similarity in O(K) per pair. A query scans
//! the whole index and keeps an adaptive shortlist of
//! `L = max(floor(N/2), min(200, N))` candidates for re-ranking.
//!
//! Sequences are also tagged with a periodicity flag: a sequence counts as
//! periodic when the normalised autocorrelation of its word values has at
//! least `min_peaks` strict interior local maxima above `theta`. The flag is
//! stored as metadata only and never enters scoring. Note the autocorrelation
//! runs over raw word values, so arbitrary code indices act as magnitudes;
//! that is intentional here, and effective at spotting repeating token cycles.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codebook::TokenSequence;
use crate::error::{Error, Result};
use crate::io;

pub const INDEX_FORMAT_VERSION: u32 = 1;

/// An l2-normalised bag-of-words histogram over the K motion words.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: Vec<f64>,
    /// Token count of the source sequence.
    pub source_len: usize,
}

/// Periodicity detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityConfig {
    /// Confidence threshold a local maximum must exceed.
    pub theta: f64,
    /// Minimum number of qualifying peaks.
    pub min_peaks: usize,
    /// Largest lag examined; `None` means `floor(T/2)`.
    pub max_lag: Option<usize>,
}

impl Default for PeriodicityConfig {
    fn default() -> Self {
        PeriodicityConfig {
            theta: 0.6,
            min_peaks: 2,
            max_lag: None,
        }
    }
}

impl PeriodicityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidInput(format!(
                "theta must lie in (0, 1), got {}",
                self.theta
            )));
        }
        if self.min_peaks == 0 {
            return Err(Error::InvalidInput("min_peaks must be >= 1".into()));
        }
        Ok(())
    }
}

/// One indexed sequence: stored tokens, histogram and periodicity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: String,
    pub label: Option<String>,
    pub words: Vec<u32>,
    pub hist: Histogram,
    pub periodic: bool,
}

/// The searchable corpus. Built once, then immutable for queries; appends
/// require exclusive access and bump the revision counter.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionIndex {
    pub k: usize,
    pub entries: Vec<IndexEntry>,
    revision: u64,
}

#[derive(Serialize, Deserialize)]
struct IndexEntryFile {
    id: String,
    label: Option<String>,
    words: Vec<u32>,
    hist: Vec<f64>,
    periodic: bool,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    version: u32,
    #[serde(rename = "K")]
    k: usize,
    entries: Vec<IndexEntryFile>,
}

/// Histogram of a token sequence: `bins[k] = count(k) / ||counts||_2`.
pub fn build_histogram(seq: &TokenSequence, k: usize) -> Result<Histogram> {
    histogram_from_words(&seq.words, k, &seq.id)
}

pub(crate) fn histogram_from_words(words: &[u32], k: usize, id: &str) -> Result<Histogram> {
    if words.is_empty() {
        return Err(Error::EmptySequence { id: id.to_string() });
    }
    let mut bins = vec![0.0f64; k];
    for &w in words {
        if w as usize >= k {
            return Err(Error::VocabularyOverflow {
                id: id.to_string(),
                word: w,
                vocab: k,
            });
        }
        bins[w as usize] += 1.0;
    }
    let norm = bins.iter().map(|b| b * b).sum::<f64>().sqrt();
    for b in &mut bins {
        *b /= norm;
    }
    Ok(Histogram {
        bins,
        source_len: words.len(),
    })
}

/// Cosine similarity of two histograms, clamped into [0, 1].
pub fn cosine_sim(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.bins.len() != b.bins.len() {
        return Err(Error::ConfigMismatch(format!(
            "histogram sizes differ: {} vs {}",
            a.bins.len(),
            b.bins.len()
        )));
    }
    Ok(hist_dot(a, b))
}

pub(crate) fn hist_dot(a: &Histogram, b: &Histogram) -> f64 {
    let dot: f64 = a.bins.iter().zip(&b.bins).map(|(x, y)| x * y).sum();
    dot.clamp(0.0, 1.0)
}

/// Adaptive shortlist size `L = max(floor(N/2), min(200, N))`, clamped to N.
pub fn shortlist_size(n: usize) -> usize {
    (n / 2).max(200.min(n)).min(n)
}

/// The L highest-cosine entries for a query histogram, highest first, ties
/// broken by id. Returns an empty list for an empty index.
pub fn shortlist(query: &Histogram, idx: &MotionIndex) -> Result<Vec<(String, f64)>> {
    let ranked = shortlist_indices(query, idx, shortlist_size(idx.entries.len()))?;
    Ok(ranked
        .into_iter()
        .map(|(i, score)| (idx.entries[i].id.clone(), score))
        .collect())
}

/// Allocation-light shortlist core: returns `(entry index, cosine)` pairs in
/// descending score order, ties by id, truncated to `limit`.
pub fn shortlist_indices(
    query: &Histogram,
    idx: &MotionIndex,
    limit: usize,
) -> Result<Vec<(usize, f64)>> {
    if query.bins.len() != idx.k {
        return Err(Error::ConfigMismatch(format!(
            "query histogram has {} bins, index expects {}",
            query.bins.len(),
            idx.k
        )));
    }
    let all: Vec<usize> = (0..idx.entries.len()).collect();
    Ok(rank_by_cosine(query, idx, &all, limit))
}

/// Rank `pool` (entry indices) by cosine against the query, descending,
/// ties by id ascending, truncated to `limit`. Selects the top `limit`
/// first, so the full pool is never sorted.
pub(crate) fn rank_by_cosine(
    query: &Histogram,
    idx: &MotionIndex,
    pool: &[usize],
    limit: usize,
) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = pool
        .iter()
        .map(|&i| (i, hist_dot(query, &idx.entries[i].hist)))
        .collect();
    if limit == 0 {
        return Vec::new();
    }
    let cmp = |a: &(usize, f64), b: &(usize, f64)| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| idx.entries[a.0].id.cmp(&idx.entries[b.0].id))
    };
    if limit < scored.len() {
        scored.select_nth_unstable_by(limit - 1, cmp);
        scored.truncate(limit);
    }
    scored.sort_unstable_by(cmp);
    scored
}

/// Normalised autocorrelation of the word values at lag `tau`:
///
/// ```text
/// AC(tau) = sum_{t=1}^{T-tau} (w_t - mean)(w_{t+tau} - mean)
///         / sum_{t=1}^{T}     (w_t - mean)^2
/// ```
pub fn autocorrelation(words: &[u32], tau: usize) -> Result<f64> {
    let t = words.len();
    if tau == 0 || tau >= t {
        return Err(Error::InvalidInput(format!(
            "lag {tau} out of range for length {t}"
        )));
    }
    let vals: Vec<f64> = words.iter().map(|&w| f64::from(w)).collect();
    let mean = vals.iter().sum::<f64>() / t as f64;
    let denom: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
    if denom == 0.0 {
        return Err(Error::UndefinedVariance);
    }
    let num: f64 = (0..t - tau)
        .map(|i| (vals[i] - mean) * (vals[i + tau] - mean))
        .sum();
    Ok(num / denom)
}

/// True when at least `min_peaks` lags are strict interior local maxima of
/// the autocorrelation with a value above `theta`. Degenerate sequences
/// (shorter than 3 tokens, or zero variance) are non-periodic.
pub fn is_periodic(words: &[u32], cfg: &PeriodicityConfig) -> bool {
    let t = words.len();
    if t < 3 {
        return false;
    }
    let max_lag = cfg.max_lag.unwrap_or(t / 2).min(t - 1);
    if max_lag < 3 {
        return false;
    }
    let ac: Vec<f64> = match (1..=max_lag)
        .map(|tau| autocorrelation(words, tau))
        .collect::<Result<Vec<_>>>()
    {
        Ok(ac) => ac,
        Err(_) => return false, // zero variance
    };
    let mut peaks = 0;
    // Peak candidates exclude the boundary lags 1 and max_lag.
    for tau in 2..max_lag {
        let here = ac[tau - 1];
        if here > cfg.theta && here > ac[tau - 2] && here > ac[tau] {
            peaks += 1;
        }
    }
    peaks >= cfg.min_peaks
}

impl MotionIndex {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("vocabulary size K must be >= 1".into()));
        }
        Ok(MotionIndex {
            k,
            entries: Vec::new(),
            revision: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Bumped on every append; lets long-lived readers detect staleness.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Add one sequence: histogram, periodicity flag, duplicate-id check.
    pub fn append(&mut self, seq: &TokenSequence, pcfg: &PeriodicityConfig) -> Result<()> {
        pcfg.validate()?;
        if self.entries.iter().any(|e| e.id == seq.id) {
            return Err(Error::DuplicateId(seq.id.clone()));
        }
        let hist = build_histogram(seq, self.k)?;
        self.entries.push(IndexEntry {
            id: seq.id.clone(),
            label: seq.label.clone(),
            words: seq.words.clone(),
            hist,
            periodic: is_periodic(&seq.words, pcfg),
        });
        self.revision += 1;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = IndexFile {
            version: INDEX_FORMAT_VERSION,
            k: self.k,
            entries: self
                .entries
                .iter()
                .map(|e| IndexEntryFile {
                    id: e.id.clone(),
                    label: e.label.clone(),
                    words: e.words.clone(),
                    hist: e.hist.bins.clone(),
                    periodic: e.periodic,
                })
                .collect(),
        };
        io::write_json(path.as_ref(), &file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file: IndexFile = io::read_json(path)?;
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message,
        };
        if file.version != INDEX_FORMAT_VERSION {
            return Err(parse_err(format!(
                "unsupported index version {}",
                file.version
            )));
        }
        if file.k == 0 {
            return Err(parse_err("vocabulary size K must be >= 1".into()));
        }
        let mut seen = HashSet::new();
        let mut entries = Vec::with_capacity(file.entries.len());
        for e in file.entries {
            if !seen.insert(e.id.clone()) {
                return Err(parse_err(format!("duplicate sequence id '{}'", e.id)));
            }
            if e.words.is_empty() {
                return Err(parse_err(format!("entry '{}' has no tokens", e.id)));
            }
            if let Some(&w) = e.words.iter().find(|&&w| w as usize >= file.k) {
                return Err(parse_err(format!(
                    "entry '{}': token {w} exceeds K={}",
                    e.id, file.k
                )));
            }
            if e.hist.len() != file.k {
                return Err(parse_err(format!(
                    "entry '{}': histogram has {} bins, expected {}",
                    e.id,
                    e.hist.len(),
                    file.k
                )));
            }
            let norm: f64 = e.hist.iter().map(|b| b * b).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 || e.hist.iter().any(|&b| b.is_nan() || b < 0.0) {
                return Err(parse_err(format!(
                    "entry '{}': histogram is not a unit vector of non-negative bins",
                    e.id
                )));
            }
            entries.push(IndexEntry {
                hist: Histogram {
                    bins: e.hist,
                    source_len: e.words.len(),
                },
                id: e.id,
                label: e.label,
                words: e.words,
                periodic: e.periodic,
            });
        }
        Ok(MotionIndex {
            k: file.k,
            entries,
            revision: 0,
        })
    }
}

/// Build an index over the given sequences. Ids must be unique and every
/// sequence non-empty.
pub fn build_index(
    tokens: &[TokenSequence],
    k: usize,
    pcfg: &PeriodicityConfig,
) -> Result<MotionIndex> {
    if tokens.is_empty() {
        return Err(Error::InvalidInput(
            "cannot build an index from zero sequences".into(),
        ));
    }
    pcfg.validate()?;
    let mut seen = HashSet::with_capacity(tokens.len());
    for seq in tokens {
        if !seen.insert(seq.id.as_str()) {
            return Err(Error::DuplicateId(seq.id.clone()));
        }
    }
    let mut idx = MotionIndex::new(k)?;
    idx.entries.reserve(tokens.len());
    for seq in tokens {
        let hist = build_histogram(seq, k)?;
        idx.entries.push(IndexEntry {
            id: seq.id.clone(),
            label: seq.label.clone(),
            words: seq.words.clone(),
            hist,
            periodic: is_periodic(&seq.words, pcfg),
        });
    }
    idx.revision = 1;
    Ok(idx)
}

//! The retrieval engine: cosine shortlisting followed by multi-metric
//! re-ranking under a convex weight vector, plus an exhaustive brute-force
//! back-end that serves as the accuracy ceiling.
//!
//! The combined score of a candidate is
//!
//! ```text
//! S = w_hist * cosine + w_twed * phi_twed + w_lcss * phi_lcss
//!   + w_edr * phi_edr + w_erp * phi_erp + w_ngram * phi_ngram
//! ```
//!
//! with weights summing to 1, so S always lies in [0, 1]. The histogram term
//! reuses the Stage-1 cosine value rather than recomputing it. Candidates are
//! scored in parallel and merged deterministically by (score desc, id asc).

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{self, AlignParams};
use crate::codebook::TokenSequence;
use crate::error::{Error, Result};
use crate::index::{
    cosine_sim, histogram_from_words, rank_by_cosine, shortlist_size, Histogram, MotionIndex,
    PeriodicityConfig,
};
use crate::io;

/// Convex weights over the six similarity terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    #[serde(rename = "w_hist")]
    pub hist: f64,
    #[serde(rename = "w_twed")]
    pub twed: f64,
    #[serde(rename = "w_lcss")]
    pub lcss: f64,
    #[serde(rename = "w_edr")]
    pub edr: f64,
    #[serde(rename = "w_erp")]
    pub erp: f64,
    #[serde(rename = "w_ngram")]
    pub ngram: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            hist: 0.30,
            twed: 0.15,
            lcss: 0.15,
            edr: 0.15,
            erp: 0.10,
            ngram: 0.15,
        }
    }
}

impl ScoreWeights {
    fn as_array(&self) -> [f64; 6] {
        [self.hist, self.twed, self.lcss, self.edr, self.erp, self.ngram]
    }

    /// Weights must be non-negative and sum to 1 within 1e-9. A non-unit sum
    /// is an error; renormalisation only happens through `renormalized`.
    pub fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput(
                "score weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "score weights sum to {sum}, expected 1 (pass --renormalize-weights to rescale)"
            )));
        }
        Ok(())
    }

    /// Rescale so the weights sum to 1.
    pub fn renormalized(&self) -> Result<Self> {
        let w = self.as_array();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput(
                "score weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidInput(
                "cannot renormalize all-zero weights".into(),
            ));
        }
        Ok(ScoreWeights {
            hist: self.hist / sum,
            twed: self.twed / sum,
            lcss: self.lcss / sum,
            edr: self.edr / sum,
            erp: self.erp / sum,
            ngram: self.ngram / sum,
        })
    }

    /// Combine a vector of per-metric similarities (hist, twed, lcss, edr,
    /// erp, ngram order) into the scalar score.
    pub fn combine(&self, phi: &[f64; 6]) -> f64 {
        self.as_array().iter().zip(phi).map(|(w, p)| w * p).sum()
    }
}

/// Full engine configuration, loadable from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EngineConfig {
    #[serde(default)]
    pub weights: ScoreWeights,
    #[serde(default)]
    pub align: AlignParams,
    #[serde(default)]
    pub periodicity: PeriodicityConfig,
    /// Optional hard cap on the Stage-1 shortlist length.
    #[serde(default)]
    pub shortlist_cap: Option<usize>,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.align.validate()?;
        self.periodicity.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg = Self::load_raw(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load without validating, for callers that apply overrides (or
    /// renormalise weights) before checking.
    pub fn load_raw(path: impl AsRef<Path>) -> Result<Self> {
        io::read_json(path.as_ref())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_json(path.as_ref(), self)
    }
}

/// Which candidate enumeration produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    TwoStage,
    BruteForce,
}

/// One similarity term: the normalised value and its weighted contribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub phi: f64,
    pub weighted: f64,
}

/// Per-metric breakdown of a combined score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub hist: Contribution,
    pub twed: Contribution,
    pub lcss: Contribution,
    pub edr: Contribution,
    pub erp: Contribution,
    pub ngram: Contribution,
}

/// A scored pair: the convex combination and its per-metric terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    pub combined: f64,
    pub breakdown: ScoreBreakdown,
}

/// One ranked candidate in a retrieval result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub candidate_id: String,
    pub combined_score: f64,
    /// 1-based position in the Stage-1 cosine ordering (over the full pool
    /// for the brute-force back-end).
    pub shortlist_rank: usize,
    pub breakdown: ScoreBreakdown,
    /// Raw DTW distance, filled only when diagnostics are requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dtw_distance: Option<f64>,
}

/// Wall-clock duration of each stage. Diagnostic only; never serialized, so
/// primary outputs stay byte-identical across runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTiming {
    pub stage1: Duration,
    pub stage2: Duration,
}

/// Ranked retrieval output for one query.
#[derive(Debug, Clone, Serialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub backend: Backend,
    pub ranked: Vec<RankedCandidate>,
    #[serde(skip)]
    pub timing: StageTiming,
}

/// Score one query/candidate pair from scratch, including the cosine term.
pub fn score_pair(
    q: &TokenSequence,
    s: &TokenSequence,
    q_hist: &Histogram,
    s_hist: &Histogram,
    weights: &ScoreWeights,
    params: &AlignParams,
) -> Result<PairScore> {
    let hist_phi = cosine_sim(q_hist, s_hist)?;
    score_pair_with_hist(&q.words, &s.words, hist_phi, weights, params)
}

fn score_pair_with_hist(
    q: &[u32],
    s: &[u32],
    hist_phi: f64,
    weights: &ScoreWeights,
    params: &AlignParams,
) -> Result<PairScore> {
    let twed = align::twed(q, s, params)?;
    let lcss = align::lcss(q, s, params)?;
    let edr = align::edr(q, s, params)?;
    let erp = align::erp(q, s, params)?;
    let ngram = align::ngram_sim(q, s, params.ngram_n);
    let phi = [
        hist_phi,
        twed.similarity,
        lcss.similarity,
        edr.similarity,
        erp.similarity,
        ngram.similarity,
    ];
    let contribution = |w: f64, p: f64| Contribution {
        phi: p,
        weighted: w * p,
    };
    Ok(PairScore {
        combined: weights.combine(&phi),
        breakdown: ScoreBreakdown {
            hist: contribution(weights.hist, phi[0]),
            twed: contribution(weights.twed, phi[1]),
            lcss: contribution(weights.lcss, phi[2]),
            edr: contribution(weights.edr, phi[3]),
            erp: contribution(weights.erp, phi[4]),
            ngram: contribution(weights.ngram, phi[5]),
        },
    })
}

fn run_query(
    q: &TokenSequence,
    idx: &MotionIndex,
    cfg: &EngineConfig,
    k: usize,
    exclude_self: bool,
    backend: Backend,
) -> Result<RetrievalResult> {
    if q.words.is_empty() {
        return Err(Error::EmptySequence { id: q.id.clone() });
    }
    if k == 0 {
        return Err(Error::InvalidInput("top-k must be >= 1".into()));
    }
    cfg.validate()?;
    if let Some(&w) = q.words.iter().find(|&&w| w as usize >= idx.k) {
        return Err(Error::ConfigMismatch(format!(
            "query '{}' contains token {w} outside the index vocabulary K={}",
            q.id, idx.k
        )));
    }

    let stage1_start = Instant::now();
    let q_hist = histogram_from_words(&q.words, idx.k, &q.id)?;
    let pool: Vec<usize> = (0..idx.entries.len())
        .filter(|&i| !(exclude_self && idx.entries[i].id == q.id))
        .collect();
    let limit = match backend {
        Backend::TwoStage => {
            let l = shortlist_size(pool.len());
            cfg.shortlist_cap.map_or(l, |cap| l.min(cap))
        }
        Backend::BruteForce => pool.len(),
    };
    let shortlisted = rank_by_cosine(&q_hist, idx, &pool, limit);
    let stage1 = stage1_start.elapsed();

    let stage2_start = Instant::now();
    let mut ranked: Vec<RankedCandidate> = shortlisted
        .par_iter()
        .enumerate()
        .map(|(rank0, &(entry_idx, hist_phi))| {
            let entry = &idx.entries[entry_idx];
            let pair =
                score_pair_with_hist(&q.words, &entry.words, hist_phi, &cfg.weights, &cfg.align)?;
            Ok(RankedCandidate {
                candidate_id: entry.id.clone(),
                combined_score: pair.combined,
                shortlist_rank: rank0 + 1,
                breakdown: pair.breakdown,
                dtw_distance: None,
            })
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| {
        b.combined_score
            .partial_cmp(&a.combined_score)
            .unwrap()
            .then_with(|| a.candidate_id.cmp(&b.candidate_id))
    });
    ranked.truncate(k);
    let stage2 = stage2_start.elapsed();

    Ok(RetrievalResult {
        query_id: q.id.clone(),
        backend,
        ranked,
        timing: StageTiming { stage1, stage2 },
    })
}

/// Two-stage query: cosine shortlist, then re-rank the shortlist by the
/// combined score and return the top `k`. With `exclude_self` set, an index
/// entry whose id equals the query id is removed from the candidate pool.
pub fn query(
    q: &TokenSequence,
    idx: &MotionIndex,
    cfg: &EngineConfig,
    k: usize,
    exclude_self: bool,
) -> Result<RetrievalResult> {
    run_query(q, idx, cfg, k, exclude_self, Backend::TwoStage)
}

/// Brute-force query: identical scoring over every candidate, no shortlist.
pub fn query_brute_force(
    q: &TokenSequence,
    idx: &MotionIndex,
    cfg: &EngineConfig,
    k: usize,
    exclude_self: bool,
) -> Result<RetrievalResult> {
    run_query(q, idx, cfg, k, exclude_self, Backend::BruteForce)
}

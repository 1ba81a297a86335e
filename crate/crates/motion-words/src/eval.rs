//! Retrieval evaluation: leave-one-out / leave-K-out protocols, the
//! rank-weighted mean score, match rate and rank distribution, plus seeded
//! synthetic corpus generators for desk-scale experiments.
//!
//! A query counts as correct when a candidate with the same class label
//! appears among its top results. The per-query score decays with the best
//! such rank as 1.0, 0.5, 0.25 for ranks 1-3 and 0 beyond.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::codebook::TokenSequence;
use crate::engine::{self, Backend, EngineConfig};
use crate::error::{Error, Result};
use crate::index::build_index;
use crate::pose::PoseSequence;

/// Score contribution of a query whose best same-label hit sits at `best_rank`
/// (1-based); absent means no hit within the evaluated top results.
pub fn rank_score(best_rank: Option<usize>) -> Result<f64> {
    match best_rank {
        None => Ok(0.0),
        Some(0) => Err(Error::InvalidInput("rank 0 is not a valid rank".into())),
        Some(1) => Ok(1.0),
        Some(2) => Ok(0.5),
        Some(3) => Ok(0.25),
        Some(_) => Ok(0.0),
    }
}

/// How the corpus is split into reference database and query set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalProtocol {
    /// Every sequence queries the full index with itself excluded.
    LeaveOneOut,
    /// Per class, `refs_per_class` members (seeded choice) form the reference
    /// database; all remaining members are queries.
    LeaveKOut { refs_per_class: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    pub protocol: EvalProtocol,
    /// How many retrieved candidates are examined per query.
    pub top_n: usize,
    /// Vocabulary size for histograms; `None` derives `max word + 1`.
    pub vocab_k: Option<usize>,
    /// Seed for the leave-K-out split.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            protocol: EvalProtocol::LeaveOneOut,
            top_n: 3,
            vocab_k: None,
            seed: 0,
        }
    }
}

/// Counts of best-rank outcomes over all queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankHistogram {
    pub rank1: usize,
    pub rank2: usize,
    pub rank3: usize,
    /// Rank above 3 or no same-label hit at all.
    pub beyond: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub label: String,
    pub n_queries: usize,
    pub mean_score: f64,
    pub match_rate_pct: f64,
}

/// Per-query outcome row, kept for CSV export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryOutcome {
    pub query_id: String,
    pub label: String,
    pub best_rank: Option<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub backend: Backend,
    pub n_queries: usize,
    pub mean_score: f64,
    pub match_rate_pct: f64,
    pub rank_histogram: RankHistogram,
    pub per_class: Vec<ClassReport>,
    #[serde(skip)]
    pub per_query: Vec<QueryOutcome>,
}

/// Run the evaluation protocol over a labelled corpus with one back-end.
///
/// Unlabelled sequences and classes with fewer than two members are dropped
/// with a warning. The report is invariant to the ordering of `db`.
pub fn evaluate(
    db: &[TokenSequence],
    engine_cfg: &EngineConfig,
    eval_cfg: &EvalConfig,
    backend: Backend,
) -> Result<EvalReport> {
    if eval_cfg.top_n == 0 {
        return Err(Error::InvalidInput("top_n must be >= 1".into()));
    }
    engine_cfg.validate()?;

    let mut by_label: BTreeMap<&str, Vec<&TokenSequence>> = BTreeMap::new();
    let mut unlabelled = 0usize;
    for seq in db {
        match &seq.label {
            Some(label) => by_label.entry(label).or_default().push(seq),
            None => unlabelled += 1,
        }
    }
    if unlabelled > 0 {
        log::warn!("evaluation skips {unlabelled} unlabelled sequences");
    }
    by_label.retain(|label, members| {
        if members.len() < 2 {
            log::warn!("evaluation skips class '{label}': fewer than 2 members");
            false
        } else {
            true
        }
    });
    for members in by_label.values_mut() {
        members.sort_by(|a, b| a.id.cmp(&b.id));
    }

    let mut refs: Vec<&TokenSequence> = Vec::new();
    let mut queries: Vec<&TokenSequence> = Vec::new();
    let exclude_self = match eval_cfg.protocol {
        EvalProtocol::LeaveOneOut => {
            for members in by_label.values() {
                refs.extend(members.iter().copied());
                queries.extend(members.iter().copied());
            }
            true
        }
        EvalProtocol::LeaveKOut { refs_per_class } => {
            if refs_per_class == 0 {
                return Err(Error::InvalidInput("refs_per_class must be >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(eval_cfg.seed);
            for members in by_label.values() {
                let mut shuffled = members.clone();
                shuffled.shuffle(&mut rng);
                let take = refs_per_class.min(shuffled.len());
                refs.extend(shuffled[..take].iter().copied());
                queries.extend(shuffled[take..].iter().copied());
            }
            false
        }
    };
    if queries.is_empty() {
        return Err(Error::EmptyProtocol);
    }
    queries.sort_by(|a, b| a.id.cmp(&b.id));
    refs.sort_by(|a, b| a.id.cmp(&b.id));

    let vocab_k = match eval_cfg.vocab_k {
        Some(k) => k,
        None => {
            1 + by_label
                .values()
                .flatten()
                .flat_map(|s| s.words.iter())
                .copied()
                .max()
                .unwrap_or(0) as usize
        }
    };

    let ref_seqs: Vec<TokenSequence> = refs.iter().map(|s| (*s).clone()).collect();
    let index = build_index(&ref_seqs, vocab_k, &engine_cfg.periodicity)?;
    let label_of: HashMap<&str, &str> = refs
        .iter()
        .map(|s| (s.id.as_str(), s.label.as_deref().unwrap_or("")))
        .collect();

    let outcomes: Vec<QueryOutcome> = queries
        .par_iter()
        .map(|q| {
            let result = match backend {
                Backend::TwoStage => {
                    engine::query(q, &index, engine_cfg, eval_cfg.top_n, exclude_self)?
                }
                Backend::BruteForce => engine::query_brute_force(
                    q,
                    &index,
                    engine_cfg,
                    eval_cfg.top_n,
                    exclude_self,
                )?,
            };
            let label = q.label.as_deref().unwrap_or("");
            let best_rank = result
                .ranked
                .iter()
                .position(|c| label_of.get(c.candidate_id.as_str()) == Some(&label))
                .map(|p| p + 1);
            Ok(QueryOutcome {
                query_id: q.id.clone(),
                label: label.to_string(),
                best_rank,
                score: rank_score(best_rank)?,
            })
        })
        .collect::<Result<_>>()?;

    let n = outcomes.len();
    let mut hist = RankHistogram {
        rank1: 0,
        rank2: 0,
        rank3: 0,
        beyond: 0,
    };
    let mut matched = 0usize;
    let mut score_sum = 0.0f64;
    let mut class_acc: BTreeMap<&str, (usize, f64, usize)> = BTreeMap::new();
    for o in &outcomes {
        match o.best_rank {
            Some(1) => hist.rank1 += 1,
            Some(2) => hist.rank2 += 1,
            Some(3) => hist.rank3 += 1,
            _ => hist.beyond += 1,
        }
        if o.best_rank.is_some() {
            matched += 1;
        }
        score_sum += o.score;
        let acc = class_acc.entry(o.label.as_str()).or_insert((0, 0.0, 0));
        acc.0 += 1;
        acc.1 += o.score;
        if o.best_rank.is_some() {
            acc.2 += 1;
        }
    }
    let per_class = class_acc
        .into_iter()
        .map(|(label, (cn, cscore, cmatched))| ClassReport {
            label: label.to_string(),
            n_queries: cn,
            mean_score: cscore / cn as f64,
            match_rate_pct: 100.0 * cmatched as f64 / cn as f64,
        })
        .collect();

    Ok(EvalReport {
        backend,
        n_queries: n,
        mean_score: score_sum / n as f64,
        match_rate_pct: 100.0 * matched as f64 / n as f64,
        rank_histogram: hist,
        per_class,
        per_query: outcomes,
    })
}

/// Settings for the synthetic token-corpus generator.
#[derive(Debug, Clone, Copy)]
pub struct SynthCorpusConfig {
    pub n_classes: usize,
    pub per_class: usize,
    /// Length of each class template before perturbation.
    pub template_len: usize,
    /// Vocabulary size the class sub-alphabets are carved from.
    pub k: usize,
    pub substitution_rate: f64,
    pub insertion_rate: f64,
    pub deletion_rate: f64,
    /// Probability per token of a repetition or drop (tempo change).
    pub tempo_jitter: f64,
    /// Fraction of a class block shared with the next class's alphabet.
    pub alphabet_overlap: f64,
    pub rng_seed: u64,
}

impl Default for SynthCorpusConfig {
    fn default() -> Self {
        SynthCorpusConfig {
            n_classes: 10,
            per_class: 20,
            template_len: 40,
            k: 512,
            substitution_rate: 0.1,
            insertion_rate: 0.05,
            deletion_rate: 0.05,
            tempo_jitter: 0.0,
            alphabet_overlap: 0.2,
            rng_seed: 0,
        }
    }
}

impl SynthCorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.per_class == 0 {
            return Err(Error::InvalidInput(
                "n_classes and per_class must be >= 1".into(),
            ));
        }
        if self.n_classes * self.per_class < 2 {
            return Err(Error::InvalidInput("corpus needs at least 2 members".into()));
        }
        if self.template_len == 0 {
            return Err(Error::InvalidInput("template_len must be >= 1".into()));
        }
        if self.k < self.n_classes {
            return Err(Error::InvalidInput(format!(
                "vocabulary K={} smaller than n_classes={}",
                self.k, self.n_classes
            )));
        }
        let rates = [
            self.substitution_rate,
            self.insertion_rate,
            self.deletion_rate,
        ];
        if rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::InvalidInput(
                "substitution/insertion/deletion rates must lie in [0, 1)".into(),
            ));
        }
        if rates.iter().sum::<f64>() >= 1.0 {
            return Err(Error::InvalidInput("perturbation rates must sum below 1".into()));
        }
        if !(0.0..1.0).contains(&self.tempo_jitter) {
            return Err(Error::InvalidInput("tempo_jitter must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.alphabet_overlap) {
            return Err(Error::InvalidInput(
                "alphabet_overlap must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Generate a labelled synthetic token corpus.
///
/// Each class owns a block of the vocabulary, widened into the next block by
/// the overlap fraction. One uniform-random template per class is perturbed
/// per member by seeded substitutions, insertions, deletions and tempo jitter
/// (token repetition or drop). Deterministic for a fixed seed.
pub fn gen_synth_corpus(cfg: &SynthCorpusConfig) -> Result<Vec<TokenSequence>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let block = cfg.k / cfg.n_classes;
    let alpha_len = (block as f64 * (1.0 + cfg.alphabet_overlap)).ceil() as usize;
    let alpha_len = alpha_len.clamp(1, cfg.k);
    let mut corpus = Vec::with_capacity(cfg.n_classes * cfg.per_class);
    for class in 0..cfg.n_classes {
        let alphabet: Vec<u32> = (0..alpha_len)
            .map(|i| ((class * block + i) % cfg.k) as u32)
            .collect();
        let template: Vec<u32> = (0..cfg.template_len)
            .map(|_| alphabet[rng.random_range(0..alphabet.len())])
            .collect();
        for member in 0..cfg.per_class {
            let words = perturb(&template, &alphabet, cfg, &mut rng);
            corpus.push(TokenSequence {
                id: format!("c{class:03}-m{member:03}"),
                label: Some(format!("class{class:03}")),
                words,
            });
        }
    }
    Ok(corpus)
}

fn perturb(
    template: &[u32],
    alphabet: &[u32],
    cfg: &SynthCorpusConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<u32> {
    let mut out = Vec::with_capacity(template.len() + 4);
    for &w in template {
        if rng.random::<f64>() < cfg.insertion_rate {
            out.push(alphabet[rng.random_range(0..alphabet.len())]);
        }
        let r = rng.random::<f64>();
        if r < cfg.substitution_rate {
            out.push(alphabet[rng.random_range(0..alphabet.len())]);
        } else if r < cfg.substitution_rate + cfg.deletion_rate {
            // deleted
        } else {
            out.push(w);
        }
    }
    if cfg.tempo_jitter > 0.0 {
        let mut jittered = Vec::with_capacity(out.len() + 4);
        for &w in &out {
            let r = rng.random::<f64>();
            if r < cfg.tempo_jitter / 2.0 {
                jittered.push(w);
                jittered.push(w);
            } else if r < cfg.tempo_jitter {
                // dropped
            } else {
                jittered.push(w);
            }
        }
        out = jittered;
    }
    if out.is_empty() {
        out.push(template[0]);
    }
    out
}

/// Settings for the synthetic pose generator used in end-to-end pipelines.
#[derive(Debug, Clone, Copy)]
pub struct SynthPoseConfig {
    pub n_classes: usize,
    pub per_class: usize,
    pub frames: usize,
    pub joints: usize,
    pub fps: f64,
    /// Uniform coordinate noise amplitude per member.
    pub noise: f64,
    pub rng_seed: u64,
}

impl Default for SynthPoseConfig {
    fn default() -> Self {
        SynthPoseConfig {
            n_classes: 4,
            per_class: 5,
            frames: 64,
            joints: 8,
            fps: 30.0,
            noise: 0.02,
            rng_seed: 0,
        }
    }
}

impl SynthPoseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.per_class == 0 {
            return Err(Error::InvalidInput(
                "n_classes and per_class must be >= 1".into(),
            ));
        }
        if self.frames == 0 || self.joints < 2 {
            return Err(Error::InvalidInput(
                "need frames >= 1 and joints >= 2".into(),
            ));
        }
        if self.fps.is_nan() || self.fps <= 0.0 {
            return Err(Error::InvalidInput("fps must be positive".into()));
        }
        if self.noise.is_nan() || self.noise < 0.0 {
            return Err(Error::InvalidInput("noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Generate labelled synthetic skeleton sequences: per class, a set of
/// sinusoidal joint trajectories; per member, a phase shift, a global size
/// scale and coordinate noise. Deterministic for a fixed seed.
pub fn gen_synth_poses(cfg: &SynthPoseConfig) -> Result<Vec<PoseSequence>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let tau = std::f64::consts::TAU;
    let mut corpus = Vec::with_capacity(cfg.n_classes * cfg.per_class);
    for class in 0..cfg.n_classes {
        // Class motion model: base position plus two harmonics per axis.
        let mut base = Vec::with_capacity(cfg.joints);
        let mut amp = Vec::with_capacity(cfg.joints);
        let mut freq = Vec::with_capacity(cfg.joints);
        let mut phase = Vec::with_capacity(cfg.joints);
        for _ in 0..cfg.joints {
            base.push([
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            ]);
            let mut joint_amp = [[0.0f64; 2]; 3];
            let mut joint_phase = [[0.0f64; 2]; 3];
            for axis in 0..3 {
                for h in 0..2 {
                    joint_amp[axis][h] = 0.1 + rng.random::<f64>() * 0.3;
                    joint_phase[axis][h] = rng.random::<f64>() * tau;
                }
            }
            amp.push(joint_amp);
            phase.push(joint_phase);
            freq.push([
                1.0 + rng.random::<f64>() * 2.0,
                2.0 + rng.random::<f64>() * 3.0,
            ]);
        }
        for member in 0..cfg.per_class {
            let member_phase = rng.random::<f64>() * tau;
            let scale = 0.8 + rng.random::<f64>() * 0.4;
            let mut frames = Vec::with_capacity(cfg.frames);
            for t in 0..cfg.frames {
                let progress = t as f64 / cfg.frames as f64;
                let mut frame = Vec::with_capacity(cfg.joints);
                for v in 0..cfg.joints {
                    let mut point = [0.0f64; 3];
                    for (axis, coord) in point.iter_mut().enumerate() {
                        let mut value = base[v][axis];
                        for h in 0..2 {
                            value += amp[v][axis][h]
                                * (tau * freq[v][h] * progress + phase[v][axis][h] + member_phase)
                                    .sin();
                        }
                        value += (rng.random::<f64>() * 2.0 - 1.0) * cfg.noise;
                        *coord = scale * value;
                    }
                    frame.push(point);
                }
                frames.push(frame);
            }
            corpus.push(PoseSequence::new(
                format!("c{class:03}-m{member:03}"),
                Some(format!("class{class:03}")),
                cfg.fps,
                frames,
            )?);
        }
    }
    Ok(corpus)
}

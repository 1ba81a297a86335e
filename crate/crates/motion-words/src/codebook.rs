//! EMA-trained motion-word codebook with immediate dead-code revival.
//!
//! The codebook holds `K` code vectors over patch features. Training assigns
//! each patch to its nearest code by Euclidean distance and folds the batch
//! statistics into exponential moving averages:
//!
//! ```text
//! n_k <- alpha * n_k + (1 - alpha) * #{i : k_i = k}
//! m_k <- alpha * m_k + (1 - alpha) * sum_{i : k_i = k} p_i
//! c_k  = m_k / max(n_k, epsilon)
//! ```
//!
//! Any code left unassigned for a whole epoch is immediately revived by
//! overwriting it with a reservoir patch drawn with a seeded RNG, which keeps
//! utilisation high and prevents codebook collapse. Usage, assignment entropy
//! and quantization MSE are reported per epoch as health metrics.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::{featurize_sequence, FeaturizerConfig, PatchFeature};
use crate::io;
use crate::pose::PoseSequence;

pub const CODEBOOK_FORMAT_VERSION: u32 = 1;

/// Joint-pair ordering used by this implementation's featurizer.
pub const PAIR_ORDER_LEXICOGRAPHIC: &str = "lexicographic";

/// Featurizer settings a codebook was trained under, stored in the codebook
/// file so that tokenization stays reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub patch_len: usize,
    pub stride: usize,
    pub scale_norm: bool,
    pub joint_count: usize,
    pub pair_order: String,
}

impl FeatureMeta {
    pub fn new(cfg: &FeaturizerConfig, joint_count: usize) -> Self {
        FeatureMeta {
            patch_len: cfg.patch_len,
            stride: cfg.stride,
            scale_norm: cfg.scale_norm,
            joint_count,
            pair_order: PAIR_ORDER_LEXICOGRAPHIC.to_string(),
        }
    }

    pub fn featurizer_config(&self) -> FeaturizerConfig {
        FeaturizerConfig {
            patch_len: self.patch_len,
            stride: self.stride,
            scale_norm: self.scale_norm,
        }
    }

    /// Patch feature dimension implied by these settings.
    pub fn feature_dim(&self) -> usize {
        self.featurizer_config().feature_dim(self.joint_count)
    }
}

/// A discrete motion-word sequence: the fingerprint of one pose sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub id: String,
    pub label: Option<String>,
    pub words: Vec<u32>,
}

/// Per-epoch training health.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodebookHealth {
    /// Percentage of codes assigned at least once this epoch, before revival.
    pub usage_pct: f64,
    /// Entropy of the epoch's assignment distribution, in nats.
    pub assignment_entropy: f64,
    /// Mean squared quantization distance over the epoch's patches.
    pub quantization_mse: f64,
}

/// Where revival draws replacement patches from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReservoirScope {
    /// The final batch of the epoch.
    FinalBatch,
    /// Every patch seen during the epoch.
    WholeEpoch,
}

/// Dead-code revival settings for one epoch.
#[derive(Debug, Clone, Copy)]
pub struct RevivalOpts {
    pub scope: ReservoirScope,
    pub seed: u64,
}

/// The learned motion vocabulary with its EMA accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// `K x D` code vectors.
    pub codes: Vec<Vec<f64>>,
    /// EMA assignment counts `n_k`.
    pub ema_counts: Vec<f64>,
    /// `K x D` EMA assignment sums `m_k`.
    pub ema_sums: Vec<Vec<f64>>,
    /// Per-epoch assignment counters, reset at each epoch start. Revival
    /// marks revived codes as used, so a post-revival codebook reads 100%.
    pub epoch_use: Vec<u64>,
    /// EMA decay in (0, 1).
    pub alpha: f64,
    /// Floor for the count in `c_k = m_k / max(n_k, epsilon)`.
    pub epsilon: f64,
    pub feature_meta: FeatureMeta,
}

#[derive(Serialize, Deserialize)]
struct CodebookFile {
    version: u32,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "D")]
    dim: usize,
    alpha: f64,
    epsilon: f64,
    feature_meta: FeatureMeta,
    codes: Vec<Vec<f64>>,
    ema_counts: Vec<f64>,
    ema_sums: Vec<Vec<f64>>,
}

impl Codebook {
    /// Initialise with `k` distinct sample patches drawn uniformly without
    /// replacement using a seeded RNG. Counts start at 1 with `m_k = c_k`.
    pub fn init(
        sample: &[PatchFeature],
        k: usize,
        alpha: f64,
        epsilon: f64,
        seed: u64,
        feature_meta: FeatureMeta,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("codebook size K must be >= 1".into()));
        }
        if sample.len() < k {
            return Err(Error::InsufficientData {
                needed: k,
                got: sample.len(),
            });
        }
        if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if epsilon.is_nan() || epsilon <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let dim = sample[0].values.len();
        if dim == 0 || sample.iter().any(|p| p.values.len() != dim) {
            return Err(Error::InvalidInput(
                "sample patches have inconsistent dimensions".into(),
            ));
        }
        if dim != feature_meta.feature_dim() {
            return Err(Error::ConfigMismatch(format!(
                "patch dimension {dim} does not match feature_meta dimension {}",
                feature_meta.feature_dim()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chosen = rand::seq::index::sample(&mut rng, sample.len(), k);
        let codes: Vec<Vec<f64>> = chosen.iter().map(|i| sample[i].values.clone()).collect();
        Ok(Codebook {
            ema_counts: vec![1.0; k],
            ema_sums: codes.clone(),
            epoch_use: vec![0; k],
            codes,
            alpha,
            epsilon,
            feature_meta,
        })
    }

    pub fn k(&self) -> usize {
        self.codes.len()
    }

    pub fn dim(&self) -> usize {
        self.codes.first().map_or(0, |c| c.len())
    }

    /// Nearest code for a patch: returns the motion word and the Euclidean
    /// distance attained. Ties break toward the lowest code index.
    pub fn quantize(&self, patch: &PatchFeature) -> Result<(u32, f64)> {
        self.quantize_values(&patch.values)
    }

    fn quantize_values(&self, values: &[f64]) -> Result<(u32, f64)> {
        if values.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "patch dimension {} does not match codebook dimension {}",
                values.len(),
                self.dim()
            )));
        }
        let mut best_k = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (k, code) in self.codes.iter().enumerate() {
            let mut d2 = 0.0;
            for (a, b) in values.iter().zip(code) {
                let diff = a - b;
                d2 += diff * diff;
            }
            if d2 < best_d2 {
                best_d2 = d2;
                best_k = k;
            }
        }
        Ok((best_k as u32, best_d2.sqrt()))
    }

    /// Percentage of codes with a non-zero epoch-use counter.
    pub fn usage_ratio(&self) -> f64 {
        let used = self.epoch_use.iter().filter(|&&u| u > 0).count();
        100.0 * used as f64 / self.k() as f64
    }

    /// Run one training epoch over the given batches.
    ///
    /// Patches are assigned against the codes as they stood at the start of
    /// each batch; the EMA update is applied once per batch. With `warmup`
    /// set, assignments and health are still computed but `n`, `m` and the
    /// codes stay untouched and no revival runs. Otherwise dead codes are
    /// revived at the epoch end when `revival` is given. The returned health
    /// reflects the epoch's own assignments, before any revival.
    pub fn train_epoch(
        &mut self,
        batches: &[&[PatchFeature]],
        warmup: bool,
        revival: Option<RevivalOpts>,
    ) -> Result<CodebookHealth> {
        if batches.iter().all(|b| b.is_empty()) {
            return Err(Error::InvalidInput(
                "training epoch received no patches".into(),
            ));
        }
        let k = self.k();
        self.epoch_use = vec![0; k];
        let mut sq_err = 0.0f64;
        let mut total = 0u64;

        for batch in batches.iter().filter(|b| !b.is_empty()) {
            let assignments: Vec<(u32, f64)> = batch
                .par_iter()
                .map(|p| self.quantize(p))
                .collect::<Result<_>>()?;
            for &(word, dist) in &assignments {
                self.epoch_use[word as usize] += 1;
                sq_err += dist * dist;
                total += 1;
            }
            if !warmup {
                let mut batch_counts = vec![0.0f64; k];
                let mut batch_sums = vec![vec![0.0f64; self.dim()]; k];
                for (patch, &(word, _)) in batch.iter().zip(&assignments) {
                    let w = word as usize;
                    batch_counts[w] += 1.0;
                    for (acc, v) in batch_sums[w].iter_mut().zip(&patch.values) {
                        *acc += v;
                    }
                }
                let a = self.alpha;
                for kk in 0..k {
                    self.ema_counts[kk] = a * self.ema_counts[kk] + (1.0 - a) * batch_counts[kk];
                    for (m, s) in self.ema_sums[kk].iter_mut().zip(&batch_sums[kk]) {
                        *m = a * *m + (1.0 - a) * s;
                    }
                    let denom = self.ema_counts[kk].max(self.epsilon);
                    for (c, m) in self.codes[kk].iter_mut().zip(&self.ema_sums[kk]) {
                        *c = m / denom;
                    }
                }
            }
        }

        let health = CodebookHealth {
            usage_pct: self.usage_ratio(),
            assignment_entropy: entropy_nats(&self.epoch_use, total),
            quantization_mse: sq_err / total as f64,
        };

        if !warmup {
            if let Some(opts) = revival {
                if self.epoch_use.contains(&0) {
                    match opts.scope {
                        ReservoirScope::FinalBatch => {
                            let last = batches
                                .iter()
                                .rev()
                                .find(|b| !b.is_empty())
                                .copied()
                                .unwrap_or(&[]);
                            self.revive_dead_codes(last, opts.seed)?;
                        }
                        ReservoirScope::WholeEpoch => {
                            let all: Vec<PatchFeature> =
                                batches.iter().flat_map(|b| b.iter().cloned()).collect();
                            self.revive_dead_codes(&all, opts.seed)?;
                        }
                    }
                }
            }
        }
        Ok(health)
    }

    /// Overwrite every code unused this epoch with a reservoir patch drawn
    /// with a seeded uniform RNG. The revived code's count resets to 1 and
    /// its EMA sum to the patch value, and it is marked used for the epoch.
    /// Returns the number of revived codes.
    pub fn revive_dead_codes(&mut self, reservoir: &[PatchFeature], seed: u64) -> Result<usize> {
        let dead: Vec<usize> = (0..self.k()).filter(|&k| self.epoch_use[k] == 0).collect();
        if dead.is_empty() {
            return Ok(0);
        }
        if reservoir.is_empty() {
            return Err(Error::RevivalStarved { dead: dead.len() });
        }
        let dim = self.dim();
        if reservoir.iter().any(|p| p.values.len() != dim) {
            return Err(Error::InvalidInput(
                "reservoir patch dimension does not match codebook".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in &dead {
            let pick = rng.random_range(0..reservoir.len());
            let values = reservoir[pick].values.clone();
            self.ema_sums[*k] = values.clone();
            self.codes[*k] = values;
            self.ema_counts[*k] = 1.0;
            self.epoch_use[*k] = 1;
        }
        Ok(dead.len())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = CodebookFile {
            version: CODEBOOK_FORMAT_VERSION,
            k: self.k(),
            dim: self.dim(),
            alpha: self.alpha,
            epsilon: self.epsilon,
            feature_meta: self.feature_meta.clone(),
            codes: self.codes.clone(),
            ema_counts: self.ema_counts.clone(),
            ema_sums: self.ema_sums.clone(),
        };
        io::write_json(path.as_ref(), &file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file: CodebookFile = io::read_json(path)?;
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message,
        };
        if file.version != CODEBOOK_FORMAT_VERSION {
            return Err(parse_err(format!(
                "unsupported codebook version {}",
                file.version
            )));
        }
        if file.codes.len() != file.k
            || file.ema_counts.len() != file.k
            || file.ema_sums.len() != file.k
        {
            return Err(parse_err("K does not match array lengths".into()));
        }
        if file
            .codes
            .iter()
            .chain(file.ema_sums.iter())
            .any(|row| row.len() != file.dim)
        {
            return Err(parse_err("D does not match row lengths".into()));
        }
        let finite = file
            .codes
            .iter()
            .chain(file.ema_sums.iter())
            .flat_map(|row| row.iter())
            .all(|v| v.is_finite())
            && file.ema_counts.iter().all(|v| v.is_finite() && *v >= 0.0);
        if !finite {
            return Err(parse_err("non-finite codebook values".into()));
        }
        let alpha_ok = file.alpha.is_finite() && file.alpha > 0.0 && file.alpha < 1.0;
        let epsilon_ok = file.epsilon.is_finite() && file.epsilon > 0.0;
        if !alpha_ok || !epsilon_ok {
            return Err(parse_err("alpha or epsilon out of range".into()));
        }
        Ok(Codebook {
            epoch_use: vec![0; file.k],
            codes: file.codes,
            ema_counts: file.ema_counts,
            ema_sums: file.ema_sums,
            alpha: file.alpha,
            epsilon: file.epsilon,
            feature_meta: file.feature_meta,
        })
    }
}

fn entropy_nats(counts: &[u64], total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Quantize a pose sequence into motion words under the codebook's stored
/// featurizer settings. `cfg` must agree with the codebook's `feature_meta`.
pub fn tokenize_sequence(
    seq: &PoseSequence,
    cfg: &FeaturizerConfig,
    cb: &Codebook,
) -> Result<TokenSequence> {
    seq.validate()?;
    let expected = FeatureMeta::new(cfg, seq.joint_count());
    if expected != cb.feature_meta {
        return Err(Error::ConfigMismatch(format!(
            "featurizer settings {:?} do not match codebook feature_meta {:?}",
            expected, cb.feature_meta
        )));
    }
    let patches = featurize_sequence(seq, cfg)?;
    let words = patches
        .iter()
        .map(|p| cb.quantize(p).map(|(w, _)| w))
        .collect::<Result<Vec<_>>>()?;
    Ok(TokenSequence {
        id: seq.id.clone(),
        label: seq.label.clone(),
        words,
    })
}

/// Multi-epoch training settings.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    /// Total epochs, including warm-up.
    pub epochs: usize,
    /// Leading epochs during which codebook updates are suspended.
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub revival: bool,
    pub reservoir: ReservoirScope,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 5,
            warmup_epochs: 1,
            batch_size: 256,
            seed: 0,
            revival: true,
            reservoir: ReservoirScope::FinalBatch,
        }
    }
}

const SHUFFLE_SALT: u64 = 0x53AD_F00D_0000_0001;
const REVIVAL_SALT: u64 = 0x53AD_F00D_0000_0002;

fn derive_seed(base: u64, epoch: usize, salt: u64) -> u64 {
    base ^ salt ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Initialise a codebook from the patch pool and train it for the configured
/// number of epochs, shuffling the pool with a per-epoch seed. Returns the
/// trained codebook together with one health record per epoch.
pub fn train_codebook(
    patches: &[PatchFeature],
    k: usize,
    alpha: f64,
    epsilon: f64,
    feature_meta: FeatureMeta,
    cfg: &TrainConfig,
) -> Result<(Codebook, Vec<CodebookHealth>)> {
    if cfg.epochs == 0 {
        return Err(Error::InvalidInput("epochs must be >= 1".into()));
    }
    if cfg.warmup_epochs >= cfg.epochs {
        return Err(Error::InvalidInput(format!(
            "warmup_epochs {} must be below epochs {}",
            cfg.warmup_epochs, cfg.epochs
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidInput("batch_size must be >= 1".into()));
    }
    let mut cb = Codebook::init(patches, k, alpha, epsilon, cfg.seed, feature_meta)?;
    let mut pool: Vec<PatchFeature> = patches.to_vec();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch, SHUFFLE_SALT));
        pool.shuffle(&mut rng);
        let batches: Vec<&[PatchFeature]> = pool.chunks(cfg.batch_size).collect();
        let warmup = epoch < cfg.warmup_epochs;
        let revival = (cfg.revival && !warmup).then(|| RevivalOpts {
            scope: cfg.reservoir,
            seed: derive_seed(cfg.seed, epoch, REVIVAL_SALT),
        });
        history.push(cb.train_epoch(&batches, warmup, revival)?);
    }
    Ok((cb, history))
}

/// Read token sequences from a JSON Lines file.
pub fn read_token_jsonl(path: impl AsRef<Path>) -> Result<Vec<TokenSequence>> {
    io::read_jsonl(path.as_ref(), |_| Ok(()))
}

/// Write token sequences as JSON Lines.
pub fn write_token_jsonl(path: impl AsRef<Path>, seqs: &[TokenSequence]) -> Result<()> {
    io::write_jsonl(path.as_ref(), seqs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patch(values: &[f64]) -> PatchFeature {
        PatchFeature {
            values: values.to_vec(),
            patch_index: 0,
            patch_len: values.len(),
        }
    }

    /// Meta whose derived dimension is `dim`, for synthetic patch data.
    fn synth_meta(dim: usize) -> FeatureMeta {
        FeatureMeta {
            patch_len: dim,
            stride: dim,
            scale_norm: false,
            joint_count: 2,
            pair_order: PAIR_ORDER_LEXICOGRAPHIC.to_string(),
        }
    }

    fn hand_built(codes: Vec<Vec<f64>>, counts: Vec<f64>, sums: Vec<Vec<f64>>) -> Codebook {
        let dim = codes[0].len();
        let k = codes.len();
        Codebook {
            codes,
            ema_counts: counts,
            ema_sums: sums,
            epoch_use: vec![0; k],
            alpha: 0.5,
            epsilon: 1e-5,
            feature_meta: synth_meta(dim),
        }
    }

    #[test]
    fn quantize_exact_match_is_zero_distance() {
        let codes: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64, 0.0]).collect();
        let cb = hand_built(codes.clone(), vec![1.0; 5], codes);
        let (word, dist) = cb.quantize(&patch(&[3.0, 0.0])).unwrap();
        assert_eq!(word, 3);
        assert_eq!(dist, 0.0);
    }

    #[test]
    fn quantize_nearest_code() {
        let cb = hand_built(
            vec![vec![0.0, 0.0], vec![4.0, 0.0]],
            vec![1.0, 1.0],
            vec![vec![0.0, 0.0], vec![4.0, 0.0]],
        );
        let (word, dist) = cb.quantize(&patch(&[1.0, 0.0])).unwrap();
        assert_eq!(word, 0);
        assert!((dist - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantize_tie_breaks_to_lowest_index() {
        let cb = hand_built(
            vec![vec![0.0, 0.0], vec![2.0, 0.0]],
            vec![1.0, 1.0],
            vec![vec![0.0, 0.0], vec![2.0, 0.0]],
        );
        let (word, _) = cb.quantize(&patch(&[1.0, 0.0])).unwrap();
        assert_eq!(word, 0);
    }

    #[test]
    fn quantize_dimension_mismatch_errors() {
        let cb = hand_built(vec![vec![0.0, 0.0]], vec![1.0], vec![vec![0.0, 0.0]]);
        let err = cb.quantize(&patch(&[1.0, 0.0, 0.0])).unwrap_err();
        assert_eq!(err.kind(), "invalid-input");
    }

    #[test]
    fn quantize_matches_independent_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dim = 6;
        let codes: Vec<Vec<f64>> = (0..17)
            .map(|_| (0..dim).map(|_| rng.random::<f64>() * 4.0).collect())
            .collect();
        let cb = hand_built(codes.clone(), vec![1.0; 17], codes.clone());
        for _ in 0..200 {
            let values: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 4.0).collect();
            // Independent scan: explicit loop, strict < keeps the first min.
            let mut want_k = 0usize;
            let mut want_d2 = f64::INFINITY;
            for (k, code) in codes.iter().enumerate() {
                let mut d2 = 0.0;
                for i in 0..dim {
                    let diff = values[i] - code[i];
                    d2 += diff * diff;
                }
                if d2 < want_d2 {
                    want_d2 = d2;
                    want_k = k;
                }
            }
            let (word, dist) = cb.quantize(&patch(&values)).unwrap();
            assert_eq!(word as usize, want_k);
            assert_eq!(dist, want_d2.sqrt());
        }
    }

    #[test]
    fn ema_count_recurrence() {
        // alpha = 0.5, n_k = 0, one batch of 4 patches on the single code:
        // n_k = 0.5 * 0 + 0.5 * 4 = 2.0
        let mut cb = hand_built(vec![vec![0.0, 0.0]], vec![0.0], vec![vec![0.0, 0.0]]);
        let batch = vec![patch(&[1.0, 1.0]); 4];
        cb.train_epoch(&[&batch], false, None).unwrap();
        assert_eq!(cb.ema_counts[0], 2.0);
    }

    #[test]
    fn warmup_leaves_codebook_untouched() {
        let mut cb = hand_built(
            vec![vec![0.25, 0.5], vec![3.0, -1.0]],
            vec![1.0, 1.0],
            vec![vec![0.25, 0.5], vec![3.0, -1.0]],
        );
        let before = cb.clone();
        let batch = vec![patch(&[2.0, 2.0]), patch(&[0.1, 0.1])];
        let health = cb.train_epoch(&[&batch], true, None).unwrap();
        assert_eq!(cb.codes, before.codes);
        assert_eq!(cb.ema_counts, before.ema_counts);
        assert_eq!(cb.ema_sums, before.ema_sums);
        assert!(health.quantization_mse > 0.0);
    }

    #[test]
    fn single_code_converges_to_batch_mean() {
        // With zero prior state the alpha factors cancel exactly:
        // m_k = (1-a) * sum(p), n_k = (1-a) * count, so c_k = mean = p.
        let p = [1.5, -2.0, 0.25];
        let mut cb = hand_built(vec![vec![0.0; 3]], vec![0.0], vec![vec![0.0; 3]]);
        let batch = vec![patch(&p); 4];
        cb.train_epoch(&[&batch], false, None).unwrap();
        for (c, want) in cb.codes[0].iter().zip(&p) {
            assert!((c - want).abs() < 1e-9);
        }
    }

    #[test]
    fn ratio_invariant_holds_after_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let codes: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
            .collect();
        let mut cb = hand_built(codes.clone(), vec![1.0; 8], codes);
        let batches: Vec<Vec<PatchFeature>> = (0..5)
            .map(|_| {
                (0..32)
                    .map(|_| patch(&(0..4).map(|_| rng.random::<f64>() * 2.0).collect::<Vec<_>>()))
                    .collect()
            })
            .collect();
        let refs: Vec<&[PatchFeature]> = batches.iter().map(|b| b.as_slice()).collect();
        cb.train_epoch(&refs, false, None).unwrap();
        for k in 0..cb.k() {
            let denom = cb.ema_counts[k].max(cb.epsilon);
            for (c, m) in cb.codes[k].iter().zip(&cb.ema_sums[k]) {
                let want = m / denom;
                let rel = (c - want).abs() / want.abs().max(1e-300);
                assert!(rel < 1e-12, "code {k}: {c} vs {want}");
            }
        }
    }

    #[test]
    fn empty_stream_errors() {
        let mut cb = hand_built(vec![vec![0.0]], vec![1.0], vec![vec![0.0]]);
        let err = cb.train_epoch(&[], false, None).unwrap_err();
        assert_eq!(err.kind(), "invalid-input");
    }

    #[test]
    fn revive_replaces_unused_codes() {
        let codes: Vec<Vec<f64>> = (0..4).map(|k| vec![k as f64, 0.0]).collect();
        let mut cb = hand_built(codes.clone(), vec![1.0; 4], codes);
        cb.epoch_use = vec![3, 0, 1, 0];
        let reservoir = vec![patch(&[9.0, 9.0]), patch(&[7.0, 7.0])];
        let revived = cb.revive_dead_codes(&reservoir, 42).unwrap();
        assert_eq!(revived, 2);
        for k in [1usize, 3] {
            assert!(reservoir.iter().any(|p| p.values == cb.codes[k]));
            assert_eq!(cb.ema_counts[k], 1.0);
            assert_eq!(cb.ema_sums[k], cb.codes[k]);
            assert_eq!(cb.epoch_use[k], 1);
        }
        assert_eq!(cb.usage_ratio(), 100.0);
    }

    #[test]
    fn revive_is_deterministic() {
        let codes: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64]).collect();
        let reservoir: Vec<PatchFeature> = (0..10).map(|i| patch(&[100.0 + i as f64])).collect();
        let mut a = hand_built(codes.clone(), vec![1.0; 6], codes.clone());
        let mut b = hand_built(codes.clone(), vec![1.0; 6], codes);
        a.epoch_use = vec![0, 1, 0, 0, 1, 0];
        b.epoch_use = vec![0, 1, 0, 0, 1, 0];
        a.revive_dead_codes(&reservoir, 7).unwrap();
        b.revive_dead_codes(&reservoir, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn revive_noop_when_all_used() {
        let codes = vec![vec![1.0], vec![2.0]];
        let mut cb = hand_built(codes.clone(), vec![1.0; 2], codes);
        cb.epoch_use = vec![5, 1];
        let before = cb.clone();
        let revived = cb.revive_dead_codes(&[patch(&[9.0])], 0).unwrap();
        assert_eq!(revived, 0);
        assert_eq!(cb, before);
    }

    #[test]
    fn revive_starved_errors() {
        let mut cb = hand_built(vec![vec![1.0]], vec![1.0], vec![vec![1.0]]);
        let err = cb.revive_dead_codes(&[], 0).unwrap_err();
        assert_eq!(err.kind(), "revival-starved");
    }

    #[test]
    fn usage_ratio_half_used() {
        let codes: Vec<Vec<f64>> = (0..512).map(|k| vec![k as f64]).collect();
        let mut cb = hand_built(codes.clone(), vec![1.0; 512], codes);
        for k in 0..256 {
            cb.epoch_use[k] = 1;
        }
        assert_eq!(cb.usage_ratio(), 50.0);
    }

    #[test]
    fn init_draws_distinct_sample_patches() {
        let sample: Vec<PatchFeature> = (0..20).map(|i| patch(&[i as f64, 0.0])).collect();
        let meta = synth_meta(2);
        let cb = Codebook::init(&sample, 8, 0.5, 1e-5, 9, meta.clone()).unwrap();
        assert_eq!(cb.k(), 8);
        let mut seen = std::collections::HashSet::new();
        for code in &cb.codes {
            assert!(sample.iter().any(|p| &p.values == code));
            assert!(seen.insert(format!("{code:?}")), "duplicate code drawn");
        }
        assert!(cb.ema_counts.iter().all(|&n| n == 1.0));
        assert_eq!(cb.ema_sums, cb.codes);

        let cb2 = Codebook::init(&sample, 8, 0.5, 1e-5, 9, meta).unwrap();
        assert_eq!(cb, cb2);
    }

    #[test]
    fn init_insufficient_sample_errors() {
        let sample: Vec<PatchFeature> = (0..3).map(|i| patch(&[i as f64])).collect();
        let err = Codebook::init(&sample, 4, 0.5, 1e-5, 0, synth_meta(1)).unwrap_err();
        assert_eq!(err.kind(), "insufficient-data");
    }

    #[test]
    fn entropy_uniform_and_degenerate() {
        assert!((entropy_nats(&[4, 4, 4, 4], 16) - 4.0f64.ln()).abs() < 1e-12);
        assert_eq!(entropy_nats(&[16, 0, 0, 0], 16), 0.0);
    }

    #[test]
    fn mse_not_increasing_on_stationary_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dim = 4;
        let centers: Vec<Vec<f64>> = (0..32)
            .map(|_| (0..dim).map(|_| rng.random::<f64>() * 10.0).collect())
            .collect();
        let patches: Vec<PatchFeature> = (0..800)
            .map(|i| {
                let c = &centers[i % centers.len()];
                patch(
                    &c.iter()
                        .map(|v| v + (rng.random::<f64>() - 0.5) * 0.1)
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let meta = synth_meta(dim);
        let cfg = TrainConfig {
            epochs: 4,
            warmup_epochs: 0,
            batch_size: 128,
            seed: 5,
            revival: true,
            reservoir: ReservoirScope::FinalBatch,
        };
        let (_, history) = train_codebook(&patches, 16, 0.5, 1e-5, meta, &cfg).unwrap();
        assert!(history.last().unwrap().quantization_mse <= history[0].quantization_mse);
    }

    #[test]
    fn tokenize_words_match_per_patch_quantization() {
        let frames: Vec<Vec<[f64; 3]>> = (0..16)
            .map(|t| {
                let a = t as f64 * 0.4;
                vec![[0.0, 0.0, 0.0], [1.0 + a.sin(), 0.0, 0.0], [0.0, 2.0, a.cos()]]
            })
            .collect();
        let seq = PoseSequence::new("s", None, 30.0, frames).unwrap();
        let cfg = FeaturizerConfig {
            patch_len: 4,
            stride: 4,
            scale_norm: true,
        };
        let patches = featurize_sequence(&seq, &cfg).unwrap();
        let meta = FeatureMeta::new(&cfg, seq.joint_count());
        let cb = Codebook::init(&patches, 3, 0.5, 1e-5, 1, meta).unwrap();
        let tokens = tokenize_sequence(&seq, &cfg, &cb).unwrap();
        assert_eq!(tokens.words.len(), patches.len());
        for (patch, word) in patches.iter().zip(&tokens.words) {
            assert_eq!(cb.quantize(patch).unwrap().0, *word);
        }
    }

    #[test]
    fn tokenize_config_mismatch_errors() {
        let frames = vec![vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]; 8];
        let seq = PoseSequence::new("s", None, 30.0, frames).unwrap();
        let cfg = FeaturizerConfig {
            patch_len: 4,
            stride: 4,
            scale_norm: true,
        };
        let patches = featurize_sequence(&seq, &cfg).unwrap();
        let meta = FeatureMeta::new(&cfg, seq.joint_count());
        let cb = Codebook::init(&patches, 2, 0.5, 1e-5, 1, meta).unwrap();
        let other = FeaturizerConfig {
            patch_len: 2,
            stride: 2,
            scale_norm: true,
        };
        let err = tokenize_sequence(&seq, &other, &cb).unwrap_err();
        assert_eq!(err.kind(), "config-mismatch");
    }

    #[test]
    fn save_load_round_trip() {
        let sample: Vec<PatchFeature> = (0..12)
            .map(|i| patch(&[i as f64 * 0.37, 1.0 / (i + 1) as f64]))
            .collect();
        let cb = Codebook::init(&sample, 5, 0.5, 1e-5, 3, synth_meta(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.json");
        cb.save(&path).unwrap();
        let loaded = Codebook::load(&path).unwrap();
        assert_eq!(loaded, cb);
        // A second save of the loaded value must be byte-identical.
        let path2 = dir.path().join("cb2.json");
        loaded.save(&path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }
}

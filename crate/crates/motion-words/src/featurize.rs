//! Deterministic geometric features for skeleton motion.
//!
//! Each frame is reduced to its vector of inter-joint Euclidean distances in
//! a fixed lexicographic joint-pair order: (0,1), (0,2), ..., (0,V-1), (1,2),
//! and so on. Distances are unchanged by any rigid rotation or translation of
//! the skeleton, so the features inherit that invariance by construction.
//! A sequence is then cut into temporal patches of `patch_len` frames taken
//! every `stride` frames, and each patch concatenates its per-frame distance
//! vectors in temporal order, giving `patch_len * V*(V-1)/2` values.
//!
//! With `scale_norm` enabled, every patch is divided by the sequence-level
//! mean of all pairwise distances, which removes performer size as a factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::PoseSequence;

/// Patch extraction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    /// Patch length `P` in frames.
    pub patch_len: usize,
    /// Step between patch starts, in frames. Must not exceed `patch_len`,
    /// so patches tile or overlap and no frame is skipped between them.
    pub stride: usize,
    /// Divide features by the sequence mean pairwise distance.
    pub scale_norm: bool,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        FeaturizerConfig {
            patch_len: 8,
            stride: 8,
            scale_norm: true,
        }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_len == 0 {
            return Err(Error::InvalidInput("patch_len must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidInput("stride must be positive".into()));
        }
        if self.stride > self.patch_len {
            return Err(Error::InvalidInput(format!(
                "stride {} exceeds patch_len {}; frames between patches would be skipped",
                self.stride, self.patch_len
            )));
        }
        Ok(())
    }

    /// Feature dimension `D_f` for a skeleton with `joint_count` joints.
    pub fn feature_dim(&self, joint_count: usize) -> usize {
        self.patch_len * pair_count(joint_count)
    }
}

/// One temporal patch of concatenated per-frame distance vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeature {
    pub values: Vec<f64>,
    /// Position of this patch within its source sequence.
    pub patch_index: usize,
    /// Patch length in frames, shared by all patches from one config.
    pub patch_len: usize,
}

/// Number of unordered joint pairs, `V*(V-1)/2`.
pub fn pair_count(joint_count: usize) -> usize {
    joint_count * joint_count.saturating_sub(1) / 2
}

/// Euclidean distances between all joint pairs of one frame, in lexicographic
/// pair order. This order is part of the codebook file contract.
pub fn pairwise_distances(frame: &[[f64; 3]]) -> Result<Vec<f64>> {
    let v = frame.len();
    if v < 2 {
        return Err(Error::InvalidInput(format!(
            "frame has {v} joints, need at least 2"
        )));
    }
    for joint in frame {
        if joint.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "non-finite coordinate in frame".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(pair_count(v));
    for i in 0..v {
        for j in (i + 1)..v {
            let dx = frame[i][0] - frame[j][0];
            let dy = frame[i][1] - frame[j][1];
            let dz = frame[i][2] - frame[j][2];
            out.push((dx * dx + dy * dy + dz * dz).sqrt());
        }
    }
    Ok(out)
}

/// Cut a pose sequence into patches of per-frame distance features.
///
/// Produces `floor((T - patch_len) / stride) + 1` patches. Fails with
/// `SequenceTooShort` when `T < patch_len`, and with `DegeneratePose` when
/// `scale_norm` is set but every joint coincides in every frame.
pub fn featurize_sequence(
    seq: &PoseSequence,
    cfg: &FeaturizerConfig,
) -> Result<Vec<PatchFeature>> {
    cfg.validate()?;
    seq.validate()?;
    let t = seq.len();
    if t < cfg.patch_len {
        return Err(Error::SequenceTooShort {
            id: seq.id.clone(),
            len: t,
            patch_len: cfg.patch_len,
        });
    }

    let per_frame: Vec<Vec<f64>> = seq
        .frames
        .iter()
        .map(|f| pairwise_distances(f))
        .collect::<Result<_>>()?;

    let scale = if cfg.scale_norm {
        let total: f64 = per_frame.iter().flat_map(|d| d.iter()).sum();
        let count = t * per_frame[0].len();
        let mean = total / count as f64;
        if mean <= 0.0 {
            return Err(Error::DegeneratePose {
                id: seq.id.clone(),
            });
        }
        mean
    } else {
        1.0
    };

    let n_patches = (t - cfg.patch_len) / cfg.stride + 1;
    let dim = cfg.patch_len * per_frame[0].len();
    let mut patches = Vec::with_capacity(n_patches);
    for p in 0..n_patches {
        let start = p * cfg.stride;
        let mut values = Vec::with_capacity(dim);
        for frame_dists in &per_frame[start..start + cfg.patch_len] {
            values.extend(frame_dists.iter().map(|d| d / scale));
        }
        patches.push(PatchFeature {
            values,
            patch_index: p,
            patch_len: cfg.patch_len,
        });
    }
    Ok(patches)
}

//! Skeleton pose sequences and their JSON Lines representation.
//!
//! A pose sequence is `T` frames of `V` joints, each joint a 3-D point in
//! metres. The on-disk format is one JSON object per line:
//!
//! ```text
//! {"id": "clip-001", "label": "house", "fps": 30.0, "frames": [[[x,y,z], ...], ...]}
//! ```
//!
//! Records that fail validation are rejected with the offending line number.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// A sequence of 3-D skeleton frames with a frame rate and optional class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseSequence {
    pub id: String,
    pub label: Option<String>,
    pub fps: f64,
    /// `T x V x 3` joint coordinates in metres.
    pub frames: Vec<Vec<[f64; 3]>>,
}

impl PoseSequence {
    pub fn new(
        id: impl Into<String>,
        label: Option<String>,
        fps: f64,
        frames: Vec<Vec<[f64; 3]>>,
    ) -> Result<Self> {
        let seq = PoseSequence {
            id: id.into(),
            label,
            fps,
            frames,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Number of frames `T`.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Number of joints `V` (0 for an empty sequence).
    pub fn joint_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.len())
    }

    /// Check the structural invariants: T >= 1, V >= 2, a consistent joint
    /// count across frames, finite coordinates, and a positive frame rate.
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::InvalidInput(format!(
                "sequence '{}' has no frames",
                self.id
            )));
        }
        let v = self.frames[0].len();
        if v < 2 {
            return Err(Error::InvalidInput(format!(
                "sequence '{}' has {} joints, need at least 2",
                self.id, v
            )));
        }
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.len() != v {
                return Err(Error::InvalidInput(format!(
                    "sequence '{}': frame {} has {} joints, expected {}",
                    self.id,
                    t,
                    frame.len(),
                    v
                )));
            }
            for joint in frame {
                if joint.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "sequence '{}': non-finite coordinate in frame {}",
                        self.id, t
                    )));
                }
            }
        }
        if !self.fps.is_finite() || self.fps <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "sequence '{}': fps must be positive, got {}",
                self.id, self.fps
            )));
        }
        Ok(())
    }
}

/// Read pose sequences from a JSON Lines file, validating every record.
pub fn read_pose_jsonl(path: impl AsRef<Path>) -> Result<Vec<PoseSequence>> {
    io::read_jsonl(path.as_ref(), PoseSequence::validate)
}

/// Write pose sequences as JSON Lines.
pub fn write_pose_jsonl(path: impl AsRef<Path>, seqs: &[PoseSequence]) -> Result<()> {
    io::write_jsonl(path.as_ref(), seqs)
}

//! Alternating supervised/unsupervised batch scheduler.
//!
//! Batches strictly alternate between the two modes, supervised first.
//! Each pool is sampled without replacement inside one pass and reshuffled
//! with a seed-derived stream when exhausted; a short final batch is emitted
//! rather than dropped. Supervised batches draw from the labeled set only,
//! unsupervised batches from the full training set.

use crate::seed::stream_rng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    Supervised,
    Unsupervised,
}

#[derive(Debug)]
struct PoolCursor {
    perm: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl PoolCursor {
    fn new(len: usize, rng: ChaCha8Rng) -> Self {
        Self {
            perm: (0..len).collect(),
            cursor: len, // force a shuffle before the first draw
            rng,
        }
    }

    fn draw(&mut self, batch: usize) -> Vec<usize> {
        if self.cursor >= self.perm.len() {
            self.perm.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + batch).min(self.perm.len());
        let out = self.perm[self.cursor..end].to_vec();
        self.cursor = end;
        out
    }
}

/// Deterministic alternating batch stream over a labeled pool and the full
/// training pool. Emitted batches are index lists into the respective pool.
#[derive(Debug)]
pub struct BatchSchedule {
    labeled_len: usize,
    full_len: usize,
    supervised_batch_size: usize,
    cluster_batch_size: usize,
    labeled_cursor: PoolCursor,
    full_cursor: PoolCursor,
    next_supervised: bool,
    /// Set when the labeled pool is empty and the schedule degenerated to
    /// unsupervised-only.
    pub unsupervised_only: bool,
}

impl BatchSchedule {
    pub fn new(
        labeled_len: usize,
        full_len: usize,
        supervised_batch_size: usize,
        cluster_batch_size: usize,
        seed: u64,
    ) -> Self {
        Self {
            labeled_len,
            full_len,
            supervised_batch_size,
            cluster_batch_size,
            labeled_cursor: PoolCursor::new(labeled_len, stream_rng(seed, "batch-labeled")),
            full_cursor: PoolCursor::new(full_len, stream_rng(seed, "batch-full")),
            next_supervised: labeled_len > 0,
            unsupervised_only: labeled_len == 0,
        }
    }

    fn unsupervised_batch_size(&self, phase: Phase) -> usize {
        match phase {
            Phase::Warmup => self.supervised_batch_size,
            Phase::Cluster => self.cluster_batch_size,
        }
    }

    /// Alternation units per epoch: one pass over the larger pool (measured
    /// in batches at the phase's sizes) with the smaller pool cycled.
    pub fn pairs_per_epoch(&self, phase: Phase) -> usize {
        let unsup = self.full_len.div_ceil(self.unsupervised_batch_size(phase));
        if self.labeled_len == 0 {
            return unsup.max(1);
        }
        let sup = self.labeled_len.div_ceil(self.supervised_batch_size);
        sup.max(unsup).max(1)
    }

    /// Next batch in strict alternation. Supervised batches index into the
    /// labeled pool, unsupervised batches into the full pool.
    pub fn next_batch(&mut self, phase: Phase) -> (BatchMode, Vec<usize>) {
        if self.unsupervised_only {
            let b = self.unsupervised_batch_size(phase);
            return (BatchMode::Unsupervised, self.full_cursor.draw(b));
        }
        if self.next_supervised {
            self.next_supervised = false;
            (
                BatchMode::Supervised,
                self.labeled_cursor.draw(self.supervised_batch_size),
            )
        } else {
            self.next_supervised = true;
            let b = self.unsupervised_batch_size(phase);
            (BatchMode::Unsupervised, self.full_cursor.draw(b))
        }
    }
}

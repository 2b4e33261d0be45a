//! Experience-based compensation memory: a per-category offset table that is
//! added to the innate appraisal of a stimulus. Updates nudge each offset by
//! the average interoceptive change that followed encounters with that
//! category, so over time the table flattens systematic appraisal gaps.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CompensationMemory {
    offsets: Vec<[f64; 2]>,
    gamma: f64,
    // (category, interoception) in encounter order since the last update.
    records: Vec<(usize, [f64; 2])>,
}

impl CompensationMemory {
    pub fn new(n_categories: usize, gamma: f64) -> CompensationMemory {
        CompensationMemory { offsets: vec![[0.0; 2]; n_categories], gamma, records: Vec::new() }
    }

    pub fn n_categories(&self) -> usize {
        self.offsets.len()
    }

    pub fn offset(&self, category: usize) -> [f64; 2] {
        self.offsets[category]
    }

    pub fn offsets(&self) -> &[[f64; 2]] {
        &self.offsets
    }

    pub fn record(&mut self, category: usize, intero: [f64; 2]) -> Result<()> {
        if category >= self.offsets.len() {
            return Err(Error::invalid(format!(
                "category {category} out of range ({} known)",
                self.offsets.len()
            )));
        }
        self.records.push((category, intero));
        Ok(())
    }

    pub fn pending_records(&self) -> usize {
        self.records.len()
    }

    /// Applies one table update over the recorded window.
    ///
    /// For every consecutive pair of records the interoceptive delta is
    /// credited to the earlier record's category; the final record has no
    /// successor yet and seeds the next window instead. Each category moves
    /// by gamma times its mean credited delta.
    pub fn update(&mut self) {
        if self.records.len() < 2 {
            return;
        }
        let n = self.offsets.len();
        let mut sum = vec![[0.0f64; 2]; n];
        let mut count = vec![0usize; n];
        for pair in self.records.windows(2) {
            let (k, a) = pair[0];
            let (_, a_next) = pair[1];
            sum[k][0] += a_next[0] - a[0];
            sum[k][1] += a_next[1] - a[1];
            count[k] += 1;
        }
        for k in 0..n {
            if count[k] > 0 {
                let inv = 1.0 / count[k] as f64;
                self.offsets[k][0] += self.gamma * sum[k][0] * inv;
                self.offsets[k][1] += self.gamma * sum[k][1] * inv;
            }
        }
        let last = *self.records.last().unwrap();
        self.records.clear();
        self.records.push(last);
    }

    // Flat views for checkpointing: offsets as [n*2] and records as [r*3]
    // (category, valence, arousal) triples.
    pub fn export(&self) -> (Vec<f64>, Vec<f64>) {
        let table = self.offsets.iter().flat_map(|o| o.iter().copied()).collect();
        let recs = self
            .records
            .iter()
            .flat_map(|(k, a)| [*k as f64, a[0], a[1]])
            .collect();
        (table, recs)
    }

    pub fn import(&mut self, table: &[f64], recs: &[f64]) -> Result<()> {
        if table.len() != self.offsets.len() * 2 || recs.len() % 3 != 0 {
            return Err(Error::Checkpoint("compensation table size mismatch".to_string()));
        }
        for (o, pair) in self.offsets.iter_mut().zip(table.chunks_exact(2)) {
            *o = [pair[0], pair[1]];
        }
        self.records.clear();
        for t in recs.chunks_exact(3) {
            let k = t[0] as usize;
            if k >= self.offsets.len() {
                return Err(Error::Checkpoint(format!("record category {k} out of range")));
            }
            self.records.push((k, [t[1], t[2]]));
        }
        Ok(())
    }
}

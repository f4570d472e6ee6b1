//! Observed trials and the dataset container.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{DriftError, Result};

/// One categorization trial. All indices are 1-based: `subject` in `1..=n`,
/// `block` in `1..=t_blocks`, `trial` unique within its (subject, block),
/// `stimulus` and `response` in `1..=d0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrialRecord {
    pub subject: u32,
    pub block: u32,
    pub trial: u32,
    pub stimulus: u32,
    pub response: u32,
}

/// A validated collection of trials with its design dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub t_blocks: usize,
    pub l_trials: usize,
    pub d0: usize,
    records: Vec<TrialRecord>,
}

impl Dataset {
    /// Build a dataset, inferring `n`, `T`, `L` from maxima and `d0` from
    /// `max(stimulus, response)` unless overridden.
    pub fn new(records: Vec<TrialRecord>, d0_override: Option<usize>) -> Result<Self> {
        if records.is_empty() {
            return Err(DriftError::Domain("dataset has no trials".into()));
        }
        let mut n = 0u32;
        let mut t_blocks = 0u32;
        let mut l_trials = 0u32;
        let mut d0_seen = 0u32;
        for r in &records {
            n = n.max(r.subject);
            t_blocks = t_blocks.max(r.block);
            l_trials = l_trials.max(r.trial);
            d0_seen = d0_seen.max(r.stimulus).max(r.response);
        }
        let d0 = match d0_override {
            Some(d) => d,
            None => d0_seen as usize,
        };
        let ds = Dataset {
            n: n as usize,
            t_blocks: t_blocks as usize,
            l_trials: l_trials as usize,
            d0,
            records,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    /// SHA-256 digest over the dimensions and the sorted records; any edit to
    /// a single trial changes it.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(
            format!("n={},T={},L={},d0={};", self.n, self.t_blocks, self.l_trials, self.d0)
                .as_bytes(),
        );
        let mut sorted = self.records.clone();
        sorted.sort();
        for r in &sorted {
            hasher.update(
                format!("{},{},{},{},{};", r.subject, r.block, r.trial, r.stimulus, r.response)
                    .as_bytes(),
            );
        }
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d0 < 2 {
            return Err(DriftError::Domain(format!(
                "need at least 2 categories, got d0 = {}",
                self.d0
            )));
        }
        if self.records.is_empty() {
            return Err(DriftError::Domain("dataset has no trials".into()));
        }
        let mut keys = HashSet::with_capacity(self.records.len());
        for (idx, r) in self.records.iter().enumerate() {
            let line = idx + 1;
            let check = |name: &str, v: u32, hi: usize| -> Result<()> {
                if v == 0 || v as usize > hi {
                    return Err(DriftError::Data {
                        line: line as u64,
                        message: format!("{name} = {v} outside 1..={hi}"),
                    });
                }
                Ok(())
            };
            check("subject", r.subject, self.n)?;
            check("block", r.block, self.t_blocks)?;
            check("trial", r.trial, self.l_trials)?;
            check("stimulus", r.stimulus, self.d0)?;
            check("response", r.response, self.d0)?;
            if !keys.insert((r.subject, r.block, r.trial)) {
                return Err(DriftError::Data {
                    line: line as u64,
                    message: format!(
                        "duplicate (subject, block, trial) key ({}, {}, {})",
                        r.subject, r.block, r.trial
                    ),
                });
            }
        }
        Ok(())
    }
}

/// An input-response combination `x = (d, s)` (0-based internally).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Combo {
    pub d: usize,
    pub s: usize,
}

impl Combo {
    /// Flat index `d * d0 + s`.
    pub fn index(&self, d0: usize) -> usize {
        self.d * d0 + self.s
    }

    pub fn from_index(x: usize, d0: usize) -> Self {
        Combo { d: x / d0, s: x % d0 }
    }

    /// Correct identification means the response matches the stimulus.
    pub fn is_correct(&self) -> bool {
        self.d == self.s
    }
}

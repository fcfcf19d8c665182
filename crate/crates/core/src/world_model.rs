//! Count-based tabular world model.
//!
//! Each observed `(s, a)` keeps its visit count, reward sum and a histogram
//! of successor states (with how often each successor ended the episode).
//! Predictions return the modal successor, the mean reward over all visits
//! of the pair, and a termination flag decided by majority vote among the
//! modal successor's observations.

use std::collections::BTreeMap;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SuccessorCounts {
    pub count: u64,
    pub done_count: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairStats {
    pub visit_count: u64,
    pub reward_sum: f64,
    pub next_state_counts: BTreeMap<StateId, SuccessorCounts>,
    pub done_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub next_state: StateId,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularWorldModel {
    n_states: usize,
    n_actions: usize,
    entries: Vec<PairStats>,
    predictions: Vec<Option<Prediction>>,
    mu0_hat: Vec<f64>,
    total_records: u64,
}

impl TabularWorldModel {
    pub fn fit(d: &Dataset) -> Self {
        let (ns, na) = (d.n_states(), d.n_actions());
        let mut entries = vec![PairStats::default(); ns * na];
        let mut rewards: Vec<Vec<f64>> = vec![Vec::new(); ns * na];
        for r in d.records() {
            let idx = r.state * na + r.action;
            let e = &mut entries[idx];
            e.visit_count += 1;
            if r.done {
                e.done_count += 1;
            }
            let succ = e.next_state_counts.entry(r.next_state).or_default();
            succ.count += 1;
            if r.done {
                succ.done_count += 1;
            }
            rewards[idx].push(r.reward);
        }
        // summing in sorted order keeps the model independent of record order
        for (e, rs) in entries.iter_mut().zip(&mut rewards) {
            rs.sort_by(f64::total_cmp);
            e.reward_sum = rs.iter().sum();
        }
        let predictions = entries.iter().map(Self::summarise).collect();
        Self {
            n_states: ns,
            n_actions: na,
            entries,
            predictions,
            mu0_hat: d.empirical_initial_distribution(),
            total_records: d.len() as u64,
        }
    }

    fn summarise(e: &PairStats) -> Option<Prediction> {
        if e.visit_count == 0 {
            return None;
        }
        let mut modal: Option<(StateId, SuccessorCounts)> = None;
        for (&s, &c) in &e.next_state_counts {
            if modal.is_none_or(|(_, best)| c.count > best.count) {
                modal = Some((s, c));
            }
        }
        let (next_state, counts) = modal.expect("visited pair has successors");
        Some(Prediction {
            next_state,
            reward: e.reward_sum / e.visit_count as f64,
            done: 2 * counts.done_count > counts.count,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn total_records(&self) -> u64 {
        self.total_records
    }

    pub fn mu0_hat(&self) -> &[f64] {
        &self.mu0_hat
    }

    pub fn stats(&self, s: StateId, a: ActionId) -> &PairStats {
        &self.entries[s * self.n_actions + a]
    }

    pub fn visit_count(&self, s: StateId, a: ActionId) -> u64 {
        self.stats(s, a).visit_count
    }

    pub fn is_known(&self, s: StateId, a: ActionId) -> bool {
        self.visit_count(s, a) > 0
    }

    /// Flat `(s * n_actions + a)` indices of observed pairs, ascending.
    pub fn known_pairs(&self) -> Vec<usize> {
        (0..self.entries.len()).filter(|&i| self.entries[i].visit_count > 0).collect()
    }

    pub fn predict(&self, s: StateId, a: ActionId) -> Result<Prediction> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::UnknownPair { state: s, action: a });
        }
        self.predictions[s * self.n_actions + a].ok_or(Error::UnknownPair { state: s, action: a })
    }

    /// Normalised visit frequency; zero for unobserved pairs.
    pub fn confidence(&self, s: StateId, a: ActionId) -> f64 {
        self.visit_count(s, a) as f64 / self.total_records as f64
    }

    /// Confidence for every pair, row-major.
    pub fn confidence_table(&self) -> Vec<f64> {
        let n = self.total_records as f64;
        self.entries.iter().map(|e| e.visit_count as f64 / n).collect()
    }
}

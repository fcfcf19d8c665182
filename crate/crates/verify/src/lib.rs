//! Small hand-built MDPs with datasets whose empirical distributions equal
//! the model exactly: every pair appears with multiplicity `m(s,a)·k`,
//! successors in exact proportion, and start states in exact `μ0`
//! proportion. Fixtures live inside FrozenLake's 16×4 index space so the
//! library's dataset type can hold them.

use std::collections::BTreeMap;

use simudice_core::dataset::{Dataset, ExperienceRecord};
use simudice_core::dice::DiceWeights;
use simudice_core::envs::EnvKind;
use simudice_core::mdp::{Policy, TabularMdp};

pub struct Fixture {
    pub name: &'static str,
    pub ns: usize,
    pub na: usize,
    pub gamma: f64,
    /// Per pair: successor counts out of `k`.
    pub succ: Vec<Vec<(usize, usize)>>,
    pub k: usize,
    pub reward: Vec<f64>,
    pub mu0_counts: Vec<usize>,
    pub mult: Vec<usize>,
    pub pi: Vec<f64>,
}

impl Fixture {
    pub fn mdp(&self) -> TabularMdp {
        let (ns, na) = (self.ns, self.na);
        let mut t = vec![0.0; ns * na * ns];
        for (pair, row) in self.succ.iter().enumerate() {
            assert_eq!(row.iter().map(|x| x.1).sum::<usize>(), self.k, "{}", self.name);
            for &(s2, c) in row {
                t[pair * ns + s2] += c as f64 / self.k as f64;
            }
        }
        let m: usize = self.mu0_counts.iter().sum();
        let mu0 = self.mu0_counts.iter().map(|&c| c as f64 / m as f64).collect();
        TabularMdp::new(ns, na, t, self.reward.clone(), vec![false; ns], mu0, self.gamma).unwrap()
    }

    pub fn policy(&self) -> Policy {
        Policy::new(self.ns, self.na, self.pi.clone()).unwrap()
    }

    /// `pi` padded to 16×4; unused actions get zero mass.
    pub fn host_policy(&self) -> Policy {
        let mut probs = vec![0.25; 64];
        for s in 0..self.ns {
            for a in 0..4 {
                probs[s * 4 + a] = if a < self.na { self.pi[s * self.na + a] } else { 0.0 };
            }
        }
        Policy::new(16, 4, probs).unwrap()
    }

    pub fn dataset(&self) -> Dataset {
        let mut base = Vec::new();
        for (pair, row) in self.succ.iter().enumerate() {
            let (s, a) = (pair / self.na, pair % self.na);
            for &(s2, c) in row {
                for _ in 0..self.mult[pair] * c {
                    base.push((s, a, self.reward[pair], s2));
                }
            }
        }
        let m: usize = self.mu0_counts.iter().sum();
        let starts: Vec<usize> = self
            .mu0_counts
            .iter()
            .enumerate()
            .flat_map(|(s, &c)| std::iter::repeat_n(s, c * base.len()))
            .collect();
        assert_eq!(starts.len(), m * base.len());
        let records = starts
            .iter()
            .enumerate()
            .map(|(i, &s0)| {
                let (s, a, r, s2) = base[i % base.len()];
                ExperienceRecord { episode_start_state: s0, state: s, action: a, reward: r, next_state: s2, done: false, truncated: false }
            })
            .collect();
        Dataset::new(EnvKind::FrozenLake, records, 0.0, 0).unwrap()
    }

    /// Empirical pair distribution of `d` restricted to the fixture's pairs.
    pub fn small_data_distribution(&self, d: &Dataset) -> Vec<f64> {
        let full = d.empirical_distribution();
        (0..self.ns * self.na).map(|p| full[(p / self.na) * 4 + p % self.na]).collect()
    }

    /// Fixture-sized weights lifted into the 16×4 space.
    pub fn embed_weights(&self, w: &DiceWeights) -> DiceWeights {
        let values = (0..64)
            .map(|i| if i / 4 < self.ns && i % 4 < self.na { w.get(i / 4, i % 4) } else { 0.0 })
            .collect();
        DiceWeights::new(16, 4, values, vec![true; 64])
    }
}

pub fn fixtures() -> Vec<Fixture> {
    let mut out = vec![
        Fixture {
            name: "two-state cycle",
            ns: 2,
            na: 2,
            gamma: 0.9,
            succ: vec![vec![(0, 1)], vec![(1, 1)], vec![(0, 1)], vec![(1, 1)]],
            k: 1,
            reward: vec![1.0, 0.0, 0.0, 2.0],
            mu0_counts: vec![1, 1],
            mult: vec![1, 2, 3, 1],
            pi: vec![0.3, 0.7, 0.6, 0.4],
        },
        Fixture {
            name: "stochastic chain",
            ns: 3,
            na: 2,
            gamma: 0.95,
            succ: vec![
                vec![(0, 1), (1, 3)],
                vec![(0, 4)],
                vec![(2, 2), (0, 2)],
                vec![(1, 1), (2, 3)],
                vec![(2, 4)],
                vec![(0, 3), (2, 1)],
            ],
            k: 4,
            reward: vec![0.0, 0.5, 1.0, -1.0, 2.0, 0.0],
            mu0_counts: vec![2, 1, 1],
            mult: vec![1, 1, 1, 1, 3, 1],
            pi: vec![0.5, 0.5, 0.2, 0.8, 0.9, 0.1],
        },
        Fixture {
            name: "self loops at gamma 0.99",
            ns: 4,
            na: 2,
            gamma: 0.99,
            succ: (0..8).map(|p| vec![(if p % 2 == 0 { p / 2 } else { (p / 2 + 1) % 4 }, 1)]).collect(),
            k: 1,
            reward: (0..8).map(|p| if p % 2 == 0 { (p / 2) as f64 } else { -1.0 }).collect(),
            mu0_counts: vec![1, 0, 0, 0],
            mult: vec![5, 1, 1, 1, 2, 1, 1, 4],
            pi: [0.9, 0.1].repeat(4),
        },
    ];
    let (ns, na) = (5, 3);
    let mut succ = Vec::new();
    let mut pi = Vec::new();
    for s in 0..ns {
        let row: Vec<f64> = (0..na).map(|a| (1 + (s + a) % 3) as f64).collect();
        let z: f64 = row.iter().sum();
        pi.extend(row.iter().map(|x| x / z));
        for a in 0..na {
            let mut c = BTreeMap::new();
            *c.entry((s + a) % ns).or_insert(0) += 1;
            *c.entry((2 * s + a + 1) % ns).or_insert(0) += 2;
            succ.push(c.into_iter().collect());
        }
    }
    out.push(Fixture {
        name: "five states, three actions",
        ns,
        na,
        gamma: 0.8,
        succ,
        k: 3,
        reward: (0..ns * na).map(|p| (p % 4) as f64 - 1.0).collect(),
        mu0_counts: vec![1, 0, 2, 0, 1],
        mult: (0..ns * na).map(|p| 1 + (p / na + 2 * (p % na)) % 3).collect(),
        pi,
    });
    out
}

//! Native Taxi, FrozenLake (4x4, non-slippery) and CliffWalking.
//!
//! Dynamics, rewards, encodings and start distributions follow the Gymnasium
//! toy-text definitions. Every environment is deterministic, so
//! [`EnvKind::transition`] is a plain function and [`EnvKind::to_tabular_mdp`]
//! exports one-hot transition rows.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, StateId, TabularMdp};

/// Episode cap used for both data collection and evaluation.
pub const MAX_EPISODE_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnvKind {
    Taxi,
    FrozenLake,
    CliffWalking,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::Taxi, EnvKind::FrozenLake, EnvKind::CliffWalking];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Taxi => "Taxi",
            EnvKind::FrozenLake => "FrozenLake",
            EnvKind::CliffWalking => "CliffWalking",
        }
    }

    pub fn spec(self) -> EnvSpec {
        let (n_states, n_actions) = match self {
            EnvKind::Taxi => (500, 6),
            EnvKind::FrozenLake => (16, 4),
            EnvKind::CliffWalking => (48, 4),
        };
        EnvSpec { kind: self, n_states, n_actions, max_episode_steps: MAX_EPISODE_STEPS }
    }

    pub fn n_states(self) -> usize {
        self.spec().n_states
    }

    pub fn n_actions(self) -> usize {
        self.spec().n_actions
    }

    /// Smallest and largest single-step reward.
    pub fn reward_bounds(self) -> (f64, f64) {
        match self {
            EnvKind::Taxi => (-10.0, 20.0),
            EnvKind::FrozenLake => (0.0, 1.0),
            EnvKind::CliffWalking => (-100.0, -1.0),
        }
    }

    pub fn is_terminal(self, s: StateId) -> bool {
        match self {
            EnvKind::Taxi => {
                let t = taxi::decode(s);
                t.passenger == t.destination
            }
            EnvKind::FrozenLake => matches!(frozen_lake::MAP[s], b'H' | b'G'),
            EnvKind::CliffWalking => s == cliff::GOAL,
        }
    }

    /// Start states with their probabilities.
    pub fn initial_distribution(self) -> Vec<(StateId, f64)> {
        match self {
            EnvKind::Taxi => {
                let starts = taxi::start_states();
                let p = 1.0 / starts.len() as f64;
                starts.into_iter().map(|s| (s, p)).collect()
            }
            EnvKind::FrozenLake => vec![(0, 1.0)],
            EnvKind::CliffWalking => vec![(cliff::START, 1.0)],
        }
    }

    pub fn sample_initial<R: Rng + ?Sized>(self, rng: &mut R) -> StateId {
        match self {
            EnvKind::Taxi => {
                let starts = taxi::start_states();
                starts[rng.random_range(0..starts.len())]
            }
            EnvKind::FrozenLake => 0,
            EnvKind::CliffWalking => cliff::START,
        }
    }

    /// Deterministic dynamics: `(next_state, reward, terminated)`.
    ///
    /// Terminal states are not steppable.
    pub fn transition(self, s: StateId, a: ActionId) -> Result<Transition> {
        let spec = self.spec();
        if s >= spec.n_states {
            return Err(Error::OutOfRange { kind: "state", index: s, limit: spec.n_states });
        }
        if a >= spec.n_actions {
            return Err(Error::OutOfRange { kind: "action", index: a, limit: spec.n_actions });
        }
        if self.is_terminal(s) {
            return Err(Error::TerminalState(s));
        }
        Ok(match self {
            EnvKind::Taxi => taxi::step(s, a),
            EnvKind::FrozenLake => frozen_lake::step(s, a),
            EnvKind::CliffWalking => cliff::step(s, a),
        })
    }

    /// Exact tabular export. Terminal rows are absorbing with zero reward.
    pub fn to_tabular_mdp(self, gamma: f64) -> Result<TabularMdp> {
        let spec = self.spec();
        let (ns, na) = (spec.n_states, spec.n_actions);
        let mut transition = vec![0.0; ns * na * ns];
        let mut reward = vec![0.0; ns * na];
        let mut terminal = vec![false; ns];
        for s in 0..ns {
            terminal[s] = self.is_terminal(s);
            for a in 0..na {
                let row = (s * na + a) * ns;
                if terminal[s] {
                    transition[row + s] = 1.0;
                } else {
                    let t = self.transition(s, a)?;
                    transition[row + t.next_state] = 1.0;
                    reward[s * na + a] = t.reward;
                }
            }
        }
        let mut mu0 = vec![0.0; ns];
        for (s, p) in self.initial_distribution() {
            mu0[s] = p;
        }
        TabularMdp::new(ns, na, transition, reward, terminal, mu0, gamma)
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "taxi" => Ok(EnvKind::Taxi),
            "frozenlake" => Ok(EnvKind::FrozenLake),
            "cliffwalking" => Ok(EnvKind::CliffWalking),
            _ => Err(Error::UnknownEnv(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub n_states: usize,
    pub n_actions: usize,
    pub max_episode_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next_state: StateId,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub next_state: StateId,
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
}

/// A running episode. One instance per worker.
#[derive(Debug, Clone)]
pub struct Env {
    kind: EnvKind,
    max_steps: usize,
    state: Option<StateId>,
    elapsed: usize,
}

impl Env {
    pub fn new(kind: EnvKind) -> Self {
        Self::with_max_steps(kind, MAX_EPISODE_STEPS)
    }

    pub fn with_max_steps(kind: EnvKind, max_steps: usize) -> Self {
        Self { kind, max_steps, state: None, elapsed: 0 }
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn state(&self) -> Option<StateId> {
        self.state
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StateId {
        let s = self.kind.sample_initial(rng);
        self.state = Some(s);
        self.elapsed = 0;
        s
    }

    /// Start an episode from an arbitrary non-terminal state.
    pub fn reset_to(&mut self, s: StateId) -> Result<StateId> {
        let n = self.kind.n_states();
        if s >= n {
            return Err(Error::OutOfRange { kind: "state", index: s, limit: n });
        }
        if self.kind.is_terminal(s) {
            return Err(Error::TerminalState(s));
        }
        self.state = Some(s);
        self.elapsed = 0;
        Ok(s)
    }

    /// Advance the episode. After `done` or `truncated` the instance must be
    /// reset before stepping again.
    pub fn step(&mut self, action: ActionId) -> Result<StepResult> {
        let s = self.state.ok_or(Error::NotReset)?;
        let t = self.kind.transition(s, action)?;
        self.elapsed += 1;
        let truncated = !t.done && self.elapsed >= self.max_steps;
        self.state = if t.done || truncated { None } else { Some(t.next_state) };
        Ok(StepResult { next_state: t.next_state, reward: t.reward, done: t.done, truncated })
    }
}

pub mod taxi {
    use super::Transition;
    use crate::mdp::{ActionId, StateId};

    const MAP: [&[u8; 11]; 7] = [
        b"+---------+",
        b"|R: | : :G|",
        b"| : | : : |",
        b"| : : : : |",
        b"| | : | : |",
        b"|Y| : |B: |",
        b"+---------+",
    ];

    /// R, G, Y, B landmark coordinates.
    pub const LOCS: [(usize, usize); 4] = [(0, 0), (0, 4), (4, 0), (4, 3)];
    pub const IN_TAXI: usize = 4;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub struct TaxiState {
        pub row: usize,
        pub col: usize,
        pub passenger: usize,
        pub destination: usize,
    }

    pub fn encode(t: TaxiState) -> StateId {
        ((t.row * 5 + t.col) * 5 + t.passenger) * 4 + t.destination
    }

    pub fn decode(mut s: StateId) -> TaxiState {
        let destination = s % 4;
        s /= 4;
        let passenger = s % 5;
        s /= 5;
        TaxiState { row: s / 5, col: s % 5, passenger, destination }
    }

    pub fn start_states() -> Vec<StateId> {
        let mut out = Vec::with_capacity(300);
        for s in 0..500 {
            let t = decode(s);
            if t.passenger < IN_TAXI && t.passenger != t.destination {
                out.push(s);
            }
        }
        out
    }

    pub(super) fn step(s: StateId, a: ActionId) -> Transition {
        let mut t = decode(s);
        let mut reward = -1.0;
        let mut done = false;
        let at = (t.row, t.col);
        match a {
            0 => t.row = (t.row + 1).min(4),
            1 => t.row = t.row.saturating_sub(1),
            2 if MAP[1 + t.row][2 * t.col + 2] == b':' => t.col = (t.col + 1).min(4),
            3 if MAP[1 + t.row][2 * t.col] == b':' => t.col = t.col.saturating_sub(1),
            4 => {
                if t.passenger < IN_TAXI && at == LOCS[t.passenger] {
                    t.passenger = IN_TAXI;
                } else {
                    reward = -10.0;
                }
            }
            5 => {
                if at == LOCS[t.destination] && t.passenger == IN_TAXI {
                    t.passenger = t.destination;
                    done = true;
                    reward = 20.0;
                } else if let (Some(i), IN_TAXI) = (LOCS.iter().position(|&l| l == at), t.passenger) {
                    t.passenger = i;
                } else {
                    reward = -10.0;
                }
            }
            _ => {}
        }
        Transition { next_state: encode(t), reward, done }
    }
}

pub mod frozen_lake {
    use super::Transition;
    use crate::mdp::{ActionId, StateId};

    /// SFFF / FHFH / FFFH / HFFG, row-major.
    pub const MAP: &[u8; 16] = b"SFFFFHFHFFFHHFFG";

    pub(super) fn step(s: StateId, a: ActionId) -> Transition {
        let (mut row, mut col) = (s / 4, s % 4);
        match a {
            0 => col = col.saturating_sub(1),
            1 => row = (row + 1).min(3),
            2 => col = (col + 1).min(3),
            _ => row = row.saturating_sub(1),
        }
        let next = row * 4 + col;
        let tile = MAP[next];
        Transition {
            next_state: next,
            reward: if tile == b'G' { 1.0 } else { 0.0 },
            done: matches!(tile, b'G' | b'H'),
        }
    }
}

pub mod cliff {
    use super::Transition;
    use crate::mdp::{ActionId, StateId};

    pub const START: StateId = 36;
    pub const GOAL: StateId = 47;

    pub fn is_cliff(s: StateId) -> bool {
        (37..=46).contains(&s)
    }

    pub(super) fn step(s: StateId, a: ActionId) -> Transition {
        let (mut row, mut col) = (s / 12, s % 12);
        match a {
            0 => row = row.saturating_sub(1),
            1 => col = (col + 1).min(11),
            2 => row = (row + 1).min(3),
            _ => col = col.saturating_sub(1),
        }
        let next = row * 12 + col;
        if is_cliff(next) {
            Transition { next_state: START, reward: -100.0, done: false }
        } else {
            Transition { next_state: next, reward: -1.0, done: next == GOAL }
        }
    }
}

//! Score-guided configuration fuzzing over bit strings.
//!
//! Three encodings of the search space:
//!
//! * `ConfVar` — one bit per configuration variable; a candidate *is* a
//!   total configuration and is always feasible.
//! * `PresCond` — one bit per unique presence condition. A candidate asks
//!   for the conditions at one-bits to hold and (by default) the conditions
//!   at zero-bits not to; a SAT check filters infeasible combinations and
//!   produces a witness model. With [`FuzzParams::negate_unselected`] turned
//!   off, zero-bits are left unconstrained instead, which makes every
//!   candidate with a satisfiable selected set feasible.
//! * `Selective` — `PresCond` restricted to conditions with nonzero weight
//!   under the active cost function; zero-weight conditions never occupy a
//!   bit and are never constrained.
//!
//! Candidates live in a max-priority queue keyed by metric score. Each cycle
//! pops the best candidate and applies deterministic window flips plus
//! random multi-bit flips; every mutant is checked, scored, and enqueued.
//! Feasible candidates also land in an output queue, capped to bound memory,
//! from which the top `m` configurations are returned.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::extract::PcMap;
use crate::formula::{conjoin, Assignment, PropFormula};
use crate::metrics::{score_assignment, weigh, CostFunction};
use crate::rng::Rng;
use crate::solver;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuzzKind {
    ConfVar,
    PresCond,
    Selective,
}

impl fmt::Display for FuzzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FuzzKind::ConfVar => "cvf",
            FuzzKind::PresCond => "pcf",
            FuzzKind::Selective => "spcf",
        })
    }
}

/// Fixed-length bit string over variables or conditions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bits(pub Vec<bool>);

impl Bits {
    pub fn zeros(len: usize) -> Bits {
        Bits(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flip(&mut self, index: usize) {
        self.0[index] = !self.0[index];
    }

    pub fn parse(text: &str) -> Option<Bits> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return None;
        }
        trimmed
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<bool>>>()
            .map(Bits)
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Max-priority queue with deterministic tie-breaking: among equal scores,
/// the earliest-inserted element pops first.
#[derive(Debug, Clone)]
pub struct MaxQueue<T> {
    // Key: (score, !sequence) so `last_key_value` is max score, oldest entry.
    items: BTreeMap<(u64, u64), T>,
    next_seq: u64,
}

impl<T> MaxQueue<T> {
    pub fn new() -> Self {
        MaxQueue {
            items: BTreeMap::new(),
            next_seq: 0,
        }
    }

    pub fn push(&mut self, score: u64, value: T) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.items.insert((score, u64::MAX - seq), value);
    }

    pub fn pop_max(&mut self) -> Option<(u64, T)> {
        let key = *self.items.last_key_value()?.0;
        let value = self.items.remove(&key).unwrap();
        Some((key.0, value))
    }

    /// Drops the minimum-score element (newest among equals).
    pub fn evict_min(&mut self) -> Option<(u64, T)> {
        let key = *self.items.first_key_value()?.0;
        let value = self.items.remove(&key).unwrap();
        Some((key.0, value))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn max_score(&self) -> Option<u64> {
        self.items.last_key_value().map(|(k, _)| k.0)
    }
}

impl<T> Default for MaxQueue<T> {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone)]
pub struct FuzzParams {
    pub kind: FuzzKind,
    pub cycles: u32,
    /// Number of top configurations to return.
    pub top: usize,
    pub rng_seed: u64,
    /// Use window lengths {1,2,4} at every offset for the deterministic
    /// stage instead of one window per length anchored by cycle.
    pub afl_windows: bool,
    /// Score the logical-unit metric as the count of distinct enabled
    /// conditions instead of their occurrence-weighted sum.
    pub lcu_count_unique: bool,
    /// Conjoin negations of zero-bit conditions (exact-selection reading).
    pub negate_unselected: bool,
    /// Output-queue size bound; the minimum-score entry is evicted first.
    pub queue_cap: usize,
}

pub const DEFAULT_CYCLES_PRESCOND: u32 = 25;
pub const DEFAULT_CYCLES_CONFVAR: u32 = 5;
pub const DEFAULT_QUEUE_CAP: usize = 100_000;

impl FuzzParams {
    pub fn new(kind: FuzzKind) -> Self {
        FuzzParams {
            kind,
            cycles: match kind {
                FuzzKind::ConfVar => DEFAULT_CYCLES_CONFVAR,
                _ => DEFAULT_CYCLES_PRESCOND,
            },
            top: 10,
            rng_seed: 0,
            afl_windows: false,
            lcu_count_unique: false,
            negate_unselected: true,
            queue_cap: DEFAULT_QUEUE_CAP,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FuzzError {
    #[error("no seed configurations given")]
    NoSeeds,
    #[error("seed {index} has {actual} bits but the {kind} space has {expected}")]
    SeedLength {
        index: usize,
        kind: FuzzKind,
        actual: usize,
        expected: usize,
    },
    #[error("the {kind} bit space is empty (no conditions to fuzz)")]
    EmptySpace { kind: FuzzKind },
}

#[derive(Debug, Clone)]
pub struct FuzzResult {
    pub configuration: Assignment,
    pub score: u64,
    /// 1-based index of the feasibility check that produced this
    /// configuration; "found at step N" in method comparisons.
    pub step: u64,
}

#[derive(Debug, Clone)]
pub struct FuzzReport {
    pub results: Vec<FuzzResult>,
    pub candidates_checked: u64,
    pub feasible: u64,
}

/// Fuzzing session state. [`Fuzzer::check_and_add`] is the feasibility gate
/// and scorer; [`Fuzzer::run`] drives the full mutation loop.
pub struct Fuzzer<'a> {
    map: &'a PcMap,
    cost: &'a CostFunction,
    params: FuzzParams,
    /// Entry indices owning the bit positions (PresCond/Selective only).
    positions: Vec<usize>,
    queue: MaxQueue<Bits>,
    confqueue: MaxQueue<(Assignment, u64)>,
    seen: HashSet<Bits>,
    rng: Rng,
    candidates_checked: u64,
    feasible: u64,
}

impl<'a> Fuzzer<'a> {
    pub fn new(map: &'a PcMap, cost: &'a CostFunction, params: FuzzParams) -> Fuzzer<'a> {
        let positions: Vec<usize> = match params.kind {
            FuzzKind::ConfVar => Vec::new(),
            FuzzKind::PresCond => (0..map.entries.len()).collect(),
            FuzzKind::Selective => {
                let weights = weigh(map, cost).weights;
                (0..map.entries.len())
                    .filter(|&i| weights[i] > 0)
                    .collect()
            }
        };
        let rng = Rng::new(params.rng_seed);
        Fuzzer {
            map,
            cost,
            params,
            positions,
            queue: MaxQueue::new(),
            confqueue: MaxQueue::new(),
            seen: HashSet::new(),
            rng,
            candidates_checked: 0,
            feasible: 0,
        }
    }

    /// Length of the candidate bit strings for the active kind.
    pub fn bit_len(&self) -> usize {
        match self.params.kind {
            FuzzKind::ConfVar => self.map.vars.len(),
            _ => self.positions.len(),
        }
    }

    /// Entry indices owning each bit position (empty for `ConfVar`).
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    fn score(&self, conf: &Assignment) -> u64 {
        score_assignment(self.map, conf, self.cost, self.params.lcu_count_unique)
    }

    /// Feasibility gate: deduplicates, validates, scores, and enqueues one
    /// candidate. Returns the score when the candidate was accepted.
    pub fn check_and_add(&mut self, bits: &Bits) -> Option<u64> {
        debug_assert_eq!(bits.len(), self.bit_len());
        if !self.seen.insert(bits.clone()) {
            return None;
        }
        self.candidates_checked += 1;
        let model = match self.params.kind {
            FuzzKind::ConfVar => Assignment::from_values(bits.0.clone()),
            FuzzKind::PresCond | FuzzKind::Selective => {
                let mut parts = Vec::with_capacity(self.positions.len());
                for (bit_index, &entry) in self.positions.iter().enumerate() {
                    let pc = self.map.entries[entry].pc.clone();
                    if bits.0[bit_index] {
                        parts.push(pc);
                    } else if self.params.negate_unselected {
                        parts.push(PropFormula::not(pc));
                    }
                }
                let conjunction = conjoin(parts);
                solver::sat(&[conjunction], self.map.vars.len())?
            }
        };
        let score = self.score(&model);
        self.feasible += 1;
        self.queue.push(score, bits.clone());
        self.confqueue.push(score, (model, self.candidates_checked));
        while self.confqueue.len() > self.params.queue_cap {
            self.confqueue.evict_min();
        }
        Some(score)
    }

    fn deterministic_window_lengths(&self) -> Vec<usize> {
        let len = self.bit_len();
        if self.params.afl_windows {
            [1usize, 2, 4].into_iter().filter(|&i| i <= len).collect()
        } else {
            (1..=len).collect()
        }
    }

    fn mutate(&mut self, cur: &Bits, cycle: u32) {
        let len = self.bit_len();
        // Deterministic stage: consecutive windows.
        for i in self.deterministic_window_lengths() {
            if self.params.afl_windows {
                for offset in 0..=(len - i) {
                    let mut mutant = cur.clone();
                    for b in offset..offset + i {
                        mutant.flip(b);
                    }
                    self.check_and_add(&mutant);
                }
            } else {
                // One window per length, anchored by the cycle counter.
                let offset = ((cycle - 1) as usize) % (len - i + 1);
                let mut mutant = cur.clone();
                for b in offset..offset + i {
                    mutant.flip(b);
                }
                self.check_and_add(&mutant);
            }
        }
        // Nondeterministic stage: i distinct random positions per length.
        for i in self.deterministic_window_lengths() {
            let mut mutant = cur.clone();
            for b in self.rng.distinct(len, i) {
                mutant.flip(b);
            }
            self.check_and_add(&mutant);
        }
    }

    /// Seeds the queues and runs the mutation loop for the configured number
    /// of cycles (stopping early if the queue drains), then returns the top
    /// configurations by score, ties resolved by insertion order.
    pub fn run(&mut self, seeds: &[Bits]) -> Result<FuzzReport, FuzzError> {
        if seeds.is_empty() {
            return Err(FuzzError::NoSeeds);
        }
        let expected = self.bit_len();
        if expected == 0 {
            return Err(FuzzError::EmptySpace {
                kind: self.params.kind,
            });
        }
        for (index, seed) in seeds.iter().enumerate() {
            if seed.len() != expected {
                return Err(FuzzError::SeedLength {
                    index,
                    kind: self.params.kind,
                    actual: seed.len(),
                    expected,
                });
            }
            self.check_and_add(seed);
        }

        let mut cycle = 1;
        while cycle <= self.params.cycles && !self.queue.is_empty() {
            let (_, cur) = self.queue.pop_max().unwrap();
            self.mutate(&cur, cycle);
            cycle += 1;
        }

        let mut results = Vec::with_capacity(self.params.top.min(self.confqueue.len()));
        while results.len() < self.params.top {
            match self.confqueue.pop_max() {
                Some((score, (configuration, step))) => results.push(FuzzResult {
                    configuration,
                    score,
                    step,
                }),
                None => break,
            }
        }
        Ok(FuzzReport {
            results,
            candidates_checked: self.candidates_checked,
            feasible: self.feasible,
        })
    }
}

/// Convenience wrapper: one full fuzzing session.
pub fn fuzz(
    map: &PcMap,
    cost: &CostFunction,
    seeds: &[Bits],
    params: FuzzParams,
) -> Result<FuzzReport, FuzzError> {
    Fuzzer::new(map, cost, params).run(seeds)
}

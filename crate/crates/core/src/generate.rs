//! MaxSAT-based configuration generation.
//!
//! [`maximal`] finds the configuration maximizing the summed weight of
//! enabled conditions (hard constraints: the feature model; soft: every
//! condition with nonzero weight). [`maximal_iterative`] repeats that over
//! the shrinking set of still-unsatisfied conditions — the greedy
//! approximation of minimum set cover — until every nonzero-weight condition
//! is covered. [`maximal_variants`] derives same-size one-swap variants from
//! a cover, keeping those whose conditions are jointly satisfiable.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::extract::PcMap;
use crate::formula::{conjoin, Assignment, VarId};
use crate::metrics::{weigh, CostFunction};
use crate::solver::{self, SoftConstraint, SolverError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("feature model is unsatisfiable")]
    HardUnsat,
    #[error("an iteration satisfied no remaining condition; residual set is infeasible")]
    InfeasibleResidual,
}

impl From<SolverError> for GenError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::HardUnsat => GenError::HardUnsat,
        }
    }
}

/// One generated configuration with the entry indices it targets.
#[derive(Debug, Clone)]
pub struct GenResult {
    pub configuration: Assignment,
    /// Targeted entries enabled by this configuration.
    pub enabled: BTreeSet<usize>,
    /// Targeted entries left unsatisfied.
    pub unsatisfied: BTreeSet<usize>,
    pub score: u64,
}

/// Cover produced by the greedy loop, in generation order. Each successive
/// configuration's `enabled` set is disjoint from all earlier ones.
#[derive(Debug, Clone)]
pub struct CoverSet {
    pub configs: Vec<GenResult>,
}

impl CoverSet {
    pub fn union_enabled(&self) -> BTreeSet<usize> {
        self.configs
            .iter()
            .flat_map(|c| c.enabled.iter().copied())
            .collect()
    }
}

/// A one-swap variant: the entry set and a witness model for its conjunction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    /// Sorted entry indices.
    pub entries: Vec<usize>,
    pub witness: Assignment,
}

/// Variables not constrained by the feature model or any enabled condition
/// are cleared, which keeps emitted configurations minimal and reproducible.
/// Enabled conditions cannot mention the cleared variables, so the enabled
/// set is unchanged.
fn clear_unconstrained(
    model: &mut Assignment,
    map: &PcMap,
    enabled: &BTreeSet<usize>,
) {
    let mut constrained: BTreeSet<VarId> = map.feature_model.vars();
    for &i in enabled {
        map.entries[i].pc.collect_vars(&mut constrained);
    }
    for id in map.vars.ids() {
        if !constrained.contains(&id) {
            model.set(id, false);
        }
    }
}

/// One MaxSAT call over the `active` subset of entries with the given
/// per-entry weights. Zero-weight entries in `active` are not offered to the
/// solver and never appear in the result partition.
fn maximal_over(
    map: &PcMap,
    weights: &[u64],
    active: &BTreeSet<usize>,
) -> Result<GenResult, GenError> {
    let targeted: Vec<usize> = active
        .iter()
        .copied()
        .filter(|&i| weights[i] > 0)
        .collect();
    let soft: Vec<SoftConstraint> = targeted
        .iter()
        .map(|&i| SoftConstraint {
            formula: map.entries[i].pc.clone(),
            weight: weights[i],
        })
        .collect();
    let hard = [map.feature_model.clone()];
    let result = solver::max_sat(&hard, &soft, map.vars.len())?;

    let enabled: BTreeSet<usize> = result.satisfied.iter().map(|&s| targeted[s]).collect();
    let unsatisfied: BTreeSet<usize> = result.unsatisfied.iter().map(|&s| targeted[s]).collect();
    let mut configuration = result.model;
    clear_unconstrained(&mut configuration, map, &enabled);
    debug_assert!(enabled
        .iter()
        .all(|&i| map.entries[i].pc.evaluate(&configuration)));
    Ok(GenResult {
        configuration,
        enabled,
        unsatisfied,
        score: result.total_weight,
    })
}

/// The single maximal configuration under `cost`.
pub fn maximal(map: &PcMap, cost: &CostFunction) -> Result<GenResult, GenError> {
    let weights = weigh(map, cost).weights;
    let all: BTreeSet<usize> = (0..map.entries.len()).collect();
    maximal_over(map, &weights, &all)
}

/// Greedy cover: repeatedly finds the maximal configuration over the
/// still-unsatisfied conditions until none remain. The union of the enabled
/// sets covers every nonzero-weight entry.
pub fn maximal_iterative(map: &PcMap, cost: &CostFunction) -> Result<CoverSet, GenError> {
    let weights = weigh(map, cost).weights;
    let mut residual: BTreeSet<usize> = (0..map.entries.len())
        .filter(|&i| weights[i] > 0)
        .collect();
    let mut configs = Vec::new();
    while !residual.is_empty() {
        let step = maximal_over(map, &weights, &residual)?;
        if step.enabled.is_empty() {
            // Cannot happen for maps built by `build_pcmap` (every entry is
            // satisfiable with the feature model); guards against
            // hand-crafted inputs looping forever.
            return Err(GenError::InfeasibleResidual);
        }
        for i in &step.enabled {
            residual.remove(i);
        }
        configs.push(step);
    }
    Ok(CoverSet { configs })
}

/// One-swap variants of a cover (deduplicated, canonically sorted). For each
/// cover configuration, each enabled entry is exchanged for an entry enabled
/// by some other cover configuration; the variant is kept when the
/// conjunction of its conditions is satisfiable, with the satisfying model
/// as witness. `jobs` bounds the worker threads used for the SAT checks.
pub fn maximal_variants(map: &PcMap, cover: &CoverSet, jobs: usize) -> Vec<Variant> {
    // "Enabled" is by evaluation of the stored total configuration, so
    // incidentally enabled entries participate in swaps too.
    let enabled_sets: Vec<BTreeSet<usize>> = cover
        .configs
        .iter()
        .map(|c| {
            (0..map.entries.len())
                .filter(|&i| map.entries[i].pc.evaluate(&c.configuration))
                .collect()
        })
        .collect();

    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    for (ci, base) in enabled_sets.iter().enumerate() {
        let alternatives: BTreeSet<usize> = enabled_sets
            .iter()
            .enumerate()
            .filter(|&(cj, _)| cj != ci)
            .flat_map(|(_, s)| s.iter().copied())
            .collect();
        for &out_entry in base {
            for &in_entry in &alternatives {
                if base.contains(&in_entry) {
                    continue; // swap must change the set and keep its size
                }
                let mut variant: Vec<usize> = base
                    .iter()
                    .copied()
                    .filter(|&e| e != out_entry)
                    .collect();
                variant.push(in_entry);
                variant.sort_unstable();
                if seen.insert(variant.clone()) {
                    candidates.push(variant);
                }
            }
        }
    }

    let check = |entry_indices: &Vec<usize>| -> Option<Variant> {
        let conjunction = conjoin(
            entry_indices
                .iter()
                .map(|&i| map.entries[i].pc.clone())
                .collect(),
        );
        let mut witness = solver::sat(std::slice::from_ref(&conjunction), map.vars.len())?;
        let constrained = conjunction.vars();
        for id in map.vars.ids() {
            if !constrained.contains(&id) {
                witness.set(id, false);
            }
        }
        Some(Variant {
            entries: entry_indices.clone(),
            witness,
        })
    };

    let mut variants: Vec<Option<Variant>> = if jobs <= 1 || candidates.len() < 2 {
        candidates.iter().map(check).collect()
    } else {
        // Independent SAT checks; results are merged back in candidate order
        // so the output does not depend on scheduling.
        let workers = jobs.min(candidates.len());
        let chunk = candidates.len().div_ceil(workers);
        let mut results: Vec<Option<Variant>> = vec![None; candidates.len()];
        let check = &check;
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (w, slice) in candidates.chunks(chunk).enumerate() {
                handles.push((
                    w,
                    scope.spawn(move || slice.iter().map(check).collect::<Vec<_>>()),
                ));
            }
            for (w, handle) in handles {
                let part = handle.join().expect("variant worker panicked");
                for (offset, value) in part.into_iter().enumerate() {
                    results[w * chunk + offset] = value;
                }
            }
        });
        results
    };

    let mut out: Vec<Variant> = variants.drain(..).flatten().collect();
    out.sort_by(|a, b| a.entries.cmp(&b.entries));
    out
}

/// Machine-readable summary of a cover: per-iteration enabled counts and
/// scores, mirroring the per-configuration "# PCs" reporting shape.
pub fn cover_summary(cover: &CoverSet) -> serde_json::Value {
    serde_json::json!({
        "configurations": cover.configs.len(),
        "per_config_enabled": cover.configs.iter().map(|c| c.enabled.len()).collect::<Vec<_>>(),
        "per_config_score": cover.configs.iter().map(|c| c.score).collect::<Vec<_>>(),
    })
}

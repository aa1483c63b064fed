//! Deterministic random generators for the test and verification suites.
//!
//! Not part of the stable API.
#![doc(hidden)]

use crate::extract::{build_pcmap, CodeUnit, PcInstance, PcMap};
use crate::formula::{semantically_equal, Assignment, PropFormula, VarTable};
use crate::rng::Rng;
use crate::solver::SoftConstraint;

/// Random formula of bounded depth over the first `num_vars` table entries.
pub fn random_formula(rng: &mut Rng, vars: &VarTable, num_vars: usize, depth: usize) -> PropFormula {
    let leaf = depth == 0 || rng.below(100) < 35;
    if leaf {
        match rng.below(20) {
            0 => PropFormula::True,
            1 => PropFormula::False,
            _ => PropFormula::Var(
                vars.lookup(&format!("V{}", rng.below(num_vars))).unwrap(),
            ),
        }
    } else {
        match rng.below(4) {
            0 => PropFormula::not(random_formula(rng, vars, num_vars, depth - 1)),
            1 | 2 => {
                let n = 2 + rng.below(2);
                PropFormula::And(
                    (0..n)
                        .map(|_| random_formula(rng, vars, num_vars, depth - 1))
                        .collect(),
                )
            }
            _ => {
                let n = 2 + rng.below(2);
                PropFormula::Or(
                    (0..n)
                        .map(|_| random_formula(rng, vars, num_vars, depth - 1))
                        .collect(),
                )
            }
        }
    }
}

/// Table with `n` variables named `V0..V{n-1}`.
pub fn var_table(n: usize) -> VarTable {
    let mut vars = VarTable::new();
    for i in 0..n {
        vars.intern(&format!("V{i}"));
    }
    vars
}

pub fn all_assignments(num_vars: usize) -> impl Iterator<Item = Assignment> {
    (0u64..(1u64 << num_vars)).map(move |bits| {
        Assignment::from_values((0..num_vars).map(|i| bits >> i & 1 == 1).collect())
    })
}

/// Random satisfiable, pairwise semantically distinct presence conditions
/// packed into a map (one single-line unit each, so every LCU weight is 1).
pub fn random_pcmap(rng: &mut Rng, num_vars: usize, want_entries: usize) -> PcMap {
    let vars = var_table(num_vars);
    let mut accepted: Vec<PropFormula> = Vec::new();
    let mut attempts = 0;
    while accepted.len() < want_entries && attempts < want_entries * 40 {
        attempts += 1;
        let f = random_formula(rng, &vars, num_vars, 3);
        let satisfiable = all_assignments(num_vars).any(|a| f.evaluate(&a));
        if !satisfiable {
            continue;
        }
        if accepted
            .iter()
            .any(|g| semantically_equal(g, &f, vars.len()))
        {
            continue;
        }
        accepted.push(f);
    }
    let instances: Vec<PcInstance> = accepted
        .into_iter()
        .enumerate()
        .map(|(i, pc)| PcInstance {
            pc,
            unit: CodeUnit {
                file: "r.c".into(),
                lines: vec![(i + 1) as u32],
            },
        })
        .collect();
    build_pcmap(instances, PropFormula::True, vars)
}

/// Random weighted MaxSAT instance with satisfiable hard constraints.
pub fn random_maxsat_instance(
    rng: &mut Rng,
    num_vars: usize,
    max_soft: usize,
    max_weight: u64,
) -> (Vec<PropFormula>, Vec<SoftConstraint>, VarTable) {
    let vars = var_table(num_vars);
    let hard: Vec<PropFormula> = loop {
        let n = rng.below(3);
        let candidate: Vec<PropFormula> = (0..n)
            .map(|_| random_formula(rng, &vars, num_vars, 2))
            .collect();
        let satisfiable =
            all_assignments(num_vars).any(|a| candidate.iter().all(|f| f.evaluate(&a)));
        if satisfiable {
            break candidate;
        }
    };
    let soft_count = 1 + rng.below(max_soft);
    let soft: Vec<SoftConstraint> = (0..soft_count)
        .map(|_| SoftConstraint {
            formula: random_formula(rng, &vars, num_vars, 3),
            weight: 1 + rng.below(max_weight as usize) as u64,
        })
        .collect();
    (hard, soft, vars)
}

/// Metadata for one generated directive group, used to state partition
/// properties against the scanner's per-line attribution.
pub struct GeneratedGroup {
    /// First body line of the enclosing branch (`None` at top level).
    pub parent_sample: Option<u32>,
    /// First body line of each branch, in order.
    pub branch_samples: Vec<u32>,
    pub has_else: bool,
}

pub struct GeneratedFile {
    pub text: String,
    pub groups: Vec<GeneratedGroup>,
}

/// Random nested directive file, at most 60 physical lines. Every emitted
/// branch starts with a body line so each branch condition has a sampled
/// line; `groups` records only what was actually emitted.
pub fn random_directive_file(rng: &mut Rng, max_depth: usize, num_vars: usize) -> GeneratedFile {
    const LINE_CAP: usize = 52; // leaves room for closing #endif frames

    let vars = var_table(num_vars);
    let mut lines: Vec<String> = Vec::new();
    let mut groups: Vec<GeneratedGroup> = Vec::new();

    fn cond_text(rng: &mut Rng, vars: &VarTable, num_vars: usize) -> String {
        // Depth-2 conditions keep expressions readable and satisfiable often
        // enough to exercise both live and dead branches.
        random_formula(rng, vars, num_vars, 2).print(vars)
    }

    fn emit_body(lines: &mut Vec<String>, rng: &mut Rng) -> u32 {
        let fillers = ["work();", "x = x + 1;", "call(a, b);", "buf[i] = 0;"];
        lines.push(fillers[rng.below(fillers.len())].to_string());
        lines.len() as u32
    }

    #[allow(clippy::too_many_arguments)]
    fn emit_block(
        rng: &mut Rng,
        vars: &VarTable,
        num_vars: usize,
        depth: usize,
        parent_sample: Option<u32>,
        lines: &mut Vec<String>,
        groups: &mut Vec<GeneratedGroup>,
    ) {
        let items = 1 + rng.below(3);
        for _ in 0..items {
            if lines.len() >= LINE_CAP {
                return;
            }
            let make_group = depth > 0 && rng.below(100) < 45;
            if !make_group {
                emit_body(lines, rng);
                continue;
            }
            let want_branches = 1 + rng.below(3);
            let want_else = rng.below(100) < 50;
            let mut branch_samples = Vec::new();
            for b in 0..want_branches {
                // The first branch always fits (the item check above ran);
                // later branches stop once the cap is reached.
                if b > 0 && lines.len() >= LINE_CAP {
                    break;
                }
                // Mix the opener forms; chains continue with #elif.
                let directive = if b == 0 {
                    match rng.below(10) {
                        0 => format!("#ifdef V{}", rng.below(num_vars)),
                        1 => format!("#ifndef V{}", rng.below(num_vars)),
                        2 => format!(
                            "#if defined(V{}) && {}",
                            rng.below(num_vars),
                            cond_text(rng, vars, num_vars)
                        ),
                        3 => format!(
                            "#if {} || \\\n    defined V{}",
                            cond_text(rng, vars, num_vars),
                            rng.below(num_vars)
                        ),
                        _ => format!("#if {}", cond_text(rng, vars, num_vars)),
                    }
                } else {
                    format!("#elif {}", cond_text(rng, vars, num_vars))
                };
                // A continuation backslash spans two physical lines.
                for part in directive.split('\n') {
                    lines.push(part.to_string());
                }
                let sample = emit_body(lines, rng);
                branch_samples.push(sample);
                emit_block(rng, vars, num_vars, depth - 1, Some(sample), lines, groups);
            }
            let has_else = want_else && lines.len() < LINE_CAP;
            if has_else {
                lines.push("#else".to_string());
                let sample = emit_body(lines, rng);
                branch_samples.push(sample);
                emit_block(rng, vars, num_vars, depth - 1, Some(sample), lines, groups);
            }
            lines.push("#endif".to_string());
            groups.push(GeneratedGroup {
                parent_sample,
                branch_samples,
                has_else,
            });
        }
    }

    emit_block(
        &mut Rng::new(rng.next_u64()),
        &vars,
        num_vars,
        max_depth,
        None,
        &mut lines,
        &mut groups,
    );
    debug_assert!(lines.len() <= 60, "generator produced {} lines", lines.len());
    let mut text = lines.join("\n");
    text.push('\n');
    GeneratedFile { text, groups }
}

//! Solver properties against the exhaustive oracle.

mod common;

use common::{all_assignments, random_formula, random_maxsat_instance, var_table};
use maxconf_core::formula::{PropFormula, VarId};
use maxconf_core::oracle::{brute_maxsat, brute_sat};
use maxconf_core::rng::Rng;
use maxconf_core::solver::{max_sat, sat, SoftConstraint};

#[test]
fn sat_agrees_with_enumeration() {
    let num_vars = 9;
    let vars = var_table(num_vars);
    let mut rng = Rng::new(0xabc1);
    for _ in 0..150 {
        let n = 1 + rng.below(3);
        let hard: Vec<_> = (0..n)
            .map(|_| random_formula(&mut rng, &vars, num_vars, 3))
            .collect();
        let brute = brute_sat(&hard, num_vars).unwrap();
        let solved = sat(&hard, num_vars);
        assert_eq!(brute.is_some(), solved.is_some());
        if let Some(model) = solved {
            assert!(hard.iter().all(|f| f.evaluate(&model)));
        }
    }
}

#[test]
fn max_sat_weight_matches_the_oracle() {
    let mut rng = Rng::new(0xabc2);
    for case in 0..120 {
        let num_vars = 4 + rng.below(9); // up to 12 here; acceptance runs 14
        let (hard, soft, _) = random_maxsat_instance(&mut rng, num_vars, 8, 5);
        let solved = max_sat(&hard, &soft, num_vars).unwrap();
        let (oracle_weight, _) = brute_maxsat(&hard, &soft, num_vars).unwrap();
        assert_eq!(
            solved.total_weight, oracle_weight,
            "case {case}: solver weight {} differs from exhaustive {}",
            solved.total_weight, oracle_weight
        );
    }
}

#[test]
fn max_sat_partition_is_valid() {
    let mut rng = Rng::new(0xabc3);
    for _ in 0..80 {
        let num_vars = 4 + rng.below(7);
        let (hard, soft, _) = random_maxsat_instance(&mut rng, num_vars, 8, 5);
        let result = max_sat(&hard, &soft, num_vars).unwrap();
        for f in &hard {
            assert!(f.evaluate(&result.model), "hard constraint violated");
        }
        let mut weight = 0;
        for (i, sc) in soft.iter().enumerate() {
            let holds = sc.formula.evaluate(&result.model);
            assert_eq!(holds, result.satisfied.contains(&i));
            assert_eq!(!holds, result.unsatisfied.contains(&i));
            if holds {
                weight += sc.weight;
            }
        }
        assert_eq!(weight, result.total_weight);
        assert_eq!(result.satisfied.len() + result.unsatisfied.len(), soft.len());
    }
}

#[test]
fn adding_a_soft_constraint_never_decreases_the_optimum() {
    let mut rng = Rng::new(0xabc4);
    let num_vars = 8;
    let vars = var_table(num_vars);
    for _ in 0..60 {
        let (hard, mut soft, _) = random_maxsat_instance(&mut rng, num_vars, 6, 5);
        let before = max_sat(&hard, &soft, num_vars).unwrap().total_weight;
        soft.push(SoftConstraint {
            formula: random_formula(&mut rng, &vars, num_vars, 3),
            weight: 1 + rng.below(5) as u64,
        });
        let after = max_sat(&hard, &soft, num_vars).unwrap().total_weight;
        assert!(after >= before, "adding a soft constraint lowered the optimum");
    }
}

#[test]
fn max_sat_is_deterministic() {
    let mut rng = Rng::new(0xabc5);
    for _ in 0..30 {
        let (hard, soft, _) = random_maxsat_instance(&mut rng, 8, 6, 5);
        let a = max_sat(&hard, &soft, 8).unwrap();
        let b = max_sat(&hard, &soft, 8).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.total_weight, b.total_weight);
        assert_eq!(a.satisfied, b.satisfied);
    }
}

#[test]
fn solver_handles_desk_scale_instances_quickly() {
    // Sizing contract: an instance of roughly two thousand variables after
    // the CNF encoding must solve well under a second.
    let num_vars = 120;
    let mut rng = Rng::new(0xabc6);
    // Alternating and/or chains, ~30 gates per formula.
    let chain = |rng: &mut Rng| -> PropFormula {
        let mut f = PropFormula::Var(VarId::from_index(rng.below(num_vars)));
        for depth in 0..30 {
            let a = PropFormula::Var(VarId::from_index(rng.below(num_vars)));
            let b = if rng.below(4) == 0 {
                PropFormula::not(PropFormula::Var(VarId::from_index(rng.below(num_vars))))
            } else {
                PropFormula::Var(VarId::from_index(rng.below(num_vars)))
            };
            f = if depth % 2 == 0 {
                PropFormula::Or(vec![a, PropFormula::And(vec![b, f])])
            } else {
                PropFormula::And(vec![a, PropFormula::Or(vec![b, f])])
            };
        }
        f
    };
    let hard: Vec<PropFormula> = (0..70).map(|_| chain(&mut rng)).collect();
    let mut builder = maxconf_core::cnf::CnfBuilder::new(num_vars);
    for f in &hard {
        builder.assert_formula(f);
    }
    let cnf = builder.finish();
    assert!(
        cnf.num_vars() >= 1500,
        "instance too small to exercise the contract: {} vars",
        cnf.num_vars()
    );
    let start = std::time::Instant::now();
    let solved = maxconf_core::solver::solve_cnf(&cnf);
    let elapsed = start.elapsed();
    assert!(elapsed.as_millis() < 1000, "took {elapsed:?}");
    println!(
        "solved {} vars / {} clauses in {elapsed:?} ({})",
        cnf.num_vars(),
        cnf.clauses.len(),
        if solved.is_some() { "sat" } else { "unsat" }
    );
}

#[test]
fn brute_sat_first_model_is_in_enumeration_order() {
    let num_vars = 4;
    let vars = var_table(num_vars);
    let mut rng = Rng::new(0xabc7);
    for _ in 0..40 {
        let f = random_formula(&mut rng, &vars, num_vars, 3);
        if let Some(model) = brute_sat(std::slice::from_ref(&f), num_vars).unwrap() {
            let first = all_assignments(num_vars).find(|a| f.evaluate(a)).unwrap();
            assert_eq!(model, first);
        }
    }
}

/// Pigeonhole instances: `pigeons` into `holes`. Unsatisfiable whenever
/// pigeons > holes, and heavy on conflict analysis.
fn pigeonhole(pigeons: usize, holes: usize) -> maxconf_core::cnf::CnfInstance {
    use maxconf_core::cnf::Lit;
    let var = |p: usize, h: usize| p * holes + h;
    let mut clauses = Vec::new();
    for p in 0..pigeons {
        clauses.push((0..holes).map(|h| Lit::positive(var(p, h))).collect());
    }
    for h in 0..holes {
        for a in 0..pigeons {
            for b in a + 1..pigeons {
                clauses.push(vec![Lit::negative(var(a, h)), Lit::negative(var(b, h))]);
            }
        }
    }
    maxconf_core::cnf::CnfInstance {
        clauses,
        num_original_vars: pigeons * holes,
        num_aux_vars: 0,
    }
}

#[test]
fn pigeonhole_instances_are_decided_correctly() {
    use maxconf_core::solver::solve_cnf;
    for holes in 2..=5 {
        assert!(
            solve_cnf(&pigeonhole(holes + 1, holes)).is_none(),
            "{} pigeons fit into {holes} holes?",
            holes + 1
        );
        let model = solve_cnf(&pigeonhole(holes, holes)).expect("square case is satisfiable");
        // One hole per pigeon, no sharing.
        let values = model.values();
        for h in 0..holes {
            let occupants = (0..holes).filter(|p| values[p * holes + h]).count();
            assert!(occupants <= 1);
        }
    }
}

#[test]
fn random_three_cnf_matches_enumeration() {
    use maxconf_core::cnf::{CnfInstance, Lit};
    use maxconf_core::solver::solve_cnf;
    let num_vars = 12;
    let mut rng = Rng::new(0xabc8);
    for _ in 0..60 {
        // Around the hard density for random 3-CNF.
        let num_clauses = 50;
        let clauses: Vec<Vec<Lit>> = (0..num_clauses)
            .map(|_| {
                let picked = rng.distinct(num_vars, 3);
                picked
                    .into_iter()
                    .map(|v| Lit::new(v, rng.bool()))
                    .collect()
            })
            .collect();
        let cnf = CnfInstance {
            clauses: clauses.clone(),
            num_original_vars: num_vars,
            num_aux_vars: 0,
        };
        let brute = (0u32..1 << num_vars).any(|bits| {
            clauses.iter().all(|clause| {
                clause.iter().any(|lit| {
                    let v = bits >> lit.var() & 1 == 1;
                    if lit.is_positive() {
                        v
                    } else {
                        !v
                    }
                })
            })
        });
        let solved = solve_cnf(&cnf);
        assert_eq!(brute, solved.is_some());
        if let Some(model) = solved {
            for clause in &clauses {
                assert!(clause.iter().any(|lit| {
                    if lit.is_positive() {
                        model.values()[lit.var()]
                    } else {
                        !model.values()[lit.var()]
                    }
                }));
            }
        }
    }
}

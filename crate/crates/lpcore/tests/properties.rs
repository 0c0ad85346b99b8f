//! Randomized checks of the reference simplex against an independent solver
//! and against exhaustive enumeration.

use a2a_lp::{dual_objective, solve_ilp, IlpOptions, LpModel, Relation, Sense, SolveOptions, Solver, SolverKind, Var};
use proptest::prelude::*;

/// Boxed LP whose rows are built around a known feasible point, so every
/// instance is feasible and bounded.
#[derive(Clone, Debug)]
struct Instance {
    maximize: bool,
    upper: Vec<f64>,
    obj: Vec<f64>,
    rows: Vec<(Vec<i32>, u8, f64)>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (2usize..7, 1usize..6).prop_flat_map(|(n, m)| {
        (
            any::<bool>(),
            prop::collection::vec(1u8..10, n),
            prop::collection::vec(-5i32..6, n),
            prop::collection::vec((prop::collection::vec(-4i32..5, n), 0u8..3, 0u8..4), m),
            prop::collection::vec(0.0f64..1.0, n),
        )
            .prop_map(|(maximize, ub, obj, rows, frac)| {
                let upper: Vec<f64> = ub.iter().map(|&u| u as f64).collect();
                let x0: Vec<f64> = upper.iter().zip(&frac).map(|(u, f)| u * f).collect();
                let rows = rows
                    .into_iter()
                    .map(|(a, rel, slack)| {
                        let ax: f64 = a.iter().zip(&x0).map(|(&c, x)| c as f64 * x).sum();
                        let rhs = match rel {
                            0 => ax + slack as f64,
                            1 => ax - slack as f64,
                            _ => ax,
                        };
                        (a, rel, rhs)
                    })
                    .collect();
                Instance { maximize, upper, obj: obj.iter().map(|&c| c as f64).collect(), rows }
            })
    })
}

fn build(inst: &Instance, integer: bool) -> LpModel {
    let mut m = LpModel::new(if inst.maximize { Sense::Maximize } else { Sense::Minimize });
    let vars: Vec<Var> = inst
        .upper
        .iter()
        .zip(&inst.obj)
        .map(|(&u, &c)| if integer { m.add_integer_var(0.0, u, c) } else { m.add_var(0.0, u, c) })
        .collect();
    for (a, rel, rhs) in &inst.rows {
        let relation = [Relation::Le, Relation::Ge, Relation::Eq][*rel as usize];
        let coeffs = a.iter().zip(&vars).filter(|(&c, _)| c != 0).map(|(&c, &v)| (v, c as f64)).collect();
        m.add_row(coeffs, relation, *rhs);
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reference_is_feasible_optimal_and_dual_tight(inst in instance()) {
        let m = build(&inst, false);
        let opts = SolveOptions::default();
        let a = Solver::Reference.solve(&m, &opts).unwrap();
        prop_assert!(a.is_optimal(), "{}", a.diagnostics);
        prop_assert!(m.max_violation(&a.primal) <= 1e-7);
        prop_assert!((m.evaluate(&a.primal) - a.objective).abs() <= 1e-7 * (1.0 + a.objective.abs()));
        let dual = dual_objective(&m, &a).unwrap();
        prop_assert!((dual - a.objective).abs() <= 1e-6 * (1.0 + a.objective.abs()), "dual {} primal {}", dual, a.objective);
        if let Ok(ext) = Solver::from_kind(&SolverKind::External(None)) {
            let b = ext.solve(&m, &opts).unwrap();
            prop_assert!((a.objective - b.objective).abs() <= 1e-6 * (1.0 + a.objective.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn branch_and_bound_matches_enumeration(inst in instance()) {
        prop_assume!(inst.upper.len() <= 4);
        let mut inst = inst;
        for u in &mut inst.upper {
            *u = u.min(3.0);
        }
        // integer rows need integer right-hand sides
        for row in &mut inst.rows {
            row.2 = row.2.floor();
            if row.1 == 2 {
                row.1 = 0;
            }
        }
        let m = build(&inst, true);
        let sign = if inst.maximize { 1.0 } else { -1.0 };
        let mut best: Option<f64> = None;
        let dims: Vec<usize> = inst.upper.iter().map(|&u| u as usize + 1).collect();
        let total: usize = dims.iter().product();
        for mut code in 0..total {
            let x: Vec<f64> = dims.iter().map(|&d| { let v = code % d; code /= d; v as f64 }).collect();
            if m.max_violation(&x) <= 1e-9 {
                let v = m.evaluate(&x);
                if best.map_or(true, |b| sign * v > sign * b) {
                    best = Some(v);
                }
            }
        }
        let r = solve_ilp(&m, &IlpOptions::default());
        match best {
            None => prop_assert!(r.is_err() || !r.unwrap().solution.is_optimal()),
            Some(b) => {
                let r = r.unwrap();
                prop_assert!((r.solution.objective - b).abs() <= 1e-6, "bnb {} enum {}", r.solution.objective, b);
            }
        }
    }
}

//! Solver selection and the external-backend registry.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock, RwLock};

use crate::model::LpModel;
use crate::{LpError, LpSolution, SolveOptions};

/// An alternative LP engine honoring the [`solve_lp`](crate::solve_lp)
/// contract: same statuses, same tolerances, objective in the model's sense.
///
/// Integrality flags are ignored; backends solve the continuous relaxation.
pub trait LpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, model: &LpModel, opts: &SolveOptions) -> Result<LpSolution, LpError>;
}

/// A concrete solver handle, cheap to clone and share across threads.
#[derive(Clone)]
pub enum Solver {
    Reference,
    External(Arc<dyn LpBackend>),
}

impl fmt::Debug for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Default for Solver {
    fn default() -> Self {
        Solver::Reference
    }
}

impl Solver {
    pub fn from_kind(kind: &SolverKind) -> Result<Solver, LpError> {
        match kind {
            SolverKind::Reference => Ok(Solver::Reference),
            SolverKind::External(None) => default_external().map(Solver::External),
            SolverKind::External(Some(name)) => external(name).map(Solver::External),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Solver::Reference => "reference".into(),
            Solver::External(b) => format!("external:{}", b.name()),
        }
    }

    pub fn solve(&self, model: &LpModel, opts: &SolveOptions) -> Result<LpSolution, LpError> {
        match self {
            Solver::Reference => crate::solve_lp(model, opts),
            Solver::External(b) => {
                model.validate()?;
                b.solve(model, opts)
            }
        }
    }
}

/// Parsed form of `reference`, `external` or `external:<name>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Reference,
    External(Option<String>),
}

impl FromStr for SolverKind {
    type Err = LpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" => Ok(SolverKind::Reference),
            "external" => Ok(SolverKind::External(None)),
            _ => match s.strip_prefix("external:") {
                Some(name) if !name.is_empty() => Ok(SolverKind::External(Some(name.into()))),
                _ => Err(LpError::BackendUnavailable(format!(
                    "unknown solver `{s}`; expected `reference`, `external` or `external:<name>`"
                ))),
            },
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverKind::Reference => f.write_str("reference"),
            SolverKind::External(None) => f.write_str("external"),
            SolverKind::External(Some(n)) => write!(f, "external:{n}"),
        }
    }
}

type Registry = RwLock<BTreeMap<String, Arc<dyn LpBackend>>>;

fn registry() -> &'static Registry {
    static REG: OnceLock<Registry> = OnceLock::new();
    REG.get_or_init(|| {
        #[allow(unused_mut)]
        let mut map: BTreeMap<String, Arc<dyn LpBackend>> = BTreeMap::new();
        #[cfg(feature = "highs")]
        map.insert("highs".into(), Arc::new(HighsBackend::default()));
        RwLock::new(map)
    })
}

/// Registers `backend` under its own name, replacing any previous entry.
pub fn register_external(backend: Arc<dyn LpBackend>) {
    let name = backend.name().to_string();
    registry().write().expect("backend registry poisoned").insert(name, backend);
}

/// Looks up a registered backend by name.
pub fn external(name: &str) -> Result<Arc<dyn LpBackend>, LpError> {
    let reg = registry().read().expect("backend registry poisoned");
    reg.get(name).cloned().ok_or_else(|| {
        let known: Vec<&str> = reg.keys().map(String::as_str).collect();
        LpError::BackendUnavailable(format!(
            "no external LP backend named `{name}` (registered: {})",
            if known.is_empty() { "none".to_string() } else { known.join(", ") }
        ))
    })
}

/// The built-in external backend when compiled in, else the first registered one.
pub fn default_external() -> Result<Arc<dyn LpBackend>, LpError> {
    let reg = registry().read().expect("backend registry poisoned");
    if let Some(b) = reg.get("highs") {
        return Ok(b.clone());
    }
    reg.values().next().cloned().ok_or_else(|| {
        LpError::BackendUnavailable(
            "no external LP backend is registered and the `highs` feature is disabled".into(),
        )
    })
}

#[cfg(feature = "highs")]
pub use self::highs_impl::HighsBackend;

#[cfg(feature = "highs")]
mod highs_impl {
    use highs::{ColProblem, HighsModelStatus, Sense as HSense};

    use super::LpBackend;
    use crate::model::{LpModel, Relation, Sense};
    use crate::{LpError, LpSolution, LpStatus, SolveOptions};

    /// HiGHS interior point with crossover, so answers are basic like the
    /// reference simplex.
    #[derive(Clone, Debug)]
    pub struct HighsBackend {
        pub method: String,
        pub threads: Option<u32>,
    }

    impl Default for HighsBackend {
        fn default() -> Self {
            HighsBackend { method: "ipm".into(), threads: None }
        }
    }

    impl LpBackend for HighsBackend {
        fn name(&self) -> &str {
            "highs"
        }

        fn solve(&self, model: &LpModel, opts: &SolveOptions) -> Result<LpSolution, LpError> {
            let n = model.num_vars();
            if n == 0 {
                let feasible = model.max_violation(&[]) <= opts.tolerances.feasibility;
                let status = if feasible { LpStatus::Optimal } else { LpStatus::Infeasible };
                return Ok(LpSolution {
                    status,
                    objective: 0.0,
                    primal: Vec::new(),
                    duals: feasible.then(|| vec![0.0; model.num_rows()]),
                    iterations: 0,
                    diagnostics: String::new(),
                });
            }

            let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
            for (i, row) in model.rows().iter().enumerate() {
                for &(j, a) in &row.coeffs {
                    match cols[j].last_mut() {
                        Some(last) if last.0 == i => last.1 += a,
                        _ => cols[j].push((i, a)),
                    }
                }
            }

            let mut pb = ColProblem::default();
            let rows: Vec<_> = model
                .rows()
                .iter()
                .map(|r| match r.relation {
                    Relation::Le => pb.add_row(f64::NEG_INFINITY..=r.rhs),
                    Relation::Ge => pb.add_row(r.rhs..=f64::INFINITY),
                    Relation::Eq => pb.add_row(r.rhs..=r.rhs),
                })
                .collect();
            for j in 0..n {
                let entries: Vec<_> = cols[j]
                    .iter()
                    .filter(|e| e.1 != 0.0)
                    .map(|&(i, a)| (rows[i], a))
                    .collect();
                pb.add_column(model.objective()[j], model.lower()[j]..=model.upper()[j], entries);
            }
            let sense = match model.sense() {
                Sense::Maximize => HSense::Maximise,
                Sense::Minimize => HSense::Minimise,
            };
            let mut hm = pb
                .try_optimise(sense)
                .map_err(|e| LpError::Backend(format!("HiGHS rejected the model: {e:?}")))?;
            hm.make_quiet();
            hm.set_option("solver", self.method.as_str());
            hm.set_option("primal_feasibility_tolerance", opts.tolerances.feasibility.max(1e-10));
            hm.set_option("dual_feasibility_tolerance", opts.tolerances.optimality.max(1e-10));
            if let Some(t) = opts.time_limit {
                hm.set_option("time_limit", t.as_secs_f64());
            }
            if let Some(t) = self.threads {
                hm.set_option("threads", t as i32);
            }
            let solved = hm
                .try_solve()
                .map_err(|e| LpError::Backend(format!("HiGHS run failed: {e:?}")))?;
            let iterations =
                (solved.simplex_iteration_count() + solved.ipm_iteration_count()).max(0) as u64;
            let status = match solved.status() {
                HighsModelStatus::Optimal => LpStatus::Optimal,
                HighsModelStatus::Infeasible => LpStatus::Infeasible,
                HighsModelStatus::Unbounded => LpStatus::Unbounded,
                HighsModelStatus::UnboundedOrInfeasible => {
                    // decide with a zero-objective feasibility probe
                    let mut probe = model.clone();
                    for j in 0..n {
                        probe.set_objective(crate::Var(j), 0.0);
                    }
                    let p = self.solve(&probe, opts)?;
                    if p.status == LpStatus::Infeasible {
                        LpStatus::Infeasible
                    } else {
                        LpStatus::Unbounded
                    }
                }
                HighsModelStatus::ReachedTimeLimit => LpStatus::TimeLimit,
                HighsModelStatus::ReachedIterationLimit => LpStatus::IterationLimit,
                other => {
                    return Err(LpError::Backend(format!("HiGHS returned status {other:?}")));
                }
            };
            if status != LpStatus::Optimal {
                return Ok(LpSolution::without_point(status, n, iterations, String::new()));
            }
            let sol = solved.get_solution();
            let primal = sol.columns().to_vec();
            let duals = opts.compute_duals.then(|| sol.dual_rows().to_vec());
            Ok(LpSolution {
                status,
                objective: model.evaluate(&primal),
                primal,
                duals,
                iterations,
                diagnostics: String::new(),
            })
        }
    }
}

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CohortRow, CohortTable, GroupLabel, Level, Sex};
use crate::glm::special::logistic;
use crate::glm::{fit_logistic_with, CoefficientSampler, DesignMatrix, FitOptions, GlmError};

use super::spec::{Covariate, ImputationModelSpec, TargetSpec, Variable, FALLBACK_RIDGE};
use super::{MiError, Strategy};

const NV: usize = Variable::ALL.len();
type Codes = [u8; NV];

/// Imputed share per cycle of one variable, for each chain. Binary
/// variables track the share of 1s, categorical ones the first level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableTrace {
    pub variable: Variable,
    pub chains: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MultipleImputations {
    pub strategy: Strategy,
    pub seed: u64,
    pub spec: ImputationModelSpec,
    pub completed: Vec<CohortTable>,
    pub traces: Vec<VariableTrace>,
    /// Fits that fell back to the ridge penalty, and similar remarks.
    pub notes: Vec<String>,
    imputed_rows: Vec<bool>,
}

impl MultipleImputations {
    pub fn m(&self) -> usize {
        self.completed.len()
    }

    /// Rows with at least one imputed cell.
    pub fn imputed_rows(&self) -> &[bool] {
        &self.imputed_rows
    }
}

/// Rows sharing one set of imputation-model parameters.
struct Pool {
    label: &'static str,
    fit_groups: &'static [GroupLabel],
    impute_groups: &'static [GroupLabel],
}

const P: GroupLabel = GroupLabel::Participant;
const R: GroupLabel = GroupLabel::RecontactRespondent;
const N: GroupLabel = GroupLabel::NonParticipant;

fn pools(strategy: Strategy) -> Vec<Pool> {
    match strategy {
        Strategy::MiMnar => vec![
            Pool {
                label: "participants",
                fit_groups: &[P],
                impute_groups: &[P],
            },
            Pool {
                label: "recontact",
                fit_groups: &[R],
                impute_groups: &[R, N],
            },
        ],
        Strategy::MiMar => vec![Pool {
            label: "participants+recontact",
            fit_groups: &[P, R],
            impute_groups: &[P, R, N],
        }],
        Strategy::MiMarNr => vec![Pool {
            label: "participants",
            fit_groups: &[P],
            impute_groups: &[P, R, N],
        }],
    }
}

#[derive(Debug, Clone, Copy)]
enum Col {
    Intercept,
    Female,
    Age(usize),
    Region(usize),
    Level(Variable, u8),
}

fn columns(t: &TargetSpec) -> (Vec<Col>, Vec<String>) {
    let mut cols = vec![Col::Intercept];
    let mut names = vec![crate::glm::INTERCEPT.to_string()];
    for c in &t.covariates {
        names.extend(c.column_names());
        match *c {
            Covariate::Sex => cols.push(Col::Female),
            Covariate::Age => cols.extend((1..5).map(Col::Age)),
            Covariate::Region => cols.extend((1..5).map(Col::Region)),
            Covariate::Var(v) => {
                if v.n_levels() > 2 {
                    cols.extend((1..v.n_levels() as u8).map(|l| Col::Level(v, l)));
                } else {
                    cols.push(Col::Level(v, 1));
                }
            }
        }
    }
    (cols, names)
}

#[derive(Clone, Copy)]
struct Bg {
    female: bool,
    age: usize,
    region: usize,
}

impl Bg {
    fn of(row: &CohortRow) -> Self {
        Bg {
            female: row.background.sex == Sex::Female,
            age: row.background.age_band().index(),
            region: row.background.region.index(),
        }
    }
}

fn col_value(c: Col, bg: Bg, codes: &Codes) -> f64 {
    let on = match c {
        Col::Intercept => true,
        Col::Female => bg.female,
        Col::Age(b) => bg.age == b,
        Col::Region(r) => bg.region == r,
        Col::Level(v, l) => codes[v.index()] == l,
    };
    f64::from(u8::from(on))
}

/// One binary fit: dichotomy `j` of a target within a pool.
struct Unit {
    keep: Vec<usize>,
    mle: Vec<f64>,
    sampler: CoefficientSampler,
    note: Option<String>,
}

struct Work<'a> {
    spec: &'a ImputationModelSpec,
    targets: Vec<(Variable, Vec<Col>, Vec<String>)>,
    pools: Vec<Pool>,
    bg: Vec<Bg>,
    group: Vec<GroupLabel>,
    observed: Vec<Codes>,
    missing: Vec<[bool; NV]>,
    /// Pool that imputes each row, if any.
    row_pool: Vec<Option<usize>>,
    /// Fit rows per pool.
    fit_rows: Vec<Vec<usize>>,
}

impl Work<'_> {
    fn dichotomy_rows(&self, pool: usize, v: Variable, j: u8, codes: &[Codes]) -> Vec<usize> {
        self.fit_rows[pool]
            .iter()
            .copied()
            .filter(|&i| !self.missing[i][v.index()] && codes[i][v.index()] >= j)
            .collect()
    }

    fn fit_unit(
        &self,
        t: usize,
        pool: usize,
        j: u8,
        codes: &[Codes],
        cycle: usize,
        previous: Option<&Unit>,
    ) -> Result<Unit, MiError> {
        let (v, cols, names) = &self.targets[t];
        let rows = self.dichotomy_rows(pool, *v, j, codes);
        let k = cols.len();
        let label = format!(
            "{}{}",
            v.name(),
            if v.n_levels() > 2 {
                format!("[{j}]")
            } else {
                String::new()
            }
        );
        let group = self.pools[pool].label.to_string();
        if rows.is_empty() || (self.spec.ridge.is_none() && rows.len() < k + 10) {
            return Err(MiError::SmallStratum {
                variable: label,
                group,
                rows: rows.len(),
                columns: k,
            });
        }
        let mut data = Vec::with_capacity(rows.len() * k);
        let mut y = Vec::with_capacity(rows.len());
        for &i in &rows {
            data.extend(cols.iter().map(|&c| col_value(c, self.bg[i], &codes[i])));
            y.push(codes[i][v.index()] == j);
        }
        let full = DesignMatrix::from_rows(
            names[1..].to_vec(),
            &data.chunks(k).map(|r| r[1..].to_vec()).collect::<Vec<_>>(),
        )
        .map_err(|e| fit_error(&label, &group, cycle, e))?;
        let constant: BTreeSet<usize> = full.constant_columns().into_iter().collect();
        let keep: Vec<usize> = (0..k).filter(|c| *c == 0 || !constant.contains(c)).collect();
        let x = full.select_columns(&keep);
        let mut note = None;
        // the previous cycle's fit is a good start when the columns match
        let start = previous.filter(|u| u.keep == keep).map(|u| u.mle.clone());
        let opts = FitOptions {
            ridge: self.spec.ridge.unwrap_or(0.0),
            start,
            ..FitOptions::default()
        };
        let fit = match self.spec.ridge {
            Some(_) => fit_logistic_with(&x, &y, &opts),
            None => match fit_logistic_with(&x, &y, &opts) {
                Err(GlmError::Separation { .. } | GlmError::Collinear { .. }) => {
                    note = Some(format!(
                        "`{label}` in {group}: separation or collinearity, refitted with ridge {FALLBACK_RIDGE}"
                    ));
                    fit_logistic_with(&x, &y, &FitOptions::ridge(FALLBACK_RIDGE))
                }
                other => other,
            },
        }
        .map_err(|e| fit_error(&label, &group, cycle, e))?;
        if !fit.converged {
            return Err(fit_error(
                &label,
                &group,
                cycle,
                GlmError::Degenerate(format!(
                    "logistic fit did not converge in {} iterations",
                    fit.iterations
                )),
            ));
        }
        let sampler =
            CoefficientSampler::new(&fit).map_err(|e| fit_error(&label, &group, cycle, e))?;
        Ok(Unit {
            keep,
            mle: fit.coefficients,
            sampler,
            note,
        })
    }

    /// A unit's data never change when none of its fit rows has a missing
    /// covariate cell.
    fn is_static(&self, t: usize, pool: usize) -> bool {
        let (v, cols, _) = &self.targets[t];
        let vars: Vec<usize> = cols
            .iter()
            .filter_map(|c| match c {
                Col::Level(u, _) => Some(u.index()),
                _ => None,
            })
            .collect();
        self.fit_rows[pool].iter().all(|&i| {
            self.missing[i][v.index()] || vars.iter().all(|&u| !self.missing[i][u])
        })
    }
}

fn fit_error(variable: &str, group: &str, cycle: usize, source: GlmError) -> MiError {
    MiError::Fit {
        variable: variable.to_string(),
        group: group.to_string(),
        cycle,
        source,
    }
}

type UnitKey = (usize, usize, u8);

/// Runs `spec.m` independent chained-equation chains. Chain `c` draws from
/// its own ChaCha stream `c + 1` of `seed`, so results do not depend on
/// scheduling.
pub fn fcs_impute(
    table: &CohortTable,
    spec: &ImputationModelSpec,
    strategy: Strategy,
    seed: u64,
) -> Result<MultipleImputations, MiError> {
    spec.validate()?;
    let rows = table.rows();
    let n = rows.len();
    let pools = pools(strategy);
    let discard_recontact = strategy == Strategy::MiMarNr;

    let mut observed = vec![[0u8; NV]; n];
    let mut missing = vec![[false; NV]; n];
    for (i, row) in rows.iter().enumerate() {
        for v in Variable::ALL {
            match v.get(&row.questionnaire) {
                Some(c) if !(discard_recontact && row.group == R) => observed[i][v.index()] = c,
                _ => missing[i][v.index()] = true,
            }
        }
    }

    let targets: Vec<(Variable, Vec<Col>, Vec<String>)> = spec
        .targets
        .iter()
        .map(|t| {
            let (c, names) = columns(t);
            (t.target, c, names)
        })
        .collect();
    let modeled: BTreeSet<Variable> = spec
        .targets
        .iter()
        .flat_map(|t| {
            t.covariates
                .iter()
                .filter_map(|c| match c {
                    Covariate::Var(v) => Some(*v),
                    _ => None,
                })
                .chain([t.target])
        })
        .collect();
    for v in &modeled {
        if spec.target(*v).is_none() && missing.iter().any(|m| m[v.index()]) {
            return Err(MiError::UnmodeledMissing {
                variable: v.name().to_string(),
            });
        }
    }
    // cells outside the modeled set stay as they are
    for m in missing.iter_mut() {
        for v in Variable::ALL {
            if !modeled.contains(&v) {
                m[v.index()] = false;
            }
        }
    }

    let row_pool: Vec<Option<usize>> = rows
        .iter()
        .map(|r| pools.iter().position(|p| p.impute_groups.contains(&r.group)))
        .collect();
    let fit_rows: Vec<Vec<usize>> = pools
        .iter()
        .map(|p| {
            (0..n)
                .filter(|&i| p.fit_groups.contains(&rows[i].group))
                .collect()
        })
        .collect();
    let work = Work {
        spec,
        targets,
        pools,
        bg: rows.iter().map(Bg::of).collect(),
        group: rows.iter().map(|r| r.group).collect(),
        observed,
        missing,
        row_pool,
        fit_rows,
    };

    // rows whose missing cells have no pool to impute them
    for (i, pool) in work.row_pool.iter().enumerate() {
        if pool.is_none() && work.missing[i].iter().any(|&m| m) {
            return Err(MiError::NoDonors {
                variable: "questionnaire".into(),
                group: work.group[i].short().into(),
            });
        }
    }

    // fits whose data are fixed are shared by every chain and cycle
    let mut cache: HashMap<UnitKey, Arc<Unit>> = HashMap::new();
    let mut notes = BTreeSet::new();
    for (t, (v, _, _)) in work.targets.iter().enumerate() {
        for p in 0..work.pools.len() {
            if !pool_needs(&work, p, *v) || !work.is_static(t, p) {
                continue;
            }
            for j in 0..(v.n_levels() - 1) as u8 {
                let u = work.fit_unit(t, p, j, &work.observed, 0, None)?;
                if let Some(note) = &u.note {
                    notes.insert(note.clone());
                }
                cache.insert((t, p, j), Arc::new(u));
            }
        }
    }

    let chains: Vec<ChainOutput> = (0..spec.m)
        .into_par_iter()
        .map(|c| run_chain(&work, &cache, seed, c))
        .collect::<Result<_, _>>()?;

    let mut traces = Vec::new();
    for (t, (v, _, _)) in work.targets.iter().enumerate() {
        if work.missing.iter().any(|m| m[v.index()]) {
            traces.push(VariableTrace {
                variable: *v,
                chains: chains.iter().map(|c| c.trace[t].clone()).collect(),
            });
        }
    }
    let imputed_rows: Vec<bool> = work.missing.iter().map(|m| m.iter().any(|&x| x)).collect();
    let mut completed = Vec::with_capacity(spec.m);
    for ch in chains {
        notes.extend(ch.notes);
        completed.push(build_completed(table, &work, &ch.codes, discard_recontact));
    }
    Ok(MultipleImputations {
        strategy,
        seed,
        spec: spec.clone(),
        completed,
        traces,
        notes: notes.into_iter().collect(),
        imputed_rows,
    })
}

/// Whether any row imputed by pool `p` lacks `v`.
fn pool_needs(work: &Work<'_>, p: usize, v: Variable) -> bool {
    work.row_pool
        .iter()
        .zip(&work.missing)
        .any(|(rp, m)| *rp == Some(p) && m[v.index()])
}

struct ChainOutput {
    codes: Vec<Codes>,
    trace: Vec<Vec<f64>>,
    notes: Vec<String>,
}

fn run_chain(
    work: &Work<'_>,
    cache: &HashMap<UnitKey, Arc<Unit>>,
    seed: u64,
    chain: usize,
) -> Result<ChainOutput, MiError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64 + 1);
    let mut codes = work.observed.clone();
    let mut notes = Vec::new();

    // start from random draws of observed values in each pool's fit rows
    for (v, _, _) in &work.targets {
        let vi = v.index();
        for (p, pool) in work.pools.iter().enumerate() {
            if !pool_needs(work, p, *v) {
                continue;
            }
            let donors: Vec<u8> = work.fit_rows[p]
                .iter()
                .filter(|&&i| !work.missing[i][vi])
                .map(|&i| work.observed[i][vi])
                .collect();
            if donors.is_empty() {
                return Err(MiError::NoDonors {
                    variable: v.name().to_string(),
                    group: pool.label.to_string(),
                });
            }
            for i in 0..codes.len() {
                if work.row_pool[i] == Some(p) && work.missing[i][vi] {
                    codes[i][vi] = donors[rng.random_range(0..donors.len())];
                }
            }
        }
    }

    let mut trace = vec![Vec::with_capacity(work.spec.cycles); work.targets.len()];
    let mut last: HashMap<UnitKey, Arc<Unit>> = HashMap::new();
    for cycle in 1..=work.spec.cycles {
        for (t, (v, cols, _)) in work.targets.iter().enumerate() {
            let vi = v.index();
            for p in 0..work.pools.len() {
                if !pool_needs(work, p, *v) {
                    continue;
                }
                let levels = v.n_levels() as u8;
                let mut draws = Vec::with_capacity(usize::from(levels - 1));
                for j in 0..levels - 1 {
                    let unit = match cache.get(&(t, p, j)) {
                        Some(u) => Arc::clone(u),
                        None => {
                            let prev = last.get(&(t, p, j)).map(Arc::as_ref);
                            let u = Arc::new(work.fit_unit(t, p, j, &codes, cycle, prev)?);
                            if let Some(n) = &u.note {
                                notes.push(n.clone());
                            }
                            last.insert((t, p, j), Arc::clone(&u));
                            u
                        }
                    };
                    let beta = unit.sampler.sample(&mut rng);
                    draws.push((unit, beta));
                }
                for i in 0..codes.len() {
                    if work.row_pool[i] != Some(p) || !work.missing[i][vi] {
                        continue;
                    }
                    let mut code = levels - 1;
                    for (j, (unit, beta)) in draws.iter().enumerate() {
                        let eta: f64 = unit
                            .keep
                            .iter()
                            .zip(beta)
                            .map(|(&c, b)| b * col_value(cols[c], work.bg[i], &codes[i]))
                            .sum();
                        if rng.random::<f64>() < logistic(eta) {
                            code = j as u8;
                            break;
                        }
                    }
                    codes[i][vi] = code;
                }
            }
            let hit = if v.n_levels() > 2 { 0 } else { 1 };
            let (mut k, mut tot) = (0usize, 0usize);
            for i in 0..codes.len() {
                if work.missing[i][vi] {
                    tot += 1;
                    k += usize::from(codes[i][vi] == hit);
                }
            }
            if tot > 0 {
                trace[t].push(k as f64 / tot as f64);
            }
        }
    }
    Ok(ChainOutput {
        codes,
        trace,
        notes,
    })
}

fn build_completed(
    table: &CohortTable,
    work: &Work<'_>,
    codes: &[Codes],
    discard_recontact: bool,
) -> CohortTable {
    let rows = table
        .rows()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut out = row.clone();
            let q = &mut out.questionnaire;
            for v in Variable::ALL {
                if work.missing[i][v.index()] {
                    v.set(q, codes[i][v.index()]);
                    if v == Variable::HeavyAlcohol {
                        q.alcohol_portions = None;
                    }
                }
            }
            if discard_recontact && row.group == R {
                q.alcohol_portions = None;
            }
            out
        })
        .collect();
    CohortTable::from_parts_unchecked(rows, table.provenance().clone(), table.truth_arc())
}

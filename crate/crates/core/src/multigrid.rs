//! Coarse-to-fine center refinement for the multi-kernel LASSO.
//!
//! All blocks start on one lattice anchored at the lower corner of the
//! bounds. After each solve, every block keeps the lattice nodes within
//! `halo` cells of its nonzero coefficients, subdivides them by
//! `refine_factor`, and is re-solved from the previous coefficients placed
//! at the same positions (each coarse node is also a fine node).

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::{assemble_design, axis_count, default_bounds, Bounds, CenterGrid, Dictionary, TrainingSet};
use crate::kernels::{Kernel, KernelSpec};
use crate::solvers::{debias, solve_lasso_from, Debiased, SolverConfig, SolverResult};
use crate::{Error, Result};

const STALL_TOL: f64 = 1e-8;
const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    pub initial_spacing: f64,
    pub min_spacing: f64,
    pub refine_factor: usize,
    pub halo: usize,
    /// Refinement rounds after the coarse solve.
    pub max_rounds: usize,
    /// Inactive atoms with `|2D_jᵀ(y − Da)| ≥ screen_ratio · λ` are refined
    /// alongside the active ones; 0 refines every atom, values above 1 only
    /// the active set.
    pub screen_ratio: f64,
    /// After the last round, adds every finest-lattice atom that violates
    /// `|2D_jᵀ(y − Da)| ≤ λ` and re-solves until none is left.
    pub final_sweep: bool,
    /// Grid bounds; defaults to the data box grown by three kernel widths.
    pub bounds: Option<Bounds>,
    /// Solver settings; `lambda` is taken from the call instead.
    pub solver: SolverConfig,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            initial_spacing: 0.1,
            min_spacing: 0.0125,
            refine_factor: 2,
            halo: 1,
            max_rounds: 10,
            screen_ratio: 0.5,
            final_sweep: true,
            bounds: None,
            solver: SolverConfig::default(),
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_spacing.is_finite() && self.min_spacing > 0.0) {
            return Err(Error::InvalidConfig("spacings must be positive and finite".into()));
        }
        if !(self.min_spacing < self.initial_spacing) {
            return Err(Error::InvalidConfig(format!(
                "min_spacing {} must be below initial_spacing {}",
                self.min_spacing, self.initial_spacing
            )));
        }
        if self.refine_factor < 2 {
            return Err(Error::InvalidConfig("refine_factor must be at least 2".into()));
        }
        if let Some(b) = &self.bounds {
            if b.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
                return Err(Error::InvalidConfig("grid bounds must be finite with lo ≤ hi".into()));
            }
        }
        Ok(())
    }

    /// Spacings of round 0 and every refinement allowed by `min_spacing`
    /// and `max_rounds`.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = vec![self.initial_spacing];
        let mut h = self.initial_spacing;
        for _ in 0..self.max_rounds {
            let next = h / self.refine_factor as f64;
            if next < self.min_spacing * (1.0 - 1e-9) {
                break;
            }
            out.push(next);
            h = next;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundSummary {
    pub round: usize,
    pub spacing: f64,
    pub n_columns: usize,
    pub objective: f64,
    /// Active columns after the debiasing refit.
    pub n_active: usize,
}

#[derive(Clone, Debug)]
pub struct RefinementTrace {
    pub rounds: Vec<RoundSummary>,
    pub result: SolverResult,
    pub dictionary: Dictionary,
    pub refit: Debiased,
    /// Set when the coarse solve selects nothing; the model is then zero.
    pub empty_model: bool,
}

impl RefinementTrace {
    pub fn grids(&self) -> Vec<&CenterGrid> {
        self.dictionary.blocks().iter().map(|b| &b.grid).collect()
    }

    pub fn objective(&self) -> f64 {
        self.result.objective()
    }

    /// CSV with columns `round,spacing,columns,objective,active`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["round", "spacing", "columns", "objective", "active"])
            ?;
        for r in &self.rounds {
            w.write_record([
                r.round.to_string(),
                format!("{:.16e}", r.spacing),
                r.n_columns.to_string(),
                format!("{:.16e}", r.objective),
                r.n_active.to_string(),
            ])
            ?;
        }
        w.flush()?;
        Ok(())
    }
}

type Node = Vec<i64>;

struct Lattice {
    lower: Vec<f64>,
    counts: Vec<i64>,
    spacing: f64,
}

impl Lattice {
    fn new(bounds: &Bounds, spacing: f64) -> Self {
        Self {
            lower: bounds.iter().map(|b| b.0).collect(),
            counts: bounds.iter().map(|(lo, hi)| axis_count(hi - lo, spacing) as i64).collect(),
            spacing,
        }
    }

    fn contains(&self, node: &[i64]) -> bool {
        node.iter().zip(&self.counts).all(|(&i, &n)| i >= 0 && i < n)
    }

    fn point(&self, node: &[i64]) -> Vec<f64> {
        node.iter().zip(&self.lower).map(|(&i, lo)| lo + i as f64 * self.spacing).collect()
    }

    fn coords(&self, nodes: &BTreeSet<Node>) -> Vec<f64> {
        nodes
            .iter()
            .flat_map(|n| self.point(n))
            .collect()
    }
}

fn full_lattice(lattice: &Lattice) -> BTreeSet<Node> {
    let d = lattice.counts.len();
    let mut out = BTreeSet::new();
    let mut node = vec![0i64; d];
    loop {
        out.insert(node.clone());
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            node[axis] += 1;
            if node[axis] < lattice.counts[axis] {
                break;
            }
            node[axis] = 0;
        }
    }
}

/// Fine nodes covering `halo` coarse cells around each kept coarse node.
fn refine_nodes(active: &[Node], factor: i64, halo: i64, fine: &Lattice) -> BTreeSet<Node> {
    let mut out = BTreeSet::new();
    let reach = factor * halo;
    for node in active {
        let d = node.len();
        let mut delta = vec![-reach; d];
        loop {
            let candidate: Node = node.iter().zip(&delta).map(|(&i, &k)| factor * i + k).collect();
            if fine.contains(&candidate) {
                out.insert(candidate);
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                delta[axis] += 1;
                if delta[axis] <= reach {
                    break;
                }
                delta[axis] = -reach;
            }
            if delta.iter().all(|&k| k == -reach) {
                break;
            }
        }
    }
    out
}

fn build_dictionary(
    kernels: &[Kernel],
    nodes: &[BTreeSet<Node>],
    lattice: &Lattice,
    bounds: &Bounds,
    train: &TrainingSet,
) -> Result<Dictionary> {
    let d = bounds.len();
    let grids = nodes
        .iter()
        .map(|set| CenterGrid::from_centers(d, lattice.coords(set), lattice.spacing, bounds.clone()))
        .collect::<Result<Vec<_>>>()?;
    assemble_design(kernels, &grids, train)
}

/// Dictionary on `nodes` with `transfer` coefficients placed at their nodes.
fn dictionary_with_start(
    kernels: &[Kernel],
    nodes: &[BTreeSet<Node>],
    lattice: &Lattice,
    bounds: &Bounds,
    train: &TrainingSet,
    transfer: &[Vec<(Node, f64)>],
) -> Result<(Dictionary, DVector<f64>)> {
    let dict = build_dictionary(kernels, nodes, lattice, bounds, train)?;
    let mut start = DVector::zeros(dict.n_columns());
    for (n, moved) in transfer.iter().enumerate() {
        let positions: Vec<&Node> = nodes[n].iter().collect();
        for (node, a) in moved {
            if let Ok(l) = positions.binary_search(&node) {
                start[dict.flat_column(n, l)] = *a;
            }
        }
    }
    Ok((dict, start))
}

/// Lattice nodes outside `nodes` whose atoms violate the dual bound.
fn price_lattice(
    kernels: &[Kernel],
    nodes: &[BTreeSet<Node>],
    lattice: &Lattice,
    train: &TrainingSet,
    residual: &DVector<f64>,
    lambda: f64,
) -> Result<Vec<Vec<Node>>> {
    let all: Vec<Node> = full_lattice(lattice).into_iter().collect();
    kernels
        .iter()
        .zip(nodes)
        .map(|(kernel, present)| {
            let candidates: Vec<&Node> = all.iter().filter(|n| !present.contains(*n)).collect();
            let scores = candidates
                .par_iter()
                .map(|node| {
                    let z = lattice.point(node);
                    let mut g = 0.0;
                    for m in 0..train.len() {
                        g += kernel.eval(train.site(m), &z)? * residual[m];
                    }
                    Ok(2.0 * g.abs())
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(candidates
                .into_iter()
                .zip(scores)
                .filter(|(_, g)| *g > lambda * (1.0 + 1e-9))
                .map(|(n, _)| n.clone())
                .collect())
        })
        .collect()
}

/// Solves the multi-kernel LASSO `‖Da − y‖² + λ‖a‖₁` on adaptively refined
/// center grids, one block per kernel.
pub fn solve_multigrid(
    specs: &[KernelSpec],
    train: &TrainingSet,
    lambda: f64,
    config: &RefinementConfig,
) -> Result<RefinementTrace> {
    config.validate()?;
    if specs.is_empty() {
        return Err(Error::InvalidConfig("at least one kernel is required".into()));
    }
    let dim = train.dim();
    if !(1..=2).contains(&dim) {
        return Err(Error::InvalidConfig(format!("refinement supports d ∈ {{1, 2}}, got {dim}")));
    }
    let kernels = specs.iter().map(|s| s.compile()).collect::<Result<Vec<_>>>()?;
    let bounds = match &config.bounds {
        Some(b) if b.len() != dim => {
            return Err(Error::DimensionMismatch(format!("{}-d bounds for {dim}-d data", b.len())));
        }
        Some(b) => b.clone(),
        None => default_bounds(train, &kernels),
    };
    let solver = SolverConfig {
        lambda,
        ..config.solver.clone()
    };
    let targets = train.targets();
    let factor = config.refine_factor as i64;
    let schedule = config.schedule();

    let mut lattice = Lattice::new(&bounds, schedule[0]);
    let mut nodes: Vec<BTreeSet<Node>> = vec![full_lattice(&lattice); kernels.len()];
    let mut dictionary = build_dictionary(&kernels, &nodes, &lattice, &bounds, train)?;
    let mut result = solve_lasso_from(dictionary.design(), targets, &solver, None)?;
    let mut refit = debias(dictionary.design(), targets, &result.coeffs)?;
    let mut rounds = vec![RoundSummary {
        round: 0,
        spacing: schedule[0],
        n_columns: dictionary.n_columns(),
        objective: result.objective(),
        n_active: refit.active.len(),
    }];
    if result.coeffs.iter().all(|&v| v == 0.0) {
        return Ok(RefinementTrace {
            rounds,
            result,
            dictionary,
            refit,
            empty_model: true,
        });
    }

    let mut level = 0;
    let mut round = 0;
    while level + 1 < schedule.len() {
        round += 1;
        let stalled = rounds.len() >= 2 && {
            let (a, b) = (rounds[rounds.len() - 2].objective, rounds[rounds.len() - 1].objective);
            (a - b) / a.abs().max(f64::MIN_POSITIVE) < STALL_TOL
        };
        // a stalled schedule jumps straight to the finest spacing
        let next_level = if stalled { schedule.len() - 1 } else { level + 1 };
        let step = factor.pow((next_level - level) as u32);
        let fine = Lattice::new(&bounds, schedule[next_level]);

        // active and near-active coarse nodes per block, with their coefficients
        let design = dictionary.design();
        let correlation = design.tr_mul(&(targets - design * &result.coeffs)) * 2.0;
        let mut kept: Vec<Vec<(Node, f64)>> = vec![Vec::new(); kernels.len()];
        for (n, set) in nodes.iter().enumerate() {
            for (l, node) in set.iter().enumerate() {
                let j = dictionary.flat_column(n, l);
                let a = result.coeffs[j];
                if a != 0.0 || correlation[j].abs() >= config.screen_ratio * lambda {
                    kept[n].push((node.clone(), a));
                }
            }
        }
        let next_nodes: Vec<BTreeSet<Node>> = kept
            .iter()
            .map(|k| {
                let active: Vec<Node> = k.iter().map(|(node, _)| node.clone()).collect();
                refine_nodes(&active, step, config.halo as i64, &fine)
            })
            .collect();
        let transfer: Vec<Vec<(Node, f64)>> = kept
            .iter()
            .map(|k| {
                k.iter()
                    .filter(|(_, a)| *a != 0.0)
                    .map(|(node, a)| (node.iter().map(|&i| step * i).collect(), *a))
                    .collect()
            })
            .collect();
        let (next_dict, start) = dictionary_with_start(&kernels, &next_nodes, &fine, &bounds, train, &transfer)?;
        result = solve_lasso_from(next_dict.design(), targets, &solver, Some(&start))?;
        lattice = fine;
        nodes = next_nodes;
        dictionary = next_dict;
        level = next_level;
        rounds.push(RoundSummary {
            round,
            spacing: lattice.spacing,
            n_columns: dictionary.n_columns(),
            objective: result.objective(),
            n_active: debias(dictionary.design(), targets, &result.coeffs)?.active.len(),
        });
    }

    if config.final_sweep {
        for _ in 0..MAX_SWEEPS {
            let residual = targets - dictionary.design() * &result.coeffs;
            let violators = price_lattice(&kernels, &nodes, &lattice, train, &residual, lambda)?;
            if violators.iter().all(|v| v.is_empty()) {
                break;
            }
            let mut transfer: Vec<Vec<(Node, f64)>> = vec![Vec::new(); kernels.len()];
            for (n, set) in nodes.iter_mut().enumerate() {
                for (l, node) in set.iter().enumerate() {
                    let a = result.coeffs[dictionary.flat_column(n, l)];
                    if a != 0.0 {
                        transfer[n].push((node.clone(), a));
                    }
                }
                set.extend(violators[n].iter().cloned());
            }
            let (next_dict, start) = dictionary_with_start(&kernels, &nodes, &lattice, &bounds, train, &transfer)?;
            result = solve_lasso_from(next_dict.design(), targets, &solver, Some(&start))?;
            dictionary = next_dict;
        }
    }
    refit = debias(dictionary.design(), targets, &result.coeffs)?;
    let last = rounds.last_mut().expect("round 0 is recorded");
    last.n_columns = dictionary.n_columns();
    last.objective = result.objective();
    last.n_active = refit.active.len();

    Ok(RefinementTrace {
        rounds,
        result,
        dictionary,
        refit,
        empty_model: false,
    })
}

//! Reduced-basis boundary method.
//!
//! Offline: one factorization of the transport operator, then one solve per
//! catalytic node `K` with a unit outward flux density on `K`'s catalytic
//! portion. Only the traces `G[L][K] = Y_K(x_L)` at the catalytic
//! collocation points are kept.
//!
//! Online: a dense collocation system `alpha_L = R(Y_0(x_L) + sum_K alpha_K
//! Y_K(x_L))` with one unknown per catalytic node. All species share the same
//! operator, so species traces follow from one `alpha` by stoichiometric
//! scaling.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kinetics::ReactionModel;
use crate::mesh::{CatalyticIndex, ChannelGrid};
use crate::operator::TransportOperator;
use crate::settings::SolverSettings;

mod io;

pub use io::BasisHeader;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OfflineOptions {
    /// Retain the full coefficient vectors `x_K` in addition to the traces.
    pub keep_fields: bool,
}

/// Boundary traces of the linear part and of the basis functions.
#[derive(Clone, Debug)]
pub struct ReducedBasis {
    /// `traces[(L, g)]`: value of basis function `g` at catalytic node `L`.
    traces: DMatrix<f64>,
    /// Catalytic positions (into `nodes`) combined into each unknown.
    groups: Vec<Vec<usize>>,
    /// `y0_trace[s][L]`.
    y0_trace: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    nodes: Vec<usize>,
    dim: usize,
    /// Inlet values when the linear part is constant; `None` means `x_0`
    /// must be recomputed for reconstruction.
    constant_linear_part: Option<Vec<f64>>,
    fields: Option<Vec<Vec<f64>>>,
    offline_time: Duration,
}

/// Result of one online solve.
#[derive(Clone, Debug)]
pub struct ReducedSolution {
    /// One coefficient per basis unknown (a flux density).
    pub alpha: Vec<f64>,
    /// `boundary_trace[s][L]` at the catalytic collocation points.
    pub boundary_trace: Vec<Vec<f64>>,
    pub newton_iters: usize,
    pub residual_norm: f64,
    /// Residual max-norm after every Newton step.
    pub history: Vec<f64>,
    pub online_time: Duration,
    /// Some species value at a catalytic node is negative.
    pub has_negative_values: bool,
    pub stoichiometry: Vec<f64>,
}

fn trace_of(field: &[f64], nodes: &[usize]) -> Vec<f64> {
    nodes.iter().map(|&n| field[n]).collect()
}

/// Right-hand side of the basis problem for catalytic position `pos`.
/// A catalytic node that is also a Dirichlet node keeps its boundary value,
/// so its right-hand side is zero.
pub fn basis_rhs(op: &TransportOperator, cat: &CatalyticIndex, pos: usize) -> Vec<f64> {
    let mut rhs = vec![0.0; op.dim()];
    let node = cat.nodes[pos];
    if !op.dirichlet_mask()[node] {
        rhs[node] = -cat.sigma[pos];
    }
    rhs
}

impl ReducedBasis {
    /// Computes `x_0` and all basis functions against the shared factorization.
    pub fn offline(
        op: &TransportOperator,
        grid: &ChannelGrid,
        cat: &CatalyticIndex,
        options: OfflineOptions,
    ) -> Result<Self> {
        let start = Instant::now();
        let dim = op.dim();
        if grid.node_count() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: grid.node_count(),
            });
        }
        let n_cat = cat.len();

        let (y0_trace, constant_linear_part) = if op.linear_part_is_constant() {
            let traces = op.inlet().iter().map(|&v| vec![v; n_cat]).collect();
            (traces, Some(op.inlet().to_vec()))
        } else {
            let traces = (0..op.species_count())
                .map(|s| op.solve(op.b0(s)).map(|x| trace_of(&x, &cat.nodes)))
                .collect::<Result<Vec<_>>>()?;
            (traces, None)
        };

        let columns: Vec<Vec<f64>> = (0..n_cat)
            .into_par_iter()
            .map(|pos| {
                op.solve(&basis_rhs(op, cat, pos)).map_err(|e| Error::BasisSolve {
                    index: pos,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;

        let traces = DMatrix::from_fn(n_cat, n_cat, |l, k| columns[k][cat.nodes[l]]);
        let fields = options.keep_fields.then_some(columns);

        Ok(Self {
            traces,
            groups: (0..n_cat).map(|k| vec![k]).collect(),
            y0_trace,
            sigma: cat.sigma.clone(),
            nodes: cat.nodes.clone(),
            dim,
            constant_linear_part,
            fields,
            offline_time: start.elapsed(),
        })
    }

    /// Number of online unknowns.
    pub fn unknowns(&self) -> usize {
        self.groups.len()
    }

    pub fn catalytic_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn species_count(&self) -> usize {
        self.y0_trace.len()
    }

    pub fn traces(&self) -> &DMatrix<f64> {
        &self.traces
    }

    pub fn y0_trace(&self) -> &[Vec<f64>] {
        &self.y0_trace
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn fields(&self) -> Option<&[Vec<f64>]> {
        self.fields.as_deref()
    }

    pub fn offline_time(&self) -> Duration {
        self.offline_time
    }

    /// Splits the unknowns into `n_groups` contiguous groups of near-equal size.
    pub fn contiguous_groups(&self, n_groups: usize) -> Vec<Vec<usize>> {
        let m = self.unknowns();
        let n_groups = n_groups.clamp(1, m);
        (0..n_groups)
            .map(|g| (g * m / n_groups..(g + 1) * m / n_groups).collect())
            .collect()
    }

    /// Combines unknowns: each group of current unknowns becomes a single
    /// basis function whose trace is the sum of the members' traces.
    pub fn compress(&self, groups: &[Vec<usize>]) -> Result<Self> {
        let m = self.unknowns();
        let mut seen = vec![false; m];
        for g in groups {
            if g.is_empty() {
                return Err(Error::InvalidPartition("empty group".into()));
            }
            for &i in g {
                if i >= m {
                    return Err(Error::InvalidPartition(format!("index {i} out of range 0..{m}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidPartition(format!("index {i} appears twice")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("index {missing} is not covered")));
        }
        let n_cat = self.catalytic_count();
        let mut traces = DMatrix::zeros(n_cat, groups.len());
        for (g, members) in groups.iter().enumerate() {
            for &i in members {
                let col = self.traces.column(i).into_owned();
                let mut target = traces.column_mut(g);
                target += col;
            }
        }
        let merged = groups
            .iter()
            .map(|members| {
                let mut pos: Vec<usize> = members.iter().flat_map(|&i| self.groups[i].iter().copied()).collect();
                pos.sort_unstable();
                pos
            })
            .collect();
        let fields = self.fields.as_ref().map(|cols| {
            groups
                .iter()
                .map(|members| {
                    let mut f = vec![0.0; self.dim];
                    for &i in members {
                        f.iter_mut().zip(&cols[i]).for_each(|(a, b)| *a += b);
                    }
                    f
                })
                .collect()
        });
        Ok(Self {
            traces,
            groups: merged,
            fields,
            ..self.clone()
        })
    }

    fn check_model(&self, model: &ReactionModel) -> Result<()> {
        if model.species_count() != self.species_count() {
            return Err(Error::SpeciesMismatch {
                expected: self.species_count(),
                got: model.species_count(),
            });
        }
        Ok(())
    }

    /// Species values at the catalytic nodes for coefficients `alpha`.
    pub fn boundary_values(&self, model: &ReactionModel, alpha: &[f64]) -> Vec<Vec<f64>> {
        let combined = &self.traces * DVector::from_column_slice(alpha);
        model
            .stoichiometry()
            .iter()
            .zip(&self.y0_trace)
            .map(|(nu, y0)| y0.iter().zip(combined.iter()).map(|(a, c)| a - nu * c).collect())
            .collect()
    }

    /// Outward flux density `(-nu_s) alpha` that the reconstructed field
    /// carries at each catalytic node, `flux[s][L]`.
    pub fn carried_flux(&self, sol: &ReducedSolution) -> Vec<Vec<f64>> {
        let mut per_node = vec![0.0; self.catalytic_count()];
        for (members, a) in self.groups.iter().zip(&sol.alpha) {
            for &l in members {
                per_node[l] = *a;
            }
        }
        sol.stoichiometry
            .iter()
            .map(|nu| per_node.iter().map(|a| -nu * a).collect())
            .collect()
    }

    fn state_at(values: &[Vec<f64>], l: usize, buf: &mut [f64]) {
        for (b, v) in buf.iter_mut().zip(values) {
            *b = v[l];
        }
    }

    /// Collocation residual `F_g(alpha) = alpha_g - <R>_g`, where `<R>_g`
    /// is the sigma-weighted mean of the rate over the group's nodes.
    pub fn residual(&self, model: &ReactionModel, alpha: &[f64]) -> Vec<f64> {
        let values = self.boundary_values(model, alpha);
        let mut y = vec![0.0; self.species_count()];
        self.groups
            .iter()
            .zip(alpha)
            .map(|(members, a)| {
                let total: f64 = members.iter().map(|&l| self.sigma[l]).sum();
                let mean: f64 = members
                    .iter()
                    .map(|&l| {
                        Self::state_at(&values, l, &mut y);
                        self.sigma[l] * model.rate(&y)
                    })
                    .sum::<f64>()
                    / total;
                a - mean
            })
            .collect()
    }

    /// Analytic Jacobian of [`Self::residual`].
    pub fn jacobian(&self, model: &ReactionModel, alpha: &[f64]) -> DMatrix<f64> {
        let m = self.unknowns();
        let values = self.boundary_values(model, alpha);
        let nu = model.stoichiometry();
        let mut y = vec![0.0; self.species_count()];
        let mut grad = vec![0.0; self.species_count()];
        let mut jac = DMatrix::identity(m, m);
        for (g, members) in self.groups.iter().enumerate() {
            let total: f64 = members.iter().map(|&l| self.sigma[l]).sum();
            for &l in members {
                Self::state_at(&values, l, &mut y);
                model.rate_gradient(&y, &mut grad);
                // dR/dalpha = sum_s dR/dY_s * (-nu_s) * traces[l, .]
                let coupling: f64 = grad.iter().zip(nu).map(|(d, n)| -d * n).sum();
                let w = self.sigma[l] / total * coupling;
                for h in 0..m {
                    jac[(g, h)] -= w * self.traces[(l, h)];
                }
            }
        }
        jac
    }

    fn newton(
        &self,
        model: &ReactionModel,
        settings: &SolverSettings,
        mut alpha: Vec<f64>,
        history: &mut Vec<f64>,
    ) -> std::result::Result<(Vec<f64>, f64), f64> {
        let norm2 = |f: &[f64]| f.iter().map(|v| v * v).sum::<f64>();
        let mut f = self.residual(model, &alpha);
        let mut last = max_norm(&f);
        for _ in 0..settings.max_iters {
            let jac = self.jacobian(model, &alpha);
            let rhs = -DVector::from_column_slice(&f);
            let Some(step) = jac.lu().solve(&rhs) else {
                return Err(last);
            };
            let phi = norm2(&f);
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..=settings.max_halvings {
                let trial: Vec<f64> = alpha.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
                let ft = self.residual(model, &trial);
                let phit = norm2(&ft);
                if phit.is_finite() && phit <= (1.0 - 2.0 * settings.armijo * t) * phi {
                    accepted = Some((trial, ft));
                    break;
                }
                t *= 0.5;
            }
            // No decrease along the Newton direction: already at round-off
            // level or a genuine failure; either way stop here.
            let Some((trial, ft)) = accepted else {
                history.push(last);
                return if last <= settings.ftol { Ok((alpha, last)) } else { Err(last) };
            };
            alpha = trial;
            f = ft;
            last = max_norm(&f);
            history.push(last);
            if last <= settings.ftol {
                return Ok((alpha, last));
            }
        }
        Err(last)
    }

    /// Solves the collocation system for `model`. Needs no linear solves.
    pub fn online(&self, model: &ReactionModel, settings: &SolverSettings) -> Result<ReducedSolution> {
        self.check_model(model)?;
        let start = Instant::now();
        let mut history = Vec::new();
        let zero = vec![0.0; self.unknowns()];
        let outcome = match self.newton(model, settings, zero.clone(), &mut history) {
            Ok(ok) => Ok(ok),
            Err(residual) if !settings.continuation => Err(residual),
            Err(_) => {
                let mut alpha = zero;
                let mut result = Err(f64::INFINITY);
                for factor in [1e-2, 1e-1, 1.0] {
                    result = self.newton(&model.scaled(factor), settings, alpha.clone(), &mut history);
                    match &result {
                        Ok((a, _)) => alpha = a.clone(),
                        Err(_) => break,
                    }
                }
                result
            }
        };
        let (alpha, residual_norm) = outcome.map_err(|residual| Error::NoConvergence {
            solver: "reduced",
            iterations: history.len(),
            residual,
            history: history.clone(),
        })?;
        let boundary_trace = self.boundary_values(model, &alpha);
        let has_negative_values = boundary_trace.iter().flatten().any(|&v| v < 0.0);
        Ok(ReducedSolution {
            alpha,
            boundary_trace,
            newton_iters: history.len(),
            residual_norm,
            history,
            online_time: start.elapsed(),
            has_negative_values,
            stoichiometry: model.stoichiometry().to_vec(),
        })
    }

    /// Full per-species fields from one linear solve with right-hand side
    /// `sum_g alpha_g b_g`.
    pub fn reconstruct(&self, op: &TransportOperator, sol: &ReducedSolution) -> Result<Vec<Vec<f64>>> {
        if op.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: op.dim(),
            });
        }
        if sol.alpha.len() != self.unknowns() {
            return Err(Error::DimensionMismatch {
                expected: self.unknowns(),
                got: sol.alpha.len(),
            });
        }
        let mut rhs = vec![0.0; self.dim];
        for (members, a) in self.groups.iter().zip(&sol.alpha) {
            for &l in members.iter().filter(|&&l| !op.dirichlet_mask()[self.nodes[l]]) {
                rhs[self.nodes[l]] -= self.sigma[l] * a;
            }
        }
        let nonlinear = op.solve(&rhs)?;
        sol.stoichiometry
            .iter()
            .enumerate()
            .map(|(s, nu)| {
                let base = match &self.constant_linear_part {
                    Some(c) => vec![c[s]; self.dim],
                    None => op.solve(op.b0(s))?,
                };
                Ok(base.iter().zip(&nonlinear).map(|(b, y)| b - nu * y).collect())
            })
            .collect()
    }
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

//! Fully coupled global solver for the same discretization.
//!
//! Unknowns are interleaved per node, `x[n_species * node + s]`. Species
//! couple only through the reaction terms on catalytic rows.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::kinetics::ReactionModel;
use crate::mesh::{CatalyticIndex, ChannelGrid};
use crate::operator::{operator_triplets, TransportOperator};
use crate::reduced::max_norm;
use crate::settings::SolverSettings;
use crate::sparse::{FixedPattern, SparseMatrix};

#[derive(Clone, Debug)]
pub struct GlobalSolution {
    /// `fields[s][node]`.
    pub fields: Vec<Vec<f64>>,
    pub newton_iters: usize,
    pub residual_norm: f64,
    pub history: Vec<f64>,
    pub solve_time: Duration,
    /// Sparse Jacobian factorizations performed.
    pub factorizations: usize,
}

impl GlobalSolution {
    /// `(min, max)` of one species field.
    pub fn bounds(&self, species: usize) -> (f64, f64) {
        self.fields[species]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn trace(&self, species: usize, cat: &CatalyticIndex) -> Vec<f64> {
        cat.nodes.iter().map(|&n| self.fields[species][n]).collect()
    }
}

struct GlobalSystem<'a> {
    op: &'a TransportOperator,
    cat: &'a CatalyticIndex,
    model: &'a ReactionModel,
    ns: usize,
}

impl GlobalSystem<'_> {
    /// Catalytic nodes whose rows carry the reaction. Dirichlet rows keep
    /// their boundary value.
    fn reactive_nodes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let dirichlet = self.op.dirichlet_mask();
        self.cat
            .nodes
            .iter()
            .zip(&self.cat.sigma)
            .filter(move |(&n, _)| !dirichlet[n])
            .map(|(&n, &s)| (n, s))
    }

    fn residual(&self, a: &SparseMatrix, x: &[f64]) -> Vec<f64> {
        let (ns, n) = (self.ns, self.op.dim());
        let mut r = vec![0.0; ns * n];
        let mut field = vec![0.0; n];
        let mut ax = vec![0.0; n];
        for s in 0..ns {
            for k in 0..n {
                field[k] = x[ns * k + s];
            }
            a.mul_vec_into(&field, &mut ax);
            let b0 = self.op.b0(s);
            for k in 0..n {
                r[ns * k + s] = ax[k] - b0[k];
            }
        }
        let nu = self.model.stoichiometry();
        for (node, sigma) in self.reactive_nodes() {
            let y = &x[ns * node..ns * (node + 1)];
            let rate = self.model.rate(y);
            for s in 0..ns {
                r[ns * node + s] += sigma * (-nu[s]) * rate;
            }
        }
        r
    }

    /// Index pattern: replicated operator entries, then one dense
    /// species block per catalytic node.
    fn pattern(&self, a_entries: &[(usize, usize, f64)]) -> Vec<(usize, usize)> {
        let ns = self.ns;
        let mut idx = Vec::with_capacity(a_entries.len() * ns + self.cat.len() * ns * ns);
        for &(i, j, _) in a_entries {
            for s in 0..ns {
                idx.push((ns * i + s, ns * j + s));
            }
        }
        for (node, _) in self.reactive_nodes() {
            for s in 0..ns {
                for t in 0..ns {
                    idx.push((ns * node + s, ns * node + t));
                }
            }
        }
        idx
    }

    fn jacobian_values(&self, a_entries: &[(usize, usize, f64)], x: &[f64], values: &mut Vec<f64>) {
        let ns = self.ns;
        values.clear();
        for &(_, _, v) in a_entries {
            values.extend(std::iter::repeat_n(v, ns));
        }
        let nu = self.model.stoichiometry();
        let mut grad = vec![0.0; ns];
        for (node, sigma) in self.reactive_nodes() {
            self.model.rate_gradient(&x[ns * node..ns * (node + 1)], &mut grad);
            for nu_s in &nu[..ns] {
                for g in &grad {
                    values.push(sigma * (-nu_s) * g);
                }
            }
        }
    }
}

/// Damped Newton on the coupled system `A x_s = b0_s - sigma (-nu_s) R(x)`.
pub fn global_solve(
    op: &TransportOperator,
    grid: &ChannelGrid,
    cat: &CatalyticIndex,
    model: &ReactionModel,
    settings: &SolverSettings,
) -> Result<GlobalSolution> {
    let start = Instant::now();
    let ns = op.species_count();
    if model.species_count() != ns {
        return Err(Error::SpeciesMismatch {
            expected: ns,
            got: model.species_count(),
        });
    }
    if grid.node_count() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: grid.node_count(),
        });
    }
    let n = op.dim();
    let sys = GlobalSystem { op, cat, model, ns };

    let assemble = || -> Result<(SparseMatrix, Vec<(usize, usize, f64)>)> {
        let t = operator_triplets(grid, op.velocity(), op.diffusion(), op.dirichlet_mask());
        let a = SparseMatrix::from_triplets(n, &t)?;
        let entries = a.entries();
        Ok((a, entries))
    };
    let (mut a, mut a_entries) = if settings.force_full_reassembly {
        assemble()?
    } else {
        (op.matrix().clone(), op.matrix().entries())
    };
    let pattern = FixedPattern::new(ns * n, &sys.pattern(&a_entries), "global Jacobian")?;

    let mut x: Vec<f64> = (0..n).flat_map(|_| op.inlet().iter().copied()).collect();
    let mut r = sys.residual(&a, &x);
    let mut damping = settings.damp_initial.min(1.0);
    let mut history = Vec::new();
    let mut values = Vec::new();
    let mut factorizations = 0;

    for _ in 0..settings.max_iters {
        if settings.force_full_reassembly && !history.is_empty() {
            (a, a_entries) = assemble()?;
        }
        sys.jacobian_values(&a_entries, &x, &mut values);
        let lu = pattern.factorize(&values, "global Jacobian")?;
        factorizations += 1;
        let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
        lu.solve_in_place(&mut step)?;
        x.iter_mut().zip(&step).for_each(|(xi, d)| *xi += damping * d);
        damping = (damping * settings.damp_growth).min(1.0);
        r = sys.residual(&a, &x);
        let norm = max_norm(&r);
        history.push(norm);
        if norm <= settings.ftol {
            let fields = (0..ns)
                .map(|s| (0..n).map(|k| x[ns * k + s]).collect())
                .collect();
            return Ok(GlobalSolution {
                fields,
                newton_iters: history.len(),
                residual_norm: norm,
                history,
                solve_time: start.elapsed(),
                factorizations,
            });
        }
        if !norm.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence {
        solver: "global",
        iterations: history.len(),
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryLayout;
    use crate::operator::VelocityField;

    fn setup(level: u32) -> (ChannelGrid, CatalyticIndex, TransportOperator) {
        let grid = ChannelGrid::build(level, 5.0, 1.0)
            .unwrap()
            .tag_boundary(&BoundaryLayout::channel(2.0, 3.0))
            .unwrap();
        let cat = grid.catalytic_index().unwrap();
        let op = TransportOperator::assemble(
            &grid,
            &VelocityField::hagen_poiseuille(1.0, 1.0),
            1e-2,
            &[0.2, 0.8, 0.0],
            None,
        )
        .unwrap();
        (grid, cat, op)
    }

    #[test]
    fn zero_rate_is_one_step() {
        let (grid, cat, op) = setup(0);
        let sol = global_solve(&op, &grid, &cat, &ReactionModel::mass_action_co_oxidation(0.0), &SolverSettings::default())
            .unwrap();
        assert_eq!(sol.newton_iters, 1);
        for (s, y) in [0.2, 0.8, 0.0].iter().enumerate() {
            assert!(sol.fields[s].iter().all(|v| (v - y).abs() <= 1e-12));
        }
    }

    #[test]
    fn reactive_solution_balances_and_is_bounded() {
        let (grid, cat, op) = setup(1);
        let model = ReactionModel::mass_action_co_oxidation(1e10);
        let sol = global_solve(&op, &grid, &cat, &model, &SolverSettings::default()).unwrap();
        assert!(sol.residual_norm <= 1e-11);
        let (lo, hi) = sol.bounds(0);
        assert!(lo >= -1e-12 && hi <= 0.2 + 1e-12);
        let (lo, hi) = sol.bounds(1);
        assert!(lo >= -1e-12 && hi <= 0.8 + 1e-12);
        assert!(sol.bounds(2).0 >= -1e-12);
        for s in 0..3 {
            let density: Vec<f64> = (0..cat.len())
                .map(|l| {
                    let y: Vec<f64> = (0..3).map(|t| sol.fields[t][cat.nodes[l]]).collect();
                    model.boundary_flux(&y)[s]
                })
                .collect();
            let b = op.flux_balance(&sol.fields[s], s, Some((&cat, &density))).unwrap();
            // The defect is the sum of the nodal residuals.
            assert!(b.defect().abs() <= op.dim() as f64 * sol.residual_norm, "{b:?}");
        }
    }

    #[test]
    fn full_reassembly_gives_same_answer() {
        let (grid, cat, op) = setup(0);
        let model = ReactionModel::mass_action_co_oxidation(1e4);
        let a = global_solve(&op, &grid, &cat, &model, &SolverSettings::default()).unwrap();
        let settings = SolverSettings {
            force_full_reassembly: true,
            ..SolverSettings::default()
        };
        let b = global_solve(&op, &grid, &cat, &model, &settings).unwrap();
        assert_eq!(a.newton_iters, b.newton_iters);
        for s in 0..3 {
            for (u, v) in a.fields[s].iter().zip(&b.fields[s]) {
                assert!((u - v).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let (grid, cat, op) = setup(0);
        let settings = SolverSettings {
            max_iters: 1,
            ..SolverSettings::default()
        };
        let err = global_solve(&op, &grid, &cat, &ReactionModel::mass_action_co_oxidation(1e10), &settings);
        assert!(matches!(err, Err(Error::NoConvergence { solver: "global", iterations: 1, .. })));
    }
}

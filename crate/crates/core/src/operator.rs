//! Exponential-fitting finite-volume discretization of
//! `div(Y v - D grad Y) = f` on a tagged [`ChannelGrid`].
//!
//! Residual convention: row `K` holds the net outward flux of box `K`
//! minus its source integral. A prescribed outward flux density `q` on a
//! catalytic portion of measure `sigma` therefore moves to the right-hand
//! side as `-sigma * q`.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{CatalyticIndex, ChannelGrid, Point, Region};
use crate::sparse::{LuFactor, SparseMatrix};

const SERIES_THRESHOLD: f64 = 1e-2;

/// Bernoulli function `B(x) = x / (exp(x) - 1)` with `B(0) = 1`.
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < SERIES_THRESHOLD {
        let x2 = x * x;
        1.0 - 0.5 * x + x2 / 12.0 - x2 * x2 / 720.0
    } else {
        x / x.exp_m1()
    }
}

/// Scharfetter-Gummel flux from box `from` to box `to` across a face of
/// measure `face_measure`, with nodes `distance` apart and normal velocity
/// `normal_velocity` (positive from `from` towards `to`).
pub fn face_flux(
    face_measure: f64,
    distance: f64,
    diffusion: f64,
    normal_velocity: f64,
    y_from: f64,
    y_to: f64,
) -> f64 {
    let peclet = normal_velocity * distance / diffusion;
    face_measure * diffusion / distance * (bernoulli(-peclet) * y_from - bernoulli(peclet) * y_to)
}

type VelocityFn = dyn Fn(Point) -> Point + Send + Sync;

/// A named, steady velocity field.
#[derive(Clone)]
pub struct VelocityField {
    name: String,
    eval: Arc<VelocityFn>,
}

impl VelocityField {
    pub fn new(name: impl Into<String>, eval: impl Fn(Point) -> Point + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| [0.0, 0.0])
    }

    /// Parabolic channel profile `v_in * (y (ly - y), 0)`, transporting from
    /// the left edge towards the right edge.
    pub fn hagen_poiseuille(v_in: f64, ly: f64) -> Self {
        Self::new(format!("hagen-poiseuille(v_in={v_in})"), move |p: Point| {
            [v_in * p[1] * (ly - p[1]), 0.0]
        })
    }

    #[inline]
    pub fn at(&self, p: Point) -> Point {
        (self.eval)(p)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for VelocityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VelocityField").field("name", &self.name).finish()
    }
}

/// Volume source `f(x, species)`.
pub type SourceFn = dyn Fn(Point, usize) -> f64 + Send + Sync;

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Boundary flux totals of one species field; all fluxes are outward.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FluxBalance {
    pub inlet: f64,
    pub outlet: f64,
    pub reactive: f64,
    pub source: f64,
}

impl FluxBalance {
    /// Net outward flux minus total source; zero at a discrete steady state.
    pub fn defect(&self) -> f64 {
        self.inlet + self.outlet + self.reactive - self.source
    }

    pub fn relative_defect(&self) -> f64 {
        let scale = self
            .inlet
            .abs()
            .max(self.outlet.abs())
            .max(self.reactive.abs())
            .max(self.source.abs());
        if scale == 0.0 {
            self.defect().abs()
        } else {
            self.defect().abs() / scale
        }
    }
}

/// Assembled drift-diffusion matrix `A`, its factorization and the linear
/// boundary data `b_0` for every species.
pub struct TransportOperator {
    matrix: SparseMatrix,
    balance: SparseMatrix,
    lu: LuFactor,
    b0: Vec<Vec<f64>>,
    inlet: Vec<f64>,
    diffusion: f64,
    velocity: VelocityField,
    dirichlet: Vec<bool>,
    outflow: Vec<(usize, f64)>,
    source_total: Vec<f64>,
    has_source: bool,
    preserves_constants: bool,
    factorizations: AtomicUsize,
    solves: AtomicUsize,
}

impl fmt::Debug for TransportOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransportOperator")
            .field("dim", &self.dim())
            .field("species", &self.inlet.len())
            .field("diffusion", &self.diffusion)
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

/// Triplets of the flux operator without Dirichlet rows replaced, plus the
/// per-node outflow coefficients.
pub(crate) fn flux_triplets(
    grid: &ChannelGrid,
    velocity: &VelocityField,
    diffusion: f64,
) -> (Vec<(usize, usize, f64)>, Vec<(usize, f64)>) {
    let mut t = Vec::with_capacity(4 * 2 * grid.node_count() + 2 * grid.ny());
    for e in grid.interior_edges() {
        let c = e.face_measure * diffusion / e.distance;
        let peclet = dot(velocity.at(e.midpoint), e.normal) * e.distance / diffusion;
        let (bm, bp) = (bernoulli(-peclet), bernoulli(peclet));
        t.push((e.from, e.from, c * bm));
        t.push((e.from, e.to, -c * bp));
        t.push((e.to, e.from, -c * bm));
        t.push((e.to, e.to, c * bp));
    }
    // Outflow velocity is sampled at the collocation point so that the
    // boundary box sees the same normal velocity as its interior faces.
    let mut outflow: Vec<(usize, f64)> = Vec::new();
    for (node, length, normal) in grid.boundary_portions(Region::Outlet) {
        let coeff = length * dot(velocity.at(grid.coord(node)), normal);
        outflow.push((node, coeff));
        t.push((node, node, coeff));
    }
    (t, outflow)
}

/// Triplets of `A`: the flux operator with Dirichlet rows replaced by
/// identity rows.
pub(crate) fn operator_triplets(
    grid: &ChannelGrid,
    velocity: &VelocityField,
    diffusion: f64,
    dirichlet: &[bool],
) -> Vec<(usize, usize, f64)> {
    let (full, _) = flux_triplets(grid, velocity, diffusion);
    let mut t: Vec<(usize, usize, f64)> = full.into_iter().filter(|&(i, _, _)| !dirichlet[i]).collect();
    t.extend((0..dirichlet.len()).filter(|&k| dirichlet[k]).map(|k| (k, k, 1.0)));
    t
}

impl TransportOperator {
    /// Assembles and factorizes the operator. `inlet` holds one Dirichlet
    /// value per species; its length fixes the species count.
    pub fn assemble(
        grid: &ChannelGrid,
        velocity: &VelocityField,
        diffusion: f64,
        inlet: &[f64],
        source: Option<&SourceFn>,
    ) -> Result<Self> {
        if !grid.is_tagged() {
            return Err(Error::Untagged);
        }
        if !(diffusion > 0.0 && diffusion.is_finite()) {
            return Err(Error::NonPositiveDiffusion(diffusion));
        }
        if inlet.is_empty() {
            return Err(Error::SpeciesMismatch {
                expected: 1,
                got: 0,
            });
        }
        let n = grid.node_count();
        let dirichlet = grid.dirichlet_mask();
        let (full, outflow) = flux_triplets(grid, velocity, diffusion);

        let mut reduced: Vec<(usize, usize, f64)> =
            full.iter().copied().filter(|&(i, _, _)| !dirichlet[i]).collect();
        reduced.extend((0..n).filter(|&k| dirichlet[k]).map(|k| (k, k, 1.0)));

        let balance = SparseMatrix::from_triplets(n, &full)?;
        let matrix = SparseMatrix::from_triplets(n, &reduced)?;
        let lu = matrix.factorize("drift-diffusion operator")?;

        let mut b0 = vec![vec![0.0; n]; inlet.len()];
        let mut source_total = vec![0.0; inlet.len()];
        for (s, b) in b0.iter_mut().enumerate() {
            for k in 0..n {
                if dirichlet[k] {
                    b[k] = inlet[s];
                } else if let Some(f) = source {
                    b[k] = f(grid.coord(k), s) * grid.cell_measure(k);
                    source_total[s] += b[k];
                }
            }
        }

        // A constant field solves the homogeneous problem iff every
        // non-Dirichlet row of A sums to zero.
        let ones = matrix.mul_vec(&vec![1.0; n]);
        let scale = full.iter().map(|e| e.2.abs()).fold(0.0, f64::max);
        let preserves_constants = ones
            .iter()
            .zip(&dirichlet)
            .all(|(r, &d)| d || r.abs() <= 1e-12 * scale);

        Ok(Self {
            matrix,
            balance,
            lu,
            b0,
            inlet: inlet.to_vec(),
            diffusion,
            velocity: velocity.clone(),
            dirichlet,
            outflow,
            source_total,
            has_source: source.is_some(),
            preserves_constants,
            factorizations: AtomicUsize::new(1),
            solves: AtomicUsize::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn species_count(&self) -> usize {
        self.inlet.len()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn b0(&self, species: usize) -> &[f64] {
        &self.b0[species]
    }

    pub fn inlet(&self) -> &[f64] {
        &self.inlet
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn velocity(&self) -> &VelocityField {
        &self.velocity
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    /// True when the solution of `A x = b_0` is the constant inlet value
    /// for every species (no source, discretely divergence-free velocity).
    pub fn linear_part_is_constant(&self) -> bool {
        self.preserves_constants && !self.has_source
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<()> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        self.lu.solve_in_place(rhs)
    }

    /// Number of sparse factorizations performed on this operator.
    pub fn factorization_count(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// Boundary flux totals of `field` (one species). `reactive` gives the
    /// outward flux density at each catalytic node, if any. Catalytic nodes
    /// with a Dirichlet value are counted as inlet.
    pub fn flux_balance(
        &self,
        field: &[f64],
        species: usize,
        reactive: Option<(&CatalyticIndex, &[f64])>,
    ) -> Result<FluxBalance> {
        if field.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: field.len(),
            });
        }
        let net = self.balance.mul_vec(field);
        let inlet = self
            .dirichlet
            .iter()
            .enumerate()
            .filter(|(_, &d)| d)
            // Dirichlet boxes carry no assembled source.
            .map(|(k, _)| -net[k])
            .sum();
        let outlet = self.outflow.iter().map(|&(k, c)| c * field[k]).sum();
        let reactive = match reactive {
            Some((cat, density)) => cat
                .nodes
                .iter()
                .zip(&cat.sigma)
                .zip(density)
                .filter(|((&n, _), _)| !self.dirichlet[n])
                .map(|((_, s), q)| s * q)
                .sum(),
            None => 0.0,
        };
        Ok(FluxBalance {
            inlet,
            outlet,
            reactive,
            source: self.source_total[species],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundaryLayout;
    use approx::assert_relative_eq;

    fn channel(level: u32) -> ChannelGrid {
        ChannelGrid::build(level, 5.0, 1.0)
            .unwrap()
            .tag_boundary(&BoundaryLayout::channel(2.0, 3.0))
            .unwrap()
    }

    #[test]
    fn bernoulli_values() {
        assert_eq!(bernoulli(0.0), 1.0);
        // 1/(e-1), evaluated independently in high precision
        assert_relative_eq!(bernoulli(1.0), 0.581_976_706_869_326_4, max_relative = 1e-15);
        assert_eq!(bernoulli(800.0), 0.0);
        assert_relative_eq!(bernoulli(-800.0), 800.0, max_relative = 1e-15);
    }

    #[test]
    fn bernoulli_series_branch_is_continuous() {
        // Reference from the closed form at a point where it is still accurate.
        for x in [0.009_999_9_f64, -0.009_999_9] {
            let closed = x / x.exp_m1();
            assert_relative_eq!(bernoulli(x), closed, max_relative = 1e-14);
        }
        for x in [1e-3f64, -1e-3, 1e-8] {
            let closed = x / x.exp_m1();
            assert_relative_eq!(bernoulli(x), closed, max_relative = 1e-13);
        }
    }

    #[test]
    fn central_flux_at_zero_peclet() {
        let f = face_flux(0.3, 0.1, 2.0, 0.0, 1.5, 0.5);
        assert_relative_eq!(f, 0.3 * 2.0 / 0.1 * (1.5 - 0.5), max_relative = 1e-15);
    }

    #[test]
    fn upwind_limit() {
        let (s, h, d) = (0.2, 0.1, 1e-3);
        // Pe = +-50
        let v = 50.0 * d / h;
        let f = face_flux(s, h, d, v, 0.7, 0.3);
        assert_relative_eq!(f, s * v * 0.7, max_relative = 1e-12);
        let f = face_flux(s, h, d, -v, 0.7, 0.3);
        assert_relative_eq!(f, -s * v * 0.3, max_relative = 1e-12);
    }

    #[test]
    fn poiseuille_profile() {
        let v = VelocityField::hagen_poiseuille(1.0, 1.0);
        assert_eq!(v.at([1.0, 0.0]), [0.0, 0.0]);
        assert_eq!(v.at([1.0, 1.0]), [0.0, 0.0]);
        assert_eq!(v.at([3.0, 0.5]), [0.25, 0.0]);
    }

    #[test]
    fn pure_diffusion_pattern_is_symmetric_m_matrix() {
        let g = channel(0);
        let op = TransportOperator::assemble(&g, &VelocityField::zero(), 0.1, &[1.0], None).unwrap();
        for (i, j, v) in op.balance.entries() {
            if i != j {
                assert!(v <= 0.0);
                assert_relative_eq!(op.balance.get(j, i), v, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn rows_telescope() {
        let g = channel(1);
        let v = VelocityField::hagen_poiseuille(1.0, 1.0);
        let (t, outflow) = flux_triplets(&g, &v, 1e-2);
        let mut rows = vec![0.0; g.node_count()];
        let mut scale = vec![0.0f64; g.node_count()];
        // interior face contributions only, applied to an arbitrary field
        let y: Vec<f64> = (0..g.node_count()).map(|k| (k as f64 * 0.1).cos()).collect();
        for &(i, j, v) in &t {
            rows[i] += v * y[j];
            scale[i] = scale[i].max((v * y[j]).abs());
        }
        for &(k, c) in &outflow {
            rows[k] -= c * y[k];
        }
        let total: f64 = rows.iter().sum();
        let s = scale.iter().cloned().fold(0.0, f64::max);
        assert!(total.abs() <= 1e-12 * s, "{total}");
    }

    #[test]
    fn constants_are_reproduced_without_flow() {
        let g = channel(1);
        let op = TransportOperator::assemble(&g, &VelocityField::zero(), 1.0, &[0.3], None).unwrap();
        let x = op.solve(op.b0(0)).unwrap();
        assert!(x.iter().all(|v| (v - 0.3).abs() < 1e-13));
        assert!(op.linear_part_is_constant());
    }

    #[test]
    fn solve_contracts() {
        let g = channel(1);
        let op = TransportOperator::assemble(
            &g,
            &VelocityField::hagen_poiseuille(1.0, 1.0),
            1e-2,
            &[0.2, 0.8, 0.0],
            None,
        )
        .unwrap();
        let zero = op.solve(&vec![0.0; op.dim()]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let w: Vec<f64> = (0..op.dim()).map(|k| ((k * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let b = op.matrix().mul_vec(&w);
        let x = op.solve(&b).unwrap();
        let wmax = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in x.iter().zip(&w) {
            assert!((a - b).abs() <= 1e-11 * wmax);
        }
        assert!(matches!(op.solve(&[1.0; 3]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(op.factorization_count(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        let g = channel(0);
        let v = VelocityField::zero();
        assert!(matches!(
            TransportOperator::assemble(&g, &v, 0.0, &[1.0], None),
            Err(Error::NonPositiveDiffusion(_))
        ));
        let untagged = ChannelGrid::build(0, 5.0, 1.0).unwrap();
        assert!(matches!(
            TransportOperator::assemble(&untagged, &v, 1.0, &[1.0], None),
            Err(Error::Untagged)
        ));
    }
}

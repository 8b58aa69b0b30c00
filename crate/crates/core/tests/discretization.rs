use proptest::prelude::*;
use rbfv_core::operator::SourceFn;
use rbfv_core::{
    bernoulli, BoundaryLayout, ChannelGrid, OfflineOptions, ReducedBasis, Region, TransportOperator, VelocityField,
};

fn channel(level: u32) -> ChannelGrid {
    ChannelGrid::build(level, 5.0, 1.0)
        .unwrap()
        .tag_boundary(&BoundaryLayout::channel(2.0, 3.0))
        .unwrap()
}

proptest! {
    #[test]
    fn bernoulli_antisymmetry(x in -30.0f64..30.0) {
        prop_assert!((bernoulli(-x) - bernoulli(x) - x).abs() <= 1e-14 * x.abs().max(1.0));
    }

    #[test]
    fn bernoulli_is_positive_and_decreasing(x in -30.0f64..30.0, dx in 1e-3f64..1.0) {
        prop_assert!(bernoulli(x) > 0.0);
        prop_assert!(bernoulli(x + dx) < bernoulli(x));
    }
}

#[test]
fn affine_profile_is_exact() {
    // unit outward flux on the left, zero on the right: Y = x - 5
    let layout = BoundaryLayout {
        bottom: Region::Inert,
        right: Region::Inlet,
        top: Region::Inert,
        left: Region::Catalytic,
        catalytic: None,
    };
    for level in 0..3 {
        let grid = ChannelGrid::build(level, 5.0, 1.0).unwrap().tag_boundary(&layout).unwrap();
        let cat = grid.catalytic_index().unwrap();
        let op = TransportOperator::assemble(&grid, &VelocityField::zero(), 1.0, &[0.0], None).unwrap();
        let mut rhs = vec![0.0; op.dim()];
        for (&n, &s) in cat.nodes.iter().zip(&cat.sigma) {
            rhs[n] = -s;
        }
        let y = op.solve(&rhs).unwrap();
        // round-off grows with the condition number on finer grids
        let tol = if level == 0 { 1e-12 } else { 1e-10 };
        for (n, p) in grid.node_coords().iter().enumerate() {
            assert!((y[n] - (p[0] - 5.0)).abs() <= tol, "level {level} node {n}: {} vs {}", y[n], p[0] - 5.0);
        }
    }
}

#[test]
fn pure_neumann_keeps_constant_inlet() {
    let grid = channel(1);
    let op = TransportOperator::assemble(&grid, &VelocityField::zero(), 0.3, &[0.7], None).unwrap();
    let y = op.solve(op.b0(0)).unwrap();
    assert!(y.iter().all(|v| (v - 0.7).abs() <= 1e-12));
    let zero = op.solve(&vec![0.0; op.dim()]).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Outward unit flux with zero inlet data can only lower the field.
    #[test]
    fn basis_functions_are_non_positive(level in 0u32..3, d in 1e-3f64..1.0, v_in in 0.0f64..5.0) {
        let grid = channel(level);
        let cat = grid.catalytic_index().unwrap();
        let op = TransportOperator::assemble(&grid, &VelocityField::hagen_poiseuille(v_in, 1.0), d, &[0.2, 0.8, 0.0], None)
            .unwrap();
        let basis = ReducedBasis::offline(&op, &grid, &cat, OfflineOptions { keep_fields: true }).unwrap();
        for field in basis.fields().unwrap() {
            prop_assert!(field.iter().all(|&v| v <= 1e-15));
        }
        for s in 0..3 {
            prop_assert!(basis.y0_trace()[s].iter().all(|&v| v == [0.2, 0.8, 0.0][s]));
        }
    }

    #[test]
    fn zero_rate_run_conserves(level in 0u32..3, d in 1e-3f64..1.0, v_in in 0.1f64..5.0, y_in in 0.01f64..1.0) {
        let grid = channel(level);
        let op = TransportOperator::assemble(&grid, &VelocityField::hagen_poiseuille(v_in, 1.0), d, &[y_in], None)
            .unwrap();
        let y = op.solve(op.b0(0)).unwrap();
        prop_assert!(y.iter().all(|&v| (v - y_in).abs() <= 1e-12));
        let b = op.flux_balance(&y, 0, None).unwrap();
        prop_assert!(b.inlet < 0.0 && b.outlet > 0.0);
        prop_assert!(b.relative_defect() <= 1e-10, "{:?}", b);
    }
}

#[test]
fn source_term_is_balanced_by_outflow() {
    let grid = channel(1);
    let source: &SourceFn = &|_p: [f64; 2], _s: usize| 0.5;
    let op = TransportOperator::assemble(&grid, &VelocityField::hagen_poiseuille(1.0, 1.0), 1e-2, &[0.1], Some(source))
        .unwrap();
    assert!(!op.linear_part_is_constant());
    let y = op.solve(op.b0(0)).unwrap();
    let b = op.flux_balance(&y, 0, None).unwrap();
    // the inlet column of boxes is fixed by its Dirichlet value
    let area = 5.0 - grid.dx() / 2.0;
    assert!((b.source - 0.5 * area).abs() <= 1e-12);
    assert!(b.relative_defect() <= 1e-10, "{b:?}");
    assert!(y.iter().all(|&v| v >= 0.1 - 1e-12));
}

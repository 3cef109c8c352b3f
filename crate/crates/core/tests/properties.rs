use approx::assert_relative_eq;
use chx::field::{forward_transform, inverse_transform};
use chx::littlewood_paley::BlockProjector;
use chx::paraproduct::{bony_decompose, para_lt, resonant};
use chx::semigroup::apply_semigroup;
use chx::{Field, TorusGrid};
use proptest::prelude::*;

fn field(grid: TorusGrid, values: Vec<f64>) -> Field {
    Field::from_values(grid, values).unwrap()
}

fn samples(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spectral_round_trip(v in samples(256)) {
        let grid = TorusGrid::new(2, 16).unwrap();
        let f = field(grid, v);
        let back = inverse_transform(&forward_transform(&f)).unwrap();
        prop_assert!(back.relative_sup_distance(&f) < 1e-13);
    }

    #[test]
    fn parseval(v in samples(64)) {
        let grid = TorusGrid::new(1, 64).unwrap();
        let f = field(grid, v);
        let mean_square = f.values().iter().map(|x| x * x).sum::<f64>() / 64.0;
        let energy: f64 = f.coeffs().iter().map(|c| c.norm_sqr()).sum();
        assert_relative_eq!(energy, mean_square, max_relative = 1e-12);
    }

    #[test]
    fn paraproducts_are_bilinear(a in samples(64), b in samples(64), c in samples(64), s in -3.0f64..3.0) {
        let grid = TorusGrid::new(1, 64).unwrap();
        let (f, g, h) = (field(grid, a), field(grid, b), field(grid, c));
        let fs = f.axpy(s, &h).unwrap();
        for op in [para_lt, resonant] {
            let lhs = op(&fs, &g).unwrap();
            let rhs = op(&f, &g).unwrap().axpy(s, &op(&h, &g).unwrap()).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().sup_norm() <= 1e-11 * (1.0 + rhs.sup_norm()));
            let lhs = op(&g, &fs).unwrap();
            let rhs = op(&g, &f).unwrap().axpy(s, &op(&g, &h).unwrap()).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().sup_norm() <= 1e-11 * (1.0 + rhs.sup_norm()));
        }
    }

    #[test]
    fn bony_parts_sum_to_product(a in samples(256), b in samples(256)) {
        let grid = TorusGrid::new(2, 16).unwrap();
        let (f, g) = (field(grid, a), field(grid, b));
        let exact = f.product_dealiased(&g).unwrap();
        prop_assert!(bony_decompose(&f, &g).unwrap().sum().sub(&exact).unwrap().sup_norm() <= 1e-11 * exact.sup_norm());
    }

    #[test]
    fn blocks_reconstruct(v in samples(512)) {
        let grid = TorusGrid::new(3, 8).unwrap();
        let f = field(grid, v);
        let bp = BlockProjector::new(grid);
        prop_assert!(bp.decompose(&f).unwrap().reconstruct().relative_sup_distance(&f) < 1e-13);
    }

    #[test]
    fn holder_norm_is_homogeneous(v in samples(128), s in -10.0f64..10.0) {
        let grid = TorusGrid::new(1, 128).unwrap();
        let f = field(grid, v);
        let bp = BlockProjector::new(grid);
        assert_relative_eq!(bp.holder_norm(&f.scale(s), 0.5).unwrap(), s.abs() * bp.holder_norm(&f, 0.5).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn semigroup_is_a_semigroup(v in samples(64), r in 1e-6f64..1e-3, t in 1e-6f64..1e-3) {
        let grid = TorusGrid::new(1, 64).unwrap();
        let f = field(grid, v);
        let two = apply_semigroup(t, &apply_semigroup(r, &f).unwrap()).unwrap();
        let one = apply_semigroup(r + t, &f).unwrap();
        prop_assert!(two.sub(&one).unwrap().sup_norm() <= 1e-12 * (1.0 + f.sup_norm()));
    }
}

use curvlab_core::chern::ChernPackage;
use curvlab_core::expr::{parse_expr, Expr};
use curvlab_core::functionals::{hsc, rbc_tau, torsion_quadratic, TauParam};
use curvlab_core::gauduchon::{chern_from_gauduchon, gauduchon_forward, GauduchonParam};
use curvlab_core::tensor::{contract, to_unitary_frame, ComplexTensor, Slot, UnitaryFrame, Variance};
use curvlab_core::{eval_jet2, FdScheme, HermitianMatrix, MetricSpec, PsdForm, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

use Variance::*;

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn vec_c(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(complex(), n)
}

fn tensor(n: usize, variances: &'static [Variance]) -> impl Strategy<Value = ComplexTensor> {
    vec_c(n.pow(variances.len() as u32)).prop_map(move |data| {
        let shape = variances.iter().map(|&v| Slot::new(n, v)).collect();
        ComplexTensor::from_data(shape, data).unwrap()
    })
}

fn pd_metric(n: usize) -> impl Strategy<Value = DMatrix<C64>> {
    vec_c(n * n).prop_map(move |d| {
        let m = DMatrix::from_row_slice(n, n, &d);
        &m * m.adjoint() + DMatrix::identity(n, n).scale(0.5)
    })
}

/// Points of the punctured ball where the Hopf metric is defined.
fn hopf_point() -> impl Strategy<Value = Vec<C64>> {
    vec_c(2).prop_filter("away from the puncture", |z| {
        let r: f64 = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        r > 0.3 && r < 1.3
    })
}

fn hopf_package(z: &[C64]) -> ChernPackage {
    let spec = MetricSpec::hopf(2).unwrap();
    ChernPackage::unitary_from_jet(&eval_jet2(&spec, z, &FdScheme::default()).unwrap()).unwrap()
}

fn nonzero(v: &[C64]) -> bool {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-3
}

fn expr_tree() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0usize..3).prop_map(Expr::Var),
        (0usize..3).prop_map(Expr::ConjVar),
        (-3i32..4, 0i32..3).prop_map(|(a, b)| Expr::constant(a as f64 * 0.5, b as f64 * 0.25)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            (inner.clone(), 1i32..4).prop_map(|(a, k)| Expr::pow(a, k)),
            inner.clone().prop_map(Expr::abs2),
            inner.clone().prop_map(Expr::conj),
            inner.prop_map(Expr::neg),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn contraction_is_linear(
        a in tensor(2, &[HoloUp, AntiDown]),
        b in tensor(2, &[HoloUp, AntiDown]),
        v in tensor(2, &[AntiUp]),
        s in complex(),
    ) {
        let lhs = contract(&a.scale(s).add(&b).unwrap(), &v, &[(1, 0)]).unwrap();
        let rhs = contract(&a, &v, &[(1, 0)]).unwrap().scale(s).add(&contract(&b, &v, &[(1, 0)]).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn contraction_is_associative(
        a in tensor(3, &[HoloUp, HoloDown]),
        b in tensor(3, &[HoloUp, HoloDown]),
        v in tensor(3, &[HoloUp]),
    ) {
        let ab_v = contract(&contract(&a, &b, &[(1, 0)]).unwrap(), &v, &[(1, 0)]).unwrap();
        let a_bv = contract(&a, &contract(&b, &v, &[(1, 0)]).unwrap(), &[(1, 0)]).unwrap();
        prop_assert!(ab_v.max_abs_diff(&a_bv) < 1e-12);
    }

    #[test]
    fn frame_change_round_trips(g in pd_metric(3), t in tensor(3, &[HoloDown, AntiUp, HoloUp])) {
        let frame = UnitaryFrame::from_metric(&g).unwrap();
        let back = to_unitary_frame(&to_unitary_frame(&t, &frame).unwrap(), &frame.inverse()).unwrap();
        prop_assert!(back.max_abs_diff(&t) < 1e-9 * t.max_abs().max(1.0));
    }

    #[test]
    fn frame_change_commutes_with_contraction(
        g in pd_metric(2),
        a in tensor(2, &[HoloDown, AntiDown]),
        v in tensor(2, &[HoloUp]),
    ) {
        let frame = UnitaryFrame::from_metric(&g).unwrap();
        let direct = to_unitary_frame(&contract(&a, &v, &[(0, 0)]).unwrap(), &frame).unwrap();
        let moved = contract(&to_unitary_frame(&a, &frame).unwrap(), &to_unitary_frame(&v, &frame).unwrap(), &[(0, 0)]).unwrap();
        prop_assert!(direct.max_abs_diff(&moved) < 1e-9 * a.max_abs().max(1.0));
    }

    #[test]
    fn unitary_metric_is_identity(g in pd_metric(3)) {
        let frame = UnitaryFrame::from_metric(&g).unwrap();
        let gt = ComplexTensor::from_matrix(&g, HoloDown, AntiDown);
        let id = to_unitary_frame(&gt, &frame).unwrap().to_matrix().unwrap();
        prop_assert!((id - DMatrix::<C64>::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn hsc_is_phase_and_scale_invariant(z in hopf_point(), zeta in vec_c(2), theta in 0.0..6.3f64, s in 0.1..5.0f64) {
        prop_assume!(nonzero(&zeta));
        let pkg = hopf_package(&z);
        let base = hsc(&pkg, &zeta).unwrap();
        let rotated: Vec<C64> = zeta.iter().map(|c| c * C64::from_polar(s, theta)).collect();
        prop_assert!((hsc(&pkg, &rotated).unwrap() - base).abs() < 1e-10);
    }

    #[test]
    fn rank_one_rbc_is_hsc(z in hopf_point(), zeta in vec_c(2)) {
        prop_assume!(nonzero(&zeta));
        let pkg = hopf_package(&z);
        let xi = PsdForm::rank_one(&zeta).unwrap();
        let r = rbc_tau(&pkg, TauParam::target(1.0).unwrap(), &xi).unwrap();
        prop_assert!((r - hsc(&pkg, &zeta).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn tempered_rbc_is_affine_and_increasing_in_tau(
        z in hopf_point(),
        entries in vec_c(4),
        t1 in 0.0..3.0f64,
        dt in 0.0..3.0f64,
    ) {
        let pkg = hopf_package(&z);
        let m = DMatrix::from_row_slice(2, 2, &entries);
        let xi = PsdForm::new(HermitianMatrix::hermitian_part(&(&m * m.adjoint()))).unwrap();
        prop_assume!(xi.norm() > 1e-3);
        let t2 = t1 + dt;
        let r1 = rbc_tau(&pkg, TauParam::target(t1).unwrap(), &xi).unwrap();
        let r2 = rbc_tau(&pkg, TauParam::target(t2).unwrap(), &xi).unwrap();
        let tt = torsion_quadratic(&pkg, xi.xi().matrix());
        prop_assert!(tt.re >= -1e-12 && tt.im.abs() < 1e-10);
        let slope = tt.re / (4.0 * xi.norm() * xi.norm());
        prop_assert!(r2 >= r1 - 1e-12);
        prop_assert!((r2 - r1 - slope * dt).abs() < 1e-10);
    }

    #[test]
    fn gauduchon_round_trip_at_random_t(z in hopf_point(), t in prop_oneof![-4.0..-0.05f64, 0.05..0.45f64, 0.55..4.0f64]) {
        let pkg = hopf_package(&z);
        let g = gauduchon_forward(&pkg, GauduchonParam(t)).unwrap();
        let back = chern_from_gauduchon(&g).unwrap();
        let scale = pkg.curvature.max_abs().max(1.0) / ((2.0 * t - 1.0).abs() * t.abs() * t.abs()).min(1.0);
        prop_assert!(back.max_abs_diff(&pkg.curvature) < 1e-11 * scale);
    }

    #[test]
    fn curvature_is_hermitian_symmetric(z in hopf_point()) {
        let pkg = hopf_package(&z);
        prop_assert!(pkg.curvature_hermitian_residual() < 1e-10);
        prop_assert!(pkg.torsion_antisymmetry_residual() == 0.0);
    }

    #[test]
    fn printed_expressions_parse_back(e in expr_tree()) {
        let printed = e.to_string();
        let parsed = parse_expr(&printed).unwrap();
        let z = [C64::new(0.3, -0.2), C64::new(-0.7, 0.4), C64::new(0.1, 0.9)];
        match (e.eval(&z), parsed.eval(&z)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0), "{} vs {}", a, b),
            (a, b) => prop_assert_eq!(a.is_ok(), b.is_ok()),
        }
    }
}

//! Acceptance gate. Each test checks one criterion and prints a single
//! `criterion N: PASS|FAIL ...` line with the measured quantities.

use std::time::Instant;

use curvlab_core::chern::{bianchi_residual, build_chern_normal_coordinates, pluriclosed_residual};
use curvlab_core::flow::{parabolic_schwarz_residual, step_euler, Boundary, FlowState, GridSpec};
use curvlab_core::functionals::{
    altered_hsc, estimate_extremum, hsc, rbc, rbc_tau, ric_tau, tempered_tensor, BoundKind, ExtremumProblem,
    FunctionalId, PointSource, TauParam,
};
use curvlab_core::gauduchon::{
    chern_from_gauduchon, gauduchon_forward, rbc_tau_from_gauduchon, ric_tau_from_gauduchon, GauduchonParam,
};
use curvlab_core::schwarz::{
    connection_invariance_residual, eigenvalue_estimate_slack, laplacian_energy_assembled, schwarz_inequality_slack,
    young_split_slack, HoloMapSpec, SchwarzConstants,
};
use curvlab_core::{eval_jet2, psd_project, ChernPackage, FdScheme, HermitianMatrix, MetricSpec, PsdForm, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {:>2}: {} {}", n, if pass { "PASS" } else { "FAIL" }, detail);
    assert!(pass, "criterion {} failed: {}", n, detail);
}

/// Every fixture metric with a few interior points.
fn fixtures() -> Vec<(&'static str, MetricSpec, Vec<Vec<C64>>)> {
    vec![
        ("flat(2)", MetricSpec::flat(2).unwrap(), vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.3, -0.2), c(1.0, 0.5)]]),
        (
            "poincare_polydisk(1)",
            MetricSpec::poincare_polydisk(1).unwrap(),
            vec![vec![c(0.0, 0.0)], vec![c(0.3, 0.0)], vec![c(-0.2, 0.5)], vec![c(0.1, -0.6)]],
        ),
        (
            "poincare_polydisk(2)",
            MetricSpec::poincare_polydisk(2).unwrap(),
            vec![
                vec![c(0.0, 0.0), c(0.0, 0.0)],
                vec![c(0.3, 0.1), c(-0.2, 0.4)],
                vec![c(-0.5, 0.0), c(0.1, 0.1)],
                vec![c(0.2, -0.3), c(0.6, 0.0)],
            ],
        ),
        (
            "example22",
            MetricSpec::fixture_f1(),
            vec![
                vec![c(0.0, 0.0), c(0.0, 0.0)],
                vec![c(0.05, 0.02), c(-0.03, 0.04)],
                vec![c(-0.1, 0.0), c(0.0, 0.1)],
                vec![c(0.08, -0.06), c(0.1, 0.05)],
            ],
        ),
        ("hopf(2)", MetricSpec::hopf(2).unwrap(), hopf_points()),
    ]
}

fn hopf_points() -> Vec<Vec<C64>> {
    vec![
        vec![c(1.0, 0.0), c(0.0, 0.0)],
        vec![c(0.5, 0.2), c(0.0, 0.7)],
        vec![c(-0.8, 0.3), c(0.4, 0.0)],
        vec![c(0.2, 0.0), c(-0.3, -1.1)],
    ]
}

fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> PsdForm {
    loop {
        let m = DMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        if let Ok(p) = psd_project(&HermitianMatrix::hermitian_part(&m)) {
            return p;
        }
    }
}

fn unitary(spec: &MetricSpec, z: &[C64]) -> ChernPackage {
    ChernPackage::unitary_from_jet(&eval_jet2(spec, z, &FdScheme::default()).unwrap()).unwrap()
}

#[test]
fn criterion_01_fixture_values() {
    let start = Instant::now();
    let pkg = unitary(&MetricSpec::fixture_f1(), &[c(0.0, 0.0), c(0.0, 0.0)]);
    let t = pkg.torsion[[0, 1, 0]];
    let r = pkg.curvature[[0, 0, 1, 1]];
    let tempered = tempered_tensor(&pkg, TauParam::target(0.0).unwrap()).unwrap()[[0, 0, 1, 1]];
    let elapsed = start.elapsed().as_secs_f64();
    let errs = [(t - c(2.0, 0.0)).norm(), (r - c(0.5, 0.0)).norm(), (tempered - c(-0.5, 0.0)).norm()];
    let pass = errs.iter().all(|&e| e <= 1e-6) && elapsed < 1.0;
    report(1, pass, format!("T^1_12 = {}, R_1122 = {}, tempered = {}, {:.3} s", t, r, tempered, elapsed));
}

#[test]
fn criterion_02_normal_coordinates() {
    let spec = MetricSpec::poincare_polydisk(1).unwrap();
    let nc = build_chern_normal_coordinates(&spec, &[c(0.3, 0.0)], &FdScheme::default()).unwrap();
    let worst = nc.residuals.iter().copied().fold(0.0, f64::max);
    report(2, worst <= 1e-8, format!("residuals {:?}", nc.residuals));
}

#[test]
fn criterion_03_pluriclosed_identity() {
    let spec = MetricSpec::hopf(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut gap: f64 = 0.0;
    let mut pc: f64 = 0.0;
    for z in hopf_points() {
        let pkg = unitary(&spec, &z);
        for _ in 0..8 {
            let xi = random_psd(2, &mut rng);
            let r0 = rbc_tau(&pkg, TauParam::target(0.0).unwrap(), &xi).unwrap();
            gap = gap.max((r0 - 0.5 * altered_hsc(&pkg, &xi).unwrap()).abs());
        }
        let (a, b) = pluriclosed_residual(&spec, &z, &FdScheme::default()).unwrap();
        pc = pc.max(a).max(b);
    }
    report(3, gap <= 1e-8 && pc <= 1e-6, format!("max |RBC^0 - altered/2| = {:e}, pluriclosed residual = {:e}", gap, pc));
}

#[test]
fn criterion_04_tau_one_degeneration() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pass = true;
    let mut checked = 0;
    for (_, spec, points) in fixtures() {
        for z in &points {
            let pkg = unitary(&spec, z);
            for _ in 0..4 {
                let xi = random_psd(spec.n, &mut rng);
                pass &= rbc_tau(&pkg, TauParam::target(1.0).unwrap(), &xi).unwrap() == rbc(&pkg, &xi).unwrap();
                checked += 1;
            }
            pass &= ric_tau(&pkg, TauParam::source(1.0).unwrap()).unwrap() == pkg.ric.ric2;
        }
    }
    report(4, pass, format!("{} bitwise RBC^1 = RBC checks, Ric^1 = Ric^(2) at every fixture point", checked));
}

#[test]
fn criterion_05_gauduchon_round_trip() {
    let ts = [-2.0, -1.0, -0.5, 0.25, 0.75, 2.0, 5.0];
    let mut worst: f64 = 0.0;
    let mut identity = true;
    for (_, spec, points) in fixtures() {
        for z in &points {
            let pkg = unitary(&spec, z);
            for &t in &ts {
                let g = gauduchon_forward(&pkg, GauduchonParam(t)).unwrap();
                worst = worst.max(chern_from_gauduchon(&g).unwrap().max_abs_diff(&pkg.curvature));
            }
            let g1 = gauduchon_forward(&pkg, GauduchonParam(1.0)).unwrap();
            identity &= g1.curvature == pkg.curvature && chern_from_gauduchon(&g1).unwrap() == pkg.curvature;
        }
    }
    report(5, worst <= 1e-9 && identity, format!("max round-trip residual {:e}, t = 1 identity: {}", worst, identity));
}

#[test]
fn criterion_06_tempered_via_gauduchon() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    let mut trials = 0;
    for (_, spec, points) in fixtures() {
        for z in &points {
            let pkg = unitary(&spec, z);
            for _ in 0..6 {
                let t = loop {
                    let t: f64 = rng.random_range(-3.0..3.0);
                    if t.abs() > 0.1 && (t - 0.5).abs() > 0.1 {
                        break t;
                    }
                };
                let tau: f64 = rng.random_range(0.05..4.0);
                let xi = random_psd(spec.n, &mut rng);
                let g = gauduchon_forward(&pkg, GauduchonParam(t)).unwrap();
                let ric_d = ric_tau(&pkg, TauParam::source(tau).unwrap()).unwrap();
                let ric_g = ric_tau_from_gauduchon(&g, TauParam::source(tau).unwrap()).unwrap();
                let rbc_d = rbc_tau(&pkg, TauParam::target(tau).unwrap(), &xi).unwrap();
                let rbc_g = rbc_tau_from_gauduchon(&g, TauParam::target(tau).unwrap(), &xi).unwrap();
                worst = worst.max((ric_d.matrix() - ric_g.matrix()).camax()).max((rbc_d - rbc_g).abs());
                trials += 1;
            }
        }
    }
    report(6, worst <= 1e-9, format!("{} random (t, tau, xi) trials, max discrepancy {:e}", trials, worst));
}

#[test]
fn criterion_07_lu_identity() {
    let poincare = MetricSpec::poincare_polydisk(2).unwrap();
    let f1 = MetricSpec::fixture_f1();
    let flat = MetricSpec::flat(2).unwrap();
    let hopf = MetricSpec::hopf(2).unwrap();
    let cases = [
        ("id: poincare -> example22", HoloMapSpec::identity(2), &poincare, &f1, vec![c(0.1, 0.0), c(0.0, 0.1)]),
        ("(z, zw): flat -> example22", HoloMapSpec::parse(2, &["z1", "z1*z2"]).unwrap(), &flat, &f1, vec![c(0.05, 0.02), c(-0.03, 0.04)]),
        ("hopf -> hopf", HoloMapSpec::parse(2, &["z1 + 0.1*z2^2", "z2"]).unwrap(), &hopf, &hopf, vec![c(0.7, 0.2), c(-0.3, 0.4)]),
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for (name, map, src, tgt, z) in cases.iter() {
        let r = laplacian_energy_assembled(map, src, tgt, z, &FdScheme::default()).unwrap();
        let coarse = laplacian_energy_assembled(map, src, tgt, z, &FdScheme::new(1e-2, 2, 0).unwrap()).unwrap();
        let fine = laplacian_energy_assembled(map, src, tgt, z, &FdScheme::new(5e-3, 2, 0).unwrap()).unwrap();
        let ratio = coarse.relative_error / fine.relative_error;
        // second-order stencil: halving h should divide the error by about 4
        let ok = r.relative_error <= 1e-4 && r.skew_torsion_residual <= 1e-8 && ratio > 3.0;
        pass &= ok;
        lines.push(format!(
            "{}: rel {:.2e}, skew {:.1e}, h-halving ratio {:.2}",
            name, r.relative_error, r.skew_torsion_residual, ratio
        ));
    }
    report(7, pass, lines.join("; "));
}

#[test]
fn criterion_08_connection_invariance() {
    let map = HoloMapSpec::identity(2);
    let src = MetricSpec::poincare_polydisk(2).unwrap();
    let tgt = MetricSpec::fixture_f1();
    let z = [c(0.1, 0.05), c(-0.05, 0.1)];
    let ts = [-1.0, 0.0, 0.3, 1.0, 2.0];
    let mut worst: f64 = 0.0;
    for &a in &ts {
        for &b in &ts {
            let r = connection_invariance_residual(&map, &src, &tgt, &z, a, b, &FdScheme::default()).unwrap();
            worst = worst.max(r);
        }
    }
    report(8, worst <= 1e-8, format!("max residual over 25 (t_source, t_target) pairs {:e}", worst));
}

#[test]
fn criterion_09_schwarz_equality_case() {
    let disk = MetricSpec::poincare_polydisk(1).unwrap();
    let id = HoloMapSpec::identity(1);
    let k = SchwarzConstants { c1: 2.0, c2: 0.0, kappa0: 2.0, rank: 1 };
    let bound = k.energy_bound(1).unwrap();
    let mut energy_err: f64 = 0.0;
    let mut slack: f64 = 0.0;
    for z in [c(0.0, 0.0), c(0.3, 0.0), c(-0.2, 0.5), c(0.6, -0.3)] {
        let r = laplacian_energy_assembled(&id, &disk, &disk, &[z], &FdScheme::default()).unwrap();
        energy_err = energy_err.max((r.energy - bound).abs());
        slack = slack.max(schwarz_inequality_slack(&r, &k).unwrap().abs());
        let rhs = -k.c1 * r.energy + k.kappa0 * r.energy * r.energy;
        slack = slack.max((r.laplacian_fd - rhs).abs());
    }
    report(
        9,
        energy_err <= 1e-9 && slack <= 1e-6,
        format!("bound {}, max | |df|^2 - bound | = {:e}, max |slack| = {:e}", bound, energy_err, slack),
    );
}

#[test]
fn criterion_10_scalar_inequalities() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut young: f64 = f64::INFINITY;
    for _ in 0..1000 {
        let len = rng.random_range(1..12);
        let a: Vec<C64> = (0..len).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
        let b: Vec<C64> = (0..len).map(|_| c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
        let tau = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        young = young.min(young_split_slack(&a, &b, tau));
    }
    let mut eig: f64 = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.random_range(1..6);
        let k = rng.random_range(1..=n);
        let lambda: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..3.0)).collect();
        let c1 = rng.random_range(-5.0..5.0);
        let c2 = rng.random_range(0.0..5.0);
        eig = eig.min(eigenvalue_estimate_slack(&lambda, c1, c2, n));
    }
    report(10, young >= -1e-12 && eig >= -1e-12, format!("min Young slack {:e}, min eigenvalue slack {:e}", young, eig));
}

#[test]
fn criterion_11_poincare_curvature() {
    let disk = MetricSpec::poincare_polydisk(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let z = disk.region.sample(1, &mut rng);
        let pkg = unitary(&disk, &z);
        worst = worst.max((hsc(&pkg, &[c(1.0, 0.0)]).unwrap() + 2.0).abs());
    }
    let bidisk = MetricSpec::poincare_polydisk(2).unwrap();
    let center = PointSource::Fixed(vec![vec![c(0.0, 0.0), c(0.0, 0.0)]]);
    let sup = estimate_extremum(&bidisk, &ExtremumProblem::new(FunctionalId::Hsc, BoundKind::Sup, center.clone())).unwrap();
    let inf = estimate_extremum(&bidisk, &ExtremumProblem::new(FunctionalId::Hsc, BoundKind::Inf, center)).unwrap();
    let pass = worst <= 1e-6 && (sup.value + 1.0).abs() <= 1e-3 && (inf.value + 2.0).abs() <= 1e-3;
    report(11, pass, format!("disk max |HSC + 2| = {:e}, bidisk sup {:.6}, inf {:.6}", worst, sup.value, inf.value));
}

#[test]
fn criterion_12_flow() {
    let flat = MetricSpec::flat(1).unwrap();
    let tau = TauParam::source(1.0).unwrap();
    let grid = GridSpec { boundary: Boundary::Periodic, ..GridSpec::default() };
    let mut state = FlowState::new(&flat, grid, tau, flat.clone()).unwrap();
    for _ in 0..10 {
        state = step_euler(&state, 0.01).unwrap();
    }
    let expect = (-0.1f64).exp();
    let flat_err = state.field.values.iter().map(|g| (g[(0, 0)].re - expect).abs()).fold(0.0, f64::max);

    // kappa0 from a sampled certificate of RBC^tau <= -kappa0 for the reference metric
    let disk = MetricSpec::poincare_polydisk(1).unwrap();
    let cert = estimate_extremum(
        &disk,
        &ExtremumProblem::new(FunctionalId::RbcTau, BoundKind::Sup, PointSource::Sampled(disk.region)).with_tau(1.0),
    )
    .unwrap();
    let kappa0 = -cert.value;
    let mut certified: f64 = f64::NEG_INFINITY;
    let mut inflated: f64 = f64::INFINITY;
    for z in [c(0.0, 0.0), c(0.2, -0.1), c(-0.4, 0.3), c(0.1, 0.6)] {
        let ok = parabolic_schwarz_residual(&disk, &disk, tau, kappa0, &[z], &FdScheme::default()).unwrap();
        let bad = parabolic_schwarz_residual(&disk, &disk, tau, 10.0 * kappa0, &[z], &FdScheme::default()).unwrap();
        certified = certified.max(ok.residual);
        inflated = inflated.min(bad.residual);
    }
    let pass = flat_err <= 1e-4 && certified <= 1e-3 && inflated > 0.0;
    report(
        12,
        pass,
        format!(
            "flat |g - e^-0.1| = {:.2e}; kappa0 = {:.6}, max residual {:.2e}, inflated min residual {:.3}",
            flat_err, kappa0, certified, inflated
        ),
    );
}

#[test]
fn criterion_13_bianchi() {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (_, spec, points) in fixtures() {
        let mut pts = points.clone();
        while pts.len() < 4 {
            let mut p = pts[pts.len() - 1].clone();
            p[0] += c(0.05, 0.05);
            pts.push(p);
        }
        for z in pts.iter().take(4) {
            worst = worst.max(bianchi_residual(&spec, z, &FdScheme::default()).unwrap());
            count += 1;
        }
    }
    report(13, worst <= 1e-6, format!("{} fixture points, max residual {:e}", count, worst));
}

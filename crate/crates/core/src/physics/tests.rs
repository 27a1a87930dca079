use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::discretization::FieldSpec;
use crate::levelset::{Circle, Geometry, HalfPlane, LevelSet};
use crate::polytree::PolyTreeForest;

fn build(n: [usize; 2], lo: [f64; 2], hi: [f64; 2], p: usize, nc: usize, geom: Geometry, void: Vec<bool>) -> Discretization {
    let f = PolyTreeForest::init_base(n[0], n[1], lo, hi, 1).unwrap();
    Discretization::build(f, &[FieldSpec::new("u", 0, p, nc)], geom, void, 0).unwrap()
}

fn unit(n: usize, p: usize, nc: usize) -> Discretization {
    build([n, n], [0.0; 2], [1.0; 2], p, nc, Geometry::uniform(), vec![false])
}

fn holed(n: usize, p: usize, nc: usize) -> Discretization {
    let c = Circle { center: [0.5, 0.5], radius: 0.23 };
    build([n, n], [0.0; 2], [1.0; 2], p, nc, Geometry::single(Arc::new(c)), vec![true, false])
}

fn solid() -> Material {
    Material::solid(1.0, 0.3, 1.0, 0.0, 0.0)
}

fn all_sides_dirichlet(mut prob: Problem, f: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + Clone + 'static) -> Problem {
    for side in Side::ALL {
        prob = prob.with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Side(side), f.clone()));
    }
    prob
}

fn scalar(f: impl Fn([f64; 2]) -> (f64, [f64; 2]) + Sync) -> Analytic<impl Fn([f64; 2], usize) -> Eval + Sync> {
    Analytic(move |x, _| {
        let (v, g) = f(x);
        (vec![v], vec![g])
    })
}

#[test]
fn norms_of_linear_against_zero() {
    let d = unit(3, 1, 1);
    let zero = vec![0.0; d.n_dof(0)];
    let (l2, h1) = error_norms(&d, 0, &zero, &scalar(|x| (x[0], [1.0, 0.0]))).unwrap();
    assert!((l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
    assert!((h1 - 1.0).abs() < 1e-13);
}

#[test]
fn penalty_scales_inversely_with_h() {
    let g = dirichlet_penalty(8.0, 2.0, 0.1);
    assert!((g - 160.0).abs() < 1e-12);
    assert!((dirichlet_penalty(8.0, 2.0, 0.05) - 2.0 * g).abs() < 1e-10);
    assert_eq!(WeakFormConfig::default().c_dirichlet(2), 18.0);
}

#[test]
fn interface_weight_values() {
    let (wm, wn, s) = interface_weights(1.0, 1.0, 1.0, 1.0, false).unwrap();
    assert_eq!((wm, wn, s), (0.5, 0.5, 2.0));
    let (wm, wn, _) = interface_weights(3.0, 1.0, 1.0, 1.0, false).unwrap();
    assert!((wm - 0.75).abs() < 1e-15 && (wn - 0.25).abs() < 1e-15);
    let (wm, wn, _) = interface_weights(3.0, 1.0, 1.0, 1.0, true).unwrap();
    assert!((wm - 0.25).abs() < 1e-15 && (wn - 0.75).abs() < 1e-15);
    assert!(interface_weights(0.0, 1.0, 0.0, 2.0, false).is_none());
}

#[test]
fn thermal_linear_patch_uncut() {
    let exact = |x: [f64; 2]| 1.0 + 2.0 * x[0] - x[1];
    for p in [1, 2] {
        let d = unit(4, p, 1);
        let prob = all_sides_dirichlet(Problem::new(FieldKind::Thermal, 0, vec![solid()]), move |x| [exact(x), 0.0]);
        let sys = assemble(&d, &prob, None).unwrap();
        let t = sys.solve().unwrap();
        let (l2, h1) = error_norms(&d, 0, &t, &scalar(|x| (exact(x), [2.0, -1.0]))).unwrap();
        assert!(l2 < 1e-10 && h1 < 1e-9, "p={p}: {l2} {h1}");
        assert!(sys.asymmetry() > 1e-3);
    }
}

#[test]
fn thermal_patch_with_neumann_sides() {
    let d = unit(4, 2, 1);
    let prob = Problem::new(FieldKind::Thermal, 0, vec![solid()])
        .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Side(Side::Left), |x| [2.0 * x[0] + x[1], 0.0]))
        .with_bc(BoundaryCondition::neumann(BoundaryRegion::Side(Side::Right), |_, n| [2.0 * n[0] + n[1], 0.0]))
        .with_bc(BoundaryCondition::neumann(BoundaryRegion::Side(Side::Top), |_, n| [2.0 * n[0] + n[1], 0.0]))
        .with_bc(BoundaryCondition::neumann(BoundaryRegion::Side(Side::Bottom), |_, n| [2.0 * n[0] + n[1], 0.0]));
    let t = assemble(&d, &prob, None).unwrap().solve().unwrap();
    let (l2, _) = error_norms(&d, 0, &t, &scalar(|x| (2.0 * x[0] + x[1], [2.0, 1.0]))).unwrap();
    assert!(l2 < 1e-10, "{l2}");
}

#[test]
fn zero_dirichlet_penalty_still_solves() {
    let d = unit(4, 2, 1);
    let cfg = WeakFormConfig { c_dirichlet: Some(0.0), ..Default::default() };
    let prob = all_sides_dirichlet(Problem::new(FieldKind::Thermal, 0, vec![solid()]).with_config(cfg), |x| [x[0] - 3.0 * x[1], 0.0]);
    let t = assemble(&d, &prob, None).unwrap().solve().unwrap();
    let (l2, _) = error_norms(&d, 0, &t, &scalar(|x| (x[0] - 3.0 * x[1], [1.0, -3.0]))).unwrap();
    assert!(l2 < 1e-9, "{l2}");
}

fn harmonic(x: [f64; 2]) -> (f64, [f64; 2]) {
    (x[0] * x[0] - x[1] * x[1] + x[0], [2.0 * x[0] + 1.0, -2.0 * x[1]])
}

fn holed_quadratic_problem() -> (Discretization, Problem) {
    let d = holed(6, 2, 1);
    let v = |x: [f64; 2]| [harmonic(x).0, 0.0];
    let prob = all_sides_dirichlet(Problem::new(FieldKind::Thermal, 0, vec![Material::void(), solid()]), v)
        .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Immersed, v));
    (d, prob)
}

#[test]
fn quadratic_patch_with_hole_and_ghost() {
    let (d, prob) = holed_quadratic_problem();
    let t = assemble(&d, &prob, None).unwrap().solve().unwrap();
    let (l2, h1) = error_norms(&d, 0, &t, &scalar(harmonic)).unwrap();
    assert!(l2 < 1e-9 && h1 < 1e-8, "{l2} {h1}");
    // the ghost penalty must not see a global polynomial
    let ghost = assemble_ghost(&d, &prob).unwrap();
    assert!(!ghost.is_empty());
    let g = LinearSystem::from_contributions(d.n_dof(0), &ghost);
    let energy: f64 = g.matvec(&t).iter().zip(&t).map(|(a, b)| a * b).sum();
    assert!(energy.abs() < 1e-12, "{energy}");
}

#[test]
fn ghost_jump_on_two_cell_strip() {
    // p = 1, nodal values |x - 1|: slopes -1 and +1 meet at x = 1
    let c = Circle { center: [2.0, 1.0], radius: 0.4 };
    let d = build([2, 1], [0.0; 2], [2.0, 1.0], 1, 1, Geometry::single(Arc::new(c)), vec![true, false]);
    let f = &d.fields[0];
    let coeffs: Vec<f64> = f.enrichment.regions.iter().map(|r| (f.basis.functions[r.func].i as f64 - 1.0).abs()).collect();
    let prob = Problem::new(FieldKind::Thermal, 0, vec![Material::void(), Material::solid(1.0, 0.3, 2.0, 0.0, 0.0)]);
    let g = LinearSystem::from_contributions(d.n_dof(0), &assemble_ghost(&d, &prob).unwrap());
    let energy: f64 = g.matvec(&coeffs).iter().zip(&coeffs).map(|(a, b)| a * b).sum();
    // 0.001 * kappa * h^1 * int_0^1 (2)^2 dy
    assert!((energy - 0.001 * 2.0 * 4.0).abs() < 1e-14, "{energy}");
    let off = WeakFormConfig { use_ghost: false, ..Default::default() };
    assert!(assemble_ghost(&d, &prob.clone().with_config(off)).unwrap().is_empty());
}

/// Piecewise linear field across an inclined interface with continuous
/// value and flux.
struct Kinked {
    ls: HalfPlane,
    n: [f64; 2],
    g: [f64; 2],
    beta: f64,
}

impl Kinked {
    fn new(ka: f64, kb: f64) -> Self {
        let ls = HalfPlane { point: [0.5123, 0.4], angle: 3.0 * PI / 8.0 };
        let (s, c) = ls.angle.sin_cos();
        let n = [s, -c];
        let g = [1.0, 0.3];
        Kinked { ls, n, g, beta: (ka / kb - 1.0) * (g[0] * n[0] + g[1] * n[1]) }
    }

    fn eval(&self, x: [f64; 2], phase: usize) -> (f64, [f64; 2]) {
        let t = self.g[0] * x[0] + self.g[1] * x[1];
        if phase == 0 {
            (t, self.g)
        } else {
            let d = self.ls.value(x);
            (t + self.beta * d, [self.g[0] + self.beta * self.n[0], self.g[1] + self.beta * self.n[1]])
        }
    }
}

fn kinked_run(ka: f64, kb: f64, inverse: bool) -> (f64, f64) {
    let k = Arc::new(Kinked::new(ka, kb));
    let geom = Geometry::single(Arc::new(k.ls.clone()));
    let d = build([5, 5], [0.0; 2], [1.0; 2], 1, 1, geom, vec![false, false]);
    let kk = k.clone();
    let bc = move |x: [f64; 2]| {
        let ph = if kk.ls.value(x) > 0.0 { 1 } else { 0 };
        [kk.eval(x, ph).0, 0.0]
    };
    let mats = vec![Material::solid(1.0, 0.3, ka, 0.0, 0.0), Material::solid(1.0, 0.3, kb, 0.0, 0.0)];
    let cfg = WeakFormConfig { inverse_weights: inverse, ..Default::default() };
    let prob = all_sides_dirichlet(Problem::new(FieldKind::Thermal, 0, mats).with_config(cfg), bc);
    let sys = assemble(&d, &prob, None).unwrap();
    assert!(sys.diagnostics.is_empty());
    let t = sys.solve().unwrap();
    let kr = k.clone();
    let reference = Analytic(move |x, ph| {
        let (v, g) = kr.eval(x, ph);
        (vec![v], vec![g])
    });
    error_norms(&d, 0, &t, &reference).unwrap()
}

#[test]
fn two_material_kinked_patch() {
    for (ka, kb) in [(1.0, 1.0), (1.0, 4.0), (5.0, 0.5)] {
        let (l2, h1) = kinked_run(ka, kb, false);
        assert!(l2 < 1e-10 && h1 < 1e-9, "{ka} {kb}: {l2} {h1}");
    }
    let (l2, _) = kinked_run(1.0, 4.0, true);
    assert!(l2 < 1e-10);
}

#[test]
fn matched_materials_match_single_phase() {
    let exact = |x: [f64; 2]| (x[0]).sin() * (x[1]).exp();
    let grad = |x: [f64; 2]| [(x[0]).cos() * (x[1]).exp(), (x[0]).sin() * (x[1]).exp()];
    let bc = move |x: [f64; 2]| [exact(x), 0.0];
    let reference = scalar(move |x| (exact(x), grad(x)));
    let one = unit(6, 2, 1);
    let p1 = all_sides_dirichlet(Problem::new(FieldKind::Thermal, 0, vec![solid()]), bc);
    let t1 = assemble(&one, &p1, None).unwrap().solve().unwrap();
    let e1 = error_norms(&one, 0, &t1, &reference).unwrap();

    let k = Kinked::new(1.0, 1.0);
    let two = build([6, 6], [0.0; 2], [1.0; 2], 2, 1, Geometry::single(Arc::new(k.ls)), vec![false, false]);
    let p2 = all_sides_dirichlet(Problem::new(FieldKind::Thermal, 0, vec![solid(), solid()]), bc);
    let t2 = assemble(&two, &p2, None).unwrap().solve().unwrap();
    let e2 = error_norms(&two, 0, &t2, &reference).unwrap();
    // the enriched space is larger, so only agreement to discretization level
    assert!((e1.0 - e2.0).abs() < 0.5 * e1.0, "{e1:?} {e2:?}");
    for x in [[0.2, 0.3], [0.7, 0.6], [0.45, 0.9]] {
        let a = one.fields[0].eval_at(&one.union, &one.mesh, x, None, &t1).unwrap().0[0];
        let b = two.fields[0].eval_at(&two.union, &two.mesh, x, None, &t2).unwrap().0[0];
        assert!((a - b).abs() < 1e-4, "{x:?}: {a} {b}");
    }
}

fn linear_u(x: [f64; 2]) -> [f64; 2] {
    [0.01 + 0.2 * x[0] + 0.1 * x[1], -0.05 + 0.05 * x[0] - 0.1 * x[1]]
}

fn linear_u_ref() -> Analytic<impl Fn([f64; 2], usize) -> Eval + Sync> {
    Analytic(|x, _| (linear_u(x).to_vec(), vec![[0.2, 0.1], [0.05, -0.1]]))
}

#[test]
fn elastic_patch_constant_stress() {
    for plane in [Plane::Stress, Plane::Strain] {
        let d = holed(5, 2, 2);
        let cfg = WeakFormConfig { plane, ..Default::default() };
        let prob = all_sides_dirichlet(Problem::new(FieldKind::Elastic, 0, vec![Material::void(), solid()]).with_config(cfg), linear_u)
            .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Immersed, linear_u));
        let u = assemble(&d, &prob, None).unwrap().solve().unwrap();
        let (l2, h1) = error_norms(&d, 0, &u, &linear_u_ref()).unwrap();
        assert!(l2 < 1e-10 && h1 < 1e-9, "{plane:?}: {l2} {h1}");

        let m = solid();
        let s = mul3_pub(&m.stiffness(plane), [0.2, -0.1, 0.15]);
        let sz = if plane == Plane::Strain { m.nu * (s[0] + s[1]) } else { 0.0 };
        let expect = (0.5 * ((s[0] - s[1]).powi(2) + (s[1] - sz).powi(2) + (sz - s[0]).powi(2)) + 3.0 * s[2] * s[2]).sqrt();
        let sp = d.mesh.subphases.iter().position(|s| s.phase == 1).unwrap();
        let cell = d.mesh.subphases[sp].cell;
        let x = d.union.cells[cell].to_global([0.5, 0.5]);
        let smp = Sample { cell, sub: sp, x, phase: 1 };
        let vm = von_mises(&d, 0, &u, &prob.materials, plane, None, &smp).unwrap();
        assert!((vm - expect).abs() < 1e-9, "{vm} {expect}");
    }
}

fn mul3_pub(d: &[[f64; 3]; 3], e: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|r| d[r][0] * e[0] + d[r][1] * e[1] + d[r][2] * e[2])
}

fn constant_temperature(d: &Discretization, field: usize, value: f64) -> Vec<f64> {
    let mats = vec![Material::solid(1.0, 0.3, 1.0, 0.0, 0.0); d.geom.n_phases];
    let prob = all_sides_dirichlet(Problem::new(FieldKind::Thermal, field, mats), move |_| [value, 0.0]);
    assemble(d, &prob, None).unwrap().solve().unwrap()
}

fn two_field_unit(n: usize) -> Discretization {
    let f = PolyTreeForest::init_base(n, n, [0.0; 2], [1.0; 2], 1).unwrap();
    let specs = [FieldSpec::new("T", 0, 1, 1), FieldSpec::new("u", 0, 2, 2)];
    Discretization::build(f, &specs, Geometry::uniform(), vec![false], 0).unwrap()
}

#[test]
fn free_thermal_expansion_is_stress_free() {
    let d = two_field_unit(4);
    let t = constant_temperature(&d, 0, 3.0);
    let mat = Material::solid(2.0, 0.25, 1.0, 0.01, 1.0);
    for plane in [Plane::Stress, Plane::Strain] {
        let cfg = WeakFormConfig { plane, ..Default::default() };
        let prob = Problem::new(FieldKind::Elastic, 1, vec![mat])
            .with_config(cfg)
            .with_bc(BoundaryCondition::dirichlet_masked(BoundaryRegion::Side(Side::Left), [true, false], |_| [0.0; 2]))
            .with_bc(BoundaryCondition::dirichlet_masked(BoundaryRegion::Side(Side::Bottom), [false, true], |_| [0.0; 2]));
        let temp = TemperatureInput { field: 0, coeffs: &t };
        let u = assemble(&d, &prob, Some(temp)).unwrap().solve().unwrap();
        // plane strain also expands out of plane, which raises the in-plane strain
        let e = match plane {
            Plane::Stress => 0.02,
            Plane::Strain => 0.02 * (1.0 + mat.nu),
        };
        let reference = Analytic(move |x: [f64; 2], _| (vec![e * x[0], e * x[1]], vec![[e, 0.0], [0.0, e]]));
        let (l2, _) = error_norms(&d, 1, &u, &reference).unwrap();
        assert!(l2 < 1e-10, "{plane:?} {l2}");
        if plane == Plane::Stress {
            let smp = Sample { cell: 5, sub: 5, x: d.union.cells[5].to_global([0.3, 0.6]), phase: 0 };
            let vm = von_mises(&d, 1, &u, &prob.materials, plane, Some(temp), &smp).unwrap();
            assert!(vm < 1e-9, "{vm}");
        }
    }
}

#[test]
fn zero_expansion_decouples_temperature() {
    let d = two_field_unit(3);
    let t = constant_temperature(&d, 0, 7.0);
    let prob = Problem::new(FieldKind::Elastic, 1, vec![solid()])
        .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Side(Side::Left), |_| [0.0; 2]))
        .with_source(|x| [x[1], 1.0]);
    let a = assemble(&d, &prob, None).unwrap();
    let b = assemble(&d, &prob, Some(TemperatureInput { field: 0, coeffs: &t })).unwrap();
    assert_eq!(a, b);
}

#[test]
fn thermoelastic_without_temperature_is_a_sequencing_error() {
    let d = two_field_unit(2);
    let prob = Problem::new(FieldKind::Elastic, 1, vec![Material::solid(1.0, 0.3, 1.0, 1e-3, 0.0)]);
    assert!(matches!(assemble(&d, &prob, None), Err(Error::Sequencing(_))));
    let short = vec![0.0; 2];
    let temp = TemperatureInput { field: 0, coeffs: &short };
    assert!(matches!(assemble(&d, &prob, Some(temp)), Err(Error::Sequencing(_))));
    let thermal = Problem::new(FieldKind::Thermal, 0, vec![solid()]);
    assert!(matches!(solve_staggered(&d, &prob, &thermal), Err(Error::Sequencing(_))));
}

#[test]
fn configuration_errors() {
    let d = holed(4, 1, 1);
    let bad_bc = Problem::new(FieldKind::Thermal, 0, vec![Material::void(), solid()])
        .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::ImmersedPhase(0), |_| [0.0; 2]));
    assert!(matches!(assemble(&d, &bad_bc, None), Err(Error::Config(_))));
    let wrong_void = Problem::new(FieldKind::Thermal, 0, vec![solid(), solid()]);
    assert!(matches!(assemble(&d, &wrong_void, None), Err(Error::Config(_))));
    let wrong_kind = Problem::new(FieldKind::Elastic, 0, vec![Material::void(), solid()]);
    assert!(matches!(assemble(&d, &wrong_kind, None), Err(Error::Config(_))));
    let cfg = WeakFormConfig { ghost: -1.0, ..Default::default() };
    let neg = Problem::new(FieldKind::Thermal, 0, vec![Material::void(), solid()]).with_config(cfg);
    assert!(matches!(assemble(&d, &neg, None), Err(Error::Config(_))));
}

#[test]
fn bar_tip_displacement() {
    let k = HalfPlane { point: [0.5123, 0.2571], angle: 3.0 * PI / 8.0 };
    let d = build([16, 8], [0.0; 2], [1.0, 0.5], 2, 2, Geometry::single(Arc::new(k)), vec![false, false]);
    let m = Material::solid(1.0, 0.0, 1.0, 0.0, 0.0);
    let prob = Problem::new(FieldKind::Elastic, 0, vec![m, m])
        .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Side(Side::Left), |_| [0.0; 2]))
        .with_source(|x| [8.0 * x[0] * x[0], 0.0]);
    let u = assemble(&d, &prob, None).unwrap().solve().unwrap();
    let tip = d.fields[0].eval_at(&d.union, &d.mesh, [1.0, 0.25], None, &u).unwrap().0;
    assert!((tip[0] - 2.0).abs() < 1e-3 && tip[1].abs() < 1e-6, "{tip:?}");
}

#[test]
fn staggered_matches_manual_sequence() {
    let d = two_field_unit(3);
    let mat = Material::solid(1.0, 0.3, 1.0, 1e-2, 0.0);
    let thermal = Problem::new(FieldKind::Thermal, 0, vec![mat])
        .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Side(Side::Left), |_| [0.0; 2]))
        .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Side(Side::Right), |_| [1.0, 0.0]));
    let elastic = Problem::new(FieldKind::Elastic, 1, vec![mat])
        .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Side(Side::Left), |_| [0.0; 2]));
    let (t, u) = solve_staggered(&d, &thermal, &elastic).unwrap();
    let t2 = assemble(&d, &thermal, None).unwrap().solve().unwrap();
    let u2 = assemble(&d, &elastic, Some(TemperatureInput { field: 0, coeffs: &t2 })).unwrap().solve().unwrap();
    assert_eq!(t, t2);
    assert_eq!(u, u2);
    assert!(u.iter().any(|v| v.abs() > 1e-4));
}

#[test]
fn assembly_is_thread_count_independent() {
    let (d, prob) = holed_quadratic_problem();
    let run = |n| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| assemble(&d, &prob, None).unwrap())
    };
    assert_eq!(run(1), run(4));
}

fn diag_system(d: &[f64]) -> LinearSystem {
    let parts: Vec<Contribution> = d.iter().enumerate().map(|(i, v)| Contribution { dofs: vec![i], k: vec![*v], f: vec![1.0] }).collect();
    LinearSystem::from_contributions(d.len(), &parts)
}

#[test]
fn condition_estimate_of_diagonal() {
    let c = diag_system(&[1.0, 4.0, 0.25]).condition_estimate().unwrap();
    assert!((c - 16.0).abs() < 1e-8, "{c}");
}

#[test]
fn singular_system_is_reported() {
    let sys = diag_system(&[1.0, 0.0, 2.0]);
    match sys.solve() {
        Err(Error::Singular(msg)) => assert!(msg.contains("unknown 1"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #[test]
    fn weights_are_a_partition(am in 1e-6f64..10.0, an in 1e-6f64..10.0, km in 1e-3f64..1e3, kn in 1e-3f64..1e3, inv: bool) {
        let (wm, wn, s) = interface_weights(am, km, an, kn, inv).unwrap();
        prop_assert!(wm >= 0.0 && wn >= 0.0);
        prop_assert!((wm + wn - 1.0).abs() < 1e-12);
        prop_assert!((s - (am / km + an / kn)).abs() <= 1e-12 * s);
    }

    #[test]
    fn assembly_sum_ignores_part_order(seed in 0u64..1000) {
        use rand::{seq::SliceRandom, Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let parts: Vec<Contribution> = (0..20)
            .map(|_| {
                let dofs: Vec<usize> = (0..3).map(|_| rng.gen_range(0..6)).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
                let n = dofs.len();
                Contribution { dofs, k: (0..n * n).map(|_| rng.gen::<f64>()).collect(), f: (0..n).map(|_| rng.gen::<f64>()).collect() }
            })
            .collect();
        let a = LinearSystem::from_contributions(6, &parts);
        let mut shuffled = parts.clone();
        shuffled.shuffle(&mut rng);
        let b = LinearSystem::from_contributions(6, &shuffled);
        prop_assert_eq!(&a.cols, &b.cols);
        for (x, y) in a.vals.iter().zip(&b.vals) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn patch_survives_redundant_copies() {
    // one-cell quadratic refinement band around a circle; truncation makes
    // some enriched copies proportional on small fragments
    let (n, r) = (6usize, 0.31);
    let h = 1.0 / n as f64;
    let mut f = PolyTreeForest::init_base(n, n, [0.0; 2], [1.0; 2], 1).unwrap();
    let mut flags = Vec::new();
    for j in 0..n as i64 {
        for i in 0..n as i64 {
            let c = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            if ((c[0] - 0.5).hypot(c[1] - 0.5) - r).abs() < h * 2f64.sqrt() {
                flags.push(crate::polytree::CellKey::new(0, i, j));
            }
        }
    }
    f.refine_for_ai(0, &flags, 2, false).unwrap();
    let geom = Geometry::single(Arc::new(Circle { center: [0.5, 0.5], radius: r }));
    let d = Discretization::build(f, &[FieldSpec::new("u", 0, 2, 1)], geom, vec![false, false], 0).unwrap();
    assert!(d.fields[0].enrichment.n_redundant() > 0);
    let exact = |x: [f64; 2]| 1.0 + 2.0 * x[0] - x[1] + x[0] * x[1];
    let prob = all_sides_dirichlet(Problem::new(FieldKind::Thermal, 0, vec![solid(), solid()]), move |x| [exact(x), 0.0]);
    let sys = assemble(&d, &prob, None).unwrap();
    let t = sys.solve().unwrap();
    assert!(sys.relative_residual(&t) < 1e-10);
    let (l2, h1) = error_norms(&d, 0, &t, &scalar(move |x| (exact(x), [2.0 + x[1], -1.0 + x[0]]))).unwrap();
    assert!(l2 < 1e-10 && h1 < 1e-9, "{l2} {h1}");
}

#[test]
fn interface_on_cell_facets() {
    // matched phases split exactly along the x = 0.5 facets
    let geom = Geometry::single(Arc::new(HalfPlane { point: [0.5, 0.3], angle: PI / 2.0 }));
    for p in [1, 2] {
        let d = build([4, 4], [0.0; 2], [1.0; 2], p, 1, geom.clone(), vec![false, false]);
        assert!(!d.mesh.interfaces.is_empty());
        let exact = |x: [f64; 2]| 1.0 + 2.0 * x[0] - x[1];
        let prob = Problem::new(FieldKind::Thermal, 0, vec![solid(), solid()])
            .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Side(Side::Left), move |x| [exact(x), 0.0]))
            .with_bc(BoundaryCondition::neumann(BoundaryRegion::Side(Side::Right), |_, n| [2.0 * n[0] - n[1], 0.0]))
            .with_bc(BoundaryCondition::neumann(BoundaryRegion::Side(Side::Top), |_, n| [2.0 * n[0] - n[1], 0.0]))
            .with_bc(BoundaryCondition::neumann(BoundaryRegion::Side(Side::Bottom), |_, n| [2.0 * n[0] - n[1], 0.0]));
        let t = assemble(&d, &prob, None).unwrap().solve().unwrap();
        let (l2, h1) = error_norms(&d, 0, &t, &scalar(move |x| (exact(x), [2.0, -1.0]))).unwrap();
        assert!(l2 < 1e-10 && h1 < 1e-9, "p={p}: {l2} {h1}");
    }
}

#[test]
fn immersed_boundary_on_cell_facets() {
    // void right half; Dirichlet data on the facet-aligned boundary only
    let geom = Geometry::single(Arc::new(HalfPlane { point: [0.5, 0.3], angle: PI / 2.0 }));
    let d = build([4, 4], [0.0; 2], [1.0; 2], 2, 1, geom, vec![false, true]);
    let exact = |x: [f64; 2]| harmonic(x).0;
    let prob = Problem::new(FieldKind::Thermal, 0, vec![solid(), Material::void()])
        .with_bc(BoundaryCondition::dirichlet(BoundaryRegion::Immersed, move |x| [exact(x), 0.0]))
        .with_bc(BoundaryCondition::neumann(BoundaryRegion::Side(Side::Left), |x, n| {
            let g = harmonic(x).1;
            [g[0] * n[0] + g[1] * n[1], 0.0]
        }))
        .with_bc(BoundaryCondition::neumann(BoundaryRegion::Side(Side::Top), |x, n| {
            let g = harmonic(x).1;
            [g[0] * n[0] + g[1] * n[1], 0.0]
        }))
        .with_bc(BoundaryCondition::neumann(BoundaryRegion::Side(Side::Bottom), |x, n| {
            let g = harmonic(x).1;
            [g[0] * n[0] + g[1] * n[1], 0.0]
        }));
    let t = assemble(&d, &prob, None).unwrap().solve().unwrap();
    let (l2, _) = error_norms(&d, 0, &t, &scalar(harmonic)).unwrap();
    assert!(l2 < 1e-10, "{l2}");
}

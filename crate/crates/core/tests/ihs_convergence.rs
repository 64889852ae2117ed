//! Monte-Carlo convergence properties of the sketched iteration.

use hsketch::data::{generate_gaussian_design, ConstraintSet, GaussianDesignSpec, ProblemInstance};
use hsketch::ihs::{ihs_solve, IhsConfig};
use hsketch::sketch::{SketchFamily, SketchSpec};
use hsketch::solver::{exact_solve, SubSolverConfig};

fn lasso_instance(seed: u64) -> (ProblemInstance, Vec<f64>) {
    let (p, _) = generate_gaussian_design(&GaussianDesignSpec::new(2048, 16, seed)).unwrap();
    let p = p.with_constraint(ConstraintSet::L1Penalty { lambda: 5.0 }).unwrap();
    let x = exact_solve(&p, &SubSolverConfig::default()).unwrap().x;
    (p, x)
}

fn run(p: &ProblemInstance, x_opt: &[f64], spec: SketchSpec, iters: usize) -> Vec<f64> {
    let cfg = IhsConfig::new(spec).with_iters(iters).with_reference(x_opt.to_vec());
    ihs_solve(p, &cfg).unwrap().1.errors().unwrap()
}

#[test]
fn lasso_error_decays_geometrically() {
    let mut good = 0;
    for seed in 0..10 {
        let (p, x_opt) = lasso_instance(100 + seed);
        let errs = run(&p, &x_opt, SketchSpec::new(SketchFamily::CountSketch, 160, seed), 20);
        let ok = errs
            .iter()
            .enumerate()
            .all(|(t, &e)| e <= 0.5f64.powi(t as i32).max(1e-12) * errs[0]);
        good += ok as usize;
    }
    assert!(good >= 8, "{good}/10");
}

#[test]
fn lasso_reaches_machine_precision() {
    let mut good = 0;
    for seed in 0..5 {
        let (p, x_opt) = lasso_instance(200 + seed);
        let errs = run(&p, &x_opt, SketchSpec::new(SketchFamily::CountSketch, 160, seed), 40);
        good += (*errs.last().unwrap() <= 1e-10 * errs[0]) as usize;
    }
    assert_eq!(good, 5);
}

#[test]
fn gaussian_sketch_converges_unconstrained() {
    let mut good = 0;
    for seed in 0..10 {
        let (p, _) = generate_gaussian_design(&GaussianDesignSpec::new(1024, 12, 300 + seed)).unwrap();
        let x_opt = exact_solve(&p, &SubSolverConfig::default()).unwrap().x;
        let errs = run(&p, &x_opt, SketchSpec::new(SketchFamily::Gaussian, 120, seed), 5);
        good += (errs[5] < errs[0]) as usize;
    }
    assert!(good >= 9, "{good}/10");
}

#[test]
fn larger_sketches_reach_lower_error() {
    let (mut small, mut large) = (0.0, 0.0);
    for seed in 0..10 {
        let (p, x_opt) = lasso_instance(400 + seed);
        let last = |m| *run(&p, &x_opt, SketchSpec::new(SketchFamily::CountSketch, m, seed), 5).last().unwrap();
        small += last(80) / 10.0;
        large += last(160) / 10.0;
    }
    assert!(large <= small, "m=10d: {large:e}, m=5d: {small:e}");
}

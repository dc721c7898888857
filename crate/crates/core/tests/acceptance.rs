//! Acceptance checks for the clustering library.
//!
//! Prints one `PASS`/`FAIL` line per check and exits non-zero when any
//! check fails. Pass a substring as the first argument to run a subset:
//! `cargo test -p mmclust --test acceptance -- merge`.

use std::collections::HashMap;
use std::time::Instant;

use mmclust::eval::DatasetEntry;
use mmclust::init::init_random;
use mmclust::modelgen::{generate_candidates, hac_merges, merge_components, merged_model};
use mmclust::modelsel::l_method;
use mmclust::rng::{rng_from_seed, sub_seed};
use mmclust::synth::generate;
use mmclust::*;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let checks: [Check; 12] = [
        ("em-monotonicity", em_monotonicity),
        ("normalization", normalization),
        ("ari-oracle", ari_oracle),
        ("merge-conservation", merge_conservation),
        ("skld-properties", skld_properties),
        ("recovery-accuracy", recovery_accuracy),
        ("stability-ordering", stability_ordering),
        ("timing-ordering", timing_ordering),
        ("model-selection", model_selection),
        ("m-step-optimality", m_step_optimality),
        ("coefficient-invariance", coefficient_invariance),
        ("l-method-breakpoint", l_method_breakpoint),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        ran += 1;
        if !out.pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name}: {} ({:.1}s)",
            if out.pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {ran} checks passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn synth(k: usize, d: usize, n: usize, sep: Separation, seed: u64) -> CountDataset {
    generate(&SynthSpec::new(k, d, n, sep, seed))
        .expect("synthetic generation")
        .dataset
}

fn max_model_deviation(model: &MixtureModel) -> f64 {
    let mut dev = (model.weights().iter().sum::<f64>() - 1.0).abs();
    for c in model.components() {
        dev = dev.max((c.as_slice().iter().sum::<f64>() - 1.0).abs());
    }
    dev
}

fn max_resp_deviation(resp: &ResponsibilityMatrix) -> f64 {
    resp.rows()
        .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn em_monotonicity() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(0xACC1);
    let mut worst: f64 = 0.0;
    let mut iterations = 0;
    for fit_idx in 0..100u64 {
        let k = rng.random_range(1..=5);
        let d = rng.random_range(2..=20);
        let n = rng.random_range(50..=500);
        let sep = if d >= 5 && rng.random_bool(0.5) {
            Separation::Ws
        } else {
            Separation::Nws
        };
        let data = synth(k, d, n, sep, sub_seed(0xACC1, fit_idx));
        let init = init_random(&data, k, fit_idx).unwrap();
        let cfg = EmConfig {
            max_iterations: 200,
            tolerance: 1e-10,
            seed: fit_idx,
            ..Default::default()
        };
        let fit = em_fit(&data, &init, &cfg).unwrap();
        iterations += fit.iterations;
        for w in fit.trace.windows(2) {
            worst = worst.max(w[0] - w[1]);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst <= 1e-8 && secs < 60.0,
        format!("100 fits, {iterations} iterations, largest decrease {worst:.2e} (limit 1e-8), {secs:.1}s (limit 60s)"),
    )
}

fn normalization() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut note = |dev: f64| {
        worst = worst.max(dev);
        checked += 1;
    };
    for seed in 0..6u64 {
        let k = 2 + (seed as usize % 3);
        let spec = SynthSpec::new(k, 8, 150, Separation::Ws, seed);
        let s = generate(&spec).unwrap();
        note(max_model_deviation(&s.generating.model));
        let data = &s.dataset;
        let em = EmConfig::default().with_seed(seed);
        for strategy in InitStrategy::ALL {
            let mut init = InitConfig::new(strategy, seed);
            init.trials = init.trials.min(10);
            let out = initialize(data, k, &init, &em).unwrap();
            note(max_model_deviation(&out.model));
            let fit = em_fit(data, &out.model, &em).unwrap();
            note(max_model_deviation(&fit.model));
            note(max_resp_deviation(&fit.responsibilities));
            let resp = e_step(data, &fit.model).unwrap();
            note(max_resp_deviation(&resp));
            let mut rng = rng_from_seed(seed);
            let next = m_step(data, &resp, em.prob_floor, &mut rng).unwrap();
            note(max_model_deviation(&next));
        }
        let init = InitConfig::new(InitStrategy::SmEm, seed);
        for method in GenerationMethod::ALL {
            let cands = generate_candidates(method, data, 6, &init, &em).unwrap();
            for fit in cands.entries.values() {
                note(max_model_deviation(&fit.model));
                note(max_resp_deviation(&fit.responsibilities));
            }
            for step in &cands.merges {
                note((step.params.iter().sum::<f64>() - 1.0).abs());
            }
        }
        let top = em_fit(data, &init_random(data, 6, seed).unwrap(), &em).unwrap();
        for (clusters, _) in hac_merges(&top.model).unwrap() {
            note(max_model_deviation(
                &merged_model(&top.model, &clusters).unwrap(),
            ));
        }
    }
    Outcome::new(
        worst <= 1e-10,
        format!("{checked} outputs, largest |sum - 1| = {worst:.2e} (limit 1e-10)"),
    )
}

/// Every set partition of `0..n` as a restricted growth string.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for label in 0..=next {
            prefix.push(label);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

/// Adjusted Rand index from the four pair-agreement counts.
fn pair_counting_ari(a: &[usize], b: &[usize]) -> f64 {
    let (mut ss, mut sd, mut ds, mut dd) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => ss += 1.0,
                (true, false) => sd += 1.0,
                (false, true) => ds += 1.0,
                (false, false) => dd += 1.0,
            }
        }
    }
    let denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    if denom == 0.0 {
        // Both partitions are identical and trivial.
        return 1.0;
    }
    2.0 * (ss * dd - sd * ds) / denom
}

fn ari_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut pairs = 0usize;
    for n in 2..=6 {
        let parts = partitions(n);
        for a in &parts {
            for b in &parts {
                let got = ari(a, b).unwrap();
                worst = worst.max((got - pair_counting_ari(a, b)).abs());
                pairs += 1;
            }
        }
    }
    let mut rng = rng_from_seed(0xA21);
    for _ in 0..500 {
        let ka = rng.random_range(1..=8);
        let kb = rng.random_range(1..=8);
        let a: Vec<usize> = (0..50).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..50).map(|_| rng.random_range(0..kb)).collect();
        worst = worst.max((ari(&a, &b).unwrap() - pair_counting_ari(&a, &b)).abs());
        pairs += 1;
    }
    let hand = ari(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap();
    let hand_ok = (hand + 0.5).abs() <= 1e-12;
    Outcome::new(
        worst <= 1e-12 && hand_ok,
        format!("{pairs} pairs, max |diff| = {worst:.2e} (limit 1e-12); (1,1,2,2) vs (1,2,1,2) = {hand}"),
    )
}

fn random_probs<R: Rng>(rng: &mut R, d: usize) -> ProbVector {
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect();
    ProbVector::from_weights(w, 1e-10).unwrap()
}

fn random_model<R: Rng>(rng: &mut R, k: usize, d: usize) -> MixtureModel {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let comps = (0..k).map(|_| random_probs(rng, d)).collect();
    MixtureModel::normalized(w, comps).unwrap()
}

fn merge_conservation() -> Outcome {
    let mut rng = rng_from_seed(0x3E6);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(2..=8);
        let d = rng.random_range(2..=20);
        let model = random_model(&mut rng, k, d);
        let mut members: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.5)).collect();
        if members.len() < 2 {
            members = vec![0, k - 1];
        }
        let parts: Vec<(f64, &ProbVector)> = members
            .iter()
            .map(|&i| (model.weights()[i], &model.components()[i]))
            .collect();
        let (w, mu) = merge_components(&parts).unwrap();
        let expected_w: f64 = parts.iter().map(|p| p.0).sum();
        worst = worst.max((w - expected_w).abs());
        for dd in 0..d {
            let mass: f64 = parts.iter().map(|(pw, pm)| pw * pm.as_slice()[dd]).sum();
            worst = worst.max((w * mu.as_slice()[dd] - mass).abs());
        }
    }

    let mut decreasing = 0;
    let mut sequences = 0;
    for _ in 0..200 {
        let k = rng.random_range(2..=15);
        let d = rng.random_range(2..=20);
        let model = random_model(&mut rng, k, d);
        let steps = hac_merges(&model).unwrap();
        sequences += 1;
        if steps
            .windows(2)
            .any(|w| w[1].1.dissimilarity < w[0].1.dissimilarity)
        {
            decreasing += 1;
        }
    }
    Outcome::new(
        worst <= 1e-10 && decreasing == 0,
        format!(
            "1000 merges, max weight/barycenter error {worst:.2e} (limit 1e-10); \
             {decreasing} of {sequences} linkage sequences decrease"
        ),
    )
}

fn skld_properties() -> Outcome {
    let mut rng = rng_from_seed(0x5C1D);
    let mut asym: f64 = 0.0;
    let mut min_val = f64::INFINITY;
    let mut self_max: f64 = 0.0;
    let mut distinct_zero = 0;
    for _ in 0..1000 {
        let d = rng.random_range(2..=30);
        let a = random_probs(&mut rng, d);
        let b = random_probs(&mut rng, d);
        let ab = skld(&a, &b).unwrap();
        let ba = skld(&b, &a).unwrap();
        asym = asym.max((ab - ba).abs());
        min_val = min_val.min(ab);
        self_max = self_max.max(skld(&a, &a).unwrap().abs());
        if a != b && ab <= 0.0 {
            distinct_zero += 1;
        }
    }
    let hand = skld(
        &ProbVector::new(vec![0.5, 0.5]).unwrap(),
        &ProbVector::new(vec![0.25, 0.75]).unwrap(),
    )
    .unwrap();
    let hand_ok = (hand - 0.1373).abs() <= 1e-4;
    Outcome::new(
        asym <= 1e-12 && min_val >= 0.0 && self_max == 0.0 && distinct_zero == 0 && hand_ok,
        format!(
            "asymmetry {asym:.1e}, min {min_val:.3e}, self {self_max:.1e}, \
             {distinct_zero} distinct pairs at 0; hand value {hand:.5}"
        ),
    )
}

fn method(generation: GenerationMethod) -> MethodTuple {
    MethodTuple {
        init: InitStrategy::SmEm,
        generation,
        selection: Criterion::Bic,
    }
}

fn grid(datasets: Vec<DatasetEntry>, methods: Vec<MethodTuple>) -> BenchmarkGrid {
    BenchmarkGrid {
        datasets,
        methods,
        k_min: 2,
        k_max: 15,
        em: EmConfig::default(),
        init_trials: None,
        init_iterations: None,
    }
}

fn synthetic_entry(name: String, spec: SynthSpec, replicates: Option<usize>) -> DatasetEntry {
    DatasetEntry {
        name,
        synthetic: Some(spec),
        replicates,
        path: None,
        labels: None,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean ARI of the selected model, and of the candidate at the true `K`.
fn mean_aris(report: &BenchmarkReport, m: &MethodTuple) -> (f64, f64) {
    let recs: Vec<_> = report.records.iter().filter(|r| &r.method == m).collect();
    let selected: Vec<f64> = recs.iter().map(|r| r.ari.unwrap()).collect();
    let true_k: Vec<f64> = recs.iter().map(|r| r.ari_true_k.unwrap()).collect();
    (mean(&selected), mean(&true_k))
}

fn recovery_accuracy() -> Outcome {
    let start = Instant::now();
    let (hac, int) = (method(GenerationMethod::EmHac), method(GenerationMethod::IntEm));
    let g = grid(
        vec![synthetic_entry(
            "ws-k3-d10".into(),
            SynthSpec::new(3, 10, 1000, Separation::Ws, 0x6EC0),
            Some(10),
        )],
        vec![hac, int],
    );
    let report = run_benchmark(&g, 1, 0x6EC0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    if !report.failures.is_empty() || report.records.len() != 20 {
        return Outcome::new(false, format!("{} failed runs", report.failures.len()));
    }
    let (hac_sel, hac_true) = mean_aris(&report, &hac);
    let (int_sel, int_true) = mean_aris(&report, &int);
    Outcome::new(
        hac_sel >= 0.9 && (hac_sel - int_sel).abs() <= 0.05 && secs < 120.0,
        format!(
            "mean ARI: em-hac {hac_sel:.3} (min 0.9), int-em {int_sel:.3} (within 0.05); \
             candidate at true K: em-hac {hac_true:.3}, int-em {int_true:.3}; {secs:.1}s (limit 120s)"
        ),
    )
}

fn stability_ordering() -> Outcome {
    let (hac, mul) = (method(GenerationMethod::EmHac), method(GenerationMethod::MulEm));
    let mut datasets = Vec::new();
    for k in [3usize, 5] {
        for d in [3usize, 5, 10, 20, 40] {
            datasets.push(synthetic_entry(
                format!("ws-k{k}-d{d}"),
                SynthSpec::new(k, d, 1000, Separation::Ws, sub_seed(0x57AB, (k * 100 + d) as u64)),
                None,
            ));
        }
    }
    let g = grid(datasets, vec![hac, mul]);
    let report = run_benchmark(&g, 10, 0x57AB).unwrap();
    if !report.failures.is_empty() {
        return Outcome::new(false, format!("{} failed runs", report.failures.len()));
    }
    let mut wins = 0;
    let mut true_k_wins = 0;
    let mut cells = Vec::new();
    for ds in &g.datasets {
        let h = &report.cell(&ds.name, &hac).unwrap().summary;
        let m = &report.cell(&ds.name, &mul).unwrap().summary;
        let (hs, ms) = (h.std_ari.unwrap(), m.std_ari.unwrap());
        if hs <= ms {
            wins += 1;
        }
        if h.std_ari_true_k.unwrap() <= m.std_ari_true_k.unwrap() {
            true_k_wins += 1;
        }
        cells.push(format!("{hs:.3}/{ms:.3}"));
    }
    Outcome::new(
        wins >= 7,
        format!(
            "em-hac ARI std <= mul-em in {wins} of 10 cells (min 7), \
             {true_k_wins} of 10 at true K; em-hac/mul-em: {}",
            cells.join(" ")
        ),
    )
}

fn timing_ordering() -> Outcome {
    // One worker thread, so timings measure work rather than parallelism.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let mut ordered = 0;
    let mut int_ratio = Vec::new();
    let mut mul_ratio = Vec::new();
    for seed in 0..10u64 {
        let data = synth(5, 20, 1000, Separation::Ws, sub_seed(0x71AE, seed));
        let cfg = PipelineConfig::default().with_seed(seed);
        let time = |m: GenerationMethod| {
            pool.install(|| {
                generate_candidates(m, &data, 15, &cfg.init, &cfg.em)
                    .unwrap()
                    .total_elapsed
            })
        };
        let hac = time(GenerationMethod::EmHac);
        let int = time(GenerationMethod::IntEm);
        let mul = time(GenerationMethod::MulEm);
        if hac < int && int < mul {
            ordered += 1;
        }
        int_ratio.push(int / hac);
        mul_ratio.push(mul / hac);
    }
    Outcome::new(
        ordered >= 8,
        format!(
            "em-hac < int-em < mul-em on {ordered} of 10 seeds (min 8); \
             mean time ratio int-em/em-hac {:.1}x, mul-em/em-hac {:.1}x",
            mean(&int_ratio),
            mean(&mul_ratio)
        ),
    )
}

fn model_selection() -> Outcome {
    let mut bic_hits = 0;
    let mut llh_mul_kmax = 0;
    let mut llh_hac_kmax = 0;
    let mut total = 0;
    for k in [3usize, 5] {
        for rep in 0..10u64 {
            let seed = sub_seed(0x5E1 + k as u64, rep);
            let data = synth(k, 10, 1000, Separation::Ws, seed);
            let cfg = PipelineConfig::default().with_seed(seed);
            let hac =
                generate_candidates(GenerationMethod::EmHac, &data, 15, &cfg.init, &cfg.em)
                    .unwrap();
            let mul =
                generate_candidates(GenerationMethod::MulEm, &data, 15, &cfg.init, &cfg.em)
                    .unwrap();
            let pick = |c: &CandidateModelSet, crit| select_model(c, crit, 2, data.n()).unwrap().0.k;
            total += 1;
            if pick(&hac, Criterion::Bic) == k {
                bic_hits += 1;
            }
            if pick(&mul, Criterion::Llh) == 15 {
                llh_mul_kmax += 1;
            }
            if pick(&hac, Criterion::Llh) == 15 {
                llh_hac_kmax += 1;
            }
        }
    }
    let bic_rate = bic_hits as f64 / total as f64;
    let llh_rate = llh_mul_kmax as f64 / total as f64;
    Outcome::new(
        bic_rate >= 0.7 && llh_rate >= 0.8,
        format!(
            "BIC on em-hac picks true K in {bic_hits}/{total} (min 70%); \
             LLH on mul-em picks K_max in {llh_mul_kmax}/{total} (min 80%); \
             LLH on em-hac picks K_max in {llh_hac_kmax}/{total}"
        ),
    )
}

/// Expected complete-data log-likelihood of `(weights, params)` under `resp`.
fn expected_complete_ll(
    data: &CountDataset,
    resp: &ResponsibilityMatrix,
    weights: &[f64],
    params: &[Vec<f64>],
) -> f64 {
    let mut q = 0.0;
    for (i, row) in data.rows().iter().enumerate() {
        let dense = row.to_dense();
        for (k, mu) in params.iter().enumerate() {
            let r = resp.get(i, k);
            let mut inner = weights[k].ln();
            for (x, p) in dense.iter().zip(mu) {
                inner += *x as f64 * p.ln();
            }
            q += r * inner;
        }
    }
    q
}

fn m_step_optimality() -> Outcome {
    const FLOOR: f64 = 1e-10;
    let mut rng = rng_from_seed(0x357E);
    let mut worst_central: f64 = 0.0;
    let mut worst_one_sided: f64 = f64::NEG_INFINITY;
    let mut at_floor = 0;
    for instance in 0..20 {
        let d = rng.random_range(2..=5);
        let k = rng.random_range(1..=3);
        let n = rng.random_range(5..=30);
        let rows: Vec<Vec<u32>> = (0..n)
            .map(|_| {
                let mut r: Vec<u32> = (0..d)
                    .map(|_| if rng.random_bool(0.4) { 0 } else { rng.random_range(1..=10) })
                    .collect();
                r[0] += 1;
                if instance % 4 == 0 {
                    // An unused term pins that coordinate to the floor.
                    r[d - 1] = 0;
                }
                r
            })
            .collect();
        let data = CountDataset::from_dense(&rows).unwrap();
        let resp_rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|x| x / s).collect()
            })
            .collect();
        let resp = ResponsibilityMatrix::from_rows(&resp_rows).unwrap();
        let model = m_step(&data, &resp, FLOOR, &mut rng_from_seed(1)).unwrap();
        let weights = model.weights().to_vec();
        let params: Vec<Vec<f64>> = model.components().iter().map(|c| c.as_slice().to_vec()).collect();

        // Directional derivatives along e_a - e_b within each simplex block.
        // Block 0 is the weights, block k + 1 is component k.
        let blocks = k + 1;
        for block in 0..blocks {
            let len = if block == 0 { k } else { d };
            for a in 0..len {
                for b in 0..len {
                    if a == b {
                        continue;
                    }
                    let eval = |h: f64| {
                        let mut w = weights.clone();
                        let mut p = params.clone();
                        let v = if block == 0 { &mut w } else { &mut p[block - 1] };
                        v[a] += h;
                        v[b] -= h;
                        expected_complete_ll(&data, &resp, &w, &p)
                    };
                    let get = |i: usize| if block == 0 { weights[i] } else { params[block - 1][i] };
                    let (va, vb) = (get(a), get(b));
                    if va > 2.0 * FLOOR && vb > 2.0 * FLOOR {
                        if a > b {
                            continue;
                        }
                        let h = 1e-5 * va.min(vb);
                        let g = (eval(h) - eval(-h)) / (2.0 * h);
                        worst_central = worst_central.max(g.abs());
                    } else if va <= 2.0 * FLOOR && vb > 2.0 * FLOOR {
                        // Only moving mass onto the floored coordinate is feasible.
                        at_floor += 1;
                        let h = 1e-9;
                        let g = (eval(h) - eval(0.0)) / h;
                        worst_one_sided = worst_one_sided.max(g);
                    }
                }
            }
        }
    }
    let one_sided_ok = worst_one_sided <= 1e-4;
    Outcome::new(
        worst_central <= 1e-4 && one_sided_ok,
        format!(
            "20 instances, max |interior gradient| {worst_central:.2e}, \
             max feasible ascent at {at_floor} floored directions {:.2e} (limit 1e-4)",
            if at_floor == 0 { 0.0 } else { worst_one_sided }
        ),
    )
}

fn coefficient_invariance() -> Outcome {
    let specs = [
        SynthSpec::new(3, 10, 400, Separation::Ws, 0xC0EF),
        SynthSpec::new(5, 8, 400, Separation::Nws, 0xC0F0),
        SynthSpec::new(4, 20, 300, Separation::Ws, 0xC0F1),
    ];
    let mut compared = 0;
    let mut changed = Vec::new();
    for spec in &specs {
        let data = generate(spec).unwrap().dataset;
        for generation in GenerationMethod::ALL {
            let mut picks: HashMap<bool, Vec<usize>> = HashMap::new();
            for flag in [false, true] {
                let mut cfg = PipelineConfig::default().with_seed(spec.seed);
                cfg.em.include_coefficient = flag;
                let cands =
                    generate_candidates(generation, &data, 10, &cfg.init, &cfg.em).unwrap();
                let ks = Criterion::ALL
                    .iter()
                    .map(|&c| select_model(&cands, c, 2, data.n()).unwrap().0.k)
                    .collect();
                picks.insert(flag, ks);
            }
            for (i, c) in Criterion::ALL.iter().enumerate() {
                compared += 1;
                if picks[&false][i] != picks[&true][i] {
                    changed.push(format!("{}/{}/K={}", generation.name(), c.name(), spec.k));
                }
            }
        }
    }
    Outcome::new(
        changed.is_empty(),
        format!(
            "{compared} selections compared, {} changed{}",
            changed.len(),
            if changed.is_empty() { String::new() } else { format!(": {}", changed.join(", ")) }
        ),
    )
}

fn l_method_breakpoint() -> Outcome {
    let mut rng = rng_from_seed(0x1E7);
    let mut exact = 0;
    let mut misses = Vec::new();
    for _ in 0..50 {
        let len = rng.random_range(8..=30);
        let knee = rng.random_range(1..=len - 2);
        let scale = 10f64.powf(rng.random_range(-2.0..4.0));
        let steep = -rng.random_range(5.0..50.0) * scale;
        let shallow = steep * rng.random_range(-0.3..0.3);
        let offset = rng.random_range(-1000.0..1000.0) * scale;
        let points: Vec<(usize, f64)> = (0..len)
            .map(|i| {
                let x = i as f64 - knee as f64;
                let y = if i <= knee { steep * x } else { shallow * x };
                (i + 1, offset + y)
            })
            .collect();
        let curve = CriterionCurve::new(Criterion::LMethod, points).unwrap();
        let got = l_method(&curve).unwrap();
        if got == knee + 1 {
            exact += 1;
        } else {
            misses.push(format!("{got}!={}", knee + 1));
        }
    }
    Outcome::new(
        exact == 50,
        format!("{exact} of 50 breakpoints recovered exactly {}", misses.join(" ")),
    )
}

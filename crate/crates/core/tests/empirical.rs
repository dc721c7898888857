//! Seeded empirical checks on synthetic data. Rates that are recorded rather
//! than asserted are printed; run with `--nocapture` to see them.

use mmclust::eval::DatasetEntry;
use mmclust::init::{init_rnd_em, init_sem, init_sm_em};
use mmclust::modelgen::{generate_candidates, mul_em};
use mmclust::rng::sub_seed;
use mmclust::synth::{generate, SyntheticData};
use mmclust::*;

fn ws(k: usize, d: usize, n: usize, seed: u64) -> SyntheticData {
    generate(&SynthSpec::new(k, d, n, Separation::Ws, seed)).unwrap()
}

#[test]
fn more_random_trials_never_lower_the_best_likelihood() {
    let data = ws(3, 10, 300, 11).dataset;
    let em = EmConfig::default();
    for seed in 0..5 {
        let one = init_rnd_em(&data, 3, 1, seed, &em).unwrap();
        let many = init_rnd_em(&data, 3, 100, seed, &em).unwrap();
        assert!(many.log_likelihood >= one.log_likelihood);
        assert_eq!(many.trial_log_likelihoods[0], one.log_likelihood);
    }
}

#[test]
fn short_em_runs_beat_random_trials() {
    let em = EmConfig::default();
    let mut wins = 0;
    for seed in 0..10 {
        let data = ws(3, 10, 500, sub_seed(0x5E, seed)).dataset;
        let sm = init_sm_em(&data, 3, 5, 50, seed, &em).unwrap();
        let rnd = init_rnd_em(&data, 3, 100, seed, &em).unwrap();
        if sm.log_likelihood >= rnd.log_likelihood {
            wins += 1;
        }
    }
    println!("smEM >= rndEM(100) on {wins} of 10 datasets");
    assert!(wins >= 8, "smEM beat rndEM on only {wins} of 10 datasets");
}

#[test]
fn stochastic_em_likelihood_is_not_monotone() {
    let data = ws(3, 10, 300, 5).dataset;
    let em = EmConfig::default();
    let non_monotone = (0..10)
        .filter(|&seed| {
            let out = init_sem(&data, 3, 100, seed, &em).unwrap();
            assert_eq!(out.trace.len(), 101);
            out.trace.windows(2).any(|w| w[1] < w[0])
        })
        .count();
    println!("SEM trace decreased somewhere in {non_monotone} of 10 runs");
    assert!(non_monotone >= 1);
}

#[test]
fn em_at_true_k_recovers_well_separated_clusters() {
    let mut total = 0.0;
    for seed in 0..10 {
        let s = ws(3, 10, 1000, sub_seed(0x4EC, seed));
        let init = InitConfig::new(InitStrategy::SmEm, seed);
        let em = EmConfig::default().with_seed(seed);
        let start = initialize(&s.dataset, 3, &init, &em).unwrap();
        let fit = em_fit(&s.dataset, &start.model, &em).unwrap();
        total += ari(s.dataset.labels().unwrap(), &fit.assignments()).unwrap();
    }
    let mean = total / 10.0;
    println!("mean ARI at true K: {mean:.3}");
    assert!(mean >= 0.9, "mean ARI {mean}");
}

#[test]
fn sampled_labels_and_terms_follow_the_generating_model() {
    for seed in 0..10 {
        let n = 5000;
        let s = ws(4, 8, n, sub_seed(0x11, seed));
        let labels = s.dataset.labels().unwrap();
        let model = &s.generating.model;
        for k in 0..4 {
            let freq = labels.iter().filter(|&&l| l == k + 1).count() as f64 / n as f64;
            assert!(
                (freq - model.weights()[k]).abs() <= 3.0 / (n as f64).sqrt(),
                "seed {seed} cluster {k}: {freq} vs {}",
                model.weights()[k]
            );
            let mut terms = vec![0.0; 8];
            for (row, _) in s.dataset.rows().iter().zip(labels).filter(|(_, &l)| l == k + 1) {
                for &(d, c) in row.nonzeros() {
                    terms[d as usize] += c as f64;
                }
            }
            let total: f64 = terms.iter().sum();
            for (t, mu) in terms.iter().zip(model.components()[k].as_slice()) {
                assert!((t / total - mu).abs() <= 0.02, "seed {seed} cluster {k}");
            }
        }
    }
}

#[test]
fn selection_rates_on_well_separated_data() {
    let mut bic_hits = 0;
    let mut lm_hits = 0;
    for seed in 0..20 {
        let data = ws(3, 10, 1000, sub_seed(0xB1C, seed)).dataset;
        let cfg = PipelineConfig::default().with_seed(seed);
        let cands =
            generate_candidates(GenerationMethod::EmHac, &data, 15, &cfg.init, &cfg.em).unwrap();
        let pick = |c| select_model(&cands, c, 2, data.n()).unwrap().0.k;
        bic_hits += usize::from(pick(Criterion::Bic) == 3);
        lm_hits += usize::from(pick(Criterion::LMethod) == 3);
    }
    println!("em-hac, K=3: BIC correct {bic_hits}/20, L-method correct {lm_hits}/20");
    assert!(bic_hits > 10, "BIC correct on only {bic_hits} of 20");
    assert!(lm_hits > 10, "L-method correct on only {lm_hits} of 20");
}

#[test]
fn independent_fits_likelihood_by_k() {
    let data = ws(3, 10, 500, 21).dataset;
    let init = InitConfig::new(InitStrategy::SmEm, 2);
    let cands = mul_em(&data, 8, &init, &EmConfig::default()).unwrap();
    let lls: Vec<f64> = cands.entries.values().map(|f| f.log_likelihood).collect();
    let drops = lls.windows(2).filter(|w| w[1] < w[0]).count();
    println!("mul-em log-likelihood decreased between consecutive K {drops} times: {lls:.1?}");
    assert!(lls.iter().all(|l| l.is_finite()));

    let per_k: f64 = cands.entries.values().map(|f| f.elapsed).sum();
    assert!(cands.total_elapsed >= per_k);
    assert!(cands.total_elapsed <= per_k * 1.5 + 0.05, "{} vs {per_k}", cands.total_elapsed);
}

#[test]
fn init_comparison_table() {
    let methods = InitStrategy::ALL
        .iter()
        .map(|&init| MethodTuple {
            init,
            generation: GenerationMethod::IntEm,
            selection: Criterion::Bic,
        })
        .collect();
    let grid = BenchmarkGrid {
        datasets: vec![DatasetEntry {
            name: "nws-k3".into(),
            synthetic: Some(SynthSpec::new(3, 10, 300, Separation::Nws, 8)),
            replicates: Some(2),
            path: None,
            labels: None,
        }],
        methods,
        k_min: 2,
        k_max: 5,
        em: EmConfig::default(),
        init_trials: None,
        init_iterations: None,
    };
    let a = run_benchmark(&grid, 2, 3).unwrap();
    let b = run_benchmark(&grid, 2, 3).unwrap();
    assert_eq!(a.records.len(), 5 * 2 * 2);
    for m in &a.methods {
        let s = &m.summary;
        println!(
            "{:10} ARI {:.3} ± {:.3}  time {:.3}s",
            m.method.init.name(),
            s.mean_ari.unwrap(),
            s.std_ari.unwrap(),
            s.mean_time
        );
        assert!(s.mean_time >= 0.0);
    }
    // Everything except wall-clock time is reproducible.
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.ari, x.selected_k, x.seed), (y.ari, y.selected_k, y.seed));
    }
}

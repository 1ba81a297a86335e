//! Acceptance suite: runs every acceptance criterion sequentially and prints
//! one pass/fail line per criterion. Run with
//!
//! ```text
//! cargo test -p motion-words-cli --test acceptance -- --nocapture
//! ```
//!
//! The DP metrics are checked against brute-force enumerators over all
//! monotone alignment paths / edit scripts (module `oracle` below), built
//! independently of the dynamic programs they verify.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use motion_words::codebook::PAIR_ORDER_LEXICOGRAPHIC;
use motion_words::eval::SynthCorpusConfig;
use motion_words::featurize::PatchFeature;
use motion_words::index::autocorrelation;
use motion_words::{
    align, build_histogram, build_index, evaluate, gen_synth_corpus, is_periodic, shortlist,
    shortlist_indices, shortlist_size, train_codebook, AlignParams, Backend, Codebook,
    EngineConfig, EvalConfig, FeatureMeta, MotionIndex, PeriodicityConfig, ReservoirScope,
    TokenSequence, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force reference implementations: exhaustive enumeration of monotone
/// alignment paths / edit scripts, and subsequence enumeration for LCSS.
/// No dynamic programming, no memoisation.
mod oracle {
    fn indicator(a: u32, b: u32) -> f64 {
        if a == b {
            0.0
        } else {
            1.0
        }
    }

    /// Minimum cost over all monotone paths from (1,1) to (m,n) where every
    /// visited cell (i,j) charges the indicator mismatch of q[i-1], s[j-1].
    pub fn dtw(q: &[u32], s: &[u32]) -> f64 {
        fn walk(q: &[u32], s: &[u32], i: usize, j: usize, acc: f64, best: &mut f64) {
            let acc = acc + indicator(q[i - 1], s[j - 1]);
            if i == q.len() && j == s.len() {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            if i < q.len() && j < s.len() {
                walk(q, s, i + 1, j + 1, acc, best);
            }
            if i < q.len() {
                walk(q, s, i + 1, j, acc, best);
            }
            if j < s.len() {
                walk(q, s, i, j + 1, acc, best);
            }
        }
        let mut best = f64::INFINITY;
        walk(q, s, 1, 1, 0.0, &mut best);
        best
    }

    /// TWED path enumeration. Sequences are 0-padded at index 0 with
    /// timestamp 0; the infinite first row/column force every path to open
    /// with the (0,0) -> (1,1) match move.
    pub fn twed(q: &[u32], s: &[u32], nu: f64, lambda: f64) -> f64 {
        let pad = |seq: &[u32], i: usize| if i == 0 { 0 } else { seq[i - 1] };
        let tp = |i: usize, j: usize| nu * (i as f64 - j as f64).abs();
        #[allow(clippy::too_many_arguments)]
        fn walk(
            q: &[u32],
            s: &[u32],
            i: usize,
            j: usize,
            acc: f64,
            nu: f64,
            lambda: f64,
            best: &mut f64,
        ) {
            let pad = |seq: &[u32], i: usize| if i == 0 { 0 } else { seq[i - 1] };
            let tp = |i: usize, j: usize| nu * (i as f64 - j as f64).abs();
            if i == q.len() && j == s.len() {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            if i < q.len() && j < s.len() {
                let cost = indicator(pad(q, i + 1), pad(s, j + 1))
                    + indicator(pad(q, i), pad(s, j))
                    + tp(i + 1, j + 1);
                walk(q, s, i + 1, j + 1, acc + cost, nu, lambda, best);
            }
            if i < q.len() {
                let cost = indicator(pad(q, i + 1), pad(s, j)) + tp(i + 1, j) + lambda;
                walk(q, s, i + 1, j, acc + cost, nu, lambda, best);
            }
            if j < s.len() {
                let cost = indicator(pad(q, i), pad(s, j + 1)) + tp(i, j + 1) + lambda;
                walk(q, s, i, j + 1, acc + cost, nu, lambda, best);
            }
        }
        let mut best = f64::INFINITY;
        // Opening move into (1,1).
        let first = indicator(pad(q, 1), pad(s, 1)) + indicator(pad(q, 0), pad(s, 0)) + tp(1, 1);
        walk(q, s, 1, 1, first, nu, lambda, &mut best);
        best
    }

    /// ERP edit scripts: substitution |a-b|, gaps beta * |x - g|.
    pub fn erp(q: &[u32], s: &[u32], g: f64, beta: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn walk(
            q: &[u32],
            s: &[u32],
            i: usize,
            j: usize,
            acc: f64,
            g: f64,
            beta: f64,
            best: &mut f64,
        ) {
            if i == q.len() && j == s.len() {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            if i < q.len() && j < s.len() {
                let cost = (f64::from(q[i]) - f64::from(s[j])).abs();
                walk(q, s, i + 1, j + 1, acc + cost, g, beta, best);
            }
            if i < q.len() {
                walk(q, s, i + 1, j, acc + beta * (f64::from(q[i]) - g).abs(), g, beta, best);
            }
            if j < s.len() {
                walk(q, s, i, j + 1, acc + beta * (f64::from(s[j]) - g).abs(), g, beta, best);
            }
        }
        let mut best = f64::INFINITY;
        walk(q, s, 0, 0, 0.0, g, beta, &mut best);
        best
    }

    /// EDR edit scripts: match/substitute under the epsilon tolerance,
    /// insertions and deletions cost 1.
    pub fn edr(q: &[u32], s: &[u32], eps: f64) -> usize {
        fn walk(q: &[u32], s: &[u32], i: usize, j: usize, acc: usize, eps: f64, best: &mut usize) {
            if i == q.len() && j == s.len() {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            if i < q.len() && j < s.len() {
                let cost = usize::from((f64::from(q[i]) - f64::from(s[j])).abs() > eps);
                walk(q, s, i + 1, j + 1, acc + cost, eps, best);
            }
            if i < q.len() {
                walk(q, s, i + 1, j, acc + 1, eps, best);
            }
            if j < s.len() {
                walk(q, s, i, j + 1, acc + 1, eps, best);
            }
        }
        let mut best = usize::MAX;
        walk(q, s, 0, 0, 0, eps, &mut best);
        best
    }

    /// LCSS by enumerating every subsequence of q and testing whether it
    /// embeds in s under the epsilon tolerance.
    pub fn lcss(q: &[u32], s: &[u32], eps: f64) -> usize {
        assert!(q.len() <= 16, "bitmask enumeration limit");
        let embeds = |sub: &[u32]| -> bool {
            let mut it = s.iter();
            'outer: for &x in sub {
                for &y in it.by_ref() {
                    if (f64::from(x) - f64::from(y)).abs() <= eps {
                        continue 'outer;
                    }
                }
                return false;
            }
            true
        };
        let mut best = 0;
        for mask in 0u32..(1 << q.len()) {
            let len = mask.count_ones() as usize;
            if len <= best {
                continue;
            }
            let sub: Vec<u32> = (0..q.len()).filter(|b| mask >> b & 1 == 1).map(|b| q[b]).collect();
            if embeds(&sub) {
                best = len;
            }
        }
        best
    }
}

fn all_sequences(alphabet: u32, lengths: std::ops::RangeInclusive<usize>) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for len in lengths {
        let mut level: Vec<Vec<u32>> = vec![Vec::new()];
        for _ in 0..len {
            let mut next = Vec::with_capacity(level.len() * alphabet as usize);
            for seq in &level {
                for sym in 0..alphabet {
                    let mut s = seq.clone();
                    s.push(sym);
                    next.push(s);
                }
            }
            level = next;
        }
        out.extend(level);
    }
    out
}

fn check_pair_against_oracles(q: &[u32], s: &[u32], params: &AlignParams) {
    let twed_got = align::twed(q, s, params).unwrap().raw_distance;
    let twed_want = oracle::twed(q, s, params.twed_nu, params.twed_lambda);
    assert!(
        (twed_got - twed_want).abs() <= 1e-9,
        "TWED {q:?} vs {s:?}: dp {twed_got} oracle {twed_want}"
    );

    let erp_got = align::erp(q, s, params).unwrap().raw_distance;
    let erp_want = oracle::erp(q, s, params.erp_gap, params.erp_beta);
    assert!(
        (erp_got - erp_want).abs() <= 1e-9,
        "ERP {q:?} vs {s:?}: dp {erp_got} oracle {erp_want}"
    );

    let edr_got = align::edr(q, s, params).unwrap().raw_distance;
    let edr_want = oracle::edr(q, s, params.edr_epsilon) as f64;
    assert_eq!(edr_got, edr_want, "EDR {q:?} vs {s:?}");

    let lcss_got = align::lcss(q, s, params).unwrap().raw_distance;
    let lcss_want = oracle::lcss(q, s, params.lcss_epsilon) as f64;
    assert_eq!(lcss_got, lcss_want, "LCSS {q:?} vs {s:?}");

    let dtw_got = align::dtw(q, s).unwrap();
    let dtw_want = oracle::dtw(q, s);
    assert_eq!(dtw_got, dtw_want, "DTW {q:?} vs {s:?}");
}

fn criterion_1_dp_oracle_equivalence() -> String {
    let params = AlignParams::default();
    let mut pairs = 0usize;

    // Exhaustive over all ordered pairs of sequences with length <= 4.
    let short = all_sequences(3, 1..=4);
    for q in &short {
        for s in &short {
            check_pair_against_oracles(q, s, &params);
            pairs += 1;
        }
    }

    // Every length-5/6 sequence against seeded partners of any length <= 6.
    let long = all_sequences(3, 5..=6);
    let everything = all_sequences(3, 1..=6);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for q in &long {
        for _ in 0..3 {
            let s = &everything[rng.random_range(0..everything.len())];
            check_pair_against_oracles(q, s, &params);
            pairs += 1;
        }
    }
    format!("{pairs} pairs, all five metrics match their enumerators")
}

fn criterion_2_relative_two_stage_accuracy() -> String {
    let corpus = gen_synth_corpus(&SynthCorpusConfig {
        n_classes: 10,
        per_class: 20,
        template_len: 40,
        k: 512,
        substitution_rate: 0.10,
        insertion_rate: 0.05,
        deletion_rate: 0.05,
        tempo_jitter: 0.0,
        alphabet_overlap: 0.2,
        rng_seed: 42,
    })
    .unwrap();
    let cfg = EngineConfig::default();
    let eval_cfg = EvalConfig::default();
    let two_stage = evaluate(&corpus, &cfg, &eval_cfg, Backend::TwoStage).unwrap();
    let brute = evaluate(&corpus, &cfg, &eval_cfg, Backend::BruteForce).unwrap();
    assert!(
        two_stage.mean_score >= 0.95 * brute.mean_score,
        "two-stage mean {} below 0.95 * brute-force mean {}",
        two_stage.mean_score,
        brute.mean_score
    );
    format!(
        "two-stage mean {:.4} vs brute-force {:.4} (ratio {:.3})",
        two_stage.mean_score,
        brute.mean_score,
        two_stage.mean_score / brute.mean_score
    )
}

fn cluster_patches(
    rng: &mut ChaCha8Rng,
    n_clusters: usize,
    per_cluster: usize,
    dim: usize,
) -> Vec<PatchFeature> {
    let gauss = |rng: &mut ChaCha8Rng| -> f64 {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let centers: Vec<Vec<f64>> = (0..n_clusters)
        .map(|_| (0..dim).map(|_| rng.random::<f64>() * 10.0).collect())
        .collect();
    let mut patches = Vec::with_capacity(n_clusters * per_cluster);
    for (c, center) in centers.iter().enumerate() {
        for i in 0..per_cluster {
            patches.push(PatchFeature {
                values: center.iter().map(|v| v + 0.1 * gauss(rng)).collect(),
                patch_index: c * per_cluster + i,
                patch_len: dim,
            });
        }
    }
    patches
}

fn synth_meta(dim: usize) -> FeatureMeta {
    FeatureMeta {
        patch_len: dim,
        stride: dim,
        scale_norm: false,
        joint_count: 2,
        pair_order: PAIR_ORDER_LEXICOGRAPHIC.to_string(),
    }
}

fn criterion_3_codebook_health() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dim = 16;
    let patches = cluster_patches(&mut rng, 128, 50, dim);
    let tcfg = TrainConfig {
        epochs: 10,
        warmup_epochs: 0,
        batch_size: 256,
        seed: 9,
        revival: true,
        reservoir: ReservoirScope::FinalBatch,
    };
    let (_, history) = train_codebook(&patches, 64, 0.5, 1e-5, synth_meta(dim), &tcfg).unwrap();
    let first = history.first().unwrap();
    let last = history.last().unwrap();
    assert!(
        last.usage_pct > 80.0,
        "final-epoch usage {}% not above 80%",
        last.usage_pct
    );
    assert!(
        last.quantization_mse <= first.quantization_mse,
        "final MSE {} above first-epoch MSE {}",
        last.quantization_mse,
        first.quantization_mse
    );
    format!(
        "usage {:.1}%, MSE {:.4} -> {:.4} over 10 epochs",
        last.usage_pct, first.quantization_mse, last.quantization_mse
    )
}

fn criterion_4_ema_arithmetic() -> String {
    let patch = |values: &[f64]| PatchFeature {
        values: values.to_vec(),
        patch_index: 0,
        patch_len: values.len(),
    };
    let hand_built = |codes: Vec<Vec<f64>>, counts: Vec<f64>, sums: Vec<Vec<f64>>| {
        let dim = codes[0].len();
        let k = codes.len();
        Codebook {
            codes,
            ema_counts: counts,
            ema_sums: sums,
            epoch_use: vec![0; k],
            alpha: 0.5,
            epsilon: 1e-5,
            feature_meta: synth_meta(dim),
        }
    };

    // n_k recurrence: alpha 0.5, n=0, 4 assignments -> exactly 2.0.
    let mut cb = hand_built(vec![vec![0.0, 0.0]], vec![0.0], vec![vec![0.0, 0.0]]);
    let batch = vec![patch(&[1.0, 1.0]); 4];
    cb.train_epoch(&[&batch], false, None).unwrap();
    assert_eq!(cb.ema_counts[0], 2.0);

    // Warm-up leaves the codebook bitwise untouched.
    let mut cb = hand_built(
        vec![vec![0.25, 0.5], vec![3.0, -1.0]],
        vec![1.0, 1.0],
        vec![vec![0.25, 0.5], vec![3.0, -1.0]],
    );
    let before = cb.clone();
    let batch = vec![patch(&[2.0, 2.0]), patch(&[0.1, 0.1])];
    cb.train_epoch(&[&batch], true, None).unwrap();
    assert_eq!(cb.codes, before.codes);
    assert_eq!(cb.ema_counts, before.ema_counts);
    assert_eq!(cb.ema_sums, before.ema_sums);

    // Single code, zero prior state: c_k converges to the batch value.
    let p = [1.5, -2.0, 0.25];
    let mut cb = hand_built(vec![vec![0.0; 3]], vec![0.0], vec![vec![0.0; 3]]);
    let batch = vec![patch(&p); 4];
    cb.train_epoch(&[&batch], false, None).unwrap();
    for (c, want) in cb.codes[0].iter().zip(&p) {
        assert!((c - want).abs() < 1e-9, "{c} vs {want}");
    }
    "n_k=2.0 exact, warm-up no-op bitwise, single-code mean within 1e-9".to_string()
}

fn random_token_corpus(rng: &mut ChaCha8Rng, n: usize, k: usize, len: usize) -> Vec<TokenSequence> {
    (0..n)
        .map(|i| TokenSequence {
            id: format!("s{i:05}"),
            label: None,
            words: (0..len).map(|_| rng.random_range(0..k as u32)).collect(),
        })
        .collect()
}

fn criterion_5_stage1_correctness_and_scaling() -> String {
    // Correctness: 200 seeded corpora, shortlist equals a full sorted scan.
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let k = 8;
    for corpus_no in 0..200 {
        let n = rng.random_range(1..=500);
        let tokens: Vec<TokenSequence> = (0..n)
            .map(|i| {
                let len = rng.random_range(1..12);
                TokenSequence {
                    id: format!("s{i:04}"),
                    label: None,
                    words: (0..len).map(|_| rng.random_range(0..k as u32)).collect(),
                }
            })
            .collect();
        let idx = build_index(&tokens, k, &PeriodicityConfig::default()).unwrap();
        let q = TokenSequence {
            id: "q".into(),
            label: None,
            words: (0..rng.random_range(1..10))
                .map(|_| rng.random_range(0..k as u32))
                .collect(),
        };
        let q_hist = build_histogram(&q, k).unwrap();
        let got = shortlist(&q_hist, &idx).unwrap();

        let mut want: Vec<(String, f64)> = idx
            .entries
            .iter()
            .map(|e| {
                let mut dot = 0.0;
                for bin in 0..k {
                    dot += q_hist.bins[bin] * e.hist.bins[bin];
                }
                (e.id.clone(), dot.clamp(0.0, 1.0))
            })
            .collect();
        want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        want.truncate(shortlist_size(n));
        assert_eq!(got, want, "corpus {corpus_no} (N={n})");
    }

    // Scaling: per-query Stage-1 time, N=10,000 vs N=1,000 at fixed K.
    // Both sides use the same fixed shortlist length so the measurement
    // isolates the O(N*K) scan rather than the top-L sort.
    let k = 32;
    let limit = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(56);
    let small = build_index(
        &random_token_corpus(&mut rng, 1_000, k, 16),
        k,
        &PeriodicityConfig::default(),
    )
    .unwrap();
    let large = build_index(
        &random_token_corpus(&mut rng, 10_000, k, 16),
        k,
        &PeriodicityConfig::default(),
    )
    .unwrap();
    let queries: Vec<_> = (0..16)
        .map(|i| {
            let words: Vec<u32> = (0..16).map(|_| rng.random_range(0..k as u32)).collect();
            build_histogram(
                &TokenSequence {
                    id: format!("q{i}"),
                    label: None,
                    words,
                },
                k,
            )
            .unwrap()
        })
        .collect();
    let time_per_query = |idx: &MotionIndex, reps: usize| -> f64 {
        for q in queries.iter().take(4) {
            std::hint::black_box(shortlist_indices(q, idx, limit).unwrap());
        }
        // Best of three trials, the usual guard against scheduler noise.
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let start = Instant::now();
            for r in 0..reps {
                let q = &queries[r % queries.len()];
                std::hint::black_box(shortlist_indices(q, idx, limit).unwrap());
            }
            best = best.min(start.elapsed().as_secs_f64() / reps as f64);
        }
        best
    };
    let t_small = time_per_query(&small, 3000);
    let t_large = time_per_query(&large, 300);
    let ratio = t_large / t_small;
    assert!(
        (7.0..=13.0).contains(&ratio),
        "time ratio {ratio:.2} outside [7, 13] ({t_small:.2e}s vs {t_large:.2e}s)"
    );
    format!(
        "200 corpora exact; per-query {:.3}ms -> {:.3}ms, ratio {:.1}",
        t_small * 1e3,
        t_large * 1e3,
        ratio
    )
}

fn criterion_6_shortlist_formula() -> String {
    assert_eq!(shortlist_size(10), 10);
    assert_eq!(shortlist_size(200), 200);
    assert_eq!(shortlist_size(1000), 500);
    "L(10)=10, L(200)=200, L(1000)=500".to_string()
}

fn criterion_7_periodicity() -> String {
    let cfg = PeriodicityConfig::default();

    let alternating: Vec<u32> = (0..16).map(|i| (i % 2) as u32).collect();
    let ac2 = autocorrelation(&alternating, 2).unwrap();
    assert!((ac2 - 0.875).abs() < 1e-12, "AC(2) = {ac2}");
    assert!(ac2 > cfg.theta);
    assert!(is_periodic(&alternating, &cfg));

    assert!(!is_periodic(&[7; 32], &cfg));

    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let mut non_periodic = 0;
    for _ in 0..100 {
        let words: Vec<u32> = (0..64).map(|_| rng.random_range(0..512)).collect();
        if !is_periodic(&words, &cfg) {
            non_periodic += 1;
        }
    }
    assert!(
        non_periodic >= 99,
        "only {non_periodic}/100 random sequences classified non-periodic"
    );
    format!("AC(2)=0.875, constant rejected, {non_periodic}/100 random non-periodic")
}

fn criterion_8_eval_self_consistency() -> String {
    use motion_words::eval::EvalProtocol;
    // Noisy corpus with heavy alphabet overlap so ranks actually spread.
    let corpus = gen_synth_corpus(&SynthCorpusConfig {
        n_classes: 8,
        per_class: 6,
        template_len: 14,
        k: 64,
        substitution_rate: 0.15,
        insertion_rate: 0.10,
        deletion_rate: 0.05,
        tempo_jitter: 0.10,
        alphabet_overlap: 0.6,
        rng_seed: 31,
    })
    .unwrap();
    let cfg = EngineConfig::default();
    let mut checked = 0;
    for protocol in [
        EvalProtocol::LeaveOneOut,
        EvalProtocol::LeaveKOut { refs_per_class: 2 },
    ] {
        for backend in [Backend::TwoStage, Backend::BruteForce] {
            let eval_cfg = EvalConfig {
                protocol,
                ..EvalConfig::default()
            };
            let report = evaluate(&corpus, &cfg, &eval_cfg, backend).unwrap();
            let h = report.rank_histogram;
            assert_eq!(h.rank1 + h.rank2 + h.rank3 + h.beyond, report.n_queries);
            let derived = (h.rank1 as f64 * 1.0 + h.rank2 as f64 * 0.5 + h.rank3 as f64 * 0.25)
                / report.n_queries as f64;
            assert_eq!(report.mean_score, derived, "mean mismatch for {backend:?}");
            let match_derived =
                100.0 * (h.rank1 + h.rank2 + h.rank3) as f64 / report.n_queries as f64;
            assert_eq!(report.match_rate_pct, match_derived);
            checked += 1;
        }
    }
    // The decay weights themselves.
    use motion_words::eval::rank_score;
    assert_eq!(rank_score(Some(1)).unwrap(), 1.0);
    assert_eq!(rank_score(Some(2)).unwrap(), 0.5);
    assert_eq!(rank_score(Some(3)).unwrap(), 0.25);
    assert_eq!(rank_score(Some(4)).unwrap(), 0.0);
    assert_eq!(rank_score(None).unwrap(), 0.0);
    format!("{checked} protocol/backend runs internally consistent, decay weights 1/.5/.25/0")
}

fn criterion_9_metric_properties() -> String {
    let params = AlignParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let random_seq = |rng: &mut ChaCha8Rng| -> Vec<u32> {
        let len = rng.random_range(1..=10);
        (0..len).map(|_| rng.random_range(0..8)).collect()
    };

    for _ in 0..100 {
        let q = random_seq(&mut rng);
        assert_eq!(align::twed(&q, &q, &params).unwrap().raw_distance, 0.0);
        assert_eq!(align::erp(&q, &q, &params).unwrap().raw_distance, 0.0);
        assert_eq!(align::edr(&q, &q, &params).unwrap().raw_distance, 0.0);
        assert_eq!(align::dtw(&q, &q).unwrap(), 0.0);
        assert_eq!(align::lcss(&q, &q, &params).unwrap().similarity, 1.0);
    }

    for _ in 0..1000 {
        let q = random_seq(&mut rng);
        let s = random_seq(&mut rng);
        assert_eq!(
            align::twed(&q, &s, &params).unwrap().raw_distance,
            align::twed(&s, &q, &params).unwrap().raw_distance
        );
        assert_eq!(
            align::lcss(&q, &s, &params).unwrap().raw_distance,
            align::lcss(&s, &q, &params).unwrap().raw_distance
        );
        assert_eq!(
            align::edr(&q, &s, &params).unwrap().raw_distance,
            align::edr(&s, &q, &params).unwrap().raw_distance
        );
        assert_eq!(
            align::erp(&q, &s, &params).unwrap().raw_distance,
            align::erp(&s, &q, &params).unwrap().raw_distance
        );
        assert_eq!(align::dtw(&q, &s).unwrap(), align::dtw(&s, &q).unwrap());

        for score in [
            align::twed(&q, &s, &params).unwrap(),
            align::lcss(&q, &s, &params).unwrap(),
            align::edr(&q, &s, &params).unwrap(),
            align::erp(&q, &s, &params).unwrap(),
            align::ngram_sim(&q, &s, params.ngram_n),
        ] {
            assert!(
                (0.0..=1.0).contains(&score.similarity),
                "{:?} similarity {}",
                score.metric,
                score.similarity
            );
        }
        assert!(align::twed(&q, &s, &params).unwrap().similarity > 0.0);
        assert!(align::erp(&q, &s, &params).unwrap().similarity > 0.0);
    }

    let mut violations = 0;
    for _ in 0..1000 {
        let a = random_seq(&mut rng);
        let b = random_seq(&mut rng);
        let c = random_seq(&mut rng);
        let ac = align::erp(&a, &c, &params).unwrap().raw_distance;
        let ab = align::erp(&a, &b, &params).unwrap().raw_distance;
        let bc = align::erp(&b, &c, &params).unwrap().raw_distance;
        if ac > ab + bc + 1e-9 {
            violations += 1;
        }
    }
    assert_eq!(violations, 0, "{violations} ERP triangle violations");
    "symmetry, identity, bounds on 1000 pairs; 0/1000 ERP triangle violations".to_string()
}

fn run_pipeline(dir: &Path) {
    let steps: Vec<Vec<&str>> = vec![
        vec![
            "gen-synth", "--kind", "poses", "--classes", "3", "--per-class", "4", "--frames",
            "48", "--joints", "6", "--seed", "5", "--out", "poses.jsonl",
        ],
        vec![
            "train-codebook", "--input", "poses.jsonl", "--out", "cb.json", "--k", "24",
            "--epochs", "3", "--warmup-epochs", "1", "--batch-size", "16", "--seed", "5",
        ],
        vec![
            "tokenize", "--input", "poses.jsonl", "--codebook", "cb.json", "--out",
            "tokens.jsonl",
        ],
        vec![
            "build-index", "--input", "tokens.jsonl", "--codebook", "cb.json", "--out",
            "index.json",
        ],
        vec![
            "query", "--index", "index.json", "--queries", "tokens.jsonl", "--k", "3", "--out",
            "results.jsonl",
        ],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_mwords"))
            .args(&args)
            .current_dir(dir)
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "step {:?} failed: {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

fn criterion_10_determinism_and_persistence() -> String {
    // Two identically seeded end-to-end runs must agree byte for byte.
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path());
    run_pipeline(b.path());
    let artifacts = ["poses.jsonl", "cb.json", "tokens.jsonl", "index.json", "results.jsonl"];
    for name in artifacts {
        let bytes_a = std::fs::read(a.path().join(name)).unwrap();
        let bytes_b = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name} differs between seeded runs");
    }

    // load(save(x)) = x for the three persistent formats.
    let cb = Codebook::load(a.path().join("cb.json")).unwrap();
    let resaved = a.path().join("cb_resaved.json");
    cb.save(&resaved).unwrap();
    assert_eq!(Codebook::load(&resaved).unwrap(), cb);
    assert_eq!(
        std::fs::read(a.path().join("cb.json")).unwrap(),
        std::fs::read(&resaved).unwrap()
    );

    let idx = MotionIndex::load(a.path().join("index.json")).unwrap();
    let resaved = a.path().join("index_resaved.json");
    idx.save(&resaved).unwrap();
    let reloaded = MotionIndex::load(&resaved).unwrap();
    assert_eq!(reloaded.k, idx.k);
    assert_eq!(reloaded.entries, idx.entries);
    assert_eq!(
        std::fs::read(a.path().join("index.json")).unwrap(),
        std::fs::read(&resaved).unwrap()
    );

    let tokens = motion_words::codebook::read_token_jsonl(a.path().join("tokens.jsonl")).unwrap();
    let resaved = a.path().join("tokens_resaved.jsonl");
    motion_words::codebook::write_token_jsonl(&resaved, &tokens).unwrap();
    assert_eq!(
        motion_words::codebook::read_token_jsonl(&resaved).unwrap(),
        tokens
    );
    assert_eq!(
        std::fs::read(a.path().join("tokens.jsonl")).unwrap(),
        std::fs::read(&resaved).unwrap()
    );
    format!(
        "{} artifacts byte-identical across runs; all three formats round-trip",
        artifacts.len()
    )
}

type Criterion = fn() -> String;

#[test]
fn acceptance_suite() {
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1. DP-metric oracle equivalence", criterion_1_dp_oracle_equivalence),
        ("2. relative two-stage accuracy", criterion_2_relative_two_stage_accuracy),
        ("3. codebook health", criterion_3_codebook_health),
        ("4. EMA arithmetic", criterion_4_ema_arithmetic),
        ("5. stage-1 correctness and scaling", criterion_5_stage1_correctness_and_scaling),
        ("6. shortlist formula", criterion_6_shortlist_formula),
        ("7. periodicity detection", criterion_7_periodicity),
        ("8. evaluation self-consistency", criterion_8_eval_self_consistency),
        ("9. metric property suite", criterion_9_metric_properties),
        ("10. determinism and persistence", criterion_10_determinism_and_persistence),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        let start = Instant::now();
        match catch_unwind(AssertUnwindSafe(criterion)) {
            Ok(summary) => {
                println!("[PASS] {name}: {summary} ({:.1}s)", start.elapsed().as_secs_f64());
            }
            Err(payload) => {
                failed += 1;
                let message = payload
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| payload.downcast_ref::<&str>().copied())
                    .unwrap_or("<non-string panic>");
                println!("[FAIL] {name}: {message}");
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}

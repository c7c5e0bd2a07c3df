use attributor_core::engine::{rank_points, score_checkpoints, DataInf, DEFAULT_ALPHA};
use attributor_core::parallel::Parallelism;
use attributor_core::toy::oracle::{loo_oracle, spearman};
use attributor_core::toy::scenario::{disaster, finance, loo_fixture, ToyLab};
use attributor_core::toy::{positions, train, TokenizedCorpus, ToyModel, TrainConfig, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let vocab = Vocabulary::new(["a", "b", "c", "d", "e"]);
    let v = vocab.len();
    for _ in 0..5 {
        let mut model = ToyModel::zeros(v);
        for w in model.weights.iter_mut() {
            *w = rng.gen_range(-2.0..2.0);
        }
        let words: Vec<usize> = (0..rng.gen_range(1..8)).map(|_| rng.gen_range(0..v)).collect();
        let pos = positions(&vocab, &[3], &words, 3);
        let (_, grad) = model.loss_and_grad(&pos);
        let h = 1e-4;
        let mut max_err: f64 = 0.0;
        for (p, &g) in grad.iter().enumerate() {
            let mut plus = model.clone();
            plus.weights[p] += h;
            let mut minus = model.clone();
            minus.weights[p] -= h;
            let fd = (plus.loss(&pos) - minus.loss(&pos)) / (2.0 * h);
            max_err = max_err.max((fd - g).abs());
        }
        assert!(max_err < 1e-6, "max abs error {max_err:e}");
    }
}

#[test]
fn training_is_deterministic_and_checkpoints_every_epoch() {
    let s = disaster(3);
    let vocab = s.vocabulary();
    let cfg = TrainConfig { seed: 9, ..TrainConfig::default() };
    let a = train(&s.corpus, &vocab, cfg).unwrap();
    let b = train(&s.corpus, &vocab, cfg).unwrap();
    assert_eq!(a.checkpoints.len(), 3);
    let bits = |m: &ToyModel| m.weights.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a.final_model()), bits(b.final_model()));
    assert_eq!(a.permutations, b.permutations);
    let metas = a.checkpoint_metas();
    assert_eq!(metas.len(), 3);
    assert!(metas.iter().all(|m| m.learning_rate == cfg.learning_rate));
    assert_ne!(metas[0].shuffle_seed, metas[1].shuffle_seed);
    for pair in a.epoch_losses.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-6, "losses {:?}", a.epoch_losses);
    }
}

#[test]
fn restricted_test_gradient_is_additive() {
    let s = finance(1);
    let dir = tempfile::tempdir().unwrap();
    let lab = ToyLab::build(&s.corpus, s.vocabulary(), TrainConfig::default(), dir.path()).unwrap();
    let n_tokens = s.generated.split_whitespace().count();
    let all: Vec<usize> = (0..n_tokens).collect();
    let total = lab.provider.test_gradient(1, &s.prompt, &s.generated, &all).unwrap();
    let mut summed = vec![0.0; total.len()];
    for i in 0..n_tokens {
        let g = lab.provider.test_gradient(1, &s.prompt, &s.generated, &[i]).unwrap();
        for (a, b) in summed.iter_mut().zip(g) {
            *a += b;
        }
    }
    let err = total.iter().zip(&summed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-12);
    assert!(lab.provider.test_gradient(7, &s.prompt, &s.generated, &all).is_err());
}

#[test]
fn leave_one_out_agrees_with_scores() {
    let fx = loo_fixture(0);
    assert_eq!(fx.corpus.len(), 60);
    assert_eq!(fx.vocab.len(), 30);
    let cfg = TrainConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let lab = ToyLab::build(&fx.corpus, fx.vocab.clone(), cfg, dir.path()).unwrap();
    let n_tokens = fx.query.split_whitespace().count();
    let idx: Vec<usize> = (0..n_tokens).collect();
    let tgs = lab.test_gradients(&fx.prompt, &fx.query, &idx).unwrap();
    let scores = score_checkpoints(&DataInf, &lab.store, &tgs, DEFAULT_ALPHA, Parallelism::Auto).unwrap();

    let tc = TokenizedCorpus::new(&fx.corpus, &fx.vocab, cfg.window);
    let provider = &lab.provider;
    let delta = loo_oracle(
        &tc,
        fx.vocab.len(),
        cfg,
        |m| provider.test_loss(m, &fx.prompt, &fx.query, &idx).unwrap(),
        Parallelism::Auto,
    )
    .unwrap();

    let rho = spearman(&scores.aggregated, &delta);
    assert!(rho >= 0.75, "spearman {rho}");

    let argmax = (0..delta.len()).max_by(|&a, &b| delta[a].total_cmp(&delta[b])).unwrap();
    assert!(fx.duplicate_ids.contains(&argmax));
    let mut abs: Vec<f64> = delta.iter().map(|d| d.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let median = (abs[29] + abs[30]) / 2.0;
    assert!(delta[fx.stopword_id].abs() < median);

    let ranked = rank_points(&scores.aggregated, 5).unwrap();
    for &k in ranked.top.iter().chain(&ranked.bottom) {
        assert_eq!(scores.aggregated[k].signum(), delta[k].signum(), "example {k}");
    }
}

#[test]
fn planted_documents_rank_first() {
    for seed in 0..3 {
        for s in [disaster(seed), finance(seed)] {
            let dir = tempfile::tempdir().unwrap();
            let lab = ToyLab::build(&s.corpus, s.vocabulary(), TrainConfig::default(), dir.path()).unwrap();
            let tgs = lab.test_gradients(&s.prompt, s.query_text(), &s.query_indices).unwrap();
            let scores =
                score_checkpoints(&DataInf, &lab.store, &tgs, DEFAULT_ALPHA, Parallelism::Auto).unwrap();
            let top = rank_points(&scores.aggregated, 1).unwrap().top[0];
            assert_eq!(top, s.planted_id, "{} seed {seed}", s.name);
        }
    }
}

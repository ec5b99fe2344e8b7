//! Procrustes fitting and cross-space retrieval.

mod common;

use common::{orthogonality, random_matrix, random_orthogonal, residual};
use dialign::alignment::{build_seed_lexicon, fit, procrustes, translate_all, AlignmentMap, RetrievalMode, Translator};
use dialign::embedding::{cosine, normalize, EmbeddingSpace};
use dialign::vocab::{stopwords, VocabRole, Vocabulary};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 8;

fn random_space(id: &str, tokens: &[String], rng: &mut ChaCha8Rng) -> EmbeddingSpace {
    let vectors = (0..tokens.len() * DIM).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
    EmbeddingSpace::from_parts(id, DIM, tokens.to_vec(), vectors).unwrap()
}

fn vocab(tokens: &[String]) -> Vocabulary {
    let n = tokens.len() as u64;
    Vocabulary::new(
        tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), n - i as u64))
            .collect(),
        VocabRole::Target,
    )
}

fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i:03}")).collect()
}

/// Brute-force nearest neighbor: first maximal cosine in vocabulary order.
fn brute_nn(q: &[f32], tgt: &EmbeddingSpace, candidates: &[String]) -> (String, f32) {
    let mut best: Option<(String, f32)> = None;
    for c in candidates {
        let s = cosine(q, &tgt.vector(c).unwrap());
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((c.clone(), s));
        }
    }
    best.unwrap()
}

#[test]
fn identity_and_rotation_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_matrix(&mut rng, 40, DIM);
    let (w, warning) = procrustes(&x, &x).unwrap();
    assert!(warning.is_none());
    assert!((w - nalgebra::DMatrix::<f64>::identity(DIM, DIM)).amax() <= 1e-6);

    let r = random_orthogonal(&mut rng, DIM);
    let (w, _) = procrustes(&x, &(&x * &r)).unwrap();
    assert!((w - r).amax() <= 1e-6);
}

#[test]
fn rank_deficiency_is_flagged() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut x = random_matrix(&mut rng, 10, DIM);
    x.column_mut(3).fill(0.0);
    let (w, warning) = procrustes(&x, &x).unwrap();
    assert!(warning.is_some());
    assert!(orthogonality(&w) <= 1e-6);
}

#[test]
fn fitted_map_beats_random_rotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let x = random_matrix(&mut rng, 25, DIM);
        let y = random_matrix(&mut rng, 25, DIM);
        let (w, _) = procrustes(&x, &y).unwrap();
        let best = residual(&x, &w, &y);
        for _ in 0..200 {
            assert!(best <= residual(&x, &random_orthogonal(&mut rng, DIM), &y) + 1e-12);
        }
    }
}

#[test]
fn translate_all_records_skips() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let all = words(30);
    let src = random_space("s", &all[..27], &mut rng);
    let tgt = random_space("t", &all, &mut rng);
    let map = AlignmentMap::identity(DIM, "s", "t");
    let source_vocab = Vocabulary::new(all.iter().map(|t| (t.clone(), 1)).collect(), VocabRole::Source);
    let out = translate_all(&map, &src, &tgt, &source_vocab, &vocab(&all), RetrievalMode::Nn).unwrap();
    assert_eq!(out.results.len(), 27);
    assert_eq!(out.skipped.len(), 3);
    assert_eq!(
        out.skipped.iter().map(|s| s.token.as_str()).collect::<Vec<_>>(),
        ["w027", "w028", "w029"]
    );
    let again = translate_all(&map, &src, &tgt, &source_vocab, &vocab(&all), RetrievalMode::Nn).unwrap();
    assert_eq!(out, again);
}

#[test]
fn fit_on_rotated_stopword_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tokens: Vec<String> = stopwords().iter().map(str::to_string).collect();
    tokens.extend(words(50));
    let src = random_space("s", &tokens, &mut rng);
    let r = random_orthogonal(&mut rng, DIM);
    let rotated: Vec<f32> = src
        .raw_vectors()
        .chunks(DIM)
        .flat_map(|row| {
            let v = nalgebra::RowDVector::from_iterator(DIM, row.iter().map(|&x| x as f64)) * &r;
            v.iter().map(|&x| x as f32).collect::<Vec<_>>()
        })
        .collect();
    let tgt = EmbeddingSpace::from_parts("t", DIM, tokens.clone(), rotated).unwrap();
    let lexicon = build_seed_lexicon(&src, &tgt, stopwords()).unwrap();
    assert_eq!(lexicon.len(), stopwords().len());
    let map = fit(&src, &tgt, &lexicon).unwrap();
    assert!((map.matrix() - r).amax() <= 1e-5);
    let content = &tokens[stopwords().len()..];
    let out = Translator::new(&map, &src, &tgt, &vocab(content), RetrievalMode::Nn)
        .unwrap()
        .translate_all(content.iter().map(String::as_str));
    assert!(out.results.iter().all(|r| r.is_self()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn procrustes_output_is_orthogonal(seed in any::<u64>(), rows in 3usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, rows, DIM);
        let y = random_matrix(&mut rng, rows, DIM);
        let (w, _) = procrustes(&x, &y).unwrap();
        prop_assert!(orthogonality(&w) <= 1e-6);
    }

    #[test]
    fn orthogonal_maps_preserve_cosine(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let map = AlignmentMap::from_matrix(&random_orthogonal(&mut rng, DIM), "s", "t").unwrap();
        let a: Vec<f32> = (0..DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f32> = (0..DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let before = cosine(&a, &b);
        let after = cosine(&map.apply(&a), &map.apply(&b));
        prop_assert!((before - after).abs() <= 1e-6, "{before} vs {after}");
        let back = map.apply_inverse(&map.apply(&a));
        for (u, v) in a.iter().zip(&back) {
            prop_assert!((u - v).abs() <= 1e-6);
        }
    }

    #[test]
    fn nn_matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all = words(60);
        let src = random_space("s", &all, &mut rng);
        let tgt = random_space("t", &all, &mut rng);
        let map = AlignmentMap::from_matrix(&random_orthogonal(&mut rng, DIM), "s", "t").unwrap();
        let candidates = &all[10..];
        let tr = Translator::new(&map, &src, &tgt, &vocab(candidates), RetrievalMode::Nn).unwrap();
        for token in &all[..20] {
            let q = normalize(map.apply(&normalize(src.vector(token).unwrap())));
            let r = tr.translate(token).unwrap();
            let (want, best) = brute_nn(&q, &tgt, candidates);
            prop_assert!(candidates.contains(&r.target));
            prop_assert!(r.cosine >= best - 1e-6);
            if r.target != want {
                // Only a float-level near-tie may disagree.
                prop_assert!((r.cosine - best).abs() <= 1e-6);
            }
            prop_assert!(r.alternatives.windows(2).all(|w| w[0].1 >= w[1].1));
        }
    }

    #[test]
    fn scaling_targets_changes_no_translation(seed in any::<u64>(), scale in 0.01f32..100.0, csls in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all = words(40);
        let src = random_space("s", &all, &mut rng);
        let tgt = random_space("t", &all, &mut rng);
        let scaled_vectors = tgt.raw_vectors().iter().map(|x| x * scale).collect();
        let scaled = EmbeddingSpace::from_parts("t", DIM, all.clone(), scaled_vectors).unwrap();
        let map = AlignmentMap::from_matrix(&random_orthogonal(&mut rng, DIM), "s", "t").unwrap();
        let mode = if csls { RetrievalMode::Csls { k: 5 } } else { RetrievalMode::Nn };
        let tv = vocab(&all);
        let a = Translator::new(&map, &src, &tgt, &tv, mode).unwrap().translate_all(all.iter().map(String::as_str));
        let b = Translator::new(&map, &src, &scaled, &tv, mode).unwrap().translate_all(all.iter().map(String::as_str));
        for (x, y) in a.results.iter().zip(&b.results) {
            if x.target != y.target {
                prop_assert!((x.score - x.alternatives[1].1).abs() <= 1e-5, "{} vs {}", x.target, y.target);
            }
        }
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use gapscope::fixture;
use gapscope_core::intervention::{self, Intervention};
use gapscope_core::metrics::{self, BenchmarkPair, ScoreMode};
use gapscope_core::tape::vjp_seed_gradient;
use gapscope_core::{Error, Location, Model, Site, TapRequest, Tensor};
use proptest::prelude::*;

fn model(seed: u64, parallel: bool) -> Model<f64> {
    fixture::random_model(&fixture::tiny_config(2, 2, 16, 64, parallel), seed)
}

fn all_sites(m: &Model<f64>) -> Vec<Site> {
    let c = m.config();
    let mut out = Vec::new();
    for l in 0..c.n_layers {
        out.extend([Site::resid(l), Site::attn(l), Site::mlp(l)]);
        out.extend((0..c.n_heads).map(|h| Site::head(l, h)));
    }
    out
}

fn tokens() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..64, 1..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn causal(seed in 0u64..1000, parallel in any::<bool>(), toks in tokens(), cut in 0usize..10, repl in 0u32..64) {
        let m = model(seed, parallel);
        let t = cut % toks.len();
        let mut other = toks.clone();
        for v in &mut other[t + 1..] {
            *v = (*v + repl + 1) % 64;
        }
        let a = m.logits(&toks).unwrap();
        let b = m.logits(&other).unwrap();
        for r in 0..=t {
            prop_assert!(a.row(r).iter().zip(b.row(r)).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn taps_do_not_change_logits(seed in 0u64..1000, parallel in any::<bool>(), toks in tokens()) {
        let m = model(seed, parallel);
        let taps: TapRequest = all_sites(&m)
            .into_iter()
            .flat_map(|site| (0..toks.len()).map(move |position| Location { site, position }))
            .collect();
        let (tapped, cache) = m.forward(&toks, &taps).unwrap();
        prop_assert_eq!(cache.len(), taps.len());
        prop_assert!(cache.keys().copied().eq(taps.iter().copied()));
        let plain = m.logits(&toks).unwrap();
        prop_assert!(tapped.data().iter().zip(plain.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn self_patch_is_bit_exact(seed in 0u64..1000, parallel in any::<bool>(), toks in tokens(), pick in any::<prop::sample::Index>()) {
        let m = model(seed, parallel);
        let sites = all_sites(&m);
        let site = sites[pick.index(sites.len())];
        let position = pick.index(toks.len());
        let loc = Location { site, position };
        let donor = intervention::capture(&m, &toks, &[loc]).unwrap().get(&loc).unwrap().clone();
        let patched = intervention::run_with(&m, &toks, &[Intervention::patch(loc, donor)]).unwrap();
        let clean = m.logits(&toks).unwrap();
        prop_assert!(patched.data().iter().zip(clean.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn scale_is_exact_at_the_site(seed in 0u64..1000, toks in tokens(), alpha in -2.0f64..3.0, head in 0usize..2) {
        let m = model(seed, true);
        let site = Site::head(1, head);
        let locs: Vec<Location> = (0..toks.len()).map(|position| Location { site, position }).collect();
        let clean = intervention::capture(&m, &toks, &locs).unwrap();
        let (_, scaled) = intervention::run_with_taps(&m, &toks, &[Intervention::scale(site, None, alpha)], &locs).unwrap();
        for l in &locs {
            let c = clean.get(l).unwrap().data();
            let s = scaled.get(l).unwrap().data();
            prop_assert!(c.iter().zip(s).all(|(x, y)| (alpha * x).to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn sequence_logprob_matches_stepwise(seed in 0u64..1000, parallel in any::<bool>(), toks in prop::collection::vec(0u32..64, 2..10)) {
        let m = model(seed, parallel);
        let got = m.sequence_logprob(&toks).unwrap();
        let mut want = 0.0;
        for t in 1..toks.len() {
            let logits = m.logits(&toks[..t]).unwrap();
            want += common::log_softmax(logits.row(t - 1))[toks[t] as usize];
        }
        prop_assert!((got - want).abs() < 1e-6);
        prop_assert!(got < 0.0);
    }
}

#[test]
fn two_token_logprob_is_a_single_step() {
    let m = model(1, true);
    let logits = m.logits(&[5]).unwrap();
    let want = common::log_softmax(logits.row(0))[9];
    assert!((m.sequence_logprob(&[5, 9]).unwrap() - want).abs() < 1e-12);
    assert!(m.sequence_logprob(&[5]).is_err());
}

#[test]
fn head_taps_have_head_width() {
    let m = model(2, true);
    let taps: TapRequest = (0..4).map(|position| Location { site: Site::head(1, 0), position }).collect();
    let (_, cache) = m.forward(&[1, 2, 3, 4], &taps).unwrap();
    assert_eq!(cache.len(), 4);
    assert!(cache.iter().all(|(_, t)| t.len() == m.config().d_head));
}

#[test]
fn forward_input_errors() {
    let m = model(3, true);
    assert!(matches!(m.logits(&[64]), Err(Error::TokenOutOfRange { .. })));
    assert!(m.logits(&[]).is_err());
    let long = vec![1u32; m.config().max_positions + 1];
    assert!(matches!(m.logits(&long), Err(Error::SequenceLength { .. })));
    assert!(m.logits(&long[1..]).is_ok());
}

#[test]
fn same_site_interventions_are_rejected() {
    let m = model(4, true);
    let loc = Location { site: Site::mlp(0), position: 1 };
    let v = Tensor::vector(vec![0.0; 16]);
    let dup = [Intervention::patch(loc, v.clone()), Intervention::patch(loc, v)];
    assert!(intervention::run_with(&m, &[1, 2, 3], &dup).is_err());
    let bad = Location { site: Site::head(2, 0), position: 0 };
    assert!(intervention::run_with(&m, &[1, 2, 3], &[Intervention::patch(bad, Tensor::vector(vec![0.0; 8]))]).is_err());
}

#[test]
fn seed_gradient_matches_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..6u64 {
        let parallel = seed % 2 == 0;
        let m = model(10 + seed, parallel);
        let mut rng = common::rng(seed);
        let toks = common::random_tokens(&mut rng, 6, 64);
        for site in all_sites(&m) {
            let position = (seed as usize + 2) % toks.len();
            let loc = Location { site, position };
            let clean = intervention::capture(&m, &toks, &[loc]).unwrap().get(&loc).unwrap().clone();
            let target = 7;
            let (tape, loss) = m.tape_from(&toks, site, position, clean.clone(), target).unwrap();
            let grad = vjp_seed_gradient(&tape, &loss).unwrap();
            let eval = |v: Vec<f64>| {
                let out = intervention::run_with(&m, &toks, &[Intervention::patch(loc, Tensor::vector(v))]).unwrap();
                -common::log_softmax(out.row(toks.len() - 1))[target as usize]
            };
            let h = 1e-4;
            for i in 0..clean.len() {
                let mut up = clean.data().to_vec();
                let mut down = up.clone();
                up[i] += h;
                down[i] -= h;
                let fd = (eval(up) - eval(down)) / (2.0 * h);
                let g = grad.data()[i];
                worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
            }
        }
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn identity_steering_keeps_benchmark_accuracy() {
    let m = model(5, true);
    let mut rng = common::rng(5);
    let pairs: Vec<BenchmarkPair> = (0..12)
        .map(|i| BenchmarkPair {
            good: common::random_tokens(&mut rng, 5, 64),
            bad: common::random_tokens(&mut rng, if i % 4 == 0 { 6 } else { 5 }, 64),
            region_good: None,
            region_bad: None,
            category: format!("c{}", i % 3),
        })
        .collect();
    let clean = metrics::benchmark_accuracy(&m, &pairs, ScoreMode::Whole, &[]).unwrap();
    let ident = [Intervention::scale(Site::head(1, 1), None, 1.0), Intervention::scale(Site::head(0, 0), None, 1.0)];
    let steered = metrics::benchmark_accuracy(&m, &pairs, ScoreMode::Whole, &ident).unwrap();
    assert_eq!(clean, steered);
    assert_eq!(clean.overall.filtered, 3);
    assert_eq!(clean.overall.total, 9);
}

#[test]
fn rigged_benchmark_scores_perfectly() {
    let m = model(6, true);
    let mut rng = common::rng(6);
    let mut pairs = Vec::new();
    while pairs.len() < 2 {
        let a = common::random_tokens(&mut rng, 4, 64);
        let b = common::random_tokens(&mut rng, 4, 64);
        let (sa, sb) = (m.sequence_logprob(&a).unwrap(), m.sequence_logprob(&b).unwrap());
        let (good, bad) = if sa > sb { (a, b) } else { (b, a) };
        pairs.push(BenchmarkPair { good, bad, region_good: None, region_bad: None, category: "x".into() });
    }
    let r = metrics::benchmark_accuracy(&m, &pairs, ScoreMode::Whole, &[]).unwrap();
    assert_eq!(r.accuracy(), Some(1.0));
}

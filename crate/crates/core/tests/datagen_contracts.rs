// SPDX-License-Identifier: MIT OR Apache-2.0

use gapscope_core::datagen::{
    self, build_splits, template, Construction, DatasetSplit, Distribution, GenOptions, NpiOutputs, Phenomenon, SplitSizes,
    ValidationReport, ViolationKind, VocabularySet,
};
use gapscope_core::Error;

fn sizes() -> SplitSizes {
    SplitSizes { train: 30, id_test: 10, ood_test: 10 }
}

fn split(seed: u64) -> DatasetSplit {
    let opts = GenOptions { seed, sizes: sizes(), ..GenOptions::default() };
    build_splits(&Construction::ALL, &VocabularySet::builtin(Distribution::Id), &VocabularySet::builtin(Distribution::Ood), &opts).unwrap()
}

fn kinds(r: &ValidationReport) -> Vec<ViolationKind> {
    r.violations.iter().map(|v| v.kind).collect()
}

fn check(s: &DatasetSplit) -> ValidationReport {
    datagen::validate(s, &VocabularySet::builtin(Distribution::Id), sizes())
}

#[test]
fn generation_is_deterministic_per_seed() {
    assert_eq!(split(3), split(3));
    assert_ne!(split(3).train, split(4).train);
}

#[test]
fn clean_split_validates() {
    let r = check(&split(1));
    assert!(r.ok(), "{:?}", r.violations.first());
    assert_eq!(r.pairs_checked, 16 * 50);
}

#[test]
fn diff_is_confined_to_the_alternating_slot() {
    for p in split(2).all() {
        let b: Vec<&str> = p.base.split_whitespace().collect();
        let s: Vec<&str> = p.source.split_whitespace().collect();
        let span = p.alignment[&p.alternating];
        assert_eq!(b[..span.base.start], s[..span.source.start], "{} / {}", p.base, p.source);
        assert_eq!(b[span.base.end..], s[span.source.end..], "{} / {}", p.base, p.source);
        assert_ne!(b[span.base.start..span.base.end], s[span.source.start..span.source.end]);
    }
}

#[test]
fn control_distance_tracks_fgd_mean() {
    let s = split(5);
    for ood in [false, true] {
        let pick = |p: &&datagen::MinimalPair| (p.split == datagen::Split::Ood) == ood;
        let dist = |p: &datagen::MinimalPair| {
            let n = p.base.split_whitespace().count();
            n + 1 - p.alignment[&p.alternating].base.end
        };
        let fgd: Vec<usize> = s.all().filter(pick).filter(|p| p.construction.phenomenon() == Phenomenon::Fgd).map(dist).collect();
        let mean = fgd.iter().sum::<usize>() as f64 / fgd.len() as f64;
        for p in s.all().filter(pick).filter(|p| p.construction == Construction::Ctrl) {
            assert!((dist(p) as f64 - mean).abs() <= 1.0, "{} vs {mean}", p.base);
        }
    }
}

#[test]
fn symmetrization_doubles_fgd_and_control_only() {
    let s = split(6);
    for c in Construction::ALL {
        let part: Vec<_> = s.restrict(c).all().cloned().collect();
        let sym = datagen::symmetrize(&part);
        let factor = if c.phenomenon() == Phenomenon::Npi { 1 } else { 2 };
        assert_eq!(sym.len(), factor * part.len(), "{c}");
        if factor == 2 {
            assert_eq!(sym[1], part[0].flipped());
        }
    }
}

#[test]
fn npi_with_unlicensed_base_output_is_an_orientation_violation() {
    let mut s = split(7);
    let i = s.train.iter().position(|p| p.construction.phenomenon() == Phenomenon::Npi).unwrap();
    s.train[i].y_base = "some".into();
    assert_eq!(kinds(&check(&s)), vec![ViolationKind::Orientation]);
}

#[test]
fn forced_violations_are_reported() {
    let base = split(8);

    let mut s = base.clone();
    let extra = s.train[0].clone();
    s.train.push(extra);
    let k = kinds(&check(&s));
    assert!(k.contains(&ViolationKind::Count) && k.contains(&ViolationKind::Duplicate));

    let mut s = base.clone();
    s.id_test[0].base = s.train[0].base.clone();
    assert!(kinds(&check(&s)).contains(&ViolationKind::TrainIdOverlap));

    let mut s = base.clone();
    let (id_word, p) = (VocabularySet::builtin(Distribution::Id).words("noun_sg").unwrap()[0].clone(), &mut s.ood_test[0]);
    p.base = format!("{} {id_word}", p.base);
    assert!(kinds(&check(&s)).contains(&ViolationKind::OodVocabulary));

    let mut s = base;
    let p = &mut s.train[0];
    p.source = format!("Yesterday {}", p.source.to_lowercase());
    assert!(kinds(&check(&s)).contains(&ViolationKind::Minimality));
}

#[test]
fn zero_requested_pairs_is_empty() {
    let t = template(Construction::EWhK, Distribution::Id, &NpiOutputs::default());
    assert!(datagen::generate(&t, &VocabularySet::builtin(Distribution::Id), 0, 0).unwrap().is_empty());
}

#[test]
fn tiny_vocabulary_is_reported() {
    let full = VocabularySet::builtin(Distribution::Id);
    let tiny = VocabularySet::new(Distribution::Id, full.categories.iter().map(|(c, w)| (c.clone(), w[..1].to_vec())).collect());
    let t = template(Construction::EWhK, Distribution::Id, &NpiOutputs::default());
    assert!(matches!(datagen::generate(&t, &tiny, 50, 0), Err(Error::VocabularyTooSmall(_))));
}

#[test]
fn overlapping_vocabularies_are_rejected() {
    let id = VocabularySet::builtin(Distribution::Id);
    let mut ood = VocabularySet::builtin(Distribution::Ood);
    let (cat, words) = id.categories.iter().next().unwrap();
    ood.categories.get_mut(cat).unwrap().push(words[0].clone());
    let opts = GenOptions { sizes: sizes(), ..GenOptions::default() };
    assert!(matches!(build_splits(&[Construction::EWhK], &id, &ood, &opts), Err(Error::VocabularyOverlap { .. })));
}

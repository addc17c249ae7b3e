// SPDX-License-Identifier: MIT OR Apache-2.0

use gapscope_core::intervention::das_apply;
use gapscope_core::Tensor;
use proptest::prelude::*;

fn vecs(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, d)
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 1e-3).then(|| v.iter().map(|x| x / n).collect())
}

/// Gram-Schmidt over a perturbed identity.
fn orthonormal_basis(d: usize, raw: &[f64]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        let mut v: Vec<f64> = (0..d).map(|j| raw[i * d + j] + if i == j { 4.0 } else { 0.0 }).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        basis.push(unit(&v).unwrap());
    }
    basis
}

fn t(v: &[f64]) -> Tensor<f64> {
    Tensor::vector(v.to_vec())
}

proptest! {
    #[test]
    fn idempotent((fb, fs, a) in (1usize..12).prop_flat_map(|d| (vecs(d), vecs(d), vecs(d)))) {
        let Some(a) = unit(&a) else { return Ok(()) };
        let once = das_apply(&t(&fb), &t(&fs), &t(&a)).unwrap();
        let twice = das_apply(&once, &t(&fs), &t(&a)).unwrap();
        for (x, y) in once.data().iter().zip(twice.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_sweep_reproduces_full_patch((d, fb, fs, raw) in (1usize..10).prop_flat_map(|d| (Just(d), vecs(d), vecs(d), prop::collection::vec(-1.0f64..1.0, d * d)))) {
        let basis = orthonormal_basis(d, &raw);
        let mut f = t(&fb);
        let mut summed = fb.clone();
        for e in &basis {
            f = das_apply(&f, &t(&fs), &t(e)).unwrap();
            let single = das_apply(&t(&fb), &t(&fs), &t(e)).unwrap();
            for (s, (x, b)) in summed.iter_mut().zip(single.data().iter().zip(&fb)) {
                *s += x - b;
            }
        }
        for i in 0..d {
            prop_assert!((f.data()[i] - fs[i]).abs() < 1e-9);
            prop_assert!((summed[i] - fs[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn renormalized_proposals_agree((fb, fs, a) in (1usize..12).prop_flat_map(|d| (vecs(d), vecs(d), vecs(d))), k in 0.01f64..100.0) {
        let Some(u) = unit(&a) else { return Ok(()) };
        let scaled: Vec<f64> = a.iter().map(|x| x * k).collect();
        let renormed = unit(&scaled).unwrap();
        let x = das_apply(&t(&fb), &t(&fs), &t(&u)).unwrap();
        let y = das_apply(&t(&fb), &t(&fs), &t(&renormed)).unwrap();
        for (p, q) in x.data().iter().zip(y.data()) {
            prop_assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn along_a_coordinate_comes_from_source((fb, fs, a) in (2usize..12).prop_flat_map(|d| (vecs(d), vecs(d), vecs(d)))) {
        let Some(a) = unit(&a) else { return Ok(()) };
        let f = das_apply(&t(&fb), &t(&fs), &t(&a)).unwrap();
        let dot = |x: &[f64]| x.iter().zip(&a).map(|(p, q)| p * q).sum::<f64>();
        prop_assert!((dot(f.data()) - dot(&fs)).abs() < 1e-9);
        let resid: Vec<f64> = f.data().iter().zip(&fb).map(|(x, b)| x - b).collect();
        let along = dot(&resid);
        for (r, ai) in resid.iter().zip(&a) {
            prop_assert!((r - along * ai).abs() < 1e-9);
        }
    }
}

#[test]
fn non_unit_direction_is_rejected() {
    let v = t(&[1.0, 2.0]);
    assert!(das_apply(&v, &v, &t(&[1.0, 1.0])).is_err());
    assert!(das_apply(&v, &v, &t(&[1.0])).is_err());
    assert!(das_apply(&v, &v, &t(&[1.0 + 5e-7, 0.0])).is_ok());
}

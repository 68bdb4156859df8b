use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::check_gradients;
use super::*;
use crate::error::Error;

fn t2(rows: &[&[f64]]) -> Tensor {
    Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn eval(f: impl FnOnce(&mut Tape) -> Var) -> Tensor {
    let mut tape = Tape::new();
    let out = f(&mut tape);
    tape.value(out).clone()
}

#[test]
fn matmul_identity_and_projector() {
    let id = t2(&[&[1.0, 0.0], &[0.0, 1.0]]);
    let m = t2(&[&[1.0, 2.0], &[3.0, 4.0]]);
    let out = eval(|t| {
        let (a, b) = (t.constant(id.clone()), t.constant(m.clone()));
        t.matmul(a, b).unwrap()
    });
    assert_eq!(out, m);

    let p = t2(&[&[1.0, 0.0], &[0.0, 0.0]]);
    let v = t2(&[&[5.0], &[7.0]]);
    let out = eval(|t| {
        let (a, b) = (t.constant(p.clone()), t.constant(v.clone()));
        t.matmul(a, b).unwrap()
    });
    assert_eq!(out.data(), &[5.0, 0.0]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[2, 3]));
    match tape.matmul(a, b) {
        Err(Error::Shape { lhs, rhs, .. }) => {
            assert_eq!(lhs, vec![2, 3]);
            assert_eq!(rhs, vec![2, 3]);
        }
        other => panic!("expected shape error, got {other:?}"),
    }
    assert!(tape.matmul_bt(a, b).is_ok());
    let c = tape.constant(Tensor::zeros(&[4, 2]));
    assert!(matches!(tape.matmul_bt(a, c), Err(Error::Shape { .. })));
}

#[test]
fn matmul_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = random(&mut rng, &[3, 4]);
    let b = random(&mut rng, &[4, 2]);
    let report = check_gradients(&[a, b], 1e-5, |t, v| {
        let c = t.matmul(v[0], v[1])?;
        Ok(t.sum(c))
    })
    .unwrap();
    assert!(report.max_abs_error < 1e-6, "{}", report.max_abs_error);
}

#[test]
fn elementwise_examples() {
    let out = eval(|t| {
        let a = t.constant(Tensor::from_vec(vec![1.0, 2.0, 3.0]));
        let z = t.constant(Tensor::zeros(&[3]));
        t.mul(a, z).unwrap()
    });
    assert_eq!(out.data(), &[0.0, 0.0, 0.0]);
    let out = eval(|t| {
        let a = t.constant(Tensor::from_vec(vec![1.0, 2.0]));
        let b = t.constant(Tensor::from_vec(vec![3.0, 4.0]));
        t.add(a, b).unwrap()
    });
    assert_eq!(out.data(), &[4.0, 6.0]);

    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2]));
    let b = tape.constant(Tensor::zeros(&[3]));
    assert!(matches!(tape.add(a, b), Err(Error::Shape { .. })));
    assert!(matches!(tape.mul(a, b), Err(Error::Shape { .. })));
}

#[test]
fn bias_broadcast_is_row_wise_only() {
    let mut tape = Tape::new();
    let x = tape.leaf(t2(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]));
    let b = tape.leaf(Tensor::from_vec(vec![10.0, 20.0]));
    let y = tape.add_bias(x, b).unwrap();
    assert_eq!(tape.value(y).data(), &[11.0, 22.0, 13.0, 24.0, 15.0, 26.0]);
    let loss = tape.sum(y);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(b).unwrap().data(), &[3.0, 3.0]);

    let wrong = tape.constant(Tensor::from_vec(vec![1.0, 2.0, 3.0]));
    assert!(tape.add_bias(x, wrong).is_err());
}

#[test]
fn activations_at_zero_and_saturation() {
    let out = eval(|t| {
        let x = t.constant(Tensor::from_vec(vec![0.0, 500.0, -500.0]));
        t.sigmoid(x)
    });
    assert_eq!(out.data()[0], 0.5);
    // 1/(1+e^-500) rounds to 1; e^-500/(1+e^-500) ≈ 7.12e-218
    assert!((out.data()[1] - 1.0).abs() < 1e-12);
    assert!(out.data()[2].abs() < 1e-12 && out.data()[2] > 0.0);
    assert!(out.is_finite());

    let out = eval(|t| {
        let x = t.constant(Tensor::from_vec(vec![0.0, 500.0, -500.0]));
        t.tanh(x)
    });
    assert_eq!(out.data(), &[0.0, 1.0, -1.0]);
}

#[test]
fn softmax_examples() {
    let out = eval(|t| {
        let x = t.constant(Tensor::zeros(&[3]));
        t.softmax(x, 0).unwrap()
    });
    for v in out.data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
    let out = eval(|t| {
        let x = t.constant(Tensor::from_vec(vec![1000.0, 0.0]));
        t.softmax(x, 0).unwrap()
    });
    assert!(out.is_finite());
    assert!((out.data()[0] - 1.0).abs() < 1e-12 && out.data()[1] < 1e-12);

    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(&[2, 2]));
    assert!(matches!(tape.softmax(x, 2), Err(Error::Axis { .. })));
}

#[test]
fn softmax_jvp_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random(&mut rng, &[5]);
    let w = random(&mut rng, &[5]);
    let report = check_gradients(&[x], 1e-5, |t, v| {
        let s = t.softmax(v[0], 0)?;
        let w = t.constant(w.clone());
        let p = t.mul(s, w)?;
        Ok(t.sum(p))
    })
    .unwrap();
    assert!(report.max_abs_error < 1e-6);
}

#[test]
fn softmax_along_leading_axis_of_matrix() {
    let out = eval(|t| {
        let x = t.constant(t2(&[&[0.0, 1.0], &[0.0, 3.0]]));
        t.softmax(x, 0).unwrap()
    });
    assert!((out.at2(0, 0) - 0.5).abs() < 1e-15);
    assert!((out.at2(0, 1) + out.at2(1, 1) - 1.0).abs() < 1e-15);
    assert!(out.at2(1, 1) > out.at2(0, 1));
}

#[test]
fn concat_and_slice_examples() {
    let mut tape = Tape::new();
    let a = tape.leaf(t2(&[&[1.0, 2.0]]));
    let b = tape.leaf(t2(&[&[3.0, 4.0]]));
    let c = tape.concat(&[a, b], 0).unwrap();
    assert_eq!(tape.value(c), &t2(&[&[1.0, 2.0], &[3.0, 4.0]]));
    let back = tape.slice(c, 0, 0, 1).unwrap();
    assert!(tape.value(back).bit_eq(tape.value(a)));

    let loss = tape.sum(c);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(a).unwrap().data(), &[1.0, 1.0]);

    let odd = tape.constant(Tensor::zeros(&[1, 3]));
    assert!(matches!(
        tape.concat(&[a, odd], 0),
        Err(Error::Shape { .. })
    ));
    assert!(tape.concat(&[a, odd], 1).is_ok());
    assert!(matches!(
        tape.slice(c, 1, 1, 3),
        Err(Error::SliceRange { .. })
    ));
    assert!(matches!(
        tape.slice(c, 1, 2, 1),
        Err(Error::SliceRange { .. })
    ));
    assert!(matches!(tape.concat(&[], 0), Err(Error::Empty(_))));
}

#[test]
fn cross_entropy_examples() {
    let out = eval(|t| {
        let x = t.constant(t2(&[&[0.0, 0.0]]));
        t.cross_entropy(x, &[0]).unwrap()
    });
    assert!((out.item().unwrap() - std::f64::consts::LN_2).abs() < 1e-15);

    let out = eval(|t| {
        let x = t.constant(t2(&[&[1000.0, 0.0]]));
        t.cross_entropy(x, &[0]).unwrap()
    });
    assert!(out.item().unwrap().abs() < 1e-12);

    let mut tape = Tape::new();
    let x = tape.constant(t2(&[&[0.0, 0.0]]));
    assert!(matches!(
        tape.cross_entropy(x, &[2]),
        Err(Error::InvalidClass {
            index: 2,
            classes: 2
        })
    ));
}

#[test]
fn cross_entropy_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let logits = random(&mut rng, &[4, 3]);
    let report =
        check_gradients(&[logits], 1e-5, |t, v| t.cross_entropy(v[0], &[0, 2, 1, 2])).unwrap();
    assert!(report.max_abs_error < 1e-6);
}

#[test]
fn l1_examples_and_closed_form_gradient() {
    let mut tape = Tape::new();
    let p = tape.leaf(Tensor::from_vec(vec![1.0, 3.0]));
    let z = tape.constant(Tensor::from_vec(vec![0.0, 0.0]));
    let loss = tape.l1_loss(p, z).unwrap();
    assert_eq!(tape.value(loss).item(), Some(2.0));
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(p).unwrap().data(), &[0.5, 0.5]);

    let mut tape = Tape::new();
    let p = tape.leaf(Tensor::from_vec(vec![1.0, -3.0, 2.0]));
    let q = tape.constant(Tensor::from_vec(vec![1.0, -3.0, 4.0]));
    let loss = tape.l1_loss(p, q).unwrap();
    assert!((tape.value(loss).item().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    tape.backward(loss).unwrap();
    // ties get subgradient 0
    assert_eq!(tape.grad(p).unwrap().data(), &[0.0, 0.0, -1.0 / 3.0]);

    let same = tape.l1_loss(q, q).unwrap();
    assert_eq!(tape.value(same).item(), Some(0.0));
    let short = tape.constant(Tensor::zeros(&[2]));
    assert!(tape.l1_loss(p, short).is_err());
}

#[test]
fn backward_of_sum_gives_ones_and_accumulates() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::zeros(&[2, 3]));
    let loss = tape.sum(a);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(a).unwrap().data(), &[1.0; 6]);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(a).unwrap().data(), &[2.0; 6]);
    tape.zero_grad();
    assert!(tape.grad(a).is_none());
}

#[test]
fn backward_rejects_non_scalar() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::zeros(&[2]));
    assert!(matches!(tape.backward(a), Err(Error::NonScalarLoss(_))));
}

#[test]
fn constants_receive_no_gradient() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::from_vec(vec![2.0]));
    let c = tape.constant(Tensor::from_vec(vec![5.0]));
    let p = tape.mul(a, c).unwrap();
    tape.backward(p).unwrap();
    assert_eq!(tape.grad(a).unwrap().data(), &[5.0]);
    assert!(tape.grad(c).is_none());
}

#[test]
fn shared_parent_gradients_add() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::from_vec(vec![3.0]));
    let sq = tape.mul(a, a).unwrap();
    tape.backward(sq).unwrap();
    assert_eq!(tape.grad(a).unwrap().data(), &[6.0]);
}

#[test]
fn ops_are_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(&mut rng, &[3, 4]);
    let w = random(&mut rng, &[5, 4]);
    let run = || {
        let mut t = Tape::new();
        let (xv, wv) = (t.leaf(x.clone()), t.leaf(w.clone()));
        let y = t.matmul_bt(xv, wv).unwrap();
        let s = t.softmax(y, 1).unwrap();
        let l = t.cross_entropy(s, &[0, 1, 4]).unwrap();
        t.backward(l).unwrap();
        (t.value(l).clone(), t.grad(wv).unwrap())
    };
    let (l1, g1) = run();
    let (l2, g2) = run();
    assert!(l1.bit_eq(&l2) && g1.bit_eq(&g2));
}

/// Relative-error bound used by the randomized gradient properties.
const REL_TOL: f64 = 1e-5;

fn shape_strategy() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..5, 1usize..5, 1usize..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn prop_linear_ops_gradients((m, k, n) in shape_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(&mut rng, &[m, k]);
        let b = random(&mut rng, &[k, n]);
        let bt = random(&mut rng, &[n, k]);
        let bias = random(&mut rng, &[n]);
        let w = random(&mut rng, &[m, n]);
        let r = check_gradients(&[a, b, bt, bias], 1e-5, |t, v| {
            let p = t.matmul(v[0], v[1])?;
            let q = t.matmul_bt(v[0], v[2])?;
            let s = t.add(p, q)?;
            let s = t.add_bias(s, v[3])?;
            let d = t.sub(s, q)?;
            let w = t.constant(w.clone());
            let e = t.mul(d, w)?;
            let e = t.scale(e, 0.7);
            Ok(t.sum(e))
        }).unwrap();
        prop_assert!(r.max_rel_error < REL_TOL, "rel err {}", r.max_rel_error);
    }

    #[test]
    fn prop_nonlinear_ops_gradients((m, n, _) in shape_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&mut rng, &[m, n]);
        let y = random(&mut rng, &[m, n]);
        let w = random(&mut rng, &[m, 2 * n]);
        let axis = (seed % 2) as usize;
        let r = check_gradients(&[x, y], 1e-5, |t, v| {
            let s = t.sigmoid(v[0]);
            let h = t.tanh(v[1]);
            let c = t.concat(&[s, h], 1)?;
            let sm = t.softmax(c, axis)?;
            let w = t.constant(w.clone());
            let p = t.mul(sm, w)?;
            let sl = t.slice(p, 1, 1, 2 * n)?;
            Ok(t.sum(sl))
        }).unwrap();
        prop_assert!(r.max_rel_error < REL_TOL, "rel err {}", r.max_rel_error);
    }

    #[test]
    fn prop_loss_gradients((m, k, _) in shape_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = k + 1;
        let logits = random(&mut rng, &[m, classes]);
        let targets: Vec<usize> = (0..m).map(|_| rng.random_range(0..classes)).collect();
        let pred = random(&mut rng, &[m, 1]);
        let target = random(&mut rng, &[m, 1]);
        let r = check_gradients(&[logits, pred, target], 1e-5, |t, v| {
            let ce = t.cross_entropy(v[0], &targets)?;
            let l1 = t.l1_loss(v[1], v[2])?;
            t.add(ce, l1)
        }).unwrap();
        prop_assert!(r.max_rel_error < REL_TOL, "rel err {}", r.max_rel_error);
    }

    #[test]
    fn prop_softmax_sums_to_one(values in proptest::collection::vec(-1e3f64..1e3, 1..12)) {
        let n = values.len();
        let out = eval(|t| {
            let x = t.constant(Tensor::from_vec(values.clone()));
            t.softmax(x, 0).unwrap()
        });
        let total: f64 = out.data().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(out.data().iter().all(|&p| p >= 0.0));
        prop_assert_eq!(out.len(), n);
    }

    #[test]
    fn prop_concat_slice_round_trip_is_bitwise(
        rows in 1usize..4, ca in 1usize..4, cb in 1usize..4, seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(&mut rng, &[rows, ca]);
        let b = random(&mut rng, &[rows, cb]);
        let mut t = Tape::new();
        let (va, vb) = (t.constant(a.clone()), t.constant(b.clone()));
        let c = t.concat(&[va, vb], 1).unwrap();
        let sa = t.slice(c, 1, 0, ca).unwrap();
        let sb = t.slice(c, 1, ca, ca + cb).unwrap();
        prop_assert!(t.value(sa).bit_eq(&a));
        prop_assert!(t.value(sb).bit_eq(&b));
    }
}

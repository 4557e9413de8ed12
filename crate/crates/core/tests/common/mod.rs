//! Helpers shared by integration tests and the acceptance harness.

#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use horn_embed::encoder::{Encoder, VariableMode};
use horn_embed::logic::{rename_apart, unify, Atom, Substitution, Term, UnifyMode, Vocabulary};
use horn_embed::neural::{
    grad_check_params, Activation, Batch, BceLoss, DenseNet, Loss, TripletLoss, EMBEDDING_DIM,
};
use horn_embed::triplets::sample_atom;

/// The vocabulary used throughout the paper's experiments.
pub fn paper_vocab(seed: u64) -> Vocabulary {
    Vocabulary::generate(20, 200, 10, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

pub const GRAD_EPSILON: f64 = 1e-5;
/// Points with a ReLU input or hinge argument this close to zero are
/// redrawn, since central differences straddle the kink there.
pub const KINK_CLEARANCE: f64 = 2e-5;

#[derive(Debug, Clone, Copy)]
pub struct GradReport {
    pub points: usize,
    pub redrawn: usize,
    pub embedding_max: f64,
    pub scorer_max: f64,
}

/// Offsets of each layer's weights and biases in the flat parameter order.
fn param_offsets(net: &DenseNet) -> Vec<(usize, usize, usize)> {
    let dims = net.layer_dims();
    let mut off = 0;
    dims.windows(2)
        .map(|w| {
            let r = (off, w[0], w[1]);
            off += w[0] * w[1] + w[1];
            r
        })
        .collect()
}

/// Parameters to probe: weights fed by nonzero inputs plus biases, from every layer.
fn pick_params(net: &DenseNet, x: &Array2<f64>, per_layer: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let active_inputs: Vec<usize> = (0..x.ncols())
        .filter(|&c| x.column(c).iter().any(|v| *v != 0.0))
        .collect();
    let mut out = Vec::new();
    for (l, (off, n_in, n_out)) in param_offsets(net).into_iter().enumerate() {
        for _ in 0..per_layer {
            let r = if l == 0 {
                active_inputs[rng.gen_range(0..active_inputs.len())]
            } else {
                rng.gen_range(0..n_in)
            };
            out.push(off + r * n_out + rng.gen_range(0..n_out));
        }
        for _ in 0..per_layer / 4 {
            out.push(off + n_in * n_out + rng.gen_range(0..n_out));
        }
    }
    out
}

fn hidden_clear(net: &DenseNet, x: &Array2<f64>) -> bool {
    let cache = net.forward_batch(Batch::Dense(x.view())).unwrap();
    let n = net.layer_dims().len() - 1;
    (0..n - 1).all(|l| cache.pre[l].iter().all(|z| z.abs() > KINK_CLEARANCE))
}

fn hinge_clear(net: &DenseNet, x: &Array2<f64>, margin: f64) -> bool {
    let out = net.forward_batch(Batch::Dense(x.view())).unwrap();
    let y = out.output();
    let b = y.nrows() / 3;
    (0..b).all(|i| {
        let d = |j: usize| (&y.row(i) - &y.row(j)).mapv(|v| v * v).sum();
        (d(b + i) - d(2 * b + i) + margin).abs() > KINK_CLEARANCE
    })
}

/// Gradient checks at `points` random parameter settings of the full-size
/// embedding network (triplet loss) and scoring network (cross-entropy).
pub fn grad_check_points(points: usize, seed: u64) -> GradReport {
    let vocab = paper_vocab(seed);
    let enc = Encoder::new(vocab.clone(), VariableMode::Identity);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradReport {
        points,
        redrawn: 0,
        embedding_max: 0.0,
        scorer_max: 0.0,
    };
    let mut done = 0;
    while done < points {
        // Alternate margins so both hinge branches are exercised.
        let margin = if done % 2 == 0 { 1.0 } else { 0.0 };
        let emb = DenseNet::init(&[enc.dim(), 256, 128, EMBEDDING_DIM], Activation::Linear, &mut rng).unwrap();
        let b = 2;
        let mut x = Array2::zeros((3 * b, enc.dim()));
        for r in 0..3 * b {
            for i in enc.active_indices(&sample_atom(&vocab, 0.0, &mut rng)).unwrap() {
                x[[r, i]] = 1.0;
            }
        }
        let sc = DenseNet::init(&[2 * EMBEDDING_DIM, 64, 1], Activation::Sigmoid, &mut rng).unwrap();
        let xs = Array2::from_shape_fn((8, 2 * EMBEDDING_DIM), |_| rng.gen_range(-1.0..1.0));
        let targets: Vec<f64> = (0..8).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
        if !(hidden_clear(&emb, &x) && hinge_clear(&emb, &x, margin) && hidden_clear(&sc, &xs)) {
            report.redrawn += 1;
            continue;
        }
        let loss = TripletLoss { margin };
        let ps = pick_params(&emb, &x, 16, &mut rng);
        report.embedding_max = report
            .embedding_max
            .max(grad_check_params(&emb, &loss, x.view(), GRAD_EPSILON, &ps));
        let bce = BceLoss { targets };
        let ps = pick_params(&sc, &xs, 24, &mut rng);
        report.scorer_max = report
            .scorer_max
            .max(grad_check_params(&sc, &bce, xs.view(), GRAD_EPSILON, &ps));
        done += 1;
    }
    report
}

/// Loss of `net` on a dense batch, for ad-hoc checks.
pub fn batch_loss(net: &DenseNet, loss: &dyn Loss, x: &Array2<f64>) -> f64 {
    let c = net.forward_batch(Batch::Dense(x.view())).unwrap();
    loss.value(c.output_pre(), c.output())
}

/// Every atom over the vocabulary, with variables drawn from the pool.
fn all_atoms(vocab: &Vocabulary) -> Vec<Atom> {
    let mut terms: Vec<Term> = (0..vocab.num_constants() as u32).map(Term::Const).collect();
    terms.extend((0..vocab.num_variables() as u32).map(Term::Var));
    let mut out = Vec::new();
    for (p, &arity) in vocab.arities().iter().enumerate() {
        let mut rows: Vec<Vec<Term>> = vec![Vec::new()];
        for _ in 0..arity {
            rows = rows
                .into_iter()
                .flat_map(|r| {
                    terms.iter().map(move |t| {
                        let mut r = r.clone();
                        r.push(*t);
                        r
                    })
                })
                .collect();
        }
        out.extend(rows.into_iter().map(|args| Atom::new(p as u32, args)));
    }
    out
}

/// Ground substitutions over the constants plus one fresh constant per
/// variable, enough to witness any unifier.
fn groundings(vars: &[u32], nc: u32) -> Vec<Substitution> {
    let domain = nc + vars.len() as u32;
    let mut out = vec![Vec::new()];
    for &v in vars {
        out = out
            .into_iter()
            .flat_map(|a: Vec<(u32, Term)>| {
                (0..domain).map(move |c| {
                    let mut a = a.clone();
                    a.push((v, Term::Const(c)));
                    a
                })
            })
            .collect();
    }
    out.into_iter().map(Substitution::from_pairs).collect()
}

fn vars_of(a: &Atom, b: &Atom) -> Vec<u32> {
    let mut v = a.variables();
    for x in b.variables() {
        if !v.contains(&x) {
            v.push(x);
        }
    }
    v
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleReport {
    pub checks: usize,
    pub unifiable: usize,
    pub mismatches: usize,
}

/// Compares [`unify`] in both modes against brute-force grounding on every
/// ordered pair of atoms. A mismatch is a wrong verdict, an unsound
/// unifier, or one that is not most general.
pub fn unification_oracle(vocab: &Vocabulary) -> OracleReport {
    let atoms = all_atoms(vocab);
    let nc = vocab.num_constants() as u32;
    let mut r = OracleReport::default();
    for a in &atoms {
        for b in &atoms {
            for mode in [UnifyMode::SharedNames, UnifyMode::StandardizeApart] {
                r.checks += 1;
                let b2 = match mode {
                    UnifyMode::SharedNames => b.clone(),
                    UnifyMode::StandardizeApart => rename_apart(a, b),
                };
                let witnesses: Vec<Substitution> = groundings(&vars_of(a, &b2), nc)
                    .into_iter()
                    .filter(|g| g.apply(a) == g.apply(&b2))
                    .collect();
                let ok = match unify(a, b, mode).unwrap() {
                    None => witnesses.is_empty(),
                    Some(s) => {
                        r.unifiable += 1;
                        !witnesses.is_empty()
                            && s.apply(a) == s.apply(&b2)
                            && s.is_idempotent()
                            // Every ground unifier factors through the mgu.
                            && witnesses.iter().all(|g| {
                                g.apply(&s.apply(a)) == g.apply(a) && g.apply(&s.apply(&b2)) == g.apply(&b2)
                            })
                    }
                };
                if !ok {
                    r.mismatches += 1;
                }
            }
        }
    }
    r
}

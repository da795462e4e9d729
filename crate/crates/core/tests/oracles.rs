mod common;

use common::{finite_difference_errors, random_params};
use slimjsp::instance::MAX_GENERATED_DURATION;
use slimjsp::model::params::{glorot_bound, is_bias};
use slimjsp::model::{
    init_params, rollout, sequence_log_prob, sequence_log_prob_grad, DecodeMode, ModelDims,
};
use slimjsp::oracle::{brute_force_optimum, enumerate_sequences};
use slimjsp::train::adam::{flatten, unflatten};
use slimjsp::train::{select_pseudo_label, slim_loss, train_step, Adam, AdamConfig};
use slimjsp::{generate_instance, rng, Instance, Solution};

#[test]
fn generated_durations_are_uniform() {
    // Pearson chi-squared over 1..=99 with 98 degrees of freedom; 133.4757
    // is the 0.99 quantile.
    let bins = MAX_GENERATED_DURATION as usize;
    let mut counts = vec![0usize; bins];
    let mut total = 0usize;
    for seed in 0..1000 {
        let inst = generate_instance(6, 6, seed).unwrap();
        for op in inst.ops() {
            assert!((1..=MAX_GENERATED_DURATION).contains(&op.duration));
            counts[op.duration as usize - 1] += 1;
            total += 1;
        }
    }
    let expected = total as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    assert!(chi2 < 133.4757, "chi2 = {chi2}");
}

#[test]
fn generated_routes_are_uniform_over_machines() {
    // Machine of the first operation, 6000 jobs over 6 machines; the 0.99
    // quantile of chi-squared with 5 degrees of freedom is 15.086.
    let mut counts = [0usize; 6];
    for seed in 0..1000 {
        let inst = generate_instance(6, 6, seed).unwrap();
        for j in 0..6 {
            counts[inst.op(inst.job_start(j)).machine] += 1;
        }
    }
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0)
        .sum();
    assert!(chi2 < 15.086, "chi2 = {chi2}");
}

#[test]
fn glorot_variance() {
    let p = init_params(17, ModelDims::default());
    let mut checked = 0;
    for (name, t) in p.named() {
        if is_bias(&name) {
            assert!(t.as_slice().iter().all(|&v| v == 0.0), "{name}");
            continue;
        }
        let b = glorot_bound(t.rows(), t.cols());
        assert!(t.as_slice().iter().all(|v| v.abs() <= b), "{name}");
        if t.len() < 2000 {
            continue;
        }
        let n = t.len() as f64;
        let mean = t.as_slice().iter().sum::<f64>() / n;
        let var = t.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let want = b * b / 3.0;
        assert!(
            (var / want - 1.0).abs() < 0.1,
            "{name}: var {var}, want {want}"
        );
        checked += 1;
    }
    assert!(checked > 5);
}

#[test]
fn gradients_match_finite_differences() {
    // Every 7th element of every tensor; the acceptance suite checks all.
    let inst = generate_instance(3, 2, 11).unwrap();
    let params = random_params(5, ModelDims::tiny());
    let samples = rollout(&params, &inst, 8, DecodeMode::Sample, 3).unwrap();
    let label = select_pseudo_label(&samples).unwrap();
    let (_, grad) = sequence_log_prob_grad(&params, &inst, &label.decisions).unwrap();
    for r in finite_difference_errors(&params, &grad, &inst, label, 1e-5, 7) {
        assert!(
            r.worst_rel < 1e-4,
            "{}: relative error {:e}",
            r.name,
            r.worst_rel
        );
        assert_eq!(r.small_mismatches, 0, "{}", r.name);
    }
}

#[test]
fn adam_minimizes_a_quadratic() {
    let mut adam = Adam::new(
        AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        },
        1,
    );
    let mut theta = [1.0];
    for _ in 0..100 {
        let g = [2.0 * theta[0]];
        adam.update(&mut theta, &g).unwrap();
    }
    assert!(theta[0].abs() < 0.05, "theta = {}", theta[0]);
    assert_eq!(adam.steps_taken(), 100);
}

/// Loss of `label` before and after one Adam step on its own gradient.
fn one_step_losses(
    params: &slimjsp::model::ModelParams,
    inst: &Instance,
    label: &Solution,
    lr: f64,
) -> (f64, f64) {
    let (lp, grad) = sequence_log_prob_grad(params, inst, &label.decisions).unwrap();
    let before = slim_loss(&lp).unwrap();
    let mut loss_grad = grad.clone();
    for t in loss_grad.tensors_mut() {
        t.scale(-1.0);
    }
    let mut p = params.clone();
    let mut adam = Adam::new(
        AdamConfig {
            lr,
            ..AdamConfig::default()
        },
        p.num_scalars(),
    );
    adam.update_params(&mut p, &loss_grad).unwrap();
    let after = slim_loss(&sequence_log_prob(&p, inst, &label.decisions).unwrap()).unwrap();
    (before, after)
}

#[test]
fn one_adam_step_descends() {
    let mut wins = 0;
    for trial in 0..20 {
        let inst = generate_instance(4, 3, 100 + trial).unwrap();
        let params = random_params(trial, ModelDims::tiny());
        let samples = rollout(&params, &inst, 16, DecodeMode::Sample, trial).unwrap();
        let label = select_pseudo_label(&samples).unwrap();
        let (before, after) = one_step_losses(&params, &inst, label, 1e-4);
        if after < before {
            wins += 1;
        }
    }
    assert!(wins >= 18, "{wins}/20");
}

#[test]
fn flatten_preserves_tensor_order() {
    let p = random_params(2, ModelDims::tiny());
    let flat = flatten(&p);
    assert_eq!(flat.len(), p.num_scalars());
    let mut q = slimjsp::model::ModelParams::zeros(p.dims);
    unflatten(&mut q, &flat);
    assert_eq!(p, q);
}

#[test]
fn uniform_sampling_finds_small_optima() {
    // Zero parameters give a uniform policy over legal jobs.
    let params = slimjsp::model::ModelParams::zeros(ModelDims::default());
    let mut hits = 0;
    for seed in 0..20 {
        let inst = generate_instance(3, 3, seed).unwrap();
        let (opt, _) = brute_force_optimum(&inst, 12).unwrap();
        let samples = rollout(&params, &inst, 256, DecodeMode::Sample, seed).unwrap();
        let best = select_pseudo_label(&samples).unwrap();
        assert!(best.makespan >= opt);
        assert!(samples.iter().all(|s| s.makespan >= best.makespan));
        if best.makespan == opt {
            hits += 1;
        }
    }
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn sequence_probabilities_sum_to_one() {
    for seed in 0..5 {
        let inst = generate_instance(2, 3, seed).unwrap();
        let params = random_params(seed, ModelDims::tiny());
        let total: f64 = enumerate_sequences(&inst, 12)
            .unwrap()
            .iter()
            .map(|d| {
                sequence_log_prob(&params, &inst, d)
                    .unwrap()
                    .iter()
                    .sum::<f64>()
                    .exp()
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }
}

#[test]
fn repeated_steps_raise_label_likelihood() {
    let inst = generate_instance(3, 3, 42).unwrap();
    let mut params = random_params(8, ModelDims::tiny());
    let mut adam = Adam::new(
        AdamConfig {
            lr: 1e-3,
            ..AdamConfig::default()
        },
        params.num_scalars(),
    );
    let batch = [inst.clone()];
    let first = train_step(&mut params, &mut adam, &batch, 16, rng::derive_seed(1, 0)).unwrap();
    let mut last = first.clone();
    for step in 1..200 {
        last = train_step(
            &mut params,
            &mut adam,
            &batch,
            16,
            rng::derive_seed(1, step),
        )
        .unwrap();
    }
    assert!(params.is_finite());
    assert!(
        last.mean_loss() < first.mean_loss(),
        "{} -> {}",
        first.mean_loss(),
        last.mean_loss()
    );
    // The makespan of the labels never gets worse than the optimum bound.
    let (opt, _) = brute_force_optimum(&inst, 12).unwrap();
    assert!(last.instances[0].best_makespan >= opt);
}

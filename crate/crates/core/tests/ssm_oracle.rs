use fractscan_core::ssm::{
    build_kernel, conv_apply, discretize_zoh, grad_selective, lti_states, scan_lti, scan_selective,
    scan_selective_tallied, DiscreteSsmParams, HiddenState, OpTally, SelectiveInputs, SsmParams,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stable_params(rng: &mut ChaCha8Rng, n: usize) -> SsmParams {
    SsmParams::new(
        (0..n).map(|_| rng.random_range(-2.0..-0.1)).collect(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        rng.random_range(0.01..1.0),
    )
    .unwrap()
}

/// Dense ZOH through the matrix exponential: `Ā = exp(ΔA)`, `B̄ = (ΔA)⁻¹(Ā - I)ΔB`.
fn dense_zoh(a: &DMatrix<f64>, b: &DVector<f64>, delta: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.nrows();
    let da = a * delta;
    let a_bar = da.clone().exp();
    let b_bar = da.try_inverse().unwrap() * (&a_bar - DMatrix::identity(n, n)) * (b * delta);
    (a_bar, b_bar)
}

#[test]
fn diagonal_zoh_matches_dense_matrix_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=4 {
        for _ in 0..10 {
            let p = stable_params(&mut rng, n);
            let disc = discretize_zoh(&p).unwrap();
            let a = DMatrix::from_diagonal(&DVector::from_vec(p.a_diag.clone()));
            let (a_bar, b_bar) = dense_zoh(&a, &DVector::from_vec(p.b.clone()), p.delta);
            for i in 0..n {
                assert!((a_bar[(i, i)] - disc.a_bar[i]).abs() < 1e-12);
                assert!((b_bar[i] - disc.b_bar[i]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dense_recurrence_agrees_with_diagonal_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = stable_params(&mut rng, 3);
    let disc = discretize_zoh(&p).unwrap();
    let a = DMatrix::from_diagonal(&DVector::from_vec(p.a_diag.clone()));
    let (a_bar, b_bar) = dense_zoh(&a, &DVector::from_vec(p.b.clone()), p.delta);
    let c = DVector::from_vec(p.c.clone());
    let x: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut h = DVector::zeros(3);
    let fast = scan_lti(&disc, &x, &HiddenState::zeros(3)).unwrap();
    for (t, &xt) in x.iter().enumerate() {
        h = &a_bar * h + &b_bar * xt;
        assert!((c.dot(&h) - fast[t]).abs() < 1e-12);
    }
}

#[test]
fn recurrence_equals_kernel_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let len = rng.random_range(1..=128);
        let disc = discretize_zoh(&stable_params(&mut rng, n)).unwrap();
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rec = scan_lti(&disc, &x, &HiddenState::zeros(n)).unwrap();
        let conv = conv_apply(&build_kernel(&disc, len), &x).unwrap();
        for (r, c) in rec.iter().zip(&conv) {
            worst = worst.max((r - c).abs());
        }
    }
    assert!(worst <= 1e-10, "max deviation {worst:e}");
}

#[test]
fn zoh_branches_meet() {
    // |Δa| straddling the series threshold from both sides, both signs
    for sign in [1.0, -1.0] {
        let z: f64 = sign * 1e-6;
        for z in [
            f64::from_bits(z.to_bits() - 1),
            z,
            f64::from_bits(z.to_bits() + 1),
        ] {
            let p = SsmParams::new(vec![z], vec![1.0], vec![1.0], 1.0).unwrap();
            let series = 1.0 + z / 2.0 + z * z / 6.0;
            let got = discretize_zoh(&p).unwrap().b_bar[0];
            assert!((got - series).abs() < 1e-12);
        }
    }
}

#[test]
fn states_stay_bounded_for_stable_evolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = rng.random_range(1..=8);
        let disc = discretize_zoh(&stable_params(&mut rng, n).checked_stable().unwrap()).unwrap();
        let x: Vec<f64> = (0..256).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x_inf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let b_inf = disc.b_bar.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let a_max = disc.a_bar.iter().fold(0.0f64, |m, &v| m.max(v));
        let bound = b_inf * x_inf / (1.0 - a_max);
        for h in lti_states(&disc, &x, &HiddenState::zeros(n)).unwrap() {
            assert!(h.max_abs() <= bound * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #[test]
    fn lti_is_linear(seed in any::<u64>(), n in 1usize..=6, len in 1usize..=64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let disc = discretize_zoh(&stable_params(&mut rng, n)).unwrap();
        let x1: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x2: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        let h0 = HiddenState::zeros(n);
        let y1 = scan_lti(&disc, &x1, &h0).unwrap();
        let y2 = scan_lti(&disc, &x2, &h0).unwrap();
        let ys = scan_lti(&disc, &sum, &h0).unwrap();
        for t in 0..len {
            prop_assert!((ys[t] - y1[t] - y2[t]).abs() <= 1e-12);
        }
    }

    #[test]
    fn kernel_is_impulse_response(seed in any::<u64>(), n in 1usize..=8, len in 1usize..=64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let disc = discretize_zoh(&stable_params(&mut rng, n)).unwrap();
        let mut impulse = vec![0.0; len];
        impulse[0] = 1.0;
        let response = scan_lti(&disc, &impulse, &HiddenState::zeros(n)).unwrap();
        let kernel = build_kernel(&disc, len);
        for t in 0..len {
            prop_assert!((response[t] - kernel[t]).abs() <= 1e-12);
        }
    }
}

type Pick = fn(&mut Instance) -> &mut Vec<f64>;

struct Instance {
    a: Vec<f64>,
    delta: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    x: Vec<f64>,
    h0: Vec<f64>,
    upstream: Vec<f64>,
    n: usize,
}

impl Instance {
    fn random(seed: u64, n: usize, len: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |count: usize, lo: f64, hi: f64| -> Vec<f64> {
            (0..count).map(|_| rng.random_range(lo..hi)).collect()
        };
        Self {
            a: draw(n, -2.0, -0.1),
            delta: draw(len, 0.05, 0.8),
            b: draw(len * n, -1.0, 1.0),
            c: draw(len * n, -1.0, 1.0),
            x: draw(len, -1.0, 1.0),
            h0: draw(n, -0.5, 0.5),
            upstream: draw(len, -1.0, 1.0),
            n,
        }
    }

    fn loss(&self) -> f64 {
        let inputs =
            SelectiveInputs::new(self.delta.clone(), self.b.clone(), self.c.clone(), self.n)
                .unwrap();
        let h0 = HiddenState::from_vec(self.h0.clone()).unwrap();
        let y = scan_selective(&self.a, &inputs, &self.x, &h0).unwrap();
        y.iter().zip(&self.upstream).map(|(y, g)| y * g).sum()
    }
}

/// Central difference of the loss along every coordinate of one group.
fn finite_difference(inst: &mut Instance, pick: Pick, step: f64) -> Vec<f64> {
    let count = pick(inst).len();
    (0..count)
        .map(|i| {
            let orig = pick(inst)[i];
            pick(inst)[i] = orig + step;
            let plus = inst.loss();
            pick(inst)[i] = orig - step;
            let minus = inst.loss();
            pick(inst)[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

#[test]
fn gradients_match_central_differences() {
    let mut worst = 0.0f64;
    for seed in 0..24u64 {
        let mut inst = Instance::random(seed, 4, 16);
        let inputs =
            SelectiveInputs::new(inst.delta.clone(), inst.b.clone(), inst.c.clone(), 4).unwrap();
        let grads = grad_selective(
            &inst.a,
            &inputs,
            &inst.x,
            &HiddenState::from_vec(inst.h0.clone()).unwrap(),
            &inst.upstream,
        )
        .unwrap();
        let groups: [(Pick, &Vec<f64>); 6] = [
            (|i| &mut i.a, &grads.a_diag),
            (|i| &mut i.delta, &grads.delta),
            (|i| &mut i.b, &grads.b),
            (|i| &mut i.c, &grads.c),
            (|i| &mut i.x, &grads.x),
            (|i| &mut i.h0, &grads.h0),
        ];
        for (pick, analytic) in groups {
            let numeric = finite_difference(&mut inst, pick, 1e-5);
            for (a, n) in analytic.iter().zip(&numeric) {
                worst = worst.max(relative_error(*a, *n));
            }
        }
    }
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

#[test]
fn selective_opcount_is_affine_in_length() {
    let lengths = [64usize, 256, 1024, 4096];
    let counts: Vec<f64> = lengths
        .iter()
        .map(|&len| {
            let inputs = SelectiveInputs::constant(0.1, &[0.5; 8], &[0.5; 8], len).unwrap();
            let mut tally = OpTally::default();
            scan_selective_tallied(
                &[-1.0; 8],
                &inputs,
                &vec![1.0; len],
                &HiddenState::zeros(8),
                &mut tally,
            )
            .unwrap();
            tally.0 as f64
        })
        .collect();
    let slope = (counts[3] - counts[0]) / (lengths[3] - lengths[0]) as f64;
    let intercept = counts[0] - slope * lengths[0] as f64;
    for (&len, &count) in lengths.iter().zip(&counts) {
        let fit = slope * len as f64 + intercept;
        assert!((count - fit).abs() / count < 0.01);
    }
}

#[test]
fn discrete_params_reject_mismatched_lengths() {
    assert!(DiscreteSsmParams::new(vec![0.5, 0.5], vec![1.0], vec![1.0, 1.0]).is_err());
    assert!(SelectiveInputs::new(vec![0.1; 3], vec![1.0; 5], vec![1.0; 6], 2).is_err());
}

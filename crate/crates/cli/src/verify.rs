//! Property suites behind `fractscan verify`.
//!
//! Every check is deterministic for a given seed, so the JSON summary is
//! byte-identical across runs.

use fractscan_core::block::{block_forward, block_opcount, BlockConfig, MergeRule, PatchGrid};
use fractscan_core::curves::{
    generate, generate_hilbert, self_similarity_reduce, shift_order, CellCoord, CurveKind,
    CurveSpec, GridShape,
};
use fractscan_core::metrics::continuity_fraction;
use fractscan_core::ssm::{
    build_kernel, conv_apply, discretize_zoh, grad_selective, scan_lti, scan_selective,
    HiddenState, SelectiveInputs, SsmParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const GRADIENT_TOLERANCE: f64 = 1e-4;
pub const GRADIENT_STEP: f64 = 1e-5;
pub const GRADIENT_SEEDS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Curves,
    Ssm,
    Block,
    All,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub suite: Suite,
    pub seed: u64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_gradient_relative_error: Option<f64>,
    pub properties: Vec<PropertyResult>,
}

struct Recorder {
    suite: &'static str,
    results: Vec<PropertyResult>,
}

impl Recorder {
    fn new(suite: &'static str) -> Self {
        Self {
            suite,
            results: Vec::new(),
        }
    }

    fn check(&mut self, name: &'static str, outcome: Result<String, String>) {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.results.push(PropertyResult {
            suite: self.suite,
            name,
            passed,
            detail,
        });
    }
}

fn ensure(cond: bool, ok: String, fail: String) -> Result<String, String> {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

pub fn run(suite: Suite, seed: u64) -> Summary {
    let mut properties = Vec::new();
    let mut max_gradient_relative_error = None;
    if matches!(suite, Suite::Curves | Suite::All) {
        properties.extend(curves_suite());
    }
    if matches!(suite, Suite::Ssm | Suite::All) {
        let (results, worst) = ssm_suite(seed);
        properties.extend(results);
        max_gradient_relative_error = Some(worst);
    }
    if matches!(suite, Suite::Block | Suite::All) {
        properties.extend(block_suite(seed));
    }
    Summary {
        suite,
        seed,
        passed: properties.iter().all(|p| p.passed),
        max_gradient_relative_error,
        properties,
    }
}

fn curves_suite() -> Vec<PropertyResult> {
    let mut rec = Recorder::new("curves");

    rec.check("bijection", {
        let mut bad = Vec::new();
        for depth in 1..=6u32 {
            for direction in 1..=4 {
                for shift in -1..=1 {
                    let spec = CurveSpec::new(
                        CurveKind::Hilbert,
                        GridShape::square(1 << depth).unwrap(),
                        direction,
                        shift,
                    );
                    if generate(&spec).is_err() {
                        bad.push(format!("d{depth}/dir{direction}/shift{shift}"));
                    }
                }
            }
        }
        ensure(
            bad.is_empty(),
            "72 orders".into(),
            format!("not bijective: {bad:?}"),
        )
    });

    rec.check("continuity", {
        let bad: Vec<String> = (1..=6u32)
            .flat_map(|d| (1..=4u8).map(move |dir| (d, dir)))
            .filter(|&(d, dir)| continuity_fraction(&generate_hilbert(d, dir).unwrap()) != Ok(1.0))
            .map(|(d, dir)| format!("d{d}/dir{dir}"))
            .collect();
        ensure(
            bad.is_empty(),
            "fraction 1 for 24 orders".into(),
            format!("broken: {bad:?}"),
        )
    });

    rec.check("endpoints", {
        let expect = [
            ((0, 0), (7, 0)),
            ((0, 0), (0, 7)),
            ((7, 7), (7, 0)),
            ((7, 7), (0, 7)),
        ];
        let got: Vec<_> = (1..=4)
            .map(|dir| {
                let o = generate_hilbert(3, dir).unwrap();
                let (a, b) = (o.cell_at(0), o.cell_at(63));
                ((a.row, a.col), (b.row, b.col))
            })
            .collect();
        ensure(got == expect, format!("{got:?}"), format!("got {got:?}"))
    });

    rec.check("direction_symmetry", {
        let ok = (1..=6u32).all(|d| {
            let one = generate_hilbert(d, 1).unwrap();
            let two = generate_hilbert(d, 2).unwrap();
            let four = generate_hilbert(d, 4).unwrap();
            let shape = one.shape();
            (0..one.len()).all(|i| {
                two.cell_at(i) == one.cell_at(i).transposed()
                    && four.cell_at(i) == one.cell_at(i).rot180(shape)
            })
        });
        ensure(ok, "depths 1-6".into(), "mismatch".into())
    });

    rec.check("self_similarity", {
        let bad: Vec<String> = (2..=6u32)
            .flat_map(|d| (1..=4u8).map(move |dir| (d, dir)))
            .filter(|&(d, dir)| {
                self_similarity_reduce(&generate_hilbert(d, dir).unwrap()).ok()
                    != generate_hilbert(d - 1, dir).ok()
            })
            .map(|(d, dir)| format!("d{d}/dir{dir}"))
            .collect();
        ensure(
            bad.is_empty(),
            "depths 2-6".into(),
            format!("differs: {bad:?}"),
        )
    });

    rec.check("shift_efficacy", {
        let order = generate_hilbert(3, 1).unwrap();
        let shifted = shift_order(&order, 1).unwrap();
        let gap = |o: &fractscan_core::curves::ScanOrder| {
            o.index_of(CellCoord::new(3, 3))
                .abs_diff(o.index_of(CellCoord::new(3, 4)))
        };
        let (before, after) = (gap(&order), gap(&shifted));
        let detail = format!("gap {before} -> {after}");
        ensure(after < before, detail.clone(), detail)
    });

    rec.results
}

fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> SsmParams {
    SsmParams::new(
        (0..n).map(|_| rng.random_range(-2.0..-0.1)).collect(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        rng.random_range(0.01..1.0),
    )
    .expect("valid dimensions")
}

/// Flat parameter vector of one selective instance: `a | delta | b | c | x`.
struct GradInstance {
    n: usize,
    len: usize,
    theta: Vec<f64>,
    upstream: Vec<f64>,
}

impl GradInstance {
    fn random(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Self {
        let mut theta = Vec::new();
        theta.extend((0..n).map(|_| rng.random_range(-2.0..-0.1)));
        theta.extend((0..len).map(|_| rng.random_range(0.05..0.8)));
        theta.extend((0..2 * len * n + len).map(|_| rng.random_range(-1.0..1.0)));
        let upstream = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self {
            n,
            len,
            theta,
            upstream,
        }
    }

    fn split(theta: &[f64], n: usize, len: usize) -> (&[f64], SelectiveInputs, &[f64]) {
        let (a, rest) = theta.split_at(n);
        let (delta, rest) = rest.split_at(len);
        let (b, rest) = rest.split_at(len * n);
        let (c, x) = rest.split_at(len * n);
        let inputs = SelectiveInputs::new(delta.to_vec(), b.to_vec(), c.to_vec(), n)
            .expect("positive timescales");
        (a, inputs, x)
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        let (a, inputs, x) = Self::split(theta, self.n, self.len);
        let y = scan_selective(a, &inputs, x, &HiddenState::zeros(self.n))
            .expect("consistent dimensions");
        y.iter().zip(&self.upstream).map(|(y, g)| y * g).sum()
    }

    fn analytic(&self) -> Vec<f64> {
        let (a, inputs, x) = Self::split(&self.theta, self.n, self.len);
        let g = grad_selective(a, &inputs, x, &HiddenState::zeros(self.n), &self.upstream)
            .expect("consistent dimensions");
        [g.a_diag, g.delta, g.b, g.c, g.x].concat()
    }

    /// Largest per-coordinate relative error against central differences.
    fn worst_relative_error(&self) -> f64 {
        let analytic = self.analytic();
        let mut theta = self.theta.clone();
        let mut worst = 0.0f64;
        for (i, &a) in analytic.iter().enumerate() {
            let orig = theta[i];
            theta[i] = orig + GRADIENT_STEP;
            let plus = self.loss(&theta);
            theta[i] = orig - GRADIENT_STEP;
            let minus = self.loss(&theta);
            theta[i] = orig;
            let numeric = (plus - minus) / (2.0 * GRADIENT_STEP);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
            worst = worst.max(err);
        }
        worst
    }
}

fn ssm_suite(seed: u64) -> (Vec<PropertyResult>, f64) {
    let mut rec = Recorder::new("ssm");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    rec.check("zoh_fixtures", {
        let lim =
            discretize_zoh(&SsmParams::new(vec![0.0], vec![2.0], vec![1.0], 0.3).unwrap()).unwrap();
        let half = discretize_zoh(
            &SsmParams::new(vec![-1.0], vec![1.0], vec![1.0], std::f64::consts::LN_2).unwrap(),
        )
        .unwrap();
        let ok = lim.a_bar[0] == 1.0
            && lim.b_bar[0] == 0.6
            && (half.a_bar[0] - 0.5).abs() <= 1e-12
            && (half.b_bar[0] - 0.5).abs() <= 1e-12;
        let detail = format!(
            "limit ({}, {}), half-life ({}, {})",
            lim.a_bar[0], lim.b_bar[0], half.a_bar[0], half.b_bar[0]
        );
        ensure(ok, detail.clone(), detail)
    });

    rec.check("zoh_branch_continuity", {
        let mut worst = 0.0f64;
        for z in [1e-6f64, -1e-6] {
            let lo = f64::from_bits(z.to_bits() - 1);
            let hi = f64::from_bits(z.to_bits() + 1);
            let b = |z: f64| {
                discretize_zoh(&SsmParams::new(vec![z], vec![1.0], vec![1.0], 1.0).unwrap())
                    .unwrap()
                    .b_bar[0]
            };
            worst = worst.max((b(lo) - b(hi)).abs());
        }
        ensure(
            worst <= 1e-12,
            format!("jump {worst:e}"),
            format!("jump {worst:e}"),
        )
    });

    rec.check("recurrence_kernel_equivalence", {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let n = rng.random_range(1..=8);
            let len = rng.random_range(1..=128);
            let disc = discretize_zoh(&random_stable(&mut rng, n)).unwrap();
            let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rec_y = scan_lti(&disc, &x, &HiddenState::zeros(n)).unwrap();
            let conv_y = conv_apply(&build_kernel(&disc, len), &x).unwrap();
            for (a, b) in rec_y.iter().zip(&conv_y) {
                worst = worst.max((a - b).abs());
            }
        }
        let detail = format!("100 instances, max deviation {worst:e}");
        ensure(worst <= 1e-10, detail.clone(), detail)
    });

    rec.check("linearity", {
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let n = rng.random_range(1..=8);
            let disc = discretize_zoh(&random_stable(&mut rng, n)).unwrap();
            let x1: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x2: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
            let h0 = HiddenState::zeros(n);
            let (y1, y2, ys) = (
                scan_lti(&disc, &x1, &h0).unwrap(),
                scan_lti(&disc, &x2, &h0).unwrap(),
                scan_lti(&disc, &sum, &h0).unwrap(),
            );
            for t in 0..64 {
                worst = worst.max((ys[t] - y1[t] - y2[t]).abs());
            }
        }
        ensure(
            worst <= 1e-12,
            format!("max deviation {worst:e}"),
            format!("max deviation {worst:e}"),
        )
    });

    let mut worst_gradient = 0.0f64;
    rec.check("gradient_check", {
        for _ in 0..GRADIENT_SEEDS {
            let inst = GradInstance::random(&mut rng, 4, 16);
            worst_gradient = worst_gradient.max(inst.worst_relative_error());
        }
        let detail =
            format!("{GRADIENT_SEEDS} instances N=4 L=16, max relative error {worst_gradient:e}");
        ensure(worst_gradient <= GRADIENT_TOLERANCE, detail.clone(), detail)
    });

    (rec.results, worst_gradient)
}

fn random_grid(rng: &mut ChaCha8Rng, side: usize, channels: usize) -> PatchGrid {
    PatchGrid::from_fn(GridShape::square(side).unwrap(), channels, |_, _, _| {
        rng.random_range(-1.0..1.0)
    })
    .unwrap()
}

fn block_suite(seed: u64) -> Vec<PropertyResult> {
    let mut rec = Recorder::new("block");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b10c);

    rec.check("identity", {
        let grid = random_grid(&mut rng, 8, 4);
        let diff = block_forward(&grid, &BlockConfig::identity())
            .unwrap()
            .max_abs_diff(&grid);
        ensure(
            diff <= 1e-12,
            format!("max deviation {diff:e}"),
            format!("max deviation {diff:e}"),
        )
    });

    let mut transpose_worst = 0.0f64;
    let mut rotate_worst = 0.0f64;
    for i in 0..10 {
        let grid = random_grid(&mut rng, 8, 4);
        let config = BlockConfig {
            state_size: 8,
            merge_rule: if i % 2 == 0 {
                MergeRule::Sum
            } else {
                MergeRule::Mean
            },
            param_seed: seed.wrapping_add(i),
            share_directions: true,
            ..BlockConfig::default()
        };
        let out = block_forward(&grid, &config).unwrap();
        transpose_worst = transpose_worst.max(
            block_forward(&grid.transposed(), &config)
                .unwrap()
                .max_abs_diff(&out.transposed()),
        );
        rotate_worst = rotate_worst.max(
            block_forward(&grid.rot180(), &config)
                .unwrap()
                .max_abs_diff(&out.rot180()),
        );
    }
    rec.check(
        "transpose_equivariance",
        ensure(
            transpose_worst <= 1e-10,
            format!("10 grids, max deviation {transpose_worst:e}"),
            format!("max deviation {transpose_worst:e}"),
        ),
    );
    rec.check(
        "rot180_equivariance",
        ensure(
            rotate_worst <= 1e-10,
            format!("10 grids, max deviation {rotate_worst:e}"),
            format!("max deviation {rotate_worst:e}"),
        ),
    );

    rec.check("determinism", {
        let grid = random_grid(&mut rng, 8, 2);
        let config = BlockConfig {
            param_seed: seed,
            ..BlockConfig::default()
        };
        let a = block_forward(&grid, &config).unwrap();
        let b = block_forward(&grid, &config).unwrap();
        let same = a
            .data()
            .iter()
            .zip(b.data())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        ensure(same, "bit-identical".into(), "outputs differ".into())
    });

    rec.check("linear_opcount", {
        let config = BlockConfig::default();
        let lens = [64usize, 256, 1024, 4096];
        let counts: Vec<f64> = lens
            .iter()
            .map(|&l| {
                let side = (l as f64).sqrt() as usize;
                block_opcount(GridShape::square(side).unwrap(), 4, &config) as f64
            })
            .collect();
        let residual = affine_residual(&lens.map(|l| l as f64), &counts);
        let detail = format!("counts {counts:?}, relative residual {residual:e}");
        ensure(residual < 0.01, detail.clone(), detail)
    });

    rec.results
}

/// Largest relative residual of the least-squares line through `(xs, ys)`.
pub fn affine_residual(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).abs() / y.abs())
        .fold(0.0, f64::max)
}

//! Diagonal state-space model: zero-order-hold discretisation, the
//! time-invariant recurrence and its convolution kernel, and the selective
//! (time-variant) scan with reverse-mode gradients.
//!
//! All scans are sequential in time and run in `f64`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Below this `|Δ·a|` the input factor of the hold uses its Taylor series.
pub const ZOH_SERIES_THRESHOLD: f64 = 1e-6;

/// Elementary operations the selective scan performs per state entry and step:
/// `Δ·a`, `exp`, `ā·h`, `Δ·b`, `(Δ·b)·x`, the state add, `c·h` and the output add.
pub const SELECTIVE_OPS_PER_STATE_STEP: u64 = 8;

/// Continuous parameters with a diagonal evolution matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SsmParams {
    pub a_diag: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub delta: f64,
}

impl SsmParams {
    pub fn new(a_diag: Vec<f64>, b: Vec<f64>, c: Vec<f64>, delta: f64) -> Result<Self> {
        if a_diag.is_empty() {
            return Err(Error::ZeroSize("state size"));
        }
        check_len("b", a_diag.len(), b.len())?;
        check_len("c", a_diag.len(), c.len())?;
        check_delta(0, delta)?;
        Ok(Self {
            a_diag,
            b,
            c,
            delta,
        })
    }

    pub fn state_size(&self) -> usize {
        self.a_diag.len()
    }

    /// Rejects any positive evolution entry.
    pub fn checked_stable(self) -> Result<Self> {
        match self.a_diag.iter().position(|&a| a > 0.0) {
            Some(index) => Err(Error::UnstableEvolution { index }),
            None => Ok(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSsmParams {
    pub a_bar: Vec<f64>,
    pub b_bar: Vec<f64>,
    pub c: Vec<f64>,
}

impl DiscreteSsmParams {
    pub fn new(a_bar: Vec<f64>, b_bar: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if a_bar.is_empty() {
            return Err(Error::ZeroSize("state size"));
        }
        check_len("b_bar", a_bar.len(), b_bar.len())?;
        check_len("c", a_bar.len(), c.len())?;
        Ok(Self { a_bar, b_bar, c })
    }

    pub fn state_size(&self) -> usize {
        self.a_bar.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState(Vec<f64>);

impl HiddenState {
    pub fn zeros(state_size: usize) -> Self {
        Self(vec![0.0; state_size])
    }

    pub fn from_vec(h: Vec<f64>) -> Result<Self> {
        match h.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(i)),
            None => Ok(Self(h)),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Per-step timescales and projections for the selective scan, stored
/// row-major as `len x state_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveInputs {
    delta: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    state_size: usize,
}

impl SelectiveInputs {
    pub fn new(delta: Vec<f64>, b: Vec<f64>, c: Vec<f64>, state_size: usize) -> Result<Self> {
        if state_size == 0 {
            return Err(Error::ZeroSize("state size"));
        }
        if delta.is_empty() {
            return Err(Error::EmptySequence);
        }
        for (i, &d) in delta.iter().enumerate() {
            check_delta(i, d)?;
        }
        check_len("b rows", delta.len() * state_size, b.len())?;
        check_len("c rows", delta.len() * state_size, c.len())?;
        Ok(Self {
            delta,
            b,
            c,
            state_size,
        })
    }

    /// Same `Δ`, `B` and `C` at every one of `len` steps.
    pub fn constant(delta: f64, b: &[f64], c: &[f64], len: usize) -> Result<Self> {
        Self::new(vec![delta; len], b.repeat(len), c.repeat(len), b.len())
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn state_size(&self) -> usize {
        self.state_size
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn b_row(&self, t: usize) -> &[f64] {
        &self.b[t * self.state_size..(t + 1) * self.state_size]
    }

    pub fn c_row(&self, t: usize) -> &[f64] {
        &self.c[t * self.state_size..(t + 1) * self.state_size]
    }
}

/// Running count of elementary floating-point operations.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpTally(pub u64);

impl OpTally {
    #[inline]
    pub fn add(&mut self, ops: u64) {
        self.0 += ops;
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

fn check_delta(index: usize, delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveDelta { index })
    }
}

/// `(exp(z) - 1) / z`, continuous through `z = 0`.
pub fn hold_factor(z: f64) -> f64 {
    if z.abs() < ZOH_SERIES_THRESHOLD {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        libm::expm1(z) / z
    }
}

/// Zero-order-hold discretisation: `ā = exp(Δa)`, `b̄ = (Δa)⁻¹(exp(Δa) - 1)·Δb`.
pub fn discretize_zoh(params: &SsmParams) -> Result<DiscreteSsmParams> {
    check_delta(0, params.delta)?;
    let delta = params.delta;
    let (a_bar, b_bar) = params
        .a_diag
        .iter()
        .zip(&params.b)
        .map(|(&a, &b)| {
            let z = delta * a;
            (libm::exp(z), hold_factor(z) * delta * b)
        })
        .unzip();
    Ok(DiscreteSsmParams {
        a_bar,
        b_bar,
        c: params.c.clone(),
    })
}

fn check_scan_dims(state_size: usize, x: &[f64], h0: &HiddenState) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptySequence);
    }
    check_len("initial state", state_size, h0.len())
}

/// Hidden states `h_1..h_L` of the time-invariant recurrence `h_t = ā ⊙ h_{t-1} + b̄ x_t`.
pub fn lti_states(
    disc: &DiscreteSsmParams,
    x: &[f64],
    h0: &HiddenState,
) -> Result<Vec<HiddenState>> {
    check_scan_dims(disc.state_size(), x, h0)?;
    let mut h = h0.0.clone();
    let mut states = Vec::with_capacity(x.len());
    for &xt in x {
        for ((hi, &a), &b) in h.iter_mut().zip(&disc.a_bar).zip(&disc.b_bar) {
            *hi = a * *hi + b * xt;
        }
        states.push(HiddenState(h.clone()));
    }
    Ok(states)
}

/// Time-invariant scan, `y_t = c · h_t`.
pub fn scan_lti(disc: &DiscreteSsmParams, x: &[f64], h0: &HiddenState) -> Result<Vec<f64>> {
    check_scan_dims(disc.state_size(), x, h0)?;
    let mut h = h0.0.clone();
    Ok(x.iter()
        .map(|&xt| {
            let mut y = 0.0;
            for (((hi, &a), &b), &c) in h.iter_mut().zip(&disc.a_bar).zip(&disc.b_bar).zip(&disc.c)
            {
                *hi = a * *hi + b * xt;
                y += c * *hi;
            }
            y
        })
        .collect())
}

/// Convolution kernel `K_k = c · ā^k b̄` for `k < len`.
pub fn build_kernel(disc: &DiscreteSsmParams, len: usize) -> Vec<f64> {
    // power[i] holds ā_i^k b̄_i
    let mut power = disc.b_bar.clone();
    (0..len)
        .map(|_| {
            let k = power.iter().zip(&disc.c).map(|(p, c)| p * c).sum();
            for (p, &a) in power.iter_mut().zip(&disc.a_bar) {
                *p *= a;
            }
            k
        })
        .collect()
}

/// Causal convolution `y_t = Σ_{k ≤ t} K_k x_{t-k}`.
pub fn conv_apply(kernel: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_len("kernel", x.len(), kernel.len())?;
    Ok((0..x.len())
        .map(|t| (0..=t).map(|k| kernel[k] * x[t - k]).sum())
        .collect())
}

fn check_selective(
    a_diag: &[f64],
    inputs: &SelectiveInputs,
    x: &[f64],
    h0: &HiddenState,
) -> Result<()> {
    check_len("a_diag", inputs.state_size(), a_diag.len())?;
    check_len("input sequence", inputs.len(), x.len())?;
    check_scan_dims(inputs.state_size(), x, h0)
}

/// Selective scan: `ā_t = exp(Δ_t a)`, `b̄_t = Δ_t b_t`,
/// `h_t = ā_t ⊙ h_{t-1} + b̄_t x_t`, `y_t = c_t · h_t`.
pub fn scan_selective(
    a_diag: &[f64],
    inputs: &SelectiveInputs,
    x: &[f64],
    h0: &HiddenState,
) -> Result<Vec<f64>> {
    scan_selective_tallied(a_diag, inputs, x, h0, &mut OpTally::default())
}

/// [`scan_selective`] that also counts elementary operations into `tally`.
pub fn scan_selective_tallied(
    a_diag: &[f64],
    inputs: &SelectiveInputs,
    x: &[f64],
    h0: &HiddenState,
    tally: &mut OpTally,
) -> Result<Vec<f64>> {
    check_selective(a_diag, inputs, x, h0)?;
    let mut h = h0.0.clone();
    let mut y = Vec::with_capacity(x.len());
    for (t, &xt) in x.iter().enumerate() {
        y.push(selective_step(a_diag, inputs, t, xt, &mut h, tally));
    }
    Ok(y)
}

#[inline]
fn selective_step(
    a_diag: &[f64],
    inputs: &SelectiveInputs,
    t: usize,
    xt: f64,
    h: &mut [f64],
    tally: &mut OpTally,
) -> f64 {
    let dt = inputs.delta[t];
    let mut yt = 0.0;
    for (((hi, &a), &b), &c) in h
        .iter_mut()
        .zip(a_diag)
        .zip(inputs.b_row(t))
        .zip(inputs.c_row(t))
    {
        let a_bar = libm::exp(dt * a);
        *hi = a_bar * *hi + (dt * b) * xt;
        yt += c * *hi;
    }
    tally.add(SELECTIVE_OPS_PER_STATE_STEP * h.len() as u64);
    yt
}

/// Exact operation count of one selective scan of `len` steps.
pub fn selective_opcount(len: usize, state_size: usize) -> u64 {
    SELECTIVE_OPS_PER_STATE_STEP * len as u64 * state_size as u64
}

/// Gradients of `Σ_t upstream_t · y_t`. Matrix-shaped groups are row-major
/// `len x state_size` like [`SelectiveInputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelectiveGradients {
    pub a_diag: Vec<f64>,
    pub delta: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub x: Vec<f64>,
    pub h0: Vec<f64>,
}

/// Reverse-mode gradients of the selective scan, from a backward recurrence
/// over the stored forward states.
pub fn grad_selective(
    a_diag: &[f64],
    inputs: &SelectiveInputs,
    x: &[f64],
    h0: &HiddenState,
    upstream: &[f64],
) -> Result<SelectiveGradients> {
    check_selective(a_diag, inputs, x, h0)?;
    check_len("upstream", x.len(), upstream.len())?;
    let n = inputs.state_size();
    let len = x.len();

    // states[t] = h_{t-1}; states[len] = h_{len-1}
    let mut states = Vec::with_capacity((len + 1) * n);
    states.extend_from_slice(h0.as_slice());
    let mut h = h0.0.clone();
    let mut tally = OpTally::default();
    for (t, &xt) in x.iter().enumerate() {
        selective_step(a_diag, inputs, t, xt, &mut h, &mut tally);
        states.extend_from_slice(&h);
    }

    let mut grads = SelectiveGradients {
        a_diag: vec![0.0; n],
        delta: vec![0.0; len],
        b: vec![0.0; len * n],
        c: vec![0.0; len * n],
        x: vec![0.0; len],
        h0: vec![0.0; n],
    };
    // carry = ā_{t+1} ⊙ dL/dh_{t+1}
    let mut carry = vec![0.0; n];
    for t in (0..len).rev() {
        let g = upstream[t];
        let dt = inputs.delta[t];
        let xt = x[t];
        let h_prev = &states[t * n..(t + 1) * n];
        let h_cur = &states[(t + 1) * n..(t + 2) * n];
        let b_row = inputs.b_row(t);
        let c_row = inputs.c_row(t);
        let mut d_delta = 0.0;
        let mut d_x = 0.0;
        for i in 0..n {
            grads.c[t * n + i] = g * h_cur[i];
            let dh = carry[i] + g * c_row[i];
            let a_bar = libm::exp(dt * a_diag[i]);
            let d_a_bar = dh * h_prev[i] * a_bar;
            grads.a_diag[i] += d_a_bar * dt;
            d_delta += d_a_bar * a_diag[i] + dh * b_row[i] * xt;
            grads.b[t * n + i] = dh * dt * xt;
            d_x += dh * dt * b_row[i];
            carry[i] = a_bar * dh;
        }
        grads.delta[t] = d_delta;
        grads.x[t] = d_x;
    }
    grads.h0 = carry;
    Ok(grads)
}

//! Operator design by mini-batch ADAM on the SCF mismatch.
//!
//! For steering grids `C` (field bandwidth) and `T` (target bandwidth) with
//! the angle on the trailing axis, the error on a grid of angles is
//!
//! ```text
//! e[i][j] = <phi C_i, phi C_j> - <T_i, T_j>
//! E(phi)  = sum_ij |e[i][j]|^2
//! ```
//!
//! and the conjugate Wirtinger derivative, flattening the `(freq, element)`
//! axes into one, is `dE/d conj(phi) = 2 (phi C) e C^H`. It vanishes wherever
//! `e` does.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifold::WidebandManifold;
use crate::multiway::{contract, ComplexMultiArray};

/// Linear map `[out_freq, out_element, in_freq, in_element]` applied to
/// field snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTensor {
    tensor: ComplexMultiArray,
}

impl OperatorTensor {
    pub fn new(tensor: ComplexMultiArray) -> Result<Self> {
        if tensor.ndim() != 4 {
            return Err(Error::dim(format!(
                "operator must have 4 axes, got {:?}",
                tensor.dims()
            )));
        }
        Ok(Self { tensor })
    }

    /// Kronecker delta on both axis pairs.
    pub fn identity(n_freq: usize, n_elements: usize) -> Self {
        let tensor = ComplexMultiArray::from_fn(&[n_freq, n_elements, n_freq, n_elements], |i| {
            if i[0] == i[2] && i[1] == i[3] {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self { tensor }
    }

    /// Standard complex normal entries, square operator.
    pub fn random(n_freq: usize, n_elements: usize, seed: u64) -> Result<Self> {
        let tensor = ComplexMultiArray::random_complex_normal(
            &[n_freq, n_elements, n_freq, n_elements],
            seed,
        )?;
        Ok(Self { tensor })
    }

    pub fn tensor(&self) -> &ComplexMultiArray {
        &self.tensor
    }

    pub fn into_tensor(self) -> ComplexMultiArray {
        self.tensor
    }

    pub fn output_dims(&self) -> [usize; 2] {
        [self.tensor.dims()[0], self.tensor.dims()[1]]
    }

    pub fn input_dims(&self) -> [usize; 2] {
        [self.tensor.dims()[2], self.tensor.dims()[3]]
    }
}

/// Target (`T`) and input (`C`) steering grids evaluated on shared angles.
#[derive(Debug, Clone)]
pub struct ManifoldGridPair {
    target: ComplexMultiArray,
    input: ComplexMultiArray,
    angles: Vec<f64>,
}

impl ManifoldGridPair {
    pub fn new(target: ComplexMultiArray, input: ComplexMultiArray, angles: Vec<f64>) -> Result<Self> {
        let ok = target.ndim() == 3
            && input.ndim() == 3
            && target.dims()[2] == angles.len()
            && input.dims()[2] == angles.len();
        if !ok {
            return Err(Error::dim(format!(
                "target {:?} and input {:?} must be [f, m, {}]",
                target.dims(),
                input.dims(),
                angles.len()
            )));
        }
        Ok(Self {
            target,
            input,
            angles,
        })
    }

    /// `input` is the field (narrow) manifold, `target` the wide one.
    pub fn from_manifolds(
        input: &WidebandManifold,
        target: &WidebandManifold,
        angles: &[f64],
    ) -> Result<Self> {
        Self::new(
            target.steering_grid(angles)?,
            input.steering_grid(angles)?,
            angles.to_vec(),
        )
    }

    pub fn target(&self) -> &ComplexMultiArray {
        &self.target
    }

    pub fn input(&self) -> &ComplexMultiArray {
        &self.input
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

/// Hyperparameters of the ADAM design loop.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignConfig {
    /// Number of batches `K`.
    pub batches: u64,
    /// Angles per batch `S`.
    pub batch_size: usize,
    pub theta_low: f64,
    pub theta_high: f64,
    /// Step size `alpha`.
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub heldout_grid_size: usize,
    /// Held-out evaluation period in iterations; 0 disables it.
    pub checkpoint_every: u64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            batches: 250_000,
            batch_size: 50,
            theta_low: -PI,
            theta_high: PI,
            step_size: 1e-3,
            beta1: 0.3,
            beta2: 0.999,
            epsilon: 1e-15,
            seed: 0,
            heldout_grid_size: 181,
            checkpoint_every: 1000,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(self.theta_low >= -PI && self.theta_low.is_finite()) {
            return Err(Error::config("theta_low", "must lie in [-pi, pi)"));
        }
        if !(self.theta_high <= PI && self.theta_high > self.theta_low) {
            return Err(Error::config("theta_high", "must exceed theta_low and be at most pi"));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::config("alpha", "must be positive"));
        }
        for (key, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::config(key, format!("{b} outside [0, 1]")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::config("epsilon", "must be positive"));
        }
        if self.heldout_grid_size < 1 {
            return Err(Error::config("heldout_grid_size", "must be at least 1"));
        }
        Ok(())
    }

    /// Fixed evaluation grid: cell midpoints of `(theta_low, theta_high)`,
    /// independent of the training draws.
    pub fn heldout_angles(&self) -> Vec<f64> {
        let n = self.heldout_grid_size;
        let step = (self.theta_high - self.theta_low) / n as f64;
        (0..n).map(|i| self.theta_low + (i as f64 + 0.5) * step).collect()
    }
}

/// First and second moment accumulators. The per-entry scale
/// `(v + eps)^(-1/2)` is computed on the fly.
#[derive(Debug, Clone)]
pub struct AdamState {
    z: ComplexMultiArray,
    v: Vec<f64>,
    iteration: u64,
}

impl AdamState {
    pub fn new(dims: &[usize]) -> Self {
        let z = ComplexMultiArray::zeros(dims);
        let v = vec![0.0; z.len()];
        Self { z, v, iteration: 0 }
    }

    pub fn momentum(&self) -> &ComplexMultiArray {
        &self.z
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.v
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }
}

fn check_pair(op: &OperatorTensor, pair: &ManifoldGridPair) -> Result<()> {
    let in_dims = op.input_dims();
    if pair.input.dims()[..2] != in_dims {
        return Err(Error::dim(format!(
            "operator input {:?} does not match manifold {:?}",
            in_dims,
            &pair.input.dims()[..2]
        )));
    }
    if pair.target.dims()[..2] != op.output_dims() {
        return Err(Error::dim(format!(
            "operator output {:?} does not match target manifold {:?}",
            op.output_dims(),
            &pair.target.dims()[..2]
        )));
    }
    Ok(())
}

fn gram(grid: &ComplexMultiArray) -> Result<ComplexMultiArray> {
    contract(&grid.conj(), grid, &[(0, 0), (1, 1)])
}

/// `phi C` and the error matrix, shared by objective and gradient.
fn mapped_and_error(op: &OperatorTensor, pair: &ManifoldGridPair) -> Result<(ComplexMultiArray, ComplexMultiArray)> {
    check_pair(op, pair)?;
    let mapped = contract(op.tensor(), &pair.input, &[(2, 0), (3, 1)])?;
    let err = gram(&mapped)?.sub(&gram(&pair.target)?)?;
    Ok((mapped, err))
}

/// `e[i][j] = <phi C_i, phi C_j> - <T_i, T_j>`, shape `[n_angles, n_angles]`.
pub fn error_matrix(op: &OperatorTensor, pair: &ManifoldGridPair) -> Result<ComplexMultiArray> {
    Ok(mapped_and_error(op, pair)?.1)
}

/// Squared Frobenius norm of [`error_matrix`].
pub fn objective(op: &OperatorTensor, pair: &ManifoldGridPair) -> Result<f64> {
    Ok(error_matrix(op, pair)?.norm_sqr())
}

/// `2 (phi C) W C^H` for an `[n_angles, n_angles]` weight `W`.
fn gradient_with_weight(mapped: &ComplexMultiArray, weight: &ComplexMultiArray, input: &ComplexMultiArray) -> Result<ComplexMultiArray> {
    let left = contract(mapped, weight, &[(2, 0)])?;
    Ok(contract(&left, &input.conj(), &[(2, 2)])?.scale(Complex64::new(2.0, 0.0)))
}

/// Conjugate Wirtinger derivative `dE/d conj(phi)`, dims of the operator.
///
/// Equals `(dE/d Re phi + j dE/d Im phi) / 2`; `phi - eta * G` descends for
/// small `eta > 0`.
pub fn wirtinger_gradient(op: &OperatorTensor, pair: &ManifoldGridPair) -> Result<ComplexMultiArray> {
    Ok(objective_and_gradient(op, pair)?.1)
}

/// Objective and gradient in one pass.
pub fn objective_and_gradient(op: &OperatorTensor, pair: &ManifoldGridPair) -> Result<(f64, ComplexMultiArray)> {
    let (mapped, err) = mapped_and_error(op, pair)?;
    let grad = gradient_with_weight(&mapped, &err, &pair.input)?;
    Ok((err.norm_sqr(), grad))
}

/// The two terms of the gradient, `(2 phi C C^H phi^H phi C C^H, 2 phi C T^H T C^H)`;
/// the gradient is their difference. The first is cubic in `phi`, the
/// second linear.
pub fn wirtinger_gradient_terms(
    op: &OperatorTensor,
    pair: &ManifoldGridPair,
) -> Result<(ComplexMultiArray, ComplexMultiArray)> {
    check_pair(op, pair)?;
    let mapped = contract(op.tensor(), &pair.input, &[(2, 0), (3, 1)])?;
    let quartic = gradient_with_weight(&mapped, &gram(&mapped)?, &pair.input)?;
    let quadratic = gradient_with_weight(&mapped, &gram(&pair.target)?, &pair.input)?;
    Ok((quartic, quadratic))
}

/// One ADAM update without bias correction:
///
/// ```text
/// z <- b1 z + (1 - b1) d
/// v <- b2 v + (1 - b2) |d|^2
/// phi <- phi - alpha z (v + eps)^(-1/2)
/// ```
pub fn adam_step(
    op: &mut OperatorTensor,
    state: &mut AdamState,
    gradient: &ComplexMultiArray,
    config: &DesignConfig,
) -> Result<()> {
    if gradient.dims() != op.tensor.dims() || state.z.dims() != op.tensor.dims() {
        return Err(Error::dim(format!(
            "gradient {:?}, state {:?} and operator {:?} differ",
            gradient.dims(),
            state.z.dims(),
            op.tensor.dims()
        )));
    }
    let (b1, b2) = (config.beta1, config.beta2);
    let alpha = config.step_size;
    let eps = config.epsilon;
    let phi = op.tensor.data_mut();
    let z = state.z.data_mut();
    for (((p, z), v), d) in phi
        .iter_mut()
        .zip(z.iter_mut())
        .zip(state.v.iter_mut())
        .zip(gradient.data())
    {
        *z = *z * b1 + *d * (1.0 - b1);
        *v = b2 * *v + (1.0 - b2) * d.norm_sqr();
        let w = (*v + eps).sqrt().recip();
        *p -= *z * (alpha * w);
    }
    state.iteration += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    /// Completed iterations.
    pub iteration: u64,
    /// Objective on the fixed held-out grid.
    pub heldout_error: f64,
    /// Objective of the batch used in the last iteration.
    pub batch_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    /// Held-out objective of the random initialization.
    pub initial_heldout_error: f64,
    pub entries: Vec<LogEntry>,
}

/// Receives held-out evaluations as the design loop runs.
pub trait ProgressSink {
    fn checkpoint(&mut self, entry: &LogEntry, op: &OperatorTensor) -> Result<()>;
}

/// Discards progress.
pub struct NoProgress;

impl ProgressSink for NoProgress {
    fn checkpoint(&mut self, _: &LogEntry, _: &OperatorTensor) -> Result<()> {
        Ok(())
    }
}

impl<F> ProgressSink for F
where
    F: FnMut(&LogEntry, &OperatorTensor) -> Result<()>,
{
    fn checkpoint(&mut self, entry: &LogEntry, op: &OperatorTensor) -> Result<()> {
        self(entry, op)
    }
}

fn draw_angles<R: Rng>(rng: &mut R, n: usize, low: f64, high: f64) -> Vec<f64> {
    // high - u * span with u in [0, 1) lands in (low, high].
    let span = high - low;
    (0..n).map(|_| high - rng.random::<f64>() * span).collect()
}

/// Runs the ADAM design loop from a standard complex normal start.
///
/// `input` is the field manifold the operator acts on, `target` the
/// wide-band manifold whose SCF it should mimic.
pub fn design_operator(
    input: &WidebandManifold,
    target: &WidebandManifold,
    config: &DesignConfig,
    sink: &mut dyn ProgressSink,
) -> Result<(OperatorTensor, TrainingLog)> {
    config.validate()?;
    if input.dims() != target.dims() {
        return Err(Error::dim(format!(
            "field manifold {:?} and target manifold {:?} differ",
            input.dims(),
            target.dims()
        )));
    }
    let [nf, nr] = input.dims();
    let mut op = OperatorTensor::random(nf, nr, config.seed)?;
    let mut state = AdamState::new(op.tensor().dims());

    let heldout = ManifoldGridPair::from_manifolds(input, target, &config.heldout_angles())?;
    let mut log = TrainingLog {
        initial_heldout_error: objective(&op, &heldout)?,
        entries: Vec::new(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    for k in 0..config.batches {
        let angles = draw_angles(&mut rng, config.batch_size, config.theta_low, config.theta_high);
        let batch = ManifoldGridPair::from_manifolds(input, target, &angles)?;
        let (batch_error, grad) = objective_and_gradient(&op, &batch)?;
        adam_step(&mut op, &mut state, &grad, config)?;

        let done = k + 1;
        if config.checkpoint_every > 0 && done % config.checkpoint_every == 0 {
            let entry = LogEntry {
                iteration: done,
                heldout_error: objective(&op, &heldout)?,
                batch_error,
            };
            sink.checkpoint(&entry, &op)?;
            log.entries.push(entry);
        }
    }
    Ok((op, log))
}

//! Spatial correlation functions, correlation functions of snapshots, and
//! side-lobe metrics, with and without a linear operator in the signal path.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::design::OperatorTensor;
use crate::error::{Error, Result};
use crate::manifold::{delay_steering, wrap_angle, FrequencyGrid, WidebandManifold};
use crate::multiway::{contract, inner_product, ComplexMultiArray};

/// Reported in place of `-inf` dB when nothing is left outside the main lobe.
pub const PSL_FLOOR_DB: f64 = -300.0;

/// Main-lobe exclusion used when none is given, radians (5 degrees).
pub const DEFAULT_MAINLOBE_HALFWIDTH: f64 = 5.0 * PI / 180.0;

/// Number of angles in the default evaluation grid (0.5 degree steps).
pub const DEFAULT_GRID_SIZE: usize = 720;

/// `n` uniformly spaced azimuths covering `(-pi, pi]`, ending at `pi`.
pub fn uniform_angle_grid(n: usize) -> Vec<f64> {
    let step = 2.0 * PI / n as f64;
    (0..n)
        .map(|i| if i + 1 == n { PI } else { -PI + (i + 1) as f64 * step })
        .collect()
}

/// Absolute angular separation on the circle.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Spatial correlation `zeta[i][j] = <a(theta_i), a(theta_j)>`, conjugate
/// in the first argument.
#[derive(Debug, Clone)]
pub struct ScfMap {
    angles: Vec<f64>,
    values: ComplexMultiArray,
    normalized: bool,
}

impl ScfMap {
    pub fn new(angles: Vec<f64>, values: ComplexMultiArray, normalized: bool) -> Result<Self> {
        let n = angles.len();
        if values.dims() != [n, n] {
            return Err(Error::dim(format!(
                "scf values {:?} do not match {n} angles",
                values.dims()
            )));
        }
        Ok(Self {
            angles,
            values,
            normalized,
        })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn values(&self) -> &ComplexMultiArray {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values.data()[i * self.angles.len() + j]
    }

    /// Correlation-coefficient form, `zeta_ij / sqrt(zeta_ii zeta_jj)`.
    /// Rows with a vanishing diagonal are left at zero.
    pub fn normalized(&self) -> ScfMap {
        let n = self.angles.len();
        let diag: Vec<f64> = (0..n).map(|i| self.get(i, i).re.max(0.0).sqrt()).collect();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let d = diag[i] * diag[j];
                if d > 0.0 {
                    data[i * n + j] = if i == j {
                        Complex64::new(1.0, 0.0)
                    } else {
                        self.get(i, j) / d
                    };
                }
            }
        }
        ScfMap {
            angles: self.angles.clone(),
            values: ComplexMultiArray::from_parts(vec![n, n], data),
            normalized: true,
        }
    }

    /// Largest `|zeta_ij|` over pairs further apart than `exclusion` radians.
    pub fn max_off_diagonal(&self, exclusion: f64) -> f64 {
        let n = self.angles.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if angular_distance(self.angles[i], self.angles[j]) > exclusion {
                    worst = worst.max(self.get(i, j).norm());
                }
            }
        }
        worst
    }

    /// Frobenius norm of the entrywise difference.
    pub fn distance(&self, other: &ScfMap) -> Result<f64> {
        Ok(self.values.sub(&other.values)?.frobenius_norm())
    }
}

/// Correlation function over azimuth at a fixed normalized delay.
#[derive(Debug, Clone)]
pub struct CorrMap {
    angles: Vec<f64>,
    tau: f64,
    values: Vec<Complex64>,
}

impl CorrMap {
    pub fn new(angles: Vec<f64>, tau: f64, values: Vec<Complex64>) -> Result<Self> {
        if angles.len() != values.len() {
            return Err(Error::dim(format!(
                "{} angles but {} correlation values",
                angles.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::domain("non-finite correlation value"));
        }
        Ok(Self { angles, tau, values })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Angle of the largest magnitude.
    pub fn peak_angle(&self) -> f64 {
        self.angles[argmax(&self.magnitudes())]
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn check_halfwidth(angles: &[f64], halfwidth: f64) -> Result<()> {
    let lo = angles.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = angles.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(halfwidth > 0.0 && halfwidth < hi - lo) {
        return Err(Error::domain(format!(
            "main-lobe half-width {halfwidth} must be positive and below the grid span {}",
            hi - lo
        )));
    }
    Ok(())
}

/// Side-lobe ratio in dB of one magnitude profile around its global peak.
fn profile_psl(angles: &[f64], mags: &[f64], halfwidth: f64) -> Result<f64> {
    let peak = argmax(mags);
    let mut outside = None::<f64>;
    for (i, &m) in mags.iter().enumerate() {
        if angular_distance(angles[i], angles[peak]) > halfwidth {
            outside = Some(outside.map_or(m, |o| o.max(m)));
        }
    }
    let outside = outside.ok_or_else(|| {
        Error::domain(format!("no grid angle lies outside +/-{halfwidth} rad of the peak"))
    })?;
    if mags[peak] <= 0.0 || outside <= 0.0 {
        return Ok(PSL_FLOOR_DB);
    }
    Ok((20.0 * (outside / mags[peak]).log10()).max(PSL_FLOOR_DB))
}

/// Peak side-lobe level in dB relative to the main-lobe peak.
pub trait PeakSidelobe {
    fn peak_sidelobe_level(&self, mainlobe_halfwidth: f64) -> Result<f64>;
}

impl PeakSidelobe for CorrMap {
    fn peak_sidelobe_level(&self, mainlobe_halfwidth: f64) -> Result<f64> {
        check_halfwidth(&self.angles, mainlobe_halfwidth)?;
        profile_psl(&self.angles, &self.magnitudes(), mainlobe_halfwidth)
    }
}

impl PeakSidelobe for ScfMap {
    /// Worst row.
    fn peak_sidelobe_level(&self, mainlobe_halfwidth: f64) -> Result<f64> {
        check_halfwidth(&self.angles, mainlobe_halfwidth)?;
        let n = self.angles.len();
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            let mags: Vec<f64> = (0..n).map(|j| self.get(i, j).norm()).collect();
            worst = worst.max(profile_psl(&self.angles, &mags, mainlobe_halfwidth)?);
        }
        Ok(worst)
    }
}

pub fn peak_sidelobe_level<M: PeakSidelobe>(map: &M, mainlobe_halfwidth: f64) -> Result<f64> {
    map.peak_sidelobe_level(mainlobe_halfwidth)
}

/// Gram matrix over the trailing angle axis of a `[f, m, angle]` tensor.
fn gram(grid: &ComplexMultiArray) -> Result<ComplexMultiArray> {
    contract(&grid.conj(), grid, &[(0, 0), (1, 1)])
}

fn check_grid(grid: &ComplexMultiArray, angles: &[f64]) -> Result<()> {
    if grid.ndim() != 3 || grid.dims()[2] != angles.len() {
        return Err(Error::dim(format!(
            "steering grid {:?} does not match {} angles",
            grid.dims(),
            angles.len()
        )));
    }
    Ok(())
}

/// SCF from a precomputed `[n_freq, n_elements, n_angles]` steering grid.
pub fn scf_from_steering(grid: &ComplexMultiArray, angles: &[f64], normalized: bool) -> Result<ScfMap> {
    check_grid(grid, angles)?;
    ScfMap::new(angles.to_vec(), gram(grid)?, normalized)
}

pub fn scf(manifold: &WidebandManifold, angles: &[f64]) -> Result<ScfMap> {
    let grid = manifold.steering_grid(angles)?;
    scf_from_steering(&grid, angles, manifold.normalize_per_angle())
}

/// `s_hat[n] = sum_m phi[n, m] s[m]` for one `[n_freq, n_elements]` snapshot.
pub fn apply_operator(op: &OperatorTensor, s: &ComplexMultiArray) -> Result<ComplexMultiArray> {
    if s.dims() != op.input_dims() {
        return Err(Error::dim(format!(
            "snapshot {:?} does not match operator input {:?}",
            s.dims(),
            op.input_dims()
        )));
    }
    contract(op.tensor(), s, &[(2, 0), (3, 1)])
}

/// Applies the operator to every column of a `[n_freq, n_elements, k]` stack.
pub fn apply_operator_batch(op: &OperatorTensor, stack: &ComplexMultiArray) -> Result<ComplexMultiArray> {
    if stack.ndim() != 3 || stack.dims()[..2] != op.input_dims() {
        return Err(Error::dim(format!(
            "stack {:?} does not match operator input {:?}",
            stack.dims(),
            op.input_dims()
        )));
    }
    contract(op.tensor(), stack, &[(2, 0), (3, 1)])
}

/// Effective SCF `<phi a(theta_i), phi a(theta_j)>` from a steering grid.
pub fn effective_scf_from_steering(
    grid: &ComplexMultiArray,
    op: &OperatorTensor,
    angles: &[f64],
    renormalize: bool,
) -> Result<ScfMap> {
    check_grid(grid, angles)?;
    let mapped = apply_operator_batch(op, grid)?;
    let map = ScfMap::new(angles.to_vec(), gram(&mapped)?, false)?;
    Ok(if renormalize { map.normalized() } else { map })
}

pub fn effective_scf(
    manifold: &WidebandManifold,
    op: &OperatorTensor,
    angles: &[f64],
    renormalize: bool,
) -> Result<ScfMap> {
    let grid = manifold.steering_grid(angles)?;
    effective_scf_from_steering(&grid, op, angles, renormalize)
}

/// Multiplies every `[f, m, i]` entry of a steering grid by `delay[f]`.
fn delay_weighted(grid: &ComplexMultiArray, freq: &FrequencyGrid, tau: f64) -> Result<ComplexMultiArray> {
    let d = delay_steering(freq, tau)?;
    if grid.dims()[0] != d.len() {
        return Err(Error::dim(format!(
            "steering grid has {} frequencies, delay vector {}",
            grid.dims()[0],
            d.len()
        )));
    }
    let per_freq = grid.len() / d.len();
    let mut out = grid.clone();
    for (k, chunk) in out.data_mut().chunks_mut(per_freq).enumerate() {
        let dk = d.data()[k];
        for v in chunk {
            *v *= dk;
        }
    }
    Ok(out)
}

/// `C_i = <x, a(theta_i) * delay(tau)>` from a steering grid.
pub fn correlation_function_from_steering(
    x: &ComplexMultiArray,
    grid: &ComplexMultiArray,
    freq: &FrequencyGrid,
    angles: &[f64],
    tau: f64,
) -> Result<CorrMap> {
    check_grid(grid, angles)?;
    if x.dims() != &grid.dims()[..2] {
        return Err(Error::dim(format!(
            "snapshot {:?} does not match manifold {:?}",
            x.dims(),
            &grid.dims()[..2]
        )));
    }
    let atoms = delay_weighted(grid, freq, tau)?;
    let c = contract(&x.conj(), &atoms, &[(0, 0), (1, 1)])?;
    CorrMap::new(angles.to_vec(), tau, c.into_data())
}

pub fn correlation_function(
    x: &ComplexMultiArray,
    manifold: &WidebandManifold,
    angles: &[f64],
    tau: f64,
) -> Result<CorrMap> {
    let grid = manifold.steering_grid(angles)?;
    correlation_function_from_steering(x, &grid, manifold.grid(), angles, tau)
}

/// `C_i = <phi x, phi (a(theta_i) * delay(tau))>` from a steering grid.
pub fn correlation_function_with_operator_from_steering(
    x: &ComplexMultiArray,
    op: &OperatorTensor,
    grid: &ComplexMultiArray,
    freq: &FrequencyGrid,
    angles: &[f64],
    tau: f64,
) -> Result<CorrMap> {
    check_grid(grid, angles)?;
    let x_hat = apply_operator(op, x)?;
    let atoms = apply_operator_batch(op, &delay_weighted(grid, freq, tau)?)?;
    let c = contract(&x_hat.conj(), &atoms, &[(0, 0), (1, 1)])?;
    CorrMap::new(angles.to_vec(), tau, c.into_data())
}

pub fn correlation_function_with_operator(
    x: &ComplexMultiArray,
    op: &OperatorTensor,
    manifold: &WidebandManifold,
    angles: &[f64],
    tau: f64,
) -> Result<CorrMap> {
    let grid = manifold.steering_grid(angles)?;
    correlation_function_with_operator_from_steering(x, op, &grid, manifold.grid(), angles, tau)
}

/// Matched-filter value of a single snapshot against a single atom.
pub fn correlate(x: &ComplexMultiArray, atom: &ComplexMultiArray) -> Result<Complex64> {
    inner_product(x, atom)
}

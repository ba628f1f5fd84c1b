//! Wideband far-field response of planar arrays to azimuth and delay.
//!
//! The response of element `m` at sub-carrier `f_k` to a plane wave from
//! azimuth `theta` is `g_m(theta) * exp(+j 2 pi f_k (p_m . u(theta)) / c)`
//! with `u(theta) = (cos theta, sin theta, 0)`. The phase is referenced to the
//! origin. Because the phase scales with `f_k`, a wide band carries angle
//! information that a narrow band of the same array cannot resolve.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::multiway::{complex_normal_samples, ComplexMultiArray};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `true` when `theta` lies in `(-pi, pi]`.
pub fn is_azimuth(theta: f64) -> bool {
    theta > -PI && theta <= PI
}

/// Maps any finite angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t += 2.0 * PI;
    }
    t
}

fn check_azimuth(theta: f64) -> Result<()> {
    if is_azimuth(theta) {
        Ok(())
    } else {
        Err(Error::domain(format!("azimuth {theta} outside (-pi, pi]")))
    }
}

/// Uniformly spaced sub-carriers centred on the carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    carrier_hz: f64,
    bandwidth_hz: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(carrier_hz: f64, bandwidth_hz: f64, n_points: usize) -> Result<Self> {
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::domain(format!("carrier {carrier_hz} Hz must be positive")));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(Error::domain(format!("bandwidth {bandwidth_hz} Hz must be positive")));
        }
        if bandwidth_hz >= 2.0 * carrier_hz {
            return Err(Error::domain(format!(
                "bandwidth {bandwidth_hz} Hz leaves no positive lowest frequency around {carrier_hz} Hz"
            )));
        }
        if n_points < 2 {
            return Err(Error::domain("a wideband grid needs at least 2 points"));
        }
        Ok(Self {
            carrier_hz,
            bandwidth_hz,
            n_points,
        })
    }

    /// A single tone at the carrier; the narrowband special case.
    pub fn single_tone(carrier_hz: f64) -> Result<Self> {
        if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
            return Err(Error::domain(format!("carrier {carrier_hz} Hz must be positive")));
        }
        Ok(Self {
            carrier_hz,
            bandwidth_hz: 0.0,
            n_points: 1,
        })
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn frequency(&self, k: usize) -> f64 {
        if self.n_points == 1 {
            return self.carrier_hz;
        }
        let step = self.bandwidth_hz / (self.n_points - 1) as f64;
        self.carrier_hz - 0.5 * self.bandwidth_hz + k as f64 * step
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.frequency(k)).collect()
    }

    pub fn lowest_hz(&self) -> f64 {
        self.frequency(0)
    }

    /// Wavelength of the lowest sub-carrier.
    pub fn lowest_wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.lowest_hz()
    }
}

/// Far-field amplitude pattern of one element, as a function of the angle
/// `psi` between its boresight and the arrival direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementPattern {
    Isotropic,
    /// Clipped cosine `max(0, cos psi)^exponent`.
    Patch { exponent: f64 },
}

impl Default for ElementPattern {
    fn default() -> Self {
        ElementPattern::Patch { exponent: 1.0 }
    }
}

impl ElementPattern {
    pub fn gain(&self, psi: f64) -> f64 {
        self.gain_from_cos(psi.cos())
    }

    pub(crate) fn gain_from_cos(&self, cos_psi: f64) -> f64 {
        match *self {
            ElementPattern::Isotropic => 1.0,
            ElementPattern::Patch { exponent } => cos_psi.max(0.0).powf(exponent),
        }
    }
}

/// Free-function form of [`ElementPattern::gain`].
pub fn element_gain(pattern: &ElementPattern, psi: f64) -> f64 {
    pattern.gain(psi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub position: [f64; 3],
    /// Unit vector.
    pub boresight: [f64; 3],
}

/// `n_elements` on a circle in the X-Y plane, adjacent chord `spacing_m`,
/// each element facing radially outwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingArrayGeometry {
    n_elements: usize,
    spacing_m: f64,
}

impl RingArrayGeometry {
    pub fn new(n_elements: usize, spacing_m: f64) -> Result<Self> {
        if n_elements < 2 {
            return Err(Error::domain("a ring needs at least 2 elements"));
        }
        if !(spacing_m.is_finite() && spacing_m > 0.0) {
            return Err(Error::domain(format!("spacing {spacing_m} m must be positive")));
        }
        Ok(Self {
            n_elements,
            spacing_m,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    pub fn radius_m(&self) -> f64 {
        self.spacing_m / (2.0 * (PI / self.n_elements as f64).sin())
    }

    pub fn elements(&self) -> Vec<Element> {
        let r = self.radius_m();
        (0..self.n_elements)
            .map(|m| {
                let phi = 2.0 * PI * m as f64 / self.n_elements as f64;
                let (s, c) = phi.sin_cos();
                Element {
                    position: [r * c, r * s, 0.0],
                    boresight: [c, s, 0.0],
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayGeometry {
    Ring(RingArrayGeometry),
    Explicit(Vec<Element>),
}

impl ArrayGeometry {
    /// Elements at the given positions, all with boresight along +x.
    pub fn from_positions(positions: &[[f64; 3]]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::domain("array needs at least one element"));
        }
        Ok(ArrayGeometry::Explicit(
            positions
                .iter()
                .map(|&position| Element {
                    position,
                    boresight: [1.0, 0.0, 0.0],
                })
                .collect(),
        ))
    }

    pub fn elements(&self) -> Vec<Element> {
        match self {
            ArrayGeometry::Ring(ring) => ring.elements(),
            ArrayGeometry::Explicit(e) => e.clone(),
        }
    }

    pub fn n_elements(&self) -> usize {
        match self {
            ArrayGeometry::Ring(ring) => ring.n_elements(),
            ArrayGeometry::Explicit(e) => e.len(),
        }
    }
}

/// One specular propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub gamma: Complex64,
    /// Azimuth, radians in `(-pi, pi]`.
    pub theta: f64,
    /// Normalized delay in `(0, 1]`.
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct WidebandManifold {
    geometry: ArrayGeometry,
    elements: Vec<Element>,
    pattern: ElementPattern,
    grid: FrequencyGrid,
    normalize_per_angle: bool,
}

impl WidebandManifold {
    pub fn new(
        geometry: ArrayGeometry,
        pattern: ElementPattern,
        grid: FrequencyGrid,
        normalize_per_angle: bool,
    ) -> Self {
        let elements = geometry.elements();
        Self {
            geometry,
            elements,
            pattern,
            grid,
            normalize_per_angle,
        }
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn pattern(&self) -> ElementPattern {
        self.pattern
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn normalize_per_angle(&self) -> bool {
        self.normalize_per_angle
    }

    pub fn n_freq(&self) -> usize {
        self.grid.n_points()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// `[n_freq, n_elements]`.
    pub fn dims(&self) -> [usize; 2] {
        [self.n_freq(), self.n_elements()]
    }

    fn fill_steering(&self, theta: f64, out: &mut [Complex64]) {
        let (s, c) = theta.sin_cos();
        let nr = self.elements.len();
        let mut norm_sqr = 0.0;
        for (m, el) in self.elements.iter().enumerate() {
            let gain = self
                .pattern
                .gain_from_cos(el.boresight[0] * c + el.boresight[1] * s);
            let path_m = el.position[0] * c + el.position[1] * s;
            for k in 0..self.grid.n_points() {
                let phase = 2.0 * PI * self.grid.frequency(k) * path_m / SPEED_OF_LIGHT;
                let v = Complex64::from_polar(gain, phase);
                norm_sqr += v.norm_sqr();
                out[k * nr + m] = v;
            }
        }
        if self.normalize_per_angle && norm_sqr > 0.0 {
            let inv = norm_sqr.sqrt().recip();
            for v in out.iter_mut() {
                *v *= inv;
            }
        }
    }

    /// Response tensor `[n_freq, n_elements]` at azimuth `theta`.
    pub fn steering(&self, theta: f64) -> Result<ComplexMultiArray> {
        check_azimuth(theta)?;
        let [nf, nr] = self.dims();
        let mut data = vec![Complex64::new(0.0, 0.0); nf * nr];
        self.fill_steering(theta, &mut data);
        Ok(ComplexMultiArray::from_parts(vec![nf, nr], data))
    }

    /// Responses for a list of angles stacked on a trailing axis,
    /// `[n_freq, n_elements, n_angles]`.
    pub fn steering_grid(&self, angles: &[f64]) -> Result<ComplexMultiArray> {
        if angles.is_empty() {
            return Err(Error::domain("empty angle grid"));
        }
        for &t in angles {
            check_azimuth(t)?;
        }
        let [nf, nr] = self.dims();
        let na = angles.len();
        let mut data = vec![Complex64::new(0.0, 0.0); nf * nr * na];
        let mut one = vec![Complex64::new(0.0, 0.0); nf * nr];
        for (i, &t) in angles.iter().enumerate() {
            self.fill_steering(t, &mut one);
            for (fm, v) in one.iter().enumerate() {
                data[fm * na + i] = *v;
            }
        }
        Ok(ComplexMultiArray::from_parts(vec![nf, nr, na], data))
    }
}

/// Frequency-domain signature of a normalized delay: `exp(-j 2 pi k tau)`.
pub fn delay_steering(grid: &FrequencyGrid, tau: f64) -> Result<ComplexMultiArray> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::domain(format!("delay {tau} outside (0, 1]")));
    }
    let data = (0..grid.n_points())
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * tau))
        .collect();
    Ok(ComplexMultiArray::from_parts(vec![grid.n_points()], data))
}

/// `steering(theta) * delay(tau)` broadcast along the element axis.
pub fn steering_with_delay(
    manifold: &WidebandManifold,
    theta: f64,
    tau: f64,
) -> Result<ComplexMultiArray> {
    let mut a = manifold.steering(theta)?;
    let d = delay_steering(manifold.grid(), tau)?;
    let nr = manifold.n_elements();
    for (k, row) in a.data_mut().chunks_mut(nr).enumerate() {
        let dk = d.data()[k];
        for v in row {
            *v *= dk;
        }
    }
    Ok(a)
}

/// Noisy superposition of specular paths, `[n_freq, n_elements]`.
///
/// Noise is circularly-symmetric complex Gaussian with per-entry variance
/// `noise_variance`, drawn from `seed`.
pub fn synthesize_channel(
    manifold: &WidebandManifold,
    paths: &[PathParams],
    noise_variance: f64,
    seed: u64,
) -> Result<ComplexMultiArray> {
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(Error::domain(format!("noise variance {noise_variance} must be >= 0")));
    }
    if paths.is_empty() && noise_variance == 0.0 {
        return Err(Error::domain("need at least one path or positive noise"));
    }
    let [nf, nr] = manifold.dims();
    let mut x = ComplexMultiArray::zeros(&[nf, nr]);
    for p in paths {
        let a = steering_with_delay(manifold, p.theta, p.tau)?;
        for (xi, ai) in x.data_mut().iter_mut().zip(a.data()) {
            *xi += p.gamma * ai;
        }
    }
    if noise_variance > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = complex_normal_samples(&mut rng, nf * nr, noise_variance);
        for (xi, n) in x.data_mut().iter_mut().zip(noise) {
            *xi += n;
        }
    }
    Ok(x)
}

//! On-disk formats: binary tensors, CSV maps and run configuration.
//!
//! Tensor files are little-endian:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "WBT1"
//! 4       4           version (u32), currently 1
//! 8       1           ndim (u8)
//! 9       8 * ndim    extents (u64 each), outermost first
//! ..      16 * N      entries as (re, im) f64 pairs, row-major
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::correlation::{CorrMap, ScfMap};
use crate::design::DesignConfig;
use crate::error::{Error, FormatError, Result};
use crate::manifold::{
    ArrayGeometry, ElementPattern, FrequencyGrid, RingArrayGeometry, WidebandManifold,
};
use crate::multiway::ComplexMultiArray;

pub const TENSOR_MAGIC: [u8; 4] = *b"WBT1";
pub const TENSOR_VERSION: u32 = 1;

pub fn encode_tensor(a: &ComplexMultiArray) -> Vec<u8> {
    assert!(a.ndim() <= u8::MAX as usize, "too many axes for the tensor format");
    let mut out = Vec::with_capacity(9 + 8 * a.ndim() + 16 * a.len());
    out.extend_from_slice(&TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.push(a.ndim() as u8);
    for &d in a.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for z in a.data() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> std::result::Result<&'a [u8], FormatError> {
    let end = pos.checked_add(n).ok_or(FormatError::DimsOverflow)?;
    if end > bytes.len() {
        return Err(FormatError::Truncated {
            expected: end as u64,
            found: bytes.len() as u64,
        });
    }
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

pub fn decode_tensor(bytes: &[u8]) -> std::result::Result<ComplexMultiArray, FormatError> {
    let mut pos = 0;
    let magic: [u8; 4] = take(bytes, &mut pos, 4)?.try_into().unwrap();
    if magic != TENSOR_MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(take(bytes, &mut pos, 4)?.try_into().unwrap());
    if version != TENSOR_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let ndim = take(bytes, &mut pos, 1)?[0] as usize;
    let mut dims = Vec::with_capacity(ndim);
    let mut count: u64 = 1;
    for axis in 0..ndim {
        let d = u64::from_le_bytes(take(bytes, &mut pos, 8)?.try_into().unwrap());
        if d == 0 {
            return Err(FormatError::ZeroExtent(axis));
        }
        count = count.checked_mul(d).ok_or(FormatError::DimsOverflow)?;
        dims.push(usize::try_from(d).map_err(|_| FormatError::DimsOverflow)?);
    }
    let payload = count.checked_mul(16).ok_or(FormatError::DimsOverflow)?;
    let payload = usize::try_from(payload).map_err(|_| FormatError::DimsOverflow)?;
    let body = take(bytes, &mut pos, payload)?;
    if pos != bytes.len() {
        return Err(FormatError::TrailingBytes((bytes.len() - pos) as u64));
    }
    let mut data = Vec::with_capacity(count as usize);
    for (i, chunk) in body.chunks_exact(16).enumerate() {
        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
        if !(re.is_finite() && im.is_finite()) {
            return Err(FormatError::NonFinite(i));
        }
        data.push(Complex64::new(re, im));
    }
    Ok(ComplexMultiArray::from_parts(dims, data))
}

pub fn write_tensor(path: impl AsRef<Path>, a: &ComplexMultiArray) -> Result<()> {
    fs::write(path, encode_tensor(a))?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<ComplexMultiArray> {
    let bytes = fs::read(path)?;
    Ok(decode_tensor(&bytes)?)
}

/// Round-trip exact decimal form, 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Maps that can be written as CSV rows.
pub trait CsvMap {
    fn header(&self) -> &'static str;
    fn write_rows(&self, out: &mut dyn Write) -> std::io::Result<()>;
}

impl CsvMap for ScfMap {
    fn header(&self) -> &'static str {
        "theta1,theta2,re,im,abs"
    }

    fn write_rows(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let a = self.angles();
        for (i, &t1) in a.iter().enumerate() {
            for (j, &t2) in a.iter().enumerate() {
                let z = self.get(i, j);
                writeln!(out, "{},{},{},{},{}", num(t1), num(t2), num(z.re), num(z.im), num(z.norm()))?;
            }
        }
        Ok(())
    }
}

impl CsvMap for CorrMap {
    fn header(&self) -> &'static str {
        "theta,re,im,abs"
    }

    fn write_rows(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for (t, z) in self.angles().iter().zip(self.values()) {
            writeln!(out, "{},{},{},{}", num(*t), num(z.re), num(z.im), num(z.norm()))?;
        }
        Ok(())
    }
}

pub fn write_map_csv<M: CsvMap>(path: impl AsRef<Path>, map: &M) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", map.header())?;
    map.write_rows(&mut w)?;
    w.flush()?;
    Ok(())
}

/// A map read back from CSV.
#[derive(Debug, Clone)]
pub enum MapCsv {
    Scf(ScfMap),
    /// The delay is not stored in the CSV; it reads back as NaN.
    Corr(CorrMap),
}

fn parse_row(line: &str, n: usize, lineno: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != n {
        return Err(Error::Csv(format!(
            "line {lineno}: expected {n} fields, found {}",
            fields.len()
        )));
    }
    fields
        .iter()
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| Error::Csv(format!("line {lineno}: {e}")))
        })
        .collect()
}

pub fn read_map_csv(path: impl AsRef<Path>) -> Result<MapCsv> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Csv("empty file".into()))?;
    match header.trim() {
        "theta,re,im,abs" => {
            let mut angles = Vec::new();
            let mut values = Vec::new();
            for (i, line) in lines {
                let r = parse_row(line, 4, i + 1)?;
                angles.push(r[0]);
                values.push(Complex64::new(r[1], r[2]));
            }
            Ok(MapCsv::Corr(CorrMap::new(angles, f64::NAN, values)?))
        }
        "theta1,theta2,re,im,abs" => {
            let rows: Vec<Vec<f64>> = lines
                .map(|(i, line)| parse_row(line, 5, i + 1))
                .collect::<Result<_>>()?;
            let n = (rows.len() as f64).sqrt().round() as usize;
            if n * n != rows.len() || n == 0 {
                return Err(Error::Csv(format!("{} rows do not form a square map", rows.len())));
            }
            let angles: Vec<f64> = rows[..n].iter().map(|r| r[1]).collect();
            let data = rows.iter().map(|r| Complex64::new(r[2], r[3])).collect();
            let values = ComplexMultiArray::new(vec![n, n], data)?;
            let normalized = (0..n).all(|i| (values.get(&[i, i]).re - 1.0).abs() < 1e-12);
            Ok(MapCsv::Scf(ScfMap::new(angles, values, normalized)?))
        }
        other => Err(Error::Csv(format!("unrecognised header `{other}`"))),
    }
}

/// Everything needed to build both manifolds and run the design loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub carrier_hz: f64,
    pub n_freq: usize,
    /// Field bandwidth, the one the operator is applied at.
    pub bandwidth_hz: f64,
    /// Wide target bandwidth used only during design.
    pub target_bandwidth_hz: f64,
    pub n_elements: usize,
    /// Adjacent element spacing in wavelengths of the lowest field sub-carrier.
    pub spacing_wavelengths: f64,
    pub pattern: ElementPattern,
    pub normalize: bool,
    pub design: DesignConfig,
}

impl RunConfig {
    pub fn field_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.carrier_hz, self.bandwidth_hz, self.n_freq)
    }

    pub fn target_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.carrier_hz, self.target_bandwidth_hz, self.n_freq)
    }

    pub fn ring(&self) -> Result<RingArrayGeometry> {
        let lambda = self.field_grid()?.lowest_wavelength_m();
        RingArrayGeometry::new(self.n_elements, self.spacing_wavelengths * lambda)
    }

    fn manifold(&self, grid: FrequencyGrid) -> Result<WidebandManifold> {
        Ok(WidebandManifold::new(
            ArrayGeometry::Ring(self.ring()?),
            self.pattern,
            grid,
            self.normalize,
        ))
    }

    pub fn field_manifold(&self) -> Result<WidebandManifold> {
        self.manifold(self.field_grid()?)
    }

    pub fn target_manifold(&self) -> Result<WidebandManifold> {
        self.manifold(self.target_grid()?)
    }

    /// Serializes to the `key = value` format read by [`parse_config_str`].
    pub fn to_config_string(&self) -> String {
        let d = &self.design;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("carrier_hz", num(self.carrier_hz));
        kv("n_freq", self.n_freq.to_string());
        kv("bandwidth_hz", num(self.bandwidth_hz));
        kv("target_bandwidth_hz", num(self.target_bandwidth_hz));
        kv("n_elements", self.n_elements.to_string());
        kv("spacing_wavelengths", num(self.spacing_wavelengths));
        match self.pattern {
            ElementPattern::Isotropic => kv("element_pattern", "isotropic".into()),
            ElementPattern::Patch { exponent } => {
                kv("element_pattern", "patch".into());
                kv("patch_exponent", num(exponent));
            }
        }
        kv("normalize", self.normalize.to_string());
        kv("batches", d.batches.to_string());
        kv("batch_size", d.batch_size.to_string());
        kv("theta_low", num(d.theta_low));
        kv("theta_high", num(d.theta_high));
        kv("alpha", num(d.step_size));
        kv("beta1", num(d.beta1));
        kv("beta2", num(d.beta2));
        kv("epsilon", num(d.epsilon));
        kv("seed", d.seed.to_string());
        kv("heldout_grid_size", d.heldout_grid_size.to_string());
        kv("checkpoint_every", d.checkpoint_every.to_string());
        s
    }
}

const CONFIG_KEYS: &[&str] = &[
    "carrier_hz",
    "n_freq",
    "bandwidth_hz",
    "target_bandwidth_hz",
    "n_elements",
    "spacing_wavelengths",
    "element_pattern",
    "patch_exponent",
    "normalize",
    "batches",
    "batch_size",
    "theta_low",
    "theta_high",
    "alpha",
    "beta1",
    "beta2",
    "epsilon",
    "seed",
    "heldout_grid_size",
    "checkpoint_every",
];

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn raw(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::config(key, "missing"))
    }

    fn real(&self, key: &str) -> Result<f64> {
        let raw = self.raw(key)?;
        let v = match raw {
            "pi" => PI,
            "-pi" => -PI,
            _ => raw
                .parse::<f64>()
                .map_err(|_| Error::config(key, format!("`{raw}` is not a number")))?,
        };
        if !v.is_finite() {
            return Err(Error::config(key, "must be finite"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self.real(key)?;
        if v <= 0.0 {
            return Err(Error::config(key, format!("{v} must be positive")));
        }
        Ok(v)
    }

    fn count<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key)?;
        raw.parse::<T>()
            .map_err(|_| Error::config(key, format!("`{raw}` is not a non-negative integer")))
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key)? {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(Error::config(key, format!("`{other}` is not true/false"))),
        }
    }
}

/// Parses and validates the `key = value` run configuration text.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config(line, format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !CONFIG_KEYS.contains(&k) {
            return Err(Error::config(k, "unknown key"));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::config(k, "given more than once"));
        }
    }
    let e = Entries(map);

    let pattern = match e.raw("element_pattern")? {
        "isotropic" => {
            if e.0.contains_key("patch_exponent") {
                return Err(Error::config("patch_exponent", "only valid with element_pattern = patch"));
            }
            ElementPattern::Isotropic
        }
        "patch" => {
            let q = e.real("patch_exponent")?;
            if q < 0.0 {
                return Err(Error::config("patch_exponent", "must be >= 0"));
            }
            ElementPattern::Patch { exponent: q }
        }
        other => {
            return Err(Error::config(
                "element_pattern",
                format!("`{other}` is neither isotropic nor patch"),
            ))
        }
    };

    let design = DesignConfig {
        batches: e.count("batches")?,
        batch_size: e.count("batch_size")?,
        theta_low: e.real("theta_low")?,
        theta_high: e.real("theta_high")?,
        step_size: e.positive("alpha")?,
        beta1: e.real("beta1")?,
        beta2: e.real("beta2")?,
        epsilon: e.positive("epsilon")?,
        seed: e.count("seed")?,
        heldout_grid_size: e.count("heldout_grid_size")?,
        checkpoint_every: e.count("checkpoint_every")?,
    };
    design.validate()?;

    let cfg = RunConfig {
        carrier_hz: e.positive("carrier_hz")?,
        n_freq: e.count("n_freq")?,
        bandwidth_hz: e.positive("bandwidth_hz")?,
        target_bandwidth_hz: e.positive("target_bandwidth_hz")?,
        n_elements: e.count("n_elements")?,
        spacing_wavelengths: e.positive("spacing_wavelengths")?,
        pattern,
        normalize: e.flag("normalize")?,
        design,
    };
    if cfg.n_freq < 2 {
        return Err(Error::config("n_freq", "must be at least 2"));
    }
    if cfg.n_elements < 2 {
        return Err(Error::config("n_elements", "must be at least 2"));
    }
    if cfg.bandwidth_hz >= 2.0 * cfg.carrier_hz {
        return Err(Error::config("bandwidth_hz", "must be below twice the carrier"));
    }
    if cfg.target_bandwidth_hz >= 2.0 * cfg.carrier_hz {
        return Err(Error::config("target_bandwidth_hz", "must be below twice the carrier"));
    }
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::ConfigFile {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

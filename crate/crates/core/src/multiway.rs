//! Dense complex multiway arrays and pairwise axis contraction.
//!
//! Storage is row-major with the last axis fastest. Axis meaning is a
//! positional convention fixed by each call site; steering grids are
//! `[freq, element, angle]` and operators `[out_freq, out_element, in_freq, in_element]`.

use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Paired axes longer than this are summed with compensation.
const COMPENSATED_SUM_THRESHOLD: usize = 1 << 15;

/// Below this many multiply-adds a contraction stays on the calling thread.
const PARALLEL_WORK_THRESHOLD: usize = 1 << 18;

#[derive(Clone, PartialEq)]
pub struct ComplexMultiArray {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMultiArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ComplexMultiArray")
            .field("dims", &self.dims)
            .field("len", &self.data.len())
            .finish()
    }
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    let mut n = 1usize;
    for (axis, &d) in dims.iter().enumerate() {
        if d == 0 {
            return Err(Error::dim(format!("axis {axis} has zero extent")));
        }
        n = n
            .checked_mul(d)
            .ok_or_else(|| Error::dim(format!("extent product of {dims:?} overflows")))?;
    }
    Ok(n)
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

impl ComplexMultiArray {
    /// Wraps row-major `data`. Fails when the length does not match `dims`
    /// or any entry is non-finite.
    pub fn new(dims: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        let n = checked_len(&dims)?;
        if data.len() != n {
            return Err(Error::dim(format!(
                "data length {} does not match dims {:?} (product {n})",
                data.len(),
                dims
            )));
        }
        if let Some(i) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::domain(format!("non-finite entry at flat index {i}")));
        }
        Ok(Self { dims, data })
    }

    /// Internal constructor for results already known to be well formed.
    pub(crate) fn from_parts(dims: Vec<usize>, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data }
    }

    /// # Panics
    /// If any extent is zero.
    pub fn zeros(dims: &[usize]) -> Self {
        let n = checked_len(dims).expect("zeros: invalid dims");
        Self {
            dims: dims.to_vec(),
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn scalar(value: Complex64) -> Self {
        Self {
            dims: Vec::new(),
            data: vec![value],
        }
    }

    pub fn from_fn<F>(dims: &[usize], mut f: F) -> Self
    where
        F: FnMut(&[usize]) -> Complex64,
    {
        let n = checked_len(dims).expect("from_fn: invalid dims");
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for axis in (0..dims.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < dims[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
        Self {
            dims: dims.to_vec(),
            data,
        }
    }

    /// Entries with independent real and imaginary parts of variance 1/2,
    /// so `E|x|^2 = 1`. Identical seeds give bit-identical arrays.
    pub fn random_complex_normal(dims: &[usize], seed: u64) -> Result<Self> {
        let n = checked_len(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = complex_normal_samples(&mut rng, n, 1.0);
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.dims.len(), "index rank mismatch");
        let mut off = 0;
        for (&i, &d) in idx.iter().zip(&self.dims) {
            assert!(i < d, "index {idx:?} out of bounds for dims {:?}", self.dims);
            off = off * d + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: Complex64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        let n = checked_len(&dims)?;
        if n != self.data.len() {
            return Err(Error::dim(format!(
                "cannot reshape {:?} into {:?}",
                self.dims, dims
            )));
        }
        Ok(Self {
            dims,
            data: self.data,
        })
    }

    /// Reorders axes so that output axis `k` is input axis `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let nd = self.dims.len();
        let mut seen = vec![false; nd];
        if order.len() != nd {
            return Err(Error::dim(format!(
                "permutation {order:?} has wrong rank for dims {:?}",
                self.dims
            )));
        }
        for &o in order {
            if o >= nd || seen[o] {
                return Err(Error::dim(format!("{order:?} is not a permutation")));
            }
            seen[o] = true;
        }
        if order.iter().enumerate().all(|(k, &o)| k == o) {
            return Ok(self.clone());
        }
        let src_strides = strides(&self.dims);
        let new_dims: Vec<usize> = order.iter().map(|&o| self.dims[o]).collect();
        let walk: Vec<usize> = order.iter().map(|&o| src_strides[o]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; nd];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[src]);
            for axis in (0..nd).rev() {
                idx[axis] += 1;
                src += walk[axis];
                if idx[axis] < new_dims[axis] {
                    break;
                }
                src -= walk[axis] * new_dims[axis];
                idx[axis] = 0;
            }
        }
        Ok(Self {
            dims: new_dims,
            data,
        })
    }

    pub fn conj(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Sum of squared magnitudes.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        self.map(|z| z * factor)
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    fn zip_with<F>(&self, other: &Self, f: F) -> Result<Self>
    where
        F: Fn(Complex64, Complex64) -> Complex64,
    {
        if self.dims != other.dims {
            return Err(Error::dim(format!(
                "elementwise operands {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Largest elementwise magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::dim(format!(
                "compared {:?} with {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

pub(crate) fn complex_normal_samples<R: rand::Rng>(
    rng: &mut R,
    n: usize,
    variance: f64,
) -> Vec<Complex64> {
    let sd = (0.5 * variance).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(sd * re, sd * im)
        })
        .collect()
}

/// Sums products over paired axes.
///
/// `pairs[k] = (axis_of_a, axis_of_b)`. The result carries the unpaired axes
/// of `a` in order, followed by the unpaired axes of `b`. No pairs gives the
/// outer product; pairing every axis gives a rank-0 scalar.
pub fn contract(
    a: &ComplexMultiArray,
    b: &ComplexMultiArray,
    pairs: &[(usize, usize)],
) -> Result<ComplexMultiArray> {
    let mut used_a = vec![false; a.ndim()];
    let mut used_b = vec![false; b.ndim()];
    for &(pa, pb) in pairs {
        if pa >= a.ndim() || pb >= b.ndim() {
            return Err(Error::dim(format!(
                "pair ({pa}, {pb}) out of range for ranks {} and {}",
                a.ndim(),
                b.ndim()
            )));
        }
        if used_a[pa] || used_b[pb] {
            return Err(Error::dim(format!("axis paired twice in {pairs:?}")));
        }
        if a.dims[pa] != b.dims[pb] {
            return Err(Error::dim(format!(
                "paired axes ({pa}, {pb}) have extents {} and {}",
                a.dims[pa], b.dims[pb]
            )));
        }
        used_a[pa] = true;
        used_b[pb] = true;
    }

    let free_a: Vec<usize> = (0..a.ndim()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.ndim()).filter(|&i| !used_b[i]).collect();

    let order_a: Vec<usize> = free_a
        .iter()
        .copied()
        .chain(pairs.iter().map(|p| p.0))
        .collect();
    let order_b: Vec<usize> = pairs
        .iter()
        .map(|p| p.1)
        .chain(free_b.iter().copied())
        .collect();

    let rows: usize = free_a.iter().map(|&i| a.dims[i]).product();
    let inner: usize = pairs.iter().map(|p| a.dims[p.0]).product();
    let cols: usize = free_b.iter().map(|&i| b.dims[i]).product();

    let a_mat = permuted_view(a, &order_a)?;
    let b_mat = permuted_view(b, &order_b)?;

    let mut out = vec![Complex64::new(0.0, 0.0); rows * cols];
    if inner > COMPENSATED_SUM_THRESHOLD {
        matmul_compensated(&a_mat, &b_mat, inner, cols, &mut out);
    } else {
        matmul(&a_mat, &b_mat, rows, inner, cols, &mut out);
    }

    let dims: Vec<usize> = free_a
        .iter()
        .map(|&i| a.dims[i])
        .chain(free_b.iter().map(|&i| b.dims[i]))
        .collect();
    Ok(ComplexMultiArray::from_parts(dims, out))
}

fn permuted_view<'a>(
    x: &'a ComplexMultiArray,
    order: &[usize],
) -> Result<std::borrow::Cow<'a, [Complex64]>> {
    if order.iter().enumerate().all(|(k, &o)| k == o) {
        Ok(std::borrow::Cow::Borrowed(&x.data))
    } else {
        Ok(std::borrow::Cow::Owned(x.permuted(order)?.data))
    }
}

fn matmul_row(a_row: &[Complex64], b: &[Complex64], cols: usize, out_row: &mut [Complex64]) {
    for (k, &aik) in a_row.iter().enumerate() {
        if aik.re == 0.0 && aik.im == 0.0 {
            continue;
        }
        let b_row = &b[k * cols..(k + 1) * cols];
        for (o, &bkj) in out_row.iter_mut().zip(b_row) {
            o.re += aik.re * bkj.re - aik.im * bkj.im;
            o.im += aik.re * bkj.im + aik.im * bkj.re;
        }
    }
}

/// `out[rows x cols] = a[rows x inner] * b[inner x cols]`. Each output row is
/// accumulated sequentially, so results do not depend on the thread count.
fn matmul(a: &[Complex64], b: &[Complex64], rows: usize, inner: usize, cols: usize, out: &mut [Complex64]) {
    if cols == 0 || rows == 0 {
        return;
    }
    if rows * inner * cols < PARALLEL_WORK_THRESHOLD || rows == 1 {
        for (i, out_row) in out.chunks_mut(cols).enumerate() {
            matmul_row(&a[i * inner..(i + 1) * inner], b, cols, out_row);
        }
    } else {
        out.par_chunks_mut(cols).enumerate().for_each(|(i, out_row)| {
            matmul_row(&a[i * inner..(i + 1) * inner], b, cols, out_row);
        });
    }
}

#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn matmul_compensated(
    a: &[Complex64],
    b: &[Complex64],
    inner: usize,
    cols: usize,
    out: &mut [Complex64],
) {
    // Column-major copy of b so each dot product walks contiguous memory.
    let mut bt = vec![Complex64::new(0.0, 0.0); inner * cols];
    for k in 0..inner {
        for j in 0..cols {
            bt[j * inner + k] = b[k * cols + j];
        }
    }
    out.par_iter_mut().enumerate().for_each(|(flat, o)| {
        let (i, j) = (flat / cols, flat % cols);
        let a_row = &a[i * inner..(i + 1) * inner];
        let b_col = &bt[j * inner..(j + 1) * inner];
        let mut re = Neumaier::default();
        let mut im = Neumaier::default();
        for (x, y) in a_row.iter().zip(b_col) {
            re.add(x.re * y.re);
            re.add(-x.im * y.im);
            im.add(x.re * y.im);
            im.add(x.im * y.re);
        }
        *o = Complex64::new(re.value(), im.value());
    });
}

/// Conjugate-linear inner product `sum conj(a) * b` over all axes.
pub fn inner_product(a: &ComplexMultiArray, b: &ComplexMultiArray) -> Result<Complex64> {
    if a.dims != b.dims {
        return Err(Error::dim(format!(
            "inner product of {:?} and {:?}",
            a.dims, b.dims
        )));
    }
    if a.len() > COMPENSATED_SUM_THRESHOLD {
        let mut re = Neumaier::default();
        let mut im = Neumaier::default();
        for (x, y) in a.data.iter().zip(&b.data) {
            let p = x.conj() * y;
            re.add(p.re);
            im.add(p.im);
        }
        Ok(Complex64::new(re.value(), im.value()))
    } else {
        Ok(a.data.iter().zip(&b.data).map(|(x, y)| x.conj() * y).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn brute_contract(
        a: &ComplexMultiArray,
        b: &ComplexMultiArray,
        pairs: &[(usize, usize)],
    ) -> ComplexMultiArray {
        let free_a: Vec<usize> = (0..a.ndim()).filter(|i| !pairs.iter().any(|p| p.0 == *i)).collect();
        let free_b: Vec<usize> = (0..b.ndim()).filter(|i| !pairs.iter().any(|p| p.1 == *i)).collect();
        let out_dims: Vec<usize> = free_a
            .iter()
            .map(|&i| a.dims()[i])
            .chain(free_b.iter().map(|&i| b.dims()[i]))
            .collect();
        let pair_dims: Vec<usize> = pairs.iter().map(|p| a.dims()[p.0]).collect();
        ComplexMultiArray::from_fn(&out_dims, |oi| {
            let mut ia = vec![0; a.ndim()];
            let mut ib = vec![0; b.ndim()];
            for (k, &ax) in free_a.iter().enumerate() {
                ia[ax] = oi[k];
            }
            for (k, &ax) in free_b.iter().enumerate() {
                ib[ax] = oi[free_a.len() + k];
            }
            let mut acc = c(0.0, 0.0);
            let total: usize = pair_dims.iter().product();
            for flat in 0..total {
                let mut rem = flat;
                for (k, p) in pairs.iter().enumerate().rev() {
                    let v = rem % pair_dims[k];
                    rem /= pair_dims[k];
                    ia[p.0] = v;
                    ib[p.1] = v;
                }
                acc += a.get(&ia) * b.get(&ib);
            }
            acc
        })
    }

    #[test]
    fn inner_product_of_two_vectors() {
        let a = ComplexMultiArray::new(vec![2], vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let b = ComplexMultiArray::new(vec![2], vec![c(1.0, 0.0), c(0.0, -1.0)]).unwrap();
        let r = contract(&a, &b, &[(0, 0)]).unwrap();
        assert!(r.dims().is_empty());
        assert_eq!(r.data()[0], c(2.0, 0.0));
    }

    #[test]
    fn outer_product_without_pairs() {
        let a = ComplexMultiArray::new(vec![2], vec![c(1.0, 1.0), c(2.0, 0.0)]).unwrap();
        let b = ComplexMultiArray::new(vec![3], vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 2.0)]).unwrap();
        let r = contract(&a, &b, &[]).unwrap();
        assert_eq!(r.dims(), &[2, 3]);
        for p in 0..2 {
            for q in 0..3 {
                assert_eq!(r.get(&[p, q]), a.get(&[p]) * b.get(&[q]));
            }
        }
    }

    #[test]
    fn identity_contraction_is_noop() {
        let a = ComplexMultiArray::random_complex_normal(&[3, 4], 7).unwrap();
        let eye = ComplexMultiArray::from_fn(&[4, 4], |i| {
            if i[0] == i[1] { c(1.0, 0.0) } else { c(0.0, 0.0) }
        });
        let r = contract(&a, &eye, &[(1, 0)]).unwrap();
        assert_eq!(r, a);
    }

    #[test]
    fn extent_mismatch_is_dimension_error() {
        let a = ComplexMultiArray::zeros(&[3]);
        let b = ComplexMultiArray::zeros(&[4]);
        assert!(matches!(contract(&a, &b, &[(0, 0)]), Err(Error::Dimension(_))));
        assert!(matches!(contract(&a, &b, &[(1, 0)]), Err(Error::Dimension(_))));
    }

    #[test]
    fn conj_and_norm() {
        let a = ComplexMultiArray::new(vec![1], vec![c(1.0, 2.0)]).unwrap();
        assert_eq!(a.conj().data()[0], c(1.0, -2.0));
        assert_eq!(ComplexMultiArray::zeros(&[4, 2]).frobenius_norm(), 0.0);
    }

    #[test]
    fn rejects_non_finite_and_bad_length() {
        assert!(ComplexMultiArray::new(vec![2], vec![c(0.0, 0.0)]).is_err());
        assert!(ComplexMultiArray::new(vec![1], vec![c(f64::NAN, 0.0)]).is_err());
        assert!(ComplexMultiArray::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn random_normal_has_unit_complex_variance() {
        let x = ComplexMultiArray::random_complex_normal(&[100_000], 42).unwrap();
        let mean_power = x.norm_sqr() / x.len() as f64;
        assert!((mean_power - 1.0).abs() < 0.02, "mean power {mean_power}");
        let re_var: f64 = x.data().iter().map(|z| z.re * z.re).sum::<f64>() / x.len() as f64;
        assert!((re_var - 0.5).abs() < 0.01, "re variance {re_var}");
    }

    #[test]
    fn random_normal_is_reproducible() {
        let a = ComplexMultiArray::random_complex_normal(&[5, 6], 99).unwrap();
        let b = ComplexMultiArray::random_complex_normal(&[5, 6], 99).unwrap();
        let bits = |x: &ComplexMultiArray| -> Vec<(u64, u64)> {
            x.data().iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        let other = ComplexMultiArray::random_complex_normal(&[5, 6], 100).unwrap();
        assert_ne!(bits(&a), bits(&other));
    }

    #[test]
    fn permute_matches_index_mapping() {
        let a = ComplexMultiArray::random_complex_normal(&[2, 3, 4], 1).unwrap();
        let p = a.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.dims(), &[4, 2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert_eq!(p.get(&[k, i, j]), a.get(&[i, j, k]));
                }
            }
        }
    }

    #[test]
    fn long_paired_axis_uses_compensated_path() {
        let n = COMPENSATED_SUM_THRESHOLD + 17;
        let mut data = vec![c(1e-8, 0.0); n];
        data[0] = c(1e8, 0.0);
        let a = ComplexMultiArray::new(vec![n], data).unwrap();
        let ones = ComplexMultiArray::new(vec![n], vec![c(1.0, 0.0); n]).unwrap();
        let r = contract(&a, &ones, &[(0, 0)]).unwrap().data()[0];
        let exact = 1e8 + (n - 1) as f64 * 1e-8;
        assert!((r.re - exact).abs() <= 1e-8, "{} vs {exact}", r.re);
    }

    fn shape_and_pairs() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<(usize, usize)>, u64)> {
        (1usize..4, 1usize..4, any::<u64>()).prop_flat_map(|(ra, rb, seed)| {
            (
                proptest::collection::vec(1usize..4, ra),
                proptest::collection::vec(1usize..4, rb),
                0usize..=ra.min(rb),
                Just(seed),
            )
                .prop_map(|(mut da, db, np, seed)| {
                    // Pair the first np axes of a with the last np axes of b.
                    let pairs: Vec<(usize, usize)> =
                        (0..np).map(|k| (k, db.len() - np + k)).collect();
                    for &(pa, pb) in &pairs {
                        da[pa] = db[pb];
                    }
                    (da, db, pairs, seed)
                })
        })
    }

    proptest! {
        #[test]
        fn contract_matches_brute_force((da, db, pairs, seed) in shape_and_pairs()) {
            let a = ComplexMultiArray::random_complex_normal(&da, seed).unwrap();
            let b = ComplexMultiArray::random_complex_normal(&db, seed ^ 1).unwrap();
            let fast = contract(&a, &b, &pairs).unwrap();
            let slow = brute_contract(&a, &b, &pairs);
            prop_assert_eq!(fast.dims(), slow.dims());
            prop_assert!(fast.max_abs_diff(&slow).unwrap() < 1e-12);
        }

        #[test]
        fn contract_is_bilinear((da, db, pairs, seed) in shape_and_pairs(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let alpha = c(re, im);
            let a = ComplexMultiArray::random_complex_normal(&da, seed).unwrap();
            let a2 = ComplexMultiArray::random_complex_normal(&da, seed ^ 2).unwrap();
            let b = ComplexMultiArray::random_complex_normal(&db, seed ^ 1).unwrap();
            let lhs = contract(&a.scale(alpha).add(&a2).unwrap(), &b, &pairs).unwrap();
            let rhs = contract(&a, &b, &pairs).unwrap().scale(alpha)
                .add(&contract(&a2, &b, &pairs).unwrap()).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
        }

        #[test]
        fn self_contraction_is_squared_norm(dims in proptest::collection::vec(1usize..5, 1..5), seed in any::<u64>()) {
            let a = ComplexMultiArray::random_complex_normal(&dims, seed).unwrap();
            let pairs: Vec<(usize, usize)> = (0..dims.len()).map(|k| (k, k)).collect();
            let g = contract(&a, &a.conj(), &pairs).unwrap().data()[0];
            let n2 = a.frobenius_norm().powi(2);
            prop_assert!((g.re - n2).abs() <= 1e-12 * n2);
            prop_assert!(g.im.abs() <= 1e-12 * n2);
        }
    }
}

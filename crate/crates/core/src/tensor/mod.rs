//! Dense row-major tensors and the primitive kernels built on them.
//!
//! A [`Tensor`] is an immutable value: its storage is reference counted, so
//! clones are cheap and can be shared across threads. The only mutation path
//! is [`Tensor::data_mut`], which copies on write.

use std::fmt;
use std::iter::Sum;
use std::sync::Arc;

use num_traits::Float;

use crate::{Error, Result};

pub(crate) mod kernels;
pub mod par;
mod rng;

pub use rng::Rng;

use kernels::ConvGeom;

/// Element type of every tensor. `f32` at runtime, `f64` for verification.
pub trait Scalar: Float + Default + fmt::Debug + fmt::Display + Send + Sync + Sum + 'static {
    const NAME: &'static str;

    fn cast(x: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn cast(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn cast(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{:?}[", self.shape)?;
        for (i, x) in self.data.iter().take(SHOWN).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        if self.data.len() > SHOWN {
            write!(f, ", …")?;
        }
        write!(f, "]")
    }
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.contains(&0) {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "extents must be positive".into(),
        });
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != data.len() {
            return Err(Error::InvalidShape {
                shape: shape.to_vec(),
                reason: format!("{} elements supplied", data.len()),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: Arc::new(data),
        })
    }

    /// Panicking constructor for shapes known to be valid.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            shape,
            data: Arc::new(data),
        }
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Self::from_parts(shape.to_vec(), vec![value; n]))
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::one())
    }

    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> T) -> Result<Self> {
        let n = check_shape(shape)?;
        Ok(Self::from_parts(shape.to_vec(), (0..n).map(f).collect()))
    }

    /// Rank-0 tensor.
    pub fn scalar(value: T) -> Self {
        Self::from_parts(Vec::new(), vec![value])
    }

    /// Rank-1 tensor. Panics on an empty vector.
    pub fn vector(data: Vec<T>) -> Self {
        assert!(!data.is_empty(), "empty vector tensor");
        Self::from_parts(vec![data.len()], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Copy-on-write access to the elements.
    pub fn data_mut(&mut self) -> &mut [T] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.data.as_ref().clone()
    }

    /// The single element of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.data.len() != 1 {
            return Err(Error::InvalidShape {
                shape: self.shape.clone(),
                reason: "not a single element".into(),
            });
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Same storage under a new shape.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        let n = check_shape(shape)?;
        if n != self.len() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: Arc::clone(&self.data),
        })
    }

    pub fn flatten(&self) -> Self {
        Self {
            shape: vec![self.len()],
            data: Arc::clone(&self.data),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor::from_parts(
            self.shape.clone(),
            self.data.iter().map(|&x| U::cast(x.as_f64())).collect(),
        )
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(op, &self.shape, &other.shape));
        }
        Ok(Self::from_parts(
            self.shape.clone(),
            self.data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "mul", |a, b| a * b)
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "div", |a, b| a / b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|x| x * c)
    }

    pub fn add_scalar(&self, c: T) -> Self {
        self.map(|x| x + c)
    }

    pub fn relu(&self) -> Self {
        self.map(relu)
    }

    pub fn sigmoid(&self) -> Self {
        self.map(sigmoid)
    }

    pub fn exp(&self) -> Self {
        self.map(|x| x.exp())
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.sum() / T::cast(self.len() as f64)
    }

    /// Rows `start..start + len` along the first axis.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let first = *self.shape.first().ok_or_else(|| Error::InvalidShape {
            shape: Vec::new(),
            reason: "cannot slice a scalar".into(),
        })?;
        if len == 0 || start + len > first {
            return Err(Error::InvalidShape {
                shape: self.shape.clone(),
                reason: format!("slice {start}..{} out of range", start + len),
            });
        }
        let inner: usize = self.shape[1..].iter().product();
        let mut shape = self.shape.clone();
        shape[0] = len;
        Ok(Self::from_parts(
            shape,
            self.data[start * inner..(start + len) * inner].to_vec(),
        ))
    }

    fn matrix_dims(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::InvalidShape {
                shape: self.shape.clone(),
                reason: format!("{op} expects a matrix"),
            }),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.matrix_dims("matmul")?;
        let (k2, n) = other.matrix_dims("matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", &self.shape, &other.shape));
        }
        let mut out = vec![T::zero(); m * n];
        kernels::gemm_nn(&self.data, &other.data, &mut out, m, k, n);
        Ok(Self::from_parts(vec![m, n], out))
    }

    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.matrix_dims("transpose")?;
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(Self::from_parts(vec![c, r], out))
    }

    /// Valid-padding cross-correlation of an `H×W×C` input with `K×K×C×F`
    /// kernels. Output is `H'×W'×F` with `H' = ⌊(H−K)/stride⌋ + 1`.
    pub fn conv2d(&self, kernels: &Self, stride: usize) -> Result<Self> {
        let g = conv_geom(self.shape(), kernels.shape(), stride)?;
        let out = kernels::conv2d_forward(&self.data, &kernels.data, g);
        Ok(Self::from_parts(vec![g.out_h(), g.out_w(), g.f], out))
    }
}

pub(crate) fn conv_geom(input: &[usize], kernel: &[usize], stride: usize) -> Result<ConvGeom> {
    let (h, w, c) = match input {
        &[h, w, c] => (h, w, c),
        _ => {
            return Err(Error::InvalidShape {
                shape: input.to_vec(),
                reason: "conv2d input must be H×W×C".into(),
            })
        }
    };
    let (k, f) = match kernel {
        &[k1, k2, kc, f] if k1 == k2 && kc == c => (k1, f),
        _ => return Err(Error::shape("conv2d", input, kernel)),
    };
    if stride == 0 {
        return Err(Error::InvalidConfig("conv2d stride must be positive".into()));
    }
    if k > h || k > w {
        return Err(Error::InvalidShape {
            shape: kernel.to_vec(),
            reason: format!("kernel larger than {h}×{w} input"),
        });
    }
    Ok(ConvGeom { h, w, c, k, f, stride })
}

/// `max(0, x)`; the subgradient used at exactly 0 is 0.
#[inline]
pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_and_small_product() {
        let i2 = t(&[2, 2], &[1., 0., 0., 1.]);
        let m = t(&[2, 2], &[1., 2., 3., 4.]);
        assert_eq!(i2.matmul(&m).unwrap(), m);

        let row = t(&[1, 2], &[1., 2.]);
        let col = t(&[2, 1], &[3., 4.]);
        assert_eq!(row.matmul(&col).unwrap().data(), &[11.0]);

        let z = Tensor::<f64>::zeros(&[2, 2]).unwrap();
        let any = t(&[2, 3], &[1., -2., 3., 4., 5., 6.]);
        assert!(z.matmul(&any).unwrap().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn matmul_mismatch_reports_both_shapes() {
        let a = Tensor::<f32>::zeros(&[2, 3]).unwrap();
        let b = Tensor::<f32>::zeros(&[2, 3]).unwrap();
        match a.matmul(&b) {
            Err(Error::ShapeMismatch { left, right, .. }) => {
                assert_eq!(left, vec![2, 3]);
                assert_eq!(right, vec![2, 3]);
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn conv2d_ones() {
        let x = Tensor::<f64>::ones(&[5, 5, 1]).unwrap();
        let k = Tensor::<f64>::ones(&[3, 3, 1, 1]).unwrap();
        let y = x.conv2d(&k, 1).unwrap();
        assert_eq!(y.shape(), &[3, 3, 1]);
        assert!(y.data().iter().all(|&v| v == 9.0));
    }

    #[test]
    fn conv2d_pointwise_identity_mixes_channels() {
        let x = Tensor::<f64>::from_fn(&[4, 3, 2], |i| i as f64).unwrap();
        let k = t(&[1, 1, 2, 2], &[1., 0., 0., 1.]);
        assert_eq!(x.conv2d(&k, 1).unwrap(), x);
        let swap = t(&[1, 1, 2, 2], &[0., 1., 1., 0.]);
        let y = x.conv2d(&swap, 1).unwrap();
        assert_eq!(y.data()[0], x.data()[1]);
        assert_eq!(y.data()[1], x.data()[0]);
    }

    #[test]
    fn conv2d_is_cross_correlation() {
        // Asymmetric kernel: flipping would change the answer.
        let x = t(&[1, 3, 1], &[1., 2., 3.]);
        let k = t(&[1, 1, 1, 1], &[2.]);
        assert_eq!(x.conv2d(&k, 1).unwrap().data(), &[2., 4., 6.]);
        let x = t(&[2, 2, 1], &[1., 2., 3., 4.]);
        let k = t(&[2, 2, 1, 1], &[1., 0., 0., 0.]);
        assert_eq!(x.conv2d(&k, 1).unwrap().data(), &[1.]);
    }

    #[test]
    fn conv2d_front_layer_shape() {
        let x = Tensor::<f32>::zeros(&[66, 200, 3]).unwrap();
        let k = Tensor::<f32>::zeros(&[5, 5, 3, 24]).unwrap();
        assert_eq!(x.conv2d(&k, 2).unwrap().shape(), &[31, 98, 24]);
    }

    #[test]
    fn conv2d_rejects_large_kernel() {
        let x = Tensor::<f32>::zeros(&[2, 8, 1]).unwrap();
        let k = Tensor::<f32>::zeros(&[3, 3, 1, 1]).unwrap();
        assert!(x.conv2d(&k, 1).is_err());
    }

    #[test]
    fn relu_and_sigmoid() {
        let x = t(&[3], &[-1., 0., 2.]);
        assert_eq!(x.relu().data(), &[0., 0., 2.]);
        assert_eq!(t(&[2], &[-3., -0.5]).relu().data(), &[0., 0.]);
        let pos = t(&[2], &[0.5, 7.]);
        assert_eq!(pos.relu(), pos);
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64).is_finite());
        assert_eq!(sigmoid(800.0f64), 1.0);
    }

    #[test]
    fn reductions_and_reshapes() {
        assert_eq!(t(&[3], &[1., 2., 3.]).mean(), 2.0);
        let x = Tensor::<f32>::zeros(&[3, 20, 64]).unwrap();
        assert_eq!(x.flatten().shape(), &[3840]);
        assert!(x.reshape(&[7]).is_err());
        let s = Tensor::<f64>::from_fn(&[4, 2], |i| i as f64)
            .unwrap()
            .slice(1, 2)
            .unwrap();
        assert_eq!(s.data(), &[2., 3., 4., 5.]);
    }

    #[test]
    fn binary_ops_check_shapes() {
        let a = Tensor::<f32>::zeros(&[2]).unwrap();
        let b = Tensor::<f32>::zeros(&[3]).unwrap();
        assert!(a.add(&b).is_err());
        assert!(a.mul(&b).is_err());
        assert!(Tensor::<f32>::zeros(&[0, 2]).is_err());
    }

    #[test]
    fn data_mut_copies_on_write() {
        let a = Tensor::<f32>::zeros(&[2]).unwrap();
        let mut b = a.clone();
        b.data_mut()[0] = 1.0;
        assert_eq!(a.data()[0], 0.0);
        assert_eq!(b.data()[0], 1.0);
    }
}

use std::io::{Read, Write};

use super::Real;
use crate::error::{Error, Result};

/// Row-major dense array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Real = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "Tensor::from_vec",
                format!("shape {shape:?} needs {n} values, got {}", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn full(shape: &[usize], v: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![v],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn eye(n: usize) -> Self {
        Self::from_fn(&[n, n], |i| if i / n == i % n { T::one() } else { T::zero() })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(op, format!("expected a matrix, got shape {:?}", self.shape))),
        }
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::from_vec(shape.to_vec(), self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn item(&self) -> T {
        self.data[0]
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Debug dump: `u32` rank, `u64` dims, then values, all little-endian.
/// Values are written at the tensor's own width.
pub fn write_dump<T: Real, W: Write>(t: &Tensor<T>, w: &mut W) -> std::io::Result<()> {
    w.write_all(&(t.rank() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in t.data() {
        if T::BYTES == 4 {
            w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
        } else {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dump<T: Real, R: Read>(r: &mut R) -> Result<Tensor<T>> {
    let mut read = |n: usize| -> Result<Vec<u8>> {
        let mut b = vec![0u8; n];
        r.read_exact(&mut b)
            .map_err(|e| Error::Malformed(format!("truncated tensor dump: {e}")))?;
        Ok(b)
    };
    let rank = u32::from_le_bytes(read(4)?.try_into().unwrap()) as usize;
    let shape = (0..rank)
        .map(|_| Ok(u64::from_le_bytes(read(8)?.try_into().unwrap()) as usize))
        .collect::<Result<Vec<_>>>()?;
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            Ok(if T::BYTES == 4 {
                T::from_f64_lossy(f64::from(f32::from_le_bytes(read(4)?.try_into().unwrap())))
            } else {
                T::from_f64_lossy(f64::from_le_bytes(read(8)?.try_into().unwrap()))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Tensor::from_vec(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checked() {
        assert!(Tensor::<f64>::from_vec(vec![2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::<f64>::from_vec(vec![2, 3], vec![0.0; 6]).unwrap();
        assert_eq!(t.dims2("t").unwrap(), (2, 3));
        assert!(t.clone().reshape(&[4]).is_err());
        assert_eq!(t.reshape(&[3, 2]).unwrap().shape(), &[3, 2]);
    }

    #[test]
    fn dump_round_trip() {
        let t = Tensor::<f64>::from_fn(&[2, 2, 3], |i| i as f64 * 0.25 - 1.0);
        let mut buf = Vec::new();
        write_dump(&t, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 3 * 8 + 12 * 8);
        assert_eq!(read_dump::<f64, _>(&mut buf.as_slice()).unwrap(), t);

        let s = t.cast::<f32>();
        let mut buf = Vec::new();
        write_dump(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 3 * 8 + 12 * 4);
        assert_eq!(read_dump::<f32, _>(&mut buf.as_slice()).unwrap(), s);
    }
}

//! Dense row-major f64 tensors.
//!
//! Deliberately small: just the storage, broadcasting and contraction
//! operations the graph engine needs. Shapes are owned `Vec<usize>`; a scalar
//! is the empty shape.

use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if numel(&shape) != data.len() {
            return Err(Error::shape(
                format!("{:?} ({} elems)", shape, numel(&shape)),
                format!("{} elems", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel(shape)],
        }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; numel(shape)],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n = numel(shape);
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Scalar value of a one-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "item() on non-scalar tensor");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reinterpret with a new shape of the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.data.len() {
            return Err(Error::shape(
                format!("{:?}", self.shape),
                format!("reshape to {:?}", shape),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Tensor {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    /// Row-major strides of `shape`.
    pub fn strides_of(shape: &[usize]) -> Vec<usize> {
        let mut strides = vec![0; shape.len()];
        let mut acc = 1;
        for (i, &d) in shape.iter().enumerate().rev() {
            strides[i] = acc;
            acc *= d;
        }
        strides
    }
}

/// Broadcast result shape of two operand shapes (numpy trailing-dim rules).
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = if da == db {
            da
        } else if da == 1 {
            db
        } else if db == 1 {
            da
        } else {
            return Err(Error::shape(format!("{:?}", a), format!("{:?} (broadcast)", b)));
        };
    }
    Ok(out)
}

/// Strides for reading an operand of `shape` as if broadcast to `out_shape`
/// (stride 0 on broadcast axes).
fn broadcast_strides(shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let rank = out_shape.len();
    let offset = rank - shape.len();
    let base = Tensor::strides_of(shape);
    let mut strides = vec![0; rank];
    for i in 0..shape.len() {
        strides[offset + i] = if shape[i] == 1 { 0 } else { base[i] };
    }
    strides
}

/// Elementwise binary op with broadcasting.
pub fn binary_broadcast(
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64 + Sync + Send,
) -> Result<Tensor> {
    if a.shape == b.shape {
        let mut out = a.clone();
        out.data
            .iter_mut()
            .zip(&b.data)
            .for_each(|(x, y)| *x = f(*x, *y));
        return Ok(out);
    }
    let out_shape = broadcast_shape(&a.shape, &b.shape)?;
    let sa = broadcast_strides(&a.shape, &out_shape);
    let sb = broadcast_strides(&b.shape, &out_shape);
    let n = numel(&out_shape);
    let rank = out_shape.len();
    let mut data = vec![0.0; n];
    let mut idx = vec![0usize; rank];
    let (mut oa, mut ob) = (0usize, 0usize);
    for v in data.iter_mut() {
        *v = f(a.data[oa], b.data[ob]);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            oa += sa[ax];
            ob += sb[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            idx[ax] = 0;
            oa -= sa[ax] * out_shape[ax];
            ob -= sb[ax] * out_shape[ax];
        }
    }
    Tensor::new(out_shape, data)
}

/// Sum `t` down to `shape` (the adjoint of broadcasting `shape` up to `t`).
pub fn sum_to_shape(t: &Tensor, shape: &[usize]) -> Result<Tensor> {
    if t.shape == shape {
        return Ok(t.clone());
    }
    let strides = broadcast_strides(shape, &t.shape);
    let rank = t.shape.len();
    let mut out = Tensor::zeros(shape);
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for &v in t.data.iter() {
        out.data[off] += v;
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off += strides[ax];
            if idx[ax] < t.shape[ax] {
                break;
            }
            idx[ax] = 0;
            off -= strides[ax] * t.shape[ax];
        }
    }
    Ok(out)
}

/// Batched matrix product. Supports (m,k)x(k,n), (b,m,k)x(b,k,n) and
/// (b,m,k)x(k,n) with the right-hand side shared across the batch.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ar, br) = (a.shape.len(), b.shape.len());
    if ar < 2 || br < 2 {
        return Err(Error::shape("rank >= 2 operands", format!("{:?} x {:?}", a.shape, b.shape)));
    }
    let (m, k) = (a.shape[ar - 2], a.shape[ar - 1]);
    let (kb, n) = (b.shape[br - 2], b.shape[br - 1]);
    if k != kb {
        return Err(Error::shape(
            format!("inner dims equal, lhs {:?}", a.shape),
            format!("rhs {:?}", b.shape),
        ));
    }
    let batch_a: usize = a.shape[..ar - 2].iter().product();
    let batch_b: usize = b.shape[..br - 2].iter().product();
    if !(batch_a == batch_b || batch_b == 1) {
        return Err(Error::shape(
            format!("batch dims equal or rhs unbatched, lhs {:?}", a.shape),
            format!("rhs {:?}", b.shape),
        ));
    }
    let mut out_shape = a.shape[..ar - 2].to_vec();
    out_shape.push(m);
    out_shape.push(n);
    let mut out = Tensor::zeros(&out_shape);
    let (adata, bdata) = (&a.data, &b.data);
    par::for_each_chunk_mut(&mut out.data, m * n, |batch, chunk| {
        let abase = batch * m * k;
        let bbase = if batch_b == 1 { 0 } else { batch * k * n };
        for i in 0..m {
            let arow = &adata[abase + i * k..abase + (i + 1) * k];
            let orow = &mut chunk[i * n..(i + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let brow = &bdata[bbase + p * n..bbase + (p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    });
    Ok(out)
}

/// Swap the last two axes.
pub fn transpose_last2(t: &Tensor) -> Result<Tensor> {
    let r = t.shape.len();
    if r < 2 {
        return Err(Error::shape("rank >= 2", format!("{:?}", t.shape)));
    }
    let (m, n) = (t.shape[r - 2], t.shape[r - 1]);
    let batch: usize = t.shape[..r - 2].iter().product();
    let mut shape = t.shape.clone();
    shape[r - 2] = n;
    shape[r - 1] = m;
    let mut out = Tensor::zeros(&shape);
    let src = &t.data;
    par::for_each_chunk_mut(&mut out.data, m * n, |b, chunk| {
        let base = b * m * n;
        for i in 0..m {
            for j in 0..n {
                chunk[j * m + i] = src[base + i * n + j];
            }
        }
    });
    Ok(out)
}

/// Permute axes by `perm` (a permutation of 0..rank).
pub fn permute(t: &Tensor, perm: &[usize]) -> Result<Tensor> {
    let rank = t.shape.len();
    if perm.len() != rank {
        return Err(Error::shape(format!("perm of rank {}", rank), format!("{:?}", perm)));
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| t.shape[p]).collect();
    let in_strides = Tensor::strides_of(&t.shape);
    let perm_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let n = t.data.len();
    let mut out = Tensor::zeros(&out_shape);
    let mut idx = vec![0usize; rank];
    let mut src = 0usize;
    for o in 0..n {
        out.data[o] = t.data[src];
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            src += perm_strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            idx[ax] = 0;
            src -= perm_strides[ax] * out_shape[ax];
        }
    }
    Ok(out)
}

/// Concatenate along axis 0.
pub fn concat0(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::shape("at least one tensor", "none"));
    }
    let tail = &parts[0].shape[1..];
    let mut rows = 0;
    for p in parts {
        if p.shape.is_empty() || &p.shape[1..] != tail {
            return Err(Error::shape(
                format!("trailing dims {:?}", tail),
                format!("{:?}", p.shape),
            ));
        }
        rows += p.shape[0];
    }
    let mut shape = vec![rows];
    shape.extend_from_slice(tail);
    let mut data = Vec::with_capacity(numel(&shape));
    for p in parts {
        data.extend_from_slice(&p.data);
    }
    Tensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_channel_affine() {
        let x = Tensor::new(vec![2, 2, 3], (0..12).map(|i| i as f64).collect()).unwrap();
        let m = Tensor::new(vec![2, 1, 1], vec![10.0, 100.0]).unwrap();
        let y = binary_broadcast(&x, &m, |a, b| a * b).unwrap();
        assert_eq!(y.shape(), &[2, 2, 3]);
        assert_eq!(y.data()[0], 0.0);
        assert_eq!(y.data()[5], 50.0);
        assert_eq!(y.data()[6], 600.0);
    }

    #[test]
    fn sum_to_shape_is_broadcast_adjoint() {
        let g = Tensor::full(&[2, 2, 3], 1.0);
        let s = sum_to_shape(&g, &[2, 1, 1]).unwrap();
        assert_eq!(s.data(), &[6.0, 6.0]);
    }

    #[test]
    fn matmul_trace_case() {
        // identity x B summed gives trace-related values: I*B = B
        let a = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), b.data());
    }

    #[test]
    fn matmul_batched_shared_rhs() {
        let a = Tensor::new(vec![2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 1, 2]);
        assert_eq!(c.data(), a.data());
    }

    #[test]
    fn permute_roundtrip() {
        let t = Tensor::new(vec![2, 3, 4], (0..24).map(|i| i as f64).collect()).unwrap();
        let p = permute(&t, &[2, 0, 1]).unwrap();
        let q = permute(&p, &[1, 2, 0]).unwrap();
        assert_eq!(q, t);
    }
}

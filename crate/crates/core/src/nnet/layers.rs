//! Layer primitives with explicit forward and backward passes.
//!
//! Convolutions use 2×1 filters along the microphone axis with valid padding
//! and stride 1: activations have shape `(batch, channels, rows, bins)` and
//! every output row `i` combines input rows `i` and `i + 1` independently at
//! each frequency bin.

use super::scalar::{gemm, Layout};
use super::{Scalar, Tensor};
use crate::{Error, Result};

fn conv_dims<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>) -> Result<(usize, usize, usize, usize, usize)> {
    let &[b, c, r, k] = input.shape() else {
        return Err(Error::shape(format!("conv input must be 4-D, got {:?}", input.shape())));
    };
    let &[f, wc, 2, 1] = weight.shape() else {
        return Err(Error::shape(format!("conv filters must be (F, C, 2, 1), got {:?}", weight.shape())));
    };
    if wc != c {
        return Err(Error::shape(format!("filters expect {wc} channels, input has {c}")));
    }
    if r < 2 {
        return Err(Error::shape(format!("conv needs at least 2 rows, got {r}")));
    }
    Ok((b, c, r, k, f))
}

/// Valid 2×1 convolution. Input `(B, C, R, K)`, filters `(F, C, 2, 1)`,
/// bias `(F)`; output `(B, F, R-1, K)`.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, c, r, k, f) = conv_dims(input, weight)?;
    if bias.len() != f {
        return Err(Error::shape(format!("bias has {} entries for {f} filters", bias.len())));
    }
    let cols = (r - 1) * k;
    let mut out = Tensor::zeros(&[b, f, r - 1, k]);
    let x = input.data();
    let w = weight.data();
    let y = out.data_mut();
    for s in 0..b {
        let y_off = s * f * cols;
        for (fi, &bv) in bias.data().iter().enumerate() {
            y[y_off + fi * cols..y_off + (fi + 1) * cols].iter_mut().for_each(|v| *v = bv);
        }
        for t in 0..2 {
            gemm(
                f,
                c,
                cols,
                T::one(),
                w,
                Layout::at(t, 2 * c, 2),
                x,
                Layout::at(s * c * r * k + t * k, r * k, 1),
                T::one(),
                y,
                Layout::at(y_off, cols, 1),
            );
        }
    }
    Ok(out)
}

/// Gradients of a 2×1 convolution: `(d_input, d_weight, d_bias)`.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (b, c, r, k, f) = conv_dims(input, weight)?;
    if grad_out.shape() != [b, f, r - 1, k] {
        return Err(Error::shape(format!(
            "conv upstream gradient {:?}, expected {:?}",
            grad_out.shape(),
            [b, f, r - 1, k]
        )));
    }
    let cols = (r - 1) * k;
    let mut dx = Tensor::zeros(input.shape());
    let mut dw = Tensor::zeros(weight.shape());
    let mut db = Tensor::zeros(&[f]);
    let x = input.data();
    let w = weight.data();
    let g = grad_out.data();
    for s in 0..b {
        let g_off = s * f * cols;
        for (fi, d) in db.data_mut().iter_mut().enumerate() {
            *d += g[g_off + fi * cols..g_off + (fi + 1) * cols].iter().copied().sum::<T>();
        }
        for t in 0..2 {
            // dW_t (F×C) += G (F×cols) · X_tᵀ (cols×C)
            gemm(
                f,
                cols,
                c,
                T::one(),
                g,
                Layout::at(g_off, cols, 1),
                x,
                Layout::at(s * c * r * k + t * k, 1, r * k),
                T::one(),
                dw.data_mut(),
                Layout::at(t, 2 * c, 2),
            );
            // dX_t (C×cols) += W_tᵀ (C×F) · G (F×cols)
            gemm(
                c,
                f,
                cols,
                T::one(),
                w,
                Layout::at(t, 2, 2 * c),
                g,
                Layout::at(g_off, cols, 1),
                T::one(),
                dx.data_mut(),
                Layout::at(s * c * r * k + t * k, r * k, 1),
            );
        }
    }
    Ok((dx, dw, db))
}

fn dense_dims<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let &[dout, din] = weight.shape() else {
        return Err(Error::shape(format!("dense weight must be 2-D, got {:?}", weight.shape())));
    };
    let b = input.shape().first().copied().unwrap_or(0);
    if b == 0 || input.len() != b * din {
        return Err(Error::shape(format!("dense input {:?} does not flatten to (B, {din})", input.shape())));
    }
    Ok((b, din, dout))
}

/// Fully connected layer. Input `(B, ...)` flattened to `(B, D_in)`, weight
/// `(D_out, D_in)`, bias `(D_out)`; output `(B, D_out)`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, din, dout) = dense_dims(input, weight)?;
    if bias.len() != dout {
        return Err(Error::shape(format!("bias has {} entries for {dout} outputs", bias.len())));
    }
    let mut out = Tensor::zeros(&[b, dout]);
    for row in out.data_mut().chunks_exact_mut(dout) {
        row.copy_from_slice(bias.data());
    }
    gemm(
        b,
        din,
        dout,
        T::one(),
        input.data(),
        Layout::row_major(din),
        weight.data(),
        Layout::row_major(din).transposed(),
        T::one(),
        out.data_mut(),
        Layout::row_major(dout),
    );
    Ok(out)
}

/// Gradients of a dense layer: `(d_input, d_weight, d_bias)`; `d_input` has
/// the input's shape.
pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (b, din, dout) = dense_dims(input, weight)?;
    if grad_out.shape() != [b, dout] {
        return Err(Error::shape(format!("dense upstream gradient {:?}, expected {:?}", grad_out.shape(), [b, dout])));
    }
    let mut dx = Tensor::zeros(input.shape());
    let mut dw = Tensor::zeros(weight.shape());
    let mut db = Tensor::zeros(&[dout]);
    for row in grad_out.data().chunks_exact(dout) {
        db.data_mut().iter_mut().zip(row).for_each(|(d, &g)| *d += g);
    }
    // dW (out×in) = Gᵀ (out×B) · X (B×in)
    gemm(
        dout,
        b,
        din,
        T::one(),
        grad_out.data(),
        Layout::row_major(dout).transposed(),
        input.data(),
        Layout::row_major(din),
        T::zero(),
        dw.data_mut(),
        Layout::row_major(din),
    );
    // dX (B×in) = G (B×out) · W (out×in)
    gemm(
        b,
        dout,
        din,
        T::one(),
        grad_out.data(),
        Layout::row_major(dout),
        weight.data(),
        Layout::row_major(din),
        T::zero(),
        dx.data_mut(),
        Layout::row_major(din),
    );
    Ok((dx, dw, db))
}

pub fn relu_forward<T: Scalar>(pre: &Tensor<T>) -> Tensor<T> {
    let mut out = pre.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(T::zero()));
    out
}

/// Passes the gradient where the pre-activation is positive, zero elsewhere.
pub fn relu_backward<T: Scalar>(pre: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if pre.shape() != grad_out.shape() {
        return Err(Error::shape("relu gradient shape differs from activation"));
    }
    let mut g = grad_out.clone();
    g.data_mut().iter_mut().zip(pre.data()).for_each(|(g, &p)| {
        if p <= T::zero() {
            *g = T::zero()
        }
    });
    Ok(g)
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

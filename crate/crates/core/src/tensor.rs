//! Dense 4-axis tensors and the convolution primitives the network is built on.
//!
//! Layout is `(n, c, h, w)`, row-major with `w` fastest. Convolutions are
//! cross-correlations (no kernel flip), lowered to a matrix product through an
//! explicit patch matrix, one batch item at a time so every reduction runs in a
//! fixed order.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::contract(
                "Tensor::new",
                format!("shape {shape:?} needs {len} elements, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Tensor {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: [usize; 4], value: f64) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
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

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn item(&self, b: usize) -> &[f64] {
        let len = self.item_len();
        &self.data[b * len..(b + 1) * len]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [f64] {
        let len = self.item_len();
        &mut self.data[b * len..(b + 1) * len]
    }

    pub fn get(&self, n: usize, c: usize, i: usize, j: usize) -> f64 {
        let [_, cs, hs, ws] = self.shape;
        self.data[((n * cs + c) * hs + i) * ws + j]
    }

    pub fn set(&mut self, n: usize, c: usize, i: usize, j: usize, value: f64) {
        let [_, cs, hs, ws] = self.shape;
        self.data[((n * cs + c) * hs + i) * ws + j] = value;
    }

    /// Sum of elementwise products.
    pub fn dot(&self, other: &Tensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        ensure_same_shape("Tensor::zip_map", self, other)?;
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stack single-item tensors along the batch axis.
    pub fn stack(items: &[&Tensor]) -> Result<Tensor> {
        let first = items
            .first()
            .ok_or_else(|| Error::contract("Tensor::stack", "no items"))?;
        let [_, c, h, w] = first.shape;
        let mut data = Vec::with_capacity(items.len() * c * h * w);
        for t in items {
            if t.shape[1..] != first.shape[1..] {
                return Err(Error::contract(
                    "Tensor::stack",
                    format!("item shape {:?} differs from {:?}", t.shape, first.shape),
                ));
            }
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor {
            shape: [data.len() / (c * h * w).max(1), c, h, w],
            data,
        })
    }
}

pub(crate) fn ensure_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::contract(
            op,
            format!("shape {:?} does not match {:?}", a.shape, b.shape),
        ));
    }
    Ok(())
}

/// Output spatial size of a convolution, or a contract error naming the axis.
fn conv_geometry(
    op: &'static str,
    x: [usize; 4],
    weights: [usize; 4],
    bias_len: Option<usize>,
    pad: usize,
) -> Result<(usize, usize)> {
    let [_, ci, h, w] = x;
    let [co, wci, kh, kw] = weights;
    if ci != wci {
        return Err(Error::contract(
            op,
            format!("channel axis: input has {ci} channels, weights expect {wci}"),
        ));
    }
    if let Some(nb) = bias_len {
        if nb != co {
            return Err(Error::contract(
                op,
                format!("output-channel axis: {co} kernels but {nb} biases"),
            ));
        }
    }
    if kh == 0 || kw == 0 || kh > h + 2 * pad {
        return Err(Error::contract(
            op,
            format!(
                "height axis: kernel {kh} does not fit padded height {}",
                h + 2 * pad
            ),
        ));
    }
    if kw > w + 2 * pad {
        return Err(Error::contract(
            op,
            format!(
                "width axis: kernel {kw} does not fit padded width {}",
                w + 2 * pad
            ),
        ));
    }
    Ok((h + 2 * pad - kh + 1, w + 2 * pad - kw + 1))
}

/// Fill `cols[(c·kh + u)·kw + v][i·wo + j] = x_padded[c][i+u][j+v]`.
#[allow(clippy::too_many_arguments)]
fn im2col(
    item: &[f64],
    ci: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    ho: usize,
    wo: usize,
    cols: &mut [f64],
) {
    let p = ho * wo;
    for c in 0..ci {
        let plane = &item[c * h * w..(c + 1) * h * w];
        for u in 0..kh {
            for v in 0..kw {
                let row = &mut cols[((c * kh + u) * kw + v) * p..][..p];
                for i in 0..ho {
                    let src_i = i + u;
                    let dst = &mut row[i * wo..(i + 1) * wo];
                    if src_i < pad || src_i - pad >= h {
                        dst.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[(src_i - pad) * w..(src_i - pad + 1) * w];
                    for (j, d) in dst.iter_mut().enumerate() {
                        let src_j = j + v;
                        *d = if src_j < pad || src_j - pad >= w {
                            0.0
                        } else {
                            src_row[src_j - pad]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulate patch-matrix entries back into the image.
#[allow(clippy::too_many_arguments)]
fn col2im(
    cols: &[f64],
    ci: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    ho: usize,
    wo: usize,
    item: &mut [f64],
) {
    let p = ho * wo;
    for c in 0..ci {
        let plane = &mut item[c * h * w..(c + 1) * h * w];
        for u in 0..kh {
            for v in 0..kw {
                let row = &cols[((c * kh + u) * kw + v) * p..][..p];
                for i in 0..ho {
                    let src_i = i + u;
                    if src_i < pad || src_i - pad >= h {
                        continue;
                    }
                    let dst_row = &mut plane[(src_i - pad) * w..(src_i - pad + 1) * w];
                    for (j, &g) in row[i * wo..(i + 1) * wo].iter().enumerate() {
                        let src_j = j + v;
                        if src_j >= pad && src_j - pad < w {
                            dst_row[src_j - pad] += g;
                        }
                    }
                }
            }
        }
    }
}

/// `c = alpha·op(a)·op(b) + beta·c` for row-major matrices, `op` chosen by the
/// transpose flags. `a` is `m×k` after `op`, `b` is `k×n` after `op`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_transposed {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_transposed {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    // SAFETY: slice lengths were checked above against the strides handed to
    // dgemm, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out[n,o,i,j] = bias[o] + Σ_{c,u,v} weights[o,c,u,v]·x_padded[n,c,i+u,j+v]`
/// with zero padding of `pad` pixels on every side.
pub fn conv2d_forward(x: &Tensor, weights: &Tensor, bias: &[f64], pad: usize) -> Result<Tensor> {
    let (ho, wo) = conv_geometry(
        "conv2d_forward",
        x.shape,
        weights.shape,
        Some(bias.len()),
        pad,
    )?;
    let [n, ci, h, w] = x.shape;
    let [co, _, kh, kw] = weights.shape;
    let k = ci * kh * kw;
    let p = ho * wo;

    let mut out = Tensor::zeros([n, co, ho, wo]);
    let mut cols = vec![0.0; k * p];
    for b in 0..n {
        im2col(x.item(b), ci, h, w, kh, kw, pad, ho, wo, &mut cols);
        let dst = out.item_mut(b);
        for (o, row) in dst.chunks_exact_mut(p).enumerate() {
            row.fill(bias[o]);
        }
        gemm(co, k, p, &weights.data, false, &cols, false, 1.0, dst);
    }
    Ok(out)
}

/// Gradients of `Σ(grad_out ⊙ conv2d_forward(x, weights, ·, pad))`.
#[derive(Clone, Debug)]
pub struct ConvGrads {
    pub grad_x: Tensor,
    pub grad_w: Tensor,
    pub grad_b: Vec<f64>,
}

pub fn conv2d_backward(
    x: &Tensor,
    weights: &Tensor,
    pad: usize,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let (ho, wo) = conv_geometry("conv2d_backward", x.shape, weights.shape, None, pad)?;
    let [n, ci, h, w] = x.shape;
    let [co, _, kh, kw] = weights.shape;
    if grad_out.shape != [n, co, ho, wo] {
        return Err(Error::contract(
            "conv2d_backward",
            format!(
                "grad_out shape {:?} does not match forward output {:?}",
                grad_out.shape,
                [n, co, ho, wo]
            ),
        ));
    }
    let k = ci * kh * kw;
    let p = ho * wo;

    let mut grad_x = Tensor::zeros(x.shape);
    let mut grad_w = Tensor::zeros(weights.shape);
    let mut grad_b = vec![0.0; co];
    let mut cols = vec![0.0; k * p];
    let mut grad_cols = vec![0.0; k * p];
    for b in 0..n {
        let g = grad_out.item(b);
        for (o, row) in g.chunks_exact(p).enumerate() {
            grad_b[o] += row.iter().sum::<f64>();
        }
        im2col(x.item(b), ci, h, w, kh, kw, pad, ho, wo, &mut cols);
        // grad_w[co×k] += G[co×p] · colsᵀ[p×k]
        gemm(co, p, k, g, false, &cols, true, 1.0, &mut grad_w.data);
        // grad_cols[k×p] = Wᵀ[k×co] · G[co×p]
        gemm(k, co, p, &weights.data, true, g, false, 0.0, &mut grad_cols);
        col2im(
            &grad_cols,
            ci,
            h,
            w,
            kh,
            kw,
            pad,
            ho,
            wo,
            grad_x.item_mut(b),
        );
    }
    Ok(ConvGrads {
        grad_x,
        grad_w,
        grad_b,
    })
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Passes `grad_out` where `x > 0`; zero elsewhere, including at `x == 0`.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    x.zip_map(grad_out, |v, g| if v > 0.0 { g } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_normal, SeededRng};

    #[allow(clippy::needless_range_loop)]
    fn naive_conv(x: &Tensor, wt: &Tensor, bias: &[f64], pad: usize) -> Tensor {
        let [n, ci, h, w] = x.shape();
        let [co, _, kh, kw] = wt.shape();
        let (ho, wo) = (h + 2 * pad + 1 - kh, w + 2 * pad + 1 - kw);
        let mut out = Tensor::zeros([n, co, ho, wo]);
        for b in 0..n {
            for o in 0..co {
                for i in 0..ho {
                    for j in 0..wo {
                        let mut acc = bias[o];
                        for c in 0..ci {
                            for u in 0..kh {
                                for v in 0..kw {
                                    let (si, sj) = (i + u, j + v);
                                    if si >= pad && sj >= pad && si - pad < h && sj - pad < w {
                                        acc += wt.get(o, c, u, v) * x.get(b, c, si - pad, sj - pad);
                                    }
                                }
                            }
                        }
                        out.set(b, o, i, j, acc);
                    }
                }
            }
        }
        out
    }

    fn uniform(rng: &mut SeededRng, shape: [usize; 4]) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(
            shape,
            (0..len).map(|_| 2.0 * rng.next_f64() - 1.0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_kernel_copies_input() {
        let x = Tensor::new([1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let wt = Tensor::new([1, 1, 1, 1], vec![1.0]).unwrap();
        let y = conv2d_forward(&x, &wt, &[0.0], 0).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_kernel_sums_window() {
        let x = Tensor::new([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let wt = Tensor::filled([1, 1, 2, 2], 1.0);
        let y = conv2d_forward(&x, &wt, &[0.0], 0).unwrap();
        assert_eq!(y.shape(), [1, 1, 1, 1]);
        assert_eq!(y.data(), &[10.0]);
    }

    #[test]
    fn zero_input_passes_bias() {
        let x = Tensor::zeros([1, 1, 3, 3]);
        let mut rng = SeededRng::new(3);
        let wt = uniform(&mut rng, [1, 1, 3, 3]);
        let y = conv2d_forward(&x, &wt, &[0.5], 1).unwrap();
        assert_eq!(y.shape(), [1, 1, 3, 3]);
        assert!(y.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn matches_nested_loops() {
        let mut rng = SeededRng::new(11);
        for &(n, ci, co, h, w, k, pad) in &[
            (2, 3, 4, 5, 6, 3, 1),
            (1, 2, 1, 4, 4, 3, 0),
            (3, 1, 2, 7, 5, 1, 0),
            (1, 2, 3, 3, 3, 3, 2),
        ] {
            let x = uniform(&mut rng, [n, ci, h, w]);
            let wt = uniform(&mut rng, [co, ci, k, k]);
            let bias: Vec<f64> = (0..co).map(|_| rng.next_f64()).collect();
            let fast = conv2d_forward(&x, &wt, &bias, pad).unwrap();
            let slow = naive_conv(&x, &wt, &bias, pad);
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors_name_the_axis() {
        let x = Tensor::zeros([1, 2, 4, 4]);
        let wt = Tensor::zeros([1, 3, 3, 3]);
        let err = conv2d_forward(&x, &wt, &[0.0], 1).unwrap_err().to_string();
        assert!(err.contains("channel axis"), "{err}");

        let wt = Tensor::zeros([1, 2, 5, 3]);
        let err = conv2d_forward(&x, &wt, &[0.0], 0).unwrap_err().to_string();
        assert!(err.contains("height axis"), "{err}");

        let wt = Tensor::zeros([2, 2, 3, 3]);
        let err = conv2d_forward(&x, &wt, &[0.0], 1).unwrap_err().to_string();
        assert!(err.contains("output-channel axis"), "{err}");

        let g = Tensor::zeros([1, 2, 3, 3]);
        assert!(conv2d_backward(&x, &wt, 1, &g).is_err());
    }

    #[test]
    fn zero_upstream_gradient() {
        let mut rng = SeededRng::new(5);
        let x = uniform(&mut rng, [2, 2, 4, 4]);
        let wt = uniform(&mut rng, [3, 2, 3, 3]);
        let g = Tensor::zeros([2, 3, 4, 4]);
        let grads = conv2d_backward(&x, &wt, 1, &g).unwrap();
        assert!(grads.grad_x.data().iter().all(|&v| v == 0.0));
        assert!(grads.grad_w.data().iter().all(|&v| v == 0.0));
        assert!(grads.grad_b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_backward() {
        let mut rng = SeededRng::new(8);
        let x = uniform(&mut rng, [1, 1, 3, 3]);
        let g = uniform(&mut rng, [1, 1, 3, 3]);
        let wt = Tensor::new([1, 1, 1, 1], vec![1.0]).unwrap();
        let grads = conv2d_backward(&x, &wt, 0, &g).unwrap();
        assert_eq!(grads.grad_x, g);
        let expected: f64 = x.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        assert!((grads.grad_w.data()[0] - expected).abs() < 1e-15);
        let gsum: f64 = g.data().iter().sum();
        assert!((grads.grad_b[0] - gsum).abs() < 1e-15);
    }

    /// Central differences of `Σ g ⊙ conv(x, w, b)` against the analytic path.
    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = SeededRng::new(42);
        let x = uniform(&mut rng, [1, 1, 4, 4]);
        let wt = uniform(&mut rng, [1, 1, 3, 3]);
        let g = uniform(&mut rng, [1, 1, 4, 4]);
        let grads = conv2d_backward(&x, &wt, 1, &g).unwrap();
        let objective =
            |x: &Tensor, wt: &Tensor, b: f64| conv2d_forward(x, wt, &[b], 1).unwrap().dot(&g);
        let h = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);

        for idx in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp.data_mut()[idx] += h;
            xm.data_mut()[idx] -= h;
            let fd = (objective(&xp, &wt, 0.3) - objective(&xm, &wt, 0.3)) / (2.0 * h);
            assert!(rel(grads.grad_x.data()[idx], fd) < 1e-6, "grad_x[{idx}]");
        }
        for idx in 0..wt.len() {
            let (mut wp, mut wm) = (wt.clone(), wt.clone());
            wp.data_mut()[idx] += h;
            wm.data_mut()[idx] -= h;
            let fd = (objective(&x, &wp, 0.3) - objective(&x, &wm, 0.3)) / (2.0 * h);
            assert!(rel(grads.grad_w.data()[idx], fd) < 1e-6, "grad_w[{idx}]");
        }
        let fd = (objective(&x, &wt, 0.3 + h) - objective(&x, &wt, 0.3 - h)) / (2.0 * h);
        assert!(rel(grads.grad_b[0], fd) < 1e-6);
    }

    #[test]
    fn relu_examples() {
        let x = Tensor::new([1, 1, 1, 3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let g = Tensor::filled([1, 1, 1, 3], 5.0);
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn relu_sum_of_halves_is_abs() {
        let mut rng = SeededRng::new(1);
        let x = rng_normal(&mut rng, [2, 3, 4, 5], 0.0, 1.0).unwrap();
        let pos = relu(&x);
        let neg = relu(&x.map(|v| -v));
        for ((p, n), v) in pos.data().iter().zip(neg.data()).zip(x.data()) {
            assert_eq!(p + n, v.abs());
        }
    }
}

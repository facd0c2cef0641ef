//! Batched 2-D convolution kernels (im2col + GEMM), NCHW layout.

use rayon::prelude::*;

use super::element::matmul_rm;
use super::Element;

/// Stride and zero padding shared by both convolution flavours.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub stride: usize,
    pub pad: usize,
}

/// Spatial output size of a strided convolution, if positive.
pub fn conv_out_len(input: usize, kernel: usize, geom: ConvGeom) -> Option<usize> {
    let padded = input + 2 * geom.pad;
    if geom.stride == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / geom.stride + 1)
}

/// Spatial output size of a transposed convolution, if positive.
pub fn conv_transpose_out_len(input: usize, kernel: usize, geom: ConvGeom) -> Option<usize> {
    if geom.stride == 0 || input == 0 {
        return None;
    }
    ((input - 1) * geom.stride + kernel).checked_sub(2 * geom.pad).filter(|&n| n > 0)
}

/// Sizes of one convolution. For the transposed variant `h, w` is the
/// low-resolution side and `oh, ow` the high-resolution side, i.e. the
/// roles of a forward convolution from `(c_out, oh, ow)` to `(c_in, h, w)`
/// with the names kept from the user-facing tensors.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvDims {
    pub batch: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub k: usize,
    pub oh: usize,
    pub ow: usize,
    pub geom: ConvGeom,
}

/// Lowers the `(c, h, w)` image into a `(c·k·k) × (gh·gw)` patch matrix.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Element>(
    img: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    geom: ConvGeom,
    gh: usize,
    gw: usize,
    col: &mut [T],
) {
    let (s, p) = (geom.stride as isize, geom.pad as isize);
    let plane = gh * gw;
    for ci in 0..c {
        let src = &img[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let dst = &mut col[row * plane..(row + 1) * plane];
                for oy in 0..gh {
                    let iy = oy as isize * s + ki as isize - p;
                    let line = &mut dst[oy * gw..(oy + 1) * gw];
                    if iy < 0 || iy >= h as isize {
                        line.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src_row = &src[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = ox as isize * s + kj as isize - p;
                        *v = if ix < 0 || ix >= w as isize { T::zero() } else { src_row[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch columns back, accumulating into `img`.
#[allow(clippy::too_many_arguments)]
fn col2im<T: Element>(
    col: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    geom: ConvGeom,
    gh: usize,
    gw: usize,
    img: &mut [T],
) {
    let (s, p) = (geom.stride as isize, geom.pad as isize);
    let plane = gh * gw;
    for ci in 0..c {
        let dst = &mut img[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = (ci * k + ki) * k + kj;
                let src = &col[row * plane..(row + 1) * plane];
                for oy in 0..gh {
                    let iy = oy as isize * s + ki as isize - p;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_row = &mut dst[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..gw {
                        let ix = ox as isize * s + kj as isize - p;
                        if ix >= 0 && ix < w as isize {
                            dst_row[ix as usize] += src[oy * gw + ox];
                        }
                    }
                }
            }
        }
    }
}

fn add_channel_bias<T: Element>(out: &mut [T], bias: &[T], plane: usize) {
    for (chan, &b) in out.chunks_mut(plane).zip(bias) {
        chan.iter_mut().for_each(|v| *v += b);
    }
}

fn sum_into<T: Element>(acc: &mut [T], part: &[T]) {
    for (a, &p) in acc.iter_mut().zip(part) {
        *a += p;
    }
}

/// Forward convolution. `x: [B,Cin,H,W]`, `weight: [Cout,Cin,K,K]`, `bias: [Cout]`.
pub(crate) fn conv2d_forward<T: Element>(x: &[T], weight: &[T], bias: &[T], d: ConvDims) -> Vec<T> {
    let in_len = d.c_in * d.h * d.w;
    let plane = d.oh * d.ow;
    let rows = d.c_in * d.k * d.k;
    let mut out = vec![T::zero(); d.batch * d.c_out * plane];
    out.par_chunks_mut(d.c_out * plane).enumerate().for_each(|(b, out_b)| {
        let mut col = vec![T::zero(); rows * plane];
        im2col(&x[b * in_len..(b + 1) * in_len], d.c_in, d.h, d.w, d.k, d.geom, d.oh, d.ow, &mut col);
        matmul_rm(d.c_out, rows, plane, weight, &col, out_b);
        add_channel_bias(out_b, bias, plane);
    });
    out
}

/// Gradients of [`conv2d_forward`] with respect to input, weight and bias.
pub(crate) fn conv2d_backward<T: Element>(
    x: &[T],
    weight: &[T],
    grad_out: &[T],
    d: ConvDims,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let in_len = d.c_in * d.h * d.w;
    let plane = d.oh * d.ow;
    let rows = d.c_in * d.k * d.k;
    let parts: Vec<(Vec<T>, Vec<T>, Vec<T>)> = (0..d.batch)
        .into_par_iter()
        .map(|b| {
            let gout = &grad_out[b * d.c_out * plane..(b + 1) * d.c_out * plane];
            let mut col = vec![T::zero(); rows * plane];
            im2col(&x[b * in_len..(b + 1) * in_len], d.c_in, d.h, d.w, d.k, d.geom, d.oh, d.ow, &mut col);
            // dW = gout [Cout, P] · colᵀ [P, rows]
            let mut dw = vec![T::zero(); d.c_out * rows];
            T::gemm(
                d.c_out,
                plane,
                rows,
                gout,
                (plane as isize, 1),
                &col,
                (1, plane as isize),
                T::zero(),
                &mut dw,
                (rows as isize, 1),
            );
            // dcol = Wᵀ [rows, Cout] · gout [Cout, P]
            T::gemm(
                rows,
                d.c_out,
                plane,
                weight,
                (1, rows as isize),
                gout,
                (plane as isize, 1),
                T::zero(),
                &mut col,
                (plane as isize, 1),
            );
            let mut dx = vec![T::zero(); in_len];
            col2im(&col, d.c_in, d.h, d.w, d.k, d.geom, d.oh, d.ow, &mut dx);
            let db = gout.chunks(plane).map(|c| c.iter().copied().sum()).collect();
            (dx, dw, db)
        })
        .collect();

    let mut dx = Vec::with_capacity(d.batch * in_len);
    let mut dw = vec![T::zero(); d.c_out * rows];
    let mut db = vec![T::zero(); d.c_out];
    for (px, pw, pb) in parts {
        dx.extend_from_slice(&px);
        sum_into(&mut dw, &pw);
        sum_into(&mut db, &pb);
    }
    (dx, dw, db)
}

/// Transposed convolution. `x: [B,Cin,H,W]`, `weight: [Cin,Cout,K,K]`,
/// `bias: [Cout]`, output `[B,Cout,OH,OW]`.
pub(crate) fn conv_transpose2d_forward<T: Element>(
    x: &[T],
    weight: &[T],
    bias: &[T],
    d: ConvDims,
) -> Vec<T> {
    let in_plane = d.h * d.w;
    let out_plane = d.oh * d.ow;
    let rows = d.c_out * d.k * d.k;
    let mut out = vec![T::zero(); d.batch * d.c_out * out_plane];
    out.par_chunks_mut(d.c_out * out_plane).enumerate().for_each(|(b, out_b)| {
        let xb = &x[b * d.c_in * in_plane..(b + 1) * d.c_in * in_plane];
        // col [rows, HW] = Wᵀ [rows, Cin] · x [Cin, HW]
        let mut col = vec![T::zero(); rows * in_plane];
        T::gemm(
            rows,
            d.c_in,
            in_plane,
            weight,
            (1, rows as isize),
            xb,
            (in_plane as isize, 1),
            T::zero(),
            &mut col,
            (in_plane as isize, 1),
        );
        col2im(&col, d.c_out, d.oh, d.ow, d.k, d.geom, d.h, d.w, out_b);
        add_channel_bias(out_b, bias, out_plane);
    });
    out
}

pub(crate) fn conv_transpose2d_backward<T: Element>(
    x: &[T],
    weight: &[T],
    grad_out: &[T],
    d: ConvDims,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let in_plane = d.h * d.w;
    let out_plane = d.oh * d.ow;
    let rows = d.c_out * d.k * d.k;
    let parts: Vec<(Vec<T>, Vec<T>, Vec<T>)> = (0..d.batch)
        .into_par_iter()
        .map(|b| {
            let xb = &x[b * d.c_in * in_plane..(b + 1) * d.c_in * in_plane];
            let gout = &grad_out[b * d.c_out * out_plane..(b + 1) * d.c_out * out_plane];
            let mut dcol = vec![T::zero(); rows * in_plane];
            im2col(gout, d.c_out, d.oh, d.ow, d.k, d.geom, d.h, d.w, &mut dcol);
            // dx [Cin, HW] = W [Cin, rows] · dcol [rows, HW]
            let mut dx = vec![T::zero(); d.c_in * in_plane];
            matmul_rm(d.c_in, rows, in_plane, weight, &dcol, &mut dx);
            // dW [Cin, rows] = x [Cin, HW] · dcolᵀ [HW, rows]
            let mut dw = vec![T::zero(); d.c_in * rows];
            T::gemm(
                d.c_in,
                in_plane,
                rows,
                xb,
                (in_plane as isize, 1),
                &dcol,
                (1, in_plane as isize),
                T::zero(),
                &mut dw,
                (rows as isize, 1),
            );
            let db = gout.chunks(out_plane).map(|c| c.iter().copied().sum()).collect();
            (dx, dw, db)
        })
        .collect();

    let mut dx = Vec::with_capacity(d.batch * d.c_in * in_plane);
    let mut dw = vec![T::zero(); d.c_in * rows];
    let mut db = vec![T::zero(); d.c_out];
    for (px, pw, pb) in parts {
        dx.extend_from_slice(&px);
        sum_into(&mut dw, &pw);
        sum_into(&mut db, &pb);
    }
    (dx, dw, db)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct-summation reference used to cross-check the im2col route.
    fn conv_direct(x: &[f64], w: &[f64], d: ConvDims) -> Vec<f64> {
        let mut out = vec![0.0; d.batch * d.c_out * d.oh * d.ow];
        for b in 0..d.batch {
            for co in 0..d.c_out {
                for oy in 0..d.oh {
                    for ox in 0..d.ow {
                        let mut acc = 0.0;
                        for ci in 0..d.c_in {
                            for ki in 0..d.k {
                                for kj in 0..d.k {
                                    let iy = (oy * d.geom.stride + ki) as isize - d.geom.pad as isize;
                                    let ix = (ox * d.geom.stride + kj) as isize - d.geom.pad as isize;
                                    if iy < 0 || ix < 0 || iy >= d.h as isize || ix >= d.w as isize {
                                        continue;
                                    }
                                    let xv = x[((b * d.c_in + ci) * d.h + iy as usize) * d.w + ix as usize];
                                    let wv = w[((co * d.c_in + ci) * d.k + ki) * d.k + kj];
                                    acc += xv * wv;
                                }
                            }
                        }
                        out[((b * d.c_out + co) * d.oh + oy) * d.ow + ox] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn im2col_route_matches_direct_summation() {
        let geom = ConvGeom { stride: 2, pad: 1 };
        let d = ConvDims { batch: 2, c_in: 3, h: 7, w: 6, c_out: 4, k: 3, oh: 4, ow: 3, geom };
        assert_eq!(conv_out_len(7, 3, geom), Some(4));
        assert_eq!(conv_out_len(6, 3, geom), Some(3));
        let x: Vec<f64> = (0..2 * 3 * 7 * 6).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let w: Vec<f64> = (0..4 * 3 * 9).map(|i| ((i * 13 % 7) as f64 - 3.0) / 5.0).collect();
        let got = conv2d_forward(&x, &w, &[0.0; 4], d);
        let want = conv_direct(&x, &w, d);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_output_lengths() {
        let geom = ConvGeom { stride: 2, pad: 1 };
        assert_eq!(conv_transpose_out_len(8, 4, geom), Some(16));
        assert_eq!(conv_transpose_out_len(32, 4, geom), Some(64));
        assert_eq!(conv_out_len(64, 4, geom), Some(32));
    }
}

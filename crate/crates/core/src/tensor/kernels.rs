//! Slice-level numeric kernels shared by [`Tensor`](super::Tensor) and the
//! autodiff backward passes. All matrices are row-major.

use super::par::for_each_row;
use super::Scalar;

/// Dot product with eight independent accumulators, combined in fixed order.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (o, &v) in y.iter_mut().zip(x) {
        *o = *o + alpha * v;
    }
}

/// Rows per register tile.
const MR: usize = 4;
/// Columns per register tile.
const NR: usize = 8;
/// Below this many rows the skip-zero row-by-row path is used instead.
const TILE_MIN_ROWS: usize = MR;

/// `out[m×n] = a[m×k] · b[k×n]`.
pub(crate) fn gemm_nn<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(out.len(), m * n);
    if m < TILE_MIN_ROWS {
        for_each_row(out, n, k * n, |i, row| {
            row.fill(T::zero());
            let arow = &a[i * k..(i + 1) * k];
            for (p, &av) in arow.iter().enumerate() {
                if av != T::zero() {
                    axpy(av, &b[p * n..(p + 1) * n], row);
                }
            }
        });
        return;
    }
    for_each_row(out, MR * n, MR * k * n, |blk, rows| {
        let i0 = blk * MR;
        match rows.len() / n {
            4 => tile_rows::<T, 4>(a, b, rows, i0, k, n),
            3 => tile_rows::<T, 3>(a, b, rows, i0, k, n),
            2 => tile_rows::<T, 2>(a, b, rows, i0, k, n),
            _ => tile_rows::<T, 1>(a, b, rows, i0, k, n),
        }
    });
}

/// `R` output rows starting at row `i0`, computed in `R×NR` register tiles.
#[inline(always)]
fn tile_rows<T: Scalar, const R: usize>(a: &[T], b: &[T], out: &mut [T], i0: usize, k: usize, n: usize) {
    let arows: [&[T]; R] = std::array::from_fn(|r| &a[(i0 + r) * k..(i0 + r + 1) * k]);
    let mut j0 = 0;
    while j0 < n {
        let w = NR.min(n - j0);
        let mut acc = [[T::zero(); NR]; R];
        if w == NR {
            for (p, brow) in b[j0..].chunks(n).enumerate().take(k) {
                let brow: &[T; NR] = brow[..NR].try_into().unwrap();
                let av: [T; R] = std::array::from_fn(|r| arows[r][p]);
                for r in 0..R {
                    for j in 0..NR {
                        acc[r][j] = acc[r][j] + av[r] * brow[j];
                    }
                }
            }
        } else {
            for p in 0..k {
                let brow = &b[p * n + j0..p * n + j0 + w];
                for r in 0..R {
                    let av = arows[r][p];
                    for j in 0..w {
                        acc[r][j] = acc[r][j] + av * brow[j];
                    }
                }
            }
        }
        for r in 0..R {
            out[r * n + j0..r * n + j0 + w].copy_from_slice(&acc[r][..w]);
        }
        j0 += NR;
    }
}

fn transpose<T: Scalar>(x: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut t = vec![T::zero(); x.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = x[i * cols + j];
        }
    }
    t
}

/// `out[m×n] = a[m×k] · b[n×k]ᵀ`.
pub(crate) fn gemm_nt<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), n * k);
    assert_eq!(out.len(), m * n);
    if m >= TILE_MIN_ROWS {
        gemm_nn(a, &transpose(b, n, k), out, m, k, n);
        return;
    }
    for_each_row(out, n, k * n, |i, row| {
        let arow = &a[i * k..(i + 1) * k];
        if arow.iter().all(|&x| x == T::zero()) {
            row.fill(T::zero());
            return;
        }
        for (j, o) in row.iter_mut().enumerate() {
            *o = dot(arow, &b[j * k..(j + 1) * k]);
        }
    });
}

/// `out[m×n] = a[r×m]ᵀ · b[r×n]`.
pub(crate) fn gemm_tn<T: Scalar>(a: &[T], b: &[T], out: &mut [T], r: usize, m: usize, n: usize) {
    assert_eq!(a.len(), r * m);
    assert_eq!(b.len(), r * n);
    assert_eq!(out.len(), m * n);
    if r >= TILE_MIN_ROWS && m >= TILE_MIN_ROWS {
        gemm_nn(&transpose(a, r, m), b, out, m, r, n);
        return;
    }
    for_each_row(out, n, r * n, |p, row| {
        row.fill(T::zero());
        for i in 0..r {
            let av = a[i * m + p];
            if av != T::zero() {
                axpy(av, &b[i * n..(i + 1) * n], row);
            }
        }
    });
}

/// Geometry of a valid-padding, square-kernel convolution over H×W×C input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub k: usize,
    pub f: usize,
    pub stride: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.h - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w - self.k) / self.stride + 1
    }

    /// Rows of the patch matrix (output positions).
    pub fn patches(&self) -> usize {
        self.out_h() * self.out_w()
    }

    /// Columns of the patch matrix (`k·k·c`, ordered ky, kx, c).
    pub fn patch_len(&self) -> usize {
        self.k * self.k * self.c
    }
}

/// Unfolds input patches so the convolution becomes one matrix product
/// against the kernel viewed as a `(k·k·c) × f` matrix.
pub(crate) fn im2col<T: Scalar>(input: &[T], g: ConvGeom) -> Vec<T> {
    let (ow, plen, span) = (g.out_w(), g.patch_len(), g.k * g.c);
    let mut cols = vec![T::zero(); g.patches() * plen];
    for_each_row(&mut cols, plen, plen, |pidx, row| {
        let (oy, ox) = (pidx / ow, pidx % ow);
        for ky in 0..g.k {
            let iy = oy * g.stride + ky;
            let start = (iy * g.w + ox * g.stride) * g.c;
            row[ky * span..(ky + 1) * span].copy_from_slice(&input[start..start + span]);
        }
    });
    cols
}

/// Adds patch-matrix gradients back onto the input layout.
pub(crate) fn col2im_add<T: Scalar>(cols: &[T], g: ConvGeom, grad_input: &mut [T]) {
    let (ow, plen, span) = (g.out_w(), g.patch_len(), g.k * g.c);
    for (pidx, row) in cols.chunks_exact(plen).enumerate() {
        let (oy, ox) = (pidx / ow, pidx % ow);
        for ky in 0..g.k {
            let iy = oy * g.stride + ky;
            let start = (iy * g.w + ox * g.stride) * g.c;
            for (d, &s) in grad_input[start..start + span]
                .iter_mut()
                .zip(&row[ky * span..(ky + 1) * span])
            {
                *d = *d + s;
            }
        }
    }
}

/// Cross-correlation (no kernel flip). Output is `out_h × out_w × f`.
pub(crate) fn conv2d_forward<T: Scalar>(input: &[T], kernel: &[T], g: ConvGeom) -> Vec<T> {
    let cols = im2col(input, g);
    let mut out = vec![T::zero(); g.patches() * g.f];
    gemm_nn(&cols, kernel, &mut out, g.patches(), g.patch_len(), g.f);
    out
}

/// Kernel gradient `colsᵀ · d_out`, shape `(k·k·c) × f`.
pub(crate) fn conv2d_grad_kernel<T: Scalar>(input: &[T], d_out: &[T], g: ConvGeom) -> Vec<T> {
    let cols = im2col(input, g);
    let mut dk = vec![T::zero(); g.patch_len() * g.f];
    gemm_tn(&cols, d_out, &mut dk, g.patches(), g.patch_len(), g.f);
    dk
}

/// Input gradient, accumulated into `grad_input` (H×W×C).
pub(crate) fn conv2d_grad_input_add<T: Scalar>(kernel: &[T], d_out: &[T], g: ConvGeom, grad_input: &mut [T]) {
    let mut dcols = vec![T::zero(); g.patches() * g.patch_len()];
    gemm_nt(d_out, kernel, &mut dcols, g.patches(), g.f, g.patch_len());
    col2im_add(&dcols, g, grad_input);
}

//! Dense and convolution kernels with their exact backward passes.
//!
//! Images are stored channel-last (`h, w, c`) per sample so a whole batch of
//! patches multiplies the filter bank in one product.

use super::scalar::{gemm, Scalar, View};

/// Fully connected layer with weights stored `out x inp` row-major followed
/// by `out` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dense {
    pub inp: usize,
    pub out: usize,
}

impl Dense {
    pub fn n_params(&self) -> usize {
        self.out * self.inp + self.out
    }

    /// `y = x W^T + b` for `n` rows.
    pub fn forward<S: Scalar>(&self, p: &[S], x: &[S], n: usize, y: &mut [S]) {
        let (w, b) = p.split_at(self.out * self.inp);
        for row in y[..n * self.out].chunks_exact_mut(self.out) {
            row.copy_from_slice(b);
        }
        gemm(S::one(), View::rm(x, n, self.inp), View::rm(w, self.out, self.inp).t(), S::one(), y);
    }

    /// Accumulates parameter gradients into `dp` and writes the input
    /// gradient into `dx` when requested.
    pub fn backward<S: Scalar>(&self, p: &[S], x: &[S], dy: &[S], n: usize, dp: &mut [S], dx: Option<&mut [S]>) {
        let (dw, db) = dp.split_at_mut(self.out * self.inp);
        gemm(S::one(), View::rm(dy, n, self.out).t(), View::rm(x, n, self.inp), S::one(), dw);
        for row in dy[..n * self.out].chunks_exact(self.out) {
            for (g, &d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        if let Some(dx) = dx {
            let w = &p[..self.out * self.inp];
            gemm(S::one(), View::rm(dy, n, self.out), View::rm(w, self.out, self.inp), S::zero(), dx);
        }
    }
}

/// Valid (unpadded) 2-D convolution with square kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2d {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl Conv2d {
    pub fn out_h(&self) -> usize {
        (self.in_h - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w - self.kernel) / self.stride + 1
    }

    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }

    /// Values in one receptive field.
    pub fn patch(&self) -> usize {
        self.kernel * self.kernel * self.in_c
    }

    pub fn in_len(&self) -> usize {
        self.in_h * self.in_w * self.in_c
    }

    pub fn out_len(&self) -> usize {
        self.positions() * self.out_c
    }

    pub fn n_params(&self) -> usize {
        self.out_c * self.patch() + self.out_c
    }

    /// Unrolls every receptive field of `n` images into a row of `cols`.
    pub fn im2col<S: Scalar>(&self, x: &[S], n: usize, cols: &mut Vec<S>) {
        let (k, c, s, ow) = (self.kernel, self.in_c, self.stride, self.out_w());
        cols.clear();
        cols.reserve(n * self.positions() * self.patch());
        for img in x[..n * self.in_len()].chunks_exact(self.in_len()) {
            for oy in 0..self.out_h() {
                for ox in 0..ow {
                    for ky in 0..k {
                        let start = ((oy * s + ky) * self.in_w + ox * s) * c;
                        cols.extend_from_slice(&img[start..start + k * c]);
                    }
                }
            }
        }
    }

    /// Forward pass; `cols` receives the unrolled input for the backward pass.
    pub fn forward<S: Scalar>(&self, p: &[S], x: &[S], n: usize, cols: &mut Vec<S>, y: &mut [S]) {
        self.im2col(x, n, cols);
        let (w, b) = p.split_at(self.out_c * self.patch());
        let rows = n * self.positions();
        for row in y[..rows * self.out_c].chunks_exact_mut(self.out_c) {
            row.copy_from_slice(b);
        }
        gemm(S::one(), View::rm(cols, rows, self.patch()), View::rm(w, self.out_c, self.patch()).t(), S::one(), y);
    }

    pub fn backward<S: Scalar>(&self, p: &[S], cols: &[S], dy: &[S], n: usize, dp: &mut [S], dx: Option<&mut [S]>) {
        let rows = n * self.positions();
        let patch = self.patch();
        let (dw, db) = dp.split_at_mut(self.out_c * patch);
        gemm(S::one(), View::rm(dy, rows, self.out_c).t(), View::rm(cols, rows, patch), S::one(), dw);
        for row in dy[..rows * self.out_c].chunks_exact(self.out_c) {
            for (g, &d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        let Some(dx) = dx else { return };
        let w = &p[..self.out_c * patch];
        let mut dcols = vec![S::zero(); rows * patch];
        gemm(S::one(), View::rm(dy, rows, self.out_c), View::rm(w, self.out_c, patch), S::zero(), &mut dcols);
        let (k, c, s, ow) = (self.kernel, self.in_c, self.stride, self.out_w());
        let dx = &mut dx[..n * self.in_len()];
        dx.fill(S::zero());
        let mut src = dcols.chunks_exact(k * c);
        for img in dx.chunks_exact_mut(self.in_len()) {
            for oy in 0..self.out_h() {
                for ox in 0..ow {
                    for ky in 0..k {
                        let start = ((oy * s + ky) * self.in_w + ox * s) * c;
                        let chunk = src.next().expect("sized above");
                        for (d, &g) in img[start..start + k * c].iter_mut().zip(chunk) {
                            *d += g;
                        }
                    }
                }
            }
        }
    }
}

pub fn relu<S: Scalar>(y: &mut [S]) {
    for v in y {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
}

/// Masks `dy` by the ReLU derivative given the activated output `y`.
pub fn relu_backward<S: Scalar>(y: &[S], dy: &mut [S]) {
    for (d, &v) in dy.iter_mut().zip(y) {
        if v <= S::zero() {
            *d = S::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn dense_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = Dense { inp: 5, out: 3 };
        let p = rand_vec(&mut rng, l.n_params());
        let x = rand_vec(&mut rng, 2 * 5);
        let mut y = vec![0.0; 6];
        l.forward(&p, &x, 2, &mut y);
        for r in 0..2 {
            for o in 0..3 {
                let want = p[15 + o] + (0..5).map(|i| p[o * 5 + i] * x[r * 5 + i]).sum::<f64>();
                assert!((y[r * 3 + o] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn conv_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = Conv2d { in_h: 7, in_w: 6, in_c: 2, out_c: 3, kernel: 3, stride: 2 };
        let p = rand_vec(&mut rng, l.n_params());
        let x = rand_vec(&mut rng, 2 * l.in_len());
        let mut cols = Vec::new();
        let mut y = vec![0.0; 2 * l.out_len()];
        l.forward(&p, &x, 2, &mut cols, &mut y);
        let patch = l.patch();
        for b in 0..2 {
            for oy in 0..l.out_h() {
                for ox in 0..l.out_w() {
                    for o in 0..3 {
                        let mut acc = p[3 * patch + o];
                        for ky in 0..3 {
                            for kx in 0..3 {
                                for c in 0..2 {
                                    let xi = b * l.in_len() + ((oy * 2 + ky) * 6 + ox * 2 + kx) * 2 + c;
                                    acc += p[o * patch + (ky * 3 + kx) * 2 + c] * x[xi];
                                }
                            }
                        }
                        let yi = b * l.out_len() + (oy * l.out_w() + ox) * 3 + o;
                        assert!((y[yi] - acc).abs() < 1e-13);
                    }
                }
            }
        }
    }

    /// Central differences of `L = <g, f(p, x)>` against the backward pass.
    fn check_layer(
        np: usize,
        nx: usize,
        ny: usize,
        f: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
        b: &dyn Fn(&[f64], &[f64], &[f64], &mut [f64], &mut [f64]),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = rand_vec(&mut rng, np);
        let x = rand_vec(&mut rng, nx);
        let g = rand_vec(&mut rng, ny);
        let mut dp = vec![0.0; np];
        let mut dx = vec![0.0; nx];
        b(&p, &x, &g, &mut dp, &mut dx);
        let eps = 1e-6;
        for i in 0..np {
            let (mut hi, mut lo) = (p.clone(), p.clone());
            hi[i] += eps;
            lo[i] -= eps;
            let num = (dot(&g, &f(&hi, &x)) - dot(&g, &f(&lo, &x))) / (2.0 * eps);
            assert!((num - dp[i]).abs() < 1e-7, "param {i}: {num} vs {}", dp[i]);
        }
        for i in 0..nx {
            let (mut hi, mut lo) = (x.clone(), x.clone());
            hi[i] += eps;
            lo[i] -= eps;
            let num = (dot(&g, &f(&p, &hi)) - dot(&g, &f(&p, &lo))) / (2.0 * eps);
            assert!((num - dx[i]).abs() < 1e-7, "input {i}: {num} vs {}", dx[i]);
        }
    }

    #[test]
    fn dense_gradient() {
        let l = Dense { inp: 4, out: 3 };
        check_layer(
            l.n_params(),
            8,
            6,
            &|p, x| {
                let mut y = vec![0.0; 6];
                l.forward(p, x, 2, &mut y);
                y
            },
            &|p, x, g, dp, dx| l.backward(p, x, g, 2, dp, Some(dx)),
        );
    }

    #[test]
    fn conv_gradient() {
        let l = Conv2d { in_h: 8, in_w: 8, in_c: 2, out_c: 2, kernel: 3, stride: 2 };
        check_layer(
            l.n_params(),
            2 * l.in_len(),
            2 * l.out_len(),
            &|p, x| {
                let mut y = vec![0.0; 2 * l.out_len()];
                l.forward(p, x, 2, &mut Vec::new(), &mut y);
                y
            },
            &|p, x, g, dp, dx| {
                let mut cols = Vec::new();
                l.im2col(x, 2, &mut cols);
                l.backward(p, &cols, g, 2, dp, Some(dx))
            },
        );
    }

    #[test]
    fn relu_gradient_masks() {
        let mut y = vec![-1.0, 0.5, 0.0, 2.0];
        relu(&mut y);
        assert_eq!(y, vec![0.0, 0.5, 0.0, 2.0]);
        let mut dy = vec![1.0; 4];
        relu_backward(&y, &mut dy);
        assert_eq!(dy, vec![0.0, 1.0, 0.0, 1.0]);
    }
}

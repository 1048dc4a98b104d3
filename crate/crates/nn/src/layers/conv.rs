use rand::Rng;

use super::pop;
use crate::init::fan_in_normal;
use crate::linalg::{gemm, Window};
use crate::{Mode, Param, Scalar, ShapeError, Slot, Tensor, Visit};

struct ConvTape<T> {
    window: Window,
    batch: usize,
    cols: Vec<T>,
}

/// Square-kernel 2-D convolution lowered to GEMM.
pub struct Conv2d<T> {
    /// `[out, in·k·k]`
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    tape: Vec<ConvTape<T>>,
}

impl<T: Scalar> Conv2d<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let weight = Param::new(
            &[out_channels, fan_in],
            fan_in_normal(out_channels * fan_in, fan_in, gain, rng),
        );
        Self {
            weight,
            bias: bias.then(|| Param::filled(&[out_channels], T::zero())),
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            tape: Vec::new(),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    fn window(&self, x: &Tensor<T>) -> Result<Window, ShapeError> {
        if x.channels() != self.in_channels {
            return Err(ShapeError(format!(
                "conv expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        if x.height() + 2 * self.pad < self.kernel || x.width() + 2 * self.pad < self.kernel {
            return Err(ShapeError(format!(
                "input {:?} smaller than kernel {}",
                x.hw(),
                self.kernel
            )));
        }
        Ok(Window {
            channels: self.in_channels,
            in_h: x.height(),
            in_w: x.width(),
            kernel: self.kernel,
            stride: self.stride,
            pad: self.pad,
        })
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, ShapeError> {
        let window = self.window(x)?;
        let (k, p) = (window.patch_len(), window.positions());
        let n = x.batch();
        let mut y = Tensor::zeros([n, self.out_channels, window.out_h(), window.out_w()]);
        let mut cols = vec![T::zero(); n * k * p];
        for i in 0..n {
            let c = &mut cols[i * k * p..(i + 1) * k * p];
            window.im2col(x.item(i), c);
            let out = y.item_mut(i);
            gemm(self.out_channels, k, p, &self.weight.value, false, c, false, T::zero(), out);
            if let Some(b) = &self.bias {
                for (row, &bv) in out.chunks_mut(p).zip(&b.value) {
                    row.iter_mut().for_each(|v| *v = *v + bv);
                }
            }
        }
        if mode == Mode::Train {
            self.tape.push(ConvTape {
                window,
                batch: n,
                cols,
            });
        }
        Ok(y)
    }

    /// Accumulate parameter gradients and return the input gradient.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        self.backward_impl(dy, true)
            .expect("input gradient requested")
    }

    /// Accumulate parameter gradients only.
    pub fn backward_params(&mut self, dy: &Tensor<T>) {
        self.backward_impl(dy, false);
    }

    fn backward_impl(&mut self, dy: &Tensor<T>, want_dx: bool) -> Option<Tensor<T>> {
        let tape = pop(&mut self.tape, "conv2d");
        let w = tape.window;
        let (k, p) = (w.patch_len(), w.positions());
        assert_eq!(dy.shape(), [tape.batch, self.out_channels, w.out_h(), w.out_w()]);
        let mut dx = want_dx.then(|| Tensor::zeros([tape.batch, w.channels, w.in_h, w.in_w]));
        let mut dcols = vec![T::zero(); if want_dx { k * p } else { 0 }];
        for i in 0..tape.batch {
            let c = &tape.cols[i * k * p..(i + 1) * k * p];
            let g = dy.item(i);
            gemm(self.out_channels, p, k, g, false, c, true, T::one(), &mut self.weight.grad);
            if let Some(b) = &mut self.bias {
                for (row, bg) in g.chunks(p).zip(b.grad.iter_mut()) {
                    *bg = *bg + row.iter().copied().sum::<T>();
                }
            }
            if let Some(dx) = dx.as_mut() {
                gemm(k, self.out_channels, p, &self.weight.value, true, g, false, T::zero(), &mut dcols);
                w.col2im(&dcols, dx.item_mut(i));
            }
        }
        dx
    }

    pub fn clear_tape(&mut self) {
        self.tape.clear();
    }
}

impl<T: Scalar> Visit<T> for Conv2d<T> {
    fn visit(&mut self, f: &mut dyn FnMut(Slot<'_, T>)) {
        f(Slot::Param(&mut self.weight));
        if let Some(b) = &mut self.bias {
            f(Slot::Param(b));
        }
    }
}

/// Transposed convolution (the adjoint of [`Conv2d`]'s data path) with an
/// explicit output size, which fixes the output padding.
pub struct ConvTranspose2d<T> {
    /// `[in, out·k·k]`
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    tape: Vec<(Tensor<T>, Window)>,
}

impl<T: Scalar> ConvTranspose2d<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        bias: bool,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        // Each output pixel receives about in·k²/stride² contributions.
        let fan_in = (in_channels * kernel * kernel / (stride * stride)).max(1);
        let len = in_channels * out_channels * kernel * kernel;
        Self {
            weight: Param::new(
                &[in_channels, out_channels * kernel * kernel],
                fan_in_normal(len, fan_in, gain, rng),
            ),
            bias: bias.then(|| Param::filled(&[out_channels], T::zero())),
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
            tape: Vec::new(),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn forward(
        &mut self,
        x: &Tensor<T>,
        out_hw: (usize, usize),
        mode: Mode,
    ) -> Result<Tensor<T>, ShapeError> {
        if x.channels() != self.in_channels {
            return Err(ShapeError(format!(
                "transposed conv expects {} input channels, got {}",
                self.in_channels,
                x.channels()
            )));
        }
        let window = Window {
            channels: self.out_channels,
            in_h: out_hw.0,
            in_w: out_hw.1,
            kernel: self.kernel,
            stride: self.stride,
            pad: self.pad,
        };
        if out_hw.0 + 2 * self.pad < self.kernel
            || out_hw.1 + 2 * self.pad < self.kernel
            || (window.out_h(), window.out_w()) != x.hw()
        {
            return Err(ShapeError(format!(
                "cannot upsample {:?} to {:?} with kernel {} stride {}",
                x.hw(),
                out_hw,
                self.kernel,
                self.stride
            )));
        }
        let (kc, p) = (window.patch_len(), window.positions());
        let n = x.batch();
        let mut y = Tensor::zeros([n, self.out_channels, out_hw.0, out_hw.1]);
        let mut cols = vec![T::zero(); kc * p];
        let plane = out_hw.0 * out_hw.1;
        for i in 0..n {
            gemm(kc, self.in_channels, p, &self.weight.value, true, x.item(i), false, T::zero(), &mut cols);
            let out = y.item_mut(i);
            window.col2im(&cols, out);
            if let Some(b) = &self.bias {
                for (ch, &bv) in out.chunks_mut(plane).zip(&b.value) {
                    ch.iter_mut().for_each(|v| *v = *v + bv);
                }
            }
        }
        if mode == Mode::Train {
            self.tape.push((x.clone(), window));
        }
        Ok(y)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let (x, window) = pop(&mut self.tape, "conv_transpose2d");
        let (kc, p) = (window.patch_len(), window.positions());
        let plane = window.in_h * window.in_w;
        let mut dx = Tensor::zeros(x.shape());
        let mut cols = vec![T::zero(); kc * p];
        for i in 0..x.batch() {
            let g = dy.item(i);
            window.im2col(g, &mut cols);
            gemm(self.in_channels, kc, p, &self.weight.value, false, &cols, false, T::zero(), dx.item_mut(i));
            gemm(self.in_channels, p, kc, x.item(i), false, &cols, true, T::one(), &mut self.weight.grad);
            if let Some(b) = &mut self.bias {
                for (ch, bg) in g.chunks(plane).zip(b.grad.iter_mut()) {
                    *bg = *bg + ch.iter().copied().sum::<T>();
                }
            }
        }
        dx
    }

    pub fn clear_tape(&mut self) {
        self.tape.clear();
    }
}

impl<T: Scalar> Visit<T> for ConvTranspose2d<T> {
    fn visit(&mut self, f: &mut dyn FnMut(Slot<'_, T>)) {
        f(Slot::Param(&mut self.weight));
        if let Some(b) = &mut self.bias {
            f(Slot::Param(b));
        }
    }
}

use super::pop;
use crate::{Mode, Scalar, Tensor};

/// Max pooling with square window; padding never wins the max.
pub struct MaxPool2d<T> {
    kernel: usize,
    stride: usize,
    pad: usize,
    tape: Vec<([usize; 4], Vec<usize>)>,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Scalar> MaxPool2d<T> {
    pub fn new(kernel: usize, stride: usize, pad: usize) -> Self {
        assert!(pad < kernel, "padding must leave one real tap per window");
        Self {
            kernel,
            stride,
            pad,
            tape: Vec::new(),
            _marker: std::marker::PhantomData,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T> {
        let [n, c, h, w] = x.shape();
        let oh = (h + 2 * self.pad - self.kernel) / self.stride + 1;
        let ow = (w + 2 * self.pad - self.kernel) / self.stride + 1;
        let mut y = Tensor::zeros([n, c, oh, ow]);
        let mut arg = Vec::with_capacity(n * c * oh * ow);
        let src = x.data();
        let out = y.data_mut();
        let mut o = 0;
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = T::neg_infinity();
                    let mut best_idx = usize::MAX;
                    for ky in 0..self.kernel {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..self.kernel {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let idx = base + iy as usize * w + ix as usize;
                            if src[idx] > best || best_idx == usize::MAX {
                                best = src[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out[o] = best;
                    arg.push(best_idx);
                    o += 1;
                }
            }
        }
        if mode == Mode::Train {
            self.tape.push((x.shape(), arg));
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let (shape, arg) = pop(&mut self.tape, "max_pool2d");
        let mut dx = Tensor::zeros(shape);
        let d = dx.data_mut();
        for (&idx, &g) in arg.iter().zip(dy.data()) {
            d[idx] = d[idx] + g;
        }
        dx
    }

    pub fn clear_tape(&mut self) {
        self.tape.clear();
    }
}

use super::pop;
use crate::{Mode, Param, Scalar, Slot, Tensor, Visit};

struct BnTape<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

/// Per-channel batch normalization. Starts as the identity map
/// (`gamma = 1`, `beta = 0`).
pub struct BatchNorm2d<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    momentum: T,
    eps: T,
    tape: Vec<BnTape<T>>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::filled(&[channels], T::one()),
            beta: Param::filled(&[channels], T::zero()),
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::lit(0.1),
            eps: T::lit(1e-5),
            tape: Vec::new(),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T> {
        let [n, c, h, w] = x.shape();
        assert_eq!(c, self.channels(), "batch norm channel count");
        let plane = h * w;
        let count = n * plane;
        let mut y = Tensor::zeros(x.shape());
        let mut xhat = (mode == Mode::Train).then(|| Tensor::zeros(x.shape()));
        let mut inv_stds = Vec::with_capacity(c);
        let cnt = T::from_usize(count).unwrap();
        for ch in 0..c {
            let values = || (0..n).flat_map(move |i| x.item(i)[ch * plane..(ch + 1) * plane].iter().copied());
            let (mean, inv_std) = match mode {
                Mode::Train => {
                    let mean = values().sum::<T>() / cnt;
                    let var = values().map(|v| (v - mean) * (v - mean)).sum::<T>() / cnt;
                    let unbiased = if count > 1 {
                        var * cnt / T::from_usize(count - 1).unwrap()
                    } else {
                        var
                    };
                    let m = self.momentum;
                    self.running_mean[ch] = (T::one() - m) * self.running_mean[ch] + m * mean;
                    self.running_var[ch] = (T::one() - m) * self.running_var[ch] + m * unbiased;
                    (mean, T::one() / (var + self.eps).sqrt())
                }
                Mode::Eval => (
                    self.running_mean[ch],
                    T::one() / (self.running_var[ch] + self.eps).sqrt(),
                ),
            };
            inv_stds.push(inv_std);
            let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
            for i in 0..n {
                let src = &x.item(i)[ch * plane..(ch + 1) * plane];
                let dst = &mut y.item_mut(i)[ch * plane..(ch + 1) * plane];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = g * (s - mean) * inv_std + b;
                }
                if let Some(xh) = xhat.as_mut() {
                    let dst = &mut xh.item_mut(i)[ch * plane..(ch + 1) * plane];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = (s - mean) * inv_std;
                    }
                }
            }
        }
        if let Some(xhat) = xhat {
            self.tape.push(BnTape {
                xhat,
                inv_std: inv_stds,
            });
        }
        y
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let BnTape { xhat, inv_std } = pop(&mut self.tape, "batch_norm");
        let [n, c, h, w] = dy.shape();
        assert_eq!(xhat.shape(), dy.shape());
        let plane = h * w;
        let cnt = T::from_usize(n * plane).unwrap();
        let mut dx = Tensor::zeros(dy.shape());
        for (ch, &istd) in inv_std.iter().enumerate().take(c) {
            let mut sum_dy = T::zero();
            let mut sum_dy_xhat = T::zero();
            for i in 0..n {
                let g = &dy.item(i)[ch * plane..(ch + 1) * plane];
                let xh = &xhat.item(i)[ch * plane..(ch + 1) * plane];
                for (&gv, &xv) in g.iter().zip(xh) {
                    sum_dy = sum_dy + gv;
                    sum_dy_xhat = sum_dy_xhat + gv * xv;
                }
            }
            self.gamma.grad[ch] = self.gamma.grad[ch] + sum_dy_xhat;
            self.beta.grad[ch] = self.beta.grad[ch] + sum_dy;
            let scale = self.gamma.value[ch] * istd / cnt;
            for i in 0..n {
                let g = &dy.item(i)[ch * plane..(ch + 1) * plane];
                let xh = &xhat.item(i)[ch * plane..(ch + 1) * plane];
                let dst = &mut dx.item_mut(i)[ch * plane..(ch + 1) * plane];
                for ((d, &gv), &xv) in dst.iter_mut().zip(g).zip(xh) {
                    *d = scale * (cnt * gv - sum_dy - xv * sum_dy_xhat);
                }
            }
        }
        dx
    }

    pub fn clear_tape(&mut self) {
        self.tape.clear();
    }
}

impl<T: Scalar> Visit<T> for BatchNorm2d<T> {
    fn visit(&mut self, f: &mut dyn FnMut(Slot<'_, T>)) {
        f(Slot::Param(&mut self.gamma));
        f(Slot::Param(&mut self.beta));
        f(Slot::Buffer(&mut self.running_mean));
        f(Slot::Buffer(&mut self.running_var));
    }
}

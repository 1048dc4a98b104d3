//! ResNet-18 topology with a configurable input depth and width.

use rand::Rng;
use tactovis_nn::init::relu_gain;
use tactovis_nn::layers::{BatchNorm2d, Conv2d, MaxPool2d, Relu};
use tactovis_nn::{Mode, Scalar, ShapeError, Slot, Tensor, Visit};

/// Two 3×3 convolutions with an identity (or 1×1 projection) shortcut.
pub struct BasicBlock<T> {
    conv1: Conv2d<T>,
    bn1: BatchNorm2d<T>,
    relu1: Relu<T>,
    conv2: Conv2d<T>,
    bn2: BatchNorm2d<T>,
    shortcut: Option<(Conv2d<T>, BatchNorm2d<T>)>,
    relu_out: Relu<T>,
}

impl<T: Scalar> BasicBlock<T> {
    pub fn new<R: Rng + ?Sized>(cin: usize, cout: usize, stride: usize, rng: &mut R) -> Self {
        let gain = relu_gain(0.0);
        let shortcut = (stride != 1 || cin != cout).then(|| {
            (
                Conv2d::new(cin, cout, 1, stride, 0, false, 1.0, rng),
                BatchNorm2d::new(cout),
            )
        });
        Self {
            conv1: Conv2d::new(cin, cout, 3, stride, 1, false, gain, rng),
            bn1: BatchNorm2d::new(cout),
            relu1: Relu::new(),
            conv2: Conv2d::new(cout, cout, 3, 1, 1, false, gain, rng),
            bn2: BatchNorm2d::new(cout),
            shortcut,
            relu_out: Relu::new(),
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, ShapeError> {
        let h = self.conv1.forward(x, mode)?;
        let h = self.relu1.forward(&self.bn1.forward(&h, mode), mode);
        let h = self.bn2.forward(&self.conv2.forward(&h, mode)?, mode);
        let s = match &mut self.shortcut {
            Some((conv, bn)) => bn.forward(&conv.forward(x, mode)?, mode),
            None => x.clone(),
        };
        Ok(self.relu_out.forward(&h.add(&s)?, mode))
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let d = self.relu_out.backward(dy);
        let dh = self.conv2.backward(&self.bn2.backward(&d));
        let dh = self.bn1.backward(&self.relu1.backward(&dh));
        let mut dx = self.conv1.backward(&dh);
        let ds = match &mut self.shortcut {
            Some((conv, bn)) => conv.backward(&bn.backward(&d)),
            None => d,
        };
        dx.add_assign(&ds).expect("shortcut gradient shape");
        dx
    }

    pub fn clear_tape(&mut self) {
        self.conv1.clear_tape();
        self.bn1.clear_tape();
        self.relu1.clear_tape();
        self.conv2.clear_tape();
        self.bn2.clear_tape();
        if let Some((c, b)) = &mut self.shortcut {
            c.clear_tape();
            b.clear_tape();
        }
        self.relu_out.clear_tape();
    }
}

impl<T: Scalar> Visit<T> for BasicBlock<T> {
    fn visit(&mut self, f: &mut dyn FnMut(Slot<'_, T>)) {
        self.conv1.visit(f);
        self.bn1.visit(f);
        self.conv2.visit(f);
        self.bn2.visit(f);
        if let Some((c, b)) = &mut self.shortcut {
            c.visit(f);
            b.visit(f);
        }
    }
}

/// Activations of one encoder pass.
pub struct EncoderOutput<T> {
    /// Stem (1/2), layer1 (1/4), layer2 (1/8), layer3 (1/16).
    pub taps: [Tensor<T>; 4],
    /// layer4 output (1/32), `8·width` channels.
    pub latent: Tensor<T>,
}

/// Stem (7×7/2 conv, max-pool) and four stages of two basic blocks with
/// widths `w, 2w, 4w, 8w`.
pub struct ResNetEncoder<T> {
    stem: Conv2d<T>,
    stem_bn: BatchNorm2d<T>,
    stem_relu: Relu<T>,
    pool: MaxPool2d<T>,
    stages: Vec<[BasicBlock<T>; 2]>,
}

impl<T: Scalar> ResNetEncoder<T> {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, width: usize, rng: &mut R) -> Self {
        let stem = Conv2d::new(in_channels, width, 7, 2, 3, false, relu_gain(0.0), rng);
        let mut stages = Vec::with_capacity(4);
        let mut cin = width;
        for (i, mult) in [1, 2, 4, 8].into_iter().enumerate() {
            let cout = width * mult;
            let stride = if i == 0 { 1 } else { 2 };
            let first = BasicBlock::new(cin, cout, stride, rng);
            let second = BasicBlock::new(cout, cout, 1, rng);
            stages.push([first, second]);
            cin = cout;
        }
        Self {
            stem,
            stem_bn: BatchNorm2d::new(width),
            stem_relu: Relu::new(),
            pool: MaxPool2d::new(3, 2, 1),
            stages,
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<EncoderOutput<T>, ShapeError> {
        let h = self.stem.forward(x, mode)?;
        let stem = self.stem_relu.forward(&self.stem_bn.forward(&h, mode), mode);
        let mut h = self.pool.forward(&stem, mode);
        let mut outs = Vec::with_capacity(4);
        for stage in &mut self.stages {
            for block in stage.iter_mut() {
                h = block.forward(&h, mode)?;
            }
            outs.push(h.clone());
        }
        let latent = outs.pop().expect("four stages");
        let [l1, l2, l3]: [Tensor<T>; 3] = outs.try_into().unwrap_or_else(|_| unreachable!("three taps"));
        Ok(EncoderOutput {
            taps: [stem, l1, l2, l3],
            latent,
        })
    }

    /// Back-propagate from the latent plus optional gradients arriving at the
    /// taps. Only parameter gradients are produced.
    pub fn backward(&mut self, d_latent: &Tensor<T>, d_taps: Option<&[Tensor<T>; 4]>) {
        let mut d = d_latent.clone();
        for s in (0..4).rev() {
            if s < 3 {
                if let Some(taps) = d_taps {
                    d.add_assign(&taps[s + 1]).expect("tap gradient shape");
                }
            }
            for block in self.stages[s].iter_mut().rev() {
                d = block.backward(&d);
            }
        }
        let mut d = self.pool.backward(&d);
        if let Some(taps) = d_taps {
            d.add_assign(&taps[0]).expect("tap gradient shape");
        }
        let d = self.stem_bn.backward(&self.stem_relu.backward(&d));
        self.stem.backward_params(&d);
    }

    pub fn clear_tape(&mut self) {
        self.stem.clear_tape();
        self.stem_bn.clear_tape();
        self.stem_relu.clear_tape();
        self.pool.clear_tape();
        for stage in &mut self.stages {
            for b in stage.iter_mut() {
                b.clear_tape();
            }
        }
    }
}

impl<T: Scalar> Visit<T> for ResNetEncoder<T> {
    fn visit(&mut self, f: &mut dyn FnMut(Slot<'_, T>)) {
        self.stem.visit(f);
        self.stem_bn.visit(f);
        for stage in &mut self.stages {
            for b in stage.iter_mut() {
                b.visit(f);
            }
        }
    }
}

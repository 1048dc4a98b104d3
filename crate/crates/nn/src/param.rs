use crate::Scalar;

/// Trainable tensor with its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub shape: Vec<usize>,
}

impl<T: Scalar> Param<T> {
    pub fn new(shape: &[usize], value: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        Self {
            grad: vec![T::zero(); value.len()],
            value,
            shape: shape.to_vec(),
        }
    }

    pub fn filled(shape: &[usize], v: T) -> Self {
        Self::new(shape, vec![v; shape.iter().product()])
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// One piece of model state handed to a visitor.
pub enum Slot<'a, T> {
    /// Trainable parameter.
    Param(&'a mut Param<T>),
    /// Non-trainable state that still belongs in a checkpoint (running
    /// statistics).
    Buffer(&'a mut Vec<T>),
}

/// Walks every parameter and buffer in a fixed, structure-defined order.
///
/// The order is the serialization order of checkpoints and the index order
/// of optimizer moments, so implementations must never depend on data.
pub trait Visit<T> {
    fn visit(&mut self, f: &mut dyn FnMut(Slot<'_, T>));

    fn visit_params(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.visit(&mut |slot| {
            if let Slot::Param(p) = slot {
                f(p)
            }
        });
    }

    fn zero_grad(&mut self)
    where
        T: Scalar,
    {
        self.visit_params(&mut |p| p.zero_grad());
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit(&mut |slot| {
            if let Slot::Param(p) = slot {
                n += p.value.len()
            }
        });
        n
    }
}

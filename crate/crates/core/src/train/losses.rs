use tactovis_nn::{Scalar, ShapeError, Tensor};

fn half<T: Scalar>() -> T {
    T::lit(0.5)
}

/// Least-squares GAN losses:
/// `loss_D = ½·mean((d_real − 1)²) + ½·mean(d_fake²)`,
/// `loss_G = ½·mean((d_fake − 1)²)`.
pub fn lsgan_losses<T: Scalar>(d_real: &Tensor<T>, d_fake: &Tensor<T>) -> Result<(T, T), ShapeError> {
    if d_real.shape() != d_fake.shape() {
        return Err(ShapeError::new(format!(
            "score maps {:?} and {:?} differ",
            d_real.shape(),
            d_fake.shape()
        )));
    }
    let one = T::one();
    let real = d_real.map(|v| (v - one) * (v - one)).mean();
    let fake = d_fake.map(|v| v * v).mean();
    let gen = d_fake.map(|v| (v - one) * (v - one)).mean();
    Ok((half::<T>() * (real + fake), half::<T>() * gen))
}

/// Gradients of `loss_D` with respect to `(d_real, d_fake)`.
pub fn lsgan_discriminator_grads<T: Scalar>(d_real: &Tensor<T>, d_fake: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    let n = T::from_usize(d_real.len()).unwrap();
    let one = T::one();
    (d_real.map(|v| (v - one) / n), d_fake.map(|v| v / n))
}

/// Gradient of `loss_G` with respect to `d_fake`.
pub fn lsgan_generator_grad<T: Scalar>(d_fake: &Tensor<T>) -> Tensor<T> {
    let n = T::from_usize(d_fake.len()).unwrap();
    d_fake.map(|v| (v - T::one()) / n)
}

/// Mean absolute difference.
pub fn l1_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<T, ShapeError> {
    Ok(pred.sub(target)?.map(|v| v.abs()).mean())
}

/// Subgradient of [`l1_loss`] with respect to `pred` (0 at ties).
pub fn l1_grad<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>, ShapeError> {
    let n = T::from_usize(pred.len()).unwrap();
    pred.zip_with(target, |p, t| {
        if p > t {
            T::one() / n
        } else if p < t {
            -T::one() / n
        } else {
            T::zero()
        }
    })
}

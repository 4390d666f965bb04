use nalgebra::ComplexField;
use num_complex::Complex64;

/// Entry type of a matrix variable: `f64` for real spaces, `Complex64` for Hermitian ones.
pub trait Scalar:
    ComplexField<RealField = f64> + Copy + Send + Sync + std::fmt::Debug + 'static
{
    const IS_COMPLEX: bool;

    fn from_parts(re: f64, im: f64) -> Self;

    fn re(self) -> f64 {
        self.real()
    }

    fn im(self) -> f64 {
        self.imaginary()
    }

    /// Squared modulus.
    fn abs2(self) -> f64 {
        let (a, b) = (self.real(), self.imaginary());
        a * a + b * b
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
}

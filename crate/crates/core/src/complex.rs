use std::fmt;

use rug::float::Constant;
use rug::Float;

/// Complex number over MPFR floats.
#[derive(Clone, Debug, PartialEq)]
pub struct BigComplex {
    pub re: Float,
    pub im: Float,
}

impl BigComplex {
    pub fn new(re: Float, im: Float) -> Self {
        BigComplex { re, im }
    }

    pub fn zero(prec: u32) -> Self {
        BigComplex { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn from_real(re: Float) -> Self {
        let im = Float::new(re.prec());
        BigComplex { re, im }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().max(self.im.prec())
    }

    /// `exp(−2πiφ)`.
    pub fn unit_phase(phase: &Float, prec: u32) -> Self {
        let wp = prec + 16;
        let mut angle = Float::with_val(wp, Constant::Pi);
        angle *= phase;
        angle *= 2u32;
        let (sin, cos) = angle.sin_cos(Float::new(wp));
        BigComplex { re: Float::with_val(prec, cos), im: Float::with_val(prec, -sin) }
    }

    pub fn add(&self, other: &BigComplex) -> BigComplex {
        let prec = self.prec().max(other.prec());
        BigComplex {
            re: Float::with_val(prec, &self.re + &other.re),
            im: Float::with_val(prec, &self.im + &other.im),
        }
    }

    pub fn sub(&self, other: &BigComplex) -> BigComplex {
        let prec = self.prec().max(other.prec());
        BigComplex {
            re: Float::with_val(prec, &self.re - &other.re),
            im: Float::with_val(prec, &self.im - &other.im),
        }
    }

    pub fn mul(&self, other: &BigComplex) -> BigComplex {
        let prec = self.prec().max(other.prec());
        let wp = prec + 8;
        let ac = Float::with_val(wp, &self.re * &other.re);
        let bd = Float::with_val(wp, &self.im * &other.im);
        let ad = Float::with_val(wp, &self.re * &other.im);
        let bc = Float::with_val(wp, &self.im * &other.re);
        BigComplex { re: Float::with_val(prec, ac - bd), im: Float::with_val(prec, ad + bc) }
    }

    pub fn scale(&self, factor: &Float) -> BigComplex {
        let prec = self.prec();
        BigComplex {
            re: Float::with_val(prec, &self.re * factor),
            im: Float::with_val(prec, &self.im * factor),
        }
    }

    pub fn div_real(&self, divisor: &Float) -> BigComplex {
        let prec = self.prec();
        BigComplex {
            re: Float::with_val(prec, &self.re / divisor),
            im: Float::with_val(prec, &self.im / divisor),
        }
    }

    pub fn norm_sqr(&self) -> Float {
        let prec = self.prec();
        Float::with_val(prec, self.re.square_ref()) + Float::with_val(prec, self.im.square_ref())
    }

    pub fn abs(&self) -> Float {
        self.norm_sqr().sqrt()
    }

    pub fn conj(&self) -> BigComplex {
        BigComplex { re: self.re.clone(), im: Float::with_val(self.im.prec(), -&self.im) }
    }

    /// Distance `|self − other|`.
    pub fn dist(&self, other: &BigComplex) -> Float {
        self.sub(other).abs()
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }
}

impl fmt::Display for BigComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (re, im) = self.to_f64_pair();
        write!(f, "{re:e}{im:+e}i")
    }
}

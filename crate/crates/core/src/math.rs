//! Thin wrappers over `libm` so the rest of the crate reads like `std` float code.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// `x^e`, exact repeated multiplication for small integer exponents.
#[inline]
pub(crate) fn pow(x: f64, e: f64) -> f64 {
    if e == libm::trunc(e) && abs(e) <= 8.0 {
        let n = e as i32;
        let mut acc = 1.0;
        for _ in 0..n.unsigned_abs() {
            acc *= x;
        }
        if n < 0 {
            1.0 / acc
        } else {
            acc
        }
    } else {
        libm::pow(x, e)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if abs(self.sum) >= abs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Mean and standard error (sample standard deviation over sqrt(n)) in index order.
pub(crate) fn mean_and_std_error(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut s = KahanSum::default();
    for v in values.clone() {
        s.add(v);
        n += 1;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = s.total() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut ss = KahanSum::default();
    for v in values {
        let d = v - mean;
        ss.add(d * d);
    }
    let var = ss.total() / (n - 1) as f64;
    (mean, sqrt(var / n as f64))
}

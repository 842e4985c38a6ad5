//! Compensated summation, in linear and logarithmic domain.

/// Neumaier (improved Kahan) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    fn scale(&mut self, s: f64) {
        self.sum *= s;
        self.comp *= s;
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        iter.into_iter().for_each(|x| acc.add(x));
        acc
    }
}

/// Sum of positive terms `exp(x_k)` supplied as logarithms, with a running
/// reference exponent so that no partial sum overflows or underflows.
#[derive(Clone, Copy, Debug)]
pub struct LogSum {
    reference: f64,
    acc: CompensatedSum,
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum {
            reference: f64::NEG_INFINITY,
            acc: CompensatedSum::new(),
        }
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_log(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term > self.reference {
            if self.reference != f64::NEG_INFINITY {
                self.acc.scale((self.reference - log_term).exp());
            }
            self.reference = log_term;
        }
        self.acc.add((log_term - self.reference).exp());
    }

    /// `ln(sum)`; `-inf` for an empty sum.
    pub fn ln(&self) -> f64 {
        if self.reference == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        self.reference + self.acc.value().ln()
    }

    pub fn value(&self) -> f64 {
        self.ln().exp()
    }
}

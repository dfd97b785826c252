//! Kullback-Leibler divergence in nats with the usual zero conventions.

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// One term `a ln(a/b)`: zero when `a = 0`, `+inf` when `a > 0 = b`.
#[inline]
pub fn kl_term(a: f64, b: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else if b <= 0.0 {
        f64::INFINITY
    } else {
        a * (a / b).ln()
    }
}

/// `D(q || p) = sum_i q_i ln(q_i / p_i)`.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> f64 {
    debug_assert_eq!(q.len(), p.len());
    let mut acc = CompensatedSum::default();
    for (&a, &b) in q.iter().zip(p) {
        let t = kl_term(a, b);
        if t.is_infinite() {
            return f64::INFINITY;
        }
        acc.add(t);
    }
    acc.value()
}

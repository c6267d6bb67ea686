//! Order-fixed descriptive statistics.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary<T> {
    pub count: usize,
    pub min: T,
    pub max: T,
    pub sum: T,
    pub mean: T,
}

/// Single pass over `values` in iteration order. An empty input yields zeros.
pub fn summarize<T: Scalar>(values: impl IntoIterator<Item = T>) -> Summary<T> {
    let mut count = 0usize;
    let mut min = T::infinity();
    let mut max = T::neg_infinity();
    let mut sum = T::zero();
    for v in values {
        count += 1;
        if v < min {
            min = v;
        }
        if v > max {
            max = v;
        }
        sum = sum + v;
    }
    if count == 0 {
        return Summary {
            count,
            min: T::zero(),
            max: T::zero(),
            sum,
            mean: T::zero(),
        };
    }
    Summary {
        count,
        min,
        max,
        sum,
        mean: sum / T::of(count as f64),
    }
}

/// Population standard deviation (divisor `n`), two-pass.
pub fn population_std<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let n = T::of(values.len() as f64);
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / n;
    let ss = values.iter().fold(T::zero(), |a, &v| {
        let d = v - mean;
        a + d * d
    });
    (ss / n).sqrt()
}

/// Sample standard deviation (divisor `n - 1`); zero for fewer than two values.
pub fn sample_std<T: Scalar>(values: &[T]) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    let n = T::of(values.len() as f64);
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / n;
    let ss = values.iter().fold(T::zero(), |a, &v| {
        let d = v - mean;
        a + d * d
    });
    (ss / (n - T::one())).sqrt()
}

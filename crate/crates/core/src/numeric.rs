//! Small numeric helpers.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
    count: usize,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
        self.count += 1;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `None` when nothing was added.
    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.total() / self.count as f64)
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        s.extend(iter);
        s
    }
}

/// Mean and population standard deviation. `None` for an empty slice.
pub fn mean_and_population_std(values: &[f64]) -> Option<(f64, f64)> {
    let mean = values.iter().copied().collect::<CompensatedSum>().mean()?;
    let var = values
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<CompensatedSum>()
        .mean()?;
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let values = [1e16, 1.0, -1e16];
        let s: CompensatedSum = values.iter().copied().collect();
        assert_eq!(s.total(), 1.0);
        assert_eq!(s.count(), 3);
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_and_population_std(&[0.8, 0.6]).unwrap();
        assert!((m - 0.7).abs() < 1e-15);
        assert!((s - 0.1).abs() < 1e-15);
        assert_eq!(mean_and_population_std(&[]), None);
        assert_eq!(mean_and_population_std(&[2.0]), Some((2.0, 0.0)));
    }
}

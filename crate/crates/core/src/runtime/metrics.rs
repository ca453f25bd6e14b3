use std::time::Duration;

pub const CSV_HEADER: &str = "f,m,if_eval,max_eval,if_viol_or_broken,total";

/// Wall time of one cycle, split along the per-expression cost phases.
///
/// `m` covers ingesting the cycle's events into the history and the
/// knowledge base. The three phase columns are summed over all expressions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CycleMetrics {
    pub f: usize,
    pub m: Duration,
    pub if_eval: Duration,
    pub max_eval: Duration,
    pub if_viol_or_broken: Duration,
    pub total: Duration,
}

impl CycleMetrics {
    /// Component-wise mean. `f` is taken from the first sample.
    pub fn mean(samples: &[CycleMetrics]) -> Option<CycleMetrics> {
        let n = u32::try_from(samples.len()).ok().filter(|n| *n > 0)?;
        let sum = |g: fn(&CycleMetrics) -> Duration| samples.iter().map(g).sum::<Duration>() / n;
        Some(CycleMetrics {
            f: samples[0].f,
            m: sum(|c| c.m),
            if_eval: sum(|c| c.if_eval),
            max_eval: sum(|c| c.max_eval),
            if_viol_or_broken: sum(|c| c.if_viol_or_broken),
            total: sum(|c| c.total),
        })
    }

    /// Sum of the measured phases; `total` also includes loop overhead.
    pub fn phases(&self) -> Duration {
        self.m + self.if_eval + self.max_eval + self.if_viol_or_broken
    }

    /// Times in microseconds.
    pub fn csv_row(&self) -> String {
        let us = |d: Duration| format!("{:.3}", d.as_secs_f64() * 1e6);
        format!(
            "{},{},{},{},{},{}",
            self.f,
            us(self.m),
            us(self.if_eval),
            us(self.max_eval),
            us(self.if_viol_or_broken),
            us(self.total)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_row() {
        let a = CycleMetrics { f: 2, total: Duration::from_micros(10), ..Default::default() };
        let b = CycleMetrics { f: 2, total: Duration::from_micros(20), ..Default::default() };
        let m = CycleMetrics::mean(&[a, b]).unwrap();
        assert_eq!(m.total, Duration::from_micros(15));
        assert_eq!(m.csv_row(), "2,0.000,0.000,0.000,0.000,15.000");
        assert!(CycleMetrics::mean(&[]).is_none());
    }
}

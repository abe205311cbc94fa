//! Rolling averages of requested resources and the SRP request rate window.

use alloc::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub bandwidth_bps: f64,
    pub frame_rate: f64,
}

/// Ratios of a new request against the mean of the window before it.
/// `None` while fewer than the configured minimum of samples were seen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeviationReport {
    pub bandwidth_ratio: Option<f64>,
    pub rate_ratio: Option<f64>,
    pub mean_bandwidth_bps: Option<f64>,
    pub mean_frame_rate: Option<f64>,
}

impl DeviationReport {
    /// True when either metric is more than `factor` times above or below the mean.
    pub fn exceeds(&self, factor: f64) -> bool {
        let off = |r: Option<f64>| r.is_some_and(|r| r > factor || r * factor < 1.0);
        off(self.bandwidth_ratio) || off(self.rate_ratio)
    }
}

#[derive(Debug, Clone)]
pub struct RollingStats {
    capacity: usize,
    window: VecDeque<Sample>,
    sum: Sample,
    evictions_since_resync: usize,
    count: u32,
}

impl RollingStats {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        RollingStats {
            capacity,
            window: VecDeque::with_capacity(capacity),
            sum: Sample {
                bandwidth_bps: 0.0,
                frame_rate: 0.0,
            },
            evictions_since_resync: 0,
            count: 0,
        }
    }

    /// Total samples ever pushed.
    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.window.iter()
    }

    pub fn mean(&self) -> Option<Sample> {
        if self.window.is_empty() {
            return None;
        }
        let n = self.window.len() as f64;
        Some(Sample {
            bandwidth_bps: self.sum.bandwidth_bps / n,
            frame_rate: self.sum.frame_rate / n,
        })
    }

    /// Mean recomputed from scratch over the window contents.
    pub fn recomputed_mean(&self) -> Option<Sample> {
        if self.window.is_empty() {
            return None;
        }
        let n = self.window.len() as f64;
        let (bw, rate) = self.window.iter().fold((0.0, 0.0), |(b, r), s| {
            (b + s.bandwidth_bps, r + s.frame_rate)
        });
        Some(Sample {
            bandwidth_bps: bw / n,
            frame_rate: rate / n,
        })
    }

    /// Compares the sample against the current mean, then pushes it.
    pub fn update(&mut self, sample: Sample, min_samples: u32) -> DeviationReport {
        let mut report = DeviationReport::default();
        if let Some(mean) = self.mean() {
            report.mean_bandwidth_bps = Some(mean.bandwidth_bps);
            report.mean_frame_rate = Some(mean.frame_rate);
            if self.window.len() >= min_samples as usize {
                report.bandwidth_ratio = Some(sample.bandwidth_bps / mean.bandwidth_bps);
                report.rate_ratio = Some(sample.frame_rate / mean.frame_rate);
            }
        }
        self.push(sample);
        report
    }

    fn push(&mut self, sample: Sample) {
        if self.window.len() == self.capacity {
            if let Some(old) = self.window.pop_front() {
                self.sum.bandwidth_bps -= old.bandwidth_bps;
                self.sum.frame_rate -= old.frame_rate;
                self.evictions_since_resync += 1;
            }
        }
        self.window.push_back(sample);
        self.sum.bandwidth_bps += sample.bandwidth_bps;
        self.sum.frame_rate += sample.frame_rate;
        self.count = self.count.saturating_add(1);
        // drop accumulated cancellation error once per full turnover
        if self.evictions_since_resync >= self.capacity {
            self.evictions_since_resync = 0;
            self.sum = self.window.iter().fold(
                Sample {
                    bandwidth_bps: 0.0,
                    frame_rate: 0.0,
                },
                |acc, s| Sample {
                    bandwidth_bps: acc.bandwidth_bps + s.bandwidth_bps,
                    frame_rate: acc.frame_rate + s.frame_rate,
                },
            );
        }
    }
}

/// Sliding-window request counter: `hit` reports how many requests fell in
/// `(now - window_s, now]`, the current one included.
#[derive(Debug, Clone)]
pub struct RateWindow {
    limit: u32,
    window_s: f64,
    stamps: VecDeque<f64>,
}

impl RateWindow {
    pub fn new(limit: u32, window_s: f64) -> Self {
        RateWindow {
            limit,
            window_s,
            stamps: VecDeque::new(),
        }
    }

    pub fn limit(&self) -> u32 {
        self.limit
    }

    pub fn hit(&mut self, now: f64) -> u32 {
        while let Some(&front) = self.stamps.front() {
            if front <= now - self.window_s {
                self.stamps.pop_front();
            } else {
                break;
            }
        }
        self.stamps.push_back(now);
        self.stamps.len() as u32
    }

    pub fn exceeded(&self, count: u32) -> bool {
        count > self.limit
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(bw: f64, rate: f64) -> Sample {
        Sample {
            bandwidth_bps: bw,
            frame_rate: rate,
        }
    }

    #[test]
    fn ratio_against_previous_mean() {
        let mut st = RollingStats::new(32);
        for _ in 0..5 {
            st.update(s(10e6, 100.0), 5);
        }
        let r = st.update(s(100e6, 100.0), 5);
        assert_eq!(r.bandwidth_ratio, Some(10.0));
        assert_eq!(r.rate_ratio, Some(1.0));
        assert!(r.exceeds(2.0));
    }

    #[test]
    fn cold_start_reports_nothing() {
        let mut st = RollingStats::new(32);
        let r = st.update(s(1e9, 1e4), 5);
        assert_eq!(r.bandwidth_ratio, None);
        assert!(!r.exceeds(2.0));
        for _ in 0..3 {
            assert!(!st.update(s(1.0, 1.0), 5).exceeds(2.0));
        }
    }

    #[test]
    fn constant_input_has_unit_ratio() {
        let mut st = RollingStats::new(8);
        for i in 0..50 {
            let r = st.update(s(204_800.0, 100.0), 5);
            if i >= 5 {
                assert_eq!(r.bandwidth_ratio, Some(1.0));
                assert_eq!(r.rate_ratio, Some(1.0));
            }
        }
        assert_eq!(st.len(), 8);
        assert_eq!(st.count(), 50);
    }

    #[test]
    fn smaller_requests_also_deviate() {
        let r = DeviationReport {
            bandwidth_ratio: Some(0.1),
            ..Default::default()
        };
        assert!(r.exceeds(2.0));
        let r = DeviationReport {
            bandwidth_ratio: Some(0.6),
            rate_ratio: Some(1.9),
            ..Default::default()
        };
        assert!(!r.exceeds(2.0));
    }

    #[test]
    fn rate_window_counts_inside_window() {
        let mut w = RateWindow::new(10, 1.0);
        for i in 0..10 {
            let c = w.hit(0.05 * i as f64);
            assert!(!w.exceeded(c));
        }
        let c = w.hit(0.5);
        assert_eq!(c, 11);
        assert!(w.exceeded(c));
        // the first request at t=0 has left the window by t=1.0
        assert_eq!(w.hit(1.0), 11);
        assert_eq!(w.hit(10.0), 1);
    }
}

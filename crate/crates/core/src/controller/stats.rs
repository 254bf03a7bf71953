use super::MemRequest;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LatencyStats {
    pub count: u64,
    pub sum: u64,
    pub max: u64,
}

impl LatencyStats {
    pub fn record(&mut self, latency: u64) {
        self.count += 1;
        self.sum += latency;
        self.max = self.max.max(latency);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum as f64 / self.count as f64
        }
    }
}

/// Request-level service statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServiceStats {
    pub global: LatencyStats,
    pub per_core: Vec<LatencyStats>,
    samples: Vec<u64>,
    pub near_served: u64,
    pub far_served: u64,
    pub row_hits: u64,
}

impl ServiceStats {
    pub fn new(cores: usize) -> Self {
        Self {
            per_core: vec![LatencyStats::default(); cores],
            ..Default::default()
        }
    }

    /// Record a finished request. Each request may be recorded once.
    pub fn on_complete(&mut self, request: &mut MemRequest) -> Result<()> {
        let completion = request.completion.ok_or_else(|| {
            SimError::internal(format!("request {} completed without a cycle", request.id))
        })?;
        if request.recorded {
            return Err(SimError::internal(format!(
                "request {} completed twice",
                request.id
            )));
        }
        request.recorded = true;
        let latency = completion.checked_sub(request.arrival).ok_or_else(|| {
            SimError::internal(format!("request {} completed before arrival", request.id))
        })?;
        self.global.record(latency);
        if self.per_core.len() <= request.core {
            self.per_core
                .resize(request.core + 1, LatencyStats::default());
        }
        self.per_core[request.core].record(latency);
        self.samples.push(latency);
        if request.served_near {
            self.near_served += 1;
        } else {
            self.far_served += 1;
        }
        if request.row_hit {
            self.row_hits += 1;
        }
        Ok(())
    }

    pub fn requests(&self) -> u64 {
        self.global.count
    }

    pub fn near_fraction(&self) -> f64 {
        ratio(self.near_served, self.global.count)
    }

    pub fn row_hit_rate(&self) -> f64 {
        ratio(self.row_hits, self.global.count)
    }

    /// Nearest-rank percentile of all recorded latencies.
    pub fn percentile(&self, p: f64) -> u64 {
        if self.samples.is_empty() {
            return 0;
        }
        let mut s = self.samples.clone();
        let rank = ((p / 100.0) * s.len() as f64).ceil().max(1.0) as usize;
        let idx = rank.min(s.len()) - 1;
        *s.select_nth_unstable(idx).1
    }
}

fn ratio(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

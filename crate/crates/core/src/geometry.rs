//! Analytical bitline models.
//!
//! Maps subarray geometry (cells per bitline segment, number of isolation
//! transistors between a segment and the sense amplifiers) to row-cycle
//! latency, normalized activation power and normalized die size. The models
//! are calibrated so the three reference design points (short unsegmented,
//! long unsegmented, near/far segmented) are reproduced exactly:
//!
//! * latency and power are affine in the number of cells electrically
//!   connected to the sense amplifier, plus a fixed penalty for every
//!   isolation transistor the access has to pass through;
//! * die size is `alpha + beta / cells_per_bitline` (sense amplifier area
//!   amortized over the bitline) plus a flat overhead per extra tier.

use std::ops::Range;

use crate::error::{Result, SimError};

/// One bitline segment of a subarray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TierSpec {
    pub cells_in_segment: usize,
    /// Isolation transistors between this segment and the sense amplifiers.
    pub isolation_transistors_to_amp: usize,
    /// Cells on the bitline while this segment is being accessed.
    pub connected_cells_when_accessed: usize,
}

/// Physical shape of the simulated device.
///
/// Tier 0 sits next to the sense amplifiers. Rows are numbered from the
/// amplifier outwards, so rows `0..tiers[0].cells_in_segment` are the near
/// segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceGeometry {
    tiers: Vec<TierSpec>,
    rows_per_subarray: usize,
    pub subarrays_per_bank: usize,
    pub banks: usize,
    pub columns_per_row: usize,
    pub bytes_per_column: usize,
}

impl DeviceGeometry {
    pub const DEFAULT_BANKS: usize = 8;
    pub const DEFAULT_SUBARRAYS: usize = 8;
    pub const DEFAULT_COLUMNS: usize = 128;
    pub const DEFAULT_COLUMN_BYTES: usize = 64;

    pub fn new(
        segment_cells: &[usize],
        banks: usize,
        subarrays_per_bank: usize,
        columns_per_row: usize,
        bytes_per_column: usize,
    ) -> Result<Self> {
        if segment_cells.is_empty() {
            return Err(SimError::config("geometry needs at least one tier"));
        }
        if let Some(i) = segment_cells.iter().position(|&c| c == 0) {
            return Err(SimError::config(format!("tier {i} has zero cells")));
        }
        for (name, v) in [
            ("banks", banks),
            ("subarrays", subarrays_per_bank),
            ("columns", columns_per_row),
            ("column bytes", bytes_per_column),
        ] {
            if v == 0 {
                return Err(SimError::config(format!(
                    "geometry {name} must be at least 1"
                )));
            }
        }

        let mut connected = 0;
        let tiers = segment_cells
            .iter()
            .enumerate()
            .map(|(i, &cells)| {
                connected += cells;
                TierSpec {
                    cells_in_segment: cells,
                    isolation_transistors_to_amp: i,
                    connected_cells_when_accessed: connected,
                }
            })
            .collect();

        Ok(Self {
            tiers,
            rows_per_subarray: connected,
            subarrays_per_bank,
            banks,
            columns_per_row,
            bytes_per_column,
        })
    }

    /// A bitline-only geometry with the default bank organization.
    pub fn with_segments(segment_cells: &[usize]) -> Result<Self> {
        Self::new(
            segment_cells,
            Self::DEFAULT_BANKS,
            Self::DEFAULT_SUBARRAYS,
            Self::DEFAULT_COLUMNS,
            Self::DEFAULT_COLUMN_BYTES,
        )
    }

    pub fn tiers(&self) -> &[TierSpec] {
        &self.tiers
    }

    pub fn tier_count(&self) -> usize {
        self.tiers.len()
    }

    /// True when the geometry has a near segment distinct from the rest.
    pub fn is_segmented(&self) -> bool {
        self.tiers.len() > 1
    }

    pub fn cells_per_bitline(&self) -> usize {
        self.rows_per_subarray
    }

    pub fn rows_per_subarray(&self) -> usize {
        self.rows_per_subarray
    }

    pub fn near_rows(&self) -> usize {
        self.tiers[0].cells_in_segment
    }

    pub fn row_bytes(&self) -> usize {
        self.columns_per_row * self.bytes_per_column
    }

    pub fn total_subarrays(&self) -> usize {
        self.banks * self.subarrays_per_bank
    }

    pub fn tier(&self, index: usize) -> Result<&TierSpec> {
        self.tiers.get(index).ok_or(SimError::InvalidTier {
            index,
            tiers: self.tiers.len(),
        })
    }

    pub fn tier_rows(&self, tier: usize) -> Range<usize> {
        let spec = &self.tiers[tier];
        spec.connected_cells_when_accessed - spec.cells_in_segment
            ..spec.connected_cells_when_accessed
    }

    /// Flat index of a physical row across all banks and subarrays.
    pub fn global_row(&self, bank: usize, subarray: usize, row: usize) -> usize {
        (bank * self.subarrays_per_bank + subarray) * self.rows_per_subarray + row
    }

    /// Inverse of [`global_row`](Self::global_row): `(bank, subarray, row)`.
    pub fn split_global_row(&self, global: usize) -> Option<(usize, usize, usize)> {
        let row = global % self.rows_per_subarray;
        let sa = global / self.rows_per_subarray;
        (sa < self.total_subarrays()).then(|| {
            (
                sa / self.subarrays_per_bank,
                sa % self.subarrays_per_bank,
                row,
            )
        })
    }

    /// Tier holding `row`. Rows past the end of the subarray map to the last tier.
    pub fn tier_of_row(&self, row: usize) -> usize {
        self.tiers
            .iter()
            .position(|t| row < t.connected_cells_when_accessed)
            .unwrap_or(self.tiers.len() - 1)
    }
}

/// Reference design points the models are fitted to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationAnchors {
    pub short_cells: usize,
    pub long_cells: usize,
    pub trc_short_ns: f64,
    pub trc_long_ns: f64,
    /// Far segment behind one isolation transistor, full bitline connected.
    pub trc_far_ns: f64,
    pub power_short: f64,
    pub power_long: f64,
    pub power_far: f64,
    pub die_short: f64,
    pub die_long: f64,
    pub die_segmented: f64,
}

impl Default for CalibrationAnchors {
    fn default() -> Self {
        Self {
            short_cells: 32,
            long_cells: 512,
            trc_short_ns: 23.1,
            trc_long_ns: 52.5,
            trc_far_ns: 65.8,
            power_short: 0.51,
            power_long: 1.00,
            power_far: 1.49,
            die_short: 3.76,
            die_long: 1.00,
            die_segmented: 1.03,
        }
    }
}

impl CalibrationAnchors {
    pub fn validate(&self) -> Result<()> {
        let values = [
            self.trc_short_ns,
            self.trc_long_ns,
            self.trc_far_ns,
            self.power_short,
            self.power_long,
            self.power_far,
            self.die_short,
            self.die_long,
            self.die_segmented,
        ];
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SimError::config("calibration anchors must be positive"));
        }
        if !(self.short_cells >= 1 && self.short_cells < self.long_cells) {
            return Err(SimError::config(
                "anchor cell counts must satisfy 1 <= short < long",
            ));
        }
        if !(self.trc_short_ns < self.trc_long_ns && self.trc_long_ns < self.trc_far_ns) {
            return Err(SimError::config(
                "anchor tRC must increase short < long < far",
            ));
        }
        if !(self.power_short < self.power_long && self.power_long < self.power_far) {
            return Err(SimError::config(
                "anchor power must increase short < long < far",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine {
    slope: f64,
    intercept: f64,
}

impl Affine {
    fn through(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let slope = (y1 - y0) / (x1 - x0);
        Self {
            slope,
            intercept: y0 - slope * x0,
        }
    }

    fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Bitline latency/power/area model with coefficients solved from anchors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitlineModel {
    trc: Affine,
    iso_penalty_ns: f64,
    power: Affine,
    toggle_cost: f64,
    die_alpha: f64,
    die_beta: f64,
    iso_area: f64,
}

impl BitlineModel {
    pub fn calibrate(anchors: &CalibrationAnchors) -> Result<Self> {
        anchors.validate()?;
        let (s, l) = (anchors.short_cells as f64, anchors.long_cells as f64);

        let trc = Affine::through(s, anchors.trc_short_ns, l, anchors.trc_long_ns);
        let power = Affine::through(s, anchors.power_short, l, anchors.power_long);

        // alpha + beta / n through both unsegmented points.
        let die_beta = (anchors.die_short - anchors.die_long) / (1.0 / s - 1.0 / l);
        let die_alpha = anchors.die_long - die_beta / l;

        Ok(Self {
            trc,
            iso_penalty_ns: anchors.trc_far_ns - trc.at(l),
            power,
            toggle_cost: anchors.power_far - power.at(l),
            die_alpha,
            die_beta,
            iso_area: anchors.die_segmented - anchors.die_long,
        })
    }

    pub fn iso_penalty_ns(&self) -> f64 {
        self.iso_penalty_ns
    }

    pub fn toggle_cost(&self) -> f64 {
        self.toggle_cost
    }

    /// `(alpha, beta)` of the die-size curve.
    pub fn die_coefficients(&self) -> (f64, f64) {
        (self.die_alpha, self.die_beta)
    }

    pub fn trc_ns(&self, connected_cells: usize, isolation_transistors: usize) -> f64 {
        self.trc.at(connected_cells as f64) + self.iso_penalty_ns * isolation_transistors as f64
    }

    pub fn power(&self, connected_cells: usize, isolation_transistors: usize) -> f64 {
        self.power.at(connected_cells as f64) + self.toggle_cost * isolation_transistors as f64
    }

    pub fn die(&self, cells_per_bitline: usize, tiers: usize) -> f64 {
        self.die_alpha
            + self.die_beta / cells_per_bitline as f64
            + self.iso_area * tiers.saturating_sub(1) as f64
    }

    pub fn trc_of_tier(&self, geometry: &DeviceGeometry, tier: usize) -> Result<f64> {
        let t = geometry.tier(tier)?;
        Ok(self.trc_ns(
            t.connected_cells_when_accessed,
            t.isolation_transistors_to_amp,
        ))
    }

    pub fn power_of_tier(&self, geometry: &DeviceGeometry, tier: usize) -> Result<f64> {
        let t = geometry.tier(tier)?;
        Ok(self.power(
            t.connected_cells_when_accessed,
            t.isolation_transistors_to_amp,
        ))
    }

    pub fn die_size(&self, geometry: &DeviceGeometry) -> f64 {
        self.die(geometry.cells_per_bitline(), geometry.tier_count())
    }
}

/// Row-cycle time of `tier_index` in nanoseconds.
pub fn trc_of_tier(
    geometry: &DeviceGeometry,
    tier_index: usize,
    anchors: &CalibrationAnchors,
) -> Result<f64> {
    BitlineModel::calibrate(anchors)?.trc_of_tier(geometry, tier_index)
}

/// Normalized energy of one activation of `tier_index`.
pub fn power_of_tier(
    geometry: &DeviceGeometry,
    tier_index: usize,
    anchors: &CalibrationAnchors,
) -> Result<f64> {
    BitlineModel::calibrate(anchors)?.power_of_tier(geometry, tier_index)
}

/// Die area normalized to the long unsegmented bitline.
pub fn die_size(geometry: &DeviceGeometry, anchors: &CalibrationAnchors) -> Result<f64> {
    Ok(BitlineModel::calibrate(anchors)?.die_size(geometry))
}

/// How the row cycle is split into the individual DDR timing constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionRatios {
    pub tras_frac: f64,
    pub trp_frac: f64,
    pub trcd_frac: f64,
    pub tcl_ns: f64,
    pub twr_ns: f64,
    pub tccd_ns: f64,
    /// Extra time an inter-segment copy needs on top of tRC.
    pub mig_extra_ns: f64,
}

impl Default for DecompositionRatios {
    fn default() -> Self {
        Self {
            tras_frac: 0.7,
            trp_frac: 0.3,
            trcd_frac: 0.3,
            tcl_ns: 13.1,
            twr_ns: 15.0,
            tccd_ns: 5.0,
            mig_extra_ns: 4.0,
        }
    }
}

impl DecompositionRatios {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.tras_frac, self.trp_frac, self.trcd_frac];
        if fracs
            .iter()
            .any(|f| !(f.is_finite() && *f > 0.0 && *f <= 1.0))
        {
            return Err(SimError::config("timing fractions must lie in (0, 1]"));
        }
        if (self.tras_frac + self.trp_frac - 1.0).abs() > 1e-9 {
            return Err(SimError::config(format!(
                "tras_frac + trp_frac must equal 1 (got {} + {})",
                self.tras_frac, self.trp_frac
            )));
        }
        if self.trcd_frac > self.tras_frac {
            return Err(SimError::config("trcd_frac must not exceed tras_frac"));
        }
        let fixed = [self.tcl_ns, self.twr_ns, self.tccd_ns, self.mig_extra_ns];
        if fixed.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SimError::config(
                "fixed timing parameters must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Timing constraints of one tier, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingParams {
    pub trc: f64,
    pub tras: f64,
    pub trp: f64,
    pub trcd: f64,
    pub tcl: f64,
    pub twr: f64,
    pub tccd: f64,
    pub tmig: f64,
}

/// Timing constraints of one tier, in controller cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CycleTimings {
    pub trc: u64,
    pub tras: u64,
    pub trp: u64,
    pub trcd: u64,
    pub tcl: u64,
    pub twr: u64,
    pub tccd: u64,
    pub tmig: u64,
}

/// Ceiling conversion with a small guard so exact multiples do not round up.
pub fn ns_to_cycles(ns: f64, cycle_ns: f64) -> u64 {
    let raw = ns / cycle_ns;
    (raw - 1e-9).ceil().max(0.0) as u64
}

impl TimingParams {
    pub fn to_cycles(&self, cycle_ns: f64) -> CycleTimings {
        let c = |ns| ns_to_cycles(ns, cycle_ns);
        CycleTimings {
            trc: c(self.trc),
            tras: c(self.tras),
            trp: c(self.trp),
            trcd: c(self.trcd),
            tcl: c(self.tcl),
            twr: c(self.twr),
            tccd: c(self.tccd),
            tmig: c(self.tmig),
        }
    }
}

impl CycleTimings {
    /// Longest single constraint; no pairwise check can span more than this.
    pub fn max_span(&self) -> u64 {
        [
            self.trc,
            self.tras,
            self.trp,
            self.trcd,
            self.tcl + self.twr,
            self.tccd,
            self.tmig,
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
    }
}

pub fn timing_params_for(
    geometry: &DeviceGeometry,
    tier_index: usize,
    anchors: &CalibrationAnchors,
    decomposition: &DecompositionRatios,
) -> Result<TimingParams> {
    decomposition.validate()?;
    let trc = trc_of_tier(geometry, tier_index, anchors)?;
    Ok(TimingParams {
        trc,
        tras: decomposition.tras_frac * trc,
        trp: decomposition.trp_frac * trc,
        trcd: decomposition.trcd_frac * trc,
        tcl: decomposition.tcl_ns,
        twr: decomposition.twr_ns,
        tccd: decomposition.tccd_ns,
        tmig: trc + decomposition.mig_extra_ns,
    })
}

/// Cycle timings for every tier of `geometry`.
pub fn tier_cycle_timings(
    geometry: &DeviceGeometry,
    anchors: &CalibrationAnchors,
    decomposition: &DecompositionRatios,
    cycle_ns: f64,
) -> Result<Vec<CycleTimings>> {
    if !(cycle_ns.is_finite() && cycle_ns > 0.0) {
        return Err(SimError::config("cycle time must be positive"));
    }
    (0..geometry.tier_count())
        .map(|t| Ok(timing_params_for(geometry, t, anchors, decomposition)?.to_cycles(cycle_ns)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffRow {
    pub cells: usize,
    pub trc_ns: f64,
    pub trcd_ns: f64,
    pub die_norm: f64,
    pub power_norm: f64,
}

/// Latency/area trade-off for unsegmented bitlines of the given lengths.
pub fn tradeoff_table(
    cell_counts: &[usize],
    anchors: &CalibrationAnchors,
    decomposition: &DecompositionRatios,
) -> Result<Vec<TradeoffRow>> {
    let model = BitlineModel::calibrate(anchors)?;
    cell_counts
        .iter()
        .map(|&cells| {
            let g = DeviceGeometry::with_segments(&[cells])?;
            let trc_ns = model.trc_of_tier(&g, 0)?;
            Ok(TradeoffRow {
                cells,
                trc_ns,
                trcd_ns: decomposition.trcd_frac * trc_ns,
                die_norm: model.die_size(&g),
                power_norm: model.power_of_tier(&g, 0)?,
            })
        })
        .collect()
}

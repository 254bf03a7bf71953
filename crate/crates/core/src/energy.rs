//! Normalized activation-centric energy accounting.
//!
//! Costs are in units of one long-bitline activation. The ledger stores
//! event counts; energies are derived as `count * per-event cost`, so ledger
//! totals are exact functions of the counts and sum linearly.

use crate::engine::{Command, CommandKind};
use crate::error::Result;
use crate::geometry::{BitlineModel, CalibrationAnchors, DeviceGeometry};

/// Per-event energy costs for one geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    activation_cost: Vec<f64>,
    column_cost: f64,
}

impl EnergyModel {
    pub const DEFAULT_COLUMN_COST: f64 = 0.1;

    pub fn new(
        geometry: &DeviceGeometry,
        anchors: &CalibrationAnchors,
        column_cost: f64,
    ) -> Result<Self> {
        let model = BitlineModel::calibrate(anchors)?;
        let activation_cost = (0..geometry.tier_count())
            .map(|t| model.power_of_tier(geometry, t))
            .collect::<Result<_>>()?;
        Ok(Self {
            activation_cost,
            column_cost,
        })
    }

    pub fn activation_cost(&self, tier: usize) -> f64 {
        self.activation_cost[tier]
    }

    pub fn column_cost(&self) -> f64 {
        self.column_cost
    }

    pub fn tiers(&self) -> usize {
        self.activation_cost.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    model: EnergyModel,
    /// Activations per tier.
    pub activations: Vec<u64>,
    /// Migrations, indexed by the tier of the slower participant.
    pub migrations: Vec<u64>,
    pub column_ops: u64,
}

impl EnergyLedger {
    pub fn new(model: EnergyModel) -> Self {
        let tiers = model.tiers();
        Self {
            model,
            activations: vec![0; tiers],
            migrations: vec![0; tiers],
            column_ops: 0,
        }
    }

    pub fn model(&self) -> &EnergyModel {
        &self.model
    }

    pub fn charge(&mut self, cmd: &Command, geometry: &DeviceGeometry) {
        match cmd.kind {
            CommandKind::Act => self.activations[geometry.tier_of_row(cmd.row)] += 1,
            CommandKind::Mig => {
                let tier = geometry
                    .tier_of_row(cmd.row)
                    .max(geometry.tier_of_row(cmd.arg));
                self.migrations[tier] += 1;
            }
            CommandKind::Rd | CommandKind::Wr => self.column_ops += 1,
            CommandKind::Pre => {}
        }
    }

    fn weighted(&self, counts: &[u64]) -> f64 {
        counts
            .iter()
            .enumerate()
            .map(|(t, &n)| n as f64 * self.model.activation_cost(t))
            .sum()
    }

    pub fn activation_energy(&self) -> f64 {
        self.weighted(&self.activations)
    }

    pub fn migration_energy(&self) -> f64 {
        self.weighted(&self.migrations)
    }

    pub fn rdwr_energy(&self) -> f64 {
        self.column_ops as f64 * self.model.column_cost()
    }

    pub fn total(&self) -> f64 {
        self.activation_energy() + self.migration_energy() + self.rdwr_energy()
    }

    pub fn total_activations(&self) -> u64 {
        self.activations.iter().sum()
    }

    pub fn total_migrations(&self) -> u64 {
        self.migrations.iter().sum()
    }

    /// Add another ledger's counts. Both must share the same cost model.
    pub fn absorb(&mut self, other: &EnergyLedger) {
        debug_assert_eq!(self.model, other.model);
        for (a, b) in self.activations.iter_mut().zip(&other.activations) {
            *a += b;
        }
        for (a, b) in self.migrations.iter_mut().zip(&other.migrations) {
            *a += b;
        }
        self.column_ops += other.column_ops;
    }

    /// Fractional energy saved relative to `baseline`; `None` when the baseline spent nothing.
    pub fn savings_vs(&self, baseline: &EnergyLedger) -> Option<f64> {
        let base = baseline.total();
        (base > 0.0).then(|| (base - self.total()) / base)
    }
}

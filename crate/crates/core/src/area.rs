//! Proxy area model for pruned flash ADCs.
//!
//! The ladder does not change under pruning and carries no cost here. What
//! remains is one comparator per surviving level plus the priority encoder,
//! whose output bit `i` is an OR over every surviving level whose binary
//! code has bit `i` set. An OR over `k` lines costs `k - 1` two-input gates.

use serde::{Deserialize, Serialize};

use crate::adc::{LevelMask, PrunedAdc};
use crate::error::{Error, Result};

/// Per-cell area units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateCostTable {
    pub comparator: f64,
    pub or2: f64,
}

impl Default for GateCostTable {
    /// Unit costs, i.e. plain cell counts.
    fn default() -> Self {
        Self { comparator: 1.0, or2: 1.0 }
    }
}

impl GateCostTable {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("comparator", self.comparator), ("or2", self.or2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} cost must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaEstimate {
    pub comparators: usize,
    pub or2_gates: usize,
    pub total: f64,
}

/// Surviving levels feeding each encoder output bit, index = bit position.
pub fn encoder_or_sets(mask: &LevelMask) -> Vec<Vec<usize>> {
    (0..mask.bitwidth())
        .map(|bit| mask.levels().filter(|l| l >> bit & 1 == 1).collect())
        .collect()
}

/// Two-input OR gates in a tree of the given fan-in.
pub fn or_tree_gate_count(fanin: usize) -> usize {
    fanin.saturating_sub(1)
}

pub fn estimate_area(adc: &PrunedAdc, costs: &GateCostTable) -> AreaEstimate {
    estimate_mask_area(adc.mask(), costs)
}

pub fn estimate_mask_area(mask: &LevelMask, costs: &GateCostTable) -> AreaEstimate {
    let comparators = mask.popcount();
    // Set sizes are popcounts of the mask restricted to levels with bit i set.
    let or2_gates = (0..mask.bitwidth())
        .map(|bit| or_tree_gate_count((mask.bits() & bit_column(mask.bitwidth(), bit)).count_ones() as usize))
        .sum();
    AreaEstimate {
        comparators,
        or2_gates,
        total: comparators as f64 * costs.comparator + or2_gates as f64 * costs.or2,
    }
}

/// Mask-bit pattern of every level whose code has `bit` set.
fn bit_column(bitwidth: u32, bit: u32) -> u64 {
    (1..=LevelMask::level_count(bitwidth))
        .filter(|l| l >> bit & 1 == 1)
        .fold(0, |acc, l| acc | 1 << (l - 1))
}

/// Summed proxy area of one ADC per classifier input.
pub fn total_frontend_area(adcs: &[PrunedAdc], costs: &GateCostTable) -> f64 {
    adcs.iter().map(|adc| estimate_area(adc, costs).total).sum()
}

/// Area of a bank of `features` conventional N-bit ADCs.
pub fn conventional_frontend_area(features: usize, bitwidth: u32, costs: &GateCostTable) -> Result<f64> {
    let full = estimate_mask_area(&LevelMask::full(bitwidth)?, costs);
    Ok(features as f64 * full.total)
}

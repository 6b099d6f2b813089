//! Behavioral model of conventional and level-pruned flash ADCs.
//!
//! An N-bit flash ADC compares its input against the `2^N - 1` taps of a
//! uniform resistor ladder. Pruning removes a subset of those comparators;
//! the ladder keeps its uniform spacing, so an input that would have landed
//! on a pruned level falls through to the next lower surviving level and is
//! emitted with that level's original N-bit code.
//!
//! Level 0 has no comparator. A [`LevelMask`] therefore carries one bit per
//! level `1..=2^N-1`, with bit `j-1` set when level `j` survives.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported ADC resolution. Masks are stored in a `u64`.
pub const MAX_BITWIDTH: u32 = 6;

/// Default ADC resolution used throughout the toolkit.
pub const DEFAULT_BITWIDTH: u32 = 4;

/// Surviving-level selection for one flash ADC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LevelMask {
    bitwidth: u32,
    bits: u64,
}

fn check_bitwidth(bitwidth: u32) -> Result<()> {
    if (1..=MAX_BITWIDTH).contains(&bitwidth) {
        Ok(())
    } else {
        Err(Error::InvalidBitwidth(bitwidth))
    }
}

impl LevelMask {
    /// Number of comparator levels for an N-bit ADC.
    pub fn level_count(bitwidth: u32) -> usize {
        (1usize << bitwidth) - 1
    }

    fn all_bits(bitwidth: u32) -> u64 {
        (1u64 << Self::level_count(bitwidth)) - 1
    }

    /// Mask of a conventional ADC: every level survives.
    pub fn full(bitwidth: u32) -> Result<Self> {
        check_bitwidth(bitwidth)?;
        Ok(Self { bitwidth, bits: Self::all_bits(bitwidth) })
    }

    /// Mask with every level pruned.
    pub fn empty(bitwidth: u32) -> Result<Self> {
        check_bitwidth(bitwidth)?;
        Ok(Self { bitwidth, bits: 0 })
    }

    /// Builds a mask from raw bits, LSB = level 1.
    pub fn from_bits(bitwidth: u32, bits: u64) -> Result<Self> {
        check_bitwidth(bitwidth)?;
        if bits & !Self::all_bits(bitwidth) != 0 {
            return Err(Error::InvalidMask(format!(
                "bits {bits:#x} exceed {} levels of a {bitwidth}-bit ADC",
                Self::level_count(bitwidth)
            )));
        }
        Ok(Self { bitwidth, bits })
    }

    /// Builds a mask from one boolean per level, index 0 = level 1.
    pub fn from_bools(bitwidth: u32, levels: &[bool]) -> Result<Self> {
        check_bitwidth(bitwidth)?;
        if levels.len() != Self::level_count(bitwidth) {
            return Err(Error::InvalidMask(format!(
                "expected {} mask bits for a {bitwidth}-bit ADC, got {}",
                Self::level_count(bitwidth),
                levels.len()
            )));
        }
        let bits = levels
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .fold(0u64, |acc, (i, _)| acc | (1 << i));
        Ok(Self { bitwidth, bits })
    }

    /// Full mask with the given levels removed.
    pub fn pruning(bitwidth: u32, pruned: &[usize]) -> Result<Self> {
        let mut mask = Self::full(bitwidth)?;
        for &level in pruned {
            mask.set(level, false)?;
        }
        Ok(mask)
    }

    /// Parses the hex literal format (LSB = level 1), e.g. `"4F"`.
    pub fn from_hex(bitwidth: u32, text: &str) -> Result<Self> {
        check_bitwidth(bitwidth)?;
        let trimmed = text.trim();
        let digits = trimmed
            .strip_prefix("0x")
            .or_else(|| trimmed.strip_prefix("0X"))
            .unwrap_or(trimmed);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(Error::InvalidMask(format!("'{text}' is not a hex mask literal")));
        }
        let significant = digits.trim_start_matches('0');
        if significant.len() > 16 {
            return Err(Error::InvalidMask(format!("'{text}' is too wide")));
        }
        let bits = if significant.is_empty() {
            0
        } else {
            u64::from_str_radix(significant, 16)
                .map_err(|e| Error::InvalidMask(format!("'{text}': {e}")))?
        };
        Self::from_bits(bitwidth, bits)
    }

    /// Uppercase hex literal, zero-padded to `ceil((2^N - 1) / 4)` digits.
    pub fn to_hex(&self) -> String {
        let width = Self::level_count(self.bitwidth).div_ceil(4);
        format!("{:0width$X}", self.bits, width = width)
    }

    pub fn bitwidth(&self) -> u32 {
        self.bitwidth
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        Self::level_count(self.bitwidth)
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn is_full(&self) -> bool {
        self.bits == Self::all_bits(self.bitwidth)
    }

    /// Number of surviving levels, i.e. comparators.
    pub fn popcount(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Whether level `level` (1-based) survives. Level 0 always does.
    pub fn survives(&self, level: usize) -> bool {
        if level == 0 {
            return true;
        }
        level <= self.len() && self.bits >> (level - 1) & 1 == 1
    }

    pub fn set(&mut self, level: usize, keep: bool) -> Result<()> {
        if level == 0 || level > self.len() {
            return Err(Error::InvalidMask(format!(
                "level {level} outside 1..={} of a {}-bit ADC",
                self.len(),
                self.bitwidth
            )));
        }
        if keep {
            self.bits |= 1 << (level - 1);
        } else {
            self.bits &= !(1 << (level - 1));
        }
        Ok(())
    }

    /// Surviving levels in ascending order.
    pub fn levels(&self) -> impl DoubleEndedIterator<Item = usize> + '_ {
        (1..=self.len()).filter(move |&l| self.survives(l))
    }

    /// True when every surviving level of `self` also survives in `other`.
    pub fn is_subset_of(&self, other: &LevelMask) -> bool {
        self.bitwidth == other.bitwidth && self.bits & !other.bits == 0
    }

    pub fn complement(&self) -> LevelMask {
        Self { bitwidth: self.bitwidth, bits: !self.bits & Self::all_bits(self.bitwidth) }
    }
}

impl fmt::Display for LevelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// A single flash ADC with an arbitrary surviving-level set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrunedAdc {
    vref: f64,
    mask: LevelMask,
}

impl PrunedAdc {
    /// ADC with the default normalized reference voltage of 1.0.
    pub fn new(mask: LevelMask) -> Self {
        Self { vref: 1.0, mask }
    }

    pub fn with_vref(mask: LevelMask, vref: f64) -> Result<Self> {
        if !(vref.is_finite() && vref > 0.0) {
            return Err(Error::InvalidConfig(format!("vref must be positive, got {vref}")));
        }
        Ok(Self { vref, mask })
    }

    /// Conventional N-bit ADC.
    pub fn conventional(bitwidth: u32) -> Result<Self> {
        Ok(Self::new(LevelMask::full(bitwidth)?))
    }

    pub fn bitwidth(&self) -> u32 {
        self.mask.bitwidth()
    }

    pub fn vref(&self) -> f64 {
        self.vref
    }

    pub fn mask(&self) -> &LevelMask {
        &self.mask
    }

    pub fn comparator_count(&self) -> usize {
        self.mask.popcount()
    }

    /// Ladder voltage of level `j`, regardless of whether it survives.
    pub fn level_voltage(&self, level: usize) -> f64 {
        level as f64 * self.vref / (1u64 << self.bitwidth()) as f64
    }

    /// `(level, voltage)` of each surviving comparator, ascending.
    pub fn thresholds(&self) -> Vec<(usize, f64)> {
        self.mask.levels().map(|l| (l, self.level_voltage(l))).collect()
    }

    /// Comparator outputs over the surviving levels, ascending.
    pub fn thermometer(&self, vin: f64) -> Vec<bool> {
        self.mask.levels().map(|l| vin > self.level_voltage(l)).collect()
    }

    /// Highest surviving level strictly below `vin`, or 0.
    pub fn digitize(&self, vin: f64) -> u32 {
        self.mask
            .levels()
            .rev()
            .find(|&l| vin > self.level_voltage(l))
            .unwrap_or(0) as u32
    }

    /// Digitizes normalized samples and returns each code as the fraction
    /// `code / 2^N` carried on the N-bit classifier input.
    pub fn quantize_batch(&self, samples: &[f64]) -> Vec<f64> {
        let scale = (1u64 << self.bitwidth()) as f64;
        samples.iter().map(|&s| self.digitize(s) as f64 / scale).collect()
    }

    /// Integer codes for a batch of samples.
    pub fn digitize_batch(&self, samples: &[f64]) -> Vec<u32> {
        samples.iter().map(|&s| self.digitize(s)).collect()
    }
}

/// Hex mask literal that has not yet been bound to a bitwidth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaskLiteral(pub String);

impl MaskLiteral {
    pub fn resolve(&self, bitwidth: u32) -> Result<LevelMask> {
        LevelMask::from_hex(bitwidth, &self.0)
    }
}

impl FromStr for MaskLiteral {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        // Syntax only; width is checked once the bitwidth is known.
        LevelMask::from_hex(MAX_BITWIDTH, s)?;
        Ok(Self(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3() -> PrunedAdc {
        PrunedAdc::new(LevelMask::pruning(3, &[5, 6]).unwrap())
    }

    #[test]
    fn full_ladder_thresholds() {
        let adc = PrunedAdc::conventional(3).unwrap();
        let expected: Vec<(usize, f64)> = (1..=7).map(|j| (j, j as f64 * 0.125)).collect();
        assert_eq!(adc.thresholds(), expected);
        assert_eq!(PrunedAdc::conventional(1).unwrap().thresholds(), vec![(1, 0.5)]);
    }

    #[test]
    fn pruned_thresholds_skip_removed_levels() {
        let levels: Vec<usize> = fig3().thresholds().iter().map(|t| t.0).collect();
        assert_eq!(levels, vec![1, 2, 3, 4, 7]);
        assert_eq!(fig3().thresholds().last().unwrap().1, 0.875);
    }

    #[test]
    fn thermometer_examples() {
        let full = PrunedAdc::conventional(3).unwrap();
        assert_eq!(full.thermometer(0.8), vec![true, true, true, true, true, true, false]);
        assert_eq!(fig3().thermometer(0.8), vec![true, true, true, true, false]);
        assert!(fig3().thermometer(-1.0).iter().all(|b| !b));
        assert!(full.thermometer(2.0).iter().all(|&b| b));
    }

    #[test]
    fn digitize_examples() {
        assert_eq!(PrunedAdc::conventional(3).unwrap().digitize(0.8), 6);
        assert_eq!(fig3().digitize(0.8), 4);
        let empty = PrunedAdc::new(LevelMask::empty(3).unwrap());
        for v in [-1.0, 0.0, 0.5, 1.0, 3.0] {
            assert_eq!(empty.digitize(v), 0);
        }
    }

    #[test]
    fn digitize_bin_midpoints_enumerate_all_codes() {
        let adc = PrunedAdc::conventional(4).unwrap();
        for bin in 0..16u32 {
            let mid = (bin as f64 + 0.5) / 16.0;
            assert_eq!(adc.digitize(mid), bin);
        }
    }

    #[test]
    fn threshold_ties_resolve_low() {
        let adc = PrunedAdc::conventional(3).unwrap();
        assert_eq!(adc.digitize(0.25), 1);
        assert_eq!(adc.digitize(0.0), 0);
        assert_eq!(adc.digitize(1.0), 7);
    }

    #[test]
    fn quantize_batch_examples() {
        let full4 = PrunedAdc::conventional(4).unwrap();
        assert_eq!(full4.quantize_batch(&[1.0]), vec![15.0 / 16.0]);
        assert_eq!(fig3().quantize_batch(&[0.8]), vec![0.5]);
        let empty = PrunedAdc::new(LevelMask::empty(4).unwrap());
        assert_eq!(empty.quantize_batch(&[0.0, 0.3, 1.0]), vec![0.0; 3]);
    }

    #[test]
    fn hex_literal_format() {
        let mask = LevelMask::pruning(3, &[5, 6]).unwrap();
        assert_eq!(mask.bits(), 0b1001111);
        assert_eq!(mask.to_hex(), "4F");
        assert_eq!(LevelMask::from_hex(3, "4f").unwrap(), mask);
        assert_eq!(LevelMask::from_hex(3, "0x4F").unwrap(), mask);
        assert_eq!(LevelMask::full(4).unwrap().to_hex(), "7FFF");
        assert_eq!(LevelMask::empty(3).unwrap().to_hex(), "00");
        assert_eq!(LevelMask::full(1).unwrap().to_hex(), "1");
        assert!(LevelMask::from_hex(3, "80").is_err());
        assert!(LevelMask::from_hex(3, "zz").is_err());
        assert!(LevelMask::from_hex(3, "").is_err());
    }

    #[test]
    fn mask_length_checked() {
        assert!(LevelMask::from_bools(3, &[true; 6]).is_err());
        assert_eq!(LevelMask::from_bools(3, &[true; 7]).unwrap(), LevelMask::full(3).unwrap());
        assert!(LevelMask::full(0).is_err());
        assert!(LevelMask::full(MAX_BITWIDTH + 1).is_err());
        let mut m = LevelMask::full(3).unwrap();
        assert!(m.set(0, false).is_err());
        assert!(m.set(8, false).is_err());
    }

    #[test]
    fn full_mask_matches_uniform_quantizer() {
        for n in 1..=MAX_BITWIDTH {
            let adc = PrunedAdc::conventional(n).unwrap();
            let top = (1u64 << n) as f64;
            for i in 0..1000 {
                let v = i as f64 / 1000.0;
                // strict comparators: exact ladder taps resolve to the lower code
                let scaled = v * top;
                let mut expected = scaled.floor();
                if scaled == expected && expected > 0.0 {
                    expected -= 1.0;
                }
                let expected = expected.clamp(0.0, top - 1.0) as u32;
                assert_eq!(adc.digitize(v), expected, "n={n} v={v}");
            }
        }
    }
}

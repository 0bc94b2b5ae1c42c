//! PV plant sizing arithmetic: from module ratings through array count,
//! inverter rating, and the transformer chain up to the grid connection.
//!
//! Everything here is closed-form three-phase circuit arithmetic. The
//! defaults describe a 1 GW plant built from 500 W modules, 25-module
//! strings, 336 strings per array, 630 V inverters run at a 1.2 DC/AC
//! loading ratio, 0.63/33 kV unit transformers and a 400 kV grid step-up.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Inputs to the sizing chain. Construct with [`PlantConfig::default`] and
/// override what differs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    /// Modules in series per string.
    pub modules_per_string: u32,
    /// Strings in parallel per array.
    pub strings_per_array: u32,
    /// Module nameplate, watts.
    pub module_power_w: f64,
    /// Plant DC target, megawatts.
    pub plant_target_mw: f64,
    /// DC array power over inverter AC rating.
    pub inverter_loading_ratio: f64,
    /// Inverter AC terminal line voltage, volts.
    pub inverter_voltage_v: f64,
    /// Power factor used for the inverter current rating.
    pub inverter_power_factor: f64,
    /// Unit (inverter) transformer rating, MVA.
    pub lv_transformer_mva: f64,
    /// Unit transformer LV side, volts.
    pub lv_voltage_v: f64,
    /// Collector (MV) voltage, kilovolts.
    pub mv_voltage_kv: f64,
    /// Active power per grid transformer block, megawatts.
    pub hv_block_mw: f64,
    /// Efficiency / power-factor divisor converting the HV block's active
    /// power into apparent power.
    pub hv_efficiency: f64,
    /// Grid voltage, kilovolts.
    pub hv_voltage_kv: f64,
    /// Multiplier on the computed HV apparent power when recommending a
    /// purchase rating.
    pub rating_margin: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            modules_per_string: 25,
            strings_per_array: 336,
            module_power_w: 500.0,
            plant_target_mw: 1000.0,
            inverter_loading_ratio: 1.2,
            inverter_voltage_v: 630.0,
            inverter_power_factor: 1.0,
            lv_transformer_mva: 5.0,
            lv_voltage_v: 630.0,
            mv_voltage_kv: 33.0,
            hv_block_mw: 500.0,
            hv_efficiency: 0.98,
            hv_voltage_kv: 400.0,
            rating_margin: 1.3,
        }
    }
}

/// Results of the sizing chain, in the order they are derived.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantSizingReport {
    pub modules_per_array: u32,
    pub array_power_mw: f64,
    pub array_count: u32,
    pub inverter_ac_power_mw: f64,
    pub inverter_current_a: f64,
    pub lv_current_a: f64,
    pub mv_current_a: f64,
    pub hv_apparent_power_mva: f64,
    pub hv_current_a: f64,
    pub recommended_hv_rating_mva: f64,
}

/// Line current of a balanced three-phase circuit: `S / (sqrt(3) * V)`.
pub fn line_current(apparent_power_mva: f64, voltage_kv: f64) -> f64 {
    apparent_power_mva * 1e6 / (3.0_f64.sqrt() * voltage_kv * 1e3)
}

/// Apparent power of a transformer block carrying `p_mw` through an
/// efficiency divisor, and the recommended rating with margin applied:
/// `(s_mva, recommended_mva)`.
pub fn transformer_rating(p_mw: f64, efficiency: f64, margin: f64) -> (f64, f64) {
    let s = p_mw / efficiency;
    (s, s * margin)
}

fn round_half_up(x: f64) -> u32 {
    (x + 0.5).floor() as u32
}

/// Runs the full sizing chain.
pub fn size_plant(config: &PlantConfig) -> PlantSizingReport {
    let modules_per_array = config.modules_per_string * config.strings_per_array;
    let array_power_mw = modules_per_array as f64 * config.module_power_w / 1e6;
    let array_count = round_half_up(config.plant_target_mw / array_power_mw);
    let inverter_ac_power_mw = array_power_mw / config.inverter_loading_ratio;
    let inverter_current_a = array_power_mw * 1e6
        / (3.0_f64.sqrt() * config.inverter_voltage_v * config.inverter_power_factor);
    let lv_current_a = config.lv_transformer_mva * 1e6 / (3.0_f64.sqrt() * config.lv_voltage_v);
    let mv_current_a = line_current(config.lv_transformer_mva, config.mv_voltage_kv);
    let (hv_apparent_power_mva, recommended_hv_rating_mva) =
        transformer_rating(config.hv_block_mw, config.hv_efficiency, config.rating_margin);
    let hv_current_a = line_current(hv_apparent_power_mva, config.hv_voltage_kv);

    PlantSizingReport {
        modules_per_array,
        array_power_mw,
        array_count,
        inverter_ac_power_mw,
        inverter_current_a,
        lv_current_a,
        mv_current_a,
        hv_apparent_power_mva,
        hv_current_a,
        recommended_hv_rating_mva,
    }
}

impl fmt::Display for PlantSizingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<38} {:>12}", "modules per array", self.modules_per_array)?;
        writeln!(f, "{:<38} {:>12.3}", "array power (MW)", self.array_power_mw)?;
        writeln!(f, "{:<38} {:>12}", "array count", self.array_count)?;
        writeln!(f, "{:<38} {:>12.3}", "inverter AC power (MW)", self.inverter_ac_power_mw)?;
        writeln!(f, "{:<38} {:>12.1}", "inverter current (A)", self.inverter_current_a)?;
        writeln!(f, "{:<38} {:>12.1}", "LV transformer current (A)", self.lv_current_a)?;
        writeln!(f, "{:<38} {:>12.2}", "MV collector current (A)", self.mv_current_a)?;
        writeln!(f, "{:<38} {:>12.1}", "HV apparent power (MVA)", self.hv_apparent_power_mva)?;
        writeln!(f, "{:<38} {:>12.1}", "HV current (A)", self.hv_current_a)?;
        write!(f, "{:<38} {:>12.1}", "recommended HV rating (MVA)", self.recommended_hv_rating_mva)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn within(actual: f64, expected: f64, rel: f64) -> bool {
        (actual - expected).abs() <= rel * expected.abs()
    }

    #[test]
    fn default_chain_matches_published_study_values() {
        let r = size_plant(&PlantConfig::default());
        assert_eq!(r.modules_per_array, 8400);
        assert!(within(r.array_power_mw, 4.2, 1e-3));
        assert_eq!(r.array_count, 238);
        assert!(within(r.inverter_ac_power_mw, 3.5, 1e-3));
        assert!(within(r.inverter_current_a, 3850.0, 1e-3));
        assert!(within(r.lv_current_a, 4584.0, 1e-3));
        assert!(within(r.mv_current_a, 87.5, 1e-3));
        assert!(within(r.hv_apparent_power_mva, 510.2, 1e-3));
        assert!(within(r.hv_current_a, 736.0, 1e-3));
        assert!(within(r.recommended_hv_rating_mva, 663.3, 1e-3));
    }

    #[test]
    fn array_count_rounds_half_up() {
        assert_eq!(round_half_up(238.095), 238);
        assert_eq!(round_half_up(238.5), 239);
        assert_eq!(round_half_up(238.4999), 238);
        // Unit case: target exactly one array.
        let cfg = PlantConfig {
            plant_target_mw: 4.2,
            ..PlantConfig::default()
        };
        assert_eq!(size_plant(&cfg).array_count, 1);
    }

    #[test]
    fn line_current_inverts_exactly() {
        for (s, v) in [(5.0, 0.63), (5.0, 33.0), (510.204, 400.0), (1.0, 1.0)] {
            let i = line_current(s, v);
            let back = i * 3.0_f64.sqrt() * v * 1e3 / 1e6;
            assert!((back - s).abs() <= 1e-12 * s);
        }
    }

    #[test]
    fn unit_current_case() {
        // 1 MVA at 1 kV: I = 1e6 / (sqrt(3) * 1000) = 577.35 A.
        assert!((line_current(1.0, 1.0) - 577.350_269_189_625_8).abs() < 1e-9);
    }

    #[test]
    fn transformer_rating_is_linear_in_power() {
        let (s1, r1) = transformer_rating(500.0, 0.98, 1.3);
        let (s2, r2) = transformer_rating(1000.0, 0.98, 1.3);
        assert!((s2 - 2.0 * s1).abs() < 1e-9);
        assert!((r2 - 2.0 * r1).abs() < 1e-9);
        assert!((s1 - 510.204_081_632_653_03).abs() < 1e-9);
        assert!((r1 - s1 * 1.3).abs() < 1e-9);
    }

    #[test]
    fn array_count_covers_target_within_one_array() {
        for target in [100.0, 500.0, 999.9, 1000.0, 1234.5] {
            let cfg = PlantConfig {
                plant_target_mw: target,
                ..PlantConfig::default()
            };
            let r = size_plant(&cfg);
            let built = r.array_count as f64 * r.array_power_mw;
            assert!((built - target).abs() <= r.array_power_mw);
        }
    }

    #[test]
    fn currents_fall_as_voltage_rises() {
        let r = size_plant(&PlantConfig::default());
        assert!(r.lv_current_a > r.mv_current_a);
        assert!(r.hv_current_a < r.lv_current_a);
    }

    #[test]
    fn more_modules_never_shrink_array_power() {
        let base = size_plant(&PlantConfig::default());
        for extra in [1, 10, 100] {
            let cfg = PlantConfig {
                strings_per_array: 336 + extra,
                ..PlantConfig::default()
            };
            let r = size_plant(&cfg);
            assert!(r.array_power_mw >= base.array_power_mw);
            assert!(r.array_count <= base.array_count);
        }
    }
}

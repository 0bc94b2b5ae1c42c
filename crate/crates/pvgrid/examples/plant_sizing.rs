//! The sizing chain from module nameplate to grid-transformer rating.
//!
//! Starting from 500 W modules in 25-module strings, 336 strings per array,
//! the chain derives array power, how many arrays a 1 GW target needs, the
//! inverter AC rating behind a 1.2 DC/AC loading ratio, and the line
//! currents at each voltage level up to the 400 kV connection.

use pvgrid::sizing::{line_current, size_plant, transformer_rating, PlantConfig};

fn main() {
    let config = PlantConfig::default();
    let report = size_plant(&config);

    println!(
        "{} x {} W modules per string, {} strings per array:",
        config.modules_per_string, config.module_power_w, config.strings_per_array
    );
    println!("{report}");
    println!();

    // The same arithmetic piecewise, for scripting against parts of the
    // chain rather than the whole of it.
    let (s_block, recommended) =
        transformer_rating(config.hv_block_mw, config.hv_efficiency, config.rating_margin);
    println!(
        "grid block: {:.0} MW / {} = {:.1} MVA, x{} margin -> {:.1} MVA purchase rating",
        config.hv_block_mw, config.hv_efficiency, s_block, config.rating_margin, recommended
    );
    println!(
        "at {} kV that block carries {:.1} A per phase",
        config.hv_voltage_kv,
        line_current(s_block, config.hv_voltage_kv)
    );
    println!();

    // Heavier modules shrink the array count but leave the grid side alone.
    let denser = PlantConfig {
        module_power_w: 600.0,
        ..PlantConfig::default()
    };
    let alt = size_plant(&denser);
    println!(
        "with 600 W modules: {:.2} MW arrays, {} of them for the same {} MW target",
        alt.array_power_mw, alt.array_count, denser.plant_target_mw
    );
}

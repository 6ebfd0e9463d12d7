//! Prints the default configuration as TOML; used to regenerate
//! `configs/default.toml`.

fn main() {
    let cfg = heatgrid::SystemConfig::default();
    print!("{}", cfg.to_toml_string());
}

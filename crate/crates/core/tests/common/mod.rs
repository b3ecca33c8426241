pub mod checks;
pub mod instances;
pub mod oracles;

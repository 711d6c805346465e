pub mod evaluate;
pub mod forecast;
pub mod hexgrid;
pub mod ingest;
pub mod season;
pub mod stats;
pub mod synth;
pub mod transform;

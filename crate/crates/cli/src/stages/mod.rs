//! Pipeline stages. Each stage reads the artifacts of the previous one and
//! returns its own as in-memory values; writing them is left to the caller.

pub mod evaluate;
pub mod forecast;
pub mod ingest;
pub mod seasons;

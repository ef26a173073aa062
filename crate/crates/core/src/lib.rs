pub mod calendar;
pub mod disaggregate;
pub mod experiment;
pub mod forecast;
pub mod ingest;
pub mod lstm;
pub mod report;
pub mod scaling;
pub mod training;
pub mod windowing;

pub mod analyze;
pub mod report;
pub mod run;
pub mod screen;
pub mod simulate;
pub mod trace_read;
pub mod translate;

//! Page classification for scanned archive material: handcrafted image
//! features fed to a random forest.

pub mod dataset;
pub mod features;
pub mod pixelio;
pub mod preprocess;
pub mod forest;
pub mod report;
pub mod synth;

pub mod annotation;
pub mod features;
pub mod svd;
pub mod align;
pub mod synth;
pub mod pipeline;
pub mod config;

pub mod error;
pub mod linalg;
pub mod measurements;
pub mod rng;
pub mod thresholds;
pub mod model_search;
pub mod witness;
pub mod nondisturbance;

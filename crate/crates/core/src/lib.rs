pub mod alloc;
pub mod antenna;
pub mod channel;
pub mod error;
pub mod numerics;
pub mod scenario;
pub mod search;

pub use error::{Error, Result};

//! The assistant's self-dialogue: session state, notes and memory.

mod composer;
mod memory;
mod session;

pub use composer::*;
pub use memory::*;
pub use session::*;

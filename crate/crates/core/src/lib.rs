pub mod channel;
pub mod dataset;
pub mod error;
pub mod im_mapping;
pub mod io;
pub mod neural;
pub mod oracle;
pub mod training;
pub use error::{Error, ErrorKind, Result};

//! Reference computations used to validate `gmle-core` from the outside.

pub mod oracle;

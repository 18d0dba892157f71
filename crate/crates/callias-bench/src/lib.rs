//! Shared fixtures for the pipeline benchmarks.

use callias_core::model::{line_model, Bump, CalliasModel};

/// The standard crossing family on the truncated line.
pub fn crossing_model() -> CalliasModel {
    line_model(
        12.0,
        Bump {
            height: 1.0,
            width: 1.0,
            center: 0.0,
        },
        -1.0,
        1.0,
    )
}

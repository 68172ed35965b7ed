//! Bundled experiment recipes, one per figure panel.

use crate::{CliError, Result};

pub const RECIPES: &[(&str, &str)] = &[
    ("fig2a", include_str!("../recipes/fig2a.toml")),
    ("fig2b", include_str!("../recipes/fig2b.toml")),
    ("fig2c", include_str!("../recipes/fig2c.toml")),
    ("fig3", include_str!("../recipes/fig3.toml")),
    ("fig4a", include_str!("../recipes/fig4a.toml")),
    ("fig4b", include_str!("../recipes/fig4b.toml")),
    ("fig4c", include_str!("../recipes/fig4c.toml")),
    ("fig5a", include_str!("../recipes/fig5a.toml")),
    ("fig5b", include_str!("../recipes/fig5b.toml")),
    ("fig5c", include_str!("../recipes/fig5c.toml")),
];

pub fn recipe(name: &str) -> Result<&'static str> {
    RECIPES.iter().find(|(n, _)| *n == name).map(|(_, text)| *text).ok_or_else(|| {
        let names: Vec<&str> = RECIPES.iter().map(|(n, _)| *n).collect();
        CliError::Config(format!("unknown recipe {name:?} (available: {})", names.join(", ")))
    })
}

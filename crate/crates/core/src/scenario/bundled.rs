use super::{parse_scenario, Scenario};
use crate::error::{Error, Result};

/// `(name, JSON text)` of every scenario shipped with the crate.
pub const BUNDLED: &[(&str, &str)] = &[
    ("fig2", include_str!("../../scenarios/fig2.json")),
    ("fig2-scaled", include_str!("../../scenarios/fig2-scaled.json")),
    ("fig3", include_str!("../../scenarios/fig3.json")),
    ("fig3-scaled", include_str!("../../scenarios/fig3-scaled.json")),
    ("fig4", include_str!("../../scenarios/fig4.json")),
    ("fig4-scaled", include_str!("../../scenarios/fig4-scaled.json")),
    ("fig5", include_str!("../../scenarios/fig5.json")),
    ("fig5-scaled", include_str!("../../scenarios/fig5-scaled.json")),
    ("fig6", include_str!("../../scenarios/fig6.json")),
    ("fig6-scaled", include_str!("../../scenarios/fig6-scaled.json")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled(name: &str) -> Result<Scenario> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::InvalidArgument(format!("no bundled scenario `{name}`")))?;
    parse_scenario(text).map_err(|e| Error::Scenario {
        name: name.to_string(),
        source: Box::new(e),
    })
}

//! Prompts sent to models for chart-to-table translation.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numformat::{format_tick, TickFormat};
use crate::{BenchmarkItem, Error, Result};

pub const BASE_PROMPT: &str = "Generate underlying data table for the chart.";
pub const HINT_PREFIX: &str = " Hint: y-axis major ticks are ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptVariant {
    #[default]
    Plain,
    /// Appends the y-axis major tick values in scientific notation.
    #[serde(rename = "hint")]
    YAxisHint,
}

impl PromptVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Plain => "plain",
            PromptVariant::YAxisHint => "hint",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "plain" => Some(PromptVariant::Plain),
            "hint" | "yaxishint" | "y-axis-hint" => Some(PromptVariant::YAxisHint),
            _ => None,
        }
    }
}

pub fn build_prompt(item: &BenchmarkItem, variant: PromptVariant) -> Result<String> {
    match variant {
        PromptVariant::Plain => Ok(BASE_PROMPT.into()),
        PromptVariant::YAxisHint => hint_prompt(&item.axis.tick_values),
    }
}

/// The hint prompt for an explicit tick list.
pub fn hint_prompt(ticks: &[f64]) -> Result<String> {
    if ticks.is_empty() {
        return Err(Error::MissingAxis);
    }
    let listed: Vec<String> = ticks
        .iter()
        .map(|&v| format_tick(v, TickFormat::Scientific))
        .collect();
    let mut out = String::from(BASE_PROMPT);
    out.push_str(HINT_PREFIX);
    out.push_str(&listed.join(", "));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_manifest, GenConfig};
    use alloc::vec;

    #[test]
    fn plain_is_verbatim() {
        let m = generate_manifest(&GenConfig {
            parts: vec![crate::Part::A],
            digit_lengths: vec![1],
            entity_counts: vec![1],
            ..GenConfig::default()
        })
        .unwrap();
        let p = build_prompt(&m.items[0], PromptVariant::Plain).unwrap();
        assert_eq!(p, "Generate underlying data table for the chart.");
    }

    #[test]
    fn hint_lists_scientific_ticks() {
        let p = hint_prompt(&[0.0, 2.0, 4.0, 6.0, 8.0, 10.0]).unwrap();
        assert_eq!(
            p,
            "Generate underlying data table for the chart. Hint: y-axis major ticks are \
             0.00e+0, 2.00e+0, 4.00e+0, 6.00e+0, 8.00e+0, 1.00e+1"
        );
    }

    #[test]
    fn hint_without_axis_fails() {
        let mut item = generate_manifest(&GenConfig {
            parts: vec![crate::Part::A],
            digit_lengths: vec![1],
            entity_counts: vec![1],
            ..GenConfig::default()
        })
        .unwrap()
        .items
        .remove(0);
        item.axis.tick_values.clear();
        assert_eq!(build_prompt(&item, PromptVariant::YAxisHint), Err(Error::MissingAxis));
        assert!(build_prompt(&item, PromptVariant::Plain).is_ok());
    }
}

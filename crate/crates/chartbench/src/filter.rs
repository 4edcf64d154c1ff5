//! Item selection from `key=value` lists such as `part=A,digit_length=0..2`.
//!
//! Keys: `part`, `digit_length`, `entity_count`, `chart_type`, `condition`.
//! A value may list alternatives with `|` (`part=B|C`); numeric keys also
//! take inclusive ranges (`0..16`).

use std::ops::RangeInclusive;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use chartbench_core::{BenchmarkItem, ChartType, Condition, Part};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ItemFilter {
    parts: Option<Vec<Part>>,
    digit_lengths: Option<Vec<RangeInclusive<u8>>>,
    entity_counts: Option<Vec<RangeInclusive<u8>>>,
    charts: Option<Vec<ChartType>>,
    conditions: Option<Vec<Condition>>,
}

impl ItemFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn with_parts(mut self, parts: Vec<Part>) -> Self {
        self.parts = Some(parts);
        self
    }

    pub fn with_digit_lengths(mut self, range: RangeInclusive<u8>) -> Self {
        self.digit_lengths = Some(vec![range]);
        self
    }

    pub fn matches(&self, item: &BenchmarkItem) -> bool {
        let has = |set: &Option<Vec<RangeInclusive<u8>>>, v: u8| set.as_ref().is_none_or(|rs| rs.iter().any(|r| r.contains(&v)));
        self.parts.as_ref().is_none_or(|p| p.contains(&item.part))
            && has(&self.digit_lengths, item.digit_length)
            && has(&self.entity_counts, item.entity_count)
            && self.charts.as_ref().is_none_or(|c| c.contains(&item.chart_type))
            && self.conditions.as_ref().is_none_or(|c| c.contains(&item.condition))
    }
}

pub fn parse_part(s: &str) -> Result<Part> {
    Part::ALL
        .into_iter()
        .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
        .ok_or_else(|| anyhow!("unknown part {s:?} (expected A, B, C or D)"))
}

/// `A,B` or `A|B`.
pub fn parse_parts(s: &str) -> Result<Vec<Part>> {
    s.split([',', '|']).filter(|p| !p.trim().is_empty()).map(parse_part).collect()
}

fn parse_ranges(s: &str) -> Result<Vec<RangeInclusive<u8>>> {
    s.split('|')
        .map(|alt| {
            let alt = alt.trim();
            match alt.split_once("..") {
                Some((lo, hi)) => {
                    let (lo, hi): (u8, u8) = (lo.trim().parse()?, hi.trim_start_matches('=').trim().parse()?);
                    if lo > hi {
                        bail!("empty range {alt:?}");
                    }
                    Ok(lo..=hi)
                }
                None => {
                    let v: u8 = alt.parse()?;
                    Ok(v..=v)
                }
            }
        })
        .collect()
}

impl FromStr for ItemFilter {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut f = ItemFilter::default();
        for clause in s.split(',').map(str::trim).filter(|c| !c.is_empty()) {
            let (key, value) = clause
                .split_once('=')
                .ok_or_else(|| anyhow!("filter clause {clause:?} is not key=value"))?;
            let alts = || value.split('|').map(str::trim);
            match key.trim() {
                "part" => f.parts = Some(alts().map(parse_part).collect::<Result<_>>()?),
                "digit_length" | "dl" => f.digit_lengths = Some(parse_ranges(value)?),
                "entity_count" | "entities" => f.entity_counts = Some(parse_ranges(value)?),
                "chart_type" | "chart" => {
                    f.charts = Some(
                        alts()
                            .map(|v| {
                                ChartType::ALL
                                    .into_iter()
                                    .find(|c| c.as_str().eq_ignore_ascii_case(v))
                                    .ok_or_else(|| anyhow!("unknown chart type {v:?}"))
                            })
                            .collect::<Result<_>>()?,
                    )
                }
                "condition" => {
                    f.conditions = Some(
                        alts()
                            .map(|v| Condition::parse(v).ok_or_else(|| anyhow!("unknown condition {v:?}")))
                            .collect::<Result<_>>()?,
                    )
                }
                other => bail!("unknown filter key {other:?}"),
            }
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chartbench_core::generate::{generate_manifest, GenConfig};

    #[test]
    fn selects_by_part_and_digit_range() {
        let m = generate_manifest(&GenConfig::default()).unwrap();
        let f: ItemFilter = "part=A,digit_length=0..2".parse().unwrap();
        assert_eq!(m.items.iter().filter(|i| f.matches(i)).count(), 540);
        let f: ItemFilter = "part=B|C,chart=bar,condition=ticks3|neg".parse().unwrap();
        assert_eq!(m.items.iter().filter(|i| f.matches(i)).count(), 340);
        assert_eq!(m.items.iter().filter(|i| ItemFilter::all().matches(i)).count(), 7140);
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["part", "part=E", "color=red", "digit_length=3..1", "dl=x"] {
            assert!(bad.parse::<ItemFilter>().is_err(), "{bad}");
        }
        assert_eq!(parse_parts("A,c").unwrap(), vec![Part::A, Part::C]);
    }
}

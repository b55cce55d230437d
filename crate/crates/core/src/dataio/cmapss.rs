//! Whitespace-separated C-MAPSS text: `unit cycle setting.. sensor..`, one
//! cycle per line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CycleRecord, Fleet, UnitRun};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CmapssLayout {
    pub n_settings: usize,
    pub n_sensors: usize,
}

impl Default for CmapssLayout {
    fn default() -> Self {
        CmapssLayout {
            n_settings: 3,
            n_sensors: 21,
        }
    }
}

impl CmapssLayout {
    pub fn width(&self) -> usize {
        2 + self.n_settings + self.n_sensors
    }
}

pub fn load_cmapss(path: impl AsRef<Path>) -> Result<Fleet> {
    load_cmapss_with(path, CmapssLayout::default())
}

pub fn load_cmapss_with(path: impl AsRef<Path>, layout: CmapssLayout) -> Result<Fleet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cmapss(&text, layout)
}

pub fn parse_cmapss(text: &str, layout: CmapssLayout) -> Result<Fleet> {
    let mut by_unit: BTreeMap<u32, Vec<CycleRecord>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != layout.width() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, found {}", layout.width(), fields.len()),
            });
        }
        let number = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("`{s}` is not a number"),
            })
        };
        let integer = |s: &str| -> Result<u32> {
            let v = number(s)?;
            if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("`{s}` is not a non-negative integer"),
                });
            }
            Ok(v as u32)
        };
        let unit = integer(fields[0])?;
        let cycle = integer(fields[1])?;
        let values = fields[2..]
            .iter()
            .map(|s| number(s))
            .collect::<Result<Vec<f64>>>()?;
        let (op, sensors) = values.split_at(layout.n_settings);
        by_unit.entry(unit).or_default().push(CycleRecord {
            cycle,
            op_settings: op.to_vec(),
            sensors: sensors.to_vec(),
            health: None,
            rul_truth: None,
            phase: None,
        });
    }

    let mut units = Vec::with_capacity(by_unit.len());
    for (unit_id, mut cycles) in by_unit {
        cycles.sort_by_key(|c| c.cycle);
        let run = UnitRun { unit_id, cycles };
        run.validate()?;
        units.push(run);
    }
    Ok(Fleet::new(units, layout.n_settings, layout.n_sensors))
}

/// Serialises a fleet in the C-MAPSS layout. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_cmapss(fleet: &Fleet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_cmapss(fleet)).map_err(|e| Error::io(path, e))
}

pub(crate) fn format_cmapss(fleet: &Fleet) -> String {
    let mut out = String::new();
    for u in &fleet.units {
        for c in &u.cycles {
            write!(out, "{} {}", u.unit_id, c.cycle).unwrap();
            for v in c.op_settings.iter().chain(&c.sensors) {
                write!(out, " {v:?}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

const TRUTH_HEADER: &str = "unit,cycle,phase,health,rul";

/// Writes the ground-truth sidecar (`unit,cycle,phase,health,rul`); missing
/// annotations are left empty.
pub fn write_truth(fleet: &Fleet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from(TRUTH_HEADER);
    out.push('\n');
    let opt = |v: Option<String>| v.unwrap_or_default();
    for u in &fleet.units {
        for c in &u.cycles {
            writeln!(
                out,
                "{},{},{},{},{}",
                u.unit_id,
                c.cycle,
                opt(c.phase.map(|p| p.to_string())),
                opt(c.health.map(|h| format!("{h:?}"))),
                opt(c.rul_truth.map(|r| r.to_string())),
            )
            .unwrap();
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Merges a truth sidecar into `fleet`. Rows for unknown unit/cycle pairs are
/// an integrity error.
pub fn load_truth(fleet: &mut Fleet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        if line_no == 1 && line.trim() == TRUTH_HEADER || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 5 fields, found {}", f.len()),
            });
        }
        let bad = |what: &str| Error::Parse {
            line: line_no,
            message: format!("invalid {what}"),
        };
        let unit: u32 = f[0].parse().map_err(|_| bad("unit"))?;
        let cycle: usize = f[1].parse().map_err(|_| bad("cycle"))?;
        let run = fleet
            .units
            .iter_mut()
            .find(|u| u.unit_id == unit)
            .ok_or(Error::Integrity {
                unit,
                message: "truth row for a unit not in the fleet".into(),
            })?;
        let rec = cycle
            .checked_sub(1)
            .and_then(|i| run.cycles.get_mut(i))
            .ok_or(Error::Integrity {
                unit,
                message: format!("truth row for missing cycle {cycle}"),
            })?;
        if !f[2].is_empty() {
            rec.phase = Some(f[2].parse().map_err(|_| bad("phase"))?);
        }
        if !f[3].is_empty() {
            rec.health = Some(f[3].parse().map_err(|_| bad("health"))?);
        }
        if !f[4].is_empty() {
            rec.rul_truth = Some(f[4].parse().map_err(|_| bad("rul"))?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(unit: u32, cycle: u32, base: f64) -> String {
        let mut s = format!("{unit} {cycle}");
        for k in 0..24 {
            write!(s, " {}", base + k as f64 * 0.5).unwrap();
        }
        s
    }

    #[test]
    fn parses_units_in_cycle_order() {
        let text = [line(1, 1, 0.0), line(2, 1, 3.0), line(1, 2, 1.0)].join("\n");
        let fleet = parse_cmapss(&text, CmapssLayout::default()).unwrap();
        assert_eq!(fleet.len(), 2);
        assert_eq!(fleet.lifetimes(), vec![2, 1]);
        assert_eq!(fleet.n_settings(), 3);
        assert_eq!(fleet.n_sensors(), 21);
        assert_eq!(fleet.units[0].cycles[1].sensors[0], 1.0 + 1.5);
        assert_eq!(fleet.feature_names.len(), 24);
    }

    #[test]
    fn empty_file_is_empty_fleet() {
        let fleet = parse_cmapss("", CmapssLayout::default()).unwrap();
        assert!(fleet.is_empty());
    }

    #[test]
    fn short_line_reports_its_number() {
        let text = format!("{}\n1 2 3 4 5 6 7 8 9 10\n", line(1, 1, 0.0));
        match parse_cmapss(&text, CmapssLayout::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gap_in_cycles_names_the_unit() {
        let text = [line(4, 1, 0.0), line(4, 3, 0.0)].join("\n");
        match parse_cmapss(&text, CmapssLayout::default()) {
            Err(Error::Integrity { unit, .. }) => assert_eq!(unit, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_is_a_parse_error() {
        let text = line(1, 1, 0.0).replace(" 1.5 ", " abc ");
        assert!(matches!(
            parse_cmapss(&text, CmapssLayout::default()),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}

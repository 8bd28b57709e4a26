//! Plain-text event files.
//!
//! ```text
//! #streaklab-events 1
//! #window_ns=1000
//! #y_range_mm=15
//! ...
//! 12.3456<TAB>7.8901
//! ```
//!
//! Readers accept any minor revision of major version 1 and ignore unknown
//! metadata keys. `n_events`, when present, is used to detect truncation.

use std::io::{BufRead, Write};

use super::{Event, Grid, Interferogram};
use crate::error::{Error, Result};
use crate::physics::Orientation;

pub const MAGIC: &str = "#streaklab-events";
pub const MAJOR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EventFile {
    pub grid: Grid,
    pub orientation: Orientation,
    pub shot_index: u64,
    pub seed: u64,
    pub events: Vec<Event>,
}

impl EventFile {
    pub fn into_interferogram(self) -> Interferogram {
        let mut ig = Interferogram::from_events(self.events, self.grid, self.orientation);
        ig.shot_index = self.shot_index;
        ig.seed = self.seed;
        ig
    }
}

pub fn write_events<W: Write>(mut out: W, ig: &Interferogram) -> std::io::Result<()> {
    let g = ig.grid();
    writeln!(out, "{MAGIC} {MAJOR_VERSION}")?;
    writeln!(out, "#window_ns={}", g.window_ns)?;
    writeln!(out, "#y_range_mm={}", g.y_range_mm)?;
    writeln!(out, "#t_bins={}", g.t_bins)?;
    writeln!(out, "#y_bins={}", g.y_bins)?;
    writeln!(out, "#orientation={}", ig.orientation.as_str())?;
    writeln!(out, "#shot_index={}", ig.shot_index)?;
    writeln!(out, "#seed={}", ig.seed)?;
    writeln!(out, "#n_events={}", ig.events.len())?;
    for e in &ig.events {
        writeln!(out, "{:.4}\t{:.4}", e.t_ns, e.y_mm)?;
    }
    out.flush()
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

pub fn read_events<R: BufRead>(input: R) -> Result<EventFile> {
    let mut lines = input.lines();
    let io_err = |e: std::io::Error, line: usize| parse_err(line, format!("read failed: {e}"));

    let header = match lines.next() {
        Some(l) => l.map_err(|e| io_err(e, 1))?,
        None => return Err(parse_err(1, "empty file")),
    };
    let version =
        header.strip_prefix(MAGIC).map(str::trim).ok_or_else(|| parse_err(1, format!("missing `{MAGIC}` header")))?;
    let major: u32 = version
        .split('.')
        .next()
        .and_then(|m| m.parse().ok())
        .ok_or_else(|| parse_err(1, format!("bad version `{version}`")))?;
    if major != MAJOR_VERSION {
        return Err(parse_err(
            1,
            format!("unsupported event file version {version} (reader handles {MAJOR_VERSION}.x)"),
        ));
    }

    let mut window = None;
    let mut y_range = None;
    let mut t_bins = None;
    let mut y_bins = None;
    let mut orientation = Orientation::default();
    let mut shot_index = 0;
    let mut seed = 0;
    let mut declared = None;
    let mut events = Vec::new();
    let mut last_line = 1;

    for (i, line) in lines.enumerate() {
        let n = i + 2;
        last_line = n;
        let line = line.map_err(|e| io_err(e, n))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if !events.is_empty() {
                return Err(parse_err(n, "metadata after event records"));
            }
            let Some((key, value)) = meta.split_once('=') else {
                continue;
            };
            let bad = |what: &str| parse_err(n, format!("bad value for `{key}`: {what}"));
            match key.trim() {
                "window_ns" => window = Some(value.trim().parse::<f64>().map_err(|_| bad(value))?),
                "y_range_mm" => y_range = Some(value.trim().parse::<f64>().map_err(|_| bad(value))?),
                "t_bins" => t_bins = Some(value.trim().parse::<usize>().map_err(|_| bad(value))?),
                "y_bins" => y_bins = Some(value.trim().parse::<usize>().map_err(|_| bad(value))?),
                "orientation" => orientation = Orientation::parse(value.trim()).ok_or_else(|| bad(value))?,
                "shot_index" => shot_index = value.trim().parse().map_err(|_| bad(value))?,
                "seed" => seed = value.trim().parse().map_err(|_| bad(value))?,
                "n_events" => declared = Some(value.trim().parse::<usize>().map_err(|_| bad(value))?),
                _ => {}
            }
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(t), Some(y), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(parse_err(n, format!("expected `t_ns<TAB>y_mm`, got `{line}`")));
        };
        let t: f64 = t.trim().parse().map_err(|_| parse_err(n, format!("bad time `{t}`")))?;
        let y: f64 = y.trim().parse().map_err(|_| parse_err(n, format!("bad position `{y}`")))?;
        if !(t.is_finite() && y.is_finite()) {
            return Err(parse_err(n, "non-finite coordinate"));
        }
        events.push(Event { t_ns: t, y_mm: y });
    }

    let missing = |k: &str| parse_err(last_line, format!("missing metadata `{k}`"));
    let window = window.ok_or_else(|| missing("window_ns"))?;
    let y_range = y_range.ok_or_else(|| missing("y_range_mm"))?;
    let t_bins = t_bins.ok_or_else(|| missing("t_bins"))?;
    let y_bins = y_bins.ok_or_else(|| missing("y_bins"))?;
    if !(window > 0.0 && y_range > 0.0 && t_bins > 0 && y_bins > 0) {
        return Err(parse_err(last_line, "window and bin counts must be positive"));
    }
    if let Some(expected) = declared {
        if expected != events.len() {
            return Err(parse_err(
                last_line + 1,
                format!("truncated file: header declares {expected} events, found {}", events.len()),
            ));
        }
    }
    let grid = Grid::new(window, y_range, t_bins, y_bins);
    if let Some(bad) = events.iter().position(|e| !grid.contains(e.t_ns, e.y_mm)) {
        return Err(Error::Parse { line: 0, message: format!("event {} lies outside the detector window", bad + 1) });
    }
    Ok(EventFile { grid, orientation, shot_index, seed, events })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Interferogram {
        let events = vec![Event { t_ns: 1.23456, y_mm: 7.0 }, Event { t_ns: 999.0, y_mm: 0.5 }];
        let mut ig = Interferogram::from_events(events, Grid::new(1000.0, 15.0, 294, 214), Orientation::ChebPositive);
        ig.shot_index = 4;
        ig.seed = 99;
        ig
    }

    fn written() -> String {
        let mut buf = Vec::new();
        write_events(&mut buf, &sample()).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn roundtrip_at_four_decimals() {
        let text = written();
        assert!(text.starts_with("#streaklab-events 1\n"));
        assert!(text.contains("1.2346\t7.0000\n"));
        let f = read_events(text.as_bytes()).unwrap();
        assert_eq!(f.orientation, Orientation::ChebPositive);
        assert_eq!((f.shot_index, f.seed, f.events.len()), (4, 99, 2));
        assert_eq!(f.grid, sample().grid());
        assert_eq!(f.events[0], Event { t_ns: 1.2346, y_mm: 7.0 });
    }

    #[test]
    fn truncated_file_is_detected() {
        let text = written();
        let cut = &text[..text.trim_end().rfind('\n').unwrap() + 1];
        match read_events(cut.as_bytes()) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("truncated")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = written().replace("999.0000\t0.5000", "999.0000 0.5000");
        match read_events(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn future_major_version_rejected() {
        let text = written().replacen("#streaklab-events 1", "#streaklab-events 2", 1);
        assert!(matches!(read_events(text.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let minor = written().replacen("#streaklab-events 1", "#streaklab-events 1.3", 1);
        assert!(read_events(minor.as_bytes()).is_ok());
        assert!(read_events("hello\n".as_bytes()).is_err());
        assert!(read_events("".as_bytes()).is_err());
    }

    #[test]
    fn unknown_metadata_ignored() {
        let text = written().replacen("#seed=99\n", "#seed=99\n#operator=someone\n", 1);
        assert!(read_events(text.as_bytes()).is_ok());
    }
}

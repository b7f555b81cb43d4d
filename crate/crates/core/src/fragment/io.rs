use std::io::Write;

use super::{SeriesRow, SimEvent};
use crate::error::Result;

/// One JSON object per line, keys in declaration order.
pub fn write_events<W: Write>(mut w: W, events: &[SimEvent]) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn events_to_string(events: &[SimEvent]) -> String {
    let mut buf = Vec::new();
    write_events(&mut buf, events).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn write_series<W: Write>(mut w: W, rows: &[SeriesRow]) -> Result<()> {
    writeln!(w, "k,volume,n_components,n_events")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.k, r.volume, r.n_components, r.n_events)?;
    }
    Ok(())
}

pub fn series_to_string(rows: &[SeriesRow]) -> String {
    let mut buf = Vec::new();
    write_series(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

//! Schedule XML dialect, version 1.
//!
//! ```text
//! <schedule version="1" n="27" nsteps="3" mode="link" chunks="4"
//!           chunkbytes="256" shardbytes="1024" replication="1">
//!   <step t="0">
//!     <send src="0" dst="1" s="0" d="2" c0="0" c1="4"/>
//!   </step>
//! </schedule>
//! ```
//!
//! Path-mode schedules hold `<route s= d= id= c0= c1=/>` elements directly
//! under `<schedule>`; `id` indexes the commodity's paths in the route table.
//! Steps are 0-based; chunk ranges are half-open.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{ChunkRange, ChunkedSchedule, Instruction, ScheduleMode};
use crate::error::{Error, Result};

pub fn emit_schedule_xml(sched: &ChunkedSchedule) -> String {
    let mode = match sched.mode {
        ScheduleMode::Link => "link",
        ScheduleMode::Path => "path",
    };
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<schedule version=\"1\" n=\"{}\" nsteps=\"{}\" mode=\"{mode}\" chunks=\"{}\" chunkbytes=\"{}\" shardbytes=\"{}\" replication=\"{}\">",
        sched.n, sched.nsteps, sched.chunks, sched.chunk_bytes, sched.shard_bytes, sched.replication
    );
    let mut ins = sched.instructions.clone();
    ins.sort();
    let mut open: Option<usize> = None;
    for i in &ins {
        match *i {
            Instruction::Send { step, src, dst, chunks: c } => {
                if open != Some(step) {
                    if open.is_some() {
                        out.push_str("  </step>\n");
                    }
                    let _ = writeln!(out, "  <step t=\"{step}\">");
                    open = Some(step);
                }
                let _ = writeln!(
                    out,
                    "    <send src=\"{src}\" dst=\"{dst}\" s=\"{}\" d=\"{}\" c0=\"{}\" c1=\"{}\"/>",
                    c.s, c.d, c.c0, c.c1
                );
            }
            Instruction::Route { route, chunks: c } => {
                let _ = writeln!(out, "  <route s=\"{}\" d=\"{}\" id=\"{route}\" c0=\"{}\" c1=\"{}\"/>", c.s, c.d, c.c0, c.c1);
            }
        }
    }
    if open.is_some() {
        out.push_str("  </step>\n");
    }
    out.push_str("</schedule>\n");
    out
}

struct Attrs {
    map: HashMap<String, String>,
    tag: String,
    line: usize,
}

impl Attrs {
    fn read(e: &BytesStart, line: usize) -> Result<Self> {
        let tag = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let mut map = HashMap::new();
        for a in e.attributes() {
            let a = a.map_err(|err| Error::Parse(format!("line {line}: <{tag}>: {err}")))?;
            let v = a.unescape_value().map_err(|err| Error::Parse(format!("line {line}: <{tag}>: {err}")))?;
            map.insert(String::from_utf8_lossy(a.key.as_ref()).into_owned(), v.into_owned());
        }
        Ok(Attrs { map, tag, line })
    }

    fn str(&self, key: &str) -> Result<&str> {
        self.map
            .get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::Parse(format!("line {}: <{}> lacks attribute {key}", self.line, self.tag)))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let s = self.str(key)?;
        s.parse()
            .map_err(|_| Error::Parse(format!("line {}: <{}> attribute {key}=\"{s}\" is not a valid number", self.line, self.tag)))
    }

    fn range(&self) -> Result<ChunkRange> {
        Ok(ChunkRange { s: self.num("s")?, d: self.num("d")?, c0: self.num("c0")?, c1: self.num("c1")? })
    }
}

/// Parses and validates a schedule; errors name the offending line.
pub fn parse_schedule_xml(text: &str) -> Result<ChunkedSchedule> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let line_at = |pos: usize| text.as_bytes()[..pos.min(text.len())].iter().filter(|&&b| b == b'\n').count() + 1;
    let mut sched: Option<ChunkedSchedule> = None;
    let mut step: Option<(usize, usize)> = None;
    let mut closed = false;
    loop {
        let pos = reader.buffer_position() as usize;
        let ev = reader.read_event().map_err(|e| Error::Parse(format!("line {}: {e}", line_at(pos))))?;
        // the end of the event is on the line of its closing `>`
        let line = line_at((reader.buffer_position() as usize).saturating_sub(1));
        let (e, empty) = match ev {
            Event::Eof => break,
            Event::Start(e) => (e, false),
            Event::Empty(e) => (e, true),
            Event::End(e) => {
                match e.name().as_ref() {
                    b"step" => step = None,
                    b"schedule" => closed = true,
                    _ => {}
                }
                continue;
            }
            Event::Text(t) => {
                return Err(Error::Parse(format!("line {line}: unexpected text {:?}", String::from_utf8_lossy(&t))));
            }
            _ => continue,
        };
        let a = Attrs::read(&e, line)?;
        match (a.tag.as_str(), sched.as_mut()) {
            ("schedule", None) => {
                let version: u32 = a.num("version")?;
                if version != 1 {
                    return Err(Error::Parse(format!("line {line}: unsupported schedule version {version}")));
                }
                let mode = match a.str("mode")? {
                    "link" => ScheduleMode::Link,
                    "path" => ScheduleMode::Path,
                    m => return Err(Error::Parse(format!("line {line}: mode must be link or path, got {m}"))),
                };
                sched = Some(ChunkedSchedule {
                    n: a.num("n")?,
                    nsteps: a.num("nsteps")?,
                    mode,
                    chunks: a.num("chunks")?,
                    shard_bytes: a.num("shardbytes")?,
                    chunk_bytes: a.num("chunkbytes")?,
                    replication: a.num("replication")?,
                    instructions: Vec::new(),
                });
            }
            ("step", Some(s)) if step.is_none() => {
                let t: usize = a.num("t")?;
                if t >= s.nsteps {
                    return Err(Error::Parse(format!("line {line}: step {t} >= nsteps {}", s.nsteps)));
                }
                if !empty {
                    step = Some((t, line));
                }
            }
            ("send", Some(s)) => {
                let Some((t, _)) = step else {
                    return Err(Error::Parse(format!("line {line}: <send> outside <step>")));
                };
                s.instructions.push(Instruction::Send { step: t, src: a.num("src")?, dst: a.num("dst")?, chunks: a.range()? });
            }
            ("route", Some(s)) if step.is_none() => {
                s.instructions.push(Instruction::Route { route: a.num("id")?, chunks: a.range()? });
            }
            (tag, _) => return Err(Error::Parse(format!("line {line}: unexpected <{tag}>"))),
        }
        if closed {
            return Err(Error::Parse(format!("line {line}: content after </schedule>")));
        }
    }
    let mut sched = sched.ok_or_else(|| Error::Parse("no <schedule> element".into()))?;
    if !closed {
        return Err(Error::Parse("unterminated <schedule>".into()));
    }
    sched.instructions.sort();
    sched.validate().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(sched)
}

pub fn write_schedule_xml(sched: &ChunkedSchedule, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, emit_schedule_xml(sched))?;
    Ok(())
}

pub fn read_schedule_xml(path: impl AsRef<Path>) -> Result<ChunkedSchedule> {
    parse_schedule_xml(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ChunkedSchedule {
        let mut s = ChunkedSchedule::new(3, 2, ScheduleMode::Link, 2, 100);
        let c = ChunkRange { s: 0, d: 2, c0: 0, c1: 2 };
        s.instructions.push(Instruction::Send { step: 0, src: 0, dst: 1, chunks: c });
        s.instructions.push(Instruction::Send { step: 1, src: 1, dst: 2, chunks: c });
        s
    }

    #[test]
    fn round_trip() {
        let s = sample();
        assert_eq!(parse_schedule_xml(&emit_schedule_xml(&s)).unwrap(), s);
        let mut p = ChunkedSchedule::new(3, 1, ScheduleMode::Path, 4, 100);
        p.instructions.push(Instruction::Route { route: 1, chunks: ChunkRange { s: 2, d: 0, c0: 1, c1: 4 } });
        assert_eq!(parse_schedule_xml(&emit_schedule_xml(&p)).unwrap(), p);
    }

    #[test]
    fn missing_nsteps_is_reported() {
        let text = emit_schedule_xml(&sample()).replace(" nsteps=\"2\"", "");
        let err = parse_schedule_xml(&text).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("nsteps"), "{err}");
    }

    #[test]
    fn step_out_of_range_is_reported() {
        let text = emit_schedule_xml(&sample()).replace("<step t=\"1\">", "<step t=\"2\">");
        let err = parse_schedule_xml(&text).unwrap_err().to_string();
        assert!(err.contains("line 6") && err.contains("nsteps"), "{err}");
    }

    #[test]
    fn bad_chunk_range_is_rejected() {
        let text = emit_schedule_xml(&sample()).replacen("c1=\"2\"", "c1=\"3\"", 1);
        assert!(parse_schedule_xml(&text).is_err());
    }
}

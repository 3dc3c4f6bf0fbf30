//! Plain-text interchange format: a `W H` header line followed by one
//! `x y t p` record per line, `p` being `1` or `-1`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Event, EventStream, Polarity};
use crate::error::{Error, Result};

pub fn read_portable(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_portable_from(BufReader::new(f))
}

pub fn read_portable_from<R: BufRead>(reader: R) -> Result<EventStream> {
    let mut lines = reader.lines().enumerate();
    let (width, height) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::Parse {
                line: 1,
                msg: "missing `W H` header".into(),
            });
        };
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let f = fields::<2>(&line, i + 1)?;
        let w = parse_num::<u16>(f[0], i + 1, "width")?;
        let h = parse_num::<u16>(f[1], i + 1, "height")?;
        break (w, h);
    };

    let mut events = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let f = fields::<4>(&line, lineno)?;
        let x = parse_num::<u16>(f[0], lineno, "x")?;
        let y = parse_num::<u16>(f[1], lineno, "y")?;
        let t = parse_num::<i64>(f[2], lineno, "t")?;
        if t < 0 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("negative timestamp {t}"),
            });
        }
        let p = parse_num::<i64>(f[3], lineno, "p")?;
        let p = Polarity::from_sign(p).ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("polarity must be 1 or -1, got {p}"),
        })?;
        if x >= width || y >= height {
            return Err(Error::OutOfRange(format!(
                "line {lineno}: ({x}, {y}) outside {width}x{height} sensor"
            )));
        }
        events.push(Event::new(x, y, t as u64, p));
    }
    EventStream::new(width, height, events)
}

pub fn write_portable(stream: &EventStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_portable_to(stream, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_portable_to<W: Write>(stream: &EventStream, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{} {}", stream.width(), stream.height())?;
    for e in stream.events() {
        writeln!(w, "{} {} {} {}", e.x, e.y, e.t, e.p.sign())?;
    }
    Ok(())
}

fn fields<const N: usize>(line: &str, lineno: usize) -> Result<[&str; N]> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    parts.try_into().map_err(|p: Vec<&str>| Error::Parse {
        line: lineno,
        msg: format!("expected {N} fields, found {}", p.len()),
    })
}

fn parse_num<T: std::str::FromStr>(s: &str, lineno: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line: lineno,
        msg: format!("invalid {what} `{s}`"),
    })
}

//! Binary graph container.
//!
//! All integers and floats little-endian:
//!
//! ```text
//! magic  b"EVGRAPH\0"
//! u32    version (1)
//! u16    sensor width, u16 sensor height
//! u64    node count N, u32 feature dim C, u64 edge count E
//! N x 3  f64 node (x, y, t)
//! N x C  f64 features
//! E x 2  u32 edge (src, dst)
//! E x 2  f64 pseudo-coordinates
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::EventGraph;
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: &[u8; 8] = b"EVGRAPH\0";
pub const GRAPH_VERSION: u32 = 1;

pub fn write_graph(g: &EventGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_graph_to(g, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_graph_to<W: Write>(g: &EventGraph, w: &mut W) -> std::io::Result<()> {
    w.write_all(GRAPH_MAGIC)?;
    w.write_all(&GRAPH_VERSION.to_le_bytes())?;
    w.write_all(&g.width().to_le_bytes())?;
    w.write_all(&g.height().to_le_bytes())?;
    w.write_all(&(g.num_nodes() as u64).to_le_bytes())?;
    w.write_all(&(g.feature_dim() as u32).to_le_bytes())?;
    w.write_all(&(g.num_edges() as u64).to_le_bytes())?;
    for v in g.nodes().iter().flatten().chain(g.features()) {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in g.edges().iter().flatten() {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in g.pseudo().iter().flatten() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<EventGraph> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_graph_from(&mut BufReader::new(f))
}

struct Cursor<'a, R>(&'a mut R);

impl<R: Read> Cursor<'_, R> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::Malformed(format!("truncated graph container: {e}")))?;
        Ok(b)
    }
    fn u16(&mut self) -> Result<u16> {
        self.take().map(u16::from_le_bytes)
    }
    fn u32(&mut self) -> Result<u32> {
        self.take().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> Result<u64> {
        self.take().map(u64::from_le_bytes)
    }
    fn f64(&mut self) -> Result<f64> {
        self.take().map(f64::from_le_bytes)
    }
}

pub fn read_graph_from<R: Read>(r: &mut R) -> Result<EventGraph> {
    let mut c = Cursor(r);
    if &c.take::<8>()? != GRAPH_MAGIC {
        return Err(Error::Malformed("not a graph container (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != GRAPH_VERSION {
        return Err(Error::Malformed(format!("unsupported graph container version {version}")));
    }
    let (width, height) = (c.u16()?, c.u16()?);
    let n = c.u64()? as usize;
    let dim = c.u32()? as usize;
    let e = c.u64()? as usize;
    let pos = (0..n)
        .map(|_| Ok([c.f64()?, c.f64()?, c.f64()?]))
        .collect::<Result<Vec<_>>>()?;
    let features = (0..n * dim).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let edges = (0..e)
        .map(|_| Ok([c.u32()?, c.u32()?]))
        .collect::<Result<Vec<_>>>()?;
    let pseudo = (0..e)
        .map(|_| Ok([c.f64()?, c.f64()?]))
        .collect::<Result<Vec<_>>>()?;
    let g = EventGraph::from_parts(width, height, pos, features, dim, edges)?;
    if g.pseudo() != pseudo.as_slice() {
        return Err(Error::Malformed(
            "stored pseudo-coordinates disagree with node positions".into(),
        ));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{Event, EventStream, Polarity};
    use crate::graph::{build_radius_graph, GraphConfig};

    #[test]
    fn round_trip_and_bad_magic() {
        let ev = (0..20u16)
            .map(|i| Event::new(i % 7, i % 5, u64::from(i) * 50, Polarity::On))
            .collect();
        let g = build_radius_graph(&EventStream::new(34, 34, ev).unwrap(), &GraphConfig::default())
            .unwrap();
        let mut buf = Vec::new();
        write_graph_to(&g, &mut buf).unwrap();
        assert_eq!(read_graph_from(&mut buf.as_slice()).unwrap(), g);

        buf[0] = b'X';
        assert!(read_graph_from(&mut buf.as_slice()).is_err());
        assert!(read_graph_from(&mut &b"EVGRAPH\0"[..]).is_err());
    }
}

//! Instruction traces: the binary `ATRC` file format and deterministic
//! synthetic generators.
//!
//! A trace file is a 16-byte header followed by fixed 20-byte little-endian
//! records:
//!
//! ```text
//! header : magic "ATRC" | version u32 | record_count u64
//! record : kind u8 | flags u8 (bit0 = taken) | reserved [u8; 2] | pc u64 | addr u64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const TRACE_MAGIC: [u8; 4] = *b"ATRC";
pub const TRACE_VERSION: u32 = 1;
pub const HEADER_BYTES: u64 = 16;
pub const RECORD_BYTES: u64 = 20;

const PAGE_BYTES: u64 = 4096;
const LINE_BYTES: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Kind {
    Load = 0,
    Store = 1,
    CondBranch = 2,
    Other = 3,
}

impl TryFrom<u8> for Kind {
    type Error = Error;

    fn try_from(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Kind::Load),
            1 => Ok(Kind::Store),
            2 => Ok(Kind::CondBranch),
            3 => Ok(Kind::Other),
            other => Err(Error::UnknownKind(other)),
        }
    }
}

/// One dynamic instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    pub kind: Kind,
    pub pc: u64,
    /// Data address; always 0 for `Other` and `CondBranch`.
    pub addr: u64,
    /// Branch outcome; only meaningful for `CondBranch`.
    pub taken: bool,
}

impl TraceRecord {
    pub fn load(pc: u64, addr: u64) -> Self {
        Self { kind: Kind::Load, pc, addr, taken: false }
    }

    pub fn store(pc: u64, addr: u64) -> Self {
        Self { kind: Kind::Store, pc, addr, taken: false }
    }

    pub fn branch(pc: u64, taken: bool) -> Self {
        Self { kind: Kind::CondBranch, pc, addr: 0, taken }
    }

    pub fn other(pc: u64) -> Self {
        Self { kind: Kind::Other, pc, addr: 0, taken: false }
    }

    pub fn encode(&self) -> [u8; RECORD_BYTES as usize] {
        let mut buf = [0u8; RECORD_BYTES as usize];
        buf[0] = self.kind as u8;
        buf[1] = u8::from(self.taken && self.kind == Kind::CondBranch);
        buf[4..12].copy_from_slice(&self.pc.to_le_bytes());
        let addr = match self.kind {
            Kind::Load | Kind::Store => self.addr,
            Kind::CondBranch | Kind::Other => 0,
        };
        buf[12..20].copy_from_slice(&addr.to_le_bytes());
        buf
    }

    pub fn decode(buf: &[u8; RECORD_BYTES as usize]) -> Result<Self> {
        let kind = Kind::try_from(buf[0])?;
        let pc = u64::from_le_bytes(buf[4..12].try_into().expect("8 bytes"));
        let addr = u64::from_le_bytes(buf[12..20].try_into().expect("8 bytes"));
        Ok(match kind {
            Kind::Load | Kind::Store => Self { kind, pc, addr, taken: false },
            Kind::CondBranch => Self::branch(pc, buf[1] & 1 == 1),
            Kind::Other => Self::other(pc),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceHeader {
    pub magic: [u8; 4],
    pub version: u32,
    pub record_count: u64,
}

impl TraceHeader {
    pub fn new(record_count: u64) -> Self {
        Self { magic: TRACE_MAGIC, version: TRACE_VERSION, record_count }
    }

    pub fn encode(&self) -> [u8; HEADER_BYTES as usize] {
        let mut buf = [0u8; HEADER_BYTES as usize];
        buf[0..4].copy_from_slice(&self.magic);
        buf[4..8].copy_from_slice(&self.version.to_le_bytes());
        buf[8..16].copy_from_slice(&self.record_count.to_le_bytes());
        buf
    }

    pub fn decode(buf: &[u8; HEADER_BYTES as usize]) -> Result<Self> {
        let magic: [u8; 4] = buf[0..4].try_into().expect("4 bytes");
        if magic != TRACE_MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes"));
        if version != TRACE_VERSION {
            return Err(Error::BadVersion(version));
        }
        let record_count = u64::from_le_bytes(buf[8..16].try_into().expect("8 bytes"));
        Ok(Self { magic, version, record_count })
    }
}

/// Streaming reader over an `ATRC` byte source.
pub struct TraceReader<R> {
    inner: R,
    header: TraceHeader,
    remaining: u64,
}

impl TraceReader<BufReader<File>> {
    /// Opens a trace file, validating the header and that the file length
    /// agrees with the declared record count.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let mut reader = TraceReader::new(BufReader::new(file))?;
        let available = len.saturating_sub(HEADER_BYTES);
        if available != reader.header.record_count * RECORD_BYTES {
            return Err(Error::TruncatedFile {
                expected: reader.header.record_count,
                available,
            });
        }
        reader.remaining = reader.header.record_count;
        Ok(reader)
    }
}

impl<R: Read> TraceReader<R> {
    /// Wraps an arbitrary byte source. Truncation is detected lazily, when
    /// a record cannot be completed.
    pub fn new(mut inner: R) -> Result<Self> {
        let mut buf = [0u8; HEADER_BYTES as usize];
        read_exact_or_truncated(&mut inner, &mut buf, 0)?;
        let header = TraceHeader::decode(&buf)?;
        Ok(Self { inner, header, remaining: header.record_count })
    }

    pub fn header(&self) -> TraceHeader {
        self.header
    }
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8], expected: u64) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::TruncatedFile { expected, available: 0 }
        } else {
            Error::Io(e)
        }
    })
}

impl<R: Read> Iterator for TraceReader<R> {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        let mut buf = [0u8; RECORD_BYTES as usize];
        let expected = self.header.record_count;
        let result = read_exact_or_truncated(&mut self.inner, &mut buf, expected)
            .and_then(|_| TraceRecord::decode(&buf));
        self.remaining = if result.is_ok() { self.remaining - 1 } else { 0 };
        Some(result)
    }
}

/// Reads a whole trace file into memory.
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    TraceReader::open(path)?.collect()
}

pub fn write_trace_to<W: Write>(mut out: W, records: &[TraceRecord]) -> Result<()> {
    out.write_all(&TraceHeader::new(records.len() as u64).encode())?;
    for r in records {
        out.write_all(&r.encode())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<()> {
    write_trace_to(BufWriter::new(File::create(path)?), records)
}

/// Parameters of the strided streaming generator.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamParams {
    pub n: u64,
    pub stride: u64,
    pub footprint: u64,
    pub seed: u64,
    /// One record in `load_period` is a LOAD (density 1/period).
    pub load_period: u64,
}

impl StreamParams {
    pub fn new(n: u64, stride: u64, footprint: u64, seed: u64) -> Self {
        Self { n, stride, footprint, seed, load_period: 4 }
    }
}

fn pc_base(seed: u64) -> u64 {
    0x40_0000 + (seed % 16) * 0x1000
}

/// Regular streaming workload: LOADs sweep `0, stride, 2*stride, ...` modulo
/// `footprint`, branches follow a periodic taken/taken/taken/not-taken loop.
pub fn generate_stream_trace(p: &StreamParams) -> Result<Vec<TraceRecord>> {
    if p.stride == 0 {
        return Err(Error::InvalidStride);
    }
    if p.n == 0 {
        return Err(Error::arg("stream trace needs n > 0"));
    }
    if p.footprint == 0 || p.footprint % p.stride != 0 {
        return Err(Error::arg("stride must divide a non-zero footprint"));
    }
    if p.load_period < 2 {
        return Err(Error::arg("load_period must be at least 2"));
    }
    let pc0 = pc_base(p.seed);
    let mut out = Vec::with_capacity(p.n as usize);
    let mut next_addr = 0u64;
    let mut branches = 0u64;
    for i in 0..p.n {
        let slot = i % p.load_period;
        let pc = pc0 + slot * 4;
        let rec = if slot == p.load_period - 1 {
            let r = TraceRecord::load(pc, next_addr);
            next_addr = (next_addr + p.stride) % p.footprint;
            r
        } else if slot == 1 {
            branches += 1;
            TraceRecord::branch(pc, branches % 4 != 0)
        } else {
            TraceRecord::other(pc)
        };
        out.push(rec);
    }
    Ok(out)
}

/// Parameters of the pointer-chasing generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaseParams {
    pub n: u64,
    pub nodes: u64,
    pub seed: u64,
    /// Distance between consecutive node slots in bytes (a multiple of 64).
    pub node_spacing: u64,
    pub load_period: u64,
    /// Base virtual address of the node heap.
    pub base: u64,
}

impl ChaseParams {
    pub fn new(n: u64, nodes: u64, seed: u64) -> Self {
        Self { n, nodes, seed, node_spacing: 256, load_period: 4, base: 0x1000_0000 }
    }
}

/// Visit order of the pointer chase: a single cycle over all node indices.
///
/// Nodes are grouped by 4 KB page as an allocator would place them; pages
/// are visited in random order and the nodes inside a page in random order,
/// so the successor relation is one cycle touching every node exactly once.
pub fn chase_cycle(nodes: u64, node_spacing: u64, seed: u64) -> Result<Vec<u64>> {
    if nodes < 2 {
        return Err(Error::arg("pointer chase needs at least 2 nodes"));
    }
    if node_spacing == 0 || node_spacing % LINE_BYTES != 0 {
        return Err(Error::arg("node_spacing must be a non-zero multiple of 64"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_page = (PAGE_BYTES / node_spacing).max(1);
    let pages = nodes.div_ceil(per_page);
    let mut page_order: Vec<u64> = (0..pages).collect();
    page_order.shuffle(&mut rng);
    let mut order = Vec::with_capacity(nodes as usize);
    for page in page_order {
        let first = page * per_page;
        let last = (first + per_page).min(nodes);
        let mut in_page: Vec<u64> = (first..last).collect();
        in_page.shuffle(&mut rng);
        order.extend(in_page);
    }
    Ok(order)
}

/// Irregular workload: every LOAD dereferences the successor of the node
/// the previous LOAD touched; branch outcomes are seeded coin flips.
pub fn generate_pointer_chase_trace(p: &ChaseParams) -> Result<Vec<TraceRecord>> {
    if p.n == 0 {
        return Err(Error::arg("pointer chase trace needs n > 0"));
    }
    if p.load_period < 2 {
        return Err(Error::arg("load_period must be at least 2"));
    }
    let order = chase_cycle(p.nodes, p.node_spacing, p.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x9e37_79b9_7f4a_7c15);
    let pc0 = pc_base(p.seed) + 0x80;
    let mut out = Vec::with_capacity(p.n as usize);
    let mut cursor = 0usize;
    for i in 0..p.n {
        let slot = i % p.load_period;
        let pc = pc0 + slot * 4;
        let rec = if slot == p.load_period - 1 {
            let addr = p.base + order[cursor] * p.node_spacing;
            cursor = (cursor + 1) % order.len();
            TraceRecord::load(pc, addr)
        } else if slot == 1 {
            TraceRecord::branch(pc, rng.gen::<bool>())
        } else {
            TraceRecord::other(pc)
        };
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentKind {
    Stream,
    Chase,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Stream => "stream",
            SegmentKind::Chase => "chase",
        }
    }
}

impl std::str::FromStr for SegmentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stream" => Ok(SegmentKind::Stream),
            "chase" => Ok(SegmentKind::Chase),
            other => Err(Error::arg(format!("unknown segment kind `{other}`"))),
        }
    }
}

/// Shared generator settings for phase-mixed traces.
#[derive(Debug, Clone, PartialEq)]
pub struct MixParams {
    pub stride: u64,
    pub footprint: u64,
    pub nodes: u64,
    pub node_spacing: u64,
    pub stream_load_period: u64,
    pub chase_load_period: u64,
}

impl Default for MixParams {
    fn default() -> Self {
        Self {
            stride: 8,
            footprint: 8 << 20,
            nodes: 1 << 16,
            node_spacing: 256,
            stream_load_period: 4,
            chase_load_period: 4,
        }
    }
}

/// Boundary of one generated segment, in record indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: u64,
    pub len: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SegmentManifest {
    pub segments: Vec<Segment>,
}

impl SegmentManifest {
    /// Segment containing record `index` of a trace that is replayed
    /// cyclically.
    pub fn segment_at(&self, index: u64) -> Option<&Segment> {
        let total: u64 = self.segments.iter().map(|s| s.len).sum();
        if total == 0 {
            return None;
        }
        let i = index % total;
        self.segments.iter().find(|s| i >= s.start && i < s.start + s.len)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# kind start len\n");
        for seg in &self.segments {
            s.push_str(&format!("{} {} {}\n", seg.kind.as_str(), seg.start, seg.len));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [kind, start, len] = parts[..] else {
                return Err(Error::arg(format!("bad manifest line `{line}`")));
            };
            let num = |v: &str| v.parse::<u64>().map_err(|e| Error::arg(format!("{v}: {e}")));
            segments.push(Segment { kind: kind.parse()?, start: num(start)?, len: num(len)? });
        }
        Ok(Self { segments })
    }
}

/// Interleaves one stream and one pointer chase. Segments of the same kind
/// are consecutive slices of a single generator run, so every stream phase
/// keeps sweeping fresh memory and every chase phase continues the cycle.
/// A single-segment mix equals the plain generator output.
pub fn generate_phase_mix_trace(
    segments: &[(SegmentKind, u64)],
    seed: u64,
    params: &MixParams,
) -> Result<(Vec<TraceRecord>, SegmentManifest)> {
    if segments.is_empty() {
        return Err(Error::arg("phase mix needs at least one segment"));
    }
    if let Some(i) = segments.iter().position(|&(_, n)| n == 0) {
        return Err(Error::arg(format!("segment {i} has n = 0")));
    }
    let total = |k: SegmentKind| segments.iter().filter(|s| s.0 == k).map(|s| s.1).sum::<u64>();
    let (stream_n, chase_n) = (total(SegmentKind::Stream), total(SegmentKind::Chase));
    let stream = if stream_n > 0 {
        generate_stream_trace(&StreamParams {
            load_period: params.stream_load_period,
            ..StreamParams::new(stream_n, params.stride, params.footprint, seed)
        })?
    } else {
        Vec::new()
    };
    let chase = if chase_n > 0 {
        generate_pointer_chase_trace(&ChaseParams {
            node_spacing: params.node_spacing,
            load_period: params.chase_load_period,
            ..ChaseParams::new(chase_n, params.nodes, seed)
        })?
    } else {
        Vec::new()
    };
    let (mut si, mut ci) = (0usize, 0usize);
    let mut out = Vec::with_capacity((stream_n + chase_n) as usize);
    let mut manifest = SegmentManifest::default();
    for &(kind, n) in segments {
        manifest.segments.push(Segment { kind, start: out.len() as u64, len: n });
        let (src, pos) = match kind {
            SegmentKind::Stream => (&stream, &mut si),
            SegmentKind::Chase => (&chase, &mut ci),
        };
        out.extend_from_slice(&src[*pos..*pos + n as usize]);
        *pos += n as usize;
    }
    Ok((out, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;
    use std::io::Cursor;

    fn encode_file(records: &[TraceRecord]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_trace_to(&mut buf, records).unwrap();
        buf
    }

    #[test]
    fn empty_trace_reads_empty() {
        let bytes = encode_file(&[]);
        let recs: Vec<_> = TraceReader::new(Cursor::new(bytes)).unwrap().collect::<Result<_>>().unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn preserves_order() {
        let recs = vec![
            TraceRecord::load(0x10, 0x1000),
            TraceRecord::branch(0x14, true),
            TraceRecord::other(0x18),
        ];
        let bytes = encode_file(&recs);
        let back: Vec<_> = TraceReader::new(Cursor::new(bytes)).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn truncated_mid_record() {
        let mut bytes = encode_file(&[TraceRecord::load(1, 64), TraceRecord::load(2, 128)]);
        bytes.truncate(bytes.len() - 7);
        let res: Result<Vec<_>> = TraceReader::new(Cursor::new(bytes)).unwrap().collect();
        assert!(matches!(res, Err(Error::TruncatedFile { .. })));
    }

    #[test]
    fn truncated_file_detected_on_open() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.atrc");
        let mut bytes = encode_file(&[TraceRecord::load(1, 64)]);
        bytes.pop();
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(TraceReader::open(&path), Err(Error::TruncatedFile { expected: 1, available: 19 })));
    }

    #[test]
    fn header_errors() {
        let mut bytes = encode_file(&[]);
        bytes[0] = b'X';
        assert!(matches!(TraceReader::new(Cursor::new(bytes.clone())), Err(Error::BadMagic(_))));
        let mut bytes = encode_file(&[]);
        bytes[4] = 2;
        assert!(matches!(TraceReader::new(Cursor::new(bytes)), Err(Error::BadVersion(2))));
    }

    #[test]
    fn unknown_kind_is_error() {
        let mut bytes = encode_file(&[TraceRecord::other(4)]);
        bytes[HEADER_BYTES as usize] = 9;
        let res: Result<Vec<_>> = TraceReader::new(Cursor::new(bytes)).unwrap().collect();
        assert!(matches!(res, Err(Error::UnknownKind(9))));
    }

    #[test]
    fn non_memory_records_encode_zero_addr() {
        let r = TraceRecord { kind: Kind::Other, pc: 4, addr: 0xdead, taken: true };
        let back = TraceRecord::decode(&r.encode()).unwrap();
        assert_eq!(back.addr, 0);
        assert!(!back.taken);
    }

    #[test]
    fn stream_first_eight_records() {
        let t = generate_stream_trace(&StreamParams::new(8, 64, 4096, 0)).unwrap();
        let loads: Vec<(usize, u64)> = t
            .iter()
            .enumerate()
            .filter(|(_, r)| r.kind == Kind::Load)
            .map(|(i, r)| (i, r.addr))
            .collect();
        assert_eq!(loads, vec![(3, 0), (7, 64)]);
        for (i, r) in t.iter().enumerate() {
            if i % 4 != 3 {
                assert!(matches!(r.kind, Kind::Other | Kind::CondBranch));
                assert_eq!(r.addr, 0);
            }
        }
    }

    #[test]
    fn stream_deterministic_and_rejects_bad_args() {
        let p = StreamParams::new(1000, 64, 4096, 7);
        let a = encode_file(&generate_stream_trace(&p).unwrap());
        let b = encode_file(&generate_stream_trace(&p).unwrap());
        assert_eq!(a, b);
        assert!(matches!(
            generate_stream_trace(&StreamParams::new(8, 0, 4096, 0)),
            Err(Error::InvalidStride)
        ));
        assert!(matches!(
            generate_stream_trace(&StreamParams::new(0, 64, 4096, 0)),
            Err(Error::Argument(_))
        ));
        assert!(generate_stream_trace(&StreamParams::new(8, 100, 4096, 0)).is_err());
    }

    #[test]
    fn stream_wraps_at_footprint() {
        let t = generate_stream_trace(&StreamParams::new(4 * 70, 64, 4096, 0)).unwrap();
        let addrs: Vec<u64> = t.iter().filter(|r| r.kind == Kind::Load).map(|r| r.addr).collect();
        assert_eq!(addrs[63], 4032);
        assert_eq!(addrs[64], 0);
    }

    /// Follows successor pointers from the first node and counts how many
    /// steps it takes to return: a single cycle returns after exactly `n`.
    fn is_single_cycle(addrs: &[u64]) -> bool {
        let n = addrs.len();
        let succ: std::collections::HashMap<u64, u64> =
            (0..n).map(|i| (addrs[i], addrs[(i + 1) % n])).collect();
        if succ.len() != n {
            return false;
        }
        let mut cur = addrs[0];
        for step in 1..=n {
            cur = succ[&cur];
            if cur == addrs[0] {
                return step == n;
            }
        }
        false
    }

    #[test]
    fn chase_four_nodes_single_cycle() {
        let t = generate_pointer_chase_trace(&ChaseParams::new(16, 4, 1)).unwrap();
        let loads: Vec<u64> = t.iter().filter(|r| r.kind == Kind::Load).map(|r| r.addr).collect();
        assert_eq!(loads.len(), 4);
        let lines: HashSet<u64> = loads.iter().map(|a| a / 64).collect();
        assert_eq!(lines.len(), 4);
        assert!(is_single_cycle(&loads));
    }

    #[test]
    fn chase_successor_relation_is_consistent() {
        let p = ChaseParams::new(4 * 300, 100, 3);
        let t = generate_pointer_chase_trace(&p).unwrap();
        let loads: Vec<u64> = t.iter().filter(|r| r.kind == Kind::Load).map(|r| r.addr).collect();
        assert!(is_single_cycle(&loads[..100]));
        assert_eq!(&loads[..100], &loads[100..200]);
    }

    #[test]
    fn chase_rejects_one_node_and_is_deterministic() {
        assert!(matches!(
            generate_pointer_chase_trace(&ChaseParams::new(16, 1, 1)),
            Err(Error::Argument(_))
        ));
        let p = ChaseParams::new(400, 50, 11);
        assert_eq!(generate_pointer_chase_trace(&p).unwrap(), generate_pointer_chase_trace(&p).unwrap());
    }

    #[test]
    fn phase_mix_concatenates() {
        let mp = MixParams { footprint: 4096, stride: 64, nodes: 32, ..MixParams::default() };
        let (t, m) = generate_phase_mix_trace(
            &[(SegmentKind::Stream, 100), (SegmentKind::Chase, 100)],
            5,
            &mp,
        )
        .unwrap();
        assert_eq!(t.len(), 200);
        let stream = generate_stream_trace(&StreamParams::new(100, 64, 4096, 5)).unwrap();
        assert_eq!(&t[..100], &stream[..]);

        let (two, _) = generate_phase_mix_trace(
            &[(SegmentKind::Stream, 40), (SegmentKind::Chase, 20), (SegmentKind::Stream, 60)],
            5,
            &mp,
        )
        .unwrap();
        assert_eq!(&two[..40], &stream[..40]);
        assert_eq!(&two[60..], &stream[40..]);
        assert_eq!(m.segments[1], Segment { kind: SegmentKind::Chase, start: 100, len: 100 });
        assert_eq!(m.segment_at(250).unwrap().kind, SegmentKind::Stream);

        let (single, _) = generate_phase_mix_trace(&[(SegmentKind::Chase, 50)], 9, &mp).unwrap();
        let direct = generate_pointer_chase_trace(&ChaseParams {
            node_spacing: mp.node_spacing,
            ..ChaseParams::new(50, 32, 9)
        })
        .unwrap();
        assert_eq!(single, direct);

        assert!(generate_phase_mix_trace(&[], 0, &mp).is_err());
        assert!(generate_phase_mix_trace(&[(SegmentKind::Stream, 0)], 0, &mp).is_err());
    }

    #[test]
    fn manifest_text_roundtrip() {
        let m = SegmentManifest {
            segments: vec![
                Segment { kind: SegmentKind::Stream, start: 0, len: 10 },
                Segment { kind: SegmentKind::Chase, start: 10, len: 5 },
            ],
        };
        assert_eq!(SegmentManifest::parse(&m.to_text()).unwrap(), m);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn record() -> impl Strategy<Value = TraceRecord> {
            prop_oneof![
                (any::<u64>(), any::<u64>()).prop_map(|(pc, a)| TraceRecord::load(pc, a)),
                (any::<u64>(), any::<u64>()).prop_map(|(pc, a)| TraceRecord::store(pc, a)),
                (any::<u64>(), any::<bool>()).prop_map(|(pc, t)| TraceRecord::branch(pc, t)),
                any::<u64>().prop_map(TraceRecord::other),
            ]
        }

        proptest! {
            #[test]
            fn write_read_write_is_byte_identical(recs in prop::collection::vec(record(), 0..64)) {
                let bytes = encode_file(&recs);
                let back: Vec<_> = TraceReader::new(Cursor::new(bytes.clone())).unwrap()
                    .collect::<Result<_>>().unwrap();
                prop_assert_eq!(encode_file(&back), bytes);
            }

            #[test]
            fn stream_deltas_equal_stride(stride_lines in 1u64..8, n in 8u64..400) {
                let stride = stride_lines * 8;
                let footprint = stride * 1024;
                let t = generate_stream_trace(&StreamParams::new(n, stride, footprint, 0)).unwrap();
                let addrs: Vec<u64> = t.iter().filter(|r| r.kind == Kind::Load).map(|r| r.addr).collect();
                for w in addrs.windows(2) {
                    prop_assert_eq!(w[1] - w[0], stride);
                }
            }
        }
    }
}

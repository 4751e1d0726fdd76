//! QTAG binary tag files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! header  (24 bytes)  "QTAG" | version u32 = 1 | resolution_ps u64 | tag_count u64
//! record  (16 bytes)  timestamp_ps u64 | channel u32 | reserved u32 = 0
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tags::TagStream;

pub const MAGIC: &[u8; 4] = b"QTAG";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 24;
pub const RECORD_LEN: u64 = 16;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write<W: Write>(mut out: W, stream: &TagStream) -> io::Result<()> {
    let mut header = [0u8; HEADER_LEN as usize];
    header[..4].copy_from_slice(MAGIC);
    header[4..8].copy_from_slice(&VERSION.to_le_bytes());
    header[8..16].copy_from_slice(&stream.resolution_ps().to_le_bytes());
    header[16..24].copy_from_slice(&(stream.len() as u64).to_le_bytes());
    out.write_all(&header)?;
    let mut rec = [0u8; RECORD_LEN as usize];
    for tag in stream.iter() {
        rec[..8].copy_from_slice(&tag.timestamp_ps.to_le_bytes());
        rec[8..12].copy_from_slice(&tag.channel.to_le_bytes());
        out.write_all(&rec)?;
    }
    out.flush()
}

pub fn to_bytes(stream: &TagStream) -> Vec<u8> {
    let mut buf = Vec::with_capacity((HEADER_LEN + RECORD_LEN * stream.len() as u64) as usize);
    write(&mut buf, stream).expect("writing to a Vec cannot fail");
    buf
}

pub fn write_file(path: &Path, stream: &TagStream) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    write(BufWriter::with_capacity(1 << 20, f), stream).map_err(io_err(path))
}

fn corrupt(offset: u64, reason: impl Into<String>) -> Error {
    Error::Qtag {
        offset,
        reason: reason.into(),
    }
}

/// Fills `buf` completely, or reports how many bytes were available.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Parses and validates a QTAG stream. I/O failures are reported as corrupt
/// data at the offset reached.
pub fn read<R: Read>(mut input: R) -> Result<TagStream> {
    let mut header = [0u8; HEADER_LEN as usize];
    let got = read_full(&mut input, &mut header).map_err(|e| corrupt(0, e.to_string()))?;
    if got < 4 || &header[..4] != MAGIC {
        return Err(corrupt(0, "bad magic (expected \"QTAG\")"));
    }
    if got < header.len() {
        return Err(corrupt(got as u64, "truncated header"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(corrupt(4, format!("unsupported version {version}")));
    }
    let resolution = u64::from_le_bytes(header[8..16].try_into().unwrap());
    if resolution < 1 {
        return Err(corrupt(8, "resolution must be at least 1 ps"));
    }
    let count = u64::from_le_bytes(header[16..24].try_into().unwrap());

    let cap = count.min(1 << 26) as usize;
    let mut timestamps = Vec::with_capacity(cap);
    let mut channels = Vec::with_capacity(cap);
    let mut chunk = vec![0u8; (RECORD_LEN as usize) * 4096];
    let mut index: u64 = 0;
    let mut prev: Option<(u64, u32)> = None;
    while index < count {
        let want = ((count - index).min(4096) * RECORD_LEN) as usize;
        let offset = HEADER_LEN + index * RECORD_LEN;
        let got = read_full(&mut input, &mut chunk[..want])
            .map_err(|e| corrupt(offset, e.to_string()))?;
        if got < want {
            return Err(corrupt(
                offset + got as u64,
                format!(
                    "truncated: header declares {count} tags, file ends inside tag {}",
                    index + got as u64 / RECORD_LEN
                ),
            ));
        }
        for rec in chunk[..want].chunks_exact(RECORD_LEN as usize) {
            let at = HEADER_LEN + index * RECORD_LEN;
            let ts = u64::from_le_bytes(rec[..8].try_into().unwrap());
            let ch = u32::from_le_bytes(rec[8..12].try_into().unwrap());
            if rec[12..16] != [0, 0, 0, 0] {
                return Err(corrupt(at + 12, "reserved bytes are not zero"));
            }
            if let Some(p) = prev {
                if (ts, ch) < p {
                    return Err(corrupt(
                        at,
                        format!("tag {index} at {ts} ps precedes previous tag at {} ps", p.0),
                    ));
                }
            }
            if ts % resolution != 0 {
                return Err(corrupt(
                    at,
                    format!("timestamp {ts} ps is not a multiple of {resolution} ps"),
                ));
            }
            prev = Some((ts, ch));
            timestamps.push(ts);
            channels.push(ch);
            index += 1;
        }
    }
    let mut extra = [0u8; 1];
    if read_full(&mut input, &mut extra)
        .map_err(|e| corrupt(HEADER_LEN + count * RECORD_LEN, e.to_string()))?
        > 0
    {
        return Err(corrupt(
            HEADER_LEN + count * RECORD_LEN,
            format!("trailing data after the {count} declared tags"),
        ));
    }
    Ok(TagStream::from_parts_unchecked(
        timestamps, channels, resolution,
    ))
}

pub fn read_file(path: &Path) -> Result<TagStream> {
    let f = File::open(path).map_err(io_err(path))?;
    read(BufReader::with_capacity(1 << 20, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let s = TagStream::from_parts(vec![0, 20, 40], vec![1, 2, 1], 20).unwrap();
        let bytes = to_bytes(&s);
        assert_eq!(bytes.len(), 24 + 3 * 16);
        assert_eq!(&bytes[..4], b"QTAG");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..16], &20u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &3u64.to_le_bytes());
        assert_eq!(&bytes[40..48], &20u64.to_le_bytes());
        assert_eq!(&bytes[48..52], &2u32.to_le_bytes());
        assert_eq!(&bytes[52..56], &[0; 4]);
    }

    fn offset_of(err: Error) -> u64 {
        match err {
            Error::Qtag { offset, .. } => offset,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_corruption_with_offsets() {
        let s = TagStream::from_timestamps(vec![5, 7, 9], 0).unwrap();
        let good = to_bytes(&s);

        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(offset_of(read(&bad[..]).unwrap_err()), 0);

        let mut bad = good.clone();
        bad[24 + 16..24 + 24].copy_from_slice(&1u64.to_le_bytes());
        assert_eq!(offset_of(read(&bad[..]).unwrap_err()), 40);

        let mut bad = good.clone();
        bad[24 + 12] = 1;
        assert_eq!(offset_of(read(&bad[..]).unwrap_err()), 36);

        assert_eq!(
            offset_of(read(&good[..good.len() - 3]).unwrap_err()),
            24 + 45
        );

        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(offset_of(read(&bad[..]).unwrap_err()), 72);

        let mut bad = good;
        bad[4] = 2;
        assert_eq!(offset_of(read(&bad[..]).unwrap_err()), 4);
    }

    #[test]
    fn empty_stream_round_trips() {
        let s = TagStream::empty(1);
        assert_eq!(read(&to_bytes(&s)[..]).unwrap(), s);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(
            mut raw in proptest::collection::vec((0u64..u64::MAX / 8, 0u32..4), 0..300),
            res in 1u64..5,
        ) {
            for r in raw.iter_mut() {
                r.0 -= r.0 % res;
            }
            let tags = raw.into_iter().map(|(timestamp_ps, channel)| crate::tags::TimeTag { timestamp_ps, channel }).collect();
            let s = TagStream::from_unsorted(tags, res).unwrap();
            let back = read(&to_bytes(&s)[..]).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}

//! `ECOF` feature files.
//!
//! Layout, all little-endian: magic `ECOF`, `u32` version (1), `u32` record
//! count `N`, `u32` dimension `D`, then `N` records of `u64` id followed by
//! `D` `f32` values.

use std::collections::HashSet;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const ECOF_MAGIC: &[u8; 4] = b"ECOF";
pub const ECOF_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct EcofFile {
    pub dim: usize,
    pub records: Vec<(u64, Vec<f32>)>,
}

pub fn write_ecof<W: Write>(mut w: W, file: &EcofFile) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + file.records.len() * (8 + 4 * file.dim));
    buf.extend_from_slice(ECOF_MAGIC);
    buf.extend_from_slice(&ECOF_VERSION.to_le_bytes());
    buf.extend_from_slice(&(file.records.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(file.dim as u32).to_le_bytes());
    for (id, values) in &file.records {
        if values.len() != file.dim {
            return Err(Error::DimensionMismatch {
                expected: file.dim,
                got: values.len(),
            });
        }
        buf.extend_from_slice(&id.to_le_bytes());
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_ecof<R: Read>(mut r: R) -> Result<EcofFile> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("ECOF header truncated".into()));
    }
    if &bytes[..4] != ECOF_MAGIC {
        return Err(Error::Format("bad ECOF magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != ECOF_VERSION {
        return Err(Error::Format(format!("unsupported ECOF version {version}")));
    }
    let count = word(8) as usize;
    let dim = word(12) as usize;
    let body = bytes.len() - HEADER_LEN;
    let record_len = 8 + 4 * dim;
    if body != count * record_len {
        // report the per-record value count the payload actually implies
        if count > 0 && body % count == 0 && (body / count) >= 8 && (body / count - 8) % 4 == 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: (body / count - 8) / 4,
            });
        }
        return Err(Error::Format(format!(
            "ECOF payload is {body} bytes, expected {} for {count} records of dim {dim}",
            count * record_len
        )));
    }
    let mut records = Vec::with_capacity(count);
    let mut seen = HashSet::with_capacity(count);
    for rec in bytes[HEADER_LEN..].chunks_exact(record_len.max(1)).take(count) {
        let id = u64::from_le_bytes(rec[..8].try_into().unwrap());
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id));
        }
        let values: Vec<f32> = rec[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        records.push((id, values));
    }
    Ok(EcofFile { dim, records })
}

pub fn write_ecof_file(path: impl AsRef<Path>, file: &EcofFile) -> Result<()> {
    let mut buf = Vec::new();
    write_ecof(&mut buf, file)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_ecof_file(path: impl AsRef<Path>) -> Result<EcofFile> {
    read_ecof(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(file: &EcofFile) -> Vec<u8> {
        let mut buf = Vec::new();
        write_ecof(&mut buf, file).unwrap();
        buf
    }

    #[test]
    fn header_layout() {
        let buf = encode(&EcofFile {
            dim: 2,
            records: vec![(7, vec![1.0, -2.5])],
        });
        assert_eq!(&buf[..4], b"ECOF");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(&buf[12..16], &2u32.to_le_bytes());
        assert_eq!(&buf[16..24], &7u64.to_le_bytes());
        assert_eq!(&buf[24..28], &1.0f32.to_le_bytes());
        assert_eq!(buf.len(), 16 + 8 + 8);
    }

    #[test]
    fn short_records_are_a_dimension_error() {
        // header says 2048 but every record carries 2047 values
        let mut buf = Vec::new();
        buf.extend_from_slice(b"ECOF");
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&3u32.to_le_bytes());
        buf.extend_from_slice(&2048u32.to_le_bytes());
        for id in 0..3u64 {
            buf.extend_from_slice(&id.to_le_bytes());
            for _ in 0..2047 {
                buf.extend_from_slice(&0.5f32.to_le_bytes());
            }
        }
        match read_ecof(&buf[..]) {
            Err(Error::DimensionMismatch {
                expected: 2048,
                got: 2047,
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_magic_version_and_duplicates() {
        let good = encode(&EcofFile {
            dim: 1,
            records: vec![(1, vec![0.0]), (2, vec![1.0])],
        });
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(read_ecof(&bad[..]), Err(Error::Format(_))));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(read_ecof(&bad[..]), Err(Error::Format(_))));
        let dup = encode(&EcofFile {
            dim: 1,
            records: vec![(3, vec![0.0]), (3, vec![1.0])],
        });
        assert!(matches!(read_ecof(&dup[..]), Err(Error::DuplicateId(3))));
        assert!(matches!(read_ecof(&good[..10]), Err(Error::Format(_))));
    }

    #[test]
    fn large_file_keeps_count() {
        let n = 16136;
        let file = EcofFile {
            dim: 4,
            records: (0..n as u64).map(|i| (i, vec![i as f32, 0.0, 1.0, -1.0])).collect(),
        };
        let back = read_ecof(&encode(&file)[..]).unwrap();
        assert_eq!(back.records.len(), n);
        assert_eq!(back, file);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(dim in 0usize..12, raw in proptest::collection::vec((any::<u64>(), proptest::collection::vec(any::<u32>(), 12)), 0..20)) {
            let mut ids = HashSet::new();
            let records: Vec<(u64, Vec<f32>)> = raw.into_iter()
                .filter(|(id, _)| ids.insert(*id))
                .map(|(id, bits)| (id, bits[..dim].iter().map(|b| f32::from_bits(*b)).collect()))
                .collect();
            let file = EcofFile { dim, records };
            let buf = encode(&file);
            let back = read_ecof(&buf[..]).unwrap();
            prop_assert_eq!(back.records.len(), file.records.len());
            for ((ia, va), (ib, vb)) in back.records.iter().zip(&file.records) {
                prop_assert_eq!(ia, ib);
                let ba: Vec<u32> = va.iter().map(|v| v.to_bits()).collect();
                let bb: Vec<u32> = vb.iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(ba, bb);
            }
        }
    }
}

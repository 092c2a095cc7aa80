//! Packet corpus files: JSON lines, one [`TestPacket`] per line.

use std::io::{self, BufRead, Write};

use super::generate::TestPacket;

pub mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(text.trim()).map_err(serde::de::Error::custom)
    }
}

pub fn write_jsonl<W: Write>(mut out: W, packets: &[TestPacket]) -> io::Result<()> {
    for p in packets {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(packets: &[TestPacket]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, packets).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("json is utf-8")
}

/// Reads a corpus; blank lines are ignored, and errors carry the 1-based
/// line number.
pub fn read_jsonl<R: BufRead>(input: R) -> io::Result<Vec<TestPacket>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        out.push(p);
    }
    Ok(out)
}

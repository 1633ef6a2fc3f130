//! `L3CS` container framing.
//!
//! ```text
//! "L3CS" version:u8 width:u32 height:u32 scales:u8 channels:u8 components:u8
//! max_disparity:u16 weight_digest:u64
//! segments:u16, per segment: role:u8 scale:u8 view:u8 length:u32
//! payloads in directory order
//! crc32 of every preceding byte: u32
//! ```
//!
//! Integers are little-endian. `width`/`height` are the true image size;
//! coded planes cover the padded size.

use crate::error::{Error, Result};
use crate::model::View;

pub const CONTAINER_MAGIC: &[u8; 4] = b"L3CS";
pub const CONTAINER_VERSION: u8 = 1;

const HEADER_LEN: usize = 4 + 1 + 4 + 4 + 1 + 1 + 1 + 2 + 8 + 2;
const DIR_ENTRY_LEN: usize = 1 + 1 + 1 + 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Feature,
    Image,
}

impl Role {
    pub fn tag(self) -> u8 {
        match self {
            Role::Feature => 0,
            Role::Image => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Role::Feature),
            1 => Some(Role::Image),
            _ => None,
        }
    }
}

/// Identity of a coded plane. Image planes use scale 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SegmentId {
    pub role: Role,
    pub scale: u8,
    pub view: View,
}

impl SegmentId {
    pub fn feature(scale: usize, view: View) -> Self {
        SegmentId {
            role: Role::Feature,
            scale: scale as u8,
            view,
        }
    }

    pub fn image(view: View) -> Self {
        SegmentId {
            role: Role::Image,
            scale: 0,
            view,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub width: u32,
    pub height: u32,
    pub scales: u8,
    pub channels: u8,
    pub components: u8,
    pub max_disparity: u16,
    pub weight_digest: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub id: SegmentId,
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Container {
    pub header: Header,
    pub segments: Vec<Segment>,
}

impl Container {
    /// Bytes spent on framing rather than coded payload.
    pub fn overhead_bytes(&self) -> usize {
        HEADER_LEN + DIR_ENTRY_LEN * self.segments.len() + 4
    }

    pub fn encoded_len(&self) -> usize {
        self.overhead_bytes() + self.segments.iter().map(|s| s.payload.len()).sum::<usize>()
    }

    pub fn has_view(&self, view: View) -> bool {
        self.segments.iter().any(|s| s.id.view == view)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.segments.len() > u16::MAX as usize {
            return Err(Error::Dimension("too many segments".into()));
        }
        let mut out = Vec::with_capacity(self.encoded_len());
        let h = &self.header;
        out.extend_from_slice(CONTAINER_MAGIC);
        out.push(CONTAINER_VERSION);
        out.extend_from_slice(&h.width.to_le_bytes());
        out.extend_from_slice(&h.height.to_le_bytes());
        out.push(h.scales);
        out.push(h.channels);
        out.push(h.components);
        out.extend_from_slice(&h.max_disparity.to_le_bytes());
        out.extend_from_slice(&h.weight_digest.to_le_bytes());
        out.extend_from_slice(&(self.segments.len() as u16).to_le_bytes());
        for s in &self.segments {
            let len = u32::try_from(s.payload.len())
                .map_err(|_| Error::Dimension("segment longer than 4 GiB".into()))?;
            out.push(s.id.role.tag());
            out.push(s.id.scale);
            out.push(s.id.view.tag());
            out.extend_from_slice(&len.to_le_bytes());
        }
        for s in &self.segments {
            out.extend_from_slice(&s.payload);
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    /// Parses and integrity-checks a container. Length problems are reported
    /// as [`Error::Truncated`] before the CRC is checked.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != CONTAINER_MAGIC {
            return Err(Error::Format("not an L3CS container".into()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated("container header".into()));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = bytes[4];
        let header = Header {
            width: u32_at(5),
            height: u32_at(9),
            scales: bytes[13],
            channels: bytes[14],
            components: bytes[15],
            max_disparity: u16_at(16),
            weight_digest: u64::from_le_bytes(bytes[18..26].try_into().unwrap()),
        };
        let count = u16_at(26) as usize;
        let dir_end = HEADER_LEN + count * DIR_ENTRY_LEN;
        if bytes.len() < dir_end {
            return Err(Error::Truncated("segment directory".into()));
        }
        let mut entries = Vec::with_capacity(count);
        let mut payload_total = 0usize;
        for i in 0..count {
            let at = HEADER_LEN + i * DIR_ENTRY_LEN;
            let len = u32_at(at + 3) as usize;
            payload_total += len;
            entries.push((bytes[at], bytes[at + 1], bytes[at + 2], len));
        }
        let expected = dir_end + payload_total + 4;
        if bytes.len() < expected {
            return Err(Error::Truncated(format!(
                "container is {} bytes, directory declares {expected}",
                bytes.len()
            )));
        }
        if bytes.len() > expected {
            return Err(Error::Format(format!(
                "{} trailing bytes after container",
                bytes.len() - expected
            )));
        }
        let body = &bytes[..expected - 4];
        let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Crc { stored, computed });
        }
        if version != CONTAINER_VERSION {
            return Err(Error::UnknownVersion {
                what: "container",
                found: version,
            });
        }
        let mut segments = Vec::with_capacity(count);
        let mut pos = dir_end;
        for (role, scale, view, len) in entries {
            let role = Role::from_tag(role)
                .ok_or_else(|| Error::Format(format!("unknown segment role {role}")))?;
            let view = View::from_tag(view)
                .ok_or_else(|| Error::Format(format!("unknown segment view {view}")))?;
            segments.push(Segment {
                id: SegmentId { role, scale, view },
                payload: bytes[pos..pos + len].to_vec(),
            });
            pos += len;
        }
        Ok(Container { header, segments })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        Container {
            header: Header {
                width: 17,
                height: 9,
                scales: 3,
                channels: 5,
                components: 10,
                max_disparity: 64,
                weight_digest: 0x0123_4567_89ab_cdef,
            },
            segments: vec![
                Segment {
                    id: SegmentId::feature(3, View::Left),
                    payload: vec![1, 2, 3],
                },
                Segment {
                    id: SegmentId::image(View::Right),
                    payload: vec![9; 10],
                },
            ],
        }
    }

    #[test]
    fn roundtrip() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(bytes.len(), c.encoded_len());
        assert_eq!(Container::from_bytes(&bytes).unwrap(), c);
        assert_eq!(&bytes[..4], b"L3CS");
    }

    #[test]
    fn corruption_kinds() {
        let bytes = sample().to_bytes().unwrap();
        let payload_at = HEADER_LEN + 2 * DIR_ENTRY_LEN + 1;
        let mut flipped = bytes.clone();
        flipped[payload_at] ^= 1;
        assert!(matches!(Container::from_bytes(&flipped), Err(Error::Crc { .. })));
        assert!(matches!(
            Container::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated(_))
        ));
        assert!(matches!(Container::from_bytes(&bytes[..10]), Err(Error::Truncated(_))));
        assert!(matches!(Container::from_bytes(b"nope"), Err(Error::Format(_))));
        let mut longer = bytes;
        longer.push(0);
        assert!(matches!(Container::from_bytes(&longer), Err(Error::Format(_))));
    }
}

//! Binary channel-stack container.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! magic "LDCFCHS1" | width | height | shrink | channel count
//! per channel: label byte length | label (UTF-8)
//! per channel: width*height samples as little-endian f32, row-major
//! ```

use super::{ChannelError, ChannelStack, Plane};

pub const STACK_MAGIC: &[u8; 8] = b"LDCFCHS1";

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_stack(stack: &ChannelStack) -> Vec<u8> {
    let mut out = STACK_MAGIC.to_vec();
    put_u32(&mut out, stack.width());
    put_u32(&mut out, stack.height());
    put_u32(&mut out, stack.shrink());
    put_u32(&mut out, stack.num_channels());
    for label in stack.labels() {
        put_u32(&mut out, label.len());
        out.extend_from_slice(label.as_bytes());
    }
    for plane in stack.planes() {
        for &v in plane.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ChannelError> {
        if self.pos + n > self.bytes.len() {
            return Err(ChannelError::Format("unexpected end of data".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, ChannelError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

/// Decodes a stack written by [`encode_stack`]. Samples come back as the
/// stored `f32` values widened to `f64`.
pub fn decode_stack(bytes: &[u8]) -> Result<ChannelStack, ChannelError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != STACK_MAGIC {
        return Err(ChannelError::Format("bad magic".into()));
    }
    let width = cur.u32()?;
    let height = cur.u32()?;
    let shrink = cur.u32()?;
    let count = cur.u32()?;
    if count == 0 || count > 1 << 16 {
        return Err(ChannelError::Format(format!("implausible channel count {count}")));
    }
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let n = cur.u32()?;
        let s = std::str::from_utf8(cur.take(n)?)
            .map_err(|_| ChannelError::Format("label is not UTF-8".into()))?;
        labels.push(s.to_string());
    }
    let mut planes = Vec::with_capacity(count);
    for _ in 0..count {
        let raw = cur.take(width * height * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        planes.push(Plane::from_vec(width, height, data)?);
    }
    if cur.pos != bytes.len() {
        return Err(ChannelError::Format("trailing bytes".into()));
    }
    ChannelStack::new(labels, planes, shrink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_exact_for_f32_values(
            w in 1usize..6, h in 1usize..6, shrink in 1usize..5,
            seed in proptest::collection::vec(-1e6f32..1e6, 72)
        ) {
            let planes: Vec<Plane> = (0..2)
                .map(|c| Plane::from_fn(w, h, |x, y| f64::from(seed[(c * 36 + y * 6 + x) % 72])))
                .collect();
            let stack = ChannelStack::new(vec!["L".into(), "O1:f2".into()], planes, shrink).unwrap();
            let back = decode_stack(&encode_stack(&stack)).unwrap();
            prop_assert_eq!(back, stack);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode_stack(b"nope").is_err());
        let stack = ChannelStack::single("x", Plane::zeros(2, 2)).unwrap();
        let mut bytes = encode_stack(&stack);
        bytes.pop();
        assert!(decode_stack(&bytes).is_err());
    }
}

//! Byte encodings for the two record kinds that travel in frames: data
//! candidates and subscription-group records.
//!
//! A group record occupies `per_entry_bytes` per member (padded), matching
//! the sizing policy used to derive group capacity, so a full group's
//! record is exactly one frame. The header (id, params, broker, member
//! count) is packed into the padding; tiny groups whose padding cannot hold
//! it get the minimal unpadded layout instead.

use serde::{Deserialize, Serialize};

use crate::eval::Fields;
use crate::subs::SubscriptionGroup;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GroupHeader {
    g: u64,
    n: u64,
    p: Vec<Value>,
    b: String,
}

/// Candidates use a length-prefixed binary layout instead of a
/// self-describing format: every partition decodes the full broadcast
/// candidate stream, so decode cost sits on the execution critical path.
///
/// Layout: pk (8 LE), field count (u16 LE), then per field a name
/// (u16 length + UTF-8 bytes) and a tagged value — 0 string (u32 length +
/// UTF-8), 1 int (i64 LE), 2 bool (u8), 3 point (two f64 LE).
pub fn encode_candidate(pk: u64, fields: &Fields) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + fields.len() * 16);
    out.extend_from_slice(&pk.to_le_bytes());
    out.extend_from_slice(&(fields.len() as u16).to_le_bytes());
    for (name, value) in fields {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        match value {
            Value::Str(s) => {
                out.push(0);
                out.extend_from_slice(&(s.len() as u32).to_le_bytes());
                out.extend_from_slice(s.as_bytes());
            }
            Value::Int(i) => {
                out.push(1);
                out.extend_from_slice(&i.to_le_bytes());
            }
            Value::Bool(b) => {
                out.push(2);
                out.push(u8::from(*b));
            }
            Value::Point(x, y) => {
                out.push(3);
                out.extend_from_slice(&x.to_le_bytes());
                out.extend_from_slice(&y.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_candidate(bytes: &[u8]) -> (u64, Fields) {
    let take = |at: &mut usize, n: usize| {
        let s = &bytes[*at..*at + n];
        *at += n;
        s
    };
    let mut at = 0;
    let pk = u64::from_le_bytes(take(&mut at, 8).try_into().unwrap());
    let count = u16::from_le_bytes(take(&mut at, 2).try_into().unwrap());
    let mut fields = Fields::new();
    for _ in 0..count {
        let nlen = u16::from_le_bytes(take(&mut at, 2).try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(&mut at, nlen)).expect("valid field name").to_string();
        let value = match take(&mut at, 1)[0] {
            0 => {
                let slen = u32::from_le_bytes(take(&mut at, 4).try_into().unwrap()) as usize;
                Value::Str(
                    std::str::from_utf8(take(&mut at, slen)).expect("valid string").to_string(),
                )
            }
            1 => Value::Int(i64::from_le_bytes(take(&mut at, 8).try_into().unwrap())),
            2 => Value::Bool(take(&mut at, 1)[0] != 0),
            3 => Value::Point(
                f64::from_le_bytes(take(&mut at, 8).try_into().unwrap()),
                f64::from_le_bytes(take(&mut at, 8).try_into().unwrap()),
            ),
            tag => panic!("unknown candidate value tag {tag}"),
        };
        fields.insert(name, value);
    }
    debug_assert_eq!(at, bytes.len());
    (pk, fields)
}

/// Serializes a group to `max(per_entry_bytes * members, minimal)` bytes:
/// a length-prefixed JSON header, the member ids as fixed 8-byte words, and
/// zero padding up to the policy size.
pub fn encode_group(group: &SubscriptionGroup, per_entry_bytes: usize) -> Vec<u8> {
    let header = serde_json::to_vec(&GroupHeader {
        g: group.group_id,
        n: group.sub_ids.len() as u64,
        p: group.params.clone(),
        b: group.broker.clone(),
    })
    .expect("group header serialization cannot fail");
    assert!(header.len() <= u16::MAX as usize, "group header too large");
    let minimal = 2 + header.len() + 8 * group.sub_ids.len();
    let total = minimal.max(per_entry_bytes * group.sub_ids.len());
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(&header);
    for id in &group.sub_ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out.resize(total, 0);
    out
}

pub fn decode_group(bytes: &[u8]) -> SubscriptionGroup {
    let hlen = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
    let header: GroupHeader =
        serde_json::from_slice(&bytes[2..2 + hlen]).expect("valid group header");
    let mut sub_ids = Vec::with_capacity(header.n as usize);
    let mut at = 2 + hlen;
    for _ in 0..header.n {
        sub_ids.push(u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()));
        at += 8;
    }
    SubscriptionGroup { group_id: header.g, params: header.p, broker: header.b, sub_ids }
}

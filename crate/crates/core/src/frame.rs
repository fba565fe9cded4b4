//! Fixed-capacity frames: the unit of data exchange between operators.
//!
//! A frame always holds whole serialized records. Payload buffers come in
//! capacity-sized units; an oversized record is streamed in and the frame
//! grows one capacity step at a time, copying the partial payload at each
//! step. A frame therefore exceeds its capacity only when it holds exactly
//! one record that is itself larger than the capacity.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    capacity: usize,
    payload: Vec<u8>,
    /// End offset of each record in `payload`.
    ends: Vec<usize>,
}

impl Frame {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "frame capacity must be positive");
        Frame { capacity, payload: Vec::with_capacity(capacity), ends: Vec::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn actual_size(&self) -> usize {
        self.payload.len()
    }

    pub fn record_count(&self) -> usize {
        self.ends.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ends.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &[u8]> {
        let mut start = 0;
        self.ends.iter().map(move |&end| {
            let rec = &self.payload[start..end];
            start = end;
            rec
        })
    }

    fn remaining(&self) -> usize {
        self.payload.capacity() - self.payload.len()
    }

    /// Grows the buffer by one capacity step, copying the current payload
    /// into a fresh capacity-aligned buffer.
    fn grow_step(&mut self) {
        let mut next = Vec::with_capacity(self.payload.capacity() + self.capacity);
        next.extend_from_slice(&self.payload);
        self.payload = next;
    }

    /// Streams a record into the frame, enlarging as needed. Callers decide
    /// whether the record should go into this frame at all; see
    /// [`pack_frames`].
    fn push_record(&mut self, record: &[u8]) {
        let mut rest = record;
        while !rest.is_empty() {
            if self.remaining() == 0 {
                self.grow_step();
            }
            let take = rest.len().min(self.remaining());
            self.payload.extend_from_slice(&rest[..take]);
            rest = &rest[take..];
        }
        if record.is_empty() && self.payload.capacity() == 0 {
            self.grow_step();
        }
        self.ends.push(self.payload.len());
    }
}

/// Greedily packs serialized records into frames, preserving order. A record
/// that does not fit the current frame's free space closes it; a record
/// larger than the capacity gets a frame of its own, enlarged to hold it.
/// The concatenation of all frame payloads equals the input.
pub fn pack_frames<'a, I>(records: I, capacity: usize) -> Vec<Frame>
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut frames: Vec<Frame> = Vec::new();
    let mut current = Frame::new(capacity);
    for record in records {
        let fits = current.actual_size() + record.len() <= capacity;
        if !fits && !current.is_empty() {
            frames.push(std::mem::replace(&mut current, Frame::new(capacity)));
        }
        // Either it fits, or the frame is empty and will enlarge.
        current.push_record(record);
        if current.actual_size() > capacity {
            frames.push(std::mem::replace(&mut current, Frame::new(capacity)));
        }
    }
    if !current.is_empty() {
        frames.push(current);
    }
    frames
}

use super::SimTime;

/// One transmission of a message on the wire.
///
/// `id` is the per-flow transmission number. Every transmission, original or
/// retransmitted, receives a fresh id, so ids are strictly increasing in send
/// order within a flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub flow_id: usize,
    /// Application message carried by this transmission.
    pub message: u64,
    pub size: u32,
    pub sent_at: SimTime,
    pub is_retransmit: bool,
    /// Index into the flow's path of the next link to traverse.
    pub hop: usize,
}

impl Packet {
    pub fn size_bits(&self) -> f64 {
        f64::from(self.size) * 8.0
    }
}

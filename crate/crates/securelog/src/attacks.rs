//! What a break-it team would do to the flawed variants. Used to build
//! judge payloads.

use rand::distr::{Alphanumeric, SampleString};

use crate::codec::{parse_text_event, truncated_key, TruncatedToken, NONCE_LEN, SALT_LEN};
use crate::model::{Event, GalleryState};
use crate::query::{current_state, RoomOrder};

/// Reads the plaintext fixture's log without the token and predicts `-S`.
pub fn read_plaintext_state(bytes: &[u8]) -> Option<String> {
    let text = std::str::from_utf8(bytes).ok()?;
    let events: Vec<Event> = text.lines().skip(1).map(parse_text_event).collect::<Option<_>>()?;
    Some(current_state(&GalleryState::fold_lenient(&events), RoomOrder::Numeric))
}

/// Byte ranges of the individually sealed records in a per-record log.
pub fn per_record_spans(bytes: &[u8]) -> Option<Vec<std::ops::Range<usize>>> {
    let mut pos = 5 + SALT_LEN;
    let mut spans = Vec::new();
    while pos < bytes.len() {
        let len = u32::from_be_bytes(bytes.get(pos..pos + 4)?.try_into().ok()?) as usize;
        let end = pos + 4 + NONCE_LEN + len;
        if end > bytes.len() {
            return None;
        }
        spans.push(pos..end);
        pos = end;
    }
    Some(spans)
}

/// Swaps two sealed records; each still verifies on its own.
pub fn swap_records(bytes: &[u8], i: usize, j: usize) -> Option<Vec<u8>> {
    let spans = per_record_spans(bytes)?;
    let (a, b) = (spans.get(i.min(j))?.clone(), spans.get(i.max(j))?.clone());
    let mut out = bytes[..a.start].to_vec();
    out.extend_from_slice(&bytes[b.clone()]);
    out.extend_from_slice(&bytes[a.end..b.start]);
    out.extend_from_slice(&bytes[a]);
    out.extend_from_slice(&bytes[b.end..]);
    Some(out)
}

/// Recovers the events of a truncated-token log by trying every
/// two-character alphanumeric prefix.
pub fn brute_force_truncated(bytes: &[u8]) -> Option<Vec<Event>> {
    let alphabet: Vec<char> = ('0'..='9').chain('A'..='Z').chain('a'..='z').collect();
    for a in &alphabet {
        for b in &alphabet {
            let guess = format!("{a}{b}");
            if let Ok(events) = TruncatedToken::load_with_key(bytes, &truncated_key(&guess)) {
                return Some(events);
            }
        }
    }
    None
}

pub fn flip_byte(bytes: &[u8], index: usize, mask: u8) -> Vec<u8> {
    let mut out = bytes.to_vec();
    let i = index % out.len();
    out[i] ^= mask.max(1);
    out
}

/// A random guess at a token, for showing the oracle resists guessing.
pub fn guess_token(rng: &mut impl rand::Rng) -> String {
    Alphanumeric.sample_string(rng, 16)
}

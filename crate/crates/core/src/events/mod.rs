//! Event streams: the in-memory model, dataset parsers, windowing and a
//! synthetic moving-shape generator.

mod nmnist;
mod portable;
mod synth;

pub use nmnist::{encode_nmnist_bin, parse_nmnist_bin, NMNIST_SIZE};
pub use portable::{read_portable, read_portable_from, write_portable, write_portable_to};
pub use synth::{synth_moving_shape, SynthConfig, SHAPE_NAMES};

use rand::Rng;

use crate::error::{Error, Result};

/// ON (+1) or OFF (-1) brightness change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    On,
    Off,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }
}

/// A single spike: pixel address, timestamp in microseconds, polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub x: u16,
    pub y: u16,
    pub t: u64,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u16, y: u16, t: u64, p: Polarity) -> Self {
        Self { x, y, t, p }
    }
}

/// Time-ordered events from a sensor of `width` x `height` pixels.
///
/// Construction validates pixel bounds and sorts by timestamp (stable, so
/// events sharing a timestamp keep their input order). The value is
/// immutable afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    events: Vec<Event>,
}

impl EventStream {
    pub fn new(width: u16, height: u16, mut events: Vec<Event>) -> Result<Self> {
        if let Some((i, e)) = events
            .iter()
            .enumerate()
            .find(|(_, e)| e.x >= width || e.y >= height)
        {
            return Err(Error::OutOfRange(format!(
                "event {i} at ({}, {}) outside {width}x{height} sensor",
                e.x, e.y
            )));
        }
        if !events.windows(2).all(|w| w[0].t <= w[1].t) {
            events.sort_by_key(|e| e.t);
        }
        Ok(Self {
            width,
            height,
            events,
        })
    }

    pub fn empty(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            events: Vec::new(),
        }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn first_t(&self) -> Option<u64> {
        self.events.first().map(|e| e.t)
    }

    pub fn last_t(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }

    /// Keeps events whose indices are listed (ascending), preserving order.
    pub(crate) fn select(&self, indices: &[usize]) -> EventStream {
        EventStream {
            width: self.width,
            height: self.height,
            events: indices.iter().map(|&i| self.events[i]).collect(),
        }
    }
}

/// Events with `start <= t < start + length`, timestamps re-based so the
/// window starts at zero.
pub fn extract_window(stream: &EventStream, start: u64, length: u64) -> Result<EventStream> {
    if length == 0 {
        return Err(Error::OutOfRange("window length must be positive".into()));
    }
    let end = start.saturating_add(length);
    let ev = stream.events();
    let lo = ev.partition_point(|e| e.t < start);
    let hi = ev.partition_point(|e| e.t < end);
    let events = ev[lo..hi]
        .iter()
        .map(|e| Event { t: e.t - start, ..*e })
        .collect();
    Ok(EventStream {
        width: stream.width,
        height: stream.height,
        events,
    })
}

/// Where a sample window is placed inside a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowPolicy {
    /// Window begins at the given offset from the first event.
    Fixed(u64),
    /// Start drawn uniformly so the window fits inside the recording when
    /// possible.
    Random,
}

/// Start time of a window of `length` under `policy`.
pub fn window_start<R: Rng + ?Sized>(
    stream: &EventStream,
    length: u64,
    policy: WindowPolicy,
    rng: &mut R,
) -> u64 {
    let (Some(first), Some(last)) = (stream.first_t(), stream.last_t()) else {
        return 0;
    };
    match policy {
        WindowPolicy::Fixed(offset) => first + offset,
        WindowPolicy::Random => {
            let latest = last.saturating_sub(length.saturating_sub(1)).max(first);
            rng.gen_range(first..=latest)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(x: u16, y: u16, t: u64) -> Event {
        Event::new(x, y, t, Polarity::On)
    }

    #[test]
    fn construction_sorts_and_validates() {
        let s = EventStream::new(4, 4, vec![ev(0, 0, 5), ev(1, 1, 2)]).unwrap();
        assert_eq!(s.events()[0].t, 2);
        assert!(EventStream::new(4, 4, vec![ev(4, 0, 0)]).is_err());
        assert!(EventStream::new(4, 4, vec![ev(0, 4, 0)]).is_err());
    }

    #[test]
    fn window_filters_half_open_and_rebases() {
        let s = EventStream::new(34, 34, vec![ev(0, 0, 0), ev(1, 0, 10_000), ev(2, 0, 40_000)])
            .unwrap();
        let w = extract_window(&s, 0, 30_000).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.events()[1].t, 10_000);

        let full = extract_window(&s, 0, 40_001).unwrap();
        assert_eq!(full.len(), 3);
        let shifted = extract_window(&s, 10_000, 30_001).unwrap();
        assert_eq!(
            shifted.events().iter().map(|e| e.t).collect::<Vec<_>>(),
            vec![0, 30_000]
        );
        assert!(extract_window(&s, 50_000, 1000).unwrap().is_empty());
        assert!(extract_window(&s, 0, 0).is_err());
    }

    #[test]
    fn adjacent_windows_partition() {
        let events: Vec<_> = (0..100).map(|i| ev(0, 0, i * 37)).collect();
        let s = EventStream::new(1, 1, events).unwrap();
        let total: usize = (0..10)
            .map(|w| extract_window(&s, w * 400, 400).unwrap().len())
            .sum();
        assert_eq!(total, 100);
    }

    #[test]
    fn random_window_fits_recording() {
        use rand::SeedableRng;
        let s = EventStream::new(1, 1, vec![ev(0, 0, 100), ev(0, 0, 50_100)]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let st = window_start(&s, 30_000, WindowPolicy::Random, &mut rng);
            assert!((100..=20_101).contains(&st));
        }
        assert_eq!(window_start(&s, 30_000, WindowPolicy::Fixed(0), &mut rng), 100);
    }
}

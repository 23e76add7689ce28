//! Event streams, the EVS1 file format and conversion to dense 1 ms frames.
//!
//! EVS1 layout (all integers little-endian):
//!
//! ```text
//! "EVS1" | u16 width | u16 height | u32 label (0xFFFFFFFF = none) | u64 count
//! count × { u64 t_us | u16 x | u16 y | u8 polarity | u8 reserved = 0 }
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use crate::error::{shape_err, Error, Result};

pub const EVS1_MAGIC: &[u8; 4] = b"EVS1";
pub const EVS1_UNLABELED: u32 = 0xFFFF_FFFF;
const HEADER_LEN: usize = 4 + 2 + 2 + 4 + 8;
const RECORD_LEN: usize = 8 + 2 + 2 + 1 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Polarity {
    Off = 0,
    On = 1,
}

impl Polarity {
    pub fn channel(self) -> usize {
        self as usize
    }
}

impl TryFrom<u8> for Polarity {
    type Error = u8;

    fn try_from(v: u8) -> std::result::Result<Self, u8> {
        match v {
            0 => Ok(Polarity::Off),
            1 => Ok(Polarity::On),
            other => Err(other),
        }
    }
}

/// One sensor event: microsecond timestamp, pixel and polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, polarity: Polarity) -> Self {
        Self { t, x, y, polarity }
    }
}

/// A time-ordered event stream from a `width × height` sensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    events: Vec<Event>,
    label: Option<u32>,
}

impl EventStream {
    /// Builds a stream, sorting events by timestamp (stable) and checking bounds.
    pub fn new(
        width: u16,
        height: u16,
        mut events: Vec<Event>,
        label: Option<u32>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation(format!(
                "sensor size must be positive, got {width}x{height}"
            )));
        }
        if label == Some(EVS1_UNLABELED) {
            return Err(Error::Validation("label 0xFFFFFFFF is reserved".into()));
        }
        for (i, e) in events.iter().enumerate() {
            check_bounds(e, width, height, i as u64)?;
        }
        events.sort_by_key(|e| e.t);
        Ok(Self {
            width,
            height,
            events,
            label,
        })
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

    pub fn label(&self) -> Option<u32> {
        self.label
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Serializes to EVS1 bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * self.events.len());
        out.extend_from_slice(EVS1_MAGIC);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.label.unwrap_or(EVS1_UNLABELED).to_le_bytes());
        out.extend_from_slice(&(self.events.len() as u64).to_le_bytes());
        for e in &self.events {
            out.extend_from_slice(&e.t.to_le_bytes());
            out.extend_from_slice(&e.x.to_le_bytes());
            out.extend_from_slice(&e.y.to_le_bytes());
            out.push(e.polarity as u8);
            out.push(0);
        }
        out
    }

    /// Parses EVS1 bytes. Records are re-sorted by timestamp.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != EVS1_MAGIC {
            return Err(Error::Format("missing EVS1 header".into()));
        }
        let width = u16::from_le_bytes([bytes[4], bytes[5]]);
        let height = u16::from_le_bytes([bytes[6], bytes[7]]);
        let label = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        if width == 0 || height == 0 {
            return Err(Error::Format(format!("zero sensor size {width}x{height}")));
        }
        let body = &bytes[HEADER_LEN..];
        let expected = (count as u128) * RECORD_LEN as u128;
        if body.len() as u128 != expected {
            return Err(Error::Format(format!(
                "header declares {count} records ({expected} bytes) but body has {} bytes",
                body.len()
            )));
        }
        let mut events = Vec::with_capacity(count as usize);
        for (i, rec) in body.chunks_exact(RECORD_LEN).enumerate() {
            let index = i as u64;
            let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
            let x = u16::from_le_bytes([rec[8], rec[9]]);
            let y = u16::from_le_bytes([rec[10], rec[11]]);
            let polarity = Polarity::try_from(rec[12]).map_err(|p| Error::Record {
                index,
                reason: format!("polarity {p} is not 0 or 1"),
            })?;
            if rec[13] != 0 {
                return Err(Error::Format(format!(
                    "record {index}: reserved byte is {}",
                    rec[13]
                )));
            }
            let e = Event { t, x, y, polarity };
            check_bounds(&e, width, height, index)?;
            events.push(e);
        }
        events.sort_by_key(|e| e.t);
        Ok(Self {
            width,
            height,
            events,
            label: (label != EVS1_UNLABELED).then_some(label),
        })
    }
}

fn check_bounds(e: &Event, width: u16, height: u16, index: u64) -> Result<()> {
    if e.x >= width || e.y >= height {
        return Err(Error::Record {
            index,
            reason: format!("pixel ({}, {}) outside {width}x{height} sensor", e.x, e.y),
        });
    }
    Ok(())
}

/// Reads an EVS1 file.
pub fn load_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let bytes = fs::read(path)?;
    EventStream::from_bytes(&bytes)
}

/// Writes an EVS1 file.
pub fn write_events(path: impl AsRef<Path>, stream: &EventStream) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&stream.to_bytes())?;
    Ok(())
}

/// Dense event counts shaped `[T × 2 × H × W]`; channel 0 is off, channel 1 on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    steps: usize,
    height: usize,
    width: usize,
    dt: Duration,
    counts: Vec<u32>,
}

impl FrameSequence {
    pub const CHANNELS: usize = 2;

    pub fn zeros(steps: usize, height: usize, width: usize, dt: Duration) -> Self {
        Self {
            steps,
            height,
            width,
            dt,
            counts: vec![0; steps * Self::CHANNELS * height * width],
        }
    }

    /// Wraps raw counts laid out `[t][c][y][x]`.
    pub fn from_counts(
        steps: usize,
        height: usize,
        width: usize,
        dt: Duration,
        counts: Vec<u32>,
    ) -> Result<Self> {
        if counts.len() != steps * Self::CHANNELS * height * width {
            return Err(shape_err(format!(
                "{} counts for shape [{steps} x 2 x {height} x {width}]",
                counts.len()
            )));
        }
        Ok(Self {
            steps,
            height,
            width,
            dt,
            counts,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dt(&self) -> Duration {
        self.dt
    }

    /// Elements in one frame (`2 × H × W`).
    pub fn frame_len(&self) -> usize {
        Self::CHANNELS * self.height * self.width
    }

    pub fn frame(&self, t: usize) -> &[u32] {
        let n = self.frame_len();
        &self.counts[t * n..(t + 1) * n]
    }

    pub fn get(&self, t: usize, channel: usize, y: usize, x: usize) -> u32 {
        self.counts[self.index(t, channel, y, x)]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    fn index(&self, t: usize, channel: usize, y: usize, x: usize) -> usize {
        ((t * Self::CHANNELS + channel) * self.height + y) * self.width + x
    }
}

/// Bins events into `ceil(clip / dt)` frames; events with `t >= clip` are dropped.
pub fn bin_to_frames(stream: &EventStream, dt: Duration, clip: Duration) -> Result<FrameSequence> {
    let dt_us = dt.as_micros();
    let clip_us = clip.as_micros();
    if dt_us == 0 || clip_us == 0 {
        return Err(Error::Validation(format!(
            "dt and clip must be positive (got {dt:?}, {clip:?})"
        )));
    }
    let steps = clip_us.div_ceil(dt_us) as usize;
    let mut frames =
        FrameSequence::zeros(steps, stream.height() as usize, stream.width() as usize, dt);
    for e in stream.events() {
        let t = e.t as u128;
        if t >= clip_us {
            // sorted, nothing later can land inside the window
            break;
        }
        let idx = frames.index(
            (t / dt_us) as usize,
            e.polarity.channel(),
            e.y as usize,
            e.x as usize,
        );
        frames.counts[idx] += 1;
    }
    Ok(frames)
}

/// Block-sum downsampling to `target = (height, width)`.
pub fn downsample(frames: &FrameSequence, target: (usize, usize)) -> Result<FrameSequence> {
    let (th, tw) = target;
    if th == 0 || tw == 0 || !frames.height.is_multiple_of(th) || !frames.width.is_multiple_of(tw) {
        return Err(shape_err(format!(
            "cannot block-downsample {}x{} to {th}x{tw}",
            frames.height, frames.width
        )));
    }
    let (bh, bw) = (frames.height / th, frames.width / tw);
    let mut out = FrameSequence::zeros(frames.steps, th, tw, frames.dt);
    for t in 0..frames.steps {
        for c in 0..FrameSequence::CHANNELS {
            for y in 0..frames.height {
                for x in 0..frames.width {
                    let v = frames.get(t, c, y, x);
                    if v != 0 {
                        let idx = out.index(t, c, y / bh, x / bw);
                        out.counts[idx] += v;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t: u64, x: u16, y: u16, p: u8) -> Event {
        Event::new(t, x, y, Polarity::try_from(p).unwrap())
    }

    #[test]
    fn empty_file_loads_empty_stream() {
        let s = EventStream::new(4, 4, vec![], None).unwrap();
        let back = EventStream::from_bytes(&s.to_bytes()).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.label(), None);
    }

    #[test]
    fn records_are_sorted_on_load() {
        let s = EventStream {
            width: 4,
            height: 4,
            events: vec![ev(5, 1, 2, 1), ev(3, 0, 0, 0)],
            label: Some(2),
        };
        let back = EventStream::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(back.events()[0].t, 3);
        assert_eq!(back.events()[1].t, 5);
        assert_eq!(back.label(), Some(2));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            EventStream::from_bytes(b"EVS"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            EventStream::from_bytes(b"EVS2\x04\x00\x04\x00\xff\xff\xff\xff\0\0\0\0\0\0\0\0"),
            Err(Error::Format(_))
        ));
        let mut bytes = EventStream::new(4, 4, vec![ev(1, 1, 1, 1)], None)
            .unwrap()
            .to_bytes();
        bytes.pop();
        assert!(matches!(
            EventStream::from_bytes(&bytes),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn out_of_bounds_reports_record_index() {
        let s = EventStream {
            width: 4,
            height: 4,
            events: vec![ev(0, 1, 1, 1), ev(1, 4, 0, 0)],
            label: None,
        };
        match EventStream::from_bytes(&s.to_bytes()) {
            Err(Error::Record { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_polarity_rejected() {
        let mut bytes = EventStream::new(4, 4, vec![ev(0, 1, 1, 1)], None)
            .unwrap()
            .to_bytes();
        bytes[HEADER_LEN + 12] = 2;
        assert!(matches!(
            EventStream::from_bytes(&bytes),
            Err(Error::Record { index: 0, .. })
        ));
    }

    #[test]
    fn same_millisecond_events_share_a_bin() {
        let s = EventStream::new(2, 2, vec![ev(0, 1, 1, 1), ev(999, 1, 1, 1)], None).unwrap();
        let f = bin_to_frames(&s, Duration::from_millis(1), Duration::from_millis(10)).unwrap();
        assert_eq!(f.get(0, 1, 1, 1), 2);
        assert_eq!(f.total(), 2);
    }

    #[test]
    fn clip_window_is_half_open() {
        let s = EventStream::new(
            2,
            2,
            vec![ev(1_499_999, 0, 0, 0), ev(1_500_000, 0, 0, 1)],
            None,
        )
        .unwrap();
        let f = bin_to_frames(&s, Duration::from_millis(1), Duration::from_millis(1500)).unwrap();
        assert_eq!(f.steps(), 1500);
        assert_eq!(f.total(), 1);
        assert_eq!(f.get(1499, 0, 0, 0), 1);
    }

    #[test]
    fn partial_last_frame_rounds_up() {
        let s = EventStream::new(1, 1, vec![], None).unwrap();
        let f = bin_to_frames(&s, Duration::from_millis(2), Duration::from_millis(5)).unwrap();
        assert_eq!(f.steps(), 3);
    }

    #[test]
    fn zero_dt_rejected() {
        let s = EventStream::new(1, 1, vec![], None).unwrap();
        assert!(bin_to_frames(&s, Duration::ZERO, Duration::from_millis(5)).is_err());
    }

    #[test]
    fn downsample_uniform_blocks() {
        let f = FrameSequence::from_counts(
            1,
            128,
            128,
            Duration::from_millis(1),
            vec![1; 2 * 128 * 128],
        )
        .unwrap();
        let d = downsample(&f, (32, 32)).unwrap();
        assert!(d.counts().iter().all(|&c| c == 16));
    }

    #[test]
    fn downsample_single_event_lands_top_left() {
        let s = EventStream::new(128, 128, vec![ev(0, 0, 0, 1)], None).unwrap();
        let f = bin_to_frames(&s, Duration::from_millis(1), Duration::from_millis(1)).unwrap();
        let d = downsample(&f, (32, 32)).unwrap();
        assert_eq!(d.get(0, 1, 0, 0), 1);
        assert_eq!(d.total(), 1);
    }

    #[test]
    fn downsample_rejects_non_divisible_target() {
        let f = FrameSequence::zeros(1, 10, 10, Duration::from_millis(1));
        assert!(matches!(downsample(&f, (3, 5)), Err(Error::Shape(_))));
    }
}

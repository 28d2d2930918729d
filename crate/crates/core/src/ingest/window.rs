use std::collections::VecDeque;

use super::{IngestError, SampleRecord, StreamConfig};

/// An immutable analysis window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowBuffer {
    pub samples: Vec<f64>,
    /// Timestamp of the first sample.
    pub start_time: f64,
    pub sampling_rate: f64,
    /// Ordinal of this window within its stream.
    pub index: u64,
    /// A timestamp gap wider than two sample periods falls inside the window.
    pub discontinuous: bool,
}

impl WindowBuffer {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sampling_rate
    }

    /// Time just past the last sample.
    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }
}

/// Push-based sliding-window assembler.
///
/// The first window covers samples `[0, window_len)`, each later one advances
/// by `hop_len`, so neighbours share `window_len - hop_len` samples.
#[derive(Debug)]
pub struct WindowAssembler {
    window_len: usize,
    hop_len: usize,
    rate: f64,
    buf: VecDeque<(f64, f64)>,
    /// Absolute index of `buf[0]`.
    first_index: u64,
    pushed: u64,
    emitted: u64,
    last_timestamp: Option<f64>,
    /// Absolute indices of samples preceded by a gap.
    gaps: VecDeque<u64>,
}

impl WindowAssembler {
    pub fn new(config: &StreamConfig) -> Result<Self, IngestError> {
        config.validate()?;
        Ok(Self::with_lengths(config.window_len(), config.hop_len(), config.sampling_rate))
    }

    pub fn with_lengths(window_len: usize, hop_len: usize, rate: f64) -> Self {
        assert!(window_len > hop_len && hop_len > 0, "need window_len > hop_len > 0");
        WindowAssembler {
            window_len,
            hop_len,
            rate,
            buf: VecDeque::with_capacity(window_len),
            first_index: 0,
            pushed: 0,
            emitted: 0,
            last_timestamp: None,
            gaps: VecDeque::new(),
        }
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop_len(&self) -> usize {
        self.hop_len
    }

    pub fn samples_pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, sample: SampleRecord) -> Result<Option<WindowBuffer>, IngestError> {
        if !sample.value.is_finite() {
            return Err(IngestError::NonFiniteSample(self.pushed));
        }
        if let Some(last) = self.last_timestamp {
            if !(sample.timestamp > last) {
                return Err(IngestError::NonMonotonicTimestamp(sample.timestamp));
            }
            // tolerate rounding in recorded timestamps
            if sample.timestamp - last > 2.0 / self.rate * (1.0 + 1e-9) {
                self.gaps.push_back(self.pushed);
            }
        }
        self.last_timestamp = Some(sample.timestamp);
        self.buf.push_back((sample.timestamp, sample.value));
        self.pushed += 1;

        if self.buf.len() < self.window_len {
            return Ok(None);
        }
        let end = self.first_index + self.window_len as u64;
        let discontinuous = self.gaps.iter().any(|&g| g > self.first_index && g < end);
        let window = WindowBuffer {
            samples: self.buf.iter().map(|&(_, v)| v).collect(),
            start_time: self.buf[0].0,
            sampling_rate: self.rate,
            index: self.emitted,
            discontinuous,
        };
        self.emitted += 1;
        self.buf.drain(..self.hop_len);
        self.first_index += self.hop_len as u64;
        while self.gaps.front().is_some_and(|&g| g <= self.first_index) {
            self.gaps.pop_front();
        }
        Ok(Some(window))
    }
}

/// Pull-based window iterator over a sample stream.
pub struct WindowStream<I> {
    samples: I,
    assembler: WindowAssembler,
    done: bool,
}

impl<I> WindowStream<I>
where
    I: Iterator<Item = Result<SampleRecord, IngestError>>,
{
    pub fn new(samples: I, config: &StreamConfig) -> Result<Self, IngestError> {
        Ok(WindowStream {
            samples,
            assembler: WindowAssembler::new(config)?,
            done: false,
        })
    }

    pub fn from_assembler(samples: I, assembler: WindowAssembler) -> Self {
        WindowStream {
            samples,
            assembler,
            done: false,
        }
    }

    /// Next complete window, or `None` once the stream is exhausted.
    pub fn next_window(&mut self) -> Result<Option<WindowBuffer>, IngestError> {
        if self.done {
            return Ok(None);
        }
        for sample in self.samples.by_ref() {
            if let Some(w) = self.assembler.push(sample?)? {
                return Ok(Some(w));
            }
        }
        self.done = true;
        Ok(None)
    }
}

impl<I> Iterator for WindowStream<I>
where
    I: Iterator<Item = Result<SampleRecord, IngestError>>,
{
    type Item = Result<WindowBuffer, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_window().transpose()
    }
}

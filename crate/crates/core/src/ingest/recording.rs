//! `eeg.raw` recording format.
//!
//! ```text
//! "MBCI"              4 bytes magic
//! version             u16 LE (currently 1)
//! sampling_rate       f32 LE, Hz
//! label_len           u16 LE
//! label               label_len bytes UTF-8 channel label
//! samples             f32 LE microvolts until EOF
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use super::IngestError;

pub const RECORDING_MAGIC: &[u8; 4] = b"MBCI";
pub const RECORDING_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct RecordingHeader {
    pub version: u16,
    pub sampling_rate: f32,
    pub channel_label: String,
}

impl RecordingHeader {
    pub fn new(sampling_rate: f64, channel_label: impl Into<String>) -> Self {
        RecordingHeader {
            version: RECORDING_VERSION,
            sampling_rate: sampling_rate as f32,
            channel_label: channel_label.into(),
        }
    }

    /// Size of the encoded header in bytes.
    pub fn encoded_len(&self) -> usize {
        4 + 2 + 4 + 2 + self.channel_label.len()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        let label = self.channel_label.as_bytes();
        let len = u16::try_from(label.len())
            .map_err(|_| io::Error::new(ErrorKind::InvalidInput, "channel label longer than 65535 bytes"))?;
        w.write_all(RECORDING_MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&self.sampling_rate.to_le_bytes())?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(label)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, IngestError> {
        let malformed = |what: &str| IngestError::MalformedHeader(what.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| malformed("truncated magic"))?;
        if &magic != RECORDING_MAGIC {
            return Err(malformed("bad magic bytes"));
        }
        let mut u16buf = [0u8; 2];
        r.read_exact(&mut u16buf).map_err(|_| malformed("truncated version"))?;
        let version = u16::from_le_bytes(u16buf);
        if version != RECORDING_VERSION {
            return Err(IngestError::MalformedHeader(format!("unsupported version {version}")));
        }
        let mut f32buf = [0u8; 4];
        r.read_exact(&mut f32buf).map_err(|_| malformed("truncated sampling rate"))?;
        let sampling_rate = f32::from_le_bytes(f32buf);
        if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
            return Err(IngestError::MalformedHeader(format!("invalid sampling rate {sampling_rate}")));
        }
        r.read_exact(&mut u16buf).map_err(|_| malformed("truncated label length"))?;
        let mut label = vec![0u8; u16::from_le_bytes(u16buf) as usize];
        r.read_exact(&mut label).map_err(|_| malformed("truncated channel label"))?;
        let channel_label = String::from_utf8(label).map_err(|_| malformed("channel label is not UTF-8"))?;
        Ok(RecordingHeader {
            version,
            sampling_rate,
            channel_label,
        })
    }
}

/// A fully loaded recording.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub header: RecordingHeader,
    pub samples: Vec<f32>,
}

impl Recording {
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.header.sampling_rate as f64
    }

    pub fn samples_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&v| v as f64).collect()
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|e| {
        if e.kind() == ErrorKind::NotFound {
            IngestError::MissingFile(path.to_path_buf())
        } else {
            io_err(path)(e)
        }
    })
}

/// Streaming reader over the sample payload.
pub struct RecordingReader {
    header: RecordingHeader,
    reader: BufReader<File>,
    path: PathBuf,
}

impl RecordingReader {
    pub fn open(path: &Path) -> Result<Self, IngestError> {
        let mut reader = BufReader::new(open(path)?);
        let header = RecordingHeader::read_from(&mut reader)?;
        Ok(RecordingReader {
            header,
            reader,
            path: path.to_path_buf(),
        })
    }

    pub fn header(&self) -> &RecordingHeader {
        &self.header
    }

    /// Next sample, `None` at end of file. A trailing partial sample (1-3
    /// bytes) is reported as a malformed payload.
    pub fn next_sample(&mut self) -> Result<Option<f32>, IngestError> {
        let mut buf = [0u8; 4];
        let mut filled = 0;
        while filled < 4 {
            match self.reader.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(e) => return Err(io_err(&self.path)(e)),
            }
        }
        match filled {
            0 => Ok(None),
            4 => Ok(Some(f32::from_le_bytes(buf))),
            _ => Err(IngestError::MalformedHeader(format!(
                "{}: payload ends with a partial sample",
                self.path.display()
            ))),
        }
    }
}

pub fn read_recording(path: &Path) -> Result<Recording, IngestError> {
    let mut reader = RecordingReader::open(path)?;
    let mut samples = Vec::new();
    while let Some(v) = reader.next_sample()? {
        samples.push(v);
    }
    Ok(Recording {
        header: reader.header,
        samples,
    })
}

pub fn write_recording(path: &Path, header: &RecordingHeader, samples: &[f32]) -> Result<(), IngestError> {
    let mut w = RecordingWriter::create(path, header.clone())?;
    w.append(samples)?;
    w.finish()?;
    Ok(())
}

/// Incremental writer used by live sessions.
pub struct RecordingWriter {
    inner: BufWriter<File>,
    path: PathBuf,
    samples: u64,
}

impl RecordingWriter {
    pub fn create(path: &Path, header: RecordingHeader) -> Result<Self, IngestError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut inner = BufWriter::new(file);
        header.write_to(&mut inner).map_err(io_err(path))?;
        Ok(RecordingWriter {
            inner,
            path: path.to_path_buf(),
            samples: 0,
        })
    }

    pub fn append(&mut self, samples: &[f32]) -> Result<(), IngestError> {
        for v in samples {
            self.inner.write_all(&v.to_le_bytes()).map_err(io_err(&self.path))?;
        }
        self.samples += samples.len() as u64;
        Ok(())
    }

    pub fn sample_count(&self) -> u64 {
        self.samples
    }

    /// Flushes buffered data and fsyncs the file.
    pub fn sync(&mut self) -> Result<(), IngestError> {
        self.inner.flush().map_err(io_err(&self.path))?;
        self.inner.get_ref().sync_all().map_err(io_err(&self.path))
    }

    pub fn finish(mut self) -> Result<u64, IngestError> {
        self.sync()?;
        Ok(self.samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_bit_exact() {
        let header = RecordingHeader::new(250.0, "Fp2");
        let mut bytes = Vec::new();
        header.write_to(&mut bytes).unwrap();
        let mut expected = b"MBCI".to_vec();
        expected.extend_from_slice(&1u16.to_le_bytes());
        expected.extend_from_slice(&250.0f32.to_le_bytes());
        expected.extend_from_slice(&3u16.to_le_bytes());
        expected.extend_from_slice(b"Fp2");
        assert_eq!(bytes, expected);
        assert_eq!(bytes.len(), header.encoded_len());
    }

    #[test]
    fn round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eeg.raw");
        let samples: Vec<f32> = (0..1000).map(|i| (i as f32 * 0.1).sin() * 40.0).collect();
        write_recording(&path, &RecordingHeader::new(250.0, "Fp2"), &samples).unwrap();
        let rec = read_recording(&path).unwrap();
        assert_eq!(rec.samples, samples);
        assert_eq!(rec.header.channel_label, "Fp2");

        // chop two bytes off the last sample
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(read_recording(&path), Err(IngestError::MalformedHeader(_))));
    }

    #[test]
    fn rejects_bad_magic_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.raw");
        std::fs::write(&path, b"EDF+....").unwrap();
        assert!(matches!(read_recording(&path), Err(IngestError::MalformedHeader(_))));
        assert!(matches!(
            read_recording(&dir.path().join("nope.raw")),
            Err(IngestError::MissingFile(_))
        ));
    }
}

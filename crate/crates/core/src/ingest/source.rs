use std::io::{BufReader, ErrorKind, Read};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::recording::RecordingReader;
use super::{synth_generate, IngestError, SampleRecord, SourceSpec, StreamConfig};

/// A boxed, sendable sample stream.
pub type SampleStream = Box<dyn Iterator<Item = Result<SampleRecord, IngestError>> + Send>;

const DEVICE_CONNECT_TIMEOUT: Duration = Duration::from_secs(2);

/// Opens the configured source.
///
/// Replay timestamps are `index / sampling_rate` using the configured rate,
/// which rescales recordings whose header rate differs.
pub fn open_source(config: &StreamConfig) -> Result<SampleStream, IngestError> {
    config.validate()?;
    let rate = config.sampling_rate;
    match &config.source {
        SourceSpec::Replay { path } => {
            let mut reader = RecordingReader::open(path)?;
            if (reader.header().sampling_rate as f64) < super::MIN_SAMPLING_RATE {
                return Err(IngestError::UnsupportedRate(reader.header().sampling_rate as f64));
            }
            let mut index = 0u64;
            let mut failed = false;
            Ok(Box::new(std::iter::from_fn(move || {
                if failed {
                    return None;
                }
                match reader.next_sample() {
                    Ok(Some(v)) => {
                        let rec = SampleRecord {
                            timestamp: index as f64 / rate,
                            value: v as f64,
                            channel: 0,
                        };
                        index += 1;
                        Some(Ok(rec))
                    }
                    Ok(None) => None,
                    Err(e) => {
                        failed = true;
                        Some(Err(e))
                    }
                }
            })))
        }
        SourceSpec::Synthetic {
            control,
            duration_seconds,
            seed,
        } => Ok(Box::new(
            synth_generate(control, *duration_seconds, rate, *seed).into_iter().map(Ok),
        )),
        SourceSpec::Device { address } => {
            let unavailable = |source| IngestError::DeviceUnavailable {
                address: address.clone(),
                source,
            };
            let addr = address
                .to_socket_addrs()
                .map_err(unavailable)?
                .next()
                .ok_or_else(|| unavailable(std::io::Error::new(ErrorKind::NotFound, "address did not resolve")))?;
            let stream = TcpStream::connect_timeout(&addr, DEVICE_CONNECT_TIMEOUT).map_err(unavailable)?;
            let address = address.clone();
            let mut reader = BufReader::new(stream);
            let mut index = 0u64;
            let mut failed = false;
            Ok(Box::new(std::iter::from_fn(move || {
                if failed {
                    return None;
                }
                let mut buf = [0u8; 4];
                match reader.read_exact(&mut buf) {
                    Ok(()) => {
                        let rec = SampleRecord {
                            timestamp: index as f64 / rate,
                            value: f32::from_le_bytes(buf) as f64,
                            channel: 0,
                        };
                        index += 1;
                        Some(Ok(rec))
                    }
                    Err(e) if e.kind() == ErrorKind::UnexpectedEof => None,
                    Err(source) => {
                        failed = true;
                        Some(Err(IngestError::DeviceUnavailable {
                            address: address.clone(),
                            source,
                        }))
                    }
                }
            })))
        }
    }
}

//! Binary record file: one file per campaign run and mode.
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 8  | magic `RISREC\0\0` |
//! | 8  | 4  | format version (`u32`, currently 1) |
//! | 12 | 1  | mode (`0` passive, `1` active) |
//! | 13 | 1  | weight law (`0` polyphase, `1` random phase) |
//! | 14 | 2  | reserved, zero |
//! | 16 | 4  | `Q`, subcarriers (`u32`) |
//! | 20 | 4  | repetitions (`u32`) |
//! | 24 | 8  | `Δf`, Hz (`f64`) |
//! | 32 | 8  | center frequency, Hz (`f64`) |
//! | 40 | 8  | campaign seed (`u64`) |
//! | 48 | 8  | waveform seed (`u64`) |
//! | 56 | 8  | record count `N` (`u64`) |
//! | 64 | 16·Q | RF calibration `Ĥ_RF[q]`, interleaved re/im `f64` |
//!
//! followed by `N` records of `32 + 16·Q` bytes each:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 4 | config id (`u32`) |
//! | 4  | 1 | kind (`0` steering, `1` calibration) |
//! | 5  | 3 | reserved, zero |
//! | 8  | 8 | azimuth, degrees (`f64`) |
//! | 16 | 8 | elevation, degrees (`f64`) |
//! | 24 | 8 | noise power per subcarrier, W (`f64`) |
//! | 32 | 16·Q | received `Y[q]`, interleaved re/im `f64` |

use std::path::Path;

use num_complex::Complex64;

use crate::channel::Mode;
use crate::error::{Result, RisError};
use crate::geometry::Direction;
use crate::sounder::{CalibrationFunction, SoundingWaveform, WeightLaw};

pub const RECORD_MAGIC: [u8; 8] = *b"RISREC\0\0";
pub const RECORD_FORMAT_VERSION: u32 = 1;
const HEADER_FIXED: usize = 64;
const RECORD_FIXED: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct RecordHeader {
    pub mode: Mode,
    pub law: WeightLaw,
    pub subcarriers: u32,
    pub repetitions: u32,
    pub delta_f: f64,
    pub center_frequency: f64,
    pub campaign_seed: u64,
    pub waveform_seed: u64,
    pub calibration: Vec<Complex64>,
}

impl RecordHeader {
    pub fn new(mode: Mode, waveform: &SoundingWaveform, calibration: &CalibrationFunction, campaign_seed: u64) -> Self {
        RecordHeader {
            mode,
            law: waveform.law(),
            subcarriers: waveform.subcarriers() as u32,
            repetitions: waveform.repetitions() as u32,
            delta_f: waveform.delta_f(),
            center_frequency: waveform.center_frequency(),
            campaign_seed,
            waveform_seed: waveform.seed(),
            calibration: calibration.response().to_vec(),
        }
    }

    /// Rebuilds the sounding waveform described by the header.
    pub fn waveform(&self) -> Result<SoundingWaveform> {
        SoundingWaveform::new(
            self.subcarriers as usize,
            self.delta_f,
            self.center_frequency,
            self.waveform_seed,
            self.law,
            self.repetitions as usize,
        )
    }

    pub fn calibration_function(&self) -> Result<CalibrationFunction> {
        CalibrationFunction::new(self.calibration.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Steering,
    Calibration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredRecord {
    pub config_id: u32,
    pub kind: RecordKind,
    pub direction: Direction,
    pub noise_power: f64,
    pub received: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordFile {
    pub header: RecordHeader,
    pub records: Vec<StoredRecord>,
}

fn put_complex(out: &mut Vec<u8>, values: &[Complex64]) {
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| RisError::Format(format!("record file truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn complex(&mut self, n: usize) -> Result<Vec<Complex64>> {
        (0..n).map(|_| Ok(Complex64::new(self.f64()?, self.f64()?))).collect()
    }
}

impl RecordFile {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let q = self.header.subcarriers as usize;
        if self.header.calibration.len() != q {
            return Err(RisError::invalid("header calibration length differs from Q"));
        }
        let mut out = Vec::with_capacity(HEADER_FIXED + 16 * q + self.records.len() * (RECORD_FIXED + 16 * q));
        out.extend_from_slice(&RECORD_MAGIC);
        out.extend_from_slice(&RECORD_FORMAT_VERSION.to_le_bytes());
        out.push(match self.header.mode {
            Mode::Passive => 0,
            Mode::Active => 1,
        });
        out.push(self.header.law.code());
        out.extend_from_slice(&[0, 0]);
        out.extend_from_slice(&self.header.subcarriers.to_le_bytes());
        out.extend_from_slice(&self.header.repetitions.to_le_bytes());
        out.extend_from_slice(&self.header.delta_f.to_le_bytes());
        out.extend_from_slice(&self.header.center_frequency.to_le_bytes());
        out.extend_from_slice(&self.header.campaign_seed.to_le_bytes());
        out.extend_from_slice(&self.header.waveform_seed.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        put_complex(&mut out, &self.header.calibration);
        for r in &self.records {
            if r.received.len() != q {
                return Err(RisError::invalid(format!(
                    "record for config {} has {} subcarriers, expected {q}",
                    r.config_id,
                    r.received.len()
                )));
            }
            out.extend_from_slice(&r.config_id.to_le_bytes());
            out.push(match r.kind {
                RecordKind::Steering => 0,
                RecordKind::Calibration => 1,
            });
            out.extend_from_slice(&[0, 0, 0]);
            out.extend_from_slice(&r.direction.azimuth.to_le_bytes());
            out.extend_from_slice(&r.direction.elevation.to_le_bytes());
            out.extend_from_slice(&r.noise_power.to_le_bytes());
            put_complex(&mut out, &r.received);
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut rd = Reader { buf, pos: 0 };
        if rd.take(8)? != RECORD_MAGIC {
            return Err(RisError::Format("not a record file (bad magic)".into()));
        }
        let version = rd.u32()?;
        if version != RECORD_FORMAT_VERSION {
            return Err(RisError::Format(format!("unsupported record format version {version}")));
        }
        let mode = match rd.u8()? {
            0 => Mode::Passive,
            1 => Mode::Active,
            m => return Err(RisError::Format(format!("unknown mode code {m}"))),
        };
        let law = WeightLaw::from_code(rd.u8()?)?;
        rd.take(2)?;
        let subcarriers = rd.u32()?;
        let repetitions = rd.u32()?;
        let delta_f = rd.f64()?;
        let center_frequency = rd.f64()?;
        let campaign_seed = rd.u64()?;
        let waveform_seed = rd.u64()?;
        let count = rd.u64()? as usize;
        let q = subcarriers as usize;
        let calibration = rd.complex(q)?;
        let expected = HEADER_FIXED + 16 * q + count.saturating_mul(RECORD_FIXED + 16 * q);
        if buf.len() != expected {
            return Err(RisError::Format(format!(
                "record file is {} bytes, header implies {expected}",
                buf.len()
            )));
        }
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let config_id = rd.u32()?;
            let kind = match rd.u8()? {
                0 => RecordKind::Steering,
                1 => RecordKind::Calibration,
                k => return Err(RisError::Format(format!("unknown record kind {k}"))),
            };
            rd.take(3)?;
            let direction = Direction {
                azimuth: rd.f64()?,
                elevation: rd.f64()?,
            };
            let noise_power = rd.f64()?;
            let received = rd.complex(q)?;
            records.push(StoredRecord {
                config_id,
                kind,
                direction,
                noise_power,
                received,
            });
        }
        Ok(RecordFile {
            header: RecordHeader {
                mode,
                law,
                subcarriers,
                repetitions,
                delta_f,
                center_frequency,
                campaign_seed,
                waveform_seed,
                calibration,
            },
            records,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| RisError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let buf = std::fs::read(path).map_err(|e| RisError::io(path, e))?;
        RecordFile::from_bytes(&buf)
    }
}
